//! Randomized trials of the tensor-power rank laws.
//!
//! * `k` nonzero, pairwise non-collinear vectors have linearly independent
//!   `(k-1)`-th tensor powers (rank `k`).
//! * `2m` pairwise non-collinear vectors in a 2-dimensional span have
//!   `(2m-2)`-th powers of rank exactly `2m - 1`.
//!
//! Trials draw small integer vectors and compute ranks exactly; the float
//! rank is recorded alongside for comparison.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::Result;
use crate::par::Execution;
use crate::scalar::Rational;
use crate::tensor::rank_of_powers;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialSummary {
    pub trials: usize,
    pub exact_failures: usize,
    pub float_failures: usize,
    /// Seed stream index of the first exact failure, if any.
    pub first_failure: Option<usize>,
}

impl TrialSummary {
    pub fn passed(&self) -> bool {
        self.exact_failures == 0
    }

    fn to_json(&self) -> Value {
        json!({
            "trials": self.trials,
            "exact_failures": self.exact_failures,
            "float_failures": self.float_failures,
            "first_failure": self.first_failure,
            "passed": self.passed(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LemmaReport {
    pub independence: TrialSummary,
    pub two_dim_span: TrialSummary,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.independence.passed() && self.two_dim_span.passed()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "independence": self.independence.to_json(),
            "two_dim_span": self.two_dim_span.to_json(),
            "passed": self.passed(),
        })
    }
}

fn collinear(a: &[i64], b: &[i64]) -> bool {
    (0..a.len()).all(|i| (0..a.len()).all(|j| a[i] * b[j] == a[j] * b[i]))
}

/// `count` nonzero, pairwise non-collinear integer vectors of length `dim`.
fn draw_vectors(rng: &mut ChaCha8Rng, count: usize, dim: usize, range: i64) -> Vec<Vec<i64>> {
    let mut out: Vec<Vec<i64>> = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<i64> = (0..dim).map(|_| rng.random_range(-range..=range)).collect();
        if v.iter().all(|&x| x == 0) || out.iter().any(|o| collinear(o, &v)) {
            continue;
        }
        out.push(v);
    }
    out
}

fn ranks(vectors: &[Vec<i64>], power: usize) -> Result<(usize, usize)> {
    let exact: Vec<Vec<Rational>> = vectors
        .iter()
        .map(|v| v.iter().map(|&x| Rational::from_integer(x.into())).collect())
        .collect();
    let float: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().map(|&x| x as f64).collect()).collect();
    Ok((rank_of_powers(&exact, power)?, rank_of_powers(&float, power)?))
}

/// One independence trial: `k in 2..=6` vectors over `d in 2..=4` atoms at
/// power `k - 1`. Returns `(k, exact rank, float rank)`.
pub fn independence_trial(seed: u64, index: usize) -> Result<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64);
    let k = rng.random_range(2..=6);
    let d = rng.random_range(2..=4);
    let vectors = draw_vectors(&mut rng, k, d, 6);
    let (exact, float) = ranks(&vectors, k - 1)?;
    Ok((k, exact, float))
}

/// One span trial: `2m` vectors (`m in 2..=4`) of the form `a u + b v` with
/// pairwise non-collinear `(a, b)`, at power `2m - 2`. Returns
/// `(2m - 1, exact rank, float rank)`.
pub fn span_trial(seed: u64, index: usize) -> Result<(usize, usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index as u64 + 1);
    let m = rng.random_range(2..=4);
    let d = rng.random_range(2..=4);
    let span = draw_vectors(&mut rng, 2, d, 4);
    let coeffs = draw_vectors(&mut rng, 2 * m, 2, 5);
    let vectors: Vec<Vec<i64>> = coeffs
        .iter()
        .map(|c| (0..d).map(|i| c[0] * span[0][i] + c[1] * span[1][i]).collect())
        .collect();
    let (exact, float) = ranks(&vectors, 2 * m - 2)?;
    Ok((2 * m - 1, exact, float))
}

fn summarize(results: Vec<Result<(usize, usize, usize)>>) -> Result<TrialSummary> {
    let mut summary = TrialSummary {
        trials: results.len(),
        exact_failures: 0,
        float_failures: 0,
        first_failure: None,
    };
    for (i, r) in results.into_iter().enumerate() {
        let (want, exact, float) = r?;
        if exact != want {
            summary.exact_failures += 1;
            summary.first_failure.get_or_insert(i);
        }
        if float != want {
            summary.float_failures += 1;
        }
    }
    Ok(summary)
}

pub fn run_lemma_trials(trials: usize, seed: u64, execution: Execution) -> Result<LemmaReport> {
    let independence = summarize(execution.map_indices(trials, |i| independence_trial(seed, i)))?;
    let two_dim_span = summarize(execution.map_indices(trials, |i| span_trial(seed, i)))?;
    Ok(LemmaReport {
        independence,
        two_dim_span,
    })
}
