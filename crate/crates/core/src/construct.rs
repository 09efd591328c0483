//! Tight counterexamples: for every `m >= 1`, two distinct `m`-component
//! mixtures whose group laws agree at order `2m - 2` and differ at `2m - 1`.
//!
//! Components live on the segment `mu(e) = e * base_p + (1 - e) * base_q`
//! for `2m` distinct parameters `e`. Their `(2m-2)`-th tensor powers span a
//! space of dimension `2m - 1`, so there is a single linear relation
//! `sum_i alpha_i mu_i^{⊗(2m-2)} = 0` with every `alpha_i != 0`. Splitting
//! the relation by sign and normalizing yields the two mixtures. All
//! arithmetic is exact.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{canonicalize, mixtures_equal, DiscreteMeasure, Mixture, SignedMixture};
use crate::scalar::{powi, Rational, Scalar};
use crate::tensor::{group_law, signed_law, tensor_distance, Layout, MomentTensor, TensorDistance};

/// Denominator of randomly drawn parameters.
const RANDOM_GRID: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CounterexampleSpec {
    m: usize,
    base_p: DiscreteMeasure<Rational>,
    base_q: DiscreteMeasure<Rational>,
    epsilons: Vec<Rational>,
}

impl CounterexampleSpec {
    pub fn new(
        m: usize,
        base_p: DiscreteMeasure<Rational>,
        base_q: DiscreteMeasure<Rational>,
        epsilons: Vec<Rational>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("counterexample spec", "m must be at least 1"));
        }
        if epsilons.len() != 2 * m {
            return Err(Error::invalid(
                "counterexample spec",
                format!("need {} parameters, got {}", 2 * m, epsilons.len()),
            ));
        }
        if base_p.dim() != base_q.dim() {
            return Err(Error::Dimension("base measures over different atom counts".into()));
        }
        if base_p == base_q {
            return Err(Error::invalid("counterexample spec", "base measures coincide"));
        }
        let unit = |e: &Rational| !e.is_negative() && *e <= Rational::one();
        if let Some(e) = epsilons.iter().find(|e| !unit(e)) {
            return Err(Error::invalid(
                "counterexample spec",
                format!("parameter {e} outside [0, 1]"),
            ));
        }
        check_distinct(&epsilons)?;
        Ok(CounterexampleSpec {
            m,
            base_p,
            base_q,
            epsilons,
        })
    }

    /// Equally spaced parameters on two point masses over `d` atoms.
    pub fn standard(m: usize, d: usize) -> Result<Self> {
        let (base_p, base_q) = dirac_bases(d)?;
        Self::new(m, base_p, base_q, default_epsilons(m))
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn base_p(&self) -> &DiscreteMeasure<Rational> {
        &self.base_p
    }

    pub fn base_q(&self) -> &DiscreteMeasure<Rational> {
        &self.base_q
    }

    pub fn epsilons(&self) -> &[Rational] {
        &self.epsilons
    }

    /// The measure at parameter `e` on the segment between the bases.
    pub fn component(&self, e: &Rational) -> Result<DiscreteMeasure<Rational>> {
        DiscreteMeasure::convex_combination(e, &self.base_p, &self.base_q)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "m": self.m,
            "d": self.base_p.dim(),
            "base_p": self.base_p.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "base_q": self.base_q.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "epsilons": self.epsilons.iter().map(Scalar::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Default bases: `base_p` is the point mass at atom 1 and `base_q` the point
/// mass at atom 0, so that a parameter `e` is the atom-1 mass of `mu(e)`.
pub fn dirac_bases(d: usize) -> Result<(DiscreteMeasure<Rational>, DiscreteMeasure<Rational>)> {
    if d < 2 {
        return Err(Error::invalid("counterexample spec", format!("need d >= 2, got {d}")));
    }
    Ok((DiscreteMeasure::dirac(d, 1)?, DiscreteMeasure::dirac(d, 0)?))
}

fn check_distinct(epsilons: &[Rational]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for e in epsilons {
        if !seen.insert(e.clone()) {
            return Err(Error::invalid("parameters", format!("{e} is repeated")));
        }
    }
    Ok(())
}

/// `e_i = i / (2m - 1)` for `i = 0..2m`.
pub fn default_epsilons(m: usize) -> Vec<Rational> {
    let den = (2 * m).saturating_sub(1).max(1) as i64;
    (0..2 * m as i64).map(|i| Rational::from_ratio(i, den)).collect()
}

/// Coordinates of `mu(e_i)^{⊗degree}` in the monomial basis of the segment's
/// span: row `r`, column `i` holds `e_i^(degree - r) * (1 - e_i)^r`.
pub fn veronese_matrix(epsilons: &[Rational], degree: usize) -> Vec<Vec<Rational>> {
    (0..=degree)
        .map(|r| {
            epsilons
                .iter()
                .map(|e| powi(e, degree - r) * powi(&(Rational::one() - e), r))
                .collect()
        })
        .collect()
}

/// The unique (up to scale) linear relation among the `(2m-2)`-th powers,
/// normalized so that the first coefficient is `-1`.
pub fn nullspace_coefficients(epsilons: &[Rational]) -> Result<Vec<Rational>> {
    let len = epsilons.len();
    if len < 2 || !len.is_multiple_of(2) {
        return Err(Error::invalid(
            "parameters",
            format!("need an even number >= 2 of parameters, got {len}"),
        ));
    }
    check_distinct(epsilons)?;
    let vm = veronese_matrix(epsilons, len - 2);
    let mut basis = linalg::nullspace(&vm);
    if basis.len() != 1 {
        return Err(Error::Internal(format!(
            "nullspace has dimension {}, expected 1",
            basis.len()
        )));
    }
    let mut alpha = basis.pop().unwrap();
    if alpha.iter().any(Zero::is_zero) {
        return Err(Error::Internal("nullspace vector has a zero coefficient".into()));
    }
    let scale = -alpha[0].clone();
    for a in alpha.iter_mut() {
        *a = a.clone() / scale.clone();
    }
    Ok(alpha)
}

/// The two mixtures with their witnesses and exact certificates.
#[derive(Debug, Clone)]
pub struct CounterexamplePair {
    pub spec: CounterexampleSpec,
    /// Left side: components with negative coefficients.
    pub p: Mixture<Rational>,
    /// Right side: components with positive coefficients.
    pub q: Mixture<Rational>,
    pub alpha: Vec<Rational>,
    pub r: Rational,
    /// `|alpha_i| / r`, in parameter order.
    pub betas: Vec<Rational>,
    pub p_indices: Vec<usize>,
    pub q_indices: Vec<usize>,
    /// Distance between the order-`(2m-2)` laws.
    pub residual_equal: TensorDistance<Rational>,
    /// Distance between the order-`(2m-1)` laws.
    pub gap: TensorDistance<Rational>,
    /// The common order-`(2m-2)` law, compressed.
    pub shared_law: MomentTensor<Rational>,
}

impl CounterexamplePair {
    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// Order at which the two laws coincide.
    pub fn equal_order(&self) -> usize {
        2 * self.spec.m - 2
    }

    /// Order at which the two laws first differ.
    pub fn gap_order(&self) -> usize {
        2 * self.spec.m - 1
    }

    pub fn to_json(&self) -> Value {
        let rats = |xs: &[Rational]| xs.iter().map(Scalar::to_json).collect::<Vec<_>>();
        json!({
            "spec": self.spec.to_json(),
            "alpha": rats(&self.alpha),
            "r": self.r.to_json(),
            "betas": rats(&self.betas),
            "p_indices": self.p_indices,
            "q_indices": self.q_indices,
            "left": self.p.to_json(),
            "right": self.q.to_json(),
            "equal_order": self.equal_order(),
            "gap_order": self.gap_order(),
            "residual_equal": self.residual_equal.max_abs.to_json(),
            "gap": self.gap.max_abs.to_json(),
            "gap_at": self.gap.argmax,
            "gap_l2": self.gap.l2(),
            "shared_law": self.shared_law.to_json(),
        })
    }
}

/// Splits a nullspace witness by sign and normalizes both sides into
/// mixtures, then certifies the law equality and the gap exactly.
pub fn split_and_normalize(spec: &CounterexampleSpec, alpha: &[Rational]) -> Result<CounterexamplePair> {
    let m = spec.m;
    if alpha.len() != 2 * m {
        return Err(Error::invalid(
            "witness",
            format!("need {} coefficients, got {}", 2 * m, alpha.len()),
        ));
    }
    let components = spec
        .epsilons
        .iter()
        .map(|e| spec.component(e))
        .collect::<Result<Vec<_>>>()?;

    let relation = signed_law(
        &SignedMixture::new(alpha.to_vec(), components.clone())?,
        2 * m - 2,
        Layout::Compressed,
    )?;
    if relation.entries().iter().any(|x| !x.is_zero()) {
        return Err(Error::invalid("witness", "coefficients are not a linear relation"));
    }

    let p_indices: Vec<usize> = (0..2 * m).filter(|&i| alpha[i].is_negative()).collect();
    let q_indices: Vec<usize> = (0..2 * m).filter(|&i| alpha[i].is_positive()).collect();
    if p_indices.len() != m || q_indices.len() != m {
        return Err(Error::SignSplit {
            m,
            negative: p_indices.len(),
            positive: q_indices.len(),
        });
    }
    let r: Rational = p_indices.iter().map(|&i| -alpha[i].clone()).sum();
    let r_pos: Rational = q_indices.iter().map(|&i| alpha[i].clone()).sum();
    if r != r_pos {
        return Err(Error::Internal(format!("side masses differ: {r} vs {r_pos}")));
    }
    let betas: Vec<Rational> = alpha.iter().map(|a| a.abs() / r.clone()).collect();

    let side = |idx: &[usize]| {
        canonicalize(
            idx.iter().map(|&i| betas[i].clone()).collect(),
            idx.iter().map(|&i| components[i].clone()).collect(),
            0.0,
        )
    };
    let p = side(&p_indices)?;
    let q = side(&q_indices)?;
    if mixtures_equal(&p, &q, 0.0)? {
        return Err(Error::Internal("both sides are the same mixture".into()));
    }

    let law_p = group_law(&p, 2 * m - 2, Layout::Compressed)?;
    let law_q = group_law(&q, 2 * m - 2, Layout::Compressed)?;
    let residual_equal = tensor_distance(&law_p, &law_q)?;
    let gap = tensor_distance(
        &group_law(&p, 2 * m - 1, Layout::Compressed)?,
        &group_law(&q, 2 * m - 1, Layout::Compressed)?,
    )?;
    if !residual_equal.max_abs.is_zero() {
        return Err(Error::Internal(format!(
            "order-{} laws differ by {}",
            2 * m - 2,
            residual_equal.max_abs
        )));
    }
    if !gap.max_abs.is_positive() {
        return Err(Error::Internal(format!("order-{} laws coincide", 2 * m - 1)));
    }

    Ok(CounterexamplePair {
        spec: spec.clone(),
        p,
        q,
        alpha: alpha.to_vec(),
        r,
        betas,
        p_indices,
        q_indices,
        residual_equal,
        gap,
        shared_law: law_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstructOptions {
    pub m: usize,
    pub d: usize,
    /// Draws random distinct parameters when set.
    pub seed: Option<u64>,
    /// Draws random distinct full-support bases (seeded by `seed`, or 0).
    pub random_base: bool,
}

impl ConstructOptions {
    pub fn standard(m: usize) -> Self {
        ConstructOptions {
            m,
            d: 2,
            seed: None,
            random_base: false,
        }
    }
}

/// Builds and certifies a counterexample pair.
pub fn build_counterexample(opts: ConstructOptions) -> Result<CounterexamplePair> {
    let ConstructOptions {
        m,
        d,
        seed,
        random_base,
    } = opts;
    if m == 0 {
        return Err(Error::invalid("counterexample spec", "m must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
    let epsilons = match seed {
        Some(_) => random_epsilons(&mut rng, m),
        None => default_epsilons(m),
    };
    let (base_p, base_q) = if random_base {
        random_bases(&mut rng, d)?
    } else {
        dirac_bases(d)?
    };
    let spec = CounterexampleSpec::new(m, base_p, base_q, epsilons)?;
    let alpha = nullspace_coefficients(&spec.epsilons)?;
    split_and_normalize(&spec, &alpha)
}

fn random_epsilons(rng: &mut ChaCha8Rng, m: usize) -> Vec<Rational> {
    let mut picked = BTreeSet::new();
    let mut out = Vec::with_capacity(2 * m);
    while out.len() < 2 * m {
        let k = rng.random_range(0..=RANDOM_GRID);
        if picked.insert(k) {
            out.push(Rational::from_ratio(k as i64, RANDOM_GRID as i64));
        }
    }
    out
}

fn random_bases(rng: &mut ChaCha8Rng, d: usize) -> Result<(DiscreteMeasure<Rational>, DiscreteMeasure<Rational>)> {
    if d < 2 {
        return Err(Error::invalid("counterexample spec", format!("need d >= 2, got {d}")));
    }
    let mut draw = || {
        let raw: Vec<i64> = (0..d).map(|_| rng.random_range(1..=64)).collect();
        let total: i64 = raw.iter().sum();
        DiscreteMeasure::new(raw.iter().map(|&x| Rational::from_ratio(x, total)).collect())
    };
    let a = draw()?;
    loop {
        let b = draw()?;
        if b != a {
            return Ok((a, b));
        }
    }
}
