//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mixident::construct::{build_counterexample, ConstructOptions, CounterexamplePair};
use mixident::identify::{confusability_search, LawObjective, SearchConfig};
use mixident::lemma::run_lemma_trials;
use mixident::simulate::{bernoulli_reduce, empirical_moment, sample_groups, sum_pushforward};
use mixident::tensor::binomial;
use mixident::{
    group_law, marginalize, mixtures_equal, random_mixture, tensor_distance, Execution, Layout, Mixture, Rational,
    Scalar,
};
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from_ratio(n, d)
}

fn pair(m: usize) -> CounterexamplePair {
    build_counterexample(ConstructOptions::standard(m)).expect("construction succeeds")
}

fn within_budget(start: Instant, budget: Duration) -> Outcome {
    let spent = start.elapsed();
    if spent <= budget {
        Ok(format!("{:.2}s", spent.as_secs_f64()))
    } else {
        Err(format!(
            "took {:.2}s, budget {:.0}s",
            spent.as_secs_f64(),
            budget.as_secs_f64()
        ))
    }
}

/// Alternating binomial weights, first entry -1.
fn binomial_alpha(m: usize) -> Vec<Rational> {
    (0..2 * m)
        .map(|i| {
            let c = Rational::from_integer((binomial(2 * m - 1, i) as u64).into());
            if i % 2 == 0 {
                -c
            } else {
                c
            }
        })
        .collect()
}

fn tight_counterexample() -> Outcome {
    let start = Instant::now();
    for m in 1..=6 {
        let pair = pair(m);
        ensure!(
            pair.p.order() == m && pair.q.order() == m,
            "m={m}: orders {} and {}",
            pair.p.order(),
            pair.q.order()
        );
        ensure!(!mixtures_equal(&pair.p, &pair.q, 0.0).unwrap(), "m={m}: sides coincide");
        ensure!(pair.alpha == binomial_alpha(m), "m={m}: alpha {:?}", pair.alpha);
        let r = Rational::from_integer(num_bigint::BigInt::from(1u64 << (2 * m - 2)));
        ensure!(pair.r == r, "m={m}: r = {}", pair.r);

        let lo = 2 * m - 2;
        let equal = tensor_distance(
            &group_law(&pair.p, lo, Layout::Compressed).unwrap(),
            &group_law(&pair.q, lo, Layout::Compressed).unwrap(),
        )
        .unwrap();
        ensure!(equal.max_abs.is_zero(), "m={m}: residual {}", equal.max_abs);
        let gap = tensor_distance(
            &group_law(&pair.p, lo + 1, Layout::Compressed).unwrap(),
            &group_law(&pair.q, lo + 1, Layout::Compressed).unwrap(),
        )
        .unwrap();
        ensure!(gap.max_abs > Rational::zero(), "m={m}: no gap");
        ensure!(
            pair.residual_equal.max_abs.is_zero() && pair.gap.max_abs == gap.max_abs,
            "m={m}: stored distances disagree"
        );
    }

    let two = pair(2);
    ensure!(
        two.alpha == vec![q(-1, 1), q(3, 1), q(-3, 1), q(1, 1)],
        "alpha {:?}",
        two.alpha
    );
    ensure!(
        two.betas == vec![q(1, 4), q(3, 4), q(3, 4), q(1, 4)],
        "betas {:?}",
        two.betas
    );
    ensure!(two.gap.max_abs == q(1, 18), "gap {}", two.gap.max_abs);
    // Third moments of the atom-1 mass: 3/4 (2/3)^3 and 3/4 (1/3)^3 + 1/4.
    let vp = group_law(&two.p, 3, Layout::Dense).unwrap();
    let vq = group_law(&two.q, 3, Layout::Dense).unwrap();
    ensure!(
        vp.get(&[1, 1, 1]).unwrap() == q(2, 9),
        "P(1,1,1) = {}",
        vp.get(&[1, 1, 1]).unwrap()
    );
    ensure!(
        vq.get(&[1, 1, 1]).unwrap() == q(5, 18),
        "Q(1,1,1) = {}",
        vq.get(&[1, 1, 1]).unwrap()
    );

    within_budget(start, Duration::from_secs(5)).map(|t| format!("m = 1..6 exact, m=2 reference values match, {t}"))
}

fn identifiability_search() -> Outcome {
    let start = Instant::now();
    let mut hits = Vec::new();
    let mut smallest = f64::INFINITY;
    for i in 0..50u64 {
        let d = 2 + (i % 2) as usize;
        let m = 1 + ((i / 2) % 3) as usize;
        let target = random_mixture(d, m, 1000 + i).unwrap();
        let cfg = SearchConfig {
            seed: i,
            ..SearchConfig::default()
        };
        let found = confusability_search(&target, 2 * m - 1, &cfg).unwrap();
        smallest = smallest.min(found.objective);
        if found.objective <= 1e-6 {
            hits.push(format!(
                "#{i} (d={d}, m={m}): {:.2e} at separation {:.3}",
                found.objective, found.separation
            ));
        }
    }

    let mut misses = Vec::new();
    for m in 1..=4 {
        let pair = pair(m);
        for (side, mix) in [("left", &pair.p), ("right", &pair.q)] {
            let target = mix.convert::<f64>().unwrap();
            let found = confusability_search(&target, 2 * m - 2, &SearchConfig::default()).unwrap();
            if found.objective > 1e-8 {
                misses.push(format!("m={m} {side}: {:.2e}", found.objective));
            }
        }
    }

    let timing = within_budget(start, Duration::from_secs(600));
    let mut problems = Vec::new();
    if !hits.is_empty() {
        problems.push(format!(
            "{} of 50 random targets reached objective <= 1e-6 at n = 2m-1: {}",
            hits.len(),
            hits.join("; ")
        ));
    }
    if !misses.is_empty() {
        problems.push(format!(
            "constructed pairs above 1e-8 at n = 2m-2: {}",
            misses.join("; ")
        ));
    }
    if let Err(e) = &timing {
        problems.push(e.clone());
    }
    if problems.is_empty() {
        Ok(format!(
            "smallest objective at n = 2m-1 was {smallest:.2e}; pairs m <= 4 reached <= 1e-8; {}",
            timing.unwrap()
        ))
    } else {
        Err(problems.join(" | "))
    }
}

fn lemma_ranks() -> Outcome {
    let report = run_lemma_trials(200, 2024, Execution::default()).unwrap();
    ensure!(
        report.independence.exact_failures == 0,
        "independence failures: {:?}",
        report.independence
    );
    ensure!(
        report.two_dim_span.exact_failures == 0,
        "span failures: {:?}",
        report.two_dim_span
    );
    Ok(format!(
        "200 + 200 trials, 0 exact failures (float rank disagreed {} + {} times)",
        report.independence.float_failures, report.two_dim_span.float_failures
    ))
}

fn marginal_consistency() -> Outcome {
    let mut worst = 0.0_f64;
    for i in 0..100u64 {
        let d = 2 + (i % 3) as usize;
        let m = 1 + ((i / 3) % 4) as usize;
        let p = random_mixture(d, m, 5000 + i).unwrap();
        let exact = p.convert::<Rational>().unwrap();
        for layout in [Layout::Dense, Layout::Compressed] {
            for n in 0..=5 {
                let full = group_law(&p, n, layout).unwrap();
                let full_exact = group_law(&exact, n, layout).unwrap();
                for k in 0..=n {
                    let dist =
                        tensor_distance(&marginalize(&full, k).unwrap(), &group_law(&p, k, layout).unwrap()).unwrap();
                    worst = worst.max(dist.max_abs);
                    ensure!(dist.max_abs <= 1e-12, "#{i} {layout:?} n={n} q={k}: {:e}", dist.max_abs);
                    let marg = marginalize(&full_exact, k).unwrap();
                    ensure!(
                        marg == group_law(&exact, k, layout).unwrap(),
                        "#{i} {layout:?} n={n} q={k}: exact marginal differs"
                    );
                }
            }
        }
    }
    Ok(format!(
        "100 mixtures, both layouts, worst float deviation {worst:.1e}, rational identical"
    ))
}

/// Squared Frobenius distance over the dense index set, evaluated directly.
fn dense_objective(target: &[f64], n: usize, w: &[f64], c: &[Vec<f64>]) -> f64 {
    let d = c[0].len();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    for (flat, t) in target.iter().enumerate() {
        let mut rest = flat;
        for slot in idx.iter_mut().rev() {
            *slot = rest % d;
            rest /= d;
        }
        let v: f64 = w
            .iter()
            .zip(c)
            .map(|(wj, cj)| wj * idx.iter().map(|&a| cj[a]).product::<f64>())
            .sum();
        total += (v - t) * (v - t);
    }
    total
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-6;
    let mut worst = 0.0_f64;
    for i in 0..50u64 {
        let d = rng.random_range(2..=3);
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let target = random_mixture(d, m, 9000 + i).unwrap();
        let dense_target = group_law(&target, n, Layout::Dense).unwrap().entries().to_vec();
        let alt = random_mixture(d, rng.random_range(1..=m), 9500 + i).unwrap();
        let w = alt.weights().to_vec();
        let c: Vec<Vec<f64>> = alt.components().iter().map(|x| x.probs().to_vec()).collect();

        let eval = LawObjective::new(&target, n).unwrap().evaluate(&w, &c);
        let f0 = dense_objective(&dense_target, n, &w, &c);
        ensure!(
            (eval.value - f0).abs() <= 1e-12 * f0.max(1.0),
            "#{i}: value {} vs {}",
            eval.value,
            f0
        );

        let mut analytic = Vec::new();
        let mut numeric = Vec::new();
        for j in 0..w.len() {
            let (mut wp, mut wm) = (w.clone(), w.clone());
            wp[j] += h;
            wm[j] -= h;
            numeric.push(
                (dense_objective(&dense_target, n, &wp, &c) - dense_objective(&dense_target, n, &wm, &c)) / (2.0 * h),
            );
            analytic.push(eval.grad_weights[j]);
            for a in 0..d {
                let (mut cp, mut cm) = (c.clone(), c.clone());
                cp[j][a] += h;
                cm[j][a] -= h;
                numeric.push(
                    (dense_objective(&dense_target, n, &w, &cp) - dense_objective(&dense_target, n, &w, &cm))
                        / (2.0 * h),
                );
                analytic.push(eval.grad_components[j][a]);
            }
        }
        let scale = analytic.iter().chain(&numeric).fold(0.0_f64, |acc, x| acc.max(x.abs()));
        let err = analytic
            .iter()
            .zip(&numeric)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        let rel = if scale > 0.0 { err / scale } else { 0.0 };
        worst = worst.max(rel);
        ensure!(rel <= 1e-4, "#{i} (d={d}, n={n}): relative error {rel:.2e}");
    }
    Ok(format!("50 instances, worst relative error {worst:.1e}"))
}

fn binomial_bridge() -> Outcome {
    for m in 1..=4 {
        let pair = pair(m);
        let lo = 2 * m - 2;
        for n in [lo, lo + 1] {
            let bp = bernoulli_reduce(&pair.p, n).unwrap();
            let bq = bernoulli_reduce(&pair.q, n).unwrap();
            ensure!((n == lo) == (bp == bq), "m={m} n={n}: pmf equality is {}", bp == bq);
            ensure!(
                bp.iter().fold(Rational::zero(), |a, x| a + x) == Rational::one(),
                "m={m} n={n}: pmf mass"
            );
            for (mix, pmf) in [(&pair.p, &bp), (&pair.q, &bq)] {
                for layout in [Layout::Dense, Layout::Compressed] {
                    let pushed = sum_pushforward(&group_law(mix, n, layout).unwrap()).unwrap();
                    ensure!(&pushed == pmf, "m={m} n={n} {layout:?}: pushforward differs");
                }
            }
        }
    }
    Ok("m = 1..4: pmfs equal at 2m-2, differ at 2m-1, pushforward exact".to_string())
}

fn simulation_coherence() -> Outcome {
    let start = Instant::now();
    let pair = pair(2);
    let p: Mixture<f64> = pair.p.convert().unwrap();
    let qm: Mixture<f64> = pair.q.convert().unwrap();
    let groups = 100_000;

    let ep = empirical_moment::<f64>(
        &sample_groups(&p, 2, groups, 11, Execution::default()).unwrap(),
        Execution::default(),
    )
    .unwrap();
    let eq = empirical_moment::<f64>(
        &sample_groups(&qm, 2, groups, 12, Execution::default()).unwrap(),
        Execution::default(),
    )
    .unwrap();
    let truth = group_law(&p, 2, Layout::Dense).unwrap();
    let between = tensor_distance(&ep, &eq).unwrap().max_abs;
    let to_truth = tensor_distance(&ep, &truth)
        .unwrap()
        .max_abs
        .max(tensor_distance(&eq, &truth).unwrap().max_abs);
    ensure!(between <= 0.02, "n=2 empirical laws differ by {between:.4}");
    ensure!(to_truth <= 0.02, "n=2 empirical law off the true law by {to_truth:.4}");

    let ep3 = empirical_moment::<f64>(
        &sample_groups(&p, 3, groups, 13, Execution::default()).unwrap(),
        Execution::default(),
    )
    .unwrap();
    let eq3 = empirical_moment::<f64>(
        &sample_groups(&qm, 3, groups, 14, Execution::default()).unwrap(),
        Execution::default(),
    )
    .unwrap();
    let gap = (ep3.get(&[1, 1, 1]).unwrap() - eq3.get(&[1, 1, 1]).unwrap()).abs();
    ensure!(gap >= 1.0 / 18.0 - 0.02, "n=3 (1,1,1) gap {gap:.4}");

    within_budget(start, Duration::from_secs(30))
        .map(|t| format!("n=2 spread {between:.4}, to truth {to_truth:.4}; n=3 gap {gap:.4}; {t}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 tight counterexample", tight_counterexample),
        ("2 identifiability search", identifiability_search),
        ("3 tensor-power rank laws", lemma_ranks),
        ("4 marginal consistency", marginal_consistency),
        ("5 gradient correctness", gradient_check),
        ("6 binomial bridge", binomial_bridge),
        ("7 simulation coherence", simulation_coherence),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("{} of 7 criteria passed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
