//! Identifiability checks.
//!
//! * [`check_equal_laws`] compares two group laws at a given order.
//! * [`reduce_common`] strips components shared by two mixtures.
//! * [`independence_certificate`] proves `V_n(P) != V_n(Q)` for mixtures
//!   without shared components by showing that the `n`-th tensor powers of
//!   all component densities are linearly independent.
//! * [`confusability_search`] looks numerically for a different mixture of
//!   no larger order with (nearly) the same law.

use std::collections::VecDeque;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::assign;
use crate::error::{Error, Result};
use crate::measures::{canonicalize, dirichlet, separation, DiscreteMeasure, Mixture};
use crate::par::Execution;
use crate::scalar::Scalar;
use crate::tensor::{group_law, rank_of_powers, tensor_distance, DensityContext, Layout, SymBasis, TensorDistance};

#[derive(Debug, Clone, PartialEq)]
pub struct LawVerdict<T> {
    pub n: usize,
    pub equal: bool,
    pub distance: TensorDistance<T>,
}

impl<T: Scalar> LawVerdict<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "n": self.n,
            "verdict": if self.equal { "equal" } else { "different" },
            "max_abs": self.distance.max_abs.to_json(),
            "l2": self.distance.l2(),
            "argmax": self.distance.argmax,
        })
    }
}

/// Equal iff the max-abs distance between `V_n(P)` and `V_n(Q)` is `<= tol`.
pub fn check_equal_laws<T: Scalar>(p: &Mixture<T>, q: &Mixture<T>, n: usize, tol: f64) -> Result<LawVerdict<T>> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} vs {} atoms", p.dim(), q.dim())));
    }
    let distance = tensor_distance(
        &group_law(p, n, Layout::Compressed)?,
        &group_law(q, n, Layout::Compressed)?,
    )?;
    Ok(LawVerdict {
        n,
        equal: distance.max_abs.within(&T::zero(), tol),
        distance,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharedComponent<T> {
    pub component: DiscreteMeasure<T>,
    /// Mass subtracted from both sides.
    pub mass: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reduction<T> {
    /// Renormalized remainder of the left mixture; `None` when nothing is left.
    pub left: Option<Mixture<T>>,
    pub right: Option<Mixture<T>>,
    pub shared: Vec<SharedComponent<T>>,
    /// Both sides vanished: the mixtures are identical up to `tol`.
    pub identical: bool,
}

impl<T: Scalar> Reduction<T> {
    pub fn to_json(&self) -> Value {
        json!({
            "identical": self.identical,
            "left": self.left.as_ref().map(Mixture::to_json),
            "right": self.right.as_ref().map(Mixture::to_json),
            "shared": self.shared.iter().map(|s| json!({
                "component": s.component.probs().iter().map(Scalar::to_json).collect::<Vec<_>>(),
                "mass": s.mass.to_json(),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Subtracts the smaller weight of every component common to both mixtures
/// (within `tol`, max-abs) and renormalizes what remains.
pub fn reduce_common<T: Scalar>(p: &Mixture<T>, q: &Mixture<T>, tol: f64) -> Result<Reduction<T>> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} vs {} atoms", p.dim(), q.dim())));
    }
    let mut left: Vec<T> = p.weights().to_vec();
    let mut right: Vec<T> = q.weights().to_vec();
    let mut used = vec![false; q.order()];
    let mut shared = Vec::new();

    for (i, pc) in p.components().iter().enumerate() {
        let nearest = q
            .components()
            .iter()
            .enumerate()
            .filter(|(j, qc)| !used[*j] && pc.max_abs_distance(qc).within(&T::zero(), tol))
            .min_by(|a, b| {
                pc.max_abs_distance(a.1)
                    .partial_cmp(&pc.max_abs_distance(b.1))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .map(|(j, _)| j);
        if let Some(j) = nearest {
            used[j] = true;
            let mass = if left[i] <= right[j] {
                left[i].clone()
            } else {
                right[j].clone()
            };
            left[i] = left[i].clone() - mass.clone();
            right[j] = right[j].clone() - mass.clone();
            shared.push(SharedComponent {
                component: pc.clone(),
                mass,
            });
        }
    }

    let remainder = |weights: Vec<T>, comps: &[DiscreteMeasure<T>]| -> Result<Option<Mixture<T>>> {
        let (w, c): (Vec<T>, Vec<DiscreteMeasure<T>>) = weights
            .into_iter()
            .zip(comps.iter().cloned())
            .filter(|(w, _)| !w.within(&T::zero(), T::MASS_TOL))
            .unzip();
        if w.is_empty() {
            Ok(None)
        } else {
            canonicalize(w, c, T::MERGE_TOL).map(Some)
        }
    };
    let left = remainder(left, p.components())?;
    let right = remainder(right, q.components())?;
    let identical = left.is_none() || right.is_none();
    Ok(Reduction {
        left: if identical { None } else { left },
        right: if identical { None } else { right },
        shared,
        identical,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertificateVerdict {
    CertifiedDistinct,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub verdict: CertificateVerdict,
    pub n: usize,
    pub rank: usize,
    /// `l + m`, the number of density vectors.
    pub expected_rank: usize,
    /// `2 max(l, m) - 1`, the order from which full rank is guaranteed.
    pub sufficient_order: usize,
    pub collinear_pair: Option<(usize, usize)>,
}

impl Certificate {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": match self.verdict {
                CertificateVerdict::CertifiedDistinct => "certified_distinct",
                CertificateVerdict::Inconclusive => "inconclusive",
            },
            "n": self.n,
            "rank": self.rank,
            "expected_rank": self.expected_rank,
            "sufficient_order": self.sufficient_order,
            "collinear_pair": self.collinear_pair,
        })
    }
}

/// Rank certificate for `V_n(P) != V_n(Q)`.
///
/// Densities of all `l + m` components are taken against their sum `xi`.
/// If their `n`-th tensor powers are linearly independent, no nontrivial
/// combination `sum w_i p_i^{⊗n} - sum v_j q_j^{⊗n}` vanishes, so the laws
/// differ. Certified only when the rank is full and `n >= 2 max(l, m) - 1`.
pub fn independence_certificate<T: Scalar>(p: &Mixture<T>, q: &Mixture<T>, n: usize) -> Result<Certificate> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} vs {} atoms", p.dim(), q.dim())));
    }
    for a in p.components() {
        if q.components()
            .iter()
            .any(|b| a.max_abs_distance(b).within(&T::zero(), T::MERGE_TOL))
        {
            return Err(Error::SharedComponents);
        }
    }
    let measures: Vec<&DiscreteMeasure<T>> = p.components().iter().chain(q.components()).collect();
    let ctx = DensityContext::new(&measures)?;
    let expected_rank = measures.len();
    let sufficient_order = 2 * p.order().max(q.order()) - 1;
    let collinear_pair = ctx.collinear_pair();
    let rank = if n == 0 { 1 } else { rank_of_powers(ctx.densities(), n)? };
    let verdict = if collinear_pair.is_none() && rank == expected_rank && n >= sufficient_order {
        CertificateVerdict::CertifiedDistinct
    } else {
        CertificateVerdict::Inconclusive
    };
    Ok(Certificate {
        verdict,
        n,
        rank,
        expected_rank,
        sufficient_order,
        collinear_pair,
    })
}

/// Squared Euclidean distance between a fixed target law and the law of a
/// candidate mixture, with its analytic gradient.
///
/// Evaluated in compressed coordinates with multiplicity weights, which
/// equals the dense Frobenius distance.
#[derive(Debug, Clone)]
pub struct LawObjective {
    basis: SymBasis,
    target: Vec<f64>,
    mults: Vec<f64>,
}

/// Value and gradient of [`LawObjective`] at a candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub grad_weights: Vec<f64>,
    pub grad_components: Vec<Vec<f64>>,
}

impl LawObjective {
    pub fn new(target: &Mixture<f64>, n: usize) -> Result<Self> {
        let basis = SymBasis::new(target.dim(), n);
        let law = group_law(target, n, Layout::Compressed)?;
        Ok(Self::from_parts(basis, law.entries().to_vec()))
    }

    fn from_parts(basis: SymBasis, target: Vec<f64>) -> Self {
        let mults = basis.multiplicities().iter().map(|&m| m as f64).collect();
        LawObjective { basis, target, mults }
    }

    pub fn order(&self) -> usize {
        self.basis.order()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn residual(&self, weights: &[f64], components: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let monomials: Vec<Vec<f64>> = components.iter().map(|c| self.basis.monomials(c)).collect();
        let mut residual = self.target.clone();
        for (w, mon) in weights.iter().zip(&monomials) {
            for (r, x) in residual.iter_mut().zip(mon) {
                *r -= w * x;
            }
        }
        (residual, monomials)
    }

    pub fn value(&self, weights: &[f64], components: &[Vec<f64>]) -> f64 {
        let (residual, _) = self.residual(weights, components);
        residual.iter().zip(&self.mults).map(|(r, m)| m * r * r).sum()
    }

    /// `f = ||V_n(P) - sum_j w_j mu_j^{⊗n}||^2` and its partials in the raw
    /// (unconstrained) coordinates.
    ///
    /// `df/dw_j = -2 <R, mu_j^{⊗n}>` and
    /// `df/dmu_j[a] = -2 n w_j <R, mu_j^{⊗(n-1)} ⊗ e_a>`, evaluated per
    /// multiset as `c_a * prod_b mu_j[b]^(c_b - [a = b])`.
    pub fn evaluate(&self, weights: &[f64], components: &[Vec<f64>]) -> ObjectiveEval {
        let (residual, monomials) = self.residual(weights, components);
        let weighted: Vec<f64> = residual.iter().zip(&self.mults).map(|(r, m)| m * r).collect();
        let value = weighted.iter().zip(&residual).map(|(wr, r)| wr * r).sum();
        let n = self.basis.order();
        let d = self.basis.dim();

        let grad_weights = monomials
            .iter()
            .map(|mon| -2.0 * mon.iter().zip(&weighted).map(|(x, wr)| x * wr).sum::<f64>())
            .collect();

        let grad_components = components
            .iter()
            .zip(weights)
            .map(|(c, &w)| {
                let powers: Vec<Vec<f64>> = c
                    .iter()
                    .map(|&x| {
                        let mut p = vec![1.0; n + 1];
                        for k in 1..=n {
                            p[k] = p[k - 1] * x;
                        }
                        p
                    })
                    .collect();
                let mut g = vec![0.0; d];
                for (counts, wr) in self.basis.counts().iter().zip(&weighted) {
                    for a in 0..d {
                        if counts[a] == 0 {
                            continue;
                        }
                        let partial = (0..d).fold(counts[a] as f64, |acc, b| {
                            let k = if a == b { counts[b] - 1 } else { counts[b] };
                            acc * powers[b][k]
                        });
                        g[a] += partial * wr;
                    }
                }
                g.iter().map(|x| -2.0 * w * x).collect()
            })
            .collect();

        ObjectiveEval {
            value,
            grad_weights,
            grad_components,
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i as f64 + 1.0);
        if u - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub restarts: usize,
    /// Exclusion radius: alternatives closer than this to the target (in
    /// permutation-aware separation) do not count as different.
    pub delta: f64,
    pub seed: u64,
    pub iterations: usize,
    /// Weight of the quadratic penalty on entering the exclusion ball.
    pub penalty: f64,
    pub execution: Execution,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            restarts: 64,
            delta: 0.05,
            seed: 0,
            iterations: 500,
            penalty: 10.0,
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best_alternative: Mixture<f64>,
    /// Squared l2 distance between the target law and the alternative's law.
    pub objective: f64,
    pub separation: f64,
    pub restarts_used: usize,
    pub best_restart: usize,
    pub seed: u64,
}

impl SearchResult {
    pub fn to_json(&self) -> Value {
        json!({
            "best_alternative": self.best_alternative.to_json(),
            "objective": self.objective,
            "separation": self.separation,
            "restarts_used": self.restarts_used,
            "best_restart": self.best_restart,
            "seed": self.seed,
        })
    }
}

struct Candidate {
    weights: Vec<f64>,
    components: Vec<Vec<f64>>,
}

impl Candidate {
    fn project(&mut self) {
        project_simplex(&mut self.weights);
        for c in &mut self.components {
            project_simplex(c);
        }
    }

    fn to_mixture(&self) -> Option<Mixture<f64>> {
        let comps = self
            .components
            .iter()
            .map(|c| DiscreteMeasure::new(c.clone()))
            .collect::<Result<Vec<_>>>()
            .ok()?;
        canonicalize(self.weights.clone(), comps, f64::MERGE_TOL).ok()
    }
}

/// Separation on raw candidate coordinates with its subgradient for the
/// optimal assignment. Zero-weight candidate components count as absent.
fn raw_separation(cand: &Candidate, target: &Mixture<f64>) -> (f64, Vec<f64>, Vec<Vec<f64>>) {
    let k = cand.weights.len();
    let m = target.order();
    let size = k.max(m);
    let pair_cost = |j: usize, i: usize| -> f64 {
        let w = cand.weights[j];
        if w <= 0.0 {
            return target.weights()[i];
        }
        let comp = &cand.components[j];
        let dist = comp
            .iter()
            .zip(target.components()[i].probs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        dist + (w - target.weights()[i]).abs()
    };
    let cost: Vec<Vec<f64>> = (0..size)
        .map(|j| {
            (0..size)
                .map(|i| match (j < k, i < m) {
                    (true, true) => pair_cost(j, i),
                    (false, true) => target.weights()[i],
                    (true, false) => cand.weights[j],
                    (false, false) => 0.0,
                })
                .collect()
        })
        .collect();
    let (assignment, total) = assign::min_cost_assignment(&cost);

    let mut gw = vec![0.0; k];
    let mut gc = vec![vec![0.0; target.dim()]; k];
    for j in 0..k {
        let i = assignment[j];
        if cand.weights[j] <= 0.0 {
            continue;
        }
        if i >= m {
            gw[j] = 1.0;
            continue;
        }
        gw[j] = (cand.weights[j] - target.weights()[i]).signum();
        let (a, diff) = cand.components[j]
            .iter()
            .zip(target.components()[i].probs())
            .map(|(x, y)| x - y)
            .enumerate()
            .fold(
                (0, 0.0),
                |(ba, bd), (a, d)| if d.abs() > f64::abs(bd) { (a, d) } else { (ba, bd) },
            );
        gc[j][a] = diff.signum();
    }
    (total, gw, gc)
}

const NONMONOTONE_WINDOW: usize = 20;

struct RestartOutcome {
    objective: f64,
    separation: f64,
    mixture: Option<Mixture<f64>>,
}

fn run_restart(
    objective: &LawObjective,
    target: &Mixture<f64>,
    config: &SearchConfig,
    restart: usize,
) -> RestartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(restart as u64);
    let m = target.order();
    // Restarts 1..m-1 take the lower orders m-1, ..., 1; all others the full order.
    let k = if (1..m).contains(&restart) { m - restart } else { m };
    let d = target.dim();

    let draw = |rng: &mut ChaCha8Rng| Candidate {
        weights: dirichlet(rng, k),
        components: (0..k).map(|_| dirichlet(rng, d)).collect(),
    };
    let mut x = draw(&mut rng);
    for _ in 0..1000 {
        if raw_separation(&x, target).0 >= config.delta {
            break;
        }
        x = draw(&mut rng);
    }

    let merit = |c: &Candidate| -> (f64, ObjectiveEval, f64) {
        let eval = objective.evaluate(&c.weights, &c.components);
        let (sep, _, _) = raw_separation(c, target);
        let short = (config.delta - sep).max(0.0);
        (eval.value + config.penalty * short * short, eval, sep)
    };
    let merit_grad = |c: &Candidate, eval: &ObjectiveEval| -> (Vec<f64>, Vec<Vec<f64>>) {
        let (sep, gw_s, gc_s) = raw_separation(c, target);
        let short = (config.delta - sep).max(0.0);
        let scale = -2.0 * config.penalty * short;
        let gw = eval
            .grad_weights
            .iter()
            .zip(&gw_s)
            .map(|(g, s)| g + scale * s)
            .collect();
        let gc = eval
            .grad_components
            .iter()
            .zip(&gc_s)
            .map(|(g, s)| g.iter().zip(s).map(|(a, b)| a + scale * b).collect())
            .collect();
        (gw, gc)
    };

    let mut best = RestartOutcome {
        objective: f64::INFINITY,
        separation: 0.0,
        mixture: None,
    };
    let consider = |c: &Candidate, value: f64, best: &mut RestartOutcome| {
        if value >= best.objective {
            return;
        }
        if let Some(mix) = c.to_mixture() {
            let sep = separation(&mix, target);
            if sep >= config.delta {
                *best = RestartOutcome {
                    objective: objective.value(mix.weights(), &component_vecs(&mix)),
                    separation: sep,
                    mixture: Some(mix),
                };
            }
        }
    };

    let (fx, eval, _) = merit(&x);
    consider(&x, eval.value, &mut best);
    let (mut gw, mut gc) = merit_grad(&x, &eval);
    let mut step = 1.0;
    // Halving is judged against the worst of the last few accepted merits.
    let mut recent = VecDeque::from([fx]);

    for _ in 0..config.iterations {
        let mut accepted = None;
        let mut trial_step = step;
        for _ in 0..60 {
            let mut y = Candidate {
                weights: x.weights.iter().zip(&gw).map(|(v, g)| v - trial_step * g).collect(),
                components: x
                    .components
                    .iter()
                    .zip(&gc)
                    .map(|(c, g)| c.iter().zip(g).map(|(v, g)| v - trial_step * g).collect())
                    .collect(),
            };
            y.project();
            let (fy, eval_y, _) = merit(&y);
            let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if fy < reference {
                accepted = Some((y, fy, eval_y));
                break;
            }
            trial_step *= 0.5;
        }
        let Some((y, fy, eval_y)) = accepted else {
            break;
        };
        let (gw_y, gc_y) = merit_grad(&y, &eval_y);

        // Barzilai-Borwein step for the next iteration.
        let mut ss = 0.0;
        let mut sy = 0.0;
        let mut accumulate = |s: f64, g: f64| {
            ss += s * s;
            sy += s * g;
        };
        for j in 0..k {
            accumulate(y.weights[j] - x.weights[j], gw_y[j] - gw[j]);
            for a in 0..d {
                accumulate(y.components[j][a] - x.components[j][a], gc_y[j][a] - gc[j][a]);
            }
        }
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-10, 1e10)
        } else {
            trial_step * 2.0
        };

        consider(&y, eval_y.value, &mut best);
        if recent.len() == NONMONOTONE_WINDOW {
            recent.pop_front();
        }
        recent.push_back(fy);
        x = y;
        gw = gw_y;
        gc = gc_y;
    }
    best
}

fn component_vecs(m: &Mixture<f64>) -> Vec<Vec<f64>> {
    m.components().iter().map(|c| c.probs().to_vec()).collect()
}

/// Multi-start projected gradient search for a mixture `Q` of order at most
/// `order(P)` minimizing `||V_n(P) - V_n(Q)||^2` outside the exclusion ball
/// of radius `delta` around `P`.
///
/// Restarts `1..order(P)` search over the lower orders `order(P) - 1, ..., 1`
/// and every other restart over the full order; full-order candidates also
/// reach lower orders where weights vanish or components merge. Restart `r` starts
/// from a random point drawn with its own RNG stream `(seed, r)`, so results
/// do not depend on the execution mode. Steps use
/// Barzilai-Borwein lengths, halved until the penalized merit drops below the
/// largest of the last few accepted merits.
pub fn confusability_search(target: &Mixture<f64>, n: usize, config: &SearchConfig) -> Result<SearchResult> {
    if config.restarts == 0 {
        return Err(Error::invalid("search", "restarts must be at least 1"));
    }
    if config.delta.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::invalid("search", "delta must be positive"));
    }
    let objective = LawObjective::new(target, n)?;
    let outcomes = config
        .execution
        .map_indices(config.restarts, |r| run_restart(&objective, target, config, r));

    let (best_restart, best) = outcomes
        .into_iter()
        .enumerate()
        .filter(|(_, o)| o.mixture.is_some())
        .min_by(|a, b| {
            a.1.objective
                .partial_cmp(&b.1.objective)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.0.cmp(&b.0))
        })
        .ok_or_else(|| Error::invalid("search", "no start outside the exclusion ball was found"))?;
    Ok(SearchResult {
        best_alternative: best.mixture.expect("filtered"),
        objective: best.objective,
        separation: best.separation,
        restarts_used: config.restarts,
        best_restart,
        seed: config.seed,
    })
}
