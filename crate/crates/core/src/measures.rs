//! Discrete probability measures and finite mixtures of them.
//!
//! A [`Mixture`] is always held in minimal representation: strictly positive
//! weights and pairwise distinct components. [`canonicalize`] builds one from
//! raw terms and fixes a single representative of the permutation class by
//! sorting components lexicographically.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde_json::{json, Value};

use crate::assign;
use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// A probability vector over `d >= 2` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<T> {
    probs: Vec<T>,
}

impl<T: Scalar> DiscreteMeasure<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::invalid(
                "measure",
                format!("need d >= 2 atoms, got {}", probs.len()),
            ));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| p.is_negative()) {
            return Err(Error::invalid("measure", format!("negative mass {p} at atom {i}")));
        }
        let total = scalar::sum(&probs);
        if !total.within(&T::one(), T::MASS_TOL) {
            return Err(Error::invalid("measure", format!("mass sums to {total}, not 1")));
        }
        Ok(DiscreteMeasure { probs })
    }

    /// Point mass at `atom`.
    pub fn dirac(d: usize, atom: usize) -> Result<Self> {
        if atom >= d {
            return Err(Error::invalid(
                "measure",
                format!("atom {atom} out of range for d = {d}"),
            ));
        }
        let mut probs = vec![T::zero(); d];
        probs[atom] = T::one();
        Self::new(probs)
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<T> {
        self.probs
    }

    /// Max-abs distance to another measure over the same atoms.
    pub fn max_abs_distance(&self, other: &Self) -> T {
        scalar::max_abs_diff(&self.probs, &other.probs)
    }

    /// `t * self + (1 - t) * other`.
    pub fn convex_combination(t: &T, a: &Self, b: &Self) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::Dimension(format!("{} vs {} atoms", a.dim(), b.dim())));
        }
        let s = T::one() - t.clone();
        let probs = a
            .probs
            .iter()
            .zip(&b.probs)
            .map(|(x, y)| t.clone() * x.clone() + s.clone() * y.clone())
            .collect();
        Self::new(probs)
    }

    /// Converts to another backend. If the converted masses miss 1 under the
    /// target's tolerance (floats read exactly as rationals), they are divided
    /// by their sum.
    pub fn convert<U: Scalar>(&self) -> Result<DiscreteMeasure<U>> {
        let mut probs: Vec<U> = scalar::convert_vec(&self.probs)?;
        let total = scalar::sum(&probs);
        if !total.within(&U::one(), U::MASS_TOL) {
            for p in &mut probs {
                *p = p.clone() / total.clone();
            }
        }
        DiscreteMeasure::new(probs)
    }
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y).unwrap_or(Ordering::Equal) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// A finite mixture `sum_i w_i delta_{mu_i}` in minimal representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<T> {
    weights: Vec<T>,
    components: Vec<DiscreteMeasure<T>>,
}

impl<T: Scalar> Mixture<T> {
    /// Validates an already-minimal representation without reordering it.
    pub fn new(weights: Vec<T>, components: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::invalid(
                "mixture",
                format!("{} weights for {} components", weights.len(), components.len()),
            ));
        }
        if weights.is_empty() {
            return Err(Error::EmptyMixture);
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::Dimension("components over different atom counts".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_positive()) {
            return Err(Error::invalid("mixture", format!("non-positive weight {w}")));
        }
        let total = scalar::sum(&weights);
        if !total.within(&T::one(), T::MASS_TOL) {
            return Err(Error::invalid("mixture", format!("weights sum to {total}, not 1")));
        }
        for i in 0..components.len() {
            for j in i + 1..components.len() {
                if components[i] == components[j] {
                    return Err(Error::invalid("mixture", format!("components {i} and {j} coincide")));
                }
            }
        }
        Ok(Mixture { weights, components })
    }

    /// Number of components `m`.
    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn components(&self) -> &[DiscreteMeasure<T>] {
        &self.components
    }

    pub fn terms(&self) -> impl Iterator<Item = (&T, &DiscreteMeasure<T>)> {
        self.weights.iter().zip(&self.components)
    }

    /// Mean measure `sum_i w_i mu_i`.
    pub fn mean(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.dim()];
        for (w, c) in self.terms() {
            for (o, p) in out.iter_mut().zip(c.probs()) {
                *o = o.clone() + w.clone() * p.clone();
            }
        }
        out
    }

    pub fn convert<U: Scalar>(&self) -> Result<Mixture<U>> {
        let weights = scalar::convert_vec(&self.weights)?;
        let components = self
            .components
            .iter()
            .map(|c| c.convert())
            .collect::<Result<Vec<_>>>()?;
        canonicalize(weights, components, U::MERGE_TOL)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "d": self.dim(),
            "weights": self.weights.iter().map(Scalar::to_json).collect::<Vec<_>>(),
            "components": self
                .components
                .iter()
                .map(|c| c.probs().iter().map(Scalar::to_json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }

    /// Parses the `{"d", "weights", "components"}` schema and canonicalizes.
    pub fn from_json(v: &Value) -> Result<Self> {
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Parse("mixture must be a JSON object".into()))?;
        let d = obj
            .get("d")
            .and_then(Value::as_u64)
            .ok_or_else(|| Error::Parse("missing integer field \"d\"".into()))? as usize;
        let weights = obj
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing array field \"weights\"".into()))?
            .iter()
            .map(T::from_json)
            .collect::<Result<Vec<_>>>()?;
        let components = obj
            .get("components")
            .and_then(Value::as_array)
            .ok_or_else(|| Error::Parse("missing array field \"components\"".into()))?
            .iter()
            .map(|c| {
                let probs = c
                    .as_array()
                    .ok_or_else(|| Error::Parse("component must be an array".into()))?
                    .iter()
                    .map(T::from_json)
                    .collect::<Result<Vec<_>>>()?;
                if probs.len() != d {
                    return Err(Error::Dimension(format!(
                        "component has {} entries, expected d = {d}",
                        probs.len()
                    )));
                }
                DiscreteMeasure::new(probs)
            })
            .collect::<Result<Vec<_>>>()?;
        let total = scalar::sum(&weights);
        if !total.within(&T::one(), T::MASS_TOL) {
            return Err(Error::invalid("mixture", format!("weights sum to {total}, not 1")));
        }
        canonicalize(weights, components, T::MERGE_TOL)
    }
}

/// A signed combination of distinct measures (an element of the span before
/// normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMixture<T> {
    coeffs: Vec<T>,
    components: Vec<DiscreteMeasure<T>>,
}

impl<T: Scalar> SignedMixture<T> {
    pub fn new(coeffs: Vec<T>, components: Vec<DiscreteMeasure<T>>) -> Result<Self> {
        if coeffs.len() != components.len() || coeffs.is_empty() {
            return Err(Error::invalid("signed mixture", "coefficient/component count mismatch"));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::Dimension("components over different atom counts".into()));
        }
        for i in 0..components.len() {
            for j in i + 1..components.len() {
                if components[i] == components[j] {
                    return Err(Error::invalid(
                        "signed mixture",
                        format!("components {i} and {j} coincide"),
                    ));
                }
            }
        }
        Ok(SignedMixture { coeffs, components })
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn components(&self) -> &[DiscreteMeasure<T>] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }
}

impl<T: Scalar> From<Mixture<T>> for SignedMixture<T> {
    fn from(m: Mixture<T>) -> Self {
        SignedMixture {
            coeffs: m.weights,
            components: m.components,
        }
    }
}

/// Builds the minimal, canonically ordered representation of raw terms.
///
/// Zero-weight terms are dropped, components within `merge_tol` (max-abs) of
/// an earlier kept component are merged into it, the result is sorted
/// lexicographically by component vector and the weights are renormalized.
pub fn canonicalize<T: Scalar>(
    raw_weights: Vec<T>,
    raw_components: Vec<DiscreteMeasure<T>>,
    merge_tol: f64,
) -> Result<Mixture<T>> {
    if raw_weights.len() != raw_components.len() {
        return Err(Error::invalid(
            "mixture",
            format!("{} weights for {} components", raw_weights.len(), raw_components.len()),
        ));
    }
    if let Some(w) = raw_weights.iter().find(|w| w.is_negative()) {
        return Err(Error::invalid("mixture", format!("negative weight {w}")));
    }
    if let Some(c) = raw_components.first() {
        let d = c.dim();
        if raw_components.iter().any(|c| c.dim() != d) {
            return Err(Error::Dimension("components over different atom counts".into()));
        }
    }

    let mut terms: Vec<(T, DiscreteMeasure<T>)> = raw_weights
        .into_iter()
        .zip(raw_components)
        .filter(|(w, _)| !w.is_zero())
        .collect();
    if terms.is_empty() {
        return Err(Error::EmptyMixture);
    }
    // Sorting before merging makes the result independent of input order.
    terms.sort_by(|a, b| lex_cmp(a.1.probs(), b.1.probs()).then(a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal)));

    let mut merged: Vec<(T, DiscreteMeasure<T>)> = Vec::with_capacity(terms.len());
    for (w, c) in terms {
        match merged
            .iter_mut()
            .find(|(_, kept)| kept.max_abs_distance(&c).within(&T::zero(), merge_tol))
        {
            Some((kept_w, _)) => *kept_w = kept_w.clone() + w,
            None => merged.push((w, c)),
        }
    }

    let (mut weights, components): (Vec<T>, Vec<_>) = merged.into_iter().unzip();
    let total = scalar::sum(&weights);
    // Skip renormalization once the mass is already 1 to the last bits, so
    // that canonicalize is idempotent on floats.
    let renorm_tol = if T::EXACT { 0.0 } else { 1e-14 };
    if !total.within(&T::one(), renorm_tol) {
        for w in weights.iter_mut() {
            *w = w.clone() / total.clone();
        }
    }
    Mixture::new(weights, components)
}

/// Equality up to permutation: same order and a matching of components and
/// weights, each within `tol` (max-abs).
pub fn mixtures_equal<T: Scalar>(p: &Mixture<T>, q: &Mixture<T>, tol: f64) -> Result<bool> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(format!("{} vs {} atoms", p.dim(), q.dim())));
    }
    if p.order() != q.order() {
        return Ok(false);
    }
    let close = |i: usize, j: usize| {
        p.components[i]
            .max_abs_distance(&q.components[j])
            .within(&T::zero(), tol)
            && p.weights[i].within(&q.weights[j], tol)
    };
    if (0..p.order()).all(|i| close(i, i)) {
        return Ok(true);
    }
    // Canonical order can differ when components sit within tolerance of
    // each other; settle it with a bipartite matching.
    let adj: Vec<Vec<bool>> = (0..p.order())
        .map(|i| (0..q.order()).map(|j| close(i, j)).collect())
        .collect();
    Ok(assign::has_perfect_matching(&adj))
}

/// Permutation-aware separation between an alternative `q` and a target `p`
/// with `q.order() <= p.order()`.
///
/// Matched pairs cost their component max-abs distance plus weight
/// difference; each unmatched target component costs its weight.
pub fn separation(q: &Mixture<f64>, p: &Mixture<f64>) -> f64 {
    separation_with_assignment(q, p).1
}

/// As [`separation`], also returning `assignment[j]` = target index matched
/// to alternative component `j`.
pub fn separation_with_assignment(q: &Mixture<f64>, p: &Mixture<f64>) -> (Vec<usize>, f64) {
    let k = q.order().max(p.order());
    let cost: Vec<Vec<f64>> = (0..k)
        .map(|j| {
            (0..k)
                .map(|i| match (j < q.order(), i < p.order()) {
                    (true, true) => {
                        q.components[j].max_abs_distance(&p.components[i]) + (q.weights[j] - p.weights[i]).abs()
                    }
                    (false, true) => p.weights[i],
                    (true, false) => q.weights[j],
                    (false, false) => 0.0,
                })
                .collect()
        })
        .collect();
    let (assignment, total) = assign::min_cost_assignment(&cost);
    (assignment.into_iter().take(q.order()).collect(), total)
}

/// Draws a flat-Dirichlet probability vector of length `k`.
pub(crate) fn dirichlet<R: Rng>(rng: &mut R, k: usize) -> Vec<f64> {
    let draws: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1) + f64::MIN_POSITIVE).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// Random mixture of `m` components over `d` atoms. Components and weights
/// are flat-Dirichlet draws; colliding components are re-drawn.
pub fn random_mixture(d: usize, m: usize, seed: u64) -> Result<Mixture<f64>> {
    if d < 2 || m < 1 {
        return Err(Error::invalid(
            "random mixture",
            format!("need d >= 2 and m >= 1, got d = {d}, m = {m}"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut components: Vec<DiscreteMeasure<f64>> = Vec::with_capacity(m);
    while components.len() < m {
        let c = DiscreteMeasure::new(dirichlet(&mut rng, d))?;
        if components.iter().all(|o| o.max_abs_distance(&c) > f64::MERGE_TOL) {
            components.push(c);
        }
    }
    let weights = dirichlet(&mut rng, m);
    canonicalize(weights, components, f64::MERGE_TOL)
}
