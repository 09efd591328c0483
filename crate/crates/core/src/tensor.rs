//! Moment tensors: tensor powers, group laws, marginals, symmetric
//! compression, distances and rank tests.
//!
//! A [`MomentTensor`] of order `n` over `d` atoms is stored either densely
//! (`d^n` entries, row-major multi-index) or compressed (one entry per
//! multiset of indices, i.e. per degree-`n` monomial in `d` variables). The
//! compressed layout carries the multinomial multiplicity of each multiset so
//! that sums and inner products agree with the dense layout.

use std::collections::HashMap;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Mixture, SignedMixture};
use crate::scalar::{self, Scalar};

/// Largest dense tensor (in entries) the crate will materialize.
pub const DENSE_ENTRY_CAP: u128 = 10_000_000;

/// Symmetry tolerance for float tensors.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Dense,
    Compressed,
}

impl Layout {
    pub fn as_str(&self) -> &'static str {
        match self {
            Layout::Dense => "dense",
            Layout::Compressed => "compressed",
        }
    }
}

/// The multisets of size `order` drawn from `0..dim`, in lexicographic order
/// of their sorted index sequences, with multinomial multiplicities.
#[derive(Debug, Clone)]
pub struct SymBasis {
    dim: usize,
    order: usize,
    indices: Vec<Vec<usize>>,
    counts: Vec<Vec<usize>>,
    multiplicities: Vec<u64>,
    position: HashMap<Vec<usize>, usize>,
}

impl SymBasis {
    pub fn new(dim: usize, order: usize) -> Self {
        let mut indices = Vec::new();
        let mut current = Vec::with_capacity(order);
        fill_multisets(dim, order, 0, &mut current, &mut indices);
        let counts: Vec<Vec<usize>> = indices
            .iter()
            .map(|idx| {
                let mut c = vec![0; dim];
                for &a in idx {
                    c[a] += 1;
                }
                c
            })
            .collect();
        let multiplicities = counts.iter().map(|c| multinomial(order, c)).collect();
        let position = indices.iter().enumerate().map(|(i, idx)| (idx.clone(), i)).collect();
        SymBasis {
            dim,
            order,
            indices,
            counts,
            multiplicities,
            position,
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Sorted index sequence of each multiset.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Per-atom occurrence counts of each multiset.
    pub fn counts(&self) -> &[Vec<usize>] {
        &self.counts
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    /// Position of a multi-index (any order) in the basis.
    pub fn position_of(&self, index: &[usize]) -> Option<usize> {
        let mut sorted = index.to_vec();
        sorted.sort_unstable();
        self.position.get(&sorted).copied()
    }

    /// `prod_a v[a]^{c_a}` for every multiset.
    pub fn monomials<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        let max_pow = self.order;
        // powers[a][k] = v[a]^k
        let powers: Vec<Vec<T>> = v
            .iter()
            .map(|x| {
                let mut p = Vec::with_capacity(max_pow + 1);
                p.push(T::one());
                for k in 1..=max_pow {
                    p.push(p[k - 1].clone() * x.clone());
                }
                p
            })
            .collect();
        self.counts
            .iter()
            .map(|c| {
                c.iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .fold(T::one(), |acc, (a, &k)| acc * powers[a][k].clone())
            })
            .collect()
    }
}

fn fill_multisets(dim: usize, remaining: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if remaining == 0 {
        out.push(current.clone());
        return;
    }
    for a in start..dim {
        current.push(a);
        fill_multisets(dim, remaining - 1, a, current, out);
        current.pop();
    }
}

/// `n! / prod_a c_a!`, computed as a product of binomials.
pub fn multinomial(n: usize, counts: &[usize]) -> u64 {
    let mut total: u128 = 1;
    let mut placed = 0usize;
    for &c in counts {
        placed += c;
        total = total.saturating_mul(binomial(placed, c));
    }
    debug_assert_eq!(placed, n);
    u64::try_from(total).unwrap_or(u64::MAX)
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    r
}

/// Number of entries of a dense tensor, saturating.
pub fn dense_len(dim: usize, order: usize) -> u128 {
    (0..order).fold(1u128, |acc, _| acc.saturating_mul(dim as u128))
}

fn check_dense_cap(dim: usize, order: usize) -> Result<usize> {
    let entries = dense_len(dim, order);
    if entries > DENSE_ENTRY_CAP {
        return Err(Error::DenseCap {
            entries,
            cap: DENSE_ENTRY_CAP,
        });
    }
    Ok(entries as usize)
}

fn decode_flat(mut flat: usize, dim: usize, order: usize) -> Vec<usize> {
    let mut idx = vec![0; order];
    for k in (0..order).rev() {
        idx[k] = flat % dim;
        flat /= dim;
    }
    idx
}

fn encode_flat(idx: &[usize], dim: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * dim + i)
}

/// A symmetric order-`n` tensor over `d` atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTensor<T> {
    order: usize,
    dim: usize,
    layout: Layout,
    entries: Vec<T>,
}

impl<T: Scalar> MomentTensor<T> {
    /// Wraps raw entries, checking only the length against the layout.
    pub fn from_entries(order: usize, dim: usize, layout: Layout, entries: Vec<T>) -> Result<Self> {
        let expected = match layout {
            Layout::Dense => check_dense_cap(dim, order)? as u128,
            Layout::Compressed => binomial(dim + order - 1, order).max(1),
        };
        if entries.len() as u128 != expected {
            return Err(Error::Dimension(format!(
                "{} entries for a {} tensor of order {order} over {dim} atoms (expected {expected})",
                entries.len(),
                layout.as_str()
            )));
        }
        Ok(MomentTensor {
            order,
            dim,
            layout,
            entries,
        })
    }

    pub fn zeros(order: usize, dim: usize, layout: Layout) -> Result<Self> {
        let len = match layout {
            Layout::Dense => check_dense_cap(dim, order)?,
            Layout::Compressed => SymBasis::new(dim, order).len(),
        };
        Ok(MomentTensor {
            order,
            dim,
            layout,
            entries: vec![T::zero(); len],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn basis(&self) -> SymBasis {
        SymBasis::new(self.dim, self.order)
    }

    /// Entry at an ordered multi-index.
    pub fn get(&self, index: &[usize]) -> Result<T> {
        if index.len() != self.order || index.iter().any(|&i| i >= self.dim) {
            return Err(Error::Dimension(format!("index {index:?} out of shape")));
        }
        match self.layout {
            Layout::Dense => Ok(self.entries[encode_flat(index, self.dim)].clone()),
            Layout::Compressed => {
                let pos = self
                    .basis()
                    .position_of(index)
                    .ok_or_else(|| Error::Internal("multiset missing from basis".into()))?;
                Ok(self.entries[pos].clone())
            }
        }
    }

    /// Sum of all dense entries (multiplicity-weighted when compressed).
    pub fn total_mass(&self) -> T {
        match self.layout {
            Layout::Dense => scalar::sum(&self.entries),
            Layout::Compressed => weighted_sum(&self.basis(), &self.entries),
        }
    }

    fn add_scaled(&mut self, coeff: &T, other: &MomentTensor<T>) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a = a.clone() + coeff.clone() * b.clone();
        }
    }

    /// Entrywise product with a tensor of the same shape and layout.
    pub fn hadamard(&self, other: &MomentTensor<T>) -> Result<Self> {
        self.check_same_shape(other)?;
        if self.layout != other.layout {
            return Err(Error::Dimension("layout mismatch".into()));
        }
        Ok(MomentTensor {
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a.clone() * b.clone())
                .collect(),
            ..self.clone()
        })
    }

    fn check_same_shape(&self, other: &MomentTensor<T>) -> Result<()> {
        if self.order != other.order || self.dim != other.dim {
            return Err(Error::Dimension(format!(
                "order {} over {} atoms vs order {} over {} atoms",
                self.order, self.dim, other.order, other.dim
            )));
        }
        Ok(())
    }

    /// Converts to the requested layout (compression checks symmetry).
    pub fn to_layout(&self, layout: Layout) -> Result<Self> {
        match (self.layout, layout) {
            (a, b) if a == b => Ok(self.clone()),
            (Layout::Dense, Layout::Compressed) => sym_compress(self),
            _ => decompress(self),
        }
    }

    /// Largest deviation of a dense tensor from symmetry and where it occurs.
    pub fn max_asymmetry(&self) -> (Vec<usize>, T) {
        if self.layout == Layout::Compressed {
            return (vec![0; self.order], T::zero());
        }
        let mut worst = (vec![0; self.order], T::zero());
        for (flat, v) in self.entries.iter().enumerate() {
            let mut idx = decode_flat(flat, self.dim, self.order);
            let orig = idx.clone();
            idx.sort_unstable();
            let twin = &self.entries[encode_flat(&idx, self.dim)];
            let diff = (v.clone() - twin.clone()).abs();
            if diff > worst.1 {
                worst = (orig, diff);
            }
        }
        worst
    }

    pub fn to_json(&self) -> Value {
        let entries = match self.layout {
            Layout::Dense => Value::Array(self.entries.iter().map(Scalar::to_json).collect()),
            Layout::Compressed => {
                let basis = self.basis();
                let map: Map<String, Value> = basis
                    .indices()
                    .iter()
                    .zip(&self.entries)
                    .map(|(idx, v)| (multiset_key(idx), v.to_json()))
                    .collect();
                Value::Object(map)
            }
        };
        json!({
            "order": self.order,
            "dim": self.dim,
            "layout": self.layout.as_str(),
            "entries": entries,
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let field = |name: &str| {
            v.get(name)
                .ok_or_else(|| Error::Parse(format!("tensor missing field {name:?}")))
        };
        let order = field("order")?
            .as_u64()
            .ok_or_else(|| Error::Parse("order must be an integer".into()))? as usize;
        let dim = field("dim")?
            .as_u64()
            .ok_or_else(|| Error::Parse("dim must be an integer".into()))? as usize;
        match field("layout")?.as_str() {
            Some("dense") => {
                let entries = field("entries")?
                    .as_array()
                    .ok_or_else(|| Error::Parse("dense entries must be an array".into()))?
                    .iter()
                    .map(T::from_json)
                    .collect::<Result<Vec<_>>>()?;
                Self::from_entries(order, dim, Layout::Dense, entries)
            }
            Some("compressed") => {
                let map = field("entries")?
                    .as_object()
                    .ok_or_else(|| Error::Parse("compressed entries must be an object".into()))?;
                let basis = SymBasis::new(dim, order);
                let entries = basis
                    .indices()
                    .iter()
                    .map(|idx| {
                        let key = multiset_key(idx);
                        map.get(&key)
                            .ok_or_else(|| Error::Parse(format!("missing compressed entry {key:?}")))
                            .and_then(T::from_json)
                    })
                    .collect::<Result<Vec<_>>>()?;
                if map.len() != entries.len() {
                    return Err(Error::Parse("unexpected compressed entry keys".into()));
                }
                Self::from_entries(order, dim, Layout::Compressed, entries)
            }
            _ => Err(Error::Parse("layout must be \"dense\" or \"compressed\"".into())),
        }
    }
}

fn multiset_key(idx: &[usize]) -> String {
    idx.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
}

fn weighted_sum<T: Scalar>(basis: &SymBasis, entries: &[T]) -> T {
    basis
        .multiplicities()
        .iter()
        .zip(entries)
        .fold(T::zero(), |acc, (&m, v)| acc + T::from_u64(m) * v.clone())
}

/// `v ⊗ v ⊗ ... ⊗ v` (`n` factors). Order 0 gives the scalar 1.
pub fn tensor_power<T: Scalar>(v: &[T], n: usize, layout: Layout) -> Result<MomentTensor<T>> {
    let dim = v.len();
    if dim == 0 {
        return Err(Error::Dimension("empty vector".into()));
    }
    match layout {
        Layout::Dense => {
            let len = check_dense_cap(dim, n)?;
            let mut entries = Vec::with_capacity(len);
            entries.push(T::one());
            for _ in 0..n {
                entries = entries
                    .iter()
                    .flat_map(|e| v.iter().map(move |x| e.clone() * x.clone()))
                    .collect();
            }
            MomentTensor::from_entries(n, dim, Layout::Dense, entries)
        }
        Layout::Compressed => {
            let basis = SymBasis::new(dim, n);
            Ok(MomentTensor {
                order: n,
                dim,
                layout,
                entries: basis.monomials(v),
            })
        }
    }
}

/// Group law `V_n(P) = sum_i w_i mu_i^{⊗n}`.
pub fn group_law<T: Scalar>(mixture: &Mixture<T>, n: usize, layout: Layout) -> Result<MomentTensor<T>> {
    combination_law(mixture.weights(), mixture.components(), n, layout)
}

/// `sum_i c_i mu_i^{⊗n}` for a signed combination.
pub fn signed_law<T: Scalar>(signed: &SignedMixture<T>, n: usize, layout: Layout) -> Result<MomentTensor<T>> {
    combination_law(signed.coeffs(), signed.components(), n, layout)
}

fn combination_law<T: Scalar>(
    coeffs: &[T],
    components: &[DiscreteMeasure<T>],
    n: usize,
    layout: Layout,
) -> Result<MomentTensor<T>> {
    let dim = components
        .first()
        .map(DiscreteMeasure::dim)
        .ok_or(Error::EmptyMixture)?;
    let mut out = MomentTensor::zeros(n, dim, layout)?;
    for (c, mu) in coeffs.iter().zip(components) {
        let power = tensor_power(mu.probs(), n, layout)?;
        out.add_scaled(c, &power);
    }
    Ok(out)
}

/// Sums out the trailing `order - q` axes.
pub fn marginalize<T: Scalar>(t: &MomentTensor<T>, q: usize) -> Result<MomentTensor<T>> {
    if q > t.order {
        return Err(Error::Dimension(format!(
            "cannot marginalize an order-{} tensor to order {q}",
            t.order
        )));
    }
    if q == t.order {
        return Ok(t.clone());
    }
    match t.layout {
        Layout::Dense => {
            let block = dense_len(t.dim, t.order - q) as usize;
            let entries = t.entries.chunks(block).map(scalar::sum).collect();
            MomentTensor::from_entries(q, t.dim, Layout::Dense, entries)
        }
        Layout::Compressed => {
            let full = t.basis();
            let head = SymBasis::new(t.dim, q);
            let tail = SymBasis::new(t.dim, t.order - q);
            let entries = head
                .indices()
                .iter()
                .map(|s| {
                    tail.indices()
                        .iter()
                        .zip(tail.multiplicities())
                        .fold(T::zero(), |acc, (u, &mult)| {
                            let mut joined = s.clone();
                            joined.extend_from_slice(u);
                            let pos = full.position_of(&joined).expect("joined multiset in basis");
                            acc + T::from_u64(mult) * t.entries[pos].clone()
                        })
                })
                .collect();
            MomentTensor::from_entries(q, t.dim, Layout::Compressed, entries)
        }
    }
}

/// Compresses a symmetric dense tensor to one entry per multiset.
pub fn sym_compress<T: Scalar>(t: &MomentTensor<T>) -> Result<MomentTensor<T>> {
    if t.layout == Layout::Compressed {
        return Ok(t.clone());
    }
    let tol = if T::EXACT { 0.0 } else { SYMMETRY_TOL };
    let (index, asym) = t.max_asymmetry();
    if !asym.within(&T::zero(), tol) {
        return Err(Error::Asymmetric {
            index,
            asymmetry: asym.to_f64(),
        });
    }
    let basis = t.basis();
    let entries = basis
        .indices()
        .iter()
        .map(|idx| t.entries[encode_flat(idx, t.dim)].clone())
        .collect();
    MomentTensor::from_entries(t.order, t.dim, Layout::Compressed, entries)
}

/// Expands a compressed tensor to the dense layout.
pub fn decompress<T: Scalar>(t: &MomentTensor<T>) -> Result<MomentTensor<T>> {
    if t.layout == Layout::Dense {
        return Ok(t.clone());
    }
    let len = check_dense_cap(t.dim, t.order)?;
    let basis = t.basis();
    let entries = (0..len)
        .map(|flat| {
            let idx = decode_flat(flat, t.dim, t.order);
            t.entries[basis.position_of(&idx).expect("multiset in basis")].clone()
        })
        .collect();
    MomentTensor::from_entries(t.order, t.dim, Layout::Dense, entries)
}

/// Symmetrizes a dense tensor by averaging each entry over its orbit under
/// axis permutations. Compressed tensors are returned unchanged.
pub fn symmetrize<T: Scalar>(t: &MomentTensor<T>) -> Result<MomentTensor<T>> {
    if t.layout == Layout::Compressed {
        return Ok(t.clone());
    }
    let basis = t.basis();
    let mut sums = vec![T::zero(); basis.len()];
    for (flat, v) in t.entries.iter().enumerate() {
        let pos = basis
            .position_of(&decode_flat(flat, t.dim, t.order))
            .expect("multiset in basis");
        sums[pos] = sums[pos].clone() + v.clone();
    }
    let averaged: Vec<T> = sums
        .into_iter()
        .zip(basis.multiplicities())
        .map(|(s, &m)| s / T::from_u64(m))
        .collect();
    decompress(&MomentTensor::from_entries(
        t.order,
        t.dim,
        Layout::Compressed,
        averaged,
    )?)
}

/// Max-abs and squared Euclidean distance between two tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorDistance<T> {
    pub max_abs: T,
    pub l2_sq: T,
    /// Ordered multi-index where the max-abs difference is attained.
    pub argmax: Vec<usize>,
}

impl<T: Scalar> TensorDistance<T> {
    pub fn l2(&self) -> f64 {
        self.l2_sq.to_f64().sqrt()
    }
}

fn aligned<T: Scalar>(a: &MomentTensor<T>, b: &MomentTensor<T>) -> Result<(MomentTensor<T>, MomentTensor<T>)> {
    a.check_same_shape(b)?;
    if a.layout == b.layout {
        Ok((a.clone(), b.clone()))
    } else {
        Ok((sym_compress(a)?, sym_compress(b)?))
    }
}

/// Distance on dense entries; compressed tensors weight the squared
/// differences by multiplicity so both layouts agree.
pub fn tensor_distance<T: Scalar>(a: &MomentTensor<T>, b: &MomentTensor<T>) -> Result<TensorDistance<T>> {
    let (a, b) = aligned(a, b)?;
    let diffs: Vec<T> = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| x.clone() - y.clone())
        .collect();
    let (arg, max_abs) = diffs.iter().enumerate().fold((0, T::zero()), |(bi, bv), (i, d)| {
        let ad = d.abs();
        if ad > bv {
            (i, ad)
        } else {
            (bi, bv)
        }
    });
    let (argmax, l2_sq) = match a.layout {
        Layout::Dense => (
            decode_flat(arg, a.dim, a.order),
            diffs.iter().fold(T::zero(), |acc, d| acc + d.clone() * d.clone()),
        ),
        Layout::Compressed => {
            let basis = a.basis();
            let sq: Vec<T> = diffs.iter().map(|d| d.clone() * d.clone()).collect();
            (basis.indices()[arg].clone(), weighted_sum(&basis, &sq))
        }
    };
    Ok(TensorDistance { max_abs, l2_sq, argmax })
}

/// Frobenius inner product (multiplicity-weighted when compressed).
pub fn inner<T: Scalar>(a: &MomentTensor<T>, b: &MomentTensor<T>) -> Result<T> {
    let (a, b) = aligned(a, b)?;
    let prods: Vec<T> = a
        .entries
        .iter()
        .zip(&b.entries)
        .map(|(x, y)| x.clone() * y.clone())
        .collect();
    Ok(match a.layout {
        Layout::Dense => scalar::sum(&prods),
        Layout::Compressed => weighted_sum(&a.basis(), &prods),
    })
}

/// Rank of `{v^{⊗power}}` computed on compressed coordinates scaled by the
/// square roots of the multiplicities (same Gram matrix as the dense powers).
/// Exact on rationals; relative cutoff [`RANK_RTOL`](crate::scalar::RANK_RTOL)
/// on floats.
pub fn rank_of_powers<T: Scalar>(vectors: &[Vec<T>], power: usize) -> Result<usize> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::invalid("rank test", "empty vector list"))?;
    let dim = first.len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Dimension("vectors of different lengths".into()));
    }
    if power == 0 {
        return Err(Error::invalid("rank test", "power must be at least 1"));
    }
    let basis = SymBasis::new(dim, power);
    let columns: Vec<Vec<T>> = vectors.iter().map(|v| basis.monomials(v)).collect();
    let rows: Vec<Vec<T>> = (0..basis.len())
        .map(|r| columns.iter().map(|c| c[r].clone()).collect())
        .collect();
    let weights: Vec<f64> = basis.multiplicities().iter().map(|&m| m as f64).collect();
    Ok(T::weighted_rank(&rows, &weights))
}

/// Densities of a family of measures against their (unnormalized) sum.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityContext<T> {
    xi: Vec<T>,
    densities: Vec<Vec<T>>,
}

impl<T: Scalar> DensityContext<T> {
    /// `xi = sum of all measures`; densities are entrywise quotients with
    /// `0/0 := 0`.
    pub fn new(measures: &[&DiscreteMeasure<T>]) -> Result<Self> {
        let dim = measures
            .first()
            .map(|m| m.dim())
            .ok_or_else(|| Error::invalid("density context", "no measures"))?;
        if measures.iter().any(|m| m.dim() != dim) {
            return Err(Error::Dimension("measures over different atom counts".into()));
        }
        let mut xi = vec![T::zero(); dim];
        for m in measures {
            for (x, p) in xi.iter_mut().zip(m.probs()) {
                *x = x.clone() + p.clone();
            }
        }
        let densities = measures
            .iter()
            .map(|m| {
                m.probs()
                    .iter()
                    .zip(&xi)
                    .map(|(p, x)| if x.is_zero() { T::zero() } else { p.clone() / x.clone() })
                    .collect()
            })
            .collect();
        Ok(DensityContext { xi, densities })
    }

    pub fn xi(&self) -> &[T] {
        &self.xi
    }

    pub fn densities(&self) -> &[Vec<T>] {
        &self.densities
    }

    /// First pair of densities that are collinear (including zero vectors).
    pub fn collinear_pair(&self) -> Option<(usize, usize)> {
        let k = self.densities.len();
        for i in 0..k {
            for j in i + 1..k {
                let rows = vec![self.densities[i].clone(), self.densities[j].clone()];
                if T::weighted_rank(&rows, &[1.0, 1.0]) < 2 {
                    return Some((i, j));
                }
            }
        }
        None
    }

    /// `sum_i c_i (p_i^{⊗n} ∘ xi^{⊗n})`, the law rebuilt from densities.
    pub fn law_from_densities(&self, coeffs: &[T], n: usize, layout: Layout) -> Result<MomentTensor<T>> {
        if coeffs.len() != self.densities.len() {
            return Err(Error::Dimension("one coefficient per density required".into()));
        }
        let scale = tensor_power(&self.xi, n, layout)?;
        let mut out = MomentTensor::zeros(n, self.xi.len(), layout)?;
        for (c, p) in coeffs.iter().zip(&self.densities) {
            let term = tensor_power(p, n, layout)?.hadamard(&scale)?;
            out.add_scaled(c, &term);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{canonicalize, random_mixture};
    use crate::Rational;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn power_examples() {
        let t = tensor_power(&[0.5, 0.5], 2, Layout::Dense).unwrap();
        assert_eq!(t.entries(), &[0.25; 4]);
        let t = tensor_power(&[1.0, 0.0], 3, Layout::Dense).unwrap();
        assert_eq!(t.get(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(t.total_mass(), 1.0);
        let t = tensor_power(&[q(2, 3), q(1, 3)], 2, Layout::Dense).unwrap();
        assert_eq!(t.entries(), &[q(4, 9), q(2, 9), q(2, 9), q(1, 9)]);
        let t = tensor_power(&[0.3, 0.7], 0, Layout::Dense).unwrap();
        assert_eq!(t.entries(), &[1.0]);
        let t = tensor_power(&[0.3, 0.7], 0, Layout::Compressed).unwrap();
        assert_eq!(t.entries(), &[1.0]);
    }

    #[test]
    fn dense_cap_enforced() {
        let err = tensor_power(&[0.5, 0.5], 30, Layout::Dense).unwrap_err();
        assert!(matches!(err, Error::DenseCap { .. }));
        let t = tensor_power(&[0.5, 0.5], 30, Layout::Compressed).unwrap();
        assert_eq!(t.entries().len(), 31);
    }

    #[test]
    fn compress_example() {
        let t = tensor_power(&[q(2, 3), q(1, 3)], 2, Layout::Dense).unwrap();
        let c = sym_compress(&t).unwrap();
        assert_eq!(c.entries(), &[q(4, 9), q(2, 9), q(1, 9)]);
        assert_eq!(c.basis().multiplicities(), &[1, 2, 1]);
        assert_eq!(decompress(&c).unwrap(), t);
        for m in 1..8 {
            assert_eq!(SymBasis::new(2, 2 * m - 2).len(), 2 * m - 1);
        }
        let onehot = tensor_power(&[0.0, 0.0, 1.0], 4, Layout::Compressed).unwrap();
        assert_eq!(onehot.entries().iter().filter(|x| **x != 0.0).count(), 1);
    }

    #[test]
    fn compress_rejects_asymmetric() {
        let t = MomentTensor::from_entries(2, 2, Layout::Dense, vec![0.25, 0.3, 0.2, 0.25]).unwrap();
        match sym_compress(&t) {
            Err(Error::Asymmetric { index, asymmetry }) => {
                assert_eq!(index, vec![1, 0]);
                assert!((asymmetry - 0.1).abs() < 1e-12);
            }
            other => panic!("expected asymmetry error, got {other:?}"),
        }
    }

    #[test]
    fn law_examples() {
        let p = canonicalize(vec![1.0], vec![DiscreteMeasure::new(vec![0.5, 0.5]).unwrap()], 0.0).unwrap();
        let t = group_law(&p, 2, Layout::Dense).unwrap();
        assert_eq!(t.entries(), &[0.25; 4]);

        let p = Mixture::new(
            vec![q(1, 4), q(3, 4)],
            vec![
                DiscreteMeasure::new(vec![q(1, 1), q(0, 1)]).unwrap(),
                DiscreteMeasure::new(vec![q(1, 3), q(2, 3)]).unwrap(),
            ],
        )
        .unwrap();
        let t = group_law(&p, 1, Layout::Dense).unwrap();
        assert_eq!(t.get(&[1]).unwrap(), q(1, 2));
        assert_eq!(t.entries(), p.mean().as_slice());
        assert_eq!(group_law(&p, 0, Layout::Dense).unwrap().entries(), &[q(1, 1)]);
    }

    #[test]
    fn marginal_examples() {
        let t = tensor_power(&[q(2, 3), q(1, 3)], 2, Layout::Dense).unwrap();
        assert_eq!(marginalize(&t, 2).unwrap(), t);
        assert_eq!(marginalize(&t, 1).unwrap().entries(), &[q(2, 3), q(1, 3)]);
        let c = sym_compress(&t).unwrap();
        assert_eq!(marginalize(&c, 1).unwrap().entries(), &[q(2, 3), q(1, 3)]);
        assert!(marginalize(&t, 3).is_err());
    }

    #[test]
    fn distance_examples() {
        let a = tensor_power(&[1.0, 0.0], 1, Layout::Dense).unwrap();
        let b = tensor_power(&[0.0, 1.0], 1, Layout::Dense).unwrap();
        let d = tensor_distance(&a, &b).unwrap();
        assert_eq!(d.max_abs, 1.0);
        assert!((d.l2() - 2f64.sqrt()).abs() < 1e-15);
        let d = tensor_distance(&a, &a).unwrap();
        assert_eq!((d.max_abs, d.l2()), (0.0, 0.0));
        let s = tensor_power(&[0.3, 0.7], 0, Layout::Dense).unwrap();
        assert_eq!(tensor_distance(&s, &s).unwrap().max_abs, 0.0);
        let c = tensor_power(&[0.0, 1.0], 2, Layout::Dense).unwrap();
        assert!(tensor_distance(&a, &c).is_err());
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_of_powers(&[vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap(), 2);
        let four = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        assert_eq!(rank_of_powers(&four, 3).unwrap(), 4);
        assert_eq!(rank_of_powers(&four, 2).unwrap(), 3);
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(rank_of_powers(&empty, 1).is_err());
    }

    #[test]
    fn json_round_trip() {
        let t = tensor_power(&[q(2, 3), q(1, 3)], 3, Layout::Compressed).unwrap();
        let v = t.to_json();
        assert_eq!(v["entries"]["0.0.1"], "4/27");
        assert_eq!(MomentTensor::<Rational>::from_json(&v).unwrap(), t);
        let d = decompress(&t).unwrap();
        assert_eq!(MomentTensor::<Rational>::from_json(&d.to_json()).unwrap(), d);
    }

    #[test]
    fn density_context_basics() {
        let a = DiscreteMeasure::new(vec![q(1, 2), q(1, 2), q(0, 1)]).unwrap();
        let b = DiscreteMeasure::new(vec![q(1, 1), q(0, 1), q(0, 1)]).unwrap();
        let ctx = DensityContext::new(&[&a, &b]).unwrap();
        assert_eq!(ctx.xi(), &[q(3, 2), q(1, 2), q(0, 1)]);
        assert_eq!(ctx.densities()[0], vec![q(1, 3), q(1, 1), q(0, 1)]);
        assert_eq!(ctx.collinear_pair(), None);
    }

    fn symmetric_under(t: &MomentTensor<f64>, perm: &[usize]) -> bool {
        let n = t.order();
        (0..t.entries().len()).all(|flat| {
            let idx = decode_flat(flat, t.dim(), n);
            let permuted: Vec<usize> = perm.iter().map(|&k| idx[k]).collect();
            t.entries()[flat] == t.entries()[encode_flat(&permuted, t.dim())]
        })
    }

    proptest! {
        #[test]
        fn law_is_symmetric_probability(seed in 0u64..1000, d in 2usize..4, m in 1usize..4, n in 1usize..5, rot in 0usize..5) {
            let p = random_mixture(d, m, seed).unwrap();
            let t = group_law(&p, n, Layout::Dense).unwrap();
            prop_assert!((t.total_mass() - 1.0).abs() < 1e-10);
            prop_assert!(t.entries().iter().all(|&x| x >= 0.0));
            let mut perm: Vec<usize> = (0..n).collect();
            perm.rotate_left(rot % n);
            perm.swap(0, n - 1);
            let (_, asym) = t.max_asymmetry();
            prop_assert!(asym < 1e-15);
            prop_assert!(symmetric_under(&sym_compress(&t).map(|c| decompress(&c).unwrap()).unwrap(), &perm));
        }

        #[test]
        fn marginal_consistency(seed in 0u64..1000, d in 2usize..4, m in 1usize..4, n in 0usize..5) {
            let p = random_mixture(d, m, seed).unwrap();
            let t = group_law(&p, n, Layout::Dense).unwrap();
            let c = group_law(&p, n, Layout::Compressed).unwrap();
            for q in 0..=n {
                let want = group_law(&p, q, Layout::Dense).unwrap();
                prop_assert!(tensor_distance(&marginalize(&t, q).unwrap(), &want).unwrap().max_abs <= 1e-12);
                let want_c = group_law(&p, q, Layout::Compressed).unwrap();
                prop_assert!(tensor_distance(&marginalize(&c, q).unwrap(), &want_c).unwrap().max_abs <= 1e-12);
            }
        }

        #[test]
        fn density_product_identity(seed in 0u64..1000, d in 2usize..5, m in 1usize..4, n in 0usize..5) {
            let p = random_mixture(d, m, seed).unwrap();
            let refs: Vec<_> = p.components().iter().collect();
            let ctx = DensityContext::new(&refs).unwrap();
            let rebuilt = ctx.law_from_densities(p.weights(), n, Layout::Dense).unwrap();
            let direct = group_law(&p, n, Layout::Dense).unwrap();
            prop_assert!(tensor_distance(&rebuilt, &direct).unwrap().max_abs <= 1e-12);
        }

        #[test]
        fn compressed_inner_products_match_dense(seed in 0u64..1000, d in 2usize..4, n in 0usize..5) {
            let a = random_mixture(d, 2, seed).unwrap();
            let b = random_mixture(d, 3, seed + 1).unwrap();
            let (ta, tb) = (group_law(&a, n, Layout::Dense).unwrap(), group_law(&b, n, Layout::Dense).unwrap());
            let dense = inner(&ta, &tb).unwrap();
            let compressed = inner(&sym_compress(&ta).unwrap(), &sym_compress(&tb).unwrap()).unwrap();
            prop_assert!((dense - compressed).abs() <= 1e-10);
            let dd = tensor_distance(&ta, &tb).unwrap();
            let dc = tensor_distance(&sym_compress(&ta).unwrap(), &sym_compress(&tb).unwrap()).unwrap();
            prop_assert!((dd.l2() - dc.l2()).abs() <= 1e-10);
            prop_assert!((dd.max_abs - dc.max_abs).abs() <= 1e-15);
        }

        #[test]
        fn compression_round_trip(seed in 0u64..1000, d in 2usize..4, m in 1usize..4, n in 0usize..5) {
            let p = random_mixture(d, m, seed).unwrap();
            let t = group_law(&p, n, Layout::Dense).unwrap();
            let back = decompress(&sym_compress(&t).unwrap()).unwrap();
            prop_assert!(tensor_distance(&t, &back).unwrap().max_abs <= 1e-12);
            prop_assert_eq!(sym_compress(&t).unwrap().entries().len() as u128, binomial(d + n - 1, n).max(1));
        }
    }
}
