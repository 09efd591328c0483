//! Random groups, empirical moment tensors and the two-atom binomial
//! reduction.

use std::io::{BufRead, Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Mixture;
use crate::par::Execution;
use crate::scalar::{powi, Scalar};
use crate::tensor::{binomial, dense_len, Layout, MomentTensor, DENSE_ENTRY_CAP};

/// Groups are counted in blocks of this size during reductions.
const COUNT_BLOCK: usize = 4096;

/// `N` groups of `n` atom indices each.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDataset {
    d: usize,
    n: usize,
    groups: Vec<Vec<usize>>,
    seed: u64,
    source: Option<Mixture<f64>>,
}

#[derive(Serialize, Deserialize)]
struct GroupLine {
    group: Vec<usize>,
}

impl GroupDataset {
    pub fn new(d: usize, n: usize, groups: Vec<Vec<usize>>, seed: u64, source: Option<Mixture<f64>>) -> Result<Self> {
        for (row, g) in groups.iter().enumerate() {
            if g.len() != n {
                return Err(Error::invalid(
                    "dataset",
                    format!("group {row} has {} entries, expected {n}", g.len()),
                ));
            }
            if let Some(a) = g.iter().find(|&&a| a >= d) {
                return Err(Error::invalid(
                    "dataset",
                    format!("group {row} has atom {a} outside 0..{d}"),
                ));
            }
        }
        Ok(GroupDataset {
            d,
            n,
            groups,
            seed,
            source,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn group_size(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn source(&self) -> Option<&Mixture<f64>> {
        self.source.as_ref()
    }

    /// CSV with header `x1,...,xn`, one group per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.n).map(|i| format!("x{i}")))?;
        for g in &self.groups {
            w.write_record(g.iter().map(usize::to_string))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, d: usize, seed: u64) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let n = header.len();
        for (i, h) in header.iter().enumerate() {
            if h.trim() != format!("x{}", i + 1) {
                return Err(Error::Parse(format!("unexpected CSV header field {h:?}")));
            }
        }
        let mut groups = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let g = rec
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Parse(format!("bad atom index {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            groups.push(g);
        }
        Self::new(d, n, groups, seed, None)
    }

    /// JSON lines, `{"group": [...]}` per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for g in &self.groups {
            serde_json::to_writer(&mut out, &GroupLine { group: g.clone() })?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, d: usize, seed: u64) -> Result<Self> {
        let mut groups = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: GroupLine = serde_json::from_str(&line)?;
            groups.push(parsed.group);
        }
        let n = groups.first().map(Vec::len).unwrap_or(0);
        Self::new(d, n, groups, seed, None)
    }
}

fn draw_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave u above the running total; fall back to the last
    // index with positive mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Draws `count` groups: a component by weight, then `n` iid atoms from it.
/// Group `g` uses its own RNG stream `(seed, g)`.
pub fn sample_groups(
    mixture: &Mixture<f64>,
    n: usize,
    count: usize,
    seed: u64,
    execution: Execution,
) -> Result<GroupDataset> {
    if n == 0 || count == 0 {
        return Err(Error::invalid("sampling", "need n >= 1 and at least one group"));
    }
    let key = ChaCha8Rng::seed_from_u64(seed).get_seed();
    let groups = execution.map_indices(count, |g| {
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(g as u64);
        let comp = &mixture.components()[draw_index(&mut rng, mixture.weights())];
        (0..n).map(|_| draw_index(&mut rng, comp.probs())).collect()
    });
    GroupDataset::new(mixture.dim(), n, groups, seed, Some(mixture.clone()))
}

/// Dense frequency tensor of the ordered groups. Mass is exactly 1 on exact
/// backends.
pub fn empirical_moment<T: Scalar>(data: &GroupDataset, execution: Execution) -> Result<MomentTensor<T>> {
    if data.is_empty() {
        return Err(Error::invalid("dataset", "no groups"));
    }
    let len = dense_len(data.d, data.n);
    if len > DENSE_ENTRY_CAP {
        return Err(Error::DenseCap {
            entries: len,
            cap: DENSE_ENTRY_CAP,
        });
    }
    let len = len as usize;
    let blocks = data.groups.len().div_ceil(COUNT_BLOCK);
    let partial = execution.map_indices(blocks, |b| {
        let mut counts = vec![0u64; len];
        for g in data.groups.iter().skip(b * COUNT_BLOCK).take(COUNT_BLOCK) {
            counts[g.iter().fold(0, |acc, &a| acc * data.d + a)] += 1;
        }
        counts
    });
    let mut counts = vec![0u64; len];
    for p in partial {
        for (c, x) in counts.iter_mut().zip(p) {
            *c += x;
        }
    }
    let total = T::from_u64(data.groups.len() as u64);
    let entries = counts.into_iter().map(|c| T::from_u64(c) / total.clone()).collect();
    MomentTensor::from_entries(data.n, data.d, Layout::Dense, entries)
}

/// Law of the group sum over two atoms: `sum_i w_i Binomial(n, e_i)` with
/// `e_i` the atom-1 mass of component `i`.
pub fn bernoulli_reduce<T: Scalar>(mixture: &Mixture<T>, n: usize) -> Result<Vec<T>> {
    if mixture.dim() != 2 {
        return Err(Error::Dimension(format!(
            "binomial reduction needs 2 atoms, got {}",
            mixture.dim()
        )));
    }
    let mut pmf = vec![T::zero(); n + 1];
    for (w, c) in mixture.terms() {
        let e = &c.probs()[1];
        let f = &c.probs()[0];
        for (k, slot) in pmf.iter_mut().enumerate() {
            let coeff = T::from_u64(u64::try_from(binomial(n, k)).unwrap_or(u64::MAX));
            *slot = slot.clone() + w.clone() * coeff * powi(e, k) * powi(f, n - k);
        }
    }
    Ok(pmf)
}

/// Pushforward of a two-atom law under the sum statistic: entry `k` sums the
/// law over all tuples with exactly `k` ones.
pub fn sum_pushforward<T: Scalar>(t: &MomentTensor<T>) -> Result<Vec<T>> {
    if t.dim() != 2 {
        return Err(Error::Dimension(format!(
            "sum statistic needs 2 atoms, got {}",
            t.dim()
        )));
    }
    let mut pmf = vec![T::zero(); t.order() + 1];
    match t.layout() {
        Layout::Dense => {
            for (flat, v) in t.entries().iter().enumerate() {
                let ones = flat.count_ones() as usize;
                pmf[ones] = pmf[ones].clone() + v.clone();
            }
        }
        Layout::Compressed => {
            let basis = t.basis();
            for ((counts, &mult), v) in basis.counts().iter().zip(basis.multiplicities()).zip(t.entries()) {
                pmf[counts[1]] = pmf[counts[1]].clone() + T::from_u64(mult) * v.clone();
            }
        }
    }
    Ok(pmf)
}
