//! Sparse complex signals, seeded randomness and recovery metrics.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Complex = num_complex::Complex64;

/// Root seed of every randomized construction.
///
/// Independent draws (graph, signal, random phase, ...) fork their own stream
/// from a fixed label, so changing how many numbers one consumer draws never
/// perturbs another.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RngSeed(pub u64);

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(label: &str) -> u64 {
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl RngSeed {
    /// Sub-seed for one purpose, e.g. `seed.fork("graph")`.
    pub fn fork(self, label: &str) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ fnv1a(label)))
    }

    /// Seed of trial `trial` in a batch: `splitmix64(seed ^ splitmix64(trial))`.
    pub fn for_trial(self, trial: u64) -> RngSeed {
        RngSeed(splitmix64(self.0 ^ splitmix64(trial)))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// A length-`n` complex vector stored by its support.
///
/// Indices are 1-based. Stored values are never zero.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SparseSignal {
    n: usize,
    support: BTreeMap<usize, Complex>,
}

impl SparseSignal {
    pub fn new(n: usize) -> Self {
        SparseSignal {
            n,
            support: BTreeMap::new(),
        }
    }

    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, Complex)>) -> Result<Self> {
        let mut s = SparseSignal::new(n);
        for (index, value) in entries {
            s.insert(index, value)?;
        }
        Ok(s)
    }

    /// Sets `x_index = value`. A zero value removes the entry.
    pub fn insert(&mut self, index: usize, value: Complex) -> Result<()> {
        if index == 0 || index > self.n {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        if !value.re.is_finite() || !value.im.is_finite() {
            return Err(Error::invalid("signal values must be finite"));
        }
        if value.norm_sqr() == 0.0 {
            self.support.remove(&index);
        } else {
            self.support.insert(index, value);
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of nonzero entries, `K`.
    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// `x_index`, zero off the support.
    pub fn get(&self, index: usize) -> Complex {
        self.support.get(&index).copied().unwrap_or_default()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.support.contains_key(&index)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex)> + '_ {
        self.support.iter().map(|(&i, &v)| (i, v))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.support.keys().copied()
    }

    pub fn norm(&self) -> f64 {
        self.support.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `c · x`.
    pub fn scaled(&self, c: Complex) -> SparseSignal {
        let mut out = SparseSignal::new(self.n);
        for (i, v) in self.iter() {
            let w = v * c;
            if w.norm_sqr() > 0.0 {
                out.support.insert(i, w);
            }
        }
        out
    }

    /// The entries of `self` at the indices where `mask` is nonzero.
    pub fn restricted_to(&self, mask: &SparseSignal) -> SparseSignal {
        let mut out = SparseSignal::new(self.n);
        for i in mask.support() {
            if let Some(&v) = self.support.get(&i) {
                out.support.insert(i, v);
            }
        }
        out
    }
}

/// Draws `k` distinct uniform indices with values `r·e^{iθ}`, `r ~ U[lo, hi]`,
/// `θ ~ U[0, 2π)`.
pub fn random_sparse_signal(
    n: usize,
    k: usize,
    seed: RngSeed,
    magnitude_range: (f64, f64),
) -> Result<SparseSignal> {
    let (lo, hi) = magnitude_range;
    if k > n {
        return Err(Error::invalid(alloc::format!("sparsity {k} exceeds length {n}")));
    }
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::invalid("magnitude range must satisfy 0 < lo <= hi"));
    }
    let mut rng = seed.rng();
    let mut indices = rand::seq::index::sample(&mut rng, n, k).into_vec();
    indices.sort_unstable();
    let mut signal = SparseSignal::new(n);
    for i in indices {
        let r = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let theta = rng.gen_range(0.0..TAU);
        signal.support.insert(i + 1, Complex::from_polar(r, theta));
    }
    Ok(signal)
}

fn check_same_n(x: &SparseSignal, xhat: &SparseSignal) -> Result<()> {
    if x.n != xhat.n {
        return Err(Error::DimensionMismatch {
            expected: x.n,
            found: xhat.n,
        });
    }
    Ok(())
}

/// The unit-modulus rotation `e^{iφ}` minimizing `‖x − e^{iφ} x̂‖`.
pub fn optimal_rotation(x: &SparseSignal, xhat: &SparseSignal) -> Complex {
    let inner: Complex = xhat
        .iter()
        .map(|(i, v)| v.conj() * x.get(i))
        .sum();
    let r = inner.norm();
    if r > 0.0 {
        inner / r
    } else {
        Complex::new(1.0, 0.0)
    }
}

/// `min_φ ‖x − e^{iφ} x̂‖ / ‖x‖`.
///
/// Returns 0 when both signals are empty and `+∞` when only `x` is.
pub fn global_phase_error(x: &SparseSignal, xhat: &SparseSignal) -> Result<f64> {
    check_same_n(x, xhat)?;
    let norm = x.norm();
    if norm == 0.0 {
        return Ok(if xhat.is_empty() { 0.0 } else { f64::INFINITY });
    }
    let rot = optimal_rotation(x, xhat);
    let mut err = 0.0;
    for (i, v) in x.iter() {
        err += (v - rot * xhat.get(i)).norm_sqr();
    }
    for (i, v) in xhat.iter() {
        if !x.contains(i) {
            err += v.norm_sqr();
        }
    }
    Ok(err.sqrt() / norm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct SupportError {
    /// True support indices absent from the estimate.
    pub missed: usize,
    /// Estimated indices outside the true support.
    pub false_alarms: usize,
}

pub fn support_error(x: &SparseSignal, xhat: &SparseSignal) -> Result<SupportError> {
    check_same_n(x, xhat)?;
    Ok(SupportError {
        missed: x.support().filter(|&i| !xhat.contains(i)).count(),
        false_alarms: xhat.support().filter(|&i| !x.contains(i)).count(),
    })
}

/// Collects values into a dense vector of length `n` (index `i-1` holds `x_i`).
pub fn to_dense(x: &SparseSignal) -> Vec<Complex> {
    let mut out = alloc::vec![Complex::default(); x.n];
    for (i, v) in x.iter() {
        out[i - 1] = v;
    }
    out
}
