//! Trigonometric modulation rows and magnitude measurements.
//!
//! Every bin `i` of the code graph carries four rows masked by its support:
//!
//! ```text
//! t₁ℓ = e^{iωℓ}   t₂ℓ = e^{−iωℓ}   t₃ℓ = 2cos(ωℓ)   t₄ℓ = e^{iω′ℓ}
//! ```
//!
//! with `ω = π/(2n)` (so `ωℓ ∈ (0, π/2]` and `ℓ ↦ cos(ωℓ)` is injective) and
//! a uniformly random `ω′`. The measurement matrix `A = T ⊗ H` is never
//! formed; bins are evaluated from the graph adjacency.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, TAU};

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::CodeGraph;
use crate::signal::{Complex, RngSeed, SparseSignal};

/// Phase increments of the modulation rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrigParams {
    pub n: usize,
    /// `ω = π/(2n)`.
    pub omega: f64,
    /// `ω′ ∈ [0, 2π)`.
    pub omega_prime: f64,
}

impl TrigParams {
    /// Draws `ω′` uniformly from `seed`.
    pub fn new(n: usize, seed: RngSeed) -> Result<Self> {
        let omega_prime = seed.rng().gen_range(0.0..TAU);
        Self::with_omega_prime(n, omega_prime)
    }

    pub fn with_omega_prime(n: usize, omega_prime: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("signal length must be positive"));
        }
        if !(0.0..TAU).contains(&omega_prime) {
            return Err(Error::invalid("ω′ must lie in [0, 2π)"));
        }
        Ok(TrigParams {
            n,
            omega: FRAC_PI_2 / n as f64,
            omega_prime,
        })
    }

    /// The four row entries `(t₁ℓ, t₂ℓ, t₃ℓ, t₄ℓ)` for index `l`.
    pub fn column(&self, l: usize) -> [Complex; 4] {
        let psi = self.omega * l as f64;
        let (s, c) = psi.sin_cos();
        [
            Complex::new(c, s),
            Complex::new(c, -s),
            Complex::new(2.0 * c, 0.0),
            Complex::from_polar(1.0, self.omega_prime * l as f64),
        ]
    }
}

/// The four magnitudes observed at one bin.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct BinObservation(pub [f64; 4]);

impl BinObservation {
    pub fn from_sums(sums: &[Complex; 4]) -> Self {
        BinObservation(sums.map(|s| s.norm()))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.0.iter().all(|&y| y <= tol)
    }
}

/// Number of rows of `T ⊗ H` for `T` with `p` rows and `H` with `m` rows.
pub fn row_tensor_shape(p: usize, m: usize) -> usize {
    p * m
}

/// Dense row tensor product: row `i·p + j` is `T_j ∘ H_i` (entrywise).
///
/// Intended for small worked examples; decoding never materializes `A`.
pub fn row_tensor_product(t: &[Vec<f64>], h: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = t.first().map_or(0, Vec::len);
    if t.iter().chain(h).any(|row| row.len() != n) {
        return Err(Error::invalid("T and H must have the same number of columns"));
    }
    let mut a = Vec::with_capacity(row_tensor_shape(t.len(), h.len()));
    for hrow in h {
        for trow in t {
            a.push(trow.iter().zip(hrow).map(|(x, y)| x * y).collect());
        }
    }
    Ok(a)
}

fn check_dims(x: &SparseSignal, graph: &CodeGraph, trig: &TrigParams) -> Result<()> {
    for found in [graph.n(), trig.n] {
        if found != x.n() {
            return Err(Error::DimensionMismatch {
                expected: x.n(),
                found,
            });
        }
    }
    Ok(())
}

/// Phase-aware bin sums `(Σ t₁ℓ x_ℓ, …, Σ t₄ℓ x_ℓ)` over each bin's support.
///
/// These are the quantities whose magnitudes are observed; they are exposed
/// for verification and never used by the decoder.
pub fn bin_sums(x: &SparseSignal, graph: &CodeGraph, trig: &TrigParams) -> Result<Vec<[Complex; 4]>> {
    check_dims(x, graph, trig)?;
    let mut sums = alloc::vec![[Complex::default(); 4]; graph.bins()];
    for (l, v) in x.iter() {
        let col = trig.column(l);
        for &b in graph.bins_of(l) {
            for r in 0..4 {
                sums[b][r] += col[r] * v;
            }
        }
    }
    Ok(sums)
}

/// `y = |(T ⊗ H) x|`, grouped per bin.
pub fn measure(x: &SparseSignal, graph: &CodeGraph, trig: &TrigParams) -> Result<Vec<BinObservation>> {
    Ok(bin_sums(x, graph, trig)?
        .iter()
        .map(BinObservation::from_sums)
        .collect())
}

/// A sparse complex measurement row over 1-based signal indices.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GenericRow {
    pub entries: Vec<(usize, Complex)>,
}

impl GenericRow {
    pub fn new(entries: Vec<(usize, Complex)>) -> Self {
        GenericRow { entries }
    }

    /// The unit row `e_l`.
    pub fn unit(l: usize) -> Self {
        GenericRow::new(alloc::vec![(l, Complex::new(1.0, 0.0))])
    }

    /// `e_r + c·e_l`.
    pub fn pair(r: usize, l: usize, c: Complex) -> Self {
        GenericRow::new(alloc::vec![(r, Complex::new(1.0, 0.0)), (l, c)])
    }

    pub fn apply(&self, x: &SparseSignal) -> Result<Complex> {
        let mut acc = Complex::default();
        for &(l, c) in &self.entries {
            if l == 0 || l > x.n() {
                return Err(Error::IndexOutOfRange { index: l, n: x.n() });
            }
            acc += c * x.get(l);
        }
        Ok(acc)
    }
}

/// `|row · x|` for each row.
pub fn measure_rows(x: &SparseSignal, rows: &[GenericRow]) -> Result<Vec<f64>> {
    rows.iter().map(|r| r.apply(x).map(|v| v.norm())).collect()
}
