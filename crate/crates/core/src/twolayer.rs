//! Two-layer recovery: a phase-aware sparse-graph compressive-sensing codec
//! `z = Cx` wrapped in a deterministic layer that recovers `z` (up to a global
//! phase) from `y = |Bz|`.
//!
//! `C` stacks a dense guard row with i.i.d. unit phases (so `z₁ ≠ 0` almost
//! surely) on top of two rows per bin of a left-regular graph:
//! `Σ_{ℓ∈bin} x_ℓ` and `Σ_{ℓ∈bin} e^{iωℓ} x_ℓ` with `ω = 2π/n`.
//! `B = [I; e₁ + e_ℓ; e₁ + i·e_ℓ]`, `ℓ = 2..m₁`.

use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::{sample_regular_graph, CodeGraph};
use crate::init::{align_phase, AlignmentMagnitudes};
use crate::signal::{Complex, RngSeed, SparseSignal};

pub const DEFAULT_CS_DEGREE: usize = 3;
/// Zero threshold of the phase layer, relative to `max |y|`.
pub const DEFAULT_PHASE_TOL: f64 = 1e-9;
/// Zero and singleton threshold of the codec, relative to `max |z|`.
pub const DEFAULT_CS_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CsDesign {
    pub n: usize,
    /// `ω = 2π/n`; `e^{iωℓ}` is injective on `1..=n`.
    pub omega: f64,
    /// Unit phases of the guard row, `guard[ℓ − 1]`.
    pub guard: Vec<Complex>,
    pub graph: CodeGraph,
}

impl CsDesign {
    /// `bins` bins, every column in `degree` distinct bins.
    pub fn new(n: usize, bins: usize, degree: usize, seed: RngSeed) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("signal length must be positive"));
        }
        let graph = sample_regular_graph(n, bins, degree, seed.fork("cs-graph"))?;
        let mut rng = seed.fork("cs-guard").rng();
        let guard = (0..n)
            .map(|_| Complex::from_polar(1.0, rng.gen_range(0.0..TAU)))
            .collect();
        Ok(CsDesign {
            n,
            omega: TAU / n as f64,
            guard,
            graph,
        })
    }

    /// `R = ⌈(1+ε)K⌉` bins (at least `degree`).
    pub fn for_sparsity(n: usize, k: usize, eps: f64, degree: usize, seed: RngSeed) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid("ε must be nonnegative"));
        }
        let bins = (((1.0 + eps) * k as f64) - 1e-9).ceil().max(degree as f64) as usize;
        Self::new(n, bins, degree, seed)
    }

    pub fn bins(&self) -> usize {
        self.graph.bins()
    }

    /// `m₁ = 2R + 1`.
    pub fn m1(&self) -> usize {
        2 * self.bins() + 1
    }

    /// Magnitude measurements of the full pipeline, `3m₁ − 2`.
    pub fn m_total(&self) -> usize {
        pr_rows(self.m1())
    }

    fn phasor(&self, l: usize) -> Complex {
        Complex::from_polar(1.0, self.omega * l as f64)
    }
}

/// `z = Cx`: `z[0]` is the guard, `z[1 + 2b]` and `z[2 + 2b]` the two rows of bin `b`.
pub fn cs_encode(x: &SparseSignal, design: &CsDesign) -> Result<Vec<Complex>> {
    if x.n() != design.n {
        return Err(Error::DimensionMismatch {
            expected: design.n,
            found: x.n(),
        });
    }
    let mut z = alloc::vec![Complex::default(); design.m1()];
    for (l, v) in x.iter() {
        z[0] += design.guard[l - 1] * v;
        let w = design.phasor(l) * v;
        for &b in design.graph.bins_of(l) {
            z[1 + 2 * b] += v;
            z[2 + 2 * b] += w;
        }
    }
    Ok(z)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CsOptions {
    pub tol: f64,
    /// Also resolve bins holding two unknowns, accepting a pair only when
    /// another bin of one of its members confirms it.
    pub doubletons: bool,
}

impl Default for CsOptions {
    fn default() -> Self {
        CsOptions {
            tol: DEFAULT_CS_TOL,
            doubletons: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsOutcome {
    pub estimate: SparseSignal,
    /// Every bin and the guard are fully explained by `estimate`.
    pub success: bool,
}

struct CsState<'a> {
    design: &'a CsDesign,
    residual: Vec<[Complex; 2]>,
    guard: Complex,
    recovered: Vec<Option<Complex>>,
    atol: f64,
    rtol: f64,
}

impl CsState<'_> {
    fn is_zero(&self, r: &[Complex; 2]) -> bool {
        r[0].norm() <= self.atol && r[1].norm() <= self.atol
    }

    /// Single unknown explaining `r` in `bin`, skipping `exclude`.
    fn singleton(&self, bin: usize, r: &[Complex; 2], exclude: &[usize]) -> Option<(usize, Complex)> {
        let m = r[0].norm();
        if m <= self.atol || (r[1].norm() - m).abs() > self.rtol * m {
            return None;
        }
        let mut theta = (r[1] / r[0]).arg();
        if theta <= 0.0 {
            theta += TAU;
        }
        let loc = theta / self.design.omega;
        let rounded = loc.round();
        if (loc - rounded).abs() > 1e-6 {
            return None;
        }
        let n = self.design.n;
        let l = match rounded as usize {
            0 => n,
            l if l > n => return None,
            l => l,
        };
        if self.recovered[l - 1].is_some()
            || exclude.contains(&l)
            || self.design.graph.bins_of(l).binary_search(&bin).is_err()
        {
            return None;
        }
        if (r[1] - self.design.phasor(l) * r[0]).norm() > self.rtol * m {
            return None;
        }
        Some((l, r[0]))
    }

    fn recover(&mut self, l: usize, v: Complex, queue: &mut Vec<usize>) {
        self.recovered[l - 1] = Some(v);
        self.guard -= self.design.guard[l - 1] * v;
        let w = self.design.phasor(l) * v;
        for &b in self.design.graph.bins_of(l) {
            self.residual[b][0] -= v;
            self.residual[b][1] -= w;
            queue.push(b);
        }
    }

    fn unknowns(&self, bin: usize) -> Vec<usize> {
        self.design
            .graph
            .neighbors(bin)
            .iter()
            .copied()
            .filter(|&l| self.recovered[l - 1].is_none())
            .collect()
    }

    fn confirms(&self, bin: usize, pair: [(usize, Complex); 2]) -> bool {
        let graph = &self.design.graph;
        for (w, _) in pair {
            for &b in graph.bins_of(w) {
                if b == bin {
                    continue;
                }
                let mut r = self.residual[b];
                for (l, v) in pair {
                    if graph.bins_of(l).binary_search(&b).is_ok() {
                        r[0] -= v;
                        r[1] -= self.design.phasor(l) * v;
                    }
                }
                if self.is_zero(&r) || self.singleton(b, &r, &[pair[0].0, pair[1].0]).is_some() {
                    return true;
                }
            }
        }
        false
    }

    /// Whether removing `pair` leaves every bin and the guard explained.
    fn completes(&self, pair: [(usize, Complex); 2]) -> bool {
        let graph = &self.design.graph;
        let touched = |b: usize| pair.iter().any(|&(l, _)| graph.bins_of(l).binary_search(&b).is_ok());
        for b in 0..self.residual.len() {
            let mut r = self.residual[b];
            if touched(b) {
                for (l, v) in pair {
                    if graph.bins_of(l).binary_search(&b).is_ok() {
                        r[0] -= v;
                        r[1] -= self.design.phasor(l) * v;
                    }
                }
            }
            if !self.is_zero(&r) {
                return false;
            }
        }
        let g = self.guard - pair.iter().map(|&(l, v)| self.design.guard[l - 1] * v).sum::<Complex>();
        g.norm() <= self.atol
    }

    /// The unique confirmed two-unknown explanation of `bin`, if any.
    ///
    /// Two balls that share all their bins leave identical residuals in each,
    /// so several pairs may be confirmed; the guard row then picks the pair
    /// that explains everything.
    fn doubleton(&self, bin: usize) -> Option<[(usize, Complex); 2]> {
        let r = self.residual[bin];
        if self.is_zero(&r) {
            return None;
        }
        let cand = self.unknowns(bin);
        let mut confirmed = Vec::new();
        for (i, &u) in cand.iter().enumerate() {
            let eu = self.design.phasor(u);
            for &v in &cand[i + 1..] {
                let ev = self.design.phasor(v);
                let xv = (r[1] - eu * r[0]) / (ev - eu);
                let xu = r[0] - xv;
                if xu.norm() <= self.atol || xv.norm() <= self.atol {
                    continue;
                }
                let pair = [(u, xu), (v, xv)];
                if self.confirms(bin, pair) {
                    confirmed.push(pair);
                }
            }
        }
        match confirmed.as_slice() {
            [only] => Some(*only),
            [] => None,
            _ => {
                let mut complete = confirmed.into_iter().filter(|&p| self.completes(p));
                match (complete.next(), complete.next()) {
                    (Some(p), None) => Some(p),
                    _ => None,
                }
            }
        }
    }
}

/// Peeling decoder for `z = Cx`.
pub fn cs_decode(z: &[Complex], design: &CsDesign, opts: &CsOptions) -> Result<CsOutcome> {
    if z.len() != design.m1() {
        return Err(Error::DimensionMismatch {
            expected: design.m1(),
            found: z.len(),
        });
    }
    let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let bins = design.bins();
    let mut st = CsState {
        design,
        residual: (0..bins).map(|b| [z[1 + 2 * b], z[2 + 2 * b]]).collect(),
        guard: z[0],
        recovered: alloc::vec![None; design.n],
        atol: opts.tol * scale.max(f64::MIN_POSITIVE),
        rtol: opts.tol,
    };
    let mut queue: Vec<usize> = (0..bins).rev().collect();
    loop {
        while let Some(b) = queue.pop() {
            let r = st.residual[b];
            if let Some((l, v)) = st.singleton(b, &r, &[]) {
                st.recover(l, v, &mut queue);
            }
        }
        if !opts.doubletons || (0..bins).all(|b| st.is_zero(&st.residual[b])) {
            break;
        }
        let Some(pair) = (0..bins).find_map(|b| st.doubleton(b)) else {
            break;
        };
        for (l, v) in pair {
            st.recover(l, v, &mut queue);
        }
    }
    let success = (0..bins).all(|b| st.is_zero(&st.residual[b])) && st.guard.norm() <= st.atol;
    let estimate = SparseSignal::from_entries(
        design.n,
        st.recovered
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|v| (i + 1, v))),
    )?;
    Ok(CsOutcome { estimate, success })
}

/// `3m₁ − 2`.
pub fn pr_rows(m1: usize) -> usize {
    3 * m1 - 2
}

/// Row layout of `B` for an `m₁`-long `z` (0-based indices).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrDesign {
    pub m1: usize,
}

impl PrDesign {
    pub fn rows(&self) -> usize {
        pr_rows(self.m1)
    }

    /// `(ℓ, c)` of row `r`: `|z_ℓ|` when `c` is `None`, otherwise `|z₁ + c·z_ℓ|`.
    pub fn row(&self, r: usize) -> (usize, Option<Complex>) {
        let m = self.m1;
        if r < m {
            (r, None)
        } else if r < 2 * m - 1 {
            (r - m + 1, Some(Complex::new(1.0, 0.0)))
        } else {
            (r + 2 - 2 * m, Some(Complex::i()))
        }
    }
}

/// `y = |Bz|`.
pub fn pr_measure(z: &[Complex]) -> Vec<f64> {
    let pr = PrDesign { m1: z.len() };
    (0..pr.rows())
        .map(|r| match pr.row(r) {
            (l, None) => z[l].norm(),
            (l, Some(c)) => (z[0] + c * z[l]).norm(),
        })
        .collect()
}

/// Recovers `z` from `|Bz|` with `ẑ₁ = |z₁|` real and positive.
///
/// Entries with magnitude at most `tol·max|y|` are set to zero.
pub fn phase_layer_recover(y: &[f64], m1: usize, tol: f64) -> Result<Vec<Complex>> {
    if m1 == 0 || y.len() != pr_rows(m1) {
        return Err(Error::DimensionMismatch {
            expected: pr_rows(m1.max(1)),
            found: y.len(),
        });
    }
    let atol = tol * y.iter().copied().fold(0.0, f64::max);
    let reference = y[0];
    if reference <= atol {
        return Err(Error::ReferenceVanished);
    }
    let mut z = alloc::vec![Complex::default(); m1];
    z[0] = Complex::new(reference, 0.0);
    for l in 1..m1 {
        let target = y[l];
        if target <= atol {
            continue;
        }
        let m = AlignmentMagnitudes {
            reference,
            target,
            sum: y[m1 + l - 1],
            quadrature: y[2 * m1 + l - 2],
        };
        z[l] = Complex::from_polar(target, align_phase(&m, atol)?);
    }
    Ok(z)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoLayerOutcome {
    pub estimate: SparseSignal,
    pub success: bool,
    /// Magnitude measurements used, `3m₁ − 2`.
    pub m_total: usize,
}

/// `y = |BCx|`, then the phase layer, then the codec.
pub fn two_layer_pipeline(x: &SparseSignal, design: &CsDesign, tol: f64) -> Result<TwoLayerOutcome> {
    let z = cs_encode(x, design)?;
    let y = pr_measure(&z);
    let m_total = y.len();
    if x.is_empty() {
        return Ok(TwoLayerOutcome {
            estimate: SparseSignal::new(x.n()),
            success: true,
            m_total,
        });
    }
    let zhat = phase_layer_recover(&y, design.m1(), tol)?;
    let out = cs_decode(&zhat, design, &CsOptions::default())?;
    Ok(TwoLayerOutcome {
        estimate: out.estimate,
        success: out.success,
        m_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{global_phase_error, random_sparse_signal};
    use core::f64::consts::SQRT_2;

    fn random_z(m1: usize, seed: u64) -> Vec<Complex> {
        let mut rng = RngSeed(seed).rng();
        (0..m1)
            .map(|_| Complex::from_polar(rng.gen_range(0.1..2.0), rng.gen_range(0.0..TAU)))
            .collect()
    }

    fn phase_error(z: &[Complex], zhat: &[Complex]) -> f64 {
        let n = z.len();
        let a = SparseSignal::from_entries(n, z.iter().enumerate().map(|(i, &v)| (i + 1, v))).unwrap();
        let b = SparseSignal::from_entries(n, zhat.iter().enumerate().map(|(i, &v)| (i + 1, v))).unwrap();
        global_phase_error(&a, &b).unwrap()
    }

    #[test]
    fn worked_phase_example() {
        let z = [Complex::new(1.0, 0.0), Complex::i()];
        let y = pr_measure(&z);
        assert_eq!(y.len(), 4);
        let want = [1.0, 1.0, SQRT_2, 0.0];
        for (a, b) in y.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        let zhat = phase_layer_recover(&y, 2, DEFAULT_PHASE_TOL).unwrap();
        assert!((zhat[0] - z[0]).norm() < 1e-12);
        assert!((zhat[1] - z[1]).norm() < 1e-12);
    }

    #[test]
    fn zero_entries_stay_zero() {
        let mut z = random_z(8, 1);
        z[3] = Complex::default();
        let zhat = phase_layer_recover(&pr_measure(&z), 8, DEFAULT_PHASE_TOL).unwrap();
        assert_eq!(zhat[3], Complex::default());
        assert!(phase_error(&z, &zhat) < 1e-12);
    }

    #[test]
    fn vanished_reference_is_an_error() {
        let mut z = random_z(4, 2);
        z[0] = Complex::default();
        assert_eq!(
            phase_layer_recover(&pr_measure(&z), 4, DEFAULT_PHASE_TOL),
            Err(Error::ReferenceVanished)
        );
        assert!(phase_layer_recover(&[1.0, 2.0], 4, 1e-9).is_err());
    }

    #[test]
    fn phase_layer_inverts_random_vectors() {
        for s in 0..100 {
            let z = random_z(64, 100 + s);
            let zhat = phase_layer_recover(&pr_measure(&z), 64, DEFAULT_PHASE_TOL).unwrap();
            assert!(phase_error(&z, &zhat) < 1e-9);
        }
    }

    #[test]
    fn row_layout() {
        let pr = PrDesign { m1: 4 };
        assert_eq!(pr.rows(), 10);
        assert_eq!(pr.row(0), (0, None));
        assert_eq!(pr.row(3), (3, None));
        assert_eq!(pr.row(4), (1, Some(Complex::new(1.0, 0.0))));
        assert_eq!(pr.row(6), (3, Some(Complex::new(1.0, 0.0))));
        assert_eq!(pr.row(7), (1, Some(Complex::i())));
        assert_eq!(pr.row(9), (3, Some(Complex::i())));
    }

    #[test]
    fn encode_basics() {
        let d = CsDesign::new(100, 20, 3, RngSeed(1)).unwrap();
        assert_eq!(d.m1(), 41);
        let z = cs_encode(&SparseSignal::new(100), &d).unwrap();
        assert!(z.iter().all(|v| v.norm() == 0.0));

        let v = Complex::new(0.3, -1.2);
        let x = SparseSignal::from_entries(100, [(17, v)]).unwrap();
        let z = cs_encode(&x, &d).unwrap();
        for b in 0..20 {
            let (a, w) = (z[1 + 2 * b], z[2 + 2 * b]);
            if d.graph.bins_of(17).contains(&b) {
                assert_eq!(a, v);
                assert!((w - d.phasor(17) * v).norm() < 1e-15);
            } else {
                assert_eq!(a, Complex::default());
                assert_eq!(w, Complex::default());
            }
        }
        assert!(cs_encode(&SparseSignal::new(99), &d).is_err());
    }

    #[test]
    fn encode_is_linear() {
        let d = CsDesign::new(300, 40, 3, RngSeed(2)).unwrap();
        for t in 0..20 {
            let a = random_sparse_signal(300, 10, RngSeed(10 + t), (0.5, 2.0)).unwrap();
            let b = random_sparse_signal(300, 10, RngSeed(50 + t), (0.5, 2.0)).unwrap();
            let mut sum = a.clone();
            for (l, v) in b.iter() {
                sum.insert(l, a.get(l) + v).unwrap();
            }
            let (za, zb, zs) = (
                cs_encode(&a, &d).unwrap(),
                cs_encode(&b, &d).unwrap(),
                cs_encode(&sum, &d).unwrap(),
            );
            for i in 0..za.len() {
                assert!((za[i] + zb[i] - zs[i]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_empty_and_single() {
        let d = CsDesign::new(200, 10, 3, RngSeed(3)).unwrap();
        let out = cs_decode(&cs_encode(&SparseSignal::new(200), &d).unwrap(), &d, &CsOptions::default()).unwrap();
        assert!(out.success && out.estimate.is_empty());

        let x = SparseSignal::from_entries(200, [(200, Complex::new(0.0, 2.0))]).unwrap();
        let out = cs_decode(&cs_encode(&x, &d).unwrap(), &d, &CsOptions::default()).unwrap();
        assert!(out.success);
        assert!((out.estimate.get(200) - x.get(200)).norm() < 1e-12);
    }

    #[test]
    fn decode_consistent_when_successful() {
        let (n, k) = (1000, 50);
        let mut ok = 0;
        for t in 0..20u64 {
            let d = CsDesign::for_sparsity(n, k, 0.1, 3, RngSeed(500 + t)).unwrap();
            let x = random_sparse_signal(n, k, RngSeed(900 + t), (0.5, 2.0)).unwrap();
            let z = cs_encode(&x, &d).unwrap();
            let out = cs_decode(&z, &d, &CsOptions::default()).unwrap();
            if out.success {
                ok += 1;
                let zhat = cs_encode(&out.estimate, &d).unwrap();
                let scale = z.iter().map(|v| v.norm()).fold(0.0, f64::max);
                for (a, b) in z.iter().zip(&zhat) {
                    assert!((a - b).norm() <= 1e-9 * scale);
                }
                assert!(global_phase_error(&x, &out.estimate).unwrap() < 1e-10);
            }
            // Never a wrong entry, success or not.
            for (l, v) in out.estimate.iter() {
                assert!((x.get(l) - v).norm() < 1e-8);
            }
        }
        assert!(ok >= 18, "{ok}/20");
    }

    #[test]
    fn doubletons_needed_near_two_k() {
        let (n, k) = (1000, 50);
        let (mut plain, mut full) = (0, 0);
        for t in 0..20u64 {
            let d = CsDesign::for_sparsity(n, k, 0.1, 3, RngSeed(700 + t)).unwrap();
            let x = random_sparse_signal(n, k, RngSeed(800 + t), (0.5, 2.0)).unwrap();
            let z = cs_encode(&x, &d).unwrap();
            let singles = CsOptions {
                doubletons: false,
                ..CsOptions::default()
            };
            plain += cs_decode(&z, &d, &singles).unwrap().success as usize;
            full += cs_decode(&z, &d, &CsOptions::default()).unwrap().success as usize;
        }
        assert!(full > plain);
    }

    #[test]
    fn pipeline_counts_and_recovers() {
        let (n, k) = (1000, 50);
        let d = CsDesign::for_sparsity(n, k, 0.1, 3, RngSeed(42)).unwrap();
        assert_eq!(d.bins(), 55);
        assert_eq!(d.m_total(), 3 * (2 * 55 + 1) - 2);
        let x = SparseSignal::new(n);
        let out = two_layer_pipeline(&x, &d, DEFAULT_PHASE_TOL).unwrap();
        assert!(out.success && out.estimate.is_empty());
        assert_eq!(out.m_total, 331);
    }
}
