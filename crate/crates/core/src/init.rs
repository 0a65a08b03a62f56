//! Seeding the decoder with a few fully known balls.
//!
//! Two routes are provided. Active sensing spends `3⌈ε₂K⌉` extra rows on a
//! one-edge-per-column graph and reads locations and magnitudes off its
//! singleton rows with a ratio test. Known support assumes a handful of active
//! locations are given. Either way the relative phases are then fixed with
//! `|x_r + x_ℓ|` and `|x_r + i·x_ℓ|` against one reference `x_r`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measurement::{measure_rows, GenericRow, TrigParams};
use crate::signal::{Complex, RngSeed, SparseSignal};

/// Relative tolerance of the `ỹ₁/ỹ₂ = 1` test.
pub const RATIO_TOL: f64 = 1e-8;
/// Allowed distance of `cos⁻¹(ỹ₃/ỹ₁)/ω` from an integer.
pub const LOCATION_TOL: f64 = 1e-6;
/// Magnitudes at or below this are treated as zero during alignment.
pub const MAGNITUDE_TOL: f64 = 1e-12;

/// One-edge-per-column sensing graph.
#[derive(Clone, Debug, PartialEq)]
pub struct ActiveSensingDesign {
    pub eps2: f64,
    pub rows: usize,
    /// `assignment[ℓ − 1]` is the (0-based) row of column `ℓ`.
    pub assignment: Vec<usize>,
}

impl ActiveSensingDesign {
    /// `⌈ε₂K⌉` rows, each column placed in one uniformly chosen row.
    pub fn new(n: usize, k: usize, eps2: f64, seed: RngSeed) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("signal length must be positive"));
        }
        if !(eps2 > 0.0 && eps2.is_finite()) {
            return Err(Error::invalid("ε₂ must be positive"));
        }
        let rows = ((eps2 * k as f64) - 1e-9).ceil().max(1.0) as usize;
        let mut rng = seed.rng();
        let assignment = (0..n).map(|_| rng.gen_range(0..rows)).collect();
        Ok(ActiveSensingDesign {
            eps2,
            rows,
            assignment,
        })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitDesign {
    ActiveSensing(ActiveSensingDesign),
    KnownSupport { locations: Vec<usize> },
}

/// `(ỹ₁, ỹ₂, ỹ₃) = (|Σx_ℓ|, |Σe^{iωℓ}x_ℓ|, |Σcos(ωℓ)x_ℓ|)` per sensing row.
pub fn active_measure(x: &SparseSignal, design: &ActiveSensingDesign, trig: &TrigParams) -> Result<Vec<[f64; 3]>> {
    if x.n() != design.n() || trig.n != design.n() {
        return Err(Error::DimensionMismatch {
            expected: design.n(),
            found: x.n(),
        });
    }
    let mut sums = alloc::vec![[Complex::default(); 3]; design.rows];
    for (l, v) in x.iter() {
        let psi = trig.omega * l as f64;
        let row = &mut sums[design.assignment[l - 1]];
        row[0] += v;
        row[1] += Complex::from_polar(1.0, psi) * v;
        row[2] += v * psi.cos();
    }
    Ok(sums
        .iter()
        .map(|s| [s[0].norm(), s[1].norm(), s[2].norm()])
        .collect())
}

/// Ratio test on each sensing row. Returns `(ℓ̂, |x_ℓ̂|)` sorted by location.
pub fn detect_singletons(ytilde: &[[f64; 3]], design: &ActiveSensingDesign, trig: &TrigParams) -> Vec<(usize, f64)> {
    let mut found = Vec::new();
    for (row, &[y1, y2, y3]) in ytilde.iter().enumerate() {
        if y1 <= MAGNITUDE_TOL || y2 <= MAGNITUDE_TOL {
            continue;
        }
        if (y1 / y2 - 1.0).abs() > RATIO_TOL {
            continue;
        }
        let loc = (y3 / y1).clamp(0.0, 1.0).acos() / trig.omega;
        let l = loc.round();
        if (loc - l).abs() > LOCATION_TOL || l < 1.0 || l > design.n() as f64 {
            continue;
        }
        let l = l as usize;
        if design.assignment[l - 1] != row {
            continue;
        }
        found.push((l, y1));
    }
    found.sort_unstable_by_key(|&(l, _)| l);
    found
}

pub fn active_sense(x: &SparseSignal, design: &ActiveSensingDesign, trig: &TrigParams) -> Result<Vec<(usize, f64)>> {
    let ytilde = active_measure(x, design, trig)?;
    Ok(detect_singletons(&ytilde, design, trig))
}

/// Magnitudes relating one target `x_ℓ` to the reference `x_r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentMagnitudes {
    pub reference: f64,
    pub target: f64,
    /// `|x_r + x_ℓ|`.
    pub sum: f64,
    /// `|x_r + i·x_ℓ|`.
    pub quadrature: f64,
}

/// Phase of `x_ℓ` relative to `x_r`, in `(−π, π]`.
///
/// The cosine law on `|x_r + x_ℓ|` gives `cos φ`, which leaves the sign of
/// `φ` open; the same law on `|x_r + i·x_ℓ|` gives `sin φ` and settles it.
/// Taking `atan2` of the pair selects the same sign as forward-evaluating
/// both hypotheses, and avoids the `√ε` loss of `acos` near `φ = 0, π`.
pub fn align_phase(m: &AlignmentMagnitudes, tol: f64) -> Result<f64> {
    if m.reference <= tol || m.target <= tol {
        return Err(Error::invalid("alignment needs two nonzero magnitudes"));
    }
    let norm = 2.0 * m.reference * m.target;
    let both = m.reference * m.reference + m.target * m.target;
    let cos = ((m.sum * m.sum - both) / norm).clamp(-1.0, 1.0);
    let sin = ((both - m.quadrature * m.quadrature) / norm).clamp(-1.0, 1.0);
    Ok(sin.atan2(cos))
}

/// [`align_phase`] for several targets against one reference magnitude.
pub fn align_phases(targets: &[AlignmentMagnitudes], tol: f64) -> Vec<Result<f64>> {
    targets.iter().map(|m| align_phase(m, tol)).collect()
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct SeedSet {
    /// Seed values, exact up to one shared global phase; the reference is
    /// real and positive.
    pub seeds: BTreeMap<usize, Complex>,
    /// Extra magnitude measurements spent.
    pub rows_used: usize,
    /// Locations that could not be seeded.
    pub excluded: Vec<usize>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }
}

/// Aligns `known` (location, magnitude) pairs against the first entry,
/// measuring `2(K₁ − 1)` pair rows on `x`.
fn align_known(x: &SparseSignal, known: &[(usize, f64)], out: &mut SeedSet) -> Result<()> {
    let Some(&(r, ref_mag)) = known.first() else {
        return Ok(());
    };
    out.seeds.insert(r, Complex::new(ref_mag, 0.0));
    let mut rows = Vec::with_capacity(2 * known.len());
    for &(l, _) in &known[1..] {
        rows.push(GenericRow::pair(r, l, Complex::new(1.0, 0.0)));
        rows.push(GenericRow::pair(r, l, Complex::i()));
    }
    let y = measure_rows(x, &rows)?;
    out.rows_used += rows.len();
    for (j, &(l, mag)) in known[1..].iter().enumerate() {
        let m = AlignmentMagnitudes {
            reference: ref_mag,
            target: mag,
            sum: y[2 * j],
            quadrature: y[2 * j + 1],
        };
        match align_phase(&m, MAGNITUDE_TOL) {
            Ok(phi) => {
                out.seeds.insert(l, Complex::from_polar(mag, phi));
            }
            Err(_) => out.excluded.push(l),
        }
    }
    Ok(())
}

/// Runs the initialization stage of `design` on `x`.
///
/// Row accounting: active sensing uses `3⌈ε₂K⌉ + 2K₁ − 2` rows when it finds
/// `K₁ ≥ 1` singletons (`3⌈ε₂K⌉` when it finds none); known support uses
/// `K₁ + 2(K₁' − 1)` rows where `K₁'` of the `K₁` listed locations turn out
/// active, i.e. `3K₁ − 2` when all are.
pub fn build_seed_set(x: &SparseSignal, design: &InitDesign, trig: &TrigParams) -> Result<SeedSet> {
    let mut out = SeedSet::default();
    match design {
        InitDesign::ActiveSensing(d) => {
            let found = active_sense(x, d, trig)?;
            out.rows_used = 3 * d.rows;
            align_known(x, &found, &mut out)?;
        }
        InitDesign::KnownSupport { locations } => {
            let rows: Vec<GenericRow> = locations.iter().map(|&l| GenericRow::unit(l)).collect();
            let mags = measure_rows(x, &rows)?;
            out.rows_used = rows.len();
            let mut known = Vec::with_capacity(locations.len());
            for (&l, &m) in locations.iter().zip(&mags) {
                if m <= MAGNITUDE_TOL {
                    log::warn!("known-support location {l} is inactive; not seeded");
                    out.excluded.push(l);
                } else {
                    known.push((l, m));
                }
            }
            align_known(x, &known, &mut out)?;
        }
    }
    Ok(out)
}

/// `⌈δK⌉` support locations of `x` drawn uniformly without replacement,
/// sorted.
pub fn known_support_locations(x: &SparseSignal, delta: f64, seed: RngSeed) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::invalid("δ must lie in [0, 1]"));
    }
    let support: Vec<usize> = x.support().collect();
    let k1 = ((delta * support.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let k1 = k1.min(support.len());
    let mut rng = seed.rng();
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, support.len(), k1)
        .into_iter()
        .map(|i| support[i])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}
