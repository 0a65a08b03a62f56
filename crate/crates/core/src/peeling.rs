//! Ball-coloring decoder.
//!
//! A ball (active signal slot) is *colored* once its location and complex
//! value are known relative to the common reference phase. A bin whose active
//! neighbours are all colored except one exposes the missing one: with the
//! colored contributions `(a, b, c, d)` known, the bin's magnitudes read
//!
//! ```text
//! y₁ = |a + e^{iωℓ} x|   y₂ = |b + e^{−iωℓ} x|   y₃ = |c + 2cos(ωℓ) x|   y₄ = |d + e^{iω′ℓ} x|
//! ```
//!
//! For each uncolored neighbour `ℓ` the first two equations become two
//! circles in `w = e^{iωℓ} x`; their intersections are checked against the
//! last two. A bin is resolved only when exactly one `(ℓ, x)` survives.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::graph::CodeGraph;
use crate::measurement::{BinObservation, TrigParams};
use crate::signal::{Complex, SparseSignal};

/// Known contributions `(a, b, c, d)` of the colored balls of one bin.
pub type Residual = [Complex; 4];

/// Default relative tolerance for noiseless double-precision data.
pub const DEFAULT_TOL: f64 = 1e-8;

/// Candidate values below this fraction of the bin's magnitudes are treated
/// as zero.
pub const MIN_MAGNITUDE: f64 = 1e-6;

/// One `(ℓ, x)` hypothesis that satisfies all four equations of a bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CandidateSolution {
    pub location: usize,
    pub value: Complex,
    /// Largest relative mismatch over the four equations.
    pub residual: f64,
}

fn mismatch(pred: f64, y: f64) -> f64 {
    (pred - y).abs() / y.max(1.0)
}

fn is_zero_residual(r: &Residual) -> bool {
    r.iter().all(|v| v.re == 0.0 && v.im == 0.0)
}

fn check_all(obs: &BinObservation, residual: &Residual, col: &[Complex; 4], x: Complex) -> f64 {
    (0..4)
        .map(|k| mismatch((residual[k] + col[k] * x).norm(), obs.0[k]))
        .fold(0.0, f64::max)
}

/// A few Gauss-Newton steps on all four magnitude equations.
///
/// Near-tangent circles pin `x` only to `√ε`; the check rows restore full
/// precision. Moves larger than `10⁻⁶·|x|` are rejected so that a wrong
/// hypothesis cannot drift onto a different point.
fn refine(obs: &BinObservation, residual: &Residual, col: &[Complex; 4], start: Complex) -> Complex {
    let mut x = start;
    let cost = |x: Complex| {
        (0..4)
            .map(|k| {
                let r = (residual[k] + col[k] * x).norm() - obs.0[k];
                r * r
            })
            .sum::<f64>()
    };
    let mut c = cost(x);
    for _ in 0..4 {
        let (mut a, mut b, mut d, mut g0, mut g1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for k in 0..4 {
            let u = residual[k] + col[k] * x;
            let m = u.norm();
            if m == 0.0 || col[k].norm() == 0.0 {
                continue;
            }
            let r = m - obs.0[k];
            let j0 = (u.conj() * col[k]).re / m;
            let j1 = -(u.conj() * col[k]).im / m;
            a += j0 * j0;
            b += j0 * j1;
            d += j1 * j1;
            g0 += j0 * r;
            g1 += j1 * r;
        }
        let det = a * d - b * b;
        if !(det > 1e-12 * (a * d).max(f64::MIN_POSITIVE)) {
            break;
        }
        let step = Complex::new((d * g0 - b * g1) / det, (a * g1 - b * g0) / det);
        let next = x - step;
        let cn = cost(next);
        if !(cn < c) {
            break;
        }
        x = next;
        c = cn;
    }
    if (x - start).norm() <= 1e-6 * start.norm() {
        x
    } else {
        start
    }
}

/// Intersections of `|w − c₁| = r₁` and `|w − c₂| = r₂`.
///
/// Returns `None` for (near-)concentric circles. Tangency within rounding is
/// reported as a single point.
fn circle_intersections(c1: Complex, r1: f64, c2: Complex, r2: f64, tol: f64) -> Option<([Complex; 2], usize)> {
    let dvec = c2 - c1;
    let dist = dvec.norm();
    if dist < tol {
        return None;
    }
    let along = (r1 * r1 - r2 * r2 + dist * dist) / (2.0 * dist);
    let h2 = r1 * r1 - along * along;
    let scale = r1.max(r2).max(dist).max(1.0);
    if h2 < -1e-12 * scale * scale {
        return Some(([Complex::default(); 2], 0));
    }
    let u = dvec / dist;
    let base = c1 + u * along;
    if h2 <= 0.0 {
        return Some(([base, base], 1));
    }
    let off = Complex::new(-u.im, u.re) * h2.sqrt();
    Some(([base + off, base - off], 2))
}

/// Guess-and-check over `candidate_locs` for a bin with exactly one unknown.
///
/// With an all-zero residual (no colored neighbour) the bin can only be a
/// lone ball; its phase is free, so the value is reported as the real
/// magnitude `y₁` and the location is fixed by the cosine row.
pub fn solve_single_unknown(
    obs: &BinObservation,
    residual: &Residual,
    candidate_locs: &[usize],
    trig: &TrigParams,
    tol: f64,
) -> Vec<CandidateSolution> {
    let [y1, y2, _, y4] = obs.0;
    let mut out = Vec::new();
    if is_zero_residual(residual) {
        if y1 <= tol || mismatch(y2, y1) > tol || mismatch(y4, y1) > tol {
            return out;
        }
        for &l in candidate_locs {
            let col = trig.column(l);
            let x = Complex::new(y1, 0.0);
            let err = check_all(obs, residual, &col, x);
            if err <= tol {
                out.push(CandidateSolution {
                    location: l,
                    value: x,
                    residual: err,
                });
            }
        }
        return out;
    }
    let [a, b, _, _] = *residual;
    // Values this small only mop up rounding left in an explained bin.
    let negligible = MIN_MAGNITUDE * y1.max(y2).max(1.0);
    for &l in candidate_locs {
        let col = trig.column(l);
        let rot2 = col[0] * col[0];
        let Some((points, count)) = circle_intersections(-a, y1, -b * rot2, y2, tol) else {
            continue;
        };
        let mut found: Option<CandidateSolution> = None;
        for &w in &points[..count] {
            let x = refine(obs, residual, &col, w * col[1]);
            if x.norm() <= negligible {
                continue;
            }
            let err = check_all(obs, residual, &col, x);
            if err > tol {
                continue;
            }
            match found {
                Some(prev) if (prev.value - x).norm() <= tol * x.norm().max(1.0) => {}
                Some(prev) => {
                    out.push(prev);
                    found = Some(CandidateSolution {
                        location: l,
                        value: x,
                        residual: err,
                    });
                }
                None => {
                    found = Some(CandidateSolution {
                        location: l,
                        value: x,
                        residual: err,
                    })
                }
            }
        }
        out.extend(found);
    }
    out
}

/// Outcome of examining one bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resolution {
    /// The colored neighbours account for all four magnitudes.
    FullyExplained,
    /// Exactly one hypothesis survived.
    NewBall(usize, Complex),
    /// No colored neighbour, no surviving hypothesis, or several.
    Stuck,
}

/// One coloring performed by the decoder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ColoringEvent {
    pub iteration: usize,
    pub bin: usize,
    pub location: usize,
    pub magnitude: f64,
    pub residual: f64,
}

/// Mutable state of one decode run.
#[derive(Clone, Debug)]
pub struct DecoderState {
    colored: Vec<Option<Complex>>,
    order: Vec<usize>,
    residual: Vec<Residual>,
    colored_in_bin: Vec<u32>,
    queue: VecDeque<(usize, usize)>,
    queued: Vec<bool>,
    iterations: usize,
}

impl DecoderState {
    pub fn new(n: usize, bins: usize) -> Self {
        DecoderState {
            colored: alloc::vec![None; n],
            order: Vec::new(),
            residual: alloc::vec![[Complex::default(); 4]; bins],
            colored_in_bin: alloc::vec![0; bins],
            queue: VecDeque::new(),
            queued: alloc::vec![false; bins],
            iterations: 0,
        }
    }

    pub fn value(&self, l: usize) -> Option<Complex> {
        self.colored[l - 1]
    }

    pub fn is_colored(&self, l: usize) -> bool {
        self.colored[l - 1].is_some()
    }

    pub fn colored_count(&self) -> usize {
        self.order.len()
    }

    pub fn residual(&self, bin: usize) -> &Residual {
        &self.residual[bin]
    }

    pub fn colored_neighbors(&self, bin: usize) -> usize {
        self.colored_in_bin[bin] as usize
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Colors ball `l` with `value` and schedules its bins for generation
    /// `generation`.
    pub fn color(&mut self, l: usize, value: Complex, graph: &CodeGraph, trig: &TrigParams, generation: usize) {
        debug_assert!(self.colored[l - 1].is_none(), "ball {l} colored twice");
        self.colored[l - 1] = Some(value);
        self.order.push(l);
        let col = trig.column(l);
        for &b in graph.bins_of(l) {
            for k in 0..4 {
                self.residual[b][k] += col[k] * value;
            }
            self.colored_in_bin[b] += 1;
            if !self.queued[b] {
                self.queued[b] = true;
                self.queue.push_back((b, generation));
            }
        }
    }

    /// Relative gap between the maintained residual of `bin` and a fresh sum
    /// over its colored neighbours.
    pub fn residual_drift(&self, bin: usize, graph: &CodeGraph, trig: &TrigParams) -> f64 {
        let mut fresh = [Complex::default(); 4];
        let mut scale = 1.0f64;
        for &l in graph.neighbors(bin) {
            if let Some(v) = self.colored[l - 1] {
                let col = trig.column(l);
                for k in 0..4 {
                    fresh[k] += col[k] * v;
                }
                scale = scale.max(2.0 * v.norm());
            }
        }
        let cos_identity = (self.residual[bin][2] - self.residual[bin][0] - self.residual[bin][1]).norm();
        (0..4)
            .map(|k| (fresh[k] - self.residual[bin][k]).norm())
            .fold(cos_identity, f64::max)
            / scale
    }

    /// The colored balls as a signal.
    pub fn estimate(&self, n: usize) -> SparseSignal {
        let mut s = SparseSignal::new(n);
        for &l in &self.order {
            if let Some(v) = self.colored[l - 1] {
                // Values come from finite observations and are nonzero.
                let _ = s.insert(l, v);
            }
        }
        s
    }
}

/// Examines one bin against the current coloring.
pub fn try_resolve_bin(
    state: &DecoderState,
    bin: usize,
    obs: &BinObservation,
    graph: &CodeGraph,
    trig: &TrigParams,
    tol: f64,
) -> Resolution {
    let res = state.residual(bin);
    if (0..4).all(|k| mismatch(res[k].norm(), obs.0[k]) <= tol) {
        return Resolution::FullyExplained;
    }
    if state.colored_neighbors(bin) == 0 {
        return Resolution::Stuck;
    }
    let candidates: Vec<usize> = graph
        .neighbors(bin)
        .iter()
        .copied()
        .filter(|&l| !state.is_colored(l))
        .collect();
    match solve_single_unknown(obs, res, &candidates, trig, tol).as_slice() {
        [only] => Resolution::NewBall(only.location, only.value),
        _ => Resolution::Stuck,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeelingOptions {
    /// Relative tolerance of every magnitude comparison.
    pub tol: f64,
    /// Record a [`ColoringEvent`] per coloring.
    pub trace: bool,
    /// Recompute the residuals of touched bins after every coloring and
    /// panic on drift. On by default in debug builds.
    pub check_invariants: bool,
}

impl Default for PeelingOptions {
    fn default() -> Self {
        PeelingOptions {
            tol: DEFAULT_TOL,
            trace: false,
            check_invariants: cfg!(debug_assertions),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeelingOutcome {
    pub estimate: SparseSignal,
    /// Number of colored balls, seeds included.
    pub colored: usize,
    /// Longest chain of bin generations processed (seeds' bins are
    /// generation 1).
    pub iterations: usize,
    /// Bin examinations performed.
    pub attempts: usize,
    pub trace: Vec<ColoringEvent>,
}

fn validate(obs: &[BinObservation], graph: &CodeGraph, trig: &TrigParams) -> Result<()> {
    if obs.len() != graph.bins() {
        return Err(Error::DimensionMismatch {
            expected: graph.bins(),
            found: obs.len(),
        });
    }
    if trig.n != graph.n() {
        return Err(Error::DimensionMismatch {
            expected: graph.n(),
            found: trig.n,
        });
    }
    Ok(())
}

/// Spreads the coloring from `seeds` until no queued bin makes progress.
///
/// Seeds must agree with the true signal up to one common phase. An empty
/// seed set returns at once with nothing colored.
pub fn run_peeling(
    obs: &[BinObservation],
    graph: &CodeGraph,
    trig: &TrigParams,
    seeds: &BTreeMap<usize, Complex>,
    opts: &PeelingOptions,
) -> Result<PeelingOutcome> {
    validate(obs, graph, trig)?;
    let n = graph.n();
    if let Some(&bad) = seeds.keys().find(|&&l| l == 0 || l > n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    let mut state = DecoderState::new(n, graph.bins());
    let mut trace = Vec::new();
    let mut attempts = 0;
    if seeds.is_empty() {
        return Ok(PeelingOutcome {
            estimate: state.estimate(n),
            colored: 0,
            iterations: 0,
            attempts,
            trace,
        });
    }
    for (&l, &v) in seeds {
        state.color(l, v, graph, trig, 1);
    }
    while let Some((bin, generation)) = state.queue.pop_front() {
        state.queued[bin] = false;
        state.iterations = state.iterations.max(generation);
        attempts += 1;
        if let Resolution::NewBall(l, x) = try_resolve_bin(&state, bin, &obs[bin], graph, trig, opts.tol) {
            if opts.trace {
                trace.push(ColoringEvent {
                    iteration: generation,
                    bin,
                    location: l,
                    magnitude: x.norm(),
                    residual: check_all(&obs[bin], state.residual(bin), &trig.column(l), x),
                });
            }
            state.color(l, x, graph, trig, generation + 1);
            if opts.check_invariants {
                for &b in graph.bins_of(l) {
                    let drift = state.residual_drift(b, graph, trig);
                    assert!(drift <= 1e-9, "residual drift {drift:e} at bin {b}");
                }
            }
        }
    }
    Ok(PeelingOutcome {
        estimate: state.estimate(n),
        colored: state.colored_count(),
        iterations: state.iterations,
        attempts,
        trace,
    })
}

/// A bin that holds exactly one active ball, as seen from its magnitudes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Singleton {
    pub bin: usize,
    pub location: usize,
    pub magnitude: f64,
}

/// Bins whose four magnitudes are explained by a single neighbour, in bin
/// order, one entry per location.
pub fn find_singletons(obs: &[BinObservation], graph: &CodeGraph, trig: &TrigParams, tol: f64) -> Result<Vec<Singleton>> {
    validate(obs, graph, trig)?;
    let zero = [Complex::default(); 4];
    let mut seen = alloc::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (bin, y) in obs.iter().enumerate() {
        if let [only] = solve_single_unknown(y, &zero, graph.neighbors(bin), trig, tol).as_slice() {
            if seen.insert(only.location) {
                out.push(Singleton {
                    bin,
                    location: only.location,
                    magnitude: only.value.re,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnseededOptions {
    pub peeling: PeelingOptions,
    /// Singleton starts tried before giving up.
    pub max_restarts: usize,
    /// A start is kept once it colors at least this fraction of the nonzero
    /// bins.
    pub accept_fraction: f64,
}

impl Default for UnseededOptions {
    fn default() -> Self {
        UnseededOptions {
            peeling: PeelingOptions::default(),
            max_restarts: 64,
            accept_fraction: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UnseededOutcome {
    pub outcome: PeelingOutcome,
    /// Singleton starts tried.
    pub starts: usize,
    pub singletons: usize,
}

/// Decodes without side information: a lone ball in a singleton bin is
/// colored with real value `y₁`, fixing the reference phase, and the coloring
/// spreads from it. Starts whose coloring dies out early are discarded and
/// the next singleton is tried; the largest coloring is returned.
pub fn run_unseeded(
    obs: &[BinObservation],
    graph: &CodeGraph,
    trig: &TrigParams,
    opts: &UnseededOptions,
) -> Result<UnseededOutcome> {
    let singletons = find_singletons(obs, graph, trig, opts.peeling.tol)?;
    let nonzero = obs.iter().filter(|y| !y.is_zero(opts.peeling.tol)).count();
    let target = (opts.accept_fraction * nonzero as f64).ceil() as usize;
    let mut best = run_peeling(obs, graph, trig, &BTreeMap::new(), &opts.peeling)?;
    let mut starts = 0;
    for s in singletons.iter().take(opts.max_restarts) {
        starts += 1;
        let seeds = BTreeMap::from([(s.location, Complex::new(s.magnitude, 0.0))]);
        let run = run_peeling(obs, graph, trig, &seeds, &opts.peeling)?;
        if run.colored > best.colored {
            best = run;
        }
        if best.colored >= target {
            break;
        }
    }
    Ok(UnseededOutcome {
        outcome: best,
        starts,
        singletons: singletons.len(),
    })
}

/// Fraction of the true support left uncolored.
pub fn uncolored_fraction(truth: &SparseSignal, estimate: &SparseSignal) -> f64 {
    let k = truth.sparsity();
    if k == 0 {
        return 0.0;
    }
    truth.support().filter(|&l| !estimate.contains(l)).count() as f64 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{harmonic_lambda, sample_graph, GraphParams};
    use crate::measurement::measure;
    use crate::signal::{random_sparse_signal, RngSeed};
    use rand::seq::SliceRandom;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn forward(residual: &Residual, trig: &TrigParams, l: usize, x: Complex) -> BinObservation {
        let col = trig.column(l);
        BinObservation(core::array::from_fn(|k| (residual[k] + col[k] * x).norm()))
    }

    #[test]
    fn inverts_the_worked_fixture() {
        let trig = TrigParams::with_omega_prime(2, 0.9).unwrap();
        let residual = [c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), Complex::from_polar(1.0, 0.9)];
        let obs = forward(&residual, &trig, 1, c(1.0, 0.0));
        let sols = solve_single_unknown(&obs, &residual, &[1, 2], &trig, DEFAULT_TOL);
        assert_eq!(sols.len(), 1, "{sols:?}");
        assert_eq!(sols[0].location, 1);
        assert!((sols[0].value - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lone_ball_with_empty_residual() {
        let trig = TrigParams::with_omega_prime(16, 2.0).unwrap();
        let zero = [Complex::default(); 4];
        let x = Complex::from_polar(0.7, -2.1);
        let obs = forward(&zero, &trig, 11, x);
        let sols = solve_single_unknown(&obs, &zero, &(1..=16).collect::<Vec<_>>(), &trig, DEFAULT_TOL);
        assert_eq!(sols.len(), 1);
        assert_eq!(sols[0].location, 11);
        assert!((sols[0].value.norm() - 0.7).abs() < 1e-12);
        assert!(solve_single_unknown(&BinObservation::default(), &zero, &[1, 2], &trig, DEFAULT_TOL).is_empty());
    }

    #[test]
    fn concentric_circles_are_skipped() {
        // b·e^{2iψ} = a makes the two circles concentric for every ψ with
        // e^{2iψ} = a/b; here a = b = 0 except through d.
        let trig = TrigParams::with_omega_prime(4, 0.5).unwrap();
        let residual = [Complex::default(), Complex::default(), Complex::default(), c(1.0, 0.0)];
        let obs = BinObservation([1.0, 1.0, 1.0, 1.0]);
        assert!(solve_single_unknown(&obs, &residual, &[1, 2, 3, 4], &trig, DEFAULT_TOL).is_empty());
    }

    /// A graph with one bin holding `members`; every other slot is isolated.
    fn one_bin_graph(n: usize, members: &[usize]) -> CodeGraph {
        let left = (1..=n)
            .map(|l| if members.contains(&l) { alloc::vec![0] } else { Vec::new() })
            .collect();
        CodeGraph::from_left_adjacency(n, 1, left).unwrap()
    }

    fn random_bin_case(seed: u64, active: usize, colored: usize) -> (CodeGraph, TrigParams, SparseSignal, DecoderState) {
        let mut rng = RngSeed(seed).rng();
        let n = 200;
        let mut slots: Vec<usize> = (1..=n).collect();
        slots.shuffle(&mut rng);
        let members = &slots[..20];
        let graph = one_bin_graph(n, members);
        let trig = TrigParams::new(n, RngSeed(seed ^ 0xabc)).unwrap();
        let mut x = SparseSignal::new(n);
        for &l in &members[..active] {
            let v = Complex::from_polar(rng.gen_range(0.1..1.0), rng.gen_range(0.0..core::f64::consts::TAU));
            x.insert(l, v).unwrap();
        }
        let mut state = DecoderState::new(n, 1);
        for &l in &members[..colored] {
            state.color(l, x.get(l), &graph, &trig, 1);
        }
        (graph, trig, x, state)
    }

    #[test]
    fn resolves_the_last_unknown() {
        for seed in 0..100 {
            let (graph, trig, x, state) = random_bin_case(seed, 2, 1);
            let obs = measure(&x, &graph, &trig).unwrap();
            let unknown = x.support().find(|&l| !state.is_colored(l)).unwrap();
            match try_resolve_bin(&state, 0, &obs[0], &graph, &trig, DEFAULT_TOL) {
                Resolution::NewBall(l, v) => {
                    assert_eq!(l, unknown, "seed {seed}");
                    assert!((v - x.get(l)).norm() < 1e-9);
                }
                other => panic!("seed {seed}: {other:?}"),
            }
        }
    }

    #[test]
    fn two_unknowns_stay_stuck() {
        for seed in 0..100 {
            let (graph, trig, x, state) = random_bin_case(1000 + seed, 3, 1);
            let obs = measure(&x, &graph, &trig).unwrap();
            assert_eq!(
                try_resolve_bin(&state, 0, &obs[0], &graph, &trig, DEFAULT_TOL),
                Resolution::Stuck,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn explained_and_uncolored_bins() {
        let (graph, trig, x, state) = random_bin_case(7, 2, 2);
        let obs = measure(&x, &graph, &trig).unwrap();
        assert_eq!(try_resolve_bin(&state, 0, &obs[0], &graph, &trig, DEFAULT_TOL), Resolution::FullyExplained);
        let empty = DecoderState::new(graph.n(), 1);
        assert_eq!(
            try_resolve_bin(&empty, 0, &BinObservation::default(), &graph, &trig, DEFAULT_TOL),
            Resolution::FullyExplained
        );
        assert_eq!(try_resolve_bin(&empty, 0, &obs[0], &graph, &trig, DEFAULT_TOL), Resolution::Stuck);
    }

    fn system(seed: u64, n: usize, k: usize, eps: f64, dmax: usize) -> (SparseSignal, CodeGraph, TrigParams, Vec<BinObservation>) {
        let s = RngSeed(seed);
        let d = harmonic_lambda(dmax).unwrap();
        let p = GraphParams::new(k.max(50), eps, &d).unwrap();
        let graph = sample_graph(n, &d, &p, s.fork("graph")).unwrap();
        let x = random_sparse_signal(n, k, s.fork("signal"), (0.1, 1.0)).unwrap();
        let trig = TrigParams::new(n, s.fork("omega")).unwrap();
        let obs = measure(&x, &graph, &trig).unwrap();
        (x, graph, trig, obs)
    }

    #[test]
    fn empty_signal_and_empty_seeds() {
        let (_, graph, trig, obs) = system(1, 500, 0, 0.3, 20);
        let out = run_peeling(&obs, &graph, &trig, &BTreeMap::new(), &PeelingOptions::default()).unwrap();
        assert_eq!(out.colored, 0);
        assert_eq!(out.iterations, 0);
        assert!(out.estimate.is_empty());
    }

    #[test]
    fn fully_seeded_run_is_one_pass() {
        let (x, graph, trig, obs) = system(2, 2000, 100, 0.3, 50);
        let seeds: BTreeMap<_, _> = x.iter().collect();
        let out = run_peeling(&obs, &graph, &trig, &seeds, &PeelingOptions::default()).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(uncolored_fraction(&x, &out.estimate), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, graph, trig, obs) = system(3, 300, 20, 0.3, 20);
        let seeds = BTreeMap::from([(301, c(1.0, 0.0))]);
        assert!(run_peeling(&obs, &graph, &trig, &seeds, &PeelingOptions::default()).is_err());
        assert!(run_peeling(&obs[1..], &graph, &trig, &BTreeMap::new(), &PeelingOptions::default()).is_err());
        let _ = x;
    }

    #[test]
    fn seeded_decoding_recovers_up_to_seed_phase() {
        let (x, graph, trig, obs) = system(4, 5000, 300, 0.3, 100);
        // Seeds rotated by a common phase, as the initialization stage delivers.
        let rot = Complex::from_polar(1.0, 0.8);
        let seeds: BTreeMap<_, _> = x.iter().take(15).map(|(l, v)| (l, v * rot)).collect();
        let opts = PeelingOptions { trace: true, ..PeelingOptions::default() };
        let out = run_peeling(&obs, &graph, &trig, &seeds, &opts).unwrap();
        assert!(out.colored > 250, "colored {}", out.colored);
        assert_eq!(out.trace.len(), out.colored - 15);
        for (l, v) in out.estimate.iter() {
            assert!(x.contains(l), "false coloring at {l}");
            assert!((v - x.get(l) * rot).norm() < 1e-8 * x.get(l).norm());
        }
        assert!(out.trace.iter().all(|e| e.residual <= DEFAULT_TOL));
    }

    #[test]
    fn unseeded_decoding_starts_from_a_singleton() {
        let (x, graph, trig, obs) = system(5, 5000, 300, 0.3, 100);
        let singles = find_singletons(&obs, &graph, &trig, DEFAULT_TOL).unwrap();
        assert!(!singles.is_empty());
        for s in &singles {
            assert!((x.get(s.location).norm() - s.magnitude).abs() < 1e-9);
        }
        let out = run_unseeded(&obs, &graph, &trig, &UnseededOptions::default()).unwrap();
        assert!(out.starts >= 1);
        let est = &out.outcome.estimate;
        assert!(uncolored_fraction(&x, est) < 0.1, "{}", uncolored_fraction(&x, est));
        assert!(crate::signal::global_phase_error(&x.restricted_to(est), est).unwrap() < 1e-8);
    }
}
