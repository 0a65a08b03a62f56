#![allow(dead_code)]

use std::collections::BTreeMap;

use phasecode::graph::{harmonic_lambda, sample_graph, CodeGraph, GraphParams, LeftEdgeDistribution};
use phasecode::measurement::{measure, BinObservation, TrigParams};
use phasecode::peeling::Residual;
use phasecode::signal::random_sparse_signal;
use phasecode::{Complex, RngSeed, SparseSignal};

pub struct Instance {
    pub x: SparseSignal,
    pub dist: LeftEdgeDistribution,
    pub params: GraphParams,
    pub graph: CodeGraph,
    pub trig: TrigParams,
    pub obs: Vec<BinObservation>,
}

/// Random signal, graph and observations with `M = ⌈ratio·K⌉` bins.
pub fn instance(seed: RngSeed, n: usize, k: usize, bins_per_ball: f64, dmax: usize) -> Instance {
    let dist = harmonic_lambda(dmax).unwrap();
    let params = GraphParams::from_ratio(k, bins_per_ball, &dist).unwrap();
    let graph = sample_graph(n, &dist, &params, seed.fork("graph")).unwrap();
    let x = random_sparse_signal(n, k, seed.fork("signal"), (0.5, 2.0)).unwrap();
    let trig = TrigParams::new(n, seed.fork("omega")).unwrap();
    let obs = measure(&x, &graph, &trig).unwrap();
    Instance {
        x,
        dist,
        params,
        graph,
        trig,
        obs,
    }
}

/// Runs `f(0..trials)` on all available cores, results in trial order.
pub fn par_map<T: Send>(trials: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(trials.max(1));
    let mut slots: Vec<Option<T>> = (0..trials).map(|_| None).collect();
    std::thread::scope(|s| {
        let chunk_len = trials.div_ceil(workers).max(1);
        for (c, chunk) in slots.chunks_mut(chunk_len).enumerate() {
            let f = &f;
            s.spawn(move || {
                for (i, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(c * chunk_len + i));
                }
            });
        }
    });
    slots.into_iter().map(Option::unwrap).collect()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len() / 2;
    if s.len() % 2 == 0 {
        0.5 * (s[m - 1] + s[m])
    } else {
        s[m]
    }
}

pub fn std_dev(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

/// Pearson statistic against Poisson(sample mean) with cells pooled to an
/// expected count of at least 5, and its degrees of freedom.
pub fn poisson_chi_square(counts: &[usize]) -> (f64, usize) {
    let total = counts.len() as f64;
    let eta = counts.iter().sum::<usize>() as f64 / total;
    let max = counts.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0usize; max + 1];
    for &c in counts {
        hist[c] += 1;
    }
    let mut cells = Vec::new();
    let (mut exp, mut obs, mut cum) = (0.0, 0.0, 0.0);
    let mut pk = (-eta).exp();
    for (k, &h) in hist.iter().enumerate() {
        if k > 0 {
            pk *= eta / k as f64;
        }
        exp += pk * total;
        cum += pk;
        obs += h as f64;
        if exp >= 5.0 && (1.0 - cum) * total >= 5.0 {
            cells.push((obs, exp));
            exp = 0.0;
            obs = 0.0;
        }
    }
    cells.push((obs, exp + (1.0 - cum) * total));
    let stat = cells.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, cells.len() - 2)
}

/// Upper 0.1% points of χ² for 1..=30 degrees of freedom.
pub const CHI2_999: [f64; 30] = [
    10.828, 13.816, 16.266, 18.467, 20.515, 22.458, 24.322, 26.124, 27.877, 29.588, 31.264, 32.909, 34.528, 36.123,
    37.697, 39.252, 40.790, 42.312, 43.820, 45.315, 46.797, 48.268, 49.728, 51.179, 52.620, 54.052, 55.476, 56.892,
    58.301, 59.703,
];

/// Active-bin degrees: number of support indices of `x` adjacent to each bin.
pub fn active_degrees(x: &SparseSignal, graph: &CodeGraph) -> Vec<usize> {
    let mut deg = vec![0usize; graph.bins()];
    for l in x.support() {
        for &b in graph.bins_of(l) {
            deg[b] += 1;
        }
    }
    deg
}

/// One bin with a known residual and its uncolored candidates.
pub struct BinCase {
    pub trig: TrigParams,
    pub obs: BinObservation,
    pub residual: Residual,
    pub candidates: Vec<usize>,
    /// The uncolored active balls, `(ℓ, x_ℓ)`.
    pub unknown: Vec<(usize, Complex)>,
}

/// A random small bin: 4..12 neighbours of which 2..4 are active; all active
/// balls but `unknowns` of them are colored.
pub fn random_bin(seed: RngSeed, unknowns: usize) -> BinCase {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut rng = seed.rng();
    let n = rng.gen_range(16..=64);
    let trig = TrigParams::new(n, seed.fork("omega")).unwrap();
    let size = rng.gen_range(4..=12);
    let mut neigh: Vec<usize> = rand::seq::index::sample(&mut rng, n, size).into_iter().map(|i| i + 1).collect();
    neigh.shuffle(&mut rng);
    let active = rng.gen_range(unknowns + 1..=(unknowns + 2).min(size));
    let mut sums = [Complex::default(); 4];
    let mut residual = [Complex::default(); 4];
    let mut unknown = Vec::new();
    for (j, &l) in neigh[..active].iter().enumerate() {
        let v = Complex::from_polar(rng.gen_range(0.5..2.0), rng.gen_range(0.0..std::f64::consts::TAU));
        let col = trig.column(l);
        for k in 0..4 {
            sums[k] += col[k] * v;
            if j >= unknowns {
                residual[k] += col[k] * v;
            }
        }
        if j < unknowns {
            unknown.push((l, v));
        }
    }
    let colored: Vec<usize> = neigh[unknowns..active].to_vec();
    let mut candidates: Vec<usize> = neigh.iter().copied().filter(|l| !colored.contains(l)).collect();
    candidates.sort_unstable();
    BinCase {
        trig,
        obs: BinObservation::from_sums(&sums),
        residual,
        candidates,
        unknown,
    }
}

fn residuals(case: &BinCase, col: &[Complex; 4], x: Complex) -> [f64; 4] {
    let mut r = [0.0; 4];
    for k in 0..4 {
        r[k] = (case.residual[k] + col[k] * x).norm() - case.obs.0[k];
    }
    r
}

/// Levenberg-Marquardt on the four magnitude equations in `(Re x, Im x)`.
fn polish(case: &BinCase, col: &[Complex; 4], start: Complex) -> Complex {
    let mut x = start;
    let mut mu = 1e-3;
    let cost = |x: Complex| residuals(case, col, x).iter().map(|r| r * r).sum::<f64>();
    let mut c = cost(x);
    for _ in 0..200 {
        let r = residuals(case, col, x);
        let mut jt_j = [[0.0; 2]; 2];
        let mut jt_r = [0.0; 2];
        for k in 0..4 {
            let u = case.residual[k] + col[k] * x;
            let m = u.norm().max(1e-300);
            let g = [(u.conj() * col[k]).re / m, (u.conj() * col[k] * Complex::i()).re / m];
            for a in 0..2 {
                jt_r[a] += g[a] * r[k];
                for b in 0..2 {
                    jt_j[a][b] += g[a] * g[b];
                }
            }
        }
        let (a, b, d) = (jt_j[0][0] + mu, jt_j[0][1], jt_j[1][1] + mu);
        let det = a * d - b * b;
        if det == 0.0 {
            break;
        }
        let step = Complex::new((d * jt_r[0] - b * jt_r[1]) / det, (a * jt_r[1] - b * jt_r[0]) / det);
        let trial = x - step;
        let ct = cost(trial);
        if ct < c {
            x = trial;
            c = ct;
            mu = (mu * 0.3).max(1e-15);
            if step.norm() < 1e-15 * x.norm().max(1.0) {
                break;
            }
        } else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    x
}

/// Exhaustive solver: for every candidate location, scan a 400×400 grid
/// over the disk that can hold `x`, polish each local minimum of the
/// squared residual and keep roots that satisfy all four equations.
pub fn grid_oracle(case: &BinCase, accept: f64) -> Vec<(usize, Complex)> {
    const G: usize = 400;
    let a = case.residual[0];
    let radius = case.obs.0[0] + a.norm();
    let mut out: Vec<(usize, Complex)> = Vec::new();
    for &l in &case.candidates {
        let col = case.trig.column(l);
        let at = |i: usize, j: usize| {
            let h = 2.0 * radius / (G - 1) as f64;
            Complex::new(-radius + i as f64 * h, -radius + j as f64 * h)
        };
        let mut f = vec![0.0; G * G];
        for i in 0..G {
            for j in 0..G {
                f[i * G + j] = residuals(case, &col, at(i, j)).iter().map(|r| r * r).sum();
            }
        }
        let mut minima: Vec<(f64, Complex)> = Vec::new();
        for i in 0..G {
            for j in 0..G {
                let v = f[i * G + j];
                let mut is_min = true;
                for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        let (p, q) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0) || p < 0 || q < 0 || p >= G as i64 || q >= G as i64 {
                            continue;
                        }
                        if f[p as usize * G + q as usize] < v {
                            is_min = false;
                        }
                    }
                }
                if is_min {
                    minima.push((v, at(i, j)));
                }
            }
        }
        minima.sort_by(|p, q| p.0.partial_cmp(&q.0).unwrap());
        for &(_, start) in minima.iter().take(12) {
            let x = polish(case, &col, start);
            let worst = residuals(case, &col, x)
                .iter()
                .zip(case.obs.0)
                .map(|(r, y)| r.abs() / y.max(1.0))
                .fold(0.0, f64::max);
            if worst <= accept
                && x.norm() > 1e-9
                && !out.iter().any(|&(m, v)| m == l && (v - x).norm() < 1e-6)
            {
                out.push((l, x));
            }
        }
    }
    out
}

pub fn seeds_of(x: &SparseSignal, locations: &[usize]) -> BTreeMap<usize, Complex> {
    locations.iter().map(|&l| (l, x.get(l))).collect()
}
