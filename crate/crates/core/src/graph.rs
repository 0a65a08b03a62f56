//! Degree distributions and random bipartite code graphs.
//!
//! Left nodes are the `n` signal slots, right nodes ("bins") are groups of
//! measurements. Left degrees follow the truncated harmonic edge distribution
//! `λ_i = 1/((i−1)·h(D−1))`, `2 ≤ i ≤ D`; with the left neighbours drawn
//! uniformly, the induced bin degrees over the `K` active slots are
//! approximately Poisson with mean `η = K·d̄/M`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{Error, Result};
use crate::signal::RngSeed;

/// Upper limit applied by [`select_max_degree`] unless another cap is given.
pub const DEFAULT_MAX_DEGREE_CAP: usize = 1_000_000;

/// `h(m) = Σ_{k=1}^{m} 1/k`, summed from the smallest term up.
///
/// The summation order matches the Horner evaluation in
/// [`LeftEdgeDistribution::eval`], which makes `λ(1) == 1` exact.
pub fn harmonic(m: usize) -> f64 {
    (1..=m).rev().fold(0.0, |acc, k| acc + 1.0 / k as f64)
}

/// Truncated harmonic left-degree distribution, edge perspective.
#[derive(Clone, Debug, PartialEq)]
pub struct LeftEdgeDistribution {
    max_degree: usize,
    /// `lambda[i - 2] = λ_i`.
    lambda: Vec<f64>,
    harmonic: f64,
}

/// Builds `λ_i = 1/((i−1)·h(D−1))` for `2 ≤ i ≤ D`.
pub fn harmonic_lambda(max_degree: usize) -> Result<LeftEdgeDistribution> {
    if max_degree < 2 {
        return Err(Error::invalid("degree cap D must be at least 2"));
    }
    let h = harmonic(max_degree - 1);
    let lambda = (2..=max_degree).map(|i| 1.0 / ((i - 1) as f64 * h)).collect();
    Ok(LeftEdgeDistribution {
        max_degree,
        lambda,
        harmonic: h,
    })
}

impl LeftEdgeDistribution {
    /// `D`.
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `h(D−1)`.
    pub fn harmonic(&self) -> f64 {
        self.harmonic
    }

    /// `λ_i`; zero outside `2..=D`.
    pub fn lambda(&self, degree: usize) -> f64 {
        if (2..=self.max_degree).contains(&degree) {
            self.lambda[degree - 2]
        } else {
            0.0
        }
    }

    /// `(λ_2, …, λ_D)`.
    pub fn coefficients(&self) -> &[f64] {
        &self.lambda
    }

    /// `λ(y) = Σ_i λ_i y^{i−1}` by Horner's rule, without touching the
    /// coefficient table.
    pub fn eval(&self, y: f64) -> f64 {
        let mut acc = 0.0;
        for k in (1..self.max_degree).rev() {
            acc = acc * y + 1.0 / k as f64;
        }
        acc * y / self.harmonic
    }

    /// `λ'(y)`.
    pub fn eval_derivative(&self, y: f64) -> f64 {
        // d/dy Σ y^k/k = Σ_{k=1}^{D-1} y^{k-1}
        let mut acc = 0.0;
        for _ in 1..self.max_degree {
            acc = acc * y + 1.0;
        }
        acc / self.harmonic
    }

    /// `Σ λ_i (i−1) = (D−1)/h(D−1)`.
    pub fn edge_degree_moment(&self) -> f64 {
        (self.max_degree - 1) as f64 / self.harmonic
    }

    /// Average left degree `d̄ = h(D−1)·D/(D−1)`.
    pub fn mean_degree(&self) -> f64 {
        self.harmonic * self.max_degree as f64 / (self.max_degree - 1) as f64
    }

    /// Node-perspective probabilities `Λ_i = d̄·λ_i/i`, indexed from `i = 2`.
    pub fn node_distribution(&self) -> Vec<f64> {
        let dbar = self.mean_degree();
        (2..=self.max_degree)
            .map(|i| dbar * self.lambda(i) / i as f64)
            .collect()
    }
}

/// Sizing of the code graph for a given sparsity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphParams {
    /// Sparsity `K`.
    pub k: usize,
    /// Capacity gap `ε = 1 − K/M`.
    pub eps: f64,
    /// Bin count `M`.
    pub bins: usize,
    /// Average left degree `d̄` of the design distribution.
    pub mean_degree: f64,
    /// Poisson mean of the bin degrees, `K·d̄/M`.
    pub eta: f64,
}

fn ceil_tolerant(v: f64) -> usize {
    (v - 1e-9).ceil().max(0.0) as usize
}

impl GraphParams {
    /// `M = ⌈K/(1−ε)⌉`.
    pub fn new(k: usize, eps: f64, dist: &LeftEdgeDistribution) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::invalid("capacity gap must lie in (0, 1)"));
        }
        if k == 0 {
            return Err(Error::invalid("sparsity must be positive"));
        }
        let bins = ceil_tolerant(k as f64 / (1.0 - eps));
        Self::with_bins(k, bins, dist)
    }

    /// Sizing from a bin-to-sparsity ratio, `M = ⌈ratio·K⌉`.
    pub fn from_ratio(k: usize, bins_per_ball: f64, dist: &LeftEdgeDistribution) -> Result<Self> {
        if !(bins_per_ball >= 1.0 && bins_per_ball.is_finite()) {
            return Err(Error::invalid("M/K must be at least 1"));
        }
        Self::with_bins(k, ceil_tolerant(bins_per_ball * k as f64), dist)
    }

    pub fn with_bins(k: usize, bins: usize, dist: &LeftEdgeDistribution) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("sparsity must be positive"));
        }
        if bins < k {
            return Err(Error::invalid("bin count M must be at least K"));
        }
        let mean_degree = dist.mean_degree();
        Ok(GraphParams {
            k,
            eps: 1.0 - k as f64 / bins as f64,
            bins,
            mean_degree,
            eta: k as f64 * mean_degree / bins as f64,
        })
    }

    /// `ρ(x) = e^{−η(1−x)}`.
    pub fn rho(&self, x: f64) -> f64 {
        (-self.eta * (1.0 - x)).exp()
    }

    /// `ρ_1 = e^{−η}`.
    pub fn rho1(&self) -> f64 {
        (-self.eta).exp()
    }
}

/// Outcome of [`select_max_degree_capped`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DegreeSelection {
    pub degree: usize,
    /// `max{(e/(1−ε))^{2/ε}, (1+1/p*)^{1/(1−ε)}}` before rounding and capping.
    pub bound: f64,
    pub capped: bool,
}

/// Degree cap `D(ε, p*)` that makes the design stable (`f'(1) > 1`) with an
/// error floor of at most `p*`, capped at [`DEFAULT_MAX_DEGREE_CAP`].
pub fn select_max_degree(eps: f64, p_star: f64) -> Result<usize> {
    select_max_degree_capped(eps, p_star, DEFAULT_MAX_DEGREE_CAP).map(|s| s.degree)
}

pub fn select_max_degree_capped(eps: f64, p_star: f64, cap: usize) -> Result<DegreeSelection> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("capacity gap must lie in (0, 1)"));
    }
    if !(p_star > 0.0 && p_star < 1.0) {
        return Err(Error::invalid("target error floor must lie in (0, 1)"));
    }
    if cap < 2 {
        return Err(Error::invalid("degree cap must be at least 2"));
    }
    // Both terms in log space: (e/(1-ε))^{2/ε} and (1+1/p*)^{1/(1-ε)}.
    let stability = (2.0 / eps) * (1.0 - (1.0 - eps).ln());
    let floor = (1.0 + 1.0 / p_star).ln() / (1.0 - eps);
    let bound = stability.max(floor).exp();
    let wanted = bound.ceil().max(2.0);
    if wanted > cap as f64 {
        log::warn!("degree bound {bound:.3e} exceeds cap {cap}; using the cap");
        return Ok(DegreeSelection {
            degree: cap,
            bound,
            capped: true,
        });
    }
    Ok(DegreeSelection {
        degree: wanted as usize,
        bound,
        capped: false,
    })
}

/// `f'(1) = η e^{−η} Σ λ_i (i−1)`; the design escapes the fixed point at 1
/// when this exceeds one.
pub fn stability_margin(dist: &LeftEdgeDistribution, params: &GraphParams) -> f64 {
    params.eta * (-params.eta).exp() * dist.edge_degree_moment()
}

/// Bipartite graph between `n` left nodes (1-based) and `bins` right nodes
/// (0-based). Row `b` of the code matrix `H` has ones at `neighbors(b)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeGraph {
    n: usize,
    bins: usize,
    left: Vec<Vec<usize>>,
    right: Vec<Vec<usize>>,
}

impl CodeGraph {
    /// Builds a graph from per-left-node bin lists (`left_adj[ℓ-1]`).
    pub fn from_left_adjacency(n: usize, bins: usize, left_adj: Vec<Vec<usize>>) -> Result<Self> {
        if left_adj.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: left_adj.len(),
            });
        }
        let mut left = left_adj;
        let mut right = alloc::vec![Vec::new(); bins];
        for (i, adj) in left.iter_mut().enumerate() {
            adj.sort_unstable();
            if adj.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::invalid(alloc::format!("duplicate edge at left node {}", i + 1)));
            }
            for &b in adj.iter() {
                if b >= bins {
                    return Err(Error::invalid(alloc::format!("bin {b} out of range 0..{bins}")));
                }
                right[b].push(i + 1);
            }
        }
        Ok(CodeGraph { n, bins, left, right })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Sorted bins adjacent to left node `l` (1-based).
    pub fn bins_of(&self, l: usize) -> &[usize] {
        &self.left[l - 1]
    }

    /// Sorted left nodes (1-based) adjacent to `bin`.
    pub fn neighbors(&self, bin: usize) -> &[usize] {
        &self.right[bin]
    }

    pub fn left_adjacency(&self) -> &[Vec<usize>] {
        &self.left
    }

    pub fn edge_count(&self) -> usize {
        self.left.iter().map(Vec::len).sum()
    }

    /// Checks the structural invariants: both adjacency maps agree, and no
    /// left node has a repeated bin.
    pub fn is_consistent(&self) -> bool {
        let mut count = 0;
        for (i, adj) in self.left.iter().enumerate() {
            if adj.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
            for &b in adj {
                if b >= self.bins || self.right[b].binary_search(&(i + 1)).is_err() {
                    return false;
                }
            }
            count += adj.len();
        }
        count == self.right.iter().map(Vec::len).sum::<usize>()
    }
}

fn distinct_bins<R: rand::Rng>(rng: &mut R, bins: usize, degree: usize) -> Vec<usize> {
    let mut adj = rand::seq::index::sample(rng, bins, degree).into_vec();
    adj.sort_unstable();
    adj
}

/// Samples the code graph: every left node draws its degree from the node
/// distribution `Λ` and connects to that many distinct uniform bins.
pub fn sample_graph(
    n: usize,
    dist: &LeftEdgeDistribution,
    params: &GraphParams,
    seed: RngSeed,
) -> Result<CodeGraph> {
    let bins = params.bins;
    if bins < dist.max_degree() {
        return Err(Error::invalid(alloc::format!(
            "cannot place {} distinct edges in {bins} bins",
            dist.max_degree()
        )));
    }
    let mut rng = seed.rng();
    let left = if dist.max_degree() == 2 {
        (0..n).map(|_| distinct_bins(&mut rng, bins, 2)).collect()
    } else {
        let degrees = WeightedIndex::new(dist.node_distribution())
            .map_err(|_| Error::invalid("degenerate degree distribution"))?;
        (0..n)
            .map(|_| {
                let d = degrees.sample(&mut rng) + 2;
                distinct_bins(&mut rng, bins, d)
            })
            .collect()
    };
    CodeGraph::from_left_adjacency(n, bins, left)
}

/// Left-regular graph: every left node joins `degree` distinct uniform bins.
pub fn sample_regular_graph(n: usize, bins: usize, degree: usize, seed: RngSeed) -> Result<CodeGraph> {
    if degree == 0 || degree > bins {
        return Err(Error::invalid("left degree must lie in 1..=bins"));
    }
    let mut rng = seed.rng();
    let left = (0..n).map(|_| distinct_bins(&mut rng, bins, degree)).collect();
    CodeGraph::from_left_adjacency(n, bins, left)
}
