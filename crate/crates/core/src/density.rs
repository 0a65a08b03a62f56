//! Density evolution of the uncolored-edge fraction.
//!
//! Under the tree assumption the probability `p_j` that an edge is still
//! uncolored after `j` rounds obeys `p_{j+1} = f(p_j)` with
//! `f(p) = λ(1 + e^{−η} − e^{−ηp})`.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::graph::{stability_margin, GraphParams, LeftEdgeDistribution};

/// Steps stop once `|p_{j+1} − p_j|` falls below this.
pub const DE_STEP_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

/// `f(p) = λ(1 + ρ_1 − ρ(1 − p))`, clamped to `[0, 1]`.
///
/// The argument is formed as `1 − (e^{−ηp} − e^{−η})` so that `f(1) = 1`
/// holds exactly.
pub fn de_step(p: f64, dist: &LeftEdgeDistribution, params: &GraphParams) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let eta = params.eta;
    let arg = (1.0 - ((-eta * p).exp() - (-eta).exp())).clamp(0.0, 1.0);
    dist.eval(arg).clamp(0.0, 1.0)
}

/// `f'(p) = λ'(·)·η·e^{−ηp}`.
pub fn de_step_derivative(p: f64, dist: &LeftEdgeDistribution, params: &GraphParams) -> f64 {
    let eta = params.eta;
    let arg = (1.0 - ((-eta * p).exp() - (-eta).exp())).clamp(0.0, 1.0);
    dist.eval_derivative(arg) * eta * (-eta * p).exp()
}

#[derive(Clone, Debug)]
pub struct DeParams {
    pub dist: LeftEdgeDistribution,
    pub params: GraphParams,
    /// Initial uncolored probability `1 − δ`.
    pub p0: f64,
    /// Slack `ε₁` used for `converged_at`.
    pub eps1: f64,
    pub j_max: usize,
}

impl DeParams {
    pub fn new(dist: LeftEdgeDistribution, params: GraphParams, p0: f64) -> Result<Self> {
        let cfg = DeParams {
            dist,
            params,
            p0,
            eps1: 1e-6,
            j_max: DEFAULT_MAX_ITERATIONS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 <= 1.0) {
            return Err(Error::invalid("p0 must lie in (0, 1]"));
        }
        if !(self.eps1 > 0.0) {
            return Err(Error::invalid("eps1 must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeTrace {
    /// `trajectory[j]` is the value after `j` steps; `trajectory[0] = p0`.
    pub trajectory: Vec<f64>,
    /// First `j` with `p_j ≤ p_limit + ε₁`.
    pub converged_at: Option<usize>,
    pub p_limit: f64,
}

impl DeTrace {
    /// First `j` with `p_j ≤ target`.
    pub fn first_below(&self, target: f64) -> Option<usize> {
        self.trajectory.iter().position(|&p| p <= target)
    }
}

pub fn run_de(cfg: &DeParams) -> Result<DeTrace> {
    cfg.validate()?;
    let mut trajectory = Vec::with_capacity(128);
    let mut p = cfg.p0;
    trajectory.push(p);
    for _ in 0..cfg.j_max {
        let next = de_step(p, &cfg.dist, &cfg.params);
        trajectory.push(next);
        let done = (next - p).abs() < DE_STEP_THRESHOLD;
        p = next;
        if done {
            break;
        }
    }
    let p_limit = p;
    let converged_at = trajectory.iter().position(|&q| q <= p_limit + cfg.eps1);
    Ok(DeTrace {
        trajectory,
        converged_at,
        p_limit,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FixedPoints {
    /// `f'(1) > 1`: besides `x1 = 1` there is a floor `x2 ∈ (0, 1)`.
    Escape { x1: f64, x2: f64 },
    /// `f'(1) ≤ 1` (or no sign change found): the iteration cannot leave 1.
    NoEscape { slope: f64 },
}

impl FixedPoints {
    pub fn floor(&self) -> Option<f64> {
        match *self {
            FixedPoints::Escape { x2, .. } => Some(x2),
            FixedPoints::NoEscape { .. } => None,
        }
    }
}

/// Locates the nontrivial fixed point of `f` by bisection on `[0, 1 − 10⁻⁹]`.
pub fn fixed_points(dist: &LeftEdgeDistribution, params: &GraphParams) -> FixedPoints {
    let slope = stability_margin(dist, params);
    if slope <= 1.0 {
        return FixedPoints::NoEscape { slope };
    }
    let g = |x: f64| de_step(x, dist, params) - x;
    let (mut lo, mut hi) = (0.0, 1.0 - 1e-9);
    if g(lo) <= 0.0 {
        return FixedPoints::Escape { x1: 1.0, x2: 0.0 };
    }
    if g(hi) >= 0.0 {
        return FixedPoints::NoEscape { slope };
    }
    while hi - lo > 1e-16 * hi.max(1e-300) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    FixedPoints::Escape {
        x1: 1.0,
        x2: 0.5 * (lo + hi),
    }
}

/// `Σ_{i=2}^{D} λ_i e^{−η(i−1)}`, i.e. `λ(e^{−η})`.
pub fn error_floor_bound(dist: &LeftEdgeDistribution, params: &GraphParams) -> f64 {
    let r = (-params.eta).exp();
    let mut acc = 0.0;
    let mut pow = r;
    for &l in dist.coefficients() {
        if pow == 0.0 {
            break;
        }
        acc += l * pow;
        pow *= r;
    }
    acc
}
