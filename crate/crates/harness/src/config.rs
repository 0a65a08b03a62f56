use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    De,
    Sim,
    Sweep,
    Twolayer,
}

/// How the decoder obtains its first colored balls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitMode {
    /// Start from singleton bins.
    None,
    /// Active sensing with `⌈ε₂K⌉` extra sensing rows.
    Active { eps2: f64 },
    /// `⌈δK⌉` support locations handed to the decoder.
    Known { delta: f64 },
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitMode::None => f.write_str("none"),
            InitMode::Active { eps2 } => write!(f, "active({eps2})"),
            InitMode::Known { delta } => write!(f, "known({delta})"),
        }
    }
}

/// One experiment. The JSON form mirrors the command-line flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub n: usize,
    /// Sparsities `K`.
    pub k: Vec<usize>,
    /// Bin ratios `M/K` for `sim` and `sweep`.
    pub m_over_k: Vec<f64>,
    /// Capacity gaps `ε` for `de` and `twolayer`.
    pub eps: Vec<f64>,
    /// Degree cap `D`. Ignored when `p_star` is set.
    pub d: usize,
    /// Target error floor; when set, `D` is chosen per `ε`.
    pub p_star: Option<f64>,
    /// Initial uncolored probability for `de`.
    pub p0: f64,
    pub init: InitMode,
    pub trials: usize,
    pub seed: u64,
    /// A trial succeeds when its uncolored fraction is at most this.
    pub success_threshold: f64,
    /// Worker threads; all cores when absent.
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Sim,
            n: 20_000,
            k: vec![1000],
            m_over_k: vec![1.3],
            eps: vec![0.3],
            d: 1000,
            p_star: None,
            p0: 0.99,
            init: InitMode::None,
            trials: 20,
            seed: 0,
            success_threshold: 0.005,
            jobs: None,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Reports every inconsistency before any work is done.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n > 0, "n must be positive");
        ensure!(self.trials >= 1, "trials must be at least 1");
        ensure!(
            (0.0..1.0).contains(&self.success_threshold),
            "success threshold must lie in [0, 1)"
        );
        ensure!(self.jobs != Some(0), "jobs must be positive");
        match self.mode {
            Mode::De => {
                ensure!(!self.eps.is_empty(), "de needs at least one eps");
                ensure!(self.p0 > 0.0 && self.p0 <= 1.0, "p0 must lie in (0, 1]");
            }
            Mode::Sim | Mode::Sweep => {
                ensure!(!self.k.is_empty(), "no sparsity given");
                ensure!(!self.m_over_k.is_empty(), "no M/K given");
                if self.mode == Mode::Sim && (self.k.len() > 1 || self.m_over_k.len() > 1) {
                    bail!("sim runs a single (K, M/K) point; use sweep for grids");
                }
                for &mk in &self.m_over_k {
                    ensure!(mk >= 1.0 && mk.is_finite(), "M/K must be at least 1, got {mk}");
                }
                for &k in &self.k {
                    ensure!(k <= self.n, "K = {k} exceeds n = {}", self.n);
                    for &mk in &self.m_over_k {
                        let (bins, d) = (bins_for(k, mk), self.degree_for(1.0 - 1.0 / mk)?);
                        ensure!(k == 0 || bins >= d, "K = {k}, M/K = {mk} gives {bins} bins, fewer than D = {d}");
                    }
                }
                match self.init {
                    InitMode::None => {}
                    InitMode::Active { eps2 } => ensure!(eps2 > 0.0 && eps2.is_finite(), "eps2 must be positive"),
                    InitMode::Known { delta } => ensure!((0.0..=1.0).contains(&delta), "delta must lie in [0, 1]"),
                }
            }
            Mode::Twolayer => {
                ensure!(!self.k.is_empty(), "no sparsity given");
                ensure!(self.eps.len() == 1, "twolayer takes a single eps");
                ensure!(self.eps[0] >= 0.0, "eps must be nonnegative");
                for &k in &self.k {
                    ensure!(k <= self.n, "K = {k} exceeds n = {}", self.n);
                }
            }
        }
        if self.mode != Mode::Twolayer {
            for &e in &self.eps {
                ensure!(e > 0.0 && e < 1.0, "eps must lie in (0, 1), got {e}");
            }
            ensure!(self.d >= 2, "D must be at least 2");
        }
        if let Some(p) = self.p_star {
            ensure!(p > 0.0 && p < 1.0, "p_star must lie in (0, 1)");
        }
        Ok(())
    }

    /// `D` for capacity gap `eps`: the fixed `d`, or the selector's choice
    /// when `p_star` is set.
    pub fn degree_for(&self, eps: f64) -> Result<usize> {
        match self.p_star {
            None => Ok(self.d),
            Some(p) => phasecode::graph::select_max_degree(eps, p).map_err(|e| anyhow::anyhow!("selecting D for eps = {eps}: {e}")),
        }
    }

    /// FNV-1a of the canonical JSON, with `jobs` and `out` cleared since
    /// they do not affect results.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.jobs = None;
        canon.out = None;
        let json = serde_json::to_string(&canon).expect("config serializes");
        let h = json.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        });
        format!("{h:016x}")
    }
}

/// `M = ⌈(M/K)·K⌉`.
pub fn bins_for(k: usize, m_over_k: f64) -> usize {
    ((m_over_k * k as f64) - 1e-9).ceil().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig {
            init: InitMode::Active { eps2: 0.5 },
            p_star: Some(1e-3),
            ..ExperimentConfig::default()
        };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_json_takes_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"mode":"de","eps":[0.1]}"#).unwrap();
        assert_eq!(cfg.mode, Mode::De);
        assert_eq!(cfg.n, 20_000);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn hash_ignores_scheduling() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            jobs: Some(3),
            out: Some("x.csv".into()),
            ..a.clone()
        };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), ExperimentConfig { seed: 1, ..a }.hash());
    }

    #[test]
    fn inconsistencies_are_rejected() {
        let ok = ExperimentConfig::default();
        ok.validate().unwrap();
        for bad in [
            ExperimentConfig { trials: 0, ..ok.clone() },
            ExperimentConfig { k: vec![100, 200], ..ok.clone() },
            ExperimentConfig { k: vec![100], ..ok.clone() },
            ExperimentConfig { m_over_k: vec![0.9], ..ok.clone() },
            ExperimentConfig { k: vec![30_000], ..ok.clone() },
            ExperimentConfig { init: InitMode::Known { delta: 2.0 }, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        ExperimentConfig { k: vec![0], trials: 1, ..ok }.validate().unwrap();
    }

    #[test]
    fn init_labels() {
        assert_eq!(InitMode::None.to_string(), "none");
        assert_eq!(InitMode::Active { eps2: 0.5 }.to_string(), "active(0.5)");
        assert_eq!(InitMode::Known { delta: 0.05 }.to_string(), "known(0.05)");
    }
}
