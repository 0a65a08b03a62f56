use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use phasecode_harness::experiment::{points, run_trial_detailed};
use phasecode_harness::{formats, run, ExperimentConfig, InitMode, Mode};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    De,
    Sim,
    Sweep,
    Twolayer,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Init {
    None,
    Active,
    Known,
}

/// Runs decoder experiments and writes CSV tables.
///
/// Values from --config are overridden by any flag given here. List flags
/// take comma-separated values.
#[derive(Parser, Debug)]
#[command(name = "pr", version)]
struct Cli {
    command: Command,
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    /// Sparsities.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Bin ratios M/K.
    #[arg(long, value_delimiter = ',')]
    mk: Option<Vec<f64>>,
    /// Capacity gaps (de, twolayer).
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Degree cap D.
    #[arg(long)]
    d: Option<usize>,
    /// Choose D from this target error floor instead of --d.
    #[arg(long)]
    p_star: Option<f64>,
    /// Initial uncolored probability (de).
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long, value_enum)]
    init: Option<Init>,
    /// Active-sensing row ratio; implies --init active.
    #[arg(long)]
    eps2: Option<f64>,
    /// Known-support fraction; implies --init known.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Uncolored fraction at or below which a trial counts as decoded.
    #[arg(long)]
    threshold: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// sim only: write signal, graph, observations, seeds and trace of the
    /// first trial into this directory.
    #[arg(long)]
    dump: Option<PathBuf>,
}

impl Cli {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = match self.command {
            Command::De => Mode::De,
            Command::Sim => Mode::Sim,
            Command::Sweep => Mode::Sweep,
            Command::Twolayer => Mode::Twolayer,
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        set!(n => n, k => k, mk => m_over_k, eps => eps, d => d, p0 => p0,
             trials => trials, seed => seed, threshold => success_threshold);
        if self.p_star.is_some() {
            cfg.p_star = self.p_star;
        }
        if self.jobs.is_some() {
            cfg.jobs = self.jobs;
        }
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
        let init = self.init.or(match (self.eps2, self.delta) {
            (Some(_), Some(_)) => bail!("--eps2 and --delta select different initializations"),
            (Some(_), None) => Some(Init::Active),
            (None, Some(_)) => Some(Init::Known),
            (None, None) => None,
        });
        match init {
            Some(Init::None) => cfg.init = InitMode::None,
            Some(Init::Active) => {
                let eps2 = self.eps2.or(match cfg.init {
                    InitMode::Active { eps2 } => Some(eps2),
                    _ => None,
                });
                cfg.init = InitMode::Active { eps2: eps2.unwrap_or(0.5) };
            }
            Some(Init::Known) => {
                let delta = self.delta.or(match cfg.init {
                    InitMode::Known { delta } => Some(delta),
                    _ => None,
                });
                cfg.init = InitMode::Known { delta: delta.unwrap_or(0.05) };
            }
            None => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dump(cfg: &ExperimentConfig, dir: &PathBuf) -> Result<()> {
    if cfg.mode != Mode::Sim {
        bail!("--dump is only supported by sim");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let point = points(cfg)?[0];
    let (_, art) = run_trial_detailed(cfg, point, 0, true)?;
    let Some(art) = art else {
        log::warn!("K = 0: nothing to dump");
        return Ok(());
    };
    let create = |name: &str| -> Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    formats::write_signal(&art.signal, create("signal.json")?)?;
    formats::write_graph(&art.graph, create("graph.json")?)?;
    formats::write_observations(&art.observations, create("observations.csv")?)?;
    formats::write_signal(&art.seeds, create("seeds.json")?)?;
    formats::write_trace(&art.trace, create("trace.csv")?)?;
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = cli.config()?;
    let table = run(&cfg)?;
    match &cfg.out {
        Some(path) => std::fs::write(path, table).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(table.as_bytes())?,
    }
    if let Some(dir) = &cli.dump {
        dump(&cfg, dir)?;
    }
    Ok(())
}
