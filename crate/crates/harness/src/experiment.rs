use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use rayon::prelude::*;

use phasecode::density::{error_floor_bound, fixed_points, run_de, DeParams};
use phasecode::graph::{harmonic_lambda, sample_graph, stability_margin, CodeGraph, GraphParams};
use phasecode::init::{build_seed_set, known_support_locations, ActiveSensingDesign, InitDesign};
use phasecode::measurement::{measure, BinObservation, TrigParams};
use phasecode::peeling::{
    run_peeling, run_unseeded, uncolored_fraction, ColoringEvent, PeelingOptions, UnseededOptions,
};
use phasecode::signal::{global_phase_error, random_sparse_signal, support_error};
use phasecode::twolayer::{two_layer_pipeline, CsDesign, DEFAULT_CS_DEGREE, DEFAULT_PHASE_TOL};
use phasecode::{RngSeed, SparseSignal};

use crate::config::{ExperimentConfig, InitMode, Mode};

/// Signal magnitudes are drawn uniformly from this range.
pub const MAGNITUDE_RANGE: (f64, f64) = (0.1, 1.0);

/// Sparsity used to size the graph in density evolution, large enough that
/// the rounding of `M` is immaterial.
pub const DE_SPARSITY: usize = 100_000;

/// Column header of `sim` and `sweep` tables.
pub const SWEEP_HEADER: [&str; 15] = [
    "seed",
    "trial",
    "n",
    "K",
    "M_over_K",
    "D",
    "init_mode",
    "frac_uncolored",
    "missed",
    "false_alarms",
    "phase_error",
    "m_total",
    "success",
    "ms",
    "config_hash",
];

/// Metric columns that aggregate rows summarize, by header name.
const METRICS: [&str; 7] = [
    "frac_uncolored",
    "missed",
    "false_alarms",
    "phase_error",
    "m_total",
    "success",
    "ms",
];

/// One `(K, M/K)` grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub k: usize,
    pub m_over_k: f64,
    pub d: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    /// The trial's own seed; rerunning it reproduces the row.
    pub seed: u64,
    pub trial: usize,
    pub point: Point,
    pub frac_uncolored: f64,
    pub missed: usize,
    pub false_alarms: usize,
    /// Global-phase error of the colored set against the truth on that set.
    pub phase_error: f64,
    /// Bin measurements `4M` plus initialization rows.
    pub m_total: usize,
    pub success: bool,
    pub ms: f64,
}

/// Everything a trial built, for dumping.
#[derive(Clone, Debug)]
pub struct TrialArtifacts {
    pub signal: SparseSignal,
    pub graph: CodeGraph,
    pub observations: Vec<BinObservation>,
    pub seeds: SparseSignal,
    pub trace: Vec<ColoringEvent>,
}

/// Seed of trial `trial`: `splitmix64(seed ^ splitmix64(trial))`.
pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> RngSeed {
    RngSeed(cfg.seed).for_trial(trial as u64)
}

/// Grid points in `(K, M/K)` order.
pub fn points(cfg: &ExperimentConfig) -> Result<Vec<Point>> {
    let mut out = Vec::new();
    for &k in &cfg.k {
        for &m_over_k in &cfg.m_over_k {
            let d = cfg.degree_for(1.0 - 1.0 / m_over_k)?;
            out.push(Point { k, m_over_k, d });
        }
    }
    Ok(out)
}

pub fn run_trial(cfg: &ExperimentConfig, point: Point, trial: usize) -> Result<TrialRecord> {
    run_trial_detailed(cfg, point, trial, false).map(|(rec, _)| rec)
}

pub fn run_trial_detailed(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    trace: bool,
) -> Result<(TrialRecord, Option<TrialArtifacts>)> {
    run_seeded(cfg, point, trial, trial_seed(cfg, trial), trace)
}

/// Reruns a table row from its `seed` column.
pub fn rerun_row(cfg: &ExperimentConfig, point: Point, trial: usize, seed: u64) -> Result<TrialRecord> {
    run_seeded(cfg, point, trial, RngSeed(seed), false).map(|(rec, _)| rec)
}

fn run_seeded(
    cfg: &ExperimentConfig,
    point: Point,
    trial: usize,
    seed: RngSeed,
    trace: bool,
) -> Result<(TrialRecord, Option<TrialArtifacts>)> {
    let start = Instant::now();
    let mut rec = TrialRecord {
        seed: seed.0,
        trial,
        point,
        frac_uncolored: 0.0,
        missed: 0,
        false_alarms: 0,
        phase_error: 0.0,
        m_total: 0,
        success: true,
        ms: 0.0,
    };
    if point.k == 0 {
        rec.ms = start.elapsed().as_secs_f64() * 1e3;
        return Ok((rec, None));
    }
    let n = cfg.n;
    let dist = harmonic_lambda(point.d)?;
    let params = GraphParams::from_ratio(point.k, point.m_over_k, &dist)?;
    let graph = sample_graph(n, &dist, &params, seed.fork("graph"))?;
    let x = random_sparse_signal(n, point.k, seed.fork("signal"), MAGNITUDE_RANGE)?;
    let trig = TrigParams::new(n, seed.fork("omega"))?;
    let obs = measure(&x, &graph, &trig)?;
    let peeling = PeelingOptions {
        trace,
        ..PeelingOptions::default()
    };
    let (outcome, seeds, init_rows) = match cfg.init {
        InitMode::None => {
            let opts = UnseededOptions {
                peeling,
                ..UnseededOptions::default()
            };
            (run_unseeded(&obs, &graph, &trig, &opts)?.outcome, BTreeMap::new(), 0)
        }
        InitMode::Active { eps2 } => {
            let design = ActiveSensingDesign::new(n, point.k, eps2, seed.fork("init"))?;
            let set = build_seed_set(&x, &InitDesign::ActiveSensing(design), &trig)?;
            (run_peeling(&obs, &graph, &trig, &set.seeds, &peeling)?, set.seeds, set.rows_used)
        }
        InitMode::Known { delta } => {
            let locations = known_support_locations(&x, delta, seed.fork("init"))?;
            let set = build_seed_set(&x, &InitDesign::KnownSupport { locations }, &trig)?;
            (run_peeling(&obs, &graph, &trig, &set.seeds, &peeling)?, set.seeds, set.rows_used)
        }
    };
    let est = &outcome.estimate;
    let errs = support_error(&x, est)?;
    rec.frac_uncolored = uncolored_fraction(&x, est);
    rec.missed = errs.missed;
    rec.false_alarms = errs.false_alarms;
    rec.phase_error = global_phase_error(&x.restricted_to(est), est)?;
    rec.m_total = 4 * params.bins + init_rows;
    rec.success = rec.frac_uncolored <= cfg.success_threshold && rec.false_alarms == 0;
    rec.ms = start.elapsed().as_secs_f64() * 1e3;
    let artifacts = trace.then(|| TrialArtifacts {
        seeds: SparseSignal::from_entries(n, seeds).expect("seeds lie in 1..=n"),
        signal: x,
        graph,
        observations: obs,
        trace: outcome.trace,
    });
    Ok((rec, artifacts))
}

fn pool(cfg: &ExperimentConfig) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .context("starting worker pool")
}

/// All trials of all grid points, in `(K, M/K, trial)` order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let tasks: Vec<(Point, usize)> = points(cfg)?
        .into_iter()
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    pool(cfg)?.install(|| {
        tasks
            .par_iter()
            .map(|&(p, t)| {
                log::debug!("K={} M/K={} trial {t}", p.k, p.m_over_k);
                run_trial(cfg, p, t)
            })
            .collect()
    })
}

/// Shortest round-trip form, in scientific notation outside `[1e-4, 1e15)`.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// Sample mean and standard deviation (`n − 1` denominator).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn metric_values(rec: &TrialRecord) -> [f64; 7] {
    [
        rec.frac_uncolored,
        rec.missed as f64,
        rec.false_alarms as f64,
        rec.phase_error,
        rec.m_total as f64,
        if rec.success { 1.0 } else { 0.0 },
        rec.ms,
    ]
}

/// Per-trial rows, then for each grid point with at least two trials rows
/// `mean`, `std` and `success_rate`.
pub fn sweep_csv(cfg: &ExperimentConfig, records: &[TrialRecord]) -> Result<String> {
    let hash = cfg.hash();
    let init = cfg.init.to_string();
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(SWEEP_HEADER)?;
    let prefix = |seed: String, trial: &str, p: &Point| {
        vec![
            seed,
            trial.to_string(),
            cfg.n.to_string(),
            p.k.to_string(),
            num(p.m_over_k),
            p.d.to_string(),
            init.clone(),
        ]
    };
    for group in records.chunk_by(|a, b| a.point == b.point) {
        let p = &group[0].point;
        for r in group {
            let mut row = prefix(r.seed.to_string(), &r.trial.to_string(), p);
            let v = metric_values(r);
            row.extend(v[..5].iter().map(|&x| num(x)));
            row.push(r.success.to_string());
            row.push(num(r.ms));
            row.push(hash.clone());
            out.write_record(&row)?;
        }
        if group.len() < 2 {
            continue;
        }
        let columns: Vec<Vec<f64>> = (0..METRICS.len())
            .map(|c| group.iter().map(|r| metric_values(r)[c]).collect())
            .collect();
        let stats: Vec<(f64, f64)> = columns.iter().map(|c| mean_std(c)).collect();
        for (label, pick) in [("mean", 0), ("std", 1)] {
            let mut row = prefix(cfg.seed.to_string(), label, p);
            row.extend(stats.iter().map(|s| num(if pick == 0 { s.0 } else { s.1 })));
            row.push(hash.clone());
            out.write_record(&row)?;
        }
        let mut row = prefix(cfg.seed.to_string(), "success_rate", p);
        row.extend(METRICS.iter().map(|&m| {
            if m == "success" {
                num(stats[5].0)
            } else {
                String::new()
            }
        }));
        row.push(hash.clone());
        out.write_record(&row)?;
    }
    Ok(String::from_utf8(out.into_inner()?)?)
}

/// Recomputes every aggregate row of a sweep table from its trial rows.
pub fn audit_sweep_csv(text: &str) -> Result<()> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    ensure!(header.iter().eq(SWEEP_HEADER), "unexpected header");
    let col = |name: &str| SWEEP_HEADER.iter().position(|&h| h == name).unwrap();
    let key = |r: &csv::StringRecord| (r[col("K")].to_string(), r[col("M_over_K")].to_string());
    let mut trials: Vec<csv::StringRecord> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let label = &rec[col("trial")];
        if label.parse::<usize>().is_ok() {
            if trials.first().is_some_and(|t| key(t) != key(&rec)) {
                trials.clear();
            }
            trials.push(rec);
            continue;
        }
        ensure!(
            trials.first().is_some_and(|t| key(t) == key(&rec)),
            "aggregate row {label} has no trials above it"
        );
        for (m, &name) in METRICS.iter().enumerate() {
            let cell = &rec[col(name)];
            if cell.is_empty() {
                ensure!(label == "success_rate", "{label} row lacks {name}");
                continue;
            }
            let values = trials
                .iter()
                .map(|t| match &t[col(name)] {
                    "true" => Ok(1.0),
                    "false" => Ok(0.0),
                    s => s.parse::<f64>(),
                })
                .collect::<std::result::Result<Vec<f64>, _>>()?;
            let (mean, std) = mean_std(&values);
            let expect = match label {
                "mean" => mean,
                "std" => std,
                "success_rate" if m == 5 => mean,
                _ => bail!("unknown aggregate row {label}"),
            };
            let got: f64 = cell.parse()?;
            let ok = got == expect || (got.is_nan() && expect.is_nan()) || (got - expect).abs() <= 1e-12 * expect.abs().max(1e-300);
            ensure!(ok, "{label} of {name}: table says {got}, trials give {expect}");
        }
    }
    Ok(())
}

/// `sim` and `sweep`: runs every trial, writes the table and audits it.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<String> {
    ensure!(matches!(cfg.mode, Mode::Sim | Mode::Sweep), "not a sim or sweep config");
    let records = run_trials(cfg)?;
    let text = sweep_csv(cfg, &records)?;
    audit_sweep_csv(&text).context("self-audit of aggregate rows failed")?;
    Ok(text)
}

/// `eps,D,key,j,value`: rows `p_j` for the trajectory, then summary rows
/// `x2` (empty when the recursion has no interior fixed point),
/// `floor_bound`, `f_prime_1` and `converged_at`.
pub fn run_de_figure(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    let mut out = String::from("eps,D,key,j,value\n");
    for &eps in &cfg.eps {
        let d = cfg.degree_for(eps)?;
        let dist = harmonic_lambda(d)?;
        let params = GraphParams::new(DE_SPARSITY, eps, &dist)?;
        let trace = run_de(&DeParams::new(dist.clone(), params, cfg.p0)?)?;
        for (j, p) in trace.trajectory.iter().enumerate() {
            writeln!(out, "{eps},{d},p_j,{j},{}", num(*p))?;
        }
        let x2 = fixed_points(&dist, &params).floor().map_or(String::new(), num);
        writeln!(out, "{eps},{d},x2,,{x2}")?;
        writeln!(out, "{eps},{d},floor_bound,,{}", num(error_floor_bound(&dist, &params)))?;
        writeln!(out, "{eps},{d},f_prime_1,,{}", num(stability_margin(&dist, &params)))?;
        let conv = trace.converged_at.map_or(String::new(), |j| j.to_string());
        writeln!(out, "{eps},{d},converged_at,,{conv}")?;
    }
    Ok(out)
}

/// Success requires the decoder to finish and the estimate to match the
/// signal within this relative error, up to a global phase.
pub const TWOLAYER_TOL: f64 = 1e-8;

/// `seed,trial,K,success,rel_error,m_total,config_hash`.
pub fn run_twolayer(cfg: &ExperimentConfig) -> Result<String> {
    cfg.validate()?;
    ensure!(cfg.mode == Mode::Twolayer, "not a twolayer config");
    let eps = cfg.eps[0];
    let tasks: Vec<(usize, usize)> = cfg
        .k
        .iter()
        .flat_map(|&k| (0..cfg.trials).map(move |t| (k, t)))
        .collect();
    let rows: Vec<String> = pool(cfg)?.install(|| {
        tasks
            .par_iter()
            .map(|&(k, t)| -> Result<String> {
                let seed = trial_seed(cfg, t);
                let design = CsDesign::for_sparsity(cfg.n, k, eps, DEFAULT_CS_DEGREE, seed.fork("cs"))?;
                let x = random_sparse_signal(cfg.n, k, seed.fork("signal"), MAGNITUDE_RANGE)?;
                let out = two_layer_pipeline(&x, &design, DEFAULT_PHASE_TOL)?;
                let err = global_phase_error(&x, &out.estimate)?;
                let success = out.success && err <= TWOLAYER_TOL;
                Ok(format!("{},{t},{k},{success},{},{}", seed.0, num(err), out.m_total))
            })
            .collect::<Result<_>>()
    })?;
    let hash = cfg.hash();
    let mut out = String::from("seed,trial,K,success,rel_error,m_total,config_hash\n");
    for r in rows {
        writeln!(out, "{r},{hash}")?;
    }
    Ok(out)
}

/// Dispatches on `cfg.mode`.
pub fn run(cfg: &ExperimentConfig) -> Result<String> {
    match cfg.mode {
        Mode::De => run_de_figure(cfg),
        Mode::Sim | Mode::Sweep => run_sweep(cfg),
        Mode::Twolayer => run_twolayer(cfg),
    }
}

