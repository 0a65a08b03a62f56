//! On-disk formats. All indices are 1-based in files.

use std::io::{Read, Write};

use anyhow::{ensure, Context, Result};
use serde::{Deserialize, Serialize};

use phasecode::graph::CodeGraph;
use phasecode::measurement::BinObservation;
use phasecode::peeling::ColoringEvent;
use phasecode::{Complex, SparseSignal};

#[derive(Serialize, Deserialize)]
struct SignalEntry {
    i: usize,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct SignalFile {
    n: usize,
    entries: Vec<SignalEntry>,
}

/// `{"n": .., "entries": [{"i": .., "re": .., "im": ..}, ..]}`.
pub fn write_signal<W: Write>(x: &SparseSignal, w: W) -> Result<()> {
    let file = SignalFile {
        n: x.n(),
        entries: x.iter().map(|(i, v)| SignalEntry { i, re: v.re, im: v.im }).collect(),
    };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn read_signal<R: Read>(r: R) -> Result<SparseSignal> {
    let file: SignalFile = serde_json::from_reader(r).context("parsing signal JSON")?;
    let mut x = SparseSignal::new(file.n);
    for e in file.entries {
        ensure!(!x.contains(e.i), "index {} listed twice", e.i);
        x.insert(e.i, Complex::new(e.re, e.im))?;
    }
    Ok(x)
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    #[serde(rename = "M")]
    bins: usize,
    left_adj: Vec<Vec<usize>>,
}

/// `{"n": .., "M": .., "left_adj": [[bins of node 1], ..]}`.
pub fn write_graph<W: Write>(g: &CodeGraph, w: W) -> Result<()> {
    let file = GraphFile {
        n: g.n(),
        bins: g.bins(),
        left_adj: g
            .left_adjacency()
            .iter()
            .map(|adj| adj.iter().map(|b| b + 1).collect())
            .collect(),
    };
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn read_graph<R: Read>(r: R) -> Result<CodeGraph> {
    let file: GraphFile = serde_json::from_reader(r).context("parsing graph JSON")?;
    let left = file
        .left_adj
        .into_iter()
        .map(|adj| {
            adj.into_iter()
                .map(|b| b.checked_sub(1).context("bin indices start at 1"))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CodeGraph::from_left_adjacency(file.n, file.bins, left)?)
}

/// 17 significant digits, enough to round-trip any `f64`.
fn exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// `bin,y1,y2,y3,y4`.
pub fn write_observations<W: Write>(obs: &[BinObservation], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["bin", "y1", "y2", "y3", "y4"])?;
    for (b, y) in obs.iter().enumerate() {
        let mut rec = vec![(b + 1).to_string()];
        rec.extend(y.0.iter().map(|&v| exact(v)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_observations<R: Read>(r: R) -> Result<Vec<BinObservation>> {
    let mut obs = Vec::new();
    for (row, rec) in csv::Reader::from_reader(r).into_records().enumerate() {
        let rec = rec?;
        ensure!(rec.len() == 5, "row {}: expected 5 fields", row + 1);
        let bin: usize = rec[0].parse()?;
        ensure!(bin == row + 1, "row {}: bins must be listed in order", row + 1);
        let mut y = [0.0; 4];
        for (k, v) in y.iter_mut().enumerate() {
            *v = rec[k + 1].parse()?;
        }
        obs.push(BinObservation(y));
    }
    Ok(obs)
}

/// `iteration,bin,location,magnitude,residual`, one line per coloring.
pub fn write_trace<W: Write>(trace: &[ColoringEvent], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["iteration", "bin", "location", "magnitude", "residual"])?;
    for e in trace {
        out.write_record([
            e.iteration.to_string(),
            (e.bin + 1).to_string(),
            e.location.to_string(),
            exact(e.magnitude),
            exact(e.residual),
        ])?;
    }
    out.flush()?;
    Ok(())
}
