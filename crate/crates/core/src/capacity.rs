//! Memory-capacity experiments.
//!
//! A trial draws a uniform random sequence of length `T` over `M` symbols,
//! trains a generative readout with the ridge solver, regenerates the
//! sequence from its first symbol and reports the recall error. Sweeps
//! average trials over a grid of `nu = N/T` against either `rho = M/T` or
//! the leak rate `alpha`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::SymbolSequence;
use crate::regimes::{fit_generative, recall_error};
use crate::reservoir::{InputMatrix, Network, Reservoir, ReservoirKind, DEFAULT_ETA};
use crate::rng::{mix_seed, RandomStream, SeededStream};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "axis1,axis2,mean_error,std_error,trials";

/// One recall-error measurement.
pub fn run_trial(
    t: usize,
    n: usize,
    m: usize,
    alpha: f64,
    kind: ReservoirKind,
    seed: u64,
) -> Result<f64> {
    run_trial_with_eta(t, n, m, alpha, kind, seed, DEFAULT_ETA)
}

/// Draw order from the seeded stream: the `T` sequence symbols, then `U`,
/// then (dense only) the reservoir's normal matrix.
pub fn run_trial_with_eta(
    t: usize,
    n: usize,
    m: usize,
    alpha: f64,
    kind: ReservoirKind,
    seed: u64,
    eta: f64,
) -> Result<f64> {
    if t < 2 {
        return Err(Error::InvalidParameter(
            "trial length T must be >= 2".into(),
        ));
    }
    if m < 2 {
        return Err(Error::InvalidParameter(
            "trial alphabet M must be >= 2".into(),
        ));
    }
    let mut rng = SeededStream::new(seed);
    let symbols = (0..t).map(|_| rng.next_below(m as u32) as usize).collect();
    let seq = SymbolSequence::new(symbols, m)?;
    let input = InputMatrix::random(m, n, &mut rng)?;
    let reservoir = Reservoir::from_kind(kind, n, &mut rng)?;
    let network = Network::new(input, reservoir, alpha)?;
    let model = fit_generative(network, &seq, eta)?;
    let recalled = model.recall_generative(seq.indices()[0], t)?;
    recall_error(&seq, &recalled)
}

/// The axis swept against `nu`, with the other parameter held fixed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", rename_all = "lowercase")]
pub enum SecondAxis {
    Rho { values: Vec<f64>, alpha: f64 },
    Alpha { values: Vec<f64>, rho: f64 },
}

impl SecondAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SecondAxis::Rho { .. } => "rho",
            SecondAxis::Alpha { .. } => "alpha",
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            SecondAxis::Rho { values, .. } | SecondAxis::Alpha { values, .. } => values,
        }
    }

    /// `(rho, alpha)` at grid index `j`.
    fn point(&self, j: usize) -> (f64, f64) {
        match self {
            SecondAxis::Rho { values, alpha } => (values[j], *alpha),
            SecondAxis::Alpha { values, rho } => (*rho, values[j]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub t: usize,
    pub trials: usize,
    pub nu: Vec<f64>,
    pub second: SecondAxis,
    pub reservoir: ReservoirKind,
    pub base_seed: u64,
    /// Recall threshold; carried for downstream capacity estimates only.
    pub theta: f64,
    pub eta: f64,
}

impl SweepConfig {
    pub fn new(t: usize, trials: usize, nu: Vec<f64>, second: SecondAxis) -> Self {
        SweepConfig {
            t,
            trials,
            nu,
            second,
            reservoir: ReservoirKind::Dense,
            base_seed: 0,
            theta: 0.05,
            eta: DEFAULT_ETA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.t < 2 {
            return bad(format!("T must be >= 2 (got {})", self.t));
        }
        if self.trials == 0 {
            return bad("trials must be >= 1".into());
        }
        if self.nu.is_empty() || self.second.values().is_empty() {
            return bad("grids must be non-empty".into());
        }
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if let Some(v) = self.nu.iter().find(|&&v| !unit(v)) {
            return bad(format!("nu values must lie in (0, 1] (got {v})"));
        }
        if let Some(v) = self.second.values().iter().find(|&&v| !unit(v)) {
            return bad(format!(
                "{} values must lie in (0, 1] (got {v})",
                self.second.name()
            ));
        }
        let fixed = match &self.second {
            SecondAxis::Rho { alpha, .. } => *alpha,
            SecondAxis::Alpha { rho, .. } => *rho,
        };
        if !unit(fixed) {
            return bad(format!("fixed parameter must lie in (0, 1] (got {fixed})"));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return bad(format!("theta must lie in (0, 1) (got {})", self.theta));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be >= 0 (got {})", self.eta));
        }
        Ok(())
    }

    /// `(N, M, alpha)` for grid cell `(i, j)`, or `None` if the cell is invalid.
    pub fn cell(&self, i: usize, j: usize) -> Option<(usize, usize, f64)> {
        let (rho, alpha) = self.second.point(j);
        let t = self.t as f64;
        let n = (self.nu[i] * t).round() as usize;
        let m = ((rho * t).round() as usize).max(2);
        (n >= 1 && m <= n).then_some((n, m, alpha))
    }

    pub fn trial_seed(&self, i: usize, j: usize, trial: usize) -> u64 {
        mix_seed(&[self.base_seed, i as u64, j as u64, trial as u64])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

/// Mean and (population) standard deviation of recall error per grid cell,
/// stored row-major over `axis1 x axis2`. Invalid cells are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorSurface {
    pub axis1: Axis,
    pub axis2: Axis,
    pub cells: Vec<Option<CellStats>>,
    pub trials: usize,
}

impl ErrorSurface {
    pub fn shape(&self) -> (usize, usize) {
        (self.axis1.values.len(), self.axis2.values.len())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<CellStats> {
        let (_, cols) = self.shape();
        self.cells[i * cols + j]
    }

    pub fn mean(&self, i: usize, j: usize) -> Option<f64> {
        self.get(i, j).map(|c| c.mean)
    }
}

pub fn sweep(config: &SweepConfig) -> Result<ErrorSurface> {
    sweep_with(config, None, |_, _| {})
}

/// Runs every (cell, trial) pair, optionally on a pool of `jobs` threads.
/// Results are reduced in a fixed order, so the surface does not depend on
/// scheduling. `progress(done, total)` is called as trials finish.
pub fn sweep_with(
    config: &SweepConfig,
    jobs: Option<usize>,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<ErrorSurface> {
    config.validate()?;
    let rows = config.nu.len();
    let cols = config.second.values().len();
    let tasks: Vec<(usize, usize, usize)> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .filter(|&(i, j)| config.cell(i, j).is_some())
        .flat_map(|(i, j)| (0..config.trials).map(move |k| (i, j, k)))
        .collect();
    let total = tasks.len();
    let done = AtomicUsize::new(0);
    let run = || {
        tasks
            .par_iter()
            .map(|&(i, j, k)| {
                let (n, m, alpha) = config.cell(i, j).expect("filtered to valid cells");
                let e = run_trial_with_eta(
                    config.t,
                    n,
                    m,
                    alpha,
                    config.reservoir,
                    config.trial_seed(i, j, k),
                    config.eta,
                );
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, total);
                e
            })
            .collect::<Result<Vec<f64>>>()
    };
    let errors = match jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };

    let mut cells = vec![None; rows * cols];
    for (chunk, cell) in errors.chunks(config.trials).zip(
        tasks
            .iter()
            .step_by(config.trials)
            .map(|&(i, j, _)| i * cols + j),
    ) {
        let count = chunk.len() as f64;
        let mean = chunk.iter().sum::<f64>() / count;
        let var = chunk.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / count;
        cells[cell] = Some(CellStats {
            mean,
            std: var.sqrt(),
        });
    }
    Ok(ErrorSurface {
        axis1: Axis {
            name: "nu".into(),
            values: config.nu.clone(),
        },
        axis2: Axis {
            name: config.second.name().into(),
            values: config.second.values().to_vec(),
        },
        cells,
        trials: config.trials,
    })
}

/// `d(error)/d(nu)` on the surface grid and the `nu` of steepest change per
/// `axis2` column.
#[derive(Clone, Debug, PartialEq)]
pub struct Transitions {
    /// Row-major like the surface; `None` where a needed cell is absent.
    pub derivative: Vec<Option<f64>>,
    /// `nu` at the maximum `|d(error)/d(nu)|`, lowest `nu` on ties.
    pub transition: Vec<Option<f64>>,
}

pub fn derivative_and_transitions(surface: &ErrorSurface) -> Result<Transitions> {
    let (rows, cols) = surface.shape();
    if rows < 3 {
        return Err(Error::InvalidParameter(format!(
            "derivative needs at least 3 nu points (got {rows})"
        )));
    }
    let nu = &surface.axis1.values;
    let mut derivative = vec![None; rows * cols];
    let mut transition = vec![None; cols];
    for j in 0..cols {
        let mut best: Option<(f64, f64)> = None;
        for i in 0..rows {
            let (lo, hi) = match i {
                0 => (0, 1),
                _ if i == rows - 1 => (rows - 2, rows - 1),
                _ => (i - 1, i + 1),
            };
            let d = match (surface.mean(lo, j), surface.mean(hi, j)) {
                (Some(a), Some(b)) => Some((b - a) / (nu[hi] - nu[lo])),
                _ => None,
            };
            derivative[i * cols + j] = d;
            if let Some(d) = d {
                if best.is_none_or(|(b, _)| d.abs() > b) {
                    best = Some((d.abs(), nu[i]));
                }
            }
        }
        transition[j] = best.map(|(_, v)| v);
    }
    Ok(Transitions {
        derivative,
        transition,
    })
}

/// Rounds to `digits` significant digits and prints the shortest decimal
/// that reads back to the rounded value.
pub fn format_significant(v: f64, digits: usize) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{:.*e}", digits.saturating_sub(1), v)
        .parse()
        .expect("formatted float parses");
    format!("{rounded}")
}

pub fn write_surface_csv_to(surface: &ErrorSurface, mut out: impl Write) -> std::io::Result<()> {
    let mut text = String::new();
    writeln!(text, "{CSV_HEADER}").ok();
    let (rows, cols) = surface.shape();
    for i in 0..rows {
        for j in 0..cols {
            let a1 = format_significant(surface.axis1.values[i], 6);
            let a2 = format_significant(surface.axis2.values[j], 6);
            match surface.get(i, j) {
                Some(c) => writeln!(text, "{a1},{a2},{},{},{}", c.mean, c.std, surface.trials),
                None => writeln!(text, "{a1},{a2},,,0"),
            }
            .ok();
        }
    }
    out.write_all(text.as_bytes())
}

pub fn write_surface_csv(surface: &ErrorSurface, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_surface_csv_to(surface, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a surface written by [`write_surface_csv`]. Axis names are not in
/// the CSV and come back as `axis1` / `axis2`.
pub fn read_surface_csv(input: impl BufRead) -> Result<ErrorSurface> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty CSV".into()))?
        .map_err(|e| Error::Malformed(e.to_string()))?;
    if header.trim_end() != CSV_HEADER {
        return Err(Error::Malformed(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::Malformed(format!("bad number {s:?}")))
    };
    let mut axis1: Vec<f64> = Vec::new();
    let mut axis2: Vec<f64> = Vec::new();
    let mut cells = Vec::new();
    let mut trials = 0;
    for line in lines {
        let line = line.map_err(|e| Error::Malformed(e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 5 {
            return Err(Error::Malformed(format!("bad row {line:?}")));
        }
        let (a, b) = (num(f[0])?, num(f[1])?);
        if axis1.last() != Some(&a) {
            axis1.push(a);
        }
        if axis1.len() == 1 {
            axis2.push(b);
        }
        cells.push(if f[2].is_empty() {
            None
        } else {
            trials = f[4]
                .parse()
                .map_err(|_| Error::Malformed(format!("bad trials {:?}", f[4])))?;
            Some(CellStats {
                mean: num(f[2])?,
                std: num(f[3])?,
            })
        });
    }
    if cells.len() != axis1.len() * axis2.len() {
        return Err(Error::Malformed("CSV rows do not form a full grid".into()));
    }
    Ok(ErrorSurface {
        axis1: Axis {
            name: "axis1".into(),
            values: axis1,
        },
        axis2: Axis {
            name: "axis2".into(),
            values: axis2,
        },
        cells,
        trials,
    })
}

/// Writes the sweep configuration as JSON next to the CSV.
pub fn write_sweep_metadata(config: &SweepConfig, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(config)
        .map_err(|e| Error::Malformed(format!("serializing sweep config: {e}")))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Parses `start:end:count` into `count` evenly spaced values, endpoints included.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("grid {spec:?} is not start:end:count"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !end.is_finite() {
        return Err(bad());
    }
    if count == 1 {
        return if start == end {
            Ok(vec![start])
        } else {
            Err(bad())
        };
    }
    let step = (end - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i == count - 1 {
                end
            } else {
                start + step * i as f64
            }
        })
        .collect())
}
