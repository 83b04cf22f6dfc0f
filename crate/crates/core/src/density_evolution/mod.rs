//! Protograph density evolution on the binary symmetric channel.
//!
//! [`ternary`] tracks Algorithm E messages exactly; [`quantized`] tracks
//! scaled sum-product messages on a uniform LLR grid. Both run on the
//! all-zero codeword and report convergence of the a-posteriori error mass.
//!
//! Edges of one protograph entry `b_ij` are exchangeable: they see the same
//! neighbourhood and start from the same channel message, so every update
//! keeps their pmfs equal. [`DeState`] therefore stores one pmf per entry
//! and a multiplicity, which is the same dynamical system as one pmf per
//! parallel edge.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::protograph::BaseMatrix;
use crate::simulation::Format;

pub mod quantized;
pub mod ternary;

pub use quantized::{de_run_spa, threshold_spa, BoxplusTable, QuantizedLlrPmf, Quantization};
pub use ternary::{app_e, cn_update_e, de_run_e, threshold_e, vn_update_e, LatticePmf, TernaryPmf};

/// Stopping rules of a density-evolution run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeParams {
    pub max_iter: usize,
    /// Convergence once the residual drops below this.
    pub eps: f64,
    /// Give up when the residual moved less than `stall_tol` over this many
    /// iterations.
    pub stall_window: usize,
    pub stall_tol: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            eps: 1e-9,
            stall_window: 50,
            stall_tol: 1e-12,
        }
    }
}

/// Outcome of one density-evolution run.
#[derive(Clone, Debug, PartialEq)]
pub struct DeRun {
    pub converged: bool,
    pub iterations: usize,
    /// Residual after every iteration.
    pub residual: Vec<f64>,
    /// Stopped by the stall rule rather than the iteration cap.
    pub stalled: bool,
}

impl DeRun {
    pub fn final_residual(&self) -> f64 {
        self.residual.last().copied().unwrap_or(f64::NAN)
    }

    /// Iterations, counted from the end of the trace, after which the
    /// residual never increases again. Equal to the trace length for a
    /// monotone trace.
    pub fn monotone_tail(&self) -> usize {
        let r = &self.residual;
        let mut k = r.len().min(1);
        while k < r.len() && r[r.len() - k - 1] >= r[r.len() - k] {
            k += 1;
        }
        k
    }
}

/// Applies the stopping rules to a residual trace. `None` means keep going.
pub(crate) fn check_stop(trace: &[f64], params: &DeParams) -> Option<DeRun> {
    let last = *trace.last()?;
    let done = |converged: bool, stalled: bool| DeRun {
        converged,
        iterations: trace.len(),
        residual: trace.to_vec(),
        stalled,
    };
    if last < params.eps {
        return Some(done(true, false));
    }
    if !last.is_finite() {
        return Some(done(false, false));
    }
    let w = params.stall_window;
    if w > 0 && trace.len() > w && (trace[trace.len() - 1 - w] - last).abs() < params.stall_tol {
        return Some(done(false, true));
    }
    if trace.len() >= params.max_iter {
        return Some(done(false, false));
    }
    None
}

pub(crate) fn validate_delta(delta: f64) -> Result<()> {
    if !(0.0..=0.5).contains(&delta) {
        return Err(Error::InvalidParameter(format!("delta = {delta} outside [0, 1/2]")));
    }
    Ok(())
}

/// Message pmfs per protograph entry, in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct DeState<M> {
    /// `(i, j, b_ij)` for every non-zero entry, row-major.
    pub classes: Vec<(usize, usize, u32)>,
    pub v2c: Vec<M>,
    pub c2v: Vec<M>,
    pub iteration: usize,
}

impl<M: Clone> DeState<M> {
    /// Every class starts with the channel message of its column in both
    /// directions.
    pub fn new(base: &BaseMatrix, init: impl Fn(usize) -> M) -> Self {
        let classes: Vec<(usize, usize, u32)> = (0..base.m0())
            .flat_map(|i| (0..base.n0()).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let b = base.get(i, j);
                (b > 0).then_some((i, j, b))
            })
            .collect();
        let v2c: Vec<M> = classes.iter().map(|&(_, j, _)| init(j)).collect();
        Self {
            c2v: v2c.clone(),
            v2c,
            classes,
            iteration: 0,
        }
    }

    /// Number of directed edge types, `2 sum b_ij`.
    pub fn edge_type_count(&self) -> usize {
        2 * self.classes.iter().map(|c| c.2 as usize).sum::<usize>()
    }

    pub fn class_index(&self, i: usize, j: usize) -> Option<usize> {
        self.classes.iter().position(|&(a, b, _)| a == i && b == j)
    }

    /// Classes in row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&c| self.classes[c].0 == i)
    }

    /// Classes in column `j`.
    pub fn column(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.classes.len()).filter(move |&c| self.classes[c].1 == j)
    }
}

/// Threshold search settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThresholdConfig {
    /// Block length used to express thresholds as `n delta`.
    pub n: usize,
    /// Final bracket width.
    pub tol: f64,
    /// Coarse scan step.
    pub step: f64,
    pub max_delta: f64,
    pub params: DeParams,
    pub exec: Exec,
}

impl ThresholdConfig {
    /// Scan in steps of `4/n`, refine to `1/(2n)`.
    pub fn for_block_length(n: usize) -> Self {
        Self {
            n,
            tol: 0.5 / n as f64,
            step: 4.0 / n as f64,
            max_delta: 0.5,
            params: DeParams::default(),
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Threshold {
    pub delta_star: f64,
    /// Largest probe that converged.
    pub lo: f64,
    /// Smallest probe above `lo` that failed.
    pub hi: f64,
    pub n: usize,
    /// Iterations used by the converging run at `lo`.
    pub iterations: usize,
    /// Final residual of the failing run at `hi`.
    pub residual: f64,
    pub probes: usize,
    /// Probes that converged although a smaller probe had failed.
    pub non_monotone: Vec<f64>,
}

impl Threshold {
    pub fn n_delta_star(&self) -> f64 {
        self.n as f64 * self.delta_star
    }
}

/// Finds the first transition from convergence to failure.
///
/// Scans upward from zero in steps of `cfg.step` until a probe fails, then
/// splits the bracket `[last converged, first failed]` down to `cfg.tol`.
/// Convergence is not monotone in delta for every ensemble, which is why
/// the scan starts at zero instead of bisecting the whole range; converging
/// probes observed beyond a failure are reported in `non_monotone`.
pub fn threshold_search<F>(probe: F, cfg: &ThresholdConfig) -> Result<Threshold>
where
    F: Fn(f64) -> Result<DeRun> + Sync + Send,
{
    if !(cfg.tol > 0.0 && cfg.step > 0.0 && cfg.max_delta > 0.0 && cfg.max_delta <= 0.5) {
        return Err(Error::InvalidParameter("threshold search needs positive tol and step".into()));
    }
    let width = cfg.exec.width();
    let mut probes = 0;
    let mut non_monotone = Vec::new();

    let first = probe(0.0)?;
    probes += 1;
    if !first.converged {
        return Err(Error::Bracket("density evolution fails even on a noiseless channel".into()));
    }
    let (mut lo, mut lo_run) = (0.0, first);

    // Coarse upward scan, `width` probes at a time.
    let (mut hi, mut hi_run);
    let mut k = 1usize;
    loop {
        let deltas: Vec<f64> = (0..width)
            .map(|t| ((k + t) as f64 * cfg.step).min(cfg.max_delta))
            .collect();
        let runs = cfg
            .exec
            .map_slice(&deltas, |&d| probe(d))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        probes += runs.len();
        match runs.iter().position(|r| !r.converged) {
            Some(t) => {
                non_monotone.extend((t + 1..runs.len()).filter(|&u| runs[u].converged).map(|u| deltas[u]));
                let mut runs = runs;
                if t > 0 {
                    lo = deltas[t - 1];
                    lo_run = runs[t - 1].clone();
                }
                hi = deltas[t];
                hi_run = runs.swap_remove(t);
                break;
            }
            None => {
                lo = deltas[width - 1];
                lo_run = runs.into_iter().last().expect("width >= 1");
                if lo >= cfg.max_delta {
                    return Err(Error::Bracket(format!(
                        "converged everywhere up to delta = {}",
                        cfg.max_delta
                    )));
                }
            }
        }
        k += width;
    }

    // Refine: split [lo, hi] into width + 1 parts per round.
    while hi - lo > cfg.tol {
        let parts = width + 1;
        let deltas: Vec<f64> = (1..parts)
            .map(|t| lo + (hi - lo) * t as f64 / parts as f64)
            .collect();
        let runs = cfg.exec.map_slice(&deltas, |&d| probe(d));
        probes += runs.len();
        let mut new_lo = (lo, None);
        let mut new_hi = (hi, None);
        let mut failed = false;
        for (d, run) in deltas.iter().zip(runs) {
            let run = run?;
            if failed {
                if run.converged {
                    non_monotone.push(*d);
                }
                continue;
            }
            if run.converged {
                new_lo = (*d, Some(run));
            } else {
                new_hi = (*d, Some(run));
                failed = true;
            }
        }
        lo = new_lo.0;
        if let Some(r) = new_lo.1 {
            lo_run = r;
        }
        hi = new_hi.0;
        if let Some(r) = new_hi.1 {
            hi_run = r;
        }
    }
    Ok(Threshold {
        delta_star: 0.5 * (lo + hi),
        lo,
        hi,
        n: cfg.n,
        iterations: lo_run.iterations,
        residual: hi_run.final_residual(),
        probes,
        non_monotone,
    })
}

/// One line of threshold output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub ensemble: String,
    pub algorithm: String,
    pub omega: f64,
    pub delta_star: f64,
    pub n_delta_star: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl ThresholdRow {
    pub fn new(ensemble: &str, algorithm: &str, omega: f64, t: &Threshold) -> Self {
        Self {
            ensemble: ensemble.to_string(),
            algorithm: algorithm.to_string(),
            omega,
            delta_star: t.delta_star,
            n_delta_star: t.n_delta_star(),
            iterations: t.iterations,
            residual: t.residual,
        }
    }
}

pub const THRESHOLD_HEADER: &[&str] = &[
    "ensemble",
    "algorithm",
    "omega",
    "delta_star",
    "n_delta_star",
    "iterations",
    "residual",
];

pub fn write_threshold_rows<W: Write>(rows: &[ThresholdRow], out: W, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(THRESHOLD_HEADER)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(threshold: f64) -> impl Fn(f64) -> Result<DeRun> + Sync + Send {
        move |d| {
            Ok(DeRun {
                converged: d < threshold,
                iterations: 3,
                residual: vec![if d < threshold { 0.0 } else { 0.1 }],
                stalled: false,
            })
        }
    }

    #[test]
    fn search_brackets_step_function() {
        for exec in [Exec::Sequential, Exec::Workers(3)] {
            let cfg = ThresholdConfig {
                exec,
                ..ThresholdConfig::for_block_length(1000)
            };
            let t = threshold_search(fake(0.0371), &cfg).unwrap();
            assert!(t.lo < 0.0371 && 0.0371 <= t.hi);
            assert!(t.hi - t.lo <= cfg.tol);
            assert!((t.delta_star - 0.0371).abs() <= cfg.tol);
            assert!(t.non_monotone.is_empty());
            assert_eq!(t.residual, 0.1);
        }
    }

    #[test]
    fn search_reports_bracket_failures() {
        let cfg = ThresholdConfig {
            exec: Exec::Sequential,
            ..ThresholdConfig::for_block_length(100)
        };
        assert!(matches!(threshold_search(fake(0.0), &cfg), Err(Error::Bracket(_))));
        assert!(matches!(threshold_search(fake(2.0), &cfg), Err(Error::Bracket(_))));
    }

    #[test]
    fn search_flags_non_monotone_probes() {
        // Converges below 0.1 and again inside (0.2, 0.3).
        let probe = |d: f64| {
            let ok = d < 0.1 || (d > 0.2 && d < 0.3);
            Ok(DeRun {
                converged: ok,
                iterations: 1,
                residual: vec![if ok { 0.0 } else { 1.0 }],
                stalled: false,
            })
        };
        let cfg = ThresholdConfig {
            n: 100,
            tol: 0.001,
            step: 0.04,
            max_delta: 0.5,
            params: DeParams::default(),
            exec: Exec::Workers(8),
        };
        let t = threshold_search(probe, &cfg).unwrap();
        assert!((t.delta_star - 0.1).abs() < 0.001);
        assert!(!t.non_monotone.is_empty());
        assert!(t.non_monotone.iter().all(|&d| d > 0.2 && d < 0.3));
    }

    #[test]
    fn stop_rules() {
        let p = DeParams {
            max_iter: 5,
            eps: 1e-3,
            stall_window: 2,
            stall_tol: 1e-6,
        };
        assert!(check_stop(&[0.5, 0.1], &p).is_none());
        assert!(check_stop(&[0.5, 1e-4], &p).unwrap().converged);
        let s = check_stop(&[0.5, 0.2, 0.2, 0.2], &p).unwrap();
        assert!(!s.converged && s.stalled);
        assert!(check_stop(&[0.5, 0.2, 0.2], &p).is_none());
        let s = check_stop(&[0.5, 0.4, 0.3, 0.2, 0.1], &p).unwrap();
        assert!(!s.converged && !s.stalled && s.iterations == 5);
    }

    #[test]
    fn monotone_tail_counts_trailing_descent() {
        let run = DeRun {
            converged: true,
            iterations: 5,
            residual: vec![0.1, 0.3, 0.2, 0.1, 0.05],
            stalled: false,
        };
        assert_eq!(run.monotone_tail(), 4);
    }

    #[test]
    fn threshold_rows_csv() {
        let t = Threshold {
            delta_star: 0.01,
            lo: 0.0099,
            hi: 0.0101,
            n: 9602,
            iterations: 40,
            residual: 0.02,
            probes: 7,
            non_monotone: vec![],
        };
        let mut buf = Vec::new();
        write_threshold_rows(&[ThresholdRow::new("C", "e", 8.0, &t)], &mut buf, Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "ensemble,algorithm,omega,delta_star,n_delta_star,iterations,residual"
        );
        assert!(lines.next().unwrap().starts_with("C,e,8.0,0.01,96.02,40,0.02"));
    }
}
