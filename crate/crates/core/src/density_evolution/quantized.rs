//! Quantized density evolution for the scaled sum-product decoder.
//!
//! LLRs live on the grid `{-L, ..., -D, 0, D, ..., L}`. The check update is
//! the pairwise boxplus `2 atanh(tanh(a/2) tanh(b/2))` rounded to the grid,
//! tabulated once over magnitudes; signs multiply. The variable update is a
//! lattice convolution done with FFTs, with the mass beyond `+-L` folded into
//! the end bins. The check output scaling by `omega` maps grid point `k` to
//! `round(omega k)`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{check_stop, threshold_search, validate_delta, DeParams, DeRun, DeState, Threshold, ThresholdConfig};
use crate::error::{Error, Result};
use crate::protograph::BaseMatrix;

const SUM_TOL: f64 = 1e-9;
/// FFT outputs below this are round-off.
const FFT_FLOOR: f64 = 1e-16;

/// Grid step and saturation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantization {
    pub step: f64,
    pub saturation: f64,
}

impl Default for Quantization {
    fn default() -> Self {
        Self {
            step: 1.0 / 16.0,
            saturation: 32.0,
        }
    }
}

impl Quantization {
    pub fn validate(&self) -> Result<()> {
        let k = self.saturation / self.step;
        if !(self.step > 0.0 && self.saturation > 0.0 && k.is_finite()) || (k - k.round()).abs() > 1e-9 || k > 30000.0 {
            return Err(Error::InvalidParameter(format!(
                "saturation {} must be a multiple of the step {}",
                self.saturation, self.step
            )));
        }
        Ok(())
    }

    /// Grid points per side, `L / D`.
    pub fn half_width(&self) -> usize {
        (self.saturation / self.step).round() as usize
    }

    pub fn bins(&self) -> usize {
        2 * self.half_width() + 1
    }

    /// Nearest grid index (relative to zero) of an LLR value, saturated.
    pub fn index_of(&self, llr: f64) -> i64 {
        let k = self.half_width() as i64;
        ((llr / self.step).round() as i64).clamp(-k, k)
    }
}

/// Distribution over the quantized LLR grid; `probs[i]` is the mass at
/// `(i - K) D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizedLlrPmf {
    pub quant: Quantization,
    pub probs: Vec<f64>,
}

impl QuantizedLlrPmf {
    pub fn new(quant: Quantization, probs: Vec<f64>) -> Result<Self> {
        quant.validate()?;
        if probs.len() != quant.bins() {
            return Err(Error::Dimension {
                expected: quant.bins(),
                actual: probs.len(),
            });
        }
        let p = Self { quant, probs };
        p.validate()?;
        Ok(p)
    }

    /// All mass at grid index `k` (relative to zero).
    pub fn point(quant: Quantization, k: i64) -> Self {
        let h = quant.half_width() as i64;
        let mut probs = vec![0.0; quant.bins()];
        probs[(k.clamp(-h, h) + h) as usize] = 1.0;
        Self { quant, probs }
    }

    /// Channel LLR of the all-zero word on a BSC with crossover `delta`.
    pub fn channel(quant: Quantization, delta: f64) -> Self {
        let h = quant.half_width() as i64;
        let k = if delta > 0.0 {
            quant.index_of(((1.0 - delta) / delta).ln())
        } else {
            h
        };
        let mut probs = vec![0.0; quant.bins()];
        probs[(h + k) as usize] += 1.0 - delta;
        probs[(h - k) as usize] += delta;
        Self { quant, probs }
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::Density("negative or NaN mass in LLR pmf".into()));
        }
        let s = self.sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::Density(format!("LLR pmf sums to {s}")));
        }
        Ok(())
    }

    /// Mass on negative LLRs plus half the mass at zero.
    pub fn error_probability(&self) -> f64 {
        let h = self.quant.half_width();
        self.probs[..h].iter().sum::<f64>() + 0.5 * self.probs[h]
    }

    /// Maps grid point `k` to `round(omega k)`.
    pub fn scaled(&self, omega: f64) -> Self {
        if omega == 1.0 {
            return self.clone();
        }
        let h = self.quant.half_width() as i64;
        let mut probs = vec![0.0; self.probs.len()];
        for (i, &p) in self.probs.iter().enumerate() {
            if p != 0.0 {
                let k = (((i as i64 - h) as f64) * omega).round() as i64;
                probs[(k.clamp(-h, h) + h) as usize] += p;
            }
        }
        Self { quant: self.quant, probs }
    }

    fn renormalize(&mut self, what: &str) -> Result<()> {
        self.validate().map_err(|e| Error::Density(format!("{what}: {e}")))?;
        let s = self.sum();
        self.probs.iter_mut().for_each(|p| *p /= s);
        Ok(())
    }
}

/// Boxplus of two grid magnitudes, tabulated.
pub struct BoxplusTable {
    quant: Quantization,
    k: usize,
    table: Vec<u16>,
}

impl BoxplusTable {
    pub fn new(quant: Quantization) -> Result<Self> {
        quant.validate()?;
        let k = quant.half_width();
        let d = quant.step;
        let mut table = vec![0u16; (k + 1) * (k + 1)];
        for a in 0..=k {
            for b in a..=k {
                let (x, y) = (a as f64 * d, b as f64 * d);
                // min(x, y) + log1p(e^{-(x+y)}) - log1p(e^{-|x-y|})
                let v = x.min(y) + (-(x + y)).exp().ln_1p() - (-(x - y).abs()).exp().ln_1p();
                let idx = quant.index_of(v).max(0) as u16;
                table[a * (k + 1) + b] = idx;
                table[b * (k + 1) + a] = idx;
            }
        }
        Ok(Self { quant, k, table })
    }

    pub fn quantization(&self) -> Quantization {
        self.quant
    }

    /// Grid index of `boxplus(a, b)` for signed grid indices.
    pub fn lookup(&self, a: i64, b: i64) -> i64 {
        let m = self.table[a.unsigned_abs() as usize * (self.k + 1) + b.unsigned_abs() as usize] as i64;
        m * a.signum() * b.signum()
    }

    /// Distribution of `boxplus(X, Y)` for independent `X ~ p`, `Y ~ q`.
    pub fn combine(&self, p: &QuantizedLlrPmf, q: &QuantizedLlrPmf) -> QuantizedLlrPmf {
        let k = self.k;
        // Split into magnitude-indexed positive and negative parts; zero
        // lives in pos[0].
        let split = |x: &QuantizedLlrPmf| {
            let mut pos = vec![0.0; k + 1];
            let mut neg = vec![0.0; k + 1];
            for m in 0..=k {
                pos[m] = x.probs[k + m];
                if m > 0 {
                    neg[m] = x.probs[k - m];
                }
            }
            (pos, neg)
        };
        let (pp, pn) = split(p);
        let (qp, qn) = split(q);
        let q_nz: Vec<usize> = (0..=k).filter(|&m| qp[m] != 0.0 || qn[m] != 0.0).collect();
        let mut out = vec![0.0; 2 * k + 1];
        for a in 0..=k {
            let (ap, an) = (pp[a], pn[a]);
            if ap == 0.0 && an == 0.0 {
                continue;
            }
            let row = &self.table[a * (k + 1)..(a + 1) * (k + 1)];
            for &b in &q_nz {
                let (bp, bn) = (qp[b], qn[b]);
                let g = row[b] as usize;
                if g == 0 {
                    out[k] += (ap + an) * (bp + bn);
                } else {
                    out[k + g] += ap * bp + an * bn;
                    out[k - g] += ap * bn + an * bp;
                }
            }
        }
        QuantizedLlrPmf {
            quant: self.quant,
            probs: out,
        }
    }

    /// `p` boxplus-combined with itself `n` times; `None` for `n = 0`.
    pub fn power(&self, p: &QuantizedLlrPmf, n: u32) -> Option<QuantizedLlrPmf> {
        let mut result: Option<QuantizedLlrPmf> = None;
        let mut base = p.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                result = Some(match result {
                    None => base.clone(),
                    Some(r) => self.combine(&r, &base),
                });
            }
            n >>= 1;
            if n > 0 {
                base = self.combine(&base, &base);
            }
        }
        result
    }
}

/// FFT convolution of grid pmfs with end-bin folding.
struct Convolver {
    planner: FftPlanner<f64>,
}

impl Convolver {
    fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
        }
    }

    fn plans(&mut self, n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
        (self.planner.plan_fft_forward(n), self.planner.plan_fft_inverse(n))
    }

    fn spectrum(fwd: &Arc<dyn Fft<f64>>, n: usize, p: &QuantizedLlrPmf) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = p.probs.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        buf.resize(n, Complex64::new(0.0, 0.0));
        fwd.process(&mut buf);
        buf
    }

    /// Folds the inverse transform of `spec` back onto the grid; `terms` is
    /// the number of grid pmfs that were multiplied.
    fn fold(inv: &Arc<dyn Fft<f64>>, quant: Quantization, mut spec: Vec<Complex64>, terms: usize) -> QuantizedLlrPmf {
        let n = spec.len();
        inv.process(&mut spec);
        let k = quant.half_width();
        let zero = terms * k;
        let lo = zero - k;
        let hi = zero + k;
        let scale = 1.0 / n as f64;
        let value = |i: usize| {
            let v = spec[i].re * scale;
            if v < FFT_FLOOR {
                0.0
            } else {
                v
            }
        };
        let mut probs = vec![0.0; 2 * k + 1];
        let len = terms * 2 * k + 1;
        for i in 0..len {
            let v = value(i);
            if v == 0.0 {
                continue;
            }
            let j = i.clamp(lo, hi) - lo;
            probs[j] += v;
        }
        QuantizedLlrPmf { quant, probs }
    }
}

fn pow_spectrum(s: &[Complex64], c: u32) -> Vec<Complex64> {
    s.iter().map(|z| z.powu(c)).collect()
}

fn mul_into(acc: &mut [Complex64], s: &[Complex64]) {
    for (a, b) in acc.iter_mut().zip(s) {
        *a *= b;
    }
}

fn fft_len(terms: usize, k: usize) -> usize {
    (terms * 2 * k + 1).next_power_of_two()
}

struct SpaDe<'a> {
    base: &'a BaseMatrix,
    omega: f64,
    table: &'a BoxplusTable,
    channels: Vec<QuantizedLlrPmf>,
    conv: Convolver,
}

impl SpaDe<'_> {
    fn check_pass(&self, state: &mut DeState<QuantizedLlrPmf>) -> Result<()> {
        let quant = self.table.quantization();
        for i in 0..self.base.m0() {
            let row: Vec<usize> = state.row(i).collect();
            // Powers b and b - 1 of every input class in the row.
            let full: Vec<Option<QuantizedLlrPmf>> = row
                .iter()
                .map(|&c| self.table.power(&state.v2c[c], state.classes[c].2))
                .collect();
            let minus: Vec<Option<QuantizedLlrPmf>> = row
                .iter()
                .map(|&c| self.table.power(&state.v2c[c], state.classes[c].2 - 1))
                .collect();
            for (t, &c) in row.iter().enumerate() {
                let mut acc = minus[t].clone();
                for (u, f) in full.iter().enumerate() {
                    if u == t {
                        continue;
                    }
                    if let Some(f) = f {
                        acc = Some(match acc {
                            None => f.clone(),
                            Some(a) => self.table.combine(&a, f),
                        });
                    }
                }
                // A check with no other inputs sends a certain message.
                let acc = acc.unwrap_or_else(|| QuantizedLlrPmf::point(quant, quant.half_width() as i64));
                let mut out = acc.scaled(self.omega);
                out.renormalize("check update")?;
                state.c2v[c] = out;
            }
        }
        Ok(())
    }

    fn variable_pass(&mut self, state: &mut DeState<QuantizedLlrPmf>) -> Result<f64> {
        let quant = self.table.quantization();
        let k = quant.half_width();
        let mut residual = 0.0f64;
        for j in 0..self.base.n0() {
            let col: Vec<usize> = state.column(j).collect();
            let degree: u32 = col.iter().map(|&c| state.classes[c].2).sum();
            let terms = degree as usize + 1;
            let n = fft_len(terms, k);
            let (fwd, inv) = self.conv.plans(n);
            let ch = Convolver::spectrum(&fwd, n, &self.channels[j]);
            let specs: Vec<Vec<Complex64>> = col
                .iter()
                .map(|&c| Convolver::spectrum(&fwd, n, &state.c2v[c]))
                .collect();
            for (t, &c) in col.iter().enumerate() {
                let mut acc = ch.clone();
                for (u, s) in specs.iter().enumerate() {
                    let b = state.classes[col[u]].2 - u32::from(u == t);
                    if b > 0 {
                        mul_into(&mut acc, &pow_spectrum(s, b));
                    }
                }
                let mut out = Convolver::fold(&inv, quant, acc, terms - 1);
                out.renormalize("variable update")?;
                state.v2c[c] = out;
            }
            let mut acc = ch;
            for (u, s) in specs.iter().enumerate() {
                mul_into(&mut acc, &pow_spectrum(s, state.classes[col[u]].2));
            }
            let mut app = Convolver::fold(&inv, quant, acc, terms);
            app.renormalize("a-posteriori estimate")?;
            residual = residual.max(app.error_probability());
        }
        state.iteration += 1;
        Ok(residual)
    }
}

/// Runs quantized sum-product density evolution at crossover `delta`.
pub fn de_run_spa(base: &BaseMatrix, delta: f64, omega: f64, quant: &Quantization, params: &DeParams) -> Result<DeRun> {
    let table = BoxplusTable::new(*quant)?;
    de_run_spa_with(base, delta, omega, &table, params)
}

/// [`de_run_spa`] with a prebuilt boxplus table.
pub fn de_run_spa_with(
    base: &BaseMatrix,
    delta: f64,
    omega: f64,
    table: &BoxplusTable,
    params: &DeParams,
) -> Result<DeRun> {
    validate_delta(delta)?;
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidParameter(format!("omega = {omega}")));
    }
    let quant = table.quantization();
    let channels: Vec<QuantizedLlrPmf> = (0..base.n0())
        .map(|j| {
            if base.is_state_column(j) {
                QuantizedLlrPmf::point(quant, 0)
            } else {
                QuantizedLlrPmf::channel(quant, delta)
            }
        })
        .collect();
    let mut state = DeState::new(base, |j| channels[j].clone());
    let mut de = SpaDe {
        base,
        omega,
        table,
        channels,
        conv: Convolver::new(),
    };
    let mut trace = Vec::new();
    loop {
        de.check_pass(&mut state)?;
        trace.push(de.variable_pass(&mut state)?);
        if let Some(run) = check_stop(&trace, params) {
            return Ok(run);
        }
    }
}

/// Scaled sum-product threshold in delta.
pub fn threshold_spa(base: &BaseMatrix, omega: f64, quant: &Quantization, cfg: &ThresholdConfig) -> Result<Threshold> {
    let table = BoxplusTable::new(*quant)?;
    let params = cfg.params;
    threshold_search(|d| de_run_spa_with(base, d, omega, &table, &params), cfg)
}
