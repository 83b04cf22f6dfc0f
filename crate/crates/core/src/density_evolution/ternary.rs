//! Exact density evolution for Algorithm E.
//!
//! Messages live in `{-1, 0, +1}`. A check output is the product of its
//! inputs, so with `A = prod (q_{+1} + q_{-1})` and `S = prod (q_{+1} - q_{-1})`
//! the output pmf is `((A - S)/2, 1 - A, (A + S)/2)`. A variable output is the
//! sign of the channel message `omega m` plus the incoming messages, computed
//! as a convolution on the integer lattice.

use serde::{Deserialize, Serialize};

use super::{check_stop, threshold_search, validate_delta, DeParams, DeRun, DeState, Threshold, ThresholdConfig};
use crate::error::{Error, Result};
use crate::protograph::BaseMatrix;

const SUM_TOL: f64 = 1e-12;

/// Distribution over `{-1, 0, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TernaryPmf {
    pub minus: f64,
    pub zero: f64,
    pub plus: f64,
}

impl TernaryPmf {
    pub const ERASURE: Self = Self {
        minus: 0.0,
        zero: 1.0,
        plus: 0.0,
    };
    pub const PLUS: Self = Self {
        minus: 0.0,
        zero: 0.0,
        plus: 1.0,
    };

    pub fn new(minus: f64, zero: f64, plus: f64) -> Result<Self> {
        let p = Self { minus, zero, plus };
        p.validate()?;
        Ok(p)
    }

    /// BSC observation of the all-zero word: `(delta, 0, 1 - delta)`.
    pub fn channel(delta: f64) -> Self {
        Self {
            minus: delta,
            zero: 0.0,
            plus: 1.0 - delta,
        }
    }

    pub fn sum(&self) -> f64 {
        self.minus + self.zero + self.plus
    }

    pub fn validate(&self) -> Result<()> {
        let ok = [self.minus, self.zero, self.plus]
            .iter()
            .all(|&x| (-SUM_TOL..=1.0 + SUM_TOL).contains(&x));
        if !ok || (self.sum() - 1.0).abs() > SUM_TOL {
            return Err(Error::Density(format!("not a distribution: {self:?}")));
        }
        Ok(())
    }

    /// Check-node combination of two independent messages.
    pub fn cn_combine(&self, other: &Self) -> Self {
        Self {
            minus: self.plus * other.minus + self.minus * other.plus,
            zero: 1.0 - (self.plus + self.minus) * (other.plus + other.minus),
            plus: self.plus * other.plus + self.minus * other.minus,
        }
    }
}

/// Check-node output from its extrinsic inputs.
pub fn cn_update_e(inputs: &[TernaryPmf]) -> Result<TernaryPmf> {
    if inputs.is_empty() {
        return Err(Error::InvalidParameter("check update needs at least one input".into()));
    }
    Ok(cn_from_powers(inputs.iter().map(|p| (p, 1))))
}

/// Check output when input `p` occurs `c` times.
fn cn_from_powers<'a>(inputs: impl IntoIterator<Item = (&'a TernaryPmf, u32)>) -> TernaryPmf {
    let (mut a, mut s) = (1.0f64, 1.0f64);
    for (p, c) in inputs {
        a *= (p.plus + p.minus).powi(c as i32);
        s *= (p.plus - p.minus).powi(c as i32);
    }
    TernaryPmf {
        minus: 0.5 * (a - s),
        zero: 1.0 - a,
        plus: 0.5 * (a + s),
    }
}

/// Distribution on the integers `lo, lo + 1, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticePmf {
    pub lo: i64,
    pub probs: Vec<f64>,
}

impl LatticePmf {
    pub fn point(x: i64) -> Self {
        Self { lo: x, probs: vec![1.0] }
    }

    /// Channel message `omega m` of an observed node: `-omega` with
    /// probability `delta`, `+omega` otherwise.
    pub fn channel(delta: f64, omega: u32) -> Self {
        let w = omega as i64;
        let mut probs = vec![0.0; 2 * omega as usize + 1];
        probs[0] += delta;
        probs[2 * omega as usize] += 1.0 - delta;
        Self { lo: -w, probs }
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.probs.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> f64 {
        if x < self.lo || x > self.hi() {
            0.0
        } else {
            self.probs[(x - self.lo) as usize]
        }
    }

    pub fn sum(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Mass only on `{-a, 0, a}` for a single `a >= 0`.
    fn check_channel(&self) -> Result<()> {
        let support: Vec<i64> = (self.lo..=self.hi()).filter(|&x| self.get(x) != 0.0).collect();
        let a = support.iter().map(|x| x.abs()).max().unwrap_or(0);
        if support.iter().any(|&x| x != 0 && x.abs() != a) || self.probs.iter().any(|&p| p < 0.0) {
            return Err(Error::Density(format!("channel support {support:?} is not of the form {{-w, 0, w}}")));
        }
        if (self.sum() - 1.0).abs() > SUM_TOL {
            return Err(Error::Density("channel pmf does not sum to one".into()));
        }
        Ok(())
    }

    /// Adds an independent ternary variable.
    pub fn convolve(&self, t: &TernaryPmf) -> Self {
        let mut probs = vec![0.0; self.probs.len() + 2];
        for (k, &p) in self.probs.iter().enumerate() {
            probs[k] += p * t.minus;
            probs[k + 1] += p * t.zero;
            probs[k + 2] += p * t.plus;
        }
        Self { lo: self.lo - 1, probs }
    }

    /// Masses of the negative, zero and positive parts.
    pub fn sign_bins(&self) -> TernaryPmf {
        let mut out = TernaryPmf {
            minus: 0.0,
            zero: 0.0,
            plus: 0.0,
        };
        for (k, &p) in self.probs.iter().enumerate() {
            match (self.lo + k as i64).signum() {
                -1 => out.minus += p,
                0 => out.zero += p,
                _ => out.plus += p,
            }
        }
        out
    }
}

/// Variable-node output from the extrinsic inputs and the scaled channel.
pub fn vn_update_e(inputs: &[TernaryPmf], channel: &LatticePmf) -> Result<TernaryPmf> {
    channel.check_channel()?;
    Ok(inputs.iter().fold(channel.clone(), |z, p| z.convolve(p)).sign_bins())
}

/// A-posteriori estimate from all inputs and the unscaled channel `m'`.
pub fn app_e(inputs: &[TernaryPmf], channel_prime: &TernaryPmf) -> Result<TernaryPmf> {
    channel_prime.validate()?;
    let start = LatticePmf {
        lo: -1,
        probs: vec![channel_prime.minus, channel_prime.zero, channel_prime.plus],
    };
    Ok(inputs.iter().fold(start, |z, p| z.convolve(p)).sign_bins())
}

fn column_lattice(start: &LatticePmf, factors: impl IntoIterator<Item = (TernaryPmf, u32)>) -> LatticePmf {
    let mut z = start.clone();
    for (p, c) in factors {
        for _ in 0..c {
            z = z.convolve(&p);
        }
    }
    z
}

fn renormalize(p: TernaryPmf, what: &str) -> Result<TernaryPmf> {
    let s = p.sum();
    if (s - 1.0).abs() > 1e-10 || [p.minus, p.zero, p.plus].iter().any(|&x| x < -1e-12) {
        return Err(Error::Density(format!("{what} lost normalization: sum = {s}")));
    }
    Ok(TernaryPmf {
        minus: p.minus.max(0.0) / s,
        zero: p.zero.max(0.0) / s,
        plus: p.plus.max(0.0) / s,
    })
}

/// One Algorithm E density-evolution iteration in place; returns the
/// residual `max_j (f_{-1} + f_0)` over variable-node types.
fn iterate(
    state: &mut DeState<TernaryPmf>,
    base: &BaseMatrix,
    channels: &[LatticePmf],
    primes: &[LatticePmf],
) -> Result<f64> {
    for c in 0..state.classes.len() {
        let (i, j, _) = state.classes[c];
        let inputs = state.row(i).map(|o| {
            let (_, jj, bb) = state.classes[o];
            (&state.v2c[o], if jj == j { bb - 1 } else { bb })
        });
        let out = cn_from_powers(inputs.collect::<Vec<_>>());
        state.c2v[c] = renormalize(out, "check update")?;
    }
    let mut residual = 0.0f64;
    for j in 0..base.n0() {
        let col: Vec<usize> = state.column(j).collect();
        for &c in &col {
            let factors = col.iter().map(|&o| {
                let b = state.classes[o].2;
                (state.c2v[o], if o == c { b - 1 } else { b })
            });
            let z = column_lattice(&channels[j], factors);
            state.v2c[c] = renormalize(z.sign_bins(), "variable update")?;
        }
        let f = column_lattice(&primes[j], col.iter().map(|&o| (state.c2v[o], state.classes[o].2))).sign_bins();
        let f = renormalize(f, "a-posteriori estimate")?;
        residual = residual.max(f.minus + f.zero);
    }
    state.iteration += 1;
    Ok(residual)
}

fn initial_state(base: &BaseMatrix, delta: f64, omega: u32) -> DeState<TernaryPmf> {
    DeState::new(base, |j| {
        if base.is_state_column(j) {
            TernaryPmf::ERASURE
        } else {
            LatticePmf::channel(delta, omega).sign_bins()
        }
    })
}

/// Runs Algorithm E density evolution at crossover `delta`.
pub fn de_run_e(base: &BaseMatrix, delta: f64, omega: u32, params: &DeParams) -> Result<DeRun> {
    validate_delta(delta)?;
    if omega == 0 {
        return Err(Error::InvalidParameter("Algorithm E density evolution needs omega >= 1".into()));
    }
    let channels: Vec<LatticePmf> = (0..base.n0())
        .map(|j| {
            if base.is_state_column(j) {
                LatticePmf::point(0)
            } else {
                LatticePmf::channel(delta, omega)
            }
        })
        .collect();
    let primes: Vec<LatticePmf> = (0..base.n0())
        .map(|j| {
            if base.is_state_column(j) {
                LatticePmf::point(0)
            } else {
                LatticePmf::channel(delta, 1)
            }
        })
        .collect();
    let mut state = initial_state(base, delta, omega);
    let mut trace = Vec::new();
    loop {
        trace.push(iterate(&mut state, base, &channels, &primes)?);
        if let Some(run) = check_stop(&trace, params) {
            return Ok(run);
        }
    }
}

/// Algorithm E threshold in delta.
pub fn threshold_e(base: &BaseMatrix, omega: u32, cfg: &ThresholdConfig) -> Result<Threshold> {
    let params = cfg.params;
    threshold_search(|d| de_run_e(base, d, omega, &params), cfg)
}
