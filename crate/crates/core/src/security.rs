//! Information-set decoding work factors.
//!
//! Costs are log2 of bit operations. One run pays a full Gaussian
//! elimination once, `n k (n - k)`, plus an expected number of iterations.
//! Each iteration swaps a few columns and updates the systematic form
//! incrementally, which costs about `n - k`, and then runs the variant's
//! search. The expected iteration count divides the number of weight-`w`
//! solutions, `1 + (C(n, w) - 1) / 2^(n - k)`, out of the inverse success
//! probability.
//!
//! * Prange: all `w` errors in the redundancy part.
//! * Stern: `p` errors in each half of `k + l` columns, `w - 2p` in the
//!   remaining `n - k - l`, collisions on `l` bits.
//! * MMT: `p` errors in `k + l` columns found as a sum of two weight-`p/2`
//!   vectors, each built from two base lists of weight `p/4` on half of the
//!   columns, merged on `l1` and then `l - l1` bits.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::combinatorics::{log2_add, log2_binomial};
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::protograph::{key_space_bits, EnsembleSpec};
use crate::simulation::{Format, SimPoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IsdVariant {
    Prange,
    Stern,
    Mmt,
}

impl std::str::FromStr for IsdVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prange" => Ok(IsdVariant::Prange),
            "stern" => Ok(IsdVariant::Stern),
            "mmt" => Ok(IsdVariant::Mmt),
            other => Err(Error::InvalidParameter(format!("unknown ISD variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for IsdVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IsdVariant::Prange => "prange",
            IsdVariant::Stern => "stern",
            IsdVariant::Mmt => "mmt",
        })
    }
}

/// Internal parameters at the optimum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum IsdParams {
    Prange,
    Stern { p: usize, l: usize },
    Mmt { p: usize, l: usize, l1: usize },
}

impl std::fmt::Display for IsdParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IsdParams::Prange => f.write_str("-"),
            IsdParams::Stern { p, l } => write!(f, "p={p} l={l}"),
            IsdParams::Mmt { p, l, l1 } => write!(f, "p={p} l={l} l1={l1}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkFactor {
    pub log2_cost: f64,
    pub params: IsdParams,
}

/// Search ranges for the internal parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IsdGrid {
    pub p_max: usize,
    pub l_max: usize,
}

impl Default for IsdGrid {
    fn default() -> Self {
        Self { p_max: 24, l_max: 100 }
    }
}

struct Model {
    n: usize,
    k: usize,
    w: usize,
    /// One-off elimination.
    setup: f64,
    /// Per-iteration systematic-form update.
    update: f64,
    /// log2 C(n, w) - log2(number of solutions).
    target: f64,
    cache: HashMap<(usize, usize), f64>,
}

impl Model {
    fn new(n: usize, k: usize, w: usize) -> Result<Self> {
        if k == 0 || k >= n {
            return Err(Error::InvalidParameter(format!("need 0 < k < n, got n={n} k={k}")));
        }
        if w > n {
            return Err(Error::WeightTooLarge { weight: w, len: n });
        }
        let r = n - k;
        let all = log2_binomial(n as u64, w as u64);
        // 1 + (C(n, w) - 1) / 2^r, in the log domain.
        let extra = if w == 0 { f64::NEG_INFINITY } else { all + (1.0 - (-all).exp2()).log2() - r as f64 };
        let solutions = log2_add(0.0, extra);
        Ok(Self {
            n,
            k,
            w,
            setup: ((n * k) as f64).log2() + (r as f64).log2(),
            update: (r as f64).log2(),
            target: all - solutions,
            cache: HashMap::new(),
        })
    }

    fn lb(&mut self, a: usize, b: usize) -> f64 {
        *self
            .cache
            .entry((a, b))
            .or_insert_with(|| log2_binomial(a as u64, b as u64))
    }

    /// Setup plus iterations; success probability capped at one.
    fn total(&self, per_iteration: f64, log2_success: f64) -> f64 {
        log2_add(self.setup, per_iteration - log2_success.min(0.0))
    }

    fn prange(&mut self) -> Result<WorkFactor> {
        let r = self.n - self.k;
        if self.w > r {
            return Err(Error::Infeasible(format!("prange: w = {} exceeds n - k = {r}", self.w)));
        }
        let success = self.lb(r, self.w) - self.target;
        Ok(WorkFactor {
            log2_cost: self.total(self.update, success),
            params: IsdParams::Prange,
        })
    }

    fn stern(&mut self, p: usize, l: usize) -> Option<f64> {
        let (n, k, w) = (self.n, self.k, self.w);
        if 2 * p > w || l > n - k || w - 2 * p > n - k - l {
            return None;
        }
        let half = (k + l) / 2;
        if p > half {
            return None;
        }
        let list = self.lb(half, p);
        let success = 2.0 * list + self.lb(n - k - l, w - 2 * p) - self.target;
        let mut cost = log2_add(self.update, (2.0 * l.max(1) as f64).log2() + list);
        if p > 0 {
            cost = log2_add(cost, 2.0 * list - l as f64 + ((2 * p + 1) as f64).log2() + (w as f64).log2());
        }
        Some(self.total(cost, success))
    }

    fn mmt_base(&mut self, p: usize, l: usize) -> Option<(f64, f64, f64)> {
        let (n, k, w) = (self.n, self.k, self.w);
        if p % 2 == 1 || p > w || l > n - k || w - p > n - k - l {
            return None;
        }
        let half = (k + l) / 2;
        if p.div_ceil(4) > half {
            return None;
        }
        // Base lists of weight floor(p/4) and ceil(p/4); geometric mean size.
        let base = 0.5 * (self.lb(half, p / 4) + self.lb(half, p.div_ceil(4)));
        let reps = self.lb(p, p / 2);
        let success = self.lb(k + l, p) + self.lb(n - k - l, w - p) - self.target;
        Some((base, reps, success))
    }

    fn mmt(&mut self, p: usize, l: usize, l1: usize, base: f64, reps: f64, success: f64) -> Option<f64> {
        if l1 > l || l1 as f64 > reps + 0.5 {
            return None;
        }
        let w = self.w;
        let merged1 = 2.0 * base - l1 as f64;
        let merged2 = 2.0 * merged1 - (l - l1) as f64;
        let mut cost = log2_add(self.update, (4.0 * l1.max(1) as f64).log2() + base);
        cost = log2_add(cost, (2.0 * (l - l1).max(1) as f64).log2() + merged1);
        if p > 0 {
            cost = log2_add(cost, merged2 + ((p + 1) as f64).log2() + (w as f64).log2());
        }
        Some(self.total(cost, success))
    }
}

/// Minimum cost over the default parameter grid.
pub fn wf_isd(n: usize, k: usize, w: usize, variant: IsdVariant) -> Result<WorkFactor> {
    wf_isd_with_grid(n, k, w, variant, &IsdGrid::default(), Exec::Sequential)
}

/// Minimum cost over `grid`; `exec` spreads the outer parameter over workers.
pub fn wf_isd_with_grid(
    n: usize,
    k: usize,
    w: usize,
    variant: IsdVariant,
    grid: &IsdGrid,
    exec: Exec,
) -> Result<WorkFactor> {
    // Validates the inputs once for every variant.
    Model::new(n, k, w)?;
    let best = |cands: Vec<Option<WorkFactor>>| {
        cands
            .into_iter()
            .flatten()
            .filter(|c| c.log2_cost.is_finite())
            .min_by(|a, b| a.log2_cost.total_cmp(&b.log2_cost))
    };
    let found = match variant {
        IsdVariant::Prange => return Model::new(n, k, w)?.prange(),
        IsdVariant::Stern => {
            let per_p = exec.map_indexed(grid.p_max + 1, |p| {
                let mut m = Model::new(n, k, w).ok()?;
                let cands = (0..=grid.l_max)
                    .map(|l| m.stern(p, l).map(|c| WorkFactor { log2_cost: c, params: IsdParams::Stern { p, l } }))
                    .collect();
                best(cands)
            });
            best(per_p)
        }
        IsdVariant::Mmt => {
            let per_p = exec.map_indexed(grid.p_max / 2 + 1, |h| {
                let p = 2 * h;
                let mut m = Model::new(n, k, w).ok()?;
                let mut cands = Vec::new();
                for l in 0..=grid.l_max {
                    let Some((base, reps, success)) = m.mmt_base(p, l) else {
                        continue;
                    };
                    for l1 in 0..=l {
                        if let Some(c) = m.mmt(p, l, l1, base, reps, success) {
                            cands.push(Some(WorkFactor {
                                log2_cost: c,
                                params: IsdParams::Mmt { p, l, l1 },
                            }));
                        }
                    }
                }
                best(cands)
            });
            best(per_p)
        }
    };
    found.ok_or_else(|| Error::Infeasible(format!("{variant}: no feasible parameters for n={n} k={k} w={w}")))
}

/// Key distinguishing: find one of the `m` low-weight dual codewords,
/// `WF_ISD(n, n - m, dc) / m`.
pub fn wf_dist(n: usize, m: usize, dc: usize) -> Result<WorkFactor> {
    check_m(n, m)?;
    let wf = wf_isd(n, n - m, dc, IsdVariant::Mmt)?;
    Ok(WorkFactor {
        log2_cost: wf.log2_cost - (m as f64).log2(),
        params: wf.params,
    })
}

/// Message recovery with decoding one out of many,
/// `WF_ISD(n, n - m, e) / sqrt(m)`.
pub fn wf_dec(n: usize, m: usize, e: usize) -> Result<WorkFactor> {
    check_m(n, m)?;
    let wf = wf_isd(n, n - m, e, IsdVariant::Mmt)?;
    Ok(WorkFactor {
        log2_cost: wf.log2_cost - 0.5 * (m as f64).log2(),
        params: wf.params,
    })
}

fn check_m(n: usize, m: usize) -> Result<()> {
    if m == 0 || m >= n {
        return Err(Error::InvalidParameter(format!("need 0 < m < n, got n={n} m={m}")));
    }
    Ok(())
}

/// Expected Prange iterations, `C(n, w) / (C(n - k, w) * solutions)`.
pub fn prange_expected_iterations(n: usize, k: usize, w: usize) -> Result<f64> {
    let m = Model::new(n, k, w)?;
    let success = log2_binomial((n - k) as u64, w as u64) - m.target;
    Ok((-success.min(0.0)).exp2())
}

/// Mean iteration count of a literal Prange decoder on random instances
/// (`n <= 63`): random parity-check matrix of full rank, planted error of
/// weight `w` on independent columns, and per iteration a random column
/// order with greedy pivoting.
pub fn simulate_prange<R: Rng + ?Sized>(n: usize, k: usize, w: usize, runs: usize, rng: &mut R) -> Result<f64> {
    if n > 63 || k == 0 || k >= n || w > n - k || runs == 0 {
        return Err(Error::InvalidParameter(format!("simulate_prange: n={n} k={k} w={w} runs={runs}")));
    }
    let r = n - k;
    let mut total = 0usize;
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..runs {
        let h = loop {
            let rows: Vec<u64> = (0..r).map(|_| rng.gen::<u64>() & ((1u64 << n) - 1)).collect();
            if gf2_rank(&rows, n) == r {
                break rows;
            }
        };
        // Dependent support columns can never sit inside one information set.
        let e = loop {
            let support = rand::seq::index::sample(rng, n, w).into_vec();
            let cols: Vec<u64> = support
                .iter()
                .map(|&c| (0..r).fold(0u64, |acc, i| acc | ((h[i] >> c & 1) << i)))
                .collect();
            if gf2_rank(&cols, r) == w {
                break support.iter().fold(0u64, |acc, &c| acc | 1 << c);
            }
        };
        // Syndrome stored in bit n of each row.
        let aug: Vec<u64> = h.iter().map(|&row| row | (((row & e).count_ones() as u64 & 1) << n)).collect();
        let mut iterations = 0;
        loop {
            iterations += 1;
            order.shuffle(rng);
            let mut a = aug.clone();
            let mut row = 0;
            for &c in &order {
                if row == r {
                    break;
                }
                let Some(p) = (row..r).find(|&i| a[i] >> c & 1 == 1) else {
                    continue;
                };
                a.swap(row, p);
                for i in 0..r {
                    if i != row && a[i] >> c & 1 == 1 {
                        a[i] ^= a[row];
                    }
                }
                row += 1;
            }
            let weight = a.iter().filter(|&&x| x >> n & 1 == 1).count();
            if weight == w {
                break;
            }
        }
        total += iterations;
    }
    Ok(total as f64 / runs as f64)
}

fn gf2_rank(rows: &[u64], n: usize) -> usize {
    let mut a = rows.to_vec();
    let mut rank = 0;
    for c in 0..n {
        let Some(p) = (rank..a.len()).find(|&i| a[i] >> c & 1 == 1) else {
            continue;
        };
        a.swap(rank, p);
        for i in 0..a.len() {
            if i != rank && a[i] >> c & 1 == 1 {
                a[i] ^= a[rank];
            }
        }
        rank += 1;
    }
    rank
}

/// Where the error weight of the decoding attack comes from.
#[derive(Clone, Copy, Debug)]
pub enum ErrorWeight<'a> {
    Explicit(usize),
    /// Largest weight whose block error rate stays at or below the target,
    /// interpolated log-linearly between measured points.
    FromCurve { points: &'a [SimPoint], target_bler: f64 },
}

/// Reads the error weight at `target` off a measured curve.
pub fn error_weight_at(points: &[SimPoint], target: f64) -> Result<usize> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter(format!("target bler {target}")));
    }
    let mut pts: Vec<&SimPoint> = points.iter().collect();
    pts.sort_by_key(|p| p.e);
    let below = pts.iter().rposition(|p| p.bler <= target);
    let Some(i) = below else {
        return Err(Error::InvalidParameter(format!(
            "the curve never reaches block error rate {target}; pass an explicit error weight"
        )));
    };
    let Some(next) = pts.get(i + 1) else {
        return Err(Error::InvalidParameter(format!(
            "the curve stays below {target} up to e = {}; pass an explicit error weight",
            pts[i].e
        )));
    };
    let (a, b) = (pts[i], *next);
    if a.bler <= 0.0 {
        return Ok(a.e);
    }
    let t = (target.ln() - a.bler.ln()) / (b.bler.ln() - a.bler.ln());
    Ok(a.e + (t * (b.e - a.e) as f64).floor() as usize)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecurityReport {
    pub ensemble: String,
    pub n: usize,
    pub k: usize,
    pub row_weight: usize,
    pub error_weight: usize,
    pub wf_dist: WorkFactor,
    pub wf_dec: WorkFactor,
    pub key_space_bits: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub ensemble: String,
    pub attack: String,
    pub parameters: String,
    pub bits: f64,
}

impl SecurityReport {
    pub fn rows(&self) -> Vec<ReportRow> {
        let row = |attack: &str, parameters: String, bits: f64| ReportRow {
            ensemble: self.ensemble.clone(),
            attack: attack.to_string(),
            parameters,
            bits,
        };
        vec![
            row(
                "distinguish",
                format!("n={} k={} w={} {}", self.n, self.k, self.row_weight, self.wf_dist.params),
                self.wf_dist.log2_cost,
            ),
            row(
                "decode",
                format!("n={} k={} e={} {}", self.n, self.k, self.error_weight, self.wf_dec.params),
                self.wf_dec.log2_cost,
            ),
            row("key-space", format!("Q={}", self.n - self.k), self.key_space_bits),
        ]
    }
}

/// Work factors of both attacks and the key-space size for `spec`.
pub fn security_report(spec: &EnsembleSpec, weight: ErrorWeight<'_>) -> Result<SecurityReport> {
    spec.validate()?;
    let n = spec.block_length();
    let m = spec.q;
    let e = match weight {
        ErrorWeight::Explicit(e) => e,
        ErrorWeight::FromCurve { points, target_bler } => error_weight_at(points, target_bler)?,
    };
    let dc = spec.h_row_weight_bound();
    Ok(SecurityReport {
        ensemble: spec.name.clone(),
        n,
        k: n - m,
        row_weight: dc,
        error_weight: e,
        wf_dist: wf_dist(n, m, dc)?,
        wf_dec: wf_dec(n, m, e)?,
        key_space_bits: key_space_bits(spec),
    })
}

pub const REPORT_HEADER: &[&str] = &["ensemble", "attack", "parameters", "bits"];

pub fn write_report<W: Write>(rows: &[ReportRow], out: W, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(REPORT_HEADER)?;
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
    use crate::protograph::ensemble;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weight_costs_one_elimination() {
        for variant in [IsdVariant::Prange, IsdVariant::Stern, IsdVariant::Mmt] {
            let wf = wf_isd(9602, 4801, 0, variant).unwrap();
            let ge = (9602f64 * 4801.0 * 4801.0).log2();
            assert!((wf.log2_cost - ge).abs() < 0.01, "{variant}: {}", wf.log2_cost);
        }
    }

    #[test]
    fn variants_are_ordered() {
        let p = wf_isd(9602, 4801, 90, IsdVariant::Prange).unwrap().log2_cost;
        let s = wf_isd(9602, 4801, 90, IsdVariant::Stern).unwrap().log2_cost;
        let m = wf_isd(9602, 4801, 90, IsdVariant::Mmt).unwrap().log2_cost;
        assert!(m <= s && s <= p, "{m} {s} {p}");
    }

    #[test]
    fn attack_divisors() {
        let isd = wf_isd(200, 100, 10, IsdVariant::Mmt).unwrap().log2_cost;
        assert!((wf_dist(200, 100, 10).unwrap().log2_cost - (isd - 100f64.log2())).abs() < 1e-12);
        assert!((wf_dec(200, 100, 10).unwrap().log2_cost - (isd - 0.5 * 100f64.log2())).abs() < 1e-12);
        // m = 1 leaves the ISD cost unchanged.
        let isd1 = wf_isd(200, 199, 1, IsdVariant::Mmt).unwrap().log2_cost;
        assert_eq!(wf_dist(200, 1, 1).unwrap().log2_cost, isd1);
        assert_eq!(wf_dec(200, 1, 1).unwrap().log2_cost, isd1);
        assert!(wf_dist(200, 0, 1).is_err());
    }

    #[test]
    fn infeasible_and_invalid_inputs() {
        assert!(matches!(wf_isd(20, 10, 15, IsdVariant::Prange), Err(Error::Infeasible(_))));
        assert!(wf_isd(20, 0, 1, IsdVariant::Prange).is_err());
        assert!(wf_isd(20, 10, 21, IsdVariant::Mmt).is_err());
    }

    #[test]
    fn larger_grid_never_costs_more() {
        let small = IsdGrid { p_max: 4, l_max: 20 };
        for variant in [IsdVariant::Stern, IsdVariant::Mmt] {
            let a = wf_isd_with_grid(2000, 1000, 40, variant, &small, Exec::Sequential).unwrap();
            let b = wf_isd_with_grid(2000, 1000, 40, variant, &IsdGrid::default(), Exec::Parallel).unwrap();
            assert!(b.log2_cost <= a.log2_cost);
        }
    }

    #[test]
    fn cost_is_monotone_in_weight() {
        for variant in [IsdVariant::Prange, IsdVariant::Stern, IsdVariant::Mmt] {
            let mut last = 0.0;
            for w in (0..=200).step_by(10) {
                let c = wf_isd(2400, 1200, w, variant).unwrap().log2_cost;
                assert!(c >= last - 1e-9, "{variant} w={w}: {c} < {last}");
                last = c;
            }
        }
    }

    #[test]
    fn expected_prange_iterations_on_toy_code() {
        // C(30,3) = 4060, C(15,3) = 455, 4059 spurious solutions over 2^15 syndromes.
        let want = 4060.0 / 455.0 / (1.0 + 4059.0 / 32768.0);
        assert!((prange_expected_iterations(30, 15, 3).unwrap() - want).abs() < 1e-9);
    }

    #[test]
    fn prange_simulator_agrees_with_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mean = simulate_prange(30, 15, 3, 10_000, &mut rng).unwrap();
        let want = prange_expected_iterations(30, 15, 3).unwrap();
        assert!((mean - want).abs() / want < 0.10, "{mean} vs {want}");
    }

    fn point(e: usize, bler: f64) -> SimPoint {
        SimPoint {
            ensemble: "A".into(),
            algorithm: "e".into(),
            omega: 1.0,
            q: 4801,
            e,
            trials: 1000,
            failures: (bler * 1000.0) as usize,
            bler,
            ci_lo: 0.0,
            ci_hi: 1.0,
            seed: 0,
            undetected: 0,
        }
    }

    #[test]
    fn error_weight_from_curve() {
        let curve = [point(80, 0.0), point(90, 0.001), point(100, 0.1), point(110, 0.9)];
        assert_eq!(error_weight_at(&curve, 0.01).unwrap(), 95);
        assert_eq!(error_weight_at(&curve, 0.001).unwrap(), 90);
        assert_eq!(error_weight_at(&curve, 0.0005).unwrap(), 80);
        assert!(error_weight_at(&curve[1..], 1e-6).is_err());
        assert!(error_weight_at(&curve, 0.95).is_err());
    }

    #[test]
    fn report_for_c() {
        let spec = ensemble("C", 4801).unwrap();
        let r = security_report(&spec, ErrorWeight::Explicit(102)).unwrap();
        assert_eq!((r.n, r.k, r.row_weight, r.error_weight), (9602, 4801, 90, 102));
        assert!((r.key_space_bits - 446.0).abs() <= 1.0);
        assert_eq!(r.rows().len(), 3);
        let mut buf = Vec::new();
        write_report(&r.rows(), &mut buf, Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("ensemble,attack,parameters,bits\nC,distinguish,"));
    }
}
