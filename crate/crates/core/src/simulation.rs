//! Monte Carlo block error rate versus error weight.
//!
//! Every trial draws from its own ChaCha stream, selected by the master seed,
//! the error weight and the trial index, so results do not depend on how
//! trials are spread over workers. A point stops early once the failure cap
//! is reached; trials are evaluated in fixed-size chunks and the cut is made
//! at the exact trial that hit the cap.

use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cryptosystem::{decrypt_with, encrypt, keygen, PrivateKey, PublicKey};
use crate::decoders::{Decoder, DecoderConfig};
use crate::error::{Error, Result};
use crate::parallel::Exec;
use crate::protograph::EnsembleSpec;

const CHUNK: usize = 64;
/// Stream reserved for the fixed key.
const FIXED_KEY_STREAM: u64 = u64::MAX;
/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Uniform weight-`e` vector of length `n`.
pub fn sample_error_vector<R: Rng + ?Sized>(n: usize, e: usize, rng: &mut R) -> Result<Vec<u8>> {
    if e > n {
        return Err(Error::WeightTooLarge { weight: e, len: n });
    }
    let mut v = vec![0u8; n];
    for i in sample(rng, n, e) {
        v[i] = 1;
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyPolicy {
    /// A fresh key for every trial.
    #[default]
    PerTrial,
    /// One key for the whole run.
    Fixed,
}

#[derive(Clone, Debug)]
pub struct SimPlan {
    pub spec: EnsembleSpec,
    pub decoder: DecoderConfig,
    pub weights: Vec<usize>,
    pub trials: usize,
    /// Stop a point after this many failures; `None` runs every trial.
    pub max_failures: Option<usize>,
    pub seed: u64,
    pub key_policy: KeyPolicy,
    /// Key used under [`KeyPolicy::Fixed`]; generated from the seed if absent.
    pub key: Option<PrivateKey>,
}

impl SimPlan {
    pub fn new(spec: EnsembleSpec, decoder: DecoderConfig, weights: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            spec,
            decoder,
            weights,
            trials,
            max_failures: Some(100),
            seed,
            key_policy: KeyPolicy::PerTrial,
            key: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.decoder.validate()?;
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.max_failures == Some(0) {
            return Err(Error::InvalidParameter("failure cap must be at least 1".into()));
        }
        let n = self.spec.block_length();
        if let Some(&e) = self.weights.iter().find(|&&e| e > n) {
            return Err(Error::WeightTooLarge { weight: e, len: n });
        }
        if let Some(k) = &self.key {
            if k.spec != self.spec {
                return Err(Error::InvalidParameter("fixed key belongs to another ensemble".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimPoint {
    pub ensemble: String,
    pub algorithm: String,
    pub omega: f64,
    #[serde(rename = "Q")]
    pub q: usize,
    pub e: usize,
    pub trials: usize,
    pub failures: usize,
    pub bler: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    /// Zero-syndrome decodes that returned a wrong plaintext (already
    /// included in `failures`).
    pub undetected: usize,
}

/// Wilson score interval at 95%.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = Z95 * Z95;
    let centre = p + z2 / (2.0 * n);
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let denom = 1.0 + z2 / n;
    let lo = ((centre - half) / denom).max(0.0);
    let hi = ((centre + half) / denom).min(1.0);
    (lo.min(p), hi.max(p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Outcome {
    Success,
    Failure,
    Undetected,
}

fn trial_rng(seed: u64, e: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((e as u64) << 40) | trial as u64);
    rng
}

fn run_trial(plan: &SimPlan, fixed: Option<&(PrivateKey, PublicKey)>, e: usize, trial: usize) -> Result<Outcome> {
    let mut rng = trial_rng(plan.seed, e, trial);
    let owned;
    let (sk, pk) = match fixed {
        Some((sk, pk)) => (sk, pk),
        None => {
            owned = keygen(&plan.spec, e, &mut rng)?;
            (&owned.0, &owned.1)
        }
    };
    let u: Vec<u8> = (0..plan.spec.q).map(|_| rng.gen_range(0..2u8)).collect();
    let c = encrypt(pk, &u, &mut rng)?;
    let mut decoder = Decoder::new(sk.decoding_graph());
    match decrypt_with(&mut decoder, sk, &c, &plan.decoder) {
        Ok(v) if v == u => Ok(Outcome::Success),
        Ok(_) => Ok(Outcome::Undetected),
        Err(Error::DecodingFailure { .. }) => Ok(Outcome::Failure),
        Err(err) => Err(err),
    }
}

/// Runs every error weight of `plan` and returns one point per weight.
pub fn run_bler(plan: &SimPlan, exec: Exec) -> Result<Vec<SimPoint>> {
    plan.validate()?;
    let fixed_base = match plan.key_policy {
        KeyPolicy::PerTrial => None,
        KeyPolicy::Fixed => Some(match &plan.key {
            Some(k) => {
                let pk = k.public_key()?;
                (k.clone(), pk)
            }
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
                rng.set_stream(FIXED_KEY_STREAM);
                keygen(&plan.spec, 0, &mut rng)?
            }
        }),
    };
    let cap = plan.max_failures.unwrap_or(usize::MAX);
    let mut points = Vec::with_capacity(plan.weights.len());
    for &e in &plan.weights {
        let fixed = match &fixed_base {
            Some((sk, pk)) => Some((sk.with_error_weight(e)?, pk.with_error_weight(e)?)),
            None => None,
        };
        let (mut trials, mut failures, mut undetected) = (0, 0, 0);
        'chunks: while trials < plan.trials {
            let start = trials;
            let len = CHUNK.min(plan.trials - start);
            let outcomes = exec.map_indexed(len, |i| run_trial(plan, fixed.as_ref(), e, start + i));
            for outcome in outcomes {
                let outcome = outcome?;
                trials += 1;
                if outcome != Outcome::Success {
                    failures += 1;
                }
                if outcome == Outcome::Undetected {
                    undetected += 1;
                }
                if failures >= cap {
                    break 'chunks;
                }
            }
        }
        let (ci_lo, ci_hi) = wilson_interval(failures, trials);
        points.push(SimPoint {
            ensemble: plan.spec.name.clone(),
            algorithm: plan.decoder.algorithm.to_string(),
            omega: plan.decoder.omega,
            q: plan.spec.q,
            e,
            trials,
            failures,
            bler: failures as f64 / trials as f64,
            ci_lo,
            ci_hi,
            seed: plan.seed,
            undetected,
        });
    }
    Ok(points)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// CSV header used when there are no rows to infer it from.
pub const CSV_HEADER: &[&str] = &[
    "ensemble",
    "algorithm",
    "omega",
    "Q",
    "e",
    "trials",
    "failures",
    "bler",
    "ci_lo",
    "ci_hi",
    "seed",
    "undetected",
];

/// Writes points as CSV or JSON to any writer.
pub fn write_points<W: std::io::Write>(points: &[SimPoint], out: W, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_HEADER)?;
            for p in points {
                w.serialize(p)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, points)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn write_results(points: &[SimPoint], path: &Path, format: Format) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_points(points, std::io::BufWriter::new(file), format)
}

pub fn read_results(path: &Path, format: Format) -> Result<Vec<SimPoint>> {
    let file = std::fs::File::open(path)?;
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(file);
            r.deserialize().map(|row| row.map_err(Error::from)).collect()
        }
        Format::Json => Ok(serde_json::from_reader(std::io::BufReader::new(file))?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::Algorithm;
    use crate::protograph::{ensemble, BaseMatrix};

    #[test]
    fn error_vector_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_error_vector(10, 0, &mut rng).unwrap(), vec![0; 10]);
        assert_eq!(sample_error_vector(10, 10, &mut rng).unwrap(), vec![1; 10]);
        assert!(sample_error_vector(10, 11, &mut rng).is_err());
    }

    #[test]
    fn error_vector_positions_are_uniform() {
        for (n, e) in [(20usize, 5usize), (100, 3)] {
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let draws = 100_000;
            let mut hits = vec![0usize; n];
            for _ in 0..draws {
                let v = sample_error_vector(n, e, &mut rng).unwrap();
                assert_eq!(v.iter().filter(|&&b| b == 1).count(), e);
                for (h, b) in hits.iter_mut().zip(v) {
                    *h += b as usize;
                }
            }
            let p = e as f64 / n as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            for h in hits {
                assert!((h as f64 / draws as f64 - p).abs() < 4.0 * sigma);
            }
        }
    }

    #[test]
    fn wilson_contains_estimate() {
        assert_eq!(wilson_interval(0, 10).0, 0.0);
        let (lo, hi) = wilson_interval(0, 1000);
        assert!(lo == 0.0 && hi > 0.0 && hi < 0.005);
        let (lo, hi) = wilson_interval(1000, 1000);
        assert!(lo > 0.995 && hi == 1.0);
        // Textbook value: 10/100 gives roughly [0.0552, 0.1744].
        let (lo, hi) = wilson_interval(10, 100);
        assert!((lo - 0.0552).abs() < 1e-3 && (hi - 0.1744).abs() < 1e-3);
    }

    fn toy_plan(weights: Vec<usize>, trials: usize) -> SimPlan {
        let spec = EnsembleSpec::new("toy", BaseMatrix::new(vec![vec![1, 3, 3], vec![2, 3, 3]], vec![0]).unwrap(), 127)
            .unwrap();
        SimPlan::new(spec, DecoderConfig::new(Algorithm::AlgE, 2.0), weights, trials, 11)
    }

    #[test]
    fn zero_weight_never_fails() {
        let points = run_bler(&toy_plan(vec![0], 40), Exec::Sequential).unwrap();
        assert_eq!(points[0].failures, 0);
        assert_eq!(points[0].trials, 40);
        assert_eq!(points[0].bler, 0.0);
    }

    #[test]
    fn half_weight_always_fails() {
        let mut plan = toy_plan(vec![127], 50);
        plan.decoder.max_iterations = 20;
        let p = &run_bler(&plan, Exec::Parallel).unwrap()[0];
        assert_eq!(p.failures, p.trials);
        assert_eq!(p.trials, 50);
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let mut plan = toy_plan(vec![6, 12, 20], 150);
        plan.max_failures = Some(30);
        let a = run_bler(&plan, Exec::Sequential).unwrap();
        let b = run_bler(&plan, Exec::Workers(3)).unwrap();
        let c = run_bler(&plan, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.iter().any(|p| p.failures == 30 && p.trials < 150));
        plan.key_policy = KeyPolicy::Fixed;
        assert_eq!(
            run_bler(&plan, Exec::Sequential).unwrap(),
            run_bler(&plan, Exec::Workers(2)).unwrap()
        );
    }

    #[test]
    fn bler_grows_with_weight() {
        let plan = toy_plan(vec![4, 40], 100);
        let p = run_bler(&plan, Exec::Parallel).unwrap();
        assert!(p[0].bler <= p[1].bler);
        for point in &p {
            assert!(point.ci_lo <= point.bler && point.bler <= point.ci_hi);
            assert!(point.undetected <= point.failures);
        }
    }

    #[test]
    fn plan_validation() {
        let mut plan = toy_plan(vec![255], 1);
        assert!(run_bler(&plan, Exec::Sequential).is_err());
        plan.weights = vec![1];
        plan.trials = 0;
        assert!(run_bler(&plan, Exec::Sequential).is_err());
        plan.trials = 1;
        plan.key = Some(
            keygen(&ensemble("B", 13).unwrap(), 0, &mut ChaCha8Rng::seed_from_u64(1))
                .unwrap()
                .0,
        );
        assert!(run_bler(&plan, Exec::Sequential).is_err());
    }

    #[test]
    fn results_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let points = run_bler(&toy_plan(vec![3, 9], 20), Exec::Sequential).unwrap();
        for format in [Format::Csv, Format::Json] {
            let path = dir.path().join("r");
            write_results(&points, &path, format).unwrap();
            assert_eq!(read_results(&path, format).unwrap(), points);
            write_results(&[], &path, format).unwrap();
            assert!(read_results(&path, format).unwrap().is_empty());
        }
        let path = dir.path().join("one.csv");
        write_results(&points[..1], &path, Format::Csv).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("ensemble,algorithm,omega,Q,e,"));
        write_results(&[], &path, Format::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1);
    }
}
