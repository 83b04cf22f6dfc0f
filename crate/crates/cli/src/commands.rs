//! Subcommand bodies. Each one resolves its inputs from the run config and
//! hands them to a single library operation.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use protomdpc::cryptosystem::{self, Key};
use protomdpc::density_evolution::{threshold_e, threshold_spa, write_threshold_rows, ThresholdConfig, ThresholdRow};
use protomdpc::parallel::Exec;
use protomdpc::protograph::key_space_bits;
use protomdpc::security::{security_report, write_report, ErrorWeight};
use protomdpc::simulation::{read_results, run_bler, write_points, Format, KeyPolicy, SimPlan};
use protomdpc::{Algorithm, EnsembleSpec, Shape};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::bits;
use crate::config::RunConfig;
use crate::CliError;

/// Error weight stored with new keys when none is configured: the weight at
/// which the regular reference ensemble reaches a block error rate of 1e-6.
pub const DEFAULT_ERROR_WEIGHT: usize = 84;
pub const DEFAULT_TRIALS: usize = 1000;
pub const DEFAULT_MAX_FAILURES: usize = 100;
pub const DEFAULT_TARGET_BLER: f64 = 1e-6;

/// The configured seed, or a fresh one from the system that is echoed to
/// stderr so the run can be repeated.
fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or_else(|| {
        let s: u64 = rand::random();
        eprintln!("seed: {s}");
        s
    })
}

fn read_input(path: Option<&Path>) -> Result<Vec<u8>, CliError> {
    let mut data = Vec::new();
    match path {
        Some(p) => {
            data = std::fs::read(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
        }
        None => {
            std::io::stdin().read_to_end(&mut data)?;
        }
    }
    Ok(data)
}

fn write_output(path: Option<&Path>, data: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, data).map_err(|e| CliError::io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(data)?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Runs `emit` against a file or stdout.
fn with_sink(
    path: Option<&Path>,
    emit: impl FnOnce(&mut dyn Write) -> protomdpc::Result<()>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let file = std::fs::File::create(p).map_err(|e| CliError::io(format!("{}: {e}", p.display())))?;
            let mut w = std::io::BufWriter::new(file);
            emit(&mut w)?;
            w.flush()?;
        }
        None => emit(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

/// Names the file in I/O errors from the library.
fn at_path<T>(path: &Path, r: protomdpc::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match e {
        protomdpc::Error::Io(io) => CliError::io(format!("{}: {io}", path.display())),
        other => other.into(),
    })
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, CliError> {
    path.as_deref().ok_or_else(|| CliError::usage(format!("no {what} key given (use --key)")))
}

pub fn keygen(cfg: &RunConfig, private: &Path, public: &Path) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let e = cfg.error_weight.unwrap_or(DEFAULT_ERROR_WEIGHT);
    let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg));
    let (sk, pk) = cryptosystem::keygen(&spec, e, &mut rng)?;
    at_path(private, cryptosystem::save_key(&Key::Private(sk), private))?;
    at_path(public, cryptosystem::save_key(&Key::Public(pk), public))?;
    Ok(())
}

pub fn encrypt(
    cfg: &RunConfig,
    input: Option<&Path>,
    output: Option<&Path>,
    random_plaintext: bool,
    hex: bool,
) -> Result<(), CliError> {
    let path = required(&cfg.keys.public, "public")?;
    let mut pk = at_path(path, cryptosystem::load_public(path))?;
    if let Some(e) = cfg.error_weight {
        pk = pk.with_error_weight(e)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg));
    let u = if random_plaintext {
        (0..pk.q()).map(|_| rng.gen::<bool>() as u8).collect()
    } else {
        bits::decode(&read_input(input)?, pk.q(), hex)?
    };
    let c = cryptosystem::encrypt(&pk, &u, &mut rng)?;
    write_output(output, &bits::encode(&c, hex))
}

pub fn decrypt(cfg: &RunConfig, input: Option<&Path>, output: Option<&Path>, hex: bool) -> Result<(), CliError> {
    let path = required(&cfg.keys.private, "private")?;
    let sk = at_path(path, cryptosystem::load_private(path))?;
    let decoder = cfg.decoder()?;
    let c = bits::decode(&read_input(input)?, sk.spec.block_length(), hex)?;
    let u = cryptosystem::decrypt(&sk, &c, &decoder)?;
    write_output(output, &bits::encode(&u, hex))
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let s = &cfg.simulate;
    let weights = s
        .weights
        .clone()
        .filter(|w| !w.is_empty())
        .ok_or_else(|| CliError::usage("no error weights given (use --weights)"))?;
    let mut plan = SimPlan::new(
        cfg.spec()?,
        cfg.decoder()?,
        weights,
        s.trials.unwrap_or(DEFAULT_TRIALS),
        seed(cfg),
    );
    plan.max_failures = match s.max_failures.unwrap_or(DEFAULT_MAX_FAILURES) {
        0 => None,
        cap => Some(cap),
    };
    if s.fixed_key == Some(true) {
        plan.key_policy = KeyPolicy::Fixed;
    }
    let points = run_bler(&plan, Exec::from_workers(s.workers))?;
    let format = cfg.format();
    with_sink(s.output.as_deref(), |w| write_points(&points, w, format))
}

pub fn threshold(cfg: &RunConfig, output: Option<&Path>) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let algorithm = cfg.decoder.algorithm.unwrap_or(Algorithm::AlgE);
    let omega = cfg.decoder.omega.unwrap_or(1.0);
    let n = cfg.threshold.block_length.unwrap_or_else(|| spec.block_length());
    if n == 0 {
        return Err(CliError::usage("block length must be positive"));
    }
    let mut search = ThresholdConfig::for_block_length(n);
    search.exec = Exec::Sequential;
    let t = match algorithm {
        Algorithm::AlgE => {
            if !(omega >= 0.0 && omega.fract() == 0.0 && omega <= u32::MAX as f64) {
                return Err(CliError::usage(format!("Algorithm E needs a non-negative integer omega, got {omega}")));
            }
            threshold_e(&spec.base, omega as u32, &search)?
        }
        Algorithm::Spa => threshold_spa(&spec.base, omega, &cfg.quantization()?, &search)?,
    };
    if !t.non_monotone.is_empty() {
        eprintln!("warning: convergence resumes above the threshold at delta = {:?}", t.non_monotone);
    }
    let row = ThresholdRow::new(&spec.name, &algorithm.to_string(), omega, &t);
    let format = cfg.format();
    with_sink(output, |w| write_threshold_rows(&[row], w, format))
}

pub fn security(cfg: &RunConfig, output: Option<&Path>) -> Result<(), CliError> {
    let spec = cfg.spec()?;
    let points;
    let weight = match (cfg.error_weight, &cfg.security.curve) {
        (Some(e), _) => ErrorWeight::Explicit(e),
        (None, Some(path)) => {
            let format = if path.extension().is_some_and(|x| x == "json") {
                Format::Json
            } else {
                Format::Csv
            };
            points = at_path(path, read_results(path, format))?
                .into_iter()
                .filter(|p| p.ensemble == spec.name)
                .collect::<Vec<_>>();
            if points.is_empty() {
                return Err(CliError::usage(format!("{} has no rows for ensemble {}", path.display(), spec.name)));
            }
            ErrorWeight::FromCurve {
                points: &points,
                target_bler: cfg.security.target_bler.unwrap_or(DEFAULT_TARGET_BLER),
            }
        }
        (None, None) => return Err(CliError::usage("give --error-weight or --curve")),
    };
    let report = security_report(&spec, weight)?;
    let format = cfg.format();
    with_sink(output, |w| write_report(&report.rows(), w, format))
}

fn shape_name(spec: &EnsembleSpec) -> &'static str {
    match spec.shape() {
        Shape::Reference => "reference",
        Shape::State => "state",
    }
}

fn histogram(map: &std::collections::BTreeMap<usize, usize>) -> Value {
    map.iter().map(|(d, c)| json!({ "degree": d, "count": c })).collect()
}

pub fn inspect(cfg: &RunConfig, output: Option<&Path>) -> Result<(), CliError> {
    let key = match &cfg.keys.private {
        Some(path) => at_path(path, cryptosystem::load_key(path))?,
        None => {
            let spec = cfg.spec()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed(cfg));
            let e = cfg.error_weight.unwrap_or(DEFAULT_ERROR_WEIGHT);
            Key::Private(cryptosystem::keygen(&spec, e, &mut rng)?.0)
        }
    };
    let spec = key.spec().clone();
    let mut info = json!({
        "ensemble": spec.name,
        "shape": shape_name(&spec),
        "Q": spec.q,
        "n": spec.block_length(),
        "k": spec.q,
        "base": spec.base.rows,
        "state_columns": spec.base.state_columns,
        "h_row_weight_bound": spec.h_row_weight_bound(),
        "key_space_bits": key_space_bits(&spec),
        "role": key.role(),
    });
    if let Key::Private(sk) = &key {
        let profile = sk.decoding_graph().degree_profile();
        info["h_row_weight"] = json!(sk.h.weights()[0].iter().sum::<usize>());
        info["graph_edges"] = json!(sk.decoding_graph().edge_count());
        info["vn_degrees"] = histogram(&profile.vn);
        info["cn_degrees"] = histogram(&profile.cn);
        info["state_vn_degrees"] = histogram(&profile.punctured_vn);
    }
    let text = match cfg.format() {
        Format::Json => serde_json::to_string_pretty(&info).map_err(protomdpc::Error::from)? + "\n",
        Format::Csv => flatten_csv(&info),
    };
    write_output(output, text.as_bytes())
}

/// `field,value` lines; histograms become one line per degree.
fn flatten_csv(info: &Value) -> String {
    let mut out = String::from("field,value\n");
    for (key, value) in info.as_object().expect("object") {
        match value {
            Value::Array(items) if items.first().is_some_and(|v| v.get("degree").is_some()) => {
                for item in items {
                    out += &format!("{key}.{},{}\n", item["degree"], item["count"]);
                }
            }
            Value::String(s) => out += &format!("{key},{s}\n"),
            Value::Array(_) => out += &format!("{key},\"{value}\"\n"),
            other => out += &format!("{key},{other}\n"),
        }
    }
    out
}
