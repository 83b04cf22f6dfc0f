//! `protomdpc` command-line tool.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 decoding failure,
//! 3 I/O or malformed input.

mod bits;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use protomdpc::simulation::Format;
use protomdpc::Algorithm;

use config::{parse_base, RunConfig, CONFIG_ENV};

#[derive(Parser, Debug)]
#[command(name = "protomdpc", version, about = "Protograph QC-MDPC McEliece workbench")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// How errors are reported on stderr.
    #[arg(long, global = true, value_enum, default_value_t = ErrorFormat::Text)]
    error_format: ErrorFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ErrorFormat {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a key pair.
    Keygen(KeygenArgs),
    /// Encrypt a plaintext of Q bits.
    Encrypt(EncryptArgs),
    /// Decrypt a ciphertext; exits with 2 when decoding fails.
    Decrypt(DecryptArgs),
    /// Monte Carlo block error rate over error weights.
    Simulate(SimulateArgs),
    /// Density-evolution decoding threshold.
    Threshold(ThresholdArgs),
    /// ISD work factors and key-space size.
    Security(SecurityArgs),
    /// Shape, weights and degree profile of an ensemble or key.
    Inspect(InspectArgs),
}

#[derive(Args, Debug, Default)]
struct CodeArgs {
    /// Built-in ensemble: A, B or C.
    #[arg(long, short = 'E')]
    ensemble: Option<String>,
    /// Custom base matrix, rows separated by `;`, e.g. `1,8,8;5,5,5`.
    #[arg(long, value_parser = parse_base)]
    base: Option<Vec<Vec<u32>>>,
    /// State (punctured) block columns of a custom base matrix.
    #[arg(long, value_delimiter = ',')]
    state_columns: Option<Vec<usize>>,
    /// Lifting size.
    #[arg(long = "Q", visible_alias = "q")]
    q: Option<usize>,
}

#[derive(Args, Debug, Default)]
struct SeedArgs {
    /// RNG seed; drawn from the system and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct DecoderArgs {
    /// spa or e.
    #[arg(long, short = 'a')]
    algorithm: Option<Algorithm>,
    /// Check-node scaling (SPA) or channel weight (Algorithm E).
    #[arg(long, short = 'w')]
    omega: Option<f64>,
    /// Iteration cap (default 100)
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Keep iterating after the syndrome clears.
    #[arg(long)]
    no_early_stop: bool,
}

#[derive(Args, Debug, Default)]
struct OutputArgs {
    /// Emit JSON instead of CSV.
    #[arg(long)]
    json: bool,
    /// Write the table here instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct KeygenArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    seed: SeedArgs,
    /// Error weight stored with the key.
    #[arg(long, short = 'e')]
    error_weight: Option<usize>,
    #[arg(long, default_value = "key.private.json")]
    private: PathBuf,
    #[arg(long, default_value = "key.public.json")]
    public: PathBuf,
}

#[derive(Args, Debug)]
struct EncryptArgs {
    #[command(flatten)]
    seed: SeedArgs,
    /// Public (or private) key file.
    #[arg(long, short = 'k')]
    key: Option<PathBuf>,
    /// Override the error weight stored in the key.
    #[arg(long, short = 'e')]
    error_weight: Option<usize>,
    /// Plaintext file; stdin when absent.
    #[arg(long, short = 'i')]
    input: Option<PathBuf>,
    /// Ciphertext file; stdout when absent.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Encrypt a uniformly random plaintext instead of reading one.
    #[arg(long, conflicts_with = "input")]
    random_plaintext: bool,
    /// Read and write hex text instead of raw bytes.
    #[arg(long)]
    hex: bool,
}

#[derive(Args, Debug)]
struct DecryptArgs {
    #[command(flatten)]
    decoder: DecoderArgs,
    /// Private key file.
    #[arg(long, short = 'k')]
    key: Option<PathBuf>,
    #[arg(long, short = 'i')]
    input: Option<PathBuf>,
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[arg(long)]
    hex: bool,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    decoder: DecoderArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Error weights, comma separated.
    #[arg(long, short = 'e', value_delimiter = ',')]
    weights: Option<Vec<usize>>,
    /// Trials per error weight (default 1000)
    #[arg(long, short = 't')]
    trials: Option<usize>,
    /// Stop a point after this many failures (0: never).
    #[arg(long)]
    max_failures: Option<usize>,
    /// Worker threads (1: sequential).
    #[arg(long, short = 'j')]
    workers: Option<usize>,
    /// Use one key for all trials instead of a fresh key per trial.
    #[arg(long)]
    fixed_key: bool,
}

#[derive(Args, Debug)]
struct ThresholdArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// spa or e.
    #[arg(long, short = 'a')]
    algorithm: Option<Algorithm>,
    #[arg(long, short = 'w')]
    omega: Option<f64>,
    /// Block length used for `n delta`; defaults to the ensemble's.
    #[arg(long)]
    block_length: Option<usize>,
    /// SPA quantization step.
    #[arg(long)]
    step: Option<f64>,
    /// SPA saturation magnitude.
    #[arg(long)]
    saturation: Option<f64>,
}

#[derive(Args, Debug)]
struct SecurityArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Error weight of the decoding attack.
    #[arg(long, short = 'e', conflicts_with = "curve")]
    error_weight: Option<usize>,
    /// Simulation results (CSV, or JSON by extension) to read the error weight from.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Block error rate the error weight must reach on the curve (default 1e-6)
    #[arg(long)]
    target_bler: Option<f64>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    seed: SeedArgs,
    #[command(flatten)]
    out: OutputArgs,
    /// Inspect this key file instead of a freshly sampled key.
    #[arg(long, short = 'k')]
    key: Option<PathBuf>,
}

/// Error with the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, kind: "usage", message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self { code: 3, kind: "io", message: message.into() }
    }
}

impl From<protomdpc::Error> for CliError {
    fn from(e: protomdpc::Error) -> Self {
        use protomdpc::Error as E;
        let (code, kind) = match &e {
            E::DecodingFailure { .. } => (2, "decoding_failure"),
            E::Io(_) => (3, "io"),
            E::Csv(_) | E::Json(_) | E::MalformedKey(_) | E::VersionMismatch { .. } | E::InvariantViolation(_) => {
                (3, "malformed_input")
            }
            E::KeyGeneration { .. } => (1, "key_generation"),
            E::Bracket(_) | E::Density(_) => (1, "density_evolution"),
            E::Infeasible(_) => (1, "infeasible"),
            _ => (1, "invalid_parameter"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl Cli {
    /// File config with this subcommand's flags laid on top.
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        let code = match &self.command {
            Command::Keygen(a) => Some(&a.code),
            Command::Simulate(a) => Some(&a.code),
            Command::Threshold(a) => Some(&a.code),
            Command::Security(a) => Some(&a.code),
            Command::Inspect(a) => Some(&a.code),
            Command::Encrypt(_) | Command::Decrypt(_) => None,
        };
        if let Some(c) = code {
            overlay(&mut cfg.ensemble, &c.ensemble);
            overlay(&mut cfg.base, &c.base);
            overlay(&mut cfg.state_columns, &c.state_columns);
            overlay(&mut cfg.q, &c.q);
            if c.ensemble.is_some() && c.base.is_none() {
                cfg.base = None;
            }
        }
        let seed = match &self.command {
            Command::Keygen(a) => Some(&a.seed),
            Command::Encrypt(a) => Some(&a.seed),
            Command::Simulate(a) => Some(&a.seed),
            Command::Inspect(a) => Some(&a.seed),
            _ => None,
        };
        if let Some(s) = seed {
            overlay(&mut cfg.seed, &s.seed);
        }
        let decoder = match &self.command {
            Command::Simulate(a) => Some(&a.decoder),
            Command::Decrypt(a) => Some(&a.decoder),
            _ => None,
        };
        if let Some(d) = decoder {
            overlay(&mut cfg.decoder.algorithm, &d.algorithm);
            overlay(&mut cfg.decoder.omega, &d.omega);
            overlay(&mut cfg.decoder.max_iterations, &d.max_iterations);
            if d.no_early_stop {
                cfg.decoder.early_stop = Some(false);
            }
        }
        let out = match &self.command {
            Command::Simulate(a) => Some(&a.out),
            Command::Threshold(a) => Some(&a.out),
            Command::Security(a) => Some(&a.out),
            Command::Inspect(a) => Some(&a.out),
            _ => None,
        };
        if out.is_some_and(|o| o.json) {
            cfg.format = Some(Format::Json);
        }
        match &self.command {
            Command::Keygen(a) => {
                overlay(&mut cfg.error_weight, &a.error_weight);
            }
            Command::Encrypt(a) => {
                overlay(&mut cfg.error_weight, &a.error_weight);
                overlay(&mut cfg.keys.public, &a.key);
            }
            Command::Decrypt(a) => overlay(&mut cfg.keys.private, &a.key),
            Command::Simulate(a) => {
                let s = &mut cfg.simulate;
                overlay(&mut s.weights, &a.weights);
                overlay(&mut s.trials, &a.trials);
                overlay(&mut s.max_failures, &a.max_failures);
                overlay(&mut s.workers, &a.workers);
                overlay(&mut s.output, &a.out.output);
                if a.fixed_key {
                    s.fixed_key = Some(true);
                }
            }
            Command::Threshold(a) => {
                overlay(&mut cfg.decoder.algorithm, &a.algorithm);
                overlay(&mut cfg.decoder.omega, &a.omega);
                let t = &mut cfg.threshold;
                overlay(&mut t.block_length, &a.block_length);
                overlay(&mut t.step, &a.step);
                overlay(&mut t.saturation, &a.saturation);
            }
            Command::Security(a) => {
                overlay(&mut cfg.error_weight, &a.error_weight);
                if a.error_weight.is_some() {
                    cfg.security.curve = None;
                }
                overlay(&mut cfg.security.curve, &a.curve);
                overlay(&mut cfg.security.target_bler, &a.target_bler);
            }
            Command::Inspect(a) => overlay(&mut cfg.keys.private, &a.key),
        }
        Ok(cfg)
    }
}

fn overlay<T: Clone>(slot: &mut Option<T>, flag: &Option<T>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.config()?;
    match &cli.command {
        Command::Keygen(a) => commands::keygen(&cfg, &a.private, &a.public),
        Command::Encrypt(a) => commands::encrypt(&cfg, a.input.as_deref(), a.output.as_deref(), a.random_plaintext, a.hex),
        Command::Decrypt(a) => commands::decrypt(&cfg, a.input.as_deref(), a.output.as_deref(), a.hex),
        Command::Simulate(_) => commands::simulate(&cfg),
        Command::Threshold(a) => commands::threshold(&cfg, a.out.output.as_deref()),
        Command::Security(a) => commands::security(&cfg, a.out.output.as_deref()),
        Command::Inspect(a) => commands::inspect(&cfg, a.out.output.as_deref()),
    }
}

fn report(err: &CliError, format: ErrorFormat) {
    match format {
        ErrorFormat::Text => eprintln!("error: {}", err.message),
        ErrorFormat::Json => eprintln!(
            "{}",
            serde_json::json!({ "error": err.kind, "exit_code": err.code, "message": err.message })
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            report(&err, cli.error_format);
            ExitCode::from(err.code)
        }
    }
}
