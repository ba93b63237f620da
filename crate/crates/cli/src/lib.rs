//! Command-line front end: configuration loading, overrides and subcommand
//! dispatch for the `y00lab` binary.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use y00::attack::feasibility;
use y00::experiments::{
    attack_trial, emit_report, observed_length, run_campaign, simulate_trial, ExperimentConfig, FieldError,
    Format, FIELDS, VERSION,
};
use y00::keystream::{bits_to_hex, lfsr_sequence, seed_from_u64, LfsrSpec};
use y00::physical::write_slot_csv;

/// Exit status for a successful run.
pub const EXIT_OK: u8 = 0;
/// Exit status for invalid input: syntax, validation or argument errors.
pub const EXIT_INVALID: u8 = 1;
/// Exit status for a guarded refusal (intractable request declined by design).
pub const EXIT_REFUSED: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "y00lab",
    version,
    about = "Y-00 cipher simulator and attack workbench"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print an LFSR keystream as hex (MSB first).
    Keystream(KeystreamArgs),
    /// Simulate one trial and write its slot trace.
    Simulate(Common),
    /// Run the configured attack on one simulated trial.
    Attack(AttackArgs),
    /// Information-theoretic attack budget for a key length and crossover.
    Feasibility(FeasibilityArgs),
    /// Run the configured campaign and write its metrics report.
    Experiment(Common),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one configuration field; the value is parsed as JSON, else taken as a string.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Destination file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Args)]
pub struct KeystreamArgs {
    /// Register spec `degree:taps`, e.g. `4:4,1`; defaults to the config's `spec1`.
    #[arg(long)]
    pub spec: Option<String>,
    /// Initial register state as hex, cell 0 = least significant bit.
    #[arg(long, default_value = "1")]
    pub seed: String,
    /// Number of output bits.
    #[arg(long)]
    pub n: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct AttackArgs {
    /// Trial index under the config's master seed.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct FeasibilityArgs {
    #[arg(long)]
    pub key_bits: u32,
    /// Crossover probability of the keystream channel.
    #[arg(long)]
    pub p: f64,
    /// Weight of the connection polynomial.
    #[arg(long, default_value_t = 3)]
    pub taps: u32,
    /// Observed keystream length for the length-dependent complexity.
    #[arg(long)]
    pub observed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

/// Why a run stopped, mapped onto an exit status.
#[derive(Debug)]
pub enum Failure {
    /// Malformed configuration text, with 1-based position.
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    /// Every field-level validation problem.
    Invalid(Vec<FieldError>),
    /// Library error.
    Library(y00::Error),
    Io(io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Library(y00::Error::Refused(_)) => EXIT_REFUSED,
            _ => EXIT_INVALID,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Syntax {
                line,
                column,
                message,
            } => {
                write!(
                    f,
                    "config syntax error at line {line}, column {column}: {message}"
                )
            }
            Failure::Invalid(errors) => {
                write!(f, "invalid configuration ({} problems)", errors.len())?;
                for e in errors {
                    write!(f, "\n  {e}")?;
                }
                Ok(())
            }
            Failure::Library(e) => write!(f, "{e}"),
            Failure::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<y00::Error> for Failure {
    fn from(e: y00::Error) -> Self {
        Failure::Library(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

fn field_error(field: &str, message: impl Into<String>) -> Failure {
    Failure::Invalid(vec![FieldError {
        field: field.into(),
        message: message.into(),
    }])
}

fn parse_object(bytes: &[u8]) -> Result<Map<String, Value>, Failure> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| Failure::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    match value {
        Value::Object(map) => Ok(map),
        _ => Err(Failure::Syntax {
            line: 1,
            column: 1,
            message: "configuration must be a JSON object".into(),
        }),
    }
}

/// Parse and fully validate configuration text, reporting every problem.
pub fn parse_config(bytes: &[u8]) -> Result<ExperimentConfig, Failure> {
    let map = parse_object(bytes)?;
    ExperimentConfig::from_value(&Value::Object(map)).map_err(Failure::Invalid)
}

/// Apply `key=value` overrides to parsed configuration fields.
pub fn apply_overrides(map: &mut Map<String, Value>, overrides: &[String]) -> Result<(), Failure> {
    let mut errors = Vec::new();
    for o in overrides {
        let Some((key, raw)) = o.split_once('=') else {
            errors.push(FieldError {
                field: o.clone(),
                message: "override must look like key=value".into(),
            });
            continue;
        };
        if !FIELDS.contains(&key) {
            errors.push(FieldError {
                field: key.into(),
                message: "unknown configuration field".into(),
            });
            continue;
        }
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.into()));
        map.insert(key.into(), value);
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invalid(errors))
    }
}

/// Configuration from the optional file with overrides applied, validated.
/// Override and field problems are reported together.
pub fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let mut map = match &common.config {
        Some(path) => parse_object(&fs::read(path)?)?,
        None => Map::new(),
    };
    let mut errors = match apply_overrides(&mut map, &common.overrides) {
        Err(Failure::Invalid(errors)) => errors,
        Err(other) => return Err(other),
        Ok(()) => Vec::new(),
    };
    match ExperimentConfig::from_value(&Value::Object(map)) {
        Ok(cfg) if errors.is_empty() => Ok(cfg),
        Ok(_) => Err(Failure::Invalid(errors)),
        Err(more) => {
            errors.extend(more);
            Err(Failure::Invalid(errors))
        }
    }
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match path {
        Some(p) => fs::write(p, bytes),
        None => io::stdout().lock().write_all(bytes),
    }
}

fn provenance(cfg: &ExperimentConfig) -> Value {
    json!({"config": cfg.to_value(), "master_seed": cfg.master_seed, "version": VERSION})
}

fn to_json(v: &Value) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("JSON value serializes");
    out.push(b'\n');
    out
}

fn keystream(args: &KeystreamArgs) -> Result<Vec<u8>, Failure> {
    let spec: LfsrSpec = match &args.spec {
        Some(s) => s.parse()?,
        None if args.common.config.is_some() || !args.common.overrides.is_empty() => {
            load_config(&args.common)?.spec1
        }
        None => return Err(field_error("spec", "give --spec or a config with spec1")),
    };
    let digits = args.seed.trim_start_matches("0x");
    let value = u64::from_str_radix(digits, 16)
        .map_err(|e| field_error("seed", format!("not a hex integer: {e}")))?;
    if spec.degree() < 64 && value >> spec.degree() != 0 {
        return Err(field_error(
            "seed",
            format!("wider than the {}-cell register", spec.degree()),
        ));
    }
    let bits = lfsr_sequence(&spec, &seed_from_u64(&spec, value)?, args.n)?;
    Ok(match args.common.format {
        OutputFormat::Json => to_json(&json!({
            "spec": spec.to_string(), "seed": args.seed, "n": args.n,
            "bits": bits_to_hex(&bits), "version": VERSION
        })),
        OutputFormat::Csv => format!("{}\n", bits_to_hex(&bits)).into_bytes(),
    })
}

fn simulate(common: &Common) -> Result<Vec<u8>, Failure> {
    let cfg = load_config(common)?;
    let trial = simulate_trial(&cfg, 0)?;
    Ok(match common.format {
        OutputFormat::Csv => {
            let mut out = format!(
                "# config: {}\n# master_seed: {}\n# version: {VERSION}\n",
                serde_json::to_string(&cfg.to_value()).expect("config serializes"),
                cfg.master_seed
            )
            .into_bytes();
            write_slot_csv(&trial.slots, &mut out)?;
            out
        }
        OutputFormat::Json => {
            let slots: Vec<Value> = trial
                .slots
                .iter()
                .map(|s| {
                    json!({
                        "index": s.index, "data_bit": s.data_bit, "running_key": s.running_key,
                        "pattern_index": s.pattern_index, "true_phase": s.true_phase,
                        "measured_phase": s.measured_phase,
                    })
                })
                .collect();
            to_json(&json!({"provenance": provenance(&cfg), "slots": slots}))
        }
    })
}

fn attack(args: &AttackArgs) -> Result<Vec<u8>, Failure> {
    let cfg = load_config(&args.common)?;
    let n = observed_length(&cfg);
    let (report, crossover) = attack_trial(&cfg, args.trial, n)?;
    let doc = json!({
        "provenance": provenance(&cfg),
        "trial": args.trial,
        "observed_bits": n,
        "crossover": crossover,
        "report": serde_json::to_value(&report).expect("report serializes"),
    });
    Ok(match args.common.format {
        OutputFormat::Json => to_json(&doc),
        OutputFormat::Csv => {
            let state = report
                .recovered_state
                .as_deref()
                .map(bits_to_hex)
                .unwrap_or_default();
            format!(
                "# config: {}\n# master_seed: {}\n# version: {VERSION}\n\
                 trial,observed_bits,crossover,method,success,recovered_state,iterations,parity_checks,residual_mismatch,work_units\n\
                 {},{n},{crossover},{:?},{},{state},{},{},{},{}\n",
                serde_json::to_string(&cfg.to_value()).expect("config serializes"),
                cfg.master_seed,
                args.trial,
                report.method,
                report.success,
                report.iterations_used,
                report.parity_checks_used,
                report.residual_mismatch,
                report.work_units
            )
            .into_bytes()
        }
    })
}

fn feasibility_report(args: &FeasibilityArgs) -> Result<Vec<u8>, Failure> {
    let mut f = feasibility(args.key_bits, args.taps, args.p)?;
    if let Some(n) = args.observed {
        f = f.with_observed_length(n);
    }
    Ok(match args.common.format {
        OutputFormat::Json => to_json(&json!({
            "feasibility": serde_json::to_value(f).expect("estimate serializes"),
            "version": VERSION
        })),
        OutputFormat::Csv => {
            let mut out = format!(
                "key_bits {}\ntap_count {}\np {}\ncapacity {}\nn0 {}\nlog2_complexity {}\nrequired_n {}\n",
                f.key_bits, f.tap_count, f.p, f.capacity, f.n0, f.log2_complexity, f.required_n
            );
            if let (Some(n), Some(c)) = (f.observed_n, f.log2_complexity_observed) {
                out.push_str(&format!("observed_n {n}\nlog2_complexity_observed {c}\n"));
            }
            out.into_bytes()
        }
    })
}

fn experiment(common: &Common) -> Result<Vec<u8>, Failure> {
    let cfg = load_config(common)?;
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    let table = run_campaign(&cfg)?;
    Ok(emit_report(&[table], common.format.into())?)
}

/// Execute one invocation, writing its artifact to the output destination.
pub fn dispatch(cli: &Cli) -> Result<(), Failure> {
    let (bytes, output) = match &cli.command {
        Command::Keystream(a) => (keystream(a)?, &a.common.output),
        Command::Simulate(c) => (simulate(c)?, &c.output),
        Command::Attack(a) => (attack(a)?, &a.common.output),
        Command::Feasibility(a) => (feasibility_report(a)?, &a.common.output),
        Command::Experiment(c) => (experiment(c)?, &c.output),
    };
    write_output(output.as_deref(), &bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"m": 16, "alpha": 2.0, "spec1": "17:17,3", "noise": "wedge",
        "trials": 10, "slots_per_trial": 1000, "master_seed": 42}"#;

    #[test]
    fn minimal_config_valid() {
        let cfg = parse_config(MINIMAL.as_bytes()).unwrap();
        assert_eq!(cfg.m, 16);
        assert!(cfg.warnings().is_empty());
    }

    #[test]
    fn syntax_error_has_position() {
        match parse_config(b"{\n  \"m\": 16,\n  \"alpha\" 2.0\n}") {
            Err(Failure::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 11)),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config(b"[1]"), Err(Failure::Syntax { .. })));
    }

    #[test]
    fn every_field_error_reported() {
        let text = MINIMAL.replace("16", "3").replace("\"wedge\"", "\"fog\"");
        match parse_config(text.as_bytes()) {
            Err(Failure::Invalid(errors)) => {
                assert_eq!(errors.len(), 2, "{errors:?}");
                assert!(errors[0].to_string().contains("M must be a power of two"));
                assert_eq!(errors[1].field, "noise");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides() {
        let mut map = parse_object(MINIMAL.as_bytes()).unwrap();
        apply_overrides(&mut map, &["m=64".into(), "spec1=31:31,3".into()]).unwrap();
        assert_eq!(map["m"], json!(64));
        assert_eq!(map["spec1"], json!("31:31,3"));
        let err = apply_overrides(&mut map, &["bogus=1".into(), "noequals".into()]).unwrap_err();
        assert!(matches!(err, Failure::Invalid(ref e) if e.len() == 2));
        assert_eq!(err.exit_code(), EXIT_INVALID);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            Failure::Library(y00::Error::Refused("x".into())).exit_code(),
            EXIT_REFUSED
        );
        assert_eq!(
            Failure::Library(y00::Error::Config("x".into())).exit_code(),
            EXIT_INVALID
        );
    }
}
