//! Turning a JSON config file plus command-line overrides into a `RunConfig`.

use std::path::{Path, PathBuf};

use clap::Args;
use gcavity::config::{ExcitationMode, RunConfig};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// JSON run configuration, or the metadata sidecar of an earlier run.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the value in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `outputs.directory`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Arbitrary override `section.field=value`, value parsed as JSON when possible.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// CW acquisition time in picoseconds.
    #[arg(long)]
    pub duration_ps: Option<u64>,
    /// Number of excitation pulses in pulsed mode.
    #[arg(long)]
    pub n_pulses: Option<u64>,
    /// Pulse repetition period.
    #[arg(long)]
    pub rep_period_ns: Option<f64>,
    /// Emitter-cavity detuning in nm.
    #[arg(long, allow_negative_numbers = true)]
    pub detuning_nm: Option<f64>,
    /// Independent CW segments; changes the stream, unlike `--workers`.
    #[arg(long)]
    pub shards: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Cw,
    Pulsed,
}

impl From<Mode> for ExcitationMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Cw => ExcitationMode::Cw,
            Mode::Pulsed => ExcitationMode::Pulsed,
        }
    }
}

/// Pending edits to the config document, applied in order.
#[derive(Default)]
pub struct Overrides(Vec<(Vec<String>, Value)>);

impl Overrides {
    pub fn put(&mut self, path: &str, v: impl Into<Value>) {
        self.0.push((path.split('.').map(str::to_string).collect(), v.into()));
    }

    pub fn put_opt<T: Into<Value>>(&mut self, path: &str, v: Option<T>) {
        if let Some(v) = v {
            self.put(path, v);
        }
    }

    pub fn sim(&mut self, s: &SimArgs) {
        self.put_opt(
            "simulation.mode",
            s.mode.map(|m| match m {
                Mode::Cw => "cw",
                Mode::Pulsed => "pulsed",
            }),
        );
        self.put_opt("simulation.duration_ps", s.duration_ps);
        self.put_opt("simulation.n_pulses", s.n_pulses);
        self.put_opt("simulation.rep_period_ns", s.rep_period_ns);
        self.put_opt("simulation.detuning_nm", s.detuning_nm);
        self.put_opt("simulation.shards", s.shards);
    }
}

fn read_document(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("config {} is not valid JSON: {e}", path.display())))?;
    // A sidecar carries the resolved config of the run it describes.
    match doc {
        Value::Object(mut m) if m.contains_key("config_sha256") => m
            .remove("config")
            .ok_or_else(|| CliError::Input(format!("sidecar {} has no `config` entry", path.display()))),
        other => Ok(other),
    }
}

fn set_path(doc: &mut Value, path: &[String], v: Value) -> Result<(), CliError> {
    let mut node = doc;
    for (i, key) in path.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            _ => return Err(CliError::Input(format!("cannot override `{}`: parent is not an object", path.join(".")))),
        };
        if i + 1 == path.len() {
            obj.insert(key.clone(), v);
            return Ok(());
        }
        node = obj.entry(key.clone()).or_insert_with(|| Value::Object(Map::new()));
    }
    Err(CliError::Input("empty override path".into()))
}

/// Loads the config, applies `extra` and the generic `--set`/`--seed`/`--out-dir`
/// flags, and validates. `fallback_seed` fills in a missing seed.
pub fn resolve(args: &ConfigArgs, extra: Overrides, fallback_seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut doc = match &args.config {
        Some(p) => read_document(p)?,
        None => Value::Object(Map::new()),
    };
    if !doc.is_object() {
        return Err(CliError::Input("config must be a JSON object".into()));
    }
    let mut ov = extra;
    for s in &args.set {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("--set expects PATH=VALUE, got `{s}`")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        ov.0.push((k.split('.').map(str::to_string).collect(), v));
    }
    ov.put_opt("seed", args.seed);
    ov.put_opt("outputs.directory", args.out_dir.as_ref().map(|p| p.to_string_lossy().into_owned()));
    for (path, v) in ov.0 {
        set_path(&mut doc, &path, v)?;
    }
    if let (Some(seed), Value::Object(m)) = (fallback_seed, &mut doc) {
        m.entry("seed").or_insert(seed.into());
    }
    let cfg: RunConfig =
        serde_json::from_value(doc).map_err(|e| CliError::Input(format!("invalid config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
