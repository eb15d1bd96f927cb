//! `gcavity`: reproducible simulation and analysis runs from a JSON config.
//!
//! Every command that writes files also writes a `<name>.meta.json` sidecar
//! holding the resolved config, its SHA-256, the seed and the build; passing
//! that sidecar back as `--config` reproduces the run.

mod resolve;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gcavity::config::{ExcitationMode, RunConfig};
use gcavity::emitter::derive_seed;
use gcavity::fitting::{lm_fit, FitProblem};
use gcavity::pipeline::{
    bands_report, fig4a, hbt_analysis, lifetime_analysis, purcell_report, run_figure, seeds, simulate_run,
    FigureName, Table,
};
use gcavity::stats::{hbt_split, pulsed_g2, write_decay_csv, write_g2_csv};
use gcavity::stream::{Channel, PhotonStream, MAGIC};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use resolve::{resolve, ConfigArgs, Overrides, SimArgs};

const GIT_DESCRIBE: &str = env!("GCAVITY_GIT_DESCRIBE");

#[derive(Debug, Parser)]
#[command(name = "gcavity", version, about = "G-center cavity simulation and analysis pipelines")]
struct Cli {
    /// Worker threads for parallel stages (defaults to one per core).
    #[arg(long, global = true, env = "GCAVITY_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a photon stream and write it with a metadata sidecar.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        sim: SimArgs,
        /// Write NDJSON instead of the binary format.
        #[arg(long)]
        ndjson: bool,
    },
    /// Two-detector coincidence histogram of a stream file.
    Hbt {
        /// Stream file, binary or NDJSON.
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Histogram bin width.
        #[arg(long)]
        bin_ps: Option<u64>,
        /// Largest delay on each side of zero.
        #[arg(long)]
        max_delay_ps: Option<u64>,
        /// Signal fraction for the background correction; read from the
        /// channel labels when omitted.
        #[arg(long)]
        signal_fraction: Option<f64>,
        /// Treat the stream as pulsed and also report peak areas.
        #[arg(long)]
        rep_period_ns: Option<f64>,
    },
    /// Decay histogram and exponential fit of a pulsed stream file.
    Lifetime {
        /// Stream file, binary or NDJSON.
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Decay histogram bin width.
        #[arg(long)]
        bin_ps: Option<u64>,
        /// Excitation period the tags are folded onto.
        #[arg(long)]
        rep_period_ns: Option<f64>,
    },
    /// Least-squares fit of a JSON fit problem.
    Fit {
        /// JSON file with model, x, y and optional weights, init and bounds.
        problem: PathBuf,
        /// Also write the result to this file.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Gas-tuning sweep of the cavity resonance towards the emitter line.
    ScanTuning {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of gas injection cycles.
        #[arg(long)]
        cycles: Option<u32>,
    },
    /// TE band structure of the photonic crystal.
    Bands {
        #[command(flatten)]
        config: ConfigArgs,
        /// Basis size, rounded up to complete shells.
        #[arg(long)]
        n_plane_waves: Option<usize>,
        /// Dielectric constant of the slab.
        #[arg(long)]
        eps: Option<f64>,
        /// Hole radius over lattice constant.
        #[arg(long)]
        radius_ratio: Option<f64>,
        #[arg(long)]
        lattice_constant_nm: Option<f64>,
    },
    /// Purcell factor and β from measured lifetimes.
    Purcell {
        /// Lifetime without a cavity, ns.
        #[arg(long, default_value_t = 33.3)]
        tau_bulk: f64,
        /// Lifetime on resonance, ns.
        #[arg(long)]
        tau_on: f64,
        /// Lifetime off resonance, ns.
        #[arg(long)]
        tau_off: f64,
        /// Debye-Waller factor.
        #[arg(long, default_value_t = 0.15, allow_negative_numbers = true)]
        eta: f64,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Regenerate the data behind one figure.
    Figure {
        /// fig2c, fig2d, fig3c, fig3d, fig4a, fig4b or fig4c.
        name: String,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        sim: SimArgs,
    },
}

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input.
    Input(String),
    /// Output could not be written.
    Output(String),
    Pipeline(gcavity::Error),
    /// Results were written but a fit did not converge.
    NotConverged(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Output(m) => f.write_str(m),
            CliError::Pipeline(e) => write!(f, "{e}"),
            CliError::NotConverged(m) => write!(f, "fit did not converge: {m}"),
        }
    }
}

impl From<gcavity::Error> for CliError {
    fn from(e: gcavity::Error) -> Self {
        CliError::Pipeline(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Pipeline(e) if e.is_invalid_input() => 2,
            _ => 1,
        }
    }

    fn report(&self) -> Value {
        let mut err = Map::new();
        let kind = match self {
            CliError::Input(_) => "invalid_input",
            CliError::Output(_) => "output",
            CliError::NotConverged(_) => "not_converged",
            CliError::Pipeline(e) => {
                let mut stages = Vec::new();
                let mut e = e;
                while let gcavity::Error::Stage { stage, source } = e {
                    stages.push(*stage);
                    e = source;
                }
                if !stages.is_empty() {
                    err.insert("stages".into(), json!(stages));
                }
                if let gcavity::Error::Domain { name, .. } = e {
                    err.insert("parameter".into(), json!(name));
                }
                error_kind(e)
            }
        };
        err.insert("kind".into(), json!(kind));
        err.insert("exit_code".into(), json!(self.exit_code()));
        err.insert("message".into(), json!(self.to_string()));
        json!({ "error": err })
    }
}

fn error_kind(e: &gcavity::Error) -> &'static str {
    use gcavity::Error as E;
    match e {
        E::Domain { .. } => "domain",
        E::Degenerate(_) => "degenerate",
        E::Contract(_) => "contract",
        E::InsufficientData(_) => "insufficient_data",
        E::ModelInput(_) => "model_input",
        E::Basis(_) => "basis",
        E::Format(_) => "format",
        E::Stage { .. } => "stage",
        E::Io(_) => "io",
        E::Json(_) => "json",
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Files written by one command, collected for the sidecar.
struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::Output(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> gcavity::Result<()>,
    ) -> Result<(), CliError> {
        let path = self.path(name);
        let fail = |e: &dyn fmt::Display| CliError::Output(format!("cannot write {}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(|e| fail(&e))?);
        body(&mut w).map_err(|e| fail(&e))?;
        w.flush().map_err(|e| fail(&e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json(&mut self, name: &str, v: &Value) -> Result<(), CliError> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, v)?;
            writeln!(w)?;
            Ok(())
        })
    }

    fn tables(&mut self, tables: &[Table]) -> Result<(), CliError> {
        for t in tables {
            self.write(&t.file_name(), |w| t.write_csv(w))?;
        }
        Ok(())
    }
}

struct Input {
    path: PathBuf,
    sha256: String,
}

/// Everything the sidecar records beyond the output list.
struct RunRecord<'a> {
    command: &'static str,
    cfg: &'a RunConfig,
    /// Arguments that, followed by `--config <sidecar>`, rerun the command.
    rerun: Vec<String>,
    rep_period_ns: Option<f64>,
    inputs: Vec<Input>,
}

fn write_sidecar(out: &mut Outputs, stem: &str, rec: RunRecord<'_>) -> Result<PathBuf, CliError> {
    let config = serde_json::to_value(rec.cfg).map_err(gcavity::Error::from)?;
    let config_text = serde_json::to_string(&config).map_err(gcavity::Error::from)?;
    let name = format!("{stem}.meta.json");
    let sidecar = out.path(&name);
    let mut rerun = vec!["gcavity".to_string(), rec.command.to_string()];
    rerun.extend(rec.rerun);
    rerun.extend(["--config".to_string(), sidecar.to_string_lossy().into_owned()]);

    let mut m = Map::new();
    m.insert("tool".into(), json!("gcavity"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("git_describe".into(), json!(GIT_DESCRIBE));
    m.insert("command".into(), json!(rec.command));
    m.insert("argv".into(), json!(std::env::args().collect::<Vec<_>>()));
    m.insert("rerun".into(), json!(rerun));
    m.insert("seed".into(), json!(rec.cfg.seed));
    if let Some(t) = rec.rep_period_ns {
        m.insert("rep_period_ns".into(), json!(t));
    }
    if !rec.inputs.is_empty() {
        let inputs: Vec<Value> = rec
            .inputs
            .iter()
            .map(|i| json!({"path": i.path.to_string_lossy(), "sha256": i.sha256}))
            .collect();
        m.insert("inputs".into(), json!(inputs));
    }
    m.insert("outputs".into(), json!(out.written));
    m.insert("config_sha256".into(), json!(hex_sha256(config_text.as_bytes())));
    m.insert("config".into(), config);
    out.json(&name, &Value::Object(m))?;
    Ok(sidecar)
}

fn read_stream(path: &Path) -> Result<(PhotonStream, Input), CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let stream = if bytes.starts_with(&MAGIC) {
        PhotonStream::read_binary(&bytes[..])
    } else {
        PhotonStream::read_ndjson(&bytes[..])
    }
    .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let input = Input {
        path: path.to_path_buf(),
        sha256: hex_sha256(&bytes),
    };
    Ok((stream, input))
}

/// Writes to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(v: &Value) {
    emit(&serde_json::to_string_pretty(v).expect("JSON values serialize"));
}

fn check_converged(summary: &Value, what: &str) -> Result<(), CliError> {
    match summary.get("converged") {
        Some(Value::Bool(false)) => Err(CliError::NotConverged(what.to_string())),
        _ => Ok(()),
    }
}

fn cmd_simulate(config: &ConfigArgs, sim: &SimArgs, ndjson: bool) -> Result<(), CliError> {
    let mut ov = Overrides::default();
    ov.sim(sim);
    if ndjson {
        ov.put("outputs.ndjson", true);
    }
    let cfg = resolve(config, ov, None)?;
    let stream = simulate_run(&cfg)?;
    let mut out = Outputs::new(&cfg.outputs.directory)?;
    let file = if cfg.outputs.ndjson { "stream.ndjson" } else { "stream.gcts" };
    out.write(file, |w| {
        if cfg.outputs.ndjson {
            stream.write_ndjson(w)
        } else {
            stream.write_binary(w)
        }
    })?;
    let pulsed = cfg.simulation.mode == ExcitationMode::Pulsed;
    let sidecar = write_sidecar(
        &mut out,
        "stream",
        RunRecord {
            command: "simulate",
            cfg: &cfg,
            rerun: vec![],
            rep_period_ns: pulsed.then_some(cfg.simulation.rep_period_ns),
            inputs: vec![],
        },
    )?;
    print_json(&json!({
        "stream": out.path(file).to_string_lossy(),
        "metadata": sidecar.to_string_lossy(),
        "tags": stream.len(),
        "background_tags": stream.count_channel(Channel::Background),
        "duration_ps": stream.duration_ps(),
    }));
    Ok(())
}

fn cmd_hbt(
    input: &Path,
    config: &ConfigArgs,
    bin_ps: Option<u64>,
    max_delay_ps: Option<u64>,
    signal_fraction: Option<f64>,
    rep_period_ns: Option<f64>,
) -> Result<(), CliError> {
    let (stream, inp) = read_stream(input)?;
    let mut ov = Overrides::default();
    ov.put_opt("analysis.g2_bin_ps", bin_ps);
    ov.put_opt("analysis.g2_max_delay_ps", max_delay_ps);
    if let Some(t) = rep_period_ns {
        ov.put("simulation.mode", "pulsed");
        ov.put("simulation.rep_period_ns", t);
    }
    let cfg = resolve(config, ov, Some(stream.seed()))?;
    let a = &cfg.analysis;
    let detector = cfg.detector.model();
    let split_seed = derive_seed(cfg.seed, seeds::DETECTORS);
    let (h, hbt) = hbt_analysis(&stream, &detector, a.g2_bin_ps, a.g2_max_delay_ps, split_seed, signal_fraction)?;
    let mut summary = serde_json::to_value(&hbt).map_err(gcavity::Error::from)?;
    let pulsed = cfg.simulation.mode == ExcitationMode::Pulsed;
    if pulsed {
        let (da, db) = hbt_split(&stream, &detector, split_seed)?;
        let p = pulsed_g2(&da, &db, cfg.simulation.rep_period_ns, a.pulsed_peaks)?;
        summary["pulsed"] = serde_json::to_value(&p).map_err(gcavity::Error::from)?;
    }

    let mut out = Outputs::new(&cfg.outputs.directory)?;
    out.write("hbt_g2.csv", |w| write_g2_csv(&h, w))?;
    out.json("hbt_summary.json", &summary)?;
    let mut rerun = vec![input.to_string_lossy().into_owned()];
    if let Some(r) = signal_fraction {
        rerun.extend(["--signal-fraction".into(), r.to_string()]);
    }
    write_sidecar(
        &mut out,
        "hbt",
        RunRecord {
            command: "hbt",
            cfg: &cfg,
            rerun,
            rep_period_ns: pulsed.then_some(cfg.simulation.rep_period_ns),
            inputs: vec![inp],
        },
    )?;
    print_json(&summary);
    Ok(())
}

fn cmd_lifetime(input: &Path, config: &ConfigArgs, bin_ps: Option<u64>, rep_period_ns: Option<f64>) -> Result<(), CliError> {
    let (stream, inp) = read_stream(input)?;
    let mut ov = Overrides::default();
    ov.put_opt("analysis.decay_bin_ps", bin_ps);
    ov.put_opt("simulation.rep_period_ns", rep_period_ns);
    ov.put("simulation.mode", "pulsed");
    let cfg = resolve(config, ov, Some(stream.seed()))?;
    let period_ps = cfg.simulation.pulses().period_ps();
    let (h, fit) = lifetime_analysis(&stream, period_ps, cfg.analysis.decay_bin_ps)?;
    let summary = serde_json::to_value(&fit).map_err(gcavity::Error::from)?;

    let mut out = Outputs::new(&cfg.outputs.directory)?;
    out.write("lifetime_decay.csv", |w| write_decay_csv(&h, w))?;
    out.json("lifetime_summary.json", &summary)?;
    write_sidecar(
        &mut out,
        "lifetime",
        RunRecord {
            command: "lifetime",
            cfg: &cfg,
            rerun: vec![input.to_string_lossy().into_owned()],
            rep_period_ns: Some(cfg.simulation.rep_period_ns),
            inputs: vec![inp],
        },
    )?;
    print_json(&summary);
    check_converged(&summary, "exponential decay")
}

fn cmd_fit(problem: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let text = fs::read_to_string(problem)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", problem.display())))?;
    let problem: FitProblem = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("invalid fit problem {}: {e}", problem.display())))?;
    let result = lm_fit(&problem)?;
    let v = serde_json::to_value(&result).map_err(gcavity::Error::from)?;
    if let Some(path) = output {
        let body = serde_json::to_string_pretty(&v).map_err(gcavity::Error::from)? + "\n";
        fs::write(path, body).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
    }
    print_json(&v);
    check_converged(&v, &format!("{:?}", result.status))
}

fn cmd_scan_tuning(config: &ConfigArgs, cycles: Option<u32>) -> Result<(), CliError> {
    let mut ov = Overrides::default();
    ov.put_opt("analysis.tuning_cycles", cycles);
    let cfg = resolve(config, ov, None)?;
    let fig = fig4a(&cfg)?;
    let summary = serde_json::to_value(&fig.summary).map_err(gcavity::Error::from)?;
    let mut out = Outputs::new(&cfg.outputs.directory)?;
    out.tables(&fig.tables)?;
    out.json("scan_tuning_summary.json", &summary)?;
    write_sidecar(
        &mut out,
        "scan_tuning",
        RunRecord {
            command: "scan-tuning",
            cfg: &cfg,
            rerun: vec![],
            rep_period_ns: None,
            inputs: vec![],
        },
    )?;
    print_json(&summary);
    Ok(())
}

fn cmd_bands(
    config: &ConfigArgs,
    n_plane_waves: Option<usize>,
    eps: Option<f64>,
    radius_ratio: Option<f64>,
    lattice_constant_nm: Option<f64>,
) -> Result<(), CliError> {
    let mut ov = Overrides::default();
    ov.put_opt("analysis.n_plane_waves", n_plane_waves);
    ov.put_opt("lattice.eps_background", eps);
    ov.put_opt("lattice.hole_radius_ratio", radius_ratio);
    ov.put_opt("lattice.lattice_constant_nm", lattice_constant_nm);
    let cfg = resolve(config, ov, None)?;
    let fig = bands_report(&cfg)?;
    let summary = serde_json::to_value(&fig.summary).map_err(gcavity::Error::from)?;
    let mut out = Outputs::new(&cfg.outputs.directory)?;
    out.tables(&fig.tables)?;
    out.json("bands_summary.json", &summary)?;
    write_sidecar(
        &mut out,
        "bands",
        RunRecord {
            command: "bands",
            cfg: &cfg,
            rerun: vec![],
            rep_period_ns: None,
            inputs: vec![],
        },
    )?;
    print_json(&summary);
    Ok(())
}

fn cmd_purcell(tau_bulk: f64, tau_on: f64, tau_off: f64, eta: f64, as_json: bool) -> Result<(), CliError> {
    let r = purcell_report(tau_bulk, tau_on, tau_off, eta)?;
    if as_json {
        print_json(&serde_json::to_value(&r).map_err(gcavity::Error::from)?);
    } else {
        emit(&format!("Fp   = {:.4}    {}", r.purcell_factor, r.purcell_formula));
        emit(&format!("beta = {:.4}    {}", r.beta, r.beta_formula));
        emit(&format!(
            "with tau_bulk = {} ns, tau_on = {} ns, tau_off = {} ns, eta = {}",
            r.tau_bulk_ns, r.tau_on_ns, r.tau_off_ns, r.eta
        ));
    }
    Ok(())
}

fn cmd_figure(name: &str, config: &ConfigArgs, sim: &SimArgs) -> Result<(), CliError> {
    let figure: FigureName = name.parse()?;
    let mut ov = Overrides::default();
    ov.sim(sim);
    let cfg = resolve(config, ov, None)?;
    let fig = run_figure(figure, &cfg)?;
    let mut out = Outputs::new(&cfg.outputs.directory)?;
    out.tables(&fig.tables)?;
    out.json(&format!("{figure}_summary.json"), &fig.summary)?;
    let rep_period_ns = match figure {
        FigureName::Fig3d => Some(cfg.simulation.rep_period_ns),
        FigureName::Fig4c => Some(cfg.analysis.lifetime_rep_period_ns),
        _ => None,
    };
    write_sidecar(
        &mut out,
        figure.as_str(),
        RunRecord {
            command: "figure",
            cfg: &cfg,
            rerun: vec![figure.to_string()],
            rep_period_ns,
            inputs: vec![],
        },
    )?;
    print_json(&fig.summary);
    check_converged(&fig.summary, figure.as_str())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Input("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("cannot size the worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Simulate { config, sim, ndjson } => cmd_simulate(config, sim, *ndjson),
        Command::Hbt {
            input,
            config,
            bin_ps,
            max_delay_ps,
            signal_fraction,
            rep_period_ns,
        } => cmd_hbt(input, config, *bin_ps, *max_delay_ps, *signal_fraction, *rep_period_ns),
        Command::Lifetime {
            input,
            config,
            bin_ps,
            rep_period_ns,
        } => cmd_lifetime(input, config, *bin_ps, *rep_period_ns),
        Command::Fit { problem, output } => cmd_fit(problem, output.as_deref()),
        Command::ScanTuning { config, cycles } => cmd_scan_tuning(config, *cycles),
        Command::Bands {
            config,
            n_plane_waves,
            eps,
            radius_ratio,
            lattice_constant_nm,
        } => cmd_bands(config, *n_plane_waves, *eps, *radius_ratio, *lattice_constant_nm),
        Command::Purcell {
            tau_bulk,
            tau_on,
            tau_off,
            eta,
            json,
        } => cmd_purcell(*tau_bulk, *tau_on, *tau_off, *eta, *json),
        Command::Figure { name, config, sim } => cmd_figure(name, config, sim),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}
