//! End-to-end experiment pipelines. Each figure function returns a typed
//! summary plus plot-ready tables; nothing here touches the filesystem.

mod correlation;
mod lifetime;
mod spectra;
mod structure;

pub use correlation::{fig3c, fig3d, hbt_analysis, Fig3cSummary, Fig3dSummary, HbtSummary};
pub use lifetime::{
    fig4a, fig4b, fig4c, lifetime_analysis, purcell_report, Fig4aSummary, Fig4bSummary, Fig4cSummary,
    LifetimeSummary, PurcellReport,
};
pub use spectra::{fig2c, fig2d, synthetic_fano_spectrum, Fig2cSummary, Fig2dSummary};
pub use structure::{bands_report, BandsSummary};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cavity::enhancement_at_detuning;
use crate::config::{ExcitationMode, RunConfig};
use crate::emitter::{add_background, derive_seed, simulate_cw_sharded, simulate_pulsed};
use crate::error::{Error, Result};
use crate::stream::{Channel, PhotonStream};

/// Stream identifiers fed to [`derive_seed`] so that every random stage of a
/// run draws from its own generator.
pub mod seeds {
    pub const EMISSION: u64 = 1;
    pub const BACKGROUND: u64 = 2;
    pub const DETECTORS: u64 = 3;
    pub const SPECTRUM_NOISE: u64 = 4;
    pub const CAVITY_POLAR: u64 = 5;
    pub const EMITTER_POLAR: u64 = 6;
    pub const LIFETIME: u64 = 7;
}

pub(crate) trait StageExt<T> {
    fn stage(self, name: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, name: &'static str) -> Result<T> {
        self.map_err(|e| e.in_stage(name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            // 17 significant digits round-trip every f64.
            Cell::Float(v) => write!(f, "{v:.16e}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

/// A CSV table destined for `<name>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Index of a column by header name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::to_string).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }
}

/// A typed summary with its tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure<S> {
    pub summary: S,
    pub tables: Vec<Table>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureName {
    Fig2c,
    Fig2d,
    Fig3c,
    Fig3d,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl FigureName {
    pub const ALL: [FigureName; 7] = [
        FigureName::Fig2c,
        FigureName::Fig2d,
        FigureName::Fig3c,
        FigureName::Fig3d,
        FigureName::Fig4a,
        FigureName::Fig4b,
        FigureName::Fig4c,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FigureName::Fig2c => "fig2c",
            FigureName::Fig2d => "fig2d",
            FigureName::Fig3c => "fig3c",
            FigureName::Fig3d => "fig3d",
            FigureName::Fig4a => "fig4a",
            FigureName::Fig4b => "fig4b",
            FigureName::Fig4c => "fig4c",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::domain("figure", format!("unknown figure `{s}`; expected one of fig2c, fig2d, fig3c, fig3d, fig4a, fig4b, fig4c")))
    }
}

/// Output of [`run_figure`] with the summary already in JSON form.
#[derive(Debug, Clone, PartialEq)]
pub struct FigureOutput {
    pub name: FigureName,
    pub summary: serde_json::Value,
    pub tables: Vec<Table>,
}

fn erase<S: Serialize>(name: FigureName, fig: Figure<S>) -> Result<FigureOutput> {
    Ok(FigureOutput {
        name,
        summary: serde_json::to_value(&fig.summary)?,
        tables: fig.tables,
    })
}

pub fn run_figure(name: FigureName, cfg: &RunConfig) -> Result<FigureOutput> {
    cfg.validate()?;
    match name {
        FigureName::Fig2c => erase(name, fig2c(cfg)?),
        FigureName::Fig2d => erase(name, fig2d(cfg)?),
        FigureName::Fig3c => erase(name, fig3c(cfg)?),
        FigureName::Fig3d => erase(name, fig3d(cfg)?),
        FigureName::Fig4a => erase(name, fig4a(cfg)?),
        FigureName::Fig4b => erase(name, fig4b(cfg)?),
        FigureName::Fig4c => erase(name, fig4c(cfg)?),
    }
}

/// Counts/s of a stream over its whole duration.
pub(crate) fn rate_cps(count: usize, duration_ps: u64) -> f64 {
    if duration_ps == 0 {
        0.0
    } else {
        count as f64 / duration_ps as f64 * 1e12
    }
}

/// Background rate that makes signal a fraction `rho` of all clicks.
pub(crate) fn matching_background_cps(signal_cps: f64, rho: f64) -> f64 {
    signal_cps * (1.0 - rho) / rho
}

/// Emitter photons for the configured excitation, detuning and seed, plus
/// detector background. Without an explicit `detector.background_cps` the
/// background is sized so that signal makes up `analysis.signal_fraction` of
/// the clicks.
pub fn simulate_run(cfg: &RunConfig) -> Result<PhotonStream> {
    let sim = &cfg.simulation;
    let f = enhancement_at_detuning(&cfg.emitter, &cfg.cavity, sim.detuning_nm).stage("enhancement")?;
    let seed = derive_seed(cfg.seed, seeds::EMISSION);
    let signal = match sim.mode {
        ExcitationMode::Cw => simulate_cw_sharded(&cfg.emitter, f, sim.duration_ps, seed, sim.shards),
        ExcitationMode::Pulsed => simulate_pulsed(&cfg.emitter, f, sim.pulses(), seed),
    }
    .stage("simulate")?;
    let background = cfg.detector.background_cps.unwrap_or_else(|| {
        matching_background_cps(rate_cps(signal.len(), signal.duration_ps()), cfg.analysis.signal_fraction)
    });
    let merged = add_background(&signal, background, derive_seed(cfg.seed, seeds::BACKGROUND)).stage("background")?;
    Ok(PhotonStream::from_parts_unchecked(
        merged.tags().to_vec(),
        merged.channels().to_vec(),
        merged.duration_ps(),
        cfg.seed,
    ))
}

/// Fraction of tags not labelled as background.
pub(crate) fn signal_fraction_of(s: &PhotonStream) -> f64 {
    if s.is_empty() {
        return f64::NAN;
    }
    1.0 - s.count_channel(Channel::Background) as f64 / s.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_use_full_precision() {
        assert_eq!(Cell::Float(0.1).to_string(), "1.0000000000000001e-1");
        assert_eq!(Cell::Int(-3).to_string(), "-3");
        let x: f64 = Cell::Float(std::f64::consts::PI).to_string().parse().unwrap();
        assert_eq!(x, std::f64::consts::PI);
    }

    #[test]
    fn table_writes_header_and_rows() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1u64.into(), 0.5.into()]);
        assert_eq!(t.to_csv(), "a,b\n1,5.0000000000000000e-1\n");
        assert_eq!(t.column("b"), Some(1));
    }

    #[test]
    fn figure_names_parse() {
        for n in FigureName::ALL {
            assert_eq!(n.as_str().parse::<FigureName>().unwrap(), n);
        }
        let err = "fig9".parse::<FigureName>().unwrap_err();
        assert!(err.is_invalid_input());
    }

    #[test]
    fn derived_background_hits_the_signal_fraction() {
        let mut cfg = RunConfig::with_seed(5);
        cfg.simulation.duration_ps = 2_000_000_000;
        let s = simulate_run(&cfg).unwrap();
        let rho = signal_fraction_of(&s);
        // ~1.2e5 tags: binomial spread of the label fraction is ~1e-3.
        assert!((rho - 0.837).abs() < 5e-3, "{rho}");
        assert_eq!(s.seed(), 5);
    }

    #[test]
    fn run_is_deterministic() {
        let mut cfg = RunConfig::with_seed(9);
        cfg.simulation.duration_ps = 100_000_000;
        assert_eq!(simulate_run(&cfg).unwrap(), simulate_run(&cfg).unwrap());
    }

    #[test]
    fn stage_names_wrap_errors() {
        let mut cfg = RunConfig::with_seed(1);
        cfg.emitter.debye_waller = 2.0;
        let err = simulate_run(&cfg).unwrap_err();
        assert!(err.to_string().contains("stage `simulate`"), "{err}");
        assert!(err.is_invalid_input());
    }
}
