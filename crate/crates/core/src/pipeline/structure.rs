//! TE band structure of the photonic crystal and where the cavity sits in it.

use serde::Serialize;

use super::{Figure, StageExt, Table};
use crate::bands::{band_structure, find_gap, Gap};
use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandsSummary {
    pub n_plane_waves: usize,
    pub eps_background: f64,
    pub hole_radius_ratio: f64,
    /// Gap between the first and second TE bands, in units of `a/λ`.
    pub gap: Option<Gap>,
    pub gap_to_midgap: Option<f64>,
    pub lattice_constant_nm: f64,
    /// Vacuum wavelengths spanned by the gap for the configured lattice constant.
    pub gap_wavelengths_nm: Option<(f64, f64)>,
    pub resonance_nm: f64,
    pub resonance_in_gap: bool,
    /// Lattice constant placing the cavity resonance at midgap.
    pub calibrated_lattice_constant_nm: Option<f64>,
}

pub fn bands_report(cfg: &RunConfig) -> Result<Figure<BandsSummary>> {
    let a = &cfg.analysis;
    let spec = &cfg.lattice;
    let bs = band_structure(spec, a.n_plane_waves, a.band_samples * 3, a.n_bands).stage("bands")?;
    let gap = find_gap(&bs, 0, 1);
    let lambda = cfg.cavity.resonance_nm;
    let range = gap.map(|g| g.wavelength_range_nm(spec.lattice_constant_nm));

    let n_cols = bs.bands.iter().map(Vec::len).min().unwrap_or(0);
    let mut cols: Vec<String> = ["k_index", "path_fraction", "kx", "ky"].iter().map(|s| s.to_string()).collect();
    cols.extend((0..n_cols).map(|i| format!("band_{i}")));
    let mut table = Table {
        name: "bands".into(),
        columns: cols,
        rows: Vec::new(),
    };
    for (i, (p, f)) in bs.k_path.iter().zip(&bs.bands).enumerate() {
        let mut row = vec![i.into(), p.frac.into(), p.k[0].into(), p.k[1].into()];
        row.extend(f[..n_cols].iter().map(|&v| v.into()));
        table.push(row);
    }
    let summary = BandsSummary {
        n_plane_waves: bs.n_plane_waves,
        eps_background: spec.eps_background,
        hole_radius_ratio: spec.hole_radius_ratio,
        gap_to_midgap: gap.map(|g| g.gap_to_midgap()),
        gap_wavelengths_nm: range,
        resonance_in_gap: range.is_some_and(|(lo, hi)| lambda > lo && lambda < hi),
        calibrated_lattice_constant_nm: gap.map(|g| g.lattice_constant_for(lambda)),
        gap,
        lattice_constant_nm: spec.lattice_constant_nm,
        resonance_nm: lambda,
    };
    Ok(Figure {
        summary,
        tables: vec![table],
    })
}
