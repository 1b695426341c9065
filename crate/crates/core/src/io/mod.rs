//! Curve files, run configuration, synthetic data, plots and the
//! command-line operations.
//!
//! All JSON is pretty-printed by `serde_json` (shortest round-trip float
//! representation); CSV values use 17 significant digits. Outputs contain no
//! timings, so repeated runs produce identical bytes.

pub mod commands;
mod config;
mod dataset;
mod svg;
mod synthetic;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use commands::{
    cmd_cluster, cmd_gen_synthetic, cmd_match, cmd_matrix, cmd_mean, cmd_pca, read_matrix_csv,
    write_matrix_csv, GeodesicRecord, Outcome,
};
pub use config::{
    ClusterOptions, KernelSpec, PcaOptions, RadialKind, RunConfig, SolverOptions,
    DEFAULT_SIGMA_FRACTION,
};
pub use dataset::{
    dataset_files, load_dataset, write_dataset, CurveFile, Dataset, Manifest, SampleSpacing,
    MANIFEST, MIN_POINTS,
};
pub use svg::{grey_ramp, SvgPlot};
pub use synthetic::{generate, three_classes, wings, SyntheticKind, SYNTHETIC_POINTS};

/// Canonical text form of a number in CSV output.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::from(e).in_file(path))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}
