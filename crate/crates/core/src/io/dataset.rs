//! Curve files and datasets.
//!
//! A curve file is JSON: `{"name": "...", "points": [[x, y], ...]}` with the
//! closing point not repeated, and optionally a `label` and a
//! `parametrization` (`"arc_length"`, the default, or `"uniform"` for points
//! sampled at equispaced spline parameters). A dataset is either a directory
//! of such files, read in file-name order, or a manifest
//! `{"curves": ["a.json", ...]}` with paths relative to the manifest. A
//! directory containing `manifest.json` is read through the manifest.

use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{fit_samples, fit_spline_with, Parametrization, SplineCurve, SplineFit, ThetaBasis, Vec2};

pub const MANIFEST: &str = "manifest.json";
pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpacing {
    #[default]
    ArcLength,
    Uniform,
}

impl SampleSpacing {
    fn is_default(&self) -> bool {
        *self == SampleSpacing::ArcLength
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub name: String,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "SampleSpacing::is_default")]
    pub parametrization: SampleSpacing,
}

impl CurveFile {
    pub fn new(name: impl Into<String>, points: &[Vec2]) -> Self {
        Self {
            name: name.into(),
            points: points.iter().map(|p| [p.x, p.y]).collect(),
            label: None,
            parametrization: SampleSpacing::ArcLength,
        }
    }

    /// `count` samples of a spline at equispaced parameters.
    pub fn from_curve(name: impl Into<String>, curve: &SplineCurve, count: usize) -> Self {
        Self {
            parametrization: SampleSpacing::Uniform,
            ..Self::new(name, &curve.sample(count))
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn vertices(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| Vec2::new(p[0], p[1])).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points.len();
        if n < MIN_POINTS {
            return Err(Error::invalid(format!(
                "curve '{}' has {n} points, at least {MIN_POINTS} are required",
                self.name
            )));
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("curve '{}' has non-finite coordinates", self.name)));
        }
        if self.points[0] == self.points[n - 1] {
            return Err(Error::invalid(format!(
                "curve '{}' repeats its first point at the end",
                self.name
            )));
        }
        Ok(())
    }

    /// Cubic periodic spline fit with `num_controls` controls.
    pub fn fit(&self, num_controls: usize) -> Result<SplineFit> {
        self.validate()?;
        let basis = ThetaBasis::cubic(num_controls)?;
        let points = self.vertices();
        match self.parametrization {
            SampleSpacing::ArcLength => fit_spline_with(&points, basis, Parametrization::ArcLength),
            SampleSpacing::Uniform => {
                let m = points.len();
                let params: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
                fit_samples(&params, &points, basis)
            }
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let read = || -> Result<Self> {
            let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            c.validate()?;
            Ok(c)
        };
        read().map_err(|e| e.in_file(path))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::write_json(path, self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub curves: Vec<PathBuf>,
}

/// Fitted curves with their names and optional labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub names: Vec<String>,
    pub labels: Vec<Option<String>>,
    pub curves: Vec<SplineCurve>,
    /// Largest distance from an input point to its fitted spline.
    pub residuals: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Curve files making up a dataset, in dataset order.
pub fn dataset_files(path: &Path) -> Result<Vec<PathBuf>> {
    let manifest = if path.is_dir() {
        let m = path.join(MANIFEST);
        m.is_file().then_some(m)
    } else {
        Some(path.to_path_buf())
    };
    if let Some(m) = manifest {
        let read = || -> Result<Manifest> { Ok(serde_json::from_str(&std::fs::read_to_string(&m)?)?) };
        let list = read().map_err(|e| e.in_file(&m))?;
        let dir = m.parent().unwrap_or(Path::new("."));
        return Ok(list.curves.iter().map(|p| dir.join(p)).collect());
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path).map_err(|e| Error::from(e).in_file(path))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads and fits every curve of a dataset with `num_controls` controls.
pub fn load_dataset(path: &Path, num_controls: usize) -> Result<Dataset> {
    let files = dataset_files(path)?;
    if files.is_empty() {
        return Err(Error::invalid(format!("dataset {} is empty", path.display())));
    }
    let mut data = Dataset {
        names: Vec::new(),
        labels: Vec::new(),
        curves: Vec::new(),
        residuals: Vec::new(),
    };
    for f in &files {
        let file = CurveFile::read(f)?;
        let fit = file.fit(num_controls).map_err(|e| e.in_file(f))?;
        fit.curve.check_regular().map_err(|e| e.in_file(f))?;
        log::info!(
            "{}: fitted {} points, rms residual {:.3e}, max {:.3e}",
            file.name,
            file.points.len(),
            fit.rms_residual,
            fit.max_residual
        );
        if data.names.contains(&file.name) {
            return Err(Error::invalid(format!("duplicate curve name '{}'", file.name)).in_file(f));
        }
        data.names.push(file.name);
        data.labels.push(file.label);
        data.curves.push(fit.curve);
        data.residuals.push(fit.max_residual);
    }
    Ok(data)
}

/// Writes curve files named `<name>.json` and a manifest listing them.
pub fn write_dataset(dir: &Path, files: &[CurveFile]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut list = Vec::with_capacity(files.len());
    for f in files {
        let name = PathBuf::from(format!("{}.json", f.name));
        f.write(&dir.join(&name))?;
        list.push(name);
    }
    super::write_json(&dir.join(MANIFEST), &Manifest { curves: list })
}
