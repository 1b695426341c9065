//! The command-line operations, as library functions writing into an output
//! directory.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::dataset::{dataset_files, load_dataset, CurveFile, Dataset};
use super::svg::{grey_ramp, SvgPlot};
use super::synthetic::{generate, SyntheticKind};
use super::{format_float, write_json, write_text};
use crate::error::{Error, Result};
use crate::matcher::{
    geodesic_snapshots, solve_match, LevelReport, MatchLevel, MatchProblem, RigidMotion,
};
use crate::optim::Termination;
use crate::spline::{PathControlNet, SplineCurve};
use crate::stats::{
    compute_pairs, karcher_mean, log_map, principal_geodesic_endpoints, purity, spectral_cluster,
    tangent_pca, DistanceMatrix, EntryFlag, KarcherResult, PairOutcome, PcaResult,
};

pub const TARGET_COLOR: &str = "#1f4fd8";
const DIRECTION_COLORS: [&str; 2] = ["#d62728", "#1f77b4"];
pub const CHECKPOINT: &str = "checkpoint.jsonl";

/// How a command finished. Errors are reported separately.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Results were written but some optimization did not converge.
    NotConverged,
    /// The run stopped before all work was done; it can be resumed.
    Incomplete,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::NotConverged => 2,
            Outcome::Incomplete => 3,
        }
    }

    fn from_converged(ok: bool) -> Self {
        if ok {
            Outcome::Success
        } else {
            Outcome::NotConverged
        }
    }
}

fn prepare(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::from(e).in_file(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedCurve {
    pub name: String,
    pub curve: SplineCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub curve: SplineCurve,
}

/// Contents of `geodesic.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicRecord {
    pub config: RunConfig,
    pub source: NamedCurve,
    pub target: NamedCurve,
    pub net: PathControlNet,
    pub rigid: RigidMotion,
    pub energy: f64,
    pub fidelity: f64,
    pub objective: f64,
    pub distance: f64,
    pub converged: bool,
    pub termination: Termination,
    pub levels: Vec<LevelReport>,
    pub snapshots: Vec<Snapshot>,
}

impl GeodesicRecord {
    pub fn read(path: &Path) -> Result<Self> {
        let read = || -> Result<Self> { Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?) };
        read().map_err(|e| e.in_file(path))
    }

    /// Recomputes the objective of the stored path from the stored target
    /// and configuration.
    pub fn reevaluate(&self) -> Result<f64> {
        let config = self.config.match_config()?;
        let level = MatchLevel::new(&self.target.curve, &config, config.optimizer.finest())?;
        Ok(level.evaluate(&self.net, &self.rigid)?.objective)
    }
}

fn read_curve(path: &Path, n_theta: usize) -> Result<NamedCurve> {
    let file = CurveFile::read(path)?;
    let fit = file.fit(n_theta).map_err(|e| e.in_file(path))?;
    log::info!("{}: fit max residual {:.3e}", file.name, fit.max_residual);
    Ok(NamedCurve {
        name: file.name,
        curve: fit.curve,
    })
}

/// Matches `source` onto `target`; writes `geodesic.json` and `geodesic.svg`.
pub fn cmd_match(source: &Path, target: &Path, config: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(out)?;
    let n_theta = config.discretization.n_theta;
    let (source, target) = (read_curve(source, n_theta)?, read_curve(target, n_theta)?);
    let config = config.resolve(&[source.curve.clone(), target.curve.clone()])?;
    let problem = MatchProblem::new(source.curve.clone(), target.curve.clone(), config.match_config()?)?;
    let result = solve_match(&problem)?;
    let snapshots: Vec<Snapshot> = config
        .snapshots
        .iter()
        .zip(geodesic_snapshots(&result, &config.snapshots))
        .map(|(&t, curve)| Snapshot { t, curve })
        .collect();

    // Snapshots live in the source frame; the target is drawn there too.
    let mut plot = SvgPlot::new();
    for (s, color) in snapshots.iter().zip(grey_ramp(snapshots.len())) {
        plot.curve(&s.curve, &color, 1.5);
    }
    let rigid = result.rigid;
    plot.curve(&target.curve.map_controls(|p| rigid.apply_inverse(p)), TARGET_COLOR, 1.5);
    write_text(&out.join("geodesic.svg"), &plot.render())?;

    let record = GeodesicRecord {
        config,
        source,
        target,
        net: result.net,
        rigid: result.rigid,
        energy: result.energy,
        fidelity: result.fidelity,
        objective: result.objective,
        distance: result.distance,
        converged: result.converged,
        termination: result.termination,
        levels: result.levels,
        snapshots,
    };
    write_json(&out.join("geodesic.json"), &record)?;
    if !record.converged {
        log::warn!("match did not converge: {:?}", record.termination);
    }
    Ok(Outcome::from_converged(record.converged))
}

/// First line of a matrix checkpoint. Entries are only reused when the
/// names and the configuration agree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointHeader {
    names: Vec<String>,
    config: RunConfig,
}

/// Reads the completed entries of a checkpoint. An unparsable last line is
/// an interrupted write and is dropped.
fn read_checkpoint(path: &Path, header: &CheckpointHeader) -> Result<Vec<PairOutcome>> {
    let read = || -> Result<Vec<PairOutcome>> {
        let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
        let Some(first) = lines.first() else {
            return Ok(Vec::new());
        };
        let found: CheckpointHeader = match serde_json::from_str(first) {
            Ok(h) => h,
            Err(_) if lines.len() == 1 => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        if found != *header {
            return Err(Error::invalid(
                "checkpoint was written for different shapes or settings; remove it to start over",
            ));
        }
        let mut done = Vec::new();
        for (k, line) in lines.iter().enumerate().skip(1) {
            match serde_json::from_str::<PairOutcome>(line) {
                Ok(o) => done.push(o),
                Err(_) if k + 1 == lines.len() => log::warn!("dropping incomplete checkpoint line"),
                Err(e) => return Err(e.into()),
            }
        }
        Ok(done)
    };
    read().map_err(|e| e.in_file(path))
}

fn json_line<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string(value)?;
    s.push('\n');
    Ok(s)
}

/// Contents of `matrix.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixReport {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub all_converged: bool,
    pub max_asymmetry: f64,
    pub flags: Vec<Vec<EntryFlag>>,
    /// Directed distances `d(i → j)` before symmetrization.
    pub directed: Vec<Vec<Option<f64>>>,
    pub failures: Vec<PairOutcome>,
}

pub fn write_matrix_csv(path: &Path, names: &[String], m: &DistanceMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(names)?;
    for i in 0..m.len() {
        w.write_record(m.row(i).iter().map(|v| format_float(*v)))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(path, bytes).map_err(|e| Error::from(e).in_file(path))
}

/// Reads a matrix written by [`write_matrix_csv`]: a header of names and
/// one row of values per shape.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, DistanceMatrix)> {
    let read = || -> Result<(Vec<String>, DistanceMatrix)> {
        let mut r = csv::Reader::from_path(path)?;
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let n = names.len();
        let mut values = Vec::with_capacity(n * n);
        for row in r.records() {
            let row = row?;
            if row.len() != n {
                return Err(Error::invalid("matrix rows must have one value per name"));
            }
            for v in row.iter() {
                values.push(
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::invalid(format!("bad matrix entry '{v}'")))?,
                );
            }
        }
        Ok((names, DistanceMatrix::from_values(n, values)?))
    };
    read().map_err(|e| e.in_file(path))
}

/// All pairwise distances of a dataset. Completed entries are appended to
/// `checkpoint.jsonl` as they finish and reused on the next run. With
/// `max_pairs`, at most that many new entries are computed.
pub fn cmd_matrix(
    dataset: &Path,
    config: &RunConfig,
    out: &Path,
    max_pairs: Option<usize>,
) -> Result<Outcome> {
    prepare(out)?;
    let data = load_dataset(dataset, config.discretization.n_theta)?;
    if data.len() < 2 {
        return Err(Error::invalid("a distance matrix needs at least two shapes"));
    }
    let config = config.resolve(&data.curves)?;
    let match_config = config.match_config()?;
    let header = CheckpointHeader {
        names: data.names.clone(),
        config: config.clone(),
    };
    let checkpoint = out.join(CHECKPOINT);
    let done = if checkpoint.is_file() {
        read_checkpoint(&checkpoint, &header)?
    } else {
        Vec::new()
    };
    if !done.is_empty() {
        log::info!("resuming with {} completed entries", done.len());
    }
    // Rewrite the checkpoint so an interrupted last line is not extended.
    let mut text = json_line(&header)?;
    for o in &done {
        text.push_str(&json_line(o)?);
    }
    write_text(&checkpoint, &text)?;
    let file = OpenOptions::new()
        .append(true)
        .open(&checkpoint)
        .map_err(|e| Error::from(e).in_file(&checkpoint))?;
    let sink = Mutex::new(file);
    let write_error = Mutex::new(None);
    let outcomes = compute_pairs(&data.curves, &match_config, &done, max_pairs, |o| {
        let line = json_line(o).expect("outcomes serialize");
        let mut f = sink.lock().expect("checkpoint lock");
        if let Err(e) = f.write_all(line.as_bytes()).and_then(|_| f.flush()) {
            write_error.lock().expect("error lock").get_or_insert(e);
        }
    });
    if let Some(e) = write_error.into_inner().expect("error lock") {
        return Err(Error::from(e).in_file(&checkpoint));
    }
    let n = data.len();
    if outcomes.len() < n * (n - 1) {
        log::info!("{} of {} entries done; run again to resume", outcomes.len(), n * (n - 1));
        return Ok(Outcome::Incomplete);
    }
    // Completion order depends on scheduling; store the finished checkpoint
    // in row-major order.
    let mut text = json_line(&header)?;
    for o in &outcomes {
        text.push_str(&json_line(o)?);
    }
    write_text(&checkpoint, &text)?;
    let m = DistanceMatrix::from_outcomes(n, &outcomes)?;
    write_matrix_csv(&out.join("matrix.csv"), &data.names, &m)?;
    let report = MatrixReport {
        config,
        names: data.names.clone(),
        all_converged: m.all_converged(),
        max_asymmetry: m.max_asymmetry(),
        flags: (0..n).map(|i| (0..n).map(|j| m.flag(i, j)).collect()).collect(),
        directed: (0..n).map(|i| (0..n).map(|j| m.raw(i, j)).collect()).collect(),
        failures: outcomes.into_iter().filter(|o| o.error.is_some()).collect(),
    };
    write_json(&out.join("matrix.json"), &report)?;
    Ok(Outcome::from_converged(report.all_converged))
}

/// Contents of `clusters.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterReport {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub labels: Vec<usize>,
    pub components: usize,
    pub disconnected: bool,
    /// Agreement with the dataset labels, when they were given.
    pub purity: Option<f64>,
    pub embedding: Vec<Vec<f64>>,
}

/// Labels of the curve files of a dataset, keyed by curve name.
fn dataset_labels(path: &Path) -> Result<HashMap<String, String>> {
    let mut out = HashMap::new();
    for f in dataset_files(path)? {
        let c = CurveFile::read(&f)?;
        if let Some(l) = c.label {
            out.insert(c.name, l);
        }
    }
    Ok(out)
}

/// Spectral clustering of a matrix written by `matrix`. `truth` is a dataset
/// whose labels are compared with the clusters.
pub fn cmd_cluster(
    matrix: &Path,
    config: &RunConfig,
    truth: Option<&Path>,
    out: &Path,
) -> Result<Outcome> {
    config.validate()?;
    prepare(out)?;
    let (names, d) = read_matrix_csv(matrix)?;
    let c = spectral_cluster(&d, config.cluster.p, config.cluster.k, config.seed)?;
    let purity = match truth {
        None => None,
        Some(path) => {
            let labels = dataset_labels(path)?;
            let mut ids: Vec<String> = Vec::new();
            let mut truth = Vec::with_capacity(names.len());
            for name in &names {
                let l = labels
                    .get(name)
                    .ok_or_else(|| Error::invalid(format!("no label for '{name}'")))?;
                let id = ids.iter().position(|x| x == l).unwrap_or_else(|| {
                    ids.push(l.clone());
                    ids.len() - 1
                });
                truth.push(id);
            }
            Some(purity(&c.labels, &truth))
        }
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "label"])?;
    for (name, l) in names.iter().zip(&c.labels) {
        w.write_record([name.as_str(), &l.to_string()])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let path = out.join("clusters.csv");
    std::fs::write(&path, bytes).map_err(|e| Error::from(e).in_file(&path))?;
    write_json(
        &out.join("clusters.json"),
        &ClusterReport {
            config: config.clone(),
            names,
            labels: c.labels,
            components: c.components,
            disconnected: c.disconnected,
            purity,
            embedding: c.embedding,
        },
    )?;
    Ok(Outcome::Success)
}

/// Contents of `mean.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanReport {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub result: KarcherResult,
}

fn compute_mean(dataset: &Path, config: &RunConfig) -> Result<(RunConfig, Dataset, KarcherResult)> {
    let data = load_dataset(dataset, config.discretization.n_theta)?;
    let config = config.resolve(&data.curves)?;
    let result = karcher_mean(&data.curves, &config.match_config()?)?;
    if !result.converged {
        log::warn!("Karcher mean did not converge: {:?}", result.termination);
    }
    Ok((config, data, result))
}

fn mean_plot(data: &Dataset, mean: &SplineCurve) -> SvgPlot {
    let mut plot = SvgPlot::new();
    for c in &data.curves {
        plot.curve(c, "#c8c8c8", 1.0);
    }
    plot.curve(mean, "#000000", 2.5);
    plot
}

/// Karcher mean of a dataset: `mean.json`, `mean_curve.json`, `mean.svg`.
pub fn cmd_mean(dataset: &Path, config: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(out)?;
    let (config, data, result) = compute_mean(dataset, config)?;
    CurveFile::from_curve("mean", &result.mean, 4 * result.mean.num_controls())
        .write(&out.join("mean_curve.json"))?;
    write_text(&out.join("mean.svg"), &mean_plot(&data, &result.mean).render())?;
    let ok = result.converged;
    write_json(
        &out.join("mean.json"),
        &MeanReport {
            config,
            names: data.names,
            result,
        },
    )?;
    Ok(Outcome::from_converged(ok))
}

/// Contents of `pca.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaReport {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub mean_converged: bool,
    pub distances: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub pca: PcaResult,
}

/// Tangent PCA at the Karcher mean: `pca.json`, `scores.csv` and `pca.svg`
/// with the mean and curves displaced along the first two directions.
pub fn cmd_pca(dataset: &Path, config: &RunConfig, out: &Path) -> Result<Outcome> {
    prepare(out)?;
    let (config, data, mean) = compute_mean(dataset, config)?;
    let vectors: Vec<_> = mean.paths.iter().map(log_map).collect();
    let pca = tangent_pca(&mean.mean, &vectors, &config.metric)?;
    let shown = config.pca.components.min(pca.directions.len());

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut head = vec!["name".to_string()];
    head.extend((1..=shown).map(|m| format!("pc{m}")));
    w.write_record(&head)?;
    for (name, s) in data.names.iter().zip(&pca.scores) {
        let mut row = vec![name.clone()];
        row.extend(s[..shown].iter().map(|v| format_float(*v)));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    let path = out.join("scores.csv");
    std::fs::write(&path, bytes).map_err(|e| Error::from(e).in_file(&path))?;

    let mut plot = SvgPlot::new();
    plot.curve(&pca.mean, "#000000", 2.5);
    for (m, color) in DIRECTION_COLORS.iter().enumerate().take(shown) {
        let sd = pca.eigenvalues[m].max(0.0).sqrt();
        let amps: Vec<f64> = config.pca.amplitudes.iter().map(|a| a * sd).collect();
        for c in principal_geodesic_endpoints(&pca, m, &amps)? {
            plot.curve(&c, color, 1.5);
        }
    }
    write_text(&out.join("pca.svg"), &plot.render())?;

    let mut pca = pca;
    pca.directions.truncate(shown);
    let report = PcaReport {
        config,
        names: data.names,
        mean_converged: mean.converged,
        distances: mean.distances,
        explained_variance_ratio: pca.explained_variance_ratio(),
        pca,
    };
    write_json(&out.join("pca.json"), &report)?;
    Ok(Outcome::from_converged(report.mean_converged))
}

/// Writes a synthetic dataset (curve files plus manifest) into `out`.
pub fn cmd_gen_synthetic(kind: SyntheticKind, count: usize, seed: u64, out: &Path) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::invalid("count must be positive"));
    }
    let files = generate(kind, seed, count);
    super::dataset::write_dataset(out, &files)?;
    Ok(files.iter().map(|f| out.join(format!("{}.json", f.name))).collect())
}
