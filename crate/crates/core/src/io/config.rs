//! Run configuration shared by all commands.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{Discretization, MatchConfig, OptimizerSettings, DEFAULT_LAMBDA};
use crate::optim::LbfgsSettings;
use crate::sobolev::MetricCoefficients;
use crate::spline::SplineCurve;
use crate::varifold::{Radial, VarifoldKernel, Zonal};

/// Kernel scale relative to the mean diameter of the input shapes, used when
/// no `sigma` is configured.
pub const DEFAULT_SIGMA_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RadialKind {
    Gaussian,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSpec {
    pub radial: RadialKind,
    /// `None` means a quarter of the mean shape diameter.
    pub sigma: Option<f64>,
    pub zonal: Zonal,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            radial: RadialKind::Gaussian,
            sigma: None,
            zonal: Zonal::Binomial,
        }
    }
}

impl KernelSpec {
    pub fn kernel(&self, sigma: f64) -> Result<VarifoldKernel> {
        let rho = match self.radial {
            RadialKind::Gaussian => Radial::Gaussian { sigma },
            RadialKind::Cauchy => Radial::Cauchy { sigma },
        };
        VarifoldKernel::new(rho, self.zonal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    #[serde(flatten)]
    pub lbfgs: LbfgsSettings,
    pub g_tol_floor: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        let d = OptimizerSettings::default();
        Self {
            lbfgs: d.lbfgs,
            g_tol_floor: d.g_tol_floor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterOptions {
    /// Neighbours per node in the graph.
    pub p: usize,
    pub k: usize,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        Self { p: 12, k: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaOptions {
    /// Number of principal directions written out.
    pub components: usize,
    /// Displacements along each direction in units of its standard deviation.
    pub amplitudes: Vec<f64>,
}

impl Default for PcaOptions {
    fn default() -> Self {
        Self {
            components: 2,
            amplitudes: vec![-1.0, 1.0],
        }
    }
}

/// Everything needed to reproduce a run. Written back into every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub metric: MetricCoefficients,
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// Finest level; input curves are fitted with `n_theta` controls.
    pub discretization: Discretization,
    /// Coarser levels solved first, coarse to fine.
    pub coarse_levels: Vec<Discretization>,
    pub optimizer: SolverOptions,
    pub rigid: bool,
    pub seed: u64,
    pub cluster: ClusterOptions,
    /// Times at which `match` reports the path.
    pub snapshots: Vec<f64>,
    pub pca: PcaOptions,
}

impl Default for RunConfig {
    fn default() -> Self {
        let levels = OptimizerSettings::default().levels;
        let (fine, coarse) = levels.split_last().expect("default schedule is non-empty");
        Self {
            metric: MetricCoefficients::default(),
            kernel: KernelSpec::default(),
            lambda: DEFAULT_LAMBDA,
            discretization: *fine,
            coarse_levels: coarse.to_vec(),
            optimizer: SolverOptions::default(),
            rigid: false,
            seed: 0,
            cluster: ClusterOptions::default(),
            snapshots: vec![0.0, 0.3, 0.6, 1.0],
            pca: PcaOptions::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let read = || -> Result<Self> {
            let text = std::fs::read_to_string(path)?;
            let c: Self = serde_json::from_str(&text)?;
            c.validate()?;
            Ok(c)
        };
        read().map_err(|e| e.in_file(path))
    }

    pub fn schedule(&self) -> Vec<Discretization> {
        let mut levels = self.coarse_levels.clone();
        levels.push(self.discretization);
        levels
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = self.kernel.sigma {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(format!("kernel sigma must be positive, got {s}")));
            }
        }
        self.build(self.kernel.sigma.unwrap_or(1.0))?;
        if self.cluster.p == 0 || self.cluster.k == 0 {
            return Err(Error::invalid("cluster p and k must be at least 1"));
        }
        if self.snapshots.is_empty() || self.snapshots.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::invalid("snapshot times must lie in [0, 1]"));
        }
        if self.pca.amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::invalid("PCA amplitudes must be finite"));
        }
        Ok(())
    }

    /// Fills in the kernel scale from the shapes if it is not set.
    pub fn resolve(&self, shapes: &[SplineCurve]) -> Result<RunConfig> {
        let mut c = self.clone();
        if c.kernel.sigma.is_none() {
            if shapes.is_empty() {
                return Err(Error::invalid("cannot derive the kernel scale without shapes"));
            }
            let mean = shapes.iter().map(|s| s.diameter()).sum::<f64>() / shapes.len() as f64;
            c.kernel.sigma = Some(DEFAULT_SIGMA_FRACTION * mean);
        }
        c.validate()?;
        Ok(c)
    }

    /// Solver configuration; the kernel scale must be resolved.
    pub fn match_config(&self) -> Result<MatchConfig> {
        let sigma = self
            .kernel
            .sigma
            .ok_or_else(|| Error::invalid("kernel sigma has not been resolved"))?;
        self.build(sigma)
    }

    fn build(&self, sigma: f64) -> Result<MatchConfig> {
        let c = MatchConfig {
            metric: self.metric,
            kernel: self.kernel.kernel(sigma)?,
            lambda: self.lambda,
            rigid: self.rigid,
            optimizer: OptimizerSettings {
                lbfgs: self.optimizer.lbfgs,
                g_tol_floor: self.optimizer.g_tol_floor,
                levels: self.schedule(),
            },
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_defaults() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.schedule(), OptimizerSettings::default().levels);
        c.validate().unwrap();
    }

    #[test]
    fn round_trip_and_partial_fields() {
        let text = r#"{"lambda": 0.3, "kernel": {"sigma": 0.2, "zonal": "squared"},
                       "optimizer": {"max_iterations": 50}, "discretization": {"n_t": 6, "n_theta": 24, "polygon_samples": 60},
                       "coarse_levels": []}"#;
        let c: RunConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.lambda, 0.3);
        assert_eq!(c.optimizer.lbfgs.max_iterations, 50);
        assert_eq!(c.optimizer.lbfgs.memory, LbfgsSettings::default().memory);
        let m = c.match_config().unwrap();
        assert_eq!(m.kernel.gamma, Zonal::Squared);
        assert_eq!(m.optimizer.levels.len(), 1);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn invalid_settings_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"lamda": 1}"#).is_err());
        let bad = [
            RunConfig {
                lambda: -1.0,
                ..Default::default()
            },
            RunConfig {
                coarse_levels: vec![Discretization::new(20, 80, 200)],
                ..Default::default()
            },
            RunConfig {
                snapshots: vec![1.5],
                ..Default::default()
            },
            RunConfig {
                kernel: KernelSpec {
                    sigma: Some(0.0),
                    ..Default::default()
                },
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn sigma_defaults_to_quarter_diameter() {
        let a = SplineCurve::circle(12, Default::default(), 1.0).unwrap();
        let b = SplineCurve::circle(12, Default::default(), 3.0).unwrap();
        let c = RunConfig::default().resolve(&[a.clone(), b.clone()]).unwrap();
        let expect = 0.25 * (a.diameter() + b.diameter()) / 2.0;
        assert_eq!(c.kernel.sigma, Some(expect));
        assert!(RunConfig::default().match_config().is_err());
        // An explicit value is kept.
        let fixed = RunConfig {
            kernel: KernelSpec {
                sigma: Some(0.7),
                ..Default::default()
            },
            ..Default::default()
        };
        assert_eq!(fixed.resolve(&[a]).unwrap().kernel.sigma, Some(0.7));
    }
}
