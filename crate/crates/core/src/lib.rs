//! Geodesics and geodesic distances between unparametrized closed plane curves.
//!
//! Paths of curves are discretized as tensor-product B-splines and a relaxed
//! matching functional is minimized: the path energy of a second-order
//! Sobolev metric plus a weighted kernel varifold distance between the path's
//! end curve and the target. The varifold term does not see the
//! parametrization of either curve, so the minimizer approximates a geodesic
//! between the two *shapes*. On top of single matches the crate provides
//! distance matrices, spectral clustering, a Karcher mean and tangent PCA.
//!
//! Module map:
//!
//! * [`spline`]: periodic and clamped B-spline bases, curves, path control
//!   nets, quadrature and least-squares fitting.
//! * [`sobolev`]: the metric, path energy, path length and gradients.
//! * [`varifold`]: kernels, polygonal varifold inner products and gradients.
//! * [`optim`]: L-BFGS with a weak Wolfe line search.
//! * [`matcher`]: the relaxed matching problem, rigid alignment, multigrid.
//! * [`stats`]: distance matrices, clustering, Karcher mean, tangent PCA.
//! * [`io`]: curve files, run configuration, synthetic data, CLI commands.

pub mod error;
pub mod io;
pub mod matcher;
pub mod optim;
pub mod sobolev;
pub mod spline;
pub mod stats;
pub mod varifold;

pub use sobolev::MetricCoefficients;
pub use spline::{PathControlNet, SplineCurve, Vec2};
pub use matcher::{MatchConfig, MatchProblem, MatchResult, RigidMotion};
pub use varifold::VarifoldKernel;

pub use error::{Error, Result};
