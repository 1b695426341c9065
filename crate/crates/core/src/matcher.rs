//! Relaxed geodesic matching between a source and a target curve.
//!
//! The path `c` starts at the fixed source curve and is free at `t = 1`. The
//! objective is
//!
//! ```text
//! E(c) + λ · d_Var(c(1), g⁻¹ · c₁)²
//! ```
//!
//! where `g = (A(φ), b)` is an optional rigid motion and `g⁻¹ · x = Aᵀ(x − b)`.
//! With this convention the reported motion maps the end of the path onto
//! the target, so a target translated by `b` is recovered as `b`.
//!
//! Optimization starts from the constant path on the coarsest level of the
//! multigrid schedule; each finer level starts from the previous solution,
//! re-fitted onto the finer bases.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, Dyn, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{self, IterationRecord, LbfgsSettings, Termination};
use crate::sobolev::{MetricCoefficients, PathEnergy, SobolevMetric};
use crate::spline::{make_bases, PathControlNet, SplineCurve, ThetaBasis, TimeBasis, Vec2};
use crate::varifold::{
    varifold_inner, varifold_inner_vertex_grad, varifold_inner_vertex_grads, PolygonSampler,
    PolygonalCurve, VarifoldKernel,
};

pub const DEFAULT_LAMBDA: f64 = 5.0;

/// Orientation-preserving rigid motion `x ↦ A(φ) x + b`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidMotion {
    pub angle: f64,
    pub translation: Vec2,
}

impl RigidMotion {
    pub fn new(angle: f64, translation: Vec2) -> Self {
        Self { angle, translation }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        let (s, c) = self.angle.sin_cos();
        Matrix2::new(c, -s, s, c)
    }

    pub fn apply(&self, p: &Vec2) -> Vec2 {
        self.rotation() * p + self.translation
    }

    pub fn apply_inverse(&self, p: &Vec2) -> Vec2 {
        self.rotation().transpose() * (p - self.translation)
    }

    pub fn apply_curve(&self, c: &SplineCurve) -> SplineCurve {
        let a = self.rotation();
        c.map_controls(|p| a * p + self.translation)
    }
}

/// Sizes of one discretization level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    pub n_t: usize,
    pub n_theta: usize,
    /// Polygon vertices used for the varifold term.
    pub polygon_samples: usize,
}

impl Default for Discretization {
    fn default() -> Self {
        Self::new(10, 40, 100)
    }
}

impl Discretization {
    pub const fn new(n_t: usize, n_theta: usize, polygon_samples: usize) -> Self {
        Self {
            n_t,
            n_theta,
            polygon_samples,
        }
    }

    pub fn bases(&self) -> Result<(TimeBasis, ThetaBasis)> {
        make_bases(self.n_t, self.n_theta)
    }

    pub fn validate(&self) -> Result<()> {
        self.bases()?;
        if self.polygon_samples < 3 {
            return Err(Error::invalid("polygon_samples must be at least 3"));
        }
        Ok(())
    }

    fn refines(&self, coarse: &Discretization) -> bool {
        self.n_t >= coarse.n_t
            && self.n_theta >= coarse.n_theta
            && self.polygon_samples >= coarse.polygon_samples
            && self != coarse
    }
}

/// Quasi-Newton settings and the multigrid schedule, coarse to fine.
/// `g_tol` is relative to the gradient norm at the constant path of each
/// level; `g_tol_floor` is an absolute lower bound on the resulting
/// tolerance, which matters when the start is already optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSettings {
    #[serde(flatten)]
    pub lbfgs: LbfgsSettings,
    pub g_tol_floor: f64,
    pub levels: Vec<Discretization>,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            lbfgs: LbfgsSettings::default(),
            g_tol_floor: 1e-10,
            levels: vec![Discretization::new(5, 20, 50), Discretization::default()],
        }
    }
}

impl OptimizerSettings {
    pub fn single_level(level: Discretization) -> Self {
        Self {
            levels: vec![level],
            ..Default::default()
        }
    }

    pub fn finest(&self) -> Discretization {
        *self.levels.last().expect("validated schedule is non-empty")
    }

    pub fn validate(&self) -> Result<()> {
        self.lbfgs.validate()?;
        if self.g_tol_floor.is_nan() || self.g_tol_floor < 0.0 {
            return Err(Error::invalid("g_tol_floor must be non-negative"));
        }
        if self.levels.is_empty() {
            return Err(Error::invalid("multigrid schedule is empty"));
        }
        for l in &self.levels {
            l.validate()?;
        }
        if self.levels.windows(2).any(|w| !w[1].refines(&w[0])) {
            return Err(Error::invalid("multigrid levels must increase in resolution"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub metric: MetricCoefficients,
    pub kernel: VarifoldKernel,
    pub lambda: f64,
    pub rigid: bool,
    pub optimizer: OptimizerSettings,
}

impl MatchConfig {
    /// Default metric, `λ`, schedule and no rigid alignment.
    pub fn new(kernel: VarifoldKernel) -> Self {
        Self {
            metric: MetricCoefficients::default(),
            kernel,
            lambda: DEFAULT_LAMBDA,
            rigid: false,
            optimizer: OptimizerSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.metric.validate()?;
        self.kernel.validate()?;
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid("lambda must be positive"));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone)]
pub struct MatchProblem {
    pub source: SplineCurve,
    pub target: SplineCurve,
    pub config: MatchConfig,
}

impl MatchProblem {
    pub fn new(source: SplineCurve, target: SplineCurve, config: MatchConfig) -> Result<Self> {
        config.validate()?;
        source.check_regular()?;
        target.check_regular()?;
        Ok(Self {
            source,
            target,
            config,
        })
    }

    /// Objective pieces on the finest level.
    pub fn finest_level(&self) -> Result<MatchLevel> {
        MatchLevel::new(&self.target, &self.config, self.config.optimizer.finest())
    }

    /// Source curve expressed on the θ-basis of a level.
    pub fn source_at(&self, level: &MatchLevel) -> Result<SplineCurve> {
        on_basis(&self.source, level.theta)
    }
}

pub(crate) fn on_basis(c: &SplineCurve, basis: ThetaBasis) -> Result<SplineCurve> {
    if *c.basis() == basis {
        Ok(c.clone())
    } else {
        c.refit(basis)
    }
}

/// Value and gradient of the relaxed objective at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub energy: f64,
    pub fidelity: f64,
    pub objective: f64,
    /// Gradient with respect to every control of the net, row-major.
    /// Row `0` is included for callers that move the source.
    pub net_grad: Vec<Vec2>,
    /// Gradient with respect to `(φ, b_x, b_y)`.
    pub rigid_grad: [f64; 3],
}

/// The objective on one discretization level for a fixed target.
#[derive(Debug, Clone)]
pub struct MatchLevel {
    pub discretization: Discretization,
    time: TimeBasis,
    theta: ThetaBasis,
    energy: PathEnergy,
    sampler: PolygonSampler,
    kernel: VarifoldKernel,
    lambda: f64,
    rigid: bool,
    target_vertices: Vec<Vec2>,
    target_self: f64,
}

impl MatchLevel {
    pub fn new(target: &SplineCurve, config: &MatchConfig, d: Discretization) -> Result<Self> {
        d.validate()?;
        let (time, theta) = d.bases()?;
        let target = on_basis(target, theta)?;
        let sampler = PolygonSampler::new(theta, d.polygon_samples)?;
        let target_polygon = sampler.polygon(target.controls())?;
        let target_self = varifold_inner(&target_polygon, &target_polygon, &config.kernel);
        Ok(Self {
            discretization: d,
            time,
            theta,
            energy: PathEnergy::new(time, theta, config.metric),
            sampler,
            kernel: config.kernel,
            lambda: config.lambda,
            rigid: config.rigid,
            target_vertices: target_polygon.vertices().to_vec(),
            target_self,
        })
    }

    pub fn time_basis(&self) -> &TimeBasis {
        &self.time
    }

    pub fn theta_basis(&self) -> &ThetaBasis {
        &self.theta
    }

    pub fn rigid_enabled(&self) -> bool {
        self.rigid
    }

    pub fn path_energy(&self) -> &PathEnergy {
        &self.energy
    }

    /// Target polygon pulled back by the rigid motion.
    pub fn target_polygon(&self, rigid: &RigidMotion) -> Result<PolygonalCurve> {
        if *rigid == RigidMotion::identity() {
            return PolygonalCurve::new(self.target_vertices.clone());
        }
        PolygonalCurve::new(self.target_vertices.iter().map(|v| rigid.apply_inverse(v)).collect())
    }

    pub fn fidelity(&self, end: &[Vec2], rigid: &RigidMotion) -> Result<f64> {
        let p1 = self.sampler.polygon(end)?;
        let p2 = self.target_polygon(rigid)?;
        let d = varifold_inner(&p1, &p1, &self.kernel) - 2.0 * varifold_inner(&p1, &p2, &self.kernel)
            + self.target_self;
        Ok(d.max(0.0))
    }

    pub fn evaluate(&self, net: &PathControlNet, rigid: &RigidMotion) -> Result<Evaluation> {
        let (report, mut net_grad) = self.energy.gradient(net)?;
        let last = net.num_time() - 1;
        let p1 = self.sampler.polygon(net.row(last))?;
        let p2 = self.target_polygon(rigid)?;
        let (a11, g11) = varifold_inner_vertex_grad(&p1, &p1, &self.kernel);
        let (a12, g12, g21) = varifold_inner_vertex_grads(&p1, &p2, &self.kernel);
        let fidelity = (a11 - 2.0 * a12 + self.target_self).max(0.0);

        let lam = self.lambda;
        let vertex_grad: Vec<Vec2> = g11
            .iter()
            .zip(&g12)
            .map(|(s, c)| (s - c) * (2.0 * lam))
            .collect();
        let n = net.num_theta();
        self.sampler
            .pullback(&vertex_grad, &mut net_grad[last * n..(last + 1) * n]);

        let mut rigid_grad = [0.0; 3];
        if self.rigid {
            // w = Aᵀ(v − b): ∂w/∂φ = −J w, ∂w/∂b = −Aᵀ.
            let a = rigid.rotation();
            let mut db = Vec2::zeros();
            for (w, g) in p2.vertices().iter().zip(&g21) {
                let gw = g * (-2.0 * lam);
                rigid_grad[0] += gw.dot(&Vec2::new(w.y, -w.x));
                db -= a * gw;
            }
            rigid_grad[1] = db.x;
            rigid_grad[2] = db.y;
        }
        Ok(Evaluation {
            energy: report.energy,
            fidelity,
            objective: report.energy + lam * fidelity,
            net_grad,
            rigid_grad,
        })
    }

    /// Objective and gradient over the free variables: rows `1..N_t` of the
    /// net, followed by `(φ, b_x, b_y)` when rigid alignment is enabled.
    pub fn objective_and_gradient(
        &self,
        net: &PathControlNet,
        rigid: &RigidMotion,
    ) -> Result<(f64, Vec<f64>)> {
        let e = self.evaluate(net, rigid)?;
        let n = net.num_theta();
        let mut g = Vec::with_capacity(self.num_variables());
        for v in &e.net_grad[n..] {
            g.extend([v.x, v.y]);
        }
        if self.rigid {
            g.extend(e.rigid_grad);
        }
        Ok((e.objective, g))
    }

    pub fn num_variables(&self) -> usize {
        2 * (self.time.num_controls() - 1) * self.theta.num_controls()
            + if self.rigid { 3 } else { 0 }
    }

    pub fn pack(&self, net: &PathControlNet, rigid: &RigidMotion) -> Vec<f64> {
        let n = net.num_theta();
        let mut x = Vec::with_capacity(self.num_variables());
        for v in &net.controls()[n..] {
            x.extend([v.x, v.y]);
        }
        if self.rigid {
            x.extend([rigid.angle, rigid.translation.x, rigid.translation.y]);
        }
        x
    }

    /// Writes the variables into `net` (row `0` untouched) and returns the
    /// rigid motion.
    pub fn unpack(&self, x: &[f64], net: &mut PathControlNet) -> RigidMotion {
        let n = net.num_theta();
        let free = &mut net.controls_mut()[n..];
        for (v, xy) in free.iter_mut().zip(x.chunks_exact(2)) {
            *v = Vec2::new(xy[0], xy[1]);
        }
        if self.rigid {
            let r = &x[2 * free.len()..];
            RigidMotion::new(r[0], Vec2::new(r[1], r[2]))
        } else {
            RigidMotion::identity()
        }
    }
}

/// `K_ik = 2 ∫ B_i'(t) B_k'(t) dt` on the time quadrature of `energy`.
pub fn time_stiffness(energy: &PathEnergy) -> DMatrix<f64> {
    let quad = &energy.quadrature().time;
    let nt = quad.basis().num_controls();
    let mut k = DMatrix::zeros(nt, nt);
    for (q, w) in quad.weights.iter().enumerate() {
        let site: Vec<(usize, f64)> = quad.site(q).map(|(i, _, db)| (i, db)).collect();
        for &(i, di) in &site {
            for &(j, dj) in &site {
                k[(i, j)] += 2.0 * w * di * dj;
            }
        }
    }
    k
}

/// Inverse of the energy Hessian at the constant path through a curve,
/// `2 K ⊗ M`, where `K_ik = ∫ B_i' B_k' dt` over the free time rows and `M`
/// is the Gram matrix of the metric at the curve. Rigid parameters are left
/// unscaled.
#[derive(Debug, Clone)]
pub struct Preconditioner {
    time: Cholesky<f64, Dyn>,
    theta: Cholesky<f64, Dyn>,
    rows: usize,
    n: usize,
}

impl Preconditioner {
    /// `first_free` is the first time row that is a variable.
    pub fn new(energy: &PathEnergy, curve: &SplineCurve, first_free: usize) -> Result<Self> {
        let k = time_stiffness(energy);
        let rows = k.nrows() - first_free;
        let k = k.view((first_free, first_free), (rows, rows)).into_owned();
        let m = SobolevMetric::new(*curve.basis(), *energy.coefficients()).gram(curve)?;
        Self::from_parts(k, m)
    }

    /// Inverse of `K ⊗ M` for explicit symmetric positive definite factors.
    pub fn from_parts(k: DMatrix<f64>, m: DMatrix<f64>) -> Result<Self> {
        let singular = || Error::invalid("energy Hessian is not positive definite");
        let (rows, n) = (k.nrows(), m.nrows());
        Ok(Self {
            time: Cholesky::new(k).ok_or_else(singular)?,
            theta: Cholesky::new(m).ok_or_else(singular)?,
            rows,
            n,
        })
    }

    /// Number of leading entries the preconditioner acts on.
    pub fn len(&self) -> usize {
        2 * self.rows * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Applies the inverse to a gradient laid out as `rows × n` points,
    /// followed by any number of unscaled entries.
    pub fn apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = g.to_vec();
        self.apply_in_place(g, &mut out);
        out
    }

    /// Writes the preconditioned leading block of `g` into `out`.
    pub fn apply_in_place(&self, g: &[f64], out: &mut [f64]) {
        let (rows, n) = (self.rows, self.n);
        for coord in 0..2 {
            let x = DMatrix::from_fn(rows, n, |i, j| g[2 * (i * n + j) + coord]);
            let y = self.time.solve(&x);
            let z = self.theta.solve(&y.transpose());
            for i in 0..rows {
                for j in 0..n {
                    out[2 * (i * n + j) + coord] = z[(j, i)];
                }
            }
        }
    }
}

/// Outcome of the optimization on one level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub discretization: Discretization,
    pub iterations: usize,
    pub evaluations: usize,
    pub objective: f64,
    pub grad_norm: f64,
    /// Absolute gradient tolerance used on this level.
    pub g_tol: f64,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchResult {
    pub net: PathControlNet,
    pub rigid: RigidMotion,
    pub energy: f64,
    pub fidelity: f64,
    pub objective: f64,
    /// Riemannian length of the optimal path.
    pub distance: f64,
    pub converged: bool,
    pub termination: Termination,
    pub levels: Vec<LevelReport>,
    /// Seconds for the whole schedule.
    #[serde(skip)]
    pub wall_time: f64,
}

impl MatchResult {
    pub fn iterations(&self) -> usize {
        self.levels.iter().map(|l| l.iterations).sum()
    }

    pub fn fine_iterations(&self) -> usize {
        self.levels.last().map_or(0, |l| l.iterations)
    }

    /// Gradient norms of accepted iterates on the finest level.
    pub fn gradient_norms(&self) -> Vec<f64> {
        self.levels
            .last()
            .map(|l| l.history.iter().map(|h| h.grad_norm).collect())
            .unwrap_or_default()
    }
}

/// Initial rigid motion: the one translating the target centroid onto the
/// source centroid.
pub fn initial_rigid(source: &SplineCurve, target: &SplineCurve) -> RigidMotion {
    RigidMotion::new(0.0, target.centroid() - source.centroid())
}

/// Carries a path onto finer bases, keeping `source` as its first row. The
/// displacement from the constant path is re-fitted, so a constant path
/// stays exactly constant.
pub fn prolong(
    net: &PathControlNet,
    time: TimeBasis,
    source: &SplineCurve,
) -> Result<PathControlNet> {
    let coarse_source = net.row(0).to_vec();
    let n = net.num_theta();
    let displacement = PathControlNet::new(
        *net.time_basis(),
        *net.theta_basis(),
        net.controls()
            .iter()
            .enumerate()
            .map(|(k, c)| c - coarse_source[k % n])
            .collect(),
    )?;
    let fine = displacement.refit(time, *source.basis())?;
    let mut out = PathControlNet::constant(time, source);
    let m = source.num_controls();
    for (k, (o, d)) in out.controls_mut().iter_mut().zip(fine.controls()).enumerate() {
        if k >= m {
            *o += d;
        }
    }
    Ok(out)
}

/// Minimizes the objective of one level from the given state.
pub fn solve_level(
    level: &MatchLevel,
    init: PathControlNet,
    rigid: RigidMotion,
    settings: &OptimizerSettings,
) -> Result<(PathControlNet, RigidMotion, LevelReport)> {
    let start = Instant::now();
    let precond = Preconditioner::new(&level.energy, &init.source(), 1)?;
    let reference = {
        let constant = PathControlNet::constant(*init.time_basis(), &init.source());
        let (_, g) = level.objective_and_gradient(&constant, &rigid)?;
        g.iter().zip(precond.apply(&g)).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt()
    };
    let g_tol = (settings.lbfgs.g_tol * reference).max(settings.g_tol_floor);
    let lbfgs = LbfgsSettings {
        g_tol,
        ..settings.lbfgs
    };

    let mut work = init.clone();
    let x0 = level.pack(&init, &rigid);
    let out = optim::minimize_preconditioned(
        |x| {
            let r = level.unpack(x, &mut work);
            level.objective_and_gradient(&work, &r)
        },
        x0,
        &lbfgs,
        |g| precond.apply(g),
    )?;
    let mut net = init;
    let rigid = level.unpack(&out.x, &mut net);
    let report = LevelReport {
        discretization: level.discretization,
        iterations: out.iterations,
        evaluations: out.evaluations,
        objective: out.f,
        grad_norm: out.grad_norm,
        g_tol,
        termination: out.termination,
        history: out.history,
        wall_time: start.elapsed().as_secs_f64(),
    };
    log::debug!(
        "level {:?}: {} iterations, objective {:.6e}, |g| {:.3e}, {:?}",
        level.discretization,
        report.iterations,
        report.objective,
        report.grad_norm,
        report.termination
    );
    Ok((net, rigid, report))
}

/// Runs the multigrid schedule and returns the finest-level solution.
pub fn solve_match(problem: &MatchProblem) -> Result<MatchResult> {
    let start = Instant::now();
    let config = &problem.config;
    let mut rigid = if config.rigid {
        initial_rigid(&problem.source, &problem.target)
    } else {
        RigidMotion::identity()
    };
    let mut net: Option<PathControlNet> = None;
    let mut reports = Vec::new();
    let mut last_level = None;
    for (index, d) in config.optimizer.levels.iter().enumerate() {
        let at_level = |e: Error| Error::Level {
            level: index,
            source: Box::new(e),
        };
        let level = MatchLevel::new(&problem.target, config, *d).map_err(at_level)?;
        let source = problem.source_at(&level).map_err(at_level)?;
        let init = match &net {
            None => PathControlNet::constant(level.time, &source),
            Some(prev) => prolong(prev, level.time, &source).map_err(at_level)?,
        };
        let (solved, r, report) =
            solve_level(&level, init, rigid, &config.optimizer).map_err(at_level)?;
        net = Some(solved);
        rigid = r;
        reports.push(report);
        last_level = Some(level);
    }
    let (net, level) = (
        net.expect("schedule is non-empty"),
        last_level.expect("schedule is non-empty"),
    );
    let eval = level.evaluate(&net, &rigid)?;
    let distance = level.energy.length(&net)?;
    let termination = reports.last().expect("schedule is non-empty").termination;
    Ok(MatchResult {
        net,
        rigid,
        energy: eval.energy,
        fidelity: eval.fidelity,
        objective: eval.objective,
        distance,
        converged: termination == Termination::GradientTolerance,
        termination,
        levels: reports,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Curves of the optimal path at the given times.
pub fn geodesic_snapshots(result: &MatchResult, times: &[f64]) -> Vec<SplineCurve> {
    times.iter().map(|&t| result.net.curve_at(t)).collect()
}
