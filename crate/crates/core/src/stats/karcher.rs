//! Karcher mean by joint minimization.
//!
//! The mean `c̄` and the paths `c_j` from it minimize
//!
//! ```text
//! Σ_j E(c_j) + λ · d_Var(c_j(1), g_j⁻¹ · shape_j)²
//! ```
//!
//! on the finest level of the configured schedule. Paths are stored as
//! displacements from the mean, so moving the mean carries every path along.
//! The mean moves only along the control normals of its starting curve,
//! `c̄_k = c̄⁰_k + α_k n_k`: tangential control motion merely reparametrizes
//! every path at once and leaves the objective nearly flat. Paths are
//! warm-started from single matches, and the quasi-Newton memory is kept
//! separately for the mean and for each path.
//!
//! Shapes are processed in a canonical order so the result does not depend
//! on the order they are given in.

use std::ops::Range;
use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{
    initial_rigid, on_basis, solve_match, MatchConfig, MatchLevel, MatchProblem, Preconditioner, RigidMotion,
};
use crate::optim::{self, IterationRecord, LbfgsSettings, Termination};
use crate::sobolev::SobolevMetric;
use crate::spline::{PathControlNet, SplineCurve, Vec2};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KarcherResult {
    pub mean: SplineCurve,
    /// Path from the mean to each shape.
    pub paths: Vec<PathControlNet>,
    pub rigid: Vec<RigidMotion>,
    pub energies: Vec<f64>,
    pub fidelities: Vec<f64>,
    /// Riemannian length of each path.
    pub distances: Vec<f64>,
    pub objective: f64,
    /// Iterations of the outer minimization over the mean.
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub history: Vec<IterationRecord>,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Control-wise average of curves on a common basis. Computed as offsets
/// from the first curve so identical inputs average to themselves exactly.
pub fn control_average(curves: &[SplineCurve]) -> Result<SplineCurve> {
    let first = curves
        .first()
        .ok_or_else(|| Error::invalid("cannot average an empty set of curves"))?;
    let n = curves.len() as f64;
    let controls = (0..first.num_controls())
        .map(|j| {
            let base = first.controls()[j];
            let offset: Vec2 = curves.iter().map(|c| c.controls()[j] - base).sum();
            base + offset / n
        })
        .collect();
    SplineCurve::new(*first.basis(), controls)
}

/// Karcher mean of `shapes` with the optimal paths from the mean to each.
pub fn karcher_mean(shapes: &[SplineCurve], config: &MatchConfig) -> Result<KarcherResult> {
    if shapes.is_empty() {
        return Err(Error::invalid("Karcher mean of an empty set"));
    }
    config.validate()?;
    let order = canonical_order(shapes);
    let sorted: Vec<SplineCurve> = order.iter().map(|&j| shapes[j].clone()).collect();
    let mut r = karcher_sorted(&sorted, config)?;
    let mut back = vec![0; order.len()];
    for (pos, &j) in order.iter().enumerate() {
        back[j] = pos;
    }
    let pick = |v: &mut Vec<_>| {
        let old = std::mem::take(v);
        *v = back.iter().map(|&p| old[p]).collect();
    };
    pick(&mut r.energies);
    pick(&mut r.fidelities);
    pick(&mut r.distances);
    let rigid = std::mem::take(&mut r.rigid);
    r.rigid = back.iter().map(|&p| rigid[p]).collect();
    let paths = std::mem::take(&mut r.paths);
    r.paths = back.iter().map(|&p| paths[p].clone()).collect();
    Ok(r)
}

/// Indices sorting the shapes by their control coordinates.
fn canonical_order(shapes: &[SplineCurve]) -> Vec<usize> {
    let key = |c: &SplineCurve| -> Vec<f64> {
        let mut k = vec![c.num_controls() as f64];
        k.extend(c.controls().iter().flat_map(|p| [p.x, p.y]));
        k
    };
    let keys: Vec<Vec<f64>> = shapes.iter().map(key).collect();
    let mut order: Vec<usize> = (0..shapes.len()).collect();
    order.sort_by(|&a, &b| {
        keys[a]
            .iter()
            .zip(&keys[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(keys[a].len().cmp(&keys[b].len()))
    });
    order
}

/// Adds `sign · mean` to every row of a net.
fn shift_rows(net: &PathControlNet, mean: &[Vec2], sign: f64) -> PathControlNet {
    let mut out = net.clone();
    let n = mean.len();
    for (k, c) in out.controls_mut().iter_mut().enumerate() {
        *c += mean[k % n] * sign;
    }
    out
}

fn karcher_sorted(shapes: &[SplineCurve], config: &MatchConfig) -> Result<KarcherResult> {
    let start = Instant::now();
    let d = config.optimizer.finest();
    let levels: Vec<MatchLevel> = shapes
        .iter()
        .map(|s| MatchLevel::new(s, config, d))
        .collect::<Result<_>>()?;
    let (time, theta) = (*levels[0].time_basis(), *levels[0].theta_basis());
    let on_level: Vec<SplineCurve> = shapes
        .iter()
        .map(|s| on_basis(s, theta))
        .collect::<Result<_>>()?;
    let mean0 = match control_average(&on_level) {
        Ok(m) if m.check_regular().is_ok() => m,
        _ => {
            log::warn!("control-point average is degenerate; starting from the first shape");
            on_level[0].clone()
        }
    };
    let n = theta.num_controls();
    let normals = control_normals(&mean0);
    let initial: Vec<RigidMotion> = on_level
        .iter()
        .map(|shape| {
            if config.rigid {
                initial_rigid(&mean0, shape)
            } else {
                RigidMotion::identity()
            }
        })
        .collect();

    // Variables: normal offsets of the mean, then for each shape the path
    // rows 1.. as displacements from the mean and its rigid motion.
    let zero = PathControlNet::constant(time, &mean0.map_controls(|_| Vec2::zeros()));
    let width = levels[0].num_variables();
    let blocks: Vec<Range<usize>> = std::iter::once(0..n)
        .chain((0..shapes.len()).map(|j| n + j * width..n + (j + 1) * width))
        .collect();
    let assemble = |x: &[f64], j: usize, mean: &[Vec2]| {
        let mut delta = zero.clone();
        let rigid = levels[j].unpack(&x[blocks[j + 1].clone()], &mut delta);
        (shift_rows(&delta, mean, 1.0), rigid)
    };
    let objective = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mean = mean_from(&mean0, &normals, &x[..n]);
        SplineCurve::new(theta, mean.clone())?.check_regular()?;
        let parts: Vec<(f64, Vec<Vec2>, [f64; 3])> = levels
            .par_iter()
            .enumerate()
            .map(|(j, level)| {
                let (net, rigid) = assemble(x, j, &mean);
                let e = level.evaluate(&net, &rigid)?;
                Ok((e.objective, e.net_grad, e.rigid_grad))
            })
            .collect::<Result<_>>()?;
        let mut total = 0.0;
        let mut grad = vec![0.0; x.len()];
        for (j, (f, net_grad, rigid_grad)) in parts.into_iter().enumerate() {
            total += f;
            for (k, v) in net_grad.iter().enumerate() {
                grad[k % n] += v.dot(&normals[k % n]);
            }
            let block = &mut grad[blocks[j + 1].clone()];
            for (slot, v) in block.chunks_exact_mut(2).zip(&net_grad[n..]) {
                slot.copy_from_slice(&[v.x, v.y]);
            }
            if config.rigid {
                let len = block.len();
                block[len - 3..].copy_from_slice(&rigid_grad);
            }
        }
        Ok((total, grad))
    };

    // Paths start as ordinary matches from the initial mean.
    let starts: Vec<Vec<f64>> = on_level
        .par_iter()
        .zip(&levels)
        .zip(&initial)
        .map(|((shape, level), rigid)| {
            let problem = MatchProblem::new(mean0.clone(), shape.clone(), config.clone())?;
            let (net, rigid) = match solve_match(&problem) {
                Ok(r) => (r.net, r.rigid),
                Err(e) => {
                    log::warn!("initial match failed, starting from a constant path: {e}");
                    (PathControlNet::constant(time, &mean0), *rigid)
                }
            };
            Ok(level.pack(&shift_rows(&net, mean0.controls(), -1.0), &rigid))
        })
        .collect::<Result<_>>()?;
    let mut x0 = vec![0.0; n];
    x0.extend(starts.into_iter().flatten());

    // Mean block: the Hessian of Σ dist² in the mean is about 2n times the
    // metric Gram matrix, restricted here to normal offsets. Path blocks: as
    // in a single match.
    let gram = SobolevMetric::new(theta, config.metric).gram(&mean0)?;
    let scale = 2.0 * shapes.len() as f64;
    let normal_gram = DMatrix::from_fn(n, n, |k, l| scale * gram[(k, l)] * normals[k].dot(&normals[l]));
    let mean_pre = Cholesky::new(normal_gram)
        .ok_or_else(|| Error::invalid("metric Gram matrix is not positive definite"))?;
    let path_pre = Preconditioner::new(levels[0].path_energy(), &mean0, 1)?;
    let precond = |b: usize, g: &[f64]| {
        if b > 0 {
            return path_pre.apply(g);
        }
        mean_pre.solve(&DVector::from_column_slice(g)).as_slice().to_vec()
    };

    // Tolerance reference: the gradient at constant paths from the initial
    // mean, measured as in a single match for each shape.
    let constant = PathControlNet::constant(time, &mean0);
    let mut reference2 = 0.0;
    for (level, rigid) in levels.iter().zip(&initial) {
        let (_, g) = level.objective_and_gradient(&constant, rigid)?;
        reference2 += g.iter().zip(path_pre.apply(&g)).map(|(a, b)| a * b).sum::<f64>().max(0.0);
    }
    let lbfgs = LbfgsSettings {
        g_tol: (config.optimizer.lbfgs.g_tol * reference2.sqrt()).max(config.optimizer.g_tol_floor),
        ..config.optimizer.lbfgs
    };
    let out = optim::minimize_partitioned(objective, x0, &lbfgs, &blocks, precond)?;

    let mean_controls = mean_from(&mean0, &normals, &out.x[..n]);
    let mean = SplineCurve::new(theta, mean_controls.clone())?;
    let mut paths = Vec::with_capacity(shapes.len());
    let mut rigid = Vec::with_capacity(shapes.len());
    let (mut energies, mut fidelities, mut distances) = (vec![], vec![], vec![]);
    let mut objective_total = 0.0;
    for (j, level) in levels.iter().enumerate() {
        let (net, r) = assemble(&out.x, j, &mean_controls);
        let e = level.evaluate(&net, &r)?;
        objective_total += e.objective;
        energies.push(e.energy);
        fidelities.push(e.fidelity);
        distances.push(level.path_energy().length(&net)?);
        rigid.push(r);
        paths.push(net);
    }
    Ok(KarcherResult {
        mean,
        paths,
        rigid,
        energies,
        fidelities,
        distances,
        objective: objective_total,
        iterations: out.iterations,
        converged: out.converged(),
        termination: out.termination,
        history: out.history,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// Unit normals of the control polygon, from central differences.
fn control_normals(c: &SplineCurve) -> Vec<Vec2> {
    let p = c.controls();
    let n = p.len();
    (0..n)
        .map(|k| {
            let d = p[(k + 1) % n] - p[(k + n - 1) % n];
            Vec2::new(d.y, -d.x).normalize()
        })
        .collect()
}

fn mean_from(base: &SplineCurve, normals: &[Vec2], alpha: &[f64]) -> Vec<Vec2> {
    base.controls()
        .iter()
        .zip(normals)
        .zip(alpha)
        .map(|((c, v), a)| c + v * *a)
        .collect()
}

/// Tangent vector at a base curve, as a spline coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentVector {
    pub base: SplineCurve,
    pub coefficients: Vec<Vec2>,
}

/// Initial velocity `∂_t c(0, ·) = Σ_i B_i'(0) c_i` of a path.
pub fn log_map(path: &PathControlNet) -> TangentVector {
    TangentVector {
        base: path.source(),
        coefficients: path.velocity_at(0.0),
    }
}
