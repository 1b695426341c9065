//! Limited-memory BFGS with a weak-Wolfe bisection line search.
//!
//! The objective callback returns the value and gradient at a point. Errors
//! raised at trial points of the line search (for example a path that
//! collapses a curve segment) are treated like `+∞` so the search backs off;
//! an error at the starting point is returned to the caller.
//!
//! An optional preconditioner `P ≈ ∇²f⁻¹` replaces the identity as the
//! initial inverse-Hessian approximation `H₀ = γ P` of the two-loop
//! recursion. Gradient norms are then measured as `√(gᵀ P g)`.
//!
//! For nearly separable objectives the variables can be split into blocks
//! with separate correction memories (partitioned quasi-Newton).

use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsSettings {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iterations: usize,
    /// Absolute tolerance on the (preconditioned) gradient norm.
    pub g_tol: f64,
    /// Armijo constant.
    pub c1: f64,
    /// Curvature constant.
    pub c2: f64,
    /// Trial points per line search before giving up.
    pub max_line_search: usize,
}

impl Default for LbfgsSettings {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            g_tol: 1e-6,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 60,
        }
    }
}

impl LbfgsSettings {
    pub fn validate(&self) -> Result<()> {
        if self.memory == 0 {
            return Err(Error::invalid("L-BFGS memory must be positive"));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 < 1.0) {
            return Err(Error::invalid("line search constants need 0 < c1 < c2 < 1"));
        }
        if self.g_tol.is_nan() || self.g_tol < 0.0 {
            return Err(Error::invalid("g_tol must be non-negative"));
        }
        if self.max_line_search == 0 {
            return Err(Error::invalid("max_line_search must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub f: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    /// `√(gᵀ P g)`; the Euclidean norm without a preconditioner.
    pub grad_norm: f64,
    pub iterations: usize,
    /// Objective evaluations, including rejected trial points.
    pub evaluations: usize,
    /// Starting point followed by every accepted iterate.
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
}

impl LbfgsOutcome {
    pub fn converged(&self) -> bool {
        self.termination == Termination::GradientTolerance
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

struct Trial {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

enum Search {
    Wolfe(Trial),
    /// Sufficient decrease without the curvature condition.
    Armijo(Trial),
    Failed,
}

fn evaluate<F>(f: &mut F, x: &[f64]) -> Option<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    match f(x) {
        Ok((v, g)) if v.is_finite() && g.iter().all(|c| c.is_finite()) => Some((v, g)),
        Ok(_) => None,
        Err(e) => {
            log::debug!("line search trial rejected: {e}");
            None
        }
    }
}

fn line_search<F>(
    f: &mut F,
    x: &[f64],
    fx: f64,
    slope: f64,
    d: &[f64],
    alpha0: f64,
    s: &LbfgsSettings,
) -> Search
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut alpha = alpha0;
    let mut best: Option<Trial> = None;
    for _ in 0..s.max_line_search {
        let xt: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect();
        match evaluate(f, &xt) {
            Some((ft, gt)) if ft < fx && ft <= fx + s.c1 * alpha * slope => {
                let trial = Trial {
                    alpha,
                    x: xt,
                    f: ft,
                    g: gt,
                };
                if dot(&trial.g, d) >= s.c2 * slope {
                    return Search::Wolfe(trial);
                }
                lo = alpha;
                if best.as_ref().is_none_or(|b| trial.f < b.f) {
                    best = Some(trial);
                }
            }
            _ => hi = alpha,
        }
        alpha = if hi.is_finite() {
            0.5 * (lo + hi)
        } else {
            2.0 * alpha
        };
        if hi.is_finite() && hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    best.map_or(Search::Failed, Search::Armijo)
}

/// Minimizes `f` starting from `x0`.
pub fn minimize<F>(f: F, x0: Vec<f64>, settings: &LbfgsSettings) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    minimize_preconditioned(f, x0, settings, |g: &[f64]| g.to_vec())
}

/// Like [`minimize`], with `precond(g) = P g` for a symmetric positive
/// definite `P`.
pub fn minimize_preconditioned<F, P>(
    f: F,
    x0: Vec<f64>,
    settings: &LbfgsSettings,
    precond: P,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(&[f64]) -> Vec<f64>,
{
    let n = x0.len();
    minimize_partitioned(f, x0, settings, &[0..n], |_, g| precond(g))
}

/// Partitioned variant for objectives that are close to a sum of functions
/// of disjoint variable blocks. Each block keeps its own correction pairs,
/// scaling and block preconditioner `precond(b, g_b)`, so the inverse
/// Hessian approximation is block diagonal; the line search is shared.
/// `blocks` must cover `0..x0.len()` without overlap.
pub fn minimize_partitioned<F, P>(
    mut f: F,
    x0: Vec<f64>,
    settings: &LbfgsSettings,
    blocks: &[Range<usize>],
    precond: P,
) -> Result<LbfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    P: Fn(usize, &[f64]) -> Vec<f64>,
{
    settings.validate()?;
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let mut covered = vec![false; x0.len()];
    for r in blocks {
        for c in covered.get_mut(r.clone()).ok_or_else(|| Error::invalid("block out of range"))? {
            if *c {
                return Err(Error::invalid("variable blocks overlap"));
            }
            *c = true;
        }
    }
    if covered.iter().any(|c| !c) {
        return Err(Error::invalid("variable blocks do not cover every variable"));
    }
    let mut evaluations = 0;
    let mut f = |x: &[f64]| {
        evaluations += 1;
        f(x)
    };
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue);
    }
    let dual_norm = |g: &[f64]| {
        blocks
            .iter()
            .enumerate()
            .map(|(b, r)| dot(&g[r.clone()], &precond(b, &g[r.clone()])))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    };
    let direction = |g: &[f64], memory: &[Pairs]| {
        let mut d = vec![0.0; g.len()];
        for (b, r) in blocks.iter().enumerate() {
            let db = two_loop(&g[r.clone()], &memory[b], &|v: &[f64]| precond(b, v));
            d[r.clone()].copy_from_slice(&db);
        }
        d
    };
    let mut x = x0;
    let mut gnorm = dual_norm(&g);
    let mut history = vec![IterationRecord {
        f: fx,
        grad_norm: gnorm,
    }];
    let mut memory: Vec<Pairs> = vec![VecDeque::new(); blocks.len()];
    let mut iterations = 0;

    let termination = loop {
        if gnorm <= settings.g_tol {
            break Termination::GradientTolerance;
        }
        if iterations >= settings.max_iterations {
            break Termination::MaxIterations;
        }

        let mut d = direction(&g, &memory);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.iter_mut().for_each(VecDeque::clear);
            d = direction(&g, &memory);
            slope = dot(&g, &d);
            if !(slope < 0.0) {
                break Termination::LineSearchFailed;
            }
        }
        let alpha0 = if iterations == 0 {
            (1.0 / norm(&d)).min(1.0)
        } else {
            1.0
        };

        let (trial, wolfe) = match line_search(&mut f, &x, fx, slope, &d, alpha0, settings) {
            Search::Wolfe(t) => (t, true),
            Search::Armijo(t) => (t, false),
            Search::Failed => break Termination::LineSearchFailed,
        };

        if wolfe {
            for (r, pairs) in blocks.iter().zip(memory.iter_mut()) {
                let step: Vec<f64> = d[r.clone()].iter().map(|v| v * trial.alpha).collect();
                let dg: Vec<f64> = trial.g[r.clone()]
                    .iter()
                    .zip(&g[r.clone()])
                    .map(|(a, b)| a - b)
                    .collect();
                let sy = dot(&step, &dg);
                if sy > f64::EPSILON * norm(&step) * norm(&dg) {
                    if pairs.len() == settings.memory {
                        pairs.pop_front();
                    }
                    pairs.push_back((step, dg, 1.0 / sy));
                }
            }
        }

        x = trial.x;
        fx = trial.f;
        g = trial.g;
        gnorm = dual_norm(&g);
        iterations += 1;
        history.push(IterationRecord {
            f: fx,
            grad_norm: gnorm,
        });
    };

    Ok(LbfgsOutcome {
        x,
        f: fx,
        grad: g,
        grad_norm: gnorm,
        iterations,
        evaluations,
        history,
        termination,
    })
}

/// Correction pairs `(s, y, 1/sᵀy)`, oldest first.
type Pairs = VecDeque<(Vec<f64>, Vec<f64>, f64)>;

/// Two-loop recursion: returns `−H g`.
fn two_loop<P>(g: &[f64], pairs: &Pairs, precond: &P) -> Vec<f64>
where
    P: Fn(&[f64]) -> Vec<f64>,
{
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    let mut r = precond(&q);
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, &precond(y));
        r.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &r);
        for (ri, si) in r.iter_mut().zip(s) {
            *ri += (a - b) * si;
        }
    }
    r.iter_mut().for_each(|v| *v = -*v);
    r
}
