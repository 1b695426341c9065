//! Kernel varifold inner products between closed curves.
//!
//! Curves are compared through polygonal approximations. For polygons with
//! edges `e_k`, midpoints `x_k` and unit tangents `u_k`,
//!
//! ```text
//! ⟨μ1, μ2⟩ ≈ Σ_{k,l} |e_k| |f_l| γ(u_k · w_l) ρ(|x_k − y_l|²)
//! ```
//!
//! (midpoint rule per pair of edges). The squared distance is
//! `⟨μ1,μ1⟩ − 2⟨μ1,μ2⟩ + ⟨μ2,μ2⟩`. Gradients are propagated from midpoints and
//! edges to vertices and from vertices to spline controls.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{BasisValues, SplineCurve, ThetaBasis, Vec2};

/// Radial part `ρ(r²)` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum Radial {
    /// `exp(−r²/σ²)`
    Gaussian { sigma: f64 },
    /// `1 / (1 + r²/σ²)`
    Cauchy { sigma: f64 },
}

impl Radial {
    pub fn sigma(&self) -> f64 {
        match *self {
            Radial::Gaussian { sigma } | Radial::Cauchy { sigma } => sigma,
        }
    }

    pub fn with_sigma(&self, sigma: f64) -> Self {
        match self {
            Radial::Gaussian { .. } => Radial::Gaussian { sigma },
            Radial::Cauchy { .. } => Radial::Cauchy { sigma },
        }
    }

    /// Value and derivative with respect to `r²`.
    #[inline]
    pub fn eval(&self, r2: f64) -> (f64, f64) {
        match *self {
            Radial::Gaussian { sigma } => {
                let s2 = sigma * sigma;
                let v = (-r2 / s2).exp();
                (v, -v / s2)
            }
            Radial::Cauchy { sigma } => {
                let s2 = sigma * sigma;
                let v = 1.0 / (1.0 + r2 / s2);
                (v, -v * v / s2)
            }
        }
    }
}

/// Zonal part `γ(u·v)` of the kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Zonal {
    /// `t`: oriented, current-like.
    Linear,
    /// `t²`: orientation invariant.
    Squared,
    /// `1`: ignores tangents.
    Constant,
    /// `(1 + t)² / 4`
    Binomial,
}

impl Zonal {
    #[inline]
    pub fn eval(&self, t: f64) -> (f64, f64) {
        match self {
            Zonal::Linear => (t, 1.0),
            Zonal::Squared => (t * t, 2.0 * t),
            Zonal::Constant => (1.0, 0.0),
            Zonal::Binomial => (0.25 * (1.0 + t) * (1.0 + t), 0.5 * (1.0 + t)),
        }
    }

    pub fn is_orientation_invariant(&self) -> bool {
        matches!(self, Zonal::Squared | Zonal::Constant)
    }
}

/// Product kernel `k(x, u, y, v) = ρ(|x − y|²) γ(u · v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarifoldKernel {
    pub rho: Radial,
    pub gamma: Zonal,
}

impl VarifoldKernel {
    pub fn new(rho: Radial, gamma: Zonal) -> Result<Self> {
        let k = Self { rho, gamma };
        k.validate()?;
        Ok(k)
    }

    pub fn gaussian(sigma: f64, gamma: Zonal) -> Result<Self> {
        Self::new(Radial::Gaussian { sigma }, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = self.rho.sigma();
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("kernel scale must be positive, got {sigma}")));
        }
        Ok(())
    }
}

/// Closed polygon with derived edge data.
#[derive(Debug, Clone)]
pub struct PolygonalCurve {
    vertices: Vec<Vec2>,
    midpoints: Vec<Vec2>,
    lengths: Vec<f64>,
    tangents: Vec<Vec2>,
}

impl PolygonalCurve {
    pub fn new(vertices: Vec<Vec2>) -> Result<Self> {
        let p = vertices.len();
        if p < 3 {
            return Err(Error::invalid(format!("polygon needs at least 3 vertices, got {p}")));
        }
        let mut midpoints = Vec::with_capacity(p);
        let mut lengths = Vec::with_capacity(p);
        let mut tangents = Vec::with_capacity(p);
        for k in 0..p {
            let a = vertices[k];
            let b = vertices[(k + 1) % p];
            let e = b - a;
            let len = e.norm();
            if !(len > 0.0) {
                return Err(Error::ZeroEdge { index: k });
            }
            midpoints.push((a + b) * 0.5);
            lengths.push(len);
            tangents.push(e / len);
        }
        Ok(Self {
            vertices,
            midpoints,
            lengths,
            tangents,
        })
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn midpoints(&self) -> &[Vec2] {
        &self.midpoints
    }

    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn tangents(&self) -> &[Vec2] {
        &self.tangents
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn max_edge(&self) -> f64 {
        self.lengths.iter().fold(0.0, |m, &l| m.max(l))
    }

    pub fn map<F: Fn(&Vec2) -> Vec2>(&self, f: F) -> Result<Self> {
        Self::new(self.vertices.iter().map(f).collect())
    }
}

/// Samples spline curves at `θ_k = 2πk/P` and pulls vertex gradients back to
/// control points through `∂v_k/∂c_j = C_j(θ_k)`.
#[derive(Debug, Clone)]
pub struct PolygonSampler {
    basis: ThetaBasis,
    thetas: Vec<f64>,
    rows: Vec<BasisValues>,
}

impl PolygonSampler {
    pub fn new(basis: ThetaBasis, samples: usize) -> Result<Self> {
        if samples < 3 {
            return Err(Error::invalid(format!("need at least 3 polygon samples, got {samples}")));
        }
        let thetas: Vec<f64> = (0..samples).map(|k| TAU * k as f64 / samples as f64).collect();
        let rows = thetas.iter().map(|&t| basis.eval(t, 0)).collect();
        Ok(Self {
            basis,
            thetas,
            rows,
        })
    }

    pub fn samples(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn basis(&self) -> &ThetaBasis {
        &self.basis
    }

    pub fn vertices(&self, controls: &[Vec2]) -> Vec<Vec2> {
        self.rows
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|a| controls[row.index(a)] * row.ders[0][a])
                    .sum()
            })
            .collect()
    }

    pub fn polygon(&self, controls: &[Vec2]) -> Result<PolygonalCurve> {
        PolygonalCurve::new(self.vertices(controls))
    }

    /// Adds `Σ_k C_j(θ_k) g_k` to `out[j]`.
    pub fn pullback(&self, vertex_grad: &[Vec2], out: &mut [Vec2]) {
        for (row, g) in self.rows.iter().zip(vertex_grad) {
            for a in 0..row.len() {
                out[row.index(a)] += g * row.ders[0][a];
            }
        }
    }
}

/// Samples `c` at `P` equidistant parameters.
pub fn sample_polygon(c: &SplineCurve, samples: usize) -> Result<PolygonalCurve> {
    PolygonSampler::new(*c.basis(), samples)?.polygon(c.controls())
}

/// Gradients of a pairwise sum with respect to midpoints and edges of one
/// polygon.
struct EdgeGrads {
    midpoints: Vec<Vec2>,
    edges: Vec<Vec2>,
}

impl EdgeGrads {
    fn zeros(n: usize) -> Self {
        Self {
            midpoints: vec![Vec2::zeros(); n],
            edges: vec![Vec2::zeros(); n],
        }
    }

    /// Midpoint `x_k = (v_k + v_{k+1})/2` and edge `e_k = v_{k+1} − v_k`.
    fn to_vertices(&self) -> Vec<Vec2> {
        let p = self.midpoints.len();
        (0..p)
            .map(|l| {
                let prev = (l + p - 1) % p;
                (self.midpoints[prev] + self.midpoints[l]) * 0.5 + self.edges[prev] - self.edges[l]
            })
            .collect()
    }
}

fn pair_sum(
    p1: &PolygonalCurve,
    p2: &PolygonalCurve,
    kernel: &VarifoldKernel,
    mut grad1: Option<&mut EdgeGrads>,
    mut grad2: Option<&mut EdgeGrads>,
) -> f64 {
    let want1 = grad1.is_some();
    let mut total = 0.0;
    for k in 0..p1.len() {
        let (x, u, a) = (p1.midpoints[k], p1.tangents[k], p1.lengths[k]);
        let mut row = 0.0;
        let mut gx = Vec2::zeros();
        let mut ge = Vec2::zeros();
        for l in 0..p2.len() {
            let (y, w, b) = (p2.midpoints[l], p2.tangents[l], p2.lengths[l]);
            let d = x - y;
            let (rho, drho) = kernel.rho.eval(d.norm_squared());
            let cos = u.dot(&w);
            let (gam, dgam) = kernel.gamma.eval(cos);
            row += b * gam * rho;
            if want1 {
                gx += d * (2.0 * a * b * gam * drho);
                // ∂/∂e [|e| γ(e·w/|e|)] = γ u + γ' (w − (u·w) u)
                ge += (u * gam + (w - u * cos) * dgam) * (b * rho);
            }
            if let Some(g) = grad2.as_deref_mut() {
                g.midpoints[l] -= d * (2.0 * a * b * gam * drho);
                g.edges[l] += (w * gam + (u - w * cos) * dgam) * (a * rho);
            }
        }
        total += a * row;
        if let Some(g) = grad1.as_deref_mut() {
            g.midpoints[k] += gx;
            g.edges[k] += ge;
        }
    }
    total
}

/// Discrete varifold inner product `⟨μ_{p1}, μ_{p2}⟩`.
pub fn varifold_inner(p1: &PolygonalCurve, p2: &PolygonalCurve, kernel: &VarifoldKernel) -> f64 {
    pair_sum(p1, p2, kernel, None, None)
}

/// Squared varifold distance, clamped at zero.
pub fn varifold_dist_sq(p1: &PolygonalCurve, p2: &PolygonalCurve, kernel: &VarifoldKernel) -> f64 {
    let d = varifold_inner(p1, p1, kernel) - 2.0 * varifold_inner(p1, p2, kernel)
        + varifold_inner(p2, p2, kernel);
    d.max(0.0)
}

/// Squared distance and its gradient with respect to the vertices of `p1`.
/// `self_inner2` may carry a precomputed `⟨μ_{p2}, μ_{p2}⟩`.
pub fn varifold_dist_sq_vertex_grad(
    p1: &PolygonalCurve,
    p2: &PolygonalCurve,
    kernel: &VarifoldKernel,
    self_inner2: Option<f64>,
) -> (f64, Vec<Vec2>) {
    let n = p1.len();
    let mut self_grad = EdgeGrads::zeros(n);
    let a11 = pair_sum(p1, p1, kernel, Some(&mut self_grad), None);
    let mut cross_grad = EdgeGrads::zeros(n);
    let a12 = pair_sum(p1, p2, kernel, Some(&mut cross_grad), None);
    let a22 = self_inner2.unwrap_or_else(|| varifold_inner(p2, p2, kernel));
    // ⟨μ1,μ1⟩ depends on p1 through both arguments: twice the one-sided term.
    let combined = EdgeGrads {
        midpoints: self_grad
            .midpoints
            .iter()
            .zip(&cross_grad.midpoints)
            .map(|(s, c)| (s - c) * 2.0)
            .collect(),
        edges: self_grad
            .edges
            .iter()
            .zip(&cross_grad.edges)
            .map(|(s, c)| (s - c) * 2.0)
            .collect(),
    };
    ((a11 - 2.0 * a12 + a22).max(0.0), combined.to_vertices())
}

/// Gradient of `⟨μ_{p1}, μ_{p2}⟩` with respect to the vertices of `p1`.
pub fn varifold_inner_vertex_grad(
    p1: &PolygonalCurve,
    p2: &PolygonalCurve,
    kernel: &VarifoldKernel,
) -> (f64, Vec<Vec2>) {
    let mut g = EdgeGrads::zeros(p1.len());
    let a = pair_sum(p1, p2, kernel, Some(&mut g), None);
    (a, g.to_vertices())
}

/// `⟨μ_{p1}, μ_{p2}⟩` with its gradients with respect to the vertices of
/// both polygons, in one pass.
pub fn varifold_inner_vertex_grads(
    p1: &PolygonalCurve,
    p2: &PolygonalCurve,
    kernel: &VarifoldKernel,
) -> (f64, Vec<Vec2>, Vec<Vec2>) {
    let mut g1 = EdgeGrads::zeros(p1.len());
    let mut g2 = EdgeGrads::zeros(p2.len());
    let a = pair_sum(p1, p2, kernel, Some(&mut g1), Some(&mut g2));
    (a, g1.to_vertices(), g2.to_vertices())
}

/// Gradient of `d²(c1, p2)` with respect to the spline controls of `c1`,
/// where `c1` is sampled with `sampler`.
pub fn varifold_grad(
    sampler: &PolygonSampler,
    controls1: &[Vec2],
    p2: &PolygonalCurve,
    kernel: &VarifoldKernel,
) -> Result<(f64, Vec<Vec2>)> {
    let p1 = sampler.polygon(controls1)?;
    let (d, vg) = varifold_dist_sq_vertex_grad(&p1, p2, kernel, None);
    let mut out = vec![Vec2::zeros(); controls1.len()];
    sampler.pullback(&vg, &mut out);
    Ok((d, out))
}
