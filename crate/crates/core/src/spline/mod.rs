//! Spline discretization of curves and paths of curves.
//!
//! A closed curve is a periodic cubic B-spline in `θ ∈ [0, 2π)`; a path of
//! curves is a tensor-product spline, clamped quadratic in `t ∈ [0, 1]` and
//! periodic cubic in `θ`:
//!
//! ```text
//! c(t, θ) = Σ_i Σ_j c_ij B_i(t) C_j(θ)
//! ```
//!
//! Because the time knots have full multiplicity at both ends, row `0` of the
//! control net is the start curve and the last row is the end curve.

mod basis;
mod fit;
mod quadrature;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

pub use basis::{make_bases, BasisValues, ThetaBasis, TimeBasis};
pub use fit::{
    fit_samples, fit_spline, fit_spline_with, resample_arc_length, Parametrization, SplineFit,
};
pub use quadrature::{
    gauss_legendre, CurveJets, CurveQuadrature, PathQuadrature, TimeQuadrature,
};

use crate::error::{Error, Result};
use fit::LeastSquares;

pub type Vec2 = nalgebra::Vector2<f64>;

/// Relative threshold on `|c_θ|` below which a curve counts as degenerate.
pub const REGULARITY_EPS: f64 = 1e-8;

/// Closed plane curve given by a periodic B-spline control polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve {
    basis: ThetaBasis,
    controls: Vec<Vec2>,
}

impl SplineCurve {
    pub fn new(basis: ThetaBasis, controls: Vec<Vec2>) -> Result<Self> {
        if controls.len() != basis.num_controls() {
            return Err(Error::invalid(format!(
                "expected {} controls, got {}",
                basis.num_controls(),
                controls.len()
            )));
        }
        if controls.iter().any(|c| !c.x.is_finite() || !c.y.is_finite()) {
            return Err(Error::invalid("non-finite control point"));
        }
        Ok(Self { basis, controls })
    }

    /// Least-squares spline approximation of a parametrized closed curve
    /// `f: [0, 2π) -> R²`, keeping its parametrization.
    pub fn from_fn<F: Fn(f64) -> Vec2>(basis: ThetaBasis, f: F) -> Result<Self> {
        let m = 16 * basis.num_controls();
        let params: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
        let points: Vec<Vec2> = params.iter().map(|&t| f(t)).collect();
        Ok(fit_samples(&params, &points, basis)?.curve)
    }

    /// Spline approximation of the circle `center + radius (cos θ, sin θ)`.
    pub fn circle(num_controls: usize, center: Vec2, radius: f64) -> Result<Self> {
        Self::from_fn(ThetaBasis::cubic(num_controls)?, |t| {
            center + Vec2::new(t.cos(), t.sin()) * radius
        })
    }

    pub fn basis(&self) -> &ThetaBasis {
        &self.basis
    }

    pub fn controls(&self) -> &[Vec2] {
        &self.controls
    }

    pub fn into_controls(self) -> Vec<Vec2> {
        self.controls
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    /// Value and the first two θ-derivatives at `theta`.
    pub fn eval_jet(&self, theta: f64) -> [Vec2; 3] {
        let v = self.basis.eval(theta, 2);
        let reference = self.controls[v.index(0)];
        let mut out = [Vec2::zeros(); 3];
        for r in 0..v.len() {
            let c = self.controls[v.index(r)];
            out[0] += c * v.ders[0][r];
            out[1] += (c - reference) * v.ders[1][r];
            out[2] += (c - reference) * v.ders[2][r];
        }
        out
    }

    pub fn eval(&self, theta: f64) -> Vec2 {
        let v = self.basis.eval(theta, 0);
        (0..v.len())
            .map(|r| self.controls[v.index(r)] * v.ders[0][r])
            .sum()
    }

    /// Points and θ-derivatives at each parameter in `thetas`.
    pub fn eval_curve(&self, thetas: &[f64]) -> CurveJets {
        CurveJets::from_fn(thetas, |t| self.eval_jet(t))
    }

    /// Values at the `count` equidistant parameters `2πk / count`.
    pub fn sample(&self, count: usize) -> Vec<Vec2> {
        (0..count)
            .map(|k| self.eval(TAU * k as f64 / count as f64))
            .collect()
    }

    /// Applies an affine map to every control point. B-spline evaluation
    /// commutes with affine maps, so this transforms the curve.
    pub fn map_controls<F: Fn(&Vec2) -> Vec2>(&self, f: F) -> Self {
        Self {
            basis: self.basis,
            controls: self.controls.iter().map(f).collect(),
        }
    }

    pub fn translated(&self, b: Vec2) -> Self {
        self.map_controls(|c| c + b)
    }

    /// Same curve traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let mut controls = self.controls.clone();
        controls.reverse();
        Self {
            basis: self.basis,
            controls,
        }
    }

    /// Least-squares re-fit onto another periodic basis, keeping the
    /// parametrization.
    pub fn refit(&self, basis: ThetaBasis) -> Result<Self> {
        if basis == self.basis {
            return Ok(self.clone());
        }
        let m = 16 * basis.num_controls().max(self.basis.num_controls());
        let params: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
        let points: Vec<Vec2> = params.iter().map(|&t| self.eval(t)).collect();
        let rows: Vec<BasisValues> = params.iter().map(|&t| basis.eval(t, 0)).collect();
        let controls = LeastSquares::new(basis.num_controls(), &rows)?.solve(&points);
        Self::new(basis, controls)
    }

    /// Largest distance between two of 200 samples.
    pub fn diameter(&self) -> f64 {
        let pts = self.sample(200);
        let mut d: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    pub fn centroid(&self) -> Vec2 {
        self.controls.iter().sum::<Vec2>() / self.controls.len() as f64
    }

    /// Length by Gauss quadrature.
    pub fn length(&self) -> f64 {
        let q = CurveQuadrature::new(self.basis);
        let jets = q.jets(&self.controls);
        jets.d1.iter().zip(&q.weights).map(|(d, w)| d.norm() * w).sum()
    }

    /// Checks `|c_θ| > ε_reg` at the quadrature sites.
    pub fn check_regular(&self) -> Result<()> {
        let q = CurveQuadrature::new(self.basis);
        ArcLength::new(&q.jets(&self.controls), &q.sites).map(|_| ())
    }
}

/// Arc-length differentiation at a fixed set of sites.
///
/// With `s = |c_θ|` and `m = ⟨c_θ, c_θθ⟩ / s²`:
/// `D_s h = h_θ / s` and `D_s² h = (h_θθ − m h_θ) / s²`.
#[derive(Debug, Clone)]
pub struct ArcLength {
    speed: Vec<f64>,
    stretch: Vec<f64>,
}

impl ArcLength {
    pub fn new(jets: &CurveJets, sites: &[f64]) -> Result<Self> {
        Self::with_time(jets, sites, None)
    }

    pub(crate) fn with_time(jets: &CurveJets, sites: &[f64], t: Option<f64>) -> Result<Self> {
        let speed: Vec<f64> = jets.d1.iter().map(|d| d.norm()).collect();
        check_speeds(&speed, sites, t)?;
        let stretch = jets
            .d1
            .iter()
            .zip(&jets.d2)
            .zip(&speed)
            .map(|((a, b), s)| a.dot(b) / (s * s))
            .collect();
        Ok(Self { speed, stretch })
    }

    pub fn speed(&self) -> &[f64] {
        &self.speed
    }

    pub fn d_s(&self, h_theta: &[Vec2]) -> Vec<Vec2> {
        h_theta
            .iter()
            .zip(&self.speed)
            .map(|(h, s)| h / *s)
            .collect()
    }

    pub fn d_s2(&self, h_theta: &[Vec2], h_theta2: &[Vec2]) -> Vec<Vec2> {
        h_theta
            .iter()
            .zip(h_theta2)
            .zip(self.speed.iter().zip(&self.stretch))
            .map(|((h1, h2), (s, m))| (h2 - h1 * *m) / (s * s))
            .collect()
    }
}

pub(crate) fn check_speeds(speed: &[f64], sites: &[f64], t: Option<f64>) -> Result<()> {
    let mean = speed.iter().sum::<f64>() / speed.len() as f64;
    let eps = REGULARITY_EPS * mean;
    for (k, &s) in speed.iter().enumerate() {
        if !(s > eps) || !s.is_finite() {
            return Err(Error::DegenerateCurve {
                t,
                theta: sites.get(k).copied().unwrap_or(f64::NAN),
                speed: s,
            });
        }
    }
    Ok(())
}

/// Tensor-product control net `c_ij` of a path of curves, stored row-major:
/// row `i` holds the θ-controls attached to time basis function `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathControlNet {
    time: TimeBasis,
    theta: ThetaBasis,
    controls: Vec<Vec2>,
}

impl PathControlNet {
    pub fn new(time: TimeBasis, theta: ThetaBasis, controls: Vec<Vec2>) -> Result<Self> {
        if controls.len() != time.num_controls() * theta.num_controls() {
            return Err(Error::invalid(format!(
                "control net needs {} x {} points, got {}",
                time.num_controls(),
                theta.num_controls(),
                controls.len()
            )));
        }
        Ok(Self {
            time,
            theta,
            controls,
        })
    }

    /// The constant path `c(t) = source` for all `t`.
    pub fn constant(time: TimeBasis, source: &SplineCurve) -> Self {
        let mut controls = Vec::with_capacity(time.num_controls() * source.num_controls());
        for _ in 0..time.num_controls() {
            controls.extend_from_slice(source.controls());
        }
        Self {
            time,
            theta: *source.basis(),
            controls,
        }
    }

    /// The path `(1 − t) c0 + t c1`, represented exactly.
    pub fn linear(time: TimeBasis, c0: &SplineCurve, c1: &SplineCurve) -> Result<Self> {
        if c0.basis() != c1.basis() {
            return Err(Error::invalid("curves use different bases"));
        }
        let mut controls = Vec::with_capacity(time.num_controls() * c0.num_controls());
        for tau in time.greville() {
            controls.extend(
                c0.controls()
                    .iter()
                    .zip(c1.controls())
                    .map(|(a, b)| a * (1.0 - tau) + b * tau),
            );
        }
        Self::new(time, *c0.basis(), controls)
    }

    pub fn time_basis(&self) -> &TimeBasis {
        &self.time
    }

    pub fn theta_basis(&self) -> &ThetaBasis {
        &self.theta
    }

    pub fn num_time(&self) -> usize {
        self.time.num_controls()
    }

    pub fn num_theta(&self) -> usize {
        self.theta.num_controls()
    }

    pub fn controls(&self) -> &[Vec2] {
        &self.controls
    }

    pub fn controls_mut(&mut self) -> &mut [Vec2] {
        &mut self.controls
    }

    pub fn row(&self, i: usize) -> &[Vec2] {
        let n = self.num_theta();
        &self.controls[i * n..(i + 1) * n]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Vec2] {
        let n = self.num_theta();
        &mut self.controls[i * n..(i + 1) * n]
    }

    /// Controls of the curve `c(t, ·)` for order-`k` time derivative.
    fn slice(&self, t: f64, k: usize) -> Vec<Vec2> {
        let v = self.time.eval(t, k);
        // Differences to the first active row: exact for constant paths.
        let reference = self.row(v.index(0));
        let mut out: Vec<Vec2> = if k == 0 {
            reference.to_vec()
        } else {
            vec![Vec2::zeros(); self.num_theta()]
        };
        for a in 1..v.len() {
            let w = v.ders[k][a];
            for ((o, c), r) in out.iter_mut().zip(self.row(v.index(a))).zip(reference) {
                *o += (c - r) * w;
            }
        }
        out
    }

    pub fn curve_at(&self, t: f64) -> SplineCurve {
        if t == 0.0 {
            return self.source();
        }
        if t == 1.0 {
            return self.end_curve();
        }
        SplineCurve {
            basis: self.theta,
            controls: self.slice(t, 0),
        }
    }

    /// Coefficient field of the velocity `c_t(t, ·)`.
    pub fn velocity_at(&self, t: f64) -> Vec<Vec2> {
        self.slice(t, 1)
    }

    pub fn source(&self) -> SplineCurve {
        SplineCurve {
            basis: self.theta,
            controls: self.row(0).to_vec(),
        }
    }

    pub fn end_curve(&self) -> SplineCurve {
        SplineCurve {
            basis: self.theta,
            controls: self.row(self.num_time() - 1).to_vec(),
        }
    }

    pub fn map_controls<F: Fn(&Vec2) -> Vec2>(&self, f: F) -> Self {
        Self {
            time: self.time,
            theta: self.theta,
            controls: self.controls.iter().map(f).collect(),
        }
    }

    /// Least-squares re-fit of the whole path onto another pair of bases,
    /// from samples on a tensor grid. Used to carry a coarse solution to a
    /// finer discretization.
    pub fn refit(&self, time: TimeBasis, theta: ThetaBasis) -> Result<Self> {
        let mt = 4 * time.num_controls().max(self.num_time());
        let mth = 8 * theta.num_controls().max(self.num_theta());
        let t_samples: Vec<f64> = (0..mt).map(|k| k as f64 / (mt - 1) as f64).collect();
        let th_samples: Vec<f64> = (0..mth).map(|k| TAU * k as f64 / mth as f64).collect();
        let th_rows: Vec<BasisValues> = th_samples.iter().map(|&s| theta.eval(s, 0)).collect();
        let t_rows: Vec<BasisValues> = t_samples.iter().map(|&s| time.eval(s, 0)).collect();

        // θ-direction: one fit per time sample.
        let old_rows: Vec<BasisValues> = th_samples.iter().map(|&s| self.theta.eval(s, 0)).collect();
        let fit_theta = LeastSquares::new(theta.num_controls(), &th_rows)?;
        let mut stage = Vec::with_capacity(mt);
        for &t in &t_samples {
            let slice = self.slice(t, 0);
            let pts: Vec<Vec2> = old_rows
                .iter()
                .map(|r| (0..r.len()).map(|a| slice[r.index(a)] * r.ders[0][a]).sum())
                .collect();
            stage.push(fit_theta.solve(&pts));
        }
        // t-direction: one fit per θ control.
        let n = theta.num_controls();
        let fit_time = LeastSquares::new(time.num_controls(), &t_rows)?;
        let mut controls = vec![Vec2::zeros(); time.num_controls() * n];
        for j in 0..n {
            let column: Vec<Vec2> = stage.iter().map(|row| row[j]).collect();
            for (i, c) in fit_time.solve(&column).into_iter().enumerate() {
                controls[i * n + j] = c;
            }
        }
        Self::new(time, theta, controls)
    }
}
