//! Least-squares fitting of periodic splines to sampled points.

use std::f64::consts::TAU;

use nalgebra::{Cholesky, DMatrix, Dyn};

use super::basis::{BasisValues, ThetaBasis};
use super::{SplineCurve, Vec2};
use crate::error::{Error, Result};

/// How parameter values are assigned to the input points of a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parametrization {
    /// Re-sample the closed polygon uniformly by arc length first, then
    /// assign equidistant parameters. Used for ingested data.
    #[default]
    ArcLength,
    /// Treat the points as samples at equidistant parameters `2πk/n`.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct SplineFit {
    pub curve: SplineCurve,
    pub rms_residual: f64,
    pub max_residual: f64,
}

/// Factored normal equations of a linear least-squares problem whose design
/// matrix rows are sparse basis evaluations. One factorization serves any
/// number of right-hand sides.
pub(crate) struct LeastSquares<'a> {
    rows: &'a [BasisValues],
    chol: Cholesky<f64, Dyn>,
}

impl<'a> LeastSquares<'a> {
    pub(crate) fn new(num_controls: usize, rows: &'a [BasisValues]) -> Result<Self> {
        let deficient = Error::RankDeficient {
            points: rows.len(),
            controls: num_controls,
        };
        if rows.len() < num_controls {
            return Err(deficient);
        }
        let mut ata = DMatrix::<f64>::zeros(num_controls, num_controls);
        for row in rows {
            for a in 0..row.len() {
                let (ia, va) = (row.index(a), row.ders[0][a]);
                for b in 0..row.len() {
                    ata[(ia, row.index(b))] += va * row.ders[0][b];
                }
            }
        }
        let chol = ata.cholesky().ok_or(deficient)?;
        Ok(Self { rows, chol })
    }

    /// Coefficients fitting `rhs`, one value per row.
    pub(crate) fn solve(&self, rhs: &[Vec2]) -> Vec<Vec2> {
        let n = self.chol.l_dirty().nrows();
        let mut atb = DMatrix::<f64>::zeros(n, 2);
        for (row, y) in self.rows.iter().zip(rhs) {
            for a in 0..row.len() {
                let (ia, va) = (row.index(a), row.ders[0][a]);
                atb[(ia, 0)] += va * y.x;
                atb[(ia, 1)] += va * y.y;
            }
        }
        let x = self.chol.solve(&atb);
        (0..n).map(|j| Vec2::new(x[(j, 0)], x[(j, 1)])).collect()
    }
}

pub(crate) fn least_squares(
    num_controls: usize,
    rows: &[BasisValues],
    rhs: &[Vec2],
) -> Result<Vec<Vec2>> {
    Ok(LeastSquares::new(num_controls, rows)?.solve(rhs))
}

/// Fits a periodic spline to `points` taken at parameters `params`.
pub fn fit_samples(params: &[f64], points: &[Vec2], basis: ThetaBasis) -> Result<SplineFit> {
    if params.len() != points.len() {
        return Err(Error::invalid("parameter and point counts differ"));
    }
    let rows: Vec<BasisValues> = params.iter().map(|&t| basis.eval(t, 0)).collect();
    let controls = least_squares(basis.num_controls(), &rows, points)?;
    let curve = SplineCurve::new(basis, controls)?;
    let residuals: Vec<f64> = params
        .iter()
        .zip(points)
        .map(|(&t, p)| (curve.eval(t) - p).norm())
        .collect();
    let rms = (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt();
    let max = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    Ok(SplineFit {
        curve,
        rms_residual: rms,
        max_residual: max,
    })
}

/// Re-samples a closed polygon at `count` points equally spaced in arc length,
/// starting at the first vertex.
pub fn resample_arc_length(polygon: &[Vec2], count: usize) -> Result<Vec<Vec2>> {
    let n = polygon.len();
    if n < 2 {
        return Err(Error::invalid("polygon needs at least two points"));
    }
    let mut cumulative = Vec::with_capacity(n + 1);
    cumulative.push(0.0);
    for k in 0..n {
        let e = (polygon[(k + 1) % n] - polygon[k]).norm();
        cumulative.push(cumulative[k] + e);
    }
    let total = cumulative[n];
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::invalid("polygon has zero or non-finite perimeter"));
    }
    let mut out = Vec::with_capacity(count);
    let mut edge = 0;
    for m in 0..count {
        let s = total * m as f64 / count as f64;
        while edge + 1 < n && cumulative[edge + 1] <= s {
            edge += 1;
        }
        let len = cumulative[edge + 1] - cumulative[edge];
        let a = polygon[edge];
        let b = polygon[(edge + 1) % n];
        let u = if len > 0.0 {
            (s - cumulative[edge]) / len
        } else {
            0.0
        };
        out.push(a + (b - a) * u);
    }
    Ok(out)
}

/// Fits a closed polygon with a cubic periodic spline of `num_controls`
/// controls after uniform arc-length re-sampling.
pub fn fit_spline(polygon: &[Vec2], num_controls: usize) -> Result<SplineFit> {
    fit_spline_with(
        polygon,
        ThetaBasis::cubic(num_controls)?,
        Parametrization::ArcLength,
    )
}

pub fn fit_spline_with(
    polygon: &[Vec2],
    basis: ThetaBasis,
    parametrization: Parametrization,
) -> Result<SplineFit> {
    let mut points = polygon.to_vec();
    if points.len() > 1 && points.first() == points.last() {
        points.pop();
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::invalid("polygon has non-finite coordinates"));
    }
    if points.len() < basis.num_controls() {
        return Err(Error::RankDeficient {
            points: points.len(),
            controls: basis.num_controls(),
        });
    }
    let samples = match parametrization {
        Parametrization::ArcLength => resample_arc_length(&points, points.len())?,
        Parametrization::Uniform => points,
    };
    let m = samples.len();
    let params: Vec<f64> = (0..m).map(|k| TAU * k as f64 / m as f64).collect();
    fit_samples(&params, &samples, basis)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn circle_points(n: usize, r: f64) -> Vec<Vec2> {
        (0..n)
            .map(|k| {
                let a = TAU * k as f64 / n as f64;
                Vec2::new(r * a.cos(), r * a.sin())
            })
            .collect()
    }

    #[test]
    fn dense_circle_fit_has_small_residual() {
        let fit = fit_spline(&circle_points(200, 1.0), 40).unwrap();
        assert!(fit.rms_residual < 1e-4, "{}", fit.rms_residual);
    }

    #[test]
    fn too_few_points_is_rank_deficient() {
        let err = fit_spline(&circle_points(5, 1.0), 40).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { points: 5, controls: 40 }));
    }

    #[test]
    fn fit_is_a_projection_onto_the_spline_space() {
        let basis = ThetaBasis::cubic(12).unwrap();
        let controls: Vec<Vec2> = (0..12)
            .map(|j| {
                let a = basis.center(j);
                Vec2::new((2.0 + 0.3 * (3.0 * a).sin()) * a.cos(), 1.5 * a.sin())
            })
            .collect();
        let curve = SplineCurve::new(basis, controls.clone()).unwrap();
        let samples = curve.sample(300);
        let fit = fit_spline_with(&samples, basis, Parametrization::Uniform).unwrap();
        for (a, b) in fit.curve.controls().iter().zip(&controls) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn resampling_is_uniform_in_arc_length() {
        let square = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let r = resample_arc_length(&square, 8).unwrap();
        assert!((r[1] - Vec2::new(0.5, 0.0)).norm() < 1e-15);
        assert!((r[3] - Vec2::new(1.0, 0.5)).norm() < 1e-15);
        assert!((r[7] - Vec2::new(0.0, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn closing_duplicate_is_dropped() {
        let mut pts = circle_points(60, 2.0);
        pts.push(pts[0]);
        let a = fit_spline(&pts, 20).unwrap();
        let b = fit_spline(&pts[..60], 20).unwrap();
        assert_eq!(a.curve.controls(), b.curve.controls());
    }
}
