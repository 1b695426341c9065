//! Second-order Sobolev metric with constant coefficients,
//!
//! ```text
//! G_c(h, k) = ∫ a0 ⟨h, k⟩ + a1 ⟨D_s h, D_s k⟩ + a2 ⟨D_s² h, D_s² k⟩ ds,
//! ```
//!
//! together with the path energy `E(c) = ∫ G_c(t)(c_t, c_t) dt`, the path
//! length, and the gradient of the quadrature-discretized energy with
//! respect to the control net.
//!
//! All integrals are evaluated in `θ` as `∫ (...) |c_θ| dθ` on the
//! composite Gauss grid, so the gradient is exact for the discrete sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{
    check_speeds, ArcLength, CurveJets, CurveQuadrature, PathControlNet, PathQuadrature,
    SplineCurve, ThetaBasis, TimeBasis, Vec2,
};

/// Weights `a0, a1, a2` of the zeroth, first and second order terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Default for MetricCoefficients {
    fn default() -> Self {
        Self {
            a0: 1.0,
            a1: 1.0,
            a2: 1.0,
        }
    }
}

impl MetricCoefficients {
    /// Coefficients of a second-order metric: `a0 > 0`, `a1 >= 0`, `a2 > 0`.
    pub fn new(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        let c = Self { a0, a1, a2 };
        c.validate()?;
        Ok(c)
    }

    /// Any non-negative coefficients, including the first-order (`a2 = 0`)
    /// and L² (`a1 = a2 = 0`) special cases.
    pub fn lower_order(a0: f64, a1: f64, a2: f64) -> Result<Self> {
        if [a0, a1, a2].iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::invalid("metric coefficients must be finite and >= 0"));
        }
        Ok(Self { a0, a1, a2 })
    }

    pub fn validate(&self) -> Result<()> {
        Self::lower_order(self.a0, self.a1, self.a2)?;
        if !(self.a0 > 0.0 && self.a2 > 0.0) {
            return Err(Error::invalid("a0 and a2 must be strictly positive"));
        }
        Ok(())
    }
}

/// Everything the energy density needs at one quadrature site: the base
/// curve derivatives `c_θ, c_θθ` and the tangent field `h, h_θ, h_θθ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSite {
    pub c1: Vec2,
    pub c2: Vec2,
    pub h0: Vec2,
    pub h1: Vec2,
    pub h2: Vec2,
}

impl MetricCoefficients {
    /// Density of `G_c(h, k)` with respect to `dθ`.
    fn bilinear_density(&self, c1: Vec2, c2: Vec2, h: [Vec2; 3], k: [Vec2; 3]) -> f64 {
        let s = c1.norm();
        let m = c1.dot(&c2) / (s * s);
        let rh = h[2] - h[1] * m;
        let rk = k[2] - k[1] * m;
        self.a0 * h[0].dot(&k[0]) * s
            + self.a1 * h[1].dot(&k[1]) / s
            + self.a2 * rh.dot(&rk) / (s * s * s)
    }

    /// Density of `G_c(h, h)` and its partial derivatives with respect to
    /// the five site vectors.
    fn density_and_partials(&self, site: &PathSite) -> (f64, PathSite) {
        let PathSite { c1, c2, h0, h1, h2 } = *site;
        let s2 = c1.norm_squared();
        let s = s2.sqrt();
        let s3 = s2 * s;
        let uv = c1.dot(&c2);
        let m = uv / s2;
        let r = h2 - h1 * m;
        let hh = h0.norm_squared();
        let pp = h1.norm_squared();
        let rr = r.norm_squared();
        let f = self.a0 * hh * s + self.a1 * pp / s + self.a2 * rr / s3;

        let fm = -2.0 * self.a2 * r.dot(&h1) / s3;
        let d_h0 = h0 * (2.0 * self.a0 * s);
        let d_h1 = h1 * (2.0 * self.a1 / s) - r * (2.0 * self.a2 * m / s3);
        let d_h2 = r * (2.0 * self.a2 / s3);
        let d_c1 = c1
            * (self.a0 * hh / s - self.a1 * pp / s3 - 3.0 * self.a2 * rr / (s3 * s2)
                - 2.0 * fm * uv / (s2 * s2))
            + c2 * (fm / s2);
        let d_c2 = c1 * (fm / s2);
        (
            f,
            PathSite {
                c1: d_c1,
                c2: d_c2,
                h0: d_h0,
                h1: d_h1,
                h2: d_h2,
            },
        )
    }
}

/// The metric `G_c` on coefficient fields of a fixed periodic basis.
#[derive(Debug, Clone)]
pub struct SobolevMetric {
    coeffs: MetricCoefficients,
    quad: CurveQuadrature,
}

impl SobolevMetric {
    pub fn new(basis: ThetaBasis, coeffs: MetricCoefficients) -> Self {
        Self {
            coeffs,
            quad: CurveQuadrature::new(basis),
        }
    }

    pub fn coefficients(&self) -> &MetricCoefficients {
        &self.coeffs
    }

    pub fn quadrature(&self) -> &CurveQuadrature {
        &self.quad
    }

    /// `G_c(h, k)` for spline coefficient fields `h`, `k` on the basis of `c`.
    pub fn inner(&self, c: &SplineCurve, h: &[Vec2], k: &[Vec2]) -> Result<f64> {
        if c.basis() != self.quad.basis() {
            return Err(Error::invalid("curve basis differs from metric basis"));
        }
        let cj = self.quad.jets(c.controls());
        self.inner_jets(&cj, &self.quad.jets(h), &self.quad.jets(k))
    }

    pub fn norm_sq(&self, c: &SplineCurve, h: &[Vec2]) -> Result<f64> {
        self.inner(c, h, h)
    }

    /// `G_c(h, k)` from values at the quadrature sites. Useful when `c`, `h`,
    /// `k` are known in closed form rather than as splines.
    pub fn inner_jets(&self, c: &CurveJets, h: &CurveJets, k: &CurveJets) -> Result<f64> {
        let speeds: Vec<f64> = c.d1.iter().map(|d| d.norm()).collect();
        check_speeds(&speeds, &self.quad.sites, None)?;
        let mut total = 0.0;
        for (r, w) in self.quad.weights.iter().enumerate() {
            total += w * self.coeffs.bilinear_density(
                c.d1[r],
                c.d2[r],
                [h.pos[r], h.d1[r], h.d2[r]],
                [k.pos[r], k.d1[r], k.d2[r]],
            );
        }
        Ok(total)
    }

    /// Matrix `M` with `G_c(h, k) = Σ_ij M_ij ⟨h_i, k_j⟩` for coefficient
    /// fields `h`, `k`. The metric acts identically on both coordinates.
    pub fn gram(&self, c: &SplineCurve) -> Result<nalgebra::DMatrix<f64>> {
        let cj = self.quad.jets(c.controls());
        let ops = ArcLength::new(&cj, &self.quad.sites)?;
        let n = c.num_controls();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for (r, w) in self.quad.weights.iter().enumerate() {
            let s = ops.speed()[r];
            let stretch = cj.d1[r].dot(&cj.d2[r]) / (s * s);
            let site: Vec<(usize, f64, f64)> = self
                .quad
                .site(r)
                .map(|(j, v, dv, ddv)| (j, v, (ddv - stretch * dv)))
                .collect();
            let dvs: Vec<f64> = self.quad.site(r).map(|(_, _, dv, _)| dv).collect();
            for (a, &(i, vi, ri)) in site.iter().enumerate() {
                for (b, &(j, vj, rj)) in site.iter().enumerate() {
                    m[(i, j)] += w
                        * (self.coeffs.a0 * vi * vj * s
                            + self.coeffs.a1 * dvs[a] * dvs[b] / s
                            + self.coeffs.a2 * ri * rj / (s * s * s));
                }
            }
        }
        Ok(m)
    }
}

/// `G_c(h, k)` with a freshly built quadrature for `c`'s basis.
pub fn metric_inner(
    c: &SplineCurve,
    h: &[Vec2],
    k: &[Vec2],
    coeffs: &MetricCoefficients,
) -> Result<f64> {
    SobolevMetric::new(*c.basis(), *coeffs).inner(c, h, k)
}

/// Path energy and its split over the time quadrature sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub energy: f64,
    /// `w_q G_{c(t_q)}(c_t, c_t)` for each time quadrature site `t_q`.
    pub contributions: Vec<f64>,
}

/// Path energy, length and gradient on a fixed pair of bases.
#[derive(Debug, Clone)]
pub struct PathEnergy {
    coeffs: MetricCoefficients,
    quad: PathQuadrature,
}

struct SliceJets {
    c: CurveJets,
    h: CurveJets,
}

impl PathEnergy {
    pub fn new(time: TimeBasis, theta: ThetaBasis, coeffs: MetricCoefficients) -> Self {
        Self {
            coeffs,
            quad: PathQuadrature::new(time, theta),
        }
    }

    pub fn for_net(net: &PathControlNet, coeffs: MetricCoefficients) -> Self {
        Self::new(*net.time_basis(), *net.theta_basis(), coeffs)
    }

    pub fn coefficients(&self) -> &MetricCoefficients {
        &self.coeffs
    }

    pub fn quadrature(&self) -> &PathQuadrature {
        &self.quad
    }

    fn check_net(&self, net: &PathControlNet) -> Result<()> {
        if net.time_basis() != self.quad.time.basis() || net.theta_basis() != self.quad.theta.basis()
        {
            return Err(Error::invalid("control net does not match energy bases"));
        }
        Ok(())
    }

    /// Curve and velocity controls at time site `q`, as jets on the θ-grid.
    fn slice(&self, net: &PathControlNet, q: usize) -> SliceJets {
        let n = net.num_theta();
        let mut c = vec![Vec2::zeros(); n];
        let mut h = vec![Vec2::zeros(); n];
        let mut rows = self.quad.time.site(q);
        let (i0, b0, _) = rows.next().expect("time basis has support");
        let reference = net.row(i0);
        for (cj, r) in c.iter_mut().zip(reference) {
            *cj += r * b0;
        }
        // Velocity from differences to the first active row: Σ B'_i = 0.
        for (i, b, db) in rows {
            for (j, x) in net.row(i).iter().enumerate() {
                c[j] += x * b;
                h[j] += (x - reference[j]) * db;
            }
        }
        SliceJets {
            c: self.quad.theta.jets(&c),
            h: self.quad.theta.jets(&h),
        }
    }

    fn site_at(s: &SliceJets, r: usize) -> PathSite {
        PathSite {
            c1: s.c.d1[r],
            c2: s.c.d2[r],
            h0: s.h.pos[r],
            h1: s.h.d1[r],
            h2: s.h.d2[r],
        }
    }

    fn check_slice(&self, s: &SliceJets, q: usize) -> Result<()> {
        let speeds: Vec<f64> = s.c.d1.iter().map(|d| d.norm()).collect();
        check_speeds(&speeds, &self.quad.theta.sites, Some(self.quad.time.sites[q]))
    }

    /// `G` at every time site, before weighting by the time quadrature.
    fn slice_metrics(&self, net: &PathControlNet) -> Result<Vec<f64>> {
        self.check_net(net)?;
        (0..self.quad.time.len())
            .map(|q| {
                let s = self.slice(net, q);
                self.check_slice(&s, q)?;
                Ok(self
                    .quad
                    .theta
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(r, w)| w * self.coeffs.density_and_partials(&Self::site_at(&s, r)).0)
                    .sum())
            })
            .collect()
    }

    pub fn energy(&self, net: &PathControlNet) -> Result<EnergyReport> {
        let g = self.slice_metrics(net)?;
        let contributions: Vec<f64> = g
            .iter()
            .zip(&self.quad.time.weights)
            .map(|(g, w)| g * w)
            .collect();
        Ok(EnergyReport {
            energy: contributions.iter().sum(),
            contributions,
        })
    }

    /// Riemannian length `∫ sqrt(G(c_t, c_t)) dt` on the time grid.
    pub fn length(&self, net: &PathControlNet) -> Result<f64> {
        let g = self.slice_metrics(net)?;
        Ok(g.iter()
            .zip(&self.quad.time.weights)
            .map(|(g, w)| w * g.max(0.0).sqrt())
            .sum())
    }

    /// Energy of a path given in closed form: `site(t, θ)` must return the
    /// derivatives of the path at the quadrature site `(t, θ)`.
    pub fn energy_with<F: Fn(f64, f64) -> PathSite>(&self, site: F) -> Result<EnergyReport> {
        let mut contributions = Vec::with_capacity(self.quad.time.len());
        for (q, (&t, wt)) in self
            .quad
            .time
            .sites
            .iter()
            .zip(&self.quad.time.weights)
            .enumerate()
        {
            let sites: Vec<PathSite> = self.quad.theta.sites.iter().map(|&th| site(t, th)).collect();
            let speeds: Vec<f64> = sites.iter().map(|s| s.c1.norm()).collect();
            check_speeds(&speeds, &self.quad.theta.sites, Some(self.quad.time.sites[q]))?;
            let g: f64 = sites
                .iter()
                .zip(&self.quad.theta.weights)
                .map(|(s, w)| w * self.coeffs.density_and_partials(s).0)
                .sum();
            contributions.push(wt * g);
        }
        Ok(EnergyReport {
            energy: contributions.iter().sum(),
            contributions,
        })
    }

    /// Energy and its gradient with respect to every control point,
    /// row-major like the net. Row `0` holds the gradient with respect to the
    /// source curve; matching keeps that row fixed and ignores it.
    pub fn gradient(&self, net: &PathControlNet) -> Result<(EnergyReport, Vec<Vec2>)> {
        self.check_net(net)?;
        let n = net.num_theta();
        let m = self.quad.theta.len();
        let mut grad = vec![Vec2::zeros(); net.controls().len()];
        let mut contributions = Vec::with_capacity(self.quad.time.len());

        let mut gc1 = vec![Vec2::zeros(); m];
        let mut gc2 = vec![Vec2::zeros(); m];
        let mut gh0 = vec![Vec2::zeros(); m];
        let mut gh1 = vec![Vec2::zeros(); m];
        let mut gh2 = vec![Vec2::zeros(); m];
        for (q, wt) in self.quad.time.weights.iter().enumerate() {
            let s = self.slice(net, q);
            self.check_slice(&s, q)?;
            let mut g = 0.0;
            for (r, wr) in self.quad.theta.weights.iter().enumerate() {
                let (f, d) = self.coeffs.density_and_partials(&Self::site_at(&s, r));
                g += wr * f;
                let w = wt * wr;
                gc1[r] = d.c1 * w;
                gc2[r] = d.c2 * w;
                gh0[r] = d.h0 * w;
                gh1[r] = d.h1 * w;
                gh2[r] = d.h2 * w;
            }
            contributions.push(wt * g);

            let mut adj_c = vec![Vec2::zeros(); n];
            let mut adj_h = vec![Vec2::zeros(); n];
            self.quad.theta.pullback(&[], &gc1, &gc2, &mut adj_c);
            self.quad.theta.pullback(&gh0, &gh1, &gh2, &mut adj_h);

            let mut rows = self.quad.time.site(q);
            let (i0, b0, _) = rows.next().expect("time basis has support");
            let mut to_reference = vec![Vec2::zeros(); n];
            for j in 0..n {
                grad[i0 * n + j] += adj_c[j] * b0;
            }
            for (i, b, db) in rows {
                for j in 0..n {
                    let from_h = adj_h[j] * db;
                    grad[i * n + j] += adj_c[j] * b + from_h;
                    to_reference[j] -= from_h;
                }
            }
            for j in 0..n {
                grad[i0 * n + j] += to_reference[j];
            }
        }
        Ok((
            EnergyReport {
                energy: contributions.iter().sum(),
                contributions,
            },
            grad,
        ))
    }
}
