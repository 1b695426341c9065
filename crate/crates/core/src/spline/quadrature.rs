//! Composite Gauss-Legendre quadrature on knot intervals with precomputed
//! basis tables.

use std::f64::consts::PI;

use super::basis::{BasisValues, ThetaBasis, TimeBasis};
use super::Vec2;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one quadrature point");
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            // three-term recurrence for P_n; dp is P_n'
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn composite(breaks: &[f64], points: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(points);
    let mut sites = Vec::with_capacity((breaks.len() - 1) * points);
    let mut weights = Vec::with_capacity(sites.capacity());
    for iv in breaks.windows(2) {
        let (a, b) = (iv[0], iv[1]);
        let half = 0.5 * (b - a);
        for (xi, wi) in x.iter().zip(&w) {
            sites.push(a + half * (xi + 1.0));
            weights.push(half * wi);
        }
    }
    (sites, weights)
}

/// Values `c`, `c_θ`, `c_θθ` of a coefficient field at quadrature sites.
#[derive(Debug, Clone, Default)]
pub struct CurveJets {
    pub pos: Vec<Vec2>,
    pub d1: Vec<Vec2>,
    pub d2: Vec<Vec2>,
}

impl CurveJets {
    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    /// Jets of an analytically known curve sampled at `sites`.
    pub fn from_fn<F: Fn(f64) -> [Vec2; 3]>(sites: &[f64], f: F) -> Self {
        let mut jets = Self::default();
        for &s in sites {
            let [p, d1, d2] = f(s);
            jets.pos.push(p);
            jets.d1.push(d1);
            jets.d2.push(d2);
        }
        jets
    }
}

/// Quadrature in θ over one period, with basis values and the first two
/// derivatives tabulated at each site.
#[derive(Debug, Clone)]
pub struct CurveQuadrature {
    basis: ThetaBasis,
    pub sites: Vec<f64>,
    pub weights: Vec<f64>,
    first: Vec<usize>,
    vals: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl CurveQuadrature {
    /// Exact for products of two cubic splines on each knot interval.
    pub const DEFAULT_POINTS: usize = 4;

    pub fn new(basis: ThetaBasis) -> Self {
        Self::with_points(basis, Self::DEFAULT_POINTS)
    }

    pub fn with_points(basis: ThetaBasis, points: usize) -> Self {
        let (sites, weights) = composite(&basis.breakpoints(), points);
        let width = basis.degree() + 1;
        let mut first = Vec::with_capacity(sites.len());
        let mut vals = Vec::with_capacity(sites.len() * width);
        let mut d1 = Vec::with_capacity(sites.len() * width);
        let mut d2 = Vec::with_capacity(sites.len() * width);
        for &s in &sites {
            let v = basis.eval(s, 2);
            first.push(v.first);
            vals.extend_from_slice(&v.ders[0]);
            d1.extend_from_slice(&v.ders[1]);
            d2.extend_from_slice(&v.ders[2]);
        }
        Self {
            basis,
            sites,
            weights,
            first,
            vals,
            d1,
            d2,
        }
    }

    pub fn basis(&self) -> &ThetaBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Tabulated basis values at site `r`: `(index, C, C', C'')`.
    pub fn site(&self, r: usize) -> impl Iterator<Item = (usize, f64, f64, f64)> + '_ {
        let width = self.basis.degree() + 1;
        let n = self.basis.num_controls();
        let base = r * width;
        let first = self.first[r];
        (0..width).map(move |a| {
            (
                (first + a) % n,
                self.vals[base + a],
                self.d1[base + a],
                self.d2[base + a],
            )
        })
    }

    /// Derivatives are accumulated from differences to the first active
    /// control (the derivative weights sum to zero), so constant fields have
    /// exactly vanishing derivatives.
    pub fn jets(&self, controls: &[Vec2]) -> CurveJets {
        let m = self.len();
        let mut jets = CurveJets {
            pos: Vec::with_capacity(m),
            d1: Vec::with_capacity(m),
            d2: Vec::with_capacity(m),
        };
        for r in 0..m {
            let (mut p, mut a, mut b) = (Vec2::zeros(), Vec2::zeros(), Vec2::zeros());
            let reference = controls[self.first[r]];
            for (j, v, dv, ddv) in self.site(r) {
                let c = controls[j];
                let diff = c - reference;
                p += c * v;
                a += diff * dv;
                b += diff * ddv;
            }
            jets.pos.push(p);
            jets.d1.push(a);
            jets.d2.push(b);
        }
        jets
    }

    /// Adds the transpose of [`CurveQuadrature::jets`] applied to per-site
    /// adjoints `(g0, g1, g2)` to `out`. Empty slices are skipped.
    pub fn pullback(&self, g0: &[Vec2], g1: &[Vec2], g2: &[Vec2], out: &mut [Vec2]) {
        for r in 0..self.len() {
            let mut to_reference = Vec2::zeros();
            for (j, v, dv, ddv) in self.site(r) {
                let mut acc = Vec2::zeros();
                let mut diff = Vec2::zeros();
                if !g0.is_empty() {
                    acc += g0[r] * v;
                }
                if !g1.is_empty() {
                    diff += g1[r] * dv;
                }
                if !g2.is_empty() {
                    diff += g2[r] * ddv;
                }
                out[j] += acc + diff;
                to_reference -= diff;
            }
            out[self.first[r]] += to_reference;
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Quadrature in `t` on `[0, 1]` with basis values and first derivatives.
#[derive(Debug, Clone)]
pub struct TimeQuadrature {
    basis: TimeBasis,
    pub sites: Vec<f64>,
    pub weights: Vec<f64>,
    values: Vec<BasisValues>,
}

impl TimeQuadrature {
    /// Exact for products of two quadratic splines on each knot interval.
    pub const DEFAULT_POINTS: usize = 3;

    pub fn new(basis: TimeBasis) -> Self {
        Self::with_points(basis, Self::DEFAULT_POINTS)
    }

    pub fn with_points(basis: TimeBasis, points: usize) -> Self {
        let (sites, weights) = composite(&basis.breakpoints(), points);
        let values = sites.iter().map(|&t| basis.eval(t, 1)).collect();
        Self {
            basis,
            sites,
            weights,
            values,
        }
    }

    pub fn basis(&self) -> &TimeBasis {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// `(row index, B, B')` for the nonzero time basis functions at site `q`.
    pub fn site(&self, q: usize) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let v = &self.values[q];
        (0..v.len()).map(move |a| (v.index(a), v.ders[0][a], v.ders[1][a]))
    }
}

/// Tensor-product quadrature for paths of curves.
#[derive(Debug, Clone)]
pub struct PathQuadrature {
    pub time: TimeQuadrature,
    pub theta: CurveQuadrature,
}

impl PathQuadrature {
    pub fn new(time: TimeBasis, theta: ThetaBasis) -> Self {
        Self {
            time: TimeQuadrature::new(time),
            theta: CurveQuadrature::new(theta),
        }
    }
}
