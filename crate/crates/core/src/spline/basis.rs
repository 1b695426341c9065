//! B-spline basis functions on uniform knot sequences.
//!
//! Two flavours are needed: a periodic basis on `[0, 2π)` for the curve
//! parameter and a clamped basis on `[0, 1]` (full knot multiplicity at both
//! ends) for time. Both are evaluated with the Cox-de Boor triangle, including
//! derivatives, so the degree is not hard-wired.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nonzero basis functions at one parameter value.
///
/// `ders[k][r]` is the `k`-th derivative of basis function `index(r)`.
#[derive(Debug, Clone)]
pub struct BasisValues {
    pub first: usize,
    pub modulus: Option<usize>,
    pub ders: Vec<Vec<f64>>,
}

impl BasisValues {
    /// Control index of the `r`-th nonzero function.
    #[inline]
    pub fn index(&self, r: usize) -> usize {
        match self.modulus {
            Some(n) => (self.first + r) % n,
            None => self.first + r,
        }
    }

    pub fn len(&self) -> usize {
        self.ders[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.ders[0].is_empty()
    }
}

/// Nonzero basis functions and their derivatives up to `nderiv` at `x`,
/// where `knot(span) <= x < knot(span + 1)`.
fn cox_de_boor<K: Fn(usize) -> f64>(
    knot: K,
    span: usize,
    x: f64,
    degree: usize,
    nderiv: usize,
) -> Vec<Vec<f64>> {
    let p = degree;
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = x - knot(span + 1 - j);
        right[j] = knot(span + j) - x;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = ndu[r][j - 1] / ndu[j][r];
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }

    let mut ders = vec![vec![0.0; p + 1]; nderiv + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let n = nderiv.min(p);
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let rk = rk as usize;
                a[s2][0] = a[s1][0] / ndu[pk + 1][rk];
                d = a[s2][0] * ndu[rk][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize {
                k - 1
            } else {
                p - r
            };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut factor = p as f64;
    for (k, row) in ders.iter_mut().enumerate().skip(1).take(n) {
        for v in row.iter_mut() {
            *v *= factor;
        }
        factor *= (p - k) as f64;
    }
    ders
}

/// Periodic B-spline basis on `[0, 2π)` with equidistant simple knots.
///
/// Basis function `j` is supported on `[j h, (j + degree + 1) h]` taken
/// modulo `2π`, with `h = 2π / num_controls`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThetaBasis {
    degree: usize,
    num_controls: usize,
}

impl ThetaBasis {
    pub const DEFAULT_DEGREE: usize = 3;

    pub fn new(num_controls: usize, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("theta basis degree must be positive"));
        }
        if num_controls < degree + 1 {
            return Err(Error::invalid(format!(
                "theta basis needs at least {} controls for degree {degree}, got {num_controls}",
                degree + 1
            )));
        }
        Ok(Self {
            degree,
            num_controls,
        })
    }

    pub fn cubic(num_controls: usize) -> Result<Self> {
        Self::new(num_controls, Self::DEFAULT_DEGREE)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_controls(&self) -> usize {
        self.num_controls
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.num_controls as f64
    }

    /// Knot interval boundaries `0, h, ..., 2π`.
    pub fn breakpoints(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..=self.num_controls).map(|k| k as f64 * h).collect()
    }

    /// Parameter at the center of the support of basis function `j`.
    pub fn center(&self, j: usize) -> f64 {
        (j as f64 + 0.5 * (self.degree + 1) as f64) * self.spacing()
    }

    pub fn eval(&self, theta: f64, nderiv: usize) -> BasisValues {
        let n = self.num_controls;
        let p = self.degree;
        let h = self.spacing();
        let x = theta.rem_euclid(TAU);
        let s = ((x / h).floor() as usize).min(n - 1);
        // Extended knot k sits at (k - p) h; the span is s + p.
        let knot = |k: usize| (k as f64 - p as f64) * h;
        let ders = cox_de_boor(knot, s + p, x, p, nderiv);
        BasisValues {
            first: (s + n - p) % n,
            modulus: Some(n),
            ders,
        }
    }
}

/// Clamped B-spline basis on `[0, 1]`: equidistant simple interior knots and
/// knot multiplicity `degree + 1` at both ends, so the first and last basis
/// functions interpolate the end values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeBasis {
    degree: usize,
    num_controls: usize,
}

impl TimeBasis {
    pub const DEFAULT_DEGREE: usize = 2;

    pub fn new(num_controls: usize, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("time basis degree must be positive"));
        }
        if num_controls < degree + 1 {
            return Err(Error::invalid(format!(
                "time basis needs at least {} controls for degree {degree}, got {num_controls}",
                degree + 1
            )));
        }
        Ok(Self {
            degree,
            num_controls,
        })
    }

    pub fn quadratic(num_controls: usize) -> Result<Self> {
        Self::new(num_controls, Self::DEFAULT_DEGREE)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_controls(&self) -> usize {
        self.num_controls
    }

    pub fn num_intervals(&self) -> usize {
        self.num_controls - self.degree
    }

    fn knot(&self, k: usize) -> f64 {
        let p = self.degree;
        if k <= p {
            0.0
        } else if k >= self.num_controls {
            1.0
        } else {
            (k - p) as f64 / self.num_intervals() as f64
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let m = self.num_intervals();
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    /// Greville abscissae. Control rows placed at `f(τ_i)` reproduce any
    /// `f` that is affine in `t`.
    pub fn greville(&self) -> Vec<f64> {
        let p = self.degree;
        (0..self.num_controls)
            .map(|i| (1..=p).map(|k| self.knot(i + k)).sum::<f64>() / p as f64)
            .collect()
    }

    pub fn eval(&self, t: f64, nderiv: usize) -> BasisValues {
        let p = self.degree;
        let m = self.num_intervals();
        let x = t.clamp(0.0, 1.0);
        let s = p + ((x * m as f64).floor() as usize).min(m - 1);
        let ders = cox_de_boor(|k| self.knot(k), s, x, p, nderiv);
        BasisValues {
            first: s - p,
            modulus: None,
            ders,
        }
    }
}

/// Time and curve bases with the minimum sizes accepted for path
/// discretizations (`N_t >= 3`, `N_θ >= 6`).
pub fn make_bases(num_time: usize, num_theta: usize) -> Result<(TimeBasis, ThetaBasis)> {
    if num_time < 3 {
        return Err(Error::invalid(format!(
            "N_t = {num_time} is below the minimum of 3"
        )));
    }
    if num_theta < 6 {
        return Err(Error::invalid(format!(
            "N_theta = {num_theta} is below the minimum of 6"
        )));
    }
    Ok((TimeBasis::quadratic(num_time)?, ThetaBasis::cubic(num_theta)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_theta(b: &ThetaBasis, theta: f64, k: usize) -> Vec<f64> {
        let v = b.eval(theta, k);
        let mut out = vec![0.0; b.num_controls()];
        for r in 0..v.len() {
            out[v.index(r)] += v.ders[k][r];
        }
        out
    }

    fn dense_time(b: &TimeBasis, t: f64, k: usize) -> Vec<f64> {
        let v = b.eval(t, k);
        let mut out = vec![0.0; b.num_controls()];
        for r in 0..v.len() {
            out[v.index(r)] += v.ders[k][r];
        }
        out
    }

    #[test]
    fn rejects_small_sizes() {
        assert!(make_bases(2, 40).is_err());
        assert!(make_bases(10, 5).is_err());
        assert!(make_bases(3, 6).is_ok());
    }

    #[test]
    fn uniform_cubic_matches_closed_form() {
        let b = ThetaBasis::cubic(12).unwrap();
        let h = b.spacing();
        let u: f64 = 0.3;
        let theta = 5.0 * h + u * h;
        let v = b.eval(theta, 0);
        let expected = [
            (1.0 - u).powi(3) / 6.0,
            (3.0 * u.powi(3) - 6.0 * u * u + 4.0) / 6.0,
            (-3.0 * u.powi(3) + 3.0 * u * u + 3.0 * u + 1.0) / 6.0,
            u.powi(3) / 6.0,
        ];
        assert_eq!(v.first, 2);
        for r in 0..4 {
            assert!((v.ders[0][r] - expected[r]).abs() < 1e-14);
        }
    }

    #[test]
    fn time_basis_interpolates_endpoints() {
        let (bt, _) = make_bases(10, 40).unwrap();
        let at0 = dense_time(&bt, 0.0, 0);
        assert_eq!(at0[0], 1.0);
        assert!(at0[1..].iter().all(|&x| x == 0.0));
        let at1 = dense_time(&bt, 1.0, 0);
        assert_eq!(at1[9], 1.0);
        assert!(at1[..9].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let b = ThetaBasis::cubic(9).unwrap();
        let eps = 1e-6;
        for k in 0..50 {
            let theta = 0.0371 + k as f64 * 0.1237;
            for order in 1..=2 {
                let d = dense_theta(&b, theta, order);
                let lo = dense_theta(&b, theta - eps, order - 1);
                let hi = dense_theta(&b, theta + eps, order - 1);
                for j in 0..9 {
                    let fd = (hi[j] - lo[j]) / (2.0 * eps);
                    assert!((d[j] - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{order} {j}");
                }
            }
        }
        let bt = TimeBasis::quadratic(7).unwrap();
        for k in 1..40 {
            let t = k as f64 / 40.0 + 0.003;
            let d = dense_time(&bt, t, 1);
            let lo = dense_time(&bt, t - eps, 0);
            let hi = dense_time(&bt, t + eps, 0);
            for i in 0..7 {
                assert!((d[i] - (hi[i] - lo[i]) / (2.0 * eps)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn greville_reproduces_linear_functions() {
        let bt = TimeBasis::quadratic(6).unwrap();
        let g = bt.greville();
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            let v = dense_time(&bt, t, 0);
            let rebuilt: f64 = v.iter().zip(&g).map(|(b, tau)| b * tau).sum();
            assert!((rebuilt - t).abs() < 1e-14);
        }
    }

    #[test]
    fn local_support_spans_degree_plus_one_intervals() {
        let b = ThetaBasis::cubic(10).unwrap();
        let h = b.spacing();
        for i in 0..10 {
            let theta = (i as f64 + 0.5) * h;
            let support: Vec<usize> = dense_theta(&b, theta, 0)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(j, _)| j)
                .collect();
            assert_eq!(support.len(), 4);
            // function 0 is nonzero on intervals 0..=3 only
            assert_eq!(support.contains(&0), i <= 3);
        }
    }

    proptest! {
        #[test]
        fn partition_of_unity(t in 0.0f64..=1.0, theta in -10.0f64..10.0, nt in 3usize..15, nth in 6usize..50) {
            let (bt, bth) = make_bases(nt, nth).unwrap();
            let s: f64 = bt.eval(t, 0).ders[0].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            let s: f64 = bth.eval(theta, 0).ders[0].iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn periodic_in_theta(theta in 0.0f64..TAU) {
            let b = ThetaBasis::cubic(17).unwrap();
            let a = dense_theta(&b, theta, 1);
            let c = dense_theta(&b, theta + TAU, 1);
            for (x, y) in a.iter().zip(&c) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
