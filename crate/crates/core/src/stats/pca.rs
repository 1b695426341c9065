//! Principal component analysis in the tangent space at the mean, with
//! respect to the Sobolev inner product `G_c̄`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::TangentVector;
use crate::error::{Error, Result};
use crate::sobolev::{MetricCoefficients, SobolevMetric};
use crate::spline::{SplineCurve, Vec2};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaResult {
    pub mean: SplineCurve,
    /// Centered mean of the tangent vectors.
    pub center: Vec<Vec2>,
    /// `G_c̄`-orthonormal principal directions, one per positive eigenvalue.
    pub directions: Vec<TangentVector>,
    /// Variances along each direction (eigenvalues of the centered Gram
    /// matrix divided by `n`), non-increasing. All `n` are listed.
    pub eigenvalues: Vec<f64>,
    /// `scores[j][m] = G_c̄(v_j − v̄, w_m)`.
    pub scores: Vec<Vec<f64>>,
    /// Centered Gram matrix `K_jl = G_c̄(v_j − v̄, v_l − v̄)`, row-major.
    pub gram: Vec<f64>,
}

impl PcaResult {
    pub fn explained_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.eigenvalues.iter().map(|v| v.max(0.0)).sum();
        self.eigenvalues
            .iter()
            .map(|v| if total > 0.0 { v.max(0.0) / total } else { 0.0 })
            .collect()
    }

    pub fn gram_matrix(&self) -> DMatrix<f64> {
        let n = self.scores.len();
        DMatrix::from_row_slice(n, n, &self.gram)
    }
}

/// Relative size below which an eigenvalue is treated as zero.
const RANK_TOL: f64 = 1e-12;

/// `Σ_ij M_ij ⟨h_i, k_j⟩` with the metric Gram matrix `M`.
fn inner(m: &DMatrix<f64>, h: &[Vec2], k: &[Vec2]) -> f64 {
    let mut s = 0.0;
    for (i, hi) in h.iter().enumerate() {
        for (j, kj) in k.iter().enumerate() {
            s += m[(i, j)] * hi.dot(kj);
        }
    }
    s
}

pub fn tangent_pca(
    mean: &SplineCurve,
    vectors: &[TangentVector],
    coeffs: &MetricCoefficients,
) -> Result<PcaResult> {
    let n = vectors.len();
    if n < 2 {
        return Err(Error::invalid("tangent PCA needs at least two vectors"));
    }
    let nc = mean.num_controls();
    if vectors.iter().any(|v| v.coefficients.len() != nc) {
        return Err(Error::invalid("tangent vectors do not match the mean's basis"));
    }
    let metric = SobolevMetric::new(*mean.basis(), *coeffs).gram(mean)?;
    let center: Vec<Vec2> = (0..nc)
        .map(|i| vectors.iter().map(|v| v.coefficients[i]).sum::<Vec2>() / n as f64)
        .collect();
    let centered: Vec<Vec<Vec2>> = vectors
        .iter()
        .map(|v| v.coefficients.iter().zip(&center).map(|(a, b)| a - b).collect())
        .collect();
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = inner(&metric, &centered[a], &centered[b]);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(k.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let top = eig.eigenvalues[order[0]].max(0.0);

    let mut directions = Vec::new();
    let mut scores = vec![Vec::new(); n];
    for &m in &order {
        let lambda = eig.eigenvalues[m];
        if !(lambda > RANK_TOL * top && lambda > 0.0) {
            break;
        }
        let a = eig.eigenvectors.column(m);
        let s = lambda.sqrt();
        let coefficients = (0..nc)
            .map(|i| (0..n).map(|j| centered[j][i] * a[j]).sum::<Vec2>() / s)
            .collect();
        directions.push(TangentVector {
            base: mean.clone(),
            coefficients,
        });
        for j in 0..n {
            scores[j].push(s * a[j]);
        }
    }
    Ok(PcaResult {
        mean: mean.clone(),
        center,
        directions,
        eigenvalues: order.iter().map(|&m| eig.eigenvalues[m] / n as f64).collect(),
        scores,
        gram: k.transpose().as_slice().to_vec(),
    })
}

/// First-order curves `c̄ + α w_m` for each amplitude `α`.
pub fn principal_geodesic_endpoints(
    pca: &PcaResult,
    direction: usize,
    amplitudes: &[f64],
) -> Result<Vec<SplineCurve>> {
    let w = pca
        .directions
        .get(direction)
        .ok_or_else(|| Error::invalid(format!("no principal direction {direction}")))?;
    amplitudes
        .iter()
        .map(|&alpha| {
            let controls = pca
                .mean
                .controls()
                .iter()
                .zip(&w.coefficients)
                .map(|(c, v)| c + v * alpha)
                .collect();
            SplineCurve::new(*pca.mean.basis(), controls)
        })
        .collect()
}
