//! Karcher mean of a few ellipses and tangent PCA at the mean.

use curvematch::matcher::{Discretization, OptimizerSettings};
use curvematch::spline::ThetaBasis;
use curvematch::stats::{karcher_mean, log_map, tangent_pca};
use curvematch::varifold::Zonal;
use curvematch::{MatchConfig, SplineCurve, VarifoldKernel, Vec2};

fn main() -> curvematch::Result<()> {
    let basis = ThetaBasis::cubic(20)?;
    let shapes: Vec<SplineCurve> = [(1.4, 0.7), (1.2, 0.8), (1.0, 0.9), (1.3, 0.6)]
        .iter()
        .map(|&(a, b)| SplineCurve::from_fn(basis, |t| Vec2::new(a * t.cos(), b * t.sin())))
        .collect::<curvematch::Result<_>>()?;

    let mut config = MatchConfig::new(VarifoldKernel::gaussian(0.5, Zonal::Binomial)?);
    config.optimizer = OptimizerSettings::single_level(Discretization::new(5, 20, 60));
    let k = karcher_mean(&shapes, &config)?;
    println!(
        "mean: {} iterations, converged {}, objective {:.6}",
        k.iterations, k.converged, k.objective
    );
    for (j, d) in k.distances.iter().enumerate() {
        println!("  distance to shape {j}: {d:.5}");
    }

    let vectors: Vec<_> = k.paths.iter().map(log_map).collect();
    let pca = tangent_pca(&k.mean, &vectors, &config.metric)?;
    let ratio = pca.explained_variance_ratio();
    for (m, (e, r)) in pca.eigenvalues.iter().zip(&ratio).enumerate() {
        println!("  component {}: variance {e:.4e} ({:.1}%)", m + 1, 100.0 * r);
    }
    Ok(())
}
