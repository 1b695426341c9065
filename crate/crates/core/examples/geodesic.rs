//! Geodesic between an ellipse and a wavy blob at the default schedule.

use curvematch::matcher::{geodesic_snapshots, solve_match};
use curvematch::spline::ThetaBasis;
use curvematch::varifold::Zonal;
use curvematch::{MatchConfig, MatchProblem, SplineCurve, VarifoldKernel, Vec2};

fn main() -> curvematch::Result<()> {
    let basis = ThetaBasis::cubic(40)?;
    let ellipse = SplineCurve::from_fn(basis, |t| Vec2::new(1.2 * t.cos(), 0.7 * t.sin()))?;
    let blob = SplineCurve::from_fn(basis, |t| {
        let r = 1.0 + 0.15 * (3.0 * t).cos();
        Vec2::new(r * t.cos(), r * t.sin())
    })?;

    let sigma = 0.25 * 0.5 * (ellipse.diameter() + blob.diameter());
    let config = MatchConfig::new(VarifoldKernel::gaussian(sigma, Zonal::Binomial)?);
    let problem = MatchProblem::new(ellipse, blob, config)?;
    let result = solve_match(&problem)?;

    println!("energy     {:.6}", result.energy);
    println!("fidelity   {:.3e}", result.fidelity);
    println!("objective  {:.6}", result.objective);
    println!("distance   {:.6}", result.distance);
    for level in &result.levels {
        println!(
            "level {:?}: {} iterations, {} evaluations, {:?}",
            level.discretization, level.iterations, level.evaluations, level.termination
        );
    }
    for (t, c) in [0.0, 0.3, 0.6, 1.0]
        .iter()
        .zip(geodesic_snapshots(&result, &[0.0, 0.3, 0.6, 1.0]))
    {
        println!("t = {t:.1}: length {:.4}", c.length());
    }
    Ok(())
}
