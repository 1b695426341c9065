//! Least-squares fits of a sampled star outline with growing numbers of
//! control points.

use curvematch::spline::fit_spline;
use curvematch::Vec2;

fn main() -> curvematch::Result<()> {
    let polygon: Vec<Vec2> = (0..300)
        .map(|k| {
            let t = std::f64::consts::TAU * k as f64 / 300.0;
            let r = 1.0 + 0.25 * (5.0 * t).cos();
            Vec2::new(r * t.cos(), r * t.sin())
        })
        .collect();
    for n in [10, 20, 40, 80] {
        let fit = fit_spline(&polygon, n)?;
        println!(
            "{n:3} controls: rms residual {:.3e}, max {:.3e}, length {:.5}",
            fit.rms_residual,
            fit.max_residual,
            fit.curve.length()
        );
    }
    Ok(())
}
