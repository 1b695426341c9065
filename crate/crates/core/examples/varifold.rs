//! Varifold distances: blind to parametrization, sensitive to position and
//! shape, and blind to orientation only with the squared zonal kernel.

use curvematch::spline::ThetaBasis;
use curvematch::varifold::{sample_polygon, varifold_dist_sq, Zonal};
use curvematch::{SplineCurve, VarifoldKernel, Vec2};

fn main() -> curvematch::Result<()> {
    let basis = ThetaBasis::cubic(30)?;
    let ellipse = SplineCurve::from_fn(basis, |t| Vec2::new(1.3 * t.cos(), 0.8 * t.sin()))?;
    let shifted_start = SplineCurve::from_fn(basis, |t| {
        let s = t + 0.3 * t.sin() + 1.0;
        Vec2::new(1.3 * s.cos(), 0.8 * s.sin())
    })?;
    let moved = ellipse.translated(Vec2::new(0.2, 0.0));
    let round = SplineCurve::circle(30, Vec2::zeros(), 1.0)?;

    let p = |c: &SplineCurve| sample_polygon(c, 400);
    for zonal in [Zonal::Squared, Zonal::Binomial, Zonal::Linear] {
        let kernel = VarifoldKernel::gaussian(0.5, zonal)?;
        let d = |a: &SplineCurve, b: &SplineCurve| -> curvematch::Result<f64> {
            Ok(varifold_dist_sq(&p(a)?, &p(b)?, &kernel))
        };
        println!("zonal {zonal:?}");
        println!("  reparametrized   {:.3e}", d(&ellipse, &shifted_start)?);
        println!("  translated       {:.3e}", d(&ellipse, &moved)?);
        println!("  circle           {:.3e}", d(&ellipse, &round)?);
        println!("  reversed         {:.3e}", d(&ellipse, &ellipse.reversed())?);
    }
    Ok(())
}
