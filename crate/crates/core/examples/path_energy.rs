//! Path energy and length of straight-line paths between circles. Scaling a
//! circle by a factor traces a path whose length grows with the factor.

use curvematch::sobolev::PathEnergy;
use curvematch::spline::make_bases;
use curvematch::{MetricCoefficients, PathControlNet, SplineCurve, Vec2};

fn main() -> curvematch::Result<()> {
    let (time, theta) = make_bases(8, 24)?;
    let unit = SplineCurve::circle(24, Vec2::zeros(), 1.0)?;
    for coeffs in [
        MetricCoefficients::default(),
        MetricCoefficients::new(1.0, 0.0, 0.1)?,
    ] {
        let energy = PathEnergy::new(time, theta, coeffs);
        println!("{coeffs:?}");
        for r in [1.5, 2.0, 3.0] {
            let big = SplineCurve::circle(24, Vec2::zeros(), r)?;
            let net = PathControlNet::linear(time, &unit, &big)?;
            let e = energy.energy(&net)?;
            println!(
                "  radius 1 -> {r}: energy {:.6}, length {:.6}",
                e.energy,
                energy.length(&net)?
            );
        }
    }
    Ok(())
}
