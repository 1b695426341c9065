//! Properties of the statistics pipeline on synthetic datasets.

use curvematch::io::{three_classes, wings, RunConfig};
use curvematch::matcher::{Discretization, OptimizerSettings};
use curvematch::sobolev::SobolevMetric;
use curvematch::spline::ThetaBasis;
use curvematch::stats::{distance_matrix, karcher_mean, log_map, principal_geodesic_endpoints, tangent_pca};
use curvematch::varifold::Zonal;
use curvematch::{MatchConfig, SplineCurve, VarifoldKernel, Vec2};

fn fitted(files: &[curvematch::io::CurveFile], n: usize) -> Vec<SplineCurve> {
    files.iter().map(|f| f.fit(n).unwrap().curve).collect()
}

#[test]
fn distances_are_nearly_metric_and_symmetric_within_classes() {
    let files = three_classes(21, 2);
    let shapes = fitted(&files, 40);
    let config = RunConfig::default().resolve(&shapes).unwrap().match_config().unwrap();
    let d = distance_matrix(&shapes, &config).unwrap();
    assert!(d.all_converged());
    let n = shapes.len();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                assert!(d.get(i, k) <= 1.05 * (d.get(i, j) + d.get(j, k)), "({i}, {j}, {k})");
            }
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i != j && files[i].label == files[j].label {
                let (a, b) = (d.raw(i, j).unwrap(), d.raw(j, i).unwrap());
                assert!((a - b).abs() / a < 0.1, "{} / {}: {a} vs {b}", files[i].name, files[j].name);
            }
        }
    }
}

#[test]
fn initial_velocity_norms_approximate_distances() {
    let basis = ThetaBasis::cubic(20).unwrap();
    let shapes: Vec<SplineCurve> = [(1.3, 0.7), (1.1, 0.85), (1.2, 0.6)]
        .iter()
        .map(|&(a, b)| SplineCurve::from_fn(basis, |t| Vec2::new(a * t.cos(), b * t.sin())).unwrap())
        .collect();
    let mut config = MatchConfig::new(VarifoldKernel::gaussian(0.5, Zonal::Binomial).unwrap());
    config.optimizer = OptimizerSettings::single_level(Discretization::new(5, 20, 60));
    config.optimizer.lbfgs.max_iterations = 3000;
    let k = karcher_mean(&shapes, &config).unwrap();
    assert!(k.converged, "{:?}", k.termination);
    let metric = SobolevMetric::new(*k.mean.basis(), config.metric);
    for (path, d) in k.paths.iter().zip(&k.distances) {
        let v = log_map(path);
        let norm = metric.norm_sq(&k.mean, &v.coefficients).unwrap().sqrt();
        assert!((norm - d).abs() < 0.1 * d, "{norm} vs {d}");
    }
}

#[test]
fn principal_curves_of_wings_stay_regular() {
    let shapes = fitted(&wings(3, 6), 20);
    let mut run = RunConfig::default().resolve(&shapes).unwrap();
    run.lambda = 1.0;
    let mut config = run.match_config().unwrap();
    config.optimizer = OptimizerSettings::single_level(Discretization::new(5, 20, 60));
    let k = karcher_mean(&shapes, &config).unwrap();
    let vectors: Vec<_> = k.paths.iter().map(log_map).collect();
    let pca = tangent_pca(&k.mean, &vectors, &config.metric).unwrap();
    assert!(!pca.directions.is_empty());
    for m in 0..pca.directions.len().min(2) {
        let sd = pca.eigenvalues[m].sqrt();
        for c in principal_geodesic_endpoints(&pca, m, &[-sd, -0.5 * sd, 0.5 * sd, sd]).unwrap() {
            c.check_regular().unwrap();
        }
    }
}
