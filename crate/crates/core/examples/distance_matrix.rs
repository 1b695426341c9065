//! Distance matrix of a small synthetic three-class dataset on a coarse
//! schedule, with spectral clustering of the result.

use curvematch::io::{three_classes, RunConfig};
use curvematch::matcher::Discretization;
use curvematch::stats::{distance_matrix, purity, spectral_cluster};
use curvematch::SplineCurve;

fn main() -> curvematch::Result<()> {
    let files = three_classes(11, 3);
    let mut run = RunConfig {
        discretization: Discretization::new(6, 20, 60),
        coarse_levels: vec![],
        ..RunConfig::default()
    };
    let shapes: Vec<SplineCurve> = files
        .iter()
        .map(|f| Ok(f.fit(run.discretization.n_theta)?.curve))
        .collect::<curvematch::Result<_>>()?;
    run = run.resolve(&shapes)?;
    let d = distance_matrix(&shapes, &run.match_config()?)?;

    print!("{:>14}", "");
    for f in &files {
        print!("{:>8}", &f.name[..3.min(f.name.len())]);
    }
    println!();
    for (i, f) in files.iter().enumerate() {
        print!("{:>14}", f.name);
        for v in d.row(i) {
            print!("{v:8.3}");
        }
        println!();
    }
    println!("largest asymmetry {:.3}", d.max_asymmetry());

    let clusters = spectral_cluster(&d, 2, 3, run.seed)?;
    let truth: Vec<usize> = (0..files.len()).map(|k| k / 3).collect();
    println!("clusters {:?}", clusters.labels);
    println!("purity   {:.3}", purity(&clusters.labels, &truth));
    Ok(())
}
