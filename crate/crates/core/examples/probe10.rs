// Development probe: finite-sample bias of the 256-sample discrete OT
// oracle for the antipodal-Gaussian circle problem.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::rng;
use std::f64::consts::PI;

fn main() {
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };

    // Reference: n = 1024 oracle repeated a few times.
    let mut big = Vec::new();
    for s in 0..4u64 {
        let mut r = rng::from_seed(5000 + s);
        let a = sample(&p, 1024, &mut r).unwrap();
        let b = sample(&q, 1024, &mut r).unwrap();
        big.push(discrete_ot(&a, &b, ManifoldId::Circle).unwrap().0);
    }
    let big_mean = big.iter().sum::<f64>() / big.len() as f64;
    println!("n=1024 oracle costs: {big:?} mean {big_mean:.4}");

    // n = 256 oracle distribution.
    let mut costs = Vec::new();
    let mut baselines = Vec::new();
    for s in 0..40u64 {
        let mut r = rng::from_seed(6000 + s);
        let a = sample(&p, 256, &mut r).unwrap();
        let b = sample(&q, 256, &mut r).unwrap();
        let b2 = sample(&q, 256, &mut r).unwrap();
        costs.push(discrete_ot(&a, &b, ManifoldId::Circle).unwrap().0);
        baselines.push(discrete_ot_distance(&b2, &b, ManifoldId::Circle).unwrap());
    }
    costs.sort_by(f64::total_cmp);
    baselines.sort_by(f64::total_cmp);
    let mean = costs.iter().sum::<f64>() / costs.len() as f64;
    let bmean = baselines.iter().sum::<f64>() / baselines.len() as f64;
    println!(
        "n=256 oracle: mean {mean:.4} min {:.4} q25 {:.4} median {:.4} q75 {:.4} max {:.4}",
        costs[0], costs[10], costs[20], costs[30], costs[39]
    );
    println!(
        "n=256 target-resampling baseline W2: mean {bmean:.4} min {:.4} median {:.4} max {:.4}",
        baselines[0], baselines[20], baselines[39]
    );
    println!("bias of 256-oracle over 1024-oracle: {:.1}%", (mean / big_mean - 1.0) * 100.0);
}
