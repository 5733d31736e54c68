// Development probe: criterion-3-style metrics for the S1 antipodal
// Gaussian transport. Not part of the deliverable test suite.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::ot::{train_ot, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn main() {
    let outer: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3000);
    let seed: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let src_train = sample(&p, 10_000, &mut r).unwrap();
    let tgt_train = sample(&q, 10_000, &mut r).unwrap();
    let cfg = TrainConfig {
        outer_max_iters: outer,
        seed,
        ..TrainConfig::default()
    };
    let t0 = std::time::Instant::now();
    let sol = train_ot(
        &SampleSource::Fixed(src_train),
        &SampleSource::Fixed(tgt_train),
        &cfg,
        &mut r,
    )
    .unwrap();
    println!("trained {} outer iters in {:.1}s", outer, t0.elapsed().as_secs_f64());
    for (i, v) in &sol.trace {
        if i % 500 == 0 {
            println!("  iter {i}: objective {v:.4}");
        }
    }

    //

    // (a) clockwise fraction over 10^4 fresh source samples
    let test = sample(&p, 10_000, &mut r).unwrap();
    let mut neg = 0usize;
    for z in &test {
        let v = sol.displacement(z).unwrap();
        if v[0] < 0.0 {
            neg += 1;
        }
    }
    let frac = neg as f64 / test.len() as f64;
    println!("(a) clockwise fraction = {frac:.3}  (want 0.35..0.65)");

    // circular mean of pushforward
    let push = sol.pushforward(&test).unwrap();
    let thetas: Vec<f64> = push.iter().map(|p| p.theta().unwrap()).collect();
    let (mean, res) = manifold_ot::evaluation::circular_mean(&thetas).unwrap();
    println!("    pushforward circular mean = {mean:.3} (want near pi={:.3}), resultant {res:.3}", PI);

    // (b) empirical cost vs 256-sample discrete OT oracle
    let a256 = sample(&p, 256, &mut r).unwrap();
    let b256 = sample(&q, 256, &mut r).unwrap();
    let (oracle, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let emp = sol.empirical_cost(&a256).unwrap();
    println!(
        "(b) empirical cost {emp:.4} vs oracle {oracle:.4}; ratio {:.3} (want 0.95..1.10)",
        emp / oracle
    );

    // (c) pushforward-vs-target distance vs resampling baseline
    let pushed = sol.pushforward(&a256).unwrap();
    let fresh_t1 = sample(&q, 256, &mut r).unwrap();
    let fresh_t2 = sample(&q, 256, &mut r).unwrap();
    let d_push = discrete_ot_distance(&pushed, &fresh_t1, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&fresh_t2, &fresh_t1, ManifoldId::Circle).unwrap();
    println!(
        "(c) pushforward W2 {d_push:.4} vs baseline {baseline:.4}; ratio {:.3} (want <= 1.25)",
        d_push / baseline
    );
}
