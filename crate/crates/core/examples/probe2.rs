// Development probe: instrumented training loop for the S1 antipodal
// Gaussian case, printing map quality every 250 outer iterations.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId, ManifoldPoint};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, OtSolution, SampleSource, TrainConfig};
use manifold_ot::rng;
use rand::Rng;
use std::f64::consts::PI;

fn main() {
    let outer: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let width: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(32);
    let blocks: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(1);

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let src_train = sample(&p, 10_000, &mut r).unwrap();
    let tgt_train = sample(&q, 10_000, &mut r).unwrap();
    let source = SampleSource::Fixed(src_train);
    let target = SampleSource::Fixed(tgt_train);
    let cfg = TrainConfig {
        outer_max_iters: outer,
        seed,
        block_width: width,
        block_count: blocks,
        ..TrainConfig::default()
    };

    // Fixed probe sets for monitoring.
    let mut probe_rng = rng::from_seed(999);
    let a256 = sample(&p, 256, &mut probe_rng).unwrap();
    let b256 = sample(&q, 256, &mut probe_rng).unwrap();
    let b256b = sample(&q, 256, &mut probe_rng).unwrap();
    let (oracle, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&b256b, &b256, ManifoldId::Circle).unwrap();
    println!("oracle cost {oracle:.4}, baseline W2 {baseline:.4}");

    let e = ManifoldId::Circle.embed_dim();
    let mut phi = Net::init(NetSpec::new(e, cfg.block_count, cfg.block_width, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(e, cfg.block_count, cfg.block_width, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);

    for iter in 0..cfg.outer_max_iters {
        for _ in 0..cfg.inner_min_iters {
            let src = source.draw(cfg.batch_size, &mut r).unwrap();
            let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
            let (_, _, gu) = ot_objective(&phi, &u, &src, &tgt).unwrap();
            adam_step(&mut u.params, &gu, &mut adam_u).unwrap();
        }
        let src = source.draw(cfg.batch_size, &mut r).unwrap();
        let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
        let (value, mut gp, _) = ot_objective(&phi, &u, &src, &tgt).unwrap();
        for g in &mut gp {
            *g = -*g;
        }
        adam_step(&mut phi.params, &gp, &mut adam_phi).unwrap();

        if iter % 250 == 0 || iter + 1 == cfg.outer_max_iters {
            let sol = OtSolution {
                manifold: ManifoldId::Circle,
                phi: phi.clone(),
                u: u.clone(),
                direction: "",
                trace: vec![],
            };
            let emp = sol.empirical_cost(&a256).unwrap();
            let pushed = sol.pushforward(&a256).unwrap();
            let d_push = discrete_ot_distance(&pushed, &b256, ManifoldId::Circle).unwrap();
            let phi_norm: f64 = phi.params.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u_norm: f64 = u.params.iter().map(|x| x * x).sum::<f64>().sqrt();
            println!(
                "iter {iter:5}: value {value:7.4}  emp_cost {emp:7.4} ({:5.3} of oracle)  pushW2 {d_push:.4} ({:5.2} of baseline)  |phi| {phi_norm:6.2} |U| {u_norm:6.2}",
                emp / oracle,
                d_push / baseline,
            );
        }
    }

    // Displacement profile: v(theta) at a grid.
    println!("displacement profile:");
    let sol = OtSolution {
        manifold: ManifoldId::Circle,
        phi,
        u,
        direction: "",
        trace: vec![],
    };
    for k in 0..16 {
        let th = -PI + k as f64 * (2.0 * PI / 16.0);
        let z = ManifoldPoint::circle(th);
        let v = sol.displacement(&z).unwrap();
        print!(" {th:5.2}:{:6.2}", v[0]);
        if k % 8 == 7 {
            println!();
        }
    }
    let mut r2 = rng::from_seed(31);
    let _: f64 = r2.random();
}
