// Development probe: does solving the inner problem harder (more U steps
// per phi step) remove the undershoot bias?
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, OtSolution, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn main() {
    let outer: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let inner: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(10);

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let source = SampleSource::Fixed(sample(&p, 10_000, &mut r).unwrap());
    let target = SampleSource::Fixed(sample(&q, 10_000, &mut r).unwrap());
    let cfg = TrainConfig { outer_max_iters: outer, seed, ..TrainConfig::default() };

    let mut phi = Net::init(NetSpec::new(2, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(2, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);

    for _ in 0..cfg.outer_max_iters {
        for _ in 0..inner {
            let src = source.draw(cfg.batch_size, &mut r).unwrap();
            let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
            let (_, _, gu) = ot_objective(&phi, &u, &src, &tgt).unwrap();
            adam_step(&mut u.params, &gu, &mut adam_u).unwrap();
        }
        let src = source.draw(cfg.batch_size, &mut r).unwrap();
        let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
        let (_, mut gp, _) = ot_objective(&phi, &u, &src, &tgt).unwrap();
        for g in &mut gp {
            *g = -*g;
        }
        adam_step(&mut phi.params, &gp, &mut adam_phi).unwrap();
    }

    let sol = OtSolution {
        manifold: ManifoldId::Circle,
        phi,
        u,
        direction: "",
        trace: vec![],
    };
    let mut probe_rng = rng::from_seed(999);
    let a256 = sample(&p, 256, &mut probe_rng).unwrap();
    let b256 = sample(&q, 256, &mut probe_rng).unwrap();
    let b256b = sample(&q, 256, &mut probe_rng).unwrap();
    let (oracle, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&b256b, &b256, ManifoldId::Circle).unwrap();
    let emp = sol.empirical_cost(&a256).unwrap();
    let pushed = sol.pushforward(&a256).unwrap();
    let d_push = discrete_ot_distance(&pushed, &b256, ManifoldId::Circle).unwrap();
    println!(
        "outer={outer} seed={seed} inner={inner}: emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        emp / oracle,
        d_push / baseline
    );
}
