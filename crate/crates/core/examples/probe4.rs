// Development probe: does a parameter EMA of the oscillating iterates
// recover the saddle-point map? Also compares fixed-dataset resampling
// with fresh procedural batches.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, OtSolution, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn quality(sol: &OtSolution, label: &str) {
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
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
        "{label}: emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        emp / oracle,
        d_push / baseline
    );
}

fn main() {
    let outer: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let decay: f64 = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(0.999);
    let fresh: bool = std::env::args().nth(4).map(|s| s == "fresh").unwrap_or(false);

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let (source, target) = if fresh {
        (SampleSource::Spec(p.clone()), SampleSource::Spec(q.clone()))
    } else {
        (
            SampleSource::Fixed(sample(&p, 10_000, &mut r).unwrap()),
            SampleSource::Fixed(sample(&q, 10_000, &mut r).unwrap()),
        )
    };
    let cfg = TrainConfig { outer_max_iters: outer, seed, ..TrainConfig::default() };

    let e = 2;
    let mut phi = Net::init(NetSpec::new(e, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(e, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);
    let mut ema_u = u.params.clone();
    let mut ema_phi = phi.params.clone();

    for _iter in 0..cfg.outer_max_iters {
        for _ in 0..cfg.inner_min_iters {
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
        for (e, p) in ema_u.iter_mut().zip(u.params.iter()) {
            *e = decay * *e + (1.0 - decay) * p;
        }
        for (e, p) in ema_phi.iter_mut().zip(phi.params.iter()) {
            *e = decay * *e + (1.0 - decay) * p;
        }
    }

    let last = OtSolution {
        manifold: ManifoldId::Circle,
        phi: phi.clone(),
        u: u.clone(),
        direction: "",
        trace: vec![],
    };
    quality(&last, &format!("last iterate (outer={outer}, seed={seed}, fresh={fresh})"));
    let mut u_ema = u.clone();
    u_ema.params = ema_u;
    let mut phi_ema = phi.clone();
    phi_ema.params = ema_phi;
    let ema = OtSolution {
        manifold: ManifoldId::Circle,
        phi: phi_ema,
        u: u_ema,
        direction: "",
        trace: vec![],
    };
    quality(&ema, &format!("EMA decay {decay}"));
}
