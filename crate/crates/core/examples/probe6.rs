// Development probe: EMA-averaged potential + final best-response polish
// of the vector field.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, OtSolution, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let decay: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.999);
    let polish: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let outer: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(3000);

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
    let mut ema_phi = phi.params.clone();
    let mut ema_u = u.params.clone();

    for _ in 0..cfg.outer_max_iters {
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
        for (e, pv) in ema_phi.iter_mut().zip(phi.params.iter()) {
            *e = decay * *e + (1.0 - decay) * pv;
        }
        for (e, pv) in ema_u.iter_mut().zip(u.params.iter()) {
            *e = decay * *e + (1.0 - decay) * pv;
        }
    }

    // Freeze the averaged potential, polish U as its best response.
    let mut phi_avg = phi.clone();
    phi_avg.params = ema_phi;
    let mut u_pol = u.clone();
    u_pol.params = ema_u;
    let mut adam_pol = AdamState::new(u_pol.params.len(), cfg.lr);
    for _ in 0..polish {
        let src = source.draw(cfg.batch_size, &mut r).unwrap();
        let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
        let (_, _, gu) = ot_objective(&phi_avg, &u_pol, &src, &tgt).unwrap();
        adam_step(&mut u_pol.params, &gu, &mut adam_pol).unwrap();
    }

    let sol = OtSolution {
        manifold: ManifoldId::Circle,
        phi: phi_avg,
        u: u_pol,
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
        "seed={seed} decay={decay} polish={polish} outer={outer}: emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        emp / oracle,
        d_push / baseline
    );
}
