// Development probe: EMA-decay x polish sweep, evaluated against several
// independent eval draws to separate map error from eval-draw noise.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{sample, DistributionSpec, ManifoldId};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, OtSolution, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn evaluate(sol: &OtSolution, label: &str) {
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut cost_ratios = Vec::new();
    let mut push_ratios = Vec::new();
    for s in 0..5u64 {
        let mut r = rng::from_seed(7000 + s);
        let a = sample(&p, 256, &mut r).unwrap();
        let b = sample(&q, 256, &mut r).unwrap();
        let b2 = sample(&q, 256, &mut r).unwrap();
        let (oracle, _) = discrete_ot(&a, &b, ManifoldId::Circle).unwrap();
        let baseline = discrete_ot_distance(&b2, &b, ManifoldId::Circle).unwrap();
        let emp = sol.empirical_cost(&a).unwrap();
        let pushed = sol.pushforward(&a).unwrap();
        let d_push = discrete_ot_distance(&pushed, &b, ManifoldId::Circle).unwrap();
        cost_ratios.push(emp / oracle);
        push_ratios.push(d_push / baseline);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "{label}: cost ratio mean {:5.3} max {:5.3} | push ratio mean {:5.2} max {:5.2}",
        mean(&cost_ratios),
        max(&cost_ratios),
        mean(&push_ratios),
        max(&push_ratios)
    );
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let decay: f64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0.995);
    let polish: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(500);
    let inner: usize = std::env::args().nth(4).and_then(|s| s.parse().ok()).unwrap_or(10);

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let source = SampleSource::Fixed(sample(&p, 10_000, &mut r).unwrap());
    let target = SampleSource::Fixed(sample(&q, 10_000, &mut r).unwrap());
    let blocks: usize = std::env::args().nth(5).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg = TrainConfig { outer_max_iters: 3000, seed, block_count: blocks, ..TrainConfig::default() };

    let mut phi = Net::init(NetSpec::new(2, blocks, 32, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(2, blocks, 32, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);
    let mut ema_phi = phi.params.clone();
    let mut ema_u = u.params.clone();

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
        for (e, pv) in ema_phi.iter_mut().zip(phi.params.iter()) {
            *e = decay * *e + (1.0 - decay) * pv;
        }
        for (e, pv) in ema_u.iter_mut().zip(u.params.iter()) {
            *e = decay * *e + (1.0 - decay) * pv;
        }
    }

    let mut phi_avg = phi.clone();
    phi_avg.params = ema_phi.clone();
    let mut u_avg = u.clone();
    u_avg.params = ema_u.clone();
    let mut adam_pol = AdamState::new(u_avg.params.len(), cfg.lr);
    for _ in 0..polish {
        let src = source.draw(cfg.batch_size, &mut r).unwrap();
        let tgt = target.draw(cfg.batch_size, &mut r).unwrap();
        let (_, _, gu) = ot_objective(&phi_avg, &u_avg, &src, &tgt).unwrap();
        adam_step(&mut u_avg.params, &gu, &mut adam_pol).unwrap();
    }
    let sol = OtSolution {
        manifold: ManifoldId::Circle,
        phi: phi_avg,
        u: u_avg,
        direction: "",
        trace: vec![],
    };
    evaluate(&sol, &format!("seed={seed} decay={decay} polish={polish} inner={inner} blocks={blocks}"));
}
