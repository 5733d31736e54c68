// Development probe: intrinsic quality of a potential = quality of its
// EXACT best-response map (pointwise grid argmin), bypassing U entirely.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{embed, sample, DistributionSpec, ManifoldId, ManifoldPoint};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, SampleSource, TrainConfig};
use manifold_ot::rng;
use ndarray::Array2;
use std::f64::consts::PI;

fn phi_at(phi: &Net, theta: f64) -> f64 {
    let emb = embed(ManifoldId::Circle, &ManifoldPoint::circle(theta)).unwrap();
    let x = Array2::from_shape_vec((1, 2), emb).unwrap();
    phi.forward(&x).unwrap()[(0, 0)]
}

fn exact_response_quality(phi: &Net, label: &str) {
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut probe_rng = rng::from_seed(999);
    let a256 = sample(&p, 256, &mut probe_rng).unwrap();
    let b256 = sample(&q, 256, &mut probe_rng).unwrap();
    let b256b = sample(&q, 256, &mut probe_rng).unwrap();
    let (oracle, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&b256b, &b256, ManifoldId::Circle).unwrap();

    let mut cost = 0.0;
    let mut pushed = Vec::new();
    for z in &a256 {
        let th = z.theta().unwrap();
        let f = |v: f64| v * v / 2.0 - phi_at(phi, th + v);
        let mut best_v = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..1401 {
            let v = -PI + 2.0 * PI * i as f64 / 1400.0;
            let val = f(v);
            if val < best {
                best = val;
                best_v = v;
            }
        }
        cost += best_v * best_v / 2.0 / 256.0;
        pushed.push(ManifoldPoint::circle(th + best_v));
    }
    let d_push = discrete_ot_distance(&pushed, &b256, ManifoldId::Circle).unwrap();
    println!(
        "{label}: exact-response emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        cost / oracle,
        d_push / baseline
    );
}

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let outer: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3000);

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

    for iter in 0..cfg.outer_max_iters {
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
        if (iter + 1) % 1000 == 0 {
            exact_response_quality(&phi, &format!("seed={seed} iter={}", iter + 1));
        }
    }
}
