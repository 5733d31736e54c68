// Development probe: after training, freeze phi and compare the learned
// displacement with the exact pointwise inner minimizer (grid search).
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

fn main() {
    let outer: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let seed: u64 = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let source = SampleSource::Fixed(sample(&p, 10_000, &mut r).unwrap());
    let target = SampleSource::Fixed(sample(&q, 10_000, &mut r).unwrap());
    let cfg = TrainConfig { outer_max_iters: outer, seed, ..TrainConfig::default() };

    let e = 2;
    let mut phi = Net::init(NetSpec::new(e, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(e, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);
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
    }

    // phi landscape.
    println!("phi profile (theta: phi):");
    for k in 0..16 {
        let th = -PI + k as f64 * (2.0 * PI / 16.0);
        print!(" {th:5.2}:{:6.2}", phi_at(&phi, th));
        if k % 8 == 7 {
            println!();
        }
    }

    // Exact inner minimizer under the final phi vs the learned U.
    println!("theta | learned v | exact argmin v (grid) | f(learned) | f(exact)");
    for k in 0..12 {
        let th = -PI + 0.1 + k as f64 * (2.0 * PI / 12.0);
        let z = ManifoldPoint::circle(th);
        let emb = embed(ManifoldId::Circle, &z).unwrap();
        let x = Array2::from_shape_vec((1, 2), emb).unwrap();
        let learned_v = -u.forward(&x).unwrap()[(0, 0)];
        let f = |v: f64| v * v / 2.0 - phi_at(&phi, th + v);
        let mut best_v = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..2001 {
            let v = -2.0 * PI + 4.0 * PI * i as f64 / 2000.0;
            let val = f(v);
            if val < best {
                best = val;
                best_v = v;
            }
        }
        println!(
            "{th:6.2} | {learned_v:9.3} | {best_v:9.3} | {:9.3} | {best:9.3}",
            f(learned_v)
        );
    }
}
