// Development probe: average the displacement FIELD over U snapshots from
// the back half of training, then measure the averaged map's quality.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{embed_batch, exp_map, sample, DistributionSpec, ManifoldId, ManifoldPoint};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::ot::{ot_objective, SampleSource, TrainConfig};
use manifold_ot::rng;
use std::f64::consts::PI;

fn main() {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let outer: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(3000);
    let inner: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(10);
    let keep_from: usize = outer / 2;

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(seed);
    let source = SampleSource::Fixed(sample(&p, 10_000, &mut r).unwrap());
    let target = SampleSource::Fixed(sample(&q, 10_000, &mut r).unwrap());
    let cfg = TrainConfig { outer_max_iters: outer, seed, ..TrainConfig::default() };

    let mut probe_rng = rng::from_seed(999);
    let a256 = sample(&p, 256, &mut probe_rng).unwrap();
    let b256 = sample(&q, 256, &mut probe_rng).unwrap();
    let b256b = sample(&q, 256, &mut probe_rng).unwrap();
    let (oracle, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&b256b, &b256, ManifoldId::Circle).unwrap();
    let x_probe = embed_batch(ManifoldId::Circle, &a256).unwrap();

    let mut phi = Net::init(NetSpec::new(2, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(2, 1, 32, 1).unwrap(), &mut r).unwrap();
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);

    let mut field_sum = vec![0.0f64; 256];
    let mut snapshots = 0usize;

    for iter in 0..cfg.outer_max_iters {
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

        if iter >= keep_from && iter % 10 == 0 {
            let out = u.forward(&x_probe).unwrap();
            for i in 0..256 {
                field_sum[i] += -out[(i, 0)];
            }
            snapshots += 1;
        }
    }

    // Averaged displacement field on the probe points.
    let mut cost = 0.0;
    let mut pushed = Vec::new();
    for (i, z) in a256.iter().enumerate() {
        let v = field_sum[i] / snapshots as f64;
        cost += v * v / 2.0 / 256.0;
        pushed.push(exp_map(ManifoldId::Circle, z, &[v]).unwrap());
    }
    let d_push = discrete_ot_distance(&pushed, &b256, ManifoldId::Circle).unwrap();
    println!(
        "seed={seed} outer={outer} inner={inner} snapshots={snapshots}: avg-field emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        cost / oracle,
        d_push / baseline
    );
    let _ = ManifoldPoint::circle(0.0);
}
