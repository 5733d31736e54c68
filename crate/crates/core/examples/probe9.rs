// Development probe: (A) the oracle displacement profile from cyclic
// monotone matching; (B) supervised least-squares fit of the U
// architecture to that profile; (C) quality of the fitted map.
use manifold_ot::evaluation::{discrete_ot, discrete_ot_distance};
use manifold_ot::manifold::{embed_batch, exp_map, sample, wrap_to_pi, DistributionSpec, ManifoldId};
use manifold_ot::nn::{adam_step, AdamState, Net, NetSpec};
use manifold_ot::rng;
use ndarray::Array2;
use std::f64::consts::PI;

fn main() {
    let width: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let blocks: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let fit_iters: usize = std::env::args().nth(3).and_then(|s| s.parse().ok()).unwrap_or(20000);

    let p = DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 };
    let q = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let mut r = rng::from_seed(0);
    let n = 1024;
    let src = sample(&p, n, &mut r).unwrap();
    let tgt = sample(&q, n, &mut r).unwrap();

    // Exact assignment by Hungarian (n = 1024 is the cap).
    let (oracle_cost, perm) = discrete_ot(&src, &tgt, ManifoldId::Circle).unwrap();
    println!("oracle cost (n=1024): {oracle_cost:.4}");

    // Displacement profile: theta -> matched displacement.
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let a = src[i].theta().unwrap();
            let b = tgt[perm[i]].theta().unwrap();
            (wrap_to_pi(a), wrap_to_pi(b - a))
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    println!("oracle displacement profile (theta: v), every 64th point:");
    for (i, (th, v)) in pairs.iter().enumerate() {
        if i % 64 == 0 {
            print!(" {th:5.2}:{v:6.2}");
        }
    }
    println!();

    // Supervised fit of U(embed(z)) = -v to the oracle pairs.
    let x = embed_batch(ManifoldId::Circle, &src).unwrap();
    let targets: Vec<f64> = (0..n)
        .map(|i| {
            let a = src[i].theta().unwrap();
            let b = tgt[perm[i]].theta().unwrap();
            -wrap_to_pi(b - a)
        })
        .collect();
    let spec = NetSpec::new(2, blocks, width, 1).unwrap();
    let mut u = Net::init(spec, &mut r).unwrap();
    let mut adam = AdamState::new(u.params.len(), 1e-3);
    use rand::Rng;
    for it in 0..fit_iters {
        // Batch of 64 random indices, squared-error regression.
        let idx: Vec<usize> = (0..64).map(|_| r.random_range(0..n)).collect();
        let xb = Array2::from_shape_fn((64, 2), |(i, j)| x[(idx[i], j)]);
        let (out, cache) = u.forward_cached(&xb).unwrap();
        let mut cot = Array2::zeros((64, 1));
        let mut loss = 0.0;
        for i in 0..64 {
            let err = out[(i, 0)] - targets[idx[i]];
            loss += err * err / 64.0;
            cot[(i, 0)] = 2.0 * err / 64.0;
        }
        let (grads, _) = u.backward(&cache, &cot).unwrap();
        adam_step(&mut u.params, &grads, &mut adam).unwrap();
        if it % 5000 == 0 {
            println!("fit iter {it}: mse {loss:.4}");
        }
    }

    // Quality of the fitted map on fresh probe sets.
    let mut probe_rng = rng::from_seed(999);
    let a256 = sample(&p, 256, &mut probe_rng).unwrap();
    let b256 = sample(&q, 256, &mut probe_rng).unwrap();
    let b256b = sample(&q, 256, &mut probe_rng).unwrap();
    let (oracle256, _) = discrete_ot(&a256, &b256, ManifoldId::Circle).unwrap();
    let baseline = discrete_ot_distance(&b256b, &b256, ManifoldId::Circle).unwrap();
    let xp = embed_batch(ManifoldId::Circle, &a256).unwrap();
    let out = u.forward(&xp).unwrap();
    let mut cost = 0.0;
    let mut pushed = Vec::new();
    for (i, z) in a256.iter().enumerate() {
        let v = -out[(i, 0)];
        let w = wrap_to_pi(v);
        cost += w * w / 2.0 / 256.0;
        pushed.push(exp_map(ManifoldId::Circle, z, &[v]).unwrap());
    }
    let d_push = discrete_ot_distance(&pushed, &b256, ManifoldId::Circle).unwrap();
    println!(
        "supervised-fit U (width={width}, blocks={blocks}): emp/oracle {:5.3}  pushW2/baseline {:5.2}",
        cost / oracle256,
        d_push / baseline
    );
}
