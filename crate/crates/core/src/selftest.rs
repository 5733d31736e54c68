//! Fast oracle and invariant checks behind `manifold-ot selftest`.
//!
//! A trimmed version of the test-suite batteries that runs in seconds:
//! geometry round trips, power-series agreement, metric axioms,
//! finite-difference gradient probes, brute-force assignment checks, and
//! density normalization.

use std::f64::consts::{PI, TAU};

use nalgebra::Matrix3;
use rand::Rng;

use crate::conditional::{conditional_objective, independent_coupling, JointSample};
use crate::evaluation;
use crate::filter::ObservationModel;
use crate::manifold::{
    embed_batch, exp_map, geodesic_dist, hat, log_map, sample, so3_exp, DistributionSpec,
    ManifoldId, ManifoldPoint,
};
use crate::nn::{Net, NetSpec};
use crate::ot::ot_objective;
use crate::rng::{self, RunRng};

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, body: impl FnOnce() -> Result<String, String>) -> CheckResult {
    match body() {
        Ok(detail) => CheckResult {
            name,
            passed: true,
            detail,
        },
        Err(detail) => CheckResult {
            name,
            passed: false,
            detail,
        },
    }
}

fn series_exp(w: &[f64]) -> Matrix3<f64> {
    let k = hat(w);
    let mut term = Matrix3::identity();
    let mut acc = Matrix3::identity();
    for i in 1..=30 {
        term = term * k / i as f64;
        acc += term;
    }
    acc
}

fn random_point(m: ManifoldId, r: &mut RunRng) -> ManifoldPoint {
    let spec = match m {
        ManifoldId::Circle => DistributionSpec::CircleUniform,
        ManifoldId::Se2 => DistributionSpec::Se2BoxUniform {
            x: (-2.0, 2.0),
            y: (-2.0, 2.0),
        },
        ManifoldId::So3 => DistributionSpec::So3Uniform,
    };
    sample(&spec, 1, r).expect("sample").pop().unwrap()
}

fn random_tangent(m: ManifoldId, r: &mut RunRng, max_norm: f64) -> Vec<f64> {
    let n = m.tangent_dim();
    loop {
        let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            let scale = r.random_range(0.0..max_norm) / norm;
            return v.iter().map(|x| x * scale).collect();
        }
    }
}

fn roundtrips() -> Result<String, String> {
    let mut r = rng::from_seed(101);
    let mut worst: f64 = 0.0;
    for m in [ManifoldId::Circle, ManifoldId::Se2, ManifoldId::So3] {
        for _ in 0..200 {
            let z = random_point(m, &mut r);
            let v = random_tangent(m, &mut r, PI - 1e-3);
            let fwd = exp_map(m, &z, &v).map_err(|e| e.to_string())?;
            let back = log_map(m, &z, &fwd).map_err(|e| e.to_string())?;
            for (a, b) in v.iter().zip(back.iter()) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    if worst < 1e-8 {
        Ok(format!("max error {worst:.2e}"))
    } else {
        Err(format!("round-trip error {worst:.2e} exceeds 1e-8"))
    }
}

fn rodrigues_vs_series() -> Result<String, String> {
    let mut r = rng::from_seed(102);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let w = random_tangent(ManifoldId::So3, &mut r, PI);
        let diff = (so3_exp(&w) - series_exp(&w)).abs().max();
        worst = worst.max(diff);
    }
    if worst < 1e-8 {
        Ok(format!("max entry error {worst:.2e}"))
    } else {
        Err(format!("Rodrigues vs series error {worst:.2e} exceeds 1e-8"))
    }
}

fn metric_axioms() -> Result<String, String> {
    let mut r = rng::from_seed(103);
    for m in [ManifoldId::Circle, ManifoldId::Se2, ManifoldId::So3] {
        for _ in 0..100 {
            let a = random_point(m, &mut r);
            let b = random_point(m, &mut r);
            let c = random_point(m, &mut r);
            let dab = geodesic_dist(m, &a, &b).map_err(|e| e.to_string())?;
            let dba = geodesic_dist(m, &b, &a).map_err(|e| e.to_string())?;
            if (dab - dba).abs() > 1e-12 {
                return Err(format!("{}: asymmetry {:.2e}", m.name(), (dab - dba).abs()));
            }
            let dac = geodesic_dist(m, &a, &c).map_err(|e| e.to_string())?;
            let dcb = geodesic_dist(m, &c, &b).map_err(|e| e.to_string())?;
            if dab > dac + dcb + 1e-9 {
                return Err(format!("{}: triangle violation", m.name()));
            }
        }
    }
    Ok("symmetry 1e-12, triangle slack 1e-9".into())
}

fn so3_distance_factor() -> Result<String, String> {
    let mut r = rng::from_seed(104);
    for _ in 0..100 {
        let z = random_point(ManifoldId::So3, &mut r);
        let w = random_tangent(ManifoldId::So3, &mut r, PI - 1e-3);
        let fwd = exp_map(ManifoldId::So3, &z, &w).map_err(|e| e.to_string())?;
        let d = geodesic_dist(ManifoldId::So3, &z, &fwd).map_err(|e| e.to_string())?;
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (d - 2.0f64.sqrt() * norm).abs() > 1e-8 {
            return Err(format!("distance {d} vs sqrt(2)*{norm}"));
        }
    }
    Ok("d = sqrt(2)|w| on 100 samples".into())
}

fn gradient_probe() -> Result<String, String> {
    let mut r = rng::from_seed(105);
    let mut worst: f64 = 0.0;
    // Plain network backward.
    let spec = NetSpec::new(4, 1, 8, 2).map_err(|e| e.to_string())?;
    let mut net = Net::init(spec, &mut r).map_err(|e| e.to_string())?;
    for p in net.params.iter_mut() {
        *p = r.random_range(-0.4..0.4);
    }
    let x = ndarray::Array2::from_shape_fn((5, 4), |_| r.random_range(-1.0..1.0));
    let cot = ndarray::Array2::from_shape_fn((5, 2), |_| r.random_range(-1.0..1.0));
    let (_, cache) = net.forward_cached(&x).map_err(|e| e.to_string())?;
    let (grads, _) = net.backward(&cache, &cot).map_err(|e| e.to_string())?;
    for _ in 0..20 {
        let dir: Vec<f64> = (0..net.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let analytic: f64 = grads.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let h = 1e-5;
        let mut plus = net.clone();
        let mut minus = net.clone();
        for i in 0..dir.len() {
            plus.params[i] += h * dir[i];
            minus.params[i] -= h * dir[i];
        }
        let f = |n: &Net| (n.forward(&x).unwrap() * &cot).sum();
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic - fd).abs() / denom);
    }
    if worst > 1e-4 {
        return Err(format!("nn backward relative error {worst:.2e}"));
    }

    // Transport objective end to end on the circle.
    let e = ManifoldId::Circle.embed_dim();
    let mut phi = Net::init(NetSpec::new(e, 1, 8, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(e, 1, 8, 1).unwrap(), &mut r).unwrap();
    for p in phi.params.iter_mut().chain(u.params.iter_mut()) {
        *p = r.random_range(-0.4..0.4);
    }
    let src = sample(&DistributionSpec::CircleUniform, 4, &mut r).unwrap();
    let tgt = sample(&DistributionSpec::CircleUniform, 4, &mut r).unwrap();
    let _ = embed_batch(ManifoldId::Circle, &src);
    let (_, gp, gu) = ot_objective(&phi, &u, &src, &tgt).map_err(|e| e.to_string())?;
    for _ in 0..10 {
        let dp: Vec<f64> = (0..phi.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let du: Vec<f64> = (0..u.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let analytic: f64 = gp.iter().zip(&dp).map(|(g, d)| g * d).sum::<f64>()
            + gu.iter().zip(&du).map(|(g, d)| g * d).sum::<f64>();
        let h = 1e-5;
        let mut pp = phi.clone();
        let mut pm = phi.clone();
        let mut up = u.clone();
        let mut um = u.clone();
        for i in 0..dp.len() {
            pp.params[i] += h * dp[i];
            pm.params[i] -= h * dp[i];
        }
        for i in 0..du.len() {
            up.params[i] += h * du[i];
            um.params[i] -= h * du[i];
        }
        let fd = (ot_objective(&pp, &up, &src, &tgt).unwrap().0
            - ot_objective(&pm, &um, &src, &tgt).unwrap().0)
            / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic - fd).abs() / denom);
    }

    // Conditional objective.
    let mut phi = Net::init(NetSpec::new(e + 1, 1, 8, 1).unwrap(), &mut r).unwrap();
    let mut u = Net::init(NetSpec::new(e + 1, 1, 8, 1).unwrap(), &mut r).unwrap();
    for p in phi.params.iter_mut().chain(u.params.iter_mut()) {
        *p = r.random_range(-0.4..0.4);
    }
    let joint: Vec<JointSample> = (0..4)
        .map(|_| JointSample {
            x: random_point(ManifoldId::Circle, &mut r),
            y: vec![r.random_range(-1.0..1.0)],
        })
        .collect();
    let indep = independent_coupling(&joint, &mut r).map_err(|e| e.to_string())?;
    let (_, gp, gu) = conditional_objective(&phi, &u, &joint, &indep).map_err(|e| e.to_string())?;
    for _ in 0..10 {
        let dp: Vec<f64> = (0..phi.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let du: Vec<f64> = (0..u.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
        let analytic: f64 = gp.iter().zip(&dp).map(|(g, d)| g * d).sum::<f64>()
            + gu.iter().zip(&du).map(|(g, d)| g * d).sum::<f64>();
        let h = 1e-5;
        let mut pp = phi.clone();
        let mut pm = phi.clone();
        let mut up = u.clone();
        let mut um = u.clone();
        for i in 0..dp.len() {
            pp.params[i] += h * dp[i];
            pm.params[i] -= h * dp[i];
        }
        for i in 0..du.len() {
            up.params[i] += h * du[i];
            um.params[i] -= h * du[i];
        }
        let fd = (conditional_objective(&pp, &up, &joint, &indep).unwrap().0
            - conditional_objective(&pm, &um, &joint, &indep).unwrap().0)
            / (2.0 * h);
        let denom = analytic.abs().max(fd.abs()).max(1e-6);
        worst = worst.max((analytic - fd).abs() / denom);
    }
    if worst < 1e-4 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("gradient relative error {worst:.2e} exceeds 1e-4"))
    }
}

fn assignment_vs_brute_force() -> Result<String, String> {
    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 1 {
            return vec![vec![0]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for i in 0..n {
                let mut q: Vec<usize> = p.iter().map(|&x| if x >= i { x + 1 } else { x }).collect();
                q.insert(0, i);
                out.push(q);
            }
        }
        out
    }
    let mut r = rng::from_seed(106);
    for _ in 0..5 {
        let a = sample(&DistributionSpec::CircleUniform, 5, &mut r).unwrap();
        let b = sample(&DistributionSpec::CircleUniform, 5, &mut r).unwrap();
        let matrix = evaluation::CostMatrix::new(&a, &b, ManifoldId::Circle)
            .map_err(|e| e.to_string())?;
        let brute = permutations(5)
            .into_iter()
            .map(|p| (0..5).map(|i| matrix.get(i, p[i])).sum::<f64>() / 5.0)
            .fold(f64::INFINITY, f64::min);
        let (cost, _) = evaluation::discrete_ot(&a, &b, ManifoldId::Circle)
            .map_err(|e| e.to_string())?;
        if (cost - brute).abs() > 1e-12 {
            return Err(format!("assignment {cost} vs brute force {brute}"));
        }
    }
    Ok("5 random instances".into())
}

fn density_normalization() -> Result<String, String> {
    let mut r = rng::from_seed(107);
    let pts = sample(&DistributionSpec::CircleUniform, 200, &mut r).unwrap();
    let thetas: Vec<f64> = pts.iter().map(|p| p.theta().unwrap()).collect();
    let kde = evaluation::circular_kde(&thetas, 100.0, 512).map_err(|e| e.to_string())?;
    if (kde.integral() - 1.0).abs() > 1e-6 {
        return Err(format!("KDE integral {}", kde.integral()));
    }
    let obs = ObservationModel::circle_wall(0.5, 1.0, 0.1);
    let posterior =
        evaluation::bayes_quadrature_circle(None, &obs, 1.2, 2048).map_err(|e| e.to_string())?;
    if (posterior.integral() - 1.0).abs() > 1e-9 {
        return Err(format!("posterior integral {}", posterior.integral()));
    }
    Ok("KDE and quadrature integrate to 1".into())
}

fn sampling_statistics() -> Result<String, String> {
    let mut r = rng::from_seed(108);
    let spec = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
    let pts = sample(&spec, 10_000, &mut r).unwrap();
    let thetas: Vec<f64> = pts.iter().map(|p| p.theta().unwrap()).collect();
    let (mean, _) = evaluation::circular_mean(&thetas).map_err(|e| e.to_string())?;
    let err = crate::manifold::circle_dist(mean, PI);
    if err > 0.05 {
        return Err(format!("circular mean off by {err}"));
    }
    // Haar sampling stays on the group.
    for _ in 0..100 {
        let p = sample(&DistributionSpec::So3Uniform, 1, &mut r).unwrap().pop().unwrap();
        let rot = p.rotation().map_err(|e| e.to_string())?;
        if (rot.transpose() * rot - Matrix3::identity()).norm() > 1e-9 {
            return Err("Haar sample not orthonormal".into());
        }
    }
    let _ = TAU;
    Ok("circular mean and Haar orthonormality".into())
}

/// Run the whole battery, returning each check's outcome.
pub fn run_selftests() -> Vec<CheckResult> {
    vec![
        check("exp-log round trips", roundtrips),
        check("rodrigues vs power series", rodrigues_vs_series),
        check("metric axioms", metric_axioms),
        check("so3 distance factor", so3_distance_factor),
        check("gradient finite differences", gradient_probe),
        check("assignment vs brute force", assignment_vs_brute_force),
        check("density normalization", density_normalization),
        check("sampling statistics", sampling_statistics),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_selftests_pass() {
        for result in super::run_selftests() {
            assert!(result.passed, "{}: {}", result.name, result.detail);
        }
    }
}
