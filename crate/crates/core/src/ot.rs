//! Alternating max-min solver for transport maps between two sampled
//! distributions on one manifold.
//!
//! The learned pair is a scalar potential `phi` on the embedded manifold
//! and a vector field `U` with values in the Lie algebra. The objective is
//!
//! ```text
//! mean_target[phi(z)] + mean_source[c(exp_z(-U(z)), z) - phi(exp_z(-U(z)))]
//! ```
//!
//! with cost `c = d^2/2`. `U` is driven to minimize it (the inf-c
//! convolution surrogate) and `phi` to maximize it; at the optimum
//! `T(z) = exp_z[-U(z)]` pushes the source distribution to the target.
//! Both directions of alternation use Adam on exact gradients; the chain
//! through the exponential map and the cost uses the analytic derivatives
//! from the geometry module.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::manifold::{
    self, embed_batch, embed_exp_jacobian, exp_map, transport_cost_and_grad, DistributionSpec,
    ManifoldId, ManifoldPoint,
};
use crate::nn::{adam_step, AdamState, Net, NetSpec};

/// Hyperparameters shared by the transport and conditional solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    /// Minimization steps on `U` per maximization step on `phi`.
    pub inner_min_iters: usize,
    pub outer_max_iters: usize,
    pub seed: u64,
    pub block_count: usize,
    pub block_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            lr: 1e-3,
            inner_min_iters: 10,
            outer_max_iters: 3000,
            seed: 0,
            block_count: 1,
            block_width: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.outer_max_iters == 0 || self.block_width == 0 {
            return Err(Error::config("training sizes must be positive"));
        }
        if self.inner_min_iters == 0 {
            return Err(Error::config("at least one inner minimization step is required"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(1..=2).contains(&self.block_count) {
            return Err(Error::config(format!(
                "block count must be 1 or 2, got {}",
                self.block_count
            )));
        }
        Ok(())
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "batch_size": self.batch_size,
            "lr": self.lr,
            "inner_min_iters": self.inner_min_iters,
            "outer_max_iters": self.outer_max_iters,
            "seed": self.seed,
            "block_count": self.block_count,
            "block_width": self.block_width,
        })
    }
}

/// Where training samples come from: a procedural distribution (fresh
/// minibatches every iteration) or a fixed dataset (uniform resampling
/// with replacement).
#[derive(Debug, Clone)]
pub enum SampleSource {
    Spec(DistributionSpec),
    Fixed(Vec<ManifoldPoint>),
}

impl SampleSource {
    pub fn manifold(&self) -> Result<ManifoldId> {
        match self {
            SampleSource::Spec(spec) => Ok(spec.manifold()),
            SampleSource::Fixed(pts) => pts
                .first()
                .map(|p| p.manifold())
                .ok_or_else(|| Error::contract("fixed sample source is empty")),
        }
    }

    pub fn draw(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<ManifoldPoint>> {
        match self {
            SampleSource::Spec(spec) => manifold::sample(spec, count, rng),
            SampleSource::Fixed(pts) => Ok((0..count)
                .map(|_| pts[rng.random_range(0..pts.len())].clone())
                .collect()),
        }
    }
}

/// A trained transport pair.
///
/// `u` transports source to target: `transport(z) = exp_z[-U(embed(z))]`.
#[derive(Debug, Clone)]
pub struct OtSolution {
    pub manifold: ManifoldId,
    pub phi: Net,
    pub u: Net,
    /// Fixed orientation reminder for readers of serialized solutions.
    pub direction: &'static str,
    /// `(outer_iteration, objective_value)` pairs, every 50 iterations.
    pub trace: Vec<(usize, f64)>,
}

pub(crate) const DIRECTION_NOTE: &str = "U transports source to target: T(z) = exp_z[-U(z)]";

/// Value and exact parameter gradients of the sampled max-min objective.
///
/// Returns `(value, grads_phi, grads_u)`. `grads_u` flows through the
/// exponential map and the squared-distance cost analytically.
pub fn ot_objective(
    phi: &Net,
    u: &Net,
    src: &[ManifoldPoint],
    tgt: &[ManifoldPoint],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::contract("objective batches must be non-empty"));
    }
    let m = src[0].manifold();
    if tgt[0].manifold() != m {
        return Err(Error::contract("source and target batches are on different manifolds"));
    }
    let e = m.embed_dim();
    let n = m.tangent_dim();
    if phi.spec.input_dim != e || u.spec.input_dim != e || u.spec.output_dim != n {
        return Err(Error::contract("network dimensions do not match the manifold"));
    }
    let n_src = src.len();
    let n_tgt = tgt.len();

    // phi on target samples.
    let x_tgt = embed_batch(m, tgt)?;
    let (out_tgt, cache_tgt) = phi.forward_cached(&x_tgt)?;
    let term_tgt = out_tgt.sum() / n_tgt as f64;

    // U on source samples; v = -U.
    let x_src = embed_batch(m, src)?;
    let (u_out, cache_u) = u.forward_cached(&x_src)?;

    let mut x_transported = Array2::zeros((n_src, e));
    let mut jacs = Vec::with_capacity(n_src);
    let mut cost_grads = Vec::with_capacity(n_src);
    let mut cost_total = 0.0;
    let mut v = vec![0.0; n];
    for i in 0..n_src {
        for k in 0..n {
            v[k] = -u_out[(i, k)];
        }
        let (c, dcdv) = transport_cost_and_grad(m, &v)?;
        cost_total += c;
        cost_grads.push(dcdv);
        let (emb, jac) = embed_exp_jacobian(m, &src[i], &v)?;
        for (k, val) in emb.iter().enumerate() {
            x_transported[(i, k)] = *val;
        }
        jacs.push(jac);
    }
    let (out_t, cache_t) = phi.forward_cached(&x_transported)?;
    let value = term_tgt + cost_total / n_src as f64 - out_t.sum() / n_src as f64;
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "objective is not finite (src batch {n_src}, tgt batch {n_tgt})"
        )));
    }

    // phi gradient: +1/n_tgt at target samples, -1/n_src at transported.
    let cot_tgt = Array2::from_elem((n_tgt, 1), 1.0 / n_tgt as f64);
    let (mut grads_phi, _) = phi.backward(&cache_tgt, &cot_tgt)?;
    let cot_t = Array2::from_elem((n_src, 1), -1.0 / n_src as f64);
    let (grads_phi_t, phi_input_grads) = phi.backward(&cache_t, &cot_t)?;
    for (a, b) in grads_phi.iter_mut().zip(grads_phi_t.iter()) {
        *a += b;
    }

    // Chain into U: d value/d v_i, then v = -U flips the sign.
    let mut cot_u = Array2::zeros((n_src, n));
    for i in 0..n_src {
        let jac = &jacs[i];
        for k in 0..n {
            let mut dv = cost_grads[i][k] / n_src as f64;
            for r in 0..e {
                dv += jac[(r, k)] * phi_input_grads[(i, r)];
            }
            cot_u[(i, k)] = -dv;
        }
    }
    let (grads_u, _) = u.backward(&cache_u, &cot_u)?;
    Ok((value, grads_phi, grads_u))
}

/// Train a transport pair from source to target samples.
///
/// Each outer iteration runs `inner_min_iters` Adam descent steps on `U`
/// followed by one Adam ascent step on `phi`, with fresh batches for every
/// step. Deterministic given the generator state.
pub fn train_ot(
    source: &SampleSource,
    target: &SampleSource,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<OtSolution> {
    cfg.validate()?;
    let m = source.manifold()?;
    let e = m.embed_dim();
    let phi_spec = NetSpec::new(e, cfg.block_count, cfg.block_width, 1)?;
    let u_spec = NetSpec::new(e, cfg.block_count, cfg.block_width, m.tangent_dim())?;
    let phi = Net::init(phi_spec, rng)?;
    let u = Net::init(u_spec, rng)?;
    train_ot_from(phi, u, source, target, cfg, rng)
}

/// [`train_ot`] continuing from given networks (checkpoint warm starts).
pub fn train_ot_from(
    mut phi: Net,
    mut u: Net,
    source: &SampleSource,
    target: &SampleSource,
    cfg: &TrainConfig,
    rng: &mut impl Rng,
) -> Result<OtSolution> {
    cfg.validate()?;
    let m = source.manifold()?;
    if target.manifold()? != m {
        return Err(Error::contract("source and target are on different manifolds"));
    }
    let e = m.embed_dim();
    if phi.spec.input_dim != e || u.spec.input_dim != e || u.spec.output_dim != m.tangent_dim() {
        return Err(Error::contract("networks do not match the manifold"));
    }
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);
    let mut trace = Vec::new();

    for outer in 0..cfg.outer_max_iters {
        for _ in 0..cfg.inner_min_iters {
            let src = source.draw(cfg.batch_size, rng)?;
            let tgt = target.draw(cfg.batch_size, rng)?;
            let (_, _, grads_u) = ot_objective(&phi, &u, &src, &tgt)?;
            adam_step(&mut u.params, &grads_u, &mut adam_u)?;
        }
        let src = source.draw(cfg.batch_size, rng)?;
        let tgt = target.draw(cfg.batch_size, rng)?;
        let (value, mut grads_phi, _) = ot_objective(&phi, &u, &src, &tgt).map_err(|e| match e {
            Error::Numerical(msg) => Error::numerical(format!("at outer iteration {outer}: {msg}")),
            other => other,
        })?;
        for g in &mut grads_phi {
            *g = -*g; // ascent
        }
        adam_step(&mut phi.params, &grads_phi, &mut adam_phi)?;
        if outer % 50 == 0 || outer + 1 == cfg.outer_max_iters {
            trace.push((outer, value));
        }
    }
    Ok(OtSolution {
        manifold: m,
        phi,
        u,
        direction: DIRECTION_NOTE,
        trace,
    })
}

impl OtSolution {
    /// Tangent displacement the map applies at `z`: `-U(embed(z))`.
    pub fn displacement(&self, z: &ManifoldPoint) -> Result<Vec<f64>> {
        let emb = manifold::embed(self.manifold, z)?;
        let x = Array2::from_shape_vec((1, emb.len()), emb).expect("row shape");
        let out = self.u.forward(&x)?;
        Ok((0..self.manifold.tangent_dim()).map(|k| -out[(0, k)]).collect())
    }

    /// Apply the learned map: `exp_z[-U(z)]`.
    pub fn transport(&self, z: &ManifoldPoint) -> Result<ManifoldPoint> {
        let v = self.displacement(z)?;
        exp_map(self.manifold, z, &v)
    }

    /// Displacement interpolation `exp_z[-t U(z)]` for `t` in `[0, 1]`.
    pub fn trajectory(&self, z: &ManifoldPoint, t: f64) -> Result<ManifoldPoint> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::contract(format!("trajectory time {t} outside [0, 1]")));
        }
        let v: Vec<f64> = self.displacement(z)?.iter().map(|x| t * x).collect();
        exp_map(self.manifold, z, &v)
    }

    /// Map a whole sample set.
    pub fn pushforward(&self, pts: &[ManifoldPoint]) -> Result<Vec<ManifoldPoint>> {
        pts.iter().map(|z| self.transport(z)).collect()
    }

    /// Mean transport cost `mean_z c(z, T(z))` over a sample set.
    pub fn empirical_cost(&self, pts: &[ManifoldPoint]) -> Result<f64> {
        let mut total = 0.0;
        for z in pts {
            let v = self.displacement(z)?;
            let (c, _) = transport_cost_and_grad(self.manifold, &v)?;
            total += c;
        }
        Ok(total / pts.len() as f64)
    }

    /// Write `phi.ckpt`, `u.ckpt`, and `solution.json` under `dir`.
    pub fn save(&self, dir: &Path, cfg: Option<&TrainConfig>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::nn::save_checkpoint(&dir.join("phi.ckpt"), &self.phi)?;
        crate::nn::save_checkpoint(&dir.join("u.ckpt"), &self.u)?;
        let manifest = serde_json::json!({
            "kind": "ot_solution",
            "manifold": self.manifold.name(),
            "direction": self.direction,
            "final_loss": self.trace.last().map(|t| t.1),
            "config": cfg.map(|c| c.to_json()),
        });
        std::fs::write(
            dir.join("solution.json"),
            serde_json::to_string_pretty(&manifest).expect("json"),
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<OtSolution> {
        let text = std::fs::read_to_string(dir.join("solution.json"))?;
        let manifest: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Error::contract(format!("bad solution.json: {e}")))?;
        let name = manifest["manifold"]
            .as_str()
            .ok_or_else(|| Error::contract("solution.json is missing the manifold"))?;
        let m = ManifoldId::parse(name)?;
        let phi = crate::nn::load_checkpoint(&dir.join("phi.ckpt"))?;
        let u = crate::nn::load_checkpoint(&dir.join("u.ckpt"))?;
        if phi.spec.input_dim != m.embed_dim() || u.spec.output_dim != m.tangent_dim() {
            return Err(Error::contract("checkpoints do not match the manifold"));
        }
        Ok(OtSolution {
            manifold: m,
            phi,
            u,
            direction: DIRECTION_NOTE,
            trace: Vec::new(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use std::f64::consts::{PI, TAU};

    fn fresh_nets(m: ManifoldId, seed: u64) -> (Net, Net) {
        let mut r = rng::from_seed(seed);
        let e = m.embed_dim();
        let phi = Net::init(NetSpec::new(e, 1, 16, 1).unwrap(), &mut r).unwrap();
        let u = Net::init(NetSpec::new(e, 1, 16, m.tangent_dim()).unwrap(), &mut r).unwrap();
        (phi, u)
    }

    /// Force a constant vector-field output by zeroing everything except
    /// the head bias.
    fn rig_constant_output(net: &mut Net, value: &[f64]) {
        net.params.iter_mut().for_each(|p| *p = 0.0);
        let layout = net.layout();
        let b = layout.seg("b_out");
        for (k, v) in value.iter().enumerate() {
            net.params[b.offset + k] = *v;
        }
    }

    /// Force `phi(embedding) = w . embedding` (blocks zeroed, adapter
    /// passes the embedding through).
    fn rig_linear_phi(net: &mut Net, w: &[f64]) {
        net.params.iter_mut().for_each(|p| *p = 0.0);
        let layout = net.layout();
        let w_in = layout.seg("w_in");
        for i in 0..net.spec.input_dim {
            net.params[w_in.offset + i * w_in.cols + i] = 1.0;
        }
        let w_out = layout.seg("w_out");
        for (j, x) in w.iter().enumerate() {
            net.params[w_out.offset + j] = *x;
        }
    }

    #[test]
    fn zero_networks_zero_objective() {
        let (phi, u) = fresh_nets(ManifoldId::Circle, 1);
        let src: Vec<_> = (0..8).map(|i| ManifoldPoint::circle(i as f64 * 0.7)).collect();
        let tgt: Vec<_> = (0..8).map(|i| ManifoldPoint::circle(i as f64 * 0.3)).collect();
        let (value, _, _) = ot_objective(&phi, &u, &src, &tgt).unwrap();
        assert_eq!(value, 0.0);
    }

    #[test]
    fn constant_displacement_reduces_to_cost() {
        let (phi, mut u) = fresh_nets(ManifoldId::Circle, 2);
        // U = -pi/2 everywhere, so v = -U = pi/2 and the value is c alone.
        rig_constant_output(&mut u, &[-PI / 2.0]);
        let src = vec![ManifoldPoint::circle(0.0)];
        let tgt = vec![ManifoldPoint::circle(1.0)];
        let (value, _, _) = ot_objective(&phi, &u, &src, &tgt).unwrap();
        assert_abs_diff_eq!(value, (PI / 2.0) * (PI / 2.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn two_point_hand_computation() {
        let (mut phi, mut u) = fresh_nets(ManifoldId::Circle, 3);
        rig_linear_phi(&mut phi, &[1.0, 2.0]);
        rig_constant_output(&mut u, &[0.3]);
        let src = vec![ManifoldPoint::circle(0.5), ManifoldPoint::circle(2.0)];
        let tgt = vec![ManifoldPoint::circle(1.0), ManifoldPoint::circle(4.0)];
        let (value, _, _) = ot_objective(&phi, &u, &src, &tgt).unwrap();
        let phi_at = |t: f64| t.cos() + 2.0 * t.sin();
        let c = 0.3f64 * 0.3 / 2.0;
        let expected = (phi_at(1.0) + phi_at(4.0)) / 2.0
            + ((c - phi_at(0.5 - 0.3)) + (c - phi_at(2.0 - 0.3))) / 2.0;
        assert_abs_diff_eq!(value, expected, epsilon = 1e-12);
    }

    #[test]
    fn objective_gradients_match_finite_differences() {
        let mut r = rng::from_seed(50);
        for m in [ManifoldId::Circle, ManifoldId::Se2, ManifoldId::So3] {
            let (mut phi, mut u) = fresh_nets(m, 60 + m.tangent_dim() as u64);
            for p in phi.params.iter_mut() {
                *p = r.random_range(-0.4..0.4);
            }
            for p in u.params.iter_mut() {
                *p = r.random_range(-0.4..0.4);
            }
            let spec = match m {
                ManifoldId::Circle => DistributionSpec::CircleUniform,
                ManifoldId::Se2 => DistributionSpec::Se2BoxUniform {
                    x: (-1.0, 1.0),
                    y: (-1.0, 1.0),
                },
                ManifoldId::So3 => DistributionSpec::So3Uniform,
            };
            let src = crate::manifold::sample(&spec, 5, &mut r).unwrap();
            let tgt = crate::manifold::sample(&spec, 7, &mut r).unwrap();
            let (_, grads_phi, grads_u) = ot_objective(&phi, &u, &src, &tgt).unwrap();

            let eval = |phi: &Net, u: &Net| ot_objective(phi, u, &src, &tgt).unwrap().0;
            for _ in 0..20 {
                let dir_phi: Vec<f64> =
                    (0..phi.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
                let dir_u: Vec<f64> =
                    (0..u.params.len()).map(|_| r.random_range(-1.0..1.0)).collect();
                let analytic: f64 = grads_phi.iter().zip(&dir_phi).map(|(g, d)| g * d).sum::<f64>()
                    + grads_u.iter().zip(&dir_u).map(|(g, d)| g * d).sum::<f64>();
                let h = 1e-5;
                let mut pp = phi.clone();
                let mut pm = phi.clone();
                let mut up = u.clone();
                let mut um = u.clone();
                for i in 0..dir_phi.len() {
                    pp.params[i] += h * dir_phi[i];
                    pm.params[i] -= h * dir_phi[i];
                }
                for i in 0..dir_u.len() {
                    up.params[i] += h * dir_u[i];
                    um.params[i] -= h * dir_u[i];
                }
                let fd = (eval(&pp, &up) - eval(&pm, &um)) / (2.0 * h);
                let denom = analytic.abs().max(fd.abs()).max(1e-6);
                assert!(
                    (analytic - fd).abs() / denom < 1e-4,
                    "{}: analytic {analytic} vs fd {fd}",
                    m.name()
                );
            }
        }
    }

    #[test]
    fn transport_identity_and_rigged() {
        let (phi, u) = fresh_nets(ManifoldId::Circle, 4);
        let sol = OtSolution {
            manifold: ManifoldId::Circle,
            phi,
            u,
            direction: DIRECTION_NOTE,
            trace: Vec::new(),
        };
        for t in [0.0, 1.0, 3.0, 6.0] {
            let z = ManifoldPoint::circle(t);
            assert_eq!(sol.transport(&z).unwrap(), z);
        }

        let (phi, mut u) = fresh_nets(ManifoldId::Circle, 5);
        rig_constant_output(&mut u, &[-PI / 2.0]);
        let sol = OtSolution {
            manifold: ManifoldId::Circle,
            phi,
            u,
            direction: DIRECTION_NOTE,
            trace: Vec::new(),
        };
        let out = sol.transport(&ManifoldPoint::circle(0.0)).unwrap();
        assert_abs_diff_eq!(out.theta().unwrap(), PI / 2.0, epsilon = 1e-12);

        // Constant-speed geodesic interpolation.
        let z = ManifoldPoint::circle(1.0);
        assert_eq!(sol.trajectory(&z, 0.0).unwrap(), z);
        assert_eq!(
            sol.trajectory(&z, 1.0).unwrap(),
            sol.transport(&z).unwrap()
        );
        let mid = sol.trajectory(&z, 0.5).unwrap();
        let full = sol.transport(&z).unwrap();
        let d_mid = crate::manifold::geodesic_dist(ManifoldId::Circle, &z, &mid).unwrap();
        let d_full = crate::manifold::geodesic_dist(ManifoldId::Circle, &z, &full).unwrap();
        assert_abs_diff_eq!(d_mid, 0.5 * d_full, epsilon = 1e-8);
        assert!(sol.trajectory(&z, 1.5).is_err());
        assert!(sol.trajectory(&z, -0.1).is_err());
    }

    #[test]
    fn training_identity_problem() {
        // Same source and target: the optimum is the identity map.
        let cfg = TrainConfig {
            outer_max_iters: 2000,
            ..TrainConfig::default()
        };
        let source = SampleSource::Spec(DistributionSpec::CircleUniform);
        let target = SampleSource::Spec(DistributionSpec::CircleUniform);
        let mut r = rng::from_seed(6);
        let sol = train_ot(&source, &target, &cfg, &mut r).unwrap();
        let test = crate::manifold::sample(&DistributionSpec::CircleUniform, 500, &mut r).unwrap();
        let mut total = 0.0;
        for z in &test {
            let t = sol.transport(z).unwrap();
            total += crate::manifold::geodesic_dist(ManifoldId::Circle, z, &t).unwrap();
        }
        let mean_disp = total / test.len() as f64;
        assert!(mean_disp < 0.1, "mean displacement {mean_disp}");
    }

    #[test]
    fn training_determinism() {
        let cfg = TrainConfig {
            outer_max_iters: 20,
            ..TrainConfig::default()
        };
        let source = SampleSource::Spec(DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 });
        let target = SampleSource::Spec(DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 });
        let a = train_ot(&source, &target, &cfg, &mut rng::from_seed(7)).unwrap();
        let b = train_ot(&source, &target, &cfg, &mut rng::from_seed(7)).unwrap();
        assert_eq!(a.phi.params, b.phi.params);
        assert_eq!(a.u.params, b.u.params);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn fixed_source_resampling() {
        let pts: Vec<_> = (0..10)
            .map(|i| ManifoldPoint::circle(i as f64 * TAU / 10.0))
            .collect();
        let source = SampleSource::Fixed(pts.clone());
        let batch = source.draw(64, &mut rng::from_seed(8)).unwrap();
        assert_eq!(batch.len(), 64);
        assert!(batch.iter().all(|p| pts.contains(p)));
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (phi, u) = fresh_nets(ManifoldId::Se2, 9);
        let sol = OtSolution {
            manifold: ManifoldId::Se2,
            phi,
            u,
            direction: DIRECTION_NOTE,
            trace: vec![(0, 0.5)],
        };
        sol.save(dir.path(), Some(&TrainConfig::default())).unwrap();
        let loaded = OtSolution::load(dir.path()).unwrap();
        assert_eq!(loaded.manifold, ManifoldId::Se2);
        assert_eq!(loaded.phi.params, sol.phi.params);
        assert_eq!(loaded.u.params, sol.u.params);
    }
}
