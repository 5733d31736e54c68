//! Block-triangular conditional transport: a likelihood-free posterior
//! sampler trained from joint samples alone.
//!
//! Both networks take the manifold embedding concatenated with the raw
//! observation vector. The objective mirrors the unconditional one with
//! the joint distribution playing the target role and the independent
//! coupling (observations shuffled across the batch) the source role:
//!
//! ```text
//! mean_joint[phi(x, y)]
//!   + mean_indep[c(x, exp_x(-U(x, y))) - phi(exp_x(-U(x, y)), y)]
//! ```
//!
//! The map `(x, y) -> (T(x, y), y)` never touches `y`, which is what makes
//! `T(., y)` a sampler of the posterior given `y`.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::filter::ObservationModel;
use crate::manifold::{
    self, embed_exp_jacobian, exp_map, transport_cost_and_grad, DistributionSpec, ManifoldId,
    ManifoldPoint,
};
use crate::nn::{adam_step, AdamState, Net, NetSpec};
use crate::ot::TrainConfig;

/// One draw from the joint distribution of state and observation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSample {
    pub x: ManifoldPoint,
    pub y: Vec<f64>,
}

/// Training data for the conditional solver: a fixed dataset or a
/// generative model sampled fresh every batch.
#[derive(Debug, Clone)]
pub enum JointSource {
    Fixed(Vec<JointSample>),
    Generative {
        prior: DistributionSpec,
        obs: ObservationModel,
    },
}

impl JointSource {
    pub fn manifold(&self) -> Result<ManifoldId> {
        match self {
            JointSource::Fixed(samples) => samples
                .first()
                .map(|s| s.x.manifold())
                .ok_or_else(|| Error::contract("joint dataset is empty")),
            JointSource::Generative { prior, .. } => Ok(prior.manifold()),
        }
    }

    pub fn obs_dim(&self) -> Result<usize> {
        match self {
            JointSource::Fixed(samples) => samples
                .first()
                .map(|s| s.y.len())
                .ok_or_else(|| Error::contract("joint dataset is empty")),
            JointSource::Generative { prior, obs } => obs.dim(prior.manifold()),
        }
    }

    fn draw(&self, count: usize, rng: &mut impl Rng) -> Result<Vec<JointSample>> {
        match self {
            JointSource::Fixed(samples) => Ok((0..count)
                .map(|_| samples[rng.random_range(0..samples.len())].clone())
                .collect()),
            JointSource::Generative { prior, obs } => {
                let xs = manifold::sample(prior, count, rng)?;
                xs.into_iter()
                    .map(|x| {
                        let y = obs.observe(&x, rng)?;
                        Ok(JointSample { x, y })
                    })
                    .collect()
            }
        }
    }
}

/// A trained conditional transport pair; `obs_dim` is the observation
/// length appended to the embedding.
#[derive(Debug, Clone)]
pub struct ConditionalSolution {
    pub manifold: ManifoldId,
    pub obs_dim: usize,
    pub phi: Net,
    pub u: Net,
    pub trace: Vec<(usize, f64)>,
}

/// Shuffle the observations across the batch with a uniformly random
/// permutation, turning joint samples into an independent coupling.
pub fn independent_coupling(batch: &[JointSample], rng: &mut impl Rng) -> Result<Vec<JointSample>> {
    if batch.len() < 2 {
        return Err(Error::contract("independent coupling needs at least 2 samples"));
    }
    let n = batch.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    Ok((0..n)
        .map(|i| JointSample {
            x: batch[i].x.clone(),
            y: batch[perm[i]].y.clone(),
        })
        .collect())
}

fn check_batch(m: ManifoldId, obs_dim: usize, batch: &[JointSample]) -> Result<()> {
    for s in batch {
        if s.x.manifold() != m {
            return Err(Error::contract("joint sample on the wrong manifold"));
        }
        if s.y.len() != obs_dim {
            return Err(Error::contract(format!(
                "observation length {} differs from {obs_dim}",
                s.y.len()
            )));
        }
    }
    Ok(())
}

/// Stack `[embed(x) | y]` rows.
fn input_batch(m: ManifoldId, batch: &[JointSample]) -> Result<Array2<f64>> {
    let e = m.embed_dim();
    let obs_dim = batch[0].y.len();
    let mut out = Array2::zeros((batch.len(), e + obs_dim));
    for (i, s) in batch.iter().enumerate() {
        let emb = manifold::embed(m, &s.x)?;
        for (j, v) in emb.iter().enumerate() {
            out[(i, j)] = *v;
        }
        for (j, v) in s.y.iter().enumerate() {
            out[(i, e + j)] = *v;
        }
    }
    Ok(out)
}

/// Value and exact gradients of the conditional max-min objective.
pub fn conditional_objective(
    phi: &Net,
    u: &Net,
    joint: &[JointSample],
    indep: &[JointSample],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if joint.is_empty() || indep.is_empty() {
        return Err(Error::contract("objective batches must be non-empty"));
    }
    let m = joint[0].x.manifold();
    let obs_dim = joint[0].y.len();
    check_batch(m, obs_dim, joint)?;
    check_batch(m, obs_dim, indep)?;
    let e = m.embed_dim();
    let n = m.tangent_dim();
    if phi.spec.input_dim != e + obs_dim || u.spec.input_dim != e + obs_dim || u.spec.output_dim != n
    {
        return Err(Error::contract(
            "network dimensions do not match manifold plus observation",
        ));
    }
    let n_joint = joint.len();
    let n_indep = indep.len();

    let x_joint = input_batch(m, joint)?;
    let (out_joint, cache_joint) = phi.forward_cached(&x_joint)?;
    let term_joint = out_joint.sum() / n_joint as f64;

    let x_indep = input_batch(m, indep)?;
    let (u_out, cache_u) = u.forward_cached(&x_indep)?;

    // Transported inputs keep their y columns; only the embedding moves.
    let mut x_transported = x_indep.clone();
    let mut jacs = Vec::with_capacity(n_indep);
    let mut cost_grads = Vec::with_capacity(n_indep);
    let mut cost_total = 0.0;
    let mut v = vec![0.0; n];
    for i in 0..n_indep {
        for k in 0..n {
            v[k] = -u_out[(i, k)];
        }
        let (c, dcdv) = transport_cost_and_grad(m, &v)?;
        cost_total += c;
        cost_grads.push(dcdv);
        let (emb, jac) = embed_exp_jacobian(m, &indep[i].x, &v)?;
        for (k, val) in emb.iter().enumerate() {
            x_transported[(i, k)] = *val;
        }
        jacs.push(jac);
    }
    let (out_t, cache_t) = phi.forward_cached(&x_transported)?;
    let value = term_joint + cost_total / n_indep as f64 - out_t.sum() / n_indep as f64;
    if !value.is_finite() {
        return Err(Error::numerical(format!(
            "conditional objective is not finite (batches {n_joint}/{n_indep})"
        )));
    }

    let cot_joint = Array2::from_elem((n_joint, 1), 1.0 / n_joint as f64);
    let (mut grads_phi, _) = phi.backward(&cache_joint, &cot_joint)?;
    let cot_t = Array2::from_elem((n_indep, 1), -1.0 / n_indep as f64);
    let (grads_phi_t, phi_input_grads) = phi.backward(&cache_t, &cot_t)?;
    for (a, b) in grads_phi.iter_mut().zip(grads_phi_t.iter()) {
        *a += b;
    }

    // Only the embedding columns feed back into U; y columns are constant.
    let mut cot_u = Array2::zeros((n_indep, n));
    for i in 0..n_indep {
        let jac = &jacs[i];
        for k in 0..n {
            let mut dv = cost_grads[i][k] / n_indep as f64;
            for r in 0..e {
                dv += jac[(r, k)] * phi_input_grads[(i, r)];
            }
            cot_u[(i, k)] = -dv;
        }
    }
    let (grads_u, _) = u.backward(&cache_u, &cot_u)?;
    Ok((value, grads_phi, grads_u))
}

/// Train a conditional transport pair from joint samples.
///
/// `warm` restarts from an earlier solution's parameters (the sequential
/// filter reuses the previous step's networks). Fresh optimizer state
/// either way.
pub fn train_conditional(
    joint: &JointSource,
    cfg: &TrainConfig,
    warm: Option<&ConditionalSolution>,
    rng: &mut impl Rng,
) -> Result<ConditionalSolution> {
    cfg.validate()?;
    let m = joint.manifold()?;
    let obs_dim = joint.obs_dim()?;
    if let JointSource::Fixed(samples) = joint {
        if samples.len() < cfg.batch_size {
            return Err(Error::contract(format!(
                "dataset of {} samples is smaller than the batch size {}",
                samples.len(),
                cfg.batch_size
            )));
        }
        check_batch(m, obs_dim, samples)?;
    }
    let e = m.embed_dim();
    let phi_spec = NetSpec::new(e + obs_dim, cfg.block_count, cfg.block_width, 1)?;
    let u_spec = NetSpec::new(e + obs_dim, cfg.block_count, cfg.block_width, m.tangent_dim())?;
    let (mut phi, mut u) = match warm {
        Some(prev) => {
            if prev.phi.spec != phi_spec || prev.u.spec != u_spec || prev.manifold != m {
                return Err(Error::contract(
                    "warm-start solution does not match the requested architecture",
                ));
            }
            (prev.phi.clone(), prev.u.clone())
        }
        None => (Net::init(phi_spec, rng)?, Net::init(u_spec, rng)?),
    };
    let mut adam_phi = AdamState::new(phi.params.len(), cfg.lr);
    let mut adam_u = AdamState::new(u.params.len(), cfg.lr);
    let mut trace = Vec::new();

    for outer in 0..cfg.outer_max_iters {
        for _ in 0..cfg.inner_min_iters {
            let batch = joint.draw(cfg.batch_size, rng)?;
            let indep = independent_coupling(&batch, rng)?;
            let (_, _, grads_u) = conditional_objective(&phi, &u, &batch, &indep)?;
            adam_step(&mut u.params, &grads_u, &mut adam_u)?;
        }
        let batch = joint.draw(cfg.batch_size, rng)?;
        let indep = independent_coupling(&batch, rng)?;
        let (value, mut grads_phi, _) =
            conditional_objective(&phi, &u, &batch, &indep).map_err(|e| match e {
                Error::Numerical(msg) => {
                    Error::numerical(format!("at outer iteration {outer}: {msg}"))
                }
                other => other,
            })?;
        for g in &mut grads_phi {
            *g = -*g;
        }
        adam_step(&mut phi.params, &grads_phi, &mut adam_phi)?;
        if outer % 50 == 0 || outer + 1 == cfg.outer_max_iters {
            trace.push((outer, value));
        }
    }
    Ok(ConditionalSolution {
        manifold: m,
        obs_dim,
        phi,
        u,
        trace,
    })
}

impl ConditionalSolution {
    /// Tangent displacement at `(x, y)`: `-U(embed(x), y)`.
    pub fn displacement(&self, x: &ManifoldPoint, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.obs_dim {
            return Err(Error::contract(format!(
                "observation length {} differs from {}",
                y.len(),
                self.obs_dim
            )));
        }
        let emb = manifold::embed(self.manifold, x)?;
        let mut row = Array2::zeros((1, emb.len() + y.len()));
        for (j, v) in emb.iter().chain(y.iter()).enumerate() {
            row[(0, j)] = *v;
        }
        let out = self.u.forward(&row)?;
        Ok((0..self.manifold.tangent_dim())
            .map(|k| -out[(0, k)])
            .collect())
    }

    /// The conditional map `T(x, y) = exp_x[-U(x, y)]`.
    pub fn map(&self, x: &ManifoldPoint, y: &[f64]) -> Result<ManifoldPoint> {
        let v = self.displacement(x, y)?;
        exp_map(self.manifold, x, &v)
    }

    /// Push a prior sample set through `T(., y)`: a posterior sample set.
    pub fn posterior_sample(
        &self,
        prior: &[ManifoldPoint],
        y: &[f64],
    ) -> Result<Vec<ManifoldPoint>> {
        prior.iter().map(|x| self.map(x, y)).collect()
    }

    /// Write `phi.ckpt`, `u.ckpt`, and `solution.json` under `dir`.
    pub fn save(&self, dir: &Path, cfg: Option<&TrainConfig>) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        crate::nn::save_checkpoint(&dir.join("phi.ckpt"), &self.phi)?;
        crate::nn::save_checkpoint(&dir.join("u.ckpt"), &self.u)?;
        let manifest = serde_json::json!({
            "kind": "conditional_solution",
            "manifold": self.manifold.name(),
            "obs_dim": self.obs_dim,
            "final_loss": self.trace.last().map(|t| t.1),
            "config": cfg.map(|c| c.to_json()),
        });
        std::fs::write(
            dir.join("solution.json"),
            serde_json::to_string_pretty(&manifest).expect("json"),
        )?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<ConditionalSolution> {
        let text = std::fs::read_to_string(dir.join("solution.json"))?;
        let manifest: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::contract(format!("bad solution.json: {e}")))?;
        let name = manifest["manifold"]
            .as_str()
            .ok_or_else(|| Error::contract("solution.json is missing the manifold"))?;
        let m = ManifoldId::parse(name)?;
        let obs_dim = manifest["obs_dim"]
            .as_u64()
            .ok_or_else(|| Error::contract("solution.json is missing obs_dim"))?
            as usize;
        let phi = crate::nn::load_checkpoint(&dir.join("phi.ckpt"))?;
        let u = crate::nn::load_checkpoint(&dir.join("u.ckpt"))?;
        if phi.spec.input_dim != m.embed_dim() + obs_dim || u.spec.output_dim != m.tangent_dim() {
            return Err(Error::contract("checkpoints do not match the manifest"));
        }
        Ok(ConditionalSolution {
            manifold: m,
            obs_dim,
            phi,
            u,
            trace: Vec::new(),
        })
    }
}
