//! Sequential nonlinear filtering on the circle, plus the observation and
//! dynamics models shared by the static experiments.
//!
//! The OT filter trains a fresh conditional transport map at every step
//! from the propagated particles and their simulated observations, then
//! applies it at the realized observation. SIR (bootstrap particle filter
//! with systematic resampling) and a perturbed-observation EnKF in the
//! angle chart serve as baselines.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::conditional::{train_conditional, ConditionalSolution, JointSample, JointSource};
use crate::error::{Error, Result};
use crate::manifold::{
    circle_dist, wrap_angle, wrap_to_pi, DistributionSpec, ManifoldId, ManifoldPoint,
};
use crate::ot::TrainConfig;
use crate::rng;

/// Observation models used across the experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationModel {
    /// Distance to the wall of a circular room along the heading.
    ///
    /// On the circle the robot sits at a fixed offset `ell` from the
    /// center and only the heading is unknown:
    /// `h(t) = ell cos t + sqrt(radius^2 - ell^2 sin^2 t)`.
    /// On SE(2) the position is part of the state and the same sensor
    /// becomes the ray-to-wall distance from `(x, y)` along the heading;
    /// `ell` is not used there.
    CircleWall { ell: f64, radius: f64, sigma: f64 },
    /// Four matrix entries `(R11, R21, R31, R22)` of a rotation.
    So3Entries { sigma: f64 },
}

impl ObservationModel {
    pub fn circle_wall(ell: f64, radius: f64, sigma: f64) -> Self {
        ObservationModel::CircleWall { ell, radius, sigma }
    }

    pub fn so3_entries(sigma: f64) -> Self {
        ObservationModel::So3Entries { sigma }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ObservationModel::CircleWall { ell, radius, sigma } => {
                if !(*radius > 0.0) {
                    return Err(Error::config(format!("room radius must be positive, got {radius}")));
                }
                if !(*ell > 0.0 && ell * ell < radius * radius) {
                    return Err(Error::config(format!(
                        "wall offset must satisfy 0 < ell < radius, got ell = {ell}, radius = {radius}"
                    )));
                }
                if !(*sigma > 0.0) {
                    return Err(Error::config(format!("observation noise must be positive, got {sigma}")));
                }
            }
            ObservationModel::So3Entries { sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::config(format!("observation noise must be positive, got {sigma}")));
                }
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match self {
            ObservationModel::CircleWall { sigma, .. } => *sigma,
            ObservationModel::So3Entries { sigma } => *sigma,
        }
    }

    /// Observation length for states on `m`.
    pub fn dim(&self, m: ManifoldId) -> Result<usize> {
        match (self, m) {
            (ObservationModel::CircleWall { .. }, ManifoldId::Circle | ManifoldId::Se2) => Ok(1),
            (ObservationModel::So3Entries { .. }, ManifoldId::So3) => Ok(4),
            _ => Err(Error::contract(format!(
                "observation model does not apply to {}",
                m.name()
            ))),
        }
    }

    /// Noise-free observation `h(z)`.
    pub fn observe_noiseless(&self, z: &ManifoldPoint) -> Result<Vec<f64>> {
        match (self, z) {
            (ObservationModel::CircleWall { ell, radius, .. }, ManifoldPoint::Circle(t)) => {
                let s = t.sin();
                Ok(vec![ell * t.cos() + (radius * radius - ell * ell * s * s).sqrt()])
            }
            (
                ObservationModel::CircleWall { radius, .. },
                ManifoldPoint::Se2 { x, y, theta },
            ) => {
                // Ray from (x, y) along the heading to the circle of the
                // given radius; the discriminant is clamped so states on
                // the wall stay finite.
                let along = x * theta.cos() + y * theta.sin();
                let disc = radius * radius - (x * x + y * y) + along * along;
                Ok(vec![-along + disc.max(0.0).sqrt()])
            }
            (ObservationModel::So3Entries { .. }, ManifoldPoint::So3(r)) => {
                Ok(vec![r[(0, 0)], r[(1, 0)], r[(2, 0)], r[(1, 1)]])
            }
            _ => Err(Error::contract(format!(
                "observation model does not apply to a point on {}",
                z.manifold().name()
            ))),
        }
    }

    /// Observation with additive `N(0, sigma^2 I)` noise.
    pub fn observe(&self, z: &ManifoldPoint, rng: &mut impl Rng) -> Result<Vec<f64>> {
        let mut y = self.observe_noiseless(z)?;
        let sigma = self.sigma();
        for v in &mut y {
            let xi: f64 = rng.sample(StandardNormal);
            *v += sigma * xi;
        }
        Ok(y)
    }
}

/// State transition models.
#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsModel {
    /// Identity dynamics for static problems; consumes no randomness.
    Static,
    /// Circle random walk `t_{k+1} = t_k + velocity + noise`.
    CircleRandomWalk { velocity: f64, noise_std: f64 },
}

impl DynamicsModel {
    pub fn propagate(&self, z: &ManifoldPoint, rng: &mut impl Rng) -> Result<ManifoldPoint> {
        match self {
            DynamicsModel::Static => Ok(z.clone()),
            DynamicsModel::CircleRandomWalk { velocity, noise_std } => {
                let t = z.theta()?;
                let xi: f64 = rng.sample(StandardNormal);
                Ok(ManifoldPoint::circle(t + velocity + noise_std * xi))
            }
        }
    }
}

/// A particle cloud, optionally weighted (SIR carries weights between the
/// likelihood update and resampling; everywhere else ensembles are
/// uniform).
#[derive(Debug, Clone)]
pub struct Ensemble {
    pub particles: Vec<ManifoldPoint>,
    pub weights: Option<Vec<f64>>,
}

impl Ensemble {
    pub fn uniform(particles: Vec<ManifoldPoint>) -> Self {
        Ensemble {
            particles,
            weights: None,
        }
    }

    pub fn weighted(particles: Vec<ManifoldPoint>, weights: Vec<f64>) -> Result<Self> {
        if particles.len() != weights.len() {
            return Err(Error::contract("weights and particles differ in length"));
        }
        if weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::contract("weights must be positive and finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::contract(format!("weights sum to {total}, expected 1")));
        }
        Ok(Ensemble {
            particles,
            weights: Some(weights),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.particles.len() as f64,
        }
    }
}

// ---------------------------------------------------------------------------
// Filter steps
// ---------------------------------------------------------------------------

/// One OT-filter step: propagate, simulate observations, train the
/// conditional map on the propagated pairs, and apply it at the realized
/// observation. Returns the updated ensemble and the trained solution
/// (reusable as a warm start).
pub fn ot_filter_step(
    ensemble: &Ensemble,
    y_t: &[f64],
    dynamics: &DynamicsModel,
    obs: &ObservationModel,
    cfg: &TrainConfig,
    warm: Option<&ConditionalSolution>,
    rng: &mut impl Rng,
) -> Result<(Ensemble, ConditionalSolution)> {
    if ensemble.weights.is_some() {
        return Err(Error::contract("the OT filter expects an unweighted ensemble"));
    }
    let mut pairs = Vec::with_capacity(ensemble.len());
    for p in &ensemble.particles {
        let x = dynamics.propagate(p, rng)?;
        let y = obs.observe(&x, rng)?;
        pairs.push(JointSample { x, y });
    }
    let sol = train_conditional(&JointSource::Fixed(pairs.clone()), cfg, warm, rng)?;
    let particles = pairs
        .iter()
        .map(|s| sol.map(&s.x, y_t))
        .collect::<Result<Vec<_>>>()?;
    Ok((Ensemble::uniform(particles), sol))
}

/// Posterior weights proportional to `prior_weight * exp(loglik)`,
/// max-shifted before exponentiation. Falls back to uniform with a
/// warning if everything underflows.
pub(crate) fn reweight(prior: &[f64], loglik: &[f64]) -> Vec<f64> {
    let max = loglik.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = prior
        .iter()
        .zip(loglik.iter())
        .map(|(p, l)| p * (l - max).exp())
        .collect();
    let total: f64 = w.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        eprintln!("warning: particle weights degenerated; resetting to uniform");
        return vec![1.0 / prior.len() as f64; prior.len()];
    }
    for x in &mut w {
        *x /= total;
    }
    w
}

/// Systematic resampling: one uniform offset, evenly spaced positions.
pub(crate) fn systematic_resample(
    particles: &[ManifoldPoint],
    weights: &[f64],
    rng: &mut impl Rng,
) -> Vec<ManifoldPoint> {
    let n = particles.len();
    let offset: f64 = rng.random_range(0.0..1.0);
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0usize;
    for i in 0..n {
        let target = (i as f64 + offset) / n as f64;
        while cumulative < target && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(particles[j].clone());
    }
    out
}

/// One bootstrap-particle-filter step: propagate, weight by the Gaussian
/// likelihood, resample systematically. Output weights are uniform.
pub fn sir_step(
    ensemble: &Ensemble,
    y_t: &[f64],
    dynamics: &DynamicsModel,
    obs: &ObservationModel,
    rng: &mut impl Rng,
) -> Result<Ensemble> {
    let n = ensemble.len();
    if n == 0 {
        return Err(Error::contract("empty ensemble"));
    }
    let mut propagated = Vec::with_capacity(n);
    let mut loglik = Vec::with_capacity(n);
    let sigma = obs.sigma();
    for (i, p) in ensemble.particles.iter().enumerate() {
        let x = dynamics.propagate(p, rng)?;
        let h = obs.observe_noiseless(&x)?;
        let sq: f64 = y_t
            .iter()
            .zip(h.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        loglik.push(-sq / (2.0 * sigma * sigma));
        propagated.push(x);
        let _ = i;
    }
    let prior: Vec<f64> = (0..n).map(|i| ensemble.weight(i)).collect();
    let weights = reweight(&prior, &loglik);
    let resampled = systematic_resample(&propagated, &weights, rng);
    Ok(Ensemble::uniform(resampled))
}

/// Core EnKF update in the angle chart, separated from propagation so the
/// gain arithmetic is directly testable. `h_values` holds one predicted
/// observation row per particle.
pub(crate) fn enkf_update(
    thetas: &[f64],
    h_values: &[Vec<f64>],
    y_t: &[f64],
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let n = thetas.len();
    let m = y_t.len();
    let (mean_angle, _) = crate::evaluation::circular_mean(thetas)?;
    let anomalies: Vec<f64> = thetas.iter().map(|&t| wrap_to_pi(t - mean_angle)).collect();
    let mut h_mean = vec![0.0; m];
    for h in h_values {
        for (k, v) in h.iter().enumerate() {
            h_mean[k] += v / n as f64;
        }
    }
    let mut c_ah = vec![0.0; m];
    let mut c_hh = DMatrix::<f64>::zeros(m, m);
    for i in 0..n {
        for a in 0..m {
            let da = h_values[i][a] - h_mean[a];
            c_ah[a] += anomalies[i] * da / n as f64;
            for b in 0..m {
                let db = h_values[i][b] - h_mean[b];
                c_hh[(a, b)] += da * db / n as f64;
            }
        }
    }
    let mut s = c_hh.clone();
    for a in 0..m {
        s[(a, a)] += sigma * sigma;
    }
    let s_inv = match s.clone().try_inverse() {
        Some(inv) => inv,
        None => {
            for a in 0..m {
                s[(a, a)] += 1e-9;
            }
            s.try_inverse()
                .ok_or_else(|| Error::numerical("innovation covariance is singular"))?
        }
    };
    // Gain row: K = C_ah S^{-1}.
    let mut gain = vec![0.0; m];
    for a in 0..m {
        for b in 0..m {
            gain[a] += c_ah[b] * s_inv[(b, a)];
        }
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut update = 0.0;
        for a in 0..m {
            let eps: f64 = rng.sample(StandardNormal);
            let innovation = y_t[a] + sigma * eps - h_values[i][a];
            update += gain[a] * innovation;
        }
        out.push(wrap_angle(thetas[i] + update));
    }
    Ok(out)
}

/// One perturbed-observation EnKF step on the circle: propagate, then the
/// Kalman-gain update with circularly wrapped state anomalies.
pub fn enkf_step(
    ensemble: &Ensemble,
    y_t: &[f64],
    dynamics: &DynamicsModel,
    obs: &ObservationModel,
    rng: &mut impl Rng,
) -> Result<Ensemble> {
    let mut thetas = Vec::with_capacity(ensemble.len());
    let mut h_values = Vec::with_capacity(ensemble.len());
    for p in &ensemble.particles {
        let x = dynamics.propagate(p, rng)?;
        if x.manifold() != ManifoldId::Circle {
            return Err(Error::contract("the EnKF baseline is defined on the circle only"));
        }
        h_values.push(obs.observe_noiseless(&x)?);
        thetas.push(x.theta()?);
    }
    let updated = enkf_update(&thetas, &h_values, y_t, obs.sigma(), rng)?;
    Ok(Ensemble::uniform(
        updated.into_iter().map(ManifoldPoint::circle).collect(),
    ))
}

// ---------------------------------------------------------------------------
// Multi-seed runner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterMethod {
    Ot,
    Sir,
    Enkf,
}

impl FilterMethod {
    pub fn name(self) -> &'static str {
        match self {
            FilterMethod::Ot => "ot",
            FilterMethod::Sir => "sir",
            FilterMethod::Enkf => "enkf",
        }
    }
}

/// The circle tracking scenario: wall-distance sensor, constant-velocity
/// truth, random-walk filter dynamics with an assumed velocity.
#[derive(Debug, Clone)]
pub struct CircleScenario {
    pub ell: f64,
    pub radius: f64,
    pub sigma: f64,
    pub true_velocity: f64,
    /// Velocity the filters assume; zero models the unknown-velocity case.
    pub assumed_velocity: f64,
    pub process_noise_std: f64,
}

impl Default for CircleScenario {
    fn default() -> Self {
        CircleScenario {
            ell: 0.5,
            radius: 1.0,
            sigma: 0.1,
            true_velocity: std::f64::consts::TAU / 100.0,
            assumed_velocity: std::f64::consts::TAU / 100.0,
            process_noise_std: 0.1,
        }
    }
}

impl CircleScenario {
    pub fn observation_model(&self) -> ObservationModel {
        ObservationModel::circle_wall(self.ell, self.radius, self.sigma)
    }

    pub fn assumed_dynamics(&self) -> DynamicsModel {
        DynamicsModel::CircleRandomWalk {
            velocity: self.assumed_velocity,
            noise_std: self.process_noise_std,
        }
    }
}

/// Runner knobs: which method, how long, how many particles, and the
/// training budget for the OT filter (first step full, later steps
/// `warm_outer_iters` on top of the previous networks).
#[derive(Debug, Clone)]
pub struct FilterConfig {
    pub method: FilterMethod,
    pub steps: usize,
    pub particles: usize,
    pub train: TrainConfig,
    pub warm_outer_iters: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            method: FilterMethod::Sir,
            steps: 50,
            particles: 1000,
            train: TrainConfig {
                outer_max_iters: 1000,
                ..TrainConfig::default()
            },
            warm_outer_iters: 500,
        }
    }
}

/// Everything one seed produced: per-step ensembles, the error metric,
/// the simulated truth and observations, and wall-clock per step. All
/// vectors have length `steps + 1`; index 0 is the prior state (its
/// observation is recorded but never used for an update).
#[derive(Debug, Clone)]
pub struct FilterRunResult {
    pub seed: u64,
    pub ensembles: Vec<Ensemble>,
    pub mse: Vec<f64>,
    pub truth: Vec<ManifoldPoint>,
    pub observations: Vec<Vec<f64>>,
    pub step_seconds: Vec<f64>,
}

/// Per-seed results plus the MSE trace averaged over seeds.
#[derive(Debug, Clone)]
pub struct FilterSummary {
    pub results: Vec<FilterRunResult>,
    pub mean_mse: Vec<f64>,
}

/// Estimation error of an ensemble: mean over particles of
/// `(f(particle) - f(truth))^2` with `f(t) = d_S1(t, 0)`.
pub fn ensemble_mse(ensemble: &Ensemble, truth: &ManifoldPoint) -> Result<f64> {
    let f = |p: &ManifoldPoint| -> Result<f64> { Ok(circle_dist(p.theta()?, 0.0)) };
    let truth_val = f(truth)?;
    let mut total = 0.0;
    for (i, p) in ensemble.particles.iter().enumerate() {
        let d = f(p)? - truth_val;
        total += ensemble.weight(i) * d * d;
    }
    Ok(total)
}

/// Simulate the hidden trajectory and its observation sequence. Truth
/// uses substream 0 of the seed, so every method sees the same data.
pub fn simulate_truth(
    scenario: &CircleScenario,
    steps: usize,
    seed: u64,
) -> Result<(Vec<ManifoldPoint>, Vec<Vec<f64>>)> {
    let obs_model = scenario.observation_model();
    obs_model.validate()?;
    let mut truth_rng = rng::substream(seed, 0);
    let prior = DistributionSpec::CircleUniform;
    let mut state = crate::manifold::sample(&prior, 1, &mut truth_rng)?.pop().unwrap();
    let true_dynamics = DynamicsModel::CircleRandomWalk {
        velocity: scenario.true_velocity,
        noise_std: scenario.process_noise_std,
    };
    let mut truth = vec![state.clone()];
    let mut observations = vec![obs_model.observe(&state, &mut truth_rng)?];
    for _ in 0..steps {
        state = true_dynamics.propagate(&state, &mut truth_rng)?;
        truth.push(state.clone());
        observations.push(obs_model.observe(&state, &mut truth_rng)?);
    }
    Ok((truth, observations))
}

fn run_one_seed(
    cfg: &FilterConfig,
    scenario: &CircleScenario,
    seed: u64,
) -> Result<FilterRunResult> {
    let (truth, observations) = simulate_truth(scenario, cfg.steps, seed)?;
    let obs_model = scenario.observation_model();
    let dynamics = scenario.assumed_dynamics();
    let method_stream = 1 + cfg.method as u64;
    let mut method_rng = rng::substream(seed, method_stream);

    let prior = DistributionSpec::CircleUniform;
    let particles = crate::manifold::sample(&prior, cfg.particles, &mut method_rng)?;
    let mut ensemble = Ensemble::uniform(particles);
    let mut ensembles = vec![ensemble.clone()];
    let mut mse = vec![ensemble_mse(&ensemble, &truth[0])?];
    let mut step_seconds = vec![0.0];
    let mut warm: Option<ConditionalSolution> = None;

    for t in 1..=cfg.steps {
        let started = std::time::Instant::now();
        let y_t = &observations[t];
        ensemble = match cfg.method {
            FilterMethod::Sir => sir_step(&ensemble, y_t, &dynamics, &obs_model, &mut method_rng)?,
            FilterMethod::Enkf => {
                enkf_step(&ensemble, y_t, &dynamics, &obs_model, &mut method_rng)?
            }
            FilterMethod::Ot => {
                let mut train = cfg.train.clone();
                if warm.is_some() {
                    train.outer_max_iters = cfg.warm_outer_iters;
                }
                let (next, sol) = ot_filter_step(
                    &ensemble,
                    y_t,
                    &dynamics,
                    &obs_model,
                    &train,
                    warm.as_ref(),
                    &mut method_rng,
                )?;
                warm = Some(sol);
                next
            }
        };
        ensembles.push(ensemble.clone());
        mse.push(ensemble_mse(&ensemble, &truth[t])?);
        step_seconds.push(started.elapsed().as_secs_f64());
    }
    Ok(FilterRunResult {
        seed,
        ensembles,
        mse,
        truth,
        observations,
        step_seconds,
    })
}

/// Run one filter over several independent seeds (in parallel) and
/// average the error traces.
pub fn run_filter(
    cfg: &FilterConfig,
    scenario: &CircleScenario,
    seeds: &[u64],
) -> Result<FilterSummary> {
    if seeds.is_empty() {
        return Err(Error::contract("at least one seed is required"));
    }
    let results: Result<Vec<FilterRunResult>> = seeds
        .par_iter()
        .map(|&seed| run_one_seed(cfg, scenario, seed))
        .collect();
    let results = results?;
    let mut mean_mse = vec![0.0; cfg.steps + 1];
    for r in &results {
        for (k, v) in r.mse.iter().enumerate() {
            mean_mse[k] += v / results.len() as f64;
        }
    }
    Ok(FilterSummary { results, mean_mse })
}
