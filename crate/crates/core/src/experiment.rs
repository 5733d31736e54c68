//! Configuration-driven experiment runner: reproduces the transport and
//! filtering experiments and writes CSV artifacts, solution checkpoints,
//! and a manifest with a content hash per output file.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::Matrix3;
use sha2::{Digest, Sha256};

use crate::conditional::{train_conditional, ConditionalSolution, JointSource};
use crate::config::{ExperimentConfig, ExperimentId};
use crate::error::{Error, Result};
use crate::evaluation::{bayes_quadrature_circle, circular_kde};
use crate::filter::{
    run_filter, CircleScenario, FilterConfig, FilterMethod, ObservationModel,
};
use crate::manifold::{self, CurveFamily, DistributionSpec, ManifoldId, ManifoldPoint};
use crate::nn::load_checkpoint;
use crate::ot::{train_ot_from, SampleSource};
use crate::rng;

/// Display-formatted float: shortest round-trip representation, stable on
/// one platform, which keeps rerun CSVs byte-identical.
fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Collects output files and their hashes for the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, contents: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, contents)?;
        self.files.push((rel.to_string(), hex_sha256(contents)));
        Ok(())
    }

    fn write_csv(&mut self, rel: &str, header: &str, rows: &[String]) -> Result<()> {
        let mut text = String::with_capacity(rows.len() * 24 + header.len() + 1);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(row);
            text.push('\n');
        }
        self.write(rel, text.as_bytes())
    }

    /// Hash a file some other component already wrote under the out dir.
    fn register(&mut self, rel: &str) -> Result<()> {
        let bytes = std::fs::read(self.dir.join(rel))?;
        self.files.push((rel.to_string(), hex_sha256(&bytes)));
        Ok(())
    }

    fn finish(mut self, cfg: &ExperimentConfig, started: Instant) -> Result<()> {
        self.files.sort();
        let manifest = serde_json::json!({
            "experiment": cfg.experiment.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg.to_json(),
            "wall_time_seconds": started.elapsed().as_secs_f64(),
            "files": self.files.iter().map(|(p, h)| serde_json::json!({
                "path": p,
                "sha256": h,
            })).collect::<Vec<_>>(),
        });
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).expect("json"))?;
        Ok(())
    }
}

fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The transport marginals of each OT experiment.
fn ot_marginals(id: ExperimentId) -> Option<(DistributionSpec, DistributionSpec)> {
    match id {
        ExperimentId::OtS1Gaussians => Some((
            DistributionSpec::CircleModGaussian { mean: 0.0, std: 1.0 },
            DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 },
        )),
        ExperimentId::OtS1Mixture => Some((
            DistributionSpec::CircleUniform,
            DistributionSpec::CircleMixture(vec![(0.5, 0.0, 1.0), (0.5, PI, 1.0)]),
        )),
        ExperimentId::OtSe2 => Some((
            DistributionSpec::Se2BoxUniform {
                x: (-1.0, 0.0),
                y: (-1.0, 0.0),
            },
            DistributionSpec::Se2BoxUniform {
                x: (0.0, 1.0),
                y: (0.0, 1.0),
            },
        )),
        ExperimentId::OtSo3 => Some((
            DistributionSpec::So3Curve(CurveFamily::P),
            DistributionSpec::So3Curve(CurveFamily::Q),
        )),
        _ => None,
    }
}

fn sample_csv_header(m: ManifoldId) -> &'static str {
    match m {
        ManifoldId::Circle => "t,theta",
        ManifoldId::Se2 => "t,x,y,theta",
        ManifoldId::So3 => "t,r11,r12,r13,r21,r22,r23,r31,r32,r33",
    }
}

fn coord_row(prefix: Option<f64>, p: &ManifoldPoint) -> String {
    let mut parts = Vec::new();
    if let Some(t) = prefix {
        parts.push(fmt(t));
    }
    parts.extend(p.coords().iter().map(|&c| fmt(c)));
    parts.join(",")
}

fn kde_rows(curve: &crate::evaluation::DensityCurve) -> Vec<String> {
    curve
        .grid
        .iter()
        .zip(curve.density.iter())
        .map(|(g, d)| format!("{},{}", fmt(*g), fmt(*d)))
        .collect()
}

const TRAJECTORY_TIMES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Load optional warm-start checkpoints named in the config.
fn warm_nets(cfg: &ExperimentConfig) -> Result<Option<(crate::nn::Net, crate::nn::Net)>> {
    match (&cfg.warm_phi, &cfg.warm_u) {
        (None, None) => Ok(None),
        (Some(phi), Some(u)) => Ok(Some((
            load_checkpoint(Path::new(phi))?,
            load_checkpoint(Path::new(u))?,
        ))),
        _ => Err(Error::config("warm_phi and warm_u must be given together")),
    }
}

fn run_ot_experiment(cfg: &ExperimentConfig, outputs: &mut Outputs) -> Result<()> {
    let (p_spec, q_spec) = ot_marginals(cfg.experiment).expect("OT experiment");
    let m = p_spec.manifold();
    let mut r = rng::from_seed(cfg.seed);
    let train_cfg = cfg.train_config();

    let src_train = manifold::sample(&p_spec, cfg.train_samples, &mut r)?;
    let tgt_train = manifold::sample(&q_spec, cfg.train_samples, &mut r)?;
    let source = SampleSource::Fixed(src_train.clone());
    let target = SampleSource::Fixed(tgt_train.clone());

    let sol = match warm_nets(cfg)? {
        Some((phi, u)) => train_ot_from(phi, u, &source, &target, &train_cfg, &mut r)?,
        None => crate::ot::train_ot(&source, &target, &train_cfg, &mut r)?,
    };

    sol.save(&outputs.dir.join("solution"), Some(&train_cfg))?;
    for rel in ["solution/phi.ckpt", "solution/u.ckpt", "solution/solution.json"] {
        outputs.register(rel)?;
    }

    let src_test = manifold::sample(&p_spec, cfg.test_samples, &mut r)?;
    let mut rows = Vec::with_capacity(TRAJECTORY_TIMES.len() * src_test.len());
    let mut slices: Vec<Vec<ManifoldPoint>> = Vec::new();
    for &t in &TRAJECTORY_TIMES {
        let mut slice = Vec::with_capacity(src_test.len());
        for z in &src_test {
            let p = sol.trajectory(z, t)?;
            rows.push(coord_row(Some(t), &p));
            slice.push(p);
        }
        slices.push(slice);
    }
    outputs.write_csv("samples.csv", sample_csv_header(m), &rows)?;

    let losses: Vec<String> = sol
        .trace
        .iter()
        .map(|(i, v)| format!("{i},{}", fmt(*v)))
        .collect();
    outputs.write_csv("loss_trace.csv", "outer_iter,objective", &losses)?;

    if m == ManifoldId::Circle {
        let thetas = |pts: &[ManifoldPoint]| -> Result<Vec<f64>> {
            pts.iter().map(|p| p.theta()).collect()
        };
        for (idx, slice) in slices.iter().enumerate() {
            let pct = (TRAJECTORY_TIMES[idx] * 100.0).round() as usize;
            let curve = circular_kde(&thetas(slice)?, cfg.kde_kappa, cfg.kde_grid)?;
            outputs.write_csv(
                &format!("kde_t{pct:03}.csv"),
                "grid_theta,density",
                &kde_rows(&curve),
            )?;
        }
        let src_curve = circular_kde(&thetas(&src_train)?, cfg.kde_kappa, cfg.kde_grid)?;
        outputs.write_csv("kde_source.csv", "grid_theta,density", &kde_rows(&src_curve))?;
        let tgt_curve = circular_kde(&thetas(&tgt_train)?, cfg.kde_kappa, cfg.kde_grid)?;
        outputs.write_csv("kde_target.csv", "grid_theta,density", &kde_rows(&tgt_curve))?;
    }
    Ok(())
}

fn warm_conditional(
    cfg: &ExperimentConfig,
    m: ManifoldId,
    obs_dim: usize,
) -> Result<Option<ConditionalSolution>> {
    Ok(warm_nets(cfg)?.map(|(phi, u)| ConditionalSolution {
        manifold: m,
        obs_dim,
        phi,
        u,
        trace: Vec::new(),
    }))
}

fn run_filter_s1_static(cfg: &ExperimentConfig, outputs: &mut Outputs) -> Result<()> {
    let obs = ObservationModel::circle_wall(cfg.ell, cfg.radius, cfg.sigma);
    obs.validate()?;
    let source = JointSource::Generative {
        prior: DistributionSpec::CircleUniform,
        obs: obs.clone(),
    };
    let mut r = rng::from_seed(cfg.seed);
    let train_cfg = cfg.train_config();
    let warm = warm_conditional(cfg, ManifoldId::Circle, 1)?;
    let sol = train_conditional(&source, &train_cfg, warm.as_ref(), &mut r)?;
    sol.save(&outputs.dir.join("solution"), Some(&train_cfg))?;
    for rel in ["solution/phi.ckpt", "solution/u.ckpt", "solution/solution.json"] {
        outputs.register(rel)?;
    }

    let truth = ManifoldPoint::circle(PI / 3.0);
    let y_star = obs.observe_noiseless(&truth)?;
    let prior_pts = manifold::sample(&DistributionSpec::CircleUniform, cfg.test_samples, &mut r)?;
    let posterior = sol.posterior_sample(&prior_pts, &y_star)?;
    let thetas: Vec<f64> = posterior.iter().map(|p| p.theta()).collect::<Result<_>>()?;
    let rows: Vec<String> = thetas.iter().map(|t| fmt(*t)).collect();
    outputs.write_csv("posterior_samples.csv", "theta", &rows)?;

    let kde = circular_kde(&thetas, cfg.kde_kappa, cfg.kde_grid)?;
    outputs.write_csv("posterior_kde.csv", "grid_theta,density", &kde_rows(&kde))?;
    let oracle = bayes_quadrature_circle(None, &obs, y_star[0], 2048)?;
    outputs.write_csv("oracle_posterior.csv", "grid_theta,density", &kde_rows(&oracle))?;
    outputs.write_csv(
        "observation.csv",
        "truth_theta,y",
        &[format!("{},{}", fmt(PI / 3.0), fmt(y_star[0]))],
    )?;
    Ok(())
}

fn run_filter_s1_dynamic(cfg: &ExperimentConfig, outputs: &mut Outputs) -> Result<()> {
    let scenario = CircleScenario {
        ell: cfg.ell,
        radius: cfg.radius,
        sigma: cfg.sigma,
        true_velocity: cfg.velocity,
        assumed_velocity: if cfg.known_velocity { cfg.velocity } else { 0.0 },
        process_noise_std: cfg.process_noise,
    };
    let seeds: Vec<u64> = (0..cfg.filter_seeds as u64).map(|k| cfg.seed + k).collect();
    let methods = [FilterMethod::Ot, FilterMethod::Sir, FilterMethod::Enkf];

    let mut mse_rows = Vec::new();
    let mut mean_rows = Vec::new();
    let selected_steps: Vec<usize> = [0usize, 10, 25, 50]
        .into_iter()
        .filter(|&s| s <= cfg.steps)
        .collect();

    for method in methods {
        let filter_cfg = FilterConfig {
            method,
            steps: cfg.steps,
            particles: cfg.particles,
            train: cfg.train_config(),
            warm_outer_iters: cfg.warm_outer_iters,
        };
        let summary = run_filter(&filter_cfg, &scenario, &seeds)?;
        for result in &summary.results {
            for step in 0..=cfg.steps {
                mse_rows.push(format!(
                    "{step},{},{},{},{},{}",
                    method.name(),
                    result.seed,
                    fmt(result.mse[step]),
                    fmt(result.truth[step].theta()?),
                    fmt(result.observations[step][0]),
                ));
            }
        }
        for (step, v) in summary.mean_mse.iter().enumerate() {
            mean_rows.push(format!("{step},{},{}", method.name(), fmt(*v)));
        }
        let first = &summary.results[0];
        for &step in &selected_steps {
            let rows: Vec<String> = first.ensembles[step]
                .particles
                .iter()
                .map(|p| fmt(p.theta().expect("circle particle")))
                .collect();
            outputs.write_csv(
                &format!("particles_{}_step{step:03}.csv", method.name()),
                "theta",
                &rows,
            )?;
        }
    }
    outputs.write_csv(
        "mse.csv",
        "step,method,seed,mse,truth_theta,obs_1",
        &mse_rows,
    )?;
    outputs.write_csv("mean_mse.csv", "step,method,mean_mse", &mean_rows)?;
    Ok(())
}

fn run_filter_se2(cfg: &ExperimentConfig, outputs: &mut Outputs) -> Result<()> {
    let obs = ObservationModel::circle_wall(cfg.ell, cfg.radius, cfg.sigma);
    obs.validate()?;
    let prior = DistributionSpec::Se2BoxUniform {
        x: (-1.0, 1.0),
        y: (0.0, 0.0),
    };
    let source = JointSource::Generative {
        prior: prior.clone(),
        obs: obs.clone(),
    };
    let mut r = rng::from_seed(cfg.seed);
    let train_cfg = cfg.train_config();
    let warm = warm_conditional(cfg, ManifoldId::Se2, 1)?;
    let sol = train_conditional(&source, &train_cfg, warm.as_ref(), &mut r)?;
    sol.save(&outputs.dir.join("solution"), Some(&train_cfg))?;
    for rel in ["solution/phi.ckpt", "solution/u.ckpt", "solution/solution.json"] {
        outputs.register(rel)?;
    }

    let truth = manifold::sample(&prior, 1, &mut r)?.pop().unwrap();
    let y_star = obs.observe_noiseless(&truth)?;
    let prior_pts = manifold::sample(&prior, cfg.test_samples, &mut r)?;
    let posterior = sol.posterior_sample(&prior_pts, &y_star)?;

    let rows: Vec<String> = posterior.iter().map(|p| coord_row(None, p)).collect();
    outputs.write_csv("posterior_samples.csv", "x,y,theta", &rows)?;

    let predictive = |pts: &[ManifoldPoint]| -> Result<Vec<String>> {
        pts.iter()
            .map(|p| Ok(fmt(obs.observe_noiseless(p)?[0])))
            .collect()
    };
    outputs.write_csv("prior_predictive.csv", "h", &predictive(&prior_pts)?)?;
    outputs.write_csv("posterior_predictive.csv", "h", &predictive(&posterior)?)?;
    outputs.write_csv(
        "observation.csv",
        "truth_x,truth_y,truth_theta,y",
        &[format!("{},{}", coord_row(None, &truth), fmt(y_star[0]))],
    )?;
    Ok(())
}

/// Histogram rows over `[-1, 1]`, density-normalized.
fn histogram_rows(values: &[f64], bins: usize) -> Vec<String> {
    let width = 2.0 / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v + 1.0) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    (0..bins)
        .map(|i| {
            let center = -1.0 + (i as f64 + 0.5) * width;
            let density = counts[i] as f64 / (n * width);
            format!("{},{}", fmt(center), fmt(density))
        })
        .collect()
}

fn run_filter_so3(cfg: &ExperimentConfig, outputs: &mut Outputs) -> Result<()> {
    let obs = ObservationModel::so3_entries(cfg.sigma);
    obs.validate()?;
    let source = JointSource::Generative {
        prior: DistributionSpec::So3Uniform,
        obs: obs.clone(),
    };
    let mut r = rng::from_seed(cfg.seed);
    let train_cfg = cfg.train_config();
    let warm = warm_conditional(cfg, ManifoldId::So3, 4)?;
    let sol = train_conditional(&source, &train_cfg, warm.as_ref(), &mut r)?;
    sol.save(&outputs.dir.join("solution"), Some(&train_cfg))?;
    for rel in ["solution/phi.ckpt", "solution/u.ckpt", "solution/solution.json"] {
        outputs.register(rel)?;
    }

    // Truth: rotation about the x axis by pi/4. Its reading (1, 0, 0,
    // 1/sqrt(2)) is shared with the rotation by -pi/4.
    let s = 1.0 / 2.0f64.sqrt();
    let truth = ManifoldPoint::so3(Matrix3::new(1.0, 0.0, 0.0, 0.0, s, -s, 0.0, s, s))?;
    let y_star = obs.observe_noiseless(&truth)?;
    let prior_pts = manifold::sample(&DistributionSpec::So3Uniform, cfg.test_samples, &mut r)?;
    let posterior = sol.posterior_sample(&prior_pts, &y_star)?;

    let rows: Vec<String> = posterior.iter().map(|p| coord_row(None, p)).collect();
    outputs.write_csv(
        "posterior_samples.csv",
        "r11,r12,r13,r21,r22,r23,r31,r32,r33",
        &rows,
    )?;

    for (name, row, col) in [("r22", 1, 1), ("r23", 1, 2), ("r32", 2, 1)] {
        let values: Vec<f64> = posterior
            .iter()
            .map(|p| Ok(p.rotation()?[(row, col)]))
            .collect::<Result<_>>()?;
        outputs.write_csv(
            &format!("hist_{name}.csv"),
            "bin_center,density",
            &histogram_rows(&values, 80),
        )?;
    }
    outputs.write_csv(
        "observation.csv",
        "y_1,y_2,y_3,y_4",
        &[y_star.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(",")],
    )?;
    Ok(())
}

/// Run one experiment, writing all artifacts under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    let started = Instant::now();
    let mut outputs = Outputs::new(out_dir)?;
    match cfg.experiment {
        ExperimentId::OtS1Gaussians
        | ExperimentId::OtS1Mixture
        | ExperimentId::OtSe2
        | ExperimentId::OtSo3 => run_ot_experiment(cfg, &mut outputs)?,
        ExperimentId::FilterS1Static => run_filter_s1_static(cfg, &mut outputs)?,
        ExperimentId::FilterS1Dynamic => run_filter_s1_dynamic(cfg, &mut outputs)?,
        ExperimentId::FilterSe2 => run_filter_se2(cfg, &mut outputs)?,
        ExperimentId::FilterSo3 => run_filter_so3(cfg, &mut outputs)?,
    }
    outputs.finish(cfg, started)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config_with;

    fn read(dir: &Path, rel: &str) -> Vec<u8> {
        std::fs::read(dir.join(rel)).unwrap_or_else(|_| panic!("missing {rel}"))
    }

    #[test]
    fn tiny_ot_experiment_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let text = "outer_iters = 5\ntrain_samples = 128\ntest_samples = 16\nseed = 1\n";
        let cfg = parse_config_with(text, Some("ot-s1-gaussians")).unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        for rel in [
            "samples.csv",
            "kde_t000.csv",
            "kde_t100.csv",
            "kde_source.csv",
            "kde_target.csv",
            "loss_trace.csv",
            "solution/phi.ckpt",
            "solution/u.ckpt",
            "manifest.json",
        ] {
            assert!(dir.path().join(rel).exists(), "missing {rel}");
        }
        let samples = String::from_utf8(read(dir.path(), "samples.csv")).unwrap();
        assert!(samples.starts_with("t,theta\n"));
        // 5 time slices x 16 test points + header.
        assert_eq!(samples.lines().count(), 81);
        // Every listed file hash matches its content.
        let manifest: serde_json::Value =
            serde_json::from_slice(&read(dir.path(), "manifest.json")).unwrap();
        for entry in manifest["files"].as_array().unwrap() {
            let rel = entry["path"].as_str().unwrap();
            let bytes = read(dir.path(), rel);
            assert_eq!(entry["sha256"].as_str().unwrap(), hex_sha256(&bytes), "{rel}");
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let text = "outer_iters = 4\ntrain_samples = 96\ntest_samples = 8\nseed = 7\n";
        let cfg = parse_config_with(text, Some("ot-s1-mixture")).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        for rel in ["samples.csv", "kde_t050.csv", "solution/phi.ckpt", "solution/u.ckpt"] {
            assert_eq!(read(a.path(), rel), read(b.path(), rel), "{rel} differs");
        }
    }

    #[test]
    fn tiny_dynamic_filter_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let text = "steps = 2\nparticles = 64\nfilter_seeds = 2\nouter_iters = 4\nwarm_outer_iters = 3\ntrain_samples = 64\n";
        let cfg = parse_config_with(text, Some("filter-s1-dynamic")).unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        let mse = String::from_utf8(read(dir.path(), "mse.csv")).unwrap();
        assert!(mse.starts_with("step,method,seed,mse,truth_theta,obs_1\n"));
        // 3 methods x 2 seeds x 3 steps (incl. step 0) + header.
        assert_eq!(mse.lines().count(), 19);
        assert!(dir.path().join("particles_ot_step000.csv").exists());
        assert!(dir.path().join("mean_mse.csv").exists());
    }

    #[test]
    fn tiny_so3_filter_experiment() {
        let dir = tempfile::tempdir().unwrap();
        let text = "outer_iters = 4\ntest_samples = 32\nseed = 2\n";
        let cfg = parse_config_with(text, Some("filter-so3")).unwrap();
        run_experiment(&cfg, dir.path()).unwrap();
        for rel in ["posterior_samples.csv", "hist_r22.csv", "hist_r23.csv", "hist_r32.csv"] {
            assert!(dir.path().join(rel).exists(), "missing {rel}");
        }
        let hist = String::from_utf8(read(dir.path(), "hist_r22.csv")).unwrap();
        assert_eq!(hist.lines().count(), 81);
    }
}
