//! Experiment configuration: a line-oriented `key = value` format with
//! `#` comments, strict key checking, and per-experiment defaults.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::ot::TrainConfig;

/// The eight built-in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentId {
    OtS1Gaussians,
    OtS1Mixture,
    OtSe2,
    FilterS1Static,
    FilterS1Dynamic,
    FilterSe2,
    OtSo3,
    FilterSo3,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::OtS1Gaussians,
        ExperimentId::OtS1Mixture,
        ExperimentId::OtSe2,
        ExperimentId::FilterS1Static,
        ExperimentId::FilterS1Dynamic,
        ExperimentId::FilterSe2,
        ExperimentId::OtSo3,
        ExperimentId::FilterSo3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::OtS1Gaussians => "ot-s1-gaussians",
            ExperimentId::OtS1Mixture => "ot-s1-mixture",
            ExperimentId::OtSe2 => "ot-se2",
            ExperimentId::FilterS1Static => "filter-s1-static",
            ExperimentId::FilterS1Dynamic => "filter-s1-dynamic",
            ExperimentId::FilterSe2 => "filter-se2",
            ExperimentId::OtSo3 => "ot-so3",
            ExperimentId::FilterSo3 => "filter-so3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown experiment '{s}'; expected one of: {}",
                    Self::ALL.map(|e| e.name()).join(", ")
                ))
            })
    }

    fn is_s1(self) -> bool {
        matches!(
            self,
            ExperimentId::OtS1Gaussians
                | ExperimentId::OtS1Mixture
                | ExperimentId::FilterS1Static
                | ExperimentId::FilterS1Dynamic
        )
    }
}

/// Fully resolved settings for one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    // Training.
    pub batch_size: usize,
    pub lr: f64,
    pub inner_iters: usize,
    pub outer_iters: usize,
    pub block_count: usize,
    pub block_width: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    // Scenario.
    pub ell: f64,
    pub radius: f64,
    pub sigma: f64,
    pub velocity: f64,
    pub known_velocity: bool,
    pub process_noise: f64,
    pub particles: usize,
    pub steps: usize,
    pub filter_seeds: usize,
    pub warm_outer_iters: usize,
    // Evaluation outputs.
    pub kde_kappa: f64,
    pub kde_grid: usize,
    // Optional warm-start checkpoints.
    pub warm_phi: Option<String>,
    pub warm_u: Option<String>,
}

impl ExperimentConfig {
    /// Per-experiment defaults: one residual block and 3000 outer
    /// iterations on the circle, two blocks and 8000 iterations on SE(2)
    /// and SO(3).
    pub fn defaults(experiment: ExperimentId) -> Self {
        let s1 = experiment.is_s1();
        ExperimentConfig {
            experiment,
            seed: 0,
            batch_size: 64,
            lr: 1e-3,
            inner_iters: 10,
            outer_iters: if s1 { 3000 } else { 8000 },
            block_count: if s1 { 1 } else { 2 },
            block_width: 32,
            train_samples: 10_000,
            test_samples: if matches!(
                experiment,
                ExperimentId::FilterS1Static | ExperimentId::FilterSe2 | ExperimentId::FilterSo3
            ) {
                10_000
            } else {
                2_000
            },
            ell: 0.5,
            radius: 1.0,
            sigma: 0.1,
            velocity: TAU / 100.0,
            known_velocity: true,
            process_noise: 0.1,
            particles: 1000,
            steps: 50,
            filter_seeds: 10,
            warm_outer_iters: 500,
            kde_kappa: 100.0,
            kde_grid: 512,
            warm_phi: None,
            warm_u: None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            lr: self.lr,
            inner_min_iters: self.inner_iters,
            outer_max_iters: self.outer_iters,
            seed: self.seed,
            block_count: self.block_count,
            block_width: self.block_width,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train_config().validate()?;
        if !(self.ell > 0.0 && self.ell * self.ell < self.radius * self.radius) {
            return Err(Error::config(format!(
                "ell must satisfy 0 < ell and ell^2 < radius^2, got ell = {}, radius = {}",
                self.ell, self.radius
            )));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::config("sigma must be positive"));
        }
        if self.process_noise < 0.0 {
            return Err(Error::config("process_noise must be non-negative"));
        }
        if self.particles < 2 {
            return Err(Error::config("at least 2 particles are required"));
        }
        if self.filter_seeds == 0 {
            return Err(Error::config("filter_seeds must be at least 1"));
        }
        if self.train_samples < self.batch_size {
            return Err(Error::config(format!(
                "train_samples ({}) must be at least the batch size ({})",
                self.train_samples, self.batch_size
            )));
        }
        if self.test_samples == 0 {
            return Err(Error::config("test_samples must be positive"));
        }
        if !(self.kde_kappa > 0.0) {
            return Err(Error::config("kde_kappa must be positive"));
        }
        if self.kde_grid < 8 {
            return Err(Error::config("kde_grid must be at least 8"));
        }
        Ok(())
    }

    /// Resolved configuration echo for the manifest.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "experiment": self.experiment.name(),
            "seed": self.seed,
            "batch_size": self.batch_size,
            "lr": self.lr,
            "inner_iters": self.inner_iters,
            "outer_iters": self.outer_iters,
            "block_count": self.block_count,
            "block_width": self.block_width,
            "train_samples": self.train_samples,
            "test_samples": self.test_samples,
            "ell": self.ell,
            "radius": self.radius,
            "sigma": self.sigma,
            "velocity": self.velocity,
            "known_velocity": self.known_velocity,
            "process_noise": self.process_noise,
            "particles": self.particles,
            "steps": self.steps,
            "filter_seeds": self.filter_seeds,
            "warm_outer_iters": self.warm_outer_iters,
            "kde_kappa": self.kde_kappa,
            "kde_grid": self.kde_grid,
            "warm_phi": self.warm_phi,
            "warm_u": self.warm_u,
        })
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::config_at(line, format!("malformed value '{value}' for {key}")))
}

fn parse_bool(line: usize, key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config_at(
            line,
            format!("malformed value '{value}' for {key}; expected true or false"),
        )),
    }
}

/// Parse configuration text. The experiment id must appear in the text;
/// [`parse_config_with`] lets the CLI supply it instead.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, None)
}

/// Parse configuration text with an optional experiment id from the
/// command line, which takes precedence over an `experiment =` line.
pub fn parse_config_with(text: &str, cli_experiment: Option<&str>) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::config_at(line_no, format!("expected 'key = value', got '{line}'")));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if value.is_empty() {
            return Err(Error::config_at(line_no, format!("missing value for '{key}'")));
        }
        pairs.push((line_no, key, value));
    }

    let experiment = match cli_experiment {
        Some(name) => ExperimentId::parse(name)?,
        None => {
            let found = pairs.iter().find(|(_, k, _)| k == "experiment");
            match found {
                Some((line, _, value)) => ExperimentId::parse(value)
                    .map_err(|e| Error::config_at(*line, e.to_string()))?,
                None => {
                    return Err(Error::config_at(
                        1,
                        "missing experiment id (set 'experiment = <id>' or pass it on the command line)",
                    ))
                }
            }
        }
    };

    let mut cfg = ExperimentConfig::defaults(experiment);
    for (line, key, value) in &pairs {
        let (line, value) = (*line, value.as_str());
        match key.as_str() {
            "experiment" => {
                if cli_experiment.is_none() {
                    cfg.experiment = ExperimentId::parse(value)
                        .map_err(|e| Error::config_at(line, e.to_string()))?;
                }
            }
            "seed" => cfg.seed = parse_num(line, key, value)?,
            "batch_size" => cfg.batch_size = parse_num(line, key, value)?,
            "lr" => cfg.lr = parse_num(line, key, value)?,
            "inner_iters" => cfg.inner_iters = parse_num(line, key, value)?,
            "outer_iters" => cfg.outer_iters = parse_num(line, key, value)?,
            "block_count" => cfg.block_count = parse_num(line, key, value)?,
            "block_width" => cfg.block_width = parse_num(line, key, value)?,
            "train_samples" => cfg.train_samples = parse_num(line, key, value)?,
            "test_samples" => cfg.test_samples = parse_num(line, key, value)?,
            "ell" => cfg.ell = parse_num(line, key, value)?,
            "radius" => cfg.radius = parse_num(line, key, value)?,
            "sigma" => cfg.sigma = parse_num(line, key, value)?,
            "velocity" => cfg.velocity = parse_num(line, key, value)?,
            "known_velocity" => cfg.known_velocity = parse_bool(line, key, value)?,
            "process_noise" => cfg.process_noise = parse_num(line, key, value)?,
            "particles" => cfg.particles = parse_num(line, key, value)?,
            "steps" => cfg.steps = parse_num(line, key, value)?,
            "filter_seeds" => cfg.filter_seeds = parse_num(line, key, value)?,
            "warm_outer_iters" => cfg.warm_outer_iters = parse_num(line, key, value)?,
            "kde_kappa" => cfg.kde_kappa = parse_num(line, key, value)?,
            "kde_grid" => cfg.kde_grid = parse_num(line, key, value)?,
            "warm_phi" => cfg.warm_phi = Some(value.to_string()),
            "warm_u" => cfg.warm_u = Some(value.to_string()),
            other => {
                return Err(Error::config_at(line, format!("unknown key '{other}'")));
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_with_cli_experiment_gives_defaults() {
        let cfg = parse_config_with("", Some("ot-s1-gaussians")).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::OtS1Gaussians);
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.lr, 1e-3);
        assert_eq!(cfg.inner_iters, 10);
        assert_eq!(cfg.outer_iters, 3000);
        assert_eq!(cfg.block_count, 1);

        let cfg = parse_config_with("", Some("ot-so3")).unwrap();
        assert_eq!(cfg.outer_iters, 8000);
        assert_eq!(cfg.block_count, 2);
    }

    #[test]
    fn missing_experiment_rejected() {
        let err = parse_config("seed = 3").unwrap_err();
        assert!(err.to_string().contains("experiment"));
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# comment line\nexperiment = filter-s1-static\nseed = 9   # trailing\nell = 0.3\n\nsteps=25\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::FilterS1Static);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.ell, 0.3);
        assert_eq!(cfg.steps, 25);
    }

    #[test]
    fn out_of_range_ell_rejected() {
        let err = parse_config_with("ell = 1.5", Some("filter-s1-static")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ell"), "{msg}");
    }

    #[test]
    fn unknown_key_with_line_number() {
        let err = parse_config_with("seed = 1\nbogus = 2", Some("ot-se2")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2"), "{msg}");
        assert!(msg.contains("bogus"), "{msg}");
    }

    #[test]
    fn malformed_value_with_line_number() {
        let err = parse_config_with("seed = banana", Some("ot-se2")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1"), "{msg}");
    }

    #[test]
    fn cli_experiment_overrides_file() {
        let cfg = parse_config_with("experiment = ot-se2", Some("ot-so3")).unwrap();
        assert_eq!(cfg.experiment, ExperimentId::OtSo3);
    }
}
