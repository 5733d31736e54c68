//! Ground-truth oracles and circular statistics.
//!
//! Everything here is deliberately independent of the learned solvers: an
//! exact minimum-cost assignment between equal-size sample sets, a
//! grid-quadrature Bayes posterior on the circle, a von Mises kernel
//! density estimator, and the circular mean / bimodality statistics used
//! by the experiment checks.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::filter::ObservationModel;
use crate::manifold::{geodesic_dist, wrap_angle, ManifoldId, ManifoldPoint};

/// Pairwise half-squared-distance matrix between two sample sets.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    pub n: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(a: &[ManifoldPoint], b: &[ManifoldPoint], m: ManifoldId) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::contract(format!(
                "sample sets have different sizes: {} vs {}",
                a.len(),
                b.len()
            )));
        }
        let n = a.len();
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d = geodesic_dist(m, &a[i], &b[j])?;
                data[i * n + j] = d * d / 2.0;
            }
        }
        Ok(CostMatrix { n, data })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// Exact minimum-cost assignment (Hungarian algorithm with potentials,
/// O(n^3)). Returns the minimum of `mean_i cost[i][perm[i]]`.
pub fn solve_assignment(cost: &CostMatrix) -> (f64, Vec<usize>) {
    let n = cost.n;
    // 1-indexed potentials; p[j] is the row matched to column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost.get(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0usize; n];
    for j in 1..=n {
        perm[p[j] - 1] = j - 1;
    }
    let total: f64 = (0..n).map(|i| cost.get(i, perm[i])).sum();
    (total / n as f64, perm)
}

/// Exact discrete optimal transport between equal-size empirical measures.
///
/// Returns the mean matched cost `d^2/2` and the optimal matching
/// (`perm[i]` is the index in `b` paired with `a[i]`).
pub fn discrete_ot(
    a: &[ManifoldPoint],
    b: &[ManifoldPoint],
    m: ManifoldId,
) -> Result<(f64, Vec<usize>)> {
    if a.is_empty() {
        return Err(Error::contract("discrete OT needs at least one point"));
    }
    if a.len() > 1024 {
        return Err(Error::contract(format!(
            "discrete OT supports at most 1024 points, got {}",
            a.len()
        )));
    }
    let cost = CostMatrix::new(a, b, m)?;
    Ok(solve_assignment(&cost))
}

/// Wasserstein-2 distance between equal-size empirical measures:
/// `sqrt(2 * discrete_ot cost)`.
pub fn discrete_ot_distance(a: &[ManifoldPoint], b: &[ManifoldPoint], m: ManifoldId) -> Result<f64> {
    let (cost, _) = discrete_ot(a, b, m)?;
    Ok((2.0 * cost).sqrt())
}

// ---------------------------------------------------------------------------
// Densities on the circle
// ---------------------------------------------------------------------------

/// Density sampled on a uniform periodic grid over `[0, 2*pi)`.
#[derive(Debug, Clone)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityCurve {
    fn uniform_grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| TAU * i as f64 / n as f64).collect()
    }

    /// Integral over the circle (periodic trapezoid rule; equals the mean
    /// times 2*pi on a uniform grid).
    pub fn integral(&self) -> f64 {
        let n = self.density.len();
        self.density.iter().sum::<f64>() * TAU / n as f64
    }

    pub fn normalize(&mut self) {
        let z = self.integral();
        if z > 0.0 {
            for d in &mut self.density {
                *d /= z;
            }
        }
    }

    /// Periodic linear interpolation at angle `theta`.
    pub fn interp(&self, theta: f64) -> f64 {
        let n = self.grid.len();
        let step = TAU / n as f64;
        let t = wrap_angle(theta) / step;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        let j = (i + 1) % n;
        self.density[i] * (1.0 - frac) + self.density[j] * frac
    }

    /// Total-variation distance `0.5 * int |p - q|`; grids must match.
    pub fn tv_distance(&self, other: &DensityCurve) -> Result<f64> {
        if self.grid.len() != other.grid.len() {
            return Err(Error::contract(format!(
                "density grids differ: {} vs {}",
                self.grid.len(),
                other.grid.len()
            )));
        }
        let n = self.density.len() as f64;
        Ok(self
            .density
            .iter()
            .zip(other.density.iter())
            .map(|(p, q)| (p - q).abs())
            .sum::<f64>()
            * TAU
            / n
            / 2.0)
    }

    pub fn sup_distance(&self, other: &DensityCurve) -> Result<f64> {
        if self.grid.len() != other.grid.len() {
            return Err(Error::contract("density grids differ"));
        }
        Ok(self
            .density
            .iter()
            .zip(other.density.iter())
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }

    /// Indices of local maxima on the periodic grid; a flat plateau is
    /// reported once, at its left edge.
    pub fn local_maxima(&self) -> Vec<usize> {
        let n = self.density.len();
        let mut out = Vec::new();
        for i in 0..n {
            let prev = self.density[(i + n - 1) % n];
            let d = self.density[i];
            if d <= prev {
                continue;
            }
            // Walk right over any plateau; a maximum needs a strict drop.
            let mut j = (i + 1) % n;
            let mut steps = 0;
            while self.density[j] == d && steps < n {
                j = (j + 1) % n;
                steps += 1;
            }
            if self.density[j] < d {
                out.push(i);
            }
        }
        out
    }
}

/// Posterior density on the circle by direct quadrature of Bayes' rule
/// against the wall-distance likelihood. Oracle for tests and checks.
///
/// `prior = None` means the uniform prior.
pub fn bayes_quadrature_circle(
    prior: Option<&DensityCurve>,
    obs: &ObservationModel,
    y: f64,
    grid_size: usize,
) -> Result<DensityCurve> {
    let ObservationModel::CircleWall { sigma, .. } = obs else {
        return Err(Error::contract(
            "quadrature posterior is defined for the wall-distance model only",
        ));
    };
    let sigma = *sigma;
    if grid_size < 8 {
        return Err(Error::contract("grid too coarse"));
    }
    let grid = DensityCurve::uniform_grid(grid_size);
    let mut density = Vec::with_capacity(grid_size);
    for &theta in &grid {
        let z = ManifoldPoint::circle(theta);
        let h = obs.observe_noiseless(&z)?[0];
        let loglik = -((y - h) * (y - h)) / (2.0 * sigma * sigma);
        let prior_val = match prior {
            Some(curve) => curve.interp(theta),
            None => 1.0 / TAU,
        };
        density.push(prior_val * loglik.exp());
    }
    let mut curve = DensityCurve { grid, density };
    let z = curve.integral();
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::numerical(format!(
            "posterior normalizer is {z}; likelihood underflowed everywhere"
        )));
    }
    curve.normalize();
    Ok(curve)
}

/// Von Mises kernel density estimate of circular samples.
///
/// The kernel is `exp(kappa * (cos(t - t_i) - 1))` up to normalization;
/// the curve is normalized numerically, which sidesteps Bessel functions
/// and cannot overflow for any concentration.
pub fn circular_kde(samples: &[f64], kappa: f64, grid_size: usize) -> Result<DensityCurve> {
    if samples.is_empty() {
        return Err(Error::contract("KDE needs at least one sample"));
    }
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(Error::contract(format!("kappa must be positive, got {kappa}")));
    }
    let grid = DensityCurve::uniform_grid(grid_size);
    let mut density = vec![0.0; grid_size];
    for &s in samples {
        for (i, &g) in grid.iter().enumerate() {
            density[i] += (kappa * ((g - s).cos() - 1.0)).exp();
        }
    }
    let mut curve = DensityCurve { grid, density };
    curve.normalize();
    Ok(curve)
}

/// Circular mean angle (in `[0, 2*pi)`) and mean resultant length.
pub fn circular_mean(samples: &[f64]) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::contract("circular mean of empty sample set"));
    }
    let (mut c, mut s) = (0.0, 0.0);
    for &t in samples {
        c += t.cos();
        s += t.sin();
    }
    let n = samples.len() as f64;
    let resultant = (c * c + s * s).sqrt() / n;
    Ok((wrap_angle(s.atan2(c)), resultant))
}

/// Bimodality of a density curve: two local maxima, each at least 25% of
/// the global maximum, separated by at least 0.5 rad of arc.
pub fn bimodality_curve(curve: &DensityCurve) -> bool {
    let peak = curve.density.iter().cloned().fold(0.0, f64::max);
    if peak <= 0.0 {
        return false;
    }
    let candidates: Vec<usize> = curve
        .local_maxima()
        .into_iter()
        .filter(|&i| curve.density[i] >= 0.25 * peak)
        .collect();
    for (a, &i) in candidates.iter().enumerate() {
        for &j in candidates.iter().skip(a + 1) {
            let d = crate::manifold::circle_dist(curve.grid[i], curve.grid[j]);
            if d >= 0.5 {
                return true;
            }
        }
    }
    false
}

/// Bimodality of an angle sample set via its KDE.
pub fn bimodality_samples(samples: &[f64], kappa: f64, grid_size: usize) -> Result<bool> {
    Ok(bimodality_curve(&circular_kde(samples, kappa, grid_size)?))
}
