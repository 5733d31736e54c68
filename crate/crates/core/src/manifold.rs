//! Geometric primitives for the circle, SE(2), and SO(3).
//!
//! Points are stored in canonical coordinates: angles reduced to
//! `[0, 2*pi)`, rotations as orthonormal matrices with determinant +1.
//! Tangent vectors are plain `&[f64]` slices in Lie-algebra coordinates
//! (length 1, 3, 3 respectively; for SO(3) the tangent element at `R` is
//! `R * hat(omega)`).
//!
//! Besides the exp/log/distance/embedding operations, this module provides
//! the two analytic derivatives the transport solvers differentiate
//! through: the squared-distance cost of a tangent displacement
//! ([`transport_cost_and_grad`]) and the Jacobian of the embedded
//! exponential ([`embed_exp_jacobian`]).

use std::f64::consts::{PI, TAU};
use std::sync::OnceLock;

use nalgebra::Matrix3;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Reduce an angle to `[0, 2*pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

/// Signed shortest arc, in `(-pi, pi]`.
pub fn wrap_to_pi(delta: f64) -> f64 {
    let w = (delta + PI).rem_euclid(TAU) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

/// Which manifold a point or solver lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldId {
    Circle,
    Se2,
    So3,
}

impl ManifoldId {
    /// Dimension of the tangent space (Lie-algebra coordinates).
    pub fn tangent_dim(self) -> usize {
        match self {
            ManifoldId::Circle => 1,
            ManifoldId::Se2 => 3,
            ManifoldId::So3 => 3,
        }
    }

    /// Length of the network-input embedding.
    pub fn embed_dim(self) -> usize {
        match self {
            ManifoldId::Circle => 2,
            ManifoldId::Se2 => 4,
            ManifoldId::So3 => 9,
        }
    }

    /// Ratio of geodesic distance to tangent-coordinate norm along a
    /// geodesic: 1 for the circle and SE(2), sqrt(2) for SO(3).
    pub fn tangent_distance_factor(self) -> f64 {
        match self {
            ManifoldId::Circle | ManifoldId::Se2 => 1.0,
            ManifoldId::So3 => std::f64::consts::SQRT_2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ManifoldId::Circle => "circle",
            ManifoldId::Se2 => "se2",
            ManifoldId::So3 => "so3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "circle" | "s1" => Ok(ManifoldId::Circle),
            "se2" => Ok(ManifoldId::Se2),
            "so3" => Ok(ManifoldId::So3),
            other => Err(Error::config(format!("unknown manifold '{other}'"))),
        }
    }
}

/// A point on one of the supported manifolds, in canonical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldPoint {
    /// Angle in `[0, 2*pi)`.
    Circle(f64),
    /// Planar pose; `theta` in `[0, 2*pi)`.
    Se2 { x: f64, y: f64, theta: f64 },
    /// Rotation matrix, orthonormal with determinant +1.
    So3(Matrix3<f64>),
}

const SO3_ORTHO_TOL: f64 = 1e-9;

impl ManifoldPoint {
    pub fn circle(theta: f64) -> Self {
        ManifoldPoint::Circle(wrap_angle(theta))
    }

    pub fn se2(x: f64, y: f64, theta: f64) -> Self {
        ManifoldPoint::Se2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    /// Build an SO(3) point, validating orthonormality and determinant.
    pub fn so3(r: Matrix3<f64>) -> Result<Self> {
        let defect = (r.transpose() * r - Matrix3::identity()).norm();
        if defect > SO3_ORTHO_TOL {
            return Err(Error::contract(format!(
                "matrix is not orthonormal (|R^T R - I| = {defect:.3e})"
            )));
        }
        if (r.determinant() - 1.0).abs() > SO3_ORTHO_TOL {
            return Err(Error::contract(format!(
                "matrix determinant {} is not +1",
                r.determinant()
            )));
        }
        Ok(ManifoldPoint::So3(r))
    }

    /// Wrap a matrix already known to be a rotation (solver-internal).
    pub(crate) fn so3_unchecked(r: Matrix3<f64>) -> Self {
        ManifoldPoint::So3(r)
    }

    pub fn manifold(&self) -> ManifoldId {
        match self {
            ManifoldPoint::Circle(_) => ManifoldId::Circle,
            ManifoldPoint::Se2 { .. } => ManifoldId::Se2,
            ManifoldPoint::So3(_) => ManifoldId::So3,
        }
    }

    pub fn theta(&self) -> Result<f64> {
        match self {
            ManifoldPoint::Circle(t) => Ok(*t),
            _ => Err(Error::contract("point is not on the circle")),
        }
    }

    pub fn rotation(&self) -> Result<&Matrix3<f64>> {
        match self {
            ManifoldPoint::So3(r) => Ok(r),
            _ => Err(Error::contract("point is not on SO(3)")),
        }
    }

    /// Raw coordinates for CSV export: `[theta]`, `[x, y, theta]`, or the
    /// row-major matrix entries `[r11..r33]`.
    pub fn coords(&self) -> Vec<f64> {
        match self {
            ManifoldPoint::Circle(t) => vec![*t],
            ManifoldPoint::Se2 { x, y, theta } => vec![*x, *y, *theta],
            ManifoldPoint::So3(r) => row_major(r).to_vec(),
        }
    }

    /// Inverse of [`ManifoldPoint::coords`].
    pub fn from_coords(m: ManifoldId, c: &[f64]) -> Result<Self> {
        match (m, c.len()) {
            (ManifoldId::Circle, 1) => Ok(ManifoldPoint::circle(c[0])),
            (ManifoldId::Se2, 3) => Ok(ManifoldPoint::se2(c[0], c[1], c[2])),
            (ManifoldId::So3, 9) => ManifoldPoint::so3(Matrix3::new(
                c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], c[8],
            )),
            (m, n) => Err(Error::contract(format!(
                "{} expects {} coordinates, got {n}",
                m.name(),
                match m {
                    ManifoldId::Circle => 1,
                    ManifoldId::Se2 => 3,
                    ManifoldId::So3 => 9,
                }
            ))),
        }
    }
}

fn row_major(r: &Matrix3<f64>) -> [f64; 9] {
    [
        r[(0, 0)],
        r[(0, 1)],
        r[(0, 2)],
        r[(1, 0)],
        r[(1, 1)],
        r[(1, 2)],
        r[(2, 0)],
        r[(2, 1)],
        r[(2, 2)],
    ]
}

fn check_tangent(m: ManifoldId, v: &[f64]) -> Result<()> {
    if v.len() != m.tangent_dim() {
        return Err(Error::contract(format!(
            "tangent vector has length {}, expected {} on {}",
            v.len(),
            m.tangent_dim(),
            m.name()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::contract("tangent vector has non-finite entries"));
    }
    Ok(())
}

fn check_point(m: ManifoldId, z: &ManifoldPoint) -> Result<()> {
    if z.manifold() != m {
        return Err(Error::contract(format!(
            "point is on {}, expected {}",
            z.manifold().name(),
            m.name()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// SO(3) matrix helpers
// ---------------------------------------------------------------------------

/// Skew-symmetric matrix of a 3-vector.
pub fn hat(w: &[f64]) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Inverse of [`hat`].
pub fn vee(m: &Matrix3<f64>) -> [f64; 3] {
    [m[(2, 1)], m[(0, 2)], m[(1, 0)]]
}

/// Rodrigues coefficients sin(r)/r and (1-cos r)/r^2, series near zero.
fn rodrigues_ab(r: f64) -> (f64, f64) {
    if r < 1e-4 {
        let r2 = r * r;
        (
            1.0 - r2 / 6.0 + r2 * r2 / 120.0,
            0.5 - r2 / 24.0 + r2 * r2 / 720.0,
        )
    } else {
        (r.sin() / r, (1.0 - r.cos()) / (r * r))
    }
}

/// Matrix exponential of `hat(w)` via the Rodrigues formula.
pub fn so3_exp(w: &[f64]) -> Matrix3<f64> {
    let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let (a, b) = rodrigues_ab(r);
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation-vector logarithm of a rotation matrix; `|result| <= pi`.
///
/// The angle comes from `atan2(|vee(M - M^T)|/2, (tr - 1)/2)`, which stays
/// well-conditioned where a bare `acos` of the trace does not. Branches:
/// first-order formula below 1e-6; symmetric-part axis recovery within
/// 1e-6 of pi, with the overall sign fixed against the antisymmetric part
/// when that is nonzero and by making the dominant axis component positive
/// otherwise.
pub fn so3_log(m: &Matrix3<f64>) -> [f64; 3] {
    let tr = (m[(0, 0)] + m[(1, 1)] + m[(2, 2)]).clamp(-1.0, 3.0);
    let cos_angle = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    let anti = [
        (m[(2, 1)] - m[(1, 2)]) / 2.0,
        (m[(0, 2)] - m[(2, 0)]) / 2.0,
        (m[(1, 0)] - m[(0, 1)]) / 2.0,
    ];
    let sin_angle = (anti[0] * anti[0] + anti[1] * anti[1] + anti[2] * anti[2]).sqrt();
    let angle = sin_angle.atan2(cos_angle);
    if angle < 1e-6 {
        // sin(angle) ~ angle: vee(M - M^T)/2 is already first-order exact.
        return anti;
    }
    if PI - angle < 1e-6 {
        // Axis from the dominant diagonal of (M + I)/2 = n n^T at pi.
        let diag = [m[(0, 0)], m[(1, 1)], m[(2, 2)]];
        let i = (0..3).max_by(|&a, &b| diag[a].total_cmp(&diag[b])).unwrap();
        let mut n = [0.0f64; 3];
        n[i] = (((diag[i] + 1.0) / 2.0).max(0.0)).sqrt();
        for j in 0..3 {
            if j != i {
                n[j] = (m[(i, j)] + m[(j, i)]) / (4.0 * n[i]);
            }
        }
        let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
        for x in &mut n {
            *x /= norm;
        }
        let dot = n[0] * anti[0] + n[1] * anti[1] + n[2] * anti[2];
        if dot < 0.0 || (dot == 0.0 && n[i] < 0.0) {
            for x in &mut n {
                *x = -*x;
            }
        }
        return [n[0] * angle, n[1] * angle, n[2] * angle];
    }
    let scale = angle / sin_angle;
    [anti[0] * scale, anti[1] * scale, anti[2] * scale]
}

/// Project a near-rotation back onto SO(3) via the polar factor
/// `M (M^T M)^{-1/2}`.
fn so3_project(m: &Matrix3<f64>) -> Matrix3<f64> {
    let mtm = m.transpose() * m;
    let eig = mtm.symmetric_eigen();
    let mut inv_sqrt = Matrix3::zeros();
    for i in 0..3 {
        let lam = eig.eigenvalues[i].max(1e-300);
        let col = eig.eigenvectors.column(i);
        inv_sqrt += col * col.transpose() / lam.sqrt();
    }
    m * inv_sqrt
}

// ---------------------------------------------------------------------------
// Core operations
// ---------------------------------------------------------------------------

/// Exponential map: follow the geodesic from `z` with tangent coordinates
/// `v` for unit time.
pub fn exp_map(m: ManifoldId, z: &ManifoldPoint, v: &[f64]) -> Result<ManifoldPoint> {
    check_point(m, z)?;
    check_tangent(m, v)?;
    Ok(match (m, z) {
        (ManifoldId::Circle, ManifoldPoint::Circle(t)) => ManifoldPoint::circle(t + v[0]),
        (ManifoldId::Se2, ManifoldPoint::Se2 { x, y, theta }) => {
            ManifoldPoint::se2(x + v[0], y + v[1], theta + v[2])
        }
        (ManifoldId::So3, ManifoldPoint::So3(r)) => {
            let mut out = r * so3_exp(v);
            let defect = (out.transpose() * out - Matrix3::identity()).norm();
            if defect > 1e-10 {
                out = so3_project(&out);
            }
            ManifoldPoint::so3_unchecked(out)
        }
        _ => unreachable!(),
    })
}

/// Logarithm map: tangent coordinates of the shortest geodesic from `z`
/// to `z2`. Circle/SE(2) angle components land in `(-pi, pi]`; the SO(3)
/// result has norm at most pi.
pub fn log_map(m: ManifoldId, z: &ManifoldPoint, z2: &ManifoldPoint) -> Result<Vec<f64>> {
    check_point(m, z)?;
    check_point(m, z2)?;
    Ok(match (z, z2) {
        (ManifoldPoint::Circle(a), ManifoldPoint::Circle(b)) => vec![wrap_to_pi(b - a)],
        (
            ManifoldPoint::Se2 { x, y, theta },
            ManifoldPoint::Se2 {
                x: x2,
                y: y2,
                theta: t2,
            },
        ) => vec![x2 - x, y2 - y, wrap_to_pi(t2 - theta)],
        (ManifoldPoint::So3(r), ManifoldPoint::So3(r2)) => {
            so3_log(&(r.transpose() * r2)).to_vec()
        }
        _ => unreachable!(),
    })
}

/// Geodesic distance between two points on `m`.
pub fn geodesic_dist(m: ManifoldId, z: &ManifoldPoint, z2: &ManifoldPoint) -> Result<f64> {
    check_point(m, z)?;
    check_point(m, z2)?;
    Ok(match (z, z2) {
        (ManifoldPoint::Circle(a), ManifoldPoint::Circle(b)) => circle_dist(*a, *b),
        (
            ManifoldPoint::Se2 { x, y, theta },
            ManifoldPoint::Se2 {
                x: x2,
                y: y2,
                theta: t2,
            },
        ) => {
            let dt = circle_dist(*theta, *t2);
            (dt * dt + (x - x2).powi(2) + (y - y2).powi(2)).sqrt()
        }
        (ManifoldPoint::So3(r), ManifoldPoint::So3(r2)) => {
            let w = so3_log(&(r.transpose() * r2));
            std::f64::consts::SQRT_2 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
        }
        _ => unreachable!(),
    })
}

/// Arc-length distance on the circle.
pub fn circle_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(TAU - d)
}

/// Smooth, periodicity-respecting network input.
///
/// Circle: `[cos t, sin t]`; SE(2): `[x, y, cos t, sin t]`; SO(3): the
/// row-major matrix entries.
pub fn embed(m: ManifoldId, z: &ManifoldPoint) -> Result<Vec<f64>> {
    check_point(m, z)?;
    Ok(match z {
        ManifoldPoint::Circle(t) => vec![t.cos(), t.sin()],
        ManifoldPoint::Se2 { x, y, theta } => vec![*x, *y, theta.cos(), theta.sin()],
        ManifoldPoint::So3(r) => row_major(r).to_vec(),
    })
}

/// Stack embeddings of `pts` into a batch matrix.
pub fn embed_batch(m: ManifoldId, pts: &[ManifoldPoint]) -> Result<Array2<f64>> {
    let e = m.embed_dim();
    let mut out = Array2::zeros((pts.len(), e));
    for (i, p) in pts.iter().enumerate() {
        let emb = embed(m, p)?;
        for (j, x) in emb.iter().enumerate() {
            out[(i, j)] = *x;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Derivatives used by the transport objectives
// ---------------------------------------------------------------------------

/// Squared-distance transport cost of a tangent displacement and its
/// gradient: `c(v) = d(z, exp_z(v))^2 / 2` with `d c / d v`.
///
/// The value depends only on `v`. Angle components are wrapped to the
/// nearest branch, on which the cost is smooth.
pub fn transport_cost_and_grad(m: ManifoldId, v: &[f64]) -> Result<(f64, Vec<f64>)> {
    check_tangent(m, v)?;
    Ok(match m {
        ManifoldId::Circle => {
            let w = wrap_to_pi(v[0]);
            (w * w / 2.0, vec![w])
        }
        ManifoldId::Se2 => {
            let wt = wrap_to_pi(v[2]);
            (
                (wt * wt + v[0] * v[0] + v[1] * v[1]) / 2.0,
                vec![v[0], v[1], wt],
            )
        }
        ManifoldId::So3 => {
            // d = sqrt(2) * rotation angle, so c = angle^2.
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if r < 1e-300 {
                return Ok((0.0, vec![0.0; 3]));
            }
            let rho = r.rem_euclid(TAU);
            let (angle, dangle_dr) = if rho <= PI { (rho, 1.0) } else { (TAU - rho, -1.0) };
            let dc_dr = 2.0 * angle * dangle_dr;
            (
                angle * angle,
                vec![dc_dr * v[0] / r, dc_dr * v[1] / r, dc_dr * v[2] / r],
            )
        }
    })
}

/// Embedded exponential and its Jacobian: returns `embed(exp_z(v))` and
/// the `embed_dim x tangent_dim` matrix of partial derivatives in `v`.
pub fn embed_exp_jacobian(
    m: ManifoldId,
    z: &ManifoldPoint,
    v: &[f64],
) -> Result<(Vec<f64>, Array2<f64>)> {
    check_point(m, z)?;
    check_tangent(m, v)?;
    Ok(match z {
        ManifoldPoint::Circle(t) => {
            let t2 = t + v[0];
            let emb = vec![t2.cos(), t2.sin()];
            let mut jac = Array2::zeros((2, 1));
            jac[(0, 0)] = -t2.sin();
            jac[(1, 0)] = t2.cos();
            (emb, jac)
        }
        ManifoldPoint::Se2 { x, y, theta } => {
            let t2 = theta + v[2];
            let emb = vec![x + v[0], y + v[1], t2.cos(), t2.sin()];
            let mut jac = Array2::zeros((4, 3));
            jac[(0, 0)] = 1.0;
            jac[(1, 1)] = 1.0;
            jac[(2, 2)] = -t2.sin();
            jac[(3, 2)] = t2.cos();
            (emb, jac)
        }
        ManifoldPoint::So3(rot) => {
            let e = so3_exp(v);
            let out = rot * e;
            let emb = row_major(&out).to_vec();
            let partials = so3_exp_partials(v);
            let mut jac = Array2::zeros((9, 3));
            for (i, de) in partials.iter().enumerate() {
                let d = rot * de;
                let flat = row_major(&d);
                for (r, val) in flat.iter().enumerate() {
                    jac[(r, i)] = *val;
                }
            }
            (emb, jac)
        }
    })
}

/// Partial derivatives of the Rodrigues exponential with respect to each
/// rotation-vector component.
fn so3_exp_partials(w: &[f64]) -> [Matrix3<f64>; 3] {
    let r = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    let (a, b) = rodrigues_ab(r);
    // c1 = a'(r)/r, c2 = b'(r)/r, finite at r = 0.
    let (c1, c2) = if r < 1e-4 {
        let r2 = r * r;
        (
            -1.0 / 3.0 + r2 / 30.0 - r2 * r2 / 840.0,
            -1.0 / 12.0 + r2 / 180.0 - r2 * r2 / 6720.0,
        )
    } else {
        let (s, c) = (r.sin(), r.cos());
        (
            (r * c - s) / (r * r * r),
            (r * s - 2.0 * (1.0 - c)) / (r * r * r * r),
        )
    };
    let k = hat(w);
    let k2 = k * k;
    let basis = [
        hat(&[1.0, 0.0, 0.0]),
        hat(&[0.0, 1.0, 0.0]),
        hat(&[0.0, 0.0, 1.0]),
    ];
    std::array::from_fn(|i| {
        let ei = &basis[i];
        k * (c1 * w[i]) + ei * a + k2 * (c2 * w[i]) + (ei * k + k * ei) * b
    })
}

// ---------------------------------------------------------------------------
// Distributions
// ---------------------------------------------------------------------------

/// The two one-parameter families of rotations used as transport marginals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    P,
    Q,
}

/// Sampleable distributions on the three manifolds.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    CircleUniform,
    /// Gaussian on the line, reduced modulo 2*pi.
    CircleModGaussian { mean: f64, std: f64 },
    /// Mixture of mod-2*pi Gaussians; `(weight, mean, std)` per component.
    CircleMixture(Vec<(f64, f64, f64)>),
    /// Independent uniform x, y; heading uniform on `[0, 2*pi)`.
    Se2BoxUniform { x: (f64, f64), y: (f64, f64) },
    /// Haar-uniform rotations.
    So3Uniform,
    /// One of the [`CurveFamily`] curves with uniform parameter.
    So3Curve(CurveFamily),
}

impl DistributionSpec {
    pub fn manifold(&self) -> ManifoldId {
        match self {
            DistributionSpec::CircleUniform
            | DistributionSpec::CircleModGaussian { .. }
            | DistributionSpec::CircleMixture(_) => ManifoldId::Circle,
            DistributionSpec::Se2BoxUniform { .. } => ManifoldId::Se2,
            DistributionSpec::So3Uniform | DistributionSpec::So3Curve(_) => ManifoldId::So3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DistributionSpec::CircleModGaussian { std, .. } => {
                if !std.is_finite() || *std <= 0.0 {
                    return Err(Error::config(format!("gaussian std must be positive, got {std}")));
                }
            }
            DistributionSpec::CircleMixture(comps) => {
                if comps.is_empty() {
                    return Err(Error::config("mixture needs at least one component"));
                }
                let mut total = 0.0;
                for (w, _, s) in comps {
                    if !w.is_finite() || *w <= 0.0 {
                        return Err(Error::config(format!("mixture weight must be positive, got {w}")));
                    }
                    if !s.is_finite() || *s <= 0.0 {
                        return Err(Error::config(format!("mixture std must be positive, got {s}")));
                    }
                    total += w;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::config(format!(
                        "mixture weights must sum to 1, got {total}"
                    )));
                }
            }
            DistributionSpec::Se2BoxUniform { x, y } => {
                if x.1 < x.0 || y.1 < y.0 {
                    return Err(Error::config("empty SE(2) box range"));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Point on one of the SO(3) sample curves at parameter `u`.
pub fn curve_point(family: CurveFamily, u: f64) -> ManifoldPoint {
    let (c, s) = (u.cos(), u.sin());
    let r = match family {
        CurveFamily::P => Matrix3::new(c, s, 0.0, 0.0, 0.0, 1.0, s, -c, 0.0),
        CurveFamily::Q => Matrix3::new(-c, -s, 0.0, -s, c, 0.0, 0.0, 0.0, -1.0),
    };
    ManifoldPoint::so3_unchecked(r)
}

/// Inverse CDF table for the Haar rotation-angle density (1 - cos a)/pi.
fn haar_angle_table() -> &'static Vec<f64> {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = 4096;
        (0..=n)
            .map(|i| {
                let a = PI * i as f64 / n as f64;
                (a - a.sin()) / PI
            })
            .collect()
    })
}

fn sample_haar_angle(rng: &mut impl Rng) -> f64 {
    let table = haar_angle_table();
    let n = table.len() - 1;
    let u: f64 = rng.random();
    // Largest index with F[i] <= u, then linear interpolation.
    let mut lo = 0usize;
    let mut hi = n;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if table[mid] <= u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (f0, f1) = (table[lo], table[hi]);
    let a0 = PI * lo as f64 / n as f64;
    if f1 <= f0 {
        return a0;
    }
    (a0 + (u - f0) / (f1 - f0) * PI / n as f64).min(PI)
}

fn sample_one(spec: &DistributionSpec, rng: &mut impl Rng) -> ManifoldPoint {
    match spec {
        DistributionSpec::CircleUniform => ManifoldPoint::circle(rng.random_range(0.0..TAU)),
        DistributionSpec::CircleModGaussian { mean, std } => {
            let xi: f64 = rng.sample(StandardNormal);
            ManifoldPoint::circle(mean + std * xi)
        }
        DistributionSpec::CircleMixture(comps) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = &comps[comps.len() - 1];
            for comp in comps {
                acc += comp.0;
                if u < acc {
                    chosen = comp;
                    break;
                }
            }
            let xi: f64 = rng.sample(StandardNormal);
            ManifoldPoint::circle(chosen.1 + chosen.2 * xi)
        }
        DistributionSpec::Se2BoxUniform { x, y } => {
            let px = if x.1 > x.0 { rng.random_range(x.0..x.1) } else { x.0 };
            let py = if y.1 > y.0 { rng.random_range(y.0..y.1) } else { y.0 };
            let theta = rng.random_range(0.0..TAU);
            ManifoldPoint::se2(px, py, theta)
        }
        DistributionSpec::So3Uniform => {
            let axis = loop {
                let g: [f64; 3] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
                if norm > 1e-12 {
                    break [g[0] / norm, g[1] / norm, g[2] / norm];
                }
            };
            let angle = sample_haar_angle(rng);
            let w = [axis[0] * angle, axis[1] * angle, axis[2] * angle];
            ManifoldPoint::so3_unchecked(so3_exp(&w))
        }
        DistributionSpec::So3Curve(family) => curve_point(*family, rng.random_range(0.0..TAU)),
    }
}

/// Draw `count` i.i.d. points; deterministic given the generator state.
pub fn sample(spec: &DistributionSpec, count: usize, rng: &mut impl Rng) -> Result<Vec<ManifoldPoint>> {
    if count == 0 {
        return Err(Error::contract("sample count must be at least 1"));
    }
    spec.validate()?;
    Ok((0..count).map(|_| sample_one(spec, rng)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    /// Truncated power series sum_{k<=30} hat(w)^k / k!, the independent
    /// oracle for the Rodrigues formula.
    pub(crate) fn so3_exp_series(w: &[f64]) -> Matrix3<f64> {
        let k = hat(w);
        let mut term = Matrix3::identity();
        let mut acc = Matrix3::identity();
        for i in 1..=30 {
            term = term * k / i as f64;
            acc += term;
        }
        acc
    }

    fn random_omega(rng: &mut impl Rng, max_norm: f64) -> [f64; 3] {
        loop {
            let w: [f64; 3] = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            if n > 1e-6 && n < 1.0 {
                let scale = rng.random_range(0.0..max_norm) / n;
                return [w[0] * scale, w[1] * scale, w[2] * scale];
            }
        }
    }

    #[test]
    fn circle_exp_basic() {
        let z = ManifoldPoint::circle(0.0);
        let out = exp_map(ManifoldId::Circle, &z, &[PI / 2.0]).unwrap();
        assert_abs_diff_eq!(out.theta().unwrap(), PI / 2.0, epsilon = 1e-15);

        let z = ManifoldPoint::circle(3.0 * PI / 2.0);
        let out = exp_map(ManifoldId::Circle, &z, &[PI]).unwrap();
        assert_abs_diff_eq!(out.theta().unwrap(), PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn circle_log_shortest_arc() {
        let a = ManifoldPoint::circle(0.0);
        let b = ManifoldPoint::circle(3.0 * PI / 2.0);
        let v = log_map(ManifoldId::Circle, &a, &b).unwrap();
        assert_abs_diff_eq!(v[0], -PI / 2.0, epsilon = 1e-12);
        let v = log_map(ManifoldId::Circle, &a, &a).unwrap();
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn so3_exp_matches_power_series() {
        let mut r = rng::from_seed(11);
        for _ in 0..200 {
            let w = random_omega(&mut r, PI);
            let rod = so3_exp(&w);
            let series = so3_exp_series(&w);
            assert!((rod - series).abs().max() < 1e-8, "w = {w:?}");
        }
        // Identity case.
        let z = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let out = exp_map(ManifoldId::So3, &z, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(out.rotation().unwrap(), &Matrix3::identity());
        // Spec'd quarter turn about x.
        let out = exp_map(ManifoldId::So3, &z, &[PI / 2.0, 0.0, 0.0]).unwrap();
        let series = so3_exp_series(&[PI / 2.0, 0.0, 0.0]);
        assert!((out.rotation().unwrap() - series).abs().max() < 1e-8);
    }

    #[test]
    fn so3_log_round_trip() {
        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let target = exp_map(ManifoldId::So3, &eye, &[0.2, -0.1, 0.3]).unwrap();
        let w = log_map(ManifoldId::So3, &eye, &target).unwrap();
        assert_abs_diff_eq!(w[0], 0.2, epsilon = 1e-8);
        assert_abs_diff_eq!(w[1], -0.1, epsilon = 1e-8);
        assert_abs_diff_eq!(w[2], 0.3, epsilon = 1e-8);
    }

    #[test]
    fn exp_log_round_trip_all_manifolds() {
        let mut r = rng::from_seed(3);
        for _ in 0..300 {
            let (m, z, v): (ManifoldId, ManifoldPoint, Vec<f64>) = match r.random_range(0..3) {
                0 => (
                    ManifoldId::Circle,
                    ManifoldPoint::circle(r.random_range(0.0..TAU)),
                    vec![r.random_range(-3.1..3.1)],
                ),
                1 => (
                    ManifoldId::Se2,
                    ManifoldPoint::se2(
                        r.random_range(-2.0..2.0),
                        r.random_range(-2.0..2.0),
                        r.random_range(0.0..TAU),
                    ),
                    vec![
                        r.random_range(-1.0..1.0),
                        r.random_range(-1.0..1.0),
                        r.random_range(-3.1..3.1),
                    ],
                ),
                _ => {
                    let base = so3_exp(&random_omega(&mut r, PI));
                    (
                        ManifoldId::So3,
                        ManifoldPoint::so3_unchecked(base),
                        random_omega(&mut r, 3.1).to_vec(),
                    )
                }
            };
            let fwd = exp_map(m, &z, &v).unwrap();
            let back = log_map(m, &z, &fwd).unwrap();
            for (a, b) in v.iter().zip(back.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn so3_log_near_pi() {
        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let mut r = rng::from_seed(5);
        for _ in 0..50 {
            let mut w = random_omega(&mut r, 1.0);
            let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
            let scale = (PI - 1e-6) / n;
            for x in &mut w {
                *x *= scale;
            }
            let fwd = exp_map(ManifoldId::So3, &eye, &w).unwrap();
            let back = log_map(ManifoldId::So3, &eye, &fwd).unwrap();
            for (a, b) in w.iter().zip(back.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-7);
            }
        }
        // Angle exactly pi must return a valid vector of norm pi.
        let half_turn = so3_exp(&[PI, 0.0, 0.0]);
        let w = so3_log(&half_turn);
        let n = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        assert_abs_diff_eq!(n, PI, epsilon = 1e-9);
        let rebuilt = so3_exp(&w);
        assert!((rebuilt - half_turn).abs().max() < 1e-9);
    }

    #[test]
    fn distances_match_formulas() {
        let a = ManifoldPoint::circle(0.1);
        let b = ManifoldPoint::circle(TAU - 0.1);
        assert_abs_diff_eq!(
            geodesic_dist(ManifoldId::Circle, &a, &b).unwrap(),
            0.2,
            epsilon = 1e-12
        );

        let a = ManifoldPoint::se2(0.0, 0.0, 0.0);
        let b = ManifoldPoint::se2(1.0, 1.0, PI);
        assert_abs_diff_eq!(
            geodesic_dist(ManifoldId::Se2, &a, &b).unwrap(),
            (2.0 + PI * PI).sqrt(),
            epsilon = 1e-12
        );

        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let rot = exp_map(ManifoldId::So3, &eye, &[0.3, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(
            geodesic_dist(ManifoldId::So3, &eye, &rot).unwrap(),
            0.3 * std::f64::consts::SQRT_2,
            epsilon = 1e-10
        );
    }

    #[test]
    fn se2_distance_decomposes() {
        let mut r = rng::from_seed(9);
        for _ in 0..100 {
            let a = ManifoldPoint::se2(
                r.random_range(-3.0..3.0),
                r.random_range(-3.0..3.0),
                r.random_range(0.0..TAU),
            );
            let b = ManifoldPoint::se2(
                r.random_range(-3.0..3.0),
                r.random_range(-3.0..3.0),
                r.random_range(0.0..TAU),
            );
            let d = geodesic_dist(ManifoldId::Se2, &a, &b).unwrap();
            let (ManifoldPoint::Se2 { x, y, theta }, ManifoldPoint::Se2 { x: x2, y: y2, theta: t2 }) =
                (&a, &b)
            else {
                unreachable!()
            };
            let parts =
                circle_dist(*theta, *t2).powi(2) + (x - x2).powi(2) + (y - y2).powi(2);
            // d is sqrt(parts); squaring it back loses at most a couple ulps.
            assert!((d * d - parts).abs() <= 1e-14 * (1.0 + parts));
        }
    }

    #[test]
    fn metric_axioms() {
        let mut r = rng::from_seed(17);
        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let random_pt = |r: &mut crate::rng::RunRng, m: ManifoldId| match m {
            ManifoldId::Circle => ManifoldPoint::circle(r.random_range(0.0..TAU)),
            ManifoldId::Se2 => ManifoldPoint::se2(
                r.random_range(-2.0..2.0),
                r.random_range(-2.0..2.0),
                r.random_range(0.0..TAU),
            ),
            ManifoldId::So3 => exp_map(ManifoldId::So3, &eye, &random_omega(r, PI)).unwrap(),
        };
        for m in [ManifoldId::Circle, ManifoldId::Se2, ManifoldId::So3] {
            for _ in 0..100 {
                let (a, b, c) = (random_pt(&mut r, m), random_pt(&mut r, m), random_pt(&mut r, m));
                let dab = geodesic_dist(m, &a, &b).unwrap();
                let dba = geodesic_dist(m, &b, &a).unwrap();
                assert_abs_diff_eq!(dab, dba, epsilon = 1e-12);
                let dac = geodesic_dist(m, &a, &c).unwrap();
                let dcb = geodesic_dist(m, &c, &b).unwrap();
                assert!(dab <= dac + dcb + 1e-9);
                assert!(geodesic_dist(m, &a, &a).unwrap() <= 1e-12);
            }
        }
    }

    #[test]
    fn so3_closure_at_extremes() {
        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        for norm in [1e-12, PI - 1e-6, 0.5, 3.0] {
            let w = [norm / 3f64.sqrt(); 3];
            let out = exp_map(ManifoldId::So3, &eye, &w).unwrap();
            let r = out.rotation().unwrap();
            assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-9);
            assert!((r.determinant() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn embeddings() {
        let z = ManifoldPoint::circle(0.0);
        assert_eq!(embed(ManifoldId::Circle, &z).unwrap(), vec![1.0, 0.0]);
        let z = ManifoldPoint::se2(1.0, 2.0, 0.0);
        assert_eq!(embed(ManifoldId::Se2, &z).unwrap(), vec![1.0, 2.0, 1.0, 0.0]);
        let z = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        assert_eq!(
            embed(ManifoldId::So3, &z).unwrap(),
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn so3_constructor_validates() {
        let bad = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 1e-6, 0.0, 0.0, 1.0);
        assert!(ManifoldPoint::so3(bad).is_err());
        let reflect = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(ManifoldPoint::so3(reflect).is_err());
    }

    #[test]
    fn curve_families() {
        let p0 = curve_point(CurveFamily::P, 0.0);
        let r = p0.rotation().unwrap();
        let expected = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0);
        assert!((r - expected).abs().max() < 1e-15);
        // Both families stay on SO(3) along the parameter.
        for i in 0..32 {
            let u = TAU * i as f64 / 32.0;
            for fam in [CurveFamily::P, CurveFamily::Q] {
                let r = *curve_point(fam, u).rotation().unwrap();
                assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
                assert!((r.determinant() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_determinism_and_stats() {
        let spec = DistributionSpec::CircleModGaussian { mean: PI, std: 1.0 };
        let a = sample(&spec, 64, &mut rng::from_seed(4)).unwrap();
        let b = sample(&spec, 64, &mut rng::from_seed(4)).unwrap();
        assert_eq!(a, b);

        // Circular mean of 10^4 draws within 0.05 of the center.
        let pts = sample(&spec, 10_000, &mut rng::from_seed(1)).unwrap();
        let (mut c, mut s) = (0.0, 0.0);
        for p in &pts {
            let t = p.theta().unwrap();
            c += t.cos();
            s += t.sin();
        }
        let mean = s.atan2(c);
        assert!(circle_dist(wrap_angle(mean), PI) < 0.05);

        // Uniform draws have small resultant length.
        let pts = sample(&DistributionSpec::CircleUniform, 10_000, &mut rng::from_seed(2)).unwrap();
        let (mut c, mut s) = (0.0, 0.0);
        for p in &pts {
            let t = p.theta().unwrap();
            c += t.cos();
            s += t.sin();
        }
        let resultant = (c * c + s * s).sqrt() / pts.len() as f64;
        assert!(resultant < 0.05, "resultant {resultant}");
    }

    #[test]
    fn haar_angle_density() {
        // E[angle] under (1 - cos a)/pi is pi/2 + 2/pi.
        let mut r = rng::from_seed(21);
        let n = 20_000;
        let mean = (0..n).map(|_| sample_haar_angle(&mut r)).sum::<f64>() / n as f64;
        assert!((mean - (PI / 2.0 + 2.0 / PI)).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn mixture_validation() {
        let bad = DistributionSpec::CircleMixture(vec![(0.7, 0.0, 1.0), (0.2, PI, 1.0)]);
        assert!(bad.validate().is_err());
        let neg = DistributionSpec::CircleMixture(vec![(1.5, 0.0, 1.0), (-0.5, PI, 1.0)]);
        assert!(neg.validate().is_err());
        let ok = DistributionSpec::CircleMixture(vec![(0.5, 0.0, 1.0), (0.5, PI, 1.0)]);
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let z = ManifoldPoint::circle(0.0);
        assert!(exp_map(ManifoldId::Circle, &z, &[0.1, 0.2]).is_err());
        assert!(exp_map(ManifoldId::Se2, &z, &[0.1, 0.2, 0.3]).is_err());
        assert!(exp_map(ManifoldId::Circle, &z, &[f64::NAN]).is_err());
    }

    #[test]
    fn cost_grad_matches_finite_differences() {
        let mut r = rng::from_seed(33);
        for m in [ManifoldId::Circle, ManifoldId::Se2, ManifoldId::So3] {
            let n = m.tangent_dim();
            for _ in 0..50 {
                let v: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
                let (_, grad) = transport_cost_and_grad(m, &v).unwrap();
                for i in 0..n {
                    let h = 1e-6;
                    let mut vp = v.clone();
                    vp[i] += h;
                    let mut vm = v.clone();
                    vm[i] -= h;
                    let (cp, _) = transport_cost_and_grad(m, &vp).unwrap();
                    let (cm, _) = transport_cost_and_grad(m, &vm).unwrap();
                    let fd = (cp - cm) / (2.0 * h);
                    assert_abs_diff_eq!(grad[i], fd, epsilon = 1e-5);
                }
            }
        }
    }

    #[test]
    fn embed_exp_jacobian_matches_finite_differences() {
        let mut r = rng::from_seed(35);
        let eye = ManifoldPoint::so3(Matrix3::identity()).unwrap();
        let cases: Vec<(ManifoldId, ManifoldPoint)> = vec![
            (ManifoldId::Circle, ManifoldPoint::circle(1.2)),
            (ManifoldId::Se2, ManifoldPoint::se2(0.3, -0.7, 2.0)),
            (
                ManifoldId::So3,
                exp_map(ManifoldId::So3, &eye, &[0.4, -0.2, 0.9]).unwrap(),
            ),
        ];
        for (m, z) in cases {
            let n = m.tangent_dim();
            for _ in 0..20 {
                let v: Vec<f64> = (0..n).map(|_| r.random_range(-1.5..1.5)).collect();
                let (_, jac) = embed_exp_jacobian(m, &z, &v).unwrap();
                for i in 0..n {
                    let h = 1e-6;
                    let mut vp = v.clone();
                    vp[i] += h;
                    let mut vm = v.clone();
                    vm[i] -= h;
                    let (ep, _) = embed_exp_jacobian(m, &z, &vp).unwrap();
                    let (em, _) = embed_exp_jacobian(m, &z, &vm).unwrap();
                    for row in 0..m.embed_dim() {
                        let fd = (ep[row] - em[row]) / (2.0 * h);
                        assert_abs_diff_eq!(jac[(row, i)], fd, epsilon = 1e-6);
                    }
                }
            }
        }
    }
}
