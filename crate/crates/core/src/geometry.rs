//! The triangle domain, its fan of transport rays, and the maps between
//! ray coordinates `(t, a)` and Cartesian coordinates `(x1, x2)`.
//!
//! The ray with label `a` starts at `(-a, 0)` and ends on the right edge at
//! `(1, a^γ (1 + a) / 2)`; `t` is the fraction of its length travelled.
//! For `γ < 1` the factor `a^(γ-1)` blows up at `a = 0`, which is reported as
//! [`TdError::SingularJacobian`] rather than propagated as a NaN.

use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::error::{Result, TdError};
use crate::numerics::increasing_root;

/// Slack used when deciding whether a point belongs to the closed triangle.
pub const DOMAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayCoord {
    pub t: f64,
    pub a: f64,
}

impl RayCoord {
    pub fn new(t: f64, a: f64) -> Self {
        RayCoord { t, a }
    }

    pub fn is_interior(&self) -> bool {
        self.t > 0.0 && self.t < 1.0 && self.a > 0.0 && self.a < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x1: f64,
    pub x2: f64,
}

impl Point {
    pub fn new(x1: f64, x2: f64) -> Self {
        Point { x1, x2 }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x1 - other.x1).hypot(self.x2 - other.x2)
    }
}

/// Closed triangle with vertices `(-1,0)`, `(1,0)`, `(1,1)`, widened by `tol`.
pub fn in_domain(p: Point, tol: f64) -> bool {
    p.x1 <= 1.0 + tol && p.x2 >= -tol && p.x2 <= 0.5 * (p.x1 + 1.0) + tol
}

/// `a^e` with the convention `0^0 = 1`.
#[inline]
pub(crate) fn pow(a: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        a.powf(e)
    }
}

pub fn ray_to_point(c: RayCoord, cfg: &GammaConfig) -> Point {
    let RayCoord { t, a } = c;
    Point {
        x1: -a + (1.0 + a) * t,
        x2: (1.0 + a) * t * pow(a, cfg.gamma) / 2.0,
    }
}

/// Inverse of [`ray_to_point`].
///
/// On the `x1` axis the rays degenerate: `(x1, 0)` with `x1 <= 0` is the foot
/// `(t = 0, a = -x1)`, and with `x1 > 0` it lies on the ray `a = 0`.
pub fn point_to_ray(p: Point, cfg: &GammaConfig) -> Result<RayCoord> {
    if !(p.x1.is_finite() && p.x2.is_finite()) || !in_domain(p, DOMAIN_TOL) || p.x1 < -1.0 - DOMAIN_TOL {
        return Err(TdError::OutOfDomain { x1: p.x1, x2: p.x2 });
    }
    let x1 = p.x1.clamp(-1.0, 1.0);
    let x2 = p.x2.clamp(0.0, 0.5 * (x1 + 1.0));
    if x2 == 0.0 {
        return Ok(if x1 <= 0.0 {
            RayCoord::new(0.0, -x1)
        } else {
            RayCoord::new(x1, 0.0)
        });
    }
    let g = cfg.gamma;
    let lo = (-x1).max(0.0);
    // a^γ (x1 + a) ≈ 2 x2 suggests a first guess that is exact on the far edge.
    let guess = if x1 >= 0.0 {
        (2.0 * x2 / (x1 + 1.0)).powf(1.0 / g).max(lo)
    } else {
        0.5 * (lo + 1.0)
    };
    let a = increasing_root(
        |a| {
            let ag1 = pow(a, g - 1.0);
            let ag = ag1 * a;
            (
                ag / 2.0 * (x1 + a) - x2,
                (g * ag1 * (x1 + a) + ag) / 2.0,
            )
        },
        lo,
        1.0,
        guess,
    )?;
    let t = ((x1 + a) / (1.0 + a)).clamp(0.0, 1.0);
    Ok(RayCoord::new(t, a))
}

pub fn ray_length(a: f64, cfg: &GammaConfig) -> f64 {
    (1.0 + a) * (1.0 + pow(a, 2.0 * cfg.gamma) / 4.0).sqrt()
}

/// `(d l / d a) / l`.
pub fn ray_length_log_derivative(a: f64, cfg: &GammaConfig) -> f64 {
    let g = cfg.gamma;
    let a2g = pow(a, 2.0 * g);
    let cross = g * (1.0 + a) * pow(a, 2.0 * g - 1.0);
    (4.0 + a2g + cross) / ((1.0 + a) * (4.0 + a2g))
}

/// `J / a^(γ-1) = (1 + a)(γ(1 + a)t + a) / 2`, free of the power singularity.
#[inline]
pub fn reduced_jacobian(t: f64, a: f64, gamma: f64) -> f64 {
    (1.0 + a) * (gamma * (1.0 + a) * t + a) / 2.0
}

fn finite_or_singular(v: f64, c: RayCoord) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TdError::SingularJacobian { t: c.t, a: c.a })
    }
}

/// Area element of the map `(t, a) -> x`.
pub fn jacobian(c: RayCoord, cfg: &GammaConfig) -> Result<f64> {
    let g = cfg.gamma;
    let red = reduced_jacobian(c.t, c.a, g);
    let v = if red == 0.0 { 0.0 } else { red * pow(c.a, g - 1.0) };
    finite_or_singular(v, c)
}

pub fn jacobian_dt(c: RayCoord, cfg: &GammaConfig) -> Result<f64> {
    let g = cfg.gamma;
    finite_or_singular(g * (1.0 + c.a).powi(2) * pow(c.a, g - 1.0) / 2.0, c)
}

pub fn jacobian_da(c: RayCoord, cfg: &GammaConfig) -> Result<f64> {
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    let c1 = g * (g - 1.0) * (1.0 + a).powi(2) * t;
    let first = if c1 == 0.0 { 0.0 } else { c1 * pow(a, g - 2.0) };
    let c2 = g * (1.0 + a) * (1.0 + 2.0 * t) + a;
    let second = c2 * pow(a, g - 1.0);
    finite_or_singular((first + second) / 2.0, c)
}

/// Rows `(x1, x2)`, columns `(t, a)`.
pub fn forward_coordinate_jacobian(c: RayCoord, cfg: &GammaConfig) -> [[f64; 2]; 2] {
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    let ag = pow(a, g);
    let dx2_da = if t == 0.0 {
        0.0
    } else {
        t * pow(a, g - 1.0) * (a + g * (1.0 + a)) / 2.0
    };
    [[1.0 + a, t - 1.0], [(1.0 + a) * ag / 2.0, dx2_da]]
}

/// Rows `(t, a)`, columns `(x1, x2)`.
pub fn inverse_coordinate_jacobian(c: RayCoord, cfg: &GammaConfig) -> Result<[[f64; 2]; 2]> {
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    let j = jacobian(c, cfg)?;
    if j == 0.0 {
        return Err(TdError::SingularJacobian { t, a });
    }
    let dt_dx1 = (g * (1.0 + a) + a) * t * pow(a, g - 1.0) / 2.0;
    let m = [
        [dt_dx1 / j, (1.0 - t) / j],
        [-(1.0 + a) * pow(a, g) / 2.0 / j, (1.0 + a) / j],
    ];
    if m.iter().flatten().all(|v| v.is_finite()) {
        Ok(m)
    } else {
        Err(TdError::SingularJacobian { t, a })
    }
}

/// Unit vector along ray `a`; the potential gradient is its negative.
pub fn unit_ray_direction(a: f64, cfg: &GammaConfig) -> (f64, f64) {
    let slope = pow(a, cfg.gamma) / 2.0;
    let n = (1.0 + slope * slope).sqrt();
    (1.0 / n, slope / n)
}
