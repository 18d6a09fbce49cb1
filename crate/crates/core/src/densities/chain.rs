//! A fan of shrinking triangles glued around the common apex `(-1, 0)`.
//!
//! Triangle `n` (1-based in the formulas, 0-based in the vectors) has local
//! vertices `(-l_n, 0)` and `(1, ±l_n^γ (1 + l_n) / 2)` with `l_n = 1/n`. Its
//! half-opening angle at the apex is `α_n = atan(l_n^γ / 2)`, and it is rotated
//! about `(-1, 0)` by `θ_n = Σ_{k<n} (α_k + α_{k+1})`, so neighbours share the
//! ray from the apex at angle `θ_n + α_n`.

use std::f64::consts::PI;

use crate::config::GammaConfig;
use crate::error::{Result, TdError};
use crate::geometry::{pow, Point};

/// Angular slack for point location on shared edges.
pub const EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleChain {
    pub gamma: f64,
    pub n_max: usize,
    pub l: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    /// `θ_n + α_n`, the upper edge angle; increasing.
    upper: Vec<f64>,
    cos_sin: Vec<(f64, f64)>,
}

pub fn build_chain(cfg: &GammaConfig, n_max: usize) -> Result<TriangleChain> {
    let g = cfg.gamma;
    if !(g > 1.0) {
        return Err(TdError::InvalidParameter(format!(
            "triangle chains need gamma > 1, got {g}"
        )));
    }
    if n_max == 0 {
        return Err(TdError::InvalidParameter("chain needs n_max >= 1".into()));
    }
    let l: Vec<f64> = (1..=n_max).map(|n| 1.0 / n as f64).collect();
    let alpha: Vec<f64> = l.iter().map(|&ln| (pow(ln, g) / 2.0).atan()).collect();
    let mut theta = Vec::with_capacity(n_max);
    theta.push(0.0);
    for k in 1..n_max {
        theta.push(theta[k - 1] + alpha[k - 1] + alpha[k]);
    }
    let upper: Vec<f64> = theta.iter().zip(&alpha).map(|(t, a)| t + a).collect();
    let span = upper[n_max - 1] + alpha[0];
    if span >= 2.0 * PI {
        return Err(TdError::InvalidParameter(format!(
            "chain of {n_max} triangles wraps past a full turn (span {span})"
        )));
    }
    let cos_sin = theta.iter().map(|t| (t.cos(), t.sin())).collect();
    Ok(TriangleChain {
        gamma: g,
        n_max,
        l,
        alpha,
        theta,
        upper,
        cos_sin,
    })
}

impl TriangleChain {
    /// Global point to local coordinates of triangle `n`.
    pub fn to_local(&self, n: usize, p: Point) -> (f64, f64) {
        let (c, s) = self.cos_sin[n];
        let (u, v) = (p.x1 + 1.0, p.x2);
        (c * u + s * v - self.l[n], -s * u + c * v)
    }

    pub fn to_global(&self, n: usize, y1: f64, y2: f64) -> Point {
        let (c, s) = self.cos_sin[n];
        let u = y1 + self.l[n];
        Point::new(c * u - s * y2 - 1.0, s * u + c * y2)
    }

    /// Rotate a local vector of triangle `n` into global axes.
    pub fn rotate_to_global(&self, n: usize, v: (f64, f64)) -> (f64, f64) {
        let (c, s) = self.cos_sin[n];
        (c * v.0 - s * v.1, s * v.0 + c * v.1)
    }

    /// Apex angle of `p`, measured so that the first triangle starts at `-α_1`.
    fn angle(&self, p: Point) -> f64 {
        let phi = p.x2.atan2(p.x1 + 1.0);
        (phi + self.alpha[0]).rem_euclid(2.0 * PI) - self.alpha[0]
    }

    /// Containing triangle and local coordinates; the lower index wins on shared edges.
    pub fn locate(&self, p: Point) -> Option<(usize, f64, f64)> {
        if !(p.x1.is_finite() && p.x2.is_finite()) {
            return None;
        }
        let phi = self.angle(p);
        if phi < -self.alpha[0] - EDGE_TOL {
            return None;
        }
        let n = self.upper.partition_point(|&u| u + EDGE_TOL < phi);
        if n >= self.n_max {
            return None;
        }
        let (y1, y2) = self.to_local(n, p);
        let ln = self.l[n];
        let half = pow(ln, self.gamma) / 2.0 * (y1 + ln);
        let tol = 1e-12;
        if y1 <= 1.0 + tol && y1 >= -ln - tol && y2.abs() <= half + tol {
            Some((n, y1, y2))
        } else {
            None
        }
    }

    /// Length of the shared edge between triangles `n` and `n + 1`.
    pub fn shared_edge_length(&self, n: usize) -> f64 {
        let g = self.gamma;
        let len = |k: usize| (1.0 + self.l[k]) * (1.0 + pow(self.l[k], 2.0 * g) / 4.0).sqrt();
        len(n).min(len(n + 1))
    }

    /// Points on the common part of the edge between triangles `n` and `n + 1`.
    pub fn shared_edge_points(&self, n: usize, samples: usize) -> Vec<Point> {
        let dir = self.upper[n];
        let len = self.shared_edge_length(n);
        (0..samples)
            .map(|i| {
                let r = len * (i as f64 + 0.5) / samples as f64;
                Point::new(-1.0 + r * dir.cos(), r * dir.sin())
            })
            .collect()
    }
}
