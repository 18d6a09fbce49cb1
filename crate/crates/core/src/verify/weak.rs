//! Weak form of `−∇·(σ∇u) = f⁺ − f⁻` and the eikonal constraints on `u`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{ray_net_source, DensityInstance, DensityKind};
use crate::error::{Result, TdError};
use crate::geometry::{point_to_ray, unit_ray_direction, Point};
use crate::numerics::{halton, integrate_2d, QuadOptions};
use crate::transport::{potential_u, sigma};

/// `φ(x) = b((x1−c1)/r1) b((x2−c2)/r2)` with `b(s) = (1−s²)³` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub name: &'static str,
    pub center: (f64, f64),
    pub radius: (f64, f64),
}

fn profile(s: f64) -> (f64, f64) {
    if s.abs() >= 1.0 {
        (0.0, 0.0)
    } else {
        let w = 1.0 - s * s;
        (w * w * w, -6.0 * s * w * w)
    }
}

impl Bump {
    pub const fn new(name: &'static str, center: (f64, f64), radius: (f64, f64)) -> Self {
        Bump { name, center, radius }
    }

    pub fn value(&self, p: Point) -> f64 {
        let (u, _) = profile((p.x1 - self.center.0) / self.radius.0);
        let (v, _) = profile((p.x2 - self.center.1) / self.radius.1);
        u * v
    }

    pub fn gradient(&self, p: Point) -> (f64, f64) {
        let (u, du) = profile((p.x1 - self.center.0) / self.radius.0);
        let (v, dv) = profile((p.x2 - self.center.1) / self.radius.1);
        (du * v / self.radius.0, u * dv / self.radius.1)
    }

    /// `sup |∇φ|`, bounded by the product of one-dimensional maxima.
    pub fn gradient_bound(&self) -> f64 {
        // max |b'| = 96/(25√5) at s = 1/√5.
        let m = 96.0 / (25.0 * 5f64.sqrt());
        m * (1.0 / self.radius.0).hypot(1.0 / self.radius.1)
    }

    /// Closed support box lies in the triangle `(-1,0), (1,0), (1,1)`.
    pub fn inside_triangle(&self) -> bool {
        let (c1, c2) = self.center;
        let (r1, r2) = self.radius;
        c2 - r2 >= 0.0 && c1 + r1 <= 1.0 && c2 + r2 <= (c1 - r1 + 1.0) / 2.0
    }

    fn x_breaks(&self) -> [f64; 3] {
        [self.center.0 - self.radius.0, self.center.0, self.center.0 + self.radius.0]
    }

    fn y_breaks(&self) -> Vec<f64> {
        vec![self.center.1 - self.radius.1, self.center.1, self.center.1 + self.radius.1]
    }
}

/// Twelve bumps spread over the triangle, including one near each corner region.
pub fn default_battery() -> Vec<Bump> {
    vec![
        Bump::new("center", (0.2, 0.1), (0.1, 0.05)),
        Bump::new("apex_side", (-0.5, 0.09), (0.15, 0.06)),
        Bump::new("near_origin", (0.05, 0.03), (0.04, 0.02)),
        Bump::new("right_edge", (0.85, 0.4), (0.1, 0.2)),
        Bump::new("upper_corner", (0.9, 0.8), (0.08, 0.1)),
        Bump::new("wide_low", (0.4, 0.1), (0.35, 0.08)),
        Bump::new("mid_high", (0.6, 0.45), (0.15, 0.15)),
        Bump::new("left_small", (-0.3, 0.1), (0.1, 0.05)),
        Bump::new("right_low", (0.7, 0.05), (0.2, 0.04)),
        Bump::new("diag", (0.3, 0.45), (0.05, 0.15)),
        Bump::new("flat", (0.0, 0.2), (0.3, 0.1)),
        Bump::new("tall", (0.6, 0.35), (0.05, 0.3)),
    ]
}

/// `|∫ σ∇u·∇φ − ∫ φ(f⁺−f⁻)|` for each bump, both by 2D quadrature over its support.
pub fn weak_pde_residual(inst: &DensityInstance, battery: &[Bump]) -> Result<Vec<f64>> {
    if inst.kind != DensityKind::SingleTriangle {
        return Err(TdError::InvalidParameter("weak residual is implemented for the single triangle".into()));
    }
    if battery.is_empty() {
        return Err(TdError::InvalidParameter("test-function battery is empty".into()));
    }
    if let Some(b) = battery.iter().find(|b| !b.inside_triangle()) {
        return Err(TdError::InvalidParameter(format!("bump {} leaves the triangle", b.name)));
    }
    battery.par_iter().map(|b| residual_one(inst, b)).collect()
}

fn residual_one(inst: &DensityInstance, bump: &Bump) -> Result<f64> {
    let cfg = &inst.cfg;
    let opts = QuadOptions::new(cfg.quad_tol, 0.0).max_segments(4000);
    let mut failure = None;
    let q = integrate_2d(
        |x1, x2| {
            let p = Point::new(x1, x2);
            let eval = || -> Result<[f64; 2]> {
                let r = point_to_ray(p, cfg)?;
                let s = sigma(r, inst)?;
                let (e1, e2) = unit_ray_direction(r.a, cfg);
                let (g1, g2) = bump.gradient(p);
                // ∇u = −e along the ray.
                let flux = -s * (e1 * g1 + e2 * g2);
                Ok([flux, bump.value(p) * ray_net_source(r.t, r.a, cfg)?])
            };
            match eval() {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 2]
                }
            }
        },
        &bump.x_breaks(),
        |_| bump.y_breaks(),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let [lhs, rhs] = q.checked(&opts)?;
    Ok((lhs - rhs).abs())
}

/// Result of the eikonal audit on `u`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientAudit {
    /// `max (|∇u| − 1)` over all samples.
    pub lipschitz_excess: f64,
    /// `max ||∇u| − 1|` over samples where `σ > 1e-6`.
    pub saturation_defect: f64,
    pub samples: usize,
}

/// Finite-difference audit of `|∇u| <= 1` everywhere and `|∇u| = 1` where `σ > 0`.
pub fn gradient_constraints_audit(inst: &DensityInstance, samples: usize) -> Result<GradientAudit> {
    if samples < 10_000 {
        return Err(TdError::InvalidParameter(format!("audit needs at least 10^4 samples, got {samples}")));
    }
    let cfg = &inst.cfg;
    let h = 1e-5;
    let margin = 10.0 * h;
    let points: Vec<Point> = (1..=samples as u64)
        .map(|i| {
            let (u, v) = (halton(i, 2), halton(i, 3));
            let (u, v) = if v > u { (v, u) } else { (u, v) };
            Point::new(2.0 * u - 1.0, v)
        })
        .filter(|p| p.x2 > margin && p.x1 < 1.0 - margin && p.x2 < (p.x1 + 1.0) / 2.0 - margin)
        .collect();
    let per_point = points
        .par_iter()
        .map(|&p| -> Result<(f64, f64)> {
            let u = |x1: f64, x2: f64| potential_u(Point::new(x1, x2), cfg);
            let g1 = (u(p.x1 + h, p.x2)? - u(p.x1 - h, p.x2)?) / (2.0 * h);
            let g2 = (u(p.x1, p.x2 + h)? - u(p.x1, p.x2 - h)?) / (2.0 * h);
            let norm = g1.hypot(g2);
            let s = sigma(point_to_ray(p, cfg)?, inst)?;
            let defect = if s > 1e-6 { (norm - 1.0).abs() } else { 0.0 };
            Ok((norm - 1.0, defect))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GradientAudit {
        lipschitz_excess: per_point.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max),
        saturation_defect: per_point.iter().map(|x| x.1).fold(0.0, f64::max),
        samples: points.len(),
    })
}
