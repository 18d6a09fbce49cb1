//! Primal cost of the ray-by-ray monotone plan against the dual value of `u`.
//!
//! Zero gap certifies that the plan and the potential are jointly optimal.

use serde::{Deserialize, Serialize};

use crate::densities::{ray_net_source, triangle_target, DensityInstance, DensityKind};
use crate::error::{Result, TdError};
use crate::geometry::{point_to_ray, pow, ray_length, ray_to_point, reduced_jacobian, Point, RayCoord};
use crate::numerics::quadrature::gk15;
use crate::numerics::{integrate_2d, integrate_vec, QuadOptions};
use crate::transport::potential_u;

/// Nodes per ray for the piecewise-linear CDFs.
pub const RAY_NODES: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualityCertificate {
    pub primal_cost: f64,
    pub dual_value: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

fn require_single(inst: &DensityInstance) -> Result<()> {
    if inst.kind == DensityKind::SingleTriangle {
        Ok(())
    } else {
        Err(TdError::InvalidParameter("duality certificate is implemented for the single triangle".into()))
    }
}

/// Cumulative reduced masses of `f⁺` and `f⁻` along ray `a` at `t = i / RAY_NODES`.
fn ray_cdfs(a: f64, inst: &DensityInstance) -> Result<(Vec<f64>, Vec<f64>)> {
    let cfg = &inst.cfg;
    let g = cfg.gamma;
    let n = RAY_NODES;
    let mut p = Vec::with_capacity(n + 1);
    let mut q = Vec::with_capacity(n + 1);
    p.push(0.0);
    q.push(0.0);
    let mut failure = None;
    let mut f = |t: f64| {
        let j = reduced_jacobian(t, a, g);
        let x = ray_to_point(RayCoord::new(t, a), cfg);
        match triangle_target(x.x1.clamp(-1.0, 1.0), x.x2.max(0.0), cfg) {
            Ok(target) => [j, target * j],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0; 2]
            }
        }
    };
    let (mut sp, mut sq) = (0.0, 0.0);
    for i in 0..n {
        let (v, _) = gk15(&mut f, i as f64 / n as f64, (i + 1) as f64 / n as f64);
        sp += v[0];
        sq += v[1];
        p.push(sp);
        q.push(sq);
    }
    if let Some(e) = failure {
        return Err(e);
    }
    Ok((p, q))
}

/// `∫ |P(t) − Q(t)| dt` for piecewise-linear `P`, `Q` on a uniform grid.
///
/// For monotone `P` and `Q` this is the area between the graphs, which equals
/// `∫ |P⁻¹(m) − Q⁻¹(m)| dm`, the cost of the monotone rearrangement.
fn area_between(p: &[f64], q: &[f64]) -> f64 {
    let h = 1.0 / (p.len() - 1) as f64;
    let mut area = 0.0;
    for i in 0..p.len() - 1 {
        let (d0, d1) = (p[i] - q[i], p[i + 1] - q[i + 1]);
        area += if d0 * d1 >= 0.0 {
            0.5 * h * (d0.abs() + d1.abs())
        } else {
            0.5 * h * (d0 * d0 + d1 * d1) / (d0.abs() + d1.abs())
        };
    }
    area
}

/// Cost of moving `f⁺` onto `f⁻` by the monotone rearrangement on each ray.
pub fn ray_plan_cost(a: f64, inst: &DensityInstance) -> Result<f64> {
    let (p, q) = ray_cdfs(a, inst)?;
    let cfg = &inst.cfg;
    Ok(ray_length(a, cfg) * pow(a, cfg.gamma - 1.0) * area_between(&p, &q))
}

fn a_breaks() -> Vec<f64> {
    let mut b: Vec<f64> = (0..=30).rev().map(|k| 0.5f64.powi(k)).collect();
    b.insert(0, 0.0);
    b
}

/// Monge cost `∫∫ |t − T_a(t)| l(a) f⁺ J dt da` of the ray-wise monotone plan.
pub fn monotone_ray_plan_cost(inst: &DensityInstance) -> Result<f64> {
    require_single(inst)?;
    let opts = QuadOptions::new(inst.cfg.quad_tol, 1e-10).max_segments(1000);
    let mut failure = None;
    let q = integrate_vec(
        |a| match ray_plan_cost(a, inst) {
            Ok(c) => [c],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        &a_breaks(),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

/// `∫_Δ u (f⁺ − f⁻)` by Cartesian quadrature.
pub fn dual_objective(inst: &DensityInstance) -> Result<f64> {
    require_single(inst)?;
    let cfg = &inst.cfg;
    if cfg.beta == 0.0 {
        return Ok(0.0);
    }
    let opts = QuadOptions::new(cfg.quad_tol, 1e-12).max_segments(4000);
    let mut failure = None;
    let q = integrate_2d(
        |x1, x2| {
            let p = Point::new(x1, x2);
            let eval = || -> Result<f64> {
                let r = point_to_ray(p, cfg)?;
                Ok(potential_u(p, cfg)? * ray_net_source(r.t, r.a, cfg)?)
            };
            match eval() {
                Ok(v) => [v],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0]
                }
            }
        },
        &[-1.0, -0.5, 0.0, 0.5, 1.0],
        |x1| {
            let top = (x1 + 1.0) / 2.0;
            let mut ys = vec![0.0];
            ys.extend((1..=20).rev().map(|k| top * 0.5f64.powi(k)));
            ys.push(top);
            ys
        },
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

pub fn duality_gap(inst: &DensityInstance) -> Result<DualityCertificate> {
    let primal = monotone_ray_plan_cost(inst)?;
    let dual = dual_objective(inst)?;
    let gap = primal - dual;
    Ok(DualityCertificate {
        primal_cost: primal,
        dual_value: dual,
        gap,
        relative_gap: if primal == 0.0 { gap.abs() } else { gap.abs() / primal },
    })
}

/// Fraction of the primal cost carried where the ray flux runs backwards;
/// the duality gap is twice this flux-weighted cost.
pub fn backward_flux_cost(inst: &DensityInstance) -> Result<f64> {
    require_single(inst)?;
    let cfg = inst.cfg;
    let opts = QuadOptions::new(cfg.quad_tol, 1e-10).max_segments(1000);
    let mut failure = None;
    let q = integrate_vec(
        |a| {
            let eval = || -> Result<f64> {
                let (p, q) = ray_cdfs(a, inst)?;
                let neg: Vec<f64> = p.iter().zip(&q).map(|(p, q)| (q - p).max(0.0)).collect();
                let zero = vec![0.0; neg.len()];
                Ok(ray_length(a, &cfg) * pow(a, cfg.gamma - 1.0) * area_between(&neg, &zero))
            };
            match eval() {
                Ok(v) => [v],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0]
                }
            }
        },
        &a_breaks(),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::GammaConfig;

    #[test]
    fn area_between_crossing_lines() {
        // P − Q = 2t − 1 on [0, 1]: area 1/2.
        let n = 8;
        let p: Vec<f64> = (0..=n).map(|i| 2.0 * i as f64 / n as f64).collect();
        let q: Vec<f64> = vec![1.0; n + 1];
        assert!((area_between(&p, &q) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_amplitude_has_zero_cost_and_gap() {
        let inst = DensityInstance::single(GammaConfig::with_beta(1.0, 0.0).unwrap());
        assert_eq!(ray_plan_cost(0.5, &inst).unwrap(), 0.0);
        let c = duality_gap(&inst).unwrap();
        assert_eq!(c.primal_cost, 0.0);
        assert_eq!(c.gap, 0.0);
    }

    #[test]
    fn ray_cdfs_balance() {
        let inst = DensityInstance::single(GammaConfig::new(2.0).unwrap());
        for a in [0.01, 0.3, 0.9] {
            let (p, q) = ray_cdfs(a, &inst).unwrap();
            assert!((p[RAY_NODES] - q[RAY_NODES]).abs() < 1e-13);
            assert!(ray_plan_cost(a, &inst).unwrap() > 0.0);
        }
    }

    #[test]
    fn ray_cost_matches_flux_integral() {
        // On one ray the monotone cost is l a^{γ−1} ∫ |∫₀ᵗ f Ĵ| dt.
        let inst = DensityInstance::single(GammaConfig::new(1.0).unwrap());
        let cfg = &inst.cfg;
        let a = 0.4;
        let o = QuadOptions::new(1e-13, 1e-12);
        let flux = |t: f64| {
            crate::numerics::integrate(|s| ray_net_source(s, a, cfg).unwrap() * reduced_jacobian(s, a, 1.0), 0.0, t, &o).scalar()
        };
        let direct = crate::numerics::integrate(|t| flux(t).abs(), 0.0, 1.0, &QuadOptions::new(1e-11, 1e-9)).scalar()
            * ray_length(a, cfg);
        let c = ray_plan_cost(a, &inst).unwrap();
        assert!((c - direct).abs() < 1e-6 * direct, "{c} vs {direct}");
    }
}
