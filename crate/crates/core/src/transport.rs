//! Transport density `σ`, its derivatives, and the Kantorovich potential.
//!
//! Along ray `a`, with net source `f = f⁺ - f⁻` and area element `J`,
//!
//! ```text
//! σ(t, a) = l(a) / J(t, a) · ∫₀ᵗ f(τ, a) J(τ, a) dτ
//! ```
//!
//! The factor `a^(γ-1)` of `J` cancels, so every integral below is taken
//! against the reduced element `Ĵ = J / a^(γ-1)`. Differentiating,
//!
//! ```text
//! ∂tσ = l f(t) − (∂tJ / J) σ
//! ∂aσ = (∂a l / l) σ + l (γ/4)(1+a)² ∫₀ᵗ f (t−τ) dτ / Ĵ(t)² + l ∫₀ᵗ ∂a f Ĵ dτ / Ĵ(t)
//! ```
//!
//! where the middle term is `K1 − (∂aJ/J) σ` rewritten through the identity
//! `J(t)∂aJ(τ) − J(τ)∂aJ(t) = (γ/4)(1+a)²(t−τ)a^(2γ−2)`.

use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::densities::{ray_net_source, ray_net_source_jet, smooth_correction_c, DensityInstance, DensityKind, SmoothConfig};
use crate::error::{Result, TdError};
use crate::eta::eta_jet;
use crate::geometry::{
    point_to_ray, pow, ray_length, ray_length_log_derivative, ray_to_point, reduced_jacobian, Point, RayCoord,
};
use crate::numerics::{integrate, integrate_vec, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaEval {
    pub point: Point,
    pub ray: RayCoord,
    pub sigma: f64,
    pub dsigma_dt: f64,
    pub dsigma_da: f64,
    pub dsigma_dx1: f64,
    pub dsigma_dx2: f64,
    pub u: f64,
}

/// The pieces of `∂aσ` as they appear before simplification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaKernels {
    pub sigma: f64,
    pub log_length_term: f64,
    pub jacobian_term: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Net source along one ray, with anything that depends only on `a` hoisted.
enum RaySource<'a> {
    Triangle,
    Smooth { sc: &'a SmoothConfig, c: f64 },
}

impl<'a> RaySource<'a> {
    fn new(a: f64, inst: &'a DensityInstance) -> Result<Self> {
        Ok(match inst.kind {
            DensityKind::SingleTriangle | DensityKind::BvChain => RaySource::Triangle,
            DensityKind::SmoothPlane => {
                let sc = inst.smooth.as_ref().expect("smooth instance carries its cutoffs");
                RaySource::Smooth {
                    sc,
                    c: smooth_correction_c(a, sc, &inst.cfg)?,
                }
            }
        })
    }

    fn value(&self, tau: f64, a: f64, cfg: &GammaConfig) -> Result<f64> {
        match self {
            RaySource::Triangle => ray_net_source(tau, a, cfg),
            RaySource::Smooth { sc, c } => {
                let g = cfg.gamma;
                let p = ray_to_point(RayCoord::new(tau, a), cfg);
                let chi2 = sc.chi2(p.x1, p.x2, g);
                let mut v = sc.phi(p.x1) * c;
                if chi2 != 0.0 {
                    let e = eta_jet(p.x2.clamp(0.0, 1.0), cfg)?;
                    v += (sc.psi_zeta_second(p.x1) + e.eta2) * chi2;
                }
                Ok(-cfg.beta * v)
            }
        }
    }
}

fn require_derivatives(inst: &DensityInstance) -> Result<()> {
    if inst.kind == DensityKind::SmoothPlane {
        return Err(TdError::InvalidParameter(
            "derivatives of sigma are implemented for the triangle constructions only".into(),
        ));
    }
    Ok(())
}

fn check_ray(c: RayCoord) -> Result<()> {
    if (0.0..=1.0).contains(&c.t) && (0.0..=1.0).contains(&c.a) {
        Ok(())
    } else {
        Err(TdError::InvalidParameter(format!(
            "ray coordinates ({}, {}) outside [0,1]²",
            c.t, c.a
        )))
    }
}

fn sigma_options(cfg: &GammaConfig) -> QuadOptions {
    QuadOptions::new(cfg.quad_tol, 1e-12).max_segments(4000)
}

/// Breakpoints on `[0, t]` that resolve the `τ ~ a` transition near the origin.
fn tau_breaks(t: f64, a: f64) -> Vec<f64> {
    let mut v = vec![0.0];
    let mut s = (4.0 * a).min(0.5 * t);
    let mut inner = Vec::new();
    while s > 1e-12 * t.max(1e-300) && s < t && inner.len() < 40 {
        inner.push(s);
        s *= 0.125;
    }
    inner.reverse();
    v.extend(inner);
    v.push(t);
    v
}

/// `σ(t, a)`; on `a = 0` this is the one-sided limit along the ray.
pub fn sigma(c: RayCoord, inst: &DensityInstance) -> Result<f64> {
    check_ray(c)?;
    let cfg = &inst.cfg;
    let RayCoord { t, a } = c;
    if t == 0.0 {
        return Ok(0.0);
    }
    let g = cfg.gamma;
    let src = RaySource::new(a, inst)?;
    let jt = reduced_jacobian(t, a, g);
    let opts = sigma_options(cfg);
    let mut failure = None;
    let q = integrate_vec(
        |tau| match src.value(tau, a, cfg) {
            Ok(f) => [f * reduced_jacobian(tau, a, g) / jt],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        &tau_breaks(t, a),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(ray_length(a, cfg) * q.checked(&opts)?[0])
}

/// `σ` at a Cartesian point; chains evaluate in the containing triangle.
pub fn sigma_at_point(p: Point, inst: &DensityInstance) -> Result<f64> {
    match inst.kind {
        DensityKind::BvChain => {
            let chain = inst.chain.as_ref().expect("chain instance carries its chain");
            let (_, y1, y2) = chain
                .locate(p)
                .ok_or(TdError::OutOfDomain { x1: p.x1, x2: p.x2 })?;
            sigma(point_to_ray(Point::new(y1, y2.abs()), &inst.cfg)?, inst)
        }
        DensityKind::SmoothPlane => {
            let r = point_to_ray(Point::new(p.x1, p.x2.abs()), &inst.cfg)?;
            sigma(r, inst)
        }
        DensityKind::SingleTriangle => sigma(point_to_ray(p, &inst.cfg)?, inst),
    }
}

/// σ and all first derivatives at interior ray coordinates.
pub fn sigma_eval(c: RayCoord, inst: &DensityInstance) -> Result<SigmaEval> {
    require_derivatives(inst)?;
    check_ray(c)?;
    let cfg = &inst.cfg;
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    if a == 0.0 || t == 0.0 {
        return Err(TdError::SingularJacobian { t, a });
    }
    let jt = reduced_jacobian(t, a, g);
    let opts = sigma_options(cfg);
    let mut failure = None;
    let q = integrate_vec(
        |tau| match ray_net_source_jet(tau, a, cfg) {
            Ok((f, df)) => {
                let jr = reduced_jacobian(tau, a, g);
                [f * jr / jt, f * (t - tau) / (jt * jt), df * jr / jt]
            }
            Err(e) => {
                failure.get_or_insert(e);
                [0.0; 3]
            }
        },
        &tau_breaks(t, a),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let [i0, i1, i2] = q.checked(&opts)?;
    let (f_t, _) = ray_net_source_jet(t, a, cfg)?;
    Ok(assemble(c, cfg, f_t, i0, i1, i2))
}

/// Combine the reduced integrals into σ, its derivatives and `u`.
fn assemble(c: RayCoord, cfg: &GammaConfig, f_t: f64, i0: f64, i1: f64, i2: f64) -> SigmaEval {
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    let l = ray_length(a, cfg);
    let jt = reduced_jacobian(t, a, g);
    let sigma = l * i0;
    let ds_dt = l * f_t - g * (1.0 + a).powi(2) / (2.0 * jt) * sigma;
    let ds_da = ray_length_log_derivative(a, cfg) * sigma + l * g / 4.0 * (1.0 + a).powi(2) * i1 + l * i2;
    let (dx1, dx2) = cartesian_gradient(c, cfg, ds_dt, ds_da);
    SigmaEval {
        point: ray_to_point(c, cfg),
        ray: c,
        sigma,
        dsigma_dt: ds_dt,
        dsigma_da: ds_da,
        dsigma_dx1: dx1,
        dsigma_dx2: dx2,
        u: potential_from_ray(c, cfg).unwrap_or(f64::NAN),
    }
}

/// Chain rule through the inverse coordinate matrix.
fn cartesian_gradient(c: RayCoord, cfg: &GammaConfig, ds_dt: f64, ds_da: f64) -> (f64, f64) {
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    let jt = reduced_jacobian(t, a, g);
    let dx1 = ds_dt * (g * (1.0 + a) + a) * t / (2.0 * jt) - ds_da * (1.0 + a) * a / (2.0 * jt);
    let j = jt * pow(a, g - 1.0);
    let dx2 = (ds_dt * (1.0 - t) + ds_da * (1.0 + a)) / j;
    (dx1, dx2)
}

pub fn dsigma_dt(c: RayCoord, inst: &DensityInstance) -> Result<f64> {
    Ok(sigma_eval(c, inst)?.dsigma_dt)
}

pub fn dsigma_da(c: RayCoord, inst: &DensityInstance) -> Result<f64> {
    Ok(sigma_eval(c, inst)?.dsigma_da)
}

pub fn dsigma_dx2(c: RayCoord, inst: &DensityInstance) -> Result<f64> {
    Ok(sigma_eval(c, inst)?.dsigma_dx2)
}

/// `∂aσ` split into `(∂a l / l) σ`, `-(∂aJ/J) σ`, `K1`, `K2`, each integrated directly.
pub fn sigma_kernels(c: RayCoord, inst: &DensityInstance) -> Result<SigmaKernels> {
    require_derivatives(inst)?;
    check_ray(c)?;
    let cfg = &inst.cfg;
    let g = cfg.gamma;
    let RayCoord { t, a } = c;
    if a == 0.0 || t == 0.0 {
        return Err(TdError::SingularJacobian { t, a });
    }
    let jt = reduced_jacobian(t, a, g);
    // ∂aJ / a^(γ-1)
    let da_red = |tau: f64| (g * (g - 1.0) * (1.0 + a).powi(2) * tau / a + g * (1.0 + a) * (1.0 + 2.0 * tau) + a) / 2.0;
    let opts = sigma_options(cfg);
    let mut failure = None;
    let q = integrate_vec(
        |tau| match ray_net_source_jet(tau, a, cfg) {
            Ok((f, df)) => {
                let jr = reduced_jacobian(tau, a, g);
                [f * jr / jt, f * da_red(tau) / jt, df * jr / jt]
            }
            Err(e) => {
                failure.get_or_insert(e);
                [0.0; 3]
            }
        },
        &tau_breaks(t, a),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let [i0, i1, i2] = q.checked(&opts)?;
    let l = ray_length(a, cfg);
    let sigma = l * i0;
    Ok(SigmaKernels {
        sigma,
        log_length_term: ray_length_log_derivative(a, cfg) * sigma,
        jacobian_term: -da_red(t) / jt * sigma,
        k1: l * i1,
        k2: l * i2,
    })
}

/// `u0(a) = ∫₀ᵃ (1 + s^(2γ)/4)^(-1/2) ds`, the potential at the foot `(-a, 0)`.
pub fn potential_base(a: f64, cfg: &GammaConfig) -> Result<f64> {
    if a == 0.0 {
        return Ok(0.0);
    }
    let g = cfg.gamma;
    let opts = QuadOptions::new(1e-13, 1e-12);
    let q = integrate(|s| 1.0 / (1.0 + pow(s, 2.0 * g) / 4.0).sqrt(), 0.0, a, &opts);
    Ok(q.checked(&opts)?[0])
}

fn potential_from_ray(c: RayCoord, cfg: &GammaConfig) -> Result<f64> {
    Ok(potential_base(c.a, cfg)? - c.t * ray_length(c.a, cfg))
}

/// Kantorovich potential, normalised so that `u(0, 0) = 0`; decreases at unit
/// rate along every ray.
pub fn potential_u(p: Point, cfg: &GammaConfig) -> Result<f64> {
    potential_from_ray(point_to_ray(p, cfg)?, cfg)
}

/// Cumulative ray integrals at fixed `a`, for sweeps over many `t`.
///
/// Holds `∫₀^{t_k} [f Ĵ, f, τ f, ∂a f Ĵ] dτ` at panel ends `t_k`; a query at
/// `t` adds the integral over the partial panel.
pub struct RayProfile<'a> {
    inst: &'a DensityInstance,
    pub a: f64,
    knots: Vec<f64>,
    cumulative: Vec<[f64; 4]>,
    opts: QuadOptions,
}

impl<'a> RayProfile<'a> {
    pub fn new(a: f64, inst: &'a DensityInstance, abs_tol: f64) -> Result<Self> {
        require_derivatives(inst)?;
        if !(a > 0.0 && a <= 1.0) {
            return Err(TdError::InvalidParameter(format!("ray profile needs a in (0,1], got {a}")));
        }
        let mut knots = tau_breaks(1.0, a);
        // Uniform panels away from the origin.
        let last_small = knots[knots.len() - 2];
        knots.pop();
        let n_uniform = 16;
        for i in 1..=n_uniform {
            let v = i as f64 / n_uniform as f64;
            if v > last_small {
                knots.push(v);
            }
        }
        let opts = QuadOptions::new(abs_tol, 1e-12).max_segments(2000);
        let mut prof = RayProfile {
            inst,
            a,
            knots: knots.clone(),
            cumulative: vec![[0.0; 4]],
            opts,
        };
        let mut acc = [0.0; 4];
        for w in knots.windows(2) {
            let part = prof.panel(w[0], w[1])?;
            for k in 0..4 {
                acc[k] += part[k];
            }
            prof.cumulative.push(acc);
        }
        Ok(prof)
    }

    fn panel(&self, lo: f64, hi: f64) -> Result<[f64; 4]> {
        let cfg = &self.inst.cfg;
        let (a, g) = (self.a, cfg.gamma);
        let mut failure = None;
        let q = integrate_vec(
            |tau| match ray_net_source_jet(tau, a, cfg) {
                Ok((f, df)) => {
                    let jr = reduced_jacobian(tau, a, g);
                    [f * jr, f, tau * f, df * jr]
                }
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0; 4]
                }
            },
            &[lo, hi],
            &self.opts,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        q.checked(&self.opts)
    }

    /// Panel ends in `t`; natural breakpoints for integrals along the ray.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Cumulative integrals up to `t`.
    pub fn moments(&self, t: f64) -> Result<[f64; 4]> {
        let k = self.knots.partition_point(|&x| x <= t).saturating_sub(1);
        let mut m = self.cumulative[k];
        if t > self.knots[k] {
            let part = self.panel(self.knots[k], t)?;
            for i in 0..4 {
                m[i] += part[i];
            }
        }
        Ok(m)
    }

    pub fn eval(&self, t: f64) -> Result<SigmaEval> {
        let cfg = &self.inst.cfg;
        let a = self.a;
        if !(t > 0.0 && t <= 1.0) {
            return Err(TdError::SingularJacobian { t, a });
        }
        let jt = reduced_jacobian(t, a, cfg.gamma);
        let [fj, s0, s1, dfj] = self.moments(t)?;
        let (f_t, _) = ray_net_source_jet(t, a, cfg)?;
        Ok(assemble(
            RayCoord::new(t, a),
            cfg,
            f_t,
            fj / jt,
            (t * s0 - s1) / (jt * jt),
            dfj / jt,
        ))
    }

    /// `|∇σ| J` at `t`, computed without dividing by `J`.
    pub fn weighted_gradient_norm(&self, t: f64) -> Result<f64> {
        let e = self.eval(t)?;
        let cfg = &self.inst.cfg;
        let j = reduced_jacobian(t, self.a, cfg.gamma) * pow(self.a, cfg.gamma - 1.0);
        let jx2 = e.dsigma_dt * (1.0 - t) + e.dsigma_da * (1.0 + self.a);
        Ok((e.dsigma_dx1 * j).hypot(jx2))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densities::zeta_jet;
    use crate::geometry::{jacobian, jacobian_da};
    use crate::numerics::halton;

    fn inst(g: f64) -> DensityInstance {
        DensityInstance::single(GammaConfig::new(g).unwrap())
    }

    /// `∫₀ᵗ f Ĵ dτ` from η and η' only (no η'').
    fn flux_closed_form(t: f64, a: f64, cfg: &GammaConfig) -> f64 {
        let g = cfg.gamma;
        let x1 = -a + (1.0 + a) * t;
        let prim = |x: f64| {
            let z = zeta_jet(x);
            ((g * (x + a) + a) * z[1] - g * z[0]) / 2.0
        };
        let zeta_part = prim(x1) - prim(-a);
        let c = (1.0 + a) * a.powf(g) / 2.0;
        let e = eta_jet(c * t, cfg).unwrap();
        let (a0, a1) = ((1.0 + a) * a / 2.0, g * (1.0 + a).powi(2) / 2.0);
        let eta_part = a0 * e.eta1 / c + a1 * (t * e.eta1 / c - e.eta0 / (c * c));
        -cfg.beta * (zeta_part + eta_part)
    }

    #[test]
    fn sigma_matches_closed_form_flux() {
        for g in [0.5, 1.0, 2.0, 4.0] {
            let i = inst(g);
            for (t, a) in [(0.5, 0.5), (0.1, 0.9), (0.9, 0.05)] {
                let s = sigma(RayCoord::new(t, a), &i).unwrap();
                let l = ray_length(a, &i.cfg);
                let oracle = l * flux_closed_form(t, a, &i.cfg) / reduced_jacobian(t, a, g);
                assert!((s - oracle).abs() < 1e-10, "gamma {g} ({t},{a}): {s} vs {oracle}");
            }
        }
    }

    #[test]
    fn sigma_vanishes_at_ray_end() {
        for g in [1.0, 2.0] {
            let i = inst(g);
            for k in 1..=10 {
                let a = k as f64 / 10.0;
                let s = sigma(RayCoord::new(1.0 - 1e-9, a), &i).unwrap();
                assert!(s.abs() <= 10.0 * i.cfg.quad_tol, "gamma {g} a {a}: {s:e}");
            }
        }
    }

    #[test]
    fn sigma_at_point_is_composition() {
        let i = inst(1.0);
        let c = RayCoord::new(0.5, 0.5);
        let p = ray_to_point(c, &i.cfg);
        let back = point_to_ray(p, &i.cfg).unwrap();
        assert_eq!(sigma_at_point(p, &i).unwrap(), sigma(back, &i).unwrap());
        assert!((sigma_at_point(p, &i).unwrap() - sigma(c, &i).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn eval_agrees_with_sigma() {
        let i = inst(2.0);
        let c = RayCoord::new(0.3, 0.4);
        let e = sigma_eval(c, &i).unwrap();
        assert!((e.sigma - sigma(c, &i).unwrap()).abs() < 1e-12);
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-12)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for g in [1.0, 2.0] {
            let i = inst(g);
            let (t, a) = (0.3, 0.4);
            let e = sigma_eval(RayCoord::new(t, a), &i).unwrap();
            let h = 1e-5;
            let s = |t, a| sigma(RayCoord::new(t, a), &i).unwrap();
            let fd_t = (s(t + h, a) - s(t - h, a)) / (2.0 * h);
            let fd_a = (s(t, a + h) - s(t, a - h)) / (2.0 * h);
            assert!(rel(fd_t, e.dsigma_dt) < 1e-4, "gamma {g}: {fd_t} vs {}", e.dsigma_dt);
            assert!(rel(fd_a, e.dsigma_da) < 1e-3, "gamma {g}: {fd_a} vs {}", e.dsigma_da);
        }
    }

    #[test]
    fn cartesian_derivative_matches_fd() {
        let i = inst(1.0);
        let p = Point::new(0.2, 0.1);
        let r = point_to_ray(p, &i.cfg).unwrap();
        let e = sigma_eval(r, &i).unwrap();
        let h = 1e-6;
        let fd2 = (sigma_at_point(Point::new(p.x1, p.x2 + h), &i).unwrap()
            - sigma_at_point(Point::new(p.x1, p.x2 - h), &i).unwrap())
            / (2.0 * h);
        let fd1 = (sigma_at_point(Point::new(p.x1 + h, p.x2), &i).unwrap()
            - sigma_at_point(Point::new(p.x1 - h, p.x2), &i).unwrap())
            / (2.0 * h);
        assert!(rel(fd2, e.dsigma_dx2) < 1e-3, "{fd2} vs {}", e.dsigma_dx2);
        assert!(rel(fd1, e.dsigma_dx1) < 1e-3, "{fd1} vs {}", e.dsigma_dx1);
    }

    #[test]
    fn kernels_recombine() {
        for g in [0.5, 1.0, 2.0, 3.0] {
            let i = inst(g);
            for k in 1..20u64 {
                let c = RayCoord::new(0.05 + 0.9 * halton(k, 2), 0.05 + 0.9 * halton(k, 3));
                let e = sigma_eval(c, &i).unwrap();
                let kern = sigma_kernels(c, &i).unwrap();
                let total = kern.log_length_term + kern.jacobian_term + kern.k1 + kern.k2;
                assert!((total - e.dsigma_da).abs() < 1e-9 * (1.0 + e.dsigma_da.abs()), "gamma {g}");
            }
        }
    }

    #[test]
    fn jacobian_kernel_identity() {
        // ∫₀ᵗ f [J(t)∂aJ(τ) − J(τ)∂aJ(t)] dτ / J(t)² against the antisymmetric form.
        let i = inst(2.0);
        let cfg = &i.cfg;
        let (t, a) = (0.6, 0.3);
        let jt = jacobian(RayCoord::new(t, a), cfg).unwrap();
        let djt = jacobian_da(RayCoord::new(t, a), cfg).unwrap();
        let o = QuadOptions::new(1e-14, 1e-13);
        let lhs = integrate(
            |tau| {
                let r = RayCoord::new(tau, a);
                let f = ray_net_source(tau, a, cfg).unwrap();
                f * (jt * jacobian_da(r, cfg).unwrap() - jacobian(r, cfg).unwrap() * djt)
            },
            0.0,
            t,
            &o,
        )
        .scalar()
            / (jt * jt);
        let kern = sigma_kernels(RayCoord::new(t, a), &i).unwrap();
        let l = ray_length(a, cfg);
        assert!((l * lhs - (kern.k1 + kern.jacobian_term)).abs() < 1e-10);
    }

    #[test]
    fn dt_jacobian_identity() {
        // ∫₀ᵗ ∂tJ · J dτ / J² = (1 - a²/(γ(1+a)t + a)²) / 2
        for g in [0.5, 1.0, 3.0] {
            let cfg = GammaConfig::new(g).unwrap();
            for (t, a) in [(0.3, 0.2), (0.9, 0.7)] {
                let jt = jacobian(RayCoord::new(t, a), &cfg).unwrap();
                let dtj = crate::geometry::jacobian_dt(RayCoord::new(t, a), &cfg).unwrap();
                let o = QuadOptions::new(1e-15, 1e-14);
                let q = integrate(|s| dtj * jacobian(RayCoord::new(s, a), &cfg).unwrap(), 0.0, t, &o);
                let lhs = q.scalar() / (jt * jt);
                let rhs = 0.5 * (1.0 - a * a / (g * (1.0 + a) * t + a).powi(2));
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_matches_direct_evaluation() {
        let i = inst(2.0);
        let a = 0.05;
        let prof = RayProfile::new(a, &i, 1e-13).unwrap();
        for t in [0.01, 0.3, 0.77, 1.0] {
            let e = prof.eval(t).unwrap();
            let d = sigma_eval(RayCoord::new(t, a), &i).unwrap();
            assert!((e.sigma - d.sigma).abs() < 1e-10);
            assert!((e.dsigma_da - d.dsigma_da).abs() < 1e-8 * (1.0 + d.dsigma_da.abs()));
            assert!((e.dsigma_dx2 - d.dsigma_dx2).abs() < 1e-8 * (1.0 + d.dsigma_dx2.abs()));
        }
    }

    #[test]
    fn potential_values_and_lipschitz() {
        let cfg = GammaConfig::new(1.0).unwrap();
        assert_eq!(potential_u(Point::new(0.0, 0.0), &cfg).unwrap(), 0.0);
        assert!((potential_u(Point::new(1.0, 0.0), &cfg).unwrap() + 1.0).abs() < 1e-15);
        let pt = |i: u64| {
            let (u, v) = (halton(i, 2), halton(i, 3));
            let (u, v) = if v > u { (v, u) } else { (u, v) };
            Point::new(2.0 * u - 1.0, v)
        };
        for i in 1..2000u64 {
            let (p, q) = (pt(i), pt(i + 7919));
            let d = (potential_u(p, &cfg).unwrap() - potential_u(q, &cfg).unwrap()).abs();
            assert!(d <= p.dist(&q) * (1.0 + 1e-8) + 1e-15);
        }
        // Unit rate along a ray.
        let a = 0.6;
        let p = ray_to_point(RayCoord::new(0.2, a), &cfg);
        let q = ray_to_point(RayCoord::new(0.7, a), &cfg);
        let d = potential_u(p, &cfg).unwrap() - potential_u(q, &cfg).unwrap();
        assert!((d - p.dist(&q)).abs() < 1e-9);
    }

    #[test]
    fn smooth_instance_sigma_but_no_derivatives() {
        let cfg = GammaConfig::new(3.0).unwrap();
        let i = DensityInstance::smooth(cfg, SmoothConfig::default()).unwrap();
        let s = sigma(RayCoord::new(0.5, 0.3), &i).unwrap();
        assert!(s.is_finite());
        // Balanced rays: σ vanishes at the end.
        assert!(sigma(RayCoord::new(1.0, 0.3), &i).unwrap().abs() < 1e-9);
        assert!(sigma_eval(RayCoord::new(0.5, 0.3), &i).is_err());
    }
}
