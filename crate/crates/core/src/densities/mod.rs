//! Source and target densities for the three constructions: the single
//! triangle, the chain of shrinking triangles, and the smooth compactly
//! supported variant.
//!
//! In the single triangle `f⁺ = 1` and `f⁻ = 1 + β(ζ''(x1) + η''(x2))`, with
//! `ζ(x) = -x²(x-1)²`. The pair is balanced below every ray, which is what
//! forces the rays to be the transport geometry.

pub mod chain;
pub mod smooth;

use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::error::{Result, TdError};
use crate::eta::{eta_jet, eta_jet_even};
use crate::geometry::{in_domain, pow, Point, DOMAIN_TOL};
use crate::numerics::{integrate_2d, integrate_vec, log_space, QuadOptions};

pub use chain::{build_chain, TriangleChain};
pub use smooth::{smooth_correction_c, smooth_correction_dc, SmoothConfig};

/// `max |ζ''|` on `[-1, 1]`, attained at `x = -1`.
pub const ZETA2_MAX: f64 = 26.0;

/// `(ζ, ζ', ζ'', ζ''')` at `x`.
pub fn zeta_jet(x: f64) -> [f64; 4] {
    let x2 = x * x;
    [
        -(x2 * x2 - 2.0 * x2 * x + x2),
        -(4.0 * x2 * x - 6.0 * x2 + 2.0 * x),
        -(12.0 * x2 - 12.0 * x + 2.0),
        -(24.0 * x - 12.0),
    ]
}

/// Sampled `max |η''|` on `(0, 1]`.
pub fn eta_second_max(cfg: &GammaConfig) -> f64 {
    let mut grid = log_space(1e-8, 1.0, 400);
    grid.extend((1..=400).map(|i| i as f64 / 400.0));
    grid.into_iter()
        .filter_map(|s| eta_jet(s, cfg).ok())
        .map(|j| j.eta2.abs())
        .fold(0.0, f64::max)
}

/// `β = 1 / (2 (26 + max|η''|))`, which keeps `f⁻ >= 1/2`.
pub fn choose_beta(cfg: &GammaConfig) -> f64 {
    1.0 / (2.0 * (ZETA2_MAX + eta_second_max(cfg)))
}

/// `-∫_{Δ_a} ζ''`, in closed form.
pub fn zeta_mass_closed_form(a: f64, gamma: f64) -> f64 {
    pow(a, gamma + 2.0) * (1.0 + a).powi(2) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    SingleTriangle,
    BvChain,
    SmoothPlane,
}

#[derive(Debug, Clone)]
pub struct DensityInstance {
    pub cfg: GammaConfig,
    pub kind: DensityKind,
    pub chain: Option<TriangleChain>,
    pub smooth: Option<SmoothConfig>,
}

/// Serializable description of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub kind: DensityKind,
    pub gamma: f64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
}

impl DensityInstance {
    pub fn single(cfg: GammaConfig) -> Self {
        DensityInstance {
            cfg,
            kind: DensityKind::SingleTriangle,
            chain: None,
            smooth: None,
        }
    }

    pub fn chain(cfg: GammaConfig, n_max: usize) -> Result<Self> {
        Ok(DensityInstance {
            cfg,
            kind: DensityKind::BvChain,
            chain: Some(build_chain(&cfg, n_max)?),
            smooth: None,
        })
    }

    pub fn smooth(cfg: GammaConfig, sc: SmoothConfig) -> Result<Self> {
        sc.validate(cfg.gamma)?;
        Ok(DensityInstance {
            cfg,
            kind: DensityKind::SmoothPlane,
            chain: None,
            smooth: Some(sc),
        })
    }

    pub fn to_doc(&self) -> InstanceDoc {
        InstanceDoc {
            kind: self.kind,
            gamma: self.cfg.gamma,
            beta: self.cfg.beta,
            n_max: self.chain.as_ref().map(|c| c.n_max),
            eps: self.smooth.as_ref().map(|s| s.eps),
            eps_prime: self.smooth.as_ref().map(|s| s.eps_prime),
            a0: self.smooth.as_ref().map(|s| s.a0),
        }
    }

    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        let cfg = GammaConfig::with_beta(doc.gamma, doc.beta)?;
        match doc.kind {
            DensityKind::SingleTriangle => Ok(Self::single(cfg)),
            DensityKind::BvChain => Self::chain(
                cfg,
                doc.n_max
                    .ok_or_else(|| TdError::InvalidParameter("bv_chain needs n_max".into()))?,
            ),
            DensityKind::SmoothPlane => {
                let d = SmoothConfig::default();
                let sc = SmoothConfig::new(
                    doc.eps.unwrap_or(d.eps),
                    doc.eps_prime.unwrap_or(d.eps_prime),
                    doc.a0.unwrap_or(d.a0),
                )?;
                Self::smooth(cfg, sc)
            }
        }
    }

    fn chain_ref(&self) -> &TriangleChain {
        self.chain.as_ref().expect("chain instance carries its chain")
    }

    fn smooth_ref(&self) -> &SmoothConfig {
        self.smooth.as_ref().expect("smooth instance carries its cutoffs")
    }

    pub fn f_plus(&self, p: Point) -> Result<f64> {
        Ok(match self.kind {
            DensityKind::SingleTriangle => {
                if in_domain(p, DOMAIN_TOL) && p.x1 >= -1.0 - DOMAIN_TOL {
                    1.0
                } else {
                    0.0
                }
            }
            DensityKind::BvChain => {
                if self.chain_ref().locate(p).is_some() {
                    1.0
                } else {
                    0.0
                }
            }
            DensityKind::SmoothPlane => self.smooth_ref().chi1(p.x1, p.x2, self.cfg.gamma),
        })
    }

    pub fn f_minus(&self, p: Point) -> Result<f64> {
        let cfg = &self.cfg;
        match self.kind {
            DensityKind::SingleTriangle => {
                if !(in_domain(p, DOMAIN_TOL) && p.x1 >= -1.0 - DOMAIN_TOL) {
                    return Ok(0.0);
                }
                triangle_target(p.x1.clamp(-1.0, 1.0), p.x2.max(0.0), cfg)
            }
            DensityKind::BvChain => match self.chain_ref().locate(p) {
                Some((n, y1, y2)) => {
                    let l = self.chain_ref().l[n];
                    triangle_target(y1.clamp(-l, 1.0), y2, cfg)
                }
                None => Ok(0.0),
            },
            DensityKind::SmoothPlane => self.smooth_ref().f_minus(p, cfg),
        }
    }

    /// `f⁺ - f⁻`, the net source.
    pub fn net_source(&self, p: Point) -> Result<f64> {
        Ok(self.f_plus(p)? - self.f_minus(p)?)
    }
}

/// `1 + β(ζ''(x1) + η''(|x2|))`.
pub fn triangle_target(x1: f64, x2: f64, cfg: &GammaConfig) -> Result<f64> {
    let e = eta_jet_even(x2, cfg)?;
    Ok(1.0 + cfg.beta * (zeta_jet(x1)[2] + e.eta2))
}

/// Net source `f⁺ - f⁻ = -β(ζ''(x1) + η''(x2))` at ray coordinates `(τ, a)`.
pub fn ray_net_source(tau: f64, a: f64, cfg: &GammaConfig) -> Result<f64> {
    let x1 = -a + (1.0 + a) * tau;
    let x2 = (1.0 + a) * tau * pow(a, cfg.gamma) / 2.0;
    let e = eta_jet(x2.clamp(0.0, 1.0), cfg)?;
    Ok(-cfg.beta * (zeta_jet(x1)[2] + e.eta2))
}

/// `(f, ∂f/∂a)` of the net source along ray `a`, at fixed `τ`.
pub fn ray_net_source_jet(tau: f64, a: f64, cfg: &GammaConfig) -> Result<(f64, f64)> {
    let g = cfg.gamma;
    let x1 = -a + (1.0 + a) * tau;
    let ag1 = pow(a, g - 1.0);
    let x2 = (1.0 + a) * tau * ag1 * a / 2.0;
    let z = zeta_jet(x1);
    let e = eta_jet(x2.clamp(0.0, 1.0), cfg)?;
    let f = -cfg.beta * (z[2] + e.eta2);
    // ∂x2/∂a = τ a^(γ-1) (γ(1+a) + a) / 2
    let dx2 = tau * ag1 * (g * (1.0 + a) + a) / 2.0;
    let eta_part = if dx2 == 0.0 { 0.0 } else { e.eta3 * dx2 };
    let df = -cfg.beta * (z[3] * (tau - 1.0) + eta_part);
    Ok((f, df))
}

fn region_options(cfg: &GammaConfig) -> QuadOptions {
    QuadOptions::new(cfg.quad_tol.min(1e-12), 1e-12).max_segments(2000)
}

/// `∫_{Δ_a} (f⁺ - f⁻)` over the region below ray `a`, by 2D quadrature.
///
/// Chains are balanced triangle by triangle; see
/// [`chain_mass_balance_residual`].
pub fn mass_balance_residual(a: f64, inst: &DensityInstance) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(TdError::InvalidParameter(format!("mass balance needs a in (0, 1], got {a}")));
    }
    let g = inst.cfg.gamma;
    let opts = region_options(&inst.cfg);
    let upper = move |x1: f64| pow(a, g) / 2.0 * (x1 + a);
    let mut x_breaks = vec![-a];
    if let Some(sc) = &inst.smooth {
        x_breaks.extend(sc.x1_breaks().into_iter().filter(|&b| b > -a && b < 1.0));
    }
    x_breaks.push(1.0);
    x_breaks.sort_by(f64::total_cmp);
    let mut failure = None;
    let q = integrate_2d(
        |x1, x2| match inst.net_source(Point::new(x1, x2)) {
            Ok(v) => [v],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        &x_breaks,
        |x1| {
            let top = upper(x1);
            match &inst.smooth {
                Some(sc) => sc.x2_breaks(x1, top, g),
                None => vec![0.0, top],
            }
        },
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

/// Residual on triangle `n` (0-based) of a chain, over the part of it whose
/// local ray label is at most `a` (both halves).
pub fn chain_mass_balance_residual(inst: &DensityInstance, n: usize, a: f64) -> Result<f64> {
    let chain = inst
        .chain
        .as_ref()
        .ok_or_else(|| TdError::InvalidParameter("instance is not a chain".into()))?;
    let ln = *chain
        .l
        .get(n)
        .ok_or_else(|| TdError::InvalidParameter(format!("chain has no triangle {n}")))?;
    if !(a > 0.0 && a <= ln) {
        return Err(TdError::InvalidParameter(format!("need a in (0, {ln}], got {a}")));
    }
    let g = inst.cfg.gamma;
    let opts = region_options(&inst.cfg);
    let mut failure = None;
    let q = integrate_2d(
        |y1, y2| {
            let p = chain.to_global(n, y1, y2);
            match inst.net_source(p) {
                Ok(v) => [v],
                Err(e) => {
                    failure.get_or_insert(e);
                    [0.0]
                }
            }
        },
        &[-a, 1.0],
        |y1| {
            let top = pow(a, g) / 2.0 * (y1 + a);
            vec![-top, 0.0, top]
        },
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

/// `∫₀¹ (f⁺ - f⁻)(X(τ, a)) J(τ, a) dτ / a^(γ-1)`, which vanishes on every ray.
pub fn per_ray_balance(a: f64, cfg: &GammaConfig) -> Result<f64> {
    let g = cfg.gamma;
    let opts = QuadOptions::new(1e-13, 1e-13);
    let mut failure = None;
    let q = integrate_vec(
        |tau| match ray_net_source(tau, a, cfg) {
            Ok(f) => [f * (1.0 + a) * (g * (1.0 + a) * tau + a) / 2.0],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        &[0.0, 1.0],
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}
