//! Smooth compactly supported variant on `Δ ∪ R(Δ)`.
//!
//! `f⁺ = χ1` and `f⁻ = χ1 + β(((ψζ)''(x1) + η''(|x2|)) χ2 + φ(x1) c(a))`.
//! All cutoffs are built from the quintic smoothstep `S(u) = 6u⁵ - 15u⁴ + 10u³`
//! (C² with vanishing first and second derivatives at both ends):
//!
//! * `ψ(x) = 1 - S((x - (1-ε')) / (ε' - ε))`
//! * `φ(x) = 64 u³ (1-u)³` for `u = (x - (1-ε')) / (ε' - ε) ∈ (0, 1)`
//! * `χ2 = P2(x1) Q(|x2| / L2)`, `L2 = (ε^γ/2)(x1 + (ε + a0)/2)`;
//!   `P2` rises on `[-ε - 3(a0-ε)/8, -ε]` and falls on `[1-ε, 1-ε/2]`
//! * `χ1 = P1(x1) Q(|x2| / L1)`, `L1 = (a0^γ/2)(x1 + (a0 + 1)/2)`;
//!   `P1` rises on `[-a0 - 3(1-a0)/8, -a0]` and falls on `[1-ε/2, 1]`
//! * `Q(u) = 1 - S(u - 1)`: one below `u = 1`, zero above `u = 2`.
//!
//! The correction `c(a)` restores the balance below every ray.

use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::densities::zeta_jet;
use crate::error::{Result, TdError};
use crate::eta::{eta_jet, eta_jet_even};
use crate::geometry::{point_to_ray, pow, Point};
use crate::numerics::{integrate_vec, QuadOptions};

fn smoothstep(u: f64) -> [f64; 3] {
    if u <= 0.0 {
        [0.0; 3]
    } else if u >= 1.0 {
        [1.0, 0.0, 0.0]
    } else {
        let u2 = u * u;
        [
            u2 * u * (10.0 - 15.0 * u + 6.0 * u2),
            30.0 * u2 * (1.0 - u) * (1.0 - u),
            60.0 * u * (1.0 - u) * (1.0 - 2.0 * u),
        ]
    }
}

/// Plateau profile: rises on `[r0, r1]`, equals one up to `d0`, falls to zero at `d1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub r0: f64,
    pub r1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Plateau {
    fn value(&self, x: f64) -> f64 {
        let up = smoothstep((x - self.r0) / (self.r1 - self.r0))[0];
        let down = 1.0 - smoothstep((x - self.d0) / (self.d1 - self.d0))[0];
        up * down
    }
}

fn q_profile(u: f64) -> [f64; 2] {
    let s = smoothstep(u - 1.0);
    [1.0 - s[0], -s[1]]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothConfig {
    pub eps: f64,
    pub eps_prime: f64,
    pub a0: f64,
}

impl Default for SmoothConfig {
    fn default() -> Self {
        SmoothConfig {
            eps: 0.1,
            eps_prime: 0.2,
            a0: 0.5,
        }
    }
}

/// Named cutoff with its breakpoints, for reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutoffProfile {
    pub name: String,
    pub breakpoints: Vec<f64>,
}

impl SmoothConfig {
    pub fn new(eps: f64, eps_prime: f64, a0: f64) -> Result<Self> {
        let sc = SmoothConfig { eps, eps_prime, a0 };
        if !(0.0 < eps && eps < eps_prime && eps_prime < 1.0) {
            return Err(TdError::InvalidParameter(format!(
                "need 0 < eps < eps_prime < 1, got {eps}, {eps_prime}"
            )));
        }
        if !(eps < a0 && a0 < 1.0) {
            return Err(TdError::InvalidParameter(format!("need eps < a0 < 1, got a0={a0}")));
        }
        Ok(sc)
    }

    /// Checks that the cutoffs nest as required for this `γ`.
    pub fn validate(&self, gamma: f64) -> Result<()> {
        Self::new(self.eps, self.eps_prime, self.a0)?;
        if pow(self.a0, gamma) * (1.0 + self.x0_outer()) > 1.0 {
            return Err(TdError::InvalidParameter(format!(
                "chi1 leaves the triangle: a0^gamma (1 + x0) > 1 for a0={}",
                self.a0
            )));
        }
        if pow(self.eps / self.a0, gamma) > 0.5 {
            return Err(TdError::InvalidParameter(format!(
                "chi2 support leaves Δ_a0: (eps/a0)^gamma > 1/2 for eps={}, a0={}",
                self.eps, self.a0
            )));
        }
        Ok(())
    }

    fn x0_inner(&self) -> f64 {
        (self.eps + self.a0) / 2.0
    }

    fn x0_outer(&self) -> f64 {
        (self.a0 + 1.0) / 2.0
    }

    pub fn p2(&self) -> Plateau {
        let start = -self.eps - 0.75 * (self.x0_inner() - self.eps);
        Plateau {
            r0: start,
            r1: -self.eps,
            d0: 1.0 - self.eps,
            d1: 1.0 - self.eps / 2.0,
        }
    }

    pub fn p1(&self) -> Plateau {
        let start = -self.a0 - 0.75 * (self.x0_outer() - self.a0);
        Plateau {
            r0: start,
            r1: -self.a0,
            d0: 1.0 - self.eps / 2.0,
            d1: 1.0,
        }
    }

    fn ramp_u(&self, x: f64) -> f64 {
        if x >= 1.0 - self.eps {
            return 1.0;
        }
        (x - (1.0 - self.eps_prime)) / (self.eps_prime - self.eps)
    }

    /// `(ψ, ψ', ψ'')`.
    pub fn psi(&self, x: f64) -> [f64; 3] {
        let w = self.eps_prime - self.eps;
        let s = smoothstep(self.ramp_u(x));
        [1.0 - s[0], -s[1] / w, -s[2] / (w * w)]
    }

    pub fn phi(&self, x: f64) -> f64 {
        let u = self.ramp_u(x);
        if u <= 0.0 || u >= 1.0 {
            0.0
        } else {
            64.0 * (u * (1.0 - u)).powi(3)
        }
    }

    /// `(ψζ)''`.
    pub fn psi_zeta_second(&self, x: f64) -> f64 {
        let p = self.psi(x);
        let z = zeta_jet(x);
        p[2] * z[0] + 2.0 * p[1] * z[1] + p[0] * z[2]
    }

    fn l2(&self, x1: f64, gamma: f64) -> f64 {
        pow(self.eps, gamma) / 2.0 * (x1 + self.x0_inner())
    }

    fn l1(&self, x1: f64, gamma: f64) -> f64 {
        pow(self.a0, gamma) / 2.0 * (x1 + self.x0_outer())
    }

    pub fn chi2(&self, x1: f64, x2: f64, gamma: f64) -> f64 {
        let p = self.p2().value(x1);
        if p == 0.0 {
            return 0.0;
        }
        p * q_profile(x2.abs() / self.l2(x1, gamma))[0]
    }

    pub fn chi2_dx2(&self, x1: f64, x2: f64, gamma: f64) -> f64 {
        let p = self.p2().value(x1);
        if p == 0.0 {
            return 0.0;
        }
        let l = self.l2(x1, gamma);
        p * q_profile(x2.abs() / l)[1] * x2.signum() / l
    }

    pub fn chi1(&self, x1: f64, x2: f64, gamma: f64) -> f64 {
        let p = self.p1().value(x1);
        if p == 0.0 {
            return 0.0;
        }
        p * q_profile(x2.abs() / self.l1(x1, gamma))[0]
    }

    /// Fixed `x1` breakpoints of every cutoff.
    pub fn x1_breaks(&self) -> Vec<f64> {
        let (p1, p2) = (self.p1(), self.p2());
        let mut v = vec![
            p1.r0,
            p1.r1,
            p1.d0,
            p1.d1,
            p2.r0,
            p2.r1,
            p2.d0,
            p2.d1,
            1.0 - self.eps_prime,
            1.0 - self.eps,
        ];
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// `x2` breakpoints in `[0, top]` at fixed `x1`.
    pub fn x2_breaks(&self, x1: f64, top: f64, gamma: f64) -> Vec<f64> {
        let mut v = vec![0.0, top];
        for l in [self.l2(x1, gamma), self.l1(x1, gamma)] {
            for k in [1.0, 2.0] {
                let b = k * l;
                if b > 0.0 && b < top {
                    v.push(b);
                }
            }
        }
        v.sort_by(f64::total_cmp);
        v
    }

    /// Ray-dependent `x1` breakpoints where `b(x1) = (a^γ/2)(x1+a)` crosses `L2` or `2 L2`.
    fn ray_breaks(&self, a: f64, gamma: f64) -> Vec<f64> {
        let mut v = vec![-a, 1.0];
        v.extend(self.x1_breaks().into_iter().filter(|&b| b > -a && b < 1.0));
        let r = pow(a / self.eps, gamma);
        for k in [1.0, 2.0] {
            if (r - k).abs() > 1e-14 {
                let x = (k * self.x0_inner() - r * a) / (r - k);
                if x > -a && x < 1.0 {
                    v.push(x);
                }
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn profiles(&self) -> Vec<CutoffProfile> {
        let (p1, p2) = (self.p1(), self.p2());
        vec![
            CutoffProfile {
                name: "psi".into(),
                breakpoints: vec![1.0 - self.eps_prime, 1.0 - self.eps],
            },
            CutoffProfile {
                name: "phi".into(),
                breakpoints: vec![1.0 - self.eps_prime, 1.0 - self.eps],
            },
            CutoffProfile {
                name: "chi1".into(),
                breakpoints: vec![p1.r0, p1.r1, p1.d0, p1.d1],
            },
            CutoffProfile {
                name: "chi2".into(),
                breakpoints: vec![p2.r0, p2.r1, p2.d0, p2.d1],
            },
        ]
    }

    pub fn f_minus(&self, p: Point, cfg: &GammaConfig) -> Result<f64> {
        let g = cfg.gamma;
        let (x1, x2) = (p.x1, p.x2);
        if !((-1.0..=1.0).contains(&x1) && x2.abs() <= (x1 + 1.0) / 2.0) {
            return Ok(0.0);
        }
        let chi1 = self.chi1(x1, x2, g);
        let chi2 = self.chi2(x1, x2, g);
        let mut extra = 0.0;
        if chi2 != 0.0 {
            let e = eta_jet_even(x2, cfg)?;
            extra += (self.psi_zeta_second(x1) + e.eta2) * chi2;
        }
        let ph = self.phi(x1);
        if ph != 0.0 {
            let a = point_to_ray(Point::new(x1, x2.abs()), cfg)?.a;
            extra += ph * smooth_correction_c(a, self, cfg)?;
        }
        Ok(chi1 + cfg.beta * extra)
    }
}

fn ray_options() -> QuadOptions {
    QuadOptions::new(1e-13, 1e-12).max_segments(2000)
}

fn weight_integral(a: f64, sc: &SmoothConfig, cfg: &GammaConfig) -> Result<(f64, f64)> {
    let g = cfg.gamma;
    let opts = ray_options();
    let lo = 1.0 - sc.eps_prime;
    let hi = 1.0 - sc.eps;
    let q = integrate_vec(
        |x1| {
            let ph = sc.phi(x1);
            [(g * (x1 + a) + a) * ph, ph]
        },
        &[lo, hi],
        &opts,
    )
    .checked(&opts)?;
    if !(q[0] > 1e-300) {
        return Err(TdError::DegenerateDenominator(a));
    }
    Ok((q[0], q[1]))
}

/// Correction `c(a)` that balances the mass below ray `a`.
pub fn smooth_correction_c(a: f64, sc: &SmoothConfig, cfg: &GammaConfig) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return if a == 0.0 || a == 1.0 {
            Ok(0.0)
        } else {
            Err(TdError::DomainError(format!("smooth correction at a={a}")))
        };
    }
    let g = cfg.gamma;
    let (den, _) = weight_integral(a, sc, cfg)?;
    let opts = ray_options();
    let mut failure = None;
    let reduced = a < sc.eps;
    let q = integrate_vec(
        |x1| {
            let w = g * (x1 + a) + a;
            let b = pow(a, g) / 2.0 * (x1 + a);
            let chi2 = sc.chi2(x1, b, g);
            let eta2 = match eta_jet(b.clamp(0.0, 1.0), cfg) {
                Ok(j) => j.eta2,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            if reduced {
                [w * eta2 * (1.0 - chi2)]
            } else {
                [-w * (sc.psi_zeta_second(x1) + eta2) * chi2]
            }
        },
        &sc.ray_breaks(a, g),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0] / den)
}

/// `c'(a)`: differentiated ratio for `a < ε`, centred difference otherwise.
pub fn smooth_correction_dc(a: f64, sc: &SmoothConfig, cfg: &GammaConfig) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(TdError::DomainError(format!("smooth correction derivative at a={a}")));
    }
    if a >= sc.eps {
        let h = 1e-5 * a.min(1.0 - a);
        let hi = smooth_correction_c(a + h, sc, cfg)?;
        let lo = smooth_correction_c(a - h, sc, cfg)?;
        return Ok((hi - lo) / (2.0 * h));
    }
    let g = cfg.gamma;
    let (den, phi_mass) = weight_integral(a, sc, cfg)?;
    let c = smooth_correction_c(a, sc, cfg)?;
    let opts = ray_options();
    let ag1 = pow(a, g - 1.0);
    let mut failure = None;
    let q = integrate_vec(
        |x1| {
            let w = g * (x1 + a) + a;
            let b = pow(a, g) / 2.0 * (x1 + a);
            let one_minus = 1.0 - sc.chi2(x1, b, g);
            let dchi = sc.chi2_dx2(x1, b, g);
            let (e2, e3) = match eta_jet(b.clamp(0.0, 1.0), cfg) {
                Ok(j) => (j.eta2, if b > 0.0 { j.eta3 } else { 0.0 }),
                Err(e) => {
                    failure.get_or_insert(e);
                    (0.0, 0.0)
                }
            };
            let e3_term = if one_minus == 0.0 { 0.0 } else { w * w * e3 * one_minus };
            [
                (g + 1.0) * e2 * one_minus + ag1 / 2.0 * e3_term - ag1 / 2.0 * w * w * e2 * dchi,
            ]
        },
        &sc.ray_breaks(a, g),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let num = q.checked(&opts)?[0];
    Ok((num - (g + 1.0) * phi_mass * c) / den)
}
