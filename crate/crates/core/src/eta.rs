//! The implicit profile `a(s)` defined by `s = a^γ (1 + a) / 2` and the
//! function `η(s) = s² a(s)²` that shapes the target density across rays.
//!
//! Derivatives of `a` come from implicit differentiation of the defining
//! relation (inverse-function rule up to fourth order), then Leibniz on
//! `η = s² A` with `A = a²`. At `s = 0` the one-sided limits are taken from
//! the two-term expansion `η ≈ 2^(2/γ) s^(2+2/γ) − (2/γ) 2^(3/γ) s^(2+3/γ)`.

use serde::{Deserialize, Serialize};

use crate::config::GammaConfig;
use crate::error::{Result, TdError};
use crate::numerics::{increasing_root, log_space};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaJet {
    pub s: f64,
    pub a: f64,
    pub eta0: f64,
    pub eta1: f64,
    pub eta2: f64,
    pub eta3: f64,
    pub eta4: f64,
}

impl EtaJet {
    pub fn derivative(&self, k: usize) -> f64 {
        match k {
            0 => self.eta0,
            1 => self.eta1,
            2 => self.eta2,
            3 => self.eta3,
            4 => self.eta4,
            _ => panic!("eta jets stop at order 4"),
        }
    }
}

/// `x (x-1) ... (x-k+1)`.
fn falling(x: f64, k: usize) -> f64 {
    (0..k).map(|i| x - i as f64).product()
}

/// k-th derivative of `(a^γ + a^(γ+1)) / 2`.
fn profile_derivative(a: f64, g: f64, k: usize) -> f64 {
    let term = |e: f64| {
        let c = falling(e, k);
        if c == 0.0 {
            0.0
        } else {
            c * a.powf(e - k as f64)
        }
    };
    (term(g) + term(g + 1.0)) / 2.0
}

pub fn solve_a(s: f64, cfg: &GammaConfig) -> Result<f64> {
    if !(0.0..=1.0).contains(&s) {
        return Err(TdError::DomainError(format!("solve_a at s={s}")));
    }
    if s == 0.0 || s == 1.0 {
        return Ok(s);
    }
    let g = cfg.gamma;
    let guess = (2.0 * s).powf(1.0 / g).min(1.0);
    let a = increasing_root(
        |a| {
            let ag1 = a.powf(g - 1.0);
            let ag = ag1 * a;
            (ag * (1.0 + a) / 2.0 - s, (g * ag1 * (1.0 + a) + ag) / 2.0)
        },
        0.0,
        1.0,
        guess,
    )?;
    let residual = (a.powf(g) * (1.0 + a) / 2.0 - s).abs();
    if residual > cfg.root_tol {
        return Err(TdError::NoConvergence(format!(
            "solve_a residual {residual:e} at s={s}"
        )));
    }
    Ok(a)
}

/// `(a, a', a'', a''', a'''')` at `s`, truncated after `order`.
pub fn a_jet(s: f64, order: usize, cfg: &GammaConfig) -> Result<Vec<f64>> {
    if order > 4 {
        return Err(TdError::InvalidParameter(format!("a_jet order {order} > 4")));
    }
    if s <= 0.0 {
        return Err(TdError::DomainError(format!(
            "a_jet at s={s} (a ~ (2s)^(1/gamma) there)"
        )));
    }
    let a = solve_a(s, cfg)?;
    Ok(a_jet_from(a, cfg.gamma)[..=order].to_vec())
}

fn a_jet_from(a: f64, g: f64) -> [f64; 5] {
    let p1 = profile_derivative(a, g, 1);
    let p2 = profile_derivative(a, g, 2);
    let p3 = profile_derivative(a, g, 3);
    let p4 = profile_derivative(a, g, 4);
    let d1 = 1.0 / p1;
    let d2 = -p2 / p1.powi(3);
    let d3 = (3.0 * p2 * p2 - p1 * p3) / p1.powi(5);
    let d4 = (-15.0 * p2.powi(3) + 10.0 * p1 * p2 * p3 - p1 * p1 * p4) / p1.powi(7);
    [a, d1, d2, d3, d4]
}

pub fn eta_jet(s: f64, cfg: &GammaConfig) -> Result<EtaJet> {
    if !(0.0..=1.0).contains(&s) {
        return Err(TdError::DomainError(format!("eta_jet at s={s}")));
    }
    if s == 0.0 {
        return Ok(limit_jet(cfg.gamma));
    }
    let a = solve_a(s, cfg)?;
    let [a0, a1, a2, a3, a4] = a_jet_from(a, cfg.gamma);
    let big = [
        a0 * a0,
        2.0 * a0 * a1,
        2.0 * (a1 * a1 + a0 * a2),
        2.0 * (3.0 * a1 * a2 + a0 * a3),
        2.0 * (3.0 * a2 * a2 + 4.0 * a1 * a3 + a0 * a4),
    ];
    let s2 = s * s;
    Ok(EtaJet {
        s,
        a,
        eta0: s2 * big[0],
        eta1: s2 * big[1] + 2.0 * s * big[0],
        eta2: s2 * big[2] + 4.0 * s * big[1] + 2.0 * big[0],
        eta3: s2 * big[3] + 6.0 * s * big[2] + 6.0 * big[1],
        eta4: s2 * big[4] + 8.0 * s * big[3] + 12.0 * big[2],
    })
}

/// One-sided limits at `s = 0` from the two-term expansion.
fn limit_jet(g: f64) -> EtaJet {
    let terms = [
        (2f64.powf(2.0 / g), 2.0 + 2.0 / g),
        (-(2.0 / g) * 2f64.powf(3.0 / g), 2.0 + 3.0 / g),
    ];
    let at_zero = |k: usize| -> f64 {
        for (c, e) in terms {
            let coef = c * falling(e, k);
            if coef == 0.0 {
                continue;
            }
            let rest = e - k as f64;
            return if rest > 0.0 {
                0.0
            } else if rest == 0.0 {
                coef
            } else {
                coef.signum() * f64::INFINITY
            };
        }
        0.0
    };
    EtaJet {
        s: 0.0,
        a: 0.0,
        eta0: 0.0,
        eta1: 0.0,
        eta2: at_zero(2),
        eta3: at_zero(3),
        eta4: at_zero(4),
    }
}

/// Jet of the even extension `x ↦ η(|x|)`; odd orders pick up `sign(x)`.
pub fn eta_jet_even(x: f64, cfg: &GammaConfig) -> Result<EtaJet> {
    let mut j = eta_jet(x.abs(), cfg)?;
    if x < 0.0 {
        j.eta1 = -j.eta1;
        j.eta3 = -j.eta3;
        j.s = x;
    }
    Ok(j)
}

/// `max |η'''(s)| s^(1 - 2/γ)` over `samples` log-spaced points of `[1e-8, 1]`.
pub fn eta_holder_bound(cfg: &GammaConfig, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(TdError::InvalidParameter("eta_holder_bound needs samples >= 2".into()));
    }
    let e = 1.0 - 2.0 / cfg.gamma;
    let mut best: f64 = 0.0;
    for s in log_space(1e-8, 1.0, samples) {
        let j = eta_jet(s, cfg)?;
        best = best.max(j.eta3.abs() * s.powf(e));
    }
    Ok(best)
}

/// Solution `h(y)` of `y = h (1 + h)^(1/γ) / 2^(1/γ)`, with derivatives up to order 3.
///
/// Composing with `y = s^(1/γ)` reproduces `a(s)`; kept as a cross-check.
pub fn h_jet(y: f64, cfg: &GammaConfig) -> Result<[f64; 4]> {
    let g = cfg.gamma;
    let q = 1.0 / g;
    let c = 2f64.powf(-q);
    // h = a(y^γ) by construction.
    let h = solve_a(y.powf(g), cfg)?;
    let base = 1.0 + h;
    // k-th derivative of (1+h)^q.
    let gk = |k: usize| falling(q, k) * base.powf(q - k as f64);
    let psi = |k: usize| c * (h * gk(k) + k as f64 * gk(k - 1));
    let (p1, p2, p3) = (psi(1), psi(2), psi(3));
    Ok([
        h,
        1.0 / p1,
        -p2 / p1.powi(3),
        (3.0 * p2 * p2 - p1 * p3) / p1.powi(5),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(g: f64) -> GammaConfig {
        GammaConfig::with_beta(g, 0.01).unwrap()
    }

    const GAMMAS: [f64; 6] = [0.5, 1.0, 1.5, 2.0, 3.0, 4.0];

    /// Independent bisection on the defining relation.
    fn bisect_a(s: f64, g: f64) -> f64 {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if m.powf(g) * (1.0 + m) / 2.0 < s {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn solve_a_examples() {
        for g in GAMMAS {
            assert_eq!(solve_a(1.0, &cfg(g)).unwrap(), 1.0);
            assert_eq!(solve_a(0.0, &cfg(g)).unwrap(), 0.0);
        }
        let a = solve_a(0.25, &cfg(1.0)).unwrap();
        assert!((a - (3f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let a = solve_a(0.1, &cfg(2.0)).unwrap();
        assert!((a * a * (1.0 + a) - 0.2).abs() < 1e-12);
        assert!((a - bisect_a(0.1, 2.0)).abs() < 1e-14);
    }

    #[test]
    fn solve_a_monotone_with_small_residual() {
        for g in GAMMAS {
            let c = cfg(g);
            let mut prev = -1.0;
            for i in 1..=1000 {
                let s = i as f64 / 1000.0;
                let a = solve_a(s, &c).unwrap();
                assert!(a > prev);
                assert!((a.powf(g) * (1.0 + a) / 2.0 - s).abs() <= 1e-12);
                prev = a;
            }
        }
    }

    #[test]
    fn a_jet_derivative_checks() {
        let c = cfg(1.0);
        let j = a_jet(0.25, 1, &c).unwrap();
        let h = 1e-6;
        let fd = (solve_a(0.25 + h, &c).unwrap() - solve_a(0.25 - h, &c).unwrap()) / (2.0 * h);
        assert!((j[1] - fd).abs() < 1e-8);
        assert!((j[1] - 2.0 / (1.0 + 2.0 * j[0])).abs() < 1e-14);
        let j1 = a_jet(1.0, 1, &c).unwrap();
        assert!((j1[1] - 2.0 / 3.0).abs() < 1e-15);
        for g in GAMMAS {
            let j = a_jet(0.3, 4, &cfg(g)).unwrap();
            // d/ds of the defining relation along a(s) equals 1.
            let dphi = profile_derivative(j[0], g, 1) * j[1];
            assert!((dphi - 1.0).abs() < 1e-10);
        }
        assert!(matches!(a_jet(0.0, 2, &c), Err(TdError::DomainError(_))));
    }

    #[test]
    fn eta_value_examples() {
        let j = eta_jet(0.25, &cfg(1.0)).unwrap();
        let a = (3f64.sqrt() - 1.0) / 2.0;
        assert!((j.eta0 - 0.0625 * a * a).abs() < 1e-16);
        assert!((j.eta0 - 0.0083734).abs() < 1e-7);
        for g in GAMMAS {
            let z = eta_jet(0.0, &cfg(g)).unwrap();
            assert_eq!((z.eta0, z.eta1, z.eta2), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn limit_jet_orders_three_and_four() {
        assert_eq!(eta_jet(0.0, &cfg(1.0)).unwrap().eta3, 0.0);
        assert_eq!(eta_jet(0.0, &cfg(1.0)).unwrap().eta4, 96.0);
        assert_eq!(eta_jet(0.0, &cfg(2.0)).unwrap().eta3, 12.0);
        assert_eq!(eta_jet(0.0, &cfg(2.0)).unwrap().eta4, f64::NEG_INFINITY);
        assert_eq!(eta_jet(0.0, &cfg(3.0)).unwrap().eta3, f64::INFINITY);
        assert_eq!(eta_jet(0.0, &cfg(0.5)).unwrap().eta4, 0.0);
        // Limits agree with the jet at tiny s.
        let near = eta_jet(1e-9, &cfg(1.0)).unwrap();
        assert!((near.eta4 - 96.0).abs() < 1e-5);
        let near = eta_jet(1e-10, &cfg(2.0)).unwrap();
        assert!((near.eta3 - 12.0).abs() < 1e-3);
    }

    /// Each order against a centered difference of the order below.
    #[test]
    fn jet_matches_finite_differences() {
        for g in GAMMAS {
            let c = cfg(g);
            for s in [0.05, 0.2, 0.5, 0.8] {
                let h = f64::EPSILON.cbrt() * s;
                let lo = eta_jet(s - h, &c).unwrap();
                let hi = eta_jet(s + h, &c).unwrap();
                let mid = eta_jet(s, &c).unwrap();
                for k in 1..=4 {
                    let fd = (hi.derivative(k - 1) - lo.derivative(k - 1)) / (2.0 * h);
                    let exact = mid.derivative(k);
                    let rel = (fd - exact).abs() / exact.abs().max(1e-300);
                    assert!(rel <= 1e-5, "gamma {g} s {s} order {k}: {fd} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn second_derivative_from_values() {
        let c = cfg(1.0);
        let h = 1e-4;
        let v = |s| eta_jet(s, &c).unwrap().eta0;
        let fd = (v(0.5 + h) - 2.0 * v(0.5) + v(0.5 - h)) / (h * h);
        assert!((fd - eta_jet(0.5, &c).unwrap().eta2).abs() < 1e-6);
    }

    /// The h-based closed forms for orders 1 to 3.
    #[test]
    fn h_route_agrees_for_orders_one_to_three() {
        for g in GAMMAS {
            let c = cfg(g);
            let q = 1.0 / g;
            for s in [0.01f64, 0.1, 0.4, 0.9] {
                let y = s.powf(q);
                let [h, h1, h2, h3] = h_jet(y, &c).unwrap();
                let d1 = 2.0 * s * h * h + 2.0 * q * s.powf(q + 1.0) * h * h1;
                let d2 = 2.0 * h * h
                    + (6.0 * q + 2.0 * q * q) * s.powf(q) * h * h1
                    + 2.0 * q * q * s.powf(2.0 * q) * (h1 * h1 + h * h2);
                let d3 = (4.0 * q + 6.0 * q * q + 2.0 * q.powi(3)) * s.powf(q - 1.0) * h * h1
                    + (6.0 * q.powi(3) + 6.0 * q * q) * s.powf(2.0 * q - 1.0) * (h1 * h1 + h * h2)
                    + 6.0 * q.powi(3) * s.powf(3.0 * q - 1.0) * h1 * h2
                    + 2.0 * q.powi(3) * s.powf(3.0 * q - 1.0) * h * h3;
                let j = eta_jet(s, &c).unwrap();
                for (k, v) in [(1, d1), (2, d2), (3, d3)] {
                    let e = j.derivative(k);
                    assert!(
                        (v - e).abs() <= 1e-9 * e.abs().max(1e-12),
                        "gamma {g} s {s} order {k}: {v} vs {e}"
                    );
                }
            }
        }
    }

    #[test]
    fn even_extension_flips_odd_orders() {
        let c = cfg(2.0);
        let p = eta_jet_even(0.3, &c).unwrap();
        let m = eta_jet_even(-0.3, &c).unwrap();
        assert_eq!(p.eta0, m.eta0);
        assert_eq!(p.eta1, -m.eta1);
        assert_eq!(p.eta2, m.eta2);
        assert_eq!(p.eta3, -m.eta3);
        assert_eq!(p.eta4, m.eta4);
    }

    #[test]
    fn holder_envelope_is_refinement_stable() {
        for g in [0.5, 1.0, 2.0, 4.0] {
            let c = cfg(g);
            let n = eta_holder_bound(&c, 400).unwrap();
            let n2 = eta_holder_bound(&c, 800).unwrap();
            assert!(n.is_finite() && n > 0.0);
            let r = n / n2;
            assert!((0.9..=1.1).contains(&r), "gamma {g}: {n} / {n2}");
            // Envelope holds at off-grid points too.
            for s in [3.3e-8, 7.1e-5, 0.013, 0.77] {
                let j = eta_jet(s, &c).unwrap();
                assert!(j.eta3.abs() <= 1.05 * n2 * s.powf(2.0 / g - 1.0));
            }
        }
    }

    #[test]
    fn smoothness_classes() {
        // γ = 1: η'''' Lipschitz on [δ, 1] with δ-stable constant.
        let c = cfg(1.0);
        let lip = |delta: f64| {
            let xs = log_space(delta, 1.0, 400);
            xs.windows(2)
                .map(|w| {
                    let d = eta_jet(w[1], &c).unwrap().eta4 - eta_jet(w[0], &c).unwrap().eta4;
                    d.abs() / (w[1] - w[0])
                })
                .fold(0.0f64, f64::max)
        };
        let (l1, l2) = (lip(1e-3), lip(1e-6));
        assert!((l2 / l1 - 1.0).abs() < 0.1, "{l1} {l2}");

        // γ = 2: η''' bounded near 0.
        let c = cfg(2.0);
        let m = log_space(1e-10, 1.0, 300)
            .into_iter()
            .map(|s| eta_jet(s, &c).unwrap().eta3.abs())
            .fold(0.0f64, f64::max);
        assert!(m < 100.0);

        // γ = 3: η'' is Hölder with exponent 2/3 at the origin.
        let c = cfg(3.0);
        let q: Vec<f64> = log_space(1e-10, 1e-5, 50)
            .into_iter()
            .map(|s| eta_jet(s, &c).unwrap().eta2 / s.powf(2.0 / 3.0))
            .collect();
        let (lo, hi) = q.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi / lo < 1.2, "{lo} {hi}");
    }
}
