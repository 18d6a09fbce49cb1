//! Scaling experiments for the regularity of `σ`: Hölder exponent at the
//! origin, growth of `‖∂x2σ‖_p` near the origin, and divergence of the total
//! variation along the triangle chain.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::densities::{
    smooth_correction_c, smooth_correction_dc, triangle_target, zeta_jet, DensityInstance, DensityKind,
};
use crate::error::{Result, TdError};
use crate::eta::eta_jet;
use crate::geometry::{pow, ray_to_point, reduced_jacobian, Point, RayCoord};
use crate::numerics::fit::DEFAULT_TRIM;
use crate::numerics::{fit_loglog, integrate_2d, integrate_vec, log_space, QuadOptions};
use crate::transport::{sigma, sigma_at_point, sigma_eval, RayProfile};

/// Minimum `r²` for a fit to count as evidence.
pub const MIN_R2: f64 = 0.99;
/// Allowed gap between fitted and expected Hölder exponents.
pub const HOLDER_SLOPE_TOL: f64 = 0.05;
/// Allowed gap between fitted and expected growth exponents.
pub const GROWTH_SLOPE_TOL: f64 = 0.1;
/// Relative change per halving below which a norm counts as converged.
pub const CAUCHY_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    /// Marginal case: growth is expected to be logarithmic, which a power fit
    /// cannot confirm.
    Logarithmic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub experiment: String,
    pub gamma: f64,
    pub p: Option<f64>,
    #[serde(rename = "grid")]
    pub parameter_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_exponent: f64,
    pub expected_exponent: f64,
    pub r2: f64,
    pub verdict: Verdict,
}

fn fit_verdict(slope: f64, r2: f64, expected: f64, tol: f64) -> Verdict {
    if r2 >= MIN_R2 && (slope - expected).abs() <= tol {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

/// `p*(γ) = min{γ/(γ−1), (γ+2)/γ}`; the first term is absent for `γ <= 1`.
pub fn sobolev_threshold(gamma: f64) -> f64 {
    let radial = (gamma + 2.0) / gamma;
    if gamma > 1.0 {
        radial.min(gamma / (gamma - 1.0))
    } else {
        radial
    }
}

/// Fit of `σ(0, ε)` against `ε` on a log grid.
pub fn holder_exponent_fit(inst: &DensityInstance, eps_min: f64, eps_max: f64, n: usize) -> Result<ScalingReport> {
    if !(eps_min > 0.0 && eps_min < eps_max && eps_max <= 1e-2) || n < 10 {
        return Err(TdError::InvalidParameter(format!(
            "holder fit needs 0 < eps_min < eps_max <= 1e-2 and n >= 10, got [{eps_min}, {eps_max}], n = {n}"
        )));
    }
    let grid = log_space(eps_min, eps_max, n);
    let values = grid
        .par_iter()
        .map(|&e| sigma_at_point(Point::new(0.0, e), inst))
        .collect::<Result<Vec<_>>>()?;
    let fit = fit_loglog(&grid, &values, DEFAULT_TRIM)?;
    let expected = 1.0 / (inst.cfg.gamma + 1.0);
    Ok(ScalingReport {
        experiment: "holder".into(),
        gamma: inst.cfg.gamma,
        p: None,
        parameter_grid: grid,
        values,
        fitted_exponent: fit.slope,
        expected_exponent: expected,
        r2: fit.r2,
        verdict: fit_verdict(fit.slope, fit.r2, expected, HOLDER_SLOPE_TOL),
    })
}

/// Angular range in the `(t, a)` plane; `θ = 0` is the degenerate ray `a = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Sector {
    pub const QUARTER: Sector = Sector {
        theta_min: 0.0,
        theta_max: FRAC_PI_2,
    };

    /// Sector that keeps an angle `theta_min` away from the degenerate ray.
    pub fn away_from_axis(theta_min: f64) -> Sector {
        Sector {
            theta_min,
            theta_max: FRAC_PI_2,
        }
    }

    fn validate(&self) -> Result<()> {
        if 0.0 <= self.theta_min && self.theta_min < self.theta_max && self.theta_max <= FRAC_PI_2 {
            Ok(())
        } else {
            Err(TdError::InvalidParameter(format!(
                "sector [{}, {}] not inside [0, π/2]",
                self.theta_min, self.theta_max
            )))
        }
    }

    /// Sector on which the angular factor of `‖∂x2σ‖_p^p` is finite.
    pub fn for_exponent(gamma: f64, p: f64) -> Sector {
        if angular_exponent(gamma, p) >= 1.0 {
            Sector::away_from_axis(FRAC_PI_2 / 6.0)
        } else {
            Sector::QUARTER
        }
    }
}

/// `(γ−1)(p−1)`: the angular factor diverges at `a = 0` once this reaches one.
pub fn angular_exponent(gamma: f64, p: f64) -> f64 {
    (gamma - 1.0) * (p - 1.0)
}

/// `γ(p−1) − 2`: power of `1/r0` in the growth of the radial factor.
pub fn radial_exponent(gamma: f64, p: f64) -> f64 {
    gamma * (p - 1.0) - 2.0
}

fn lp_options() -> QuadOptions {
    QuadOptions::new(0.0, 1e-7).max_segments(2000)
}

/// `∫∫ |∂x2σ|^p J r dr dθ` over one shell of the sector.
fn lp_shell(inst: &DensityInstance, p: f64, r_lo: f64, r_hi: f64, sector: Sector) -> Result<f64> {
    let g = inst.cfg.gamma;
    let mut theta_breaks = vec![sector.theta_min];
    if sector.theta_min == 0.0 {
        // Integrable singularity along the degenerate ray.
        let mut v: Vec<f64> = (1..=12).map(|k| sector.theta_max * 0.25f64.powi(k)).collect();
        v.reverse();
        theta_breaks.extend(v);
    }
    theta_breaks.push(sector.theta_max);
    let opts = lp_options();
    let mut failure = None;
    let q = integrate_2d(
        |theta, r| {
            let c = RayCoord::new(r * theta.cos(), r * theta.sin());
            match sigma_eval(c, inst) {
                Ok(e) => {
                    let j = reduced_jacobian(c.t, c.a, g) * pow(c.a, g - 1.0);
                    [e.dsigma_dx2.abs().powf(p) * j * r]
                }
                Err(err) => {
                    failure.get_or_insert(err);
                    [0.0]
                }
            }
        },
        &theta_breaks,
        |_| vec![r_lo, r_hi],
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

/// `‖∂x2σ‖_p^p` over `{r0 <= |(t, a)| <= delta}` in the full quarter.
pub fn lp_gradient_norm(inst: &DensityInstance, p: f64, r0: f64, delta: f64) -> Result<f64> {
    lp_gradient_norm_in(inst, p, r0, delta, Sector::QUARTER)
}

pub fn lp_gradient_norm_in(inst: &DensityInstance, p: f64, r0: f64, delta: f64, sector: Sector) -> Result<f64> {
    Ok(lp_gradient_norms(inst, p, &[r0], delta, sector)?[0])
}

/// Norms for several inner radii, assembled from disjoint shells so that the
/// result is monotone in `r0` by construction.
pub fn lp_gradient_norms(inst: &DensityInstance, p: f64, r0s: &[f64], delta: f64, sector: Sector) -> Result<Vec<f64>> {
    sector.validate()?;
    if !(p >= 1.0) || !(delta > 0.0 && delta <= 0.1) {
        return Err(TdError::InvalidParameter(format!("need p >= 1 and 0 < delta <= 0.1, got p = {p}, delta = {delta}")));
    }
    if r0s.iter().any(|&r| !(r > 0.0 && r < delta)) {
        return Err(TdError::InvalidParameter("every r0 must lie in (0, delta)".into()));
    }
    let mut radii: Vec<f64> = r0s.to_vec();
    radii.push(delta);
    radii.sort_by(|a, b| b.partial_cmp(a).unwrap());
    radii.dedup();
    // Split wide shells at octaves to keep each quadrature well scaled.
    let mut edges = vec![radii[0]];
    for &r in &radii[1..] {
        let mut cur = *edges.last().unwrap();
        while cur / r > 2.0 {
            cur /= 2.0;
            edges.push(cur);
        }
        edges.push(r);
    }
    let shells = edges
        .par_windows(2)
        .map(|w| lp_shell(inst, p, w[1], w[0], sector))
        .collect::<Result<Vec<_>>>()?;
    let mut cumulative = Vec::with_capacity(edges.len());
    let mut acc = 0.0;
    cumulative.push((edges[0], 0.0));
    for (w, s) in edges.windows(2).zip(&shells) {
        acc += s;
        cumulative.push((w[1], acc));
    }
    Ok(r0s
        .iter()
        .map(|&r| cumulative.iter().find(|(e, _)| *e == r).map(|c| c.1).expect("r0 is a shell edge"))
        .collect())
}

/// Growth exponent of `‖∂x2σ‖_p^p` in `1/r0`.
///
/// Divergent cases are judged by the fitted slope; convergent ones by the
/// relative change between the two smallest radii; marginal ones are flagged.
pub fn divergence_rate_fit(inst: &DensityInstance, p: f64, r0_sequence: &[f64]) -> Result<ScalingReport> {
    divergence_rate_fit_in(inst, p, r0_sequence, 0.1, Sector::for_exponent(inst.cfg.gamma, p))
}

pub fn divergence_rate_fit_in(
    inst: &DensityInstance,
    p: f64,
    r0_sequence: &[f64],
    delta: f64,
    sector: Sector,
) -> Result<ScalingReport> {
    if r0_sequence.len() < 6 {
        return Err(TdError::InvalidParameter("divergence fit needs at least 6 radii".into()));
    }
    let g = inst.cfg.gamma;
    let values = lp_gradient_norms(inst, p, r0_sequence, delta, sector)?;
    let inv: Vec<f64> = r0_sequence.iter().map(|r| 1.0 / r).collect();
    let fit = fit_loglog(&inv, &values, DEFAULT_TRIM)?;
    let expected = radial_exponent(g, p).max(0.0);
    let marginal = (radial_exponent(g, p)).abs() < 1e-12
        || (sector.theta_min == 0.0 && (angular_exponent(g, p) - 1.0).abs() < 1e-12);
    let verdict = if marginal {
        Verdict::Logarithmic
    } else if expected == 0.0 {
        let (i_min, i_next) = two_smallest(r0_sequence);
        let change = (values[i_min] - values[i_next]).abs() / values[i_min];
        if change < CAUCHY_TOL {
            Verdict::Consistent
        } else {
            Verdict::Inconsistent
        }
    } else {
        fit_verdict(fit.slope, fit.r2, expected, GROWTH_SLOPE_TOL)
    };
    Ok(ScalingReport {
        experiment: "sobolev".into(),
        gamma: g,
        p: Some(p),
        parameter_grid: r0_sequence.to_vec(),
        values,
        fitted_exponent: fit.slope,
        expected_exponent: expected,
        r2: fit.r2,
        verdict,
    })
}

fn two_smallest(xs: &[f64]) -> (usize, usize) {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&i, &j| xs[i].partial_cmp(&xs[j]).unwrap());
    (idx[0], idx[1])
}

/// `max |σ(p) − σ(q)| / |p − q|^exponent` over pairs concentrated at the origin.
///
/// Half of the pairs are `((0, ε), (0, 0))` on a log grid of `ε`; the rest are
/// seeded random pairs at log-uniform scales.
pub fn holder_quotient_audit(inst: &DensityInstance, exponent: f64, pairs: usize) -> Result<f64> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(TdError::InvalidParameter(format!("exponent must lie in (0, 1], got {exponent}")));
    }
    let family = pairs / 2;
    let eps = log_space(1e-8, 1e-2, family.max(2));
    let fam = eps
        .par_iter()
        .map(|&e| Ok(sigma_at_point(Point::new(0.0, e), inst)?.abs() / e.powf(exponent)))
        .collect::<Result<Vec<f64>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let samples: Vec<(RayCoord, RayCoord)> = (0..pairs - family)
        .map(|_| {
            let scale = 10f64.powf(-rng.gen_range(0.0..6.0));
            let c = RayCoord::new(rng.gen_range(0.0..1.0) * scale, rng.gen_range(0.0..1.0) * scale);
            let h = scale * 10f64.powf(-rng.gen_range(0.0..3.0));
            let d = RayCoord::new(
                (c.t + rng.gen_range(-1.0..1.0) * h).clamp(0.0, 1.0),
                (c.a + rng.gen_range(-1.0..1.0) * h).clamp(0.0, 1.0),
            );
            (c, d)
        })
        .collect();
    let rand = samples
        .par_iter()
        .map(|(c, d)| {
            let p = ray_to_point(*c, &inst.cfg);
            let q = ray_to_point(*d, &inst.cfg);
            let dist = p.dist(&q);
            if dist == 0.0 {
                return Ok(0.0);
            }
            Ok((sigma(*c, inst)? - sigma(*d, inst)?).abs() / dist.powf(exponent))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(fam.into_iter().chain(rand).fold(0.0, f64::max))
}

/// Total variation along the triangle chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BvReport {
    pub scaling: ScalingReport,
    /// `S_N / ln N` on the report grid.
    pub ratio: Vec<f64>,
    /// Per-triangle `∫ |∇σ_n|`, `n = 1..n_max`.
    pub per_triangle: Vec<f64>,
    pub companion: CompanionReport,
    pub edge_jumps: Vec<EdgeJump>,
}

/// `Σ ‖∇f⁻_n‖_{L¹}`, which converges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanionReport {
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    /// Estimate of the full sum including the tail beyond `n_max`.
    pub limit_estimate: f64,
    /// `(limit − S_100) / limit`.
    pub tail_after_100: f64,
}

/// Largest jump of `f⁻` across the shared edge of triangles `n` and `n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeJump {
    pub n: usize,
    pub max_jump: f64,
    /// `l_n^γ + l_n²`, the expected order of the jump.
    pub scale: f64,
}

fn bv_profile_tol(a: f64) -> f64 {
    1e-15 * a * a
}

/// `∫₀¹ |∇σ| J dt` along ray `a` of the single-triangle construction.
fn ray_variation(inst: &DensityInstance, a: f64) -> Result<f64> {
    let prof = RayProfile::new(a, inst, bv_profile_tol(a))?;
    let opts = QuadOptions::new(0.0, 1e-8).max_segments(1000);
    let mut failure = None;
    let q = integrate_vec(
        |t| match prof.weighted_gradient_norm(t) {
            Ok(v) => [v],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        prof.knots(),
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(q.checked(&opts)?[0])
}

/// `2 ∫_{a_lo}^{a_hi} ∫₀¹ |∇σ| J dt da`: both halves of a symmetric triangle.
pub fn band_variation(inst: &DensityInstance, a_lo: f64, a_hi: f64) -> Result<f64> {
    let mut breaks = vec![a_lo];
    if a_lo == 0.0 {
        let mut v: Vec<f64> = (1..=30).map(|k| a_hi * 0.5f64.powi(k)).collect();
        v.reverse();
        breaks.extend(v);
    }
    breaks.push(a_hi);
    let opts = QuadOptions::new(0.0, 1e-7).max_segments(500);
    let mut failure = None;
    let q = integrate_vec(
        |a| match ray_variation(inst, a) {
            Ok(v) => [v],
            Err(e) => {
                failure.get_or_insert(e);
                [0.0]
            }
        },
        &breaks,
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * q.checked(&opts)?[0])
}

/// Partial sums `S_N = Σ_{n<=N} ∫_{Δ_n} |∇σ_n|` along the chain.
///
/// Triangle `n` consists of the rays `a <= 1/n`, so with band integrals
/// `I_k` over `a ∈ [1/(k+1), 1/k]`, `S_N = Σ_{k<N} k I_k + N T_N` where
/// `T_N = ∫_{Δ_N} |∇σ_N|`.
///
/// `scaling.values` holds `S_N` on a log grid of `N`; the fitted exponent is
/// the log-log slope of `T_n` against `l_n`, which is one when the sum grows
/// like the harmonic series.
pub fn bv_partial_sums(chain_inst: &DensityInstance, n_max: usize) -> Result<BvReport> {
    if chain_inst.kind != DensityKind::BvChain {
        return Err(TdError::InvalidParameter("bv_partial_sums needs a chain instance".into()));
    }
    if n_max < 50 {
        return Err(TdError::InvalidParameter(format!("n_max must be at least 50, got {n_max}")));
    }
    let chain = chain_inst.chain.as_ref().expect("chain instance carries its chain");
    if chain.n_max < n_max {
        return Err(TdError::InvalidParameter(format!(
            "chain has {} triangles, {n_max} requested",
            chain.n_max
        )));
    }
    let g = chain_inst.cfg.gamma;
    let single = DensityInstance::single(chain_inst.cfg);
    let bands = (1..n_max)
        .into_par_iter()
        .map(|k| band_variation(&single, 1.0 / (k + 1) as f64, 1.0 / k as f64))
        .collect::<Result<Vec<f64>>>()?;
    let innermost = band_variation(&single, 0.0, 1.0 / n_max as f64)?;

    // per_triangle[n-1] = T_n = innermost + Σ_{k=n}^{n_max-1} I_k
    let mut per_triangle = vec![0.0; n_max];
    per_triangle[n_max - 1] = innermost;
    for n in (1..n_max).rev() {
        per_triangle[n - 1] = per_triangle[n] + bands[n - 1];
    }
    let mut partial = Vec::with_capacity(n_max);
    let mut acc = 0.0;
    for t in &per_triangle {
        acc += t;
        partial.push(acc);
    }

    let grid: Vec<usize> = {
        let mut v: Vec<usize> = log_space(10.0, n_max as f64, 40)
            .into_iter()
            .map(|x| x.round() as usize)
            .collect();
        v.dedup();
        v
    };
    let values: Vec<f64> = grid.iter().map(|&n| partial[n - 1]).collect();
    let ratio: Vec<f64> = grid.iter().zip(&values).map(|(&n, s)| s / (n as f64).ln()).collect();
    // Per-triangle variation against l_n: harmonic divergence means slope one.
    let ls: Vec<f64> = grid.iter().map(|&n| 1.0 / n as f64).collect();
    let ts: Vec<f64> = grid.iter().map(|&n| per_triangle[n - 1]).collect();
    let fit = fit_loglog(&ls, &ts, DEFAULT_TRIM)?;
    let octave: Vec<f64> = grid
        .iter()
        .zip(&ratio)
        .filter(|(&n, _)| 2 * n >= n_max)
        .map(|(_, &r)| r)
        .collect();
    let (lo, hi) = octave.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    let verdict = if hi <= 1.1 * lo && fit.r2 >= MIN_R2 {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };

    let companion = companion_sums(chain_inst, n_max)?;
    let edge_jumps = (0..n_max.min(chain.n_max - 1))
        .into_par_iter()
        .map(|n| edge_jump(chain_inst, n, 16))
        .collect::<Result<Vec<_>>>()?;

    Ok(BvReport {
        scaling: ScalingReport {
            experiment: "bv".into(),
            gamma: g,
            p: None,
            parameter_grid: grid.iter().map(|&n| n as f64).collect(),
            values,
            fitted_exponent: fit.slope,
            expected_exponent: 1.0,
            r2: fit.r2,
            verdict,
        },
        ratio,
        per_triangle,
        companion,
        edge_jumps,
    })
}

/// `∫_{Δ_n} |∇f⁻_n| = 2β ∫∫ sqrt(ζ'''(y1)² + η'''(y2)²)` over the upper half.
fn companion_term(inst: &DensityInstance, n: usize) -> Result<f64> {
    let cfg = &inst.cfg;
    let g = cfg.gamma;
    let l = 1.0 / n as f64;
    let slope = pow(l, g) / 2.0;
    let opts = QuadOptions::new(0.0, 1e-8);
    let mut failure = None;
    let q = integrate_2d(
        |y1, y2| {
            let z = zeta_jet(y1)[3];
            match eta_jet(y2, cfg) {
                Ok(e) => [z.hypot(e.eta3)],
                Err(err) => {
                    failure.get_or_insert(err);
                    [0.0]
                }
            }
        },
        &[-l, 0.5, 1.0],
        |y1| vec![0.0, slope * (y1 + l)],
        &opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(2.0 * cfg.beta * q.checked(&opts)?[0])
}

fn companion_sums(inst: &DensityInstance, n_max: usize) -> Result<CompanionReport> {
    let g = inst.cfg.gamma;
    let terms = (1..=n_max)
        .into_par_iter()
        .map(|n| companion_term(inst, n))
        .collect::<Result<Vec<f64>>>()?;
    let mut partial_sums = Vec::with_capacity(n_max);
    let mut acc = 0.0;
    for t in &terms {
        acc += t;
        partial_sums.push(acc);
    }
    // Terms decay like n^{-p}; the tail beyond N is about term_N · N / (p − 1).
    let p = g.min(2.0);
    let tail = terms[n_max - 1] * n_max as f64 / (p - 1.0);
    let limit = acc + tail;
    let s100 = partial_sums[99.min(n_max - 1)];
    Ok(CompanionReport {
        terms,
        partial_sums,
        limit_estimate: limit,
        tail_after_100: (limit - s100) / limit,
    })
}

/// Jump of `f⁻` across the common part of the edge between triangles `n`, `n+1`.
fn edge_jump(inst: &DensityInstance, n: usize, samples: usize) -> Result<EdgeJump> {
    let chain = inst.chain.as_ref().expect("chain instance carries its chain");
    let cfg = &inst.cfg;
    let mut max_jump = 0.0f64;
    for p in chain.shared_edge_points(n, samples) {
        let side = |m: usize| -> Result<f64> {
            let (y1, y2) = chain.to_local(m, p);
            let l = chain.l[m];
            let top = pow(l, cfg.gamma) / 2.0 * (y1 + l);
            triangle_target(y1.clamp(-l, 1.0), y2.clamp(-top, top), cfg)
        };
        max_jump = max_jump.max((side(n)? - side(n + 1)?).abs());
    }
    let l = chain.l[n];
    Ok(EdgeJump {
        n: n + 1,
        max_jump,
        scale: pow(l, cfg.gamma) + l * l,
    })
}

/// `σ(0, ε) / ε^{1/(γ+1)}` for the family used in the Hölder fit.
pub fn holder_constant(inst: &DensityInstance, eps: f64) -> Result<f64> {
    Ok(sigma_at_point(Point::new(0.0, eps), inst)? / eps.powf(1.0 / (inst.cfg.gamma + 1.0)))
}

/// Allowed growth of the envelope constant when the range extends a decade closer to 0.
pub const ENVELOPE_TOL: f64 = 0.1;

/// Linear envelope `|c′(a)| <= Ĉ a` of the smooth-variant correction below `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub grid: Vec<f64>,
    /// `|c′(a)| / a` with `c′` by central differences of `c`.
    pub ratios: Vec<f64>,
    /// `Ĉ` over the whole grid.
    pub constant: f64,
    /// `Ĉ` over the part of the grid at least ten times the smallest `a`.
    pub constant_coarse: f64,
    /// Largest relative gap between the differenced and the analytic `c′`.
    pub derivative_mismatch: f64,
    pub verdict: Verdict,
}

/// Samples `|c′(a)|/a` on a log grid over `(a_min, ε)` and checks that the
/// bound does not grow as the range extends towards 0.
pub fn correction_envelope(inst: &DensityInstance, a_min: f64, n: usize) -> Result<EnvelopeReport> {
    let sc = inst
        .smooth
        .as_ref()
        .ok_or_else(|| TdError::InvalidParameter("correction envelope needs a smooth instance".into()))?;
    if !(a_min > 0.0 && a_min < sc.eps / 10.0) || n < 4 {
        return Err(TdError::InvalidParameter(format!(
            "need 0 < a_min < eps/10 and n >= 4, got a_min={a_min}, n={n}"
        )));
    }
    let cfg = &inst.cfg;
    let grid = log_space(a_min, sc.eps * (1.0 - 1e-6), n);
    let rows = grid
        .par_iter()
        .map(|&a| -> Result<(f64, f64)> {
            let h = 1e-3 * a;
            let fd = (smooth_correction_c(a + h, sc, cfg)? - smooth_correction_c(a - h, sc, cfg)?) / (2.0 * h);
            let exact = smooth_correction_dc(a, sc, cfg)?;
            let mismatch = (fd - exact).abs() / exact.abs().max(1e-300);
            Ok((fd.abs() / a, mismatch))
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let constant = ratios.iter().copied().fold(0.0, f64::max);
    let constant_coarse = grid
        .iter()
        .zip(&ratios)
        .filter(|(a, _)| **a >= 10.0 * a_min)
        .map(|(_, r)| *r)
        .fold(0.0, f64::max);
    let verdict = if constant.is_finite() && constant <= (1.0 + ENVELOPE_TOL) * constant_coarse {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(EnvelopeReport {
        grid,
        ratios,
        constant,
        constant_coarse,
        derivative_mismatch: rows.iter().map(|r| r.1).fold(0.0, f64::max),
        verdict,
    })
}
