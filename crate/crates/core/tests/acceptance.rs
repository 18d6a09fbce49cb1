//! Acceptance criteria 1–10. Each test prints one PASS/FAIL line, with the
//! measured values, directly to stderr so the line survives output capture.

use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use td_core::densities::{
    chain_mass_balance_residual, mass_balance_residual, zeta_jet, zeta_mass_closed_form, DensityInstance, SmoothConfig,
};
use td_core::eta::{eta_holder_bound, eta_jet};
use td_core::geometry::{jacobian, jacobian_da, jacobian_dt, Point, RayCoord};
use td_core::numerics::{integrate, integrate_2d, log_space, QuadOptions};
use td_core::regularity::{
    bv_partial_sums, correction_envelope, divergence_rate_fit, holder_exponent_fit, lp_gradient_norms, Sector, Verdict,
};
use td_core::transport::{sigma, sigma_at_point, sigma_eval};
use td_core::verify::{default_battery, duality_gap, lp_oracle, monotone_ray_plan_cost, weak_pde_residual};
use td_core::GammaConfig;

fn verdict_line(id: u32, title: &str, pass: bool, detail: &str) {
    let line = format!("criterion {id:>2} {} {title}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({title}) failed: {detail}");
}

fn within(elapsed: Duration, budget_s: u64) -> bool {
    elapsed <= Duration::from_secs(budget_s)
}

fn cfg(gamma: f64, quad_tol: f64) -> GammaConfig {
    GammaConfig::new(gamma).unwrap().with_tolerances(quad_tol, 1e-12).unwrap()
}

#[test]
fn criterion_01_holder_scaling() {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [1.0, 2.0, 4.0] {
        let start = Instant::now();
        let r = holder_exponent_fit(&DensityInstance::single(GammaConfig::new(g).unwrap()), 1e-6, 1e-3, 16).unwrap();
        let took = start.elapsed();
        let expected = 1.0 / (g + 1.0);
        let ok = (r.fitted_exponent - expected).abs() <= 0.05 && r.r2 >= 0.99 && within(took, 30);
        pass &= ok;
        parts.push(format!(
            "gamma {g}: slope {:.4} (target {expected:.4}) r2 {:.5} {:.1}s",
            r.fitted_exponent,
            r.r2,
            took.as_secs_f64()
        ));
    }
    verdict_line(1, "Hölder scaling", pass, &parts.join("; "));
}

#[test]
fn criterion_02_sobolev_threshold() {
    // Divergent side: gamma 3, p 2 grows like (1/r0)^1.
    let start = Instant::now();
    let inst = DensityInstance::single(GammaConfig::new(3.0).unwrap());
    let radii: Vec<f64> = (0..=6).map(|k| 1e-2 * 0.5f64.powi(k)).chain([1e-4]).collect();
    let r = divergence_rate_fit(&inst, 2.0, &radii).unwrap();
    let t_div = start.elapsed();
    let div_ok = (r.fitted_exponent - 1.0).abs() <= 0.1 && r.r2 >= 0.99 && within(t_div, 120);

    // Convergent side: gamma 2, p 1.2 settles below r0 = 1e-4.
    let start = Instant::now();
    let inst = DensityInstance::single(GammaConfig::new(2.0).unwrap());
    let radii: Vec<f64> = (0..=6).map(|k| 1e-4 * 0.5f64.powi(k)).collect();
    let norms = lp_gradient_norms(&inst, 1.2, &radii, 0.1, Sector::for_exponent(2.0, 1.2)).unwrap();
    let t_conv = start.elapsed();
    let changes: Vec<f64> = norms.windows(2).map(|w| (w[1] - w[0]).abs() / w[0]).collect();
    let worst = changes.iter().copied().fold(0.0, f64::max);
    let conv_ok = worst < 0.01 && within(t_conv, 120);

    verdict_line(
        2,
        "Sobolev threshold",
        div_ok && conv_ok,
        &format!(
            "gamma 3 p 2: slope {:.4} r2 {:.5} {:.1}s; gamma 2 p 1.2: largest change per halving {:.2e} {:.1}s",
            r.fitted_exponent,
            r.r2,
            t_div.as_secs_f64(),
            worst,
            t_conv.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_03_duality_certificate() {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for g in [1.0, 2.0] {
        let c = duality_gap(&DensityInstance::single(cfg(g, 1e-9))).unwrap();
        pass &= c.relative_gap <= 1e-5;
        parts.push(format!(
            "gamma {g}: primal {:.10} dual {:.10} relative gap {:.3e}",
            c.primal_cost, c.dual_value, c.relative_gap
        ));
    }
    let took = start.elapsed();
    pass &= within(took, 60);
    parts.push(format!("{:.1}s", took.as_secs_f64()));
    verdict_line(3, "duality certificate", pass, &parts.join("; "));
}

#[test]
fn criterion_04_lp_oracle() {
    let start = Instant::now();
    let inst = DensityInstance::single(cfg(1.0, 1e-9));
    let ray = monotone_ray_plan_cost(&inst).unwrap();
    let coarse = lp_oracle(&inst, 16).unwrap();
    let fine = lp_oracle(&inst, 32).unwrap();
    let took = start.elapsed();
    let (gap16, gap32) = ((coarse.cost - ray).abs(), (fine.cost - ray).abs());
    let certified = [coarse, fine].iter().all(|o| {
        o.certificate.dual_infeasibility <= 1e-9
            && o.certificate.complementary_slackness <= 1e-9
            && o.certificate.row_residual <= 1e-10
            && o.certificate.column_residual <= 1e-10
    });
    let pass = gap32 / ray <= 0.05 && gap16 / gap32 >= 1.5 && certified && within(took, 120);
    verdict_line(
        4,
        "LP oracle agreement",
        pass,
        &format!(
            "ray cost {ray:.8}, LP 16² {:.8}, LP 32² {:.8}, relative gap 32² {:.3e}, shrink 16²→32² {:.3}x, certified {certified}, {:.1}s",
            coarse.cost,
            fine.cost,
            gap32 / ray,
            gap16 / gap32,
            took.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_05_weak_residual() {
    let start = Instant::now();
    let r = weak_pde_residual(&DensityInstance::single(cfg(1.0, 1e-9)), &default_battery()).unwrap();
    let took = start.elapsed();
    let worst = r.iter().copied().fold(0.0, f64::max);
    verdict_line(
        5,
        "weak MK residual",
        r.len() == 12 && worst <= 1e-6 && within(took, 60),
        &format!("max residual {worst:.3e} over {} functions, {:.1}s", r.len(), took.as_secs_f64()),
    );
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

#[test]
fn criterion_06_derivative_identities() {
    let start = Instant::now();
    let inst = DensityInstance::single(cfg(1.0, 1e-12));
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let (t, a) = (rng.gen_range(0.02..0.98), rng.gen_range(0.02..0.98));
        let e = sigma_eval(RayCoord::new(t, a), &inst).unwrap();
        let s = |t, a| sigma(RayCoord::new(t, a), &inst).unwrap();
        let h = 1e-4;
        let fd_t = (s(t + h, a) - s(t - h, a)) / (2.0 * h);
        let fd_a = (s(t, a + h) - s(t, a - h)) / (2.0 * h);
        let hx = 1e-5 * e.point.x2;
        let sx = |x2| sigma_at_point(Point::new(e.point.x1, x2), &inst).unwrap();
        let fd_x2 = (sx(e.point.x2 + hx) - sx(e.point.x2 - hx)) / (2.0 * hx);
        worst[0] = worst[0].max(relative(e.dsigma_dt, fd_t));
        worst[1] = worst[1].max(relative(e.dsigma_da, fd_a));
        worst[2] = worst[2].max(relative(e.dsigma_dx2, fd_x2));
    }

    // Displayed Jacobian identities at sampled (t, τ, a) and several γ.
    let mut identity = [0.0f64; 3];
    for g in [0.5, 1.0, 2.0, 4.0] {
        let c = GammaConfig::new(g).unwrap();
        for _ in 0..50 {
            let (t, tau, a): (f64, f64, f64) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0), rng.gen_range(0.01..1.0));
            let (rt, rs) = (RayCoord::new(t, a), RayCoord::new(tau, a));
            // ∂aJ = (γ(γ−1)(1+a)²t + (γ(1+a)(1+2t)+a)a) a^{γ−2}/2
            let displayed = (g * (g - 1.0) * (1.0 + a).powi(2) * t + (g * (1.0 + a) * (1.0 + 2.0 * t) + a) * a)
                * a.powf(g - 2.0)
                / 2.0;
            let da = jacobian_da(rt, &c).unwrap();
            identity[0] = identity[0].max((da - displayed).abs() / displayed.abs().max(1.0));
            // J(t)∂aJ(τ) − J(τ)∂aJ(t) = (γ/4)(1+a)²(t−τ)a^{2γ−2}
            let lhs = jacobian(rt, &c).unwrap() * jacobian_da(rs, &c).unwrap()
                - jacobian(rs, &c).unwrap() * jacobian_da(rt, &c).unwrap();
            let rhs = g / 4.0 * (1.0 + a).powi(2) * (t - tau) * a.powf(2.0 * g - 2.0);
            identity[1] = identity[1].max((lhs - rhs).abs() / rhs.abs().max(1.0));
            // ∫₀ᵗ ∂tJ · J dτ / J(t)² = (1 − a²/(γ(1+a)t + a)²)/2
            let jt = jacobian(rt, &c).unwrap();
            let dtj = jacobian_dt(rt, &c).unwrap();
            let q = integrate(|s| dtj * jacobian(RayCoord::new(s, a), &c).unwrap(), 0.0, t, &QuadOptions::new(1e-15, 1e-14));
            let ratio = q.scalar() / (jt * jt);
            let closed = 0.5 * (1.0 - a * a / (g * (1.0 + a) * t + a).powi(2));
            identity[2] = identity[2].max((ratio - closed).abs());
        }
    }
    let took = start.elapsed();
    let pass = worst.iter().all(|&w| w <= 1e-3) && identity.iter().all(|&w| w <= 1e-10) && within(took, 60);
    verdict_line(
        6,
        "derivative identities",
        pass,
        &format!(
            "FD relative error dt {:.2e} da {:.2e} dx2 {:.2e} at 1000 points; identities {:.2e} {:.2e} {:.2e}; {:.1}s",
            worst[0],
            worst[1],
            worst[2],
            identity[0],
            identity[1],
            identity[2],
            took.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_07_mass_balance() {
    let grid = log_space(1e-3, 1.0, 20);
    let mut worst_single = 0.0f64;
    for g in [1.0, 2.0] {
        let inst = DensityInstance::single(GammaConfig::new(g).unwrap());
        for &a in &grid {
            worst_single = worst_single.max(mass_balance_residual(a, &inst).unwrap().abs());
        }
    }
    let chain = DensityInstance::chain(GammaConfig::new(2.0).unwrap(), 20).unwrap();
    let ls = chain.chain.as_ref().unwrap().l.clone();
    let mut worst_chain = 0.0f64;
    for n in [0, 4, 19] {
        for &a in &grid {
            worst_chain = worst_chain.max(chain_mass_balance_residual(&chain, n, a * ls[n]).unwrap().abs());
        }
    }
    let smooth = DensityInstance::smooth(GammaConfig::new(3.0).unwrap(), SmoothConfig::default()).unwrap();
    let mut worst_smooth = 0.0f64;
    for &a in &grid {
        worst_smooth = worst_smooth.max(mass_balance_residual(a, &smooth).unwrap().abs());
    }
    // −∫_{Δ_a} ζ″ against a^{γ+2}(1+a)²/2.
    let mut worst_closed = 0.0f64;
    for g in [0.5, 1.0, 2.0, 4.0] {
        for &a in &grid {
            let q = integrate_2d(
                |x1, _| [-zeta_jet(x1)[2]],
                &[-a, 1.0],
                |x1| vec![0.0, a.powf(g) / 2.0 * (x1 + a)],
                &QuadOptions::new(1e-14, 1e-13),
            );
            worst_closed = worst_closed.max((q.value[0] - zeta_mass_closed_form(a, g)).abs());
        }
    }
    let pass = worst_single <= 1e-9 && worst_chain <= 1e-9 && worst_smooth <= 1e-9 && worst_closed <= 1e-9;
    verdict_line(
        7,
        "mass balance",
        pass,
        &format!(
            "single {worst_single:.2e}, chain {worst_chain:.2e}, smooth {worst_smooth:.2e}, closed form {worst_closed:.2e} over 20 values of a"
        ),
    );
}

#[test]
fn criterion_08_bv_divergence() {
    let start = Instant::now();
    let inst = DensityInstance::chain(GammaConfig::new(2.0).unwrap(), 1000).unwrap();
    let r = bv_partial_sums(&inst, 1000).unwrap();
    let took = start.elapsed();
    let window: Vec<f64> = r
        .scaling
        .parameter_grid
        .iter()
        .zip(&r.ratio)
        .filter(|(n, _)| (500.0..=1000.0).contains(*n))
        .map(|(_, q)| *q)
        .collect();
    let hi = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = window.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = hi / lo - 1.0;
    let tail = r.companion.tail_after_100;
    let pass = window.len() >= 2 && spread <= 0.1 && tail < 0.01 && within(took, 300);
    verdict_line(
        8,
        "BV divergence",
        pass,
        &format!(
            "S_N/ln N in [{lo:.5}, {hi:.5}] over {} grid points of [500, 1000] (spread {:.1}%), companion tail after 100 {:.3}%, slope {:.3} r2 {:.4} ({:?}), {:.0}s",
            window.len(),
            100.0 * spread,
            100.0 * tail,
            r.scaling.fitted_exponent,
            r.scaling.r2,
            r.scaling.verdict,
            took.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_eta_cascade() {
    let mut worst_fd = 0.0f64;
    let mut envelope = Vec::new();
    let mut stable = true;
    for g in [1.0, 2.0, 4.0] {
        let c = GammaConfig::new(g).unwrap();
        for k in 1..=19 {
            let s = k as f64 / 20.0;
            let h = 1e-5 * s;
            let (lo, mid, hi) = (eta_jet(s - h, &c).unwrap(), eta_jet(s, &c).unwrap(), eta_jet(s + h, &c).unwrap());
            for order in 1..=4 {
                let fd = (hi.derivative(order - 1) - lo.derivative(order - 1)) / (2.0 * h);
                worst_fd = worst_fd.max(relative(mid.derivative(order), fd));
            }
        }
        let coarse = eta_holder_bound(&c, 200).unwrap();
        let fine = eta_holder_bound(&c, 2000).unwrap();
        let drift = (fine - coarse).abs() / fine;
        stable &= fine.is_finite() && drift <= 0.01;
        envelope.push(format!("gamma {g}: C {fine:.5} (drift {drift:.1e})"));
    }
    verdict_line(
        9,
        "eta cascade",
        worst_fd <= 1e-5 && stable,
        &format!("FD relative error {worst_fd:.2e}; {}", envelope.join(", ")),
    );
}

#[test]
fn criterion_10_smooth_variant() {
    let start = Instant::now();
    let inst = DensityInstance::smooth(GammaConfig::new(3.0).unwrap(), SmoothConfig::default()).unwrap();
    let worst = log_space(1e-3, 1.0, 20)
        .into_iter()
        .map(|a| mass_balance_residual(a, &inst).unwrap().abs())
        .fold(0.0, f64::max);
    let env = correction_envelope(&inst, 1e-4, 16).unwrap();
    let took = start.elapsed();
    verdict_line(
        10,
        "smooth variant",
        worst <= 1e-8 && env.verdict == Verdict::Consistent,
        &format!(
            "mass balance {worst:.2e}; |c'(a)|/a <= {:.4} on (1e-4, eps) vs {:.4} on (1e-3, eps); {:.1}s",
            env.constant,
            env.constant_coarse,
            took.as_secs_f64()
        ),
    );
}
