//! Property tests for geometric and transport invariants.

use proptest::prelude::*;
use td_core::densities::DensityInstance;
use td_core::geometry::{in_domain, point_to_ray, ray_length, ray_to_point, unit_ray_direction, Point, RayCoord};
use td_core::transport::potential_u;
use td_core::verify::{quantize_density, solve_discrete_ot, DiscreteMeasure, Side};
use td_core::GammaConfig;

fn cfg(gamma: f64) -> GammaConfig {
    GammaConfig::new(gamma).unwrap()
}

/// Uniform point of the triangle from two unit variates.
fn triangle_point(u: f64, v: f64) -> Point {
    let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
    let (a, b, c) = ((-1.0, 0.0), (1.0, 0.0), (1.0, 1.0));
    Point::new(
        a.0 + u * (b.0 - a.0) + v * (c.0 - a.0),
        a.1 + u * (b.1 - a.1) + v * (c.1 - a.1),
    )
}

fn brute_force_assignment(cost: &[Vec<f64>]) -> f64 {
    fn go(row: usize, used: &mut Vec<bool>, cost: &[Vec<f64>], acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..cost.len() {
            if !used[j] {
                used[j] = true;
                go(row + 1, used, cost, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    go(0, &mut vec![false; cost.len()], cost, 0.0, &mut best);
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ray_coordinates_round_trip(gamma in 0.5f64..4.0, t in 0.01f64..0.99, a in 0.01f64..0.99) {
        let c = cfg(gamma);
        let p = ray_to_point(RayCoord::new(t, a), &c);
        prop_assert!(in_domain(p, 1e-12));
        let back = point_to_ray(p, &c).unwrap();
        prop_assert!((back.t - t).abs() < 1e-9, "t {} vs {}", back.t, t);
        prop_assert!((back.a - a).abs() < 1e-9, "a {} vs {}", back.a, a);
    }

    #[test]
    fn ray_endpoints_are_foot_and_far_edge(gamma in 0.5f64..4.0, a in 0.0f64..1.0) {
        let c = cfg(gamma);
        let foot = ray_to_point(RayCoord::new(0.0, a), &c);
        let tip = ray_to_point(RayCoord::new(1.0, a), &c);
        prop_assert!((foot.x1 + a).abs() < 1e-15 && foot.x2 == 0.0);
        prop_assert!((tip.x1 - 1.0).abs() < 1e-15);
        prop_assert!((foot.dist(&tip) - ray_length(a, &c)).abs() < 1e-12);
        let (d1, d2) = unit_ray_direction(a, &c);
        prop_assert!((d1.hypot(d2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn points_map_into_the_unit_square(gamma in 0.5f64..4.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let c = cfg(gamma);
        let p = triangle_point(u, v);
        let r = point_to_ray(p, &c).unwrap();
        prop_assert!((0.0..=1.0).contains(&r.t) && (0.0..=1.0).contains(&r.a));
        prop_assert!(ray_to_point(r, &c).dist(&p) < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn potential_is_one_lipschitz(
        gamma in prop::sample::select(vec![1.0, 2.0, 3.0]),
        u1 in 0.0f64..1.0, v1 in 0.0f64..1.0, u2 in 0.0f64..1.0, v2 in 0.0f64..1.0,
    ) {
        let c = cfg(gamma);
        let (p, q) = (triangle_point(u1, v1), triangle_point(u2, v2));
        let du = potential_u(p, &c).unwrap() - potential_u(q, &c).unwrap();
        prop_assert!(du.abs() <= p.dist(&q) + 1e-9, "|du| {} > |p-q| {}", du.abs(), p.dist(&q));
    }

    #[test]
    fn potential_drops_at_unit_rate_along_rays(
        gamma in prop::sample::select(vec![1.0, 2.0, 3.0]),
        a in 0.01f64..0.99, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0,
    ) {
        let c = cfg(gamma);
        let p = ray_to_point(RayCoord::new(t1, a), &c);
        let q = ray_to_point(RayCoord::new(t2, a), &c);
        let du = potential_u(p, &c).unwrap() - potential_u(q, &c).unwrap();
        prop_assert!((du - (t2 - t1) * ray_length(a, &c)).abs() < 1e-9);
    }

    #[test]
    fn discrete_plan_matches_assignment_optimum(
        pts in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0), 1..6),
    ) {
        let n = pts.len();
        let w = 1.0 / n as f64;
        let mu = DiscreteMeasure::new(pts.iter().map(|p| (Point::new(p.0, p.1), w)).collect()).unwrap();
        let nu = DiscreteMeasure::new(pts.iter().map(|p| (Point::new(p.2, p.3), w)).collect()).unwrap();
        let cost: Vec<Vec<f64>> = mu.atoms.iter()
            .map(|(x, _)| nu.atoms.iter().map(|(y, _)| x.dist(y)).collect())
            .collect();
        let plan = solve_discrete_ot(&mu, &nu).unwrap();
        let exact = w * brute_force_assignment(&cost);
        prop_assert!((plan.cost - exact).abs() <= 1e-12 * exact.max(1.0), "{} vs {}", plan.cost, exact);
    }

    #[test]
    fn discrete_plan_is_certified(
        src in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.1f64..1.0), 1..30),
        dst in prop::collection::vec((-1.0f64..1.0, 0.0f64..1.0, 0.1f64..1.0), 1..30),
    ) {
        let normalise = |v: &[(f64, f64, f64)]| {
            let s: f64 = v.iter().map(|p| p.2).sum();
            DiscreteMeasure::new(v.iter().map(|p| (Point::new(p.0, p.1), p.2 / s)).collect()).unwrap()
        };
        let (mu, nu) = (normalise(&src), normalise(&dst));
        let plan = solve_discrete_ot(&mu, &nu).unwrap();
        let cert = plan.certificate;
        prop_assert!(cert.row_residual <= 1e-10 && cert.column_residual <= 1e-10);
        prop_assert!(cert.dual_infeasibility <= 1e-9);
        prop_assert!((plan.cost - cert.dual_value).abs() <= 1e-9);
        prop_assert!(plan.entries.iter().all(|e| e.2 >= 0.0));
        let independent: f64 = mu.atoms.iter()
            .flat_map(|(x, wx)| nu.atoms.iter().map(move |(y, wy)| wx * wy * x.dist(y)))
            .sum();
        prop_assert!(plan.cost <= independent + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn quantized_marginals_carry_unit_mass(
        gamma in prop::sample::select(vec![0.5, 1.0, 2.0]),
        cells in 1usize..12,
    ) {
        let inst = DensityInstance::single(cfg(gamma));
        for side in [Side::Source, Side::Target] {
            let m = quantize_density(&inst, side, cells).unwrap();
            prop_assert!((m.total - 1.0).abs() < 1e-12, "{:?} total {}", side, m.total);
            prop_assert!(m.atoms.iter().all(|(p, w)| *w > 0.0 && in_domain(*p, 1e-12)));
        }
    }
}
