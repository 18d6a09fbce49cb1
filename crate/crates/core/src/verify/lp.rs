//! Exact discrete optimal transport for the cost `|x − y|`, used as an
//! independent oracle on quantized densities.
//!
//! The solver is a primal network simplex on the complete bipartite graph
//! plus an artificial root joined to every node by a big-M arc. Trees are kept
//! strongly feasible (the leaving arc is the last blocking arc met when the
//! cycle is traversed from its apex along the entering arc), which rules out
//! cycling without perturbing the weights. Long runs of degenerate pivots
//! switch pricing to Bland's smallest-index rule until progress resumes.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::densities::{triangle_target, DensityInstance, DensityKind};
use crate::error::{Result, TdError};
use crate::geometry::Point;

/// Largest number of atoms per side the LP accepts.
pub const MAX_ATOMS: usize = 4096;
/// Largest tolerated difference between the two totals.
pub const BALANCE_TOL: f64 = 1e-10;
/// Largest number of quantization cells per axis.
pub const MAX_CELLS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(Point, f64)>,
    pub total: f64,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(Point, f64)>) -> Result<Self> {
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(TdError::InvalidParameter(format!("atom weight must be positive, got {w}")));
        }
        let total = atoms.iter().map(|a| a.1).sum();
        Ok(DiscreteMeasure { atoms, total })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

/// Optimality evidence recovered from the final basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpCertificate {
    /// `max(0, −reduced cost)` over all transport arcs, relative to the largest cost.
    pub dual_infeasibility: f64,
    /// `max |reduced cost|` over arcs that carry mass.
    pub complementary_slackness: f64,
    pub row_residual: f64,
    pub column_residual: f64,
    /// `Σ ν_j ψ_j − Σ μ_i φ_i`, equal to the cost at optimality.
    pub dual_value: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePlan {
    /// `(source index, target index, mass)` with positive mass.
    pub entries: Vec<(usize, usize, f64)>,
    pub cost: f64,
    pub certificate: LpCertificate,
}

struct Network<'a> {
    src: &'a [(Point, f64)],
    dst: &'a [(Point, f64)],
    ns: usize,
    nt: usize,
    m: usize,
    big_m: f64,
}

impl Network<'_> {
    fn root(&self) -> usize {
        self.ns + self.nt
    }

    fn n_arcs(&self) -> usize {
        self.m + self.ns + self.nt
    }

    fn tail(&self, k: usize) -> usize {
        if k < self.m {
            k / self.nt
        } else if k < self.m + self.ns {
            k - self.m
        } else {
            self.root()
        }
    }

    fn head(&self, k: usize) -> usize {
        if k < self.m {
            self.ns + k % self.nt
        } else if k < self.m + self.ns {
            self.root()
        } else {
            self.ns + (k - self.m - self.ns)
        }
    }

    fn cost(&self, k: usize) -> f64 {
        if k < self.m {
            self.src[k / self.nt].0.dist(&self.dst[k % self.nt].0)
        } else {
            self.big_m
        }
    }
}

struct Tree {
    parent: Vec<usize>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    pi: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl Tree {
    fn rebuild(&mut self, net: &Network, basis: &[usize]) {
        for a in &mut self.adj {
            a.clear();
        }
        for &k in basis {
            self.adj[net.tail(k)].push(k);
            self.adj[net.head(k)].push(k);
        }
        let root = net.root();
        let n = self.parent.len();
        self.parent[root] = usize::MAX;
        self.parent_arc[root] = usize::MAX;
        self.depth[root] = 0;
        self.pi[root] = 0.0;
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for idx in 0..self.adj[x].len() {
                let k = self.adj[x][idx];
                let (u, v) = (net.tail(k), net.head(k));
                let y = if u == x { v } else { u };
                if seen[y] {
                    continue;
                }
                seen[y] = true;
                self.parent[y] = x;
                self.parent_arc[y] = k;
                self.depth[y] = self.depth[x] + 1;
                // Basic arcs have zero reduced cost: c + π_tail − π_head = 0.
                self.pi[y] = if u == x { self.pi[x] + net.cost(k) } else { self.pi[x] - net.cost(k) };
                queue.push_back(y);
            }
        }
    }
}

/// Exact optimal plan between two discrete measures of equal mass.
pub fn solve_discrete_ot(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<DiscretePlan> {
    for m in [mu, nu] {
        if m.len() > MAX_ATOMS {
            return Err(TdError::TooLarge {
                atoms: m.len(),
                limit: MAX_ATOMS,
            });
        }
        if m.is_empty() {
            return Err(TdError::InvalidParameter("measure has no atoms".into()));
        }
    }
    if (mu.total - nu.total).abs() > BALANCE_TOL {
        return Err(TdError::Unbalanced(mu.total, nu.total));
    }
    let (ns, nt) = (mu.len(), nu.len());
    let max_cost = mu
        .atoms
        .iter()
        .flat_map(|a| nu.atoms.iter().map(move |b| a.0.dist(&b.0)))
        .fold(0.0f64, f64::max);
    let net = Network {
        src: &mu.atoms,
        dst: &nu.atoms,
        ns,
        nt,
        m: ns * nt,
        big_m: 1.0 + (ns + nt + 1) as f64 * max_cost.max(1.0),
    };
    let n_nodes = ns + nt + 1;
    let n_arcs = net.n_arcs();
    let mut flow = vec![0.0; n_arcs];
    let mut basis: Vec<usize> = Vec::with_capacity(ns + nt);
    let mut slot = vec![usize::MAX; n_arcs];
    // Initial tree: every flow strictly positive, so strongly feasible.
    for i in 0..ns {
        let k = net.m + i;
        flow[k] = mu.atoms[i].1;
        slot[k] = basis.len();
        basis.push(k);
    }
    for j in 0..nt {
        let k = net.m + ns + j;
        flow[k] = nu.atoms[j].1;
        slot[k] = basis.len();
        basis.push(k);
    }
    let mut tree = Tree {
        parent: vec![0; n_nodes],
        parent_arc: vec![0; n_nodes],
        depth: vec![0; n_nodes],
        pi: vec![0.0; n_nodes],
        adj: vec![Vec::new(); n_nodes],
    };
    tree.rebuild(&net, &basis);

    let eps = 1e-12 * max_cost.max(1e-300);
    let block = ((n_arcs as f64).sqrt() as usize).max(16);
    let mut next = 0usize;
    let mut pivots = 0usize;
    let mut degenerate_run = 0usize;
    let max_pivots = 50 * n_arcs + 10_000;
    let rc = |k: usize, tree: &Tree| net.cost(k) + tree.pi[net.tail(k)] - tree.pi[net.head(k)];

    loop {
        let bland = degenerate_run > 10 * (ns + nt);
        let entering = if bland {
            (0..n_arcs).find(|&k| slot[k] == usize::MAX && rc(k, &tree) < -eps)
        } else {
            // Block search: most negative reduced cost within the first block that has one.
            let mut best = None;
            let mut best_rc = -eps;
            let mut scanned = 0;
            while scanned < n_arcs {
                let end = (scanned + block).min(n_arcs);
                while scanned < end {
                    let k = next;
                    next = if next + 1 == n_arcs { 0 } else { next + 1 };
                    scanned += 1;
                    if slot[k] != usize::MAX {
                        continue;
                    }
                    let r = rc(k, &tree);
                    if r < best_rc {
                        best_rc = r;
                        best = Some(k);
                    }
                }
                if best.is_some() {
                    break;
                }
            }
            best
        };
        let Some(k_in) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(TdError::NoConvergence(format!("network simplex exceeded {max_pivots} pivots")));
        }

        // Cycle: apex → … → u, u → v, v → … → apex.
        let (u, v) = (net.tail(k_in), net.head(k_in));
        let (mut a, mut b) = (u, v);
        let mut up_u = Vec::new();
        let mut up_v = Vec::new();
        while a != b {
            if tree.depth[a] >= tree.depth[b] {
                up_u.push(a);
                a = tree.parent[a];
            } else {
                up_v.push(b);
                b = tree.parent[b];
            }
        }
        // Orientation of each tree arc along the cycle: true when flow grows.
        let mut delta = f64::INFINITY;
        let mut leaving = usize::MAX;
        let mut visit = |k: usize, forward: bool| {
            if !forward && flow[k] <= delta {
                delta = flow[k];
                leaving = k;
            }
        };
        for &y in up_u.iter().rev() {
            let k = tree.parent_arc[y];
            visit(k, net.head(k) == y);
        }
        for &x in &up_v {
            let k = tree.parent_arc[x];
            visit(k, net.tail(k) == x);
        }
        debug_assert!(leaving != usize::MAX, "transport network has no directed cycles");
        if delta > 0.0 {
            for &y in &up_u {
                let k = tree.parent_arc[y];
                if net.head(k) == y {
                    flow[k] += delta;
                } else {
                    flow[k] -= delta;
                }
            }
            for &x in &up_v {
                let k = tree.parent_arc[x];
                if net.tail(k) == x {
                    flow[k] += delta;
                } else {
                    flow[k] -= delta;
                }
            }
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
        flow[leaving] = 0.0;
        flow[k_in] = delta;
        let s = slot[leaving];
        slot[leaving] = usize::MAX;
        basis[s] = k_in;
        slot[k_in] = s;
        tree.rebuild(&net, &basis);
    }

    let mut entries = Vec::new();
    let mut cost = 0.0;
    let mut rows = vec![0.0; ns];
    let mut cols = vec![0.0; nt];
    let mut slack = 0.0f64;
    let mut infeasible = 0.0f64;
    for k in 0..net.m {
        let r = rc(k, &tree);
        infeasible = infeasible.max(-r);
        if flow[k] > 0.0 {
            let (i, j) = (k / nt, k % nt);
            entries.push((i, j, flow[k]));
            cost += flow[k] * net.cost(k);
            rows[i] += flow[k];
            cols[j] += flow[k];
            slack = slack.max(r.abs());
        }
    }
    let row_residual = rows.iter().zip(&mu.atoms).map(|(r, a)| (r - a.1).abs()).fold(0.0, f64::max);
    let column_residual = cols.iter().zip(&nu.atoms).map(|(c, a)| (c - a.1).abs()).fold(0.0, f64::max);
    let dual_value = (0..nt).map(|j| nu.atoms[j].1 * tree.pi[ns + j]).sum::<f64>()
        - (0..ns).map(|i| mu.atoms[i].1 * tree.pi[i]).sum::<f64>();
    let scale = max_cost.max(1e-300);
    Ok(DiscretePlan {
        entries,
        cost,
        certificate: LpCertificate {
            dual_infeasibility: infeasible.max(0.0) / scale,
            complementary_slackness: slack / scale,
            row_residual,
            column_residual,
            dual_value,
            pivots,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Source,
    Target,
}

/// Clip a convex polygon against the half-plane `n·x + c >= 0`.
fn clip(poly: &[(f64, f64)], n: (f64, f64), c: f64) -> Vec<(f64, f64)> {
    let side = |p: (f64, f64)| n.0 * p.0 + n.1 * p.1 + c;
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (side(p), side(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push((p.0 + t * (q.0 - p.0), p.1 + t * (q.1 - p.1)));
        }
    }
    out
}

/// Cell of the uniform grid on `[-1, 1] × [0, 1]`, clipped to the triangle.
fn cell_polygon(i: usize, j: usize, cells: usize) -> Vec<(f64, f64)> {
    let (w, h) = (2.0 / cells as f64, 1.0 / cells as f64);
    let (x0, y0) = (-1.0 + i as f64 * w, j as f64 * h);
    let rect = vec![(x0, y0), (x0 + w, y0), (x0 + w, y0 + h), (x0, y0 + h)];
    let p = clip(&rect, (0.0, 1.0), 0.0);
    let p = clip(&p, (-1.0, 0.0), 1.0);
    clip(&p, (1.0, -2.0), 1.0)
}

fn polygon_area_centroid(poly: &[(f64, f64)]) -> (f64, (f64, f64)) {
    let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let cr = p.0 * q.1 - q.0 * p.1;
        a += cr;
        cx += (p.0 + q.0) * cr;
        cy += (p.1 + q.1) * cr;
    }
    let area = a / 2.0;
    if area == 0.0 {
        return (0.0, poly[0]);
    }
    (area, (cx / (6.0 * area), cy / (6.0 * area)))
}

const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332, 0.118_463_442_528_094_5),
];

/// `∫` over a convex polygon by a fan of collapsed-square Gauss rules.
fn polygon_integral<F: FnMut(f64, f64) -> Result<f64>>(poly: &[(f64, f64)], mut f: F) -> Result<f64> {
    let a = poly[0];
    let mut total = 0.0;
    for w in poly[1..].windows(2) {
        let (b, c) = (w[0], w[1]);
        let twice_area = ((b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)).abs();
        for &(s, ws) in &GAUSS5 {
            for &(r, wr) in &GAUSS5 {
                // (s, r) ↦ a + s(b − a) + s r (c − b), Jacobian 2·area·s.
                let x = a.0 + s * (b.0 - a.0) + s * r * (c.0 - b.0);
                let y = a.1 + s * (b.1 - a.1) + s * r * (c.1 - b.1);
                total += ws * wr * s * twice_area * f(x, y)?;
            }
        }
    }
    Ok(total)
}

/// One atom per grid cell meeting the triangle, at the cell's centroid, carrying
/// the cell mass of `f⁺` or `f⁻`. The last atom absorbs the rounding so that
/// both sides carry the exact total mass, the triangle's area.
pub fn quantize_density(inst: &DensityInstance, side: Side, cells: usize) -> Result<DiscreteMeasure> {
    if inst.kind != DensityKind::SingleTriangle {
        return Err(TdError::InvalidParameter("quantization is implemented for the single triangle".into()));
    }
    if cells == 0 || cells > MAX_CELLS {
        return Err(TdError::InvalidParameter(format!("cells must lie in 1..={MAX_CELLS}, got {cells}")));
    }
    let cfg = &inst.cfg;
    let mut atoms = Vec::new();
    let mut exact_total = 0.0;
    for j in 0..cells {
        for i in 0..cells {
            let poly = cell_polygon(i, j, cells);
            if poly.len() < 3 {
                continue;
            }
            let (area, (cx, cy)) = polygon_area_centroid(&poly);
            if area <= 1e-15 {
                continue;
            }
            exact_total += area;
            let w = match side {
                Side::Source => area,
                Side::Target => polygon_integral(&poly, |x, y| triangle_target(x, y.max(0.0), cfg))?,
            };
            atoms.push((Point::new(cx, cy), w));
        }
    }
    let sum: f64 = atoms.iter().map(|a| a.1).sum();
    if let Some(last) = atoms.last_mut() {
        last.1 += exact_total - sum;
    }
    DiscreteMeasure::new(atoms)
}
