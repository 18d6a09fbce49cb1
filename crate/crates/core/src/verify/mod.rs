//! Independent checks that `σ`, `u` and the ray-wise plan solve the transport problem.

pub mod duality;
pub mod lp;
pub mod weak;

use serde::{Deserialize, Serialize};

use crate::densities::DensityInstance;
use crate::error::Result;

pub use duality::{backward_flux_cost, dual_objective, duality_gap, monotone_ray_plan_cost, ray_plan_cost, DualityCertificate};
pub use lp::{quantize_density, solve_discrete_ot, DiscreteMeasure, DiscretePlan, LpCertificate, Side};
pub use weak::{default_battery, gradient_constraints_audit, weak_pde_residual, Bump, GradientAudit};

/// Discrete OT cost between the quantizations of `f⁺` and `f⁻`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOracle {
    pub cells: usize,
    pub source_atoms: usize,
    pub target_atoms: usize,
    pub cost: f64,
    pub certificate: LpCertificate,
}

pub fn lp_oracle(inst: &DensityInstance, cells: usize) -> Result<LpOracle> {
    let mu = quantize_density(inst, Side::Source, cells)?;
    let nu = quantize_density(inst, Side::Target, cells)?;
    let plan = solve_discrete_ot(&mu, &nu)?;
    Ok(LpOracle {
        cells,
        source_atoms: mu.len(),
        target_atoms: nu.len(),
        cost: plan.cost,
        certificate: plan.certificate,
    })
}

/// Combined report written by `td verify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub primal_cost: Option<f64>,
    pub dual_value: Option<f64>,
    pub gap: Option<f64>,
    pub lp_cost: Option<f64>,
    /// Quantization cells per axis behind `lp_cost`.
    pub resolution: Option<usize>,
    /// Weak-form residuals, one per test function.
    pub residuals: Vec<f64>,
}

impl Certificate {
    pub fn from_parts(duality: Option<&DualityCertificate>, lp: Option<&LpOracle>, residuals: Vec<f64>) -> Self {
        Certificate {
            primal_cost: duality.map(|d| d.primal_cost),
            dual_value: duality.map(|d| d.dual_value),
            gap: duality.map(|d| d.gap),
            lp_cost: lp.map(|l| l.cost),
            resolution: lp.map(|l| l.cells),
            residuals,
        }
    }
}
