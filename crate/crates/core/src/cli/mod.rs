//! The `td` command line.
//!
//! Exit codes: 0 when every verdict is consistent, 2 when a check ran but
//! disagreed with the expected behaviour, 1 on numerical or data errors,
//! 64 on usage errors and 74 on I/O errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{GammaConfig, DEFAULT_QUAD_TOL, DEFAULT_ROOT_TOL};
use crate::densities::{mass_balance_residual, DensityInstance, SmoothConfig};
use crate::error::{Result, TdError};
use crate::numerics::log_space;
use crate::output::{eval_grid, render_heatmap_file, sidecar_path, write_grid, write_json, Report};
use crate::regularity::{bv_partial_sums, correction_envelope, divergence_rate_fit, holder_exponent_fit, Verdict};
use crate::verify::{
    default_battery, duality_gap, gradient_constraints_audit, lp_oracle, monotone_ray_plan_cost, weak_pde_residual,
    Certificate,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONSISTENT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;

#[derive(Debug, Parser)]
#[command(name = "td", version, about = "Transport-density counter-examples: evaluation, scaling experiments, certificates")]
pub struct Cli {
    /// Run the experiment described by a JSON spec instead of command-line flags.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Clone, Args)]
pub struct InstanceArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: f64,
    /// Density amplitude; defaults to the largest safe value for `gamma`.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    #[arg(long, default_value_t = DEFAULT_ROOT_TOL)]
    pub root_tol: f64,
}

impl InstanceArgs {
    fn config(&self) -> Result<GammaConfig> {
        let cfg = match self.beta {
            Some(b) => GammaConfig::with_beta(self.gamma, b)?,
            None => GammaConfig::new(self.gamma)?,
        };
        cfg.with_tolerances(self.quad_tol, self.root_tol)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyCheck {
    Duality,
    Lp,
    Weak,
    Gradient,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate σ, u and ∂x2σ on an n×n ray lattice and write CSV plus a JSON sidecar.
    Eval {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the Hölder exponent of σ at the origin.
    Holder {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 1e-6)]
        eps_min: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps_max: f64,
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Growth of the Lp norm of ∂x2σ as the excluded disc around the origin shrinks.
    Sobolev {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 1e-4)]
        r0_min: f64,
        #[arg(long, default_value_t = 1e-2)]
        r0_max: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial sums of the total variation along the triangle chain.
    Bv {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 1000)]
        n_max: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimality checks on the single-triangle instance.
    Verify {
        #[arg(value_enum)]
        check: VerifyCheck,
        #[command(flatten)]
        inst: InstanceArgs,
        /// Quantization cells per axis for the LP oracle.
        #[arg(long, default_value_t = 32)]
        cells: usize,
        /// Sample count for the gradient audit.
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mass balance and correction envelope of the smooth variant.
    Smooth {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value_t = 0.2)]
        eps_prime: f64,
        #[arg(long, default_value_t = 0.5)]
        a0: f64,
        #[arg(long, default_value_t = 1e-4)]
        a_min: f64,
        #[arg(long, default_value_t = 12)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render one column of an eval CSV as an SVG heatmap.
    Render {
        #[arg(long)]
        grid_csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "sigma")]
        field: String,
    },
}

/// Serializable form of one invocation: the subcommand name and its flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub command: String,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
}

impl ExperimentSpec {
    /// Equivalent argument vector; `check` becomes the positional verify target.
    pub fn to_args(&self) -> std::result::Result<Vec<String>, String> {
        let mut args = vec!["td".to_string(), self.command.clone()];
        if let Some(check) = self.params.get("check") {
            args.push(scalar(check).ok_or("check must be a string")?);
        }
        for (k, v) in &self.params {
            if k == "check" {
                continue;
            }
            let flag = format!("--{}", k.replace('_', "-"));
            match v {
                Value::Bool(true) => args.push(flag),
                Value::Bool(false) | Value::Null => {}
                v => {
                    args.push(flag);
                    args.push(scalar(v).ok_or_else(|| format!("parameter {k} must be a number or string"))?);
                }
            }
        }
        Ok(args)
    }
}

fn scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// One pass/fail line inside a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        CheckResult {
            name: name.to_string(),
            value,
            bound,
            pass: value <= bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutcome {
    pub certificate: Certificate,
    pub checks: Vec<CheckResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothOutcome {
    pub balance_grid: Vec<f64>,
    pub balance_residuals: Vec<f64>,
    pub envelope: crate::regularity::EnvelopeReport,
    pub checks: Vec<CheckResult>,
}

fn emit<T: Serialize>(out: Option<&Path>, report: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, report),
        None => {
            println!("{}", serde_json::to_string_pretty(report)?);
            Ok(())
        }
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Consistent => EXIT_OK,
        Verdict::Inconsistent | Verdict::Logarithmic => EXIT_INCONSISTENT,
    }
}

fn checks_code(checks: &[CheckResult]) -> i32 {
    if checks.iter().all(|c| c.pass) {
        EXIT_OK
    } else {
        EXIT_INCONSISTENT
    }
}

/// `r0_max · 2^(−k)` down to `r0_min`.
fn octave_radii(r0_min: f64, r0_max: f64) -> Result<Vec<f64>> {
    if !(r0_min > 0.0 && r0_min < r0_max) {
        return Err(TdError::InvalidParameter(format!("need 0 < r0_min < r0_max, got {r0_min}, {r0_max}")));
    }
    let mut r = vec![r0_max];
    while r[r.len() - 1] / 2.0 >= r0_min * (1.0 - 1e-12) {
        r.push(r[r.len() - 1] / 2.0);
    }
    Ok(r)
}

fn run_verify(check: VerifyCheck, cfg: GammaConfig, cells: usize, samples: usize) -> Result<VerifyOutcome> {
    let inst = DensityInstance::single(cfg);
    let wants = |c: VerifyCheck| check == c || check == VerifyCheck::All;
    let mut checks = Vec::new();
    let duality = if wants(VerifyCheck::Duality) || wants(VerifyCheck::Lp) {
        Some(duality_gap(&inst)?)
    } else {
        None
    };
    if wants(VerifyCheck::Duality) {
        let d = duality.as_ref().expect("computed above");
        checks.push(CheckResult::at_most("duality_relative_gap", d.relative_gap, 1e-5));
    }
    let lp = if wants(VerifyCheck::Lp) {
        let o = lp_oracle(&inst, cells)?;
        let ray = duality.as_ref().map_or_else(|| monotone_ray_plan_cost(&inst), |d| Ok(d.primal_cost))?;
        checks.push(CheckResult::at_most("lp_relative_difference", (o.cost - ray).abs() / ray, 0.05));
        checks.push(CheckResult::at_most("lp_dual_infeasibility", o.certificate.dual_infeasibility, 1e-9));
        checks.push(CheckResult::at_most(
            "lp_marginal_residual",
            o.certificate.row_residual.max(o.certificate.column_residual),
            1e-10,
        ));
        Some(o)
    } else {
        None
    };
    let residuals = if wants(VerifyCheck::Weak) {
        let battery = default_battery();
        let r = weak_pde_residual(&inst, &battery)?;
        let scaled = r
            .iter()
            .zip(&battery)
            .map(|(r, b)| r / (cfg.quad_tol * b.gradient_bound()))
            .fold(0.0, f64::max);
        checks.push(CheckResult::at_most("weak_residual_scaled", scaled, 50.0));
        r
    } else {
        Vec::new()
    };
    if wants(VerifyCheck::Gradient) {
        let g = gradient_constraints_audit(&inst, samples)?;
        checks.push(CheckResult::at_most("gradient_lipschitz_excess", g.lipschitz_excess, 1e-5));
        checks.push(CheckResult::at_most("gradient_saturation_defect", g.saturation_defect, 1e-5));
    }
    Ok(VerifyOutcome {
        certificate: Certificate::from_parts(duality.as_ref(), lp.as_ref(), residuals),
        checks,
    })
}

/// Runs one parsed command and returns its exit code.
pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::Eval { inst, grid, out } => {
            let cfg = inst.config()?;
            let (rows, meta) = eval_grid(&DensityInstance::single(cfg), grid)?;
            write_grid(&out, &rows, &meta)?;
            println!("wrote {} rows to {} (sidecar {})", rows.len(), out.display(), sidecar_path(&out).display());
            Ok(EXIT_OK)
        }
        Command::Holder {
            inst,
            eps_min,
            eps_max,
            points,
            out,
        } => {
            let d = DensityInstance::single(inst.config()?);
            let r = holder_exponent_fit(&d, eps_min, eps_max, points)?;
            let code = verdict_code(r.verdict);
            emit(out.as_deref(), &Report::new("holder", &d, r))?;
            Ok(code)
        }
        Command::Sobolev {
            inst,
            p,
            r0_min,
            r0_max,
            out,
        } => {
            let d = DensityInstance::single(inst.config()?);
            let r = divergence_rate_fit(&d, p, &octave_radii(r0_min, r0_max)?)?;
            let code = verdict_code(r.verdict);
            emit(out.as_deref(), &Report::new("sobolev", &d, r))?;
            Ok(code)
        }
        Command::Bv { inst, n_max, out } => {
            let d = DensityInstance::chain(inst.config()?, n_max)?;
            let r = bv_partial_sums(&d, n_max)?;
            let code = verdict_code(r.scaling.verdict);
            emit(out.as_deref(), &Report::new("bv", &d, r))?;
            Ok(code)
        }
        Command::Verify {
            check,
            inst,
            cells,
            samples,
            out,
        } => {
            let cfg = inst.config()?;
            let r = run_verify(check, cfg, cells, samples)?;
            let code = checks_code(&r.checks);
            emit(out.as_deref(), &Report::new("verify", &DensityInstance::single(cfg), r))?;
            Ok(code)
        }
        Command::Smooth {
            inst,
            eps,
            eps_prime,
            a0,
            a_min,
            points,
            out,
        } => {
            let d = DensityInstance::smooth(inst.config()?, SmoothConfig::new(eps, eps_prime, a0)?)?;
            let grid = log_space(1e-3, 1.0, 20);
            let residuals = grid
                .iter()
                .map(|&a| mass_balance_residual(a, &d))
                .collect::<Result<Vec<_>>>()?;
            let envelope = correction_envelope(&d, a_min, points)?;
            let checks = vec![
                CheckResult::at_most("mass_balance", residuals.iter().map(|r| r.abs()).fold(0.0, f64::max), 1e-8),
                CheckResult::at_most(
                    "envelope_growth",
                    envelope.constant / envelope.constant_coarse,
                    1.0 + crate::regularity::ENVELOPE_TOL,
                ),
            ];
            let code = checks_code(&checks);
            let r = SmoothOutcome {
                balance_grid: grid,
                balance_residuals: residuals,
                envelope,
                checks,
            };
            emit(out.as_deref(), &Report::new("smooth", &d, r))?;
            Ok(code)
        }
        Command::Render { grid_csv, out, field } => {
            render_heatmap_file(&grid_csv, &out, &field)?;
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
    }
}

fn error_code(e: &TdError) -> i32 {
    match e {
        TdError::Io(_) => EXIT_IO,
        TdError::InvalidParameter(_) => EXIT_USAGE,
        _ => EXIT_ERROR,
    }
}

fn parse<I, T>(args: I) -> std::result::Result<Cli, i32>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(args).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            EXIT_USAGE
        } else {
            EXIT_OK
        }
    })
}

fn load_spec(path: &Path) -> std::result::Result<Command, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        EXIT_IO
    })?;
    let spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| {
        eprintln!("error: {} is not a valid experiment spec: {e}", path.display());
        EXIT_USAGE
    })?;
    let args = spec.to_args().map_err(|e| {
        eprintln!("error: {e}");
        EXIT_USAGE
    })?;
    match parse(args)? {
        Cli {
            command: Some(c),
            config: None,
        } => Ok(c),
        _ => {
            eprintln!("error: experiment spec must name a subcommand and cannot nest --config");
            Err(EXIT_USAGE)
        }
    }
}

fn configure_threads() -> std::result::Result<(), i32> {
    let Ok(v) = std::env::var("TD_THREADS") else {
        return Ok(());
    };
    let n: usize = match v.trim().parse() {
        Ok(n) if n > 0 => n,
        _ => {
            eprintln!("error: TD_THREADS must be a positive integer, got {v:?}");
            return Err(EXIT_USAGE);
        }
    };
    // A pool may already exist when called twice in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let inner = || -> std::result::Result<i32, i32> {
        configure_threads()?;
        let command = match parse(args)? {
            Cli {
                config: Some(path),
                command: None,
            } => load_spec(&path)?,
            Cli {
                config: None,
                command: Some(c),
            } => c,
            Cli { config: Some(_), .. } => {
                eprintln!("error: --config cannot be combined with a subcommand");
                return Err(EXIT_USAGE);
            }
            Cli { command: None, .. } => {
                eprintln!("error: a subcommand or --config is required (see --help)");
                return Err(EXIT_USAGE);
            }
        };
        run(command).map_err(|e| {
            eprintln!("error: {e}");
            error_code(&e)
        })
    };
    inner().unwrap_or_else(|code| code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_maps_to_flags() {
        let spec: ExperimentSpec = serde_json::from_str(
            r#"{"command": "verify", "params": {"check": "duality", "gamma": 1, "quad_tol": 1e-9}}"#,
        )
        .unwrap();
        let args = spec.to_args().unwrap();
        assert_eq!(args, ["td", "verify", "duality", "--gamma", "1", "--quad-tol", "1e-9"]);
        let cli = Cli::try_parse_from(args).unwrap();
        assert!(matches!(
            cli.command,
            Some(Command::Verify {
                check: VerifyCheck::Duality,
                ..
            })
        ));
    }

    #[test]
    fn octave_radii_cover_range() {
        let r = octave_radii(1e-4, 1e-2).unwrap();
        assert_eq!(r[0], 1e-2);
        assert_eq!(r.len(), 7);
        assert!(r.last().unwrap() >= &1e-4);
        assert!(octave_radii(1e-2, 1e-4).is_err());
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(main_with_args(["td", "holder"]), EXIT_USAGE);
        assert_eq!(main_with_args(["td"]), EXIT_USAGE);
        assert_eq!(main_with_args(["td", "holder", "--gamma", "-1"]), EXIT_USAGE);
    }

    #[test]
    fn missing_input_exits_74() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.csv");
        let out = dir.path().join("o.svg");
        let code = main_with_args(["td", "render", "--grid-csv", missing.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(code, EXIT_IO);
    }
}
