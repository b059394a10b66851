//! The `run`, `verify` and `sweep` subcommands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use stalm_core::alm::{trace_row, TRACE_HEADER};
use stalm_core::dump::{write_boundary_field, write_time_field};
use stalm_core::oracle::{self, DecayMode, OracleReport};
use stalm_core::{
    alm_run_from, kkt_residuals, msa_solve, AlmTrace, BoundaryTimeField, DiscreteOperator, Mesh, MsaConfig, NodalField,
    Preset, ProblemSpec, Termination, TimeField,
};

use crate::config::{InitControl, RunConfig};
use crate::error::{CliError, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_MAX_OUTER: i32 = 2;

/// Outcome of one `run`.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub termination: Termination,
    pub outer_iters: usize,
    pub final_r: f64,
    pub final_j: f64,
    pub output_dir: PathBuf,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.termination {
            Termination::ToleranceMet => EXIT_OK,
            Termination::MaxOuter => EXIT_MAX_OUTER,
        }
    }
}

fn initial_controls(config: &RunConfig, spec: &ProblemSpec) -> (TimeField, BoundaryTimeField) {
    let mesh = spec.mesh;
    match config.init {
        InitControl::Zero => (TimeField::zeros(&mesh), BoundaryTimeField::zeros(&mesh)),
        InitControl::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let b = &spec.bounds;
            let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if lo < hi { rng.gen_range(lo..=hi) } else { lo };
            let u = b.ua.values().iter().zip(b.ub.values()).map(|(&lo, &hi)| draw(&mut rng, lo, hi)).collect();
            let v = b.va.values().iter().zip(b.vb.values()).map(|(&lo, &hi)| draw(&mut rng, lo, hi)).collect();
            (
                TimeField::from_values(&mesh, u).expect("sized from bounds"),
                BoundaryTimeField::from_values(&mesh, v).expect("sized from bounds"),
            )
        }
    }
}

/// Runs the outer loop for `config`, writing `trace.csv` row by row,
/// then `report.txt` and, if requested, the final fields into `out`.
pub fn run_to(config: &RunConfig, out: &Path) -> Result<RunSummary> {
    let spec = config.problem()?;
    let alm = config.alm_config(&spec.mesh)?;
    let op = DiscreteOperator::assemble(&spec.mesh, &spec.coeffs)?.with_tolerance(config.lin_tol);
    let (u0, v0) = initial_controls(config, &spec);

    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let trace_path = out.join("trace.csv");
    let file = File::create(&trace_path).map_err(|e| CliError::io(&trace_path, e))?;
    let mut trace = BufWriter::new(file);
    writeln!(trace, "{TRACE_HEADER}").map_err(|e| CliError::io(&trace_path, e))?;
    let mut write_error = None;
    let result = alm_run_from(&spec, &op, &alm, &u0, &v0, |record| {
        if write_error.is_none() {
            if let Err(e) = writeln!(trace, "{}", trace_row(record)).and_then(|_| trace.flush()) {
                write_error = Some(e);
            }
        }
    });
    trace.flush().map_err(|e| CliError::io(&trace_path, e))?;
    if let Some(e) = write_error {
        return Err(CliError::io(&trace_path, e));
    }
    let report_path = out.join("report.txt");
    let trace = match result {
        Ok(t) => t,
        Err(e) => {
            let _ = fs::write(&report_path, format!("termination: error\nerror: {e}\n"));
            return Err(e.into());
        }
    };

    let report = format_report(config, &spec, &trace)?;
    fs::write(&report_path, report).map_err(|e| CliError::io(&report_path, e))?;
    if config.dump_fields {
        let res = &trace.final_result;
        write_time_field(&out.join("y_final.csv"), "y", &res.y)?;
        write_time_field(&out.join("u_final.csv"), "u", &res.u)?;
        write_time_field(&out.join("mu_final.csv"), "mu", &res.mu_bar)?;
        write_time_field(&out.join("p_final.csv"), "p", &res.p)?;
        if spec.boundary_control {
            write_boundary_field(&out.join("v_final.csv"), "v", &res.v)?;
        }
    }
    let last = trace.records.iter().find(|r| r.k == trace.final_k).expect("final record exists");
    Ok(RunSummary {
        termination: trace.termination,
        outer_iters: trace.records.len(),
        final_r: last.r,
        final_j: last.j,
        output_dir: out.to_path_buf(),
    })
}

pub fn run_command(config: &RunConfig) -> Result<RunSummary> {
    run_to(config, &config.resolved_output_dir())
}

fn format_report(config: &RunConfig, spec: &ProblemSpec, trace: &AlmTrace) -> Result<String> {
    let res = &trace.final_result;
    let kkt = kkt_residuals(spec, &res.y, &res.u, &res.v, &res.p, &res.mu_bar)?;
    let last = trace.records.last().expect("at least one record");
    let mesh = spec.mesh;
    let mut s = String::new();
    let problem = config.preset.map_or("custom", Preset::name);
    writeln!(s, "problem: {problem}").unwrap();
    writeln!(s, "grid: {}x{}x{} (lx={}, ly={}, T={})", mesh.nx, mesh.ny, mesh.nt, mesh.lx, mesh.ly, mesh.t_final)
        .unwrap();
    writeln!(s, "termination: {}", trace.termination.as_str()).unwrap();
    writeln!(s, "outer_iterations: {}", trace.records.len()).unwrap();
    writeln!(s, "successful_steps: {}", last.n).unwrap();
    writeln!(s, "final_iterate_k: {}", trace.final_k).unwrap();
    writeln!(s, "final_rho: {}", trace.rho_history.last().copied().unwrap_or(config.rho0)).unwrap();
    writeln!(s, "R_plus: {}", trace.r_plus.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")).unwrap();
    writeln!(s, "J: {}", stalm_core::cost_j(spec, &res.y, &res.u, &res.v)?).unwrap();
    writeln!(s, "stationarity_u: {}", kkt.stationarity_u).unwrap();
    writeln!(s, "stationarity_v: {}", kkt.stationarity_v).unwrap();
    writeln!(s, "feasibility: {}", kkt.feasibility).unwrap();
    writeln!(s, "complementarity: {}", kkt.complementarity).unwrap();
    writeln!(s, "multiplier_nonnegative: {}", trace.mu_nonnegative).unwrap();
    Ok(s)
}

/// Names accepted by `verify --check`.
pub const CHECK_NAMES: [&str; 8] = [
    "analytic_decay",
    "analytic_decay_2d",
    "decay_refinement",
    "adjoint_identity",
    "hamiltonian_gradient",
    "argmin_bruteforce",
    "oracle_equivalence",
    "oracle_cost",
];

/// Random instance for the adjoint check: both controls active and an
/// obstacle that cuts through the state, so the penalty is partly active.
pub fn adjoint_check_spec(seed: u64) -> ProblemSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mesh = Mesh::new(6, 5, 4, 1.0, 0.8, 0.5).expect("valid mesh");
    let mut spec = Preset::BoundaryControlDemo.spec(&mesh).expect("valid preset");
    let (a, b) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    spec.coeffs = stalm_core::DiffusionCoefficients::constant(&mesh, a, b);
    spec.y0 = stalm_core::SpaceField::from_fn(&mesh, |x, y| (3.0 * x).sin() + y * y);
    spec.psi = TimeField::constant(&mesh, rng.gen_range(0.2..0.6));
    spec.alpha = rng.gen_range(0.1..2.0);
    spec.beta = rng.gen_range(0.1..2.0);
    spec
}

fn adjoint_identity_reports(seeds: std::ops::Range<u64>) -> Result<Vec<OracleReport>> {
    seeds
        .into_par_iter()
        .map(|seed| {
            let spec = adjoint_check_spec(seed);
            let mu = TimeField::from_fn(&spec.mesh, |x, y, t| 0.5 * (x + y + t));
            let rho = 1.0 + (seed % 5) as f64 * 2.0;
            Ok(oracle::adjoint_identity_check(&spec, rho, &mu, seed)?)
        })
        .collect()
}

fn worst(name: &str, reports: Vec<OracleReport>, tolerance: f64, context: String) -> OracleReport {
    let error = reports.iter().map(|r| r.error).fold(0.0, f64::max);
    OracleReport::new(name, error, tolerance, context)
}

/// `(L2 control distance, MSA cost minus oracle cost)` worst over the
/// sine-obstacle instances `(rho, mu) in {(1, 10), (8, 10)}`.
pub fn oracle_equivalence() -> Result<(f64, f64)> {
    let mesh = Preset::default_mesh();
    let spec = Preset::SineObstacle.spec(&mesh)?;
    let op = DiscreteOperator::assemble(&mesh, &spec.coeffs)?.with_tolerance(1e-14);
    let mut dist: f64 = 0.0;
    let mut cost_excess = f64::NEG_INFINITY;
    for rho in [1.0, 8.0] {
        let mu = TimeField::constant(&mesh, 10.0);
        let msa = msa_solve(
            &spec,
            &op,
            rho,
            &mu,
            &TimeField::zeros(&mesh),
            &BoundaryTimeField::zeros(&mesh),
            &MsaConfig::default(),
        )?;
        let (u, _, cost) = oracle::projected_gradient_oracle(&spec, rho, &mu, 20_000, 0.05)?;
        let diff = msa.u.axpy(-1.0, &u)?;
        dist = dist.max(stalm_core::field::step_inner_omega(&diff, &diff)?.sqrt());
        cost_excess = cost_excess.max(msa.value - cost);
    }
    Ok((dist, cost_excess))
}

/// Runs one named check, or all of them.
pub fn run_checks(only: Option<&str>) -> Result<Vec<OracleReport>> {
    if let Some(name) = only {
        if !CHECK_NAMES.contains(&name) {
            return Err(CliError::Invalid(format!("unknown check {name:?}; known: {}", CHECK_NAMES.join(", "))));
        }
    }
    let names: Vec<&str> = CHECK_NAMES.iter().copied().filter(|n| only.is_none_or(|o| o == *n)).collect();
    let decay_mesh = Mesh::unit(33, 33, 64, 0.1)?;
    let fine_mesh = Mesh::unit(65, 65, 256, 0.1)?;
    let per_check: Vec<Result<Vec<OracleReport>>> = names
        .par_iter()
        .map(|name| -> Result<Vec<OracleReport>> {
            Ok(match *name {
                "analytic_decay" => vec![oracle::analytic_decay_oracle(&decay_mesh, DecayMode::CosX)?],
                "analytic_decay_2d" => vec![oracle::analytic_decay_oracle(&decay_mesh, DecayMode::CosXCosY)?],
                "decay_refinement" => vec![oracle::decay_refinement_check(&decay_mesh, &fine_mesh, DecayMode::CosX)?],
                "adjoint_identity" => {
                    vec![worst("adjoint_identity", adjoint_identity_reports(0..20)?, 1e-6, "20 seeds".into())]
                }
                "hamiltonian_gradient" => vec![oracle::hamiltonian_gradient_check(7)],
                "argmin_bruteforce" => vec![oracle::argmin_bruteforce_check(7)],
                "oracle_equivalence" | "oracle_cost" => {
                    let (dist, excess) = oracle_equivalence()?;
                    let context = "5x5x4 sine obstacle, (rho, mu) in {(1,10), (8,10)}".to_string();
                    if *name == "oracle_equivalence" {
                        vec![OracleReport::new("oracle_equivalence", dist, 1e-3, context)]
                    } else {
                        vec![OracleReport::new("oracle_cost", excess, 1e-6, context)]
                    }
                }
                _ => unreachable!("names are filtered against CHECK_NAMES"),
            })
        })
        .collect();
    let mut reports = Vec::new();
    for r in per_check {
        reports.extend(r?);
    }
    Ok(reports)
}

pub fn format_reports_csv(reports: &[OracleReport]) -> String {
    let mut s = String::from("check,error,tolerance,pass,context\n");
    for r in reports {
        writeln!(s, "{},{:e},{:e},{},\"{}\"", r.name, r.error, r.tolerance, r.pass, r.context.replace('"', "'"))
            .unwrap();
    }
    s
}

pub fn format_reports_table(reports: &[OracleReport]) -> String {
    let mut s = String::new();
    for r in reports {
        writeln!(s, "{r}").unwrap();
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    writeln!(s, "{} checks, {} failed", reports.len(), failed).unwrap();
    s
}

/// Runs the checks, writes `verify.csv` into `out` and returns the
/// reports. `force_fail` judges every check against tolerance 0.
pub fn verify_command(only: Option<&str>, force_fail: bool, out: &Path) -> Result<Vec<OracleReport>> {
    let mut reports = run_checks(only)?;
    if force_fail {
        reports = reports.into_iter().map(|r| r.with_tolerance(0.0)).collect();
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let path = out.join("verify.csv");
    fs::write(&path, format_reports_csv(&reports)).map_err(|e| CliError::io(&path, e))?;
    Ok(reports)
}

/// Parameters `sweep` can vary.
pub const SWEEP_PARAMS: [&str; 7] = ["rho0", "tau", "gamma", "nx", "ny", "nt", "alpha"];

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: String,
    pub outcome: std::result::Result<RunSummary, String>,
}

fn apply_param(config: &mut RunConfig, param: &str, value: &str) -> Result<()> {
    let bad = || CliError::Invalid(format!("sweep value {value:?} is not valid for {param}"));
    match param {
        "rho0" | "tau" | "gamma" | "alpha" => {
            let v: f64 = value.trim().parse().map_err(|_| bad())?;
            match param {
                "rho0" => config.rho0 = v,
                "tau" => config.tau = v,
                "gamma" => config.gamma = v,
                _ => config.alpha = v,
            }
        }
        "nx" | "ny" | "nt" => {
            let v: usize = value.trim().parse().map_err(|_| bad())?;
            match param {
                "nx" => config.nx = v,
                "ny" => config.ny = v,
                _ => config.nt = v,
            }
        }
        _ => {
            return Err(CliError::Invalid(format!(
                "unknown sweep parameter {param:?}; known: {}",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    Ok(())
}

/// One run per value in `out/<param>=<value>/`, executed in parallel, plus
/// `out/summary.csv`. Failed runs are recorded, not propagated.
pub fn sweep_command(config: &RunConfig, param: &str, values: &[String], out: &Path) -> Result<Vec<SweepRow>> {
    if !SWEEP_PARAMS.contains(&param) {
        return Err(CliError::Invalid(format!(
            "unknown sweep parameter {param:?}; known: {}",
            SWEEP_PARAMS.join(", ")
        )));
    }
    if values.is_empty() {
        return Err(CliError::Invalid("sweep needs at least one value".into()));
    }
    // reject malformed values before any run starts
    for v in values {
        apply_param(&mut config.clone(), param, v)?;
    }
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|value| {
            let mut c = config.clone();
            let outcome = apply_param(&mut c, param, value)
                .and_then(|_| {
                    c.validate()?;
                    run_to(&c, &out.join(format!("{param}={}", value.trim())))
                })
                .map_err(|e| e.to_string());
            SweepRow { value: value.trim().to_string(), outcome }
        })
        .collect();
    let mut s = format!("{param},outer_iters,final_R,final_J,termination,error\n");
    for row in &rows {
        match &row.outcome {
            Ok(r) => {
                writeln!(s, "{},{},{},{},{},", row.value, r.outer_iters, r.final_r, r.final_j, r.termination.as_str())
            }
            Err(e) => writeln!(s, "{},,,,error,\"{}\"", row.value, e.replace('"', "'")),
        }
        .unwrap();
    }
    let path = out.join("summary.csv");
    fs::write(&path, s).map_err(|e| CliError::io(&path, e))?;
    Ok(rows)
}

/// Exit code for a finished sweep: any error wins, then any capped run.
pub fn sweep_exit_code(rows: &[SweepRow]) -> i32 {
    if rows.iter().any(|r| r.outcome.is_err()) {
        EXIT_ERROR
    } else if rows.iter().any(|r| matches!(&r.outcome, Ok(s) if s.termination == Termination::MaxOuter)) {
        EXIT_MAX_OUTER
    } else {
        EXIT_OK
    }
}
