//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stalm_cli::commands::{adjoint_check_spec, oracle_equivalence};
use stalm_cli::config::{InitControl, RunConfig};
use stalm_cli::run_to;
use stalm_core::oracle::{self, DecayMode};
use stalm_core::{
    alm_run, complementarity, feasibility, solve_forward, AlmConfig, BoundaryTimeField, DiffusionCoefficients,
    DiscreteOperator, FailureUpdate, Mesh, NodalField, Preset, SpaceField, Termination, TimeField,
};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn sine_obstacle_run() -> Outcome {
    let mesh = Preset::default_mesh();
    let spec = Preset::SineObstacle.spec(&mesh).map_err(err)?;
    let config = AlmConfig::new(1.0, TimeField::constant(&mesh, 10.0));
    let (tau, r0) = (config.tau, config.r_plus_0);
    let start = Instant::now();
    let trace = alm_run(&spec, &config).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();

    let rp = &trace.r_plus;
    let decreasing = rp.windows(2).all(|w| w[1] < w[0]);
    let geometric = rp.iter().enumerate().all(|(n, &r)| r <= tau.powi(n as i32) * r0);
    let res = &trace.final_result;
    let feas = feasibility(&res.y, &spec.psi).map_err(err)?;
    let compl = complementarity(&res.y, &spec.psi, &res.mu_bar).map_err(err)?;

    // the same run through the command layer: exit code and trace file
    let dir = tempfile::tempdir().map_err(err)?;
    let summary = run_to(&RunConfig::default(), dir.path()).map_err(err)?;
    let csv = std::fs::read_to_string(dir.path().join("trace.csv")).map_err(err)?;
    let last_success_r: f64 = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|c| c[4] == "1")
        .last()
        .ok_or("no success row in trace.csv")?[3]
        .parse()
        .map_err(err)?;

    let pass = trace.termination == Termination::ToleranceMet
        && decreasing
        && geometric
        && feas <= 1e-4
        && compl <= 1e-4
        && elapsed <= 60.0
        && summary.exit_code() == 0
        && last_success_r <= 1e-4;
    Ok((
        pass,
        format!(
            "{} after {} outer iterations, {} successes, last R+ = {:e}, feas = {:e}, compl = {:e}, \
             R+ strictly decreasing: {decreasing}, R+_n <= tau^n R+_0: {geometric}, {:.3} s, cli exit {}",
            trace.termination.as_str(),
            trace.records.len(),
            rp.len() - 1,
            rp.last().unwrap(),
            feas,
            compl,
            elapsed,
            summary.exit_code()
        ),
    ))
}

fn analytic_modes() -> Outcome {
    let coarse = Mesh::unit(33, 33, 64, 0.1).map_err(err)?;
    let fine = Mesh::unit(65, 65, 256, 0.1).map_err(err)?;
    let e_coarse = oracle::decay_error(&coarse, DecayMode::CosX).map_err(err)?;
    let e_fine = oracle::decay_error(&fine, DecayMode::CosX).map_err(err)?;
    Ok((
        e_coarse <= 0.05 && e_fine < e_coarse,
        format!("cos(pi x) relative L2 error {e_coarse:.4e} at 33x33x64, {e_fine:.4e} at 65x65x256"),
    ))
}

fn adjoint_and_gradient() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let spec = adjoint_check_spec(seed);
        let mu = TimeField::from_fn(&spec.mesh, |x, y, t| 0.5 * (x + y + t));
        let rho = 1.0 + (seed % 5) as f64 * 2.0;
        let report = oracle::adjoint_identity_check(&spec, rho, &mu, seed).map_err(err)?;
        worst = worst.max(report.error);
    }
    let grad = oracle::hamiltonian_gradient_check(2024);
    Ok((
        worst <= 1e-6 && grad.error <= 1e-6,
        format!(
            "adjoint identity worst relative error {worst:.3e} over 20 seeds, Hamiltonian FD {:.3e} over 100 tuples",
            grad.error
        ),
    ))
}

fn oracle_agreement() -> Outcome {
    let (dist, excess) = oracle_equivalence().map_err(err)?;
    Ok((
        dist <= 1e-3 && excess <= 1e-6,
        format!("control L2 distance {dist:.3e}, MSA cost minus oracle cost {excess:.3e}"),
    ))
}

fn branch_semantics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mesh = Preset::default_mesh();
    let runs = 24;
    let mut failures_seen = 0;
    for run in 0..runs {
        let mut spec = Preset::SineObstacle.spec(&mesh).map_err(err)?;
        spec.psi = TimeField::constant(&mesh, rng.gen_range(0.3..1.2));
        let mut config = AlmConfig::new(rng.gen_range(0.1..10.0), TimeField::constant(&mesh, rng.gen_range(0.0..20.0)));
        config.tau = rng.gen_range(0.1..0.95);
        config.gamma = rng.gen_range(1.1..5.0);
        config.max_outer = 40;
        config.failure_update = if rng.gen_bool(0.5) { FailureUpdate::Keep } else { FailureUpdate::Adopt };
        let trace = alm_run(&spec, &config).map_err(err)?;

        for (rec, next_rho) in trace.records.iter().zip(&trace.rho_history[1..]) {
            let expect = if rec.success { rec.rho } else { config.gamma * rec.rho };
            if *next_rho != expect {
                return Ok((false, format!("run {run}, k = {}: rho {} -> {next_rho}", rec.k, rec.rho)));
            }
            failures_seen += usize::from(!rec.success);
        }
        let mut last = config.r_plus_0;
        for rec in trace.records.iter().filter(|r| r.success) {
            if rec.r > config.tau * last {
                return Ok((false, format!("run {run}, k = {}: R+ {} > tau * {last}", rec.k, rec.r)));
            }
            last = rec.r;
        }
        if !trace.mu_nonnegative || trace.final_result.mu_bar.values().iter().any(|&m| m < 0.0) {
            return Ok((false, format!("run {run}: negative multiplier")));
        }
    }
    Ok((true, format!("{runs} randomized runs, {failures_seen} failure steps, all branch rules hold")))
}

fn degenerate_cases() -> Outcome {
    let mesh = Preset::default_mesh();
    let spec = Preset::UnconstrainedDecay.spec(&mesh).map_err(err)?;
    let trace = alm_run(&spec, &AlmConfig::new(1.0, TimeField::zeros(&mesh))).map_err(err)?;
    let one_success = trace.records.len() == 1 && trace.records[0].success && trace.r_plus == vec![1e6, 0.0];
    let mu_zero = trace.final_result.mu_bar.sup_norm() == 0.0;

    let m = Mesh::new(9, 7, 6, 1.5, 1.0, 0.7).map_err(err)?;
    let op = DiscreteOperator::assemble(&m, &DiffusionCoefficients::constant(&m, 1.3, 0.6)).map_err(err)?;
    let c = 2.75;
    let y = solve_forward(&op, &TimeField::zeros(&m), &BoundaryTimeField::zeros(&m), &SpaceField::constant(&m, c))
        .map_err(err)?;
    let drift = y.values().iter().map(|v| (v - c).abs()).fold(0.0, f64::max) / c;

    let y0 = SpaceField::from_fn(&m, |x, y| 1.0 + x * x - (3.0 * y).sin());
    let y = solve_forward(&op, &TimeField::zeros(&m), &BoundaryTimeField::zeros(&m), &y0).map_err(err)?;
    let ones = SpaceField::constant(&m, 1.0);
    let m0 = y0.inner(&ones).map_err(err)?;
    let mut mean_err: f64 = 0.0;
    for level in 1..m.levels() {
        mean_err = mean_err.max((y.slice(level).inner(&ones).map_err(err)? - m0).abs() / m0.abs());
    }
    Ok((
        one_success && mu_zero && drift <= 4.0 * f64::EPSILON && mean_err <= 1e-10,
        format!(
            "unconstrained: {} record(s), R+ = {:?}, |mu| = {}; constant state relative drift {drift:.2e}; mean conservation {mean_err:.2e}",
            trace.records.len(),
            trace.r_plus,
            trace.final_result.mu_bar.sup_norm()
        ),
    ))
}

fn determinism() -> Outcome {
    let config = RunConfig { init: InitControl::Random, seed: 42, dump_fields: true, ..RunConfig::default() };
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    run_to(&config, a.path()).map_err(err)?;
    run_to(&config, b.path()).map_err(err)?;
    let ta = std::fs::read(a.path().join("trace.csv")).map_err(err)?;
    let tb = std::fs::read(b.path().join("trace.csv")).map_err(err)?;
    Ok((
        ta == tb && !ta.is_empty(),
        format!("two seeded runs, trace.csv of {} bytes, identical: {}", ta.len(), ta == tb),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("sine-obstacle example", sine_obstacle_run),
        ("analytic-mode solver validation", analytic_modes),
        ("adjoint and Hamiltonian gradients", adjoint_and_gradient),
        ("MSA vs projected-gradient oracle", oracle_agreement),
        ("outer-loop branch semantics", branch_semantics),
        ("degenerate cases", degenerate_cases),
        ("deterministic replay", determinism),
    ];
    let mut all = true;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        all &= pass;
        println!("criterion {} ({name}): {} | {detail}", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
