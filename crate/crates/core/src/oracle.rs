//! Independent verification checks: analytic heat-equation modes,
//! finite-difference checks of the adjoint gradient and the Hamiltonian
//! derivatives, a brute-force Hamiltonian minimizer and a plain projected
//! gradient solver for the sub-problem.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::field::{integrate_omega_t, BoundaryTimeField, NodalField, SpaceField, TimeField};
use crate::mesh::Mesh;
use crate::msa::{argmin_hamiltonian_at, grad_hamiltonian_at, hamiltonian_omega_at, hamiltonian_sigma_at};
use crate::operator::{DiffusionCoefficients, DiscreteOperator};
use crate::parabolic::solve_forward;
use crate::subproblem::Subproblem;

/// Largest grid the projected gradient oracle accepts.
pub const ORACLE_MAX_GRID: (usize, usize, usize) = (9, 9, 8);

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub context: String,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, error: f64, tolerance: f64, context: impl Into<String>) -> Self {
        Self { name: name.into(), error, tolerance, pass: error <= tolerance, context: context.into() }
    }

    /// Same measurement judged against a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.pass = self.error <= tolerance;
        self
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<36} {} error={:.3e} tol={:.3e} [{}]",
            self.name,
            if self.pass { "PASS" } else { "FAIL" },
            self.error,
            self.tolerance,
            self.context
        )
    }
}

/// Separable cosine modes of the Neumann Laplacian on the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecayMode {
    /// `cos(pi x)`, decay rate `pi^2`.
    CosX,
    /// `cos(pi x) cos(pi y)`, decay rate `2 pi^2`.
    CosXCosY,
}

impl DecayMode {
    pub fn rate(self) -> f64 {
        match self {
            DecayMode::CosX => PI * PI,
            DecayMode::CosXCosY => 2.0 * PI * PI,
        }
    }

    pub fn profile(self, x: f64, y: f64) -> f64 {
        match self {
            DecayMode::CosX => (PI * x).cos(),
            DecayMode::CosXCosY => (PI * x).cos() * (PI * y).cos(),
        }
    }

    fn label(self) -> &'static str {
        match self {
            DecayMode::CosX => "cos(pi x)",
            DecayMode::CosXCosY => "cos(pi x)cos(pi y)",
        }
    }
}

/// Relative `L^2(Omega_T)` error of the free forward solve against
/// `exp(-lambda t) * mode` on the unit square with unit diffusion.
pub fn decay_error(mesh: &Mesh, mode: DecayMode) -> Result<f64> {
    if mesh.lx != 1.0 || mesh.ly != 1.0 {
        return Err(Error::invalid("mesh", "analytic modes need the unit square"));
    }
    let op = DiscreteOperator::assemble(mesh, &DiffusionCoefficients::unit(mesh))?;
    let y0 = SpaceField::from_fn(mesh, |x, y| mode.profile(x, y));
    let y = solve_forward(&op, &TimeField::zeros(mesh), &BoundaryTimeField::zeros(mesh), &y0)?;
    let lambda = mode.rate();
    let exact = TimeField::from_fn(mesh, |x, y, t| (-lambda * t).exp() * mode.profile(x, y));
    let diff = y.axpy(-1.0, &exact)?;
    Ok((integrate_omega_t(&diff, &diff)? / integrate_omega_t(&exact, &exact)?).sqrt())
}

/// Error budget `2 lambda T (lambda dt + h^2)` of implicit Euler with the
/// second-order stencil.
pub fn decay_tolerance(mesh: &Mesh, mode: DecayMode) -> f64 {
    let lambda = mode.rate();
    let h = mesh.hx.max(mesh.hy);
    2.0 * lambda * mesh.t_final * (lambda * mesh.dt + h * h)
}

pub fn analytic_decay_oracle(mesh: &Mesh, mode: DecayMode) -> Result<OracleReport> {
    let error = decay_error(mesh, mode)?;
    Ok(OracleReport::new(
        format!("analytic_decay[{}]", mode.label()),
        error,
        decay_tolerance(mesh, mode),
        format!("{}x{}x{} T={}", mesh.nx, mesh.ny, mesh.nt, mesh.t_final),
    ))
}

/// Error on `coarse` and on `fine`; the reported error is `fine / coarse`,
/// which must be strictly below one.
pub fn decay_refinement_check(coarse: &Mesh, fine: &Mesh, mode: DecayMode) -> Result<OracleReport> {
    let e_coarse = decay_error(coarse, mode)?;
    let e_fine = decay_error(fine, mode)?;
    let ratio = e_fine / e_coarse;
    let context = format!(
        "{}x{}x{}: {:.4e}, {}x{}x{}: {:.4e}",
        coarse.nx, coarse.ny, coarse.nt, e_coarse, fine.nx, fine.ny, fine.nt, e_fine
    );
    let mut report = OracleReport::new("decay_refinement", ratio, 1.0, context);
    report.pass = ratio < 1.0;
    Ok(report)
}

const FD_STEP: f64 = 1e-5;
const KINK_GAP: f64 = 1e-8;
const MAX_RESAMPLE: usize = 100;

/// Compares the adjoint directional derivative of the reduced augmented
/// Lagrangian with a central difference of step `1e-5` at a random point
/// in a random direction. Points where any node at a level `m >= 1` sits
/// within `1e-8` of the penalty kink, or crosses it within the stencil,
/// are redrawn.
pub fn adjoint_identity_check(spec: &ProblemSpec, rho: f64, mu: &TimeField, seed: u64) -> Result<OracleReport> {
    spec.validate()?;
    let op = DiscreteOperator::assemble(&spec.mesh, &spec.coeffs)?.with_tolerance(1e-14);
    let sub = Subproblem::new(spec, &op, mu, rho)?;
    let mesh = spec.mesh;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for attempt in 0..MAX_RESAMPLE {
        let u = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let du = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let (v, dv) = if spec.boundary_control {
            (
                BoundaryTimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0)),
                BoundaryTimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0)),
            )
        } else {
            (BoundaryTimeField::zeros(&mesh), BoundaryTimeField::zeros(&mesh))
        };
        let (u_plus, v_plus) = (u.axpy(FD_STEP, &du)?, v.axpy(FD_STEP, &dv)?);
        let (u_minus, v_minus) = (u.axpy(-FD_STEP, &du)?, v.axpy(-FD_STEP, &dv)?);
        let states = [sub.state(&u, &v)?, sub.state(&u_plus, &v_plus)?, sub.state(&u_minus, &v_minus)?];
        if near_kink(&states, spec, mu, rho) {
            continue;
        }
        let eval = sub.evaluate(&u, &v)?;
        let adjoint = sub.directional_derivative(&eval, &u, &v, &du, &dv)?;
        let plus = sub.value(&u_plus, &v_plus)?;
        let minus = sub.value(&u_minus, &v_minus)?;
        let fd = (plus - minus) / (2.0 * FD_STEP);
        let error = (fd - adjoint).abs() / adjoint.abs().max(f64::MIN_POSITIVE);
        return Ok(OracleReport::new(
            "adjoint_identity",
            error,
            1e-6,
            format!("{}x{}x{} seed={seed} rho={rho} resamples={attempt}", mesh.nx, mesh.ny, mesh.nt),
        ));
    }
    Err(Error::invalid("adjoint_identity_check", "could not draw a point away from the penalty kink"))
}

fn near_kink(states: &[TimeField], spec: &ProblemSpec, mu: &TimeField, rho: f64) -> bool {
    let mesh = &spec.mesh;
    let n = mesh.nodes();
    // level 0 is fixed by y0 and carries no weight in the objective
    for idx in n..mesh.levels() * n {
        let shifted: Vec<f64> =
            states.iter().map(|y| rho * (y.values()[idx] - spec.psi.values()[idx]) + mu.values()[idx]).collect();
        let first = shifted[0];
        if shifted.iter().any(|s| s.abs() < KINK_GAP || (s > &0.0) != (first > 0.0)) {
            return true;
        }
    }
    false
}

/// Minimizes the discrete reduced `L_rho` by projected gradient with the
/// fixed step `lr`, starting from zero controls. Level 0 of the controls
/// has no weight in the objective and no effect on the state; it stays 0.
pub fn projected_gradient_oracle(
    spec: &ProblemSpec,
    rho: f64,
    mu: &TimeField,
    iters: usize,
    lr: f64,
) -> Result<(TimeField, BoundaryTimeField, f64)> {
    spec.validate()?;
    let mesh = spec.mesh;
    let (mx, my, mt) = ORACLE_MAX_GRID;
    if mesh.nx > mx || mesh.ny > my || mesh.nt > mt {
        return Err(Error::GridTooLarge { nx: mesh.nx, ny: mesh.ny, nt: mesh.nt });
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid("lr", "must be positive"));
    }
    let op = DiscreteOperator::assemble(&mesh, &spec.coeffs)?.with_tolerance(1e-14);
    let sub = Subproblem::new(spec, &op, mu, rho)?;
    let bounds = &spec.bounds;
    let n = mesh.nodes();
    let nb = mesh.boundary_len();

    let mut u = TimeField::zeros(&mesh);
    let mut v = BoundaryTimeField::zeros(&mesh);
    for _ in 0..iters {
        let eval = sub.evaluate(&u, &v)?;
        let (gu, gv) = sub.gradient(&eval, &u, &v)?;
        let mut u_next = bounds.project_u(&u.axpy(-lr, &gu)?)?;
        u_next.values_mut()[..n].fill(0.0);
        let mut v_next = if spec.boundary_control { bounds.project_v(&v.axpy(-lr, &gv)?)? } else { v.clone() };
        v_next.values_mut()[..nb].fill(0.0);
        let still = u_next == u && v_next == v;
        u = u_next;
        v = v_next;
        if still {
            break;
        }
    }
    let value = sub.value(&u, &v)?;
    if !value.is_finite() {
        return Err(Error::NonFinite { context: "projected gradient oracle", iteration: iters });
    }
    Ok((u, v, value))
}

/// Grid search of `H_Omega` at resolution `1e-4` against the closed-form
/// minimizer on 1000 random `(p, alpha, bounds)` tuples.
pub fn argmin_bruteforce_check(seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let p = rng.gen_range(-5.0..5.0);
        let alpha = rng.gen_range(0.1..10.0);
        let lo = rng.gen_range(-2.0..0.5);
        let hi = lo + rng.gen_range(0.0..2.0);
        // state-dependent terms are constant in u and must not move the minimizer
        let (y, mu, rho, psi) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0), 1.0, 0.5);
        let steps = ((hi - lo) / 1e-4_f64).ceil().max(1.0) as usize;
        let brute = (0..=steps)
            .map(|k| lo + (hi - lo) * k as f64 / steps as f64)
            .min_by(|a, b| {
                hamiltonian_omega_at(y, *a, p, mu, rho, psi, alpha)
                    .total_cmp(&hamiltonian_omega_at(y, *b, p, mu, rho, psi, alpha))
            })
            .expect("grid is nonempty");
        worst = worst.max((argmin_hamiltonian_at(p, alpha, lo, hi) - brute).abs());
    }
    OracleReport::new("argmin_bruteforce", worst, 1e-4, format!("1000 tuples seed={seed}"))
}

/// Central differences of `H_Omega` and `H_Sigma` in the control against
/// the closed-form derivative on 100 random tuples; worst relative error.
pub fn hamiltonian_gradient_check(seed: u64) -> OracleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (u, p, alpha) = (rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.1..5.0));
        let (y, mu, rho, psi) = (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0), rng.gen_range(0.5..4.0), 0.0);
        let fd_u = (hamiltonian_omega_at(y, u + h, p, mu, rho, psi, alpha)
            - hamiltonian_omega_at(y, u - h, p, mu, rho, psi, alpha))
            / (2.0 * h);
        let exact_u = grad_hamiltonian_at(u, p, alpha);
        let (v, q, beta) = (rng.gen_range(-2.0..2.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.1..5.0));
        let fd_v = (hamiltonian_sigma_at(v + h, q, beta) - hamiltonian_sigma_at(v - h, q, beta)) / (2.0 * h);
        let exact_v = grad_hamiltonian_at(v, q, beta);
        worst = worst
            .max((fd_u - exact_u).abs() / exact_u.abs().max(1.0))
            .max((fd_v - exact_v).abs() / exact_v.abs().max(1.0));
    }
    OracleReport::new("hamiltonian_gradient", worst, 1e-6, format!("100 tuples seed={seed}"))
}
