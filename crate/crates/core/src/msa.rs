//! Method of successive approximations for the augmented-Lagrangian
//! sub-problem: forward solve, multiplier candidate, adjoint solve, then a
//! pointwise minimization of the Hamiltonians over the admissible boxes.

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::field::{BoundaryTimeField, ControlBounds, NodalField, TimeField};
use crate::operator::DiscreteOperator;
use crate::subproblem::{Evaluation, Subproblem};

/// How the control is updated from the adjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateMode {
    /// Closed-form pointwise minimizer of the Hamiltonian.
    ExactArgmin,
    /// Projected gradient step on the Hamiltonian with a decaying learning rate.
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MsaConfig {
    /// Stop once the sup-norm control gap is at most this.
    pub eps1: f64,
    pub max_inner: usize,
    pub update_mode: UpdateMode,
    pub lr0: f64,
    pub lr_decay: f64,
    /// Iterations between learning-rate decays.
    pub lr_period: usize,
    /// In `ExactArgmin` mode, move only part of the way towards the
    /// Hamiltonian minimizer when the full step fails to decrease the
    /// reduced objective (Armijo backtracking). Without it the plain
    /// iteration can cycle; see `plain_iteration_cycles_when_constraint_is_inactive`.
    pub safeguard: bool,
}

impl Default for MsaConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-4,
            max_inner: 20_000,
            update_mode: UpdateMode::ExactArgmin,
            lr0: 1e-3,
            lr_decay: 0.9,
            lr_period: 100,
            safeguard: true,
        }
    }
}

impl MsaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps1 > 0.0) {
            return Err(Error::invalid("eps1", "must be positive"));
        }
        if self.max_inner < 1 {
            return Err(Error::invalid("max_inner", "must be at least 1"));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::invalid("lr0", "must be positive"));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::invalid("lr_decay", "must lie in (0,1]"));
        }
        if self.lr_period < 1 {
            return Err(Error::invalid("lr_period", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MsaResult {
    pub y: TimeField,
    pub u: TimeField,
    pub v: BoundaryTimeField,
    pub p: TimeField,
    pub mu_bar: TimeField,
    /// `L_rho` at the returned controls.
    pub value: f64,
    pub inner_iters: usize,
    pub final_gap: f64,
    pub converged: bool,
}

/// `alpha/2 u^2 + 1/(2 rho) ((rho (y - psi) + mu)_+^2 - mu^2) + p u`.
#[inline]
pub fn hamiltonian_omega_at(y: f64, u: f64, p: f64, mu: f64, rho: f64, psi: f64, alpha: f64) -> f64 {
    let shifted = (rho * (y - psi) + mu).max(0.0);
    0.5 * alpha * u * u + (shifted * shifted - mu * mu) / (2.0 * rho) + p * u
}

/// `beta/2 v^2 + p v`.
#[inline]
pub fn hamiltonian_sigma_at(v: f64, p: f64, beta: f64) -> f64 {
    0.5 * beta * v * v + p * v
}

#[inline]
pub fn argmin_hamiltonian_at(p: f64, weight: f64, lo: f64, hi: f64) -> f64 {
    (-p / weight).clamp(lo, hi)
}

/// Gradient in the control; the penalty does not depend on it.
#[inline]
pub fn grad_hamiltonian_at(control: f64, p: f64, weight: f64) -> f64 {
    weight * control + p
}

pub fn hamiltonian_omega(
    y: &TimeField,
    u: &TimeField,
    p: &TimeField,
    mu: &TimeField,
    rho: f64,
    psi: &TimeField,
    alpha: f64,
) -> Result<TimeField> {
    if !(rho > 0.0) {
        return Err(Error::invalid("rho", "must be positive"));
    }
    for other in [u, p, mu, psi] {
        y.ensure_same_mesh(other)?;
    }
    let mut out = y.clone();
    for (k, o) in out.values_mut().iter_mut().enumerate() {
        *o = hamiltonian_omega_at(
            y.values()[k],
            u.values()[k],
            p.values()[k],
            mu.values()[k],
            rho,
            psi.values()[k],
            alpha,
        );
    }
    Ok(out)
}

pub fn hamiltonian_sigma(
    v: &BoundaryTimeField,
    p_boundary: &BoundaryTimeField,
    beta: f64,
) -> Result<BoundaryTimeField> {
    v.zip_map(p_boundary, |v, p| hamiltonian_sigma_at(v, p, beta))
}

/// Pointwise `clamp(-p / alpha, ua, ub)`.
pub fn argmin_hamiltonian_u(p: &TimeField, alpha: f64, bounds: &ControlBounds) -> Result<TimeField> {
    p.map(|p| -p / alpha).project_interval(&bounds.ua, &bounds.ub)
}

/// Pointwise `clamp(-p / beta, va, vb)`.
pub fn argmin_hamiltonian_v(
    p_boundary: &BoundaryTimeField,
    beta: f64,
    bounds: &ControlBounds,
) -> Result<BoundaryTimeField> {
    p_boundary.map(|p| -p / beta).project_interval(&bounds.va, &bounds.vb)
}

pub fn grad_hamiltonian_u(u: &TimeField, p: &TimeField, alpha: f64) -> Result<TimeField> {
    u.zip_map(p, |u, p| grad_hamiltonian_at(u, p, alpha))
}

pub fn grad_hamiltonian_v(
    v: &BoundaryTimeField,
    p_boundary: &BoundaryTimeField,
    beta: f64,
) -> Result<BoundaryTimeField> {
    v.zip_map(p_boundary, |v, p| grad_hamiltonian_at(v, p, beta))
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACK: usize = 50;

struct Iterate {
    u: TimeField,
    v: BoundaryTimeField,
    eval: Evaluation,
}

/// Runs the successive-approximation loop for the sub-problem with
/// multiplier `mu` and penalty `rho`, starting from the given controls
/// (projected onto the boxes first).
pub fn msa_solve(
    spec: &ProblemSpec,
    op: &DiscreteOperator,
    rho: f64,
    mu: &TimeField,
    init_u: &TimeField,
    init_v: &BoundaryTimeField,
    config: &MsaConfig,
) -> Result<MsaResult> {
    config.validate()?;
    let sub = Subproblem::new(spec, op, mu, rho)?;
    let bounds = &spec.bounds;
    let u = bounds.project_u(init_u)?;
    let v = if spec.boundary_control { bounds.project_v(init_v)? } else { BoundaryTimeField::zeros(&spec.mesh) };
    let eval = checked_eval(&sub, &u, &v, 0)?;
    let mut cur = Iterate { u, v, eval };

    let mut theta: f64 = 1.0;
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut iters = 0;

    for i in 1..=config.max_inner {
        iters = i;
        match config.update_mode {
            UpdateMode::ExactArgmin => {
                let u_hat = argmin_hamiltonian_u(&cur.eval.p, spec.alpha, bounds)?;
                let v_hat = if spec.boundary_control {
                    argmin_hamiltonian_v(&cur.eval.p.trace(), spec.beta, bounds)?
                } else {
                    cur.v.clone()
                };
                gap = u_hat.sup_distance(&cur.u)?.max(v_hat.sup_distance(&cur.v)?);
                if gap <= config.eps1 {
                    converged = true;
                    break;
                }
                let du = u_hat.axpy(-1.0, &cur.u)?;
                let dv = v_hat.axpy(-1.0, &cur.v)?;
                if !config.safeguard {
                    let eval = checked_eval(&sub, &u_hat, &v_hat, i)?;
                    cur = Iterate { u: u_hat, v: v_hat, eval };
                    continue;
                }
                let slope = sub.directional_derivative(&cur.eval, &cur.u, &cur.v, &du, &dv)?;
                theta = (2.0 * theta).min(1.0);
                let mut accepted = None;
                for _ in 0..MAX_BACKTRACK {
                    // the projection only removes round-off; the segment lies in the box
                    let u_try = bounds.project_u(&cur.u.axpy(theta, &du)?)?;
                    let v_try =
                        if spec.boundary_control { bounds.project_v(&cur.v.axpy(theta, &dv)?)? } else { cur.v.clone() };
                    let eval = checked_eval(&sub, &u_try, &v_try, i)?;
                    // By convexity phi(theta) <= phi(0) + theta phi'(theta), so the
                    // slope test implies the value test and survives round-off
                    // once the decrease itself is below machine precision.
                    let decreased = eval.value <= cur.eval.value + ARMIJO * theta * slope
                        || sub.directional_derivative(&eval, &u_try, &v_try, &du, &dv)? <= ARMIJO * slope;
                    if decreased {
                        accepted = Some(Iterate { u: u_try, v: v_try, eval });
                        break;
                    }
                    theta *= 0.5;
                }
                match accepted {
                    Some(next) => cur = next,
                    // no decrease at any step length: stalled at round-off level
                    None => break,
                }
            }
            UpdateMode::ProjectedGradient => {
                let lr = config.lr0 * config.lr_decay.powi(((i - 1) / config.lr_period) as i32);
                let gu = grad_hamiltonian_u(&cur.u, &cur.eval.p, spec.alpha)?;
                let u_next = bounds.project_u(&cur.u.axpy(-lr, &gu)?)?;
                let v_next = if spec.boundary_control {
                    let gv = grad_hamiltonian_v(&cur.v, &cur.eval.p.trace(), spec.beta)?;
                    bounds.project_v(&cur.v.axpy(-lr, &gv)?)?
                } else {
                    cur.v.clone()
                };
                gap = u_next.sup_distance(&cur.u)?.max(v_next.sup_distance(&cur.v)?);
                let eval = checked_eval(&sub, &u_next, &v_next, i)?;
                cur = Iterate { u: u_next, v: v_next, eval };
                if gap <= config.eps1 {
                    converged = true;
                    break;
                }
            }
        }
    }

    let Iterate { u, v, eval } = cur;
    Ok(MsaResult {
        y: eval.y,
        u,
        v,
        p: eval.p,
        mu_bar: eval.mu_bar,
        value: eval.value,
        inner_iters: iters,
        final_gap: gap,
        converged,
    })
}

fn checked_eval(sub: &Subproblem<'_>, u: &TimeField, v: &BoundaryTimeField, iteration: usize) -> Result<Evaluation> {
    let eval = sub.evaluate(u, v)?;
    if !(eval.y.is_finite() && eval.p.is_finite() && eval.value.is_finite()) {
        return Err(Error::NonFinite { context: "successive approximation", iteration });
    }
    Ok(eval)
}
