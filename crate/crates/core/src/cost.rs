//! Objective, augmented Lagrangian, multiplier candidate, residual index and
//! KKT residuals.

use crate::error::{Error, Result};
use crate::field::{
    integrate_omega_t, step_inner_omega, step_inner_sigma, BoundaryTimeField, ControlBounds, NodalField, SpaceField,
    TimeField,
};
use crate::mesh::Mesh;
use crate::operator::DiffusionCoefficients;

/// Data of the state-constrained control problem.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Mesh,
    pub coeffs: DiffusionCoefficients,
    pub y0: SpaceField,
    /// Terminal target.
    pub y_d: SpaceField,
    /// State obstacle, `y <= psi`.
    pub psi: TimeField,
    /// Weight of the distributed control cost.
    pub alpha: f64,
    /// Weight of the boundary control cost.
    pub beta: f64,
    pub bounds: ControlBounds,
    /// When false the boundary control is held at zero.
    pub boundary_control: bool,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha", format!("must be positive, got {}", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid("beta", format!("must be positive, got {}", self.beta)));
        }
        let mesh = &self.mesh;
        if self.y0.mesh() != mesh || self.y_d.mesh() != mesh || self.psi.mesh() != mesh || self.bounds.ua.mesh() != mesh
        {
            return Err(Error::MeshMismatch);
        }
        if self.coeffs.a11.len() != mesh.nodes() {
            return Err(Error::MeshMismatch);
        }
        if !self.psi.is_finite() {
            return Err(Error::invalid("psi", "contains non-finite values"));
        }
        if !self.y0.is_finite() || !self.y_d.is_finite() {
            return Err(Error::invalid("y0/y_d", "contain non-finite values"));
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must be positive, got {rho}")))
    }
}

/// `1/2 |y(T) - y_d|^2 + alpha/2 |u|^2 + beta/2 |v|^2`.
///
/// The control terms use the right-endpoint time rule, matching the
/// backward Euler pairing of `u[m]` with the step into level `m`.
pub fn cost_j(spec: &ProblemSpec, y: &TimeField, u: &TimeField, v: &BoundaryTimeField) -> Result<f64> {
    y.ensure_same_mesh(u)?;
    if v.mesh() != &spec.mesh || y.mesh() != &spec.mesh {
        return Err(Error::MeshMismatch);
    }
    let mismatch = y.slice(spec.mesh.nt).axpy(-1.0, &spec.y_d)?;
    let terminal = 0.5 * mismatch.inner(&mismatch)?;
    let control = 0.5 * spec.alpha * step_inner_omega(u, u)?;
    let boundary = 0.5 * spec.beta * step_inner_sigma(v, v)?;
    Ok(terminal + control + boundary)
}

/// `J + 1/(2 rho) int ((rho (y - psi) + mu)_+^2 - mu^2)`.
pub fn augmented_lagrangian(
    spec: &ProblemSpec,
    y: &TimeField,
    u: &TimeField,
    v: &BoundaryTimeField,
    mu: &TimeField,
    rho: f64,
) -> Result<f64> {
    check_rho(rho)?;
    y.ensure_same_mesh(mu)?;
    if mu.values().iter().any(|&m| m < 0.0) {
        return Err(Error::invalid("mu", "multiplier must be nonnegative"));
    }
    let j = cost_j(spec, y, u, v)?;
    let mut integrand = TimeField::zeros(&spec.mesh);
    for (((o, &yv), &pv), &mv) in
        integrand.values_mut().iter_mut().zip(y.values()).zip(spec.psi.values()).zip(mu.values())
    {
        let shifted = (rho * (yv - pv) + mv).max(0.0);
        *o = shifted * shifted - mv * mv;
    }
    let one = TimeField::constant(&spec.mesh, 1.0);
    Ok(j + step_inner_omega(&integrand, &one)? / (2.0 * rho))
}

/// `(rho (y - psi) + mu)_+`, the updated multiplier estimate.
pub fn multiplier_candidate(y: &TimeField, psi: &TimeField, mu: &TimeField, rho: f64) -> Result<TimeField> {
    check_rho(rho)?;
    y.ensure_same_mesh(psi)?;
    y.ensure_same_mesh(mu)?;
    let mut out = y.clone();
    for ((o, &pv), &mv) in out.values_mut().iter_mut().zip(psi.values()).zip(mu.values()) {
        *o = (rho * (*o - pv) + mv).max(0.0);
    }
    Ok(out)
}

/// Feasibility part: `|(y - psi)_+|_inf`.
pub fn feasibility(y: &TimeField, psi: &TimeField) -> Result<f64> {
    Ok(y.axpy(-1.0, psi)?.positive_part().sup_norm())
}

/// Complementarity part: `|int mu_bar (psi - y)|`.
pub fn complementarity(y: &TimeField, psi: &TimeField, mu_bar: &TimeField) -> Result<f64> {
    let slack = psi.axpy(-1.0, y)?;
    Ok(integrate_omega_t(mu_bar, &slack)?.abs())
}

/// `R = |(y - psi)_+|_inf + |int mu_bar (psi - y)|`.
pub fn residual_index(y: &TimeField, psi: &TimeField, mu_bar: &TimeField) -> Result<f64> {
    Ok(feasibility(y, psi)? + complementarity(y, psi, mu_bar)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    pub stationarity_u: f64,
    pub stationarity_v: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// Residuals of the optimality system at `(y, u, v, p, mu_bar)`.
///
/// Stationarity is the distance of each control to the projection of
/// `-p / alpha` (resp. `-p|_Sigma / beta`) onto its admissible box.
pub fn kkt_residuals(
    spec: &ProblemSpec,
    y: &TimeField,
    u: &TimeField,
    v: &BoundaryTimeField,
    p: &TimeField,
    mu_bar: &TimeField,
) -> Result<KktResiduals> {
    let target_u = p.map(|pv| -pv / spec.alpha).project_interval(&spec.bounds.ua, &spec.bounds.ub)?;
    let du = u.axpy(-1.0, &target_u)?;
    let stationarity_u = step_inner_omega(&du, &du)?.sqrt();
    let stationarity_v = if spec.boundary_control {
        let target_v = p.trace().map(|pv| -pv / spec.beta).project_interval(&spec.bounds.va, &spec.bounds.vb)?;
        let dv = v.axpy(-1.0, &target_v)?;
        step_inner_sigma(&dv, &dv)?.sqrt()
    } else {
        0.0
    };
    Ok(KktResiduals {
        stationarity_u,
        stationarity_v,
        feasibility: feasibility(y, &spec.psi)?,
        complementarity: complementarity(y, &spec.psi, mu_bar)?,
    })
}
