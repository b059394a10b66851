//! The reduced augmented-Lagrangian sub-problem for fixed `(mu, rho)`:
//! controls in, state / multiplier candidate / adjoint / value out.
//!
//! The adjoint returned here is the Riesz representative of the reduced
//! gradient with respect to the objective's inner product, so that
//! `grad = alpha u + p` on the distributed control and `beta v + p|_Sigma`
//! on the boundary control, exactly, at every level `m >= 1`.

use crate::cost::{augmented_lagrangian, multiplier_candidate, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::{step_inner_omega, step_inner_sigma, BoundaryTimeField, NodalField, SpaceField, TimeField};
use crate::operator::DiscreteOperator;
use crate::parabolic::{implicit_step, solve_adjoint, solve_forward};

/// Everything computed from one control pair.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub y: TimeField,
    pub mu_bar: TimeField,
    pub p: TimeField,
    /// `L_rho(y, u, v, mu)`.
    pub value: f64,
}

pub struct Subproblem<'a> {
    pub spec: &'a ProblemSpec,
    pub op: &'a DiscreteOperator,
    pub mu: &'a TimeField,
    pub rho: f64,
}

impl<'a> Subproblem<'a> {
    pub fn new(spec: &'a ProblemSpec, op: &'a DiscreteOperator, mu: &'a TimeField, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::invalid("rho", format!("must be positive, got {rho}")));
        }
        if mu.mesh() != &spec.mesh || op.mesh() != &spec.mesh {
            return Err(Error::MeshMismatch);
        }
        if mu.values().iter().any(|&m| !(m >= 0.0)) {
            return Err(Error::invalid("mu", "multiplier must be nonnegative"));
        }
        Ok(Self { spec, op, mu, rho })
    }

    pub fn state(&self, u: &TimeField, v: &BoundaryTimeField) -> Result<TimeField> {
        solve_forward(self.op, u, v, &self.spec.y0)
    }

    /// Reduced objective value `L_rho(S(u, v), u, v, mu)`.
    pub fn value(&self, u: &TimeField, v: &BoundaryTimeField) -> Result<f64> {
        let y = self.state(u, v)?;
        augmented_lagrangian(self.spec, &y, u, v, self.mu, self.rho)
    }

    /// Adjoint for a given state and multiplier candidate.
    ///
    /// The terminal level carries one extra implicit step applied to
    /// `y(T) - y_d + dt mu_bar(T)`; below it the backward recursion is the
    /// plain `solve_adjoint` driven by `mu_bar`.
    pub fn adjoint(&self, y: &TimeField, mu_bar: &TimeField) -> Result<TimeField> {
        let mesh = &self.spec.mesh;
        let nt = mesh.nt;
        let mut seed = y.slice(nt).axpy(-1.0, &self.spec.y_d)?;
        for (s, mb) in seed.values_mut().iter_mut().zip(mu_bar.level(nt)) {
            *s += mesh.dt * mb;
        }
        let terminal: SpaceField = implicit_step(self.op, &seed)?;
        solve_adjoint(self.op, mu_bar, &terminal)
    }

    pub fn evaluate(&self, u: &TimeField, v: &BoundaryTimeField) -> Result<Evaluation> {
        let y = self.state(u, v)?;
        let mu_bar = multiplier_candidate(&y, &self.spec.psi, self.mu, self.rho)?;
        let p = self.adjoint(&y, &mu_bar)?;
        let value = augmented_lagrangian(self.spec, &y, u, v, self.mu, self.rho)?;
        Ok(Evaluation { y, mu_bar, p, value })
    }

    /// Gradient fields `(alpha u + p, beta v + p|_Sigma)`.
    pub fn gradient(
        &self,
        eval: &Evaluation,
        u: &TimeField,
        v: &BoundaryTimeField,
    ) -> Result<(TimeField, BoundaryTimeField)> {
        let gu = u.map(|x| self.spec.alpha * x).axpy(1.0, &eval.p)?;
        let gv = if self.spec.boundary_control {
            v.map(|x| self.spec.beta * x).axpy(1.0, &eval.p.trace())?
        } else {
            BoundaryTimeField::zeros(&self.spec.mesh)
        };
        Ok((gu, gv))
    }

    /// Directional derivative of the reduced objective along `(du, dv)`.
    pub fn directional_derivative(
        &self,
        eval: &Evaluation,
        u: &TimeField,
        v: &BoundaryTimeField,
        du: &TimeField,
        dv: &BoundaryTimeField,
    ) -> Result<f64> {
        let (gu, gv) = self.gradient(eval, u, v)?;
        let mut d = step_inner_omega(&gu, du)?;
        if self.spec.boundary_control {
            d += step_inner_sigma(&gv, dv)?;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::ControlBounds;
    use crate::mesh::Mesh;
    use crate::operator::DiffusionCoefficients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gradient_matches_central_differences_with_boundary_control() {
        let mesh = Mesh::new(5, 4, 4, 1.0, 0.75, 0.8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = ProblemSpec {
            mesh,
            coeffs: DiffusionCoefficients::constant(&mesh, 1.5, 0.7),
            y0: SpaceField::from_fn(&mesh, |x, y| x - y),
            y_d: SpaceField::from_fn(&mesh, |x, _| 0.3 * x),
            // strictly active everywhere keeps the penalty smooth
            psi: TimeField::constant(&mesh, -5.0),
            alpha: 0.6,
            beta: 0.4,
            bounds: ControlBounds::constant(&mesh, -2.0, 2.0, -2.0, 2.0).unwrap(),
            boundary_control: true,
        };
        let op = DiscreteOperator::assemble(&mesh, &spec.coeffs).unwrap().with_tolerance(1e-14);
        let mu = TimeField::constant(&mesh, 0.5);
        let sub = Subproblem::new(&spec, &op, &mu, 3.0).unwrap();
        let u = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let v = BoundaryTimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let du = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let dv = BoundaryTimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
        let eval = sub.evaluate(&u, &v).unwrap();
        let adj = sub.directional_derivative(&eval, &u, &v, &du, &dv).unwrap();
        let h = 1e-5;
        let plus = sub.value(&u.axpy(h, &du).unwrap(), &v.axpy(h, &dv).unwrap()).unwrap();
        let minus = sub.value(&u.axpy(-h, &du).unwrap(), &v.axpy(-h, &dv).unwrap()).unwrap();
        let fd = (plus - minus) / (2.0 * h);
        assert!((fd - adj).abs() <= 1e-7 * adj.abs(), "fd={fd} adjoint={adj}");
    }
}
