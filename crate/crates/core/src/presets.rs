//! Built-in problem instances.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::cost::ProblemSpec;
use crate::error::{Error, Result};
use crate::field::{ControlBounds, SpaceField, TimeField};
use crate::mesh::Mesh;
use crate::operator::DiffusionCoefficients;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// `y0 = sin(pi x) sin(pi y)`, `y_d = exp(-2 alpha pi T) y0`, `psi = 1`,
    /// `alpha = 1`, `u in [-1, 1]`, no boundary control; `mu0 = 10`.
    SineObstacle,
    /// Same data with `psi = 1e6`, so the constraint never binds; `mu0 = 0`.
    UnconstrainedDecay,
    /// Boundary control active: `y0 = 0`, `y_d = x`, `alpha = beta = 1`,
    /// both controls in `[-1, 1]`, `psi = 1e6`; `mu0 = 0`.
    BoundaryControlDemo,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::SineObstacle, Preset::UnconstrainedDecay, Preset::BoundaryControlDemo];

    pub fn name(self) -> &'static str {
        match self {
            Preset::SineObstacle => "paper_example_sec5",
            Preset::UnconstrainedDecay => "unconstrained_decay",
            Preset::BoundaryControlDemo => "boundary_control_demo",
        }
    }

    /// Default grid: `h = dt = 0.25` on the unit square up to `T = 1`.
    pub fn default_mesh() -> Mesh {
        Mesh::unit(5, 5, 4, 1.0).expect("valid default mesh")
    }

    /// Problem data on `mesh`, scaled by `alpha` where the data depend on it.
    pub fn spec_with_alpha(self, mesh: &Mesh, alpha: f64) -> Result<ProblemSpec> {
        let sine = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
        let decay = (-2.0 * alpha * PI * mesh.t_final).exp();
        let spec = match self {
            Preset::SineObstacle | Preset::UnconstrainedDecay => ProblemSpec {
                mesh: *mesh,
                coeffs: DiffusionCoefficients::unit(mesh),
                y0: SpaceField::from_fn(mesh, sine),
                y_d: SpaceField::from_fn(mesh, |x, y| decay * sine(x, y)),
                psi: TimeField::constant(mesh, if self == Preset::SineObstacle { 1.0 } else { 1e6 }),
                alpha,
                beta: 1.0,
                bounds: ControlBounds::constant(mesh, -1.0, 1.0, -1.0, 1.0)?,
                boundary_control: false,
            },
            Preset::BoundaryControlDemo => ProblemSpec {
                mesh: *mesh,
                coeffs: DiffusionCoefficients::unit(mesh),
                y0: SpaceField::zeros(mesh),
                y_d: SpaceField::from_fn(mesh, |x, _| x),
                psi: TimeField::constant(mesh, 1e6),
                alpha,
                beta: 1.0,
                bounds: ControlBounds::constant(mesh, -1.0, 1.0, -1.0, 1.0)?,
                boundary_control: true,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn spec(self, mesh: &Mesh) -> Result<ProblemSpec> {
        self.spec_with_alpha(mesh, 1.0)
    }

    pub fn default_mu0(self) -> f64 {
        match self {
            Preset::SineObstacle => 10.0,
            Preset::UnconstrainedDecay | Preset::BoundaryControlDemo => 0.0,
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::invalid("preset", format!("unknown preset {s:?}")))
    }
}
