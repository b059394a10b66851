//! Finite-volume discretization of `A y = -div(diag(a11, a22) grad y)` with a
//! homogeneous Neumann closure, and the conjugate-gradient solver for the
//! implicit Euler systems `(M + dt A) x = b`.
//!
//! `A` is stored matrix-free as face conductances. Node `(i, j)` owns the
//! dual cell `x_share(i) x y_share(j)`; the flux across the face between two
//! x-neighbours is `a_face * y_share(j) / hx * (y_left - y_right)`. This gives
//! a symmetric positive semidefinite `A` with zero row sums, and `M` is the
//! diagonal of dual-cell areas.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

pub const DEFAULT_LIN_TOL: f64 = 1e-10;

/// Diagonal anisotropic diffusion coefficients, one pair per node.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionCoefficients {
    pub a11: Vec<f64>,
    pub a22: Vec<f64>,
    /// Ellipticity constant; every coefficient must be at least this large.
    pub theta: f64,
}

impl DiffusionCoefficients {
    /// The Laplacian, `a11 = a22 = 1`.
    pub fn unit(mesh: &Mesh) -> Self {
        Self::constant(mesh, 1.0, 1.0)
    }

    pub fn constant(mesh: &Mesh, a11: f64, a22: f64) -> Self {
        Self { a11: vec![a11; mesh.nodes()], a22: vec![a22; mesh.nodes()], theta: a11.min(a22) }
    }

    fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.a11.len() != mesh.nodes() || self.a22.len() != mesh.nodes() {
            return Err(Error::MeshMismatch);
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::invalid("theta", format!("must be positive, got {}", self.theta)));
        }
        for (index, &value) in self.a11.iter().chain(&self.a22).enumerate() {
            if !(value >= self.theta) || !value.is_finite() {
                return Err(Error::NonElliptic { index: index % mesh.nodes(), value, theta: self.theta });
            }
        }
        Ok(())
    }
}

/// Assembled stiffness `A`, lumped mass `M`, and the solver state for `M + dt A`.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    mesh: Mesh,
    mass: Vec<f64>,
    /// Conductance of the face between `(i, j)` and `(i + 1, j)`, indexed by `(i, j)`.
    east: Vec<f64>,
    /// Conductance of the face between `(i, j)` and `(i, j + 1)`, indexed by `(i, j)`.
    north: Vec<f64>,
    /// Diagonal of `M + dt A`, the Jacobi preconditioner.
    shifted_diag: Vec<f64>,
    pub lin_tol: f64,
    pub max_iter: usize,
}

/// Outcome of one linear solve.
#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

impl DiscreteOperator {
    pub fn assemble(mesh: &Mesh, coeffs: &DiffusionCoefficients) -> Result<Self> {
        coeffs.validate(mesh)?;
        let n = mesh.nodes();
        let mut east = vec![0.0; n];
        let mut north = vec![0.0; n];
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                let k = mesh.index(i, j);
                if i + 1 < mesh.nx {
                    let a = 0.5 * (coeffs.a11[k] + coeffs.a11[k + 1]);
                    east[k] = a * mesh.y_share(j) / mesh.hx;
                }
                if j + 1 < mesh.ny {
                    let a = 0.5 * (coeffs.a22[k] + coeffs.a22[k + mesh.nx]);
                    north[k] = a * mesh.x_share(i) / mesh.hy;
                }
            }
        }
        let mass = mesh.space_weights();
        let mut op = Self {
            mesh: *mesh,
            mass,
            east,
            north,
            shifted_diag: Vec::new(),
            lin_tol: DEFAULT_LIN_TOL,
            max_iter: 10 * n,
        };
        op.shifted_diag = (0..n).map(|k| op.mass[k] + mesh.dt * op.stiffness_diag(k)).collect();
        Ok(op)
    }

    pub fn with_tolerance(mut self, lin_tol: f64) -> Self {
        self.lin_tol = lin_tol;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    fn stiffness_diag(&self, k: usize) -> f64 {
        let (i, j) = (k % self.mesh.nx, k / self.mesh.nx);
        let mut d = self.east[k] + self.north[k];
        if i > 0 {
            d += self.east[k - 1];
        }
        if j > 0 {
            d += self.north[k - self.mesh.nx];
        }
        d
    }

    /// Entry `A[row, col]` of the stiffness matrix.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let nx = self.mesh.nx;
        if row == col {
            return self.stiffness_diag(row);
        }
        let (lo, hi) = (row.min(col), row.max(col));
        if hi == lo + 1 && lo % nx + 1 < nx {
            -self.east[lo]
        } else if hi == lo + nx {
            -self.north[lo]
        } else {
            0.0
        }
    }

    /// `out = A y`.
    pub fn apply_stiffness_into(&self, y: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.mesh.nx, self.mesh.ny);
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                if i + 1 < nx {
                    let flux = self.east[k] * (y[k] - y[k + 1]);
                    out[k] += flux;
                    out[k + 1] -= flux;
                }
                if j + 1 < ny {
                    let flux = self.north[k] * (y[k] - y[k + nx]);
                    out[k] += flux;
                    out[k + nx] -= flux;
                }
            }
        }
    }

    pub fn apply_stiffness(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        self.apply_stiffness_into(y, &mut out);
        out
    }

    /// The discrete elliptic operator `M^{-1} A y`.
    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let mut out = self.apply_stiffness(y);
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o /= m;
        }
        out
    }

    fn apply_shifted_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_stiffness_into(y, out);
        let dt = self.mesh.dt;
        for ((o, m), v) in out.iter_mut().zip(&self.mass).zip(y) {
            *o = m * v + dt * *o;
        }
    }

    /// Solves `(M + dt A) x = rhs` by Jacobi-preconditioned conjugate
    /// gradients, starting from `x` on entry.
    pub fn solve_shifted(&self, rhs: &[f64], x: &mut [f64]) -> Result<SolveStats> {
        let n = rhs.len();
        let b_norm = norm(rhs);
        if b_norm == 0.0 {
            x.iter_mut().for_each(|v| *v = 0.0);
            return Ok(SolveStats { iterations: 0, residual: 0.0 });
        }
        let mut r = vec![0.0; n];
        self.apply_shifted_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(rhs) {
            *ri = bi - *ri;
        }
        let mut residual = norm(&r) / b_norm;
        if residual <= self.lin_tol {
            return Ok(SolveStats { iterations: 0, residual });
        }
        let mut z: Vec<f64> = r.iter().zip(&self.shifted_diag).map(|(r, d)| r / d).collect();
        let mut p = z.clone();
        let mut q = vec![0.0; n];
        let mut rz = dot(&r, &z);
        for it in 1..=self.max_iter {
            self.apply_shifted_into(&p, &mut q);
            let alpha = rz / dot(&p, &q);
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            residual = norm(&r) / b_norm;
            if !residual.is_finite() {
                break;
            }
            if residual <= self.lin_tol {
                return Ok(SolveStats { iterations: it, residual });
            }
            for k in 0..n {
                z[k] = r[k] / self.shifted_diag[k];
            }
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::LinearSolver { iterations: self.max_iter, residual })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
