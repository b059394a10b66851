//! Nodal field containers and the elementwise/quadrature primitives shared by
//! every solver stage.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Common access for all nodal containers.
pub trait NodalField: Sized + Clone {
    fn mesh(&self) -> &Mesh;
    fn values(&self) -> &[f64];
    fn values_mut(&mut self) -> &mut [f64];

    fn ensure_same_mesh(&self, other: &Self) -> Result<()> {
        if self.mesh() == other.mesh() {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let mut out = self.clone();
        out.values_mut().iter_mut().for_each(|v| *v = f(*v));
        out
    }

    fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_mesh(other)?;
        let mut out = self.clone();
        for (o, b) in out.values_mut().iter_mut().zip(other.values()) {
            *o = f(*o, *b);
        }
        Ok(out)
    }

    /// Largest absolute nodal value.
    fn sup_norm(&self) -> f64 {
        self.values().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Largest absolute nodal difference.
    fn sup_distance(&self, other: &Self) -> Result<f64> {
        self.ensure_same_mesh(other)?;
        Ok(self.values().iter().zip(other.values()).fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
    }

    fn positive_part(&self) -> Self {
        self.map(|v| v.max(0.0))
    }

    /// Clamps every node into `[lo, hi]`.
    fn project_interval(&self, lo: &Self, hi: &Self) -> Result<Self> {
        self.ensure_same_mesh(lo)?;
        self.ensure_same_mesh(hi)?;
        check_ordered(lo.values(), hi.values())?;
        let mut out = self.clone();
        for ((v, l), h) in out.values_mut().iter_mut().zip(lo.values()).zip(hi.values()) {
            *v = v.clamp(*l, *h);
        }
        Ok(out)
    }

    fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    /// `self + scale * other`.
    fn axpy(&self, scale: f64, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + scale * b)
    }
}

/// Degenerate intervals (`lo == hi`) are allowed and pin the value.
pub(crate) fn check_ordered(lo: &[f64], hi: &[f64]) -> Result<()> {
    for (index, (l, h)) in lo.iter().zip(hi).enumerate() {
        if !(l <= h) {
            return Err(Error::InvalidBounds { index, lower: *l, upper: *h });
        }
    }
    Ok(())
}

macro_rules! nodal_field {
    ($name:ident) => {
        impl NodalField for $name {
            fn mesh(&self) -> &Mesh {
                &self.mesh
            }
            fn values(&self) -> &[f64] {
                &self.values
            }
            fn values_mut(&mut self) -> &mut [f64] {
                &mut self.values
            }
        }
    };
}

/// A function sampled on one time level of the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceField {
    mesh: Mesh,
    values: Vec<f64>,
}

nodal_field!(SpaceField);

impl SpaceField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self { mesh: *mesh, values: vec![c; mesh.nodes()] }
    }

    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.nodes());
        for j in 0..mesh.ny {
            for i in 0..mesh.nx {
                values.push(f(mesh.x(i), mesh.y(j)));
            }
        }
        Self { mesh: *mesh, values }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self { mesh: *mesh, values })
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.mesh.index(i, j)]
    }

    /// `(f, g)_Omega` with trapezoidal area weights.
    pub fn inner(&self, other: &Self) -> Result<f64> {
        self.ensure_same_mesh(other)?;
        Ok(space_inner(&self.mesh, &self.values, &other.values))
    }
}

pub(crate) fn space_inner(mesh: &Mesh, f: &[f64], g: &[f64]) -> f64 {
    let mut sum = 0.0;
    for j in 0..mesh.ny {
        let wy = mesh.y_share(j);
        for i in 0..mesh.nx {
            let k = mesh.index(i, j);
            sum += mesh.x_share(i) * wy * f[k] * g[k];
        }
    }
    sum
}

/// A function sampled on every space-time node; level `m` is at `t = m * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeField {
    mesh: Mesh,
    values: Vec<f64>,
}

nodal_field!(TimeField);

impl TimeField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self { mesh: *mesh, values: vec![c; mesh.nodes() * mesh.levels()] }
    }

    /// Samples `f(x, y, t)` on all nodes.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.nodes() * mesh.levels());
        for m in 0..mesh.levels() {
            let t = mesh.t(m);
            for j in 0..mesh.ny {
                for i in 0..mesh.nx {
                    values.push(f(mesh.x(i), mesh.y(j), t));
                }
            }
        }
        Self { mesh: *mesh, values }
    }

    /// Repeats one spatial slice on every time level.
    pub fn from_slice(slice: &SpaceField) -> Self {
        let mesh = slice.mesh;
        let mut values = Vec::with_capacity(mesh.nodes() * mesh.levels());
        for _ in 0..mesh.levels() {
            values.extend_from_slice(&slice.values);
        }
        Self { mesh, values }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes() * mesh.levels() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self { mesh: *mesh, values })
    }

    #[inline]
    pub fn level(&self, m: usize) -> &[f64] {
        let n = self.mesh.nodes();
        &self.values[m * n..(m + 1) * n]
    }

    #[inline]
    pub fn level_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.mesh.nodes();
        &mut self.values[m * n..(m + 1) * n]
    }

    pub fn slice(&self, m: usize) -> SpaceField {
        SpaceField { mesh: self.mesh, values: self.level(m).to_vec() }
    }

    #[inline]
    pub fn at(&self, m: usize, i: usize, j: usize) -> f64 {
        self.values[m * self.mesh.nodes() + self.mesh.index(i, j)]
    }

    /// Restriction of every level to the boundary walk.
    pub fn trace(&self) -> BoundaryTimeField {
        let walk = self.mesh.boundary_indices();
        let mut values = Vec::with_capacity(walk.len() * self.mesh.levels());
        for m in 0..self.mesh.levels() {
            let level = self.level(m);
            values.extend(walk.iter().map(|&k| level[k]));
        }
        BoundaryTimeField { mesh: self.mesh, values }
    }
}

/// A function sampled on boundary nodes (in walk order) at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTimeField {
    mesh: Mesh,
    values: Vec<f64>,
}

nodal_field!(BoundaryTimeField);

impl BoundaryTimeField {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh, c: f64) -> Self {
        Self { mesh: *mesh, values: vec![c; mesh.boundary_len() * mesh.levels()] }
    }

    /// Samples `f(x, y, t)` at the boundary nodes.
    pub fn from_fn(mesh: &Mesh, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(mesh.boundary_len() * mesh.levels());
        for m in 0..mesh.levels() {
            for b in 0..mesh.boundary_len() {
                let (i, j) = mesh.boundary_node(b);
                values.push(f(mesh.x(i), mesh.y(j), mesh.t(m)));
            }
        }
        Self { mesh: *mesh, values }
    }

    pub fn from_values(mesh: &Mesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.boundary_len() * mesh.levels() {
            return Err(Error::MeshMismatch);
        }
        Ok(Self { mesh: *mesh, values })
    }

    #[inline]
    pub fn level(&self, m: usize) -> &[f64] {
        let n = self.mesh.boundary_len();
        &self.values[m * n..(m + 1) * n]
    }

    #[inline]
    pub fn level_mut(&mut self, m: usize) -> &mut [f64] {
        let n = self.mesh.boundary_len();
        &mut self.values[m * n..(m + 1) * n]
    }
}

/// `int_0^T (f, g)_Omega dt` with trapezoidal weights in space and time.
pub fn integrate_omega_t(f: &TimeField, g: &TimeField) -> Result<f64> {
    f.ensure_same_mesh(g)?;
    let mesh = f.mesh;
    Ok((0..mesh.levels()).map(|m| mesh.time_weight(m) * space_inner(&mesh, f.level(m), g.level(m))).sum())
}

/// `int_0^T (f, g)_Sigma dt` with trapezoidal weights along the boundary walk and in time.
pub fn integrate_sigma_t(f: &BoundaryTimeField, g: &BoundaryTimeField) -> Result<f64> {
    f.ensure_same_mesh(g)?;
    let mesh = f.mesh;
    let w = mesh.boundary_weights();
    Ok((0..mesh.levels())
        .map(|m| {
            let s: f64 = f.level(m).iter().zip(g.level(m)).zip(&w).map(|((a, b), w)| w * a * b).sum();
            mesh.time_weight(m) * s
        })
        .sum())
}

/// Space-time inner product used by the objective: trapezoidal in space,
/// right-endpoint in time (see [`Mesh::step_weight`]).
pub fn step_inner_omega(f: &TimeField, g: &TimeField) -> Result<f64> {
    f.ensure_same_mesh(g)?;
    let mesh = f.mesh;
    Ok((1..mesh.levels()).map(|m| mesh.step_weight(m) * space_inner(&mesh, f.level(m), g.level(m))).sum())
}

/// Boundary counterpart of [`step_inner_omega`].
pub fn step_inner_sigma(f: &BoundaryTimeField, g: &BoundaryTimeField) -> Result<f64> {
    f.ensure_same_mesh(g)?;
    let mesh = f.mesh;
    let w = mesh.boundary_weights();
    Ok((1..mesh.levels())
        .map(|m| {
            let s: f64 = f.level(m).iter().zip(g.level(m)).zip(&w).map(|((a, b), w)| w * a * b).sum();
            mesh.step_weight(m) * s
        })
        .sum())
}

/// Box constraints for the distributed and boundary controls.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlBounds {
    pub ua: TimeField,
    pub ub: TimeField,
    pub va: BoundaryTimeField,
    pub vb: BoundaryTimeField,
}

impl ControlBounds {
    pub fn new(ua: TimeField, ub: TimeField, va: BoundaryTimeField, vb: BoundaryTimeField) -> Result<Self> {
        ua.ensure_same_mesh(&ub)?;
        if va.mesh() != ua.mesh() || vb.mesh() != ua.mesh() {
            return Err(Error::MeshMismatch);
        }
        check_ordered(ua.values(), ub.values())?;
        check_ordered(va.values(), vb.values())?;
        Ok(Self { ua, ub, va, vb })
    }

    pub fn constant(mesh: &Mesh, ua: f64, ub: f64, va: f64, vb: f64) -> Result<Self> {
        Self::new(
            TimeField::constant(mesh, ua),
            TimeField::constant(mesh, ub),
            BoundaryTimeField::constant(mesh, va),
            BoundaryTimeField::constant(mesh, vb),
        )
    }

    pub fn project_u(&self, u: &TimeField) -> Result<TimeField> {
        u.project_interval(&self.ua, &self.ub)
    }

    pub fn project_v(&self, v: &BoundaryTimeField) -> Result<BoundaryTimeField> {
        v.project_interval(&self.va, &self.vb)
    }
}
