//! Uniform space-time grid over the rectangle `[0, lx] x [0, ly]` and the
//! time interval `[0, T]`, together with the nodal quadrature weights.
//!
//! Nodes are vertex-centered. Within a time slice, node `(i, j)` lives at
//! `(i * hx, j * hy)` and is stored at flat index `j * nx + i` (x fastest).

use crate::error::{Error, Result};

/// Uniform discretization of the space-time cylinder and its lateral boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    /// Number of time steps; there are `nt + 1` time levels.
    pub nt: usize,
    pub lx: f64,
    pub ly: f64,
    pub t_final: f64,
    pub hx: f64,
    pub hy: f64,
    pub dt: f64,
}

/// Which side of the rectangle a boundary node sits on. Corners are
/// reported as the side on which the boundary walk reaches them first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Mesh {
    /// Builds the mesh for `nx x ny` nodes and `nt` implicit time steps.
    pub fn new(nx: usize, ny: usize, nt: usize, lx: f64, ly: f64, t_final: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || nt < 1 {
            return Err(Error::DimensionTooSmall { nx, ny, nt });
        }
        for (name, value) in [("lx", lx), ("ly", ly), ("T", t_final)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveExtent { name, value });
            }
        }
        Ok(Self {
            nx,
            ny,
            nt,
            lx,
            ly,
            t_final,
            hx: lx / (nx - 1) as f64,
            hy: ly / (ny - 1) as f64,
            dt: t_final / nt as f64,
        })
    }

    /// The unit square over `[0, 1]` with the given resolution.
    pub fn unit(nx: usize, ny: usize, nt: usize, t_final: f64) -> Result<Self> {
        Self::new(nx, ny, nt, 1.0, 1.0, t_final)
    }

    #[inline]
    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.hy
    }

    #[inline]
    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// Share of the cell width owned by node `i` along x: `hx` inside, `hx/2` on the edge.
    #[inline]
    pub fn x_share(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx - 1 {
            0.5 * self.hx
        } else {
            self.hx
        }
    }

    #[inline]
    pub fn y_share(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny - 1 {
            0.5 * self.hy
        } else {
            self.hy
        }
    }

    /// Trapezoidal area weight of node `(i, j)`; this is also the lumped mass.
    #[inline]
    pub fn space_weight(&self, i: usize, j: usize) -> f64 {
        self.x_share(i) * self.y_share(j)
    }

    /// All space weights in storage order.
    pub fn space_weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.nodes());
        for j in 0..self.ny {
            for i in 0..self.nx {
                w.push(self.space_weight(i, j));
            }
        }
        w
    }

    /// Trapezoidal time weight of level `m`.
    #[inline]
    pub fn time_weight(&self, m: usize) -> f64 {
        if m == 0 || m == self.nt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Weight of level `m` in the objective functional.
    ///
    /// A backward Euler step from `t_{m-1}` to `t_m` consumes the source at
    /// level `m`, so the control on `(t_{m-1}, t_m]` is `u[m]` and level 0 is
    /// never consumed. Weighting the objective with this right-endpoint rule
    /// makes the backward recursion in `parabolic::solve_adjoint` the exact
    /// transpose of the forward solve.
    #[inline]
    pub fn step_weight(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.dt
        }
    }

    /// Number of nodes on the boundary walk.
    #[inline]
    pub fn boundary_len(&self) -> usize {
        2 * (self.nx - 1) + 2 * (self.ny - 1)
    }

    /// Grid coordinates of boundary node `b`.
    ///
    /// The walk starts at the origin and runs counter-clockwise: bottom edge,
    /// right edge, top edge, left edge. Each corner appears once.
    pub fn boundary_node(&self, b: usize) -> (usize, usize) {
        let (nx, ny) = (self.nx, self.ny);
        let bottom = nx - 1;
        let right = bottom + ny - 1;
        let top = right + nx - 1;
        if b < bottom {
            (b, 0)
        } else if b < right {
            (nx - 1, b - bottom)
        } else if b < top {
            (nx - 1 - (b - right), ny - 1)
        } else {
            assert!(b < self.boundary_len(), "boundary index out of range");
            (0, ny - 1 - (b - top))
        }
    }

    pub fn boundary_side(&self, b: usize) -> Side {
        let bottom = self.nx - 1;
        let right = bottom + self.ny - 1;
        let top = right + self.nx - 1;
        if b < bottom {
            Side::Bottom
        } else if b < right {
            Side::Right
        } else if b < top {
            Side::Top
        } else {
            Side::Left
        }
    }

    /// Boundary walk as flat node indices.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.boundary_len())
            .map(|b| {
                let (i, j) = self.boundary_node(b);
                self.index(i, j)
            })
            .collect()
    }

    /// Arc-length weight of boundary node `b` (half of each adjacent segment).
    pub fn boundary_weight(&self, b: usize) -> f64 {
        let (i, j) = self.boundary_node(b);
        let on_x_edge = j == 0 || j == self.ny - 1;
        let on_y_edge = i == 0 || i == self.nx - 1;
        match (on_x_edge, on_y_edge) {
            (true, true) => 0.5 * (self.hx + self.hy),
            (true, false) => self.hx,
            (false, true) => self.hy,
            (false, false) => unreachable!("boundary walk produced an interior node"),
        }
    }

    pub fn boundary_weights(&self) -> Vec<f64> {
        (0..self.boundary_len()).map(|b| self.boundary_weight(b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_grid_steps() {
        let mesh = Mesh::unit(5, 5, 4, 1.0).unwrap();
        assert_eq!(mesh.hx, 0.25);
        assert_eq!(mesh.hy, 0.25);
        assert_eq!(mesh.dt, 0.25);
    }

    #[test]
    fn anisotropic_steps() {
        let mesh = Mesh::new(9, 5, 8, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(mesh.hx, 0.25);
        assert_eq!(mesh.hy, 0.25);
        assert_eq!(mesh.dt, 0.125);
    }

    #[test]
    fn weights_sum_to_measure() {
        for (nx, ny, nt, lx, ly, t) in [(3, 3, 1, 1.0, 1.0, 1.0), (7, 4, 5, 2.5, 0.3, 0.7), (33, 17, 64, 1.0, 2.0, 0.1)]
        {
            let mesh = Mesh::new(nx, ny, nt, lx, ly, t).unwrap();
            let area: f64 = mesh.space_weights().iter().sum();
            assert!((area - lx * ly).abs() <= 1e-12 * lx * ly);
            let time: f64 = (0..mesh.levels()).map(|m| mesh.time_weight(m)).sum();
            assert!((time - t).abs() <= 1e-12 * t);
            let steps: f64 = (0..mesh.levels()).map(|m| mesh.step_weight(m)).sum();
            assert!((steps - t).abs() <= 1e-12 * t);
            let perimeter: f64 = mesh.boundary_weights().iter().sum();
            assert!((perimeter - 2.0 * (lx + ly)).abs() <= 1e-12 * perimeter);
        }
    }

    #[test]
    fn boundary_walk_visits_each_boundary_node_once() {
        let mesh = Mesh::new(6, 4, 1, 1.0, 1.0, 1.0).unwrap();
        let mut seen = mesh.boundary_indices();
        assert_eq!(seen.len(), 2 * 5 + 2 * 3);
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), mesh.boundary_len());
        for &k in &seen {
            let (i, j) = (k % mesh.nx, k / mesh.nx);
            assert!(i == 0 || j == 0 || i == mesh.nx - 1 || j == mesh.ny - 1);
        }
        assert_eq!(mesh.boundary_node(0), (0, 0));
        assert_eq!(mesh.boundary_side(mesh.boundary_len() - 1), Side::Left);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(Mesh::unit(2, 5, 4, 1.0), Err(Error::DimensionTooSmall { .. })));
        assert!(matches!(Mesh::unit(5, 5, 0, 1.0), Err(Error::DimensionTooSmall { .. })));
        assert!(matches!(Mesh::new(5, 5, 4, 0.0, 1.0, 1.0), Err(Error::NonPositiveExtent { name: "lx", .. })));
        assert!(matches!(Mesh::new(5, 5, 4, 1.0, 1.0, -1.0), Err(Error::NonPositiveExtent { name: "T", .. })));
    }
}
