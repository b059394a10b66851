//! Backward Euler solvers for the state equation and the adjoint equation.
//!
//! Forward, for `m = 1..=nt`:
//! `(M + dt A) y[m] = M (y[m-1] + dt u[m]) + dt L v[m]`, where `L` spreads
//! the boundary flux over the boundary nodes with their arc-length weights.
//!
//! Backward, for `m = nt-1..=0`:
//! `(M + dt A) p[m] = M (p[m+1] + dt mu[m])` with `p[nt]` given.

use crate::error::{Error, Result};
use crate::field::{BoundaryTimeField, NodalField, SpaceField, TimeField};
use crate::operator::DiscreteOperator;

fn check_mesh<F: NodalField>(op: &DiscreteOperator, field: &F) -> Result<()> {
    if field.mesh() == op.mesh() {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

/// Solves the state equation with distributed source `u`, Neumann data `v`
/// and initial value `y0`.
pub fn solve_forward(
    op: &DiscreteOperator,
    u: &TimeField,
    v: &BoundaryTimeField,
    y0: &SpaceField,
) -> Result<TimeField> {
    check_mesh(op, u)?;
    check_mesh(op, v)?;
    check_mesh(op, y0)?;
    let mesh = *op.mesh();
    let walk = mesh.boundary_indices();
    let bw = mesh.boundary_weights();
    let mass = op.mass();
    let dt = mesh.dt;

    let mut y = TimeField::zeros(&mesh);
    y.level_mut(0).copy_from_slice(y0.values());
    let mut rhs = vec![0.0; mesh.nodes()];
    for m in 1..mesh.levels() {
        let prev = y.level(m - 1);
        let src = u.level(m);
        for k in 0..rhs.len() {
            rhs[k] = mass[k] * (prev[k] + dt * src[k]);
        }
        for ((&k, w), g) in walk.iter().zip(&bw).zip(v.level(m)) {
            rhs[k] += dt * w * g;
        }
        let mut next = prev.to_vec();
        op.solve_shifted(&rhs, &mut next)?;
        y.level_mut(m).copy_from_slice(&next);
    }
    Ok(y)
}

/// Solves the adjoint equation backward from `terminal` with source `mu`.
pub fn solve_adjoint(op: &DiscreteOperator, mu: &TimeField, terminal: &SpaceField) -> Result<TimeField> {
    check_mesh(op, mu)?;
    check_mesh(op, terminal)?;
    let mesh = *op.mesh();
    let mass = op.mass();
    let dt = mesh.dt;

    let mut p = TimeField::zeros(&mesh);
    p.level_mut(mesh.nt).copy_from_slice(terminal.values());
    let mut rhs = vec![0.0; mesh.nodes()];
    for m in (0..mesh.nt).rev() {
        let next = p.level(m + 1);
        let src = mu.level(m);
        for k in 0..rhs.len() {
            rhs[k] = mass[k] * (next[k] + dt * src[k]);
        }
        let mut cur = next.to_vec();
        op.solve_shifted(&rhs, &mut cur)?;
        p.level_mut(m).copy_from_slice(&cur);
    }
    Ok(p)
}

/// One homogeneous implicit step, `(M + dt A)^{-1} M x`.
pub fn implicit_step(op: &DiscreteOperator, x: &SpaceField) -> Result<SpaceField> {
    check_mesh(op, x)?;
    let rhs: Vec<f64> = x.values().iter().zip(op.mass()).map(|(v, m)| v * m).collect();
    let mut out = x.values().to_vec();
    op.solve_shifted(&rhs, &mut out)?;
    SpaceField::from_values(op.mesh(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::integrate_omega_t;
    use crate::mesh::Mesh;
    use crate::operator::DiffusionCoefficients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn laplacian(mesh: &Mesh) -> DiscreteOperator {
        DiscreteOperator::assemble(mesh, &DiffusionCoefficients::unit(mesh)).unwrap()
    }

    fn random_time(mesh: &Mesh, rng: &mut ChaCha8Rng) -> TimeField {
        let mut f = TimeField::zeros(mesh);
        f.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        f
    }

    #[test]
    fn constant_state_is_steady() {
        let mesh = Mesh::unit(7, 6, 5, 1.0).unwrap();
        let op = laplacian(&mesh);
        let y = solve_forward(
            &op,
            &TimeField::zeros(&mesh),
            &BoundaryTimeField::zeros(&mesh),
            &SpaceField::constant(&mesh, 0.37),
        )
        .unwrap();
        assert!(y.values().iter().all(|&v| v == 0.37));
    }

    #[test]
    fn constant_source_integrates_linearly() {
        let mesh = Mesh::unit(6, 5, 8, 2.0).unwrap();
        let op = laplacian(&mesh);
        let c = 1.5;
        let y = solve_forward(
            &op,
            &TimeField::constant(&mesh, c),
            &BoundaryTimeField::zeros(&mesh),
            &SpaceField::zeros(&mesh),
        )
        .unwrap();
        for m in 0..mesh.levels() {
            let expect = c * m as f64 * mesh.dt;
            for &v in y.level(m) {
                assert!((v - expect).abs() <= 1e-12 * (1.0 + expect));
            }
        }
    }

    #[test]
    fn cosine_mode_decays_at_the_analytic_rate() {
        let mesh = Mesh::unit(33, 33, 64, 0.1).unwrap();
        let op = laplacian(&mesh);
        let y = solve_forward(
            &op,
            &TimeField::zeros(&mesh),
            &BoundaryTimeField::zeros(&mesh),
            &SpaceField::from_fn(&mesh, |x, _| (PI * x).cos()),
        )
        .unwrap();
        let exact = TimeField::from_fn(&mesh, |x, _, t| (-PI * PI * t).exp() * (PI * x).cos());
        let diff = y.axpy(-1.0, &exact).unwrap();
        let rel = (integrate_omega_t(&diff, &diff).unwrap() / integrate_omega_t(&exact, &exact).unwrap()).sqrt();
        assert!(rel <= 0.05, "relative error {rel}");
    }

    #[test]
    fn mean_is_conserved_without_sources() {
        let mesh = Mesh::unit(17, 13, 20, 0.5).unwrap();
        let op = laplacian(&mesh);
        let y0 = SpaceField::from_fn(&mesh, |x, y| 1.0 + x * x - (3.0 * y).sin());
        let y = solve_forward(&op, &TimeField::zeros(&mesh), &BoundaryTimeField::zeros(&mesh), &y0).unwrap();
        let mean = |m: usize| y.slice(m).inner(&SpaceField::constant(&mesh, 1.0)).unwrap();
        let m0 = mean(0);
        for m in 1..mesh.levels() {
            assert!((mean(m) - m0).abs() <= 1e-10 * m0.abs(), "level {m}");
        }
    }

    #[test]
    fn maximum_principle_without_sources() {
        let mesh = Mesh::unit(9, 9, 12, 1.0).unwrap();
        let op = laplacian(&mesh);
        let y0 = SpaceField::from_fn(&mesh, |x, y| if x < 0.3 && y > 0.6 { 3.0 } else { -1.0 });
        let y = solve_forward(&op, &TimeField::zeros(&mesh), &BoundaryTimeField::zeros(&mesh), &y0).unwrap();
        for m in 0..mesh.nt {
            assert!(y.slice(m + 1).sup_norm() <= y.slice(m).sup_norm() + 1e-12);
        }
    }

    #[test]
    fn boundary_flux_enters_as_a_load() {
        // constant inflow g on the whole boundary raises the mean at rate g * perimeter / area
        let mesh = Mesh::new(6, 8, 4, 2.0, 1.0, 1.0).unwrap();
        let op = laplacian(&mesh);
        let g = 0.25;
        let y = solve_forward(
            &op,
            &TimeField::zeros(&mesh),
            &BoundaryTimeField::constant(&mesh, g),
            &SpaceField::zeros(&mesh),
        )
        .unwrap();
        let one = SpaceField::constant(&mesh, 1.0);
        let mass_end = y.slice(mesh.nt).inner(&one).unwrap();
        assert!((mass_end - g * 6.0 * 1.0).abs() <= 1e-10);
    }

    #[test]
    fn adjoint_examples() {
        let mesh = Mesh::unit(5, 5, 4, 1.0).unwrap();
        let op = laplacian(&mesh);
        let p = solve_adjoint(&op, &TimeField::zeros(&mesh), &SpaceField::zeros(&mesh)).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.0));

        let c = 2.0;
        let p = solve_adjoint(&op, &TimeField::constant(&mesh, c), &SpaceField::zeros(&mesh)).unwrap();
        for m in 0..mesh.levels() {
            let expect = c * (mesh.nt - m) as f64 * mesh.dt;
            assert!(p.level(m).iter().all(|&v| (v - expect).abs() <= 1e-12 * (1.0 + expect)));
        }
    }

    /// `sum_m dt <M g[m], y[m]>` for the forward response `y` to a source `f`
    /// equals `sum_m dt <M f[m], (implicit_step p)[m]>` with `p` the adjoint
    /// driven by `g`; this is the discrete Green identity behind the gradient.
    #[test]
    fn discrete_green_identity() {
        let mesh = Mesh::new(6, 5, 7, 1.0, 0.8, 0.6).unwrap();
        let op = laplacian(&mesh).with_tolerance(1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_time(&mesh, &mut rng);
        let g = random_time(&mesh, &mut rng);
        let y = solve_forward(&op, &f, &BoundaryTimeField::zeros(&mesh), &SpaceField::zeros(&mesh)).unwrap();

        // adjoint for the functional sum_{m>=1} dt <M g[m], y[m]>
        let terminal = implicit_step(
            &op,
            &SpaceField::from_values(&mesh, g.level(mesh.nt).iter().map(|v| v * mesh.dt).collect()).unwrap(),
        )
        .unwrap();
        let p = solve_adjoint(&op, &g, &terminal).unwrap();

        let lhs: f64 = (1..mesh.levels()).map(|m| mesh.dt * y.slice(m).inner(&g.slice(m)).unwrap()).sum();
        let rhs: f64 = (1..mesh.levels()).map(|m| mesh.dt * f.slice(m).inner(&p.slice(m)).unwrap()).sum();
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1e-3), "{lhs} vs {rhs}");
    }
}
