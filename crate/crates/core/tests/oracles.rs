use stalm_core::field::step_inner_omega;
use stalm_core::oracle::{self, DecayMode};
use stalm_core::subproblem::Subproblem;
use stalm_core::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn free_decay_spec(mesh: &Mesh) -> ProblemSpec {
    let mut spec = Preset::UnconstrainedDecay.spec(mesh).unwrap();
    let op = DiscreteOperator::assemble(mesh, &spec.coeffs).unwrap().with_tolerance(1e-14);
    let y = solve_forward(&op, &TimeField::zeros(mesh), &BoundaryTimeField::zeros(mesh), &spec.y0).unwrap();
    spec.y_d = y.slice(mesh.nt);
    spec
}

#[test]
fn cosine_modes_meet_the_five_percent_bound() {
    let mesh = Mesh::unit(33, 33, 64, 0.1).unwrap();
    for mode in [DecayMode::CosX, DecayMode::CosXCosY] {
        let report = oracle::analytic_decay_oracle(&mesh, mode).unwrap();
        assert!(report.pass, "{report}");
        assert!(report.error <= 0.05, "{report}");
    }
}

#[test]
fn decay_error_shrinks_under_refinement() {
    let coarse = Mesh::unit(17, 17, 16, 0.1).unwrap();
    let fine = Mesh::unit(33, 33, 64, 0.1).unwrap();
    let report = oracle::decay_refinement_check(&coarse, &fine, DecayMode::CosXCosY).unwrap();
    assert!(report.pass, "{report}");
}

#[test]
fn projected_gradient_finds_zero_control_for_reachable_target() {
    let mesh = Preset::default_mesh();
    let spec = free_decay_spec(&mesh);
    let mu = TimeField::zeros(&mesh);
    let (u, _, cost) = oracle::projected_gradient_oracle(&spec, 1.0, &mu, 100_000, 0.05).unwrap();
    let l2 = step_inner_omega(&u, &u).unwrap().sqrt();
    assert!(l2 <= 1e-3, "|u| = {l2}");
    assert!(cost.abs() <= 1e-10, "cost {cost}");
}

#[test]
fn adjoint_check_on_sine_obstacle_data() {
    let mesh = Preset::default_mesh();
    let spec = Preset::SineObstacle.spec(&mesh).unwrap();
    for (rho, mu) in [(1.0, 10.0), (8.0, 10.0), (2.0, 0.0)] {
        let report = oracle::adjoint_identity_check(&spec, rho, &TimeField::constant(&mesh, mu), 11).unwrap();
        assert!(report.pass, "{report}");
    }
}

#[test]
fn control_term_derivative_when_terminal_mismatch_vanishes() {
    let mesh = Mesh::new(6, 5, 5, 1.2, 1.0, 0.6).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut spec = Preset::UnconstrainedDecay.spec(&mesh).unwrap();
    spec.alpha = 0.7;
    let op = DiscreteOperator::assemble(&mesh, &spec.coeffs).unwrap().with_tolerance(1e-14);
    let u = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
    let du = TimeField::from_fn(&mesh, |_, _, _| rng.gen_range(-1.0..1.0));
    let v = BoundaryTimeField::zeros(&mesh);
    let y = solve_forward(&op, &u, &v, &spec.y0).unwrap();
    spec.y_d = y.slice(mesh.nt);
    let mu = TimeField::zeros(&mesh);
    let sub = Subproblem::new(&spec, &op, &mu, 1.0).unwrap();
    let eval = sub.evaluate(&u, &v).unwrap();
    let got = sub.directional_derivative(&eval, &u, &v, &du, &v).unwrap();
    let expect = spec.alpha * step_inner_omega(&u, &du).unwrap();
    assert!((got - expect).abs() <= 1e-10, "{got} vs {expect}");
}

#[test]
fn msa_cost_never_beaten_by_the_oracle() {
    let mesh = Preset::default_mesh();
    let spec = Preset::SineObstacle.spec(&mesh).unwrap();
    let op = DiscreteOperator::assemble(&mesh, &spec.coeffs).unwrap();
    for (rho, mu) in [(1.0, 10.0), (8.0, 10.0), (4.0, 0.0)] {
        let mu = TimeField::constant(&mesh, mu);
        let msa = msa_solve(
            &spec,
            &op,
            rho,
            &mu,
            &TimeField::zeros(&mesh),
            &BoundaryTimeField::zeros(&mesh),
            &MsaConfig::default(),
        )
        .unwrap();
        let (_, _, cost) = oracle::projected_gradient_oracle(&spec, rho, &mu, 20_000, 0.05).unwrap();
        assert!(msa.value <= cost + 1e-6, "msa {} oracle {cost}", msa.value);
    }
}

#[test]
fn bruteforce_examples() {
    for (p, alpha, expect) in [(2.0, 1.0, -1.0), (0.0, 1.0, 0.0), (1.0, 10.0, -0.1)] {
        assert!((msa::argmin_hamiltonian_at(p, alpha, -1.0, 1.0) - expect).abs() < 1e-15);
    }
    for seed in 0..3 {
        let report = oracle::argmin_bruteforce_check(seed);
        assert!(report.pass, "{report}");
    }
}
