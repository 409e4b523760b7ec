mod common;

use common::*;
use modalray_core::dynamics::{integrate_ray, RaySettings, SourceNode};
use modalray_core::hamiltonian::{Order, PhasePoint};
use modalray_core::linalg::{j_mul, symplectic_j, Matrix6};

#[test]
fn sigma_propagator_is_symplectic_at_tau_ten() {
    let src = ring(0.5, 1);
    let settings = RaySettings::default().with_checkpoints(vec![10.0]);
    let j = symplectic_j();
    for mu in [[0.0, 0.0], [0.5, 1.5], [1.0, -2.5]] {
        let p = trace(&src, mu, &settings).last().p_sigma;
        assert!((p.transpose() * j * p - j).amax() <= 1e-6);
        assert!((p.determinant() - 1.0).abs() <= 1e-6);
    }
}

#[test]
fn natural_propagator_matches_ray_variations() {
    let src = ring_with(0.5, 1, [0.02, 0.01], modalray_core::dynamics::ShellMode::Strict);
    let tau = 5.0;
    let settings = RaySettings::default().with_checkpoints(vec![tau]);
    let mu = [0.5, 0.7];
    let ray = trace(&src, mu, &settings);
    let cols = ray.last().p_nat * ray.node.jacobian;
    for (j, d) in [(0, 1e-4), (1, 1e-4)] {
        let plus = trace(&src, shifted(mu, j, d), &settings).last().f.to_vector();
        let minus = trace(&src, shifted(mu, j, -d), &settings).last().f.to_vector();
        let fd = (plus - minus) / (2.0 * d);
        let err = rel_err(cols.column(j).as_slice(), fd.as_slice());
        assert!(err <= 1e-3, "mu{} column error {err:e}", j + 1);
    }
}

#[test]
fn natural_propagator_matches_phase_space_variations() {
    // Perturb f₀ itself in all six directions, including off the shell.
    let src = ring(0.5, 0);
    let settings = RaySettings::default().with_step(2e-3).with_checkpoints(vec![4.0]);
    let base = SourceNode::new(&src.model, &src, [0.2, 2.0]).unwrap();
    let run = |v: &nalgebra::SVector<f64, 6>| {
        let mut node = base.clone();
        node.f0 = PhasePoint::from_vector(v);
        integrate_ray(&src.model, &node, &settings).unwrap().last().f.to_vector()
    };
    let p = integrate_ray(&src.model, &base, &settings).unwrap().last().p_nat;
    let f0 = base.f0.to_vector();
    let mut fd = Matrix6::zeros();
    for i in 0..6 {
        let e = 1e-5;
        let (mut a, mut b) = (f0, f0);
        a[i] += e;
        b[i] -= e;
        fd.set_column(i, &((run(&a) - run(&b)) / (2.0 * e)));
    }
    assert!(rel_err(p.as_slice(), fd.as_slice()) <= 1e-5, "{p} vs {fd}");
    assert_eq!(p.column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn propagation_tensor_matches_propagator_variations() {
    let src = ring_with(0.5, 1, [0.02, 0.01], modalray_core::dynamics::ShellMode::Strict);
    let tau = 5.0;
    let settings = RaySettings::default().with_checkpoints(vec![tau]).with_tensor(true);
    let mu = [0.5, 0.7];
    let ray = trace(&src, mu, &settings);
    let state = ray.last();
    let tensor = state.ptensor.as_deref().unwrap();
    let e = src.model.expand(&state.f, Order::Second).unwrap();
    let dp_dsigma = j_mul(&e.hessian()) * state.p_sigma;
    for j in 0..2 {
        let d = 1e-4;
        let plus = trace(&src, shifted(mu, j, d), &settings);
        let minus = trace(&src, shifted(mu, j, -d), &settings);
        // FD at fixed 𝛕 minus the shift in σ gives the variation at fixed σ.
        let d_sigma = (plus.last().sigma - minus.last().sigma) / (2.0 * d);
        let fd = (plus.last().p_sigma - minus.last().p_sigma) / (2.0 * d) - dp_dsigma * d_sigma;
        let exact = tensor.apply(&ray.node.jacobian.column(j).into_owned());
        let err = rel_err(exact.as_slice(), fd.as_slice());
        assert!(err <= 1e-2, "mu{} tensor error {err:e}", j + 1);
    }
}

#[test]
fn flat_neumann_tensor_stays_zero() {
    let src = ring_with(0.0, 1, [0.0, 0.0], modalray_core::dynamics::ShellMode::Strict);
    let settings = RaySettings::default().with_checkpoints(vec![2.0]).with_tensor(true);
    let ray = trace(&src, [0.0, 0.4], &settings);
    assert_eq!(ray.last().ptensor.as_ref().unwrap().max_abs(), 0.0);
}

#[test]
fn phase_accumulator_matches_sigma_form() {
    // On H = 0: p_τ + p⃗·v⃗ = p_τ[½∂λ/∂p_τ − λ/p_τ]·dσ/d𝛕.
    let src = ring(0.5, 1);
    let ray = trace(&src, [0.3, 0.9], &RaySettings::default().with_checkpoints(vec![1.0, 2.0]));
    for s in &ray.samples {
        let e = src.model.expand(&s.f, Order::First).unwrap();
        let v = e.velocity().unwrap();
        let tau_form = s.f.p_tau + s.f.p[0] * v[0] + s.f.p[1] * v[1];
        let sigma_form = s.f.p_tau * (0.5 * e.d_lambda[0] - e.lambda / s.f.p_tau) * e.clock_factor().unwrap();
        assert!((tau_form - sigma_form).abs() <= 1e-8 * tau_form.abs());
    }
}
