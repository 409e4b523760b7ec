mod common;

use std::f64::consts::PI;

use common::*;
use modalray_core::dynamics::{RaySettings, RaySolution, ShellMode};
use modalray_core::fan::{trace_fan, Execution, MuGrid};
use modalray_core::fronts::*;
use modalray_core::hamiltonian::Order;
use modalray_core::modes::cutoff_wavenumber;

fn dense(end: f64, step: f64) -> Vec<f64> {
    let n = (end / step).round() as usize;
    (1..=n).map(|i| i as f64 * step).collect()
}

#[test]
fn phase_and_length_gradients_match_differences() {
    let src = ring_with(0.5, 1, [0.02, 0.01], ShellMode::Strict);
    let (t, dt) = (4.0, 1e-2);
    let settings = RaySettings::default().with_checkpoints(vec![t - dt, t, t + dt]);
    let mu = [0.4, 1.2];
    let ray = trace(&src, mu, &settings);
    let pick = |r: &RaySolution, tt: f64, q: RayQuantity| {
        let s = r.at(tt).unwrap();
        match q {
            RayQuantity::Phase => s.phase,
            RayQuantity::Arclen => s.arclen,
            RayQuantity::Tau => s.f.tau,
            RayQuantity::TauNat => s.tau_nat,
        }
    };
    let rays: Vec<[RaySolution; 2]> =
        (0..2).map(|j| [trace(&src, shifted(mu, j, 1e-4), &settings), trace(&src, shifted(mu, j, -1e-4), &settings)]).collect();
    for q in [RayQuantity::Phase, RayQuantity::Arclen, RayQuantity::Tau, RayQuantity::TauNat] {
        let g = ray_gradient(&src.model, &ray, t, q).unwrap();
        let mut fd = [(pick(&ray, t + dt, q) - pick(&ray, t - dt, q)) / (2.0 * dt), 0.0, 0.0];
        for j in 0..2 {
            fd[j + 1] = (pick(&rays[j][0], t, q) - pick(&rays[j][1], t, q)) / 2e-4;
        }
        assert!(rel_err(&g, &fd) <= 1e-4, "{q:?}: {g:?} vs {fd:?}");
    }
    assert_eq!(ray_gradient(&src.model, &ray, t, RayQuantity::TauNat).unwrap(), [1.0, 0.0, 0.0]);
}

#[test]
fn generic_interior_gradient_matches_differences() {
    let src = ring(0.5, 0);
    let settings = RaySettings::default().with_checkpoints(dense(2.0, 0.01));
    let mu = [0.2, 0.6];
    let field = |f: &nalgebra::SVector<f64, 6>| -> modalray_core::Result<f64> { Ok(f[1] * f[1] + f[4] * f[2] + 0.1 * f[0]) };
    let integral = |r: &RaySolution| {
        let mut total = 0.0;
        for w in r.samples.windows(2) {
            total += 0.5 * (w[1].tau_nat - w[0].tau_nat) * (field(&w[0].f.to_vector()).unwrap() + field(&w[1].f.to_vector()).unwrap());
        }
        total
    };
    let ray = trace(&src, mu, &settings);
    let g = interior_gradient(&ray, 2.0, &field).unwrap();
    let fd: Vec<f64> = (0..2)
        .map(|j| (integral(&trace(&src, shifted(mu, j, 1e-4), &settings)) - integral(&trace(&src, shifted(mu, j, -1e-4), &settings))) / 2e-4)
        .collect();
    assert!(rel_err(&g, &fd) <= 1e-3, "{g:?} vs {fd:?}");
    assert_eq!(interior_gradient(&ray, 0.0, &|_| Ok(1.0)).unwrap(), [0.0, 0.0]);
    assert_eq!(interior_gradient(&ray, 2.0, &|_| Ok(3.0)).unwrap(), [0.0, 0.0]);

    // The built-in |v⃗| accumulator agrees with the generic quadrature.
    let model = src.model.clone();
    let speed = move |f: &nalgebra::SVector<f64, 6>| -> modalray_core::Result<f64> {
        let v = model.group_velocity(&modalray_core::hamiltonian::PhasePoint::from_vector(f))?;
        Ok(v[0].hypot(v[1]))
    };
    let generic = interior_gradient(&ray, 2.0, &speed).unwrap();
    let built_in = ray_gradient(&src.model, &ray, 2.0, RayQuantity::Arclen).unwrap();
    assert!(rel_err(&generic, &built_in[1..]) <= 1e-4, "{generic:?} vs {built_in:?}");
}

#[test]
fn amplitude_gradient_matches_differences() {
    let (t, dt) = (5.0, 1e-2);
    let settings = RaySettings::default().with_checkpoints(vec![t - dt, t, t + dt]).with_tensor(true);
    for (alpha, slope) in [(0.5, [1e-3, 0.0]), (0.0, [0.02, 0.01]), (1.0, [0.0, 0.0])] {
        let src = ring_with(alpha, 1, slope, ShellMode::Strict);
        for mu in [[0.0, 0.3], [1.0, -1.0]] {
            let ray = trace(&src, mu, &settings);
            let a = |r: &RaySolution, tt: f64| amplitude(&src.model, r, tt, 0.0).unwrap().value;
            let mut fd = [(a(&ray, t + dt) - a(&ray, t - dt)) / (2.0 * dt), 0.0, 0.0];
            for j in 0..2 {
                let d = 1e-4;
                fd[j + 1] = (a(&trace(&src, shifted(mu, j, d), &settings), t) - a(&trace(&src, shifted(mu, j, -d), &settings), t)) / (2.0 * d);
            }
            let g = amplitude_gradient(&src.model, &ray, t).unwrap();
            assert!(rel_err(&g, &fd) <= 1e-2, "alpha {alpha} mu {mu:?}: {g:?} vs {fd:?}");
            if alpha == 1.0 && slope == [0.0, 0.0] {
                assert!(g[2].abs() <= 1e-10 * g[0].abs());
            }
        }
    }
}

#[test]
fn amplitude_gradient_needs_tensor() {
    let src = ring(0.5, 1);
    let ray = trace(&src, [0.0, 0.0], &RaySettings::default().with_checkpoints(vec![0.5]));
    assert!(matches!(amplitude_gradient(&src.model, &ray, 0.5), Err(modalray_core::Error::MissingTensor)));
}

#[test]
fn phase_momentum_duality() {
    let src = ring(0.5, 1);
    let settings = RaySettings::default().with_step(2e-3).with_checkpoints(vec![5.0]);
    for i in 0..12 {
        let ray = trace(&src, [0.0, -PI + i as f64 * PI / 6.0], &settings);
        let g = ray_gradient(&src.model, &ray, 5.0, RayQuantity::Phase).unwrap();
        let fr = ray_jacobian(&src.model, &ray, 5.0, Frame::Natural).unwrap();
        let f = ray.last().f;
        let want = [f.p_tau, f.p[0], f.p[1]];
        assert!(rel_err(&observable_gradient(g, &fr).unwrap(), &want) <= 1e-3);
        assert!(rel_err(&spatial_gradient(g, &fr).unwrap(), &want) <= 1e-10);
        // Round trip through the left inverse.
        let pinv = pseudo_inverse(&fr).unwrap();
        let back = fr.transpose() * pinv.transpose() * nalgebra::Vector3::from(g);
        assert!(rel_err(back.as_slice(), &g) <= 1e-8);
        assert!(((pinv * fr) - nalgebra::Matrix3::identity()).amax() <= 1e-10);
    }
}

/// Straight rays over a flat Neumann-bottom guide have closed-form Jacobians.
#[test]
fn flat_bottom_jacobian_and_spreading_closed_form() {
    let src = ring_with(0.0, 1, [0.0, 0.0], ShellMode::Strict);
    let nu = src.model.medium.nu_sq_bar;
    let q2 = cutoff_wavenumber(1).powi(2);
    let h = src.model.medium.h0;
    let c_bot = src.c_bot;
    let settings = RaySettings::default().with_checkpoints(vec![2.0, 5.0]);
    for mu in [[0.0, 0.4], [0.7, -2.0]] {
        let ray = trace(&src, mu, &settings);
        let p_tau = ray.node.f0.p_tau;
        let dp_tau = -2.0 * PI * src.dfreq / c_bot;
        let n = ((1.0 + nu) * p_tau * p_tau - q2 / (h * h)).sqrt();
        let dn = (1.0 + nu) * p_tau * dp_tau / n;
        let (c, s) = (mu[1].cos(), mu[1].sin());
        let speed = -n / ((1.0 + nu) * p_tau);
        let dspeed = -(dn * p_tau - n * dp_tau) / (p_tau * p_tau * (1.0 + nu));
        let det_at = |t: f64| {
            let m = nalgebra::Matrix3::new(
                1.0, c_bot, 0.0,
                speed * c, dspeed * c * t, -s * (1.0 + speed * t),
                speed * s, dspeed * s * t, c * (1.0 + speed * t),
            );
            m.determinant()
        };
        for &t in &[2.0, 5.0] {
            let fr = ray_jacobian(&src.model, &ray, t, Frame::Natural).unwrap();
            let expect = nalgebra::Matrix6x3::from_columns(&[
                nalgebra::Vector6::new(1.0, speed * c, speed * s, 0.0, 0.0, 0.0),
                nalgebra::Vector6::new(c_bot, dspeed * c * t, dspeed * s * t, dp_tau, dn * c, dn * s),
                nalgebra::Vector6::new(0.0, -s * (1.0 + speed * t), c * (1.0 + speed * t), 0.0, -n * s, n * c),
            ]);
            assert!((fr - expect).amax() <= 1e-10 * expect.amax(), "{fr} vs {expect}");
            let a = amplitude(&src.model, &ray, t, DEFAULT_CAUSTIC_THRESHOLD).unwrap();
            let ratio = (det_at(0.0) / det_at(t)).sqrt();
            assert!((a.value - ratio).abs() <= 1e-6 * ratio);
            assert_eq!(a.validity, Validity::Ok);
        }
        assert_eq!(amplitude(&src.model, &ray, 0.0, 1e-6).unwrap().value, 1.0);
    }
}

#[test]
fn self_adjoint_bottom_has_pure_spreading() {
    let src = ring(1.0, 1);
    let ray = trace(&src, [0.0, 0.9], &RaySettings::default().with_checkpoints(vec![5.0]));
    let a = amplitude(&src.model, &ray, 5.0, DEFAULT_CAUSTIC_THRESHOLD).unwrap();
    assert_eq!(ray.last().t_diss, 0.0);
    assert_eq!(a.value, a.geometric);
}

#[test]
fn dissipation_matches_quadrature_and_grows_up_slope() {
    let src = ring(0.5, 1);
    let settings = RaySettings::default().with_checkpoints(dense(10.0, 0.05));
    // μ₂ = π aims the ray toward shallower water.
    let ray = trace(&src, [0.0, PI], &settings);
    let rates: Vec<f64> = ray
        .samples
        .iter()
        .map(|s| src.model.expand(&s.f, Order::Second).unwrap().dissipation_rate().unwrap().0)
        .collect();
    // Composite Simpson over pairs of intervals.
    let h = 0.05;
    let mut simpson = 0.0;
    for (k, w) in rates.windows(3).enumerate().step_by(2) {
        simpson += h / 3.0 * (w[0] + 4.0 * w[1] + w[2]);
        let s = &ray.samples[k + 2];
        assert!((s.t_diss - simpson).abs() <= 1e-8 * simpson.abs().max(1e-12), "at {}: {} vs {simpson}", s.tau_nat, s.t_diss);
    }
    let mut last = 0.0;
    for s in &ray.samples[1..] {
        assert!(s.t_diss.abs() > last);
        last = s.t_diss.abs();
    }
}

#[test]
fn fronts_follow_levels() {
    let src = ring(0.5, 1);
    let grid = MuGrid::new(vec![0.0, 1e-3, 2e-3], MuGrid::linspace(8, -PI, PI, false));
    let settings = RaySettings::default().with_checkpoints(dense(6.0, 0.1));
    let fan = trace_fan(&src.model, &src, ShellMode::Strict, &grid, &settings, Execution::Sequential).unwrap();

    let front = extract_front(&src.model, &fan, FrontQuantity::TauNat, 5.0, DEFAULT_CAUSTIC_THRESHOLD).unwrap();
    for (row, samples) in front.iter().enumerate() {
        for (i2, s) in samples.iter().enumerate() {
            let p = s.point().unwrap();
            let at = fan.ray(row, i2).at(5.0).unwrap();
            assert_eq!(p.r, [at.f.tau, at.f.r[0], at.f.r[1]]);
            assert_eq!(p.validity, Validity::Ok);
        }
    }

    // τ₀ = c_bot·μ₁ shifts time fronts linearly in μ₁.
    let front = extract_front(&src.model, &fan, FrontQuantity::Tau, 5.0, DEFAULT_CAUSTIC_THRESHOLD).unwrap();
    let taus: Vec<f64> = front.iter().map(|row| row[0].point().unwrap().tau_nat).collect();
    assert!((taus[0] - 5.0).abs() < 1e-12);
    assert!(((taus[0] - taus[1]) - (taus[1] - taus[2])).abs() < 1e-9);
    assert!((taus[0] - taus[1] - 1.7).abs() < 1e-9);

    let unreachable = extract_front(&src.model, &fan, FrontQuantity::TauNat, 50.0, 1e-6).unwrap();
    assert!(matches!(unreachable[0][0], FrontSample::Gap { reason: GapReason::LevelNotReached, .. }));

    let flagged = extract_front(&src.model, &fan, FrontQuantity::TauNat, 5.0, 100.0).unwrap();
    assert_eq!(flagged[0][0].point().unwrap().validity, Validity::NearCaustic);
}

#[test]
fn fronts_are_stable_under_mu2_refinement() {
    let src = ring(0.5, 1);
    let settings = RaySettings::default().with_step(5e-3).with_checkpoints(vec![1.0, 2.0]);
    let coarse = MuGrid::new(vec![0.0], MuGrid::linspace(4, -PI, PI, false));
    let fine = MuGrid::new(vec![0.0], MuGrid::linspace(8, -PI, PI, false));
    let a = trace_fan(&src.model, &src, ShellMode::Strict, &coarse, &settings, Execution::Sequential).unwrap();
    let b = trace_fan(&src.model, &src, ShellMode::Strict, &fine, &settings, Execution::Sequential).unwrap();
    let fa = extract_front(&src.model, &a, FrontQuantity::Amplitude, 0.7, 1e-6).unwrap();
    let fb = extract_front(&src.model, &b, FrontQuantity::Amplitude, 0.7, 1e-6).unwrap();
    for (i, s) in fa[0].iter().enumerate() {
        assert_eq!(s, &fb[0][2 * i]);
    }
}
