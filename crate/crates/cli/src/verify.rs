//! Invariant suites run by `verify` against the configured setup.

use std::fmt::Write as _;

use modalray_core::dynamics::ShellMode;
use modalray_core::fan::Execution;
use modalray_core::fronts::{
    observable_gradient, pseudo_inverse, ray_gradient, ray_jacobian, sample_fields, Frame, RayQuantity, Validity,
};
use modalray_core::linalg::symplectic_j;
use modalray_core::modes::{
    biorth_gradient_ratio, biorth_inner, cutoff_wavenumber, duct_strength, grad_k_norm, mode_count, VerticalMode,
};
use modalray_core::ErrorClass;

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::format::Num;
use crate::run::{trace_all, AlphaFan};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    /// Worst observed deviation.
    pub value: f64,
    pub tolerance: f64,
    pub class: ErrorClass,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// Running maximum that treats NaN as a failure.
#[derive(Debug, Clone, Copy, Default)]
struct Worst(f64);

impl Worst {
    fn see(&mut self, v: f64) {
        self.0 = if v.is_nan() { f64::INFINITY } else { self.0.max(v) };
    }
}

fn check(suite: &'static str, name: &'static str, worst: Worst, tolerance: f64, class: ErrorClass) -> Check {
    Check { suite, name, value: worst.0, tolerance, class }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn environment_suite(config: &RunConfig, out: &mut Vec<Check>) -> CliResult<()> {
    let medium = config.medium(config.medium.alpha[0])?;
    let (c, cb) = (medium.c_water, medium.c_bot);
    let mut nu = Worst::default();
    nu.see(rel(medium.nu_sq_bar, (cb * cb - c * c) / (c * c)));
    out.push(check("environment", "nu_sq_bar_definition", nu, 1e-12, ErrorClass::Config));

    let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.7, -0.3], [-1.0, 0.5]];
    let h0 = medium.depth([0.0, 0.0])?;
    let mut affine = Worst::default();
    for a in pts {
        for b in pts {
            let lhs = medium.depth([a[0] + b[0], a[1] + b[1]])? - h0;
            let rhs = (medium.depth(a)? - h0) + (medium.depth(b)? - h0);
            affine.see((lhs - rhs).abs() / h0);
        }
    }
    out.push(check("environment", "depth_affine", affine, 1e-12, ErrorClass::Config));
    Ok(())
}

fn modes_suite(config: &RunConfig, out: &mut Vec<Check>) -> CliResult<()> {
    let tol = &config.run.tolerances;
    let radius = config.source.radius;
    let mut residual = Worst::default();
    let mut pythagoras = Worst::default();
    let mut lambda = Worst::default();
    let mut closed_form = Worst::default();
    let mut monotone = Worst::default();
    let mut self_adjoint = Worst::default();
    let mut points = vec![[0.0, 0.0]];
    points.extend(config.mu2_values().iter().map(|m| [radius * m.cos(), radius * m.sin()]));
    for &alpha in &config.medium.alpha {
        let medium = config.medium(alpha)?;
        for &mu1 in &config.source.mu1 {
            let p_tau = -2.0 * std::f64::consts::PI / medium.c_bot * (config.source.freq0 + config.source.dfreq * mu1);
            for &r in &points {
                let h = medium.depth(r)?;
                let w_sq = duct_strength(&medium, p_tau, r)?;
                for l in 0..mode_count(w_sq.sqrt()) {
                    let m = VerticalMode::from_duct(l, alpha, w_sq, h)?;
                    residual.see(m.residual);
                    pythagoras.see(rel(m.k * m.k + m.gamma * m.gamma, w_sq));
                    lambda.see(rel(m.lambda * h * h, m.k * m.k));
                    if alpha == 0.0 {
                        closed_form.see(rel(m.gamma, cutoff_wavenumber(l)));
                    }
                    let mut prev: Option<VerticalMode> = None;
                    for i in 0..=20 {
                        let a = i as f64 / 20.0;
                        let next = VerticalMode::from_duct(l, a, w_sq, h)?;
                        if let Some(p) = prev {
                            monotone.see((p.gamma - next.gamma).max(0.0));
                            monotone.see((next.k - p.k).max(0.0));
                        }
                        prev = Some(next);
                    }
                    let one = VerticalMode::from_duct(l, 1.0, w_sq, h)?;
                    let gk = grad_k_norm(&medium.with_alpha(1.0)?, l, 1.0, p_tau, r)?;
                    let ratio = biorth_gradient_ratio(&one, 1.0, [medium.grad_h[0] / h, medium.grad_h[1] / h], gk);
                    self_adjoint.see((biorth_inner(&one, 1.0) - 1.0).abs());
                    self_adjoint.see(ratio[0].abs().max(ratio[1].abs()));
                }
            }
        }
    }
    let s = ErrorClass::Spectral;
    out.push(check("modes", "dispersion_residual", residual, tol.residual, s));
    out.push(check("modes", "k_sq_plus_gamma_sq", pythagoras, 1e-12, s));
    out.push(check("modes", "lambda_h_sq", lambda, 1e-12, s));
    out.push(check("modes", "neumann_closed_form", closed_form, 1e-12, s));
    out.push(check("modes", "monotone_in_alpha", monotone, 1e-12, s));
    out.push(check("modes", "self_adjoint_reduction", self_adjoint, 1e-14, s));
    Ok(())
}

fn dynamics_suite(config: &RunConfig, fans: &[AlphaFan], out: &mut Vec<Check>) {
    let tol = &config.run.tolerances;
    let j = symplectic_j();
    let mut energy = Worst::default();
    let mut clock = Worst::default();
    let mut p_tau = Worst::default();
    let mut symplectic = Worst::default();
    let mut det = Worst::default();
    for af in fans {
        for ray in &af.fan.rays {
            let f0 = &ray.node.f0;
            for s in &ray.samples {
                energy.see((s.hamiltonian - ray.node.energy).abs());
                clock.see((s.f.tau - (f0.tau + s.tau_nat)).abs() / f0.tau.abs().max(1.0));
                p_tau.see((s.f.p_tau - f0.p_tau).abs());
                symplectic.see((s.p_sigma.transpose() * j * s.p_sigma - j).amax());
                det.see((s.p_sigma.determinant() - 1.0).abs());
            }
        }
    }
    let c = ErrorClass::Integration;
    out.push(check("dynamics", "energy_conservation", energy, tol.energy, c));
    out.push(check("dynamics", "tau_advances_with_clock", clock, 1e-12, c));
    out.push(check("dynamics", "p_tau_constant", p_tau, 0.0, c));
    out.push(check("dynamics", "symplectic_propagator", symplectic, tol.symplectic, c));
    out.push(check("dynamics", "unit_determinant", det, tol.symplectic, c));
}

fn fronts_suite(config: &RunConfig, fans: &[AlphaFan], out: &mut Vec<Check>) -> CliResult<()> {
    let tol = &config.run.tolerances;
    let strict = ShellMode::from(config.source.shell_mode) == ShellMode::Strict;
    let mut left_inverse = Worst::default();
    let mut duality = Worst::default();
    let mut no_loss = Worst::default();
    let mut positive = Worst::default();
    for af in fans {
        for ray in &af.fan.rays {
            for (i, s) in ray.samples.iter().enumerate().skip(1) {
                let fields = sample_fields(&af.model, ray, i, config.run.caustic_threshold)?;
                if fields.validity != Validity::Ok {
                    continue;
                }
                positive.see(if fields.amplitude > 0.0 { 0.0 } else { 1.0 });
                let fr = ray_jacobian(&af.model, ray, s.tau_nat, Frame::Natural)?;
                let pinv = pseudo_inverse(&fr)?;
                left_inverse.see((pinv * fr - nalgebra::Matrix3::identity()).amax());
                if strict {
                    let g = ray_gradient(&af.model, ray, s.tau_nat, RayQuantity::Phase)?;
                    let obs = observable_gradient(g, &fr)?;
                    let want = [s.f.p_tau, s.f.p[0], s.f.p[1]];
                    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                    let diff = obs.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    duality.see(diff / scale);
                }
                if af.alpha == 1.0 && config.mode.lambda_tilde == 0.0 {
                    no_loss.see((s.t_diss.exp() - 1.0).abs());
                }
            }
        }
    }
    let c = ErrorClass::PostProcessing;
    out.push(check("fronts", "left_inverse", left_inverse, 1e-10, c));
    // Off the zero shell the initial manifold is not Lagrangian and ∇φ = p is not expected.
    if strict {
        out.push(check("fronts", "phase_momentum_duality", duality, tol.duality, c));
    }
    out.push(check("fronts", "self_adjoint_no_loss", no_loss, 0.0, c));
    out.push(check("fronts", "amplitude_positive", positive, 0.0, c));
    Ok(())
}

pub fn run_suites(config: &RunConfig, execution: Execution) -> CliResult<Vec<Check>> {
    let mut out = Vec::new();
    environment_suite(config, &mut out)?;
    modes_suite(config, &mut out)?;
    let fans = trace_all(config, execution)?;
    dynamics_suite(config, &fans, &mut out);
    fronts_suite(config, &fans, &mut out)?;
    Ok(out)
}

pub fn table(checks: &[Check]) -> String {
    let mut out = String::from("suite,check,value,tolerance,status\n");
    for c in checks {
        let status = if c.passed() { "pass" } else { "fail" };
        let _ = writeln!(out, "{},{},{},{},{status}", c.suite, c.name, Num(c.value), Num(c.tolerance));
    }
    out
}
