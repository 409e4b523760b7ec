//! Effective single-mode Hamiltonian H = ½(p_τ² + λ − |p⃗|²) and its
//! derivatives up to third order.
//!
//! λ = k²/h² depends on (p_τ, x, y) only through p_τ and the depth h, and
//! the depth is affine, so every derivative over (p_τ, x, y) is a derivative
//! over (p_τ, h) times powers of ∇h. Those come from one hyper-hyper-dual
//! sweep through the implicit γ(w²) jet.

use std::fmt;
use std::sync::Arc;

use num_dual::{HyperDual64, HyperHyperDual64};

use crate::environment::MediumModel;
use crate::error::{Error, Result};
use crate::linalg::{Matrix6, Tensor3, Vector6};
use crate::modes::{ratio_coefficient, GammaJet};

/// Below this |∂H/∂p_τ| the 𝛕 clock is considered stalled.
pub const CLOCK_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub tau: f64,
    pub r: [f64; 2],
    pub p_tau: f64,
    pub p: [f64; 2],
}

impl PhasePoint {
    pub fn new(tau: f64, r: [f64; 2], p_tau: f64, p: [f64; 2]) -> Self {
        Self { tau, r, p_tau, p }
    }

    pub fn to_vector(&self) -> Vector6 {
        Vector6::new(self.tau, self.r[0], self.r[1], self.p_tau, self.p[0], self.p[1])
    }

    pub fn from_vector(v: &Vector6) -> Self {
        Self { tau: v[0], r: [v[1], v[2]], p_tau: v[3], p: [v[4], v[5]] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

/// Imaginary eigenvalue perturbation λ̃(p_τ, r⃗).
pub trait EigenDamping: Send + Sync + fmt::Debug {
    fn value(&self, p_tau: f64, r: [f64; 2]) -> f64;

    /// Gradient over (p_τ, x, y). Central differences unless overridden.
    fn gradient(&self, p_tau: f64, r: [f64; 2]) -> [f64; 3] {
        let mut out = [0.0; 3];
        let base = [p_tau, r[0], r[1]];
        for (i, o) in out.iter_mut().enumerate() {
            let e = 1e-6 * base[i].abs().max(1.0);
            let mut a = base;
            let mut b = base;
            a[i] += e;
            b[i] -= e;
            *o = (self.value(a[0], [a[1], a[2]]) - self.value(b[0], [b[1], b[2]])) / (2.0 * e);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDamping(pub f64);

impl EigenDamping for ConstantDamping {
    fn value(&self, _: f64, _: [f64; 2]) -> f64 {
        self.0
    }

    fn gradient(&self, _: f64, _: [f64; 2]) -> [f64; 3] {
        [0.0; 3]
    }
}

/// Highest derivative order an expansion carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    First = 1,
    Second = 2,
    Third = 3,
}

#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    pub medium: MediumModel,
    pub l: usize,
    damping: Option<Arc<dyn EigenDamping>>,
}

/// Phase-space slot of each reduced variable (p_τ, x, y).
const SLOT: [usize; 3] = [3, 1, 2];

impl HamiltonianModel {
    pub fn new(medium: MediumModel, l: usize) -> Self {
        Self { medium, l, damping: None }
    }

    pub fn with_damping(mut self, damping: Arc<dyn EigenDamping>) -> Self {
        self.damping = Some(damping);
        self
    }

    pub fn alpha(&self) -> f64 {
        self.medium.alpha
    }

    pub fn damping(&self) -> Option<&Arc<dyn EigenDamping>> {
        self.damping.as_ref()
    }

    /// λ = k²/h² at (p_τ, r⃗).
    pub fn lambda(&self, p_tau: f64, r: [f64; 2]) -> Result<f64> {
        let h = self.medium.depth(r)?;
        let jet = GammaJet::with_order(self.l, self.alpha(), self.medium.nu_sq_bar * p_tau * p_tau * h * h, 0)?;
        Ok(jet.k_sq() / (h * h))
    }

    pub fn expand(&self, f: &PhasePoint, order: Order) -> Result<LocalExpansion> {
        let h = self.medium.depth(f.r)?;
        let nu = self.medium.nu_sq_bar;
        let w_sq = nu * f.p_tau * f.p_tau * h * h;
        // The dissipation sweep needs γ'' even at first order.
        let jet = GammaJet::with_order(self.l, self.alpha(), w_sq, (order as usize).max(2))?;
        let k_sq = jet.k_sq();

        // t[i][j][k]: derivatives of λ over (p_τ, h), index 0 = p_τ, 1 = h.
        let mut t = [[[0.0; 2]; 2]; 2];
        let mut t1 = [0.0; 2];
        let mut t2 = [[0.0; 2]; 2];
        let seed = |dirs: [usize; 3]| {
            let var = |which: usize, re: f64| {
                let e = |d: usize| if d == which { 1.0 } else { 0.0 };
                HyperHyperDual64::new(re, e(dirs[0]), e(dirs[1]), e(dirs[2]), 0.0, 0.0, 0.0, 0.0)
            };
            let p = var(0, f.p_tau);
            let hh = var(1, h);
            let w = p.clone() * p * hh.clone() * hh.clone() * nu;
            jet.k_sq_at(w) / (hh.clone() * hh)
        };
        let a = seed([0, 0, 1]);
        let lambda = a.re;
        t1[0] = a.eps1;
        t1[1] = a.eps3;
        t2[0][0] = a.eps1eps2;
        t2[0][1] = a.eps1eps3;
        t2[1][0] = a.eps1eps3;
        if order >= Order::Second {
            let b = seed([0, 1, 1]);
            t2[1][1] = b.eps2eps3;
            if order >= Order::Third {
                let c = seed([0, 0, 0]);
                let d = seed([1, 1, 1]);
                let (ppp, pph, phh, hhh) = (c.eps1eps2eps3, a.eps1eps2eps3, b.eps1eps2eps3, d.eps1eps2eps3);
                for (i, ti) in t.iter_mut().enumerate() {
                    for (j, tij) in ti.iter_mut().enumerate() {
                        for (k, v) in tij.iter_mut().enumerate() {
                            *v = match i + j + k {
                                0 => ppp,
                                1 => pph,
                                2 => phh,
                                _ => hhh,
                            };
                        }
                    }
                }
            }
        }

        let g = self.medium.grad_h;
        let kind = [0usize, 1, 1];
        let scale = [1.0, g[0], g[1]];
        let mut d1 = [0.0; 3];
        let mut d2 = [[0.0; 3]; 3];
        let mut d3 = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            d1[a] = t1[kind[a]] * scale[a];
            for b in 0..3 {
                d2[a][b] = t2[kind[a]][kind[b]] * scale[a] * scale[b];
                for c in 0..3 {
                    d3[a][b][c] = t[kind[a]][kind[b]][kind[c]] * scale[a] * scale[b] * scale[c];
                }
            }
        }

        Ok(LocalExpansion {
            point: *f,
            order,
            h,
            w_sq,
            k_sq,
            lambda,
            jet,
            nu_sq_bar: nu,
            grad_h: g,
            d_lambda: d1,
            dd_lambda: d2,
            ddd_lambda: d3,
            damping: self.damping.clone(),
        })
    }

    pub fn hamiltonian(&self, f: &PhasePoint) -> Result<f64> {
        Ok(self.expand(f, Order::First)?.value())
    }

    pub fn grad(&self, f: &PhasePoint) -> Result<Vector6> {
        Ok(self.expand(f, Order::First)?.grad())
    }

    pub fn hessian(&self, f: &PhasePoint) -> Result<Matrix6> {
        Ok(self.expand(f, Order::Second)?.hessian())
    }

    pub fn third_derivative(&self, f: &PhasePoint) -> Result<Tensor3> {
        Ok(self.expand(f, Order::Third)?.third())
    }

    /// dr⃗/d𝛕 along the Hamiltonian flow.
    pub fn group_velocity(&self, f: &PhasePoint) -> Result<[f64; 2]> {
        self.expand(f, Order::First)?.velocity()
    }
}

/// Everything the ray integrator needs at one phase point.
#[derive(Debug, Clone)]
pub struct LocalExpansion {
    pub point: PhasePoint,
    pub order: Order,
    pub h: f64,
    pub w_sq: f64,
    pub k_sq: f64,
    pub lambda: f64,
    pub jet: GammaJet,
    nu_sq_bar: f64,
    grad_h: [f64; 2],
    /// λ derivatives over (p_τ, x, y).
    pub d_lambda: [f64; 3],
    pub dd_lambda: [[f64; 3]; 3],
    pub ddd_lambda: [[[f64; 3]; 3]; 3],
    damping: Option<Arc<dyn EigenDamping>>,
}

impl LocalExpansion {
    pub fn value(&self) -> f64 {
        let f = &self.point;
        0.5 * (f.p_tau * f.p_tau + self.lambda - f.p[0] * f.p[0] - f.p[1] * f.p[1])
    }

    pub fn grad(&self) -> Vector6 {
        let f = &self.point;
        Vector6::new(
            0.0,
            0.5 * self.d_lambda[1],
            0.5 * self.d_lambda[2],
            f.p_tau + 0.5 * self.d_lambda[0],
            -f.p[0],
            -f.p[1],
        )
    }

    pub fn hessian(&self) -> Matrix6 {
        debug_assert!(self.order >= Order::Second);
        let mut m = Matrix6::zeros();
        for a in 0..3 {
            for b in 0..3 {
                m[(SLOT[a], SLOT[b])] = 0.5 * self.dd_lambda[a][b];
            }
        }
        m[(3, 3)] += 1.0;
        m[(4, 4)] = -1.0;
        m[(5, 5)] = -1.0;
        m
    }

    pub fn third(&self) -> Tensor3 {
        debug_assert!(self.order >= Order::Third);
        let mut t = Tensor3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    t.set(SLOT[a], SLOT[b], SLOT[c], 0.5 * self.ddd_lambda[a][b][c]);
                }
            }
        }
        t
    }

    /// ∂H/∂p_τ, the rate d𝛕/dσ.
    pub fn clock_rate(&self) -> f64 {
        self.point.p_tau + 0.5 * self.d_lambda[0]
    }

    /// dσ/d𝛕 = 1/(∂H/∂p_τ).
    pub fn clock_factor(&self) -> Result<f64> {
        let d = self.clock_rate();
        if d.abs() < CLOCK_FLOOR || !d.is_finite() {
            return Err(Error::DegenerateClock(d));
        }
        Ok(1.0 / d)
    }

    /// ∇_f of dσ/d𝛕.
    pub fn clock_factor_grad(&self) -> Result<Vector6> {
        let s = self.clock_factor()?;
        let mut g = Vector6::zeros();
        for a in 0..3 {
            let dd = 0.5 * self.dd_lambda[0][a] + if a == 0 { 1.0 } else { 0.0 };
            g[SLOT[a]] = -s * s * dd;
        }
        Ok(g)
    }

    pub fn velocity(&self) -> Result<[f64; 2]> {
        let s = self.clock_factor()?;
        Ok([-self.point.p[0] * s, -self.point.p[1] * s])
    }

    /// The bottom-interaction ratio ⟨∇Ψ(1),Ψ(α)⟩/⟨Ψ(1),Ψ(α)⟩ at this point.
    pub fn interaction_ratio(&self) -> [f64; 2] {
        let c = ratio_coefficient(&self.jet, self.nu_sq_bar, self.point.p_tau, self.h);
        [c * self.grad_h[0], c * self.grad_h[1]]
    }

    /// d𝔗/d𝛕 = [(p⃗, ratio) + λ̃]·dσ/d𝛕 and its phase-space gradient.
    pub fn dissipation_rate(&self) -> Result<(f64, Vector6)> {
        let f = &self.point;
        let g = self.grad_h;
        let pg = f.p[0] * g[0] + f.p[1] * g[1];
        let s = self.clock_factor()?;
        let ds = self.clock_factor_grad()?;

        let c = ratio_coefficient(
            &self.jet,
            self.nu_sq_bar,
            HyperDual64::from_re(f.p_tau).derivative1(),
            HyperDual64::from_re(self.h).derivative2(),
        );
        let (lt, dlt) = match &self.damping {
            Some(d) => (d.value(f.p_tau, f.r), d.gradient(f.p_tau, f.r)),
            None => (0.0, [0.0; 3]),
        };
        let base = pg * c.re + lt;
        let rate = base * s;

        let mut grad = ds * base;
        let dbase = [pg * c.eps1 + dlt[0], pg * c.eps2 * g[0] + dlt[1], pg * c.eps2 * g[1] + dlt[2]];
        for a in 0..3 {
            grad[SLOT[a]] += dbase[a] * s;
        }
        grad[4] += c.re * g[0] * s;
        grad[5] += c.re * g[1] * s;
        Ok((rate, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::cutoff_wavenumber;
    use std::f64::consts::PI;

    fn source_p_tau(mu1: f64) -> f64 {
        -2.0 * PI / 1700.0 * (300.0 + 50.0 * mu1)
    }

    fn model(alpha: f64, l: usize) -> HamiltonianModel {
        HamiltonianModel::new(MediumModel::shallow_slope(alpha).unwrap(), l)
    }

    fn steep(alpha: f64, l: usize) -> HamiltonianModel {
        let m = MediumModel::shallow_slope(alpha).unwrap().with_grad_h([0.03, -0.02]).unwrap();
        HamiltonianModel::new(m, l)
    }

    fn point(m: &HamiltonianModel, mu2: f64, radius: f64) -> PhasePoint {
        let p_tau = source_p_tau(0.0);
        let r = [radius * mu2.cos(), radius * mu2.sin()];
        let lambda = m.lambda(p_tau, r).unwrap();
        let n = (p_tau * p_tau + lambda).sqrt();
        PhasePoint::new(3.0, r, p_tau, [n * mu2.cos(), n * mu2.sin()])
    }

    fn perturb(f: &PhasePoint, i: usize, e: f64) -> PhasePoint {
        let mut v = f.to_vector();
        v[i] += e;
        PhasePoint::from_vector(&v)
    }

    fn rel(a: f64, b: f64, scale: f64) -> f64 {
        (a - b).abs() / scale.max(1e-300)
    }

    #[test]
    fn shell_and_time_invariance() {
        let m = model(0.5, 1);
        let f = point(&m, 0.7, 1.0);
        assert!(m.hamiltonian(&f).unwrap().abs() < 1e-14);
        let shifted = perturb(&f, 0, 123.0);
        assert_eq!(m.hamiltonian(&shifted).unwrap(), m.hamiltonian(&f).unwrap());
    }

    #[test]
    fn literal_source_sits_off_shell() {
        let m = model(0.5, 1);
        let p_tau = source_p_tau(0.0);
        let r = [1.0, 0.0];
        let h = m.medium.depth(r).unwrap();
        let k = (m.lambda(p_tau, r).unwrap() * h * h).sqrt();
        let f = PhasePoint::new(0.0, r, p_tau, [k / h, 0.0]);
        let hv = m.hamiltonian(&f).unwrap();
        assert!((hv - 0.5 * p_tau * p_tau).abs() < 1e-14);
    }

    #[test]
    fn gradient_structure() {
        let m = model(0.5, 0);
        let f = point(&m, 2.0, 1.0);
        let g = m.grad(&f).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[4], -f.p[0]);
        assert_eq!(g[5], -f.p[1]);
        let flat = HamiltonianModel::new(m.medium.with_grad_h([0.0, 0.0]).unwrap(), 0);
        let g = flat.grad(&f).unwrap();
        assert_eq!([g[0], g[1], g[2]], [0.0; 3]);
    }

    /// Central difference with Richardson extrapolation from steps e and e/2.
    fn richardson(fun: impl Fn(f64) -> f64, e: f64) -> (f64, f64) {
        let d1 = (fun(e) - fun(-e)) / (2.0 * e);
        let d2 = (fun(e / 2.0) - fun(-e / 2.0)) / e;
        ((4.0 * d2 - d1) / 3.0, (d2 - d1).abs())
    }

    fn steps() -> [f64; 6] {
        [1e-2, 1e-1, 1e-1, 1e-5, 1e-2, 1e-2]
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (m, mu2) in [(model(0.5, 1), 0.3), (steep(0.2, 0), 2.5), (steep(1.0, 1), -1.0)] {
            let f = point(&m, mu2, 2.0);
            let g = m.grad(&f).unwrap();
            let scale = g.amax();
            for i in 0..6 {
                let (fd, spread) = richardson(|e| m.hamiltonian(&perturb(&f, i, e)).unwrap(), steps()[i]);
                assert!(spread < 1e-3 * scale, "Richardson spread too large on slot {i}");
                assert!(rel(g[i], fd, scale) < 1e-6, "slot {i}: {} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn hessian_matches_finite_differences() {
        for (m, mu2) in [(model(0.5, 1), 0.3), (steep(0.2, 0), 2.5), (steep(0.7, 1), -1.0)] {
            let f = point(&m, mu2, 2.0);
            let hm = m.hessian(&f).unwrap();
            assert!((hm - hm.transpose()).amax() <= 1e-10);
            assert_eq!(hm[(4, 4)], -1.0);
            assert_eq!(hm[(5, 5)], -1.0);
            assert_eq!(hm[(4, 5)], 0.0);
            for i in 0..6 {
                assert_eq!(hm[(0, i)], 0.0);
                assert_eq!(hm[(i, 0)], 0.0);
            }
            let scale = hm.amax();
            for j in 0..6 {
                for i in 0..6 {
                    let (fd, _) = richardson(|e| m.grad(&perturb(&f, j, e)).unwrap()[i], steps()[j]);
                    assert!(rel(hm[(i, j)], fd, scale) < 1e-5, "({i},{j}): {} vs {fd}", hm[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn third_derivative_matches_finite_differences() {
        for (m, mu2) in [(model(0.5, 1), 0.3), (steep(0.2, 0), 2.5), (steep(0.7, 1), -1.0)] {
            let f = point(&m, mu2, 2.0);
            let t = m.third_derivative(&f).unwrap();
            let scale = t.max_abs();
            assert!(scale > 0.0);
            for i in 0..6 {
                for j in 0..6 {
                    for k in 0..6 {
                        let v = t.get(i, j, k);
                        for (a, b, c) in [(j, i, k), (k, j, i), (i, k, j), (j, k, i), (k, i, j)] {
                            assert!((v - t.get(a, b, c)).abs() <= 1e-8 * scale);
                        }
                        if i >= 4 || j >= 4 || k >= 4 || i == 0 || j == 0 || k == 0 {
                            assert_eq!(v, 0.0);
                        }
                    }
                }
            }
            for k in 0..6 {
                let (plus, minus) = (m.hessian(&perturb(&f, k, steps()[k])).unwrap(), m.hessian(&perturb(&f, k, -steps()[k])).unwrap());
                let fd = (plus - minus) / (2.0 * steps()[k]);
                for i in 0..6 {
                    for j in 0..6 {
                        assert!(rel(t.get(i, j, k), fd[(i, j)], scale) < 1e-3, "({i},{j},{k})");
                    }
                }
            }
        }
    }

    #[test]
    fn neumann_limit_closed_form() {
        for l in 0..2 {
            let m = steep(0.0, l);
            let f = point(&m, 1.1, 3.0);
            let e = m.expand(&f, Order::Third).unwrap();
            let nu = m.medium.nu_sq_bar;
            let q2 = cutoff_wavenumber(l).powi(2);
            let (p, h, g) = (f.p_tau, e.h, m.medium.grad_h);
            let lam = nu * p * p - q2 / (h * h);
            assert!((e.lambda - lam).abs() <= 1e-13 * lam.abs().max(1.0));
            let lh = 2.0 * q2 / h.powi(3);
            let lhh = -6.0 * q2 / h.powi(4);
            let lhhh = 24.0 * q2 / h.powi(5);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-8);
            assert!(close(e.d_lambda[0], 2.0 * nu * p));
            assert!(close(e.d_lambda[1], lh * g[0]) && close(e.d_lambda[2], lh * g[1]));
            assert!(close(e.dd_lambda[0][0], 2.0 * nu));
            assert!(e.dd_lambda[0][1].abs() < 1e-15 && e.dd_lambda[0][2].abs() < 1e-15);
            assert!(close(e.dd_lambda[1][2], lhh * g[0] * g[1]));
            assert!(close(e.ddd_lambda[1][1][2], lhhh * g[0] * g[0] * g[1]));
            assert!(e.ddd_lambda[0][0][0].abs() < 1e-15 && e.ddd_lambda[0][1][1].abs() < 1e-15);
        }
    }

    #[test]
    fn flat_neumann_tensor_vanishes() {
        let m = HamiltonianModel::new(MediumModel::shallow_slope(0.0).unwrap().with_grad_h([0.0, 0.0]).unwrap(), 1);
        let f = point(&m, 0.4, 1.0);
        assert!(m.third_derivative(&f).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn group_velocity_neumann_formula() {
        let m = HamiltonianModel::new(MediumModel::shallow_slope(0.0).unwrap(), 1);
        let f = point(&m, 0.9, 1.0);
        let v = m.group_velocity(&f).unwrap();
        assert!((v[0] * f.p[1] - v[1] * f.p[0]).abs() < 1e-15);
        let nu = m.medium.nu_sq_bar;
        let h = m.medium.depth(f.r).unwrap();
        let q2 = cutoff_wavenumber(1).powi(2);
        let expect = ((1.0 + nu) * f.p_tau.powi(2) - q2 / (h * h)).sqrt() / ((1.0 + nu) * f.p_tau.abs());
        let speed = v[0].hypot(v[1]);
        assert!((speed - expect).abs() < 1e-14);
        assert!(speed > 0.0 && speed < 1.0);
    }

    #[test]
    fn group_velocity_near_cutoff() {
        // Choose p_τ so that w sits just above the l = 1 cutoff.
        let m = HamiltonianModel::new(MediumModel::shallow_slope(0.0).unwrap(), 1);
        let r = [0.0, 0.0];
        let q = cutoff_wavenumber(1);
        let nu = m.medium.nu_sq_bar;
        let p_tau = -(q * (1.0 + 1e-10)) / (nu.sqrt() * 10.0);
        let lambda = m.lambda(p_tau, r).unwrap();
        let f = PhasePoint::new(0.0, r, p_tau, [(p_tau * p_tau + lambda).sqrt(), 0.0]);
        let v = m.group_velocity(&f).unwrap();
        assert!((v[0].abs() - 1.0 / (1.0 + nu)).abs() < 1e-8);
        let below = PhasePoint::new(0.0, r, p_tau * 0.99, f.p);
        assert!(matches!(m.group_velocity(&below), Err(Error::ModeBelowCutoff { .. })));
    }

    #[test]
    fn degenerate_clock_is_reported() {
        let m = model(0.5, 0);
        let f = point(&m, 0.0, 1.0);
        let mut e = m.expand(&f, Order::Second).unwrap();
        e.point.p_tau = -0.5 * e.d_lambda[0];
        assert!(matches!(e.velocity(), Err(Error::DegenerateClock(_))));
    }

    #[derive(Debug)]
    struct Wavy;
    impl EigenDamping for Wavy {
        fn value(&self, p_tau: f64, r: [f64; 2]) -> f64 {
            0.01 * (r[0] * 0.3).sin() * p_tau + 0.002 * r[1]
        }
    }

    #[test]
    fn dissipation_rate_gradient_matches_finite_differences() {
        for m in [steep(0.5, 0), steep(0.3, 1).with_damping(Arc::new(Wavy)), model(0.5, 1)] {
            let f = point(&m, 0.6, 2.0);
            let (rate, grad) = m.expand(&f, Order::Second).unwrap().dissipation_rate().unwrap();
            assert!(rate != 0.0);
            let eval = |g: &PhasePoint| m.expand(g, Order::Second).unwrap().dissipation_rate().unwrap().0;
            let scale = grad.amax();
            for i in 0..6 {
                let (fd, _) = richardson(|e| eval(&perturb(&f, i, e)), steps()[i]);
                assert!(rel(grad[i], fd, scale) < 1e-6, "slot {i}: {} vs {fd}", grad[i]);
            }
        }
    }

    #[test]
    fn self_adjoint_and_flat_have_no_dissipation() {
        let m = steep(1.0, 1);
        let f = point(&m, 0.6, 2.0);
        let (rate, grad) = m.expand(&f, Order::Second).unwrap().dissipation_rate().unwrap();
        assert_eq!(rate, 0.0);
        assert_eq!(grad.amax(), 0.0);
        let flat = HamiltonianModel::new(m.medium.with_alpha(0.5).unwrap().with_grad_h([0.0, 0.0]).unwrap(), 1);
        assert_eq!(flat.expand(&f, Order::Second).unwrap().dissipation_rate().unwrap().0, 0.0);
    }

    #[test]
    fn constant_damping_adds_rate() {
        let m = model(1.0, 0).with_damping(Arc::new(ConstantDamping(0.25)));
        let f = point(&m, 0.0, 1.0);
        let e = m.expand(&f, Order::Second).unwrap();
        let (rate, _) = e.dissipation_rate().unwrap();
        assert!((rate - 0.25 * e.clock_factor().unwrap()).abs() < 1e-15);
    }
}
