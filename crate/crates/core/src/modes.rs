//! Vertical eigenproblem of the two-layer waveguide.
//!
//! On the scaled interval s = z/h ∈ [0, 1] the mode is ψ(s) = sin(γs)/sin γ
//! with γ² + k² = w², w² = ν̄²p_τ²h², and the transmission condition at the
//! bottom turns into the dispersion relation
//!
//! ```text
//! cot γ = −α k / γ
//! ```
//!
//! Below the bottom the mode decays as exp(−k(z/h − 1)). Only trapped modes
//! with real k > 0 are handled; anything at or beyond cutoff is rejected.

use std::f64::consts::PI;

use num_dual::{implicit_derivative, Dual, Dual2_64, Dual3_64, DualNum};

use crate::environment::MediumModel;
use crate::error::{Error, Result};

/// Neumann cutoff wavenumber q_l = π(l + ½).
pub fn cutoff_wavenumber(l: usize) -> f64 {
    PI * (l as f64 + 0.5)
}

/// Duct strength w² = ν̄²·p_τ²·h²(r⃗).
pub fn duct_strength(medium: &MediumModel, p_tau: f64, r: [f64; 2]) -> Result<f64> {
    let h = medium.depth(r)?;
    Ok(medium.nu_sq_bar * p_tau * p_tau * h * h)
}

/// Number of trapped modes admitted at duct strength `w`: #{l : q_l < w}.
pub fn mode_count(w: f64) -> usize {
    if !(w > 0.0) {
        return 0;
    }
    // q_l < w  ⇔  l < w/π − ½
    let mut n = (w / PI - 0.5).ceil().max(0.0) as usize;
    while n > 0 && cutoff_wavenumber(n - 1) >= w {
        n -= 1;
    }
    while cutoff_wavenumber(n) < w {
        n += 1;
    }
    n
}

/// cot γ + αk/γ; zero on an eigenvalue.
pub fn dispersion_residual(gamma: f64, k: f64, alpha: f64) -> f64 {
    gamma.cos() / gamma.sin() + alpha * k / gamma
}

fn dispersion(gamma: f64, w_sq: f64, alpha: f64) -> f64 {
    let k = (w_sq - gamma * gamma).max(0.0).sqrt();
    dispersion_residual(gamma, k, alpha)
}

/// Internal wavenumber γ of mode `l` at duct strength `w_sq`.
///
/// Bisection on (q_l + δ, min((l+1)π, w) − δ), δ = 10⁻¹²·w, polished by
/// Newton. At α = 0 the root is q_l exactly.
pub fn solve_dispersion(l: usize, alpha: f64, w_sq: f64) -> Result<f64> {
    let w = w_sq.max(0.0).sqrt();
    let count = mode_count(w);
    if l >= count {
        return Err(Error::ModeBelowCutoff { l, w, count });
    }
    let q = cutoff_wavenumber(l);
    if alpha == 0.0 {
        return Ok(q);
    }
    let delta = 1e-12 * w;
    let lo0 = q + delta;
    let hi0 = ((l + 1) as f64 * PI).min(w) - delta;
    let g = |x: f64| dispersion(x, w_sq, alpha);
    let (g_lo, g_hi) = (g(lo0), g(hi0));
    if !(g_lo > 0.0 && g_hi < 0.0) {
        return Err(Error::RootBracketFailure { l, lo: lo0, hi: hi0 });
    }
    // Coarse bisection, then Newton kept inside the shrinking bracket.
    let (mut lo, mut hi) = (lo0, hi0);
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut gamma = 0.5 * (lo + hi);
    for _ in 0..100 {
        let (s, c) = gamma.sin_cos();
        let k = (w_sq - gamma * gamma).max(0.0).sqrt();
        let value = c / s + alpha * k / gamma;
        if value == 0.0 {
            break;
        }
        if value > 0.0 {
            lo = gamma;
        } else {
            hi = gamma;
        }
        let slope = -1.0 / (s * s) - alpha * (gamma / k + k / gamma) / gamma;
        let dx = value / slope;
        if dx.abs() <= 4.0 * f64::EPSILON * gamma {
            if gamma - dx > lo0 && gamma - dx < hi0 {
                gamma -= dx;
            }
            break;
        }
        let next = gamma - dx;
        gamma = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * gamma {
            break;
        }
    }
    Ok(gamma)
}

/// ½[1 − sin 2γ/(2γ)] = ∫₀¹ sin²(γs) ds.
pub fn norm_sin_sq(gamma: f64) -> f64 {
    0.5 * (1.0 - (2.0 * gamma).sin() / (2.0 * gamma))
}

/// ‖ψ‖² = ∫₀¹ [sin(γs)/sin γ]² ds for the bottom-normalized mode.
pub fn norm_psi_sq(gamma: f64) -> f64 {
    let s = gamma.sin();
    norm_sin_sq(gamma) / (s * s)
}

/// β(a) = [‖ψ‖² + a²/(2k)]^(−½); `a` is the tail coefficient of the template.
pub fn normalization_beta(a: f64, k: f64, norm_psi_sq: f64) -> f64 {
    (norm_psi_sq + a * a / (2.0 * k)).powf(-0.5)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeQuery {
    pub l: usize,
    pub p_tau: f64,
    pub r: [f64; 2],
    pub alpha: f64,
}

/// One trapped vertical mode at a fixed horizontal point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalMode {
    pub l: usize,
    pub alpha: f64,
    /// Local depth.
    pub h: f64,
    pub w_sq: f64,
    pub gamma: f64,
    pub k: f64,
    pub norm_psi_sq: f64,
    pub beta_1: f64,
    pub beta_alpha: f64,
    /// λ = k²/h².
    pub lambda: f64,
    pub residual: f64,
}

impl VerticalMode {
    /// Builds the mode for duct strength `w_sq` at depth `h`.
    pub fn from_duct(l: usize, alpha: f64, w_sq: f64, h: f64) -> Result<Self> {
        let gamma = solve_dispersion(l, alpha, w_sq)?;
        let k_sq = w_sq - gamma * gamma;
        let k = k_sq.sqrt();
        let norm = norm_psi_sq(gamma);
        Ok(Self {
            l,
            alpha,
            h,
            w_sq,
            gamma,
            k,
            norm_psi_sq: norm,
            beta_1: normalization_beta(1.0, k, norm),
            beta_alpha: normalization_beta(alpha, k, norm),
            lambda: k_sq / (h * h),
            residual: dispersion_residual(gamma, k, alpha),
        })
    }

    pub fn beta(&self, a: f64) -> f64 {
        normalization_beta(a, self.k, self.norm_psi_sq)
    }
}

pub fn solve_eigenvalue(medium: &MediumModel, query: &ModeQuery) -> Result<VerticalMode> {
    let h = medium.depth(query.r)?;
    let w_sq = medium.nu_sq_bar * query.p_tau * query.p_tau * h * h;
    VerticalMode::from_duct(query.l, query.alpha, w_sq, h)
}

/// First-order expansion of k² in α:
/// k²(α) ≈ k²(0)[1 − 2α/(k(0) + αw²/q_l²)], k²(0) = w² − q_l².
pub fn approx_k_sq(l: usize, alpha: f64, w_sq: f64) -> Result<f64> {
    let q = cutoff_wavenumber(l);
    let k0_sq = w_sq - q * q;
    if !(k0_sq > 0.0) {
        let w = w_sq.max(0.0).sqrt();
        return Err(Error::ModeBelowCutoff { l, w, count: mode_count(w) });
    }
    let k0 = k0_sq.sqrt();
    Ok(k0_sq * (1.0 - 2.0 * alpha / (k0 + alpha * w_sq / (q * q))))
}

pub fn approx_eigenvalue(medium: &MediumModel, query: &ModeQuery) -> Result<f64> {
    let w_sq = duct_strength(medium, query.p_tau, query.r)?;
    approx_k_sq(query.l, query.alpha, w_sq)
}

/// Mode template Ψ(z, a): (β(a)/√h)·sin(γz/h)/sin γ in the water,
/// (β(a)/√h)·a·exp(−k(z/h − 1)) below. a = 1 gives the eigenfunction of the
/// forward operator, a = α that of its adjoint.
pub fn eval_mode(z: f64, a: f64, mode: &VerticalMode) -> f64 {
    let h = mode.h;
    let scale = mode.beta(a) / h.sqrt();
    if z <= h {
        scale * (mode.gamma * z / h).sin() / mode.gamma.sin()
    } else {
        scale * a * (-mode.k * (z / h - 1.0)).exp()
    }
}

/// ⟨Ψ(1), Ψ(α)⟩ for a real eigenvalue.
pub fn biorth_inner(mode: &VerticalMode, alpha: f64) -> f64 {
    let x = 2.0 * mode.k * mode.norm_psi_sq;
    mode.beta(alpha) / mode.beta(1.0) + (alpha - 1.0) / ((x + 1.0).sqrt() * (x + alpha * alpha).sqrt())
}

/// ⟨∇Ψ(1), Ψ(α)⟩ / ⟨Ψ(1), Ψ(α)⟩, given ∇h/h and ∇{k‖ψ‖²}.
pub fn biorth_gradient_ratio(
    mode: &VerticalMode,
    alpha: f64,
    grad_h_over_h: [f64; 2],
    grad_k_norm: [f64; 2],
) -> [f64; 2] {
    let x = 2.0 * mode.k * mode.norm_psi_sq;
    let prefactor = 1.0 - 1.0 / (1.0 + (alpha - 1.0) / (x + 1.0));
    let mut out = [0.0; 2];
    for i in 0..2 {
        out[i] = prefactor * (mode.k * grad_h_over_h[i] - grad_k_norm[i] / (x + 1.0));
    }
    out
}

/// Local Taylor data of γ as a function of w², to third order.
///
/// The simple-model spectrum depends on (p_τ, r⃗) only through w², so every
/// derivative of λ, k or ‖ψ‖² follows from these four numbers by the chain
/// rule. The coefficients come from implicit differentiation of the
/// dispersion relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaJet {
    pub l: usize,
    pub alpha: f64,
    pub w_sq: f64,
    /// γ, dγ/dw², d²γ/d(w²)², d³γ/d(w²)³.
    pub derivs: [f64; 4],
}

impl GammaJet {
    pub fn new(l: usize, alpha: f64, w_sq: f64) -> Result<Self> {
        Self::with_order(l, alpha, w_sq, 3)
    }

    /// Jet carrying derivatives up to `order` (≤ 3); higher ones are zero.
    pub fn with_order(l: usize, alpha: f64, w_sq: f64, order: usize) -> Result<Self> {
        let gamma = solve_dispersion(l, alpha, w_sq)?;
        if alpha == 0.0 || order == 0 {
            return Ok(Self { l, alpha, w_sq, derivs: [gamma, 0.0, 0.0, 0.0] });
        }
        fn dispersion<D: DualNum<Primitive = f64> + Copy>(alpha: f64) -> impl Fn(Dual<D>, &Dual<D>) -> Dual<D> {
            move |gamma, w| {
                let k = (*w - gamma * gamma).sqrt();
                gamma.cos() / gamma.sin() + k * alpha / gamma
            }
        }
        let derivs = if order >= 3 {
            let g: Dual3_64 = implicit_derivative(dispersion(alpha), gamma, &Dual3_64::from(w_sq).derivative());
            [g.re, g.v1, g.v2, g.v3]
        } else {
            let g: Dual2_64 = implicit_derivative(dispersion(alpha), gamma, &Dual2_64::from(w_sq).derivative());
            [g.re, g.v1, g.v2, 0.0]
        };
        Ok(Self { l, alpha, w_sq, derivs })
    }

    pub fn gamma(&self) -> f64 {
        self.derivs[0]
    }

    /// k² = w² − γ² at the expansion point.
    pub fn k_sq(&self) -> f64 {
        self.w_sq - self.derivs[0] * self.derivs[0]
    }

    /// γ lifted to a dual number: exact up to third order around `w_sq`.
    pub fn gamma_at<D: DualNum<Primitive = f64>>(&self, w_sq: D) -> D {
        let [g0, g1, g2, g3] = self.derivs;
        let dw = w_sq - self.w_sq;
        (dw.clone() * (g3 / 6.0) + g2 / 2.0) * dw.clone() * dw.clone() + dw * g1 + g0
    }

    /// dγ/dw² lifted (exact to second order).
    pub fn gamma_prime_at<D: DualNum<Primitive = f64>>(&self, w_sq: D) -> D {
        let [_, g1, g2, g3] = self.derivs;
        let dw = w_sq - self.w_sq;
        (dw.clone() * (g3 / 2.0) + g2) * dw + g1
    }

    /// k² as a function of w².
    pub fn k_sq_at<D: DualNum<Primitive = f64>>(&self, w_sq: D) -> D {
        let g = self.gamma_at(w_sq.clone());
        w_sq - g.clone() * g
    }

    /// d(k‖ψ‖²)/dw² as a function of w² (exact to first order).
    pub fn d_k_norm_at<D: DualNum<Primitive = f64>>(&self, w_sq: D) -> D {
        let g = self.gamma_at(w_sq.clone());
        let gp = self.gamma_prime_at(w_sq.clone());
        let k = (w_sq - g.clone() * g.clone()).sqrt();
        let dk = (-(g.clone() * gp.clone()) * 2.0 + 1.0) / (k.clone() * 2.0);
        let (norm, dnorm) = norm_and_slope(g);
        dk * norm + k * dnorm * gp
    }
}

/// ‖ψ‖²(γ) and d‖ψ‖²/dγ.
fn norm_and_slope<D: DualNum<Primitive = f64>>(gamma: D) -> (D, D) {
    let two_g = gamma.clone() * 2.0;
    let s = gamma.sin();
    let c = gamma.cos();
    let s2 = s.clone() * s.clone();
    let sin_sq_norm = -(two_g.sin() / (gamma.clone() * 4.0)) + 0.5;
    let dsin_sq_norm = -(two_g.cos() / (gamma.clone() * 2.0)) + two_g.sin() / (gamma.clone() * gamma * 4.0);
    let norm = sin_sq_norm.clone() / s2.clone();
    let dnorm = dsin_sq_norm / s2.clone() - sin_sq_norm * c * 2.0 / (s2 * s);
    (norm, dnorm)
}

/// Coefficient c with ⟨∇Ψ(1),Ψ(α)⟩/⟨Ψ(1),Ψ(α)⟩ = c·∇h, as a function of
/// (p_τ, h). Generic so the dynamics can differentiate it.
pub fn ratio_coefficient<D: DualNum<Primitive = f64>>(jet: &GammaJet, nu_sq_bar: f64, p_tau: D, h: D) -> D {
    let alpha = jet.alpha;
    let w_sq = p_tau.clone() * p_tau * h.clone() * h.clone() * nu_sq_bar;
    let g = jet.gamma_at(w_sq.clone());
    let k = (w_sq.clone() - g.clone() * g.clone()).sqrt();
    let (norm, _) = norm_and_slope(g);
    let x = k.clone() * norm * 2.0;
    let prefactor = (x.clone() + alpha).recip() * (alpha - 1.0);
    // ∇{k‖ψ‖²} = d(k‖ψ‖²)/dw² · (2w²/h) · ∇h
    let dkn = jet.d_k_norm_at(w_sq.clone()) * w_sq * 2.0 / h.clone();
    prefactor * (k / h - dkn / (x + 1.0))
}

/// ∇_r⃗{k‖ψ‖²} at fixed p_τ, by the chain rule through w².
pub fn grad_k_norm(medium: &MediumModel, l: usize, alpha: f64, p_tau: f64, r: [f64; 2]) -> Result<[f64; 2]> {
    let h = medium.depth(r)?;
    let w_sq = medium.nu_sq_bar * p_tau * p_tau * h * h;
    let jet = GammaJet::new(l, alpha, w_sq)?;
    let d = jet.d_k_norm_at(w_sq) * 2.0 * w_sq / h;
    Ok([d * medium.grad_h[0], d * medium.grad_h[1]])
}
