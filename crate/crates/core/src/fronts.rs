//! Observable fields on a ray fan: amplitude, ray and observable gradients,
//! caustic flags and constant-level fronts.
//!
//! Ray coordinates are 𝔯 = (𝛕, μ₁, μ₂) unless a function says otherwise.

use crate::dynamics::{RaySolution, RayState};
use crate::error::{Error, Result};
use crate::fan::RayFan;
use crate::hamiltonian::{HamiltonianModel, Order};
use crate::linalg::{j_mul, j_mul_vec, Matrix3, Matrix3x6, Matrix6x3, Vector6};

/// Relative |det I_r f_𝔯| below which a point is flagged near-caustic.
pub const DEFAULT_CAUSTIC_THRESHOLD: f64 = 1e-6;
/// Smallest singular value accepted by the pseudo-inverse.
pub const RANK_FLOOR: f64 = 1e-12;

/// Parameter along the ray used for the first Jacobian column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    /// σ, the Hamiltonian flow parameter: column J∇H, propagator P_sigma.
    Sigma,
    /// 𝛕: column J∇H/(∂H/∂p_τ), propagator P_nat.
    Natural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Validity {
    Ok,
    NearCaustic,
    Cutoff,
}

impl Validity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Validity::Ok => "ok",
            Validity::NearCaustic => "near_caustic",
            Validity::Cutoff => "cutoff",
        }
    }
}

fn jacobian_at(model: &HamiltonianModel, ray: &RaySolution, state: &RayState, frame: Frame) -> Result<Matrix6x3> {
    let e = model.expand(&state.f, Order::First)?;
    let flow = j_mul_vec(&e.grad());
    let (first, p) = match frame {
        Frame::Sigma => (flow, state.p_sigma),
        Frame::Natural => (flow * e.clock_factor()?, state.p_nat),
    };
    let rest = p * ray.node.jacobian;
    Ok(Matrix6x3::from_columns(&[first, rest.column(0).into_owned(), rest.column(1).into_owned()]))
}

/// f_𝔯 at a sampled 𝛕.
pub fn ray_jacobian(model: &HamiltonianModel, ray: &RaySolution, tau_nat: f64, frame: Frame) -> Result<Matrix6x3> {
    jacobian_at(model, ray, ray.at(tau_nat)?, frame)
}

/// The (τ, x, y) block of a ray Jacobian.
pub fn spatial_block(f_r: &Matrix6x3) -> Matrix3 {
    f_r.fixed_rows::<3>(0).into_owned()
}

/// Left inverse (f_𝔯ᵀf_𝔯)⁻¹f_𝔯ᵀ.
pub fn pseudo_inverse(f_r: &Matrix6x3) -> Result<Matrix3x6> {
    let smallest = f_r.singular_values().min();
    if !(smallest >= RANK_FLOOR) {
        return Err(Error::RankDeficient(smallest));
    }
    let gram = f_r.transpose() * f_r;
    let chol = gram.cholesky().ok_or(Error::RankDeficient(smallest))?;
    Ok(chol.solve(&f_r.transpose()))
}

/// Amplitude and the geometric data it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeSample {
    pub value: f64,
    /// A₀·√(det ratio), without the dissipation factor.
    pub geometric: f64,
    pub det_initial: f64,
    pub det_now: f64,
    pub validity: Validity,
}

fn amplitude_from(
    model: &HamiltonianModel,
    ray: &RaySolution,
    state: &RayState,
    caustic_threshold: f64,
) -> Result<AmplitudeSample> {
    let det_initial = spatial_block(&jacobian_at(model, ray, &ray.samples[0], Frame::Sigma)?).determinant();
    let det_now = spatial_block(&jacobian_at(model, ray, state, Frame::Sigma)?).determinant();
    let ratio = det_initial / det_now;
    if !(ratio > 0.0) {
        return Err(Error::CausticCrossing(ratio));
    }
    let validity =
        if det_now.abs() < caustic_threshold * det_initial.abs() { Validity::NearCaustic } else { Validity::Ok };
    let geometric = ray.node.amplitude0 * ratio.sqrt();
    Ok(AmplitudeSample { value: geometric * state.t_diss.exp(), geometric, det_initial, det_now, validity })
}

/// A = A₀·√(det I_r f_𝔯(0) / det I_r P f_𝔯(0))·exp 𝔗.
pub fn amplitude(model: &HamiltonianModel, ray: &RaySolution, tau_nat: f64, caustic_threshold: f64) -> Result<AmplitudeSample> {
    amplitude_from(model, ray, ray.at(tau_nat)?, caustic_threshold)
}

/// Scalars whose ray gradients have closed forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RayQuantity {
    Tau,
    TauNat,
    Arclen,
    Phase,
}

/// ∇_𝔯 of a built-in quantity.
pub fn ray_gradient(model: &HamiltonianModel, ray: &RaySolution, tau_nat: f64, which: RayQuantity) -> Result<[f64; 3]> {
    let s = ray.at(tau_nat)?;
    let jac = &ray.node.jacobian;
    let interior = |acc: &Vector6| {
        let g = jac.transpose() * acc;
        [g[0], g[1]]
    };
    Ok(match which {
        RayQuantity::Tau => [1.0, jac[(0, 0)], jac[(0, 1)]],
        RayQuantity::TauNat => [1.0, 0.0, 0.0],
        RayQuantity::Arclen => {
            let v = model.group_velocity(&s.f)?;
            let m = interior(&s.interior.arclen);
            [v[0].hypot(v[1]), m[0], m[1]]
        }
        RayQuantity::Phase => {
            let v = model.group_velocity(&s.f)?;
            let m = interior(&s.interior.phase);
            let g0 = ray.node.phase_gradient;
            [
                s.f.p_tau + s.f.p[0] * v[0] + s.f.p[1] * v[1],
                g0[0] + tau_nat * jac[(3, 0)] + m[0],
                g0[1] + tau_nat * jac[(3, 1)] + m[1],
            ]
        }
    })
}

/// ∇_μ ∫₀^𝛕 G d𝛕′ for an arbitrary phase-space scalar, by the trapezoid rule
/// over the ray's samples and central differences of G.
pub fn interior_gradient(
    ray: &RaySolution,
    tau_nat: f64,
    field: &dyn Fn(&Vector6) -> Result<f64>,
) -> Result<[f64; 2]> {
    ray.at(tau_nat)?;
    let grad = |f: &Vector6| -> Result<Vector6> {
        let mut g = Vector6::zeros();
        for i in 0..6 {
            let e = 1e-6 * f[i].abs().max(1.0);
            let (mut a, mut b) = (*f, *f);
            a[i] += e;
            b[i] -= e;
            g[i] = (field(&a)? - field(&b)?) / (2.0 * e);
        }
        Ok(g)
    };
    let mut total = Vector6::zeros();
    let mut prev: Option<(f64, Vector6)> = None;
    for s in ray.samples.iter().take_while(|s| s.tau_nat <= tau_nat * (1.0 + 1e-12)) {
        let integrand = s.p_nat.transpose() * grad(&s.f.to_vector())?;
        if let Some((t, v)) = prev {
            total += (integrand + v) * (0.5 * (s.tau_nat - t));
        }
        prev = Some((s.tau_nat, integrand));
    }
    let g = ray.node.jacobian.transpose() * total;
    Ok([g[0], g[1]])
}

/// ∇_𝔯 A from the trace identity d ln det M = tr(M⁻¹dM), the propagation
/// tensor, and the dissipation and source terms.
pub fn amplitude_gradient(model: &HamiltonianModel, ray: &RaySolution, tau_nat: f64) -> Result<[f64; 3]> {
    let state = ray.at(tau_nat)?;
    let tensor = state.ptensor.as_deref().ok_or(Error::MissingTensor)?;
    let node = &ray.node;
    let amp = amplitude_from(model, ray, state, 0.0)?;

    let e0 = model.expand(&node.f0, Order::Second)?;
    let e = model.expand(&state.f, Order::Second)?;
    let jh0 = j_mul(&e0.hessian());
    let jh = j_mul(&e.hessian());
    let fr0 = Matrix6x3::from_columns(&[
        j_mul_vec(&e0.grad()),
        node.jacobian.column(0).into_owned(),
        node.jacobian.column(1).into_owned(),
    ]);
    // ∂f_𝔯(0)/∂μ_j.
    let dfr0: [Matrix6x3; 2] = std::array::from_fn(|j| {
        let dj = node.jacobian.column(j).into_owned();
        let d2 = &node.jacobian_derivative[j];
        Matrix6x3::from_columns(&[jh0 * dj, d2.column(0).into_owned(), d2.column(1).into_owned()])
    });

    let m0 = spatial_block(&fr0);
    let m0_inv = m0.try_inverse().ok_or(Error::RankDeficient(0.0))?;
    let pf = state.p_sigma * fr0;
    let m = spatial_block(&pf);
    let m_inv = m.try_inverse().ok_or(Error::CausticCrossing(0.0))?;

    let d_sigma = (m_inv * spatial_block(&(jh * pf))).trace();
    let s = e.clock_factor()?;
    let d_sigma_d_mu = node.jacobian.transpose() * state.interior.clock;
    let d_diss_d_mu = node.jacobian.transpose() * state.interior.dissipation;
    let (diss_rate, _) = e.dissipation_rate()?;

    let mut out = [0.0; 3];
    out[0] = -0.5 * s * d_sigma + diss_rate;
    for j in 0..2 {
        let dj = node.jacobian.column(j).into_owned();
        let dm = tensor.apply(&dj) * fr0 + state.p_sigma * dfr0[j];
        let at_sigma = (m_inv * spatial_block(&dm)).trace();
        let initial = (m0_inv * spatial_block(&dfr0[j])).trace();
        let log_det = at_sigma + d_sigma * d_sigma_d_mu[j];
        let source = if node.amplitude0 != 0.0 { node.amplitude_gradient[j] / node.amplitude0 } else { 0.0 };
        out[j + 1] = source + 0.5 * initial - 0.5 * log_det + d_diss_d_mu[j];
    }
    Ok(out.map(|v| v * amp.value))
}

/// I_r (f_𝔯⁺)ᵀ ∇_𝔯g: the (τ, x, y) part of the phase-space gradient.
pub fn observable_gradient(ray_grad: [f64; 3], f_r: &Matrix6x3) -> Result<[f64; 3]> {
    let pinv = pseudo_inverse(f_r)?;
    let g = pinv.transpose() * nalgebra::Vector3::from(ray_grad);
    Ok([g[0], g[1], g[2]])
}

/// (I_r f_𝔯)⁻ᵀ ∇_𝔯g: the space-time gradient of a field that is constant
/// along the momentum fibre.
pub fn spatial_gradient(ray_grad: [f64; 3], f_r: &Matrix6x3) -> Result<[f64; 3]> {
    let m = spatial_block(f_r);
    let inv = m.transpose().try_inverse().ok_or(Error::RankDeficient(0.0))?;
    let g = inv * nalgebra::Vector3::from(ray_grad);
    Ok([g[0], g[1], g[2]])
}

/// Per-sample fields used by exports and fronts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleFields {
    pub amplitude: f64,
    pub det_ir_fr: f64,
    pub validity: Validity,
}

pub fn sample_fields(model: &HamiltonianModel, ray: &RaySolution, index: usize, caustic_threshold: f64) -> Result<SampleFields> {
    let state = &ray.samples[index];
    match amplitude_from(model, ray, state, caustic_threshold) {
        Ok(a) => Ok(SampleFields { amplitude: a.value, det_ir_fr: a.det_now, validity: a.validity }),
        Err(Error::CausticCrossing(_)) => {
            let det = spatial_block(&jacobian_at(model, ray, state, Frame::Sigma)?).determinant();
            Ok(SampleFields { amplitude: f64::NAN, det_ir_fr: det, validity: Validity::NearCaustic })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontQuantity {
    TauNat,
    Tau,
    Phase,
    Arclen,
    Amplitude,
    Dissipation,
}

impl FrontQuantity {
    pub fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "tau_nat" => Self::TauNat,
            "tau" => Self::Tau,
            "phase" => Self::Phase,
            "arclen" => Self::Arclen,
            "amplitude" => Self::Amplitude,
            "T_diss" => Self::Dissipation,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::TauNat => "tau_nat",
            Self::Tau => "tau",
            Self::Phase => "phase",
            Self::Arclen => "arclen",
            Self::Amplitude => "amplitude",
            Self::Dissipation => "T_diss",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontPoint {
    pub mu: [f64; 2],
    pub tau_nat: f64,
    /// (τ, x, y).
    pub r: [f64; 3],
    pub value: f64,
    /// Amplitude at the crossing, interpolated like the position.
    pub amplitude: f64,
    pub validity: Validity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapReason {
    LevelNotReached,
    Cutoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrontSample {
    Point(FrontPoint),
    Gap { mu: [f64; 2], reason: GapReason },
}

impl FrontSample {
    pub fn point(&self) -> Option<&FrontPoint> {
        match self {
            FrontSample::Point(p) => Some(p),
            FrontSample::Gap { .. } => None,
        }
    }
}

fn quantity_at(q: FrontQuantity, s: &RayState, fields: &SampleFields) -> f64 {
    match q {
        FrontQuantity::TauNat => s.tau_nat,
        FrontQuantity::Tau => s.f.tau,
        FrontQuantity::Phase => s.phase,
        FrontQuantity::Arclen => s.arclen,
        FrontQuantity::Amplitude => fields.amplitude,
        FrontQuantity::Dissipation => s.t_diss,
    }
}

/// Locates the first crossing of `level` along one ray.
pub fn front_crossing(
    model: &HamiltonianModel,
    ray: &RaySolution,
    quantity: FrontQuantity,
    level: f64,
    caustic_threshold: f64,
) -> Result<FrontSample> {
    let mu = ray.mu();
    let fields: Vec<SampleFields> =
        (0..ray.samples.len()).map(|i| sample_fields(model, ray, i, caustic_threshold)).collect::<Result<_>>()?;
    let values: Vec<f64> = ray.samples.iter().zip(&fields).map(|(s, f)| quantity_at(quantity, s, f)).collect();
    for i in 0..values.len() {
        let (a, sa) = (values[i], &ray.samples[i]);
        if a == level {
            let r = [sa.f.tau, sa.f.r[0], sa.f.r[1]];
            let f = &fields[i];
            return Ok(FrontSample::Point(FrontPoint {
                mu,
                tau_nat: sa.tau_nat,
                r,
                value: a,
                amplitude: f.amplitude,
                validity: f.validity,
            }));
        }
        if i + 1 == values.len() {
            break;
        }
        let b = values[i + 1];
        if (a - level) * (b - level) < 0.0 {
            let sb = &ray.samples[i + 1];
            let w = (level - a) / (b - a);
            let lerp = |x: f64, y: f64| x + w * (y - x);
            let validity = if fields[i].validity == Validity::Ok && fields[i + 1].validity == Validity::Ok {
                Validity::Ok
            } else {
                Validity::NearCaustic
            };
            return Ok(FrontSample::Point(FrontPoint {
                mu,
                tau_nat: lerp(sa.tau_nat, sb.tau_nat),
                r: [lerp(sa.f.tau, sb.f.tau), lerp(sa.f.r[0], sb.f.r[0]), lerp(sa.f.r[1], sb.f.r[1])],
                value: level,
                amplitude: lerp(fields[i].amplitude, fields[i + 1].amplitude),
                validity,
            }));
        }
    }
    let reason = if ray.truncated_at.is_some() { GapReason::Cutoff } else { GapReason::LevelNotReached };
    Ok(FrontSample::Gap { mu, reason })
}

/// One front per μ₁ row, ordered by μ₂.
pub fn extract_front(
    model: &HamiltonianModel,
    fan: &RayFan,
    quantity: FrontQuantity,
    level: f64,
    caustic_threshold: f64,
) -> Result<Vec<Vec<FrontSample>>> {
    (0..fan.grid.mu1.len())
        .map(|i1| {
            fan.row(i1).iter().map(|ray| front_crossing(model, ray, quantity, level, caustic_threshold)).collect()
        })
        .collect()
}
