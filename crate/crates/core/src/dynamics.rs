//! Source manifolds and the ray march in the natural parameter 𝛕.
//!
//! Along with the ray itself the march carries the phase, arc length,
//! dissipation integral and σ, both propagators (σ-flow and 𝛕-flow), the
//! optional propagation tensor, and four running integrals ∫P_natᵀ∇G d𝛕′
//! used for interior gradients.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianModel, Order, PhasePoint};
use crate::linalg::{j_mul, j_mul_vec, Matrix6, Matrix6x2, Tensor3, Vector6};

/// How source momenta are placed relative to the H = 0 shell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShellMode {
    /// |p⃗| = √(p_τ² + λ): the ray starts on H = 0.
    #[default]
    Strict,
    /// |p⃗| = k/h as written for the ring source; H = p_τ²/2 is conserved instead.
    Literal,
}

/// A two-parameter family of initial phase points.
pub trait SourceManifold: Send + Sync {
    fn point(&self, mu: [f64; 2]) -> Result<PhasePoint>;
    fn phase(&self, mu: [f64; 2]) -> f64;

    fn amplitude(&self, _mu: [f64; 2]) -> f64 {
        1.0
    }

    /// Step for the default central differences over μ.
    fn fd_step(&self) -> f64 {
        1e-5
    }

    /// ∂f₀/∂μ as a 6×2 matrix.
    fn point_jacobian(&self, mu: [f64; 2]) -> Result<Matrix6x2> {
        let e = self.fd_step();
        let mut out = Matrix6x2::zeros();
        for j in 0..2 {
            let (a, b) = (shift(mu, j, e), shift(mu, j, -e));
            let d = (self.point(a)?.to_vector() - self.point(b)?.to_vector()) / (2.0 * e);
            out.set_column(j, &d);
        }
        Ok(out)
    }

    fn phase_gradient(&self, mu: [f64; 2]) -> [f64; 2] {
        let e = self.fd_step();
        [0, 1].map(|j| (self.phase(shift(mu, j, e)) - self.phase(shift(mu, j, -e))) / (2.0 * e))
    }

    fn amplitude_gradient(&self, mu: [f64; 2]) -> [f64; 2] {
        let e = self.fd_step();
        [0, 1].map(|j| (self.amplitude(shift(mu, j, e)) - self.amplitude(shift(mu, j, -e))) / (2.0 * e))
    }

    /// ∂²f₀/∂μ_j∂μ, one 6×2 matrix per j, by central differences of the Jacobian.
    fn point_jacobian_derivative(&self, mu: [f64; 2]) -> Result<[Matrix6x2; 2]> {
        let e = 1e-4;
        let mut out = [Matrix6x2::zeros(); 2];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (self.point_jacobian(shift(mu, j, e))? - self.point_jacobian(shift(mu, j, -e))?) / (2.0 * e);
        }
        Ok(out)
    }
}

fn shift(mu: [f64; 2], j: usize, e: f64) -> [f64; 2] {
    let mut m = mu;
    m[j] += e;
    m
}

/// √(p_τ² + λ)·direction, which puts the point on H = 0.
pub fn project_to_shell(model: &HamiltonianModel, direction: [f64; 2], p_tau: f64, r: [f64; 2]) -> Result<[f64; 2]> {
    let lambda = model.lambda(p_tau, r)?;
    let n = (p_tau * p_tau + lambda).sqrt();
    Ok([n * direction[0], n * direction[1]])
}

/// Pulses emitted from a ring: μ₁ delays emission and sweeps the frequency,
/// μ₂ is the polar angle on the ring. Rays start outward-normal.
#[derive(Debug, Clone)]
pub struct RingSource {
    pub model: HamiltonianModel,
    pub c_bot: f64,
    pub freq0: f64,
    pub dfreq: f64,
    pub radius: f64,
    pub shell: ShellMode,
    /// Use closed-form μ-derivatives instead of central differences.
    pub analytic: bool,
}

impl RingSource {
    pub fn new(model: HamiltonianModel, freq0: f64, dfreq: f64, radius: f64, shell: ShellMode) -> Self {
        let c_bot = model.medium.c_bot;
        Self { model, c_bot, freq0, dfreq, radius, shell, analytic: true }
    }

    fn p_tau(&self, mu1: f64) -> f64 {
        -2.0 * PI / self.c_bot * (self.freq0 + self.dfreq * mu1)
    }

    fn momentum_norm(&self, p_tau: f64, lambda: f64) -> f64 {
        match self.shell {
            ShellMode::Strict => (p_tau * p_tau + lambda).sqrt(),
            ShellMode::Literal => lambda.sqrt(),
        }
    }
}

impl SourceManifold for RingSource {
    fn point(&self, mu: [f64; 2]) -> Result<PhasePoint> {
        let (c, s) = (mu[1].cos(), mu[1].sin());
        let p_tau = self.p_tau(mu[0]);
        let r = [self.radius * c, self.radius * s];
        let n = self.momentum_norm(p_tau, self.model.lambda(p_tau, r)?);
        Ok(PhasePoint::new(self.c_bot * mu[0], r, p_tau, [n * c, n * s]))
    }

    fn phase(&self, mu: [f64; 2]) -> f64 {
        -2.0 * PI * (self.freq0 * mu[0] + 0.5 * self.dfreq * mu[0] * mu[0])
    }

    fn phase_gradient(&self, mu: [f64; 2]) -> [f64; 2] {
        if !self.analytic {
            let e = self.fd_step();
            return [0, 1].map(|j| (self.phase(shift(mu, j, e)) - self.phase(shift(mu, j, -e))) / (2.0 * e));
        }
        [-2.0 * PI * (self.freq0 + self.dfreq * mu[0]), 0.0]
    }

    fn amplitude_gradient(&self, _mu: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn point_jacobian(&self, mu: [f64; 2]) -> Result<Matrix6x2> {
        if !self.analytic {
            let e = self.fd_step();
            let mut out = Matrix6x2::zeros();
            for j in 0..2 {
                let d = (self.point(shift(mu, j, e))?.to_vector() - self.point(shift(mu, j, -e))?.to_vector()) / (2.0 * e);
                out.set_column(j, &d);
            }
            return Ok(out);
        }
        let f = self.point(mu)?;
        let e = self.model.expand(&f, Order::First)?;
        let (c, s) = (mu[1].cos(), mu[1].sin());
        let n = self.momentum_norm(f.p_tau, e.lambda);
        let dp_tau = -2.0 * PI * self.dfreq / self.c_bot;
        let (dx, dy) = (-self.radius * s, self.radius * c);
        let dn1 = match self.shell {
            ShellMode::Strict => (f.p_tau + 0.5 * e.d_lambda[0]) * dp_tau / n,
            ShellMode::Literal => 0.5 * e.d_lambda[0] * dp_tau / n,
        };
        let dn2 = 0.5 * (e.d_lambda[1] * dx + e.d_lambda[2] * dy) / n;
        Ok(Matrix6x2::from_columns(&[
            Vector6::new(self.c_bot, 0.0, 0.0, dp_tau, dn1 * c, dn1 * s),
            Vector6::new(0.0, dx, dy, 0.0, dn2 * c - n * s, dn2 * s + n * c),
        ]))
    }
}

/// Initial data at one μ node, with everything derived from the source.
#[derive(Debug, Clone)]
pub struct SourceNode {
    pub mu: [f64; 2],
    pub f0: PhasePoint,
    pub phase0: f64,
    pub amplitude0: f64,
    /// ∂f₀/∂μ.
    pub jacobian: Matrix6x2,
    pub phase_gradient: [f64; 2],
    pub amplitude_gradient: [f64; 2],
    /// ∂/∂μ_j of `jacobian`.
    pub jacobian_derivative: [Matrix6x2; 2],
    /// H(f₀); the level the ray stays on.
    pub energy: f64,
}

impl SourceNode {
    pub fn new(model: &HamiltonianModel, source: &dyn SourceManifold, mu: [f64; 2]) -> Result<Self> {
        let f0 = source.point(mu)?;
        let energy = model.hamiltonian(&f0)?;
        Ok(Self {
            mu,
            f0,
            phase0: source.phase(mu),
            amplitude0: source.amplitude(mu),
            jacobian: source.point_jacobian(mu)?,
            phase_gradient: source.phase_gradient(mu),
            amplitude_gradient: source.amplitude_gradient(mu),
            jacobian_derivative: source.point_jacobian_derivative(mu)?,
            energy,
        })
    }

    fn invalid(&self, reason: String) -> Error {
        Error::InvalidSource { mu1: self.mu[0], mu2: self.mu[1], reason }
    }

    /// Checks the Cauchy-data conditions at this node.
    pub fn validate(&self, model: &HamiltonianModel, shell: ShellMode) -> Result<()> {
        let f = self.f0.to_vector();
        for j in 0..2 {
            let col = self.jacobian.column(j);
            let expected = f[3] * col[0] + f[4] * col[1] + f[5] * col[2];
            let scale = f[3].abs() * col[0].abs() + f[4].abs() * col[1].abs() + f[5].abs() * col[2].abs();
            if (self.phase_gradient[j] - expected).abs() > 1e-8 * scale.max(1.0) {
                return Err(self.invalid(format!(
                    "phase derivative {} disagrees with p0·dr0 = {expected} along mu{}",
                    self.phase_gradient[j],
                    j + 1
                )));
            }
        }
        let dr = self.jacobian.fixed_rows::<3>(0).into_owned();
        let sv = dr.singular_values();
        let smallest = sv.min();
        if smallest <= 1e-10 {
            return Err(self.invalid(format!("dr0/dmu is rank deficient (sigma_min = {smallest:e})")));
        }
        let g = model.grad(&self.f0)?;
        if g.fixed_rows::<3>(3).norm() <= 1e-12 {
            return Err(self.invalid("momentum gradient of H vanishes".into()));
        }
        if shell == ShellMode::Strict && self.energy.abs() > 1e-10 {
            return Err(self.invalid(format!("H(f0) = {:e} is off the zero shell", self.energy)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RaySettings {
    pub step: f64,
    /// Sample points in 𝛕, positive and increasing; 0 is always sampled.
    pub checkpoints: Vec<f64>,
    pub tensor: bool,
    /// Truncate when k² < cutoff_ratio·w².
    pub cutoff_ratio: f64,
}

impl Default for RaySettings {
    fn default() -> Self {
        Self { step: 1e-3, checkpoints: vec![1.0], tensor: false, cutoff_ratio: 1e-8 }
    }
}

impl RaySettings {
    pub fn with_checkpoints(mut self, checkpoints: Vec<f64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_tensor(mut self, tensor: bool) -> Self {
        self.tensor = tensor;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidSettings(format!("step must be positive, got {}", self.step)));
        }
        if self.checkpoints.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::InvalidSettings("checkpoints must be positive and finite".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSettings("checkpoints must be strictly increasing".into()));
        }
        if !(self.cutoff_ratio >= 0.0) {
            return Err(Error::InvalidSettings("cutoff ratio must be non-negative".into()));
        }
        Ok(())
    }
}

/// ∫₀^𝛕 P_natᵀ∇G d𝛕′ for the built-in integrands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteriorSums {
    /// G = |v⃗|.
    pub arclen: Vector6,
    /// G = p⃗·v⃗.
    pub phase: Vector6,
    /// G = d𝔗/d𝛕.
    pub dissipation: Vector6,
    /// G = dσ/d𝛕.
    pub clock: Vector6,
}

#[derive(Debug, Clone)]
pub struct RayState {
    pub tau_nat: f64,
    pub f: PhasePoint,
    pub phase: f64,
    pub arclen: f64,
    pub t_diss: f64,
    pub sigma: f64,
    pub p_sigma: Matrix6,
    pub p_nat: Matrix6,
    pub ptensor: Option<Box<Tensor3>>,
    pub interior: InteriorSums,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone)]
pub struct RaySolution {
    pub node: SourceNode,
    pub samples: Vec<RayState>,
    /// 𝛕 at which the ray was stopped near mode cutoff.
    pub truncated_at: Option<f64>,
}

impl RaySolution {
    pub fn mu(&self) -> [f64; 2] {
        self.node.mu
    }

    pub fn at(&self, tau_nat: f64) -> Result<&RayState> {
        self.samples
            .iter()
            .find(|s| (s.tau_nat - tau_nat).abs() <= 1e-12 * tau_nat.abs().max(1.0))
            .ok_or(Error::MissingCheckpoint(tau_nat))
    }

    pub fn last(&self) -> &RayState {
        self.samples.last().expect("a ray always holds its initial state")
    }
}

const X: usize = 0;
const PX: usize = 2;
const PHASE: usize = 4;
const ARCLEN: usize = 5;
const TDISS: usize = 6;
const SIGMA: usize = 7;
const PSIG: usize = 8;
const PNAT: usize = PSIG + 36;
const ACC: usize = PNAT + 36;
const TENSOR: usize = ACC + 24;
const BASE_LEN: usize = TENSOR;
const FULL_LEN: usize = TENSOR + 216;

/// Marches one ray. Carries only what does not change analytically:
/// τ = τ₀ + 𝛕 and p_τ are rebuilt on every evaluation.
pub struct RayMarcher<'a> {
    model: &'a HamiltonianModel,
    tau0: f64,
    p_tau: f64,
    tensor: bool,
    cutoff_ratio: f64,
    tau_nat: f64,
    y: Vec<f64>,
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl<'a> RayMarcher<'a> {
    pub fn new(model: &'a HamiltonianModel, node: &SourceNode, settings: &RaySettings) -> Self {
        let len = if settings.tensor { FULL_LEN } else { BASE_LEN };
        let mut y = vec![0.0; len];
        let f = &node.f0;
        y[X] = f.r[0];
        y[X + 1] = f.r[1];
        y[PX] = f.p[0];
        y[PX + 1] = f.p[1];
        y[PHASE] = node.phase0;
        for i in 0..6 {
            y[PSIG + 7 * i] = 1.0;
            y[PNAT + 7 * i] = 1.0;
        }
        Self {
            model,
            tau0: f.tau,
            p_tau: f.p_tau,
            tensor: settings.tensor,
            cutoff_ratio: settings.cutoff_ratio,
            tau_nat: 0.0,
            k: std::array::from_fn(|_| vec![0.0; len]),
            tmp: vec![0.0; len],
            y,
        }
    }

    pub fn tau_nat(&self) -> f64 {
        self.tau_nat
    }

    fn point(&self, tau_nat: f64, y: &[f64]) -> PhasePoint {
        PhasePoint::new(self.tau0 + tau_nat, [y[X], y[X + 1]], self.p_tau, [y[PX], y[PX + 1]])
    }

    fn rhs(&self, tau_nat: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let f = self.point(tau_nat, y);
        let order = if self.tensor { Order::Third } else { Order::Second };
        let e = self.model.expand(&f, order)?;
        if e.k_sq < self.cutoff_ratio * e.w_sq {
            return Err(Error::ModeBelowCutoff { l: self.model.l, w: e.w_sq.sqrt(), count: self.model.l });
        }
        let s = e.clock_factor()?;
        let g = e.grad();
        let p = f.p;
        let v = [-s * p[0], -s * p[1]];
        dy[X] = v[0];
        dy[X + 1] = v[1];
        dy[PX] = -s * g[1];
        dy[PX + 1] = -s * g[2];
        let p_sq = p[0] * p[0] + p[1] * p[1];
        let p_norm = p_sq.sqrt();
        dy[PHASE] = f.p_tau - s * p_sq;
        dy[ARCLEN] = s.abs() * p_norm;
        let (rate, d_diss) = e.dissipation_rate()?;
        dy[TDISS] = rate;
        dy[SIGMA] = s;

        let hess = e.hessian();
        let jh = j_mul(&hess) * s;
        let p_sig = Matrix6::from_column_slice(&y[PSIG..PSIG + 36]);
        let p_nat = Matrix6::from_column_slice(&y[PNAT..PNAT + 36]);
        dy[PSIG..PSIG + 36].copy_from_slice((jh * p_sig).as_slice());
        let ds = e.clock_factor_grad()?;
        let flow = jh + j_mul_vec(&g) * ds.transpose();
        dy[PNAT..PNAT + 36].copy_from_slice((flow * p_nat).as_slice());

        let mut d_speed = ds * (p_norm * s.signum());
        let mut d_work = ds * (-p_sq);
        if p_norm > 0.0 {
            d_speed[4] += s.abs() * p[0] / p_norm;
            d_speed[5] += s.abs() * p[1] / p_norm;
        }
        d_work[4] += -2.0 * s * p[0];
        d_work[5] += -2.0 * s * p[1];
        let pt = p_nat.transpose();
        for (slot, grad) in [d_speed, d_work, d_diss, ds].iter().enumerate() {
            dy[ACC + 6 * slot..ACC + 6 * slot + 6].copy_from_slice((pt * grad).as_slice());
        }

        if self.tensor {
            tensor_rhs(&e.third(), &jh, &p_sig, s, &y[TENSOR..], &mut dy[TENSOR..]);
        }
        Ok(())
    }

    /// One classical RK4 step of size `h` (may be negative).
    fn step(&mut self, h: f64) -> Result<()> {
        let t = self.tau_nat;
        let mut k = std::mem::take(&mut self.k);
        let mut tmp = std::mem::take(&mut self.tmp);
        let result = self.stages(t, h, &mut k, &mut tmp);
        if result.is_ok() {
            let [k1, k2, k3, k4] = &k;
            for (i, y) in self.y.iter_mut().enumerate() {
                *y += h / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
            }
            self.tau_nat = t + h;
        }
        self.k = k;
        self.tmp = tmp;
        result
    }

    fn stages(&self, t: f64, h: f64, k: &mut [Vec<f64>; 4], tmp: &mut [f64]) -> Result<()> {
        let y = &self.y;
        let [k1, k2, k3, k4] = k;
        self.rhs(t, y, k1)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        self.rhs(t + 0.5 * h, tmp, k2)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        self.rhs(t + 0.5 * h, tmp, k3)?;
        for i in 0..y.len() {
            tmp[i] = y[i] + h * k3[i];
        }
        self.rhs(t + h, tmp, k4)
    }

    /// Marches to `target` in equal sub-steps no longer than `step`.
    /// On error the state is left at the last completed step.
    pub fn march_to(&mut self, target: f64, step: f64) -> Result<()> {
        let span = target - self.tau_nat;
        if span == 0.0 {
            return Ok(());
        }
        let n = ((span.abs() / step) - 1e-9).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let start = self.tau_nat;
        for i in 0..n {
            self.step(h)?;
            self.tau_nat = if i + 1 == n { target } else { start + (i + 1) as f64 * h };
        }
        Ok(())
    }

    pub fn state(&self) -> Result<RayState> {
        let y = &self.y;
        let f = self.point(self.tau_nat, y);
        let acc = |slot: usize| Vector6::from_column_slice(&y[ACC + 6 * slot..ACC + 6 * slot + 6]);
        Ok(RayState {
            tau_nat: self.tau_nat,
            f,
            phase: y[PHASE],
            arclen: y[ARCLEN],
            t_diss: y[TDISS],
            sigma: y[SIGMA],
            p_sigma: Matrix6::from_column_slice(&y[PSIG..PSIG + 36]),
            p_nat: Matrix6::from_column_slice(&y[PNAT..PNAT + 36]),
            ptensor: self.tensor.then(|| Box::new(Tensor3::from_slice(&y[TENSOR..FULL_LEN]))),
            interior: InteriorSums { arclen: acc(0), phase: acc(1), dissipation: acc(2), clock: acc(3) },
            hamiltonian: self.model.hamiltonian(&f)?,
        })
    }
}

/// d𝔓/d𝛕 = s[J∇²H·𝔓 + J∇³H{P,P}], with 𝔓_{ink} = ∂P_{ik}/∂f₀ₙ.
/// `jh` is already s·J∇²H.
fn tensor_rhs(third: &Tensor3, jh: &Matrix6, p: &Matrix6, s: f64, t: &[f64], out: &mut [f64]) {
    // ∇³H is supported on slots 1, 2, 3 only.
    const SUPPORT: [usize; 3] = [1, 2, 3];
    let mut w = [Matrix6::zeros(); 3];
    for (ai, &a) in SUPPORT.iter().enumerate() {
        let mut h = nalgebra::Matrix3::zeros();
        for (bi, &b) in SUPPORT.iter().enumerate() {
            for (ci, &c) in SUPPORT.iter().enumerate() {
                h[(bi, ci)] = third.get(a, b, c);
            }
        }
        let rows = nalgebra::SMatrix::<f64, 3, 6>::from_fn(|r, k| p[(SUPPORT[r], k)]);
        // W_a(k, n) = Σ H_abc P_bk P_cn
        w[ai] = rows.transpose() * h * rows;
    }
    for i in 0..6 {
        for n in 0..6 {
            for k in 0..6 {
                let mut v = 0.0;
                for a in 0..6 {
                    v += jh[(i, a)] * t[36 * a + 6 * n + k];
                }
                // (J W)_i: rows 0..3 take +W_{i+3}, rows 3..6 take −W_{i−3}.
                let src = match i {
                    0 => w[2][(k, n)],
                    4 => -w[0][(k, n)],
                    5 => -w[1][(k, n)],
                    _ => 0.0,
                };
                out[36 * i + 6 * n + k] = v + s * src;
            }
        }
    }
}

/// Integrates one ray from a validated node through all checkpoints.
pub fn integrate_ray(model: &HamiltonianModel, node: &SourceNode, settings: &RaySettings) -> Result<RaySolution> {
    settings.validate()?;
    let mut marcher = RayMarcher::new(model, node, settings);
    let mut samples = vec![marcher.state()?];
    let mut truncated_at = None;
    for &target in &settings.checkpoints {
        match marcher.march_to(target, settings.step) {
            Ok(()) => samples.push(marcher.state()?),
            Err(Error::ModeBelowCutoff { .. }) => {
                truncated_at = Some(marcher.tau_nat());
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RaySolution { node: node.clone(), samples, truncated_at })
}
