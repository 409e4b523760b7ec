//! Two-layer waveguide in scaled coordinates: a water column of constant
//! sound-speed contrast over a homogeneous bottom, with an affine depth map.
//!
//! All horizontal and temporal quantities are already scaled (τ = ε·c_bot·t);
//! nothing in here converts units.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MediumModel {
    /// In-water reference speed, m/s.
    pub c_water: f64,
    /// Bottom sound speed, m/s.
    pub c_bot: f64,
    /// ν̄² = (c_bot² − c_water²)/c_water².
    pub nu_sq_bar: f64,
    /// Depth at the origin.
    pub h0: f64,
    /// Horizontal gradient of the depth map.
    pub grad_h: [f64; 2],
    /// Density ratio ρ/ρ_bot.
    pub alpha: f64,
}

impl MediumModel {
    pub fn new(c_water: f64, c_bot: f64, h0: f64, grad_h: [f64; 2], alpha: f64) -> Result<Self> {
        let finite = [c_water, c_bot, h0, grad_h[0], grad_h[1], alpha]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidMedium("non-finite parameter".into()));
        }
        if c_water <= 0.0 {
            return Err(Error::InvalidMedium(format!("c_water = {c_water} must be positive")));
        }
        if c_bot < c_water {
            return Err(Error::InvalidMedium(format!(
                "c_bot = {c_bot} must not be below c_water = {c_water}"
            )));
        }
        if h0 <= 0.0 {
            return Err(Error::InvalidMedium(format!("h0 = {h0} must be positive")));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidMedium(format!("alpha = {alpha} outside [0, 1]")));
        }
        let nu_sq_bar = (c_bot * c_bot - c_water * c_water) / (c_water * c_water);
        Ok(Self { c_water, c_bot, nu_sq_bar, h0, grad_h, alpha })
    }

    /// c = 1500, c_bot = 1700, h = 10 + 10⁻³x.
    pub fn shallow_slope(alpha: f64) -> Result<Self> {
        Self::new(1500.0, 1700.0, 10.0, [1e-3, 0.0], alpha)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.c_water, self.c_bot, self.h0, self.grad_h, alpha)
    }

    pub fn with_grad_h(&self, grad_h: [f64; 2]) -> Result<Self> {
        Self::new(self.c_water, self.c_bot, self.h0, grad_h, self.alpha)
    }

    pub fn depth(&self, r: [f64; 2]) -> Result<f64> {
        let depth = self.depth_unchecked(r);
        if depth > 0.0 {
            Ok(depth)
        } else {
            Err(Error::NonPositiveDepth { depth, x: r[0], y: r[1] })
        }
    }

    #[inline]
    pub(crate) fn depth_unchecked(&self, r: [f64; 2]) -> f64 {
        self.h0 + self.grad_h[0] * r[0] + self.grad_h[1] * r[1]
    }

    pub fn depth_gradient(&self) -> [f64; 2] {
        self.grad_h
    }

    pub fn is_flat(&self) -> bool {
        self.grad_h == [0.0, 0.0]
    }

    /// Squared refraction contrast ν²(z, r⃗): ν̄² in the water column, zero below.
    pub fn nu_squared(&self, z: f64, r: [f64; 2]) -> Result<f64> {
        if z < 0.0 {
            return Err(Error::NegativeDepthCoordinate(z));
        }
        let h = self.depth(r)?;
        Ok(if z <= h { self.nu_sq_bar } else { 0.0 })
    }
}
