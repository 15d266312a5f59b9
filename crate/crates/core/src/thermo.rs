//! Ideal-gas conversions between primitive variables and (S, B).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasModel {
    pub gamma: f64,
    pub beta: f64,
}

impl GasModel {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma > 1.0) || !(beta >= 0.0) || !gamma.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidModel { gamma, beta });
        }
        Ok(GasModel { gamma, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GasState {
    pub rho: f64,
    pub u1: f64,
    pub u2: f64,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharState {
    pub u1: f64,
    pub u2: f64,
    pub s: f64,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Acoustics {
    pub c: f64,
    pub mach: f64,
    pub m1: f64,
    pub m2: f64,
}

impl GasState {
    pub fn check(&self) -> Result<()> {
        if !(self.rho > 0.0) || !(self.p > 0.0) {
            return Err(Error::InvalidState { rho: self.rho, p: self.p });
        }
        Ok(())
    }

    pub fn speed2(&self) -> f64 {
        self.u1 * self.u1 + self.u2 * self.u2
    }
}

impl CharState {
    pub fn speed2(&self) -> f64 {
        self.u1 * self.u1 + self.u2 * self.u2
    }

    /// B - |u|^2/2, i.e. the enthalpy.
    pub fn enthalpy(&self) -> f64 {
        self.b - 0.5 * self.speed2()
    }
}

pub fn entropy(rho: f64, p: f64, gamma: f64) -> f64 {
    p.ln() - gamma * rho.ln()
}

pub fn bernoulli(rho: f64, speed2: f64, p: f64, gamma: f64) -> f64 {
    0.5 * speed2 + gamma * p / ((gamma - 1.0) * rho)
}

pub fn to_char(s: &GasState, m: &GasModel) -> Result<CharState> {
    s.check()?;
    Ok(CharState {
        u1: s.u1,
        u2: s.u2,
        s: entropy(s.rho, s.p, m.gamma),
        b: bernoulli(s.rho, s.speed2(), s.p, m.gamma),
    })
}

/// Density and pressure from (S, enthalpy).
pub fn rho_p_from_entropy_enthalpy(s: f64, h: f64, b: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(h > 0.0) || h < 1e-14 * b.abs() {
        return Err(Error::Vacuum { h });
    }
    let ln_rho = (((gamma - 1.0) / gamma).ln() - s + h.ln()) / (gamma - 1.0);
    let rho = ln_rho.exp();
    let p = (s + gamma * ln_rho).exp();
    Ok((rho, p))
}

pub fn from_char(c: &CharState, m: &GasModel) -> Result<GasState> {
    let (rho, p) = rho_p_from_entropy_enthalpy(c.s, c.enthalpy(), c.b, m.gamma)?;
    Ok(GasState { rho, u1: c.u1, u2: c.u2, p })
}

pub fn mach_and_sound(s: &GasState, m: &GasModel) -> Result<Acoustics> {
    s.check()?;
    let c = (m.gamma * s.p / s.rho).sqrt();
    Ok(Acoustics { c, mach: s.speed2().sqrt() / c, m1: s.u1 / c, m2: s.u2 / c })
}
