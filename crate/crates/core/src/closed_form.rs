//! Closed-form characteristic functions: Heston, Merton jump diffusion,
//! Black-Scholes and Heston with state-independent jumps.

use num_complex::Complex64;

use crate::cf::CharacteristicFn;
use crate::error::{Error, Result};
use crate::symbol::{HestonParams, JumpLaw};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "time must be non-negative, got {t}"
        )));
    }
    Ok(())
}

fn finite(v: Complex64, what: &str) -> Result<Complex64> {
    if v.re.is_finite() && v.im.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// `E[exp(i z X¹_t)]` for the log-Heston factor started at `(0, v0)`.
///
/// With `a = κ - izασρ` and `d = √(a² + α²σ²(iz + z²))` (principal root) the
/// value is `exp(A + B v0)`. The representation in `G = (a-d)/(a+d)` is used
/// while `|G| ≤ 1`; otherwise the reciprocal `g = (a+d)/(a-d)` form, which
/// covers the point `a + d = 0`.
pub fn heston_cf(params: &HestonParams, v0: f64, t: f64, z: Complex64) -> Result<Complex64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(ONE);
    }
    let HestonParams {
        alpha,
        kappa,
        sigma,
        theta,
        rho,
        ..
    } = *params;
    let s2 = sigma * sigma;
    let a = kappa - I * z * alpha * sigma * rho;
    let d = (a * a + alpha * alpha * s2 * (I * z + z * z)).sqrt();
    let (am, ap) = (a - d, a + d);
    let scale = 1e-13 * (1.0 + a.norm());
    if am.norm() <= scale && ap.norm() <= scale {
        return Err(Error::Singularity(format!(
            "heston characteristic function with a = d = 0 at z = {z}"
        )));
    }
    let e = (-d * t).exp();
    let (big_a, big_b) = if am.norm() <= ap.norm() {
        let g = am / ap;
        let log_term = (ONE - g * e).ln() - (ONE - g).ln();
        (
            theta * kappa / s2 * (am * t - 2.0 * log_term),
            am / s2 * (ONE - e) / (ONE - g * e),
        )
    } else {
        let g = ap / am;
        let log_term = ((e - g) / (ONE - g)).ln();
        (
            theta * kappa / s2 * (am * t - 2.0 * log_term),
            ap / s2 * (e - ONE) / (e - g),
        )
    };
    finite((big_a + big_b * v0).exp(), "heston characteristic function")
}

/// Black-Scholes log-return characteristic function
/// `exp(-(z² + iz) σ_B² t / 2)`.
pub fn bs_cf(sigma_b: f64, t: f64, z: Complex64) -> Complex64 {
    (-(z * z + I * z) * sigma_b * sigma_b * t / 2.0).exp()
}

/// Jump diffusion `γt + σW_t + Σ_{l ≤ N_t} U_l` with Poisson rate `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MertonParams {
    pub sigma: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub jump: JumpLaw,
}

impl MertonParams {
    /// Parameters with the risk-neutral drift.
    pub fn risk_neutral(sigma: f64, lambda: f64, jump: JumpLaw) -> Result<Self> {
        let gamma = merton_risk_neutral_drift(sigma, lambda, &jump)?;
        Ok(MertonParams {
            sigma,
            gamma,
            lambda,
            jump,
        })
    }
}

/// `exp(izγt - ½z²σ²t + λt(φ_U(z) - 1))` where `φ_U - 1` is the jump cumulant.
pub fn merton_cf(params: &MertonParams, t: f64, z: Complex64) -> Result<Complex64> {
    check_time(t)?;
    let jumps = if params.lambda == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        params.lambda * t * params.jump.cumulant(0, z)?
    };
    let log = I * z * params.gamma * t - 0.5 * z * z * params.sigma * params.sigma * t + jumps;
    finite(log.exp(), "merton characteristic function")
}

/// `γ = -σ²/2 - λ ∫ (e^y - 1) p(dy)`.
pub fn merton_risk_neutral_drift(sigma: f64, lambda: f64, jump: &JumpLaw) -> Result<f64> {
    let comp = if lambda == 0.0 {
        0.0
    } else {
        jump.compensator()?
    };
    if !comp.is_finite() {
        return Err(Error::Moment(
            "jump law has no finite exponential moment".to_string(),
        ));
    }
    Ok(-0.5 * sigma * sigma - lambda * comp)
}

/// Heston log-price with additional jumps of law `law` at constant rate
/// `lambda0`, compensated so that `exp(X¹)` stays a martingale:
/// `exp(ln p̂(t, v0, z) - tλ₀ψ₀(-i) iz + tλ₀ψ₀(z))`.
pub fn heston_state_independent_jump_cf(
    params: &HestonParams,
    v0: f64,
    lambda0: f64,
    law: &JumpLaw,
    t: f64,
    z: Complex64,
) -> Result<Complex64> {
    let base = heston_cf(params, v0, t, z)?;
    if lambda0 == 0.0 {
        return Ok(base);
    }
    let comp = law.compensator()?;
    let factor = (t * lambda0 * (law.cumulant(0, z)? - comp * I * z)).exp();
    finite(base * factor, "heston jump characteristic function")
}

/// Closed-form Heston factor as a [`CharacteristicFn`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonCf {
    pub params: HestonParams,
    pub v0: f64,
}

impl HestonCf {
    pub fn new(params: HestonParams) -> Self {
        HestonCf {
            params,
            v0: params.v0,
        }
    }
}

impl CharacteristicFn for HestonCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        heston_cf(&self.params, self.v0, t, z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HestonJumpCf {
    pub params: HestonParams,
    pub v0: f64,
    pub lambda0: f64,
    pub law: JumpLaw,
}

impl CharacteristicFn for HestonJumpCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        heston_state_independent_jump_cf(&self.params, self.v0, self.lambda0, &self.law, t, z)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MertonCf {
    pub params: MertonParams,
}

impl CharacteristicFn for MertonCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        merton_cf(&self.params, t, z)
    }
}

/// Martingale-normalized Black-Scholes log-return, `-σ²t/2 + σW_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlackScholesCf {
    pub sigma: f64,
}

impl CharacteristicFn for BlackScholesCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        check_time(t)?;
        Ok(bs_cf(self.sigma, t, z))
    }
    fn admissible_strip(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// Driftless Brownian motion `σW_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianCf {
    pub sigma: f64,
}

impl CharacteristicFn for BrownianCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        check_time(t)?;
        Ok((-0.5 * z * z * self.sigma * self.sigma * t).exp())
    }
    fn admissible_strip(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}
