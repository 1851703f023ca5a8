//! European call prices from characteristic functions of the de-trended
//! log-price `Y_T`, with `S_T = S₀ exp(rT + Y_T)`.
//!
//! All Fourier prices are `base + (S₀/2π) ∫_{-L}^{L} Re[N(z) e^{-izk} / (z(z-i))] dz`
//! with `k = ln(K e^{-rT} / S₀)` and a numerator `N` that depends on the
//! method.

use std::f64::consts::PI;

use num_complex::Complex64;
use roots::{find_root_brent, SearchError, SimpleConvergency};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::cf::CharacteristicFn;
use crate::closed_form::bs_cf;
use crate::error::{Error, Result};
use crate::quadrature::{composite_gauss_legendre, gauss_kronrod, midpoint};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadRule {
    /// Adaptive Gauss-Kronrod on `[0, L]`.
    #[default]
    Adaptive,
    /// Midpoint-shifted trapezoid on `[-L, L]`.
    Trapezoid,
    /// Composite 16-point Gauss-Legendre on `[-L, L]`.
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    /// Half-width of the truncated frequency domain.
    pub l: f64,
    pub n_points: usize,
    pub rule: QuadRule,
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            l: 32.0,
            n_points: 4096,
            rule: QuadRule::Adaptive,
            rel_tol: 1e-9,
        }
    }
}

impl QuadratureConfig {
    pub fn with_l(l: f64) -> Self {
        QuadratureConfig {
            l,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "integration half-width L must be positive, got {}",
                self.l
            )));
        }
        if self.rule != QuadRule::Adaptive && self.n_points < 16 {
            return Err(Error::ParameterDomain(format!(
                "fixed rules need at least 16 nodes, got {}",
                self.n_points
            )));
        }
        if self.rule == QuadRule::Adaptive && !(self.rel_tol > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "rel_tol must be positive, got {}",
                self.rel_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PricingDiagnostics {
    pub nodes: usize,
    /// Largest integrand modulus at `z = ±L`.
    pub tail_modulus: f64,
    /// `|1 - Φ_T(-i)|` of the priced characteristic function.
    pub martingale_defect: f64,
    pub error_estimate: f64,
    /// Largest integrand modulus seen at any node.
    pub peak_modulus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingResult {
    pub price: f64,
    /// `(S₀ - K e^{-rT})⁺`.
    pub intrinsic: f64,
    /// Value of the known part the integral corrects.
    pub base: f64,
    pub correction: f64,
    pub diagnostics: PricingDiagnostics,
}

/// Contract data shared by every pricer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contract {
    pub s0: f64,
    pub strike: f64,
    pub maturity: f64,
    pub rate: f64,
}

impl Contract {
    pub fn new(s0: f64, strike: f64, maturity: f64, rate: f64) -> Result<Self> {
        let c = Contract {
            s0,
            strike,
            maturity,
            rate,
        };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(Error::ParameterDomain(format!("spot must be positive, got {}", self.s0)));
        }
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "strike must be non-negative, got {}",
                self.strike
            )));
        }
        if !(self.maturity >= 0.0 && self.maturity.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "maturity must be non-negative, got {}",
                self.maturity
            )));
        }
        if !self.rate.is_finite() {
            return Err(Error::ParameterDomain(format!("rate must be finite, got {}", self.rate)));
        }
        Ok(())
    }

    pub fn discounted_strike(&self) -> f64 {
        self.strike * (-self.rate * self.maturity).exp()
    }

    pub fn intrinsic(&self) -> f64 {
        (self.s0 - self.discounted_strike()).max(0.0)
    }

    /// `ln(K e^{-rT} / S₀)`.
    pub fn log_moneyness(&self) -> f64 {
        (self.discounted_strike() / self.s0).ln()
    }
}

/// Black-Scholes call price.
pub fn bs_price(s0: f64, strike: f64, t: f64, r: f64, sigma: f64) -> Result<f64> {
    let c = Contract::new(s0, strike, t, r)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "volatility must be non-negative, got {sigma}"
        )));
    }
    let dk = c.discounted_strike();
    if t == 0.0 || sigma == 0.0 || strike == 0.0 {
        return Ok((s0 - dk).max(0.0));
    }
    let n = Normal::standard();
    let sd = sigma * t.sqrt();
    let d1 = ((s0 / dk).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    Ok(s0 * n.cdf(d1) - dk * n.cdf(d2))
}

/// `i N'(0)`, the limit of `N(z) / (z (z - i))` at `z = 0` when `N(0) = 0`.
fn removable_limit<N: Fn(Complex64) -> Result<Complex64>>(numerator: &N) -> Result<Complex64> {
    let h = 1e-5;
    let d = (numerator(Complex64::new(h, 0.0))? - numerator(Complex64::new(-h, 0.0))?) / (2.0 * h);
    Ok(I * d)
}

/// `(S₀/2π) ∫_{-L}^{L} Re[N(z) e^{-izk} / (z(z-i))] dz`. The real part of the
/// integrand is even for numerators built from characteristic functions, so
/// the adaptive rule works on `[0, L]`.
fn fourier_integral<N>(numerator: N, s0: f64, k: f64, quad: &QuadratureConfig) -> Result<(f64, PricingDiagnostics)>
where
    N: Fn(Complex64) -> Result<Complex64>,
{
    quad.validate()?;
    let peak = std::cell::Cell::new(0.0f64);
    let integrand = |z: f64| -> Result<f64> {
        let v = if z.abs() < 1e-12 {
            removable_limit(&numerator)?
        } else {
            let zc = Complex64::new(z, 0.0);
            numerator(zc)? * (-I * zc * k).exp() / (zc * (zc - I))
        };
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite(format!("pricing integrand at z = {z}")));
        }
        peak.set(peak.get().max(v.norm()));
        Ok(v.re)
    };
    let l = quad.l;
    let out = match quad.rule {
        QuadRule::Adaptive => {
            let mut o = gauss_kronrod(&integrand, 0.0, l, quad.rel_tol, 1e-13, 4000)?;
            o.value *= 2.0;
            o.error_estimate *= 2.0;
            o
        }
        QuadRule::Trapezoid => midpoint(&integrand, -l, l, quad.n_points)?,
        QuadRule::GaussLegendre => composite_gauss_legendre(&integrand, -l, l, quad.n_points, 16)?,
    };
    let tail = [l, -l]
        .iter()
        .map(|&z| {
            let zc = Complex64::new(z, 0.0);
            numerator(zc).map(|n| (n / (zc * (zc - I))).norm())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let diagnostics = PricingDiagnostics {
        nodes: out.nodes,
        tail_modulus: tail,
        martingale_defect: 0.0,
        error_estimate: s0 / (2.0 * PI) * out.error_estimate,
        peak_modulus: peak.get(),
    };
    Ok((s0 / (2.0 * PI) * out.value, diagnostics))
}

fn martingale_defect<C: CharacteristicFn + ?Sized>(cf: &C, t: f64) -> Result<f64> {
    Ok((ONE - cf.evaluate(t, Complex64::new(0.0, -1.0))?).norm())
}

/// Carr-Madan: `(S₀ - K e^{-rT})⁺ + (S₀/2π) ∫ (1 - Φ_T(z-i)) / (z(z-i)) e^{-izk} dz`.
pub fn carr_madan_price<C: CharacteristicFn + ?Sized>(
    cf: &C,
    s0: f64,
    strike: f64,
    t: f64,
    r: f64,
    quad: &QuadratureConfig,
) -> Result<PricingResult> {
    let c = Contract::new(s0, strike, t, r)?;
    let intrinsic = c.intrinsic();
    if t == 0.0 {
        return Ok(trivial(intrinsic, intrinsic));
    }
    let (correction, mut diagnostics) = fourier_integral(
        |z| Ok(ONE - cf.evaluate(t, z - I)?),
        s0,
        c.log_moneyness(),
        quad,
    )?;
    diagnostics.martingale_defect = martingale_defect(cf, t)?;
    Ok(PricingResult {
        price: intrinsic + correction,
        intrinsic,
        base: intrinsic,
        correction,
        diagnostics,
    })
}

/// Black-Scholes control variate: `BS(σ_B) + (S₀/2π) ∫ (Φ^BS_T(z-i) - Φ_T(z-i)) / (z(z-i)) e^{-izk} dz`.
pub fn variance_reduced_price<C: CharacteristicFn + ?Sized>(
    cf: &C,
    sigma_b: f64,
    s0: f64,
    strike: f64,
    t: f64,
    r: f64,
    quad: &QuadratureConfig,
) -> Result<PricingResult> {
    let c = Contract::new(s0, strike, t, r)?;
    let intrinsic = c.intrinsic();
    let base = bs_price(s0, strike, t, r, sigma_b)?;
    if t == 0.0 {
        return Ok(trivial(intrinsic, intrinsic));
    }
    let (correction, mut diagnostics) = fourier_integral(
        |z| {
            let w = z - I;
            Ok(bs_cf(sigma_b, t, w) - cf.evaluate(t, w)?)
        },
        s0,
        c.log_moneyness(),
        quad,
    )?;
    diagnostics.martingale_defect = martingale_defect(cf, t)?;
    Ok(PricingResult {
        price: base + correction,
        intrinsic,
        base,
        correction,
        diagnostics,
    })
}

/// Known-model control variate: the Carr-Madan price of `cf_known` on
/// `quad_known` plus `(S₀/2π) ∫ (Φ^known - Φ^appr)(z-i) / (z(z-i)) e^{-izk} dz`
/// over `quad_appr`.
#[allow(clippy::too_many_arguments)]
pub fn control_variate_price<A, B>(
    cf_known: &A,
    cf_appr: &B,
    s0: f64,
    strike: f64,
    t: f64,
    r: f64,
    quad_known: &QuadratureConfig,
    quad_appr: &QuadratureConfig,
) -> Result<PricingResult>
where
    A: CharacteristicFn + ?Sized,
    B: CharacteristicFn + ?Sized,
{
    let known = carr_madan_price(cf_known, s0, strike, t, r, quad_known)?;
    if t == 0.0 {
        return Ok(known);
    }
    let c = Contract::new(s0, strike, t, r)?;
    let (correction, mut diagnostics) = fourier_integral(
        |z| {
            let w = z - I;
            Ok(cf_known.evaluate(t, w)? - cf_appr.evaluate(t, w)?)
        },
        s0,
        c.log_moneyness(),
        quad_appr,
    )?;
    diagnostics.nodes += known.diagnostics.nodes;
    diagnostics.martingale_defect = martingale_defect(cf_appr, t)?;
    Ok(PricingResult {
        price: known.price + correction,
        intrinsic: known.intrinsic,
        base: known.price,
        correction,
        diagnostics,
    })
}

fn trivial(price: f64, intrinsic: f64) -> PricingResult {
    PricingResult {
        price,
        intrinsic,
        base: price,
        correction: 0.0,
        diagnostics: PricingDiagnostics::default(),
    }
}

/// Black-Scholes volatility reproducing `price`, searched on `[1e-6, 5]`.
pub fn implied_vol(price: f64, s0: f64, strike: f64, t: f64, r: f64) -> Result<f64> {
    let c = Contract::new(s0, strike, t, r)?;
    let lower = c.intrinsic();
    if !(price > lower && price < s0) || t == 0.0 {
        return Err(Error::Bound {
            price,
            lower,
            upper: s0,
        });
    }
    let (lo, hi) = (1e-6, 5.0);
    let f = |sigma: f64| bs_price(s0, strike, t, r, sigma).map_or(f64::NAN, |p| p - price);
    let mut conv = SimpleConvergency {
        eps: 1e-13,
        max_iter: 200,
    };
    match find_root_brent(lo, hi, f, &mut conv) {
        Ok(sigma) => {
            let repriced = bs_price(s0, strike, t, r, sigma)?;
            if (repriced - price).abs() > 1e-10 * price.max(1.0) {
                return Err(Error::NoConvergence(200));
            }
            Ok(sigma)
        }
        Err(SearchError::NoBracketing) => Err(Error::Bound {
            price,
            lower: bs_price(s0, strike, t, r, lo)?,
            upper: bs_price(s0, strike, t, r, hi)?,
        }),
        Err(_) => Err(Error::NoConvergence(200)),
    }
}
