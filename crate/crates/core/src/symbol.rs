//! Affine processes described through the derivatives of their generator's
//! symbol.
//!
//! For `f_u(x) = exp(i u·x)` the symbol `A f_u(x) / f_u(x)` of an affine
//! generator is affine in `x`. Its scaled derivatives
//!
//! ```text
//! b_β(x, u) = i^{-|β|} ∂_u^β (A f_u(x) / f_u(x)) = b⁰_β(u) + Σ_{|κ|=1} b¹_{β,κ}(u) x^κ
//! ```
//!
//! are the only model input the series expansion of the characteristic
//! function needs. They are supplied here as exact closed forms; the
//! frequency `u` may be complex so that pricing can evaluate along `z - i`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::multi_index::{factorial, MultiIndex};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `i^{-n} = (-i)^n`.
fn inv_i_pow(n: usize) -> Complex64 {
    match n % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}

/// Parameters of a log-Heston factor
///
/// ```text
/// dX¹ = -½ α² X² dt + α √X² dW
/// dX² = κ (θ - X²) dt + σ √X² (ρ dW + √(1-ρ²) dW⊥)
/// ```
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonParams {
    pub alpha: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub theta: f64,
    pub rho: f64,
    /// Initial variance `X²(0)`.
    pub v0: f64,
}

impl HestonParams {
    /// Parameters with the initial variance set to the long-run mean `θ`.
    pub fn new(alpha: f64, kappa: f64, sigma: f64, theta: f64, rho: f64) -> Result<Self> {
        Self::with_v0(alpha, kappa, sigma, theta, rho, theta)
    }

    pub fn with_v0(
        alpha: f64,
        kappa: f64,
        sigma: f64,
        theta: f64,
        rho: f64,
        v0: f64,
    ) -> Result<Self> {
        let p = HestonParams {
            alpha,
            kappa,
            sigma,
            theta,
            rho,
            v0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("kappa", self.kappa),
            ("sigma", self.sigma),
            ("theta", self.theta),
            ("v0", self.v0),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "heston {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::ParameterDomain(format!(
                "heston rho must lie in [-1, 1], got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// Feller ratio `2κθ/σ²`.
    pub fn feller_ratio(&self) -> f64 {
        2.0 * self.kappa * self.theta / (self.sigma * self.sigma)
    }
}

/// Derivatives of `ψ(ξ) = ∫ (e^{iξy} - 1) μ(dy)` for the exponential law
/// `μ(y) = 1_{y<0} p e^{py}`: `ψ(ξ) = -iξ/(p+iξ)` and
/// `ψ⁽ⁿ⁾(ξ) = p n! (-i)ⁿ (p+iξ)^{-(n+1)}` for `n ≥ 1`.
pub fn jump_cumulant_exp_neg(p: f64, order: usize, xi: Complex64) -> Result<Complex64> {
    if !(p > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "exponential jump rate must be positive, got {p}"
        )));
    }
    let base = p + I * xi;
    if base.norm() == 0.0 {
        return Err(Error::Singularity(format!(
            "exponential jump cumulant has a pole at xi = {xi}"
        )));
    }
    if order == 0 {
        return Ok(-I * xi / base);
    }
    Ok(p * factorial(order) * inv_i_pow(order) * base.powi(-(order as i32 + 1)))
}

/// Derivatives of `ψ(ξ) = exp(icξ - ½ν²ξ²) - 1` for Gaussian jumps `N(c, ν²)`.
///
/// `ψ⁽ⁿ⁾ = e^{f(ξ)} Qₙ(w)` with `w = f'(ξ) = ic - ν²ξ` and
/// `Qₙ(w) = Σ_k n!/(k!(n-2k)!) (-ν²/2)^k w^{n-2k}`.
pub fn jump_cumulant_gaussian(mean: f64, std: f64, order: usize, xi: Complex64) -> Result<Complex64> {
    if !(std >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "gaussian jump std must be non-negative, got {std}"
        )));
    }
    let nu2 = std * std;
    let expo = (I * mean * xi - 0.5 * nu2 * xi * xi).exp();
    if order == 0 {
        return Ok(expo - 1.0);
    }
    let w = I * mean - nu2 * xi;
    let mut q = Complex64::new(0.0, 0.0);
    for k in 0..=order / 2 {
        let coeff = factorial(order) / (factorial(k) * factorial(order - 2 * k));
        q += coeff * (-0.5 * nu2).powi(k as i32) * w.powi((order - 2 * k) as i32);
    }
    let v = expo * q;
    if !(v.re.is_finite() && v.im.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gaussian cumulant derivative of order {order} at {xi}"
        )));
    }
    Ok(v)
}

/// A user-supplied jump cumulant together with its derivative family.
#[derive(Clone)]
pub struct CustomCumulant {
    derivative: Arc<dyn Fn(usize, Complex64) -> Complex64 + Send + Sync>,
    max_order: Option<usize>,
}

impl CustomCumulant {
    /// `derivative(n, ξ)` must return `ψ⁽ⁿ⁾(ξ)` for every `n ≤ max_order`
    /// (all `n` when `max_order` is `None`).
    pub fn new(
        derivative: impl Fn(usize, Complex64) -> Complex64 + Send + Sync + 'static,
        max_order: Option<usize>,
    ) -> Self {
        CustomCumulant {
            derivative: Arc::new(derivative),
            max_order,
        }
    }
}

impl fmt::Debug for CustomCumulant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomCumulant")
            .field("max_order", &self.max_order)
            .finish_non_exhaustive()
    }
}

/// Law of the jump sizes in the log-price.
#[derive(Debug, Clone)]
pub enum JumpLaw {
    /// No jumps; `ψ ≡ 0`.
    None,
    /// Negative exponential sizes, density `1_{y<0} p e^{py}`.
    ExpNegative { rate: f64 },
    /// Gaussian sizes `N(mean, std²)`.
    Gaussian { mean: f64, std: f64 },
    Custom(CustomCumulant),
}

impl PartialEq for JumpLaw {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (JumpLaw::None, JumpLaw::None) => true,
            (JumpLaw::ExpNegative { rate: a }, JumpLaw::ExpNegative { rate: b }) => a == b,
            (
                JumpLaw::Gaussian { mean: m1, std: s1 },
                JumpLaw::Gaussian { mean: m2, std: s2 },
            ) => m1 == m2 && s1 == s2,
            (JumpLaw::Custom(a), JumpLaw::Custom(b)) => Arc::ptr_eq(&a.derivative, &b.derivative),
            _ => false,
        }
    }
}

impl JumpLaw {
    /// `ψ⁽ⁿ⁾(ξ)`.
    pub fn cumulant(&self, order: usize, xi: Complex64) -> Result<Complex64> {
        match self {
            JumpLaw::None => Ok(Complex64::new(0.0, 0.0)),
            JumpLaw::ExpNegative { rate } => jump_cumulant_exp_neg(*rate, order, xi),
            JumpLaw::Gaussian { mean, std } => jump_cumulant_gaussian(*mean, *std, order, xi),
            JumpLaw::Custom(c) => match c.max_order {
                Some(max) if order > max => Err(Error::Capability(format!(
                    "jump cumulant supplies derivatives up to order {max}, order {order} requested"
                ))),
                _ => Ok((c.derivative)(order, xi)),
            },
        }
    }

    pub fn max_order(&self) -> Option<usize> {
        match self {
            JumpLaw::Custom(c) => c.max_order,
            _ => None,
        }
    }

    /// The compensator `m + a = ψ(-i) = ∫ (e^y - 1) μ(dy)`.
    pub fn compensator(&self) -> Result<f64> {
        match self {
            JumpLaw::ExpNegative { rate } if *rate <= 1.0 => Err(Error::Moment(format!(
                "exponential jumps with rate {rate} <= 1 have no exponential moment"
            ))),
            _ => Ok(self.cumulant(0, Complex64::new(0.0, -1.0))?.re),
        }
    }

    /// Mean jump size `m = -i ψ'(0)`.
    pub fn mean(&self) -> Result<f64> {
        Ok((-I * self.cumulant(1, Complex64::new(0.0, 0.0))?).re)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            JumpLaw::ExpNegative { rate } if !(*rate > 0.0) => Err(Error::ParameterDomain(
                format!("exponential jump rate must be positive, got {rate}"),
            )),
            JumpLaw::Gaussian { std, mean } if !(*std >= 0.0) || !mean.is_finite() => Err(
                Error::ParameterDomain(format!("invalid gaussian jump law N({mean}, {std}²)")),
            ),
            _ => Ok(()),
        }
    }
}

/// Jump part of the HSDJ model: jumps of law `jump0` at constant rate
/// `lambda0` plus jumps of law `jump1` at rate `lambda1 · X²`.
#[derive(Debug, Clone, PartialEq)]
pub struct HsdjJumpParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub jump0: JumpLaw,
    pub jump1: JumpLaw,
}

impl HsdjJumpParams {
    pub fn none() -> Self {
        HsdjJumpParams {
            lambda0: 0.0,
            lambda1: 0.0,
            jump0: JumpLaw::None,
            jump1: JumpLaw::None,
        }
    }

    /// Only state-dependent jumps of law `jump1`.
    pub fn state_dependent(lambda1: f64, jump1: JumpLaw) -> Self {
        HsdjJumpParams {
            lambda0: 0.0,
            lambda1,
            jump0: JumpLaw::None,
            jump1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda0", self.lambda0), ("lambda1", self.lambda1)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        for (lambda, law) in [(self.lambda0, &self.jump0), (self.lambda1, &self.jump1)] {
            law.validate()?;
            if lambda > 0.0 {
                // a = ∫ (e^y - y - 1) μ(dy) ≥ 0
                let a = law.compensator()? - law.mean()?;
                if a < -1e-12 {
                    return Err(Error::ParameterDomain(format!(
                        "jump law has negative convexity term a = {a}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `m₀ + a₀ = ψ₀(-i)`, zero when the constant-rate jumps are off.
    pub fn m0a0(&self) -> Result<f64> {
        if self.lambda0 == 0.0 {
            return Ok(0.0);
        }
        self.jump0.compensator()
    }

    /// `m₁ + a₁ = ψ₁(-i)`, zero when the state-dependent jumps are off.
    pub fn m1a1(&self) -> Result<f64> {
        if self.lambda1 == 0.0 {
            return Ok(0.0);
        }
        self.jump1.compensator()
    }
}

/// An affine process given by its symbol derivatives `b⁰_β(u)` and
/// `b¹_{β,e_i}(u)`.
pub trait AffineSymbol: Send + Sync {
    /// State dimension `d`.
    fn dim(&self) -> usize;

    /// `b⁰_β(u)`.
    fn b0(&self, beta: &MultiIndex, u: &[Complex64]) -> Result<Complex64>;

    /// `b¹_{β,e_axis}(u)`.
    fn b1(&self, beta: &MultiIndex, axis: usize, u: &[Complex64]) -> Result<Complex64>;

    /// Largest `|β|` with a possibly non-zero entry; `None` if unbounded.
    fn max_nonzero_order(&self) -> Option<usize>;
}

impl<T: AffineSymbol + ?Sized> AffineSymbol for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn b0(&self, beta: &MultiIndex, u: &[Complex64]) -> Result<Complex64> {
        (**self).b0(beta, u)
    }
    fn b1(&self, beta: &MultiIndex, axis: usize, u: &[Complex64]) -> Result<Complex64> {
        (**self).b1(beta, axis, u)
    }
    fn max_nonzero_order(&self) -> Option<usize> {
        (**self).max_nonzero_order()
    }
}

fn check_dims(beta: &MultiIndex, u: &[Complex64], d: usize) -> Result<()> {
    if beta.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: beta.dim(),
        });
    }
    if u.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.len(),
        });
    }
    Ok(())
}

/// Symbol derivatives of the log-Heston factor (state `(X¹, X²)`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HestonSymbol {
    pub params: HestonParams,
}

pub fn heston_symbols(params: HestonParams) -> Result<HestonSymbol> {
    params.validate()?;
    Ok(HestonSymbol { params })
}

impl AffineSymbol for HestonSymbol {
    fn dim(&self) -> usize {
        2
    }

    fn b0(&self, beta: &MultiIndex, u: &[Complex64]) -> Result<Complex64> {
        check_dims(beta, u, 2)?;
        let p = &self.params;
        Ok(match beta.entries() {
            [0, 0] => p.kappa * p.theta * I * u[1],
            [0, 1] => Complex64::new(p.kappa * p.theta, 0.0),
            _ => Complex64::new(0.0, 0.0),
        })
    }

    fn b1(&self, beta: &MultiIndex, axis: usize, u: &[Complex64]) -> Result<Complex64> {
        check_dims(beta, u, 2)?;
        if axis != 1 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let p = &self.params;
        let (a2, asr, s2) = (
            p.alpha * p.alpha,
            p.alpha * p.sigma * p.rho,
            p.sigma * p.sigma,
        );
        let (u1, u2) = (u[0], u[1]);
        Ok(match beta.entries() {
            [0, 0] => {
                -0.5 * a2 * I * u1 - p.kappa * I * u2 - 0.5 * a2 * u1 * u1 - asr * u1 * u2
                    - 0.5 * s2 * u2 * u2
            }
            [1, 0] => -0.5 * a2 + a2 * u1 * I + asr * u2 * I,
            [0, 1] => -p.kappa + asr * u1 * I + s2 * u2 * I,
            [2, 0] => Complex64::new(a2, 0.0),
            [0, 2] => Complex64::new(s2, 0.0),
            [1, 1] => Complex64::new(asr, 0.0),
            _ => Complex64::new(0.0, 0.0),
        })
    }

    fn max_nonzero_order(&self) -> Option<usize> {
        Some(2)
    }
}

/// Symbol derivatives of the Heston model with state-dependent jumps in the
/// first component.
#[derive(Debug, Clone, PartialEq)]
pub struct HsdjSymbol {
    heston: HestonSymbol,
    jumps: HsdjJumpParams,
    m0a0: f64,
    m1a1: f64,
}

pub fn hsdj_symbols(heston: HestonParams, jumps: HsdjJumpParams) -> Result<HsdjSymbol> {
    heston.validate()?;
    jumps.validate()?;
    let m0a0 = jumps.m0a0()?;
    let m1a1 = jumps.m1a1()?;
    Ok(HsdjSymbol {
        heston: HestonSymbol { params: heston },
        jumps,
        m0a0,
        m1a1,
    })
}

impl HsdjSymbol {
    pub fn heston(&self) -> &HestonParams {
        &self.heston.params
    }

    pub fn jumps(&self) -> &HsdjJumpParams {
        &self.jumps
    }

    /// Jump contribution to `b_{(n,0)}` for one intensity component:
    /// `λ(ψ(u₁) - (m+a) i u₁)` at `n = 0`, `λ(-(m+a) - i ψ'(u₁))` at `n = 1`
    /// and `λ i^{-n} ψ⁽ⁿ⁾(u₁)` beyond.
    fn jump_term(
        lambda: f64,
        law: &JumpLaw,
        compensator: f64,
        n: usize,
        u1: Complex64,
    ) -> Result<Complex64> {
        let d = law.cumulant(n, u1)?;
        Ok(match n {
            0 => lambda * (d - compensator * I * u1),
            1 => lambda * (-compensator - I * d),
            _ => lambda * inv_i_pow(n) * d,
        })
    }
}

impl AffineSymbol for HsdjSymbol {
    fn dim(&self) -> usize {
        2
    }

    fn b0(&self, beta: &MultiIndex, u: &[Complex64]) -> Result<Complex64> {
        let base = self.heston.b0(beta, u)?;
        if self.jumps.lambda0 == 0.0 || beta.entries()[1] != 0 {
            return Ok(base);
        }
        let n = beta.entries()[0];
        Ok(base + Self::jump_term(self.jumps.lambda0, &self.jumps.jump0, self.m0a0, n, u[0])?)
    }

    fn b1(&self, beta: &MultiIndex, axis: usize, u: &[Complex64]) -> Result<Complex64> {
        let base = self.heston.b1(beta, axis, u)?;
        if axis != 1 || self.jumps.lambda1 == 0.0 || beta.entries()[1] != 0 {
            return Ok(base);
        }
        let n = beta.entries()[0];
        Ok(base + Self::jump_term(self.jumps.lambda1, &self.jumps.jump1, self.m1a1, n, u[0])?)
    }

    fn max_nonzero_order(&self) -> Option<usize> {
        let active = [
            (self.jumps.lambda0, &self.jumps.jump0),
            (self.jumps.lambda1, &self.jumps.jump1),
        ]
        .into_iter()
        .filter(|(l, law)| *l > 0.0 && !matches!(law, JumpLaw::None))
        .count();
        if active == 0 {
            Some(2)
        } else {
            None
        }
    }
}

type B0Fn = dyn Fn(&MultiIndex, &[Complex64]) -> Complex64 + Send + Sync;
type B1Fn = dyn Fn(&MultiIndex, usize, &[Complex64]) -> Complex64 + Send + Sync;

/// Symbol derivatives given directly as closures.
#[derive(Clone)]
pub struct FnSymbol {
    dim: usize,
    b0: Arc<B0Fn>,
    b1: Arc<B1Fn>,
    max_nonzero_order: Option<usize>,
}

impl FnSymbol {
    pub fn new(
        dim: usize,
        b0: impl Fn(&MultiIndex, &[Complex64]) -> Complex64 + Send + Sync + 'static,
        b1: impl Fn(&MultiIndex, usize, &[Complex64]) -> Complex64 + Send + Sync + 'static,
        max_nonzero_order: Option<usize>,
    ) -> Self {
        FnSymbol {
            dim,
            b0: Arc::new(b0),
            b1: Arc::new(b1),
            max_nonzero_order,
        }
    }
}

impl fmt::Debug for FnSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSymbol")
            .field("dim", &self.dim)
            .field("max_nonzero_order", &self.max_nonzero_order)
            .finish_non_exhaustive()
    }
}

impl AffineSymbol for FnSymbol {
    fn dim(&self) -> usize {
        self.dim
    }
    fn b0(&self, beta: &MultiIndex, u: &[Complex64]) -> Result<Complex64> {
        check_dims(beta, u, self.dim)?;
        Ok((self.b0)(beta, u))
    }
    fn b1(&self, beta: &MultiIndex, axis: usize, u: &[Complex64]) -> Result<Complex64> {
        check_dims(beta, u, self.dim)?;
        Ok((self.b1)(beta, axis, u))
    }
    fn max_nonzero_order(&self) -> Option<usize> {
        self.max_nonzero_order
    }
}

/// `A f_u(x) / f_u(x) = b⁰_0(u) + Σ_i b¹_{0,e_i}(u) x_i`.
pub fn symbol<S: AffineSymbol + ?Sized>(spec: &S, x: &[f64], u: &[Complex64]) -> Result<Complex64> {
    let d = spec.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let zero = MultiIndex::zeros(d);
    let mut acc = spec.b0(&zero, u)?;
    for (axis, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            acc += spec.b1(&zero, axis, u)? * xi;
        }
    }
    Ok(acc)
}

pub fn real_frequency(u: &[f64]) -> Vec<Complex64> {
    u.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}
