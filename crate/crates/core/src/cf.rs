//! The characteristic-function abstraction shared by the closed forms, the
//! expansion, Monte Carlo estimates and the composed stock model.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;

/// `(t, z) ↦ E[e^{i z Y_t}]` for a scalar log-price type quantity.
pub trait CharacteristicFn: Send + Sync {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64>;

    /// Interval of `Im z` on which `evaluate` is defined. Pricing needs it to
    /// contain `[-1, 0]`.
    fn admissible_strip(&self) -> (f64, f64) {
        (-1.0, 0.0)
    }
}

impl<T: CharacteristicFn + ?Sized> CharacteristicFn for Arc<T> {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        (**self).evaluate(t, z)
    }
    fn admissible_strip(&self) -> (f64, f64) {
        (**self).admissible_strip()
    }
}

impl<T: CharacteristicFn + ?Sized> CharacteristicFn for &T {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        (**self).evaluate(t, z)
    }
    fn admissible_strip(&self) -> (f64, f64) {
        (**self).admissible_strip()
    }
}

/// The characteristic function of the constant zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct UnitCf;

impl CharacteristicFn for UnitCf {
    fn evaluate(&self, _t: f64, _z: Complex64) -> Result<Complex64> {
        Ok(Complex64::new(1.0, 0.0))
    }
    fn admissible_strip(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

/// A characteristic function given by a closure.
#[derive(Clone)]
pub struct FnCf {
    f: Arc<dyn Fn(f64, Complex64) -> Result<Complex64> + Send + Sync>,
    strip: (f64, f64),
}

impl FnCf {
    pub fn new(f: impl Fn(f64, Complex64) -> Result<Complex64> + Send + Sync + 'static) -> Self {
        FnCf {
            f: Arc::new(f),
            strip: (-1.0, 0.0),
        }
    }

    pub fn with_strip(mut self, lo: f64, hi: f64) -> Self {
        self.strip = (lo, hi);
        self
    }
}

impl fmt::Debug for FnCf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnCf").field("strip", &self.strip).finish_non_exhaustive()
    }
}

impl CharacteristicFn for FnCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        (self.f)(t, z)
    }
    fn admissible_strip(&self) -> (f64, f64) {
        self.strip
    }
}

/// `(t, u) ↦ E[exp(i u·X_t)]` for a process on `R^d` started at `state()`.
pub trait VectorCharacteristicFn: Send + Sync {
    fn dim(&self) -> usize;

    fn state(&self) -> &[f64];

    fn evaluate_vec(&self, t: f64, u: &[Complex64]) -> Result<Complex64>;
}
