//! Generalized Merton models `S_t = S₀ exp(rt + Y_t)` with
//! `Y_t = γt + H_t + X¹_t`, `H` and `X` independent and both started at zero.

use std::sync::Arc;

use num_complex::Complex64;

use crate::cf::{CharacteristicFn, VectorCharacteristicFn};
use crate::error::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GammaPolicy {
    /// Both components are already martingale-normalized.
    #[default]
    Zero,
    Explicit(f64),
    /// `γ = -t⁻¹ ln p̂_H(t, -i) - t⁻¹ ln p̂_X(t, -i)`, recomputed per maturity.
    AutoNormalize,
}

/// The first coordinate of a `d`-dimensional process started at
/// `(0, x², …, x^d)`, seen through the frequencies `(z, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct FirstComponent<V> {
    inner: V,
}

impl<V: VectorCharacteristicFn> FirstComponent<V> {
    pub fn new(inner: V) -> Result<Self> {
        match inner.state().first() {
            Some(&0.0) => Ok(FirstComponent { inner }),
            Some(&x1) => Err(Error::InvalidModel(format!(
                "priced component must start at zero, got x1 = {x1}"
            ))),
            None => Err(Error::InvalidModel(
                "priced component has dimension zero".to_string(),
            )),
        }
    }

    pub fn inner(&self) -> &V {
        &self.inner
    }
}

impl<V: VectorCharacteristicFn> CharacteristicFn for FirstComponent<V> {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        let mut u = vec![Complex64::new(0.0, 0.0); self.inner.dim()];
        u[0] = z;
        self.inner.evaluate_vec(t, &u)
    }
}

#[derive(Clone)]
pub struct GeneralizedMertonModel {
    pub s0: f64,
    pub r: f64,
    pub gamma_policy: GammaPolicy,
    pub h_component: Arc<dyn CharacteristicFn>,
    pub x_component: Arc<dyn CharacteristicFn>,
}

impl std::fmt::Debug for GeneralizedMertonModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralizedMertonModel")
            .field("s0", &self.s0)
            .field("r", &self.r)
            .field("gamma_policy", &self.gamma_policy)
            .finish_non_exhaustive()
    }
}

impl GeneralizedMertonModel {
    pub fn new(
        s0: f64,
        r: f64,
        gamma_policy: GammaPolicy,
        h_component: Arc<dyn CharacteristicFn>,
        x_component: Arc<dyn CharacteristicFn>,
    ) -> Result<Self> {
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::ParameterDomain(format!("spot must be positive, got {s0}")));
        }
        if !r.is_finite() {
            return Err(Error::ParameterDomain(format!("rate must be finite, got {r}")));
        }
        if let GammaPolicy::Explicit(g) = gamma_policy {
            if !g.is_finite() {
                return Err(Error::ParameterDomain(format!("drift must be finite, got {g}")));
            }
        }
        Ok(GeneralizedMertonModel {
            s0,
            r,
            gamma_policy,
            h_component,
            x_component,
        })
    }

    /// Drift used at maturity `t`.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        match self.gamma_policy {
            GammaPolicy::Zero => Ok(0.0),
            GammaPolicy::Explicit(g) => Ok(g),
            GammaPolicy::AutoNormalize => martingale_drift(self, t),
        }
    }

    fn components(&self, t: f64, z: Complex64) -> Result<(Complex64, Complex64)> {
        let h = self
            .h_component
            .evaluate(t, z)
            .map_err(|e| e.in_component("h"))?;
        let x = self
            .x_component
            .evaluate(t, z)
            .map_err(|e| e.in_component("x"))?;
        Ok((h, x))
    }
}

/// `e^{izγt} p̂_H(t, z) p̂_X(t, z)`.
pub fn compose_cf(model: &GeneralizedMertonModel, t: f64, z: Complex64) -> Result<Complex64> {
    if !(t >= 0.0) {
        return Err(Error::ParameterDomain(format!(
            "time must be non-negative, got {t}"
        )));
    }
    let (h, x) = model.components(t, z)?;
    let gamma = if t == 0.0 { 0.0 } else { model.gamma(t)? };
    let drift = if gamma == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        (I * z * gamma * t).exp()
    };
    Ok(drift * h * x)
}

/// `γ` making `exp(Y_t)` a martingale at maturity `t`.
pub fn martingale_drift(model: &GeneralizedMertonModel, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "martingale drift needs t > 0, got {t}"
        )));
    }
    let (h, x) = model.components(t, Complex64::new(0.0, -1.0))?;
    let mut gamma = 0.0;
    for (name, v) in [("h", h), ("x", x)] {
        let m = v.norm();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidModel(format!(
                "{name} component has no usable exponential moment at t = {t}: {v}"
            )));
        }
        gamma -= m.ln() / t;
    }
    Ok(gamma)
}

/// Characteristic function of the de-trended log-price `Y_T`.
pub fn stock_cf(model: &GeneralizedMertonModel, t: f64, z: Complex64) -> Result<Complex64> {
    compose_cf(model, t, z)
}

impl CharacteristicFn for GeneralizedMertonModel {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        stock_cf(self, t, z)
    }

    fn admissible_strip(&self) -> (f64, f64) {
        let (a, b) = self.h_component.admissible_strip();
        let (c, d) = self.x_component.admissible_strip();
        (a.max(c), b.min(d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cf::UnitCf;
    use crate::closed_form::{heston_cf, BrownianCf, HestonCf};
    use crate::expansion::{EtaPolicy, ExpansionCf};
    use crate::symbol::{heston_symbols, AffineSymbol, HestonParams};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn h_params() -> HestonParams {
        HestonParams::new(1.0, 1.5, 0.6, 0.04, -0.2).unwrap()
    }

    fn x_params() -> HestonParams {
        HestonParams::new(1.0, 1.5, 0.3, 0.0225, -0.3).unwrap()
    }

    fn hh(policy: GammaPolicy) -> GeneralizedMertonModel {
        GeneralizedMertonModel::new(
            10.0,
            0.05,
            policy,
            Arc::new(HestonCf::new(h_params())),
            Arc::new(HestonCf::new(x_params())),
        )
        .unwrap()
    }

    fn expansion_x() -> Arc<dyn CharacteristicFn> {
        let spec: Arc<dyn AffineSymbol> = Arc::new(heston_symbols(x_params()).unwrap());
        let e = ExpansionCf::new(spec, vec![0.0, 0.0225], 8, EtaPolicy::Heuristic).unwrap();
        Arc::new(FirstComponent::new(e).unwrap())
    }

    #[test]
    fn normalization_and_martingale() {
        let m = hh(GammaPolicy::Zero);
        for t in [0.25, 0.5, 1.0, 2.0, 5.0] {
            assert_eq!(compose_cf(&m, t, c(0.0, 0.0)).unwrap(), c(1.0, 0.0));
            assert!((compose_cf(&m, t, c(0.0, -1.0)).unwrap() - 1.0).norm() <= 1e-12);
        }
    }

    #[test]
    fn product_of_factors() {
        let m = hh(GammaPolicy::Zero);
        let z = c(1.0, 0.0);
        let expected = heston_cf(&h_params(), 0.04, 0.5, z).unwrap() * heston_cf(&x_params(), 0.0225, 0.5, z).unwrap();
        assert_eq!(compose_cf(&m, 0.5, z).unwrap(), expected);
    }

    #[test]
    fn brownian_h_gets_black_scholes_drift() {
        let m = GeneralizedMertonModel::new(
            10.0,
            0.05,
            GammaPolicy::AutoNormalize,
            Arc::new(BrownianCf { sigma: 0.2 }),
            Arc::new(HestonCf::new(x_params())),
        )
        .unwrap();
        for t in [0.25, 1.0, 5.0] {
            assert!((martingale_drift(&m, t).unwrap() + 0.02).abs() < 1e-12);
        }
    }

    #[test]
    fn auto_normalize_is_a_martingale() {
        let m = GeneralizedMertonModel::new(
            10.0,
            0.05,
            GammaPolicy::AutoNormalize,
            Arc::new(BrownianCf { sigma: 0.3 }),
            Arc::new(HestonCf::new(x_params())),
        )
        .unwrap();
        for t in [0.25, 0.5, 1.0, 2.0, 5.0] {
            assert!((compose_cf(&m, t, c(0.0, -1.0)).unwrap() - 1.0).norm() <= 1e-10);
        }
        assert!(hh(GammaPolicy::AutoNormalize).gamma(1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn expansion_component_drift_is_small() {
        let m = GeneralizedMertonModel::new(10.0, 0.05, GammaPolicy::AutoNormalize, Arc::new(UnitCf), expansion_x()).unwrap();
        for t in [0.25, 0.5, 1.0] {
            assert!(martingale_drift(&m, t).unwrap().abs() <= 1e-3);
        }
    }

    #[test]
    fn first_component_needs_zero_start() {
        let spec: Arc<dyn AffineSymbol> = Arc::new(heston_symbols(x_params()).unwrap());
        let e = ExpansionCf::new(spec, vec![0.1, 0.0225], 8, EtaPolicy::Heuristic).unwrap();
        assert!(matches!(FirstComponent::new(e).unwrap_err(), Error::InvalidModel(_)));
    }

    #[test]
    fn component_errors_are_attributed() {
        let m = GeneralizedMertonModel::new(
            10.0,
            0.05,
            GammaPolicy::Zero,
            Arc::new(UnitCf),
            Arc::new(crate::cf::FnCf::new(|_, _| Err(Error::Singularity("boom".into())))),
        )
        .unwrap();
        match compose_cf(&m, 1.0, c(1.0, 0.0)).unwrap_err() {
            Error::Component { component, .. } => assert_eq!(component, "x"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_time_is_one() {
        let m = hh(GammaPolicy::Explicit(0.3));
        assert_eq!(stock_cf(&m, 0.0, c(2.0, 0.0)).unwrap(), c(1.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]

        #[test]
        fn stock_cf_matches_compose(t in 0.0f64..5.0, re in -20.0f64..20.0, im in -1.0f64..0.0) {
            let m = hh(GammaPolicy::Explicit(-0.01));
            let z = c(re, im);
            prop_assert_eq!(stock_cf(&m, t, z).unwrap(), compose_cf(&m, t, z).unwrap());
        }

        #[test]
        fn composed_cf_is_hermitian(t in 0.01f64..5.0, u in -30.0f64..30.0) {
            let m = hh(GammaPolicy::AutoNormalize);
            let a = compose_cf(&m, t, c(u, 0.0)).unwrap();
            let b = compose_cf(&m, t, c(-u, 0.0)).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-12);
        }

        #[test]
        fn unit_component_factorizes(t in 0.01f64..5.0, u in -30.0f64..30.0) {
            let m = GeneralizedMertonModel::new(10.0, 0.05, GammaPolicy::Zero, Arc::new(UnitCf), Arc::new(HestonCf::new(x_params()))).unwrap();
            let z = c(u, 0.0);
            prop_assert_eq!(compose_cf(&m, t, z).unwrap(), heston_cf(&x_params(), 0.0225, t, z).unwrap());
        }
    }
}
