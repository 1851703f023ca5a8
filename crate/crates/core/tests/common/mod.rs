#![allow(dead_code)]

use std::sync::Arc;

use affinecf::cf::FnCf;
use affinecf::closed_form::HestonCf;
use affinecf::composition::{GammaPolicy, GeneralizedMertonModel};
use affinecf::symbol::HestonParams;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Heston factor with optional jumps of intensity `lambda1 * v` and
/// density `p e^{py}` on `y < 0`.
#[derive(Debug, Clone, Copy)]
pub struct RiccatiModel {
    pub alpha: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub theta: f64,
    pub rho: f64,
    pub v0: f64,
    pub lambda1: f64,
    pub rate: f64,
}

impl RiccatiModel {
    pub fn heston(p: &HestonParams) -> Self {
        RiccatiModel {
            alpha: p.alpha,
            kappa: p.kappa,
            sigma: p.sigma,
            theta: p.theta,
            rho: p.rho,
            v0: p.v0,
            lambda1: 0.0,
            rate: 1.0,
        }
    }

    pub fn with_jumps(mut self, lambda1: f64, rate: f64) -> Self {
        self.lambda1 = lambda1;
        self.rate = rate;
        self
    }

    /// `dψ/dt` for the variance coefficient, `w = iz` fixed.
    fn rhs(&self, w: C, psi: C) -> C {
        let a2 = self.alpha * self.alpha;
        let mut d = 0.5 * a2 * (w * w - w) - self.kappa * psi
            + 0.5 * self.sigma * self.sigma * psi * psi
            + self.alpha * self.sigma * self.rho * w * psi;
        if self.lambda1 != 0.0 {
            let p = self.rate;
            let mgf = p / (p + w);
            let comp = p / (p + 1.0) - 1.0;
            d += self.lambda1 * (mgf - 1.0 - w * comp);
        }
        d
    }

    /// `E[exp(iz X¹_t)]` by RK4 on the Riccati system.
    pub fn cf(&self, t: f64, z: C, steps: usize) -> C {
        let w = C::i() * z;
        let h = t / steps as f64;
        let (mut phi, mut psi) = (C::new(0.0, 0.0), C::new(0.0, 0.0));
        let kt = self.kappa * self.theta;
        for _ in 0..steps {
            let k1 = self.rhs(w, psi);
            let k2 = self.rhs(w, psi + 0.5 * h * k1);
            let k3 = self.rhs(w, psi + 0.5 * h * k2);
            let k4 = self.rhs(w, psi + h * k3);
            phi += kt * h * (psi + 2.0 * (psi + 0.5 * h * k1) + 2.0 * (psi + 0.5 * h * k2) + psi + h * k3) / 6.0;
            psi += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        (phi + psi * self.v0).exp()
    }
}

pub fn h_params() -> HestonParams {
    HestonParams::with_v0(1.0, 1.5, 0.6, 0.04, -0.2, 0.04).unwrap()
}

pub fn x_params() -> HestonParams {
    HestonParams::with_v0(1.0, 1.5, 0.3, 0.0225, -0.3, 0.0225).unwrap()
}

/// Closed-form `H` times the ODE solution for `X¹`.
pub fn ode_model(x: RiccatiModel, steps: usize) -> GeneralizedMertonModel {
    GeneralizedMertonModel::new(
        10.0,
        0.05,
        GammaPolicy::Zero,
        Arc::new(HestonCf::new(h_params())),
        Arc::new(FnCf::new(move |t, z| Ok(x.cf(t, z, steps)))),
    )
    .unwrap()
}

/// Valid Heston parameters covering Feller and non-Feller regimes.
pub fn random_heston(rng: &mut ChaCha8Rng) -> HestonParams {
    loop {
        let p = HestonParams::with_v0(
            rng.random_range(0.5..1.5),
            rng.random_range(0.5..3.0),
            rng.random_range(0.1..0.8),
            rng.random_range(0.01..0.09),
            rng.random_range(-0.9..0.5),
            rng.random_range(0.01..0.09),
        );
        if let Ok(p) = p {
            return p;
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
