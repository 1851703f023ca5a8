//! Euler simulation of Heston factors with state-dependent jumps.
//!
//! Variance: full-truncation Euler, so drift and diffusion see `max(v, 0)`.
//! Jumps: per step a Poisson count with intensity `(λ₀ + λ₁ max(v, 0)) Δt`
//! frozen at the left endpoint, sizes drawn i.i.d. from the jump laws.
//! Every path owns the ChaCha8 stream `(seed, path index)`, so samples do not
//! depend on the number of worker threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::cf::CharacteristicFn;
use crate::error::{Error, Result};
use crate::symbol::{HestonParams, HsdjJumpParams, JumpLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_paths: usize,
    /// Euler steps over the whole horizon `[0, T]`.
    pub n_steps: usize,
    pub seed: u64,
}

impl McConfig {
    pub const DESK: McConfig = McConfig {
        n_paths: 20_000,
        n_steps: 500,
        seed: 20_240_601,
    };
    pub const FULL: McConfig = McConfig {
        n_paths: 100_000,
        n_steps: 1000,
        seed: 20_240_601,
    };

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || self.n_steps == 0 {
            return Err(Error::ParameterDomain(format!(
                "monte carlo needs positive paths and steps, got {} x {}",
                self.n_paths, self.n_steps
            )));
        }
        Ok(())
    }
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig::DESK
    }
}

/// The `H` factor of a generalized Merton model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HFactor {
    None,
    /// `-σ²t/2 + σW_t`
    Brownian { sigma: f64 },
    /// Log-Heston factor started at `(0, v0)`.
    Heston(HestonParams),
}

/// `Y = H + X¹` with `X` an HSDJ factor started at `(0, x_heston.v0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McModel {
    pub h: HFactor,
    pub x_heston: HestonParams,
    pub x_jumps: HsdjJumpParams,
}

impl McModel {
    pub fn hsdj(heston: HestonParams, jumps: HsdjJumpParams) -> Self {
        McModel {
            h: HFactor::None,
            x_heston: heston,
            x_jumps: jumps,
        }
    }

    fn validate(&self) -> Result<()> {
        self.x_heston.validate()?;
        self.x_jumps.validate()?;
        for law in [&self.x_jumps.jump0, &self.x_jumps.jump1] {
            if matches!(law, JumpLaw::Custom(_)) {
                return Err(Error::Capability(
                    "custom jump laws cannot be sampled".to_string(),
                ));
            }
        }
        match self.h {
            HFactor::Heston(p) => p.validate(),
            HFactor::Brownian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => Err(
                Error::ParameterDomain(format!("brownian vol must be non-negative, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerminalSample {
    pub y: Vec<f64>,
    pub maturity: f64,
    pub config: McConfig,
}

impl TerminalSample {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// One Euler step of a log-Heston factor; returns the new `(x1, v)`.
struct HestonStepper {
    p: HestonParams,
    rho_bar: f64,
}

impl HestonStepper {
    fn new(p: HestonParams) -> Self {
        HestonStepper {
            p,
            rho_bar: (1.0 - p.rho * p.rho).max(0.0).sqrt(),
        }
    }

    /// Advances `(x1, v)` by `dt` with drift adjustment `extra_drift(v⁺)`;
    /// returns `v⁺` at the left endpoint.
    #[inline]
    fn step<R: Rng>(&self, x1: &mut f64, v: &mut f64, dt: f64, drift_coeff: f64, rng: &mut R) -> f64 {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let vp = v.max(0.0);
        let sq = (vp * dt).sqrt();
        let p = &self.p;
        *x1 += drift_coeff * vp * dt + p.alpha * sq * z1;
        *v += p.kappa * (p.theta - vp) * dt + p.sigma * sq * (p.rho * z1 + self.rho_bar * z2);
        vp
    }
}

fn sample_jump<R: Rng>(law: &JumpLaw, rng: &mut R) -> f64 {
    match law {
        JumpLaw::ExpNegative { rate } => {
            // 1 - U lies in (0, 1]
            let u: f64 = 1.0 - rng.random::<f64>();
            u.ln() / rate
        }
        JumpLaw::Gaussian { mean, std } => {
            let z: f64 = rng.sample(StandardNormal);
            mean + std * z
        }
        JumpLaw::None | JumpLaw::Custom(_) => 0.0,
    }
}

fn jump_sum<R: Rng>(mean: f64, law: &JumpLaw, rng: &mut R) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let count = Poisson::new(mean).map_or(0.0, |d| d.sample(rng)) as u64;
    (0..count).map(|_| sample_jump(law, rng)).sum()
}

/// State of one path after each step, for the trajectory dump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub t: f64,
    pub y: f64,
    /// Instantaneous volatility of `Y`, `√(α_H² v_H⁺ + α_X² v_X⁺)`.
    pub vol_total: f64,
    /// Variance component `X²`.
    pub v2: f64,
}

struct Simulator<'a> {
    model: &'a McModel,
    x: HestonStepper,
    h: Option<HestonStepper>,
    dt: f64,
    x_drift: f64,
    x_const_drift: f64,
}

impl<'a> Simulator<'a> {
    fn new(model: &'a McModel, maturity: f64, n_steps: usize) -> Result<Self> {
        model.validate()?;
        let m0a0 = model.x_jumps.m0a0()?;
        let m1a1 = model.x_jumps.m1a1()?;
        let j = &model.x_jumps;
        let a2 = model.x_heston.alpha * model.x_heston.alpha;
        Ok(Simulator {
            model,
            x: HestonStepper::new(model.x_heston),
            h: match model.h {
                HFactor::Heston(p) => Some(HestonStepper::new(p)),
                _ => None,
            },
            dt: maturity / n_steps as f64,
            x_drift: -(0.5 * a2 + j.lambda1 * m1a1),
            x_const_drift: -j.lambda0 * m0a0,
        })
    }

    fn run<F: FnMut(usize, f64, f64, f64, f64)>(&self, path: usize, seed: u64, n_steps: usize, mut observe: F) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        let j = &self.model.x_jumps;
        let dt = self.dt;
        let (mut x1, mut v) = (0.0, self.model.x_heston.v0);
        let (mut h1, mut hv) = match self.model.h {
            HFactor::Heston(p) => (0.0, p.v0),
            _ => (0.0, 0.0),
        };
        let h_drift = match self.model.h {
            HFactor::Heston(p) => -0.5 * p.alpha * p.alpha,
            _ => 0.0,
        };
        for step in 0..n_steps {
            let vp = self.x.step(&mut x1, &mut v, dt, self.x_drift, &mut rng);
            x1 += self.x_const_drift * dt;
            if j.lambda0 > 0.0 {
                x1 += jump_sum(j.lambda0 * dt, &j.jump0, &mut rng);
            }
            if j.lambda1 > 0.0 {
                x1 += jump_sum(j.lambda1 * vp * dt, &j.jump1, &mut rng);
            }
            if let Some(h) = &self.h {
                h.step(&mut h1, &mut hv, dt, h_drift, &mut rng);
            }
            observe(step, x1, v, h1, hv);
        }
        let h_part = match self.model.h {
            HFactor::Brownian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                let t = dt * n_steps as f64;
                -0.5 * sigma * sigma * t + sigma * t.sqrt() * z
            }
            _ => h1,
        };
        x1 + h_part
    }
}

/// Terminal values `Y_T` of the generalized Merton model.
pub fn simulate(model: &McModel, maturity: f64, config: McConfig) -> Result<TerminalSample> {
    config.validate()?;
    if !(maturity > 0.0 && maturity.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "maturity must be positive, got {maturity}"
        )));
    }
    let sim = Simulator::new(model, maturity, config.n_steps)?;
    let y: Vec<f64> = (0..config.n_paths)
        .into_par_iter()
        .map(|path| sim.run(path, config.seed, config.n_steps, |_, _, _, _, _| {}))
        .collect();
    if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("terminal value of path {bad}")));
    }
    Ok(TerminalSample {
        y,
        maturity,
        config,
    })
}

/// Terminal values of the HSDJ factor alone.
pub fn simulate_hsdj(
    heston: HestonParams,
    jumps: HsdjJumpParams,
    maturity: f64,
    config: McConfig,
) -> Result<TerminalSample> {
    simulate(&McModel::hsdj(heston, jumps), maturity, config)
}

/// Full path `path` of the simulation, one point per step (plus `t = 0`).
pub fn trajectory(model: &McModel, maturity: f64, config: McConfig, path: usize) -> Result<Vec<PathPoint>> {
    config.validate()?;
    let sim = Simulator::new(model, maturity, config.n_steps)?;
    let ax2 = model.x_heston.alpha * model.x_heston.alpha;
    let ah2 = match model.h {
        HFactor::Heston(p) => p.alpha * p.alpha,
        _ => 0.0,
    };
    let bs_var = match model.h {
        HFactor::Brownian { sigma } => sigma * sigma,
        _ => 0.0,
    };
    let hv0 = match model.h {
        HFactor::Heston(p) => p.v0,
        _ => 0.0,
    };
    let vol = |v: f64, hv: f64| (ax2 * v.max(0.0) + ah2 * hv.max(0.0) + bs_var).sqrt();
    let mut points = vec![PathPoint {
        t: 0.0,
        y: 0.0,
        vol_total: vol(model.x_heston.v0, hv0),
        v2: model.x_heston.v0,
    }];
    let dt = maturity / config.n_steps as f64;
    sim.run(path, config.seed, config.n_steps, |step, x1, v, h1, hv| {
        points.push(PathPoint {
            t: (step + 1) as f64 * dt,
            y: x1 + h1,
            vol_total: vol(v, hv),
            v2: v,
        });
    });
    Ok(points)
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPrice {
    pub price: f64,
    pub stderr: f64,
}

/// Discounted mean payoff `e^{-rT}(S₀ e^{rT + Y} - K)⁺` and its standard error.
pub fn mc_price(sample: &TerminalSample, s0: f64, strike: f64, r: f64, maturity: f64) -> Result<McPrice> {
    if sample.is_empty() {
        return Err(Error::ParameterDomain("empty monte carlo sample".to_string()));
    }
    let disc = (-r * maturity).exp();
    let fwd = s0 * (r * maturity).exp();
    let payoffs: Vec<f64> = sample
        .y
        .iter()
        .map(|&y| disc * (fwd * y.exp() - strike).max(0.0))
        .collect();
    let n = payoffs.len() as f64;
    let mean = pairwise_sum(&payoffs) / n;
    let dev: Vec<f64> = payoffs.iter().map(|p| (p - mean) * (p - mean)).collect();
    let var = if payoffs.len() > 1 {
        pairwise_sum(&dev) / (n - 1.0)
    } else {
        0.0
    };
    Ok(McPrice {
        price: mean,
        stderr: (var / n).sqrt(),
    })
}

/// Sample mean of `exp(Y)` and its standard error.
pub fn martingale_mean(sample: &TerminalSample) -> (f64, f64) {
    let v: Vec<f64> = sample.y.iter().map(|y| y.exp()).collect();
    let n = v.len() as f64;
    let mean = pairwise_sum(&v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// `E[exp(i z Y)]` estimated from the sample.
pub fn empirical_cf_at(sample: &TerminalSample, z: Complex64) -> Complex64 {
    let n = sample.y.len() as f64;
    let terms: Vec<Complex64> = sample.y.iter().map(|&y| (Complex64::i() * z * y).exp()).collect();
    let re: Vec<f64> = terms.iter().map(|c| c.re).collect();
    let im: Vec<f64> = terms.iter().map(|c| c.im).collect();
    Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n)
}

pub fn empirical_cf(sample: &TerminalSample, u_grid: &[f64]) -> Vec<Complex64> {
    u_grid
        .iter()
        .map(|&u| empirical_cf_at(sample, Complex64::new(u, 0.0)))
        .collect()
}

/// A Monte Carlo sample seen as a characteristic function at its maturity.
#[derive(Debug, Clone)]
pub struct EmpiricalCf {
    sample: TerminalSample,
}

impl EmpiricalCf {
    pub fn new(sample: TerminalSample) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::ParameterDomain("empty monte carlo sample".to_string()));
        }
        Ok(EmpiricalCf { sample })
    }
}

impl CharacteristicFn for EmpiricalCf {
    fn evaluate(&self, t: f64, z: Complex64) -> Result<Complex64> {
        if t == 0.0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if (t - self.sample.maturity).abs() > 1e-12 {
            return Err(Error::ParameterDomain(format!(
                "empirical characteristic function sampled at t = {}, asked at t = {t}",
                self.sample.maturity
            )));
        }
        Ok(empirical_cf_at(&self.sample, z))
    }
}
