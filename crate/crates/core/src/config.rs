//! TOML experiment configuration and the models it describes.
//!
//! ```toml
//! [market]
//! s0 = 10.0
//! r = 0.05
//!
//! [model.h]
//! kind = "heston"            # heston | brownian | none
//! alpha = 1.0
//! kappa = 1.5
//! sigma = 0.6
//! theta = 0.04
//! rho = -0.2
//! v0 = 0.04
//!
//! [model.x]
//! kind = "hsdj"              # heston | hsdj
//! # heston fields as above, then
//! lambda0 = 0.0
//! lambda1 = 10.0
//! jump1 = { law = "exp-negative", rate = 4.48 }
//!
//! [method]
//! order = 8
//! eta = "heuristic"          # heuristic | heuristic-at | fixed (eta_value)
//! expansion = "log"          # log | ground
//! l = 32.0
//! rule = "adaptive"          # adaptive | trapezoid | gauss-legendre
//! sigma_b = 0.1
//! pricing = "var-red"        # var-red | cm | cv-known
//!
//! [mc]
//! n_paths = 20000
//! n_steps = 500
//! seed = 1
//!
//! [output]
//! dir = "out"
//! precision = 10
//! ```

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cf::{CharacteristicFn, UnitCf};
use crate::closed_form::{BlackScholesCf, HestonCf, HestonJumpCf};
use crate::composition::{FirstComponent, GammaPolicy, GeneralizedMertonModel};
use crate::error::{Error, Result};
use crate::expansion::{EtaPolicy, ExpansionCf, ExpansionKind, DEFAULT_ORDER};
use crate::monte_carlo::{HFactor, McConfig, McModel};
use crate::pricing::{
    carr_madan_price, control_variate_price, variance_reduced_price, PricingResult, QuadRule,
    QuadratureConfig,
};
use crate::symbol::{hsdj_symbols, AffineSymbol, HestonParams, HsdjJumpParams, JumpLaw};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub method: MethodConfig,
    #[serde(default)]
    pub mc: MonteCarloConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub s0: f64,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub h: HConfig,
    pub x: XConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HConfig {
    None,
    Brownian { sigma: f64 },
    Heston {
        alpha: f64,
        kappa: f64,
        sigma: f64,
        theta: f64,
        rho: f64,
        v0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "law", rename_all = "kebab-case", deny_unknown_fields)]
pub enum JumpConfig {
    #[default]
    None,
    ExpNegative { rate: f64 },
    Gaussian { mean: f64, std: f64 },
}

impl From<JumpConfig> for JumpLaw {
    fn from(j: JumpConfig) -> Self {
        match j {
            JumpConfig::None => JumpLaw::None,
            JumpConfig::ExpNegative { rate } => JumpLaw::ExpNegative { rate },
            JumpConfig::Gaussian { mean, std } => JumpLaw::Gaussian { mean, std },
        }
    }
}

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum XConfig {
    Heston {
        alpha: f64,
        kappa: f64,
        sigma: f64,
        theta: f64,
        rho: f64,
        v0: f64,
    },
    Hsdj {
        alpha: f64,
        kappa: f64,
        sigma: f64,
        theta: f64,
        rho: f64,
        v0: f64,
        #[serde(default)]
        lambda0: f64,
        #[serde(default)]
        lambda1: f64,
        #[serde(default, skip_serializing_if = "is_default")]
        jump0: JumpConfig,
        #[serde(default, skip_serializing_if = "is_default")]
        jump1: JumpConfig,
    },
}

impl XConfig {
    pub fn heston(&self) -> Result<HestonParams> {
        match *self {
            XConfig::Heston { alpha, kappa, sigma, theta, rho, v0 }
            | XConfig::Hsdj { alpha, kappa, sigma, theta, rho, v0, .. } => {
                HestonParams::with_v0(alpha, kappa, sigma, theta, rho, v0)
            }
        }
    }

    pub fn jumps(&self) -> HsdjJumpParams {
        match *self {
            XConfig::Heston { .. } => HsdjJumpParams::none(),
            XConfig::Hsdj { lambda0, lambda1, jump0, jump1, .. } => HsdjJumpParams {
                lambda0,
                lambda1,
                jump0: jump0.into(),
                jump1: jump1.into(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EtaChoice {
    #[default]
    Heuristic,
    HeuristicAt,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExpansionChoice {
    #[default]
    Log,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RuleChoice {
    #[default]
    Adaptive,
    Trapezoid,
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PricingMethod {
    /// Plain Carr-Madan.
    Cm,
    /// Black-Scholes control variate.
    #[default]
    VarRed,
    /// Control variate with the jump-free model, whose price is computed on `l_known`.
    CvKnown,
}

impl std::str::FromStr for PricingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cm" => Ok(PricingMethod::Cm),
            "var-red" => Ok(PricingMethod::VarRed),
            "cv-known" => Ok(PricingMethod::CvKnown),
            other => Err(Error::Config(format!("unknown pricing method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub order: usize,
    pub eta: EtaChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta_value: Option<f64>,
    pub expansion: ExpansionChoice,
    pub l: f64,
    pub rule: RuleChoice,
    pub n_points: usize,
    pub rel_tol: f64,
    /// Defaults to `√(α_H²θ_H + α_X²θ_X)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_b: Option<f64>,
    pub pricing: PricingMethod,
    pub l_known: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        let q = QuadratureConfig::default();
        MethodConfig {
            order: DEFAULT_ORDER,
            eta: EtaChoice::Heuristic,
            eta_value: None,
            expansion: ExpansionChoice::Log,
            l: q.l,
            rule: RuleChoice::Adaptive,
            n_points: q.n_points,
            rel_tol: q.rel_tol,
            sigma_b: None,
            pricing: PricingMethod::VarRed,
            l_known: 256.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        let d = McConfig::DESK;
        MonteCarloConfig {
            n_paths: d.n_paths,
            n_steps: d.n_steps,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
    /// Significant digits of numeric CSV fields.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".to_string(),
            precision: 10,
        }
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all representable in TOML")
    }

    /// Checks every parameter that any command may use.
    pub fn validate(&self) -> Result<()> {
        self.validate_inner().map_err(config_err)
    }

    fn validate_inner(&self) -> Result<()> {
        let m = &self.market;
        if !(m.s0 > 0.0 && m.s0.is_finite()) {
            return Err(Error::Config(format!("market.s0 must be positive, got {}", m.s0)));
        }
        if !m.r.is_finite() {
            return Err(Error::Config(format!("market.r must be finite, got {}", m.r)));
        }
        match self.model.h {
            HConfig::Brownian { sigma } if !(sigma > 0.0 && sigma.is_finite()) => {
                return Err(Error::Config(format!("model.h.sigma must be positive, got {sigma}")));
            }
            HConfig::Heston { .. } => {
                self.h_heston()?;
            }
            _ => {}
        }
        self.model.x.heston()?;
        self.model.x.jumps().validate()?;
        let me = &self.method;
        if me.order == 0 {
            return Err(Error::Config("method.order must be at least 1".to_string()));
        }
        if let EtaChoice::Fixed | EtaChoice::HeuristicAt = me.eta {
            match me.eta_value {
                Some(v) if v > 0.0 && v.is_finite() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "method.eta = {:?} needs a positive eta_value",
                        me.eta
                    )))
                }
            }
        }
        if let Some(sb) = me.sigma_b {
            if !(sb > 0.0 && sb.is_finite()) {
                return Err(Error::Config(format!("method.sigma_b must be positive, got {sb}")));
            }
        }
        if !(me.l_known > 0.0 && me.l_known.is_finite()) {
            return Err(Error::Config(format!("method.l_known must be positive, got {}", me.l_known)));
        }
        self.quadrature().validate()?;
        self.mc_config(false).validate()?;
        if self.output.precision == 0 || self.output.precision > 17 {
            return Err(Error::Config(format!(
                "output.precision must lie in 1..=17, got {}",
                self.output.precision
            )));
        }
        Ok(())
    }

    fn h_heston(&self) -> Result<Option<HestonParams>> {
        match self.model.h {
            HConfig::Heston { alpha, kappa, sigma, theta, rho, v0 } => {
                HestonParams::with_v0(alpha, kappa, sigma, theta, rho, v0).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        QuadratureConfig {
            l: self.method.l,
            n_points: self.method.n_points,
            rule: match self.method.rule {
                RuleChoice::Adaptive => QuadRule::Adaptive,
                RuleChoice::Trapezoid => QuadRule::Trapezoid,
                RuleChoice::GaussLegendre => QuadRule::GaussLegendre,
            },
            rel_tol: self.method.rel_tol,
        }
    }

    pub fn eta_policy(&self) -> EtaPolicy {
        match (self.method.eta, self.method.eta_value) {
            (EtaChoice::Fixed, Some(v)) => EtaPolicy::Fixed(v),
            (EtaChoice::HeuristicAt, Some(v)) => EtaPolicy::HeuristicAt(v),
            _ => EtaPolicy::Heuristic,
        }
    }

    pub fn mc_config(&self, paper_scale: bool) -> McConfig {
        let (n_paths, n_steps) = if paper_scale {
            (McConfig::FULL.n_paths, McConfig::FULL.n_steps)
        } else {
            (self.mc.n_paths, self.mc.n_steps)
        };
        McConfig {
            n_paths,
            n_steps,
            seed: self.mc.seed,
        }
    }

    /// Control-variate volatility, `√(α_H²θ_H + α_X²θ_X)` unless configured.
    pub fn sigma_b(&self) -> f64 {
        if let Some(sb) = self.method.sigma_b {
            return sb;
        }
        let h = match self.model.h {
            HConfig::None => 0.0,
            HConfig::Brownian { sigma } => sigma * sigma,
            HConfig::Heston { alpha, theta, .. } => alpha * alpha * theta,
        };
        let x = self.model.x.heston().map_or(0.0, |p| p.alpha * p.alpha * p.theta);
        (h + x).sqrt()
    }

    pub fn h_component(&self) -> Result<Arc<dyn CharacteristicFn>> {
        Ok(match self.model.h {
            HConfig::None => Arc::new(UnitCf),
            HConfig::Brownian { sigma } => Arc::new(BlackScholesCf { sigma }),
            HConfig::Heston { .. } => Arc::new(HestonCf::new(self.h_heston()?.expect("heston h"))),
        })
    }

    /// Whether `X¹` has a closed-form characteristic function.
    pub fn has_exact(&self) -> bool {
        self.model.x.jumps().lambda1 == 0.0
    }

    pub fn x_exact(&self) -> Result<Arc<dyn CharacteristicFn>> {
        let p = self.model.x.heston()?;
        let j = self.model.x.jumps();
        if j.lambda1 != 0.0 {
            return Err(Error::Capability(
                "a closed form for state-dependent jump intensities generally doesn't exist"
                    .to_string(),
            ));
        }
        if j.lambda0 == 0.0 {
            return Ok(Arc::new(HestonCf::new(p)));
        }
        Ok(Arc::new(HestonJumpCf {
            params: p,
            v0: p.v0,
            lambda0: j.lambda0,
            law: j.jump0,
        }))
    }

    /// `X¹` with its jumps removed.
    pub fn x_jump_free(&self) -> Result<Arc<dyn CharacteristicFn>> {
        Ok(Arc::new(HestonCf::new(self.model.x.heston()?)))
    }

    pub fn x_symbol(&self) -> Result<Arc<dyn AffineSymbol>> {
        Ok(Arc::new(hsdj_symbols(self.model.x.heston()?, self.model.x.jumps())?))
    }

    pub fn x_expansion(&self) -> Result<ExpansionCf> {
        let p = self.model.x.heston()?;
        let kind = match self.method.expansion {
            ExpansionChoice::Log => ExpansionKind::Log,
            ExpansionChoice::Ground => ExpansionKind::Ground,
        };
        ExpansionCf::with_options(
            self.x_symbol()?,
            vec![0.0, p.v0],
            self.method.order,
            self.eta_policy(),
            kind,
            Default::default(),
        )
    }

    pub fn x_approx(&self) -> Result<Arc<dyn CharacteristicFn>> {
        Ok(Arc::new(FirstComponent::new(self.x_expansion()?)?))
    }

    fn compose(&self, x: Arc<dyn CharacteristicFn>) -> Result<GeneralizedMertonModel> {
        GeneralizedMertonModel::new(
            self.market.s0,
            self.market.r,
            GammaPolicy::Zero,
            self.h_component()?,
            x,
        )
    }

    pub fn exact_model(&self) -> Result<GeneralizedMertonModel> {
        self.compose(self.x_exact()?)
    }

    /// `H` in closed form composed with the expansion of `X¹`.
    pub fn approx_model(&self) -> Result<GeneralizedMertonModel> {
        self.compose(self.x_approx()?)
    }

    pub fn jump_free_model(&self) -> Result<GeneralizedMertonModel> {
        self.compose(self.x_jump_free()?)
    }

    pub fn mc_model(&self) -> Result<McModel> {
        Ok(McModel {
            h: match self.model.h {
                HConfig::None => HFactor::None,
                HConfig::Brownian { sigma } => HFactor::Brownian { sigma },
                HConfig::Heston { .. } => HFactor::Heston(self.h_heston()?.expect("heston h")),
            },
            x_heston: self.model.x.heston()?,
            x_jumps: self.model.x.jumps(),
        })
    }

    /// Prices a call on `model` with the configured method and quadrature.
    pub fn price(
        &self,
        model: &GeneralizedMertonModel,
        method: PricingMethod,
        strike: f64,
        maturity: f64,
        l: f64,
    ) -> Result<PricingResult> {
        let quad = QuadratureConfig { l, ..self.quadrature() };
        let (s0, r) = (self.market.s0, self.market.r);
        match method {
            PricingMethod::Cm => carr_madan_price(model, s0, strike, maturity, r, &quad),
            PricingMethod::VarRed => {
                variance_reduced_price(model, self.sigma_b(), s0, strike, maturity, r, &quad)
            }
            PricingMethod::CvKnown => {
                let known = self.jump_free_model()?;
                let quad_known = QuadratureConfig {
                    l: self.method.l_known,
                    ..self.quadrature()
                };
                control_variate_price(&known, model, s0, strike, maturity, r, &quad_known, &quad)
            }
        }
    }
}
