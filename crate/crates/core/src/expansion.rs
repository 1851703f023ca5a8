//! Series expansion of the characteristic function of an affine process in
//! powers of `s = 1 - e^{-ηt}`.
//!
//! The coefficients `h_{r,γ}(u; η)` follow from the symbol derivatives by
//!
//! ```text
//! (r+1) h_{r+1,γ} = η⁻¹ Σ_{|β|≤r-|γ|} C(γ+β,β) h_{r,γ+β} b⁰_β
//!                 + η⁻¹ Σ_{κ=e_i≤γ} Σ_{|β|≤r+1-|γ|} C(γ-κ+β,β) h_{r,γ-κ+β} b¹_{β,κ}
//!                 + r h_{r,γ}
//! ```
//!
//! with `h_{0,0} = 1` and `h_{r,γ} = 0` for `|γ| > r`.

use std::collections::HashMap;
use std::f64::consts::FRAC_PI_2;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::cf::VectorCharacteristicFn;
use crate::error::{Error, Result};
use crate::multi_index::{factorial, MultiIndex, MultiIndexSet};
use crate::symbol::AffineSymbol;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub const DEFAULT_ORDER: usize = 8;
pub const DEFAULT_ETA_FLOOR: f64 = 1.0;
pub const DEFAULT_ETA_CAP: f64 = 1e6;

type LayoutCache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;

/// Index arithmetic for all `|γ| ≤ K + 1`, shared between tables of the same
/// dimension and order.
#[derive(Debug)]
pub struct Layout {
    set: MultiIndexSet,
    /// `add[a][b]` = rank of `a + b` when it stays inside the set.
    add: Vec<Vec<Option<u32>>>,
    /// `binom[a][b]` = `C(a + b, b)`.
    binom: Vec<Vec<f64>>,
    /// `sub_unit[a][i]` = rank of `a - e_i`.
    sub_unit: Vec<Vec<Option<u32>>>,
    units: Vec<usize>,
}

impl Layout {
    fn build(dim: usize, order: usize) -> Self {
        let set = MultiIndexSet::graded_lex(dim, order + 1);
        let n = set.len();
        let mut add = vec![vec![None; n]; n];
        let mut binom = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in 0..n {
                let ga = set.get(a);
                let gb = set.get(b);
                add[a][b] = set.rank(&ga.add(gb)).map(|r| r as u32);
                binom[a][b] = ga.binomial_with(gb);
            }
        }
        let units: Vec<usize> = (0..dim)
            .map(|i| set.rank(&MultiIndex::unit(dim, i)).expect("unit index in set"))
            .collect();
        let sub_unit = (0..n)
            .map(|a| {
                (0..dim)
                    .map(|i| {
                        set.get(a)
                            .checked_sub(&MultiIndex::unit(dim, i))
                            .and_then(|g| set.rank(&g))
                            .map(|r| r as u32)
                    })
                    .collect()
            })
            .collect();
        Layout {
            set,
            add,
            binom,
            sub_unit,
            units,
        }
    }

    /// Cached layout for dimension `dim` and truncation order `order`.
    pub fn shared(dim: usize, order: usize) -> Arc<Layout> {
        static CACHE: OnceLock<LayoutCache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((dim, order))
            .or_insert_with(|| Arc::new(Layout::build(dim, order)))
            .clone()
    }

    pub fn indices(&self) -> &MultiIndexSet {
        &self.set
    }
}

/// Symbol derivatives evaluated at one frequency, for `|β| ≤ order`.
struct SymbolValues {
    b0: Vec<Complex64>,
    /// `b1[β][i]`
    b1: Vec<Vec<Complex64>>,
    /// number of ranks with a possibly non-zero entry
    active: usize,
}

fn evaluate_symbols<S: AffineSymbol + ?Sized>(
    spec: &S,
    layout: &Layout,
    u: &[Complex64],
    order: usize,
) -> Result<SymbolValues> {
    let dim = layout.set.dim();
    if spec.dim() != dim || u.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: if spec.dim() != dim { spec.dim() } else { u.len() },
        });
    }
    let max = spec.max_nonzero_order().map_or(order, |m| m.min(order));
    let active = layout.set.count_up_to(max);
    let mut b0 = Vec::with_capacity(active);
    let mut b1 = Vec::with_capacity(active);
    for rank in 0..active {
        let beta = layout.set.get(rank);
        b0.push(spec.b0(beta, u)?);
        b1.push(
            (0..dim)
                .map(|i| spec.b1(beta, i, u))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(SymbolValues { b0, b1, active })
}

/// Runs the recursion up to order `order`. With `eta = None` it produces the
/// powers of the generator (`g`-table): no `η⁻¹` factor and no `r h` term.
fn run_recursion(
    layout: &Layout,
    sym: &SymbolValues,
    order: usize,
    eta: Option<f64>,
) -> Vec<Vec<Complex64>> {
    let set = &layout.set;
    let dim = set.dim();
    let mut table = Vec::with_capacity(order + 1);
    let mut first = vec![ZERO; set.count_up_to(order)];
    first[0] = Complex64::new(1.0, 0.0);
    table.push(first);
    for r in 0..order {
        let prev = &table[r];
        let mut next = vec![ZERO; set.count_up_to(order)];
        for (g, slot) in next.iter_mut().enumerate().take(set.count_up_to(r + 1)) {
            let g_order = set.get(g).order();
            let mut acc = ZERO;
            if g_order <= r {
                let n_beta = set.count_up_to(r - g_order).min(sym.active);
                for b in 0..n_beta {
                    let coeff = sym.b0[b];
                    if coeff == ZERO {
                        continue;
                    }
                    if let Some(k) = layout.add[g][b] {
                        acc += layout.binom[g][b] * prev[k as usize] * coeff;
                    }
                }
            }
            for i in 0..dim {
                let Some(gk) = layout.sub_unit[g][i] else {
                    continue;
                };
                let gk = gk as usize;
                let n_beta = set.count_up_to(r + 1 - g_order).min(sym.active);
                for b in 0..n_beta {
                    let coeff = sym.b1[b][i];
                    if coeff == ZERO {
                        continue;
                    }
                    if let Some(k) = layout.add[gk][b] {
                        acc += layout.binom[gk][b] * prev[k as usize] * coeff;
                    }
                }
            }
            *slot = match eta {
                Some(eta) => {
                    let own = if g_order <= r { prev[g] } else { ZERO };
                    (acc / eta + r as f64 * own) / (r + 1) as f64
                }
                None => acc,
            };
        }
        table.push(next);
    }
    table
}

/// Coefficients `h_{r,γ}(u; η)` for `r ≤ K`, `|γ| ≤ r`.
#[derive(Debug, Clone)]
pub struct ExpansionTable {
    order: usize,
    eta: f64,
    u: Vec<Complex64>,
    h: Vec<Vec<Complex64>>,
    layout: Arc<Layout>,
}

impl ExpansionTable {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn frequency(&self) -> &[Complex64] {
        &self.u
    }

    /// `h_{r,γ}`; zero outside the populated range.
    pub fn h(&self, r: usize, gamma: &MultiIndex) -> Complex64 {
        if r > self.order || gamma.order() > r {
            return ZERO;
        }
        match self.layout.set.rank(gamma) {
            Some(rank) => self.h[r][rank],
            None => ZERO,
        }
    }

    /// `q_r(x) = Σ_{|γ|≤r} h_{r,γ} x^γ`.
    pub fn ground_coefficient(&self, r: usize, x: &[f64]) -> Complex64 {
        let set = &self.layout.set;
        (0..set.count_up_to(r))
            .map(|g| self.h[r][g] * set.get(g).monomial(x))
            .sum()
    }

    pub fn ground_coefficients(&self, x: &[f64]) -> Vec<Complex64> {
        (0..=self.order)
            .map(|r| self.ground_coefficient(r, x))
            .collect()
    }

    /// Log expansion `Σ h_{r,0} s^r · exp(iu·x + x·Σ_{r≥1} h_r s^r / Σ h_{r,0} s^r)`.
    pub fn cf_log(&self, x: &[f64], t: f64) -> Result<Complex64> {
        check_state(x, self.u.len())?;
        let s = damping_argument(self.eta, t)?;
        let mut den = ZERO;
        let mut num = ZERO;
        let mut sp = Complex64::new(1.0, 0.0);
        for r in 0..=self.order {
            den += self.h[r][0] * sp;
            if r >= 1 {
                for (i, &xi) in x.iter().enumerate() {
                    if xi != 0.0 {
                        num += self.h[r][self.layout.units[i]] * xi * sp;
                    }
                }
            }
            sp *= s;
        }
        if !(den.norm() > 1e-250) || !den.re.is_finite() || !den.im.is_finite() {
            return Err(Error::DegenerateExpansion {
                u: self.u.clone(),
                t,
            });
        }
        let v = den * (phase(&self.u, x) + num / den).exp();
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::DegenerateExpansion {
                u: self.u.clone(),
                t,
            })
        }
    }

    /// Ground expansion `e^{iu·x} Σ_r q_r(x) s^r`.
    pub fn cf_ground(&self, x: &[f64], t: f64) -> Result<Complex64> {
        check_state(x, self.u.len())?;
        let s = damping_argument(self.eta, t)?;
        let mut acc = ZERO;
        let mut sp = 1.0;
        for r in 0..=self.order {
            acc += self.ground_coefficient(r, x) * sp;
            sp *= s;
        }
        let v = phase(&self.u, x).exp() * acc;
        if v.re.is_finite() && v.im.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!(
                "ground expansion at u = {:?}, t = {t}",
                self.u
            )))
        }
    }
}

fn check_state(x: &[f64], dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    Ok(())
}

fn damping_argument(eta: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "time must be non-negative, got {t}"
        )));
    }
    Ok(-(-eta * t).exp_m1())
}

/// `i u·x`.
fn phase(u: &[Complex64], x: &[f64]) -> Complex64 {
    I * u.iter().zip(x).map(|(ui, &xi)| ui * xi).sum::<Complex64>()
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "damping rate eta must be positive, got {eta}"
        )));
    }
    Ok(())
}

pub fn compute_h_table<S: AffineSymbol + ?Sized>(
    spec: &S,
    u: &[Complex64],
    eta: f64,
    order: usize,
) -> Result<ExpansionTable> {
    check_eta(eta)?;
    let layout = Layout::shared(spec.dim(), order);
    let sym = evaluate_symbols(spec, &layout, u, order)?;
    let h = run_recursion(&layout, &sym, order, Some(eta));
    Ok(ExpansionTable {
        order,
        eta,
        u: u.to_vec(),
        h,
        layout,
    })
}

/// `g_{r,γ}` with `Σ_γ g_{r,γ} x^γ = A^r f_u(x) / f_u(x)`.
#[derive(Debug, Clone)]
pub struct GTable {
    g: Vec<Vec<Complex64>>,
    layout: Arc<Layout>,
}

impl GTable {
    pub fn g(&self, r: usize, gamma: &MultiIndex) -> Complex64 {
        if r >= self.g.len() || gamma.order() > r {
            return ZERO;
        }
        self.layout
            .set
            .rank(gamma)
            .map_or(ZERO, |rank| self.g[r][rank])
    }

    /// `A^r f_u(x) / f_u(x)`.
    pub fn power(&self, r: usize, x: &[f64]) -> Complex64 {
        let set = &self.layout.set;
        (0..set.count_up_to(r))
            .map(|k| self.g[r][k] * set.get(k).monomial(x))
            .sum()
    }
}

pub fn compute_g_table<S: AffineSymbol + ?Sized>(
    spec: &S,
    u: &[Complex64],
    order: usize,
) -> Result<GTable> {
    let layout = Layout::shared(spec.dim(), order);
    let sym = evaluate_symbols(spec, &layout, u, order)?;
    let g = run_recursion(&layout, &sym, order, None);
    Ok(GTable { g, layout })
}

pub fn approx_cf_log<S: AffineSymbol + ?Sized>(
    spec: &S,
    x: &[f64],
    t: f64,
    u: &[Complex64],
    eta: f64,
    order: usize,
) -> Result<Complex64> {
    compute_h_table(spec, u, eta, order)?.cf_log(x, t)
}

pub fn approx_cf_ground<S: AffineSymbol + ?Sized>(
    spec: &S,
    x: &[f64],
    t: f64,
    u: &[Complex64],
    eta: f64,
    order: usize,
) -> Result<Complex64> {
    compute_h_table(spec, u, eta, order)?.cf_ground(x, t)
}

/// A damping rate together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaEstimate {
    pub eta: f64,
    /// `(π/2)(|A^K f_u(x)| / K!)^{1/K}` before floor and cap.
    pub raw: f64,
    pub floored: bool,
    pub capped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaBounds {
    pub floor: f64,
    pub cap: f64,
}

impl Default for EtaBounds {
    fn default() -> Self {
        EtaBounds {
            floor: DEFAULT_ETA_FLOOR,
            cap: DEFAULT_ETA_CAP,
        }
    }
}

/// Cauchy-criterion guess `(π/2)(|A^K f_u(x)| / K!)^{1/K}` for the damping
/// rate, clamped to `[floor, cap]`.
pub fn heuristic_eta<S: AffineSymbol + ?Sized>(
    spec: &S,
    x: &[f64],
    u: &[Complex64],
    order: usize,
    bounds: EtaBounds,
) -> Result<EtaEstimate> {
    check_state(x, spec.dim())?;
    if order == 0 {
        return Ok(EtaEstimate {
            eta: bounds.floor,
            raw: 0.0,
            floored: true,
            capped: false,
        });
    }
    let g = compute_g_table(spec, u, order)?;
    let modulus = g.power(order, x).norm() * phase(u, x).exp().norm();
    let raw = if modulus.is_finite() {
        FRAC_PI_2 * (modulus / factorial(order)).powf(1.0 / order as f64)
    } else {
        f64::INFINITY
    };
    let floored = !(raw >= bounds.floor);
    let capped = raw > bounds.cap;
    let eta = if floored {
        bounds.floor
    } else if capped {
        bounds.cap
    } else {
        raw
    };
    Ok(EtaEstimate {
        eta,
        raw,
        floored,
        capped,
    })
}

/// How the damping rate of an [`ExpansionCf`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaPolicy {
    Fixed(f64),
    /// Heuristic rate at every evaluated frequency.
    Heuristic,
    /// Heuristic rate computed once at the real frequency `(u_max, 0, …)`.
    HeuristicAt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExpansionKind {
    #[default]
    Log,
    Ground,
}

/// Truncated expansion of the characteristic function of an affine process
/// started at `x`, usable as a frequency-vector characteristic function.
#[derive(Clone)]
pub struct ExpansionCf {
    spec: Arc<dyn AffineSymbol>,
    x: Vec<f64>,
    order: usize,
    policy: EtaPolicy,
    kind: ExpansionKind,
    bounds: EtaBounds,
    fixed_eta: Option<f64>,
}

impl std::fmt::Debug for ExpansionCf {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExpansionCf")
            .field("dim", &self.spec.dim())
            .field("x", &self.x)
            .field("order", &self.order)
            .field("policy", &self.policy)
            .field("kind", &self.kind)
            .finish_non_exhaustive()
    }
}

impl ExpansionCf {
    pub fn new(
        spec: Arc<dyn AffineSymbol>,
        x: Vec<f64>,
        order: usize,
        policy: EtaPolicy,
    ) -> Result<Self> {
        Self::with_options(spec, x, order, policy, ExpansionKind::Log, EtaBounds::default())
    }

    pub fn with_options(
        spec: Arc<dyn AffineSymbol>,
        x: Vec<f64>,
        order: usize,
        policy: EtaPolicy,
        kind: ExpansionKind,
        bounds: EtaBounds,
    ) -> Result<Self> {
        check_state(&x, spec.dim())?;
        if !(bounds.floor > 0.0 && bounds.cap >= bounds.floor) {
            return Err(Error::ParameterDomain(format!(
                "eta bounds must satisfy 0 < floor <= cap, got {bounds:?}"
            )));
        }
        let fixed_eta = match policy {
            EtaPolicy::Fixed(eta) => {
                check_eta(eta)?;
                Some(eta)
            }
            EtaPolicy::Heuristic => None,
            EtaPolicy::HeuristicAt(u_max) => {
                if !(u_max >= 0.0 && u_max.is_finite()) {
                    return Err(Error::ParameterDomain(format!(
                        "heuristic-at needs a finite u_max >= 0, got {u_max}"
                    )));
                }
                let mut u = vec![ZERO; spec.dim()];
                u[0] = Complex64::new(u_max, 0.0);
                Some(heuristic_eta(spec.as_ref(), &x, &u, order, bounds)?.eta)
            }
        };
        Ok(ExpansionCf {
            spec,
            x,
            order,
            policy,
            kind,
            bounds,
            fixed_eta,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn policy(&self) -> EtaPolicy {
        self.policy
    }

    pub fn kind(&self) -> ExpansionKind {
        self.kind
    }

    pub fn symbol(&self) -> &Arc<dyn AffineSymbol> {
        &self.spec
    }

    /// Damping rate used at frequency `u`.
    pub fn eta_for(&self, u: &[Complex64]) -> Result<EtaEstimate> {
        match self.fixed_eta {
            Some(eta) => Ok(EtaEstimate {
                eta,
                raw: eta,
                floored: false,
                capped: false,
            }),
            None => heuristic_eta(self.spec.as_ref(), &self.x, u, self.order, self.bounds),
        }
    }

    pub fn table(&self, u: &[Complex64]) -> Result<ExpansionTable> {
        let eta = self.eta_for(u)?.eta;
        compute_h_table(self.spec.as_ref(), u, eta, self.order)
    }
}

impl VectorCharacteristicFn for ExpansionCf {
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    fn state(&self) -> &[f64] {
        &self.x
    }

    fn evaluate_vec(&self, t: f64, u: &[Complex64]) -> Result<Complex64> {
        if t == 0.0 {
            if u.len() != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: u.len(),
                });
            }
            return Ok(phase(u, &self.x).exp());
        }
        let table = self.table(u)?;
        match self.kind {
            ExpansionKind::Log => table.cf_log(&self.x, t),
            ExpansionKind::Ground => table.cf_ground(&self.x, t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::heston_cf;
    use crate::symbol::{heston_symbols, symbol, FnSymbol, HestonParams};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mi(a: usize, b: usize) -> MultiIndex {
        MultiIndex::new(vec![a, b])
    }

    fn h_params() -> HestonParams {
        HestonParams::new(1.0, 1.5, 0.6, 0.04, -0.2).unwrap()
    }

    fn x_params() -> HestonParams {
        HestonParams::new(1.0, 1.5, 0.3, 0.0225, -0.3).unwrap()
    }

    fn heur(spec: &dyn AffineSymbol, x: &[f64], u: f64, k: usize) -> f64 {
        heuristic_eta(spec, x, &[c(u, 0.0), c(0.0, 0.0)], k, EtaBounds::default())
            .unwrap()
            .eta
    }

    #[test]
    fn boundary_identities() {
        let s = heston_symbols(x_params()).unwrap();
        for u in [c(0.0, 0.0), c(3.0, 0.0), c(-2.0, -1.0)] {
            let uv = [u, c(0.4, 0.0)];
            let eta = 2.5;
            let table = compute_h_table(&s, &uv, eta, 8).unwrap();
            assert_eq!(table.h(0, &mi(0, 0)), c(1.0, 0.0));
            for r in 0..=8 {
                for g in MultiIndexSet::graded_lex(2, 8).iter() {
                    if g.order() > r {
                        assert_eq!(table.h(r, g), c(0.0, 0.0));
                        assert_eq!(table.h[r][table.layout.set.rank(g).unwrap()], c(0.0, 0.0));
                    }
                }
            }
            let zero = MultiIndex::zeros(2);
            assert_eq!(table.h(1, &mi(0, 0)), s.b0(&zero, &uv).unwrap() / eta);
            assert_eq!(table.h(1, &mi(0, 1)), s.b1(&zero, 1, &uv).unwrap() / eta);
            assert_eq!(table.h(1, &mi(1, 0)), s.b1(&zero, 0, &uv).unwrap() / eta);
        }
    }

    #[test]
    fn trivial_time_and_order() {
        let s = heston_symbols(h_params()).unwrap();
        let x = [0.3, 0.04];
        let u = [c(1.7, 0.0), c(0.0, 0.0)];
        let expected = (I * 1.7 * 0.3).exp();
        for kind in [approx_cf_log::<crate::symbol::HestonSymbol>, approx_cf_ground] {
            assert_eq!(kind(&s, &x, 0.0, &u, 3.0, 8).unwrap(), expected);
            assert_eq!(kind(&s, &x, 1.3, &u, 3.0, 0).unwrap(), expected);
        }
    }

    #[test]
    fn ground_at_zero_state_uses_only_pure_coefficients() {
        let s = heston_symbols(h_params()).unwrap();
        let u = [c(2.0, 0.0), c(0.5, 0.0)];
        let table = compute_h_table(&s, &u, 4.0, 6).unwrap();
        let sv: f64 = -(-4.0f64 * 0.3).exp_m1();
        let expected: Complex64 = (0..=6).map(|r| table.h(r, &mi(0, 0)) * sv.powi(r as i32)).sum();
        let got = table.cf_ground(&[0.0, 0.0], 0.3).unwrap();
        assert!((got - expected).norm() < 1e-15);
    }

    #[test]
    fn non_positive_eta_is_rejected() {
        let s = heston_symbols(h_params()).unwrap();
        let u = [c(1.0, 0.0), c(0.0, 0.0)];
        assert!(compute_h_table(&s, &u, 0.0, 4).is_err());
        assert!(compute_h_table(&s, &u, -1.0, 4).is_err());
    }

    #[test]
    fn degenerate_denominator_is_reported() {
        // b⁰_0 = -η makes Σ h_{r,0} s^r = 1 - s at K = 1, which is exactly 0 once e^{-ηt} underflows
        let spec = FnSymbol::new(
            2,
            |b, _| if b.is_zero() { c(-1.0, 0.0) } else { c(0.0, 0.0) },
            |_, _, _| c(0.0, 0.0),
            Some(0),
        );
        let u = [c(1.0, 0.0), c(0.0, 0.0)];
        let err = approx_cf_log(&spec, &[0.0, 0.1], 1e3, &u, 1.0, 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateExpansion { .. }), "{err:?}");
    }

    #[test]
    fn constant_symbol_heuristic_eta() {
        let cval = c(-7.0, 2.0);
        let spec = FnSymbol::new(
            2,
            move |b, _| if b.is_zero() { cval } else { c(0.0, 0.0) },
            |_, _, _| c(0.0, 0.0),
            Some(0),
        );
        for k in [1, 3, 8] {
            let est = heuristic_eta(&spec, &[0.0, 0.5], &[c(1.0, 0.0), c(0.0, 0.0)], k, EtaBounds::default()).unwrap();
            let expected = FRAC_PI_2 * (cval.norm().powi(k as i32) / factorial(k)).powf(1.0 / k as f64);
            assert!((est.raw - expected).abs() < 1e-12 * expected);
        }
    }

    #[test]
    fn heuristic_eta_floor_at_zero_frequency() {
        let s = heston_symbols(h_params()).unwrap();
        let est = heuristic_eta(&s, &[0.0, 0.04], &[c(0.0, 0.0), c(0.0, 0.0)], 8, EtaBounds::default()).unwrap();
        assert_eq!(est.raw, 0.0);
        assert!(est.floored);
        assert_eq!(est.eta, DEFAULT_ETA_FLOOR);
    }

    #[test]
    fn heuristic_eta_grows_quadratically() {
        let s = heston_symbols(x_params()).unwrap();
        let x = [0.0, 1.0];
        let us = [4.0f64, 8.0, 16.0, 32.0];
        let pts: Vec<(f64, f64)> = us
            .iter()
            .map(|&u| {
                let est = heuristic_eta(&s, &x, &[c(u, 0.0), c(0.0, 0.0)], 8, EtaBounds { floor: 1e-12, cap: 1e12 }).unwrap();
                (u.ln(), est.raw.ln())
            })
            .collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!(slope >= 1.8, "fitted exponent {slope}");
    }

    #[test]
    fn first_power_is_the_symbol() {
        let s = heston_symbols(h_params()).unwrap();
        for (x, u) in [([0.2, 0.04], [c(1.5, 0.0), c(-0.7, 0.0)]), ([-1.0, 0.3], [c(0.0, -1.0), c(2.0, 0.5)])] {
            let g = compute_g_table(&s, &u, 3).unwrap();
            let sym = symbol(&s, &x, &u).unwrap();
            assert!((g.power(1, &x) - sym).norm() <= 1e-14 * (1.0 + sym.norm()));
        }
    }

    #[test]
    fn second_power_matches_explicit_generator() {
        // A(fS) = S·Af + f·AS + Γ(f, S) with S = c0 + c1 x₂ the symbol
        let p = h_params();
        let s = heston_symbols(p).unwrap();
        for (x, u) in [([0.2, 0.04], [c(1.5, 0.0), c(-0.7, 0.0)]), ([0.0, 0.7], [c(-3.0, 0.0), c(1.1, 0.0)])] {
            let zero = MultiIndex::zeros(2);
            let c0 = s.b0(&zero, &u).unwrap();
            let c1 = s.b1(&zero, 1, &u).unwrap();
            let sym = c0 + c1 * x[1];
            let x2 = x[1];
            let explicit = sym * sym
                + p.kappa * (p.theta - x2) * c1
                + x2 * c1 * (p.alpha * p.sigma * p.rho * I * u[0] + p.sigma * p.sigma * I * u[1]);
            let g = compute_g_table(&s, &u, 2).unwrap();
            assert!((g.power(2, &x) - explicit).norm() <= 1e-12 * (1.0 + explicit.norm()));
        }
    }

    #[test]
    fn matches_exact_heston_in_short_maturity_regime() {
        let p = x_params();
        let s = heston_symbols(p).unwrap();
        let x = [0.0, p.theta];
        let mut worst_log: f64 = 0.0;
        let mut worst_ground: f64 = 0.0;
        for t in [0.125, 0.25, 0.5] {
            for k in -32..=32 {
                let u = [c(k as f64 / 4.0, 0.0), c(0.0, 0.0)];
                let eta = heuristic_eta(&s, &x, &u, 8, EtaBounds::default()).unwrap().eta;
                let exact = heston_cf(&p, p.theta, t, u[0]).unwrap();
                worst_log = worst_log.max((approx_cf_log(&s, &x, t, &u, eta, 8).unwrap() - exact).norm());
                worst_ground = worst_ground.max((approx_cf_ground(&s, &x, t, &u, eta, 8).unwrap() - exact).norm());
            }
        }
        assert!(worst_log <= 1e-3, "log {worst_log}");
        assert!(worst_ground <= 1e-3, "ground {worst_ground}");
    }

    #[test]
    fn unit_frequency_half_year_example() {
        let p = x_params();
        let s = heston_symbols(p).unwrap();
        let x = [0.0, 0.0225];
        let u = [c(1.0, 0.0), c(0.0, 0.0)];
        let eta = heur(&s, &x, 1.0, 8);
        let v = approx_cf_log(&s, &x, 0.5, &u, eta, 8).unwrap();
        assert!((v - heston_cf(&p, 0.0225, 0.5, u[0]).unwrap()).norm() <= 1e-3);
    }

    #[test]
    fn log_and_ground_expansions_agree() {
        let p = x_params();
        let s = heston_symbols(p).unwrap();
        let x = [0.0, p.theta];
        for (t, tol) in [(0.125, 1e-6), (0.25, 1e-6), (0.5, 1e-4)] {
            for k in -32..=32 {
                let u = [c(k as f64 / 4.0, 0.0), c(0.0, 0.0)];
                let table = compute_h_table(&s, &u, heur(&s, &x, u[0].re, 8), 8).unwrap();
                let a = table.cf_log(&x, t).unwrap();
                let b = table.cf_ground(&x, t).unwrap();
                assert!((a - b).norm() <= tol, "t={t} u={}: {}", u[0], (a - b).norm());
            }
        }
    }

    #[test]
    fn expansion_cf_policies() {
        let p = x_params();
        let spec: Arc<dyn AffineSymbol> = Arc::new(heston_symbols(p).unwrap());
        let x = vec![0.0, p.theta];
        let u = [c(2.5, 0.0), c(0.0, 0.0)];
        let fixed = ExpansionCf::new(spec.clone(), x.clone(), 8, EtaPolicy::Fixed(3.0)).unwrap();
        assert_eq!(
            fixed.evaluate_vec(0.7, &u).unwrap(),
            approx_cf_log(spec.as_ref(), &x, 0.7, &u, 3.0, 8).unwrap()
        );
        let heuristic = ExpansionCf::new(spec.clone(), x.clone(), 8, EtaPolicy::Heuristic).unwrap();
        assert_eq!(heuristic.evaluate_vec(0.0, &u).unwrap(), (I * 0.0).exp());
        let at = ExpansionCf::new(spec.clone(), x.clone(), 8, EtaPolicy::HeuristicAt(16.0)).unwrap();
        assert_eq!(at.eta_for(&u).unwrap().eta, heur(spec.as_ref(), &x, 16.0, 8));
        assert!(ExpansionCf::new(spec.clone(), x.clone(), 8, EtaPolicy::Fixed(0.0)).is_err());
        assert!(ExpansionCf::new(spec.clone(), x.clone(), 8, EtaPolicy::HeuristicAt(f64::NAN)).is_err());
        assert!(ExpansionCf::new(spec, vec![0.0], 8, EtaPolicy::Heuristic).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn zero_time_gives_plain_phase(
            eta in 0.1f64..50.0, u1 in -10.0f64..10.0, u2 in -10.0f64..10.0,
            x1 in -1.0f64..1.0, x2 in 0.0f64..1.0,
        ) {
            let s = heston_symbols(h_params()).unwrap();
            let u = [c(u1, 0.0), c(u2, 0.0)];
            let x = [x1, x2];
            let expected = (I * (u1 * x1 + u2 * x2)).exp();
            prop_assert_eq!(approx_cf_log(&s, &x, 0.0, &u, eta, 8).unwrap(), expected);
            prop_assert_eq!(approx_cf_ground(&s, &x, 0.0, &u, eta, 8).unwrap(), expected);
        }

        #[test]
        fn expansion_is_hermitian(u in -8.0f64..8.0, t in 0.0f64..2.0) {
            let p = x_params();
            let s = heston_symbols(p).unwrap();
            let x = [0.0, p.theta];
            let plus = [c(u, 0.0), c(0.0, 0.0)];
            let minus = [c(-u, 0.0), c(0.0, 0.0)];
            let eta = heur(&s, &x, u, 8);
            let a = approx_cf_log(&s, &x, t, &plus, eta, 8).unwrap();
            let b = approx_cf_log(&s, &x, t, &minus, eta, 8).unwrap();
            prop_assert!((a - b.conj()).norm() <= 1e-12);
        }

        #[test]
        fn damping_argument_stays_in_unit_interval(eta in 1e-3f64..1e6, t in 0.0f64..1e3) {
            let s = damping_argument(eta, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            let s2 = damping_argument(2.0 * eta, t).unwrap();
            prop_assert!((0.0..=1.0).contains(&s2) && s2 >= s);
        }
    }
}
