//! Experiment commands behind the `affinecf` binary. Each command returns a
//! numeric table plus warnings; rendering and exit codes live in the binary.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::cf::CharacteristicFn;
use crate::composition::FirstComponent;
use crate::config::{ExperimentConfig, PricingMethod};
use crate::error::{Error, Result};
use crate::expansion::{heuristic_eta, EtaBounds, ExpansionCf, ExpansionKind};
use crate::monte_carlo::{empirical_cf, mc_price, simulate, trajectory, McConfig};
use crate::pricing::implied_vol;
use crate::symbol::real_frequency;

/// Exact prices used as the reference are computed on at least this half-width.
pub const REFERENCE_L: f64 = 64.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub code: &'static str,
    pub message: String,
}

impl Warning {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Warning {
            code,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "WARN {} {}", self.code, self.message)
    }
}

/// A CSV table of optional numbers; `None` renders as an empty cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<Warning>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            ..Default::default()
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn render(&self, precision: usize) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| c.map_or_else(String::new, |v| format_sig(v, precision)))
                .collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// `x` with `digits` significant digits, positional notation where sensible.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let exp = x.abs().log10().floor() as i32;
    let decimals = digits as i32 - 1 - exp;
    if (-20..=4).contains(&exp) && decimals >= 0 {
        format!("{x:.*}", decimals as usize)
    } else if (5..=16).contains(&exp) && decimals < 0 {
        let scale = 10f64.powi(-decimals);
        format!("{:.0}", (x / scale).round() * scale)
    } else {
        format!("{x:.*e}", digits - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfVariants {
    Exact,
    Approx,
    Mc,
    All,
}

impl std::str::FromStr for CfVariants {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CfVariants::Exact),
            "approx" => Ok(CfVariants::Approx),
            "mc" => Ok(CfVariants::Mc),
            "all" => Ok(CfVariants::All),
            other => Err(Error::Config(format!("unknown cf variant {other:?}"))),
        }
    }
}

/// Inclusive grid of `n` points; `n = 1` gives `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| (lo * (m - i as f64) + hi * i as f64) / m)
        .collect()
}

fn check_positive(name: &str, values: &[f64]) -> Result<()> {
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(Error::Config(format!("{name} must be positive, got {v}"))),
        None => Ok(()),
    }
}

fn split(c: Option<Complex64>) -> [Option<f64>; 2] {
    [c.map(|c| c.re), c.map(|c| c.im)]
}

/// Characteristic functions of `Y_t` on a real grid.
pub fn cmd_cf(
    cfg: &ExperimentConfig,
    maturities: &[f64],
    u_grid: &[f64],
    which: CfVariants,
    mc: McConfig,
) -> Result<Table> {
    check_positive("maturities", maturities)?;
    let want_exact = matches!(which, CfVariants::Exact | CfVariants::All);
    let want_approx = matches!(which, CfVariants::Approx | CfVariants::All);
    let want_mc = matches!(which, CfVariants::Mc | CfVariants::All);
    let mut table = Table::new(&["t", "u", "re_exact", "im_exact", "re_approx", "im_approx"]);
    if want_mc {
        table.header.extend(["re_mc", "im_mc"]);
    }
    let exact = if want_exact {
        match cfg.exact_model() {
            Ok(m) => Some(m),
            Err(e @ Error::Capability(_)) if which == CfVariants::All => {
                table.warnings.push(Warning::new("no-exact-cf", e.to_string()));
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let approx = if want_approx { Some(cfg.approx_model()?) } else { None };
    let mc_model = if want_mc { Some(cfg.mc_model()?) } else { None };

    for &t in maturities {
        let mc_values = match &mc_model {
            Some(m) => Some(empirical_cf(&simulate(m, t, mc)?, u_grid)),
            None => None,
        };
        let cells: Vec<Vec<Option<f64>>> = u_grid
            .par_iter()
            .enumerate()
            .map(|(j, &u)| {
                let z = Complex64::new(u, 0.0);
                let e = exact.as_ref().map(|m| m.evaluate(t, z)).transpose()?;
                let a = approx.as_ref().map(|m| m.evaluate(t, z)).transpose()?;
                let mut row = vec![Some(t), Some(u)];
                row.extend(split(e));
                row.extend(split(a));
                if let Some(v) = &mc_values {
                    row.extend(split(Some(v[j])));
                }
                Ok(row)
            })
            .collect::<Result<_>>()?;
        table.rows.extend(cells);
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRequest {
    pub strikes: Vec<f64>,
    pub maturities: Vec<f64>,
    pub l_list: Vec<f64>,
    pub method: PricingMethod,
    /// Monte Carlo reference for models without an exact price.
    pub mc_reference: Option<McConfig>,
}

/// Exact and approximate prices on a `(K, T, L)` grid, sorted by K, then T, then L.
pub fn cmd_price(cfg: &ExperimentConfig, req: &PriceRequest) -> Result<Table> {
    check_positive("strikes", &req.strikes)?;
    check_positive("maturities", &req.maturities)?;
    check_positive("l", &req.l_list)?;
    let mut table = Table::new(&["K", "T", "L", "price_exact", "price_approx", "rel_error"]);
    let mut strikes = req.strikes.clone();
    strikes.sort_by(f64::total_cmp);
    let mut maturities = req.maturities.clone();
    maturities.sort_by(f64::total_cmp);
    let mut ls = req.l_list.clone();
    ls.sort_by(f64::total_cmp);

    let exact = if cfg.has_exact() {
        Some(cfg.exact_model()?)
    } else {
        table.warnings.push(Warning::new(
            "no-exact-cf",
            "state-dependent jumps: exact prices left empty",
        ));
        None
    };
    let approx = cfg.approx_model()?;
    let l_ref = ls.last().copied().unwrap_or(REFERENCE_L).max(REFERENCE_L);

    let pairs: Vec<(f64, f64)> = strikes
        .iter()
        .flat_map(|&k| maturities.iter().map(move |&t| (k, t)))
        .collect();
    let mut reference: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|&(k, t)| {
            exact
                .as_ref()
                .map(|m| cfg.price(m, req.method, k, t, l_ref).map(|p| p.price))
                .transpose()
        })
        .collect::<Result<_>>()?;
    if exact.is_none() {
        if let Some(mc) = req.mc_reference {
            let model = cfg.mc_model()?;
            for (j, &t) in maturities.iter().enumerate() {
                let sample = simulate(&model, t, mc)?;
                for (i, &k) in strikes.iter().enumerate() {
                    let p = mc_price(&sample, cfg.market.s0, k, cfg.market.r, t)?;
                    reference[i * maturities.len() + j] = Some(p.price);
                }
            }
        }
    }

    let cells: Vec<(usize, f64)> = (0..pairs.len())
        .flat_map(|i| ls.iter().map(move |&l| (i, l)))
        .collect();
    let rows: Vec<(Vec<Option<f64>>, Option<Warning>)> = cells
        .par_iter()
        .map(|&(i, l)| {
            let (k, t) = pairs[i];
            let e = exact
                .as_ref()
                .map(|m| cfg.price(m, req.method, k, t, l))
                .transpose()?;
            let a = cfg.price(&approx, req.method, k, t, l)?;
            let rel = reference[i].map(|r| (a.price - r).abs() / r.abs());
            let tol = cfg.method.rel_tol * a.price.abs().max(1e-12);
            let warn = (a.diagnostics.error_estimate > 0.5 * tol).then(|| {
                Warning::new(
                    "quadrature-tolerance",
                    format!(
                        "K={k} T={t} L={l}: error estimate {:.3e} near tolerance",
                        a.diagnostics.error_estimate
                    ),
                )
            });
            Ok((
                vec![Some(k), Some(t), Some(l), e.map(|e| e.price), Some(a.price), rel],
                warn,
            ))
        })
        .collect::<Result<_>>()?;
    for (row, warn) in rows {
        table.rows.push(row);
        table.warnings.extend(warn);
    }
    Ok(table)
}

/// Implied volatilities of exact and approximate prices on the configured `L`.
pub fn cmd_iv(cfg: &ExperimentConfig, strikes: &[f64], maturities: &[f64]) -> Result<Table> {
    check_positive("strikes", strikes)?;
    check_positive("maturities", maturities)?;
    let mut table = Table::new(&["K", "T", "iv_exact", "iv_approx"]);
    let exact = if cfg.has_exact() {
        Some(cfg.exact_model()?)
    } else {
        table.warnings.push(Warning::new(
            "no-exact-cf",
            "state-dependent jumps: exact implied volatilities left empty",
        ));
        None
    };
    let approx = cfg.approx_model()?;
    let (s0, r, l) = (cfg.market.s0, cfg.market.r, cfg.method.l);
    let mut cells: Vec<(f64, f64)> = strikes
        .iter()
        .flat_map(|&k| maturities.iter().map(move |&t| (k, t)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let method = cfg.method.pricing;
    let rows: Vec<(Vec<Option<f64>>, Vec<Warning>)> = cells
        .par_iter()
        .map(|&(k, t)| {
            let mut warnings = Vec::new();
            let mut iv = |label: &str, model: Option<&_>| -> Option<f64> {
                let price = cfg.price(model?, method, k, t, l);
                match price.and_then(|p| implied_vol(p.price, s0, k, t, r)) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        warnings.push(Warning::new(
                            "iv-inversion",
                            format!("K={k} T={t} {label}: {e}"),
                        ));
                        None
                    }
                }
            };
            let e = iv("exact", exact.as_ref());
            let a = iv("approx", Some(&approx));
            (vec![Some(k), Some(t), e, a], warnings)
        })
        .collect();
    for (row, w) in rows {
        table.rows.push(row);
        table.warnings.extend(w);
    }
    Ok(table)
}

/// Monte Carlo call prices at one maturity.
pub fn cmd_mc(cfg: &ExperimentConfig, strikes: &[f64], maturity: f64, mc: McConfig) -> Result<Table> {
    check_positive("strikes", strikes)?;
    check_positive("maturities", &[maturity])?;
    let mut table = Table::new(&["K", "price_mc", "stderr", "rel_stderr"]);
    let mut strikes = strikes.to_vec();
    strikes.sort_by(f64::total_cmp);
    if strikes.is_empty() {
        return Ok(table);
    }
    let sample = simulate(&cfg.mc_model()?, maturity, mc)?;
    for k in strikes {
        let p = mc_price(&sample, cfg.market.s0, k, cfg.market.r, maturity)?;
        let rel = (p.price != 0.0).then(|| p.stderr / p.price);
        table.rows.push(vec![Some(k), Some(p.price), Some(p.stderr), rel]);
    }
    Ok(table)
}

/// One simulated path as `t, s, vol_total, v2`.
pub fn cmd_trajectory(cfg: &ExperimentConfig, maturity: f64, mc: McConfig, path: usize) -> Result<Table> {
    let mut table = Table::new(&["t", "s", "vol_total", "v2"]);
    let (s0, r) = (cfg.market.s0, cfg.market.r);
    for p in trajectory(&cfg.mc_model()?, maturity, mc, path)? {
        table.rows.push(vec![
            Some(p.t),
            Some(s0 * (r * p.t + p.y).exp()),
            Some(p.vol_total),
            Some(p.v2),
        ]);
    }
    Ok(table)
}

/// Heuristic damping rate and expansion accuracy of `X¹` over frequencies and orders.
pub fn cmd_eta_scan(cfg: &ExperimentConfig, maturity: f64, u_list: &[f64], k_list: &[usize]) -> Result<Table> {
    check_positive("maturities", &[maturity])?;
    if let Some(k) = k_list.iter().find(|k| **k == 0) {
        return Err(Error::Config(format!("expansion orders must be positive, got {k}")));
    }
    let mut table = Table::new(&[
        "u",
        "K",
        "eta_heuristic",
        "cf_approx_re",
        "cf_approx_im",
        "cf_exact_re",
        "cf_exact_im",
        "abs_err",
    ]);
    let symbol = cfg.x_symbol()?;
    let x = vec![0.0, cfg.model.x.heston()?.v0];
    let exact = cfg.has_exact().then(|| cfg.x_exact()).transpose()?;
    let kind: ExpansionKind = cfg.x_expansion()?.kind();
    let mut cells: Vec<(f64, usize)> = u_list
        .iter()
        .flat_map(|&u| k_list.iter().map(move |&k| (u, k)))
        .collect();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let rows: Vec<(Vec<Option<f64>>, bool)> = cells
        .par_iter()
        .map(|&(u, k)| {
            let freq = real_frequency(&[u, 0.0]);
            let eta = heuristic_eta(symbol.as_ref(), &x, &freq, k, EtaBounds::default())?;
            let cf = ExpansionCf::with_options(
                symbol.clone(),
                x.clone(),
                k,
                cfg.eta_policy(),
                kind,
                EtaBounds::default(),
            )?;
            let a = FirstComponent::new(cf)?.evaluate(maturity, Complex64::new(u, 0.0))?;
            let e = exact
                .as_ref()
                .map(|m| m.evaluate(maturity, Complex64::new(u, 0.0)))
                .transpose()?;
            let err = e.map(|e| (a - e).norm());
            let mut row = vec![Some(u), Some(k as f64), Some(eta.eta)];
            row.extend(split(Some(a)));
            row.extend(split(e));
            row.push(err);
            Ok((row, eta.floored && u != 0.0))
        })
        .collect::<Result<_>>()?;
    let floored = rows.iter().filter(|r| r.1).count();
    table.rows = rows.into_iter().map(|r| r.0).collect();
    if floored > 0 {
        table.warnings.push(Warning::new(
            "eta-floor",
            format!("{floored} of {} non-zero frequency cells used the floor rate", table.rows.len()),
        ));
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digit_formatting() {
        assert_eq!(format_sig(1.18964123456789, 10), "1.189641235");
        assert_eq!(format_sig(0.0818, 4), "0.08180");
        assert_eq!(format_sig(-2.5, 3), "-2.50");
        assert_eq!(format_sig(0.0, 10), "0");
        assert_eq!(format_sig(123456.0, 3), "123000");
        assert_eq!(format_sig(1.5e-30, 3), "1.50e-30");
        assert!(!format_sig(1234.5678, 10).contains(','));
    }

    #[test]
    fn linspace_hits_zero_exactly() {
        let g = linspace(-10.0, 10.0, 201);
        assert_eq!(g.len(), 201);
        assert_eq!(g[100], 0.0);
        assert_eq!(g[0], -10.0);
        assert_eq!(g[200], 10.0);
    }

    #[test]
    fn render_leaves_missing_cells_empty() {
        let t = Table {
            header: vec!["a", "b"],
            rows: vec![vec![Some(1.0), None]],
            warnings: vec![],
        };
        assert_eq!(t.render(3), "a,b\n1.00,\n");
    }
}
