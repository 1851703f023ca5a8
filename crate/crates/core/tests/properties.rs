mod common;

use std::path::Path;

use affinecf::config::*;
use affinecf::harness::{cmd_iv, cmd_mc, format_sig};
use affinecf::monte_carlo::McConfig;
use proptest::prelude::*;

fn shipped(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

fn heston_strategy() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64)> {
    (0.3..2.0f64, 0.2..4.0f64, 0.05..1.0f64, 0.005..0.2f64, -0.95..0.95f64, 0.005..0.2f64)
}

fn jump_strategy() -> impl Strategy<Value = JumpConfig> {
    prop_oneof![
        Just(JumpConfig::None),
        (1.5..20.0f64).prop_map(|rate| JumpConfig::ExpNegative { rate }),
        (-0.3..0.3f64, 0.01..0.5f64).prop_map(|(mean, std)| JumpConfig::Gaussian { mean, std }),
    ]
}

prop_compose! {
    fn config_strategy()(
        s0 in 0.5..200.0f64,
        r in -0.05..0.2f64,
        h in heston_strategy(),
        x in heston_strategy(),
        h_kind in 0..3u8,
        hsdj in any::<bool>(),
        lambda0 in 0.0..5.0f64,
        lambda1 in 0.0..20.0f64,
        jump0 in jump_strategy(),
        jump1 in jump_strategy(),
        order in 1..12usize,
        sigma_b in proptest::option::of(0.01..1.0f64),
        l in 1.0..256.0f64,
        seed in any::<u64>(),
        precision in 1..17usize,
    ) -> ExperimentConfig {
        let h = match h_kind {
            0 => HConfig::None,
            1 => HConfig::Brownian { sigma: h.2 },
            _ => HConfig::Heston { alpha: h.0, kappa: h.1, sigma: h.2, theta: h.3, rho: h.4, v0: h.5 },
        };
        let x = if hsdj {
            XConfig::Hsdj { alpha: x.0, kappa: x.1, sigma: x.2, theta: x.3, rho: x.4, v0: x.5, lambda0, lambda1, jump0, jump1 }
        } else {
            XConfig::Heston { alpha: x.0, kappa: x.1, sigma: x.2, theta: x.3, rho: x.4, v0: x.5 }
        };
        ExperimentConfig {
            market: MarketConfig { s0, r },
            model: ModelConfig { h, x },
            method: MethodConfig { order, sigma_b, l, ..Default::default() },
            mc: MonteCarloConfig { seed, ..Default::default() },
            output: OutputConfig { precision, ..Default::default() },
        }
    }
}

proptest! {
    #[test]
    fn config_round_trips(cfg in config_strategy()) {
        let text = cfg.to_toml();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn formatted_numbers_parse_back(x in -1e12..1e12f64, digits in 1..17usize) {
        let s = format_sig(x, digits);
        prop_assert!(!s.contains(','));
        let y: f64 = s.parse().unwrap();
        let tol = 10f64.powi(1 - digits as i32) * x.abs();
        prop_assert!((x - y).abs() <= tol, "{} -> {}", x, s);
    }
}

#[test]
fn seed_change_moves_mc_prices_within_combined_error() {
    let cfg = shipped("hsdj.toml");
    let strikes = [8.0, 10.0, 12.0];
    let a = cmd_mc(&cfg, &strikes, 0.5, cfg.mc_config(false)).unwrap();
    let b = cmd_mc(&cfg, &strikes, 0.5, McConfig { seed: 99, ..cfg.mc_config(false) }).unwrap();
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let (pa, sa) = (ra[1].unwrap(), ra[2].unwrap());
        let (pb, sb) = (rb[1].unwrap(), rb[2].unwrap());
        assert_ne!(pa, pb);
        assert!((pa - pb).abs() <= 3.0 * (sa * sa + sb * sb).sqrt(), "{pa} vs {pb}");
    }
}

#[test]
fn implied_vol_gap_grows_with_maturity() {
    let cfg = shipped("heston-heston.toml");
    let maturities = [0.5, 1.0, 2.0, 5.0];
    let table = cmd_iv(&cfg, &[10.0], &maturities).unwrap();
    let gaps: Vec<f64> = table.rows.iter().map(|r| (r[2].unwrap() - r[3].unwrap()).abs()).collect();
    assert!(gaps.windows(2).all(|w| w[1] > w[0]), "{gaps:?}");
}

#[test]
fn state_dependent_jumps_raise_atm_implied_vol() {
    let hh = shipped("heston-heston.toml");
    let hj = shipped("hsdj.toml");
    for t in [0.5, 1.0] {
        let a = cmd_iv(&hh, &[10.0], &[t]).unwrap().rows[0][2].unwrap();
        let b = cmd_iv(&hj, &[10.0], &[t]).unwrap().rows[0][3].unwrap();
        assert!(b > a, "T={t}: {b} <= {a}");
    }
}

#[test]
fn mc_step_refinement_is_stable() {
    let cfg = shipped("hsdj.toml");
    let coarse = cmd_mc(&cfg, &[10.0], 0.5, McConfig { n_paths: 20_000, n_steps: 250, seed: 4 }).unwrap();
    let fine = cmd_mc(&cfg, &[10.0], 0.5, McConfig { n_paths: 20_000, n_steps: 500, seed: 4 }).unwrap();
    let (pc, sc) = (coarse.rows[0][1].unwrap(), coarse.rows[0][2].unwrap());
    let pf = fine.rows[0][1].unwrap();
    assert!((pc - pf).abs() <= 2.0 * sc, "{pc} vs {pf}");
}

#[test]
fn riccati_oracle_agrees_with_expansion_for_hsdj() {
    use affinecf::cf::CharacteristicFn;
    use num_complex::Complex64;
    let cfg = shipped("hsdj.toml");
    let x = cfg.x_approx().unwrap();
    let oracle = common::RiccatiModel::heston(&common::x_params()).with_jumps(10.0, 4.48);
    for u in [-6.0, -2.0, 0.5, 3.0, 8.0] {
        let z = Complex64::new(u, 0.0);
        let d = (x.evaluate(0.5, z).unwrap() - oracle.cf(0.5, z, 4000)).norm();
        assert!(d < 1e-3, "u={u}: {d}");
    }
}
