use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use affinecf::config::{ExperimentConfig, PricingMethod};
use affinecf::harness::{self, CfVariants, PriceRequest, Table};
use affinecf::monte_carlo::McConfig;
use affinecf::Error;

#[derive(Parser)]
#[command(name = "affinecf", version, about = "Characteristic-function expansions and option prices for affine models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Comma-separated strikes.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    strikes: Option<Vec<String>>,
    /// Comma-separated maturities.
    #[arg(long, value_delimiter = ',')]
    maturities: Option<Vec<String>>,
    /// Comma-separated half-widths of the frequency domain.
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<String>>,
    /// 100,000 paths x 1000 steps instead of the [mc] section.
    #[arg(long)]
    paper_scale: bool,
    /// Write `<command>.csv` into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Characteristic functions on a frequency grid.
    Cf {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
        u_min: f64,
        #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
        u_max: f64,
        #[arg(long, default_value_t = 201)]
        n_u: usize,
        /// exact | approx | mc | all
        #[arg(long, default_value = "all")]
        which: String,
    },
    /// Call prices from the exact and the expanded characteristic function.
    Price {
        #[command(flatten)]
        common: Common,
        /// cm | var-red | cv-known; defaults to method.pricing
        #[arg(long)]
        method: Option<String>,
        /// Use a Monte Carlo price as the reference when no exact price exists.
        #[arg(long)]
        mc_reference: bool,
    },
    /// Implied volatilities of exact and approximate prices.
    Iv {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo call prices.
    Mc {
        #[command(flatten)]
        common: Common,
        /// Also dump this path as trajectory.csv.
        #[arg(long)]
        trajectory: Option<usize>,
    },
    /// Heuristic damping rate and expansion error over frequencies and orders.
    EtaScan {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,1,2,4,8,16")]
        u: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
        k: Vec<usize>,
    },
}

fn parse_list(name: &str, raw: &Option<Vec<String>>, default: &[f64]) -> Result<Vec<f64>, Error> {
    match raw {
        None => Ok(default.to_vec()),
        Some(items) => items
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("--{name}: not a number: {s:?}")))
            })
            .collect(),
    }
}

fn single(name: &str, values: &[f64]) -> Result<f64, Error> {
    match values {
        [v] => Ok(*v),
        _ => Err(Error::Config(format!("--{name} takes exactly one value here, got {}", values.len()))),
    }
}

fn threads_from_env() -> Result<(), Error> {
    let Ok(raw) = std::env::var("AFFINECF_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("AFFINECF_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn emit(table: &Table, name: &str, out: Option<&Path>, precision: usize) -> Result<(), Error> {
    for w in &table.warnings {
        eprintln!("{w}");
    }
    let text = table.render(precision);
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join(format!("{name}.csv")), text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn mc_config(cfg: &ExperimentConfig, common: &Common) -> McConfig {
    cfg.mc_config(common.paper_scale)
}

fn run(cli: Cli) -> Result<(), Error> {
    threads_from_env()?;
    match cli.command {
        Command::Cf { common, u_min, u_max, n_u, which } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let which: CfVariants = which.parse()?;
            if n_u == 0 || u_min.partial_cmp(&u_max).is_none_or(|o| o.is_gt()) {
                return Err(Error::Config(format!("bad frequency grid [{u_min}, {u_max}] x {n_u}")));
            }
            let ts = parse_list("maturities", &common.maturities, &[0.5, 2.0])?;
            let grid = harness::linspace(u_min, u_max, n_u);
            let table = harness::cmd_cf(&cfg, &ts, &grid, which, mc_config(&cfg, &common))?;
            emit(&table, "cf", common.out.as_deref(), cfg.output.precision)
        }
        Command::Price { common, method, mc_reference } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let method = match method {
                Some(m) => m.parse::<PricingMethod>()?,
                None => cfg.method.pricing,
            };
            let req = PriceRequest {
                strikes: parse_list("strikes", &common.strikes, &[cfg.market.s0])?,
                maturities: parse_list("maturities", &common.maturities, &[1.0])?,
                l_list: parse_list("l", &common.l, &[cfg.method.l])?,
                method,
                mc_reference: mc_reference.then(|| mc_config(&cfg, &common)),
            };
            let table = harness::cmd_price(&cfg, &req)?;
            emit(&table, "price", common.out.as_deref(), cfg.output.precision)
        }
        Command::Iv { common } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let strikes = parse_list("strikes", &common.strikes, &[7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0])?;
            let ts = parse_list("maturities", &common.maturities, &[0.5, 1.0, 2.0, 5.0])?;
            let table = harness::cmd_iv(&cfg, &strikes, &ts)?;
            emit(&table, "iv", common.out.as_deref(), cfg.output.precision)
        }
        Command::Mc { common, trajectory } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let strikes = parse_list("strikes", &common.strikes, &[cfg.market.s0])?;
            let t = single("maturities", &parse_list("maturities", &common.maturities, &[0.5])?)?;
            let mc = mc_config(&cfg, &common);
            let table = harness::cmd_mc(&cfg, &strikes, t, mc)?;
            emit(&table, "mc", common.out.as_deref(), cfg.output.precision)?;
            if let Some(path) = trajectory {
                let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
                let table = harness::cmd_trajectory(&cfg, t, mc, path)?;
                emit(&table, "trajectory", Some(&dir), cfg.output.precision)?;
            }
            Ok(())
        }
        Command::EtaScan { common, u, k } => {
            let cfg = ExperimentConfig::load(&common.config)?;
            let u = parse_list("u", &Some(u), &[])?;
            let t = single("maturities", &parse_list("maturities", &common.maturities, &[0.5])?)?;
            let table = harness::cmd_eta_scan(&cfg, t, &u, &k)?;
            emit(&table, "eta-scan", common.out.as_deref(), cfg.output.precision)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = if e.is_config() { ("config", 2) } else { ("numeric", 3) };
            let msg = e.to_string().replace('\n', " ");
            eprintln!("ERROR {kind} {msg}");
            ExitCode::from(code)
        }
    }
}
