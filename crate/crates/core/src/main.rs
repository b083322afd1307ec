use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use tvfi::estimate::{fit_fi, fit_tvfi};
use tvfi::forecast::{predict_multi_step_from, predict_one_step_from, write_draws_csv, write_summary_csv, SimulationOptions};
use tvfi::fraccore::Truncation;
use tvfi::gasfilter::{self, StaticParams};
use tvfi::harness::config::Config;
use tvfi::harness::data::{self, DataFormat};
use tvfi::harness::{run_mc_study, run_rolling_eval, ModelKind};
use tvfi::simulate::{simulate_tvfi, write_series_csv};
use tvfi::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "tvfi", version, about = "Time-varying fractionally integrated noise models")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Input series
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// `full` or a number of lags
    #[arg(long, global = true)]
    truncation: Option<String>,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum FormatArg {
    Series,
    Hadcrut4,
    Prices,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum ModelArg {
    Tvfi,
    Fi,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Tvfi => ModelKind::Tvfi,
            ModelArg::Fi => ModelKind::Fi,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic series
    Simulate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Monte Carlo study of the filtered memory path
    Mc {
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit a model and write its report
    Fit {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Predictive samples after the end of the input series
    Forecast {
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        n_sims: Option<usize>,
    },
    /// Rolling out-of-sample comparison
    Eval {
        #[arg(long)]
        initial_window: Option<usize>,
        #[arg(long)]
        refit_every: Option<usize>,
        /// Comma-separated list
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        #[arg(long)]
        n_sims: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate { .. } => "simulate",
            Command::Mc { .. } => "mc",
            Command::Fit { .. } => "fit",
            Command::Forecast { .. } => "forecast",
            Command::Eval { .. } => "eval",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    input: Option<String>,
    outputs: Vec<String>,
    config: &'a Config,
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut cfg = match &cli.common.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let c = &cli.common;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(p) = &c.input {
        cfg.data.path = Some(p.clone());
    }
    if let Some(f) = c.format {
        cfg.data.format = match f {
            FormatArg::Series => DataFormat::Series,
            FormatArg::Hadcrut4 => DataFormat::Hadcrut4,
            FormatArg::Prices => DataFormat::Prices,
        };
    }
    if let Some(t) = &c.truncation {
        cfg.fit.truncation = parse_truncation(t)?;
    }
    match &cli.command {
        Command::Simulate { n, sigma } => {
            cfg.simulate.n = n.unwrap_or(cfg.simulate.n);
            cfg.simulate.sigma = sigma.unwrap_or(cfg.simulate.sigma);
        }
        Command::Mc { reps, n } => {
            cfg.mc.reps = reps.unwrap_or(cfg.mc.reps);
            cfg.mc.n = n.unwrap_or(cfg.mc.n);
        }
        Command::Fit { model } => {
            cfg.model = model.map(Into::into).unwrap_or(cfg.model);
        }
        Command::Forecast { model, horizon, n_sims } => {
            cfg.model = model.map(Into::into).unwrap_or(cfg.model);
            cfg.forecast.horizon = horizon.unwrap_or(cfg.forecast.horizon);
            cfg.forecast.n_sims = n_sims.unwrap_or(cfg.forecast.n_sims);
        }
        Command::Eval { initial_window, refit_every, horizons, n_sims } => {
            cfg.eval.initial_window = initial_window.unwrap_or(cfg.eval.initial_window);
            cfg.eval.refit_every = refit_every.unwrap_or(cfg.eval.refit_every);
            if let Some(h) = horizons {
                cfg.eval.horizons = h.clone();
            }
            cfg.eval.n_sims = n_sims.unwrap_or(cfg.eval.n_sims);
        }
    }
    Ok(cfg)
}

fn parse_truncation(s: &str) -> Result<Truncation> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(Truncation::Full);
    }
    match s.parse::<usize>() {
        Ok(m) if m >= 1 => Ok(Truncation::Fixed(m)),
        _ => Err(Error::Parse(format!("truncation must be `full` or a positive integer, got {s:?}"))),
    }
}

fn load_input(cfg: &Config) -> Result<Vec<f64>> {
    let path = cfg
        .data
        .path
        .as_deref()
        .ok_or_else(|| Error::InvalidInput("no input series: pass --input or set [data] path".into()))?;
    let y = data::load(path, cfg.data.format)?;
    info!("read {} observations from {}", y.len(), path.display());
    if cfg.data.format == DataFormat::Hadcrut4 && y.len() != data::HADCRUT4_EXPECTED_LEN {
        info!("temperature series has {} months; the Jan 1850 to Aug 2018 sample has {}", y.len(), data::HADCRUT4_EXPECTED_LEN);
    }
    Ok(y)
}

struct Outputs<'a> {
    dir: &'a Path,
    names: Vec<String>,
}

impl Outputs<'_> {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.names.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        self.names.push(name.to_string());
        fs::write(self.dir.join(name), body)?;
        Ok(())
    }
}

fn fit_params(y: &[f64], cfg: &Config, out: &mut Outputs) -> Result<StaticParams> {
    match cfg.model {
        ModelKind::Tvfi => {
            let fit = fit_tvfi(y, &cfg.fit_config())?;
            print!("{}", fit.report());
            out.text("fit_report.txt", &fit.report())?;
            out.text("fit.txt", &fit.key_values())?;
            Ok(fit.params)
        }
        ModelKind::Fi => {
            let fit = fit_fi(y, cfg.fit.truncation)?;
            print!("{}", fit.report());
            out.text("fit_report.txt", &fit.report())?;
            out.text("fit.txt", &fit.key_values())?;
            Ok(fit.as_params())
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let dir = cli.common.out.as_path();
    fs::create_dir_all(dir)?;
    let mut out = Outputs { dir, names: Vec::new() };
    let m = cfg.fit.truncation;
    match &cli.command {
        Command::Simulate { .. } => {
            let y = simulate_tvfi(&cfg.dgp_spec(), m)?;
            write_series_csv(&y, out.create("series.csv")?)?;
        }
        Command::Mc { .. } => {
            let res = run_mc_study(&cfg.mc_spec())?;
            res.write_csv(out.create("mc_paths.csv")?)?;
            res.write_reps_csv(out.create("mc_reps.csv")?)?;
            println!("replications: {} used, {} excluded", cfg.mc.reps - res.excluded, res.excluded);
        }
        Command::Fit { .. } => {
            let y = load_input(&cfg)?;
            let params = fit_params(&y, &cfg, &mut out)?;
            gasfilter::filter(&y, &params, m)?.write_csv(out.create("filtered.csv")?)?;
        }
        Command::Forecast { .. } => {
            let y = load_input(&cfg)?;
            let params = fit_params(&y, &cfg, &mut out)?;
            let g = gasfilter::filter(&y, &params, m)?.next_g();
            let opts = SimulationOptions {
                horizon: cfg.forecast.horizon,
                n_sims: cfg.forecast.n_sims,
                seed: cfg.seed,
                truncation: m,
                scheme: cfg.forecast.scheme,
            };
            let mut dists = vec![predict_one_step_from(&y, &params, g, m)];
            let sims = predict_multi_step_from(&y, &params, &opts, g)?;
            write_draws_csv(&sims, out.create("forecast_draws.csv")?)?;
            dists.extend(sims);
            write_summary_csv(&dists, out.create("forecast_summary.csv")?)?;
        }
        Command::Eval { .. } => {
            let y = load_input(&cfg)?;
            let report = run_rolling_eval(&y, &cfg.rolling_spec())?;
            report.write_summary_csv(out.create("eval_summary.csv")?)?;
            report.write_scores_csv(out.create("eval_scores.csv")?)?;
            report.write_cs_csv(out.create("eval_cs.csv")?)?;
            report.write_fits_csv(out.create("eval_fits.csv")?)?;
            print!("{}", report.table());
        }
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        seed: cfg.seed,
        input: cfg.data.path.as_ref().map(|p| p.display().to_string()),
        outputs: out.names.clone(),
        config: &cfg,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(dir.join("manifest.toml"), text)?;
    info!("outputs written to {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
