//! Command-line pipeline: ingest, fit, score, price, size and compare.
//!
//! Commands share one output directory. Each writes its artifacts there
//! atomically (temp file + rename) and reads what earlier commands left:
//!
//! | command       | reads                   | writes                                   |
//! |---------------|-------------------------|------------------------------------------|
//! | `ingest`      | data files              | `series.csv`, `ingest.json`              |
//! | `fit`         | `series.csv`            | `model.json`, `state.json`, `fit.json`, `regimes.csv` |
//! | `strike`      | `series.csv`            | `strike.json`                            |
//! | `metrics`     | series, model           | `metrics.json`                           |
//! | `price`       | model, state            | `price.json`                             |
//! | `duration`    | model, state            | `duration.json`, `breakeven_curve.csv`   |
//! | `sensitivity` | model, state            | `sensitivity.json`, `sensitivity.csv`    |
//! | `crm-compare` | model, state            | `crm.json`                               |
//! | `report`      | data files              | all of the above plus `report.json`      |

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::calibration::{
    bic_lag_scan, fit_garch_jump, fit_msar, fit_ou_jump, fit_ou_mle, fit_regime_ou, kmeans_regime_count,
    FitReport, GarchFitOptions, KMeansOptions, LagScan, MsArFitOptions,
};
use crate::economics::{breakeven_duration, compare_crm, Breakeven, CrmComparison};
use crate::error::{Error, Result};
use crate::market_data::{self, rolling_features, resample, weighted_zonal_average, CsvSchema, PriceSeries, Zone, ZonalSeries};
use crate::metrics::{model_select, ModelRanking};
use crate::models::{simulate, ModelSpec, MsArParams, RegimeModel};
use crate::pricing::{
    levelize_annual, mc_capacity_premium, sensitivity_sweep, ContractTerms, LevelizeMode, PremiumResult, SweepGrid,
    SweepTable,
};
use crate::risk::{quantile, risk_report, RiskReport, Sample};
use crate::synthetic;

pub use config::RunConfig;
use config::{ModelKind, SyntheticKind};

#[derive(Debug, Parser)]
#[command(name = "relopt", version, about = "Reliability-option premia from calibrated price models")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the config `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `output.directory`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Omit wall-clock timestamps so reruns are byte-identical.
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Override any config key, e.g. `--set contract.K=120`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Load, average and resample price data into `series.csv`.
    Ingest,
    /// Calibrate the configured model.
    Fit,
    /// Score the fitted model against a constant-parameter OU on the data tails.
    Metrics,
    /// Monte Carlo premium and its levelized annual value.
    Price,
    /// Minimum contract duration from cost-revenue break-even.
    Duration,
    /// Strike from the empirical price quantile, with CVaR.
    Strike,
    /// Premium over grids of tau, K, r and T.
    Sensitivity,
    /// Capacity auction vs reliability option payments.
    CrmCompare,
    /// Run every step and write a combined report.
    Report,
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_entry() -> i32 {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p, &overrides)?,
        None => RunConfig::from_toml("", &overrides)?,
    };
    if let Some(out) = &cli.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate()?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be >= 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let ws = Workspace::open(&cfg.output.directory)?;
    let ctx = Ctx {
        cfg: &cfg,
        ws: &ws,
        reproducible: cli.reproducible,
    };
    pool.install(|| dispatch(&ctx, cli.command))
}

fn dispatch(ctx: &Ctx<'_>, cmd: Command) -> Result<()> {
    match cmd {
        Command::Ingest => cmd_ingest(ctx).map(drop),
        Command::Fit => cmd_fit(ctx).map(drop),
        Command::Metrics => cmd_metrics(ctx).map(drop),
        Command::Price => cmd_price(ctx).map(drop),
        Command::Duration => cmd_duration(ctx).map(drop),
        Command::Strike => cmd_strike(ctx).map(drop),
        Command::Sensitivity => cmd_sensitivity(ctx).map(drop),
        Command::CrmCompare => cmd_crm(ctx).map(drop),
        Command::Report => cmd_report(ctx),
    }
}

// ---------------------------------------------------------------- output dir

const LOCK_NAME: &str = ".relopt.lock";

/// Output directory held under a lock file for the lifetime of the value.
pub struct Workspace {
    dir: PathBuf,
}

impl Workspace {
    pub fn open(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let lock = dir.join(LOCK_NAME);
        match fs::OpenOptions::new().write(true).create_new(true).open(&lock) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(Error::Config(format!(
                    "output directory {} is in use (remove {} if no run is active)",
                    dir.display(),
                    lock.display()
                )));
            }
            Err(e) => return Err(Error::io(&lock, e)),
        }
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes every file to a temp name first and renames only once all
    /// temps are complete, so a failed command leaves no partial artifacts.
    fn write_all(&self, files: &[(&str, Vec<u8>)]) -> Result<()> {
        let mut staged = Vec::with_capacity(files.len());
        for (name, bytes) in files {
            let tmp = self.dir.join(format!(".{name}.tmp"));
            let res = fs::File::create(&tmp).and_then(|mut f| {
                f.write_all(bytes)?;
                f.sync_all()
            });
            if let Err(e) = res {
                for (t, _) in &staged {
                    let _ = fs::remove_file(t);
                }
                let _ = fs::remove_file(&tmp);
                return Err(Error::io(&tmp, e));
            }
            staged.push((tmp, self.path(name)));
        }
        for (tmp, dst) in staged {
            fs::rename(&tmp, &dst).map_err(|e| Error::io(&dst, e))?;
        }
        Ok(())
    }

    fn read(&self, name: &str) -> Result<String> {
        let p = self.path(name);
        fs::read_to_string(&p).map_err(|e| Error::io(p, e))
    }
}

impl Drop for Workspace {
    fn drop(&mut self) {
        let _ = fs::remove_file(self.dir.join(LOCK_NAME));
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    ws: &'a Workspace,
    reproducible: bool,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'a str,
    version: &'static str,
    config_fingerprint: String,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model_fingerprint: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<String>,
    config: &'a RunConfig,
    result: &'a T,
}

impl Ctx<'_> {
    fn envelope<T: Serialize>(&self, command: &str, model: Option<&ModelSpec>, result: &T) -> Result<Vec<u8>> {
        let env = Envelope {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_fingerprint: self.cfg.fingerprint(),
            seed: self.cfg.seed,
            model_fingerprint: model.map(ModelSpec::fingerprint),
            generated_at: (!self.reproducible).then(|| chrono::Utc::now().to_rfc3339()),
            config: self.cfg,
            result,
        };
        let mut s = serde_json::to_string_pretty(&env)?;
        s.push('\n');
        Ok(s.into_bytes())
    }

    fn series(&self) -> Result<PriceSeries> {
        let p = self.ws.path(SERIES);
        Ok(market_data::load_csv(&p, &CsvSchema::default())?.series)
    }

    fn model(&self) -> Result<(ModelSpec, InitialState)> {
        let model = ModelSpec::from_json(&self.ws.read(MODEL)?)?;
        let mut state: InitialState = serde_json::from_str(&self.ws.read(STATE)?)?;
        let c = &self.cfg.contract;
        if let Some(s0) = c.s0 {
            state.s0 = s0;
        }
        if c.r0.is_some() {
            state.r0 = c.r0;
        }
        Ok((model, state))
    }

    /// Configured strike, or the `alpha` quantile of the ingested data.
    fn strike(&self) -> Result<(f64, &'static str)> {
        match self.cfg.contract.k {
            Some(k) => Ok((k, "config")),
            None => {
                let s = Sample::prices(self.series()?.values().to_vec())?;
                Ok((quantile(&s, self.cfg.contract.alpha)?, "data_quantile"))
            }
        }
    }

    fn terms(&self) -> Result<(ContractTerms, &'static str)> {
        let (k, source) = self.strike()?;
        Ok((self.cfg.contract.terms(k)?, source))
    }
}

const SERIES: &str = "series.csv";
const MODEL: &str = "model.json";
const STATE: &str = "state.json";

/// Starting point for every simulation of the fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub s0: f64,
    pub r0: Option<usize>,
}

// ------------------------------------------------------------------ commands

#[derive(Debug, Serialize)]
struct IngestResult {
    source: String,
    n_obs: usize,
    resolution_hours: f64,
    start: String,
    end: String,
    skipped_rows: usize,
    duplicates_merged: usize,
    resample_gaps: usize,
    mean: f64,
    min: f64,
    max: f64,
}

fn cmd_ingest(ctx: &Ctx<'_>) -> Result<PriceSeries> {
    let d = &ctx.cfg.data;
    let (mut series, source, skipped, merged) = if let Some(syn) = &d.synthetic {
        let s = match syn.kind {
            SyntheticKind::GermanyProxy => synthetic::germany_proxy(syn.hours, syn.seed)?.0,
        };
        (s, "synthetic:germany_proxy".to_string(), 0, 0)
    } else if !d.zones.is_empty() {
        let mut zones = Vec::new();
        let (mut skipped, mut merged) = (0, 0);
        for z in &d.zones {
            let rep = market_data::load_csv(&z.path, &d.schema)?;
            skipped += rep.skipped_rows;
            merged += rep.duplicates_merged;
            let n = rep.series.len();
            zones.push(Zone {
                id: z.id.clone(),
                series: rep.series,
                weights: vec![z.weight; n],
            });
        }
        let avg = weighted_zonal_average(&ZonalSeries::new(zones)?)?;
        (avg, format!("zones:{}", d.zones.len()), skipped, merged)
    } else if let Some(p) = &d.path {
        let rep = market_data::load_csv(p, &d.schema)?;
        (rep.series, p.display().to_string(), rep.skipped_rows, rep.duplicates_merged)
    } else {
        return Err(Error::Config("data: no `path`, `zones` or `synthetic` source".into()));
    };
    let mut gaps = 0;
    if let Some(h) = d.resample_hours {
        if (h - series.resolution_hours()).abs() > 1e-9 {
            let rep = resample(&series, h)?;
            gaps = rep.gaps;
            series = rep.series;
        }
    }
    let v = series.values();
    let result = IngestResult {
        source,
        n_obs: series.len(),
        resolution_hours: series.resolution_hours(),
        start: series.timestamps()[0].to_rfc3339(),
        end: series.timestamps()[series.len() - 1].to_rfc3339(),
        skipped_rows: skipped,
        duplicates_merged: merged,
        resample_gaps: gaps,
        mean: crate::numeric::mean(v),
        min: v.iter().cloned().fold(f64::INFINITY, f64::min),
        max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    };
    let mut csv = Vec::new();
    market_data::write_csv(&series, &mut csv, ctx.cfg.output.csv_decimals)?;
    ctx.ws
        .write_all(&[(SERIES, csv), ("ingest.json", ctx.envelope("ingest", None, &result)?)])?;
    println!("ingest: {} observations at {}h -> {}", result.n_obs, result.resolution_hours, ctx.ws.path(SERIES).display());
    Ok(series)
}

#[derive(Debug, Serialize)]
struct ElbowSummary {
    k_candidates: Vec<usize>,
    inertia: Vec<f64>,
    log_second_difference: Vec<f64>,
    chosen_k: usize,
}

#[derive(Debug, Serialize)]
struct MsArSummary {
    params: MsArParams,
    report: FitReport,
    occupancy: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct FitResult {
    model_type: &'static str,
    model: ModelSpec,
    initial_state: InitialState,
    report: FitReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    lag_scan: Option<LagScan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elbow: Option<ElbowSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    msar: Option<MsArSummary>,
    per_regime_overridden: bool,
}

fn cmd_fit(ctx: &Ctx<'_>) -> Result<(ModelSpec, InitialState)> {
    let s = ctx.series()?;
    let m = &ctx.cfg.model;
    let seed = ctx.cfg.seed;
    let s0 = *s.values().last().ok_or(Error::EmptySeries)?;
    let mut regimes_csv = None;
    let result = match m.kind {
        ModelKind::Ou => {
            let (ou, report) = fit_ou_mle(&s)?;
            FitResult {
                model_type: "ou",
                model: ModelSpec::Ou { ou },
                initial_state: InitialState { s0, r0: None },
                report,
                lag_scan: Some(bic_lag_scan(&s, 4)?),
                elbow: None,
                msar: None,
                per_regime_overridden: false,
            }
        }
        ModelKind::OuJump => {
            let (model, report) = fit_ou_jump(&s, m.jump_threshold)?;
            FitResult {
                model_type: "ou_jump",
                model,
                initial_state: InitialState { s0, r0: None },
                report,
                lag_scan: None,
                elbow: None,
                msar: None,
                per_regime_overridden: false,
            }
        }
        ModelKind::GarchJump => {
            let opts = GarchFitOptions {
                jump_threshold: m.jump_threshold,
                ..Default::default()
            };
            let (garch, report) = fit_garch_jump(&s, opts)?;
            FitResult {
                model_type: "garch_jump",
                model: ModelSpec::GarchJump { garch },
                initial_state: InitialState { s0, r0: None },
                report,
                lag_scan: None,
                elbow: None,
                msar: None,
                per_regime_overridden: false,
            }
        }
        ModelKind::MrsmOu => {
            let features = rolling_features(&s, m.window_days)?;
            let kopts = KMeansOptions {
                seed,
                ..Default::default()
            };
            let elbow = kmeans_regime_count(&features, m.k_max, kopts)?;
            let r = m.regimes.unwrap_or(elbow.chosen_k);
            let mopts = MsArFitOptions {
                n_starts: m.n_starts,
                seed,
                ..Default::default()
            };
            let (params, filter, report) = fit_msar(&s, r, m.order, mopts)?;
            let mut regimes: RegimeModel = fit_regime_ou(&s, &filter)?;
            let overridden = if let Some(pr) = &m.per_regime {
                if pr.len() != regimes.n_regimes() {
                    return Err(Error::Config(format!(
                        "model.per_regime has {} entries for {} fitted regimes",
                        pr.len(),
                        regimes.n_regimes()
                    )));
                }
                regimes.per_regime = pr.clone();
                regimes.validate()?;
                true
            } else {
                false
            };
            let mut occupancy = vec![0.0; r];
            for &k in &filter.regime_path {
                occupancy[k] += 1.0 / filter.regime_path.len() as f64;
            }
            let r0 = *filter.regime_path.last().unwrap();
            let mut csv = csv::Writer::from_writer(Vec::new());
            csv.write_record(["timestamp", "regime"])?;
            for (t, k) in s.timestamps().iter().zip(&filter.regime_path) {
                csv.write_record([t.format("%Y-%m-%dT%H:%M:%SZ").to_string(), k.to_string()])?;
            }
            regimes_csv = Some(csv.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?);
            let model = ModelSpec::MrsmOu { regimes };
            let summary = FitReport {
                model: Some(model.clone()),
                ..report.clone()
            };
            FitResult {
                model_type: "mrsm_ou",
                model,
                initial_state: InitialState { s0, r0: Some(r0) },
                report: summary,
                lag_scan: Some(bic_lag_scan(&s, 4)?),
                elbow: Some(ElbowSummary {
                    k_candidates: elbow.k_candidates,
                    inertia: elbow.inertia,
                    log_second_difference: elbow.log_second_difference,
                    chosen_k: elbow.chosen_k,
                }),
                msar: Some(MsArSummary {
                    params,
                    report,
                    occupancy,
                }),
                per_regime_overridden: overridden,
            }
        }
    };
    let mut files = vec![
        (MODEL, result.model.to_json()?.into_bytes()),
        (STATE, serde_json::to_vec_pretty(&result.initial_state)?),
        ("fit.json", ctx.envelope("fit", Some(&result.model), &result)?),
    ];
    if let Some(csv) = regimes_csv {
        files.push(("regimes.csv", csv));
    }
    ctx.ws.write_all(&files)?;
    println!(
        "fit: {} (loglik {:.2}, BIC {:.2}) -> {}",
        result.model_type,
        result.report.loglik,
        result.report.bic,
        ctx.ws.path(MODEL).display()
    );
    Ok((result.model, result.initial_state))
}

#[derive(Debug, Serialize)]
struct StrikeResult {
    alpha: f64,
    risk: RiskReport,
}

fn cmd_strike(ctx: &Ctx<'_>) -> Result<StrikeResult> {
    let s = Sample::prices(ctx.series()?.values().to_vec())?;
    let result = StrikeResult {
        alpha: ctx.cfg.contract.alpha,
        risk: risk_report(&s, ctx.cfg.contract.alpha, None)?,
    };
    ctx.ws.write_all(&[("strike.json", ctx.envelope("strike", None, &result)?)])?;
    println!(
        "strike: q_{} = {:.4}, CVaR = {:.4}",
        result.alpha, result.risk.quantile, result.risk.cvar
    );
    Ok(result)
}

#[derive(Debug, Serialize)]
struct MetricsResult {
    n_empirical: usize,
    n_simulated: usize,
    baseline: ModelSpec,
    ranking: ModelRanking,
}

fn cmd_metrics(ctx: &Ctx<'_>) -> Result<MetricsResult> {
    let s = ctx.series()?;
    let (model, state) = ctx.model()?;
    let (baseline_ou, _) = fit_ou_mle(&s)?;
    let baseline = ModelSpec::Ou { ou: baseline_ou };
    let dt = s.dt_years();
    let horizon = (s.len() - 1) as f64 * dt;
    let paths = ctx.cfg.metrics.sim_paths;
    let seed = ctx.cfg.seed;
    let sim = |m: &ModelSpec, r0: Option<usize>| -> Result<Sample> {
        let b = simulate(m, state.s0, r0, horizon, dt, paths, seed)?;
        Sample::prices(b.values)
    };
    let fitted = sim(&model, state.r0)?;
    let constant = sim(&baseline, None)?;
    let n_simulated = fitted.len();
    let emp = Sample::prices(s.values().to_vec())?;
    let ranking = model_select(
        &emp,
        &[(model.name().to_string(), fitted), ("ou_constant".to_string(), constant)],
        ctx.cfg.metrics.options(),
    )?;
    let result = MetricsResult {
        n_empirical: emp.len(),
        n_simulated,
        baseline,
        ranking,
    };
    ctx.ws
        .write_all(&[("metrics.json", ctx.envelope("metrics", Some(&model), &result)?)])?;
    for c in &result.ranking.candidates {
        println!(
            "metrics: {:<12} TailWass {:>12} wKL {:>12} rank {}",
            c.name,
            c.tail_wasserstein.map_or("n/a".into(), |v| format!("{v:.4}")),
            c.weighted_kl.map_or("n/a".into(), |v| format!("{v:.4}")),
            c.rank
        );
    }
    Ok(result)
}

#[derive(Debug, Serialize)]
struct PriceResult {
    #[serde(flatten)]
    premium: PremiumResult,
    terms: ContractTerms,
    strike_source: &'static str,
    initial_state: InitialState,
    levelized_start_of_year: f64,
    levelized_continuous: f64,
}

fn cmd_price(ctx: &Ctx<'_>) -> Result<PriceResult> {
    let (model, state) = ctx.model()?;
    let (terms, strike_source) = ctx.terms()?;
    let p = mc_capacity_premium(&model, state.s0, state.r0, &terms, ctx.cfg.model.n_paths, ctx.cfg.seed)?;
    let result = PriceResult {
        levelized_start_of_year: levelize_annual(p.premium, terms.r, terms.tau, LevelizeMode::StartOfYear)?,
        levelized_continuous: levelize_annual(p.premium, terms.r, terms.tau, LevelizeMode::Continuous)?,
        premium: p,
        terms,
        strike_source,
        initial_state: state,
    };
    ctx.ws
        .write_all(&[("price.json", ctx.envelope("price", Some(&model), &result)?)])?;
    println!(
        "price: premium {:.2} (se {:.2}) per MW, levelized {:.2} per MW-yr",
        result.premium.premium, result.premium.std_error, result.levelized_start_of_year
    );
    Ok(result)
}

#[derive(Debug, Serialize)]
struct DurationResult {
    #[serde(flatten)]
    breakeven: Breakeven,
    s0: f64,
}

fn cmd_duration(ctx: &Ctx<'_>) -> Result<DurationResult> {
    let (model, state) = ctx.model()?;
    let c = &ctx.cfg.contract;
    let costs = &ctx.cfg.costs;
    let b = breakeven_duration(
        &model,
        state.s0,
        &costs.cost_model(),
        c.t,
        c.r,
        c.dt_years(),
        costs.tau_max,
    )?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["tau", "pv_revenue", "pv_cost"])?;
    for p in &b.curve {
        csv.write_record([p.tau.to_string(), format!("{}", p.pv_revenue), format!("{}", p.pv_cost)])?;
    }
    let csv = csv.into_inner().map_err(|e| Error::io("<csv buffer>", e.into_error()))?;
    let result = DurationResult {
        breakeven: b,
        s0: state.s0,
    };
    ctx.ws.write_all(&[
        ("duration.json", ctx.envelope("duration", Some(&model), &result)?),
        ("breakeven_curve.csv", csv),
    ])?;
    println!("duration: tau* = {} years", result.breakeven.tau_star);
    Ok(result)
}

fn default_grid(grid: &SweepGrid, k: f64) -> SweepGrid {
    if grid != &SweepGrid::default() {
        return grid.clone();
    }
    SweepGrid {
        tau: (1..=10).map(f64::from).collect(),
        k: (0..10).map(|i| k * (0.5 + 0.1 * i as f64)).collect(),
        ..Default::default()
    }
}

fn cmd_sensitivity(ctx: &Ctx<'_>) -> Result<SweepTable> {
    let (model, state) = ctx.model()?;
    let (terms, _) = ctx.terms()?;
    let grid = default_grid(&ctx.cfg.sensitivity, terms.k);
    let table = sensitivity_sweep(&model, state.s0, state.r0, &terms, &grid, ctx.cfg.model.n_paths, ctx.cfg.seed)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    ctx.ws.write_all(&[
        ("sensitivity.json", ctx.envelope("sensitivity", Some(&model), &table)?),
        ("sensitivity.csv", csv),
    ])?;
    for f in &table.flags {
        println!(
            "sensitivity: {} vs {} expected {}: {} violations",
            f.quantity, f.parameter, f.expected, f.violations
        );
    }
    Ok(table)
}

#[derive(Debug, Serialize)]
struct CrmResult {
    capacity_payment_source: &'static str,
    #[serde(flatten)]
    comparison: CrmComparison,
}

fn cmd_crm(ctx: &Ctx<'_>) -> Result<CrmResult> {
    let (model, state) = ctx.model()?;
    let (terms, _) = ctx.terms()?;
    let n = ctx.cfg.model.n_paths;
    let seed = ctx.cfg.seed;
    let (m, source) = match ctx.cfg.crm.capacity_payment {
        Some(m) => (m, "config"),
        None => (
            mc_capacity_premium(&model, state.s0, state.r0, &terms, n, seed)?.premium,
            "ro_premium",
        ),
    };
    let comparison = compare_crm(&model, state.s0, state.r0, &terms, m, n, seed)?;
    let result = CrmResult {
        capacity_payment_source: source,
        comparison,
    };
    ctx.ws
        .write_all(&[("crm.json", ctx.envelope("crm-compare", Some(&model), &result)?)])?;
    let c = &result.comparison;
    println!(
        "crm-compare: E[CA] {:.2}, E[RO] {:.2}, difference {:.2} (se {:.2}), RO <= CA on {:.1}% of paths",
        c.ca_expected.value,
        c.ro_expected.value,
        c.difference.value,
        c.difference.std_error,
        100.0 * c.pathwise_dominance
    );
    Ok(result)
}

#[derive(Debug, Serialize)]
struct FullReport {
    n_obs: usize,
    model: ModelSpec,
    initial_state: InitialState,
    strike: StrikeResult,
    metrics: MetricsResult,
    price: PriceResult,
    duration: DurationResult,
    sensitivity: SweepTable,
    crm: CrmResult,
}

fn cmd_report(ctx: &Ctx<'_>) -> Result<()> {
    let series = cmd_ingest(ctx)?;
    let (model, initial_state) = cmd_fit(ctx)?;
    let report = FullReport {
        n_obs: series.len(),
        strike: cmd_strike(ctx)?,
        metrics: cmd_metrics(ctx)?,
        price: cmd_price(ctx)?,
        duration: cmd_duration(ctx)?,
        sensitivity: cmd_sensitivity(ctx)?,
        crm: cmd_crm(ctx)?,
        model,
        initial_state,
    };
    ctx.ws
        .write_all(&[("report.json", ctx.envelope("report", Some(&report.model), &report)?)])?;
    println!("report: {}", ctx.ws.path("report.json").display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_blocks_second_workspace() {
        let dir = tempfile::tempdir().unwrap();
        let a = Workspace::open(dir.path()).unwrap();
        let e = Workspace::open(dir.path()).err().unwrap();
        assert_eq!(e.exit_code(), 2);
        drop(a);
        Workspace::open(dir.path()).unwrap();
    }

    #[test]
    fn staged_writes_replace_atomically() {
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::open(dir.path()).unwrap();
        ws.write_all(&[("a.txt", b"one".to_vec()), ("b.txt", b"two".to_vec())]).unwrap();
        assert_eq!(ws.read("a.txt").unwrap(), "one");
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".tmp"))
            .collect();
        assert!(names.is_empty(), "{names:?}");
    }

    #[test]
    fn default_sensitivity_grid() {
        let g = default_grid(&SweepGrid::default(), 100.0);
        assert_eq!(g.tau.len(), 10);
        assert_eq!(g.k.len(), 10);
        assert!((g.k[0] - 50.0).abs() < 1e-12 && (g.k[9] - 140.0).abs() < 1e-9);
    }
}
