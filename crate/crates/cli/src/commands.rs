use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cvqkd_core::estimation::{expected_bounds, ConfidenceBounds, SchemeKind};
use cvqkd_core::model::{
    ChannelParams, FiberModel, ModulationParams, ProtocolParams, SourceParams, DEFAULT_BETA, DEFAULT_DELTA,
    DEFAULT_DELTA_STAR,
};
use cvqkd_core::optimizer::{
    fit_exponential_keyrate, legacy_key_rate, max_distance_with_constant, optimize_seeded, ExponentialFit,
    OptimizationProblem, Point, DEFAULT_FIT_WINDOW, DEFAULT_REVEALED_VARIANCE, LEGACY_MODULATION, LEGACY_RATIO,
};
use cvqkd_core::secrecy::{
    finite_key_rate, finite_key_rate_with_counts, finite_size_constant, finite_size_correction,
    optimal_asymptotic_rate, CornerMode, KeyRateOptions, LimitSource, QuadraturePolicy,
};
use serde_json::json;

use crate::output::{montecarlo_csv, sweep_csv, write_outputs};
use crate::scenario::{preset, Scenario, PRESETS};
use crate::sweep::{run_montecarlo, run_sweep};

#[derive(Debug, Parser)]
#[command(name = "cvqkd", version, about = "Finite-size key rates for continuous-variable QKD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Key rate of one fixed protocol setting, as JSON.
    Keyrate(KeyrateArgs),
    /// Optimise V (and r) for one link, as JSON.
    Optimize(OptimizeArgs),
    /// Key-rate curves of a scenario, one CSV per scheme.
    Sweep(ScenarioArgs),
    /// Analytic against empirical estimator deviations.
    Montecarlo(ScenarioArgs),
    /// Exponential fit of the asymptotic rate and the largest distance
    /// reachable at each block size.
    Maxdist(MaxdistArgs),
    /// List built-in scenarios, or print one.
    Presets {
        name: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Single,
    Double,
    Modified,
}

impl From<SchemeArg> for SchemeKind {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Single => SchemeKind::Single,
            SchemeArg::Double => SchemeKind::Double,
            SchemeArg::Modified => SchemeKind::ModifiedDouble,
        }
    }
}

#[derive(Debug, Args)]
#[group(id = "link", required = true, multiple = false)]
pub struct LinkArgs {
    /// Channel transmittance.
    #[arg(long = "T")]
    pub transmittance: Option<f64>,
    /// Fiber length in km at 0.2 dB/km.
    #[arg(long = "d")]
    pub distance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ChannelArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    /// Excess noise in SNU.
    #[arg(long, conflicts_with = "eps_ratio")]
    pub veps: Option<f64>,
    /// Excess noise as a fraction of T.
    #[arg(long, default_value_t = 0.01)]
    pub eps_ratio: f64,
    /// Squeezed-quadrature variance of the source (1 = coherent).
    #[arg(long, default_value_t = 1.0)]
    pub vs: f64,
    /// Block size.
    #[arg(long = "N", default_value_t = 1e6)]
    pub block_size: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA_STAR)]
    pub delta_star: f64,
    #[arg(long, value_enum, default_value_t = SchemeArg::Single)]
    pub scheme: SchemeArg,
    /// Minimise over all four corners of the confidence box.
    #[arg(long)]
    pub corner_search: bool,
}

impl ChannelArgs {
    fn channel(&self) -> Result<ChannelParams, String> {
        let fiber = FiberModel::new(0.2, self.eps_ratio).map_err(err)?;
        let t = match (self.link.transmittance, self.link.distance) {
            (Some(t), _) => t,
            (None, Some(d)) => fiber.transmittance(d).map_err(err)?,
            (None, None) => return Err("one of --T or --d is required".into()),
        };
        match self.veps {
            Some(v) => ChannelParams::new(t, v),
            None => fiber.channel_at_transmittance(t),
        }
        .map_err(err)
    }

    fn source(&self) -> Result<SourceParams, String> {
        SourceParams::new(self.vs).map_err(err)
    }

    fn options(&self) -> KeyRateOptions {
        KeyRateOptions {
            corner: if self.corner_search {
                CornerMode::Exhaustive
            } else {
                CornerMode::Pessimistic
            },
            ..KeyRateOptions::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct KeyrateArgs {
    #[command(flatten)]
    pub common: ChannelArgs,
    /// Modulation variance (single scheme).
    #[arg(long)]
    pub v: Option<f64>,
    /// Secret modulation variance (double schemes); defaults to --v.
    #[arg(long)]
    pub v1: Option<f64>,
    /// Revealed modulation variance (double schemes).
    #[arg(long, default_value_t = DEFAULT_REVEALED_VARIANCE)]
    pub v2: f64,
    /// Fraction of fully revealed states.
    #[arg(long)]
    pub r: Option<f64>,
    /// Exact channel knowledge: no confidence intervals, every state keyed.
    #[arg(long)]
    pub ideal_bounds: bool,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: ChannelArgs,
    /// Revealed modulation variance (double schemes).
    #[arg(long, default_value_t = DEFAULT_REVEALED_VARIANCE)]
    pub v2: f64,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario or run-manifest JSON file.
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    pub file: Option<PathBuf>,
    /// Built-in scenario (see `cvqkd presets`).
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo trials per grid point.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<Scenario, String> {
        let mut s = match (&self.preset, &self.file) {
            (Some(name), _) => preset(name)?,
            (None, Some(path)) => Scenario::load(path)?,
            (None, None) => return Err("a scenario file or --preset is required".into()),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(trials) = self.trials {
            let mc = s.montecarlo.as_mut().ok_or("--trials needs a montecarlo section")?;
            mc.trials = trials;
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct MaxdistArgs {
    /// Source squeezing; infinitely strong squeezing when absent.
    #[arg(long)]
    pub vs: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub eps_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    pub beta: f64,
    #[arg(long, default_value_t = DEFAULT_DELTA_STAR)]
    pub delta_star: f64,
    /// Block sizes of the table.
    #[arg(long = "N", num_args = 1.., default_values_t = vec![1e6, 1e8, 1e10])]
    pub block_sizes: Vec<f64>,
    /// Fit window in km.
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.0)]
    pub d_min: f64,
    #[arg(long, default_value_t = DEFAULT_FIT_WINDOW.1)]
    pub d_max: f64,
    #[arg(long, default_value_t = 25)]
    pub points: usize,
    /// Use `K = a 10^(-kappa d)` instead of fitting.
    #[arg(long, requires = "kappa")]
    pub a: Option<f64>,
    #[arg(long, requires = "a")]
    pub kappa: Option<f64>,
}

/// Successful command with a computed rate: secure or not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Insecure,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn print_json(value: &impl serde::Serialize) -> Result<(), String> {
    println!("{}", serde_json::to_string_pretty(value).map_err(err)?);
    Ok(())
}

pub fn run(cli: Cli) -> Result<Status, String> {
    match cli.command {
        Command::Keyrate(a) => keyrate(&a),
        Command::Optimize(a) => optimize(&a),
        Command::Sweep(a) => sweep(&a),
        Command::Montecarlo(a) => montecarlo(&a),
        Command::Maxdist(a) => maxdist(&a),
        Command::Presets { name } => presets(name.as_deref()),
    }
}

fn keyrate(a: &KeyrateArgs) -> Result<Status, String> {
    let c = &a.common;
    let channel = c.channel()?;
    let scheme = SchemeKind::from(c.scheme);
    let ratio = match (scheme, a.r) {
        (SchemeKind::Double, Some(r)) if r != 0.0 => {
            return Err("the double scheme reveals no states; use --scheme modified for r > 0".into())
        }
        (SchemeKind::Double, _) => 0.0,
        (_, Some(r)) => r,
        (_, None) => LEGACY_RATIO,
    };
    let v = a.v.unwrap_or(LEGACY_MODULATION);
    let modulation = match scheme {
        SchemeKind::Single => ModulationParams::single(v),
        _ => ModulationParams::double(a.v1.unwrap_or(v), a.v2),
    };
    if scheme == SchemeKind::ModifiedDouble && ratio == 0.0 {
        return Err("the modified scheme needs r > 0; use --scheme double for r = 0".into());
    }
    let params = ProtocolParams {
        source: c.source()?,
        modulation,
        block_size: c.block_size,
        ratio,
        beta: c.beta,
        delta: c.delta,
        delta_star: c.delta_star,
    };
    params.validate().map_err(err)?;
    let report = if a.ideal_bounds {
        let bounds = ConfidenceBounds::exact(&channel);
        finite_key_rate_with_counts(&params, &channel, &bounds, c.options(), c.block_size, 0.0)
    } else {
        let bounds = expected_bounds(
            &channel,
            &params.source,
            &params.modulation,
            &params.scheme(),
            c.block_size,
            c.delta,
        )
        .map_err(err)?;
        finite_key_rate(&params, &channel, &bounds, c.options())
    }
    .map_err(err)?;
    print_json(&report)?;
    Ok(if report.is_secure() { Status::Ok } else { Status::Insecure })
}

fn optimize(a: &OptimizeArgs) -> Result<Status, String> {
    let c = &a.common;
    let mut problem = OptimizationProblem::new(c.scheme.into(), c.channel()?, c.source()?, c.block_size)
        .with_beta(c.beta)
        .with_start(Point {
            revealed_variance: a.v2,
            ..Point::legacy()
        });
    problem.delta = c.delta;
    problem.delta_star = c.delta_star;
    problem.options = c.options();
    let result = optimize_seeded(&problem).map_err(err)?;
    let legacy = legacy_key_rate(&problem).map_err(err)?;
    print_json(&json!({ "result": result, "legacy_rate": legacy.k }))?;
    Ok(if result.is_positive() { Status::Ok } else { Status::Insecure })
}

fn sweep(a: &ScenarioArgs) -> Result<Status, String> {
    let scenario = a.scenario()?;
    if scenario.sweep.is_none() {
        return Err(format!("scenario `{}` has no sweep section", scenario.name));
    }
    let mut tables = Vec::new();
    for &scheme in &scenario.schemes {
        let rows = run_sweep(&scenario, scheme)?;
        tables.push((
            format!("{}_{}.csv", scenario.name, scheme.name()),
            sweep_csv(&scenario, scheme, &rows),
        ));
    }
    let written = write_outputs(&a.out, &scenario, &tables)?;
    print_json(&json!({ "scenario": scenario.name, "digest": scenario.digest(), "files": written }))?;
    Ok(Status::Ok)
}

fn montecarlo(a: &ScenarioArgs) -> Result<Status, String> {
    let scenario = a.scenario()?;
    let rows = run_montecarlo(&scenario)?;
    let name = format!("{}_montecarlo.csv", scenario.name);
    let written = write_outputs(&a.out, &scenario, &[(name, montecarlo_csv(&scenario, &rows))])?;
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    print_json(&json!({
        "scenario": scenario.name,
        "digest": scenario.digest(),
        "rows": rows.len(),
        "max_rel_err": max_rel_err,
        "files": written,
    }))?;
    Ok(Status::Ok)
}

/// Distance where `rate(d)` falls to `level`, by bisection on `[0, hi]`.
fn crossing(rate: impl Fn(f64) -> f64, level: f64, hi: f64) -> Option<f64> {
    if rate(0.0) <= level {
        return None;
    }
    if rate(hi) > level {
        return Some(hi);
    }
    let (mut lo, mut hi) = (0.0, hi);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

fn maxdist(a: &MaxdistArgs) -> Result<Status, String> {
    let fiber = FiberModel::new(0.2, a.eps_ratio).map_err(err)?;
    let source = match a.vs {
        Some(vs) => LimitSource::Given(SourceParams::new(vs).map_err(err)?),
        None => LimitSource::InfiniteSqueezing,
    };
    let synthetic = matches!((a.a, a.kappa), (Some(_), Some(_)));
    let fit = match (a.a, a.kappa) {
        (Some(amp), Some(kappa)) => ExponentialFit::new(amp, kappa).map_err(err)?,
        _ => {
            if !(a.d_min >= 0.0 && a.d_max > a.d_min) {
                return Err(format!("bad fit window [{}, {}]", a.d_min, a.d_max));
            }
            fit_exponential_keyrate(source, &fiber, a.beta, (a.d_min, a.d_max), a.points).map_err(err)?
        }
    };
    let c = finite_size_constant(a.delta_star).map_err(err)?;
    let src = source.source();
    let asymptotic = |d: f64| {
        if synthetic {
            return fit.rate(d);
        }
        fiber
            .channel_at_distance(d)
            .map(|ch| optimal_asymptotic_rate(&ch, &src, a.beta, QuadraturePolicy::Auto).1)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut table = Vec::new();
    for &n in &a.block_sizes {
        let delta_n = finite_size_correction(n, a.delta_star).map_err(err)?;
        table.push(json!({
            "N": n,
            "delta_N": delta_n,
            "d_max": max_distance_with_constant(&fit, n, c),
            "d_cross": crossing(asymptotic, delta_n, 500.0),
        }));
    }
    print_json(&json!({
        "a": fit.a,
        "kappa": fit.kappa,
        "residual": fit.residual,
        "fit_range": if synthetic { None } else { Some(fit.fit_range) },
        "c": c,
        "slope_per_decade": 1.0 / (2.0 * fit.kappa),
        "table": table,
    }))?;
    Ok(Status::Ok)
}

fn presets(name: Option<&str>) -> Result<Status, String> {
    match name {
        Some(name) => print_json(&preset(name)?)?,
        None => {
            for p in PRESETS {
                let s = preset(p.name)?;
                println!("{:<12} {}", p.name, s.description);
            }
        }
    }
    Ok(Status::Ok)
}
