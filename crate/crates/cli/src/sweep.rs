//! Key-rate sweeps and Monte Carlo tables driven by a [`Scenario`].

use cvqkd_core::estimation::SchemeKind;
use cvqkd_core::model::{ChannelParams, SourceParams};
use cvqkd_core::montecarlo::{validate_variance_models, ValidationRow, ValidationTemplate};
use cvqkd_core::optimizer::{legacy_key_rate, optimize_seeded, OptimizationProblem, Point};
use cvqkd_core::secrecy::{theoretical_key_rate_limit, KeyRateOptions, LimitSource, QuadraturePolicy};
use rayon::prelude::*;
use serde::Serialize;

use crate::scenario::{Axis, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub squeezing: f64,
    pub axis_value: f64,
    pub k: f64,
    /// Asymptotic rate at the worst-case corner, the one entering `k`.
    pub k_inf: f64,
    pub i_ab: f64,
    pub chi: f64,
    pub delta: f64,
    pub t_low: f64,
    pub veps_up: f64,
    pub v_opt: f64,
    pub r_opt: f64,
    pub k_th: f64,
    pub k_th_inf: f64,
    pub k_legacy: f64,
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "V_S", "axis_value", "K", "K_inf", "I_AB", "chi", "Delta", "T_low", "Veps_up", "V_opt", "r_opt", "K_th",
    "K_th_inf", "K_legacy",
];

impl SweepRow {
    pub fn values(&self) -> [f64; 14] {
        [
            self.squeezing,
            self.axis_value,
            self.k,
            self.k_inf,
            self.i_ab,
            self.chi,
            self.delta,
            self.t_low,
            self.veps_up,
            self.v_opt,
            self.r_opt,
            self.k_th,
            self.k_th_inf,
            self.k_legacy,
        ]
    }
}

/// Channel and block size at one value of the sweep axis.
pub fn point_setting(scenario: &Scenario, axis: Axis, x: f64) -> Result<(ChannelParams, f64), String> {
    let fiber = &scenario.fiber;
    let err = |e: cvqkd_core::Error| e.to_string();
    match axis {
        Axis::Distance => Ok((fiber.channel_at_distance(x).map_err(err)?, scenario.protocol.block_size)),
        Axis::Transmittance => Ok((fiber.channel_at_transmittance(x).map_err(err)?, scenario.protocol.block_size)),
        Axis::BlockSize => {
            let channel = match (scenario.fixed.transmittance, scenario.fixed.distance) {
                (Some(t), _) => fiber.channel_at_transmittance(t),
                (None, Some(d)) => fiber.channel_at_distance(d),
                (None, None) => return Err("block-size sweep without a fixed link".into()),
            }
            .map_err(err)?;
            Ok((channel, x))
        }
    }
}

pub fn problem_for(
    scenario: &Scenario,
    scheme: SchemeKind,
    channel: ChannelParams,
    source: SourceParams,
    block_size: f64,
) -> OptimizationProblem {
    let p = &scenario.protocol;
    let mut problem = OptimizationProblem::new(scheme, channel, source, block_size)
        .with_beta(p.beta)
        .with_start(Point {
            revealed_variance: p.revealed_variance,
            ..Point::legacy()
        });
    problem.delta = p.delta;
    problem.delta_star = p.delta_star;
    problem.options = KeyRateOptions {
        corner: p.corner,
        ..KeyRateOptions::default()
    };
    problem
}

fn sweep_point(scenario: &Scenario, scheme: SchemeKind, squeezing: f64, axis: Axis, x: f64) -> Result<SweepRow, String> {
    let (channel, block_size) = point_setting(scenario, axis, x)?;
    let source = SourceParams::new(squeezing).map_err(|e| e.to_string())?;
    let problem = problem_for(scenario, scheme, channel, source, block_size);
    let best = optimize_seeded(&problem).map_err(|e| e.to_string())?;
    let report = best
        .report
        .ok_or_else(|| format!("no feasible {} setting at {axis} = {x}", scheme.name()))?;
    let p = &scenario.protocol;
    let limit = |s: LimitSource| {
        theoretical_key_rate_limit(&channel, block_size, p.beta, p.delta_star, s, QuadraturePolicy::Auto)
            .map(|l| l.k_th)
            .map_err(|e| e.to_string())
    };
    let legacy = legacy_key_rate(&problem).map_err(|e| e.to_string())?;
    Ok(SweepRow {
        squeezing,
        axis_value: x,
        k: report.k,
        k_inf: report.k_inf_worst,
        i_ab: report.i_ab,
        chi: report.chi_be,
        delta: report.delta_n,
        t_low: report.t_low,
        veps_up: report.veps_up,
        v_opt: best.point.key_variance,
        r_opt: best.point.ratio,
        k_th: limit(LimitSource::Given(source))?,
        k_th_inf: limit(LimitSource::InfiniteSqueezing)?,
        k_legacy: legacy.k,
    })
}

/// Rows of one scheme, source-major then in axis order.
pub fn run_sweep(scenario: &Scenario, scheme: SchemeKind) -> Result<Vec<SweepRow>, String> {
    let sweep = scenario.sweep.as_ref().ok_or("scenario has no sweep section")?;
    let xs = sweep.values();
    let jobs: Vec<(f64, f64)> = scenario
        .sources
        .iter()
        .flat_map(|&vs| xs.iter().map(move |&x| (vs, x)))
        .collect();
    jobs.par_iter()
        .map(|&(vs, x)| sweep_point(scenario, scheme, vs, sweep.variable, x))
        .collect()
}

/// Variance-model validation rows for the scenario's Monte Carlo section.
pub fn run_montecarlo(scenario: &Scenario) -> Result<Vec<ValidationRow>, String> {
    let mc = scenario.montecarlo.as_ref().ok_or("scenario has no montecarlo section")?;
    let template = ValidationTemplate {
        source: SourceParams::new(mc.squeezing).map_err(|e| e.to_string())?,
        key_variance: mc.key_variance,
        revealed_variance: mc.revealed_variance,
        ratio: mc.ratio,
        fiber: scenario.fiber,
        block_size: mc.block_size,
        trials: mc.trials,
        seed: scenario.seed,
        schemes: scenario.schemes.clone(),
    };
    validate_variance_models(&mc.grid.values(), &template).map_err(|e| e.to_string())
}
