//! The leader side: per-link demand curves, the two-phase price search
//! driven by the TA margin, bottleneck identification, and a bisection
//! reference solver for the optimal price.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::graph::{ContentionGraph, LinkId, StateSpace};
use crate::subgame::{run_subgame, Backend, InitialTa, SubgameConfig, SubgameOutcome};

/// Price-dependent demand of one link.
///
/// Below the link's reservation price `m` the target rate rises linearly
/// from `gamma` with slope `b` as the price drops, saturating at `pi`.
/// Above `m` the link stays silent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandCurve {
    pub gamma: f64,
    pub pi: f64,
    pub b: f64,
    pub m: f64,
}

impl DemandCurve {
    pub fn new(gamma: f64, pi: f64, b: f64, m: f64) -> Result<Self> {
        let d = Self { gamma, pi, b, m };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma, self.pi, self.b, self.m]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(invalid("demand", "parameters must be finite"));
        }
        if !(0.0 <= self.gamma && self.gamma <= self.pi && self.pi <= 1.0) {
            return Err(invalid(
                "demand",
                format!(
                    "need 0 <= gamma <= pi <= 1, got gamma={} pi={}",
                    self.gamma, self.pi
                ),
            ));
        }
        if !(self.b > 0.0) {
            return Err(invalid(
                "demand",
                format!("slope b={} must be positive", self.b),
            ));
        }
        if !(self.m > 0.0) {
            return Err(invalid(
                "demand",
                format!("reservation price m={} must be positive", self.m),
            ));
        }
        Ok(())
    }

    /// Target rate at `price`.
    pub fn target_rate(&self, price: f64) -> Result<f64> {
        if price < 0.0 || price.is_nan() {
            return Err(Error::NegativePrice(price));
        }
        if price > self.m {
            Ok(0.0)
        } else {
            Ok((self.gamma - self.b * (price - self.m)).min(self.pi))
        }
    }

    /// Utility whose marginal value inverts [`Self::target_rate`].
    pub fn utility(&self, rate: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::RateOutOfRange(rate));
        }
        let Self { gamma, pi, b, m } = *self;
        Ok(if rate < gamma {
            m * rate
        } else if rate < pi {
            m * rate - (rate - gamma).powi(2) / (2.0 * b)
        } else {
            m * pi - (pi - gamma).powi(2) / (2.0 * b)
        })
    }
}

/// Target rates of every link at `price`.
pub fn target_rates(demands: &[DemandCurve], price: f64) -> Result<Vec<f64>> {
    demands.iter().map(|d| d.target_rate(price)).collect()
}

/// Leader objective `g(M)`, the sum of target rates.
pub fn total_target(demands: &[DemandCurve], price: f64) -> Result<f64> {
    Ok(target_rates(demands, price)?.iter().sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PricingConfig {
    /// Starting price M0; should leave the network lightly loaded.
    pub initial_price: f64,
    /// Phase-1 decrement phi.
    pub phase1_step: f64,
    /// Phase-2 gain beta, scaling the margin into a price step.
    pub phase2_gain: f64,
    /// Margin eta below which phase 2 starts.
    pub phase_switch: f64,
    /// Margin epsilon at which the search stops.
    pub margin_tolerance: f64,
    /// Discount sigma applied to the gain after an overshoot.
    pub gain_discount: f64,
    pub max_stages: usize,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            initial_price: 55.0,
            phase1_step: 5.0,
            phase2_gain: 5.0,
            phase_switch: 1.0,
            margin_tolerance: 0.1,
            gain_discount: 0.9,
            max_stages: 50,
        }
    }
}

impl PricingConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("{x} must be positive")))
            }
        };
        positive("initial_price", self.initial_price)?;
        positive("phase1_step", self.phase1_step)?;
        positive("phase2_gain", self.phase2_gain)?;
        positive("margin_tolerance", self.margin_tolerance)?;
        if !(self.margin_tolerance < self.phase_switch && self.phase_switch.is_finite()) {
            return Err(invalid(
                "phase_switch",
                "need 0 < margin_tolerance < phase_switch",
            ));
        }
        if !(self.gain_discount > 0.0 && self.gain_discount < 1.0) {
            return Err(invalid(
                "gain_discount",
                format!("{} not in (0, 1)", self.gain_discount),
            ));
        }
        if self.max_stages == 0 {
            return Err(invalid("max_stages", "must be at least 1"));
        }
        Ok(())
    }
}

/// Leader bookkeeping carried from stage to stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PricingState {
    pub price: f64,
    /// Last price at which the followers met their targets.
    pub prev_price: Option<f64>,
    /// Margin observed at `prev_price`.
    pub prev_margin: Option<f64>,
    /// Highest price known to push targets out of reach.
    pub lower_bound: f64,
    pub gain: f64,
}

impl PricingState {
    pub fn new(cfg: &PricingConfig) -> Self {
        Self {
            price: cfg.initial_price,
            prev_price: None,
            prev_margin: None,
            lower_bound: 0.0,
            gain: cfg.phase2_gain,
        }
    }
}

/// Next leader state after a stage with TA margin `margin`.
///
/// * margin above `phase_switch`: step down by `phase1_step`;
/// * otherwise: step down by `gain * margin`, not below the lower bound;
/// * overshoot: the current price becomes the lower bound, the gain is
///   discounted, and the price restarts from the last achievable price.
///
/// No price below the lower bound or below zero is ever emitted.
pub fn price_update(
    state: &PricingState,
    margin: f64,
    overshoot: bool,
    cfg: &PricingConfig,
) -> PricingState {
    let mut next = state.clone();
    let price = if overshoot {
        next.lower_bound = state.price;
        next.gain = state.gain * cfg.gain_discount;
        match (state.prev_price, state.prev_margin) {
            (Some(p), Some(d)) => p - next.gain * d,
            // nothing achievable seen yet: back off by a phase-1 step
            _ => state.price + cfg.phase1_step,
        }
    } else {
        next.prev_price = Some(state.price);
        next.prev_margin = Some(margin);
        if margin > cfg.phase_switch {
            state.price - cfg.phase1_step
        } else {
            state.price - state.gain * margin
        }
    };
    next.price = price.max(next.lower_bound).max(0.0);
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Termination {
    MarginConverged,
    TargetsSaturated,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: usize,
    pub price: f64,
    pub targets: Vec<f64>,
    pub r_star: Vec<f64>,
    pub theta_star: Vec<f64>,
    pub outcome: SubgameOutcome,
    pub iterations: usize,
    /// `min (r_max - r*_i)` over links with a positive target.
    pub margin: f64,
    pub overshoot: bool,
    /// Gain and lower bound in force while this stage's price was chosen.
    pub gain: f64,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StackelbergResult {
    pub optimal_price: f64,
    pub stages: Vec<StageRecord>,
    pub bottleneck: Option<LinkId>,
    pub termination: Termination,
    pub r_max: Option<f64>,
}

impl StackelbergResult {
    pub fn final_stage(&self) -> Option<&StageRecord> {
        self.stages.last()
    }

    /// Total throughput target `g` at the final stage.
    pub fn total_target(&self) -> f64 {
        self.final_stage().map_or(0.0, |s| s.targets.iter().sum())
    }
}

fn tta_margin(r_star: &[f64], targets: &[f64], r_max: Option<f64>) -> f64 {
    let cap = match r_max {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    r_star
        .iter()
        .zip(targets)
        .filter(|(_, &t)| t > 0.0)
        .map(|(&r, _)| cap - r)
        .fold(f64::INFINITY, f64::min)
}

/// Link with the smallest TA margin at the final stage (ties to the
/// lowest id). Only links with a positive target are considered.
pub fn bottleneck(result: &StackelbergResult) -> Result<LinkId> {
    let last = result.final_stage().ok_or(Error::NoStages)?;
    bottleneck_of(&last.r_star, &last.targets, result.r_max).ok_or(Error::NoStages)
}

fn bottleneck_of(r_star: &[f64], targets: &[f64], r_max: Option<f64>) -> Option<LinkId> {
    let cap = r_max.unwrap_or(0.0);
    let mut best: Option<(usize, f64)> = None;
    for (i, (&r, &t)) in r_star.iter().zip(targets).enumerate() {
        if t <= 0.0 {
            continue;
        }
        let m = cap - r;
        if best.is_none_or(|(_, b)| m < b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i + 1)
}

/// Runs the leader's price search with the follower game in the loop.
///
/// Each stage sets targets from the price, plays the follower game (warm
/// started from the previous stage), and stops when the TA margin falls in
/// `(0, margin_tolerance]` or when all targets are positive and unchanged
/// from the previous stage.
pub fn run_stackelberg(
    graph: &ContentionGraph,
    space: &StateSpace,
    demands: &[DemandCurve],
    sub_cfg: &SubgameConfig,
    price_cfg: &PricingConfig,
) -> Result<StackelbergResult> {
    let n = graph.link_count();
    check_len(n, demands.len())?;
    check_len(n, space.link_count())?;
    for d in demands {
        d.validate()?;
    }
    sub_cfg.validate()?;
    price_cfg.validate()?;

    let initial = sub_cfg.r_init.resolve(n)?;
    let mut state = PricingState::new(price_cfg);
    let mut stages: Vec<StageRecord> = Vec::new();
    let mut previous_targets: Option<Vec<f64>> = None;
    let mut warm: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut termination = Termination::Budget;

    for stage in 0..price_cfg.max_stages {
        let price = state.price;
        let targets = target_rates(demands, price)?;

        let start: Vec<f64> = match &warm {
            Some((r, was)) => (0..n)
                .map(|i| if was[i] > 0.0 { r[i] } else { initial[i] })
                .collect(),
            None => initial.clone(),
        };
        let mut cfg = sub_cfg.clone();
        cfg.r_init = InitialTa::PerLink(start);
        cfg.record_trace = false;
        if let Backend::Simulated { seed, laws } = sub_cfg.backend {
            cfg.backend = Backend::Simulated {
                seed: seed.wrapping_add(stage as u64),
                laws,
            };
        }
        let game = run_subgame(graph, space, &targets, &cfg)?;
        let r_star = game.r_star.ta().to_vec();

        let margin = tta_margin(&r_star, &targets, sub_cfg.r_max);
        let overshoot = game.outcome == SubgameOutcome::CappedInfeasible
            || sub_cfg.r_max.is_some_and(|cap| {
                (0..n).any(|i| {
                    targets[i] > 0.0
                        && r_star[i] >= cap
                        && game.theta_star[i] < targets[i] - sub_cfg.allowed_gap(targets[i])
                })
            });

        stages.push(StageRecord {
            stage,
            price,
            targets: targets.clone(),
            r_star: r_star.clone(),
            theta_star: game.theta_star.clone(),
            outcome: game.outcome,
            iterations: game.iterations,
            margin,
            overshoot,
            gain: state.gain,
            lower_bound: state.lower_bound,
        });

        if !overshoot
            && game.outcome == SubgameOutcome::AchievedTargets
            && margin > 0.0
            && margin <= price_cfg.margin_tolerance
        {
            termination = Termination::MarginConverged;
            break;
        }
        if !overshoot
            && targets.iter().all(|&t| t > 0.0)
            && previous_targets.as_ref() == Some(&targets)
        {
            termination = Termination::TargetsSaturated;
            break;
        }

        previous_targets = Some(targets.clone());
        warm = Some((r_star, targets));
        state = price_update(&state, margin, overshoot, price_cfg);
    }

    let optimal_price = match termination {
        Termination::Budget => stages
            .iter()
            .filter(|s| s.outcome == SubgameOutcome::AchievedTargets)
            .map(|s| s.price)
            .fold(None, |acc: Option<f64>, p| {
                Some(acc.map_or(p, |a| a.min(p)))
            })
            .unwrap_or(state.price),
        _ => stages.last().map(|s| s.price).unwrap_or(state.price),
    };
    let bottleneck = stages
        .last()
        .and_then(|s| bottleneck_of(&s.r_star, &s.targets, sub_cfg.r_max));

    Ok(StackelbergResult {
        optimal_price,
        stages,
        bottleneck,
        termination,
        r_max: sub_cfg.r_max,
    })
}

/// Reference optimum from bisection on the price.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisectionResult {
    pub price: f64,
    pub targets: Vec<f64>,
    pub total: f64,
    pub probes: usize,
}

/// Follower-game settings used by the bisection feasibility test.
pub fn bisection_subgame_config(r_max: Option<f64>) -> SubgameConfig {
    SubgameConfig {
        r_max,
        tolerance: 1e-4,
        max_iterations: 50_000,
        backend: Backend::Exact,
        record_trace: false,
        ..SubgameConfig::default()
    }
}

/// Smallest price (within `tol`) at which the exact follower game meets
/// every target below the TA cap. Since targets only grow as the price
/// falls, feasibility is monotone in the price and bisection applies.
pub fn optimal_price_bisection(
    graph: &ContentionGraph,
    space: &StateSpace,
    demands: &[DemandCurve],
    r_max: Option<f64>,
    tol: f64,
) -> Result<BisectionResult> {
    optimal_price_bisection_with(graph, space, demands, &bisection_subgame_config(r_max), tol)
}

pub fn optimal_price_bisection_with(
    graph: &ContentionGraph,
    space: &StateSpace,
    demands: &[DemandCurve],
    sub_cfg: &SubgameConfig,
    tol: f64,
) -> Result<BisectionResult> {
    check_len(graph.link_count(), demands.len())?;
    if sub_cfg.backend != Backend::Exact {
        return Err(invalid("backend", "bisection needs the exact backend"));
    }
    if !(tol > 0.0) {
        return Err(invalid("tol", format!("{tol} must be positive")));
    }
    if demands.is_empty() {
        return Err(Error::DegenerateDemand("no links".into()));
    }
    for d in demands {
        d.validate()?;
    }
    let mut probes = 0;
    let mut feasible = |price: f64| -> Result<bool> {
        probes += 1;
        let targets = target_rates(demands, price)?;
        if targets.iter().all(|&t| t == 0.0) {
            return Ok(true);
        }
        let game = run_subgame(graph, space, &targets, sub_cfg)?;
        Ok(game.outcome == SubgameOutcome::AchievedTargets)
    };

    let top = demands.iter().map(|d| d.m).fold(0.0, f64::max);
    let price = if feasible(0.0)? {
        0.0
    } else {
        if !feasible(top)? {
            return Err(Error::DegenerateDemand(format!(
                "targets are out of reach even at the highest reservation price {top}"
            )));
        }
        let (mut lo, mut hi) = (0.0, top);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if feasible(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let targets = target_rates(demands, price)?;
    let total = targets.iter().sum();
    Ok(BisectionResult {
        price,
        targets,
        total,
        probes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub r_max: f64,
    pub two_phase_price: f64,
    pub two_phase_total: f64,
    pub termination: Termination,
    pub stages: usize,
    pub bisection_price: f64,
    pub bisection_total: f64,
}

/// Runs the price search and the bisection reference for each cap value.
/// Points are computed in parallel; the output order follows `caps`.
pub fn rmax_sweep(
    graph: &ContentionGraph,
    space: &StateSpace,
    demands: &[DemandCurve],
    sub_cfg: &SubgameConfig,
    price_cfg: &PricingConfig,
    caps: &[f64],
    tol: f64,
) -> Result<Vec<SweepPoint>> {
    caps.par_iter()
        .map(|&cap| {
            let cfg = SubgameConfig {
                r_max: Some(cap),
                ..sub_cfg.clone()
            };
            let game = run_stackelberg(graph, space, demands, &cfg, price_cfg)?;
            let reference = optimal_price_bisection(graph, space, demands, Some(cap), tol)?;
            Ok(SweepPoint {
                r_max: cap,
                two_phase_price: game.optimal_price,
                two_phase_total: total_target(demands, game.optimal_price)?,
                termination: game.termination,
                stages: game.stages.len(),
                bisection_price: reference.price,
                bisection_total: reference.total,
            })
        })
        .collect()
}

/// Writes one stage per row: leader state followed by per-link
/// `target_i`, `theta_i`, `r_i` columns.
pub fn write_stage_csv<W: Write>(result: &StackelbergResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = result.stages.first().map_or(0, |s| s.targets.len());
    let mut header: Vec<String> = ["stage", "price", "margin", "gain", "lower_bound", "outcome"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 1..=n {
        header.push(format!("target_{i}"));
        header.push(format!("theta_{i}"));
        header.push(format!("r_{i}"));
    }
    w.write_record(&header)?;
    for s in &result.stages {
        let mut row = vec![
            s.stage.to_string(),
            s.price.to_string(),
            s.margin.to_string(),
            s.gain.to_string(),
            s.lower_bound.to_string(),
            format!("{:?}", s.outcome),
        ];
        for i in 0..n {
            row.push(s.targets[i].to_string());
            row.push(s.theta_star[i].to_string());
            row.push(s.r_star[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
