//! The follower game: each link nudges its transmission aggressiveness
//! toward its target rate using only its own measured throughput.
//!
//! The update `r_i <- min(r_i + alpha (target_i - measured_i), r_max)` is
//! gradient ascent on the concave log-likelihood `F(r; target)`, so for a
//! strictly feasible target it converges to the unique equilibrium where
//! every link hits its target.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::graph::{ContentionGraph, StateSpace};
use crate::icn::{throughput, AccessProfile, TA_CEIL, TA_FLOOR};
use crate::sim::{Simulator, TimerLaws};
use crate::stackelberg::DemandCurve;

/// Consecutive in-tolerance checks needed to declare convergence.
pub const SETTLE_CHECKS: usize = 5;
/// Consecutive iterations a link must sit at the cap, short of its target,
/// before the game is declared capped.
pub const CAP_PATIENCE: usize = 20;
/// Rates below this use an absolute instead of a relative tolerance.
pub const RATE_FLOOR: f64 = 0.01;

/// How each iteration obtains the measured throughput.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Backend {
    /// Exact stationary throughput at the current profile.
    Exact,
    /// Windowed busy-time measurement from the event simulator, smoothed
    /// across windows.
    Simulated {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        laws: TimerLaws,
    },
}

/// Starting TA, either one value for every link or one per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialTa {
    Uniform(f64),
    PerLink(Vec<f64>),
}

impl InitialTa {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            InitialTa::Uniform(r) => Ok(vec![*r; n]),
            InitialTa::PerLink(r) => {
                check_len(n, r.len())?;
                Ok(r.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubgameConfig {
    /// Step size alpha.
    pub step_size: f64,
    /// TA cap; `None` lets the TA grow up to the numeric ceiling.
    pub r_max: Option<f64>,
    /// Weight delta of the newest window in the smoothed measurement.
    pub smoothing: f64,
    /// Measurement window tau, ms.
    pub window_ms: f64,
    /// Relative rate tolerance xi.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub r_init: InitialTa,
    pub backend: Backend,
    /// Keep the per-iteration trace in the result.
    pub record_trace: bool,
}

impl Default for SubgameConfig {
    fn default() -> Self {
        Self {
            step_size: 0.4,
            r_max: Some(3.0),
            smoothing: 0.05,
            window_ms: 200.0,
            tolerance: 0.01,
            max_iterations: 2000,
            r_init: InitialTa::Uniform(-2.0),
            backend: Backend::Exact,
            record_trace: true,
        }
    }
}

impl SubgameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid(
                "step_size",
                format!("{} must be positive", self.step_size),
            ));
        }
        if let Some(cap) = self.r_max {
            if !cap.is_finite() {
                return Err(invalid("r_max", "must be finite, or null for uncapped"));
            }
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(invalid(
                "smoothing",
                format!("{} not in (0, 1]", self.smoothing),
            ));
        }
        if !(self.window_ms > 0.0 && self.window_ms.is_finite()) {
            return Err(invalid(
                "window_ms",
                format!("{} must be positive", self.window_ms),
            ));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(invalid(
                "tolerance",
                format!("{} must be positive", self.tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations", "must be at least 1"));
        }
        let init_ok = match &self.r_init {
            InitialTa::Uniform(r) => r.is_finite(),
            InitialTa::PerLink(v) => v.iter().all(|r| r.is_finite()),
        };
        if !init_ok {
            return Err(invalid("r_init", "entries must be finite"));
        }
        Ok(())
    }

    /// Allowed gap `xi * max(target, floor)` for one link.
    pub fn allowed_gap(&self, target: f64) -> f64 {
        self.tolerance * target.max(RATE_FLOOR)
    }

    fn cap(&self) -> f64 {
        self.r_max.unwrap_or(TA_CEIL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SubgameOutcome {
    AchievedTargets,
    CappedInfeasible,
    IterationBudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub ta: Vec<f64>,
    pub measured: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgameResult {
    pub r_star: AccessProfile,
    pub theta_star: Vec<f64>,
    pub outcome: SubgameOutcome,
    pub iterations: usize,
    pub trace: Vec<IterationRecord>,
}

impl SubgameResult {
    pub fn max_abs_error(&self, target: &[f64]) -> f64 {
        self.theta_star
            .iter()
            .zip(target)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One TA step: `min(r + alpha (target - measured), r_max)` per link.
pub fn ta_update(
    r: &[f64],
    target: &[f64],
    measured: &[f64],
    step_size: f64,
    r_max: Option<f64>,
) -> Result<Vec<f64>> {
    check_len(r.len(), target.len())?;
    check_len(r.len(), measured.len())?;
    Ok(r.iter()
        .zip(target.iter().zip(measured))
        .map(|(&ri, (&t, &m))| {
            let next = ri + step_size * (t - m);
            match r_max {
                Some(cap) => next.min(cap),
                None => next,
            }
        })
        .collect())
}

/// Exponential smoothing `(1 - delta) prev + delta sample`.
pub fn smooth_measurement(previous: &[f64], sample: &[f64], smoothing: f64) -> Result<Vec<f64>> {
    check_len(previous.len(), sample.len())?;
    if !(smoothing > 0.0 && smoothing <= 1.0) {
        return Err(invalid("smoothing", format!("{smoothing} not in (0, 1]")));
    }
    Ok(previous
        .iter()
        .zip(sample)
        .map(|(p, s)| (1.0 - smoothing) * p + smoothing * s)
        .collect())
}

/// Net payoff `U(theta) - M theta` of a link.
pub fn payoff(demand: &DemandCurve, rate: f64, price: f64) -> Result<f64> {
    if price < 0.0 {
        return Err(crate::error::Error::NegativePrice(price));
    }
    Ok(demand.utility(rate)? - price * rate)
}

enum Meter {
    Exact,
    Simulated {
        sim: Box<Simulator>,
        smoothed: Option<Vec<f64>>,
    },
}

/// Plays the follower game at fixed targets until it settles, caps out or
/// runs out of iterations. Links with a zero target stay silent at the TA
/// floor and take no part.
pub fn run_subgame(
    graph: &ContentionGraph,
    space: &StateSpace,
    target: &[f64],
    cfg: &SubgameConfig,
) -> Result<SubgameResult> {
    cfg.validate()?;
    let n = graph.link_count();
    check_len(n, space.link_count())?;
    check_len(n, target.len())?;
    if let Some(bad) = target.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(invalid(
            "target",
            format!("rate {bad} must be finite and non-negative"),
        ));
    }
    let active: Vec<bool> = target.iter().map(|&t| t > 0.0).collect();
    let cap = cfg.cap();

    let mut r = cfg.r_init.resolve(n)?;
    for (ri, &on) in r.iter_mut().zip(&active) {
        *ri = if on { ri.min(cap) } else { TA_FLOOR };
    }

    let mut meter = match cfg.backend {
        Backend::Exact => Meter::Exact,
        Backend::Simulated { seed, laws } => Meter::Simulated {
            sim: Box::new(Simulator::new(
                graph,
                &AccessProfile::new(r.clone())?,
                laws,
                seed,
            )?),
            smoothed: None,
        },
    };

    let mut trace = Vec::new();
    let mut settled = 0;
    let mut capped = 0;
    let mut outcome = SubgameOutcome::IterationBudgetExhausted;
    let mut measured = vec![0.0; n];
    let mut iterations = 0;

    for k in 0..cfg.max_iterations {
        iterations = k + 1;
        let profile = AccessProfile::new(r.clone())?;
        measured = match &mut meter {
            Meter::Exact => throughput(space, &profile)?,
            Meter::Simulated { sim, smoothed } => {
                let sample = sim.measure_window(&profile, cfg.window_ms)?;
                let next = match smoothed.as_ref() {
                    // the first window seeds the filter
                    None => sample,
                    Some(prev) => smooth_measurement(prev, &sample, cfg.smoothing)?,
                };
                *smoothed = Some(next.clone());
                next
            }
        };
        r = profile.into_inner();
        if cfg.record_trace {
            trace.push(IterationRecord {
                iteration: k,
                ta: r.clone(),
                measured: measured.clone(),
            });
        }

        let on_target = (0..n)
            .filter(|&i| active[i])
            .all(|i| (measured[i] - target[i]).abs() <= cfg.allowed_gap(target[i]) && r[i] < cap);
        settled = if on_target { settled + 1 } else { 0 };
        if settled >= SETTLE_CHECKS {
            outcome = SubgameOutcome::AchievedTargets;
            break;
        }

        let stuck = (0..n)
            .filter(|&i| active[i])
            .any(|i| r[i] >= cap && measured[i] < target[i] - cfg.allowed_gap(target[i]));
        capped = if stuck && cfg.r_max.is_some() {
            capped + 1
        } else {
            0
        };
        if capped >= CAP_PATIENCE {
            outcome = SubgameOutcome::CappedInfeasible;
            break;
        }

        let stepped = ta_update(&r, target, &measured, cfg.step_size, Some(cap))?;
        for i in 0..n {
            if active[i] {
                r[i] = stepped[i];
            }
        }
    }

    Ok(SubgameResult {
        r_star: AccessProfile::new(r)?,
        theta_star: measured,
        outcome,
        iterations,
        trace,
    })
}

/// Writes `iteration,link,r,theta_hat,theta_target` rows (1-based links).
pub fn write_iteration_csv<W: Write>(
    result: &SubgameResult,
    target: &[f64],
    out: W,
) -> csv::Result<()> {
    #[derive(Serialize)]
    struct Row {
        iteration: usize,
        link: usize,
        r: f64,
        theta_hat: f64,
        theta_target: f64,
    }
    let mut w = csv::Writer::from_writer(out);
    for rec in &result.trace {
        for (i, (&r, &m)) in rec.ta.iter().zip(&rec.measured).enumerate() {
            w.serialize(Row {
                iteration: rec.iteration,
                link: i + 1,
                r,
                theta_hat: m,
                theta_target: target[i],
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::icn::log_likelihood;
    use crate::region::{membership, Verdict};

    fn chain3() -> (ContentionGraph, StateSpace) {
        let g = ContentionGraph::chain(3).unwrap();
        let s = g.enumerate_states().unwrap();
        (g, s)
    }

    fn exact(tolerance: f64) -> SubgameConfig {
        SubgameConfig {
            tolerance,
            max_iterations: 20_000,
            ..SubgameConfig::default()
        }
    }

    #[test]
    fn update_examples() {
        assert_eq!(
            ta_update(&[0.0], &[0.5], &[0.5], 0.4, Some(3.0)).unwrap(),
            vec![0.0]
        );
        assert_eq!(
            ta_update(&[2.9], &[0.5], &[0.1], 0.4, Some(3.0)).unwrap(),
            vec![3.0]
        );
        let r = ta_update(&[-2.0], &[0.3], &[0.1], 0.4, None).unwrap();
        assert!((r[0] + 1.92).abs() < 1e-15);
        assert!(ta_update(&[0.0, 1.0], &[0.5], &[0.5], 0.4, None).is_err());
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth_measurement(&[0.4], &[0.2], 1.0).unwrap(), vec![0.2]);
        let s = smooth_measurement(&[0.4], &[0.2], 0.05).unwrap();
        assert!((s[0] - 0.39).abs() < 1e-15);
        let mut x = vec![0.0];
        for _ in 0..400 {
            x = smooth_measurement(&x, &[0.7], 0.05).unwrap();
        }
        assert!((x[0] - 0.7).abs() < 1e-8);
        assert!(smooth_measurement(&[0.4], &[0.2], 0.0).is_err());
    }

    #[test]
    fn payoff_examples() {
        let d = DemandCurve::new(0.05, 0.55, 0.0125, 50.0).unwrap();
        assert_eq!(payoff(&d, 0.0, 30.0).unwrap(), 0.0);
        assert!((payoff(&d, 0.3, 30.0).unwrap() - 3.5).abs() < 1e-12);
        // best response on a grid sits at the target rate
        let price = 30.0;
        let best = (0..=1000)
            .map(|k| k as f64 / 1000.0)
            .max_by(|a, b| {
                payoff(&d, *a, price)
                    .unwrap()
                    .total_cmp(&payoff(&d, *b, price).unwrap())
            })
            .unwrap();
        assert!((best - d.target_rate(price).unwrap()).abs() <= 1e-3);
        assert!(payoff(&d, 0.3, -1.0).is_err());
    }

    #[test]
    fn chain_reaches_uniform_equilibrium() {
        let (g, s) = chain3();
        let res = run_subgame(&g, &s, &[0.4, 0.2, 0.4], &exact(1e-7)).unwrap();
        assert_eq!(res.outcome, SubgameOutcome::AchievedTargets);
        assert!(res.max_abs_error(&[0.4, 0.2, 0.4]) <= 1e-6);
        for r in res.r_star.ta() {
            assert!(r.abs() < 1e-4, "{r}");
        }
    }

    #[test]
    fn infeasible_target_caps_out() {
        let (g, s) = chain3();
        let target = [0.6, 0.5, 0.0];
        assert_eq!(membership(&s, &target).unwrap().verdict, Verdict::Outside);
        let res = run_subgame(&g, &s, &target, &exact(0.01)).unwrap();
        assert_eq!(res.outcome, SubgameOutcome::CappedInfeasible);
        assert!(res.r_star.ta().contains(&3.0));
        // silent link stays pinned
        assert_eq!(res.r_star.ta()[2], TA_FLOOR);
    }

    #[test]
    fn exact_iterates_ascend_and_respect_cap() {
        let g = ContentionGraph::new(4, &[(1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let s = g.enumerate_states().unwrap();
        let target = [0.3, 0.2, 0.25, 0.5];
        let res = run_subgame(&g, &s, &target, &exact(1e-6)).unwrap();
        let f: Vec<f64> = res
            .trace
            .iter()
            .map(|rec| {
                log_likelihood(&s, &AccessProfile::new(rec.ta.clone()).unwrap(), &target).unwrap()
            })
            .collect();
        for w in f.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!(res.trace.iter().all(|rec| rec.ta.iter().all(|&r| r <= 3.0)));
    }

    #[test]
    fn uncapped_infeasible_target_diverges() {
        let (g, s) = chain3();
        let cfg = SubgameConfig {
            r_max: None,
            max_iterations: 1500,
            ..SubgameConfig::default()
        };
        let res = run_subgame(&g, &s, &[0.6, 0.5, 0.6], &cfg).unwrap();
        assert_eq!(res.outcome, SubgameOutcome::IterationBudgetExhausted);
        assert!(res.r_star.ta().iter().cloned().fold(f64::MIN, f64::max) > 10.0);
    }

    #[test]
    fn simulated_single_link() {
        let g = ContentionGraph::isolated(1).unwrap();
        let s = g.enumerate_states().unwrap();
        let cfg = SubgameConfig {
            backend: Backend::Simulated {
                seed: 3,
                laws: TimerLaws::Uniform,
            },
            tolerance: 0.05,
            ..SubgameConfig::default()
        };
        let res = run_subgame(&g, &s, &[0.5], &cfg).unwrap();
        assert_eq!(res.outcome, SubgameOutcome::AchievedTargets);
        assert!(res.r_star.ta()[0].abs() < 0.3);
    }

    #[test]
    fn config_validation() {
        let (g, s) = chain3();
        let bad = SubgameConfig {
            smoothing: 0.0,
            ..SubgameConfig::default()
        };
        assert!(run_subgame(&g, &s, &[0.1; 3], &bad).is_err());
        let bad = SubgameConfig {
            step_size: -1.0,
            ..SubgameConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SubgameConfig {
            r_init: InitialTa::PerLink(vec![0.0; 2]),
            ..SubgameConfig::default()
        };
        assert!(run_subgame(&g, &s, &[0.1; 3], &bad).is_err());
        assert!(run_subgame(&g, &s, &[0.1, -0.1, 0.1], &SubgameConfig::default()).is_err());
    }

    #[test]
    fn iteration_csv_shape() {
        let (g, s) = chain3();
        let cfg = SubgameConfig {
            max_iterations: 3,
            ..SubgameConfig::default()
        };
        let res = run_subgame(&g, &s, &[0.4, 0.2, 0.4], &cfg).unwrap();
        let mut buf = Vec::new();
        write_iteration_csv(&res, &[0.4, 0.2, 0.4], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 3);
        assert!(text.starts_with("iteration,link,r,theta_hat,theta_target"));
    }
}
