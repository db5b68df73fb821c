//! Scenario files and experiment orchestration.
//!
//! A scenario is a single JSON document naming one experiment together
//! with the graph, demands and solver settings it needs. [`run`] executes
//! it and returns a [`RunReport`] holding a deterministic summary plus the
//! CSV traces; [`RunReport::write_to`] puts them on disk.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::Error;
use crate::graph::{ContentionGraph, StateSpace, ENUMERATION_CAP, MAX_LINKS};
use crate::icn::{entropy, log_partition, stationary_distribution, throughput, AccessProfile};
use crate::region::{membership, Verdict};
use crate::sim::{write_event_csv, Simulator, TimerLaws};
use crate::stackelberg::{
    rmax_sweep, run_stackelberg, target_rates, write_stage_csv, DemandCurve, PricingConfig,
    Termination,
};
use crate::subgame::{run_subgame, write_iteration_csv, Backend, SubgameConfig, SubgameOutcome};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

/// Largest TA reached by an uncapped run that still counts as stable.
pub const DIVERGENCE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Enumerate,
    ExactThroughput,
    Membership,
    Subgame,
    Stackelberg,
    RmaxSweep,
    UnstableDemo,
    DesValidate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Enumerate => "enumerate",
            Experiment::ExactThroughput => "exact-throughput",
            Experiment::Membership => "membership",
            Experiment::Subgame => "subgame",
            Experiment::Stackelberg => "stackelberg",
            Experiment::RmaxSweep => "rmax-sweep",
            Experiment::UnstableDemo => "unstable-demo",
            Experiment::DesValidate => "des-validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSpec {
    pub links: usize,
    #[serde(default)]
    pub edges: Vec<(usize, usize)>,
}

/// One curve shared by every link, or one per link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DemandSpec {
    Shared(DemandCurve),
    PerLink(Vec<DemandCurve>),
}

impl DemandSpec {
    pub fn resolve(&self, n: usize) -> Vec<DemandCurve> {
        match self {
            DemandSpec::Shared(d) => vec![*d; n],
            DemandSpec::PerLink(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub r_max: Vec<f64>,
    /// Price resolution of the bisection reference.
    pub bisection_tolerance: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            r_max: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            bisection_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    pub horizon_ms: f64,
    /// Allowed per-link gap between simulated and exact throughput.
    pub tolerance: f64,
    pub record_events: bool,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            horizon_ms: 1e6,
            tolerance: 0.02,
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub experiment: Experiment,
    /// Seed for everything random. Overrides the simulated backend's seed.
    #[serde(default)]
    pub seed: Option<u64>,
    pub graph: GraphSpec,
    #[serde(default)]
    pub demands: Option<DemandSpec>,
    #[serde(default)]
    pub targets: Option<Vec<f64>>,
    /// TA profile for `exact-throughput` and `des-validate`.
    #[serde(default)]
    pub profile: Option<Vec<f64>>,
    #[serde(default)]
    pub subgame: SubgameConfig,
    #[serde(default)]
    pub pricing: PricingConfig,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A rejected scenario, with the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ScenarioError {}

fn at(path: impl Into<String>, message: impl fmt::Display) -> ScenarioError {
    ScenarioError {
        path: path.into(),
        message: message.to_string(),
    }
}

fn param_error(section: &str, err: Error) -> ScenarioError {
    match err {
        Error::InvalidParameter { name, reason } => at(format!("{section}.{name}"), reason),
        other => at(section, other),
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Config(#[from] ScenarioError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{0}")]
    Csv(#[from] csv::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => EXIT_CONFIG,
            _ => 1,
        }
    }
}

/// Parses and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, RunError> {
    let text = std::fs::read_to_string(path)?;
    Ok(parse_scenario(&text)?)
}

/// Parses and validates scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        at(path, e.into_inner())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let n = self.graph.links;
        if n == 0 {
            return Err(at("graph.links", Error::EmptyGraph));
        }
        if n > MAX_LINKS {
            return Err(at("graph.links", Error::TooManyLinks { n, max: MAX_LINKS }));
        }
        if n > ENUMERATION_CAP {
            return Err(at(
                "graph.links",
                Error::EnumerationCap {
                    n,
                    cap: ENUMERATION_CAP,
                },
            ));
        }
        for (k, &(a, b)) in self.graph.edges.iter().enumerate() {
            for link in [a, b] {
                if link == 0 || link > n {
                    return Err(at(
                        format!("graph.edges[{k}]"),
                        Error::LinkOutOfRange { link, n },
                    ));
                }
            }
            if a == b {
                return Err(at(format!("graph.edges[{k}]"), Error::SelfLoop(a)));
            }
        }
        if let Some(DemandSpec::PerLink(v)) = &self.demands {
            if v.len() != n {
                return Err(at(
                    "demands",
                    Error::DimensionMismatch {
                        expected: n,
                        got: v.len(),
                    },
                ));
            }
        }
        match &self.demands {
            Some(DemandSpec::Shared(d)) => d.validate().map_err(|e| at("demands", e))?,
            Some(DemandSpec::PerLink(v)) => {
                for (i, d) in v.iter().enumerate() {
                    d.validate().map_err(|e| at(format!("demands[{i}]"), e))?;
                }
            }
            None => {}
        }
        if let Some(t) = &self.targets {
            if t.len() != n {
                return Err(at(
                    "targets",
                    Error::DimensionMismatch {
                        expected: n,
                        got: t.len(),
                    },
                ));
            }
            for (i, &x) in t.iter().enumerate() {
                if !(x.is_finite() && (0.0..=1.0).contains(&x)) {
                    return Err(at(
                        format!("targets[{i}]"),
                        format!("rate {x} not in [0, 1]"),
                    ));
                }
            }
        }
        if let Some(r) = &self.profile {
            if r.len() != n {
                return Err(at(
                    "profile",
                    Error::DimensionMismatch {
                        expected: n,
                        got: r.len(),
                    },
                ));
            }
            for (i, &x) in r.iter().enumerate() {
                if !x.is_finite() {
                    return Err(at(format!("profile[{i}]"), format!("{x} is not finite")));
                }
            }
        }
        self.subgame
            .validate()
            .map_err(|e| param_error("subgame", e))?;
        if let crate::subgame::InitialTa::PerLink(v) = &self.subgame.r_init {
            if v.len() != n {
                return Err(at(
                    "subgame.r_init",
                    Error::DimensionMismatch {
                        expected: n,
                        got: v.len(),
                    },
                ));
            }
        }
        self.pricing
            .validate()
            .map_err(|e| param_error("pricing", e))?;
        if self.sweep.r_max.is_empty() || self.sweep.r_max.iter().any(|x| !x.is_finite()) {
            return Err(at("sweep.r_max", "needs at least one finite cap"));
        }
        if !(self.sweep.bisection_tolerance > 0.0) {
            return Err(at("sweep.bisection_tolerance", "must be positive"));
        }
        if !(self.simulation.horizon_ms > 0.0 && self.simulation.horizon_ms.is_finite()) {
            return Err(at("simulation.horizon_ms", "must be positive"));
        }
        if !(self.simulation.tolerance > 0.0) {
            return Err(at("simulation.tolerance", "must be positive"));
        }

        let needs = |field: &str| {
            at(
                field,
                format!("required by experiment {}", self.experiment.name()),
            )
        };
        match self.experiment {
            Experiment::Membership | Experiment::Subgame if self.targets.is_none() => {
                Err(needs("targets"))
            }
            Experiment::ExactThroughput if self.profile.is_none() => Err(needs("profile")),
            Experiment::Stackelberg | Experiment::RmaxSweep if self.demands.is_none() => {
                Err(needs("demands"))
            }
            _ => Ok(()),
        }
    }

    pub fn build_graph(&self) -> Result<ContentionGraph, Error> {
        ContentionGraph::new(self.graph.links, &self.graph.edges)
    }

    /// Hex SHA-256 of the scenario with `seed` applied and output settings
    /// left out.
    pub fn digest(&self, seed: u64) -> String {
        let mut canonical = self.clone();
        canonical.seed = Some(seed);
        canonical.output = OutputSpec::default();
        let bytes = serde_json::to_vec(&canonical).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A file produced by a run, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub experiment: Experiment,
    pub digest: String,
    pub seed: u64,
    pub exit_code: i32,
    pub warnings: Vec<String>,
    /// Experiment-specific structured output.
    pub result: Value,
    pub artifacts: Vec<Artifact>,
    pub wall_clock_ms: f64,
}

impl RunReport {
    /// Summary document; everything except the wall-clock time, so that
    /// reruns of the same scenario and seed are byte-identical.
    pub fn summary(&self) -> Value {
        json!({
            "experiment": self.experiment.name(),
            "scenario_digest": self.digest,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "exit_code": self.exit_code,
            "warnings": self.warnings,
            "result": self.result,
        })
    }

    pub fn summary_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.summary()).expect("json");
        s.push('\n');
        s
    }

    /// Writes `summary.json` and every artifact into `dir`, creating it if
    /// needed. Returns the written paths.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> std::io::Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let summary = dir.join("summary.json");
        std::fs::write(&summary, self.summary_json())?;
        written.push(summary);
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs the scenario's experiment. `seed_override` takes precedence over
/// the scenario's own seed.
pub fn run(scenario: &Scenario, seed_override: Option<u64>) -> Result<RunReport, RunError> {
    scenario.validate()?;
    let started = Instant::now();
    let seed = seed_override.or(scenario.seed).unwrap_or(0);
    let graph = scenario.build_graph().map_err(|e| at("graph", e))?;
    let space = graph.enumerate_states()?;
    let mut sub = scenario.subgame.clone();
    if let Backend::Simulated { laws, .. } = sub.backend {
        sub.backend = Backend::Simulated { seed, laws };
    }

    let mut warnings = Vec::new();
    let components = graph.connected_components();
    if components.len() > 1 {
        let parts: Vec<String> = components
            .iter()
            .map(|c| format!("{:?}", c.links))
            .collect();
        warnings.push(format!(
            "graph has {} connected components {}; they do not interact and can be run separately",
            components.len(),
            parts.join(" ")
        ));
    }

    let ctx = Context {
        scenario,
        graph: &graph,
        space: &space,
        sub,
        seed,
    };
    let (exit_code, result, artifacts) = match scenario.experiment {
        Experiment::Enumerate => ctx.enumerate()?,
        Experiment::ExactThroughput => ctx.exact_throughput()?,
        Experiment::Membership => ctx.membership()?,
        Experiment::Subgame => ctx.subgame()?,
        Experiment::Stackelberg => ctx.stackelberg(&mut warnings)?,
        Experiment::RmaxSweep => ctx.rmax_sweep(&mut warnings)?,
        Experiment::UnstableDemo => ctx.unstable_demo()?,
        Experiment::DesValidate => ctx.des_validate()?,
    };

    Ok(RunReport {
        experiment: scenario.experiment,
        digest: scenario.digest(seed),
        seed,
        exit_code,
        warnings,
        result,
        artifacts,
        wall_clock_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

type Outcome = (i32, Value, Vec<Artifact>);

struct Context<'a> {
    scenario: &'a Scenario,
    graph: &'a ContentionGraph,
    space: &'a StateSpace,
    sub: SubgameConfig,
    seed: u64,
}

fn csv_artifact(
    name: &str,
    write: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>,
) -> Result<Artifact, RunError> {
    let mut contents = Vec::new();
    write(&mut contents)?;
    Ok(Artifact {
        name: name.to_string(),
        contents,
    })
}

fn subgame_exit(outcome: SubgameOutcome) -> i32 {
    match outcome {
        SubgameOutcome::AchievedTargets => EXIT_OK,
        SubgameOutcome::CappedInfeasible => EXIT_INFEASIBLE,
        SubgameOutcome::IterationBudgetExhausted => EXIT_BUDGET,
    }
}

fn max_ta(r: &[f64]) -> f64 {
    r.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

impl Context<'_> {
    fn n(&self) -> usize {
        self.graph.link_count()
    }

    fn demands(&self) -> Vec<DemandCurve> {
        self.scenario
            .demands
            .as_ref()
            .map(|d| d.resolve(self.n()))
            .unwrap_or_default()
    }

    fn distribution_artifact(&self, name: &str, p: &[f64]) -> Result<Artifact, RunError> {
        csv_artifact(name, |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["state", "probability"])?;
            for (&s, q) in self.space.states().iter().zip(p) {
                w.write_record([self.space.format_state(s), q.to_string()])?;
            }
            w.flush()?;
            Ok(())
        })
    }

    fn enumerate(&self) -> Result<Outcome, RunError> {
        let space = self.space;
        let states: Vec<String> = space
            .states()
            .iter()
            .map(|&s| space.format_state(s))
            .collect();
        let components: Vec<Value> = self
            .graph
            .connected_components()
            .iter()
            .map(|c| {
                let count = c.graph.enumerate_states().map(|s| s.len()).unwrap_or(0);
                json!({ "links": c.links, "states": count })
            })
            .collect();
        let artifact = csv_artifact("states.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["index", "mask", "state", "links"])?;
            for (k, (&s, set)) in space.states().iter().zip(space.link_sets()).enumerate() {
                let links: Vec<String> = set.iter().map(|l| l.to_string()).collect();
                w.write_record([
                    k.to_string(),
                    s.to_string(),
                    space.format_state(s),
                    links.join(" "),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?;
        let result = json!({
            "links": self.n(),
            "count": space.len(),
            "states": states,
            "components": components,
        });
        Ok((EXIT_OK, result, vec![artifact]))
    }

    fn exact_throughput(&self) -> Result<Outcome, RunError> {
        let r = AccessProfile::new(self.scenario.profile.clone().unwrap_or_default())?;
        let p = stationary_distribution(self.space, &r)?;
        let theta = throughput(self.space, &r)?;
        let result = json!({
            "profile": r.ta(),
            "throughput": theta,
            "total_throughput": theta.iter().sum::<f64>(),
            "log_partition": log_partition(self.space, &r)?,
            "entropy": entropy(&p),
        });
        let artifact = self.distribution_artifact("distribution.csv", p.probabilities())?;
        Ok((EXIT_OK, result, vec![artifact]))
    }

    fn membership(&self) -> Result<Outcome, RunError> {
        let target = self.scenario.targets.clone().unwrap_or_default();
        let v = membership(self.space, &target)?;
        let mut artifacts = Vec::new();
        if let Some(w) = &v.witness {
            artifacts.push(self.distribution_artifact("witness.csv", w.probabilities())?);
        }
        let result = json!({
            "targets": target,
            "verdict": v.verdict,
            "strictly_feasible": v.verdict == Verdict::StrictlyInside,
            "min_probability": v.min_probability,
            "witness": v.witness.as_ref().map(|w| w.probabilities().to_vec()),
        });
        Ok((EXIT_OK, result, artifacts))
    }

    fn subgame(&self) -> Result<Outcome, RunError> {
        let target = self.scenario.targets.clone().unwrap_or_default();
        let res = run_subgame(self.graph, self.space, &target, &self.sub)?;
        let artifact = csv_artifact("iterations.csv", |out| {
            write_iteration_csv(&res, &target, out)
        })?;
        let result = json!({
            "targets": target,
            "outcome": res.outcome,
            "iterations": res.iterations,
            "r_star": res.r_star.ta(),
            "theta_star": res.theta_star,
            "max_abs_error": res.max_abs_error(&target),
            "r_max": self.sub.r_max,
        });
        Ok((subgame_exit(res.outcome), result, vec![artifact]))
    }

    fn load_warning(
        &self,
        demands: &[DemandCurve],
        warnings: &mut Vec<String>,
    ) -> Result<(), RunError> {
        let price = self.scenario.pricing.initial_price;
        let targets = target_rates(demands, price)?;
        if targets.iter().any(|&t| t > 0.0)
            && membership(self.space, &targets)?.verdict != Verdict::StrictlyInside
        {
            warnings.push(format!(
                "initial price {price} already asks for targets outside the feasible region; \
                 the price search expects to start from a light load"
            ));
        }
        Ok(())
    }

    fn stackelberg(&self, warnings: &mut Vec<String>) -> Result<Outcome, RunError> {
        let demands = self.demands();
        self.load_warning(&demands, warnings)?;
        let res = run_stackelberg(
            self.graph,
            self.space,
            &demands,
            &self.sub,
            &self.scenario.pricing,
        )?;
        let artifact = csv_artifact("stages.csv", |out| write_stage_csv(&res, out))?;
        let last = res.final_stage();
        let result = json!({
            "termination": res.termination,
            "optimal_price": res.optimal_price,
            "stages": res.stages.len(),
            "prices": res.stages.iter().map(|s| s.price).collect::<Vec<_>>(),
            "bottleneck": res.bottleneck,
            "final_margin": last.map(|s| s.margin),
            "final_outcome": last.map(|s| s.outcome),
            "final_targets": last.map(|s| s.targets.clone()),
            "final_throughput": last.map(|s| s.theta_star.clone()),
            "total_target": res.total_target(),
            "r_max": res.r_max,
        });
        let code = match res.termination {
            Termination::Budget => EXIT_BUDGET,
            _ => EXIT_OK,
        };
        Ok((code, result, vec![artifact]))
    }

    fn rmax_sweep(&self, warnings: &mut Vec<String>) -> Result<Outcome, RunError> {
        let demands = self.demands();
        self.load_warning(&demands, warnings)?;
        let sweep = &self.scenario.sweep;
        let points = rmax_sweep(
            self.graph,
            self.space,
            &demands,
            &self.sub,
            &self.scenario.pricing,
            &sweep.r_max,
            sweep.bisection_tolerance,
        )?;
        let totals: Vec<f64> = points.iter().map(|p| p.two_phase_total).collect();
        let increments: Vec<f64> = totals.windows(2).map(|w| w[1] - w[0]).collect();
        let nondecreasing = increments.iter().all(|&d| d >= 0.0);
        let diminishing = increments.windows(2).all(|w| w[1] < w[0]);
        let artifact = csv_artifact("sweep.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            for p in &points {
                w.serialize(p)?;
            }
            w.flush()?;
            Ok(())
        })?;
        let code = if points.iter().any(|p| p.termination == Termination::Budget) {
            EXIT_BUDGET
        } else {
            EXIT_OK
        };
        let result = json!({
            "points": points,
            "total_targets": totals,
            "increments": increments,
            "nondecreasing": nondecreasing,
            "diminishing_increments": diminishing,
        });
        Ok((code, result, vec![artifact]))
    }

    fn unstable_demo(&self) -> Result<Outcome, RunError> {
        let target = self
            .scenario
            .targets
            .clone()
            .unwrap_or_else(|| vec![0.5; self.n()]);
        let cap = self.sub.r_max.unwrap_or(3.0);
        let free = SubgameConfig {
            r_max: None,
            ..self.sub.clone()
        };
        let uncapped = run_subgame(self.graph, self.space, &target, &free)?;
        let artifact = csv_artifact("iterations.csv", |out| {
            write_iteration_csv(&uncapped, &target, out)
        })?;
        let peak = uncapped
            .trace
            .iter()
            .map(|rec| max_ta(&rec.ta))
            .fold(max_ta(uncapped.r_star.ta()), f64::max);

        let bounded = SubgameConfig {
            r_max: Some(cap),
            record_trace: false,
            ..self.sub.clone()
        };
        let capped = run_subgame(self.graph, self.space, &target, &bounded)?;

        let pricing = match &self.scenario.demands {
            Some(d) => {
                let res = run_stackelberg(
                    self.graph,
                    self.space,
                    &d.resolve(self.n()),
                    &bounded,
                    &self.scenario.pricing,
                )?;
                json!({
                    "termination": res.termination,
                    "optimal_price": res.optimal_price,
                    "stages": res.stages.len(),
                    "max_r": res.final_stage().map(|s| max_ta(&s.r_star)),
                })
            }
            None => Value::Null,
        };
        let result = json!({
            "targets": target,
            "feasible": membership(self.space, &target)?.verdict,
            "uncapped": {
                "outcome": uncapped.outcome,
                "iterations": uncapped.iterations,
                "max_r": peak,
                "diverged": peak > DIVERGENCE_THRESHOLD,
                "r_final": uncapped.r_star.ta(),
            },
            "capped": {
                "r_max": cap,
                "outcome": capped.outcome,
                "iterations": capped.iterations,
                "max_r": max_ta(capped.r_star.ta()),
            },
            "pricing": pricing,
        });
        Ok((EXIT_OK, result, vec![artifact]))
    }

    fn des_validate(&self) -> Result<Outcome, RunError> {
        let sim_cfg = &self.scenario.simulation;
        let r = AccessProfile::new(
            self.scenario
                .profile
                .clone()
                .unwrap_or_else(|| vec![0.0; self.n()]),
        )?;
        let exact = throughput(self.space, &r)?;
        let p = stationary_distribution(self.space, &r)?;

        let mut uniform = Simulator::new(self.graph, &r, TimerLaws::Uniform, self.seed)?;
        uniform.track_occupancy();
        if sim_cfg.record_events {
            uniform.record_events();
        }
        uniform.advance(sim_cfg.horizon_ms)?;
        let uni = uniform.trace();
        let occupancy = uniform.occupancy().expect("tracking enabled");
        let tv = 0.5
            * self
                .space
                .states()
                .iter()
                .zip(p.probabilities())
                .map(|(s, q)| (occupancy.get(s).copied().unwrap_or(0.0) / uni.elapsed_ms - q).abs())
                .sum::<f64>();

        let mut exponential = Simulator::new(self.graph, &r, TimerLaws::Exponential, self.seed)?;
        exponential.advance(sim_cfg.horizon_ms)?;
        let exp = exponential.trace();

        let uni_th = uni.throughput();
        let exp_th = exp.throughput();
        let gap = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        };
        let fidelity = gap(&uni_th, &exact);
        let insensitivity = gap(&uni_th, &exp_th);

        let mut artifacts = vec![csv_artifact("des.csv", |out| {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["link", "exact", "uniform", "exponential"])?;
            for i in 0..self.n() {
                w.write_record([
                    (i + 1).to_string(),
                    exact[i].to_string(),
                    uni_th[i].to_string(),
                    exp_th[i].to_string(),
                ])?;
            }
            w.flush()?;
            Ok(())
        })?];
        if let Some(log) = uniform.event_log() {
            artifacts.push(csv_artifact("events.csv", |out| write_event_csv(log, out))?);
        }
        let result = json!({
            "profile": r.ta(),
            "horizon_ms": sim_cfg.horizon_ms,
            "exact": exact,
            "uniform": uni_th,
            "exponential": exp_th,
            "max_fidelity_gap": fidelity,
            "max_insensitivity_gap": insensitivity,
            "occupancy_tv_distance": tv,
            "overlap_violations": uni.overlap_violations + exp.overlap_violations,
            "within_tolerance": fidelity <= sim_cfg.tolerance && insensitivity <= sim_cfg.tolerance,
        });
        Ok((EXIT_OK, result, artifacts))
    }
}
