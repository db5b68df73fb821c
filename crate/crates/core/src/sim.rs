//! Event-driven simulation of ideal CSMA timers.
//!
//! Each link counts down a continuous backoff timer while none of its
//! neighbors is on air, freezes (keeping the residual) while one is, and
//! transmits when the timer expires. Times are milliseconds.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::graph::{bits, ContentionGraph, StateMask};
use crate::icn::AccessProfile;

/// Distribution family used for both countdown and transmission times.
///
/// Countdown means are `exp(-r_i)` ms and transmission means are 1 ms under
/// either family, so both give the same access intensity `exp(r_i)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimerLaws {
    /// Countdown uniform on `[0, 2 exp(-r)]`, transmission uniform on `[0.5, 1.5]`.
    #[default]
    Uniform,
    /// Exponential countdown and transmission with the same means.
    Exponential,
}

impl TimerLaws {
    fn countdown(self, ta: f64, rng: &mut ChaCha8Rng) -> f64 {
        let mean = (-ta).exp();
        let u: f64 = rng.random();
        match self {
            TimerLaws::Uniform => 2.0 * mean * u,
            TimerLaws::Exponential => -mean * (1.0 - u).ln(),
        }
    }

    fn transmission(self, rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        match self {
            TimerLaws::Uniform => 0.5 + u,
            TimerLaws::Exponential => -(1.0 - u).ln(),
        }
    }
}

/// Timer state of one link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkTimerState {
    CountingDown { remaining: f64 },
    Frozen { remaining: f64 },
    Transmitting { remaining: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Counting { expiry: f64 },
    Frozen { remaining: f64 },
    Transmitting { start: f64, end: f64 },
}

#[derive(Debug, Clone)]
struct LinkTimer {
    mode: Mode,
    generation: u64,
    blocked_by: u32,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    time: f64,
    link: usize,
    generation: u64,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest time, then the lowest link.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.link.cmp(&self.link))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    StartTx,
    EndTx,
    Freeze,
    Resume,
}

/// One row of the optional event log. `link` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time_ms: f64,
    pub link: usize,
    pub event: EventKind,
}

/// Summary of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    /// Accumulated on-air time per link, ms.
    pub busy_ms: Vec<f64>,
    pub elapsed_ms: f64,
    pub events: u64,
    pub seed: u64,
    /// Instants at which two adjacent links were both on air. Always zero.
    pub overlap_violations: u64,
}

impl SimTrace {
    /// Busy fraction `T_i / elapsed` per link.
    pub fn throughput(&self) -> Vec<f64> {
        self.busy_ms.iter().map(|b| b / self.elapsed_ms).collect()
    }
}

pub struct Simulator {
    graph: ContentionGraph,
    ta: Vec<f64>,
    laws: TimerLaws,
    seed: u64,
    now: f64,
    links: Vec<LinkTimer>,
    rngs: Vec<ChaCha8Rng>,
    queue: BinaryHeap<Event>,
    busy: Vec<f64>,
    on_air: u64,
    events: u64,
    violations: u64,
    occupancy: Option<BTreeMap<StateMask, f64>>,
    log: Option<Vec<TraceEvent>>,
}

impl Simulator {
    pub fn new(
        graph: &ContentionGraph,
        r: &AccessProfile,
        laws: TimerLaws,
        seed: u64,
    ) -> Result<Self> {
        let n = graph.link_count();
        check_len(n, r.len())?;
        // One independent stream per link, keyed by (seed, link id).
        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rng
            })
            .collect();
        let ta = r.ta().to_vec();
        let mut links = Vec::with_capacity(n);
        let mut queue = BinaryHeap::with_capacity(2 * n);
        for i in 0..n {
            let expiry = laws.countdown(ta[i], &mut rngs[i]);
            links.push(LinkTimer {
                mode: Mode::Counting { expiry },
                generation: 0,
                blocked_by: 0,
            });
            queue.push(Event {
                time: expiry,
                link: i,
                generation: 0,
            });
        }
        Ok(Self {
            graph: graph.clone(),
            ta,
            laws,
            seed,
            now: 0.0,
            links,
            rngs,
            queue,
            busy: vec![0.0; n],
            on_air: 0,
            events: 0,
            violations: 0,
            occupancy: None,
            log: None,
        })
    }

    /// Starts accumulating time spent in each on-air set.
    pub fn track_occupancy(&mut self) {
        self.occupancy.get_or_insert_with(BTreeMap::new);
    }

    /// Starts recording start/end/freeze/resume events.
    pub fn record_events(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    /// Links currently on air, as a state mask.
    pub fn on_air(&self) -> StateMask {
        self.on_air as StateMask
    }

    pub fn link_state(&self, index: usize) -> LinkTimerState {
        match self.links[index].mode {
            Mode::Counting { expiry } => LinkTimerState::CountingDown {
                remaining: expiry - self.now,
            },
            Mode::Frozen { remaining } => LinkTimerState::Frozen { remaining },
            Mode::Transmitting { end, .. } => LinkTimerState::Transmitting {
                remaining: end - self.now,
            },
        }
    }

    pub fn occupancy(&self) -> Option<&BTreeMap<StateMask, f64>> {
        self.occupancy.as_ref()
    }

    pub fn event_log(&self) -> Option<&[TraceEvent]> {
        self.log.as_deref()
    }

    /// Replaces the TA profile. Residual countdowns (running or frozen) are
    /// rescaled by `exp(r_old - r_new)`, so the new intensity takes effect
    /// at once; transmissions in progress are untouched.
    pub fn set_profile(&mut self, r: &AccessProfile) -> Result<()> {
        check_len(self.ta.len(), r.len())?;
        for (i, &new) in r.ta().iter().enumerate() {
            let old = self.ta[i];
            if old == new {
                continue;
            }
            self.ta[i] = new;
            let factor = (old - new).exp();
            match self.links[i].mode {
                Mode::Counting { expiry } => {
                    let expiry = self.now + (expiry - self.now) * factor;
                    self.links[i].mode = Mode::Counting { expiry };
                    self.links[i].generation += 1;
                    self.schedule(i, expiry);
                }
                Mode::Frozen { remaining } => {
                    self.links[i].mode = Mode::Frozen {
                        remaining: remaining * factor,
                    };
                }
                Mode::Transmitting { .. } => {}
            }
        }
        Ok(())
    }

    /// On-air time of each link accumulated up to the current instant.
    pub fn busy_so_far(&self) -> Vec<f64> {
        self.busy
            .iter()
            .zip(&self.links)
            .map(|(b, l)| match l.mode {
                Mode::Transmitting { start, .. } => b + (self.now - start),
                _ => *b,
            })
            .collect()
    }

    /// Advances the clock by `duration` ms.
    pub fn advance(&mut self, duration: f64) -> Result<()> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(invalid(
                "duration",
                format!("{duration} ms, must be positive"),
            ));
        }
        self.run_until(self.now + duration);
        Ok(())
    }

    /// Runs one measurement window of `tau` ms under profile `r` and returns
    /// `T_i / tau`. State carries over between windows.
    pub fn measure_window(&mut self, r: &AccessProfile, tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(invalid("window", format!("{tau} ms, must be positive")));
        }
        self.set_profile(r)?;
        let before = self.busy_so_far();
        self.run_until(self.now + tau);
        Ok(self
            .busy_so_far()
            .iter()
            .zip(before)
            .map(|(after, before)| (after - before) / tau)
            .collect())
    }

    pub fn trace(&self) -> SimTrace {
        SimTrace {
            busy_ms: self.busy_so_far(),
            elapsed_ms: self.now,
            events: self.events,
            seed: self.seed,
            overlap_violations: self.violations,
        }
    }

    fn run_until(&mut self, horizon: f64) {
        while let Some(&ev) = self.queue.peek() {
            if ev.time > horizon {
                break;
            }
            self.queue.pop();
            if ev.generation != self.links[ev.link].generation {
                continue;
            }
            self.account(ev.time);
            self.now = ev.time;
            self.events += 1;
            match self.links[ev.link].mode {
                Mode::Counting { .. } => self.start_transmission(ev.link),
                Mode::Transmitting { .. } => self.end_transmission(ev.link),
                Mode::Frozen { .. } => unreachable!("frozen timers have no live event"),
            }
        }
        self.account(horizon);
        self.now = horizon;
    }

    fn account(&mut self, until: f64) {
        if let Some(occ) = self.occupancy.as_mut() {
            let dt = until - self.now;
            if dt > 0.0 {
                *occ.entry(self.on_air as StateMask).or_insert(0.0) += dt;
            }
        }
    }

    fn emit(&mut self, link: usize, event: EventKind) {
        if let Some(log) = self.log.as_mut() {
            log.push(TraceEvent {
                time_ms: self.now,
                link: link + 1,
                event,
            });
        }
    }

    fn schedule(&mut self, link: usize, time: f64) {
        self.queue.push(Event {
            time,
            link,
            generation: self.links[link].generation,
        });
    }

    fn start_transmission(&mut self, i: usize) {
        let neighbors = self.graph.neighbor_mask(i);
        if self.on_air & neighbors != 0 {
            self.violations += 1;
        }
        let end = self.now + self.laws.transmission(&mut self.rngs[i]);
        self.links[i].mode = Mode::Transmitting {
            start: self.now,
            end,
        };
        self.on_air |= 1 << i;
        self.schedule(i, end);
        self.emit(i, EventKind::StartTx);
        for j in bits(neighbors) {
            let link = &mut self.links[j];
            link.blocked_by += 1;
            if let Mode::Counting { expiry } = link.mode {
                link.mode = Mode::Frozen {
                    remaining: expiry - self.now,
                };
                link.generation += 1;
                self.emit(j, EventKind::Freeze);
            }
        }
    }

    fn end_transmission(&mut self, i: usize) {
        let Mode::Transmitting { start, .. } = self.links[i].mode else {
            unreachable!()
        };
        self.busy[i] += self.now - start;
        self.on_air &= !(1 << i);
        self.emit(i, EventKind::EndTx);
        let expiry = self.now + self.laws.countdown(self.ta[i], &mut self.rngs[i]);
        self.links[i].mode = Mode::Counting { expiry };
        self.links[i].generation += 1;
        self.schedule(i, expiry);
        for j in bits(self.graph.neighbor_mask(i)) {
            let link = &mut self.links[j];
            link.blocked_by -= 1;
            if link.blocked_by == 0 {
                if let Mode::Frozen { remaining } = link.mode {
                    link.mode = Mode::Counting {
                        expiry: self.now + remaining,
                    };
                    link.generation += 1;
                    self.schedule(j, self.now + remaining);
                    self.emit(j, EventKind::Resume);
                }
            }
        }
    }
}

/// Simulates `duration` ms with uniform timer laws.
pub fn simulate(
    graph: &ContentionGraph,
    r: &AccessProfile,
    duration: f64,
    seed: u64,
) -> Result<SimTrace> {
    simulate_with(graph, r, TimerLaws::Uniform, duration, seed)
}

pub fn simulate_with(
    graph: &ContentionGraph,
    r: &AccessProfile,
    laws: TimerLaws,
    duration: f64,
    seed: u64,
) -> Result<SimTrace> {
    let mut sim = Simulator::new(graph, r, laws, seed)?;
    sim.advance(duration)?;
    Ok(sim.trace())
}

/// Long-run busy fractions under the chosen timer family. Comparing the
/// two families at equal means exercises the insensitivity of the
/// stationary distribution to the timer laws.
pub fn insensitivity_check(
    graph: &ContentionGraph,
    r: &AccessProfile,
    laws: TimerLaws,
    duration: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(simulate_with(graph, r, laws, duration, seed)?.throughput())
}

/// Writes `time_ms,link,event` rows.
pub fn write_event_csv<W: Write>(events: &[TraceEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(r: &[f64]) -> AccessProfile {
        AccessProfile::new(r.to_vec()).unwrap()
    }

    #[test]
    fn single_link_busy_half_the_time() {
        let g = ContentionGraph::isolated(1).unwrap();
        let t = simulate(&g, &profile(&[0.0]), 1e6, 1).unwrap();
        assert!(
            (t.throughput()[0] - 0.5).abs() < 0.01,
            "{:?}",
            t.throughput()
        );
        assert_eq!(t.overlap_violations, 0);
    }

    #[test]
    fn two_link_clique_shares_in_thirds() {
        let g = ContentionGraph::complete(2).unwrap();
        let t = simulate(&g, &profile(&[0.0, 0.0]), 1e6, 2).unwrap();
        for x in t.throughput() {
            assert!((x - 1.0 / 3.0).abs() < 0.01, "{x}");
        }
        assert_eq!(t.overlap_violations, 0);
    }

    #[test]
    fn identical_seeds_identical_traces() {
        let g = ContentionGraph::chain(3).unwrap();
        let r = profile(&[0.3, -0.5, 1.0]);
        let run = |seed| {
            let mut sim = Simulator::new(&g, &r, TimerLaws::Exponential, seed).unwrap();
            sim.record_events();
            sim.advance(500.0).unwrap();
            (sim.trace(), sim.event_log().unwrap().to_vec())
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9).0, run(10).0);
    }

    #[test]
    fn adding_a_link_keeps_existing_streams() {
        // Isolated links never interact, so link 1 sees the same draws.
        let one = ContentionGraph::isolated(1).unwrap();
        let two = ContentionGraph::isolated(2).unwrap();
        let a = simulate(&one, &profile(&[0.2]), 1000.0, 5).unwrap();
        let b = simulate(&two, &profile(&[0.2, -1.0]), 1000.0, 5).unwrap();
        assert_eq!(a.busy_ms[0], b.busy_ms[0]);
    }

    #[test]
    fn frozen_countdown_resumes_with_residual() {
        let g = ContentionGraph::chain(2).unwrap();
        let mut sim = Simulator::new(&g, &profile(&[0.0, 0.0]), TimerLaws::Uniform, 3).unwrap();
        sim.record_events();
        let mut last: Vec<Option<f64>> = vec![None; 2];
        let mut checked = 0;
        for _ in 0..2000 {
            sim.advance(0.01).unwrap();
            for (i, prev) in last.iter_mut().enumerate() {
                match sim.link_state(i) {
                    LinkTimerState::Frozen { remaining } => {
                        if let Some(before) = *prev {
                            assert_eq!(remaining, before);
                            checked += 1;
                        }
                        *prev = Some(remaining);
                    }
                    _ => *prev = None,
                }
            }
        }
        assert!(checked > 0);
        let log = sim.event_log().unwrap();
        assert!(log.iter().any(|e| e.event == EventKind::Freeze));
        assert!(log.iter().any(|e| e.event == EventKind::Resume));
    }

    #[test]
    fn window_measurement_and_validation() {
        let g = ContentionGraph::isolated(1).unwrap();
        let r = profile(&[0.0]);
        let mut sim = Simulator::new(&g, &r, TimerLaws::Uniform, 11).unwrap();
        let w = sim.measure_window(&r, 200.0).unwrap();
        assert!(w[0] > 0.3 && w[0] < 0.7, "{w:?}");
        assert!((sim.now() - 200.0).abs() < 1e-12);
        assert!(sim.measure_window(&r, 0.0).is_err());
        assert!(sim.advance(-1.0).is_err());
    }

    #[test]
    fn on_air_set_is_always_independent() {
        let g = ContentionGraph::new(5, &[(1, 2), (2, 3), (3, 4), (4, 5), (5, 1), (1, 3)]).unwrap();
        let r = profile(&[1.5, 0.5, 2.0, -0.5, 1.0]);
        let mut sim = Simulator::new(&g, &r, TimerLaws::Uniform, 4).unwrap();
        sim.track_occupancy();
        for _ in 0..5000 {
            sim.advance(0.37).unwrap();
            assert!(g.is_independent(sim.on_air() as u64));
        }
        for &mask in sim.occupancy().unwrap().keys() {
            assert!(g.is_independent(mask as u64));
        }
        assert_eq!(sim.trace().overlap_violations, 0);
    }

    #[test]
    fn event_csv_rows() {
        let g = ContentionGraph::chain(2).unwrap();
        let mut sim = Simulator::new(&g, &profile(&[0.0, 0.0]), TimerLaws::Uniform, 1).unwrap();
        sim.record_events();
        sim.advance(20.0).unwrap();
        let mut buf = Vec::new();
        write_event_csv(sim.event_log().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("time_ms,link,event\n"));
        assert!(text.contains("start_tx"));
    }
}
