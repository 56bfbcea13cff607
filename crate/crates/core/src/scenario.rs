// SPDX-License-Identifier: Apache-2.0

//! Scripted discrete-tick experiments.
//!
//! Scenario grammar, one statement per line:
//!
//! ```text
//! END <tick>
//! AT <tick> TRAFFIC <src_host> <dst_host> <rate> [DURATION <ticks>]
//! AT <tick> LINKDOWN <sw_a> <sw_b>
//! AT <tick> LINKUP <sw_a> <sw_b>
//! AT <tick> POLICY <path>
//! ```
//!
//! Ticks run from 0 through `END` inclusive. Each tick:
//!
//! 1. events due at this tick apply in file order;
//! 2. every active flow injects `rate` packets at its source host;
//! 3. if any packet hit a table miss, one packet-in reaches the monitor,
//!    which may reconcile. New tables take effect from the next tick.
//!
//! One [`MetricsRecord`] is emitted per active `(src, dst)` flow per tick.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::dataplane::{trace, DataPlane, DataPlaneError, ForwardOutcome, Packet};
use crate::monitor::{Monitor, ReconcileReport};
use crate::policy::{parse_policy, PolicyError, SecurityPolicy};
use crate::topology::{Topology, TopologyError};
use crate::{HostId, PortNo, SwitchId};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("scenario has no END statement")]
    MissingEnd,
    #[error("line {line}: event at tick {tick} is beyond END {end}")]
    TickBeyondEnd { line: usize, tick: u64, end: u64 },
    #[error("traffic references unknown host {0}")]
    UnknownHost(HostId),
    #[error("link event: {0}")]
    Link(#[from] TopologyError),
    #[error("policy file {0} was not loaded")]
    MissingPolicy(PathBuf),
    #[error("policy file {path}: {source}")]
    PolicyFile { path: PathBuf, source: PolicyError },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    DataPlane(#[from] DataPlaneError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Traffic {
        src: HostId,
        dst: HostId,
        rate: u64,
        duration: Option<u64>,
    },
    LinkDown(SwitchId, SwitchId),
    LinkUp(SwitchId, SwitchId),
    Policy(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedEvent {
    pub tick: u64,
    pub event: Event,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub end_tick: u64,
    pub events: Vec<TimedEvent>,
}

impl Scenario {
    pub fn policy_paths(&self) -> impl Iterator<Item = &Path> {
        self.events.iter().filter_map(|e| match &e.event {
            Event::Policy(p) => Some(p.as_path()),
            _ => None,
        })
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut end = None;
    let mut events = Vec::new();
    let mut lines_of = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| ScenarioError::Parse { line, msg };
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        let num = |tok: &str| {
            tok.parse::<u64>()
                .map_err(|_| err(format!("`{tok}` is not a non-negative integer")))
        };
        let id = |tok: &str| {
            tok.parse::<u32>()
                .map_err(|_| err(format!("`{tok}` is not a valid id")))
        };
        match toks[0] {
            "END" => {
                if toks.len() != 2 {
                    return Err(err("END takes one tick".into()));
                }
                if end.is_some() {
                    return Err(err("END given twice".into()));
                }
                end = Some(num(toks[1])?);
            }
            "AT" => {
                if toks.len() < 3 {
                    return Err(err("AT needs a tick and an event".into()));
                }
                let tick = num(toks[1])?;
                let args = &toks[3..];
                let arity = |n: usize| {
                    if args.len() == n {
                        Ok(())
                    } else {
                        Err(err(format!("{} takes {n} arguments", toks[2])))
                    }
                };
                let event = match toks[2] {
                    "TRAFFIC" => {
                        let duration = match args.len() {
                            3 => None,
                            5 if args[3] == "DURATION" => Some(num(args[4])?),
                            _ => {
                                return Err(err(
                                    "TRAFFIC <src> <dst> <rate> [DURATION <ticks>]".into()
                                ))
                            }
                        };
                        let rate = num(args[2])?;
                        if rate == 0 {
                            return Err(err("rate must be positive".into()));
                        }
                        if duration == Some(0) {
                            return Err(err("duration must be positive".into()));
                        }
                        let (src, dst) = (HostId(id(args[0])?), HostId(id(args[1])?));
                        if src == dst {
                            return Err(err("traffic source and destination must differ".into()));
                        }
                        Event::Traffic {
                            src,
                            dst,
                            rate,
                            duration,
                        }
                    }
                    "LINKDOWN" => {
                        arity(2)?;
                        Event::LinkDown(SwitchId(id(args[0])?), SwitchId(id(args[1])?))
                    }
                    "LINKUP" => {
                        arity(2)?;
                        Event::LinkUp(SwitchId(id(args[0])?), SwitchId(id(args[1])?))
                    }
                    "POLICY" => {
                        arity(1)?;
                        Event::Policy(PathBuf::from(args[0]))
                    }
                    other => return Err(err(format!("unknown event `{other}`"))),
                };
                events.push(TimedEvent { tick, event });
                lines_of.push(line);
            }
            other => return Err(err(format!("unknown statement `{other}`"))),
        }
    }
    let end_tick = end.ok_or(ScenarioError::MissingEnd)?;
    for (ev, &line) in events.iter().zip(&lines_of) {
        if ev.tick > end_tick {
            return Err(ScenarioError::TickBeyondEnd {
                line,
                tick: ev.tick,
                end: end_tick,
            });
        }
    }
    // Stable: same-tick events keep file order.
    events.sort_by_key(|e| e.tick);
    Ok(Scenario { end_tick, events })
}

/// Policies referenced by `POLICY` events, keyed by the path as written.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyLibrary {
    policies: HashMap<PathBuf, SecurityPolicy>,
}

impl PolicyLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<PathBuf>, spm: SecurityPolicy) {
        self.policies.insert(path.into(), spm);
    }

    pub fn get(&self, path: &Path) -> Option<&SecurityPolicy> {
        self.policies.get(path)
    }

    /// Reads every policy file named by `scenario`, resolving relative paths
    /// against `base_dir`.
    pub fn load(scenario: &Scenario, base_dir: &Path) -> Result<Self, ScenarioError> {
        let mut lib = Self::new();
        for p in scenario.policy_paths() {
            let full = base_dir.join(p);
            let text = std::fs::read_to_string(&full).map_err(|source| ScenarioError::Io {
                path: full.clone(),
                source,
            })?;
            let spm = parse_policy(&text).map_err(|source| ScenarioError::PolicyFile {
                path: full.clone(),
                source,
            })?;
            lib.insert(p, spm);
        }
        Ok(lib)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Packets per tick each directed edge can carry. `None` is unlimited.
    pub link_capacity: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetricsRecord {
    pub tick: u64,
    pub src_host: HostId,
    pub dst_host: HostId,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

pub const METRICS_CSV_HEADER: &str = "tick,src_host,dst_host,sent,delivered,dropped";

pub fn metrics_to_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.tick, r.src_host, r.dst_host, r.sent, r.delivered, r.dropped
        )
        .unwrap();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct TrafficSpec {
    src: HostId,
    dst: HostId,
    rate: u64,
    start: u64,
    /// Last active tick, inclusive.
    last: u64,
}

/// A scenario in progress. [`Simulation::step`] advances one tick; the
/// accessors expose the state between ticks for probing.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    library: PolicyLibrary,
    options: RunOptions,
    topo: Topology,
    policy: SecurityPolicy,
    plane: DataPlane,
    monitor: Monitor,
    traffic: Vec<TrafficSpec>,
    next_event: usize,
    tick: u64,
    reconciles: Vec<(u64, ReconcileReport)>,
}

impl Simulation {
    /// Checks every host, link and policy the scenario references before
    /// tick 0. The data plane starts empty.
    pub fn new(
        scenario: &Scenario,
        topo: &Topology,
        initial_policy: &SecurityPolicy,
        options: RunOptions,
        library: &PolicyLibrary,
    ) -> Result<Self, ScenarioError> {
        let mut probe = topo.clone();
        for ev in &scenario.events {
            match &ev.event {
                Event::Traffic { src, dst, .. } => {
                    for h in [src, dst] {
                        if topo.resolve_host(*h).is_err() {
                            return Err(ScenarioError::UnknownHost(*h));
                        }
                    }
                }
                Event::LinkDown(a, b) | Event::LinkUp(a, b) => probe.set_link(*a, *b, true)?,
                Event::Policy(p) => {
                    if library.get(p).is_none() {
                        return Err(ScenarioError::MissingPolicy(p.clone()));
                    }
                }
            }
        }
        Ok(Self {
            scenario: scenario.clone(),
            library: library.clone(),
            options,
            topo: topo.clone(),
            policy: initial_policy.clone(),
            plane: DataPlane::new(topo),
            monitor: Monitor::new(),
            traffic: Vec::new(),
            next_event: 0,
            tick: 0,
            reconciles: Vec::new(),
        })
    }

    /// The next tick to run.
    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn is_finished(&self) -> bool {
        self.tick > self.scenario.end_tick
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn policy(&self) -> &SecurityPolicy {
        &self.policy
    }

    pub fn plane(&self) -> &DataPlane {
        &self.plane
    }

    pub fn monitor(&self) -> &Monitor {
        &self.monitor
    }

    /// Triggered reconciliations so far, with the tick they ran in.
    pub fn reconciles(&self) -> &[(u64, ReconcileReport)] {
        &self.reconciles
    }

    fn apply_events(&mut self, t: u64) -> Result<(), ScenarioError> {
        while let Some(ev) = self.scenario.events.get(self.next_event) {
            if ev.tick != t {
                break;
            }
            match &ev.event {
                Event::Traffic {
                    src,
                    dst,
                    rate,
                    duration,
                } => self.traffic.push(TrafficSpec {
                    src: *src,
                    dst: *dst,
                    rate: *rate,
                    start: t,
                    last: duration.map_or(u64::MAX, |d| t + d - 1),
                }),
                Event::LinkDown(a, b) => self.topo.set_link(*a, *b, false)?,
                Event::LinkUp(a, b) => self.topo.set_link(*a, *b, true)?,
                Event::Policy(p) => {
                    self.policy = self
                        .library
                        .get(p)
                        .cloned()
                        .ok_or_else(|| ScenarioError::MissingPolicy(p.clone()))?;
                }
            }
            self.next_event += 1;
        }
        Ok(())
    }

    /// Runs one tick and returns its metrics, or `None` once past `END`.
    pub fn step(&mut self) -> Result<Option<Vec<MetricsRecord>>, ScenarioError> {
        if self.is_finished() {
            return Ok(None);
        }
        let t = self.tick;
        self.apply_events(t)?;

        let mut offered: BTreeMap<(HostId, HostId), u64> = BTreeMap::new();
        for spec in self.traffic.iter().filter(|s| s.start <= t && t <= s.last) {
            *offered.entry((spec.src, spec.dst)).or_default() += spec.rate;
        }

        // Tables do not change within a tick, so every packet of a flow
        // follows the same trace.
        let mut traces = Vec::with_capacity(offered.len());
        let mut load: HashMap<(SwitchId, PortNo), u64> = HashMap::new();
        let mut packet_in = false;
        for (&(src, dst), &rate) in &offered {
            let s = self.topo.resolve_host(src)?.ip;
            let d = self.topo.resolve_host(dst)?.ip;
            let tr = trace(&self.plane, &self.topo, Packet::new(s, d))?;
            packet_in |= matches!(tr.outcome, ForwardOutcome::TableMiss { .. });
            for e in &tr.edges {
                *load.entry((e.src_sw, e.src_port)).or_default() += rate;
            }
            traces.push(((src, dst), rate, tr));
        }

        let mut records = Vec::with_capacity(traces.len());
        for ((src, dst), rate, tr) in traces {
            let delivered = if tr.outcome.is_delivered() {
                match self.options.link_capacity {
                    // Each flow gets its proportional share of its tightest edge.
                    Some(cap) => tr
                        .edges
                        .iter()
                        .map(|e| {
                            let l = load[&(e.src_sw, e.src_port)];
                            if l <= cap {
                                rate
                            } else {
                                rate * cap / l
                            }
                        })
                        .fold(rate, u64::min),
                    None => rate,
                }
            } else {
                0
            };
            records.push(MetricsRecord {
                tick: t,
                src_host: src,
                dst_host: dst,
                sent: rate,
                delivered,
                dropped: rate - delivered,
            });
        }

        if packet_in {
            let report =
                self.monitor
                    .on_packet_in(&mut self.policy, &self.topo, &mut self.plane)?;
            if report.triggered {
                self.reconciles.push((t, report));
            }
        }

        self.tick += 1;
        Ok(Some(records))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioRun {
    pub metrics: Vec<MetricsRecord>,
    pub reconciles: Vec<(u64, ReconcileReport)>,
}

impl ScenarioRun {
    /// Delivered counts of one flow, indexed by tick. Ticks where the flow
    /// was inactive are absent.
    pub fn delivered(&self, src: u32, dst: u32) -> BTreeMap<u64, u64> {
        self.metrics
            .iter()
            .filter(|r| r.src_host == HostId(src) && r.dst_host == HostId(dst))
            .map(|r| (r.tick, r.delivered))
            .collect()
    }
}

pub fn run_scenario(
    scenario: &Scenario,
    topo: &Topology,
    initial_policy: &SecurityPolicy,
    options: RunOptions,
    library: &PolicyLibrary,
) -> Result<ScenarioRun, ScenarioError> {
    let mut sim = Simulation::new(scenario, topo, initial_policy, options, library)?;
    let mut metrics = Vec::new();
    while let Some(recs) = sim.step()? {
        metrics.extend(recs);
    }
    Ok(ScenarioRun {
        metrics,
        reconciles: sim.reconciles,
    })
}
