// SPDX-License-Identifier: Apache-2.0

//! Simulated OpenFlow data plane.
//!
//! Each switch holds an exact-match table keyed on `(ip_src, ip_dst, in_port)`.
//! A lookup miss drops the packet and is the packet-in signal for the
//! monitor. A hit whose output port leads onto a dead edge also counts as a
//! miss at that switch, since the frame is lost on the wire.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::policy::SecurityPolicy;
use crate::topology::{DirectedEdge, PortTarget, Topology};
use crate::transform::{flows_to_csv, Delta, FlowEntry};
use crate::{HostId, PortNo, SwitchId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DataPlaneError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
    #[error("no host with source ip {0}")]
    UnknownSource(Ipv4Addr),
    #[error("packet source and destination are both {0}")]
    SelfAddressed(Ipv4Addr),
    #[error("rule endpoint {0} is not in the reachability matrix")]
    MissingHost(HostId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTable {
    switch_id: SwitchId,
    entries: Vec<FlowEntry>,
}

impl FlowTable {
    pub fn new(switch_id: SwitchId) -> Self {
        Self {
            switch_id,
            entries: Vec::new(),
        }
    }

    pub fn switch_id(&self) -> SwitchId {
        self.switch_id
    }

    pub fn entries(&self) -> &[FlowEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Adds `entry`, replacing any entry with the same match key.
    fn insert(&mut self, entry: FlowEntry) {
        debug_assert_eq!(entry.switch_id, self.switch_id);
        match self.entries.iter_mut().find(|e| e.key() == entry.key()) {
            Some(slot) => *slot = entry,
            None => self.entries.push(entry),
        }
    }

    pub fn lookup(
        &self,
        ip_src: Ipv4Addr,
        ip_dst: Ipv4Addr,
        in_port: PortNo,
    ) -> Option<&FlowEntry> {
        self.entries
            .iter()
            .find(|e| e.ip_src == ip_src && e.ip_dst == ip_dst && e.in_port == in_port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPlane {
    tables: BTreeMap<SwitchId, FlowTable>,
}

impl DataPlane {
    /// One empty table per switch of `topo`.
    pub fn new(topo: &Topology) -> Self {
        Self {
            tables: topo.switches().map(|s| (s, FlowTable::new(s))).collect(),
        }
    }

    pub fn table(&self, sw: SwitchId) -> Option<&FlowTable> {
        self.tables.get(&sw)
    }

    pub fn tables(&self) -> impl Iterator<Item = &FlowTable> {
        self.tables.values()
    }

    pub fn entry_count(&self) -> usize {
        self.tables.values().map(FlowTable::len).sum()
    }

    /// Installs every entry of `delta`. Nothing is installed if any entry
    /// names an unknown switch.
    pub fn install(&mut self, delta: &Delta) -> Result<(), DataPlaneError> {
        if let Some(bad) = delta
            .iter()
            .find(|e| !self.tables.contains_key(&e.switch_id))
        {
            return Err(DataPlaneError::UnknownSwitch(bad.switch_id));
        }
        for e in delta {
            self.tables.get_mut(&e.switch_id).unwrap().insert(*e);
        }
        Ok(())
    }

    pub fn clear_all(&mut self) {
        for t in self.tables.values_mut() {
            t.entries.clear();
        }
    }

    /// Flow dump CSV, grouped by switch in ascending id order.
    pub fn to_csv(&self) -> String {
        flows_to_csv(self.tables.values().flat_map(|t| t.entries.iter()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Packet {
    pub ip_src: Ipv4Addr,
    pub ip_dst: Ipv4Addr,
}

impl Packet {
    pub fn new(ip_src: Ipv4Addr, ip_dst: Ipv4Addr) -> Self {
        Self { ip_src, ip_dst }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForwardOutcome {
    Delivered { host: HostId, hop_count: usize },
    TableMiss { switch: SwitchId, in_port: PortNo },
    Looped,
}

impl ForwardOutcome {
    pub fn is_delivered(&self) -> bool {
        matches!(self, Self::Delivered { .. })
    }
}

/// Outcome plus every edge the packet crossed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub outcome: ForwardOutcome,
    pub edges: Vec<DirectedEdge>,
}

pub fn forward(
    plane: &DataPlane,
    topo: &Topology,
    pkt: Packet,
) -> Result<ForwardOutcome, DataPlaneError> {
    trace(plane, topo, pkt).map(|t| t.outcome)
}

/// Injects `pkt` at its source host's attachment point and follows the flow
/// tables until it is delivered, missed or loops.
pub fn trace(plane: &DataPlane, topo: &Topology, pkt: Packet) -> Result<Trace, DataPlaneError> {
    if pkt.ip_src == pkt.ip_dst {
        return Err(DataPlaneError::SelfAddressed(pkt.ip_src));
    }
    let src = topo
        .host_by_ip(pkt.ip_src)
        .ok_or(DataPlaneError::UnknownSource(pkt.ip_src))?;
    let mut sw = src.switch_id;
    let mut in_port = src.port;
    let mut edges = Vec::new();
    let mut visited = HashSet::new();
    let miss = |sw, in_port, edges| Trace {
        outcome: ForwardOutcome::TableMiss {
            switch: sw,
            in_port,
        },
        edges,
    };
    loop {
        if !visited.insert(sw) {
            return Ok(Trace {
                outcome: ForwardOutcome::Looped,
                edges,
            });
        }
        let Some(hit) = plane
            .table(sw)
            .and_then(|t| t.lookup(pkt.ip_src, pkt.ip_dst, in_port))
        else {
            return Ok(miss(sw, in_port, edges));
        };
        match topo.port_target(sw, hit.out_port) {
            Some(PortTarget::Host(h)) if h.ip == pkt.ip_dst => {
                let hop_count = edges.len();
                return Ok(Trace {
                    outcome: ForwardOutcome::Delivered {
                        host: h.host_id,
                        hop_count,
                    },
                    edges,
                });
            }
            Some(PortTarget::Edge(e)) if e.using => {
                edges.push(*e);
                sw = e.dst_sw;
                in_port = e.dst_port;
            }
            // Dead edge, wrong host or unwired port: the frame goes nowhere.
            _ => return Ok(miss(sw, in_port, edges)),
        }
    }
}

/// All-pairs reachability over the hosts of a topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachabilityMatrix {
    hosts: Vec<HostId>,
    cells: Vec<bool>,
}

impl ReachabilityMatrix {
    pub fn new(hosts: Vec<HostId>) -> Self {
        let n = hosts.len();
        Self {
            hosts,
            cells: vec![false; n * n],
        }
    }

    pub fn hosts(&self) -> &[HostId] {
        &self.hosts
    }

    fn index(&self, h: HostId) -> Option<usize> {
        self.hosts.iter().position(|&x| x == h)
    }

    pub fn get(&self, src: HostId, dst: HostId) -> Option<bool> {
        let n = self.hosts.len();
        Some(self.cells[self.index(src)? * n + self.index(dst)?])
    }

    pub fn set(&mut self, src: HostId, dst: HostId, reachable: bool) {
        let n = self.hosts.len();
        let (i, j) = (self.index(src).unwrap(), self.index(dst).unwrap());
        self.cells[i * n + j] = reachable;
    }

    /// Ordered off-diagonal pairs that are reachable.
    pub fn reachable_pairs(&self) -> Vec<(HostId, HostId)> {
        self.pairs()
            .filter(|&(_, _, r)| r)
            .map(|(a, b, _)| (a, b))
            .collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (HostId, HostId, bool)> + '_ {
        let n = self.hosts.len();
        (0..n)
            .flat_map(move |i| (0..n).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(move |(i, j)| (self.hosts[i], self.hosts[j], self.cells[i * n + j]))
    }

    /// `src_host,dst_host,reachable` rows, diagonal excluded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("src_host,dst_host,reachable\n");
        for (a, b, r) in self.pairs() {
            writeln!(out, "{a},{b},{r}").unwrap();
        }
        out
    }
}

/// One probe per ordered host pair.
pub fn pingall(plane: &DataPlane, topo: &Topology) -> ReachabilityMatrix {
    let hosts = topo.hosts();
    let mut m = ReachabilityMatrix::new(hosts.iter().map(|h| h.host_id).collect());
    for a in hosts {
        for b in hosts.iter().filter(|b| b.host_id != a.host_id) {
            let outcome = forward(plane, topo, Packet::new(a.ip, b.ip))
                .expect("probe sources are topology hosts");
            m.set(a.host_id, b.host_id, outcome.is_delivered());
        }
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    /// The policy grants the pair but it is not reachable.
    Missing(HostId, HostId),
    /// The pair is reachable without a grant.
    Excess(HostId, HostId),
}

/// Checks that reachability corresponds exactly to the policy grants.
/// Returns the violations; the policy holds iff the list is empty.
pub fn verify_reachability(
    matrix: &ReachabilityMatrix,
    spm: &SecurityPolicy,
) -> Result<Vec<Violation>, DataPlaneError> {
    let mut violations = Vec::new();
    for r in spm.rules() {
        for h in [r.subject, r.object] {
            if !matrix.hosts.contains(&h) {
                return Err(DataPlaneError::MissingHost(h));
            }
        }
        if matrix.get(r.subject, r.object) != Some(true) {
            violations.push(Violation::Missing(r.subject, r.object));
        }
    }
    for (a, b) in matrix.reachable_pairs() {
        if !spm.contains(a, b) {
            violations.push(Violation::Excess(a, b));
        }
    }
    Ok(violations)
}
