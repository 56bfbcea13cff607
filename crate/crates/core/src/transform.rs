// SPDX-License-Identifier: Apache-2.0

//! Policy to flow-entry compilation.
//!
//! For each rule `subject -> object`:
//!
//! 1. the subject and object resolve to hosts (`ip`, switch, port);
//! 2. the grant becomes a [`ConnectedPath`] between the two hosts, routed by
//!    [`djk_route`] between their switches;
//! 3. the path decomposes into one [`FlowEntry`] per switch on it. Entry `k`
//!    matches `(ip_src, ip_dst, in_port)` and outputs on the port of the edge
//!    leaving switch `k`; entry `k + 1` takes that edge's far port as its
//!    `in_port`. The first entry enters from the subject's port and the last
//!    one exits on the object's port.
//!
//! The [`Delta`] of a whole policy is the concatenation of every routed
//! rule's entries, in rule order then path order.

use std::fmt::{self, Write as _};
use std::net::Ipv4Addr;

use thiserror::Error;

use crate::pathfinder::{djk_route_with_stats, RouteError, SwitchPath};
use crate::policy::{AccessRule, SecurityPolicy};
use crate::topology::{DirectedEdge, HostBinding, Topology, TopologyError};
use crate::{HostId, PortNo, SwitchId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransformError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Route(#[from] RouteError),
}

/// A directed host-to-host route. `hops` is empty when both hosts hang off the
/// same switch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectedPath {
    pub src_host: HostBinding,
    pub hops: Vec<DirectedEdge>,
    pub dst_host: HostBinding,
}

impl ConnectedPath {
    pub fn switches(&self) -> SwitchPath {
        let mut sw = vec![self.src_host.switch_id];
        sw.extend(self.hops.iter().map(|e| e.dst_sw));
        SwitchPath(sw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FlowEntry {
    pub switch_id: SwitchId,
    pub ip_src: Ipv4Addr,
    pub ip_dst: Ipv4Addr,
    pub in_port: PortNo,
    pub out_port: PortNo,
}

impl FlowEntry {
    pub fn key(&self) -> (SwitchId, Ipv4Addr, Ipv4Addr, PortNo) {
        (self.switch_id, self.ip_src, self.ip_dst, self.in_port)
    }
}

impl fmt::Display for FlowEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{}",
            self.switch_id, self.ip_src, self.ip_dst, self.in_port, self.out_port
        )
    }
}

pub const FLOW_CSV_HEADER: &str = "switch_id,ip_src,ip_dst,in_port,out_port";

/// Writes entries in the flow dump CSV format.
pub fn flows_to_csv<'a>(entries: impl IntoIterator<Item = &'a FlowEntry>) -> String {
    let mut out = String::from(FLOW_CSV_HEADER);
    out.push('\n');
    for e in entries {
        writeln!(out, "{e}").unwrap();
    }
    out
}

/// The full compiled rule set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Delta {
    entries: Vec<FlowEntry>,
}

impl Delta {
    pub fn new(entries: Vec<FlowEntry>) -> Self {
        Self { entries }
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

    pub fn iter(&self) -> std::slice::Iter<'_, FlowEntry> {
        self.entries.iter()
    }

    pub fn to_csv(&self) -> String {
        flows_to_csv(&self.entries)
    }
}

impl<'a> IntoIterator for &'a Delta {
    type Item = &'a FlowEntry;
    type IntoIter = std::slice::Iter<'a, FlowEntry>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

/// Routes the grant of `rule` through the live topology. `Ok(None)` when the
/// two hosts are disconnected.
pub fn authorize_path(
    rule: &AccessRule,
    topo: &Topology,
) -> Result<Option<ConnectedPath>, TransformError> {
    authorize_path_counted(rule, topo, &mut 0)
}

fn authorize_path_counted(
    rule: &AccessRule,
    topo: &Topology,
    ops: &mut u64,
) -> Result<Option<ConnectedPath>, TransformError> {
    let src_host = *topo.resolve_host(rule.subject)?;
    let dst_host = *topo.resolve_host(rule.object)?;
    let (route, stats) = djk_route_with_stats(topo, src_host.switch_id, dst_host.switch_id)?;
    *ops += stats.ops;
    let Some(route) = route else {
        return Ok(None);
    };
    let hops = route
        .switches()
        .windows(2)
        .map(|w| {
            // The route only uses live edges.
            *topo
                .live_edge(w[0], w[1])
                .expect("route follows live edges")
        })
        .collect();
    Ok(Some(ConnectedPath {
        src_host,
        hops,
        dst_host,
    }))
}

/// One entry per switch on `path`, chained through edge ports.
pub fn path_to_flow_entries(path: &ConnectedPath) -> Vec<FlowEntry> {
    let ip_src = path.src_host.ip;
    let ip_dst = path.dst_host.ip;
    let mut entries = Vec::with_capacity(path.hops.len() + 1);
    let mut switch_id = path.src_host.switch_id;
    let mut in_port = path.src_host.port;
    for hop in &path.hops {
        entries.push(FlowEntry {
            switch_id,
            ip_src,
            ip_dst,
            in_port,
            out_port: hop.src_port,
        });
        switch_id = hop.dst_sw;
        in_port = hop.dst_port;
    }
    entries.push(FlowEntry {
        switch_id,
        ip_src,
        ip_dst,
        in_port,
        out_port: path.dst_host.port,
    });
    entries
}

pub fn transform_rule(
    rule: &AccessRule,
    topo: &Topology,
) -> Result<Option<Vec<FlowEntry>>, TransformError> {
    Ok(authorize_path(rule, topo)?.map(|p| path_to_flow_entries(&p)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleStatus {
    Routed { path: SwitchPath, entries: usize },
    NoPath,
    Unbound(HostId),
    Failed(TransformError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleReport {
    pub rule: AccessRule,
    pub status: RuleStatus,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransformOutput {
    pub delta: Delta,
    pub reports: Vec<RuleReport>,
    /// Path-search operations summed over all rules.
    pub ops: u64,
}

impl TransformOutput {
    pub fn routed(&self) -> usize {
        self.reports
            .iter()
            .filter(|r| matches!(r.status, RuleStatus::Routed { .. }))
            .count()
    }

    pub fn unrouted(&self) -> usize {
        self.reports.len() - self.routed()
    }

    pub fn paths(&self) -> impl Iterator<Item = &SwitchPath> {
        self.reports.iter().filter_map(|r| match &r.status {
            RuleStatus::Routed { path, .. } => Some(path),
            _ => None,
        })
    }
}

/// Compiles every rule. A rule that cannot be routed is reported and skipped;
/// it never aborts the batch.
pub fn transform_spm(spm: &SecurityPolicy, topo: &Topology) -> TransformOutput {
    let mut out = TransformOutput::default();
    for rule in spm.rules() {
        let status = match authorize_path_counted(rule, topo, &mut out.ops) {
            Ok(Some(path)) => {
                let entries = path_to_flow_entries(&path);
                let n = entries.len();
                out.delta.entries.extend(entries);
                RuleStatus::Routed {
                    path: path.switches(),
                    entries: n,
                }
            }
            Ok(None) => RuleStatus::NoPath,
            Err(TransformError::Topology(TopologyError::UnboundPrincipal(h))) => {
                RuleStatus::Unbound(h)
            }
            Err(e) => RuleStatus::Failed(e),
        };
        out.reports.push(RuleReport {
            rule: *rule,
            status,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{REF11_TOPO, TWO_PAIRS_POLICY};
    use crate::policy::parse_policy;
    use crate::topology::{apply_link_event, parse_topology};
    use std::collections::BTreeSet;

    fn ref11() -> Topology {
        parse_topology(REF11_TOPO).unwrap()
    }

    fn ip(last: u8) -> Ipv4Addr {
        Ipv4Addr::new(10, 0, 0, last)
    }

    fn fe(sw: u32, s: u8, d: u8, i: u32, o: u32) -> FlowEntry {
        FlowEntry {
            switch_id: SwitchId(sw),
            ip_src: ip(s),
            ip_dst: ip(d),
            in_port: PortNo(i),
            out_port: PortNo(o),
        }
    }

    #[test]
    fn authorize_examples() {
        let t = ref11();
        let p1 = authorize_path(&AccessRule::new(1, 5, true), &t)
            .unwrap()
            .unwrap();
        assert_eq!(p1.switches().ids(), vec![1, 5, 8, 10]);
        assert_eq!(
            (p1.src_host.host_id, p1.dst_host.host_id),
            (HostId(1), HostId(5))
        );
        assert_eq!(p1.hops.len(), 3);
        let p4 = authorize_path(&AccessRule::new(4, 2, true), &t)
            .unwrap()
            .unwrap();
        assert_eq!(p4.switches().ids(), vec![9, 6, 2]);

        let mut dark = t.clone();
        dark.set_all_links(false);
        assert_eq!(
            authorize_path(&AccessRule::new(1, 5, true), &dark),
            Ok(None)
        );
    }

    #[test]
    fn p1_entries() {
        // Ports read off ref11.topo: 1:2-5:2, 5:3-8:2, 8:3-10:2, hosts on port 1.
        let t = ref11();
        let got = transform_rule(&AccessRule::new(1, 5, true), &t)
            .unwrap()
            .unwrap();
        assert_eq!(
            got,
            vec![
                fe(1, 1, 5, 1, 2),
                fe(5, 1, 5, 2, 3),
                fe(8, 1, 5, 2, 3),
                fe(10, 1, 5, 2, 1)
            ]
        );
    }

    #[test]
    fn p3_entries() {
        let t = ref11();
        let got = transform_rule(&AccessRule::new(2, 4, true), &t)
            .unwrap()
            .unwrap();
        let sw: Vec<u32> = got.iter().map(|e| e.switch_id.0).collect();
        assert_eq!(sw, vec![2, 6, 9]);
        assert_eq!(
            got,
            vec![fe(2, 2, 4, 1, 2), fe(6, 2, 4, 2, 3), fe(9, 2, 4, 2, 1)]
        );
    }

    #[test]
    fn degenerate_single_switch() {
        let t = parse_topology("SWITCH 1\nHOST 1 10.0.0.1 1 1\nHOST 2 10.0.0.2 1 2\n").unwrap();
        let got = transform_rule(&AccessRule::new(1, 2, true), &t)
            .unwrap()
            .unwrap();
        assert_eq!(got, vec![fe(1, 1, 2, 1, 2)]);
    }

    #[test]
    fn unbound_object() {
        assert_eq!(
            transform_rule(&AccessRule::new(1, 99, true), &ref11()),
            Err(TransformError::Topology(TopologyError::UnboundPrincipal(
                HostId(99)
            )))
        );
    }

    #[test]
    fn two_pairs_delta() {
        let t = ref11();
        let spm = parse_policy(TWO_PAIRS_POLICY).unwrap();
        let out = transform_spm(&spm, &t);
        assert_eq!(out.delta.len(), 14);
        assert_eq!(out.routed(), 4);
        let paths: Vec<Vec<u32>> = out.paths().map(|p| p.ids()).collect();
        assert_eq!(
            paths,
            vec![
                vec![1, 5, 8, 10],
                vec![10, 8, 5, 1],
                vec![2, 6, 9],
                vec![9, 6, 2]
            ]
        );
        let keys: BTreeSet<_> = out.delta.iter().map(FlowEntry::key).collect();
        assert_eq!(keys.len(), 14);
    }

    #[test]
    fn empty_and_dark() {
        let t = ref11();
        assert!(transform_spm(&SecurityPolicy::default(), &t)
            .delta
            .is_empty());
        let mut dark = t.clone();
        dark.set_all_links(false);
        let out = transform_spm(&parse_policy(TWO_PAIRS_POLICY).unwrap(), &dark);
        assert!(out.delta.is_empty());
        assert!(out.reports.iter().all(|r| r.status == RuleStatus::NoPath));
    }

    #[test]
    fn unbound_rule_does_not_abort() {
        let t = ref11();
        let spm = parse_policy("R 1 5 1\nR 1 42 1\nR 5 1 1\n").unwrap();
        let out = transform_spm(&spm, &t);
        assert_eq!(out.delta.len(), 8);
        assert_eq!(out.reports[1].status, RuleStatus::Unbound(HostId(42)));
    }

    #[test]
    fn cut_link_changes_p1() {
        let t = apply_link_event(&ref11(), SwitchId(8), SwitchId(10), false).unwrap();
        let got = transform_rule(&AccessRule::new(1, 5, true), &t)
            .unwrap()
            .unwrap();
        // 1:3-7:2, 7:3-11:2, 11:3-10:3
        assert_eq!(
            got,
            vec![
                fe(1, 1, 5, 1, 3),
                fe(7, 1, 5, 2, 3),
                fe(11, 1, 5, 2, 3),
                fe(10, 1, 5, 3, 1)
            ]
        );
    }

    #[test]
    fn csv_dump() {
        let csv = flows_to_csv(&[fe(1, 1, 5, 1, 2)]);
        assert_eq!(
            csv,
            "switch_id,ip_src,ip_dst,in_port,out_port\n1,10.0.0.1,10.0.0.5,1,2\n"
        );
    }
}
