// SPDX-License-Identifier: Apache-2.0

//! Hop-count shortest paths between switches.
//!
//! [`djk_route`] is a dense-matrix Dijkstra: it rebuilds the [`CostMatrix`]
//! from the current topology on every call, then settles vertices in
//! ascending `(distance, switch id)` order with linear-scan selection. A
//! predecessor is replaced only on a strictly shorter distance, which fixes
//! the choice among equal-hop paths. Each search is `O(N^2)`.
//!
//! [`bfs_distance`] walks the edge list breadth-first and shares no code with
//! the matrix route; it exists to cross-check it.

use std::collections::VecDeque;

use thiserror::Error;

use crate::topology::{CostMatrix, Topology};
use crate::SwitchId;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum RouteError {
    #[error("unknown switch {0}")]
    UnknownSwitch(SwitchId),
}

/// Switches from source to destination, joined by live edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SwitchPath(pub Vec<SwitchId>);

impl SwitchPath {
    pub fn switches(&self) -> &[SwitchId] {
        &self.0
    }

    pub fn hop_count(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn ids(&self) -> Vec<u32> {
        self.0.iter().map(|s| s.0).collect()
    }
}

/// Cost-matrix cells touched by one search: matrix construction, minimum
/// selection scans and relaxation checks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RouteStats {
    pub ops: u64,
}

pub fn djk_route(
    topo: &Topology,
    src: SwitchId,
    dst: SwitchId,
) -> Result<Option<SwitchPath>, RouteError> {
    djk_route_with_stats(topo, src, dst).map(|(p, _)| p)
}

pub fn djk_route_with_stats(
    topo: &Topology,
    src: SwitchId,
    dst: SwitchId,
) -> Result<(Option<SwitchPath>, RouteStats), RouteError> {
    for sw in [src, dst] {
        if !topo.has_switch(sw) {
            return Err(RouteError::UnknownSwitch(sw));
        }
    }
    let mut stats = RouteStats::default();
    let djk = CostMatrix::build(topo, &mut stats.ops);
    let n = djk.n();
    let s = djk.index_of(src).unwrap();
    let d = djk.index_of(dst).unwrap();

    let mut dist = vec![CostMatrix::INF; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut settled = vec![false; n];
    dist[s] = 0;

    for _ in 0..n {
        // Lowest index wins ties, i.e. lowest switch id.
        let mut u = None;
        for v in 0..n {
            stats.ops += 1;
            if !settled[v] && u.is_none_or(|w: usize| dist[v] < dist[w]) {
                u = Some(v);
            }
        }
        let Some(u) = u else { break };
        if dist[u] == CostMatrix::INF {
            break;
        }
        settled[u] = true;
        for (v, &c) in djk.row(u).iter().enumerate() {
            stats.ops += 1;
            if settled[v] || c == CostMatrix::INF {
                continue;
            }
            let alt = dist[u] + c;
            if alt < dist[v] {
                dist[v] = alt;
                pred[v] = Some(u);
            }
        }
    }

    if dist[d] == CostMatrix::INF {
        return Ok((None, stats));
    }
    let mut rev = vec![djk.switch_at(d)];
    let mut cur = d;
    while let Some(p) = pred[cur] {
        rev.push(djk.switch_at(p));
        cur = p;
    }
    rev.reverse();
    Ok((Some(SwitchPath(rev)), stats))
}

/// Breadth-first hop distance over live edges; `None` when unreachable.
pub fn bfs_distance(
    topo: &Topology,
    src: SwitchId,
    dst: SwitchId,
) -> Result<Option<u32>, RouteError> {
    for sw in [src, dst] {
        if !topo.has_switch(sw) {
            return Err(RouteError::UnknownSwitch(sw));
        }
    }
    let mut seen = std::collections::HashMap::from([(src, 0u32)]);
    let mut queue = VecDeque::from([src]);
    while let Some(cur) = queue.pop_front() {
        let d = seen[&cur];
        if cur == dst {
            return Ok(Some(d));
        }
        for e in topo.edges().iter().filter(|e| e.using && e.src_sw == cur) {
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(e.dst_sw) {
                slot.insert(d + 1);
                queue.push_back(e.dst_sw);
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::REF11_TOPO;
    use crate::topology::{apply_link_event, parse_topology, TopologyBuilder};
    use proptest::prelude::*;

    fn ref11() -> Topology {
        parse_topology(REF11_TOPO).unwrap()
    }

    fn route(t: &Topology, a: u32, b: u32) -> Option<Vec<u32>> {
        djk_route(t, SwitchId(a), SwitchId(b))
            .unwrap()
            .map(|p| p.ids())
    }

    #[test]
    fn ref11_routes() {
        let t = ref11();
        assert_eq!(route(&t, 1, 10), Some(vec![1, 5, 8, 10]));
        assert_eq!(route(&t, 10, 1), Some(vec![10, 8, 5, 1]));
        assert_eq!(route(&t, 2, 9), Some(vec![2, 6, 9]));
        assert_eq!(route(&t, 9, 2), Some(vec![9, 6, 2]));
        assert_eq!(route(&t, 2, 10), Some(vec![2, 6, 8, 10]));
        assert_eq!(route(&t, 4, 4), Some(vec![4]));
    }

    #[test]
    fn reroutes_after_cut() {
        let t = apply_link_event(&ref11(), SwitchId(8), SwitchId(10), false).unwrap();
        assert_eq!(route(&t, 1, 10), Some(vec![1, 7, 11, 10]));
        assert_eq!(route(&t, 10, 1), Some(vec![10, 11, 7, 1]));
    }

    #[test]
    fn no_path_and_unknown() {
        let mut t = ref11();
        t.set_all_links(false);
        assert_eq!(route(&t, 1, 10), None);
        assert_eq!(bfs_distance(&t, SwitchId(1), SwitchId(10)), Ok(None));
        assert_eq!(
            djk_route(&t, SwitchId(1), SwitchId(12)),
            Err(RouteError::UnknownSwitch(SwitchId(12)))
        );
        assert_eq!(
            bfs_distance(&t, SwitchId(0), SwitchId(1)),
            Err(RouteError::UnknownSwitch(SwitchId(0)))
        );
    }

    #[test]
    fn bfs_ref11() {
        let t = ref11();
        assert_eq!(bfs_distance(&t, SwitchId(1), SwitchId(10)), Ok(Some(3)));
        assert_eq!(bfs_distance(&t, SwitchId(2), SwitchId(9)), Ok(Some(2)));
        assert_eq!(bfs_distance(&t, SwitchId(7), SwitchId(7)), Ok(Some(0)));
    }

    #[test]
    fn op_count_is_quadratic_for_connected() {
        // Build + scan + relax over every vertex: 3 * n^2 plus one write per live edge.
        let t = ref11();
        let (_, stats) = djk_route_with_stats(&t, SwitchId(1), SwitchId(10)).unwrap();
        assert_eq!(stats.ops, 3 * 121 + 22);
    }

    fn arb_topology() -> impl Strategy<Value = Topology> {
        (
            2u32..16,
            proptest::collection::vec((0u32..16, 0u32..16), 0..30),
            proptest::collection::vec(any::<bool>(), 30),
        )
            .prop_map(|(n, pairs, up)| {
                let mut b = TopologyBuilder::new();
                for s in 1..=n {
                    b.switch(s);
                }
                for (x, y) in &pairs {
                    let (x, y) = (1 + x % n, 1 + y % n);
                    if x != y {
                        b.link(x, y);
                    }
                }
                let mut t = b.build().unwrap();
                let links: Vec<_> = t.links().collect();
                for (l, keep) in links.iter().zip(&up) {
                    if !keep {
                        t.set_link(l.a, l.b, false).unwrap();
                    }
                }
                t
            })
    }

    proptest! {
        #[test]
        fn agrees_with_bfs_and_is_valid(t in arb_topology()) {
            let ids: Vec<SwitchId> = t.switches().collect();
            for &a in &ids {
                for &b in &ids {
                    let p = djk_route(&t, a, b).unwrap();
                    let d = bfs_distance(&t, a, b).unwrap();
                    prop_assert_eq!(p.as_ref().map(|p| p.hop_count() as u32), d);
                    if let Some(p) = p {
                        let s = p.switches();
                        prop_assert_eq!(s[0], a);
                        prop_assert_eq!(*s.last().unwrap(), b);
                        let mut uniq = s.to_vec();
                        uniq.sort();
                        uniq.dedup();
                        prop_assert_eq!(uniq.len(), s.len());
                        for w in s.windows(2) {
                            prop_assert!(t.live_edge(w[0], w[1]).is_some());
                        }
                        prop_assert_eq!(djk_route(&t, a, b).unwrap(), Some(p));
                    }
                }
            }
        }
    }
}
