// SPDX-License-Identifier: Apache-2.0

//! Seeded random topologies and policies.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::policy::{AccessRule, SecurityPolicy};
use crate::topology::{Topology, TopologyBuilder};
use crate::HostId;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Ring over switches `1..=n` plus `n / 4` random chords, as a builder so
/// callers can attach hosts.
pub fn ring_with_chords<R: Rng>(n: u32, rng: &mut R) -> TopologyBuilder {
    assert!(n >= 1);
    let mut b = TopologyBuilder::new();
    for s in 1..=n {
        b.switch(s);
    }
    let mut linked = HashSet::new();
    let mut add = |b: &mut TopologyBuilder, x: u32, y: u32| {
        if x != y && linked.insert((x.min(y), x.max(y))) {
            b.link(x, y);
            true
        } else {
            false
        }
    };
    for s in 1..=n {
        let next = s % n + 1;
        add(&mut b, s, next);
    }
    let chords = n / 4;
    let mut placed = 0;
    // Dense small rings may run out of free pairs.
    let mut attempts = 0;
    while placed < chords && attempts < 100 * (chords + 1) {
        attempts += 1;
        let (x, y) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        if add(&mut b, x, y) {
            placed += 1;
        }
    }
    b
}

/// Connected topology of `n` switches with hosts `1..=hosts` on random switches.
pub fn random_topology<R: Rng>(n: u32, hosts: u32, rng: &mut R) -> Topology {
    let mut b = ring_with_chords(n, rng);
    for h in 1..=hosts {
        b.host(h, rng.gen_range(1..=n));
    }
    b.build().expect("generated topology is valid")
}

/// Up to `m` distinct random grants among `hosts`, all with `fixed = 1`.
pub fn random_policy<R: Rng>(hosts: &[HostId], m: usize, rng: &mut R) -> SecurityPolicy {
    let mut pairs: Vec<(HostId, HostId)> = hosts
        .iter()
        .flat_map(|&a| hosts.iter().filter(move |&&b| b != a).map(move |&b| (a, b)))
        .collect();
    pairs.shuffle(rng);
    pairs.truncate(m);
    let rules = pairs
        .into_iter()
        .map(|(s, o)| AccessRule {
            subject: s,
            object: o,
            fixed: true,
        })
        .collect();
    SecurityPolicy::new(rules).expect("pairs are distinct")
}

/// `m` disjoint host pairs on distinct switches and one grant per pair.
pub fn paired_instance(n: u32, m: u32, seed: u64) -> (Topology, SecurityPolicy) {
    assert!(n >= 2 && m >= 1);
    let mut rng = rng(seed);
    let mut b = ring_with_chords(n, &mut rng);
    let mut rules = Vec::new();
    for i in 0..m {
        let (s, o) = (2 * i + 1, 2 * i + 2);
        let sa = rng.gen_range(1..=n);
        let mut sb = rng.gen_range(1..n);
        if sb >= sa {
            sb += 1;
        }
        b.host(s, sa).host(o, sb);
        rules.push(AccessRule::new(s, o, true));
    }
    let topo = b.build().expect("generated topology is valid");
    (
        topo,
        SecurityPolicy::new(rules).expect("pairs are distinct"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pathfinder::bfs_distance;

    #[test]
    fn ring_is_connected_and_sized() {
        for n in [2u32, 3, 5, 17, 50] {
            let t = random_topology(n, 4, &mut rng(n as u64));
            assert_eq!(t.switch_count(), n as usize);
            let ring_links = if n == 2 { 1 } else { n as usize };
            assert_eq!(t.links().count(), ring_links + (n / 4) as usize);
            for s in t.switches() {
                assert!(bfs_distance(&t, t.switches().next().unwrap(), s)
                    .unwrap()
                    .is_some());
            }
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(paired_instance(30, 5, 9), paired_instance(30, 5, 9));
        assert_ne!(paired_instance(30, 5, 9).0, paired_instance(30, 5, 10).0);
    }

    #[test]
    fn policy_pairs_distinct() {
        let hosts: Vec<HostId> = (1..=4).map(HostId).collect();
        let p = random_policy(&hosts, 100, &mut rng(1));
        assert_eq!(p.len(), 12);
    }
}
