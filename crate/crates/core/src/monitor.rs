// SPDX-License-Identifier: Apache-2.0

//! Packet-in driven reconciliation.
//!
//! On every packet-in the monitor decides whether the data plane may be
//! stale: on the first call, when any rule carries `fixed = 1` or the rule
//! set differs from the last one compiled, or when any edge's liveness
//! differs from the snapshot taken at the last reconciliation. If so it
//! recompiles the whole policy, clears every table, installs the fresh
//! entries, resets the `fixed` flags and refreshes its snapshots. Otherwise
//! it leaves everything untouched.
//!
//! An edge that is down now and was down at the last reconciliation does not
//! retrigger.

use std::collections::BTreeMap;
use std::fmt;

use crate::dataplane::{DataPlane, DataPlaneError};
use crate::policy::SecurityPolicy;
use crate::topology::Topology;
use crate::transform::transform_spm;
use crate::{PortNo, SwitchId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReconcileReason {
    Initial,
    PolicyDirty,
    LinkChanged,
    None,
}

impl fmt::Display for ReconcileReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Initial => "initial",
            Self::PolicyDirty => "policy_dirty",
            Self::LinkChanged => "link_changed",
            Self::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReconcileReport {
    pub triggered: bool,
    pub reason: ReconcileReason,
    pub rules_routed: usize,
    pub rules_unrouted: usize,
    pub entries_installed: usize,
}

impl ReconcileReport {
    pub const QUIET: Self = Self {
        triggered: false,
        reason: ReconcileReason::None,
        rules_routed: 0,
        rules_unrouted: 0,
        entries_installed: 0,
    };

    /// `RECONCILE tick=<t> reason=<r> routed=<n> unrouted=<m> entries=<k>`
    pub fn log_line(&self, tick: u64) -> String {
        format!(
            "RECONCILE tick={tick} reason={} routed={} unrouted={} entries={}",
            self.reason, self.rules_routed, self.rules_unrouted, self.entries_installed
        )
    }
}

/// Snapshots of the inputs as of the last completed reconciliation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Monitor {
    last_policy: Option<SecurityPolicy>,
    last_liveness: BTreeMap<(SwitchId, PortNo), bool>,
    reconcile_count: u64,
}

impl Monitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reconcile_count(&self) -> u64 {
        self.reconcile_count
    }

    pub fn last_policy(&self) -> Option<&SecurityPolicy> {
        self.last_policy.as_ref()
    }

    fn stale_reason(&self, spm: &SecurityPolicy, topo: &Topology) -> ReconcileReason {
        let Some(last) = &self.last_policy else {
            return ReconcileReason::Initial;
        };
        if spm.is_dirty() || !spm.same_grants(last) {
            ReconcileReason::PolicyDirty
        } else if topo.liveness() != self.last_liveness {
            ReconcileReason::LinkChanged
        } else {
            ReconcileReason::None
        }
    }

    /// Handles one packet-in. `spm` has its `fixed` flags reset when a
    /// reconciliation runs.
    ///
    /// Clear and install happen back to back; no forwarding can observe the
    /// empty plane in between.
    pub fn on_packet_in(
        &mut self,
        spm: &mut SecurityPolicy,
        topo: &Topology,
        plane: &mut DataPlane,
    ) -> Result<ReconcileReport, DataPlaneError> {
        let reason = self.stale_reason(spm, topo);
        if reason == ReconcileReason::None {
            return Ok(ReconcileReport::QUIET);
        }

        let out = transform_spm(spm, topo);
        let mut next = plane.clone();
        next.clear_all();
        next.install(&out.delta)?;
        *plane = next;

        spm.set_all_fixed(false);
        self.last_policy = Some(spm.clone());
        self.last_liveness = topo.liveness();
        self.reconcile_count += 1;

        Ok(ReconcileReport {
            triggered: true,
            reason,
            rules_routed: out.routed(),
            rules_unrouted: out.unrouted(),
            entries_installed: out.delta.len(),
        })
    }
}
