// SPDX-License-Identifier: Apache-2.0

//! Reference inputs shipped with the crate.

/// 11 switches, 6 hosts, 11 links.
pub const REF11_TOPO: &str = include_str!("../fixtures/ref11.topo");
/// Two bidirectional grants: h1 <-> h5 and h2 <-> h4.
pub const TWO_PAIRS_POLICY: &str = include_str!("../fixtures/two_pairs.spm");
pub const H1_H5_POLICY: &str = include_str!("../fixtures/h1_h5.spm");
pub const H2_H5_POLICY: &str = include_str!("../fixtures/h2_h5.spm");
pub const H1_H5_H2_H5_POLICY: &str = include_str!("../fixtures/h1_h5_h2_h5.spm");

pub const LINK_CUT_SCENARIO: &str = include_str!("../fixtures/link_cut.scn");
pub const POLICY_SWAP_SCENARIO: &str = include_str!("../fixtures/policy_swap.scn");
pub const RULE_ADD_SCENARIO: &str = include_str!("../fixtures/rule_add.scn");

/// Absolute path of the fixture directory in the source tree.
pub fn dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}
