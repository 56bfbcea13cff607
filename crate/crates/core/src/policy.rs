// SPDX-License-Identifier: Apache-2.0

//! The high-level security policy: an ordered list of access grants.
//!
//! Each line of a policy file is `R <subject> <object> <fixed>`. Subjects and
//! objects are principal ids that equal host ids in the topology. Every rule
//! grants access; there are no deny rules. `fixed = 1` marks a rule as edited
//! by the user since the last reconciliation.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::HostId;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolicyError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: duplicate rule {subject} -> {object}")]
    Duplicate {
        line: usize,
        subject: HostId,
        object: HostId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccessRule {
    pub subject: HostId,
    pub object: HostId,
    pub fixed: bool,
}

impl AccessRule {
    pub fn new(subject: u32, object: u32, fixed: bool) -> Self {
        Self {
            subject: HostId(subject),
            object: HostId(object),
            fixed,
        }
    }

    pub fn pair(&self) -> (HostId, HostId) {
        (self.subject, self.object)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SecurityPolicy {
    rules: Vec<AccessRule>,
}

impl SecurityPolicy {
    /// Builds a policy, rejecting self-grants, zero ids and duplicate pairs.
    pub fn new(rules: Vec<AccessRule>) -> Result<Self, PolicyError> {
        let mut seen = HashSet::new();
        for (i, rule) in rules.iter().enumerate() {
            check_rule(rule, i + 1)?;
            if !seen.insert(rule.pair()) {
                return Err(PolicyError::Duplicate {
                    line: i + 1,
                    subject: rule.subject,
                    object: rule.object,
                });
            }
        }
        Ok(Self { rules })
    }

    pub fn rules(&self) -> &[AccessRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn contains(&self, subject: HostId, object: HostId) -> bool {
        self.rules
            .iter()
            .any(|r| r.subject == subject && r.object == object)
    }

    /// True iff any rule has been edited since the last reconciliation.
    pub fn is_dirty(&self) -> bool {
        self.rules.iter().any(|r| r.fixed)
    }

    pub fn set_all_fixed(&mut self, fixed: bool) {
        for r in &mut self.rules {
            r.fixed = fixed;
        }
    }

    /// Same rules in the same order, ignoring the `fixed` flags.
    pub fn same_grants(&self, other: &SecurityPolicy) -> bool {
        self.rules.len() == other.rules.len()
            && self
                .rules
                .iter()
                .zip(&other.rules)
                .all(|(a, b)| a.pair() == b.pair())
    }
}

/// Free-function form of [`SecurityPolicy::is_dirty`].
pub fn policy_dirty(spm: &SecurityPolicy) -> bool {
    spm.is_dirty()
}

fn check_rule(rule: &AccessRule, line: usize) -> Result<(), PolicyError> {
    let err = |msg: &str| PolicyError::Parse {
        line,
        msg: msg.to_string(),
    };
    if rule.subject.0 == 0 || rule.object.0 == 0 {
        return Err(err("principal ids must be positive"));
    }
    if rule.subject == rule.object {
        return Err(err("subject and object must differ"));
    }
    Ok(())
}

pub fn parse_policy(text: &str) -> Result<SecurityPolicy, PolicyError> {
    let mut rules = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let err = |msg: String| PolicyError::Parse { line, msg };
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens.len() != 4 {
            return Err(err(format!("expected 4 tokens, found {}", tokens.len())));
        }
        if tokens[0] != "R" {
            return Err(err(format!("unknown record type `{}`", tokens[0])));
        }
        let num = |tok: &str, what: &str| {
            tok.parse::<u32>()
                .map_err(|_| err(format!("{what} `{tok}` is not a non-negative integer")))
        };
        let subject = num(tokens[1], "subject")?;
        let object = num(tokens[2], "object")?;
        let fixed = match num(tokens[3], "fixed")? {
            0 => false,
            1 => true,
            other => return Err(err(format!("fixed must be 0 or 1, found {other}"))),
        };
        let rule = AccessRule::new(subject, object, fixed);
        check_rule(&rule, line)?;
        if !seen.insert(rule.pair()) {
            return Err(PolicyError::Duplicate {
                line,
                subject: rule.subject,
                object: rule.object,
            });
        }
        rules.push(rule);
    }
    Ok(SecurityPolicy { rules })
}

pub fn serialize_policy(spm: &SecurityPolicy) -> String {
    let mut out = String::new();
    for r in &spm.rules {
        writeln!(out, "R {} {} {}", r.subject, r.object, u8::from(r.fixed)).unwrap();
    }
    out
}
