use serde::Serialize;

use super::{AwardRootEntry, ScholarshipId, ScholarshipState};
use crate::crypto::Digest;
use crate::selection::{fetch_list, rank_and_allocate, AwardeeList, ContentStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditOutcome {
    Consistent,
    RootMismatch,
    Incomplete,
}

impl AuditOutcome {
    pub fn label(self) -> &'static str {
        match self {
            AuditOutcome::Consistent => "CONSISTENT",
            AuditOutcome::RootMismatch => "ROOT MISMATCH",
            AuditOutcome::Incomplete => "INCOMPLETE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TierAudit {
    pub tier: String,
    pub outcome: AuditOutcome,
    pub stored_root: Option<Digest>,
    pub rebuilt_root: Option<Digest>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditReport {
    pub scholarship: ScholarshipId,
    pub outcome: AuditOutcome,
    pub tiers: Vec<TierAudit>,
}

/// Third-party audit: re-rank the on-ledger records, fetch each published
/// list, rebuild its tree, and compare with the stored root.
///
/// A tier with no expected awardees needs no root. Any mismatch dominates
/// missing roots.
pub fn audit_scholarship(state: &ScholarshipState, store: &ContentStore) -> AuditReport {
    let expected = rank_and_allocate(&state.applications, &state.config.prize_counts).unwrap_or_default();
    let tiers: Vec<TierAudit> = state
        .config
        .prize_counts
        .iter()
        .map(|quota| {
            let exp = expected.iter().find(|l| l.tier == quota.tier);
            audit_tier(&quota.tier, exp, state.award_roots.get(&quota.tier), store)
        })
        .collect();
    let outcome = if tiers.iter().any(|t| t.outcome == AuditOutcome::RootMismatch) {
        AuditOutcome::RootMismatch
    } else if tiers.iter().any(|t| t.outcome == AuditOutcome::Incomplete) {
        AuditOutcome::Incomplete
    } else {
        AuditOutcome::Consistent
    };
    AuditReport {
        scholarship: state.config.id,
        outcome,
        tiers,
    }
}

fn audit_tier(
    tier: &str,
    expected: Option<&AwardeeList>,
    stored: Option<&AwardRootEntry>,
    store: &ContentStore,
) -> TierAudit {
    let mut out = TierAudit {
        tier: tier.to_string(),
        outcome: AuditOutcome::Consistent,
        stored_root: stored.map(|e| e.root),
        rebuilt_root: None,
        detail: String::new(),
    };
    let expected_empty = expected.is_none_or(|l| l.entries.is_empty());
    let Some(entry) = stored else {
        if !expected_empty {
            out.outcome = AuditOutcome::Incomplete;
            out.detail = "root not set".into();
        }
        return out;
    };
    let mismatch = |mut out: TierAudit, detail: String| {
        out.outcome = AuditOutcome::RootMismatch;
        out.detail = detail;
        out
    };
    let list = match fetch_list(store, &entry.list_cid) {
        Ok(list) => list,
        Err(e) => return mismatch(out, e.to_string()),
    };
    match list.tree() {
        Ok(tree) => out.rebuilt_root = Some(tree.root()),
        Err(e) => return mismatch(out, e.to_string()),
    }
    if list.tier != tier {
        return mismatch(out, format!("published list is for tier {:?}", list.tier));
    }
    if out.rebuilt_root != Some(entry.root) {
        return mismatch(out, "rebuilt root differs from the stored root".into());
    }
    if Some(&list) != expected {
        return mismatch(out, "published list differs from re-ranked applications".into());
    }
    out
}
