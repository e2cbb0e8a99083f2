use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::LedgerError;
use crate::circuits::{CircuitKind, VerifyingKey, MAX_AGGREGATE_ARITY};
use crate::crypto::{PublicKey, MAX_WEIGHT};
use crate::identity::Did;
use crate::Timestamp;

pub type ScholarshipId = u64;

/// Number of winners in one award tier. Tiers are listed best-first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrizeTier {
    pub tier: String,
    pub count: u32,
}

/// One evaluation dimension: its weight and the CA that attests it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DimensionConfig {
    pub dimension: String,
    pub weight: u32,
    pub ca: Did,
    pub ca_public_key: PublicKey,
}

/// Deployed contract parameters. Dimension order is the order in which
/// aggregate public inputs must be presented.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScholarshipConfig {
    pub id: ScholarshipId,
    pub name: String,
    pub prize_counts: Vec<PrizeTier>,
    pub dimensions: Vec<DimensionConfig>,
    pub start_time: Timestamp,
    pub end_time: Timestamp,
    pub weighted_vk: VerifyingKey,
    pub aggregate_vk: VerifyingKey,
    /// Hardening: CA signatures also cover the applicant's DID, so tuples
    /// cannot be reused by another student. Off by default.
    #[serde(default)]
    pub bind_student: bool,
}

impl ScholarshipConfig {
    pub fn validate(&self) -> Result<(), LedgerError> {
        let err = |msg: String| Err(LedgerError::Config(msg));
        if self.dimensions.is_empty() || self.dimensions.len() > MAX_AGGREGATE_ARITY {
            return err(format!(
                "dimension count {} outside 1..={MAX_AGGREGATE_ARITY}",
                self.dimensions.len()
            ));
        }
        if let Some(d) = self.dimensions.iter().find(|d| d.weight > MAX_WEIGHT) {
            return err(format!("weight of {:?} exceeds 100", d.dimension));
        }
        let sum: u32 = self.dimensions.iter().map(|d| d.weight).sum();
        if sum != 100 {
            return err(format!("weights sum to {sum}, expected 100"));
        }
        let labels: BTreeSet<&str> = self.dimensions.iter().map(|d| d.dimension.as_str()).collect();
        if labels.len() != self.dimensions.len() {
            return err("duplicate dimension label".into());
        }
        if self.start_time >= self.end_time {
            return err(format!(
                "start_time {} must be before end_time {}",
                self.start_time, self.end_time
            ));
        }
        let tiers: BTreeSet<&str> = self.prize_counts.iter().map(|t| t.tier.as_str()).collect();
        if tiers.len() != self.prize_counts.len() {
            return err("duplicate prize tier".into());
        }
        if self.weighted_vk.shape.kind != CircuitKind::WeightedScore {
            return err("weighted_vk is not a weighted-score key".into());
        }
        if self.aggregate_vk.shape.kind != CircuitKind::Aggregate
            || self.aggregate_vk.shape.arity as usize != self.dimensions.len()
        {
            return err(format!(
                "aggregate_vk must be an aggregate key of arity {}",
                self.dimensions.len()
            ));
        }
        Ok(())
    }

    pub fn dimension_count(&self) -> usize {
        self.dimensions.len()
    }

    pub fn dimension(&self, label: &str) -> Option<&DimensionConfig> {
        self.dimensions.iter().find(|d| d.dimension == label)
    }

    pub fn tier(&self, label: &str) -> Option<&PrizeTier> {
        self.prize_counts.iter().find(|t| t.tier == label)
    }

    pub fn window_open(&self, now: Timestamp) -> bool {
        (self.start_time..=self.end_time).contains(&now)
    }
}
