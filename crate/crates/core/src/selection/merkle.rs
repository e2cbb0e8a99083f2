use serde::{Deserialize, Serialize};

use super::SelectionError;
use crate::crypto::{hash_tagged_parts, Digest, DomainTag};

/// Which side of the running hash the sibling sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofStep {
    pub sibling: Digest,
    pub side: Side,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MerkleProof {
    pub path: Vec<ProofStep>,
}

/// Binary Merkle tree. Internal nodes are `Hash_NODE(left || right)`; an odd
/// node at the end of a layer is paired with itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MerkleTree {
    levels: Vec<Vec<Digest>>,
}

pub fn node_hash(left: &Digest, right: &Digest) -> Digest {
    hash_tagged_parts(DomainTag::Node, &[left.as_bytes(), right.as_bytes()])
}

impl MerkleTree {
    pub fn build(leaves: &[Digest]) -> Result<Self, SelectionError> {
        if leaves.is_empty() {
            return Err(SelectionError::EmptyTree);
        }
        let mut levels = vec![leaves.to_vec()];
        while levels.last().is_some_and(|l| l.len() > 1) {
            let below = levels.last().expect("non-empty");
            let next = below
                .chunks(2)
                .map(|pair| match pair {
                    [l, r] => node_hash(l, r),
                    [only] => node_hash(only, only),
                    _ => unreachable!(),
                })
                .collect();
            levels.push(next);
        }
        Ok(Self { levels })
    }

    pub fn root(&self) -> Digest {
        self.levels.last().expect("at least one level")[0]
    }

    pub fn leaves(&self) -> &[Digest] {
        &self.levels[0]
    }

    pub fn levels(&self) -> &[Vec<Digest>] {
        &self.levels
    }

    /// Number of hashing steps from a leaf to the root.
    pub fn height(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn prove(&self, index: usize) -> Result<MerkleProof, SelectionError> {
        let count = self.levels[0].len();
        if index >= count {
            return Err(SelectionError::IndexOutOfRange { index, count });
        }
        let mut path = Vec::with_capacity(self.height());
        let mut i = index;
        for level in &self.levels[..self.height()] {
            let step = if i.is_multiple_of(2) {
                ProofStep {
                    sibling: *level.get(i + 1).unwrap_or(&level[i]),
                    side: Side::Right,
                }
            } else {
                ProofStep {
                    sibling: level[i - 1],
                    side: Side::Left,
                }
            };
            path.push(step);
            i /= 2;
        }
        Ok(MerkleProof { path })
    }
}

pub fn build_tree(leaves: &[Digest]) -> Result<MerkleTree, SelectionError> {
    MerkleTree::build(leaves)
}

pub fn prove_membership(tree: &MerkleTree, index: usize) -> Result<MerkleProof, SelectionError> {
    tree.prove(index)
}

/// Fold `leaf` up the sibling path and compare with `root`.
pub fn verify_membership(root: &Digest, leaf: &Digest, proof: &MerkleProof) -> bool {
    let folded = proof.path.iter().fold(*leaf, |acc, step| match step.side {
        Side::Right => node_hash(&acc, &step.sibling),
        Side::Left => node_hash(&step.sibling, &acc),
    });
    folded == *root
}
