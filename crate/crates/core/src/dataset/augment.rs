//! Training-time augmentations for extractive examples. All of them rebuild
//! segment offsets and track the answer by source rule, never by position.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::examples::ExtractExample;
use crate::error::Result;
use crate::types::SAFE_RULE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentOp {
    /// Permute rule order; the safe pseudo-rule stays first.
    Shuffle,
    /// Random bijection over displayed rule numbers.
    Renumber,
    /// Remove one random real rule; if it was the answer, the answer
    /// becomes the safe pseudo-rule.
    DropOne,
}

impl AugmentOp {
    pub const ALL: [AugmentOp; 3] = [AugmentOp::Shuffle, AugmentOp::Renumber, AugmentOp::DropOne];
}

/// Applies `ops` in the given order.
pub fn augment_extract<R: Rng + ?Sized>(
    example: &ExtractExample,
    rng: &mut R,
    ops: &[AugmentOp],
) -> Result<ExtractExample> {
    let mut current = example.clone();
    for op in ops {
        current = apply(&current, rng, *op)?;
    }
    Ok(current)
}

/// How many augmented copies to add per training example, and the ops of
/// each copy (cycled when there are more copies than recipes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPlan {
    pub copies: usize,
    pub recipes: Vec<Vec<AugmentOp>>,
    pub seed: u64,
}

impl Default for AugmentPlan {
    fn default() -> Self {
        AugmentPlan { copies: 8, recipes: vec![vec![AugmentOp::Shuffle]], seed: 0 }
    }
}

impl AugmentPlan {
    pub fn none() -> Self {
        AugmentPlan { copies: 0, recipes: Vec::new(), seed: 0 }
    }

    /// Each original example followed by its copies, from one seeded stream.
    pub fn expand(&self, examples: &[ExtractExample]) -> Result<Vec<ExtractExample>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::with_capacity(examples.len() * (1 + self.copies));
        for ex in examples {
            out.push(ex.clone());
            if self.recipes.is_empty() {
                continue;
            }
            for k in 0..self.copies {
                let mut copy = augment_extract(ex, &mut rng, &self.recipes[k % self.recipes.len()])?;
                copy.id = format!("{}#aug{k}", ex.id);
                out.push(copy);
            }
        }
        Ok(out)
    }
}

fn apply<R: Rng + ?Sized>(example: &ExtractExample, rng: &mut R, op: AugmentOp) -> Result<ExtractExample> {
    let entries = example.context.entries();
    let (safe, mut real): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| e.source == SAFE_RULE);
    match op {
        AugmentOp::Shuffle => real.shuffle(rng),
        AugmentOp::Renumber => {
            let mut numbers: Vec<u32> = real.iter().map(|e| e.display).collect();
            numbers.shuffle(rng);
            for (entry, n) in real.iter_mut().zip(numbers) {
                entry.display = n;
            }
        }
        AugmentOp::DropOne => {
            if real.len() <= 1 {
                return Ok(example.clone());
            }
            let idx = rng.random_range(0..real.len());
            real.remove(idx);
        }
    }
    let mut all = safe;
    all.extend(real);
    example.rebuild(&all)
}
