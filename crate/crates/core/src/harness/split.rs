use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;

/// A seeded uniform shuffle of `items`: the first `m` train, the rest test.
pub fn split_dataset<T: Clone>(items: &[T], seed: u64, m: usize) -> Result<(Vec<T>, Vec<T>), HarnessError> {
    if m >= items.len() {
        return Err(HarnessError::Split { train_size: m, instances: items.len() });
    }
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..m]), pick(&order[m..])))
}

/// The persisted form of a split, `split.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitFile {
    pub schema_version: u32,
    pub domain: String,
    pub seed: u64,
    pub train: Vec<String>,
    pub test: Vec<String>,
}
