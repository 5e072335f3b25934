//! Dealing loss blocks out to users.

use rand::Rng;

use super::FedError;
use crate::attention::AttentionInstance;
use crate::scalar::Scalar;
use crate::seed::rng_from;

/// One user's share of the objective: f_c(x) is the sum of the listed
/// blocks' losses. Block ids are kept sorted so summation order is a
/// function of the partition alone.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalObjective {
    pub owner: usize,
    pub block_ids: Vec<usize>,
}

/// Shuffles the n blocks by seed and deals them round-robin, so sizes
/// differ by at most one and every user owns at least one block.
pub fn partition_data<T: Scalar>(
    inst: &AttentionInstance<T>,
    users: usize,
    seed: u64,
) -> Result<Vec<LocalObjective>, FedError> {
    if users == 0 {
        return Err(FedError::BadConfig);
    }
    let n = inst.n();
    if users > n {
        return Err(FedError::TooManyUsers { users, blocks: n });
    }

    let mut ids: Vec<usize> = (0..n).collect();
    let mut rng = rng_from(seed);
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        ids.swap(i, j);
    }

    let mut out: Vec<LocalObjective> = (0..users)
        .map(|owner| LocalObjective {
            owner,
            block_ids: Vec::new(),
        })
        .collect();
    for (pos, &block) in ids.iter().enumerate() {
        out[pos % users].block_ids.push(block);
    }
    for obj in &mut out {
        obj.block_ids.sort_unstable();
    }
    Ok(out)
}
