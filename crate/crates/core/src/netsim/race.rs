use rand::Rng;

use crate::netsim::{NetsimError, SimConfig, TAG_ATTACK};
use crate::seed::{derive_seed, derive_seed2, rng_from};

/// Per-tick success probability of hash power `rate` against a
/// `difficulty_bits` target, treating rates as hashes per tick.
fn tick_probability(rate: f64, difficulty_bits: u32) -> f64 {
    (rate * (-(difficulty_bits as f64)).exp2()).min(1.0)
}

/// Draws one mining race: who finds the next block, and after how many
/// ticks. The winner is categorical in the hash rates; the solve time is
/// geometric with per-tick success probability min(1, Σrates·2^-bits),
/// sampled by inverse CDF. Draw order (winner, then ticks) is fixed so
/// replays consume the stream identically.
pub fn pow_race<R: Rng>(
    hash_rates: &[f64],
    difficulty_bits: u32,
    rng: &mut R,
) -> Result<(usize, u64), NetsimError> {
    if hash_rates.is_empty() {
        return Err(NetsimError::EmptyNetwork);
    }
    if hash_rates.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(NetsimError::BadRate);
    }
    let total: f64 = hash_rates.iter().sum();
    if total <= 0.0 {
        return Err(NetsimError::NoHashPower);
    }

    let mark = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut winner = hash_rates.len() - 1;
    for (i, rate) in hash_rates.iter().enumerate() {
        acc += rate;
        if mark < acc {
            winner = i;
            break;
        }
    }

    let p = tick_probability(total, difficulty_bits);
    let u = rng.gen::<f64>();
    let ticks = if p >= 1.0 {
        1
    } else {
        // Inverse CDF of the geometric distribution on {1, 2, ...}.
        ((1.0 - u).ln() / (1.0 - p).ln()).ceil().max(1.0) as u64
    };
    Ok((winner, ticks))
}

/// Measures how often a rewrite attack wins. Each trial restages the race:
/// the adversary forks `target_depth` blocks behind the public head and
/// mines privately while everyone else keeps extending the public chain;
/// the trial succeeds if the private fork strictly overtakes the public
/// chain within a 10^4-tick budget. Per tick, the honest side draws first,
/// then the adversary, both Bernoulli at their hash power's tick
/// probability. Returns the success frequency over `trials`.
///
/// The race is simulated at block granularity: block contents do not
/// affect who gets ahead, only arrival counts do, so no blocks are built.
pub fn adversary_rewrite(
    cfg: &SimConfig,
    target_depth: usize,
    trials: usize,
) -> Result<f64, NetsimError> {
    cfg.validate()?;
    let adv = cfg.adversary.as_ref().ok_or(NetsimError::NoAdversary)?;
    if target_depth == 0 {
        return Err(NetsimError::BadDepth);
    }
    if trials == 0 {
        return Ok(0.0);
    }

    let adv_rate = cfg.hash_rates[adv.user];
    let honest_rate: f64 = cfg.hash_rates.iter().sum::<f64>() - adv_rate;
    let p_adv = tick_probability(adv_rate, cfg.difficulty_bits);
    let p_honest = tick_probability(honest_rate, cfg.difficulty_bits);

    const TICK_BUDGET: u64 = 10_000;
    let attack_seed = derive_seed(cfg.master_seed, TAG_ATTACK);
    let mut successes = 0usize;
    for trial in 0..trials as u64 {
        let mut rng = rng_from(derive_seed2(attack_seed, target_depth as u64, trial));
        // Lengths measured from the fork point: the public side starts
        // `target_depth` blocks ahead.
        let mut honest_len = target_depth as u64;
        let mut adv_len = 0u64;
        for _ in 0..TICK_BUDGET {
            if rng.gen::<f64>() < p_honest {
                honest_len += 1;
            }
            if rng.gen::<f64>() < p_adv {
                adv_len += 1;
            }
            if adv_len > honest_len {
                successes += 1;
                break;
            }
        }
    }
    Ok(successes as f64 / trials as f64)
}
