//! The round loop: local updates, sketched broadcast, trace bookkeeping.

use std::fmt::Write as _;

use nalgebra::DVector;

use super::constants::{choose_eta, estimate_constants, Constants};
use super::partition::{partition_data, LocalObjective};
use super::{Eta, FedConfig, FedError, WinnerSchedule, TAG_CONSTANTS, TAG_PARTITION, TAG_SKETCH};
use crate::attention::{gradient_blocks, loss, AttentionError, AttentionInstance, WeightVector};
use crate::scalar::Scalar;
use crate::seed::derive_seed;
use crate::sketch::{SketchConfig, SketchOperator};

const CONSTANT_SAMPLES: usize = 64;
const CONSTANT_RADIUS: f64 = 1.0;
const DIVERGENCE_FACTOR: f64 = 1e6;

/// K steps of gradient descent driven by a caller-supplied gradient; returns
/// the end-minus-start delta. The closure form keeps the contraction logic
/// testable on closed-form objectives.
pub fn gd_steps<T, G>(
    x_start: &DVector<T>,
    steps: usize,
    eta: T,
    mut grad: G,
) -> Result<DVector<T>, FedError>
where
    T: Scalar,
    G: FnMut(&DVector<T>) -> Result<DVector<T>, FedError>,
{
    if steps == 0 {
        return Err(FedError::BadConfig);
    }
    let mut u = x_start.clone();
    for k in 1..=steps {
        let g = grad(&u)?;
        u -= g * eta;
        if u.iter().any(|v| !v.finite()) {
            return Err(FedError::NonFiniteIterate { step: k });
        }
    }
    Ok(u - x_start)
}

/// One user's contribution for a round: K local gradient steps on its block
/// subset, returned as a model delta.
pub fn local_update<T: Scalar>(
    inst: &AttentionInstance<T>,
    obj: &LocalObjective,
    x_start: &WeightVector<T>,
    steps: usize,
    eta: T,
) -> Result<DVector<T>, FedError> {
    gd_steps(x_start.as_vector(), steps, eta, |u| {
        let xw = WeightVector::new_unchecked(u.clone());
        Ok(gradient_blocks(inst, &xw, &obj.block_ids)?)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow<T: Scalar> {
    pub round: usize,
    pub f: T,
    pub gap: T,
    pub dist_sq: T,
    pub winner: i64,
    pub eta: T,
    pub alpha: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace<T: Scalar> {
    pub rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> TrainTrace<T> {
    /// CSV with 17 significant digits per double, enough to round-trip.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,f,gap,dist_sq,winner,eta,alpha\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{:.16e},{},{:.16e},{:.16e}",
                r.round,
                r.f.to_double(),
                r.gap.to_double(),
                r.dist_sq.to_double(),
                r.winner,
                r.eta.to_double(),
                r.alpha.to_double()
            )
            .expect("write to string");
        }
        out
    }
}

/// What a finished round hands to the caller: the broadcast payload (sketch
/// space when sketching) and the delta every user applied, which is what a
/// gradient block records on chain.
#[derive(Clone, Debug)]
pub struct RoundRecord<T: Scalar> {
    pub round: usize,
    pub winner: usize,
    pub payload: DVector<T>,
    pub applied: DVector<T>,
}

/// Driving state for one training run. Rounds are numbered from 1; row 0 of
/// the trace is the initial model with winner -1.
pub struct Trainer<T: Scalar> {
    inst: AttentionInstance<T>,
    users: Vec<LocalObjective>,
    local_steps: usize,
    eta: T,
    alpha: T,
    sketch: Option<SketchConfig>,
    sketch_base_seed: u64,
    double_eta: bool,
    constants: Constants<T>,
    sigma_sq: T,
    f0: T,
    x: WeightVector<T>,
    rows: Vec<TraceRow<T>>,
}

impl<T: Scalar> Trainer<T> {
    pub fn new(inst: AttentionInstance<T>, cfg: &FedConfig<T>) -> Result<Self, FedError> {
        if cfg.num_users == 0 || cfg.local_steps == 0 {
            return Err(FedError::BadConfig);
        }
        let users = partition_data(
            &inst,
            cfg.num_users,
            derive_seed(cfg.master_seed, TAG_PARTITION),
        )?;
        let constants = estimate_constants(
            &inst,
            CONSTANT_SAMPLES,
            CONSTANT_RADIUS,
            derive_seed(cfg.master_seed, TAG_CONSTANTS),
        )?;

        let alpha = match &cfg.sketch {
            None => T::zero(),
            Some(s) => {
                // Probe construction validates the shape parameters once and
                // yields the kind's embedding parameter for this dim.
                SketchOperator::<T>::new(s.kind, s.b_sketch, inst.dim(), 0)?.alpha()
            }
        };
        let eta = match cfg.eta {
            Eta::Auto => choose_eta(constants.l_est, alpha, cfg.local_steps)?,
            Eta::Value(v) => {
                if !(v > T::zero()) || !v.finite() {
                    return Err(FedError::BadEta);
                }
                v
            }
        };
        let sketch_base_seed = match &cfg.sketch {
            Some(s) => s
                .seed
                .unwrap_or_else(|| derive_seed(cfg.master_seed, TAG_SKETCH)),
            None => 0,
        };

        let n_users = T::from_double(cfg.num_users as f64);
        let mut sigma_sq = T::zero();
        for obj in &users {
            let g = gradient_blocks(&inst, &constants.x_star, &obj.block_ids)?;
            sigma_sq += g.norm_squared();
        }
        sigma_sq /= n_users;

        let x = WeightVector::zeros(inst.d());
        let f0 = loss(&inst, &x)?.total / n_users;
        let gap = f0 - constants.f_star / n_users;
        let dist_sq = (x.as_vector() - constants.x_star.as_vector()).norm_squared();
        let rows = vec![TraceRow {
            round: 0,
            f: f0,
            gap,
            dist_sq,
            winner: -1,
            eta,
            alpha,
        }];

        Ok(Trainer {
            inst,
            users,
            local_steps: cfg.local_steps,
            eta,
            alpha,
            sketch: cfg.sketch,
            sketch_base_seed,
            double_eta: cfg.double_eta,
            constants,
            sigma_sq,
            f0,
            x,
            rows,
        })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn users(&self) -> &[LocalObjective] {
        &self.users
    }

    pub fn instance(&self) -> &AttentionInstance<T> {
        &self.inst
    }

    pub fn x(&self) -> &WeightVector<T> {
        &self.x
    }

    pub fn constants(&self) -> &Constants<T> {
        &self.constants
    }

    /// Mean squared per-user gradient norm at the optimum. Recorded in run
    /// summaries; the algorithm itself never reads it.
    pub fn sigma_sq(&self) -> T {
        self.sigma_sq
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Rounds completed so far; the next step() call runs round
    /// `rounds_done() + 1`.
    pub fn rounds_done(&self) -> usize {
        self.rows.len() - 1
    }

    pub fn trace(&self) -> TrainTrace<T> {
        TrainTrace {
            rows: self.rows.clone(),
        }
    }

    fn mark_divergence(err: FedError, round: usize) -> FedError {
        match err {
            FedError::NonFiniteIterate { .. }
            | FedError::Attention(AttentionError::NonFinite { .. })
            | FedError::Attention(AttentionError::NonFiniteData) => FedError::Diverged { round },
            other => other,
        }
    }

    /// Runs one global round with the given winner: the winner's local
    /// update, sketched broadcast, and everyone applying the de-sketched
    /// delta.
    pub fn step(&mut self, winner: usize) -> Result<RoundRecord<T>, FedError> {
        let t = self.rows.len();
        if winner >= self.users.len() {
            return Err(FedError::BadWinner {
                got: winner,
                users: self.users.len(),
            });
        }

        let delta = local_update(
            &self.inst,
            &self.users[winner],
            &self.x,
            self.local_steps,
            self.eta,
        )
        .map_err(|e| Self::mark_divergence(e, t))?;

        let (payload, applied) = match &self.sketch {
            None => (delta.clone(), delta),
            Some(s) => {
                let op = SketchOperator::<T>::new(
                    s.kind,
                    s.b_sketch,
                    self.inst.dim(),
                    derive_seed(self.sketch_base_seed, t as u64),
                )?;
                let mut payload = op.sk(&delta)?;
                if self.double_eta {
                    payload *= self.eta;
                }
                let applied = op.desk(&payload)?;
                (payload, applied)
            }
        };

        let x_next = self.x.as_vector() + &applied;
        let xw = WeightVector::new(x_next)
            .map_err(|e| Self::mark_divergence(FedError::Attention(e), t))?;
        let n_users = T::from_double(self.users.len() as f64);
        let f = loss(&self.inst, &xw)
            .map_err(|e| Self::mark_divergence(FedError::Attention(e), t))?
            .total
            / n_users;
        if !f.finite() || f > T::from_double(DIVERGENCE_FACTOR) * self.f0 {
            return Err(FedError::Diverged { round: t });
        }

        self.x = xw;
        let gap = f - self.constants.f_star / n_users;
        let dist_sq = (self.x.as_vector() - self.constants.x_star.as_vector()).norm_squared();
        self.rows.push(TraceRow {
            round: t,
            f,
            gap,
            dist_sq,
            winner: winner as i64,
            eta: self.eta,
            alpha: self.alpha,
        });
        Ok(RoundRecord {
            round: t,
            winner,
            payload,
            applied,
        })
    }
}

/// Full run driven by a winner schedule; length of the returned trace is
/// global_rounds + 1.
pub fn run_training<T: Scalar>(
    inst: AttentionInstance<T>,
    cfg: &FedConfig<T>,
    schedule: WinnerSchedule,
) -> Result<TrainTrace<T>, FedError> {
    let mut trainer = Trainer::new(inst, cfg)?;
    for t in 1..=cfg.global_rounds {
        let winner = schedule.winner_for(t, trainer.num_users());
        trainer.step(winner)?;
    }
    Ok(trainer.trace())
}
