//! Cross-entropy training with Adam, one sample per step.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Adam, AdamConfig, AdamOutcome, NeighborIndex};
use crate::occupancy::{build_pyramid, OccupancyCode};
use crate::scalar::Scalar;
use crate::voxel::SparseGeometry;

use super::{ScaleInputs, ScaleLoss, TopParams};

/// One geometry prepared for repeated training passes: every coded scale
/// `d = 1..D-1` with its neighbor tables and target codes.
#[derive(Clone, Debug)]
pub struct TrainSample {
    pub points: usize,
    pub scales: Vec<(ScaleInputs, Vec<OccupancyCode>)>,
}

impl TrainSample {
    pub fn from_geometry(g: &SparseGeometry, kernel_size: usize) -> Result<Self> {
        let pyramid = build_pyramid(g)?;
        let mut scales = Vec::with_capacity(pyramid.layers.len().saturating_sub(1));
        let mut shared: Option<Arc<NeighborIndex>> = None;
        for d in 1..pyramid.layers.len() {
            let inputs = ScaleInputs::new(
                &pyramid.layers[d - 1],
                &pyramid.layers[d].parents,
                kernel_size,
                shared.take(),
            )?;
            shared = Some(inputs.child_index.clone());
            scales.push((inputs, pyramid.layers[d].codes.clone()));
        }
        Ok(Self {
            points: g.len(),
            scales,
        })
    }

    pub fn code_count(&self) -> usize {
        self.scales.iter().map(|(_, c)| c.len()).sum()
    }

    /// Cost of the sample when every code is coded with 8 raw bits.
    pub fn uniform_bits(&self) -> f64 {
        8.0 * self.code_count() as f64
    }

    pub fn loss<S: Scalar>(&self, params: &TopParams<S>) -> Result<ScaleLoss> {
        let mut total = ScaleLoss::default();
        for (inputs, codes) in &self.scales {
            total.accumulate(&params.scale_loss(inputs, codes)?);
        }
        Ok(total)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Held-out evaluation period in steps; 0 evaluates only at the end.
    pub eval_interval: usize,
    /// Weight of the single-stage head's loss (when the head exists).
    pub one_stage_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 100_000,
            adam: AdamConfig::default(),
            seed: 0,
            eval_interval: 1000,
            one_stage_weight: 1.0,
        }
    }
}

/// Progress report emitted every evaluation period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub step: usize,
    /// Mean two-stage training bits per point since the previous checkpoint.
    pub train_bpp: f64,
    pub heldout_bpp: Option<f64>,
    pub heldout_one_stage_bpp: Option<f64>,
    pub heldout_uniform_bpp: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainReport<S> {
    pub params: TopParams<S>,
    /// Two-stage bits per point of the sample used at every step.
    pub loss_curve: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub skipped_steps: u64,
}

/// Held-out code length in bits per point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub two_stage_bpp: f64,
    pub one_stage_bpp: Option<f64>,
    pub uniform_bpp: f64,
}

pub fn evaluate<S: Scalar>(params: &TopParams<S>, samples: &[TrainSample]) -> Result<EvalReport> {
    let mut loss = ScaleLoss::default();
    let mut points = 0usize;
    let mut uniform = 0.0;
    for s in samples {
        loss.accumulate(&s.loss(params)?);
        points += s.points;
        uniform += s.uniform_bits();
    }
    let points = points.max(1) as f64;
    Ok(EvalReport {
        two_stage_bpp: loss.two_stage_bits() / points,
        one_stage_bpp: params.head_one.as_ref().map(|_| loss.bits_one / points),
        uniform_bpp: uniform / points,
    })
}

/// Trains `params` for `config.steps` Adam steps; each step accumulates the
/// cross-entropy of every scale of one sample (teacher-forced first stage).
pub fn train<S: Scalar>(
    mut params: TopParams<S>,
    samples: &[TrainSample],
    heldout: &[TrainSample],
    config: &TrainConfig,
    mut on_checkpoint: impl FnMut(&Checkpoint),
) -> Result<TrainReport<S>> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut cursor = order.len();
    let mut adam = Adam::new(config.adam);
    let mut loss_curve = Vec::with_capacity(config.steps);
    let mut checkpoints = Vec::new();
    let mut window = (0.0f64, 0usize);

    for step in 1..=config.steps {
        if cursor == order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let sample = &samples[order[cursor]];
        cursor += 1;

        params.zero_grad();
        let mut loss = ScaleLoss::default();
        for (inputs, codes) in &sample.scales {
            loss.accumulate(&params.accumulate_gradients(
                inputs,
                codes,
                config.one_stage_weight,
            )?);
        }
        let bits = loss.two_stage_bits() + loss.bits_one;
        if !bits.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!("{loss:?}"),
            });
        }
        if adam.step(&mut params.tensors_mut()) == AdamOutcome::SkippedNonFinite {
            log_skip(step);
        }
        let bpp = loss.two_stage_bits() / sample.points.max(1) as f64;
        loss_curve.push(bpp);
        window.0 += bpp;
        window.1 += 1;

        let at_eval =
            (config.eval_interval > 0 && step % config.eval_interval == 0) || step == config.steps;
        if at_eval {
            let eval = if heldout.is_empty() {
                None
            } else {
                Some(evaluate(&params, heldout)?)
            };
            let cp = Checkpoint {
                step,
                train_bpp: window.0 / window.1.max(1) as f64,
                heldout_bpp: eval.map(|e| e.two_stage_bpp),
                heldout_one_stage_bpp: eval.and_then(|e| e.one_stage_bpp),
                heldout_uniform_bpp: eval.map(|e| e.uniform_bpp),
            };
            on_checkpoint(&cp);
            checkpoints.push(cp);
            window = (0.0, 0);
        }
    }

    if !params.is_finite() {
        return Err(Error::NonFiniteLoss {
            step: config.steps,
            detail: "parameters became non-finite".into(),
        });
    }
    Ok(TrainReport {
        params,
        loss_curve,
        checkpoints,
        skipped_steps: adam.skipped(),
    })
}

fn log_skip(step: usize) {
    eprintln!("warning: step {step} skipped, non-finite gradient");
}
