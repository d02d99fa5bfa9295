//! Teacher-forced forward pass with cached activations and its reverse pass.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{
    add_assign, cross_entropy, relu, relu_backward, softmax_cross_entropy_grad, softmax_rows,
    Matrix,
};
use crate::occupancy::OccupancyCode;
use crate::scalar::Scalar;

use super::{MlpHead, ScaleInputs, TopParams};

/// Code length of one scale under the model, in bits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScaleLoss {
    pub bits_s1: f64,
    pub bits_s2: f64,
    /// Zero when the single-stage head is absent or not evaluated.
    pub bits_one: f64,
    pub codes: usize,
}

impl ScaleLoss {
    pub fn two_stage_bits(&self) -> f64 {
        self.bits_s1 + self.bits_s2
    }

    pub fn accumulate(&mut self, other: &ScaleLoss) {
        self.bits_s1 += other.bits_s1;
        self.bits_s2 += other.bits_s2;
        self.bits_one += other.bits_one;
        self.codes += other.codes;
    }
}

struct HeadTrace<S> {
    pre: Matrix<S>,
    hidden: Matrix<S>,
    probs: Matrix<S>,
}

fn head_forward<S: Scalar>(head: &MlpHead<S>, x: &Matrix<S>) -> HeadTrace<S> {
    let pre = head.hidden.forward(x);
    let hidden = relu(&pre);
    let probs = softmax_rows(&head.output.forward(&hidden));
    HeadTrace { pre, hidden, probs }
}

fn head_backward<S: Scalar>(
    head: &mut MlpHead<S>,
    x: &Matrix<S>,
    trace: &HeadTrace<S>,
    targets: &[usize],
    scale: S,
) -> Matrix<S> {
    let g_logits = softmax_cross_entropy_grad(&trace.probs, targets, scale);
    let g_hidden = head.output.backward(&trace.hidden, &g_logits);
    let g_pre = relu_backward(&trace.pre, &g_hidden);
    head.hidden.backward(x, &g_pre)
}

struct Targets {
    s1: Vec<usize>,
    s2: Vec<usize>,
    one: Vec<usize>,
}

impl Targets {
    fn new(codes: &[OccupancyCode]) -> Self {
        Self {
            s1: codes.iter().map(|c| usize::from(c.high_nibble())).collect(),
            s2: codes.iter().map(|c| usize::from(c.low_nibble())).collect(),
            one: codes.iter().map(|c| usize::from(c.value()) - 1).collect(),
        }
    }
}

impl<S: Scalar> TopParams<S> {
    /// Code length of the true `codes` of one scale, forward only.
    pub fn scale_loss(&self, inputs: &ScaleInputs, codes: &[OccupancyCode]) -> Result<ScaleLoss> {
        let t = Targets::new(codes);
        let f = self.scale_features(inputs)?;
        let s1: Vec<u8> = codes.iter().map(|c| c.high_nibble()).collect();
        let mut loss = ScaleLoss {
            bits_s1: cross_entropy(&self.s1_probs(&f), &t.s1)?.bits,
            bits_s2: cross_entropy(&self.s2_probs(&f, &s1)?, &t.s2)?.bits,
            bits_one: 0.0,
            codes: codes.len(),
        };
        if self.head_one.is_some() {
            loss.bits_one = cross_entropy(&self.one_stage_probs(&f)?, &t.one)?.bits;
        }
        Ok(loss)
    }

    /// Forward pass with teacher-forced first-stage symbols, then the reverse
    /// pass. Gradients of the natural-log cross-entropy summed over every
    /// code are added to the `grad` buffers; the single-stage head's loss is
    /// weighted by `one_stage_weight` (ignored without that head).
    pub fn accumulate_gradients(
        &mut self,
        inputs: &ScaleInputs,
        codes: &[OccupancyCode],
        one_stage_weight: f64,
    ) -> Result<ScaleLoss> {
        let t = Targets::new(codes);

        let emb = self.code_embedding.forward(&inputs.parent_codes)?;
        let (parent, ext_trace) = self.extraction.forward_trace(&inputs.parent_index, emb);
        let mut replicated = parent.select_rows(&inputs.parent_of);
        add_assign(
            &mut replicated,
            &self.octant_embedding.forward(&inputs.octants)?,
        );
        let (features, tgt_trace) = self.target.forward_trace(&inputs.child_index, replicated);

        let h1 = head_forward(&self.head_s1, &features);
        let mut s2_in = self.s1_embedding.forward(&t.s1)?;
        add_assign(&mut s2_in, &features);
        let h2 = head_forward(&self.head_s2, &s2_in);
        let use_one = one_stage_weight > 0.0 && self.head_one.is_some();
        let h_one = match (&self.head_one, use_one) {
            (Some(head), true) => Some(head_forward(head, &features)),
            _ => None,
        };

        let mut loss = ScaleLoss {
            bits_s1: cross_entropy(&h1.probs, &t.s1)?.bits,
            bits_s2: cross_entropy(&h2.probs, &t.s2)?.bits,
            bits_one: 0.0,
            codes: codes.len(),
        };

        let mut g_features = head_backward(&mut self.head_s1, &features, &h1, &t.s1, S::one());
        let g_s2_in = head_backward(&mut self.head_s2, &s2_in, &h2, &t.s2, S::one());
        self.s1_embedding.backward(&t.s1, &g_s2_in);
        add_assign(&mut g_features, &g_s2_in);
        if let (Some(trace), Some(head)) = (&h_one, self.head_one.as_mut()) {
            loss.bits_one = cross_entropy(&trace.probs, &t.one)?.bits;
            let g = head_backward(head, &features, trace, &t.one, S::lit(one_stage_weight));
            add_assign(&mut g_features, &g);
        }

        let g_replicated = self
            .target
            .backward(&inputs.child_index, &tgt_trace, &g_features);
        self.octant_embedding
            .backward(&inputs.octants, &g_replicated);
        let mut g_parent = Matrix::zeros(parent.rows(), parent.cols());
        for (i, &j) in inputs.parent_of.iter().enumerate() {
            for (d, &s) in g_parent.row_mut(j).iter_mut().zip(g_replicated.row(i)) {
                *d += s;
            }
        }
        let g_emb = self
            .extraction
            .backward(&inputs.parent_index, &ext_trace, &g_parent);
        self.code_embedding.backward(&inputs.parent_codes, &g_emb);
        Ok(loss)
    }
}
