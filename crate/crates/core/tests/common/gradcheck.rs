//! Finite-difference checks of the hand-written backward passes in `f64`.
//!
//! Every check builds one random micro-instance (at most 8 voxels and 8
//! channels) and returns the worst per-tensor relative error, or a message
//! naming the first tensor that exceeds the tolerances.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use reno_core::nn::{
    relu, relu_backward, softmax_cross_entropy_grad, softmax_rows, Embedding, Linear, Matrix,
    NeighborIndex, ParamTensor, ResBlock, SparseConv,
};
use reno_core::top::TrainSample;
use reno_core::{SparseGeometry, TopConfig, TopParamsF64};

use super::{central_difference, max_abs_error, random_geometry, relative_error, rng};

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;
/// Per-element bound, catching a single wrong entry in a large tensor.
pub const ABS_TOLERANCE: f64 = 1e-7;

pub type Outcome = Result<f64, String>;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn randomize(t: &mut ParamTensor<f64>, rng: &mut ChaCha8Rng, scale: f64) {
    t.values
        .iter_mut()
        .for_each(|v| *v = rng.gen_range(-scale..scale));
}

/// `Σ upstream ⊙ out`, whose gradient w.r.t. `out` is `upstream`.
fn dot(upstream: &Matrix<f64>, out: &Matrix<f64>) -> f64 {
    upstream
        .as_slice()
        .iter()
        .zip(out.as_slice())
        .map(|(a, b)| a * b)
        .sum()
}

fn numeric_grad(values: &[f64], mut loss: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut v = values.to_vec();
    (0..v.len())
        .map(|i| {
            let x = v[i];
            let d = central_difference(
                |t| {
                    v[i] = t;
                    loss(&v)
                },
                x,
                STEP,
            );
            v[i] = x;
            d
        })
        .collect()
}

/// Folds one tensor comparison into the running worst error.
fn compare(worst: &mut f64, what: &str, analytic: &[f64], numeric: &[f64]) -> Result<(), String> {
    let rel = relative_error(analytic, numeric);
    let abs = max_abs_error(analytic, numeric);
    if rel > TOLERANCE || abs > ABS_TOLERANCE {
        return Err(format!(
            "{what}: relative error {rel:e}, elementwise {abs:e}"
        ));
    }
    *worst = worst.max(rel);
    Ok(())
}

fn micro(seed: u64) -> (ChaCha8Rng, SparseGeometry, usize, usize) {
    let mut r = rng(seed);
    let count = r.gen_range(1..=8);
    let g = random_geometry(&mut r, 2, count);
    let cin = r.gen_range(1..=8);
    let cout = r.gen_range(1..=8);
    (r, g, cin, cout)
}

pub fn linear(seed: u64) -> Outcome {
    let (mut r, g, cin, cout) = micro(seed);
    let n = g.len();
    let mut layer = Linear::<f64>::new("l", cin, cout);
    randomize(&mut layer.weight, &mut r, 1.0);
    randomize(&mut layer.bias, &mut r, 1.0);
    let x = random_matrix(&mut r, n, cin);
    let up = random_matrix(&mut r, n, cout);
    let mut worst = 0.0;

    let gx = layer.backward(&x, &up);
    let num = numeric_grad(x.as_slice(), |v| {
        dot(
            &up,
            &layer.forward(&Matrix::from_vec(n, cin, v.to_vec()).unwrap()),
        )
    });
    compare(&mut worst, "linear input", gx.as_slice(), &num)?;
    let probe = layer.clone();
    let num = numeric_grad(&probe.weight.values, |v| {
        let mut l = probe.clone();
        l.weight.values.copy_from_slice(v);
        dot(&up, &l.forward(&x))
    });
    compare(&mut worst, "linear weight", &layer.weight.grad, &num)?;
    let num = numeric_grad(&probe.bias.values, |v| {
        let mut l = probe.clone();
        l.bias.values.copy_from_slice(v);
        dot(&up, &l.forward(&x))
    });
    compare(&mut worst, "linear bias", &layer.bias.grad, &num)?;
    Ok(worst)
}

pub fn sparse_conv(seed: u64) -> Outcome {
    let (mut r, g, cin, cout) = micro(seed);
    let n = g.len();
    let index = NeighborIndex::build(&g, 3);
    let mut conv = SparseConv::<f64>::new("c", 3, cin, cout);
    randomize(&mut conv.weight, &mut r, 1.0);
    randomize(&mut conv.bias, &mut r, 1.0);
    let x = random_matrix(&mut r, n, cin);
    let up = random_matrix(&mut r, n, cout);
    let mut worst = 0.0;

    let gx = conv.backward(&index, &x, &up);
    let num = numeric_grad(x.as_slice(), |v| {
        dot(
            &up,
            &conv.forward(&index, &Matrix::from_vec(n, cin, v.to_vec()).unwrap()),
        )
    });
    compare(&mut worst, "conv input", gx.as_slice(), &num)?;
    let probe = conv.clone();
    let num = numeric_grad(&probe.weight.values, |v| {
        let mut c = probe.clone();
        c.weight.values.copy_from_slice(v);
        dot(&up, &c.forward(&index, &x))
    });
    compare(&mut worst, "conv weight", &conv.weight.grad, &num)?;
    let num = numeric_grad(&probe.bias.values, |v| {
        let mut c = probe.clone();
        c.bias.values.copy_from_slice(v);
        dot(&up, &c.forward(&index, &x))
    });
    compare(&mut worst, "conv bias", &conv.bias.grad, &num)?;
    Ok(worst)
}

pub fn resblock(seed: u64) -> Outcome {
    let (mut r, g, c, _) = micro(seed);
    let n = g.len();
    let index = NeighborIndex::build(&g, 3);
    let mut block = ResBlock::<f64>::new("r", 3, c);
    for t in block.params_mut() {
        randomize(t, &mut r, 0.8);
    }
    let x = random_matrix(&mut r, n, c);
    let up = random_matrix(&mut r, n, c);
    let mut worst = 0.0;

    let (_, trace) = block.forward_trace(&index, x.clone());
    let gx = block.backward(&index, &trace, &up);
    let num = numeric_grad(x.as_slice(), |v| {
        dot(
            &up,
            &block.forward(&index, Matrix::from_vec(n, c, v.to_vec()).unwrap()),
        )
    });
    compare(&mut worst, "resblock input", gx.as_slice(), &num)?;
    let probe = block.clone();
    for k in 0..4 {
        let num = numeric_grad(&probe.params()[k].values, |v| {
            let mut b = probe.clone();
            b.params_mut()[k].values.copy_from_slice(v);
            dot(&up, &b.forward(&index, x.clone()))
        });
        compare(
            &mut worst,
            &block.params()[k].name,
            &block.params()[k].grad,
            &num,
        )?;
    }
    Ok(worst)
}

pub fn embedding(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (vocab, dim) = (r.gen_range(1..=10), r.gen_range(1..=8));
    let n = r.gen_range(1..=8);
    let indices: Vec<usize> = (0..n).map(|_| r.gen_range(0..vocab)).collect();
    let mut emb = Embedding::<f64>::new("e", vocab, dim);
    randomize(&mut emb.table, &mut r, 1.0);
    let up = random_matrix(&mut r, n, dim);
    let mut worst = 0.0;

    emb.backward(&indices, &up);
    let probe = emb.clone();
    let num = numeric_grad(&probe.table.values, |v| {
        let mut e = probe.clone();
        e.table.values.copy_from_slice(v);
        dot(&up, &e.forward(&indices).unwrap())
    });
    compare(&mut worst, "embedding table", &emb.table.grad, &num)?;
    Ok(worst)
}

pub fn relu_layer(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let (n, c) = (r.gen_range(1..=8), r.gen_range(1..=8));
    // Inputs stay clear of the kink by more than the stencil width.
    let data = (0..n * c)
        .map(|_| {
            let v: f64 = r.gen_range(0.01..1.0);
            if r.gen_bool(0.5) {
                v
            } else {
                -v
            }
        })
        .collect();
    let x = Matrix::from_vec(n, c, data).unwrap();
    let up = random_matrix(&mut r, n, c);
    let mut worst = 0.0;
    let g = relu_backward(&x, &up);
    let num = numeric_grad(x.as_slice(), |v| {
        dot(&up, &relu(&Matrix::from_vec(n, c, v.to_vec()).unwrap()))
    });
    compare(&mut worst, "relu", g.as_slice(), &num)?;
    Ok(worst)
}

pub fn softmax_cross_entropy(seed: u64) -> Outcome {
    let mut r = rng(seed);
    let n = r.gen_range(1..=8);
    let k = [16, 255, r.gen_range(2..=20)][r.gen_range(0..3)];
    let logits =
        Matrix::from_vec(n, k, (0..n * k).map(|_| r.gen_range(-3.0..3.0)).collect()).unwrap();
    let targets: Vec<usize> = (0..n).map(|_| r.gen_range(0..k)).collect();
    let scale = r.gen_range(0.5..2.0);
    let nats = |v: &[f64]| {
        let p = softmax_rows(&Matrix::from_vec(n, k, v.to_vec()).unwrap());
        -scale
            * targets
                .iter()
                .enumerate()
                .map(|(i, &t)| p.row(i)[t].ln())
                .sum::<f64>()
    };
    let mut worst = 0.0;
    let g = softmax_cross_entropy_grad(&softmax_rows(&logits), &targets, scale);
    let num = numeric_grad(logits.as_slice(), nats);
    compare(&mut worst, "softmax cross-entropy", g.as_slice(), &num)?;
    Ok(worst)
}

/// Random predictor and a depth 2–3 geometry of at most 8 voxels. Even
/// seeds include the single-stage head.
pub fn predictor_instance(seed: u64) -> (TopParamsF64, TrainSample, f64) {
    let mut r = rng(seed);
    let depth = r.gen_range(2..=3);
    let count = r.gen_range(2..=8);
    let g = random_geometry(&mut r, depth, count);
    let one_stage = seed.is_multiple_of(2);
    let config = TopConfig {
        channels: r.gen_range(2..=6),
        kernel_size: 3,
        one_stage_head: one_stage,
    };
    let mut params = TopParamsF64::init(config, seed);
    // Embeddings start tiny; widen them so their gradients are well above noise.
    for t in [
        &mut params.code_embedding.table,
        &mut params.octant_embedding.table,
        &mut params.s1_embedding.table,
    ] {
        randomize(t, &mut r, 0.5);
    }
    let weight = if one_stage { 0.7 } else { 0.0 };
    (params, TrainSample::from_geometry(&g, 3).unwrap(), weight)
}

fn total_nats(params: &TopParamsF64, sample: &TrainSample, weight: f64) -> f64 {
    let l = sample.loss(params).unwrap();
    (l.bits_s1 + l.bits_s2 + weight * l.bits_one) * std::f64::consts::LN_2
}

/// Whole-model check over every coded scale of one instance. `None` when the
/// instance has no coded scale.
pub fn predictor(seed: u64) -> Option<Outcome> {
    let (mut params, sample, weight) = predictor_instance(seed);
    if sample.scales.is_empty() {
        return None;
    }
    params.zero_grad();
    for (inputs, codes) in &sample.scales {
        if let Err(e) = params.accumulate_gradients(inputs, codes, weight) {
            return Some(Err(e.to_string()));
        }
    }
    let probe = params.clone();
    let mut worst = 0.0;
    let mut octant_grad = 0.0f64;
    let mut parent_grad = 0.0f64;
    for (k, tensor) in params.tensors().into_iter().enumerate() {
        let num = numeric_grad(&probe.tensors()[k].values, |v| {
            let mut p = probe.clone();
            p.tensors_mut()[k].values.copy_from_slice(v);
            total_nats(&p, &sample, weight)
        });
        if let Err(e) = compare(&mut worst, &tensor.name, &tensor.grad, &num) {
            return Some(Err(e));
        }
        let mass: f64 = num.iter().map(|v| v.abs()).sum();
        if tensor.name.starts_with("octant_embedding") {
            octant_grad = mass;
        }
        if tensor.name.starts_with("extraction") {
            parent_grad += mass;
        }
    }
    if octant_grad == 0.0 || parent_grad == 0.0 {
        return Some(Err(
            "no gradient reaches the octant table or the parent features".into(),
        ));
    }
    Some(Ok(worst))
}
