use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::index::NeighborIndex;
use super::tensor::{Matrix, ParamTensor, SparseFeatureMap};
use super::ROW_BLOCK;

#[inline(always)]
fn axpy_n<S: Scalar, const N: usize>(y: &mut [S; N], a: S, x: &[S; N]) {
    for k in 0..N {
        y[k] += a * x[k];
    }
}

/// `y += a x`, unrolled for the common widths.
#[inline(always)]
fn axpy<S: Scalar>(y: &mut [S], a: S, x: &[S]) {
    match y.len() {
        32 => axpy_n::<S, 32>(y.try_into().unwrap(), a, x[..32].try_into().unwrap()),
        16 => axpy_n::<S, 16>(y.try_into().unwrap(), a, x[..16].try_into().unwrap()),
        _ => {
            for (y, &x) in y.iter_mut().zip(x) {
                *y += a * x;
            }
        }
    }
}

/// Accumulator for one output row.
trait RowAcc<S> {
    fn axpy(&mut self, a: S, x: &[S]);
    /// `y += (a0 x0 + a1 x1)`.
    fn axpy2(&mut self, a0: S, x0: &[S], a1: S, x1: &[S]);
}

#[inline(always)]
fn axpy2_n<S: Scalar, const N: usize>(y: &mut [S; N], a0: S, x0: &[S; N], a1: S, x1: &[S; N]) {
    for k in 0..N {
        y[k] += a0 * x0[k] + a1 * x1[k];
    }
}

/// Register-resident accumulator of a fixed width.
struct FixedAcc<S, const N: usize>([S; N]);

impl<S: Scalar, const N: usize> RowAcc<S> for FixedAcc<S, N> {
    #[inline(always)]
    fn axpy(&mut self, a: S, x: &[S]) {
        axpy_n(&mut self.0, a, x[..N].try_into().unwrap());
    }

    #[inline(always)]
    fn axpy2(&mut self, a0: S, x0: &[S], a1: S, x1: &[S]) {
        axpy2_n(
            &mut self.0,
            a0,
            x0[..N].try_into().unwrap(),
            a1,
            x1[..N].try_into().unwrap(),
        );
    }
}

struct SliceAcc<'a, S>(&'a mut [S]);

impl<S: Scalar> RowAcc<S> for SliceAcc<'_, S> {
    #[inline(always)]
    fn axpy(&mut self, a: S, x: &[S]) {
        axpy(self.0, a, x);
    }

    #[inline(always)]
    fn axpy2(&mut self, a0: S, x0: &[S], a1: S, x1: &[S]) {
        for ((y, &u), &v) in self.0.iter_mut().zip(x0).zip(x1) {
            *y += a0 * u + a1 * v;
        }
    }
}

/// Body of a row-wise accumulation `out[i] = init + Σ a_k x_k`.
trait RowKernel<S>: Sync {
    fn row<A: RowAcc<S>>(&self, i: usize, acc: &mut A);
}

/// Fills every row of `out` from `init` (or zero) and then `kernel`. Both
/// accumulator kinds perform the same operations in the same order.
fn map_rows<S: Scalar, K: RowKernel<S>>(out: &mut Matrix<S>, init: Option<&[S]>, kernel: &K) {
    fn fixed<S: Scalar, K: RowKernel<S>, const N: usize>(
        out: &mut Matrix<S>,
        init: Option<&[S]>,
        kernel: &K,
    ) {
        for_each_row(out, |i, orow| {
            let mut acc =
                FixedAcc::<S, N>(std::array::from_fn(|k| init.map_or(S::zero(), |b| b[k])));
            kernel.row(i, &mut acc);
            orow.copy_from_slice(&acc.0);
        });
    }
    match out.cols() {
        16 => fixed::<S, K, 16>(out, init, kernel),
        32 => fixed::<S, K, 32>(out, init, kernel),
        _ => for_each_row(out, |i, orow| {
            if let Some(b) = init {
                orow.copy_from_slice(b);
            }
            kernel.row(i, &mut SliceAcc(orow));
        }),
    }
}

/// `acc += Σ_c a[c] · w[c]` over consecutive rows `w[c]` of width `cout`,
/// two channels at a time; pairs that are both zero are skipped.
#[inline(always)]
fn accumulate_pairs<S: Scalar, A: RowAcc<S>>(acc: &mut A, a: &[S], w: &[S], cout: usize) {
    let pairs = a.len() / 2;
    for p in 0..pairs {
        let (a0, a1) = (a[2 * p], a[2 * p + 1]);
        if a0 != S::zero() || a1 != S::zero() {
            let w0 = &w[2 * p * cout..(2 * p + 2) * cout];
            acc.axpy2(a0, &w0[..cout], a1, &w0[cout..]);
        }
    }
    if a.len() % 2 == 1 {
        let c = a.len() - 1;
        if a[c] != S::zero() {
            acc.axpy(a[c], &w[c * cout..(c + 1) * cout]);
        }
    }
}

/// `out[i] = Σ_c x[i][c] · w[c]` over the rows `w[c]` of width `cout`.
struct DenseRows<'a, S> {
    x: &'a Matrix<S>,
    w: &'a [S],
    cout: usize,
}

impl<S: Scalar> RowKernel<S> for DenseRows<'_, S> {
    #[inline(always)]
    fn row<A: RowAcc<S>>(&self, i: usize, acc: &mut A) {
        accumulate_pairs(acc, self.x.row(i), self.w, self.cout);
    }
}

/// Sparse convolution gather: `out[i] = Σ_o Σ_c x[nbr(i, o)][c] · w[o][c]`,
/// where `mirror` selects the neighbor through the opposite tap.
struct ConvRows<'a, S> {
    index: &'a NeighborIndex,
    x: &'a Matrix<S>,
    w: &'a [S],
    rows_per_tap: usize,
    cout: usize,
    mirror: bool,
}

impl<S: Scalar> RowKernel<S> for ConvRows<'_, S> {
    #[inline(always)]
    fn row<A: RowAcc<S>>(&self, i: usize, acc: &mut A) {
        let nbrs = self.index.neighbors(i);
        let taps = nbrs.len();
        let slab = self.rows_per_tap * self.cout;
        for o in 0..taps {
            let n = if self.mirror {
                nbrs[taps - 1 - o]
            } else {
                nbrs[o]
            };
            if n == NeighborIndex::NONE {
                continue;
            }
            let wo = &self.w[o * slab..(o + 1) * slab];
            accumulate_pairs(acc, self.x.row(n as usize), wo, self.cout);
        }
    }
}

/// Runs `f` over fixed row blocks in parallel and sums the per-block partial
/// accumulators in block order.
fn reduce_rows<S, F>(rows: usize, len: usize, f: F) -> Vec<S>
where
    S: Scalar,
    F: Fn(Range<usize>, &mut [S]) + Sync,
{
    let blocks = rows.div_ceil(ROW_BLOCK);
    let partials: Vec<Vec<S>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = vec![S::zero(); len];
            f(b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(rows), &mut acc);
            acc
        })
        .collect();
    let mut total = vec![S::zero(); len];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Applies `f(row, out_row)` to every output row in parallel.
fn for_each_row<S, F>(out: &mut Matrix<S>, f: F)
where
    S: Scalar,
    F: Fn(usize, &mut [S]) + Sync,
{
    let cols = out.cols();
    if cols == 0 {
        return;
    }
    out.as_mut_slice()
        .par_chunks_mut(cols * ROW_BLOCK)
        .enumerate()
        .for_each(|(block, chunk)| {
            for (r, row) in chunk.chunks_mut(cols).enumerate() {
                f(block * ROW_BLOCK + r, row);
            }
        });
}

/// Transposes each `[rows, cols]` slab of `w` into `[cols, rows]`.
fn transpose_slabs<S: Scalar>(w: &[S], slabs: usize, rows: usize, cols: usize) -> Vec<S> {
    let mut t = vec![S::zero(); w.len()];
    for s in 0..slabs {
        let src = &w[s * rows * cols..(s + 1) * rows * cols];
        let dst = &mut t[s * rows * cols..(s + 1) * rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                dst[c * rows + r] = src[r * cols + c];
            }
        }
    }
    t
}

fn add_into<S: Scalar>(dst: &mut [S], src: &[S]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

/// Lookup table mapping discrete symbols to learned vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding<S> {
    pub table: ParamTensor<S>,
}

impl<S: Scalar> Embedding<S> {
    pub fn new(name: &str, vocab: usize, dim: usize) -> Self {
        Self {
            table: ParamTensor::zeros(format!("{name}.table"), &[vocab, dim]),
        }
    }

    pub fn vocab(&self) -> usize {
        self.table.shape[0]
    }

    pub fn dim(&self) -> usize {
        self.table.shape[1]
    }

    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        self.table.fill_normal(0.02, rng);
    }

    pub fn forward(&self, indices: &[usize]) -> Result<Matrix<S>> {
        let (vocab, dim) = (self.vocab(), self.dim());
        let mut out = Matrix::zeros(indices.len(), dim);
        for (i, &idx) in indices.iter().enumerate() {
            if idx >= vocab {
                return Err(Error::IndexError {
                    index: idx,
                    len: vocab,
                });
            }
            out.row_mut(i)
                .copy_from_slice(&self.table.values[idx * dim..(idx + 1) * dim]);
        }
        Ok(out)
    }

    /// Scatters `grad_out` rows additively into the selected table rows.
    pub fn backward(&mut self, indices: &[usize], grad_out: &Matrix<S>) {
        let dim = self.dim();
        for (i, &idx) in indices.iter().enumerate() {
            add_into(
                &mut self.table.grad[idx * dim..(idx + 1) * dim],
                grad_out.row(i),
            );
        }
    }
}

/// Affine map `y = x W + b` with `W` stored `[in, out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<S> {
    pub weight: ParamTensor<S>,
    pub bias: ParamTensor<S>,
}

impl<S: Scalar> Linear<S> {
    pub fn new(name: &str, cin: usize, cout: usize) -> Self {
        Self {
            weight: ParamTensor::zeros(format!("{name}.weight"), &[cin, cout]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[cout]),
        }
    }

    pub fn cin(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn cout(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let bound = (1.0 / self.cin() as f64).sqrt();
        self.weight.fill_uniform(bound, rng);
        self.bias.fill_uniform(bound, rng);
    }

    pub fn forward(&self, x: &Matrix<S>) -> Matrix<S> {
        let cout = self.cout();
        let w = &self.weight.values;
        let mut out = Matrix::zeros(x.rows(), cout);
        map_rows(&mut out, Some(&self.bias.values), &DenseRows { x, w, cout });
        out
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: &Matrix<S>, grad_out: &Matrix<S>) -> Matrix<S> {
        let (cin, cout) = (self.cin(), self.cout());
        let wt = transpose_slabs(&self.weight.values, 1, cin, cout);
        let mut gx = Matrix::zeros(x.rows(), cin);
        map_rows(
            &mut gx,
            None,
            &DenseRows {
                x: grad_out,
                w: &wt,
                cout: cin,
            },
        );
        let gw = reduce_rows(x.rows(), cin * cout, |rows, acc| {
            for i in rows {
                let g = grad_out.row(i);
                for (ci, &a) in x.row(i).iter().enumerate() {
                    if a != S::zero() {
                        axpy(&mut acc[ci * cout..(ci + 1) * cout], a, g);
                    }
                }
            }
        });
        add_into(&mut self.weight.grad, &gw);
        let gb = reduce_rows(x.rows(), cout, |rows, acc| {
            for i in rows {
                add_into(acc, grad_out.row(i));
            }
        });
        add_into(&mut self.bias.grad, &gb);
        gx
    }
}

/// Submanifold sparse convolution: stride 1, outputs on the input geometry.
///
/// Weights are stored `[taps, in, out]` with taps in [`kernel_offsets`]
/// order. Each output row accumulates bias first, then taps in order, then
/// input channels in order.
///
/// [`kernel_offsets`]: super::kernel_offsets
#[derive(Clone, Debug, PartialEq)]
pub struct SparseConv<S> {
    pub weight: ParamTensor<S>,
    pub bias: ParamTensor<S>,
}

impl<S: Scalar> SparseConv<S> {
    pub fn new(name: &str, kernel_size: usize, cin: usize, cout: usize) -> Self {
        Self {
            weight: ParamTensor::zeros(format!("{name}.weight"), &[kernel_size.pow(3), cin, cout]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[cout]),
        }
    }

    pub fn taps(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn cin(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn cout(&self) -> usize {
        self.weight.shape[2]
    }

    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        let bound = (1.0 / (self.taps() * self.cin()) as f64).sqrt();
        self.weight.fill_uniform(bound, rng);
        self.bias.fill_uniform(bound, rng);
    }

    pub fn forward(&self, index: &NeighborIndex, x: &Matrix<S>) -> Matrix<S> {
        debug_assert_eq!(index.volume(), self.taps());
        debug_assert_eq!(index.rows(), x.rows());
        let (cin, cout) = (self.cin(), self.cout());
        let mut out = Matrix::zeros(x.rows(), cout);
        let kernel = ConvRows {
            index,
            x,
            w: &self.weight.values,
            rows_per_tap: cin,
            cout,
            mirror: false,
        };
        map_rows(&mut out, Some(&self.bias.values), &kernel);
        out
    }

    /// Accumulates parameter gradients and returns the input gradient.
    ///
    /// The input gradient is gathered per input row through the mirrored tap,
    /// which keeps it deterministic without atomics.
    pub fn backward(
        &mut self,
        index: &NeighborIndex,
        x: &Matrix<S>,
        grad_out: &Matrix<S>,
    ) -> Matrix<S> {
        let (taps, cin, cout) = (self.taps(), self.cin(), self.cout());
        let slab = cin * cout;
        let wt = transpose_slabs(&self.weight.values, taps, cin, cout);
        let mut gx = Matrix::zeros(x.rows(), cin);
        let kernel = ConvRows {
            index,
            x: grad_out,
            w: &wt,
            rows_per_tap: cout,
            cout: cin,
            mirror: true,
        };
        map_rows(&mut gx, None, &kernel);
        let gw = reduce_rows(x.rows(), taps * slab, |rows, acc| {
            for i in rows {
                let g = grad_out.row(i);
                for (o, &n) in index.neighbors(i).iter().enumerate() {
                    if n == NeighborIndex::NONE {
                        continue;
                    }
                    let acc_o = &mut acc[o * slab..(o + 1) * slab];
                    for (ci, &a) in x.row(n as usize).iter().enumerate() {
                        if a != S::zero() {
                            axpy(&mut acc_o[ci * cout..(ci + 1) * cout], a, g);
                        }
                    }
                }
            }
        });
        add_into(&mut self.weight.grad, &gw);
        let gb = reduce_rows(x.rows(), cout, |rows, acc| {
            for i in rows {
                add_into(acc, grad_out.row(i));
            }
        });
        add_into(&mut self.bias.grad, &gb);
        gx
    }
}

/// Convolves a feature map with `[taps, in, out]` weights on its own geometry.
pub fn sparse_conv3<S: Scalar>(
    input: &SparseFeatureMap<S>,
    weights: &ParamTensor<S>,
    bias: &ParamTensor<S>,
) -> Result<SparseFeatureMap<S>> {
    if weights.shape.len() != 3
        || weights.shape[1] != input.features.cols()
        || bias.shape != [weights.shape[2]]
    {
        return Err(Error::Shape(format!(
            "conv weights {:?} / bias {:?} for {} input channels",
            weights.shape,
            bias.shape,
            input.features.cols()
        )));
    }
    let k = (weights.shape[0] as f64).cbrt().round() as usize;
    if k.pow(3) != weights.shape[0] || k.is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "{} taps is not an odd cube",
            weights.shape[0]
        )));
    }
    let conv = SparseConv {
        weight: weights.clone(),
        bias: bias.clone(),
    };
    let index = NeighborIndex::build(&input.geometry, k);
    let features = conv.forward(&index, &input.features);
    SparseFeatureMap::new(input.geometry.clone(), features)
}

pub fn relu<S: Scalar>(x: &Matrix<S>) -> Matrix<S> {
    let mut out = x.clone();
    out.as_mut_slice()
        .iter_mut()
        .for_each(|v| *v = if *v > S::zero() { *v } else { S::zero() });
    out
}

/// Gradient of relu given its pre-activation input.
pub fn relu_backward<S: Scalar>(pre: &Matrix<S>, grad_out: &Matrix<S>) -> Matrix<S> {
    let mut g = grad_out.clone();
    for (g, &p) in g.as_mut_slice().iter_mut().zip(pre.as_slice()) {
        if p <= S::zero() {
            *g = S::zero();
        }
    }
    g
}

pub fn add_assign<S: Scalar>(dst: &mut Matrix<S>, src: &Matrix<S>) {
    debug_assert_eq!((dst.rows(), dst.cols()), (src.rows(), src.cols()));
    add_into(dst.as_mut_slice(), src.as_slice());
}

/// `x + conv2(relu(conv1(x)))` on a single geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ResBlock<S> {
    pub conv1: SparseConv<S>,
    pub conv2: SparseConv<S>,
}

/// Activations kept by [`ResBlock::forward_trace`] for the backward pass.
#[derive(Clone, Debug)]
pub struct ResBlockTrace<S> {
    input: Matrix<S>,
    pre: Matrix<S>,
    hidden: Matrix<S>,
}

impl<S: Scalar> ResBlock<S> {
    pub fn new(name: &str, kernel_size: usize, channels: usize) -> Self {
        Self {
            conv1: SparseConv::new(&format!("{name}.conv1"), kernel_size, channels, channels),
            conv2: SparseConv::new(&format!("{name}.conv2"), kernel_size, channels, channels),
        }
    }

    pub fn init<R: Rng>(&mut self, rng: &mut R) {
        self.conv1.init(rng);
        self.conv2.init(rng);
    }

    pub fn forward(&self, index: &NeighborIndex, x: Matrix<S>) -> Matrix<S> {
        let h = relu(&self.conv1.forward(index, &x));
        let mut out = self.conv2.forward(index, &h);
        add_assign(&mut out, &x);
        out
    }

    pub fn forward_trace(
        &self,
        index: &NeighborIndex,
        x: Matrix<S>,
    ) -> (Matrix<S>, ResBlockTrace<S>) {
        let pre = self.conv1.forward(index, &x);
        let hidden = relu(&pre);
        let mut out = self.conv2.forward(index, &hidden);
        add_assign(&mut out, &x);
        (
            out,
            ResBlockTrace {
                input: x,
                pre,
                hidden,
            },
        )
    }

    pub fn backward(
        &mut self,
        index: &NeighborIndex,
        trace: &ResBlockTrace<S>,
        grad_out: &Matrix<S>,
    ) -> Matrix<S> {
        let gh = self.conv2.backward(index, &trace.hidden, grad_out);
        let gpre = relu_backward(&trace.pre, &gh);
        let mut gx = self.conv1.backward(index, &trace.input, &gpre);
        add_assign(&mut gx, grad_out);
        gx
    }

    pub fn params(&self) -> [&ParamTensor<S>; 4] {
        [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.conv2.weight,
            &self.conv2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor<S>; 4] {
        [
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel::{Coord, SparseGeometry};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn embedding_zero_table_and_range_check() {
        let e = Embedding::<f64>::new("e", 4, 3);
        let out = e.forward(&[0, 3, 1]).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
        assert!(matches!(
            e.forward(&[4]),
            Err(Error::IndexError { index: 4, len: 4 })
        ));
    }

    #[test]
    fn embedding_gradient_lands_in_selected_row() {
        let mut e = Embedding::<f64>::new("e", 5, 2);
        let g = Matrix::from_vec(1, 2, vec![1.0, 0.0]).unwrap();
        e.backward(&[3], &g);
        for (i, &v) in e.table.grad.iter().enumerate() {
            assert_eq!(v, if i == 6 { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn conv_identity_kernel() {
        let g = SparseGeometry::from_unsorted(
            3,
            vec![
                Coord::new(1, 2, 3),
                Coord::new(2, 2, 3),
                Coord::new(5, 5, 5),
            ],
        )
        .unwrap();
        let mut conv = SparseConv::<f64>::new("c", 3, 2, 2);
        conv.weight.values[13 * 4] = 1.0;
        conv.weight.values[13 * 4 + 3] = 1.0;
        let x = Matrix::from_vec(3, 2, vec![1.0, -2.0, 3.5, 0.25, -1.0, 9.0]).unwrap();
        let idx = NeighborIndex::build(&g, 3);
        assert_eq!(conv.forward(&idx, &x), x);
    }

    #[test]
    fn conv_isolated_voxel_sees_only_center() {
        let g = SparseGeometry::from_unsorted(4, vec![Coord::new(7, 7, 7)]).unwrap();
        let mut conv = SparseConv::<f64>::new("c", 3, 2, 3);
        conv.weight.values.iter_mut().for_each(|v| *v = 1.0);
        let x = Matrix::from_vec(1, 2, vec![2.0, 3.0]).unwrap();
        let out = conv.forward(&NeighborIndex::build(&g, 3), &x);
        assert_eq!(out.as_slice(), &[5.0, 5.0, 5.0]);
    }

    #[test]
    fn relu_examples() {
        let x = Matrix::from_vec(1, 3, vec![-1.5, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).as_slice(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn linear_backward_matches_manual() {
        let mut lin = Linear::<f64>::new("l", 2, 1);
        lin.init(&mut rng());
        let x = Matrix::from_vec(2, 2, vec![1.0, 2.0, -3.0, 0.5]).unwrap();
        let g = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let gx = lin.backward(&x, &g);
        let w = lin.weight.values.clone();
        assert_eq!(gx.as_slice(), &[w[0], w[1], 2.0 * w[0], 2.0 * w[1]]);
        assert_eq!(lin.weight.grad, vec![1.0 - 6.0, 2.0 + 1.0]);
        assert_eq!(lin.bias.grad, vec![3.0]);
    }

    #[test]
    fn sparse_conv3_validates_shapes() {
        let g = SparseGeometry::from_unsorted(2, vec![Coord::new(0, 0, 0)]).unwrap();
        let fm = SparseFeatureMap::new(g, Matrix::<f64>::zeros(1, 2)).unwrap();
        let w = ParamTensor::zeros("w", &[27, 3, 2]);
        let b = ParamTensor::zeros("b", &[2]);
        assert!(sparse_conv3(&fm, &w, &b).is_err());
        let w = ParamTensor::zeros("w", &[8, 2, 2]);
        assert!(sparse_conv3(&fm, &w, &b).is_err());
    }
}
