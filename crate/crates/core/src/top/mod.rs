//! Target occupancy predictor: cross-scale context features and the
//! probability heads for occupancy codes.
//!
//! For scale `d` the model sees the parent voxels `C^{d-1}` with their codes
//! `O^{d-1}` and the child voxels `C^d`, and predicts a distribution over the
//! code of every child. Features flow
//!
//! ```text
//! Emb(code) -> ResBlock on parents -> replicate to children + Emb(octant)
//!           -> ResBlock on children -> F
//! p(S1)      = softmax(MLP1(F))
//! p(S2 | S1) = softmax(MLP2(F + Emb(S1)))
//! ```
//!
//! where `S1`/`S2` are the high/low nibbles of the 8-bit code. A 255-way
//! single-stage head on `F` is available as an alternative.

mod backward;
mod train;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::params_io::{self, StoredTensor};
use crate::nn::{
    add_assign, relu, softmax_rows, Embedding, Linear, Matrix, NeighborIndex, ParamTensor,
    ResBlock, SparseFeatureMap,
};
use crate::occupancy::{OccupancyCode, ScaleLayer};
use crate::scalar::Scalar;
use crate::voxel::SparseGeometry;

pub use backward::ScaleLoss;
pub use train::{evaluate, train, Checkpoint, EvalReport, TrainConfig, TrainReport, TrainSample};

/// Classes of the single-stage head: codes 1..=255 map to classes 0..=254.
pub const ONE_STAGE_CLASSES: usize = 255;
/// Classes of each two-stage head.
pub const NIBBLE_CLASSES: usize = 16;

/// Architecture hyper-parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopConfig {
    pub channels: usize,
    pub kernel_size: usize,
    /// Whether the 255-way single-stage head is present.
    pub one_stage_head: bool,
}

impl Default for TopConfig {
    fn default() -> Self {
        Self {
            channels: 32,
            kernel_size: 3,
            one_stage_head: true,
        }
    }
}

/// Two-layer perceptron `Linear -> ReLU -> Linear`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpHead<S> {
    pub hidden: Linear<S>,
    pub output: Linear<S>,
}

impl<S: Scalar> MlpHead<S> {
    fn new(name: &str, channels: usize, classes: usize) -> Self {
        Self {
            hidden: Linear::new(&format!("{name}.hidden"), channels, channels),
            output: Linear::new(&format!("{name}.output"), channels, classes),
        }
    }

    pub fn forward(&self, x: &Matrix<S>) -> Matrix<S> {
        self.output.forward(&relu(&self.hidden.forward(x)))
    }

    fn params(&self) -> [&ParamTensor<S>; 4] {
        [
            &self.hidden.weight,
            &self.hidden.bias,
            &self.output.weight,
            &self.output.bias,
        ]
    }

    fn params_mut(&mut self) -> [&mut ParamTensor<S>; 4] {
        [
            &mut self.hidden.weight,
            &mut self.hidden.bias,
            &mut self.output.weight,
            &mut self.output.bias,
        ]
    }
}

/// All learnable parameters of the predictor. Shared across scales.
#[derive(Clone, Debug, PartialEq)]
pub struct TopParams<S> {
    pub config: TopConfig,
    pub code_embedding: Embedding<S>,
    pub octant_embedding: Embedding<S>,
    pub s1_embedding: Embedding<S>,
    pub extraction: ResBlock<S>,
    pub target: ResBlock<S>,
    pub head_s1: MlpHead<S>,
    pub head_s2: MlpHead<S>,
    pub head_one: Option<MlpHead<S>>,
}

/// Serializable summary of a parameter set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub channels: usize,
    pub kernel_size: usize,
    pub one_stage_head: bool,
    pub parameter_count: usize,
    /// Bytes of raw `f32` parameter values.
    pub parameter_bytes: usize,
    /// Size of the serialized parameter file.
    pub file_bytes: usize,
    pub model_id: String,
}

impl<S: Scalar> TopParams<S> {
    /// All-zero parameters: every head predicts a uniform distribution.
    pub fn zeros(config: TopConfig) -> Self {
        let (c, k) = (config.channels, config.kernel_size);
        assert!(
            c > 0 && k % 2 == 1,
            "invalid model configuration {config:?}"
        );
        Self {
            config,
            code_embedding: Embedding::new("code_embedding", 256, c),
            octant_embedding: Embedding::new("octant_embedding", 8, c),
            s1_embedding: Embedding::new("s1_embedding", NIBBLE_CLASSES, c),
            extraction: ResBlock::new("extraction", k, c),
            target: ResBlock::new("target", k, c),
            head_s1: MlpHead::new("head_s1", c, NIBBLE_CLASSES),
            head_s2: MlpHead::new("head_s2", c, NIBBLE_CLASSES),
            head_one: config
                .one_stage_head
                .then(|| MlpHead::new("head_one", c, ONE_STAGE_CLASSES)),
        }
    }

    /// Seeded initialization: `U(±sqrt(1/fan_in))` for linear and conv
    /// layers, `N(0, 0.02)` for embeddings.
    pub fn init(config: TopConfig, seed: u64) -> Self {
        let mut p = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        p.code_embedding.init(&mut rng);
        p.octant_embedding.init(&mut rng);
        p.s1_embedding.init(&mut rng);
        p.extraction.init(&mut rng);
        p.target.init(&mut rng);
        for head in [&mut p.head_s1, &mut p.head_s2]
            .into_iter()
            .chain(p.head_one.as_mut())
        {
            head.hidden.init(&mut rng);
            head.output.init(&mut rng);
        }
        p
    }

    /// Every tensor in a fixed order (also the file order).
    pub fn tensors(&self) -> Vec<&ParamTensor<S>> {
        let mut v = vec![
            &self.code_embedding.table,
            &self.octant_embedding.table,
            &self.s1_embedding.table,
        ];
        v.extend(self.extraction.params());
        v.extend(self.target.params());
        v.extend(self.head_s1.params());
        v.extend(self.head_s2.params());
        if let Some(h) = &self.head_one {
            v.extend(h.params());
        }
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut ParamTensor<S>> {
        let mut v = vec![
            &mut self.code_embedding.table,
            &mut self.octant_embedding.table,
            &mut self.s1_embedding.table,
        ];
        v.extend(self.extraction.params_mut());
        v.extend(self.target.params_mut());
        v.extend(self.head_s1.params_mut());
        v.extend(self.head_s2.params_mut());
        if let Some(h) = &mut self.head_one {
            v.extend(h.params_mut());
        }
        v
    }

    pub fn zero_grad(&mut self) {
        self.tensors_mut()
            .into_iter()
            .for_each(ParamTensor::zero_grad);
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.values.iter().all(|v| v.is_finite()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        params_io::write_tensors(&self.tensors())
    }

    /// Truncated FNV-1a of the serialized parameter file.
    pub fn model_id(&self) -> u64 {
        params_io::fnv1a64(&self.to_bytes())
    }

    pub fn info(&self) -> ModelInfo {
        let bytes = self.to_bytes();
        let count = self.parameter_count();
        ModelInfo {
            channels: self.config.channels,
            kernel_size: self.config.kernel_size,
            one_stage_head: self.config.one_stage_head,
            parameter_count: count,
            parameter_bytes: 4 * count,
            file_bytes: bytes.len(),
            model_id: format!("{:016x}", params_io::fnv1a64(&bytes)),
        }
    }

    /// Rebuilds parameters from a parameter file, inferring the architecture
    /// from the tensor shapes.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let stored = params_io::read_tensors(bytes)?;
        let find = |name: &str| stored.iter().find(|t| t.name == name);
        let code = find("code_embedding.table")
            .ok_or_else(|| Error::ParamFormat("missing code_embedding.table".into()))?;
        if code.shape.len() != 2 {
            return Err(Error::ParamFormat("code embedding must be rank 2".into()));
        }
        let channels = code.shape[1];
        let taps = find("extraction.conv1.weight")
            .and_then(|t| t.shape.first().copied())
            .ok_or_else(|| Error::ParamFormat("missing extraction.conv1.weight".into()))?;
        let kernel_size = (taps as f64).cbrt().round() as usize;
        if kernel_size.pow(3) != taps || kernel_size.is_multiple_of(2) || channels == 0 {
            return Err(Error::ParamFormat(format!(
                "unsupported kernel with {taps} taps"
            )));
        }
        let config = TopConfig {
            channels,
            kernel_size,
            one_stage_head: find("head_one.hidden.weight").is_some(),
        };
        let mut params = Self::zeros(config);
        let expected = params.tensors().len();
        if stored.len() != expected {
            return Err(Error::ParamFormat(format!(
                "{} tensors in file, architecture {config:?} has {expected}",
                stored.len()
            )));
        }
        for t in params.tensors_mut() {
            let StoredTensor { shape, values, .. } = find(&t.name)
                .ok_or_else(|| Error::ParamFormat(format!("missing tensor {}", t.name)))?;
            if *shape != t.shape {
                return Err(Error::ParamFormat(format!(
                    "tensor {}: shape {shape:?}, expected {:?}",
                    t.name, t.shape
                )));
            }
            t.values = values.iter().map(|&v| S::lit(f64::from(v))).collect();
        }
        if !params.is_finite() {
            return Err(Error::ParamFormat("non-finite parameter value".into()));
        }
        Ok(params)
    }

    /// Same parameters in another precision.
    pub fn cast<T: Scalar>(&self) -> TopParams<T> {
        let mut out = TopParams::<T>::zeros(self.config);
        for (dst, src) in out.tensors_mut().into_iter().zip(self.tensors()) {
            *dst = src.cast();
        }
        out
    }
}

/// Precomputed structure of one scale: neighbor tables for the parent and
/// child geometries and the child-to-parent mapping.
#[derive(Clone, Debug)]
pub struct ScaleInputs {
    pub parent_index: Arc<NeighborIndex>,
    pub child_index: Arc<NeighborIndex>,
    /// Code value (1..=255) of every parent, used as embedding row.
    pub parent_codes: Vec<usize>,
    /// Parent row of every child.
    pub parent_of: Vec<usize>,
    /// Octant of every child inside its parent.
    pub octants: Vec<usize>,
}

impl ScaleInputs {
    /// `parent_index` may be supplied when the parent geometry's table is
    /// already known (it is the previous scale's child table).
    pub fn new(
        layer: &ScaleLayer,
        children: &SparseGeometry,
        kernel_size: usize,
        parent_index: Option<Arc<NeighborIndex>>,
    ) -> Result<Self> {
        let (parent_of, octants) = map_children(&layer.parents, children)?;
        let parent_index = match parent_index {
            Some(idx) if idx.rows() == layer.parents.len() && idx.kernel_size() == kernel_size => {
                idx
            }
            _ => Arc::new(NeighborIndex::build(&layer.parents, kernel_size)),
        };
        Ok(Self {
            parent_index,
            child_index: Arc::new(NeighborIndex::build(children, kernel_size)),
            parent_codes: layer.codes.iter().map(|c| usize::from(c.value())).collect(),
            parent_of,
            octants,
        })
    }

    pub fn child_count(&self) -> usize {
        self.parent_of.len()
    }
}

/// Merges two canonically ordered lists: children of one parent are
/// contiguous and parents appear in the same order as their children.
fn map_children(
    parents: &SparseGeometry,
    children: &SparseGeometry,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if children.depth() != parents.depth() + 1 {
        return Err(Error::Shape(format!(
            "children at depth {} for parents at depth {}",
            children.depth(),
            parents.depth()
        )));
    }
    let pcoords = parents.coords();
    let mut parent_of = Vec::with_capacity(children.len());
    let mut octants = Vec::with_capacity(children.len());
    let mut j = 0usize;
    for &c in children.coords() {
        let key = c.morton_key();
        let pk = key >> 3;
        while j < pcoords.len() && pcoords[j].morton_key() < pk {
            j += 1;
        }
        if j == pcoords.len() || pcoords[j].morton_key() != pk {
            return Err(Error::MissingParent(c.as_array()));
        }
        parent_of.push(j);
        octants.push((key & 7) as usize);
    }
    Ok((parent_of, octants))
}

/// Probability rows for every child of one scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalePrediction<S> {
    pub p_s1: Matrix<S>,
    pub p_s2: Matrix<S>,
}

/// High nibbles of `codes`.
pub fn s1_symbols(codes: &[OccupancyCode]) -> Vec<u8> {
    codes.iter().map(|c| c.high_nibble()).collect()
}

impl<S: Scalar> TopParams<S> {
    fn parent_features(&self, inputs: &ScaleInputs) -> Result<Matrix<S>> {
        let emb = self.code_embedding.forward(&inputs.parent_codes)?;
        Ok(self.extraction.forward(&inputs.parent_index, emb))
    }

    /// Replicates parent rows to their children and adds the octant embedding.
    fn replicate(&self, parent_feats: &Matrix<S>, inputs: &ScaleInputs) -> Result<Matrix<S>> {
        let mut x = parent_feats.select_rows(&inputs.parent_of);
        let oct = self.octant_embedding.forward(&inputs.octants)?;
        add_assign(&mut x, &oct);
        Ok(x)
    }

    /// Target features `F^d` on the child geometry.
    pub fn scale_features(&self, inputs: &ScaleInputs) -> Result<Matrix<S>> {
        let parent = self.parent_features(inputs)?;
        let replicated = self.replicate(&parent, inputs)?;
        Ok(self.target.forward(&inputs.child_index, replicated))
    }

    pub fn s1_probs(&self, features: &Matrix<S>) -> Matrix<S> {
        softmax_rows(&self.head_s1.forward(features))
    }

    pub fn s2_probs(&self, features: &Matrix<S>, s1: &[u8]) -> Result<Matrix<S>> {
        if s1.len() != features.rows() {
            return Err(Error::Shape(format!(
                "{} first-stage symbols for {} rows",
                s1.len(),
                features.rows()
            )));
        }
        let idx: Vec<usize> = s1.iter().map(|&s| usize::from(s)).collect();
        let mut x = self.s1_embedding.forward(&idx)?;
        add_assign(&mut x, features);
        Ok(softmax_rows(&self.head_s2.forward(&x)))
    }

    /// 255-way code distribution; class `k` is code `k + 1`.
    pub fn one_stage_probs(&self, features: &Matrix<S>) -> Result<Matrix<S>> {
        let head = self
            .head_one
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("model has no single-stage head".into()))?;
        Ok(softmax_rows(&head.forward(features)))
    }
}

/// Occupancy features of the parent scale: `ResBlock(Emb(codes))`.
pub fn extract_features<S: Scalar>(
    layer: &ScaleLayer,
    params: &TopParams<S>,
) -> Result<SparseFeatureMap<S>> {
    let index = NeighborIndex::build(&layer.parents, params.config.kernel_size);
    let codes: Vec<usize> = layer.codes.iter().map(|c| usize::from(c.value())).collect();
    let emb = params.code_embedding.forward(&codes)?;
    SparseFeatureMap::new(
        layer.parents.clone(),
        params.extraction.forward(&index, emb),
    )
}

/// Moves parent features onto the child geometry: replication, octant
/// embedding, then a residual block on the children.
pub fn target_embed<S: Scalar>(
    parent_feats: &SparseFeatureMap<S>,
    children: &SparseGeometry,
    params: &TopParams<S>,
) -> Result<SparseFeatureMap<S>> {
    let (parent_of, octants) = map_children(&parent_feats.geometry, children)?;
    let mut x = parent_feats.features.select_rows(&parent_of);
    add_assign(&mut x, &params.octant_embedding.forward(&octants)?);
    let index = NeighborIndex::build(children, params.config.kernel_size);
    SparseFeatureMap::new(children.clone(), params.target.forward(&index, x))
}

/// Two-stage prediction for one scale with known first-stage symbols.
///
/// `s1` are the ground-truth high nibbles when encoding or training and the
/// already decoded ones when decoding.
pub fn predict<S: Scalar>(
    layer: &ScaleLayer,
    children: &SparseGeometry,
    s1: &[u8],
    params: &TopParams<S>,
) -> Result<ScalePrediction<S>> {
    let inputs = ScaleInputs::new(layer, children, params.config.kernel_size, None)?;
    let features = params.scale_features(&inputs)?;
    Ok(ScalePrediction {
        p_s1: params.s1_probs(&features),
        p_s2: params.s2_probs(&features, s1)?,
    })
}
