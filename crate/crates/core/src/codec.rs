//! Bitstream container and the encoder/decoder driving the predictor and
//! the range coder scale by scale.
//!
//! Layout: a 49-byte header followed by one range-coder payload spanning
//! every scale. Scale `d` contributes the first-stage symbols of all its
//! voxels in canonical order, then all second-stage symbols (or one 255-ary
//! symbol per voxel in single-stage mode).

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::entropy::{CdfTable, RangeDecoder, RangeEncoder};
use crate::error::{Error, Result};
use crate::nn::{Matrix, NeighborIndex};
use crate::occupancy::{build_pyramid, fcg, OccupancyCode, ScaleLayer};
use crate::scalar::Scalar;
use crate::top::{ScaleInputs, TopParams};
use crate::voxel::{
    dequantize, quantize, Coord, PointCloud, QuantizationTransform, SparseGeometry, MAX_DEPTH,
};

pub const MAGIC: &[u8; 4] = b"RENO";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 49;

const FLAG_TWO_STAGE: u8 = 1;
const FLAG_ONE_STAGE: u8 = 2;

/// Default cap on decoded voxels per scale.
pub const DEFAULT_MAX_VOXELS: usize = 1 << 26;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodingMode {
    /// Two 16-ary symbols per code, the second conditioned on the first.
    #[default]
    TwoStage,
    /// One 255-ary symbol per code.
    OneStage,
}

impl CodingMode {
    fn flags(self) -> u8 {
        match self {
            Self::TwoStage => FLAG_TWO_STAGE,
            Self::OneStage => FLAG_ONE_STAGE,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Header {
    pub mode: CodingMode,
    pub depth: u8,
    pub transform: QuantizationTransform,
    pub model_id: u64,
    pub base_code: OccupancyCode,
}

impl Header {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(MAGIC);
        b[4] = VERSION;
        b[5] = self.mode.flags();
        b[6] = self.depth;
        for (i, v) in self.transform.origin.iter().enumerate() {
            b[8 + 8 * i..16 + 8 * i].copy_from_slice(&v.to_le_bytes());
        }
        b[32..40].copy_from_slice(&self.transform.step.to_le_bytes());
        b[40..48].copy_from_slice(&self.model_id.to_le_bytes());
        b[48] = self.base_code.value();
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::UnexpectedEof);
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::CorruptStream("bad magic".into()));
        }
        if bytes[4] != VERSION {
            return Err(Error::CorruptStream(format!(
                "unsupported version {}",
                bytes[4]
            )));
        }
        let mode = match bytes[5] {
            FLAG_TWO_STAGE => CodingMode::TwoStage,
            FLAG_ONE_STAGE => CodingMode::OneStage,
            f => return Err(Error::CorruptStream(format!("invalid flags {f:#04x}"))),
        };
        let depth = bytes[6];
        if depth == 0 || depth > MAX_DEPTH {
            return Err(Error::CorruptStream(format!("depth {depth}")));
        }
        if bytes[7] != 0 {
            return Err(Error::CorruptStream("reserved byte is set".into()));
        }
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let origin = [f64_at(8), f64_at(16), f64_at(24)];
        let step = f64_at(32);
        if origin.iter().any(|v| !v.is_finite()) || !step.is_finite() || step <= 0.0 {
            return Err(Error::CorruptStream(
                "invalid quantization transform".into(),
            ));
        }
        let base_code = OccupancyCode::new(bytes[48])
            .map_err(|_| Error::CorruptStream("base code is 0".into()))?;
        Ok(Self {
            mode,
            depth,
            transform: QuantizationTransform {
                origin,
                step,
                depth,
            },
            model_id: u64::from_le_bytes(bytes[40..48].try_into().unwrap()),
            base_code,
        })
    }
}

/// Wall time per pipeline stage in milliseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimes {
    /// Building the pyramid (encoder) or expanding coordinates (decoder).
    pub pyramid: f64,
    /// Neighbor tables and network inference.
    pub nn: f64,
    /// Probability quantization and range coding.
    pub ae: f64,
}

impl StageTimes {
    pub fn total(&self) -> f64 {
        self.pyramid + self.nn + self.ae
    }

    fn add(&mut self, other: &StageTimes) {
        self.pyramid += other.pyramid;
        self.nn += other.nn;
        self.ae += other.ae;
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodeSummary {
    pub mode: CodingMode,
    pub depth: u8,
    pub points: usize,
    pub voxels: usize,
    /// Total stream size including the header.
    pub bytes: usize,
    pub payload_bytes: usize,
    /// `8 · payload_bytes / points`.
    pub bpp: f64,
    /// Ideal code length of every coded scale under the quantized tables.
    pub per_scale_bits: Vec<f64>,
    pub wall_ms: StageTimes,
}

impl EncodeSummary {
    pub fn ideal_bits(&self) -> f64 {
        self.per_scale_bits.iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeSummary {
    pub mode: CodingMode,
    pub depth: u8,
    pub voxels: usize,
    /// The stream names a different parameter set than the one supplied.
    pub model_mismatch: bool,
    pub wall_ms: StageTimes,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecodeOptions {
    /// Refuse to decode when the stream's model id differs from the
    /// parameters' id.
    pub strict_model: bool,
    pub max_voxels: usize,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        Self {
            strict_model: false,
            max_voxels: DEFAULT_MAX_VOXELS,
        }
    }
}

/// Renormalizes one probability row in `f64` and quantizes it into `table`.
fn row_table<S: Scalar>(row: &[S], buf: &mut Vec<f64>, table: &mut CdfTable) -> Result<()> {
    buf.clear();
    buf.extend(row.iter().map(|v| v.to_f64_lossy()));
    let sum: f64 = buf.iter().sum();
    if !(sum.is_finite() && sum > 0.0) {
        return Err(Error::InvalidProbability(format!("row sums to {sum}")));
    }
    buf.iter_mut().for_each(|v| *v /= sum);
    table.quantize_into(buf)
}

/// Runs `f(row, table)` with the quantized table of every probability row.
/// Encoder and decoder both go through here, so they see identical tables.
fn for_each_table<S: Scalar>(
    probs: &Matrix<S>,
    mut f: impl FnMut(usize, &CdfTable) -> Result<()>,
) -> Result<()> {
    let mut buf = Vec::with_capacity(probs.cols());
    let mut table = CdfTable::uniform(probs.cols());
    for i in 0..probs.rows() {
        row_table(probs.row(i), &mut buf, &mut table)?;
        f(i, &table)?;
    }
    Ok(())
}

fn check_mode<S: Scalar>(params: &TopParams<S>, mode: CodingMode) -> Result<()> {
    if mode == CodingMode::OneStage && params.head_one.is_none() {
        return Err(Error::InvalidInput(
            "single-stage coding needs a model with a single-stage head".into(),
        ));
    }
    Ok(())
}

/// Encodes `g`; returns the stream and its summary.
pub fn encode_with_summary<S: Scalar>(
    g: &SparseGeometry,
    t: &QuantizationTransform,
    params: &TopParams<S>,
    mode: CodingMode,
) -> Result<(Vec<u8>, EncodeSummary)> {
    if g.is_empty() {
        return Err(Error::EmptyInput);
    }
    if g.depth() == 0 {
        return Err(Error::DepthTooSmall);
    }
    if g.depth() != t.depth {
        return Err(Error::DepthMismatch {
            geometry: g.depth(),
            transform: t.depth,
        });
    }
    check_mode(params, mode)?;
    let k = params.config.kernel_size;
    let mut times = StageTimes::default();

    let clock = Instant::now();
    let pyramid = build_pyramid(g)?;
    times.pyramid = ms_since(clock);

    let header = Header {
        mode,
        depth: g.depth(),
        transform: *t,
        model_id: params.model_id(),
        base_code: pyramid.base_code(),
    };
    let mut enc = RangeEncoder::new();
    let mut per_scale_bits = Vec::with_capacity(pyramid.layers.len());
    let mut shared: Option<Arc<NeighborIndex>> = None;

    for d in 1..pyramid.layers.len() {
        let clock = Instant::now();
        let layer = &pyramid.layers[d - 1];
        let codes = &pyramid.layers[d].codes;
        let inputs = ScaleInputs::new(layer, &pyramid.layers[d].parents, k, shared.take())?;
        let features = params.scale_features(&inputs)?;
        shared = Some(inputs.child_index.clone());
        let mut bits = 0.0;
        match mode {
            CodingMode::TwoStage => {
                let s1: Vec<u8> = codes.iter().map(|c| c.high_nibble()).collect();
                let p1 = params.s1_probs(&features);
                let p2 = params.s2_probs(&features, &s1)?;
                times.nn += ms_since(clock);
                let clock = Instant::now();
                for_each_table(&p1, |i, table| {
                    let s = usize::from(s1[i]);
                    bits += table.cost_bits(s);
                    enc.encode(table, s);
                    Ok(())
                })?;
                for_each_table(&p2, |i, table| {
                    let s = usize::from(codes[i].low_nibble());
                    bits += table.cost_bits(s);
                    enc.encode(table, s);
                    Ok(())
                })?;
                times.ae += ms_since(clock);
            }
            CodingMode::OneStage => {
                let p = params.one_stage_probs(&features)?;
                times.nn += ms_since(clock);
                let clock = Instant::now();
                for_each_table(&p, |i, table| {
                    let s = usize::from(codes[i].value()) - 1;
                    bits += table.cost_bits(s);
                    enc.encode(table, s);
                    Ok(())
                })?;
                times.ae += ms_since(clock);
            }
        }
        per_scale_bits.push(bits);
    }

    let clock = Instant::now();
    let payload = enc.finish();
    times.ae += ms_since(clock);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&payload);
    let summary = EncodeSummary {
        mode,
        depth: g.depth(),
        points: g.len(),
        voxels: g.len(),
        bytes: out.len(),
        payload_bytes: payload.len(),
        bpp: 8.0 * payload.len() as f64 / g.len() as f64,
        per_scale_bits,
        wall_ms: times,
    };
    Ok((out, summary))
}

/// Two-stage encoding of `g`.
pub fn encode<S: Scalar>(
    g: &SparseGeometry,
    t: &QuantizationTransform,
    params: &TopParams<S>,
) -> Result<Vec<u8>> {
    encode_with_summary(g, t, params, CodingMode::TwoStage).map(|(b, _)| b)
}

/// Decodes a stream with explicit options, returning the geometry, its
/// quantization transform and a summary.
pub fn decode_with<S: Scalar>(
    bytes: &[u8],
    params: &TopParams<S>,
    options: &DecodeOptions,
) -> Result<(SparseGeometry, QuantizationTransform, DecodeSummary)> {
    let header = Header::parse(bytes)?;
    let actual = params.model_id();
    if options.strict_model && actual != header.model_id {
        return Err(Error::ModelMismatch {
            expected: header.model_id,
            actual,
        });
    }
    check_mode(params, header.mode)?;
    let k = params.config.kernel_size;
    let mut times = StageTimes::default();
    let mut dec = RangeDecoder::new(&bytes[HEADER_LEN..])?;

    let mut layer = ScaleLayer::new(
        SparseGeometry::new(0, vec![Coord::new(0, 0, 0)])?,
        vec![header.base_code],
    )?;
    let mut shared: Option<Arc<NeighborIndex>> = None;
    let mut children;
    loop {
        let clock = Instant::now();
        check_voxel_budget(&layer, options.max_voxels)?;
        children = fcg(&layer)?;
        times.pyramid += ms_since(clock);
        if children.depth() == header.depth {
            break;
        }

        let clock = Instant::now();
        let inputs = ScaleInputs::new(&layer, &children, k, shared.take())?;
        let features = params.scale_features(&inputs)?;
        shared = Some(inputs.child_index.clone());
        let n = children.len();
        let mut codes = Vec::with_capacity(n);
        match header.mode {
            CodingMode::TwoStage => {
                let p1 = params.s1_probs(&features);
                times.nn += ms_since(clock);
                let clock = Instant::now();
                let mut s1 = Vec::with_capacity(n);
                for_each_table(&p1, |_, table| {
                    s1.push(dec.decode(table)? as u8);
                    Ok(())
                })?;
                times.ae += ms_since(clock);
                let clock = Instant::now();
                let p2 = params.s2_probs(&features, &s1)?;
                times.nn += ms_since(clock);
                let clock = Instant::now();
                for_each_table(&p2, |i, table| {
                    let s2 = dec.decode(table)? as u8;
                    let code = OccupancyCode::from_nibbles(s1[i], s2).map_err(|_| {
                        Error::CorruptStream(format!(
                            "decoded code 0 at depth {}",
                            children.depth()
                        ))
                    })?;
                    codes.push(code);
                    Ok(())
                })?;
                times.ae += ms_since(clock);
            }
            CodingMode::OneStage => {
                let p = params.one_stage_probs(&features)?;
                times.nn += ms_since(clock);
                let clock = Instant::now();
                for_each_table(&p, |_, table| {
                    codes.push(OccupancyCode::new(dec.decode(table)? as u8 + 1)?);
                    Ok(())
                })?;
                times.ae += ms_since(clock);
            }
        }
        layer = ScaleLayer::new(children, codes)?;
    }

    if !dec.is_exhausted() {
        return Err(Error::CorruptStream(format!(
            "{} trailing payload bytes",
            bytes.len() - HEADER_LEN - dec.consumed()
        )));
    }
    let summary = DecodeSummary {
        mode: header.mode,
        depth: header.depth,
        voxels: children.len(),
        model_mismatch: actual != header.model_id,
        wall_ms: times,
    };
    Ok((children, header.transform, summary))
}

fn check_voxel_budget(layer: &ScaleLayer, max_voxels: usize) -> Result<()> {
    let n = layer.child_count();
    if n > max_voxels {
        return Err(Error::CorruptStream(format!(
            "{n} voxels at depth {} exceed the limit of {max_voxels}",
            layer.parents.depth() + 1
        )));
    }
    Ok(())
}

/// Decodes a stream produced by [`encode`] or [`encode_with_summary`].
pub fn decode<S: Scalar>(
    bytes: &[u8],
    params: &TopParams<S>,
) -> Result<(SparseGeometry, QuantizationTransform)> {
    decode_with(bytes, params, &DecodeOptions::default()).map(|(g, t, _)| (g, t))
}

/// Quantizes and encodes a point cloud. The summary counts input points.
pub fn encode_file<S: Scalar>(
    pc: &PointCloud,
    depth: u8,
    params: &TopParams<S>,
    mode: CodingMode,
) -> Result<(Vec<u8>, EncodeSummary)> {
    let clock = Instant::now();
    let (g, t) = quantize(pc, depth)?;
    let quantize_ms = ms_since(clock);
    let (bytes, mut summary) = encode_with_summary(&g, &t, params, mode)?;
    summary.points = pc.len();
    summary.bpp = 8.0 * summary.payload_bytes as f64 / pc.len() as f64;
    summary.wall_ms.pyramid += quantize_ms;
    Ok((bytes, summary))
}

/// Decodes and dequantizes to voxel corner points.
pub fn decode_file<S: Scalar>(bytes: &[u8], params: &TopParams<S>) -> Result<PointCloud> {
    let (g, t) = decode(bytes, params)?;
    dequantize(&g, &t)
}

/// Timing of repeated encode/decode runs in one mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeBench {
    pub mode: CodingMode,
    pub bytes: usize,
    pub bpp: f64,
    /// Mean per-run stage times.
    pub encode_ms: StageTimes,
    pub decode_ms: StageTimes,
    /// Mean encode plus decode wall time.
    pub total_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub points: usize,
    pub voxels: usize,
    pub depth: u8,
    pub repeat: usize,
    pub modes: Vec<ModeBench>,
}

/// Encodes and decodes `pc` `repeat` times in each mode the model supports
/// and verifies every decode against the encoder input.
pub fn bench<S: Scalar>(
    pc: &PointCloud,
    depth: u8,
    params: &TopParams<S>,
    repeat: usize,
) -> Result<BenchReport> {
    let (g, t) = quantize(pc, depth)?;
    let repeat = repeat.max(1);
    let mut modes = vec![CodingMode::TwoStage];
    if params.head_one.is_some() {
        modes.push(CodingMode::OneStage);
    }
    let mut out = Vec::new();
    for mode in modes {
        let mut enc_ms = StageTimes::default();
        let mut dec_ms = StageTimes::default();
        let mut total = 0.0;
        let mut last = None;
        for _ in 0..repeat {
            let clock = Instant::now();
            let (bytes, summary) = encode_with_summary(&g, &t, params, mode)?;
            let (decoded, _, dsum) = decode_with(&bytes, params, &DecodeOptions::default())?;
            total += ms_since(clock);
            if decoded != g {
                return Err(Error::CorruptStream("bench round trip mismatch".into()));
            }
            enc_ms.add(&summary.wall_ms);
            dec_ms.add(&dsum.wall_ms);
            last = Some(summary);
        }
        let summary = last.expect("at least one run");
        let scale = 1.0 / repeat as f64;
        for s in [&mut enc_ms, &mut dec_ms] {
            s.pyramid *= scale;
            s.nn *= scale;
            s.ae *= scale;
        }
        out.push(ModeBench {
            mode,
            bytes: summary.bytes,
            bpp: 8.0 * summary.payload_bytes as f64 / pc.len() as f64,
            encode_ms: enc_ms,
            decode_ms: dec_ms,
            total_ms: total * scale,
        });
    }
    Ok(BenchReport {
        points: pc.len(),
        voxels: g.len(),
        depth,
        repeat,
        modes: out,
    })
}
