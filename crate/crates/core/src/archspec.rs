//! Declarative layer specifications for the frame-probability models, with
//! shape propagation and parameter counting.
//!
//! Shapes follow same-padding arithmetic (`out = ceil(in / stride)`) and are
//! printed in the `T×S²×C` notation of the reference tables: `128²×32` for a
//! frame, `16×128²×32` for a clip, `4096` for a flat vector and `16×4096` for a
//! per-frame sequence of vectors.
//!
//! Parameter conventions:
//! * small models: every conv and dense layer has a bias, no batch norm;
//! * ResNet-50 models: convs have no bias but a batch norm (`2·C`), dense
//!   layers have a bias;
//! * LSTM: `4·((in + hidden)·hidden + hidden)`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("unknown architecture '{name}'; valid names: {valid}")]
    UnknownArch { name: String, valid: String },
    #[error("layer '{layer}': dimension would drop below 1 ({detail})")]
    DimensionUnderflow { layer: String, detail: String },
    #[error("layer '{layer}': {detail}")]
    ShapeMismatch { layer: String, detail: String },
    #[error("architecture '{name}': {detail}")]
    InvalidSpec { name: String, detail: String },
}

pub type Result<T> = std::result::Result<T, ArchError>;

/// How a shape is laid out and printed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `S²×C`
    Image,
    /// `T×S²×C`
    Volume,
    /// `C`
    Vector,
    /// `T×C`
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ShapeState {
    pub t: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub layout: Layout,
}

impl ShapeState {
    pub fn image(s: usize, c: usize) -> Self {
        ShapeState {
            t: 1,
            h: s,
            w: s,
            c,
            layout: Layout::Image,
        }
    }

    pub fn volume(t: usize, s: usize, c: usize) -> Self {
        ShapeState {
            t,
            h: s,
            w: s,
            c,
            layout: Layout::Volume,
        }
    }

    pub fn vector(c: usize) -> Self {
        ShapeState {
            t: 1,
            h: 1,
            w: 1,
            c,
            layout: Layout::Vector,
        }
    }

    pub fn sequence(t: usize, c: usize) -> Self {
        ShapeState {
            t,
            h: 1,
            w: 1,
            c,
            layout: Layout::Sequence,
        }
    }

    fn is_spatial(&self) -> bool {
        matches!(self.layout, Layout::Image | Layout::Volume)
    }

    fn check(&self, layer: &str) -> Result<()> {
        if self.t == 0 || self.h == 0 || self.w == 0 || self.c == 0 {
            return Err(ArchError::DimensionUnderflow {
                layer: layer.to_string(),
                detail: format!("{:?}", self),
            });
        }
        Ok(())
    }
}

impl fmt::Display for ShapeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let spatial = if self.h == self.w {
            format!("{}²", self.h)
        } else {
            format!("{}×{}", self.h, self.w)
        };
        match self.layout {
            Layout::Image => write!(f, "{}×{}", spatial, self.c),
            Layout::Volume => write!(f, "{}×{}×{}", self.t, spatial, self.c),
            Layout::Vector => write!(f, "{}", self.c),
            Layout::Sequence => write!(f, "{}×{}", self.t, self.c),
        }
    }
}

/// Temporal and spatial extent of a kernel or stride.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Extent {
    pub t: usize,
    pub s: usize,
}

impl Extent {
    pub const fn new(t: usize, s: usize) -> Self {
        Extent { t, s }
    }
}

const ONE: Extent = Extent::new(1, 1);

/// What the fusion layer does to each pathway before concatenating channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionPool {
    None,
    /// Average over time: `T×S²×C → S²×C`.
    Temporal,
    /// Average over time and space: `T×S²×C → 1×1²×C`.
    Global,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// Spatial convolution; applied per frame on clips.
    Conv2d,
    Conv3d,
    MaxPool,
    /// `repeat` ResNet bottleneck blocks: `kT×1², mid → 1×3², mid → 1×1², out`,
    /// stride on the 3×3 conv of the first block, projection shortcut there too.
    Bottleneck { mid_channels: usize },
    /// Fully connected; per step on sequences.
    Dense,
    Lstm,
    /// `per_frame` keeps time as a sequence axis.
    Flatten { per_frame: bool },
    SpatialPool,
    TemporalPool,
    /// Joins the pathways: optional pooling, channel concatenation, and an
    /// optional conv (`conv`) with `groups` channel groups.
    FusionConcatConv {
        pool: FusionPool,
        conv: bool,
        groups: usize,
    },
    /// Time-strided conv from another pathway's layer output, concatenated onto
    /// the channels of this pathway. The temporal stride is the ratio of the
    /// two pathways' frame counts.
    LateralTimeStrideConv { pathway: String, layer: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub kernel: Extent,
    pub out_channels: usize,
    pub stride: Extent,
    pub repeat: usize,
    pub has_bias: bool,
    pub has_batchnorm: bool,
}

impl LayerSpec {
    fn new(name: &str, kind: LayerKind) -> Self {
        LayerSpec {
            name: name.to_string(),
            kind,
            kernel: ONE,
            out_channels: 0,
            stride: ONE,
            repeat: 1,
            has_bias: false,
            has_batchnorm: false,
        }
    }

    pub fn conv2d(name: &str, k: usize, out: usize, stride: usize) -> Self {
        LayerSpec {
            kernel: Extent::new(1, k),
            out_channels: out,
            stride: Extent::new(1, stride),
            ..Self::new(name, LayerKind::Conv2d)
        }
    }

    pub fn conv3d(name: &str, kernel: Extent, out: usize, stride: Extent) -> Self {
        LayerSpec {
            kernel,
            out_channels: out,
            stride,
            ..Self::new(name, LayerKind::Conv3d)
        }
    }

    pub fn max_pool(name: &str, kernel: Extent, stride: Extent) -> Self {
        LayerSpec {
            kernel,
            stride,
            ..Self::new(name, LayerKind::MaxPool)
        }
    }

    pub fn bottleneck(
        name: &str,
        first_kt: usize,
        mid: usize,
        out: usize,
        repeat: usize,
        stride: Extent,
    ) -> Self {
        LayerSpec {
            kernel: Extent::new(first_kt, 3),
            out_channels: out,
            stride,
            repeat,
            ..Self::new(name, LayerKind::Bottleneck { mid_channels: mid })
        }
    }

    pub fn dense(name: &str, out: usize) -> Self {
        LayerSpec {
            out_channels: out,
            has_bias: true,
            ..Self::new(name, LayerKind::Dense)
        }
    }

    pub fn lstm(name: &str, hidden: usize) -> Self {
        LayerSpec {
            out_channels: hidden,
            has_bias: true,
            ..Self::new(name, LayerKind::Lstm)
        }
    }

    pub fn flatten(per_frame: bool) -> Self {
        Self::new("flatten", LayerKind::Flatten { per_frame })
    }

    pub fn spatial_pool() -> Self {
        Self::new("spatial_pool", LayerKind::SpatialPool)
    }

    pub fn temporal_pool() -> Self {
        Self::new("temporal_pool", LayerKind::TemporalPool)
    }

    pub fn fusion(pool: FusionPool, conv: Option<(usize, usize, usize)>) -> Self {
        let (k, out, groups) = conv.unwrap_or((1, 0, 1));
        LayerSpec {
            kernel: Extent::new(1, k),
            out_channels: out,
            ..Self::new(
                "fusion",
                LayerKind::FusionConcatConv {
                    pool,
                    conv: conv.is_some(),
                    groups,
                },
            )
        }
    }

    pub fn lateral(name: &str, pathway: &str, layer: &str, kt: usize, out: usize) -> Self {
        LayerSpec {
            kernel: Extent::new(kt, 1),
            out_channels: out,
            ..Self::new(
                name,
                LayerKind::LateralTimeStrideConv {
                    pathway: pathway.to_string(),
                    layer: layer.to_string(),
                },
            )
        }
    }

    /// Small-model convention: bias on, no batch norm.
    pub fn with_bias(mut self) -> Self {
        self.has_bias = true;
        self.has_batchnorm = false;
        self
    }

    /// ResNet convention for convs: no bias, batch norm.
    pub fn with_batchnorm(mut self) -> Self {
        self.has_bias = false;
        self.has_batchnorm = true;
        self
    }

    /// Kernel/stride column for printed layer tables.
    pub fn describe(&self) -> String {
        let k = self.kernel;
        let s = self.stride;
        let ext = |e: Extent, temporal: bool| {
            if temporal {
                format!("{}×{}²", e.t, e.s)
            } else {
                format!("{}²", e.s)
            }
        };
        match &self.kind {
            LayerKind::Conv2d => format!("{},{} str. {}", ext(k, false), self.out_channels, ext(s, false)),
            LayerKind::Conv3d => format!("{},{} str. {}", ext(k, true), self.out_channels, ext(s, true)),
            LayerKind::MaxPool => format!("{} str. {}", ext(k, true), ext(s, true)),
            LayerKind::Bottleneck { mid_channels } => format!(
                "[{}×1²,{}; 1×3²,{}; 1×1²,{}]×{} str. {}",
                k.t,
                mid_channels,
                mid_channels,
                self.out_channels,
                self.repeat,
                ext(s, true)
            ),
            LayerKind::Dense => format!("dense {}", self.out_channels),
            LayerKind::Lstm => format!("lstm {}", self.out_channels),
            LayerKind::Flatten { .. } => "flatten".into(),
            LayerKind::SpatialPool => "spatial avg".into(),
            LayerKind::TemporalPool => "temporal avg".into(),
            LayerKind::FusionConcatConv { pool, conv, groups } => {
                let mut d = format!("{pool:?} pool + concat");
                if *conv {
                    d.push_str(&format!(" + conv {}²,{}", k.s, self.out_channels));
                    if *groups > 1 {
                        d.push_str(&format!(" groups {groups}"));
                    }
                }
                d
            }
            LayerKind::LateralTimeStrideConv { pathway, layer } => {
                format!("{}×1²,{} from {pathway}/{layer}", k.t, self.out_channels)
            }
        }
    }

    fn norm_params(&self, channels: usize) -> u64 {
        let mut p = 0;
        if self.has_bias {
            p += channels as u64;
        }
        if self.has_batchnorm {
            p += 2 * channels as u64;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pathway {
    pub name: String,
    pub input: ShapeState,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlowFastFactors {
    /// Temporal stride ratio between slow and fast pathways.
    pub alpha: usize,
    /// Channel ratio of fast relative to slow.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArchSpec {
    pub name: String,
    pub pathways: Vec<Pathway>,
    pub fusion: Option<LayerSpec>,
    pub head: Vec<LayerSpec>,
    pub slowfast: Option<SlowFastFactors>,
    /// Published parameter count, in millions.
    pub reference_params_m: Option<f64>,
}

/// One row of a propagated architecture. `pathway` is `None` for the fusion
/// layer and the shared head.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerShape {
    pub pathway: Option<String>,
    pub layer: String,
    pub description: String,
    pub output: ShapeState,
    pub params: u64,
}

fn ceil_div(a: usize, b: usize) -> usize {
    a.div_ceil(b)
}

fn mismatch(layer: &LayerSpec, detail: impl Into<String>) -> ArchError {
    ArchError::ShapeMismatch {
        layer: layer.name.clone(),
        detail: detail.into(),
    }
}

fn check_extents(layer: &LayerSpec) -> Result<()> {
    let e = [layer.kernel.t, layer.kernel.s, layer.stride.t, layer.stride.s];
    if e.contains(&0) || layer.repeat == 0 {
        return Err(ArchError::DimensionUnderflow {
            layer: layer.name.clone(),
            detail: "kernel, stride and repeat must be >= 1".into(),
        });
    }
    let needs_channels = matches!(
        layer.kind,
        LayerKind::Conv2d
            | LayerKind::Conv3d
            | LayerKind::Bottleneck { .. }
            | LayerKind::Dense
            | LayerKind::Lstm
            | LayerKind::LateralTimeStrideConv { .. }
    ) || matches!(layer.kind, LayerKind::FusionConcatConv { conv: true, .. });
    if needs_channels && layer.out_channels == 0 {
        return Err(ArchError::DimensionUnderflow {
            layer: layer.name.clone(),
            detail: "output channels must be >= 1".into(),
        });
    }
    if let LayerKind::Bottleneck { mid_channels: 0 } = layer.kind {
        return Err(ArchError::DimensionUnderflow {
            layer: layer.name.clone(),
            detail: "bottleneck width must be >= 1".into(),
        });
    }
    Ok(())
}

/// Strided spatial (and, for clips, temporal) downsampling.
fn stride_spatial(layer: &LayerSpec, x: ShapeState, temporal: bool) -> ShapeState {
    ShapeState {
        t: if temporal { ceil_div(x.t, layer.stride.t) } else { x.t },
        h: ceil_div(x.h, layer.stride.s),
        w: ceil_div(x.w, layer.stride.s),
        ..x
    }
}

fn require_frame_kernel(layer: &LayerSpec, x: &ShapeState) -> Result<()> {
    if x.layout == Layout::Image && (layer.kernel.t != 1 || layer.stride.t != 1) {
        return Err(mismatch(layer, "temporal kernel/stride on a single frame"));
    }
    Ok(())
}

fn conv_params(kt: usize, ks: usize, cin: usize, cout: usize) -> u64 {
    (kt * ks * ks) as u64 * cin as u64 * cout as u64
}

/// Applies a single-input layer.
fn apply(layer: &LayerSpec, x: ShapeState) -> Result<(ShapeState, u64)> {
    check_extents(layer)?;
    let out = layer.out_channels;
    let (shape, params) = match &layer.kind {
        LayerKind::Conv2d => {
            if !x.is_spatial() {
                return Err(mismatch(layer, "conv2d needs a frame or clip input"));
            }
            if layer.kernel.t != 1 || layer.stride.t != 1 {
                return Err(mismatch(layer, "conv2d has no temporal extent"));
            }
            let y = ShapeState {
                c: out,
                ..stride_spatial(layer, x, false)
            };
            (y, conv_params(1, layer.kernel.s, x.c, out) + layer.norm_params(out))
        }
        LayerKind::Conv3d => {
            if x.layout != Layout::Volume {
                return Err(mismatch(layer, "conv3d needs a clip input"));
            }
            let y = ShapeState {
                c: out,
                ..stride_spatial(layer, x, true)
            };
            (
                y,
                conv_params(layer.kernel.t, layer.kernel.s, x.c, out) + layer.norm_params(out),
            )
        }
        LayerKind::MaxPool => {
            if !x.is_spatial() {
                return Err(mismatch(layer, "pooling needs a frame or clip input"));
            }
            require_frame_kernel(layer, &x)?;
            (stride_spatial(layer, x, true), 0)
        }
        LayerKind::Bottleneck { mid_channels } => {
            if !x.is_spatial() {
                return Err(mismatch(layer, "bottleneck needs a frame or clip input"));
            }
            require_frame_kernel(layer, &x)?;
            let mid = *mid_channels;
            let mut params = 0;
            let mut cin = x.c;
            for block in 0..layer.repeat {
                params += conv_params(layer.kernel.t, 1, cin, mid) + layer.norm_params(mid);
                params += conv_params(1, 3, mid, mid) + layer.norm_params(mid);
                params += conv_params(1, 1, mid, out) + layer.norm_params(out);
                let strided = layer.stride != ONE;
                if block == 0 && (cin != out || strided) {
                    params += conv_params(1, 1, cin, out) + layer.norm_params(out);
                }
                cin = out;
            }
            let y = ShapeState {
                c: out,
                ..stride_spatial(layer, x, true)
            };
            (y, params)
        }
        LayerKind::Dense => {
            let y = match x.layout {
                Layout::Vector => ShapeState::vector(out),
                Layout::Sequence => ShapeState::sequence(x.t, out),
                _ => return Err(mismatch(layer, "dense needs a flat input")),
            };
            let bias = if layer.has_bias { out as u64 } else { 0 };
            (y, x.c as u64 * out as u64 + bias)
        }
        LayerKind::Lstm => {
            if x.layout != Layout::Sequence {
                return Err(mismatch(layer, "lstm needs a sequence input"));
            }
            let (i, h) = (x.c as u64, out as u64);
            (ShapeState::sequence(x.t, out), 4 * ((i + h) * h + h))
        }
        LayerKind::Flatten { per_frame } => {
            let y = match (x.layout, per_frame) {
                (Layout::Image, _) => ShapeState::vector(x.h * x.w * x.c),
                (Layout::Volume, true) => ShapeState::sequence(x.t, x.h * x.w * x.c),
                (Layout::Volume, false) => ShapeState::vector(x.t * x.h * x.w * x.c),
                _ => x,
            };
            (y, 0)
        }
        LayerKind::SpatialPool => {
            if !x.is_spatial() {
                return Err(mismatch(layer, "spatial pooling needs a frame or clip input"));
            }
            (ShapeState { h: 1, w: 1, ..x }, 0)
        }
        LayerKind::TemporalPool => {
            if x.layout != Layout::Volume {
                return Err(mismatch(layer, "temporal pooling needs a clip input"));
            }
            (ShapeState::image(x.h, x.c), 0)
        }
        LayerKind::FusionConcatConv { .. } => return fuse(layer, &[x]),
        LayerKind::LateralTimeStrideConv { .. } => {
            return Err(mismatch(layer, "lateral connection outside a two-pathway model"))
        }
    };
    shape.check(&layer.name)?;
    Ok((shape, params))
}

fn pool_for_fusion(pool: FusionPool, x: ShapeState) -> ShapeState {
    match (pool, x.layout) {
        (FusionPool::Temporal, Layout::Volume) => ShapeState::image(x.h, x.c),
        (FusionPool::Global, Layout::Volume) => ShapeState::volume(1, 1, x.c),
        (FusionPool::Global, Layout::Image) => ShapeState::image(1, x.c),
        _ => x,
    }
}

fn fuse(layer: &LayerSpec, inputs: &[ShapeState]) -> Result<(ShapeState, u64)> {
    check_extents(layer)?;
    let LayerKind::FusionConcatConv { pool, conv, groups } = &layer.kind else {
        return Err(mismatch(layer, "not a fusion layer"));
    };
    let pooled: Vec<ShapeState> = inputs.iter().map(|&x| pool_for_fusion(*pool, x)).collect();
    let first = pooled[0];
    if pooled
        .iter()
        .any(|p| (p.layout, p.t, p.h, p.w) != (first.layout, first.t, first.h, first.w))
    {
        return Err(mismatch(
            layer,
            format!(
                "pathways disagree after pooling: {}",
                pooled.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(" vs ")
            ),
        ));
    }
    let concat = ShapeState {
        c: pooled.iter().map(|p| p.c).sum(),
        ..first
    };
    if !conv {
        return Ok((concat, 0));
    }
    let out = layer.out_channels;
    if *groups == 0 || !concat.c.is_multiple_of(*groups) || !out.is_multiple_of(*groups) {
        return Err(mismatch(
            layer,
            format!("{} → {} channels cannot be split into {} groups", concat.c, out, groups),
        ));
    }
    let y = ShapeState {
        c: out,
        ..stride_spatial(layer, concat, false)
    };
    let params = conv_params(1, layer.kernel.s, concat.c / groups, out) + layer.norm_params(out);
    Ok((y, params))
}

fn validate_spec(spec: &ArchSpec) -> Result<()> {
    let invalid = |detail: &str| ArchError::InvalidSpec {
        name: spec.name.clone(),
        detail: detail.to_string(),
    };
    match (spec.pathways.len(), &spec.fusion) {
        (1, None) | (2, Some(_)) => {}
        (1, Some(_)) => return Err(invalid("single-pathway models have no fusion layer")),
        (2, None) => return Err(invalid("two-pathway models need a fusion layer")),
        (n, _) => return Err(invalid(&format!("expected 1 or 2 pathways, found {n}"))),
    }
    if let Some(fusion) = &spec.fusion {
        if !matches!(fusion.kind, LayerKind::FusionConcatConv { .. }) {
            return Err(invalid("fusion layer must be a concat fusion"));
        }
    }
    for p in &spec.pathways {
        p.input.check("data")?;
    }
    Ok(())
}

/// Propagates every pathway input through its layers, the fusion layer and
/// the head. The first row of each pathway is its `data` input.
pub fn propagate_shapes(spec: &ArchSpec) -> Result<Vec<LayerShape>> {
    validate_spec(spec)?;

    // Pathways without lateral inputs go first so their outputs can be tapped.
    let has_lateral = |p: &Pathway| {
        p.layers
            .iter()
            .any(|l| matches!(l.kind, LayerKind::LateralTimeStrideConv { .. }))
    };
    let mut order: Vec<usize> = (0..spec.pathways.len()).collect();
    order.sort_by_key(|&i| has_lateral(&spec.pathways[i]));

    let mut taps: HashMap<(String, String), ShapeState> = HashMap::new();
    let mut rows: Vec<Vec<LayerShape>> = vec![Vec::new(); spec.pathways.len()];
    let mut finals = vec![None; spec.pathways.len()];

    for &i in &order {
        let pathway = &spec.pathways[i];
        let row = |layer: &str, description: String, output, params| LayerShape {
            pathway: Some(pathway.name.clone()),
            layer: layer.to_string(),
            description,
            output,
            params,
        };
        let mut x = pathway.input;
        rows[i].push(row("data", "input".into(), x, 0));
        for layer in &pathway.layers {
            let (y, params) = match &layer.kind {
                LayerKind::LateralTimeStrideConv {
                    pathway: src_path,
                    layer: src_layer,
                } => {
                    let src = taps
                        .get(&(src_path.clone(), src_layer.clone()))
                        .copied()
                        .ok_or_else(|| {
                            mismatch(layer, format!("no output named {src_path}/{src_layer}"))
                        })?;
                    lateral(layer, src, x)?
                }
                _ => apply(layer, x)?,
            };
            taps.insert((pathway.name.clone(), layer.name.clone()), y);
            rows[i].push(row(&layer.name, layer.describe(), y, params));
            x = y;
        }
        finals[i] = Some(x);
    }

    let mut out: Vec<LayerShape> = rows.into_iter().flatten().collect();
    let finals: Vec<ShapeState> = finals.into_iter().map(|f| f.expect("propagated")).collect();
    let mut x = finals[0];
    if let Some(fusion) = &spec.fusion {
        let (y, params) = fuse(fusion, &finals)?;
        out.push(LayerShape {
            pathway: None,
            layer: fusion.name.clone(),
            description: fusion.describe(),
            output: y,
            params,
        });
        x = y;
    }
    for layer in &spec.head {
        let (y, params) = apply(layer, x)?;
        out.push(LayerShape {
            pathway: None,
            layer: layer.name.clone(),
            description: layer.describe(),
            output: y,
            params,
        });
        x = y;
    }
    Ok(out)
}

fn lateral(layer: &LayerSpec, src: ShapeState, dst: ShapeState) -> Result<(ShapeState, u64)> {
    check_extents(layer)?;
    if src.layout != Layout::Volume || dst.layout != Layout::Volume {
        return Err(mismatch(layer, "lateral connections join two clips"));
    }
    if (src.h, src.w) != (dst.h, dst.w) {
        return Err(mismatch(
            layer,
            format!("spatial size {} vs {}", src, dst),
        ));
    }
    if src.t < dst.t || !src.t.is_multiple_of(dst.t) {
        return Err(mismatch(
            layer,
            format!("{} source frames do not stride onto {}", src.t, dst.t),
        ));
    }
    let out = layer.out_channels;
    let params = conv_params(layer.kernel.t, layer.kernel.s, src.c, out) + layer.norm_params(out);
    Ok((ShapeState { c: dst.c + out, ..dst }, params))
}

/// Total parameter count across pathways, laterals, fusion and head.
pub fn count_params(spec: &ArchSpec) -> Result<u64> {
    Ok(propagate_shapes(spec)?.iter().map(|r| r.params).sum())
}

/// The model instantiations with published parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinArch {
    Small2dCnnFrame,
    Small2dCnnFlow,
    Small3dCnn,
    SmallCnnLstm,
    SmallTwoStream,
    SmallSlowfast,
    Resnet502dCnnFrame,
    Resnet502dCnnFlow,
    Resnet503dCnn,
    Resnet50CnnLstm,
    Resnet50TwoStream,
    Resnet50Slowfast,
}

impl BuiltinArch {
    pub const ALL: [BuiltinArch; 12] = [
        BuiltinArch::Small2dCnnFrame,
        BuiltinArch::Small2dCnnFlow,
        BuiltinArch::Small3dCnn,
        BuiltinArch::SmallCnnLstm,
        BuiltinArch::SmallTwoStream,
        BuiltinArch::SmallSlowfast,
        BuiltinArch::Resnet502dCnnFrame,
        BuiltinArch::Resnet502dCnnFlow,
        BuiltinArch::Resnet503dCnn,
        BuiltinArch::Resnet50CnnLstm,
        BuiltinArch::Resnet50TwoStream,
        BuiltinArch::Resnet50Slowfast,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BuiltinArch::Small2dCnnFrame => "small_2d_cnn_frame",
            BuiltinArch::Small2dCnnFlow => "small_2d_cnn_flow",
            BuiltinArch::Small3dCnn => "small_3d_cnn",
            BuiltinArch::SmallCnnLstm => "small_cnn_lstm",
            BuiltinArch::SmallTwoStream => "small_two_stream",
            BuiltinArch::SmallSlowfast => "small_slowfast",
            BuiltinArch::Resnet502dCnnFrame => "resnet50_2d_cnn_frame",
            BuiltinArch::Resnet502dCnnFlow => "resnet50_2d_cnn_flow",
            BuiltinArch::Resnet503dCnn => "resnet50_3d_cnn",
            BuiltinArch::Resnet50CnnLstm => "resnet50_cnn_lstm",
            BuiltinArch::Resnet50TwoStream => "resnet50_two_stream",
            BuiltinArch::Resnet50Slowfast => "resnet50_slowfast",
        }
    }

    /// Published parameter count in millions.
    pub fn reference_params_m(self) -> f64 {
        match self {
            BuiltinArch::Small2dCnnFrame | BuiltinArch::Small2dCnnFlow => 4.26,
            BuiltinArch::Small3dCnn => 4.39,
            BuiltinArch::SmallCnnLstm => 4.85,
            BuiltinArch::SmallTwoStream => 4.34,
            BuiltinArch::SmallSlowfast => 4.49,
            BuiltinArch::Resnet502dCnnFrame | BuiltinArch::Resnet502dCnnFlow => 23.5,
            BuiltinArch::Resnet503dCnn => 32.2,
            BuiltinArch::Resnet50CnnLstm => 24.6,
            BuiltinArch::Resnet50TwoStream => 47.0,
            BuiltinArch::Resnet50Slowfast => 36.7,
        }
    }

    pub fn names() -> String {
        Self::ALL.map(|a| a.as_str()).join(", ")
    }

    pub fn spec(self) -> ArchSpec {
        let mut spec = match self {
            BuiltinArch::Small2dCnnFrame => small_2d(3),
            BuiltinArch::Small2dCnnFlow => small_2d(2),
            BuiltinArch::Small3dCnn => small_3d(),
            BuiltinArch::SmallCnnLstm => small_cnn_lstm(),
            BuiltinArch::SmallTwoStream => small_two_stream(),
            BuiltinArch::SmallSlowfast => small_slowfast(),
            BuiltinArch::Resnet502dCnnFrame => resnet_2d(false),
            BuiltinArch::Resnet502dCnnFlow => resnet_2d(true),
            BuiltinArch::Resnet503dCnn => resnet_3d(),
            BuiltinArch::Resnet50CnnLstm => resnet_cnn_lstm(),
            BuiltinArch::Resnet50TwoStream => resnet_two_stream(),
            BuiltinArch::Resnet50Slowfast => resnet_slowfast(),
        };
        spec.name = self.as_str().to_string();
        spec.reference_params_m = Some(self.reference_params_m());
        spec
    }
}

impl FromStr for BuiltinArch {
    type Err = ArchError;

    fn from_str(name: &str) -> Result<Self> {
        BuiltinArch::ALL
            .into_iter()
            .find(|a| a.as_str() == name)
            .ok_or_else(|| ArchError::UnknownArch {
                name: name.to_string(),
                valid: BuiltinArch::names(),
            })
    }
}

impl fmt::Display for BuiltinArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn builtin_arch(name: &str) -> Result<ArchSpec> {
    Ok(name.parse::<BuiltinArch>()?.spec())
}

const SMALL_WIDTHS: [usize; 4] = [32, 32, 64, 64];
const SMALL_FRAME: usize = 128;
const CONTEXT: usize = 16;
const LSTM_UNITS: usize = 128;

const ALPHA: usize = 4;
const BETA: f64 = 0.25;

fn single(input: ShapeState, layers: Vec<LayerSpec>, head: Vec<LayerSpec>) -> ArchSpec {
    ArchSpec {
        name: String::new(),
        pathways: vec![Pathway {
            name: "main".into(),
            input,
            layers,
        }],
        fusion: None,
        head,
        slowfast: None,
        reference_params_m: None,
    }
}

/// conv1..4 with a pool after each; `conv(name, width)` and `pool(name)` pick
/// the 2-D or 3-D variant.
fn small_trunk(
    widths: [usize; 4],
    conv: impl Fn(&str, usize) -> LayerSpec,
    pool: impl Fn(&str) -> LayerSpec,
) -> Vec<LayerSpec> {
    let mut layers = Vec::new();
    for (i, &w) in widths.iter().enumerate() {
        layers.push(conv(&format!("conv{}", i + 1), w).with_bias());
        layers.push(pool(&format!("pool{}", i + 1)));
    }
    layers
}

fn small_2d_trunk() -> Vec<LayerSpec> {
    small_trunk(
        SMALL_WIDTHS,
        |n, w| LayerSpec::conv2d(n, 3, w, 1),
        |n| LayerSpec::max_pool(n, Extent::new(1, 2), Extent::new(1, 2)),
    )
}

fn small_head() -> Vec<LayerSpec> {
    vec![
        LayerSpec::flatten(false),
        LayerSpec::dense("dense1", 1024),
        LayerSpec::dense("dense2", 2),
    ]
}

fn small_2d(channels: usize) -> ArchSpec {
    single(ShapeState::image(SMALL_FRAME, channels), small_2d_trunk(), small_head())
}

fn small_3d() -> ArchSpec {
    let layers = small_trunk(
        SMALL_WIDTHS,
        |n, w| LayerSpec::conv3d(n, Extent::new(3, 3), w, ONE),
        |n| LayerSpec::max_pool(n, Extent::new(2, 2), Extent::new(2, 2)),
    );
    single(ShapeState::volume(CONTEXT, SMALL_FRAME, 3), layers, small_head())
}

fn small_cnn_lstm() -> ArchSpec {
    single(
        ShapeState::volume(CONTEXT, SMALL_FRAME, 3),
        small_2d_trunk(),
        vec![
            LayerSpec::flatten(true),
            LayerSpec::dense("dense1", 1024),
            LayerSpec::lstm("lstm", LSTM_UNITS),
            LayerSpec::dense("dense2", 2),
        ],
    )
}

/// 3² conv producing 3 channels from stacked optical flow.
fn flow_adapter(small: bool) -> LayerSpec {
    let conv = LayerSpec::conv2d("conv0", 3, 3, 1);
    if small {
        conv.with_bias()
    } else {
        conv.with_batchnorm()
    }
}

/// Stacked horizontal and vertical flow for the 16-frame context.
const FLOW_STACK: usize = 2 * CONTEXT;

fn small_two_stream() -> ArchSpec {
    let mut flow_layers = vec![flow_adapter(true)];
    flow_layers.extend(small_2d_trunk());
    ArchSpec {
        name: String::new(),
        pathways: vec![
            Pathway {
                name: "frame".into(),
                input: ShapeState::image(SMALL_FRAME, 3),
                layers: small_2d_trunk(),
            },
            Pathway {
                name: "flow".into(),
                input: ShapeState::image(SMALL_FRAME, FLOW_STACK),
                layers: flow_layers,
            },
        ],
        fusion: Some(LayerSpec::fusion(FusionPool::None, Some((1, 64, 1))).with_bias()),
        head: small_head(),
        slowfast: None,
        reference_params_m: None,
    }
}

/// Lateral width: twice the fast pathway's channels.
fn lateral_width(fast_channels: usize) -> usize {
    2 * fast_channels
}

fn fast_width(slow: usize) -> usize {
    (slow as f64 * BETA).round() as usize
}

fn small_slowfast() -> ArchSpec {
    let fast_widths = SMALL_WIDTHS.map(fast_width);
    let pool = |n: &str| LayerSpec::max_pool(n, Extent::new(1, 2), Extent::new(1, 2));
    let fast = small_trunk(
        fast_widths,
        |n, w| LayerSpec::conv3d(n, Extent::new(3, 3), w, ONE),
        pool,
    );
    let mut slow = Vec::new();
    for (i, (&w, &fw)) in SMALL_WIDTHS.iter().zip(&fast_widths).enumerate() {
        let conv = format!("conv{}", i + 1);
        let pool_name = format!("pool{}", i + 1);
        slow.push(LayerSpec::conv3d(&conv, Extent::new(1, 3), w, ONE).with_bias());
        slow.push(pool(&pool_name));
        slow.push(
            LayerSpec::lateral(&format!("lateral{}", i + 1), "fast", &pool_name, 3, lateral_width(fw))
                .with_bias(),
        );
    }
    ArchSpec {
        name: String::new(),
        pathways: vec![
            Pathway {
                name: "slow".into(),
                input: ShapeState::volume(CONTEXT / ALPHA, SMALL_FRAME, 3),
                layers: slow,
            },
            Pathway {
                name: "fast".into(),
                input: ShapeState::volume(CONTEXT, SMALL_FRAME, 3),
                layers: fast,
            },
        ],
        fusion: Some(LayerSpec::fusion(FusionPool::Temporal, Some((3, 64, 1))).with_bias()),
        head: small_head(),
        slowfast: Some(SlowFastFactors {
            alpha: ALPHA,
            beta: BETA,
        }),
        reference_params_m: None,
    }
}

const RESNET_MID: [usize; 4] = [64, 128, 256, 512];
const RESNET_OUT: [usize; 4] = [256, 512, 1024, 2048];
const RESNET_DEPTH: [usize; 4] = [3, 4, 6, 3];
const IMAGENET_FRAME: usize = 224;

/// res2..res5 with first-conv temporal kernels `kts` and strides `strides`,
/// widths scaled by `scale` (1.0 for the full network).
fn res_stages(kts: [usize; 4], strides: [Extent; 4], scale: f64) -> Vec<LayerSpec> {
    (0..4)
        .map(|i| {
            let w = |c: usize| (c as f64 * scale).round() as usize;
            LayerSpec::bottleneck(
                &format!("res{}", i + 2),
                kts[i],
                w(RESNET_MID[i]),
                w(RESNET_OUT[i]),
                RESNET_DEPTH[i],
                strides[i],
            )
            .with_batchnorm()
        })
        .collect()
}

const RES_STRIDES_2D: [Extent; 4] = [
    Extent::new(1, 1),
    Extent::new(1, 2),
    Extent::new(1, 2),
    Extent::new(1, 2),
];

/// ImageNet ResNet-50 trunk (applied per frame on clips).
fn resnet_2d_trunk() -> Vec<LayerSpec> {
    let mut layers = vec![
        LayerSpec::conv2d("conv1", 7, 64, 2).with_batchnorm(),
        LayerSpec::max_pool("pool1", Extent::new(1, 3), Extent::new(1, 2)),
    ];
    layers.extend(res_stages([1; 4], RES_STRIDES_2D, 1.0));
    layers
}

fn resnet_head() -> Vec<LayerSpec> {
    vec![
        LayerSpec::spatial_pool(),
        LayerSpec::flatten(false),
        LayerSpec::dense("dense", 2),
    ]
}

fn resnet_2d(flow: bool) -> ArchSpec {
    let mut layers = Vec::new();
    if flow {
        layers.push(flow_adapter(false));
    }
    layers.extend(resnet_2d_trunk());
    let channels = if flow { 2 } else { 3 };
    single(ShapeState::image(IMAGENET_FRAME, channels), layers, resnet_head())
}

fn resnet_3d() -> ArchSpec {
    let mut layers = vec![
        LayerSpec::conv3d("conv1", Extent::new(3, 5), 64, ONE).with_batchnorm(),
        LayerSpec::max_pool("pool1", Extent::new(3, 3), Extent::new(2, 2)),
    ];
    layers.extend(res_stages(
        [3; 4],
        [
            Extent::new(1, 1),
            Extent::new(2, 2),
            Extent::new(2, 2),
            Extent::new(2, 2),
        ],
        1.0,
    ));
    single(ShapeState::volume(CONTEXT, SMALL_FRAME, 3), layers, resnet_head())
}

fn resnet_cnn_lstm() -> ArchSpec {
    single(
        ShapeState::volume(CONTEXT, IMAGENET_FRAME, 3),
        resnet_2d_trunk(),
        vec![
            LayerSpec::spatial_pool(),
            LayerSpec::flatten(true),
            LayerSpec::lstm("lstm", LSTM_UNITS),
            LayerSpec::dense("dense", 2),
        ],
    )
}

fn resnet_two_stream() -> ArchSpec {
    let mut flow_layers = vec![flow_adapter(false)];
    flow_layers.extend(resnet_2d_trunk());
    let c = RESNET_OUT[3];
    ArchSpec {
        name: String::new(),
        pathways: vec![
            Pathway {
                name: "frame".into(),
                input: ShapeState::image(IMAGENET_FRAME, 3),
                layers: resnet_2d_trunk(),
            },
            Pathway {
                name: "flow".into(),
                input: ShapeState::image(IMAGENET_FRAME, FLOW_STACK),
                layers: flow_layers,
            },
        ],
        // each output channel combines the matching channel of both streams
        fusion: Some(LayerSpec::fusion(FusionPool::None, Some((1, c, c))).with_batchnorm()),
        head: resnet_head(),
        slowfast: None,
        reference_params_m: None,
    }
}

fn resnet_slowfast() -> ArchSpec {
    let slow_frames = 2;
    let fast_scale = BETA;
    let mut fast = vec![
        LayerSpec::conv3d("conv1", Extent::new(3, 5), fast_width(64), ONE).with_batchnorm(),
        LayerSpec::max_pool("pool1", Extent::new(1, 3), Extent::new(1, 2)),
    ];
    fast.extend(res_stages([3; 4], RES_STRIDES_2D, fast_scale));

    let lateral = |name: &str, src: &str, slow_channels: usize| {
        LayerSpec::lateral(name, "fast", src, 3, lateral_width(fast_width(slow_channels)))
            .with_batchnorm()
    };
    let stages = res_stages([1, 1, 3, 3], RES_STRIDES_2D, 1.0);
    let mut slow = vec![
        LayerSpec::conv3d("conv1", Extent::new(1, 5), 64, ONE).with_batchnorm(),
        LayerSpec::max_pool("pool1", Extent::new(1, 3), Extent::new(1, 2)),
        lateral("lateral1", "pool1", 64),
    ];
    for (i, stage) in stages.into_iter().enumerate() {
        let name = stage.name.clone();
        slow.push(stage);
        if i < 3 {
            slow.push(lateral(&format!("lateral{}", i + 2), &name, RESNET_OUT[i]));
        }
    }
    ArchSpec {
        name: String::new(),
        pathways: vec![
            Pathway {
                name: "slow".into(),
                input: ShapeState::volume(slow_frames, SMALL_FRAME, 3),
                layers: slow,
            },
            Pathway {
                name: "fast".into(),
                input: ShapeState::volume(CONTEXT, SMALL_FRAME, 3),
                layers: fast,
            },
        ],
        fusion: Some(LayerSpec::fusion(FusionPool::Global, None)),
        head: vec![LayerSpec::flatten(false), LayerSpec::dense("dense", 2)],
        slowfast: Some(SlowFastFactors {
            alpha: ALPHA,
            beta: BETA,
        }),
        reference_params_m: None,
    }
}
