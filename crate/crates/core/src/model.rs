//! Encoder-decoder landmark network.
//!
//! ```text
//! 256x256x3 -> stem (3x3/2) -> Low (downsample)            128 -> 64
//!           -> Middle hourglass (down x depth, up x depth)  64 -> .. -> 64
//!           -> High (3 downsample blocks)                   64 -> 8
//!           -> 3 transposed convs                           8 -> 64
//!           -> 1x1 head                                     64x64x21
//! ```
//!
//! Every residual branch is one depthwise-separable convolution; activations
//! are ReLU and normalization is assumed folded into the conv weights.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::{
    add_in_place, conv2d, depthwise_separable_conv, pointwise_conv, relu_in_place,
    resize_bilinear, transposed_conv2d, Padding,
};
use crate::tensor::{ConvWeights, Tensor};
use crate::weights::{NamedTensor, WeightStore};

pub const INPUT_SIZE: usize = 256;
pub const INPUT_CHANNELS: usize = 3;
pub const ENCODER_OUTPUT_SIZE: usize = 8;
pub const HEATMAP_SIZE: usize = 64;
pub const NUM_LANDMARKS: usize = 21;
pub const DECODER_STAGES: usize = 3;
pub const HIGH_STAGES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelConfig {
    /// Channels after the stride-2 stem.
    pub stem_channels: usize,
    /// Channels leaving the Low part; the Middle hourglass runs at this width.
    pub low_channels: usize,
    /// Number of down (and up) stages inside the Middle hourglass.
    pub middle_depth: usize,
    /// Output channels of the three High downsample blocks.
    pub high_channels: Vec<usize>,
    pub low_repeats: usize,
    pub middle_repeats: usize,
    pub high_repeats: usize,
    /// Output channels of the three transposed convolutions.
    pub decoder_channels: Vec<usize>,
    pub depthwise_kernel: usize,
    pub deconv_kernel: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            stem_channels: 32,
            low_channels: 64,
            middle_depth: 2,
            high_channels: vec![96, 192, 192],
            low_repeats: 4,
            middle_repeats: 4,
            high_repeats: 4,
            decoder_channels: vec![96, 48, 48],
            depthwise_kernel: 3,
            deconv_kernel: 4,
        }
    }
}

impl ModelConfig {
    /// Narrow, shallow schedule for fast tests and demos.
    pub fn tiny() -> Self {
        Self {
            stem_channels: 8,
            low_channels: 12,
            middle_depth: 1,
            high_channels: vec![16, 24, 24],
            low_repeats: 1,
            middle_repeats: 1,
            high_repeats: 1,
            decoder_channels: vec![16, 16, 16],
            depthwise_kernel: 3,
            deconv_kernel: 4,
        }
    }

    /// Deeper hourglass with 5x5 depthwise kernels.
    pub fn deep() -> Self {
        Self {
            stem_channels: 24,
            low_channels: 48,
            middle_depth: 3,
            high_channels: vec![64, 128, 160],
            low_repeats: 2,
            middle_repeats: 2,
            high_repeats: 3,
            decoder_channels: vec![128, 64, 32],
            depthwise_kernel: 5,
            deconv_kernel: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stem_channels", self.stem_channels),
            ("low_channels", self.low_channels),
            ("low_repeats", self.low_repeats),
            ("middle_repeats", self.middle_repeats),
            ("high_repeats", self.high_repeats),
            ("depthwise_kernel", self.depthwise_kernel),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.high_channels.len() != HIGH_STAGES {
            return Err(Error::Config(format!(
                "high part needs exactly {HIGH_STAGES} stages to reach {ENCODER_OUTPUT_SIZE}x{ENCODER_OUTPUT_SIZE}, got {}",
                self.high_channels.len()
            )));
        }
        if self.decoder_channels.len() != DECODER_STAGES {
            return Err(Error::Config(format!(
                "decoder needs exactly {DECODER_STAGES} transposed convs, got {}",
                self.decoder_channels.len()
            )));
        }
        if self.high_channels.iter().chain(&self.decoder_channels).any(|&c| c == 0) {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        if self.depthwise_kernel % 2 == 0 {
            return Err(Error::Config("depthwise kernel must be odd".into()));
        }
        if crate::kernels::transposed_padding(self.deconv_kernel, 2).is_none() {
            return Err(Error::Config(format!(
                "deconv kernel {} cannot upsample by exactly 2",
                self.deconv_kernel
            )));
        }
        let middle_entry = INPUT_SIZE / 4;
        if self.middle_depth == 0 || (middle_entry >> self.middle_depth) < 2
            || middle_entry % (1 << self.middle_depth) != 0
        {
            return Err(Error::Config(format!(
                "middle depth {} does not fit a {middle_entry}x{middle_entry} entry",
                self.middle_depth
            )));
        }
        if self.encoder_output_size() != ENCODER_OUTPUT_SIZE
            || self.output_size() != HEATMAP_SIZE
        {
            return Err(Error::Config("spatial schedule does not reach 8x8 / 64x64".into()));
        }
        Ok(())
    }

    /// Encoder output side for a 256x256 input.
    pub fn encoder_output_size(&self) -> usize {
        // stem, Low, then one halving per High stage; the hourglass is size-neutral.
        INPUT_SIZE >> (2 + self.high_channels.len())
    }

    pub fn output_size(&self) -> usize {
        self.encoder_output_size() << self.decoder_channels.len()
    }

    pub fn encoder_output_channels(&self) -> usize {
        *self.high_channels.last().unwrap_or(&self.low_channels)
    }

    /// Number of stride-2 stages on the main encoder path (stem included).
    pub fn net_halvings(&self) -> usize {
        2 + self.high_channels.len()
    }
}

/// How fresh parameters are produced while building.
pub enum WeightSource<'a> {
    /// Fan-in scaled uniform values from a seeded generator; biases are zero.
    Seed(u64),
    Store(&'a WeightStore),
}

struct Binder<'a> {
    source: WeightSource<'a>,
    rng: ChaCha8Rng,
    table: WeightStore,
}

impl Binder<'_> {
    fn tensor(&mut self, name: &str, dims: Vec<usize>, fan_in: usize, gain: f32) -> Result<Vec<f32>> {
        let n: usize = dims.iter().product();
        let data = match &self.source {
            WeightSource::Seed(_) => {
                let is_bias = name.ends_with(".bias");
                if is_bias {
                    vec![0.0; n]
                } else {
                    let bound = gain * (3.0 / fan_in as f32).sqrt();
                    (0..n).map(|_| self.rng.random_range(-bound..=bound)).collect()
                }
            }
            WeightSource::Store(store) => {
                let t = store.get(name).ok_or_else(|| Error::Format {
                    tensor: name.to_string(),
                    reason: "missing from weight store".into(),
                })?;
                if t.dims != dims {
                    return Err(Error::Format {
                        tensor: name.to_string(),
                        reason: format!("shape {:?} does not match expected {dims:?}", t.dims),
                    });
                }
                t.data.clone()
            }
        };
        self.table.insert(name, NamedTensor::new(dims, data.clone())?)?;
        Ok(data)
    }

    fn dense(&mut self, name: &str, k: usize, cin: usize, cout: usize, gain: f32) -> Result<ConvWeights> {
        let w = self.tensor(&format!("{name}.weight"), vec![k, k, cin, cout], k * k * cin, gain)?;
        let b = self.tensor(&format!("{name}.bias"), vec![cout], 1, gain)?;
        ConvWeights::dense(k, k, cin, cout, w, b)
    }

    fn depthwise(&mut self, name: &str, k: usize, c: usize) -> Result<ConvWeights> {
        let w = self.tensor(&format!("{name}.weight"), vec![k, k, c], k * k, 1.0)?;
        let b = self.tensor(&format!("{name}.bias"), vec![c], 1, 1.0)?;
        ConvWeights::depthwise(k, k, c, w, b)
    }
}

/// `relu(shortcut(x) + pw(dw(x)))`, with a 1x1 projection shortcut whenever
/// the block changes width or stride.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub depthwise: ConvWeights,
    pub pointwise: ConvWeights,
    pub projection: Option<ConvWeights>,
    pub stride: usize,
}

impl ResidualBlock {
    fn bind(b: &mut Binder<'_>, name: &str, k: usize, cin: usize, cout: usize, stride: usize, gain: f32) -> Result<Self> {
        let depthwise = b.depthwise(&format!("{name}.dw"), k, cin)?;
        let pointwise = b.dense(&format!("{name}.pw"), 1, cin, cout, gain)?;
        let projection = if cin != cout || stride != 1 {
            Some(b.dense(&format!("{name}.proj"), 1, cin, cout, 1.0)?)
        } else {
            None
        };
        Ok(Self {
            depthwise,
            pointwise,
            projection,
            stride,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.depthwise.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.pointwise.out_channels()
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.channels() != self.in_channels() {
            return Err(Error::contract(format!(
                "residual block expects {} channels, got {}",
                self.in_channels(),
                input.channels()
            )));
        }
        let mut out = depthwise_separable_conv(input, &self.depthwise, &self.pointwise, self.stride)?;
        match &self.projection {
            Some(p) => add_in_place(&mut out, &conv2d(input, p, self.stride, Padding::Same)?)?,
            None => add_in_place(&mut out, input)?,
        }
        relu_in_place(&mut out);
        Ok(out)
    }

    fn param_count(&self) -> usize {
        self.depthwise.param_count()
            + self.pointwise.param_count()
            + self.projection.as_ref().map_or(0, ConvWeights::param_count)
    }
}

/// Residual blocks at the input width, then a stride-2 residual reduction.
#[derive(Debug, Clone)]
pub struct DownsampleBlock {
    pub blocks: Vec<ResidualBlock>,
    pub reduce: ResidualBlock,
}

impl DownsampleBlock {
    fn bind(b: &mut Binder<'_>, name: &str, k: usize, cin: usize, cout: usize, repeats: usize) -> Result<Self> {
        let gain = 1.0 / (repeats as f32 + 1.0).sqrt();
        let blocks = (0..repeats)
            .map(|i| ResidualBlock::bind(b, &format!("{name}.res{i}"), k, cin, cin, 1, gain))
            .collect::<Result<_>>()?;
        let reduce = ResidualBlock::bind(b, &format!("{name}.reduce"), k, cin, cout, 2, gain)?;
        Ok(Self { blocks, reduce })
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        if input.height() % 2 != 0 || input.width() % 2 != 0 {
            return Err(Error::contract(format!(
                "downsample needs even spatial size, got {}x{}",
                input.height(),
                input.width()
            )));
        }
        let mut x = input.clone();
        for block in &self.blocks {
            x = block.forward(&x)?;
        }
        self.reduce.forward(&x)
    }

    fn param_count(&self) -> usize {
        self.blocks.iter().map(ResidualBlock::param_count).sum::<usize>() + self.reduce.param_count()
    }
}

/// Residual blocks, 1x1 conv to the skip width, bilinear x2, then add the skip.
#[derive(Debug, Clone)]
pub struct UpsampleBlock {
    pub blocks: Vec<ResidualBlock>,
    pub conv: ConvWeights,
}

impl UpsampleBlock {
    fn bind(b: &mut Binder<'_>, name: &str, k: usize, cin: usize, cout: usize, repeats: usize) -> Result<Self> {
        let gain = 1.0 / (repeats as f32 + 1.0).sqrt();
        let blocks = (0..repeats)
            .map(|i| ResidualBlock::bind(b, &format!("{name}.res{i}"), k, cin, cin, 1, gain))
            .collect::<Result<_>>()?;
        let conv = b.dense(&format!("{name}.conv"), 1, cin, cout, gain)?;
        Ok(Self { blocks, conv })
    }

    pub fn forward(&self, input: &Tensor, skip: &Tensor) -> Result<Tensor> {
        if skip.height() != 2 * input.height() || skip.width() != 2 * input.width() {
            return Err(Error::contract(format!(
                "upsample skip must be twice the input size: input {}x{}, skip {}x{}",
                input.height(),
                input.width(),
                skip.height(),
                skip.width()
            )));
        }
        if skip.channels() != self.conv.out_channels() {
            return Err(Error::contract(format!(
                "upsample skip has {} channels, block produces {}",
                skip.channels(),
                self.conv.out_channels()
            )));
        }
        let mut x = input.clone();
        for block in &self.blocks {
            x = block.forward(&x)?;
        }
        let x = pointwise_conv(&x, &self.conv)?;
        let mut up = resize_bilinear(&x, skip.height(), skip.width())?;
        add_in_place(&mut up, skip)?;
        Ok(up)
    }

    fn param_count(&self) -> usize {
        self.blocks.iter().map(ResidualBlock::param_count).sum::<usize>() + self.conv.param_count()
    }
}

/// Internal encoder-decoder of the Middle part.
#[derive(Debug, Clone)]
pub struct Hourglass {
    pub down: Vec<DownsampleBlock>,
    /// Ordered from the lowest resolution back up to the entry resolution.
    pub up: Vec<UpsampleBlock>,
}

impl Hourglass {
    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let mut skips = Vec::with_capacity(self.down.len());
        let mut x = input.clone();
        for d in &self.down {
            let next = d.forward(&x)?;
            skips.push(x);
            x = next;
        }
        for (u, skip) in self.up.iter().zip(skips.iter().rev()) {
            x = u.forward(&x, skip)?;
        }
        Ok(x)
    }
}

/// Intermediate feature maps captured during one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTaps {
    pub low: Tensor,
    pub middle: Tensor,
    pub encoder: Tensor,
    pub heatmaps: Tensor,
}

#[derive(Debug, Clone)]
pub struct Model {
    config: ModelConfig,
    pub stem: ConvWeights,
    pub low: DownsampleBlock,
    pub middle: Hourglass,
    pub high: Vec<DownsampleBlock>,
    pub deconvs: Vec<ConvWeights>,
    pub head: ConvWeights,
    params: WeightStore,
}

/// Builds the network for `config`, binding weights from a store or a seed.
pub fn build_fasthand(config: &ModelConfig, source: WeightSource<'_>) -> Result<Model> {
    config.validate()?;
    let seed = match source {
        WeightSource::Seed(s) => s,
        WeightSource::Store(_) => 0,
    };
    let mut b = Binder {
        source,
        rng: ChaCha8Rng::seed_from_u64(seed),
        table: WeightStore::new(),
    };
    let k = config.depthwise_kernel;

    let stem = b.dense("stem", 3, INPUT_CHANNELS, config.stem_channels, 2f32.sqrt())?;
    let low = DownsampleBlock::bind(&mut b, "low", k, config.stem_channels, config.low_channels, config.low_repeats)?;

    let c = config.low_channels;
    let down = (0..config.middle_depth)
        .map(|i| DownsampleBlock::bind(&mut b, &format!("middle.down{i}"), k, c, c, config.middle_repeats))
        .collect::<Result<Vec<_>>>()?;
    let up = (0..config.middle_depth)
        .map(|i| UpsampleBlock::bind(&mut b, &format!("middle.up{i}"), k, c, c, config.middle_repeats))
        .collect::<Result<Vec<_>>>()?;

    let mut cin = c;
    let mut high = Vec::with_capacity(config.high_channels.len());
    for (i, &cout) in config.high_channels.iter().enumerate() {
        high.push(DownsampleBlock::bind(&mut b, &format!("high{i}"), k, cin, cout, config.high_repeats)?);
        cin = cout;
    }

    let mut deconvs = Vec::with_capacity(config.decoder_channels.len());
    for (i, &cout) in config.decoder_channels.iter().enumerate() {
        // each output cell sees roughly (k/2)^2 input taps
        let dk = config.deconv_kernel;
        let fan_in_gain = 2f32.sqrt() * ((dk * dk) as f32 / ((dk / 2) * (dk / 2)) as f32).sqrt();
        deconvs.push(b.dense(&format!("decoder.deconv{i}"), dk, cin, cout, fan_in_gain)?);
        cin = cout;
    }
    let head = b.dense("head", 1, cin, NUM_LANDMARKS, 1.0)?;

    if let WeightSource::Store(store) = &b.source {
        if let Some(extra) = store.names().find(|n| b.table.get(n).is_none()) {
            return Err(Error::Format {
                tensor: extra.to_string(),
                reason: "not used by this model config".into(),
            });
        }
    }

    Ok(Model {
        config: config.clone(),
        stem,
        low,
        middle: Hourglass { down, up },
        high,
        deconvs,
        head,
        params: b.table,
    })
}

impl Model {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Named parameter table, in serialization order.
    pub fn params(&self) -> &WeightStore {
        &self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.element_count()
    }

    /// Parameter count obtained by walking the bound layers.
    pub fn layer_param_count(&self) -> usize {
        self.stem.param_count()
            + self.low.param_count()
            + self.middle.down.iter().map(DownsampleBlock::param_count).sum::<usize>()
            + self.middle.up.iter().map(UpsampleBlock::param_count).sum::<usize>()
            + self.high.iter().map(DownsampleBlock::param_count).sum::<usize>()
            + self.deconvs.iter().map(ConvWeights::param_count).sum::<usize>()
            + self.head.param_count()
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        self.params.save(path)
    }

    pub fn load(config: &ModelConfig, path: impl AsRef<Path>) -> Result<Self> {
        let store = load_weights(path)?;
        build_fasthand(config, WeightSource::Store(&store))
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        Ok(self.forward_with_taps(input)?.heatmaps)
    }

    pub fn forward_with_taps(&self, input: &Tensor) -> Result<ForwardTaps> {
        if input.shape() != (INPUT_SIZE, INPUT_SIZE, INPUT_CHANNELS) {
            return Err(Error::contract(format!(
                "model input must be {INPUT_SIZE}x{INPUT_SIZE}x{INPUT_CHANNELS}, got {:?}",
                input.shape()
            )));
        }
        let mut x = conv2d(input, &self.stem, 2, Padding::Same)?;
        relu_in_place(&mut x);
        let low = self.low.forward(&x)?;
        let middle = self.middle.forward(&low)?;
        let mut x = middle.clone();
        for block in &self.high {
            x = block.forward(&x)?;
        }
        let encoder = x.clone();
        for deconv in &self.deconvs {
            x = transposed_conv2d(&x, deconv, 2)?;
            relu_in_place(&mut x);
        }
        let heatmaps = pointwise_conv(&x, &self.head)?;
        Ok(ForwardTaps {
            low,
            middle,
            encoder,
            heatmaps,
        })
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<WeightStore> {
    WeightStore::load(path)
}
