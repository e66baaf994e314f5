//! The degradation network: residual-block encoder, adaptive blurring layer
//! and strided decoder.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::conv::{abl_mix, conv2d, PadMode, Padding};
// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::FloatExt;
use crate::gauss::{build_bank, rescale_bank, BankSpec, KernelBank, KernelError};
use crate::image::{GrayImage, ImageError};
use crate::rng::Rng;
use crate::tensor::{add, relu, softmax_rows, Tensor, TensorError};

#[derive(Clone, Debug, PartialEq)]
pub enum NetError {
    /// Only scales 2, 4 and 8 have a decoder stride plan.
    UnsupportedScale(usize),
    ZeroChannels,
    /// Input spatial size not divisible by the model scale.
    NotDivisible { height: usize, width: usize, scale: usize },
    /// Input must be [N, 1, H, W].
    NotSingleChannel(Vec<usize>),
    /// A named parameter was missing while loading.
    MissingParameter(String),
    /// A named parameter had the wrong shape while loading.
    ParameterShape { name: String, expected: Vec<usize>, got: usize },
    UnknownParameter(String),
    Kernel(KernelError),
    Tensor(TensorError),
    Image(ImageError),
}

impl fmt::Display for NetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetError::UnsupportedScale(s) => write!(f, "unsupported scale {s} (expected 2, 4 or 8)"),
            NetError::ZeroChannels => write!(f, "channel count must be >= 1"),
            NetError::NotDivisible { height, width, scale } => {
                write!(f, "input {height}x{width} not divisible by scale {scale}")
            }
            NetError::NotSingleChannel(s) => {
                write!(f, "expected [N, 1, H, W] grayscale input, got {s:?}")
            }
            NetError::MissingParameter(name) => write!(f, "missing parameter {name}"),
            NetError::ParameterShape { name, expected, got } => {
                write!(f, "parameter {name}: expected shape {expected:?}, got {got} values")
            }
            NetError::UnknownParameter(name) => write!(f, "unknown parameter {name}"),
            NetError::Kernel(e) => write!(f, "{e}"),
            NetError::Tensor(e) => write!(f, "{e}"),
            NetError::Image(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for NetError {}

impl From<KernelError> for NetError {
    fn from(e: KernelError) -> Self {
        NetError::Kernel(e)
    }
}

impl From<TensorError> for NetError {
    fn from(e: TensorError) -> Self {
        NetError::Tensor(e)
    }
}

impl From<ImageError> for NetError {
    fn from(e: ImageError) -> Self {
        NetError::Image(e)
    }
}

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    /// Width of the high-dimensional representation.
    pub channels: usize,
    pub num_resblocks: usize,
    /// HR to LR size ratio; one stride-2 decoder block per halving.
    pub scale: usize,
    pub bank: BankSpec,
}

impl NetConfig {
    /// Laptop-scale defaults: 16 channels, 4 residual blocks, the default
    /// four-orientation bank at factor 1.
    pub fn desk(scale: usize) -> NetConfig {
        NetConfig {
            channels: 16,
            num_resblocks: 4,
            scale,
            bank: BankSpec::with_factors(vec![1.0]),
        }
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.channels == 0 {
            return Err(NetError::ZeroChannels);
        }
        self.down_steps()?;
        self.bank.validate()?;
        Ok(())
    }

    pub fn down_steps(&self) -> Result<usize, NetError> {
        match self.scale {
            2 => Ok(1),
            4 => Ok(2),
            8 => Ok(3),
            s => Err(NetError::UnsupportedScale(s)),
        }
    }
}

#[derive(Clone)]
struct ConvLayer {
    weight: Tensor,
    bias: Tensor,
    stride: usize,
    pad: Padding,
}

impl ConvLayer {
    /// He-normal weights (fan-in scaled for ReLU), zero bias.
    fn init(rng: &mut Rng, out_c: usize, in_c: usize, k: usize, stride: usize, pad: Padding) -> ConvLayer {
        let std = (2.0 / (in_c * k * k) as f64).sqrt();
        let data: Vec<f64> = (0..out_c * in_c * k * k).map(|_| std * rng.normal()).collect();
        ConvLayer {
            weight: Tensor::param(&[out_c, in_c, k, k], data).expect("shape matches data"),
            bias: Tensor::param(&[out_c], vec![0.0; out_c]).expect("shape matches data"),
            stride,
            pad,
        }
    }

    /// Zero weights with a constant bias. Used for the closing conv of each
    /// residual block (so blocks start as the identity) and the decoder
    /// output layer (so predictions start at mid-gray instead of the
    /// He-init amplitude, which costs hundreds of steps to unlearn).
    fn zeros(out_c: usize, in_c: usize, k: usize, stride: usize, pad: Padding, bias: f64) -> ConvLayer {
        ConvLayer {
            weight: Tensor::param(&[out_c, in_c, k, k], vec![0.0; out_c * in_c * k * k])
                .expect("shape matches data"),
            bias: Tensor::param(&[out_c], vec![bias; out_c]).expect("shape matches data"),
            stride,
            pad,
        }
    }

    /// Per-channel delta kernel with a chosen tap: each channel passes one
    /// sample through. A stride-2 delta layer starts as exact 2x
    /// subsampling, so the decoder begins as a stride-subsample of the
    /// blurred features instead of a random mixing it would first have to
    /// unlearn. The tap offset picks the subsampling phase.
    fn delta(c: usize, k: usize, stride: usize, pad: Padding, tap_shift: usize) -> ConvLayer {
        let mut data = vec![0.0; c * c * k * k];
        let center = (k - 1) / 2 + tap_shift;
        for ch in 0..c {
            data[((ch * c + ch) * k + center) * k + center] = 1.0;
        }
        ConvLayer {
            weight: Tensor::param(&[c, c, k, k], data).expect("shape matches data"),
            bias: Tensor::param(&[c], vec![0.0; c]).expect("shape matches data"),
            stride,
            pad,
        }
    }

    fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        conv2d(x, &self.weight, &self.bias, self.stride, self.pad)
    }
}

struct ResBlock {
    conv1: ConvLayer,
    conv2: ConvLayer,
}

impl ResBlock {
    /// conv -> ReLU -> conv plus the identity skip; no normalization.
    fn forward(&self, x: &Tensor) -> Result<Tensor, TensorError> {
        let y = self.conv2.forward(&relu(&self.conv1.forward(x)?))?;
        add(x, &y)
    }
}

/// Encoder, mixture logits, decoder and the fixed kernel bank.
///
/// The bank kernels are plain data, not graph tensors: no gradient can
/// reach them and they never appear in the optimizer's parameter list.
pub struct DegradationModel {
    config: NetConfig,
    conv_in: ConvLayer,
    blocks: Vec<ResBlock>,
    abl_logits: Tensor,
    down: Vec<ConvLayer>,
    out: ConvLayer,
    bank: KernelBank,
}

impl fmt::Debug for DegradationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DegradationModel")
            .field("config", &self.config)
            .field("kernels", &self.bank.len())
            .finish()
    }
}

impl DegradationModel {
    /// Builds a freshly initialized model; the seed pins every weight.
    pub fn new(config: NetConfig, seed: u64) -> Result<DegradationModel, NetError> {
        config.validate()?;
        let bank = build_bank(&config.bank)?;
        let mut rng = Rng::new(seed);
        let c = config.channels;
        let reflect1 = Padding::symmetric(PadMode::Reflect, 1);
        // Identity-plus-noise embedding: every channel starts close to the
        // input image, so features stay in the image's positive range and
        // the decoder ReLUs start alive. Pure He init here leaves half the
        // features negative, and the first blocked layer kills the whole
        // serial decoder path for good.
        let conv_in = {
            let layer = ConvLayer::init(&mut rng, c, 1, 3, 1, reflect1);
            let mut w = layer.weight.to_vec();
            for (i, v) in w.iter_mut().enumerate() {
                *v *= 0.1;
                if i % 9 == 4 {
                    *v += 1.0;
                }
            }
            layer.weight.set_data(&w).expect("same shape");
            layer
        };
        let blocks = (0..config.num_resblocks)
            .map(|_| ResBlock {
                conv1: ConvLayer::init(&mut rng, c, c, 3, 1, reflect1),
                conv2: ConvLayer::zeros(c, c, 3, 1, reflect1, 0.0),
            })
            .collect();
        // Uniform mixture at initialization.
        let abl_logits = Tensor::param(&[c, bank.len()], vec![0.0; c * bank.len()])
            .expect("shape matches data");
        let steps = config.down_steps()?;
        // Delta taps realize an initial decoder phase of scale/2 - 1, so
        // the initial model samples at block centers: the flip-invariant
        // alignment the synthetic ground truth and the bicubic baseline
        // both use. Layer i contributes 2^i pixels of phase.
        let phase = config.scale / 2 - 1;
        let down = (0..steps)
            .map(|i| ConvLayer::delta(c, 3, 2, reflect1, (phase >> i) & 1))
            .collect();
        // Channel-mean readout: together with the near-identity embedding
        // and delta decoder, the untrained model already computes
        // blur-and-subsample under the uniform kernel mixture. Training
        // starts from the degradation prior instead of from noise.
        let out = {
            let mut w = vec![0.0; c * 9];
            for ch in 0..c {
                w[ch * 9 + 4] = 1.0 / c as f64;
            }
            ConvLayer {
                weight: Tensor::param(&[1, c, 3, 3], w).expect("shape matches data"),
                bias: Tensor::param(&[1], vec![0.0]).expect("shape matches data"),
                stride: 1,
                pad: reflect1,
            }
        };
        Ok(DegradationModel { config, conv_in, blocks, abl_logits, down, out, bank })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn abl_logits(&self) -> &Tensor {
        &self.abl_logits
    }

    /// Current per-channel mixture weights (softmax of the logits),
    /// row-major [channels, kernels].
    pub fn mixture_weights(&self) -> Vec<f64> {
        softmax_rows(&self.abl_logits)
            .expect("logits are 2-d")
            .to_vec()
    }

    /// Trainable parameters in a fixed order; bank kernels are excluded.
    pub fn parameters(&self) -> Vec<Tensor> {
        self.named_parameters().into_iter().map(|(_, t)| t).collect()
    }

    /// Stable (name, tensor) pairs for checkpointing.
    pub fn named_parameters(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        out.push((String::from("conv_in.weight"), self.conv_in.weight.clone()));
        out.push((String::from("conv_in.bias"), self.conv_in.bias.clone()));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("block{i}.conv1.weight"), b.conv1.weight.clone()));
            out.push((format!("block{i}.conv1.bias"), b.conv1.bias.clone()));
            out.push((format!("block{i}.conv2.weight"), b.conv2.weight.clone()));
            out.push((format!("block{i}.conv2.bias"), b.conv2.bias.clone()));
        }
        out.push((String::from("abl_logits"), self.abl_logits.clone()));
        for (i, d) in self.down.iter().enumerate() {
            out.push((format!("down{i}.weight"), d.weight.clone()));
            out.push((format!("down{i}.bias"), d.bias.clone()));
        }
        out.push((String::from("out.weight"), self.out.weight.clone()));
        out.push((String::from("out.bias"), self.out.bias.clone()));
        out
    }

    /// Overwrites one named parameter; used when restoring a checkpoint.
    pub fn load_parameter(&self, name: &str, values: &[f64]) -> Result<(), NetError> {
        for (n, t) in self.named_parameters() {
            if n == name {
                t.set_data(values).map_err(|_| NetError::ParameterShape {
                    name: String::from(name),
                    expected: t.shape().to_vec(),
                    got: values.len(),
                })?;
                return Ok(());
            }
        }
        Err(NetError::UnknownParameter(String::from(name)))
    }

    fn check_input(&self, hr: &Tensor) -> Result<(usize, usize), NetError> {
        let s = hr.shape();
        if s.len() != 4 || s[1] != 1 {
            return Err(NetError::NotSingleChannel(s.to_vec()));
        }
        Ok((s[2], s[3]))
    }

    /// Stride-1 encoder; spatial size preserved.
    pub fn encode(&self, hr: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(hr)?;
        let mut x = self.conv_in.forward(hr)?;
        for b in &self.blocks {
            x = b.forward(&x)?;
        }
        Ok(x)
    }

    /// Channel-wise mixture blur over the fixed bank; gradients reach the
    /// logits and the features but never the kernels.
    pub fn abl_forward(&self, feat: &Tensor) -> Result<Tensor, NetError> {
        let weights = softmax_rows(&self.abl_logits)?;
        Ok(abl_mix(feat, &weights, &self.bank)?)
    }

    /// Strided decoder down to one channel; the final layer is linear and
    /// the output is left unclamped.
    pub fn decode(&self, feat: &Tensor) -> Result<Tensor, NetError> {
        let s = feat.shape();
        if s.len() != 4 {
            return Err(NetError::NotSingleChannel(s.to_vec()));
        }
        if s[2] % self.config.scale != 0 || s[3] % self.config.scale != 0 {
            return Err(NetError::NotDivisible {
                height: s[2],
                width: s[3],
                scale: self.config.scale,
            });
        }
        let mut x = feat.clone();
        for d in &self.down {
            x = relu(&d.forward(&x)?);
        }
        Ok(self.out.forward(&x)?)
    }

    /// encode -> abl_forward -> decode.
    pub fn forward(&self, hr: &Tensor) -> Result<Tensor, NetError> {
        let (h, w) = self.check_input(hr)?;
        if h % self.config.scale != 0 || w % self.config.scale != 0 {
            return Err(NetError::NotDivisible { height: h, width: w, scale: self.config.scale });
        }
        self.decode(&self.abl_forward(&self.encode(hr)?)?)
    }

    /// Runs one image through the network and clamps into [0, 1].
    pub fn forward_image(&self, img: &GrayImage) -> Result<GrayImage, NetError> {
        let input = image_to_tensor(img);
        let out = self.forward(&input)?;
        let s = out.shape().to_vec();
        Ok(GrayImage::from_clamped(s[2], s[3], out.to_vec())?)
    }

    /// Same parameters, same topology, new kernel factors. The returned
    /// model shares parameter storage with `self` (cheap, read-oriented).
    pub fn rescaled(&self, new_factors: &[f64]) -> Result<DegradationModel, NetError> {
        let bank = rescale_bank(&self.bank, new_factors)?;
        let mut config = self.config.clone();
        config.bank = bank.spec().clone();
        Ok(DegradationModel {
            config,
            conv_in: self.conv_in.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ResBlock { conv1: b.conv1.clone(), conv2: b.conv2.clone() })
                .collect(),
            abl_logits: self.abl_logits.clone(),
            down: self.down.clone(),
            out: self.out.clone(),
            bank,
        })
    }
}

/// [1, 1, H, W] constant tensor from a grayscale image.
pub fn image_to_tensor(img: &GrayImage) -> Tensor {
    Tensor::from_vec(&[1, 1, img.height(), img.width()], img.data().to_vec())
        .expect("image buffer matches its dimensions")
}

/// Stacks same-size images into an [N, 1, H, W] constant tensor.
pub fn images_to_batch(images: &[GrayImage]) -> Result<Tensor, TensorError> {
    let n = images.len();
    let h = images[0].height();
    let w = images[0].width();
    let mut data = Vec::with_capacity(n * h * w);
    for img in images {
        if img.height() != h || img.width() != w {
            return Err(TensorError::ShapeMismatch {
                left: vec![h, w],
                right: vec![img.height(), img.width()],
            });
        }
        data.extend_from_slice(img.data());
    }
    Tensor::from_vec(&[n, 1, h, w], data)
}
