//! Architecture descriptor and flat parameter layout.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::layers::ConvShape;
use crate::error::{Error, Result};
use crate::fock::check_dim;
use crate::homodyne::STANDARD_RECORD_LEN;

/// How a quadrature record becomes the `(channels, length)` input tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InputEncoding {
    /// Three channels over the (resampled) record: scaled quadrature,
    /// `cos φ`, `sin φ`.
    Sequence,
    /// Shot histogram: one channel per phase bin over `[0, π)` (phases in
    /// `[π, 2π)` folded with `x → −x`), `x_bins` positions over
    /// `[−half_width, half_width]`. Insensitive to shot order.
    Histogram {
        phase_bins: usize,
        x_bins: usize,
        half_width: f64,
    },
}

/// Residual block: an entry convolution (`entry_kernel`, `stride`) followed
/// by `inner_convs` stride-1 convolutions, with ReLU between them; the
/// block input, average-pooled by `stride` (and 1×1-projected when channel
/// counts differ), is added before the closing ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub channels: usize,
    pub entry_kernel: usize,
    pub inner_kernel: usize,
    pub inner_convs: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// Record length fed to the network (records are resampled to it).
    pub input_len: usize,
    pub encoding: InputEncoding,
    /// Multiplier applied to quadrature values in sequence mode.
    pub input_scale: f64,
    /// Fock truncation of the predicted density matrix.
    pub dim: usize,
    pub blocks: Vec<BlockSpec>,
    /// Block-level shortcuts (identity or projection).
    pub block_shortcuts: bool,
    /// Long skip from the pooled input to the last block.
    pub long_skip: bool,
    /// Hidden dense widths between global pooling and the head.
    pub hidden: Vec<usize>,
}

impl Architecture {
    /// Desk-scale network: four blocks of 16/32/64/64 channels (kernel 7
    /// entry at stride 2, two kernel-3 convolutions), four block shortcuts
    /// plus one long skip, one hidden dense layer of 256.
    pub fn desk(dim: usize) -> Self {
        let block = |channels| BlockSpec {
            channels,
            entry_kernel: 7,
            inner_kernel: 3,
            inner_convs: 2,
            stride: 2,
        };
        Self {
            input_len: STANDARD_RECORD_LEN,
            encoding: InputEncoding::Sequence,
            input_scale: 0.5,
            dim,
            blocks: vec![block(16), block(32), block(64), block(64)],
            block_shortcuts: true,
            long_skip: true,
            hidden: vec![256],
        }
    }

    /// Thirty convolutional layers in five blocks with five shortcuts, at
    /// the full 35-level truncation.
    pub fn paper_scale() -> Self {
        let block = |channels| BlockSpec {
            channels,
            entry_kernel: 7,
            inner_kernel: 3,
            inner_convs: 5,
            stride: 2,
        };
        Self {
            input_len: STANDARD_RECORD_LEN,
            encoding: InputEncoding::Sequence,
            input_scale: 0.5,
            dim: 35,
            blocks: vec![block(16), block(32), block(64), block(128), block(128)],
            block_shortcuts: true,
            long_skip: false,
            hidden: vec![512],
        }
    }

    /// Small network for fast tests.
    pub fn tiny(dim: usize, input_len: usize) -> Self {
        let block = |channels| BlockSpec {
            channels,
            entry_kernel: 5,
            inner_kernel: 3,
            inner_convs: 1,
            stride: 2,
        };
        Self {
            input_len,
            encoding: InputEncoding::Sequence,
            input_scale: 0.5,
            dim,
            blocks: vec![block(8), block(16)],
            block_shortcuts: true,
            long_skip: true,
            hidden: vec![32],
        }
    }

    pub fn input_channels(&self) -> usize {
        match self.encoding {
            InputEncoding::Sequence => 3,
            InputEncoding::Histogram { phase_bins, .. } => phase_bins,
        }
    }

    /// Length axis of the input tensor.
    pub fn conv_len(&self) -> usize {
        match self.encoding {
            InputEncoding::Sequence => self.input_len,
            InputEncoding::Histogram { x_bins, .. } => x_bins,
        }
    }

    pub fn total_stride(&self) -> usize {
        self.blocks.iter().map(|b| b.stride).product()
    }

    pub fn conv_layer_count(&self) -> usize {
        self.blocks.iter().map(|b| 1 + b.inner_convs).sum()
    }

    pub fn shortcut_count(&self) -> usize {
        usize::from(self.block_shortcuts) * self.blocks.len() + usize::from(self.long_skip)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        check_dim(self.dim)?;
        if self.blocks.is_empty() {
            return bad("architecture needs at least one block".into());
        }
        if self.input_len == 0 || !(self.input_scale.is_finite() && self.input_scale > 0.0) {
            return bad("input_len and input_scale must be positive".into());
        }
        if let InputEncoding::Histogram {
            phase_bins,
            x_bins,
            half_width,
        } = self.encoding
        {
            if phase_bins == 0 || x_bins == 0 || !(half_width.is_finite() && half_width > 0.0) {
                return bad("histogram encoding needs positive bins and range".into());
            }
        }
        let mut len = self.conv_len();
        for (i, b) in self.blocks.iter().enumerate() {
            if b.channels == 0
                || b.stride == 0
                || b.entry_kernel % 2 == 0
                || b.inner_kernel % 2 == 0
            {
                return bad(format!(
                    "block {i}: channels/stride must be positive, kernels odd"
                ));
            }
            if len % b.stride != 0 || len / b.stride == 0 {
                return bad(format!(
                    "block {i}: length {len} not divisible by stride {}",
                    b.stride
                ));
            }
            len /= b.stride;
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ConvParams {
    pub shape: ConvShape,
    pub w: Range<usize>,
    pub b: Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockParams {
    /// Entry convolution followed by the inner ones.
    pub convs: Vec<ConvParams>,
    /// 1×1 projection on the pooled input (when channels change).
    pub proj: Option<ConvParams>,
    pub len_in: usize,
    pub c_in: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DenseParams {
    pub n_in: usize,
    pub n_out: usize,
    pub w: Range<usize>,
    pub b: Range<usize>,
}

/// Which parameter group a flat index belongs to (for per-layer checks).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    EntryConv,
    InnerConv,
    Projection,
    LongSkip,
    HiddenDense,
    HeadDense,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ParamLayout {
    pub blocks: Vec<BlockParams>,
    pub long_skip: Option<ConvParams>,
    pub dense: Vec<DenseParams>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(arch: &Architecture) -> Self {
        let mut cursor = 0usize;
        let mut take = |n: usize| {
            let r = cursor..cursor + n;
            cursor += n;
            r
        };
        let conv = |shape: ConvShape, take: &mut dyn FnMut(usize) -> Range<usize>| ConvParams {
            w: take(shape.weight_len()),
            b: take(shape.c_out),
            shape,
        };
        let c0 = arch.input_channels();
        let (mut c_in, mut len) = (c0, arch.conv_len());
        let mut blocks = Vec::new();
        for b in &arch.blocks {
            let mut convs = vec![conv(
                ConvShape {
                    c_in,
                    c_out: b.channels,
                    kernel: b.entry_kernel,
                    stride: b.stride,
                    len_in: len,
                },
                &mut take,
            )];
            let len_out = len / b.stride;
            for _ in 0..b.inner_convs {
                convs.push(conv(
                    ConvShape {
                        c_in: b.channels,
                        c_out: b.channels,
                        kernel: b.inner_kernel,
                        stride: 1,
                        len_in: len_out,
                    },
                    &mut take,
                ));
            }
            let proj = (arch.block_shortcuts && c_in != b.channels).then(|| {
                conv(
                    ConvShape {
                        c_in,
                        c_out: b.channels,
                        kernel: 1,
                        stride: 1,
                        len_in: len_out,
                    },
                    &mut take,
                )
            });
            blocks.push(BlockParams {
                convs,
                proj,
                len_in: len,
                c_in,
            });
            c_in = b.channels;
            len = len_out;
        }
        let long_skip = arch.long_skip.then(|| {
            conv(
                ConvShape {
                    c_in: c0,
                    c_out: c_in,
                    kernel: 1,
                    stride: 1,
                    len_in: len,
                },
                &mut take,
            )
        });
        let mut dense = Vec::new();
        let mut n_in = c_in;
        for &n_out in arch
            .hidden
            .iter()
            .chain(std::iter::once(&(arch.dim * arch.dim)))
        {
            dense.push(DenseParams {
                n_in,
                n_out,
                w: take(n_in * n_out),
                b: take(n_out),
            });
            n_in = n_out;
        }
        Self {
            blocks,
            long_skip,
            dense,
            total: cursor,
        }
    }

    /// Parameter group of every flat index.
    pub fn kinds(&self) -> Vec<LayerKind> {
        let mut kinds = vec![LayerKind::HeadDense; self.total];
        let mut mark = |p: &ConvParams, k: LayerKind| {
            for i in p.w.clone().chain(p.b.clone()) {
                kinds[i] = k;
            }
        };
        for b in &self.blocks {
            mark(&b.convs[0], LayerKind::EntryConv);
            for c in &b.convs[1..] {
                mark(c, LayerKind::InnerConv);
            }
            if let Some(p) = &b.proj {
                mark(p, LayerKind::Projection);
            }
        }
        if let Some(p) = &self.long_skip {
            mark(p, LayerKind::LongSkip);
        }
        for d in &self.dense[..self.dense.len() - 1] {
            for i in d.w.clone().chain(d.b.clone()) {
                kinds[i] = LayerKind::HiddenDense;
            }
        }
        kinds
    }
}
