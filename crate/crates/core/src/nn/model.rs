//! Network weights, forward pass with activation cache, reverse-mode
//! gradient.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::arch::{Architecture, InputEncoding, LayerKind, ParamLayout};
use super::head::{head_backward, head_forward, CholeskyFactor, IDENTITY_BIAS};
use super::layers::{
    avg_pool, avg_pool_backward, conv_backward, conv_forward, dense_backward, dense_forward, relu,
    relu_backward,
};
use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::homodyne::{wrap_phase, QuadratureRecord};

/// Architecture plus flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    arch: Architecture,
    weights: Vec<f64>,
    layout: ParamLayout,
}

/// Output of [`NetworkModel::predict_density`].
#[derive(Debug, Clone)]
pub struct Prediction {
    pub rho: DensityMatrix,
    pub factor: CholeskyFactor,
    pub wall_time: Duration,
}

struct ConvStep {
    col: Vec<f64>,
    pre: Vec<f64>,
}

struct BlockCache {
    convs: Vec<ConvStep>,
    /// im2col of the pooled input for the projection (1×1 col = input).
    proj_col: Option<Vec<f64>>,
    /// Pre-activation block output (main path + shortcuts).
    sum: Vec<f64>,
}

struct ForwardCache {
    blocks: Vec<BlockCache>,
    long_col: Option<Vec<f64>>,
    final_len: usize,
    dense_in: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
}

impl NetworkModel {
    pub fn new(arch: Architecture, weights: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch);
        if weights.len() != layout.total {
            return Err(Error::ContractViolation(format!(
                "architecture needs {} weights, got {}",
                layout.total,
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::ContractViolation(format!(
                "weight {i} is not finite"
            )));
        }
        Ok(Self {
            arch,
            weights,
            layout,
        })
    }

    /// He-normal convolutions and hidden layers, a small head layer, zero
    /// biases except the diagonal head biases, which start `T` at the
    /// identity.
    pub fn initialize(arch: Architecture, seed: u64) -> Result<Self> {
        let mut model = Self::zeroed(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |w: &mut [f64], std: f64| {
            for v in w {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v = z * std;
            }
        };
        let layout = model.layout.clone();
        let convs = layout
            .blocks
            .iter()
            .flat_map(|b| b.convs.iter().chain(b.proj.iter()))
            .chain(layout.long_skip.iter());
        for p in convs {
            let fan_in = (p.shape.c_in * p.shape.kernel) as f64;
            fill(&mut model.weights[p.w.clone()], (2.0 / fan_in).sqrt());
        }
        let last = layout.dense.len() - 1;
        for (i, d) in layout.dense.iter().enumerate() {
            let std = if i == last {
                0.1 / (d.n_in as f64).sqrt()
            } else {
                (2.0 / d.n_in as f64).sqrt()
            };
            fill(&mut model.weights[d.w.clone()], std);
        }
        Ok(model)
    }

    /// All weights zero except the diagonal head biases: the prediction is
    /// the maximally mixed state for every input.
    pub fn zeroed(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layout = ParamLayout::new(&arch);
        let mut weights = vec![0.0; layout.total];
        let head = layout.dense.last().expect("head layer");
        for v in &mut weights[head.b.start..head.b.start + arch.dim] {
            *v = IDENTITY_BIAS;
        }
        Ok(Self {
            arch,
            weights,
            layout,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn param_count(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.arch.dim
    }

    /// Parameter group of every weight index.
    pub fn layer_kinds(&self) -> Vec<LayerKind> {
        self.layout.kinds()
    }

    /// Replaces the weights (same count, all finite).
    pub fn set_weights(&mut self, weights: Vec<f64>) -> Result<()> {
        *self = Self::new(self.arch.clone(), weights)?;
        Ok(())
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Input tensor length expected by [`forward`](Self::forward).
    pub fn input_size(&self) -> usize {
        self.arch.input_channels() * self.arch.conv_len()
    }

    /// Channel-major input tensor for a record.
    pub fn encode(&self, record: &QuadratureRecord) -> Result<Vec<f64>> {
        match self.arch.encoding {
            InputEncoding::Sequence => {
                let n = self.arch.input_len;
                let resampled;
                let rec = if record.len() == n {
                    record
                } else {
                    resampled = record.resampled(n)?;
                    &resampled
                };
                let mut x = vec![0.0; 3 * n];
                for (t, p) in rec.points().iter().enumerate() {
                    x[t] = p.value * self.arch.input_scale;
                    x[n + t] = p.phase.cos();
                    x[2 * n + t] = p.phase.sin();
                }
                Ok(x)
            }
            InputEncoding::Histogram {
                phase_bins,
                x_bins,
                half_width,
            } => {
                let mut h = vec![0.0; phase_bins * x_bins];
                let width = 2.0 * half_width / x_bins as f64;
                // per-phase-bin pdf estimate
                let norm = phase_bins as f64 / (record.len() as f64 * width);
                for p in record.points() {
                    let (mut phase, mut x) = (wrap_phase(p.phase), p.value);
                    if phase >= PI {
                        phase -= PI;
                        x = -x;
                    }
                    let pb = ((phase / PI * phase_bins as f64) as usize).min(phase_bins - 1);
                    let xb = ((x + half_width) / width)
                        .floor()
                        .clamp(0.0, (x_bins - 1) as f64) as usize;
                    h[pb * x_bins + xb] += norm;
                }
                Ok(h)
            }
        }
    }

    fn slice(&self, r: &std::ops::Range<usize>) -> &[f64] {
        &self.weights[r.clone()]
    }

    fn forward_cached(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if input.len() != self.input_size() {
            return Err(Error::ContractViolation(format!(
                "network input has {} values, expected {}",
                input.len(),
                self.input_size()
            )));
        }
        let last_block = self.layout.blocks.len() - 1;
        let mut x = input.to_vec();
        let mut blocks = Vec::with_capacity(self.layout.blocks.len());
        let mut long_col = None;
        let mut final_len = 0;
        for (bi, bp) in self.layout.blocks.iter().enumerate() {
            let stride = bp.convs[0].shape.stride;
            let mut convs: Vec<ConvStep> = Vec::with_capacity(bp.convs.len());
            for (ci, cp) in bp.convs.iter().enumerate() {
                let inp = match convs.last() {
                    Some(prev) => relu(&prev.pre),
                    None => x.clone(),
                };
                debug_assert!(ci > 0 || inp.len() == bp.c_in * bp.len_in);
                let (pre, col) =
                    conv_forward(&cp.shape, self.slice(&cp.w), self.slice(&cp.b), &inp);
                convs.push(ConvStep { col, pre });
            }
            let mut sum = convs.last().expect("block has convolutions").pre.clone();
            let mut proj_col = None;
            if self.arch.block_shortcuts {
                let pooled = avg_pool(&x, bp.c_in, bp.len_in, stride);
                match &bp.proj {
                    Some(p) => {
                        let (y, col) =
                            conv_forward(&p.shape, self.slice(&p.w), self.slice(&p.b), &pooled);
                        add_into(&mut sum, &y);
                        proj_col = Some(col);
                    }
                    None => add_into(&mut sum, &pooled),
                }
            }
            if bi == last_block {
                final_len = bp.len_in / stride;
                if let Some(p) = &self.layout.long_skip {
                    let pooled = avg_pool(
                        input,
                        self.arch.input_channels(),
                        self.arch.conv_len(),
                        self.arch.total_stride(),
                    );
                    let (y, col) =
                        conv_forward(&p.shape, self.slice(&p.w), self.slice(&p.b), &pooled);
                    add_into(&mut sum, &y);
                    long_col = Some(col);
                }
            }
            x = relu(&sum);
            blocks.push(BlockCache {
                convs,
                proj_col,
                sum,
            });
        }
        let channels = x.len() / final_len;
        let mut h: Vec<f64> = x
            .chunks(final_len)
            .map(|row| row.iter().sum::<f64>() / final_len as f64)
            .collect();
        debug_assert_eq!(h.len(), channels);
        let n_dense = self.layout.dense.len();
        let mut dense_in = Vec::with_capacity(n_dense);
        let mut dense_pre = Vec::with_capacity(n_dense);
        for (i, d) in self.layout.dense.iter().enumerate() {
            let pre = dense_forward(self.slice(&d.w), self.slice(&d.b), &h);
            let next = if i + 1 < n_dense {
                relu(&pre)
            } else {
                pre.clone()
            };
            dense_in.push(std::mem::replace(&mut h, next));
            dense_pre.push(pre);
        }
        Ok((
            h,
            ForwardCache {
                blocks,
                long_col,
                final_len,
                dense_in,
                dense_pre,
            },
        ))
    }

    /// Raw head outputs (`dim²` values).
    pub fn forward_raw(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input)?.0)
    }

    pub fn forward(&self, input: &[f64]) -> Result<CholeskyFactor> {
        CholeskyFactor::from_outputs(&self.forward_raw(input)?, self.arch.dim)
    }

    /// Predicted density matrix for an encoded input.
    pub fn predict_input(&self, input: &[f64]) -> Result<DensityMatrix> {
        let raw = self.forward_raw(input)?;
        DensityMatrix::from_matrix(head_forward(&raw, self.arch.dim).rho)
    }

    /// Encodes, runs the network and reports the wall time of the whole
    /// call.
    pub fn predict_density(&self, record: &QuadratureRecord) -> Result<Prediction> {
        let start = Instant::now();
        let input = self.encode(record)?;
        let raw = self.forward_raw(&input)?;
        let factor = CholeskyFactor::from_outputs(&raw, self.arch.dim)?;
        let rho = DensityMatrix::from_matrix(head_forward(&raw, self.arch.dim).rho)?;
        Ok(Prediction {
            rho,
            factor,
            wall_time: start.elapsed(),
        })
    }

    fn check_target(&self, target: &DensityMatrix) -> Result<()> {
        if target.dim() != self.arch.dim {
            return Err(Error::DimMismatch {
                left: self.arch.dim,
                right: target.dim(),
            });
        }
        Ok(())
    }

    /// `‖ρ_pred − target‖²_F` for an encoded input.
    pub fn loss(&self, input: &[f64], target: &DensityMatrix) -> Result<f64> {
        self.check_target(target)?;
        let raw = self.forward_raw(input)?;
        Ok((head_forward(&raw, self.arch.dim).rho - target.matrix()).norm_squared())
    }

    /// Loss and its exact gradient with respect to every weight.
    pub fn backward(&self, input: &[f64], target: &DensityMatrix) -> Result<(f64, Vec<f64>)> {
        self.backward_weighted(input, target, 1.0)
    }

    /// As [`backward`](Self::backward) for `weight · loss`.
    pub fn backward_weighted(
        &self,
        input: &[f64],
        target: &DensityMatrix,
        weight: f64,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_target(target)?;
        let (raw, cache) = self.forward_cached(input)?;
        let state = head_forward(&raw, self.arch.dim);
        let loss = weight * (&state.rho - target.matrix()).norm_squared();
        let d_raw = head_backward(&raw, &state, target.matrix(), weight);
        Ok((loss, self.backprop(&cache, d_raw)))
    }

    fn backprop(&self, cache: &ForwardCache, d_raw: Vec<f64>) -> Vec<f64> {
        // weights and biases of each layer are contiguous, so every layer's
        // gradient is one `split_at_mut` of `grad`
        let mut grad = vec![0.0; self.weights.len()];

        // dense stack
        let mut d = d_raw;
        for i in (0..self.layout.dense.len()).rev() {
            let dp = &self.layout.dense[i];
            let mut dx = vec![0.0; dp.n_in];
            let (gw, gb) = grad[dp.w.start..dp.b.end].split_at_mut(dp.w.len());
            dense_backward(
                self.slice(&dp.w),
                &cache.dense_in[i],
                &d,
                gw,
                gb,
                Some(&mut dx),
            );
            if i > 0 {
                relu_backward(&cache.dense_pre[i - 1], &mut dx);
            }
            d = dx;
        }

        // global average pool
        let len = cache.final_len;
        let mut dout: Vec<f64> = d
            .iter()
            .flat_map(|&g| std::iter::repeat(g / len as f64).take(len))
            .collect();

        let last_block = self.layout.blocks.len() - 1;
        for bi in (0..self.layout.blocks.len()).rev() {
            let bp = &self.layout.blocks[bi];
            let bc = &cache.blocks[bi];
            let stride = bp.convs[0].shape.stride;
            let mut dz = dout;
            relu_backward(&bc.sum, &mut dz);
            let need_dx = bi > 0;
            let mut dx = vec![0.0; if need_dx { bp.c_in * bp.len_in } else { 0 }];

            if bi == last_block {
                if let (Some(p), Some(col)) = (&self.layout.long_skip, &cache.long_col) {
                    let (gw, gb) = grad[p.w.start..p.b.end].split_at_mut(p.w.len());
                    conv_backward(&p.shape, self.slice(&p.w), col, &dz, gw, gb, None);
                }
            }
            if self.arch.block_shortcuts {
                let dpooled = match (&bp.proj, &bc.proj_col) {
                    (Some(p), Some(col)) => {
                        let mut dp = vec![0.0; if need_dx { bp.c_in * p.shape.len_in } else { 0 }];
                        let (gw, gb) = grad[p.w.start..p.b.end].split_at_mut(p.w.len());
                        conv_backward(
                            &p.shape,
                            self.slice(&p.w),
                            col,
                            &dz,
                            gw,
                            gb,
                            need_dx.then_some(&mut dp[..]),
                        );
                        dp
                    }
                    _ => dz.clone(),
                };
                if need_dx {
                    avg_pool_backward(&dpooled, bp.c_in, bp.len_in, stride, &mut dx);
                }
            }

            let mut d = dz;
            for ci in (0..bp.convs.len()).rev() {
                let cp = &bp.convs[ci];
                let (gw, gb) = grad[cp.w.start..cp.b.end].split_at_mut(cp.w.len());
                if ci > 0 {
                    let mut dprev = vec![0.0; cp.shape.c_in * cp.shape.len_in];
                    conv_backward(
                        &cp.shape,
                        self.slice(&cp.w),
                        &bc.convs[ci].col,
                        &d,
                        gw,
                        gb,
                        Some(&mut dprev),
                    );
                    relu_backward(&bc.convs[ci - 1].pre, &mut dprev);
                    d = dprev;
                } else {
                    conv_backward(
                        &cp.shape,
                        self.slice(&cp.w),
                        &bc.convs[0].col,
                        &d,
                        gw,
                        gb,
                        need_dx.then_some(&mut dx[..]),
                    );
                }
            }
            dout = dx;
        }
        grad
    }
}

fn add_into(acc: &mut [f64], y: &[f64]) {
    for (a, b) in acc.iter_mut().zip(y) {
        *a += b;
    }
}
