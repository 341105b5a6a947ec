use std::ops::Range;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

use super::layers::{
    batchnorm_backward, batchnorm_forward, conv1d_backward, conv1d_forward, gemm, maxpool_backward,
    maxpool_forward, pooled_len, relu_backward, relu_forward, BatchNormCache, ConvShape, Mode,
    RunningStats, BN_MOMENTUM,
};
use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Two branches with kernels `K` and `max(1, K/2)`, concatenated.
    Parallel,
    /// A single branch with kernel `K`.
    Serial,
}

impl Topology {
    pub fn as_str(self) -> &'static str {
        match self {
            Topology::Parallel => "parallel",
            Topology::Serial => "serial",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "parallel" => Ok(Topology::Parallel),
            "serial" => Ok(Topology::Serial),
            other => Err(Error::InvalidConfig(format!("unknown topology '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkConfig {
    pub topology: Topology,
    pub branch_depth: usize,
    pub filters_per_layer: usize,
    pub kernel_len: usize,
    pub input_len: usize,
}

impl NetworkConfig {
    /// Small enough to train on a laptop CPU in minutes.
    pub fn desk(input_len: usize) -> Self {
        NetworkConfig {
            topology: Topology::Parallel,
            branch_depth: 3,
            filters_per_layer: 16,
            kernel_len: 15,
            input_len,
        }
    }

    /// The full-size architecture: 7 layers of 100 filters of width 100.
    pub fn paper(input_len: usize) -> Self {
        NetworkConfig {
            topology: Topology::Parallel,
            branch_depth: 7,
            filters_per_layer: 100,
            kernel_len: 100,
            input_len,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branch_depth == 0 || self.filters_per_layer == 0 || self.kernel_len == 0 {
            return Err(Error::InvalidConfig(
                "depth, filters and kernel length must be positive".into(),
            ));
        }
        if self.input_len < 2 {
            return Err(Error::InvalidConfig(format!(
                "input length {} is too short to pool",
                self.input_len
            )));
        }
        Ok(())
    }

    pub fn branch_kernels(&self) -> Vec<usize> {
        match self.topology {
            Topology::Parallel => vec![self.kernel_len, (self.kernel_len / 2).max(1)],
            Topology::Serial => vec![self.kernel_len],
        }
    }

    /// Length after `branch_depth` ceil-halvings.
    pub fn pooled_len(&self) -> usize {
        (0..self.branch_depth).fold(self.input_len, |n, _| pooled_len(n))
    }

    pub fn fc_in(&self) -> usize {
        self.branch_kernels().len() * self.filters_per_layer * self.pooled_len()
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(self)
    }

    pub fn param_count(&self) -> usize {
        self.layout().total
    }
}

/// Offsets of one conv + batch-norm block in the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLayout {
    pub conv: ConvShape,
    pub weights: Range<usize>,
    pub bias: Range<usize>,
    pub gamma: Range<usize>,
    pub beta: Range<usize>,
}

/// Parameter order: for each branch, for each layer: conv weights
/// `[out, in, k]`, conv bias, BN scale, BN shift. Then FC weights
/// `[out, in]` and FC bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    pub branches: Vec<Vec<BlockLayout>>,
    pub fc_weights: Range<usize>,
    pub fc_bias: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    fn new(cfg: &NetworkConfig) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let f = cfg.filters_per_layer;
        let mut branches = Vec::new();
        for kernel in cfg.branch_kernels() {
            let mut blocks = Vec::new();
            for layer in 0..cfg.branch_depth {
                let conv = ConvShape {
                    in_ch: if layer == 0 { 1 } else { f },
                    out_ch: f,
                    kernel,
                };
                blocks.push(BlockLayout {
                    conv,
                    weights: take(conv.weight_len()),
                    bias: take(f),
                    gamma: take(f),
                    beta: take(f),
                });
            }
            branches.push(blocks);
        }
        let fc_weights = take(cfg.input_len * cfg.fc_in());
        let fc_bias = take(cfg.input_len);
        ParamLayout {
            branches,
            fc_weights,
            fc_bias,
            total: at,
        }
    }

    /// Every parameter tensor with a readable name, in storage order.
    pub fn named_ranges(&self) -> Vec<(String, Range<usize>)> {
        let mut out = Vec::new();
        for (b, blocks) in self.branches.iter().enumerate() {
            for (l, blk) in blocks.iter().enumerate() {
                out.push((format!("b{b}.l{l}.conv_w"), blk.weights.clone()));
                out.push((format!("b{b}.l{l}.conv_b"), blk.bias.clone()));
                out.push((format!("b{b}.l{l}.bn_gamma"), blk.gamma.clone()));
                out.push((format!("b{b}.l{l}.bn_beta"), blk.beta.clone()));
            }
        }
        out.push(("fc_w".into(), self.fc_weights.clone()));
        out.push(("fc_b".into(), self.fc_bias.clone()));
        out
    }
}

struct BlockCache {
    input: Tensor,
    bn: BatchNormCache,
    pre_relu: Tensor,
    pool_argmax: Vec<usize>,
}

/// Activations kept from a training-mode forward pass.
pub struct ForwardCache {
    blocks: Vec<Vec<BlockCache>>,
    features: Vec<f64>,
    prediction: Tensor,
    running: Vec<Vec<RunningStats>>,
}

impl ForwardCache {
    pub fn prediction(&self) -> &Tensor {
        &self.prediction
    }

    /// Which units were active and which pooling inputs won. Two forward
    /// passes with equal patterns lie on the same smooth piece of the loss.
    pub fn activation_pattern(&self) -> Vec<usize> {
        let mut pattern = Vec::new();
        for blocks in &self.blocks {
            for blk in blocks {
                pattern.extend(blk.pre_relu.data.iter().map(|&v| usize::from(v > 0.0)));
                pattern.extend_from_slice(&blk.pool_argmax);
            }
        }
        pattern
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layout: ParamLayout,
    pub params: Vec<f64>,
    pub running: Vec<Vec<RunningStats>>,
    /// Per-position means subtracted from every input.
    pub input_means: Vec<f64>,
}

impl Network {
    /// All parameters zero, BN scales one, running stats at identity.
    pub fn zeroed(config: NetworkConfig) -> Result<Self> {
        config.validate()?;
        let layout = config.layout();
        let mut params = vec![0.0; layout.total];
        for blk in layout.branches.iter().flatten() {
            params[blk.gamma.clone()].fill(1.0);
        }
        let running = layout
            .branches
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .map(|_| RunningStats::new(config.filters_per_layer))
                    .collect()
            })
            .collect();
        Ok(Network {
            input_means: vec![0.0; config.input_len],
            config,
            layout,
            params,
            running,
        })
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init(config: NetworkConfig, seed: u64) -> Result<Self> {
        let mut net = Network::zeroed(config)?;
        let mut rng = rng_from_seed(derive_seed(seed, &[stream::INIT]));
        let mut fill = |params: &mut [f64], fan_in: usize, fan_out: usize| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in params {
                *p = rng.random_range(-bound..bound);
            }
        };
        for blk in net.layout.branches.iter().flatten() {
            let c = blk.conv;
            fill(
                &mut net.params[blk.weights.clone()],
                c.in_ch * c.kernel,
                c.out_ch * c.kernel,
            );
        }
        let fc = net.layout.fc_weights.clone();
        fill(
            &mut net.params[fc],
            net.config.fc_in(),
            net.config.input_len,
        );
        Ok(net)
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        if x.channels() != 1 || x.len() != self.config.input_len || x.batch() == 0 {
            return Err(Error::ShapeMismatch(format!(
                "network expects [*, 1, {}], got {:?}",
                self.config.input_len, x.shape
            )));
        }
        Ok(())
    }

    fn centered(&self, x: &Tensor) -> Tensor {
        let mut out = x.clone();
        for row in out.data.chunks_mut(self.config.input_len) {
            for (v, m) in row.iter_mut().zip(&self.input_means) {
                *v -= m;
            }
        }
        out
    }

    fn run(&self, x: &Tensor, mode: Mode) -> Result<(Tensor, Option<ForwardCache>)> {
        self.check_input(x)?;
        let batch = x.batch();
        let centered = self.centered(x);
        let mut running = self.running.clone();
        let mut caches = Vec::new();
        let mut branch_outputs = Vec::new();
        for (blocks, stats) in self.layout.branches.iter().zip(running.iter_mut()) {
            let mut h = centered.clone();
            let mut block_caches = Vec::new();
            for (blk, st) in blocks.iter().zip(stats.iter_mut()) {
                let conv = conv1d_forward(
                    &h,
                    &self.params[blk.weights.clone()],
                    &self.params[blk.bias.clone()],
                    blk.conv,
                )?;
                let (normed, bn) = batchnorm_forward(
                    &conv,
                    &self.params[blk.gamma.clone()],
                    &self.params[blk.beta.clone()],
                    st,
                    mode,
                    BN_MOMENTUM,
                )?;
                let act = relu_forward(&normed);
                let (pooled, argmax) = maxpool_forward(&act);
                if let Some(bn) = bn {
                    block_caches.push(BlockCache {
                        input: h,
                        bn,
                        pre_relu: normed,
                        pool_argmax: argmax,
                    });
                }
                h = pooled;
            }
            caches.push(block_caches);
            branch_outputs.push(h);
        }

        let fc_in = self.config.fc_in();
        let out_len = self.config.input_len;
        let mut features = Vec::with_capacity(batch * fc_in);
        for b in 0..batch {
            for out in &branch_outputs {
                features.extend_from_slice(out.sample(b));
            }
        }
        let mut pred = Tensor::zeros([batch, 1, out_len]);
        for row in pred.data.chunks_mut(out_len) {
            row.copy_from_slice(&self.params[self.layout.fc_bias.clone()]);
        }
        // [batch, fc_in] · Wᵀ[fc_in, out]
        gemm(
            batch,
            fc_in,
            out_len,
            1.0,
            &features,
            (fc_in as isize, 1),
            &self.params[self.layout.fc_weights.clone()],
            (1, fc_in as isize),
            1.0,
            &mut pred.data,
            (out_len as isize, 1),
        );
        pred.debug_assert_finite();
        let cache = (mode == Mode::Train).then(|| ForwardCache {
            blocks: caches,
            features,
            prediction: pred.clone(),
            running,
        });
        Ok((pred, cache))
    }

    /// Inference-mode forward pass using running BN statistics.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.run(x, Mode::Infer)?.0)
    }

    /// Training-mode forward pass (batch statistics). Running statistics
    /// are not touched until [`Network::commit_running`].
    pub fn forward_train(&self, x: &Tensor) -> Result<ForwardCache> {
        let (_, cache) = self.run(x, Mode::Train)?;
        Ok(cache.expect("training mode always caches"))
    }

    pub fn commit_running(&mut self, cache: &ForwardCache) {
        self.running = cache.running.clone();
    }

    /// Loss of the cached prediction against `target` and its gradient with
    /// respect to every parameter, in layout order.
    pub fn backward(
        &self,
        cache: Option<&ForwardCache>,
        target: &Tensor,
    ) -> Result<(f64, Vec<f64>)> {
        let cache = cache.ok_or(Error::MissingForwardCache)?;
        let pred = &cache.prediction;
        let loss = mse_loss(pred, target)?;
        let batch = pred.batch();
        let scale = 2.0 / batch as f64;
        let dpred: Vec<f64> = pred
            .data
            .iter()
            .zip(&target.data)
            .map(|(p, t)| scale * (p - t))
            .collect();

        let mut grads = vec![0.0; self.layout.total];
        let fc_in = self.config.fc_in();
        let out_len = self.config.input_len;
        for row in dpred.chunks(out_len) {
            for (g, d) in grads[self.layout.fc_bias.clone()].iter_mut().zip(row) {
                *g += d;
            }
        }
        // dW[out, fc_in] += dpredᵀ[out, batch] · features[batch, fc_in]
        gemm(
            out_len,
            batch,
            fc_in,
            1.0,
            &dpred,
            (1, out_len as isize),
            &cache.features,
            (fc_in as isize, 1),
            1.0,
            &mut grads[self.layout.fc_weights.clone()],
            (fc_in as isize, 1),
        );
        let mut dfeatures = vec![0.0; batch * fc_in];
        gemm(
            batch,
            out_len,
            fc_in,
            1.0,
            &dpred,
            (out_len as isize, 1),
            &self.params[self.layout.fc_weights.clone()],
            (fc_in as isize, 1),
            0.0,
            &mut dfeatures,
            (fc_in as isize, 1),
        );

        let f = self.config.filters_per_layer;
        let pooled = self.config.pooled_len();
        let block = f * pooled;
        for (bi, (blocks, bcache)) in self.layout.branches.iter().zip(&cache.blocks).enumerate() {
            let mut dh = Tensor::zeros([batch, f, pooled]);
            for b in 0..batch {
                let src = &dfeatures[b * fc_in + bi * block..b * fc_in + (bi + 1) * block];
                dh.sample_mut(b).copy_from_slice(src);
            }
            for (li, (blk, c)) in blocks.iter().zip(bcache).enumerate().rev() {
                let dact = maxpool_backward(c.pre_relu.shape, &c.pool_argmax, &dh);
                let dnormed = relu_backward(&c.pre_relu, &dact);
                let (dgamma, dbeta) = {
                    let mut dg = vec![0.0; f];
                    let mut db = vec![0.0; f];
                    let dconv = batchnorm_backward(
                        &c.bn,
                        &self.params[blk.gamma.clone()],
                        &dnormed,
                        &mut dg,
                        &mut db,
                    );
                    dh = dconv;
                    (dg, db)
                };
                grads[blk.gamma.clone()].copy_from_slice(&dgamma);
                grads[blk.beta.clone()].copy_from_slice(&dbeta);
                let mut dw = vec![0.0; blk.conv.weight_len()];
                let mut dbias = vec![0.0; f];
                let dx = conv1d_backward(
                    &c.input,
                    &self.params[blk.weights.clone()],
                    blk.conv,
                    &dh,
                    &mut dw,
                    &mut dbias,
                    li > 0,
                )?;
                grads[blk.weights.clone()].copy_from_slice(&dw);
                grads[blk.bias.clone()].copy_from_slice(&dbias);
                if let Some(dx) = dx {
                    dh = dx;
                }
            }
        }
        Ok((loss, grads))
    }
}

/// Sum of squared errors per spectrum, averaged over the batch.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape != target.shape {
        return Err(Error::ShapeMismatch(format!(
            "prediction {:?} vs target {:?}",
            pred.shape, target.shape
        )));
    }
    let sse: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / pred.batch().max(1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> NetworkConfig {
        NetworkConfig {
            topology: Topology::Parallel,
            branch_depth: 2,
            filters_per_layer: 3,
            kernel_len: 4,
            input_len: 20,
        }
    }

    #[test]
    fn pooled_lengths_follow_ceil_halving() {
        let cfg = NetworkConfig::paper(2051);
        assert_eq!(cfg.pooled_len(), 17);
        assert_eq!(NetworkConfig::desk(2051).pooled_len(), 257);
        assert_eq!(cfg.branch_kernels(), vec![100, 50]);
    }

    #[test]
    fn param_count_matches_layout() {
        let cfg = tiny();
        // branch 0: k=4, branch 1: k=2; pooled len 5; fc_in 2*3*5 = 30
        let branch = |k: usize| (3 * k + 9) + (9 * k + 9);
        let expected = branch(4) + branch(2) + 30 * 20 + 20;
        assert_eq!(cfg.param_count(), expected);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = Network::zeroed(tiny()).unwrap();
        let x = Tensor::new((0..40).map(|i| i as f64).collect(), [2, 1, 20]).unwrap();
        assert!(net.forward(&x).unwrap().data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_fc_weights_give_constant_bias_output() {
        let mut net = Network::init(tiny(), 1).unwrap();
        let fc_w = net.layout.fc_weights.clone();
        net.params[fc_w].fill(0.0);
        let fc_b = net.layout.fc_bias.clone();
        net.params[fc_b].fill(0.25);
        let x = Tensor::new((0..20).map(|i| (i as f64).sin()).collect(), [1, 1, 20]).unwrap();
        assert!(net.forward(&x).unwrap().data.iter().all(|&v| v == 0.25));
    }

    #[test]
    fn wrong_length_is_rejected() {
        let net = Network::zeroed(tiny()).unwrap();
        let x = Tensor::zeros([1, 1, 19]);
        assert!(matches!(net.forward(&x), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn backward_needs_cache() {
        let net = Network::zeroed(tiny()).unwrap();
        let t = Tensor::zeros([1, 1, 20]);
        assert!(matches!(
            net.backward(None, &t),
            Err(Error::MissingForwardCache)
        ));
    }

    #[test]
    fn mse_examples() {
        let p = Tensor::new(vec![3.0, 4.0], [1, 1, 2]).unwrap();
        let z = Tensor::zeros([1, 1, 2]);
        assert_eq!(mse_loss(&p, &z).unwrap(), 25.0);
        assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
        let p2 = Tensor::new(vec![6.0, 8.0], [1, 1, 2]).unwrap();
        assert_eq!(mse_loss(&p2, &z).unwrap(), 100.0);
    }

    #[test]
    fn zero_input_and_target_give_zero_gradient() {
        let mut net = Network::init(tiny(), 2).unwrap();
        let fc_b = net.layout.fc_bias.clone();
        net.params[fc_b].fill(0.0);
        let x = Tensor::zeros([2, 1, 20]);
        let cache = net.forward_train(&x).unwrap();
        let (loss, g) = net.backward(Some(&cache), &x).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
