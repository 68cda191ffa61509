use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::{softmax_xent, BnMode, BnStats, DecayGroup, Parameter, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::net::arch::{ArchSpec, LayerRole, ResolvedLayer, WeightKind};
use crate::net::bn::SwitchableBn;
use crate::net::clip::ClippingLevelTable;
use crate::net::config::QuantConfig;
use crate::quant::codes::{require_modified, weight_codes, Codes};
use crate::quant::{pact_quantize, quantize_weight, sat_scale, BitWidth, PactOp, WeightQuantOp};
use crate::scalar::Scalar;

/// Half-width of the uniform weight initialization.
pub const WEIGHT_INIT_RANGE: f64 = 0.5;

/// The precision a model currently executes at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Precision {
    /// Real weights, plain ReLU, the full-precision batch-norm set.
    Full,
    Bits(BitWidth),
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Precision::Full => f.write_str("fp"),
            Precision::Bits(k) => write!(f, "{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightLayer<T> {
    pub spec: ResolvedLayer,
    pub weight: Parameter<T>,
    /// Only the head carries a bias.
    pub bias: Option<Parameter<T>>,
    /// Absent on the head.
    pub bn: Option<SwitchableBn<T>>,
}

/// Identifies one trainable tensor of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ParamKey {
    Weight(usize),
    Bias(usize),
    Gamma(usize, Option<usize>),
    Beta(usize, Option<usize>),
    Alpha(usize, usize),
}

struct Run {
    logits: Var,
    params: Vec<(ParamKey, Var)>,
    activations: Vec<Var>,
}

/// Loss and hit count of one mini-batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchOutcome {
    pub loss: f64,
    pub correct: usize,
}

/// Shared real-valued weights with switchable clipping levels and batch-norm
/// sets, executable at any registered bit-width or at full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveModel<T: Scalar> {
    arch: ArchSpec,
    config: QuantConfig,
    layers: Vec<WeightLayer<T>>,
    clip: ClippingLevelTable<T>,
    active: Precision,
}

impl<T: Scalar> AdaptiveModel<T> {
    /// Weights uniform in `[-0.5, 0.5]`, biases zero, BN identity, clipping
    /// levels at `config.alpha_init`. Active precision is the largest
    /// registered bit-width.
    pub fn new(arch: ArchSpec, config: QuantConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let resolved = arch.resolve()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-WEIGHT_INIT_RANGE, WEIGHT_INIT_RANGE);
        let bit_count = config.bit_widths.len();
        let layers: Vec<WeightLayer<T>> = resolved
            .into_iter()
            .map(|spec| {
                let w = Tensor::from_fn(&spec.weight_shape, |_| T::from_f64_lossy(dist.sample(&mut rng)));
                let last = spec.role == LayerRole::Last;
                WeightLayer {
                    weight: Parameter::new(w, DecayGroup::Weights),
                    bias: last.then(|| Parameter::new(Tensor::zeros(&[spec.n_out]), DecayGroup::None)),
                    bn: (!last).then(|| SwitchableBn::new(spec.n_out, bit_count)),
                    spec,
                }
            })
            .collect();
        let clip = ClippingLevelTable::new(layers.len() - 1, &config);
        let active = Precision::Bits(config.max_bits());
        Ok(Self {
            arch,
            config,
            layers,
            clip,
            active,
        })
    }

    pub fn arch(&self) -> &ArchSpec {
        &self.arch
    }

    pub fn config(&self) -> &QuantConfig {
        &self.config
    }

    pub fn config_mut(&mut self) -> &mut QuantConfig {
        &mut self.config
    }

    pub fn layers(&self) -> &[WeightLayer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [WeightLayer<T>] {
        &mut self.layers
    }

    pub fn clip(&self) -> &ClippingLevelTable<T> {
        &self.clip
    }

    pub fn clip_mut(&mut self) -> &mut ClippingLevelTable<T> {
        &mut self.clip
    }

    pub fn active(&self) -> Precision {
        self.active
    }

    pub fn bit_widths(&self) -> &[BitWidth] {
        &self.config.bit_widths
    }

    /// Switch quantizer, BN set and clipping column to bit-width `k`.
    pub fn set_bitwidth(&mut self, k: BitWidth) -> Result<()> {
        self.config.position(k)?;
        self.active = Precision::Bits(k);
        Ok(())
    }

    pub fn set_full_precision(&mut self) {
        self.active = Precision::Full;
    }

    pub fn set_precision(&mut self, p: Precision) -> Result<()> {
        match p {
            Precision::Full => {
                self.set_full_precision();
                Ok(())
            }
            Precision::Bits(k) => self.set_bitwidth(k),
        }
    }

    /// Index of the BN set used at the active precision.
    fn bn_slot(&self) -> Option<usize> {
        match self.active {
            Precision::Full => None,
            Precision::Bits(k) => Some(self.config.position(k).expect("active bit-width is registered")),
        }
    }

    /// Weight bit-width of layer `l` at the active precision.
    pub fn weight_bits(&self, l: usize) -> Option<BitWidth> {
        match self.active {
            Precision::Full => None,
            Precision::Bits(k) => Some(match self.layers[l].spec.role {
                LayerRole::Interior => k,
                LayerRole::First | LayerRole::Last => self.config.first_last_bits,
            }),
        }
    }

    /// Effective weights of layer `l` at the active precision, including the
    /// head's rescaling.
    pub fn effective_weight(&self, l: usize) -> Result<Tensor<T>> {
        let w = &self.layers[l].weight.value;
        let q = match self.weight_bits(l) {
            Some(bits) => quantize_weight(w, bits, self.config.scheme),
            None => w.clone(),
        };
        if self.layers[l].spec.role == LayerRole::Last {
            let s = sat_scale(&q, self.layers[l].spec.n_out)?;
            Ok(q.map(|v| v * s))
        } else {
            Ok(q)
        }
    }

    fn input_tensor(&self, images: &[u8]) -> Result<Tensor<T>> {
        let per = self.arch.input_len();
        if images.is_empty() || images.len() % per != 0 {
            return Err(Error::shape(
                "model input",
                format!("{} bytes is not a whole number of {per}-byte images", images.len()),
            ));
        }
        let [c, h, w] = self.arch.input;
        let scale = T::one() / T::from_f64_lossy(256.0);
        let data = images.iter().map(|&b| T::from_f64_lossy(b as f64) * scale).collect();
        Tensor::new(vec![images.len() / per, c, h, w], data)
    }

    fn run(
        &self,
        tape: &mut Tape<T>,
        images: &[u8],
        stats: &mut [Option<BnStats<T>>],
        mode: BnMode,
        trainable: bool,
    ) -> Result<Run> {
        let mut params = Vec::new();
        let mut bind = |tape: &mut Tape<T>, key: ParamKey, value: &Tensor<T>| {
            if trainable {
                let v = tape.leaf(value.clone());
                params.push((key, v));
                v
            } else {
                tape.constant(value.clone())
            }
        };
        let slot = self.bn_slot();
        let scheme = self.config.scheme;
        let mut activations = Vec::new();
        let mut h = tape.constant(self.input_tensor(images)?);
        for (l, layer) in self.layers.iter().enumerate() {
            let spec = &layer.spec;
            let w = bind(tape, ParamKey::Weight(l), &layer.weight.value);
            let mut w_eff = match self.weight_bits(l) {
                Some(bits) => {
                    let q = quantize_weight(tape.value(w), bits, scheme);
                    tape.custom(&[w], q, Box::new(WeightQuantOp))?
                }
                None => w,
            };
            if spec.role == LayerRole::Last {
                let factor = sat_scale(tape.value(w_eff), spec.n_out)?;
                w_eff = tape.scale(w_eff, factor)?;
            }
            if spec.pool_before {
                h = tape.global_avg_pool(h)?;
            } else if spec.flatten_before {
                h = tape.flatten(h)?;
            }
            h = match spec.kind {
                WeightKind::Conv { stride, pad } => tape.conv2d(h, w_eff, stride, pad)?,
                WeightKind::Dense => {
                    let b = layer.bias.as_ref().map(|b| bind(tape, ParamKey::Bias(l), &b.value));
                    tape.dense(h, w_eff, b)?
                }
            };
            let Some(bn) = &layer.bn else { continue };
            let set = bn.set(slot);
            let gamma = bind(tape, ParamKey::Gamma(l, slot), &set.gamma.value);
            let beta = bind(tape, ParamKey::Beta(l, slot), &set.beta.value);
            let st = stats[l].as_mut().expect("stats provided for every BN layer");
            h = tape.batch_norm(h, gamma, beta, st, mode)?;
            h = match self.active {
                Precision::Full => tape.relu(h),
                Precision::Bits(k) => {
                    let col = self.clip.column(k)?;
                    let a = bind(tape, ParamKey::Alpha(l, col), &self.clip.param(l, col).value);
                    let alpha = tape.value(a).data()[0];
                    let q = pact_quantize(tape.value(h), alpha, k, scheme)?;
                    let op = PactOp {
                        bits: k,
                        scheme,
                        alpha_gradient: self.config.alpha_gradient,
                    };
                    tape.custom(&[h, a], q, Box::new(op))?
                }
            };
            activations.push(h);
        }
        Ok(Run {
            logits: h,
            params,
            activations,
        })
    }

    fn cloned_stats(&self) -> Vec<Option<BnStats<T>>> {
        let slot = self.bn_slot();
        self.layers
            .iter()
            .map(|l| l.bn.as_ref().map(|bn| bn.set(slot).stats.clone()))
            .collect()
    }

    fn take_stats(&mut self) -> Vec<Option<BnStats<T>>> {
        let slot = self.bn_slot();
        self.layers
            .iter_mut()
            .map(|l| {
                l.bn.as_mut().map(|bn| {
                    let st = &mut bn.set_mut(slot).stats;
                    let channels = st.channels();
                    std::mem::replace(st, BnStats::new(channels))
                })
            })
            .collect()
    }

    fn restore_stats(&mut self, stats: Vec<Option<BnStats<T>>>) {
        let slot = self.bn_slot();
        for (layer, st) in self.layers.iter_mut().zip(stats) {
            if let (Some(bn), Some(st)) = (layer.bn.as_mut(), st) {
                bn.set_mut(slot).stats = st;
            }
        }
    }

    /// Inference with running BN moments at the active precision.
    pub fn logits(&self, images: &[u8]) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let mut stats = self.cloned_stats();
        let run = self.run(&mut tape, images, &mut stats, BnMode::Eval, false)?;
        Ok(tape.value(run.logits).clone())
    }

    /// Inference that also returns the output of every clipped activation.
    pub fn logits_and_activations(&self, images: &[u8]) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
        let mut tape = Tape::new();
        let mut stats = self.cloned_stats();
        let run = self.run(&mut tape, images, &mut stats, BnMode::Eval, false)?;
        let acts = run.activations.iter().map(|&v| tape.value(v).clone()).collect();
        Ok((tape.value(run.logits).clone(), acts))
    }

    /// Training-mode forward and backward on one batch; gradients are added
    /// to the parameters of the active precision.
    pub fn train_batch(&mut self, images: &[u8], labels: &[usize]) -> Result<BatchOutcome> {
        let mut stats = self.take_stats();
        let mut tape = Tape::new();
        let result = self.run(&mut tape, images, &mut stats, BnMode::Train, true);
        self.restore_stats(stats);
        let run = result?;
        let xent = softmax_xent(tape.value(run.logits), labels)?;
        let loss = xent.loss.to_f64_lossy();
        let mut grads = tape.backward(run.logits, xent.grad)?;
        for (key, var) in run.params {
            if let Some(g) = grads.take(var) {
                self.param_mut(key).accumulate(&g)?;
            }
        }
        Ok(BatchOutcome {
            loss,
            correct: xent.correct,
        })
    }

    fn param_mut(&mut self, key: ParamKey) -> &mut Parameter<T> {
        match key {
            ParamKey::Weight(l) => &mut self.layers[l].weight,
            ParamKey::Bias(l) => self.layers[l].bias.as_mut().expect("head has a bias"),
            ParamKey::Gamma(l, s) => &mut self.layers[l].bn.as_mut().expect("bn layer").set_mut(s).gamma,
            ParamKey::Beta(l, s) => &mut self.layers[l].bn.as_mut().expect("bn layer").set_mut(s).beta,
            ParamKey::Alpha(l, c) => self.clip.param_mut(l, c),
        }
    }

    /// Start replacing the active BN set's running moments by plain averages.
    pub fn begin_bn_calibration(&mut self) {
        let slot = self.bn_slot();
        for bn in self.layers.iter_mut().filter_map(|l| l.bn.as_mut()) {
            bn.set_mut(slot).stats.begin_collection();
        }
    }

    /// Forward one calibration batch, feeding its moments to the averages.
    pub fn calibration_batch(&mut self, images: &[u8]) -> Result<()> {
        let mut stats = self.take_stats();
        let mut tape = Tape::new();
        let result = self.run(&mut tape, images, &mut stats, BnMode::Collect, false);
        self.restore_stats(stats);
        result.map(|_| ())
    }

    /// Write the averaged moments back. Returns the number of batches used.
    pub fn finish_bn_calibration(&mut self) -> Result<usize> {
        let slot = self.bn_slot();
        let mut batches = 0;
        for bn in self.layers.iter_mut().filter_map(|l| l.bn.as_mut()) {
            batches = bn.set_mut(slot).stats.finish_collection()?;
        }
        Ok(batches)
    }

    /// Every trainable tensor, in a fixed order: weights and biases by
    /// layer, then BN affine parameters by layer and set (full-precision set
    /// last), then clipping levels by layer and column.
    pub fn parameters_mut(&mut self) -> Vec<&mut Parameter<T>> {
        let mut out: Vec<&mut Parameter<T>> = Vec::new();
        let mut bns = Vec::new();
        for layer in &mut self.layers {
            out.push(&mut layer.weight);
            if let Some(b) = layer.bias.as_mut() {
                out.push(b);
            }
            if let Some(bn) = layer.bn.as_mut() {
                bns.push(bn);
            }
        }
        for bn in bns {
            for set in bn.sets.iter_mut().chain(std::iter::once(&mut bn.full_precision)) {
                out.push(&mut set.gamma);
                out.push(&mut set.beta);
            }
        }
        out.extend(self.clip.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.parameters_mut() {
            p.zero_grad();
        }
    }

    /// Clamp every weight to `[-1, 1]`.
    pub fn clamp_weights(&mut self) {
        for layer in &mut self.layers {
            for w in layer.weight.value.data_mut() {
                *w = w.max(-T::one()).min(T::one());
            }
        }
    }

    /// Copy the full-precision BN sets into every bit-width's set.
    pub fn broadcast_full_precision_bn(&mut self) {
        for bn in self.layers.iter_mut().filter_map(|l| l.bn.as_mut()) {
            let fp = bn.full_precision.clone();
            for set in &mut bn.sets {
                set.gamma.value = fp.gamma.value.clone();
                set.beta.value = fp.beta.value.clone();
                set.stats = fp.stats.clone();
            }
        }
    }

    /// Copy the BN set and clipping levels of bit-width `k` to every other
    /// registered bit-width.
    pub fn broadcast_bit_state(&mut self, k: BitWidth) -> Result<()> {
        let pos = self.config.position(k)?;
        for bn in self.layers.iter_mut().filter_map(|l| l.bn.as_mut()) {
            let src = bn.sets[pos].clone();
            for set in &mut bn.sets {
                set.gamma.value = src.gamma.value.clone();
                set.beta.value = src.beta.value.clone();
                set.stats = src.stats.clone();
            }
        }
        let col = self.clip.column(k)?;
        for l in 0..self.clip.layers() {
            let v = self.clip.param(l, col).value.data()[0];
            for c in 0..self.clip.columns() {
                self.clip.set(l, c, v);
            }
        }
        Ok(())
    }

    /// Integer weight codes at the largest registered bit-width (first and
    /// last layer at their fixed bit-width).
    pub fn export_max_bit_codes(&self) -> Result<Vec<Codes>> {
        require_modified(self.config.scheme, "exporting integer codes")?;
        let max = self.config.max_bits();
        Ok(self
            .layers
            .iter()
            .map(|layer| {
                let bits = match layer.spec.role {
                    LayerRole::Interior => max,
                    LayerRole::First | LayerRole::Last => self.config.first_last_bits,
                };
                weight_codes(&layer.weight.value, bits)
            })
            .collect())
    }

    /// Number of stored real values per category: (weights, biases, BN affine).
    pub fn parameter_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for layer in &self.layers {
            counts.0 += layer.weight.value.numel();
            counts.1 += layer.bias.as_ref().map_or(0, |b| b.value.numel());
            counts.2 += layer
                .bn
                .as_ref()
                .map_or(0, |bn| 2 * bn.full_precision.gamma.value.numel());
        }
        counts
    }
}
