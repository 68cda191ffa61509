use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One entry of an architecture description.
///
/// Every weight layer except the last is followed by batch norm and a
/// clipped quantized activation. The last weight layer is a dense head with
/// bias and no batch norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LayerSpec {
    Conv {
        out: usize,
        kernel: usize,
        #[serde(default = "one")]
        stride: usize,
        #[serde(default)]
        pad: usize,
    },
    Dense {
        out: usize,
    },
    GlobalPool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    First,
    Interior,
    Last,
}

impl LayerRole {
    pub fn tag(self) -> u8 {
        match self {
            LayerRole::First => 0,
            LayerRole::Interior => 1,
            LayerRole::Last => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub name: String,
    /// Channels, height, width of one input image.
    pub input: [usize; 3],
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    Conv { stride: usize, pad: usize },
    Dense,
}

/// A weight layer with its shapes worked out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedLayer {
    pub kind: WeightKind,
    pub role: LayerRole,
    pub weight_shape: Vec<usize>,
    /// Output channels or features.
    pub n_out: usize,
    /// Multiply-accumulates per sample.
    pub macs: usize,
    /// Apply global average pooling before this layer.
    pub pool_before: bool,
    /// Collapse spatial dimensions before this layer.
    pub flatten_before: bool,
}

impl ArchSpec {
    /// 784-256-256-10 multilayer perceptron on 28×28 images.
    pub fn mlp() -> Self {
        Self {
            name: "mlp".into(),
            input: [1, 28, 28],
            classes: 10,
            layers: vec![
                LayerSpec::Dense { out: 256 },
                LayerSpec::Dense { out: 256 },
                LayerSpec::Dense { out: 10 },
            ],
        }
    }

    /// Three 3×3 convolutions, global pooling and a dense head on 16×16 images.
    pub fn cnn() -> Self {
        let conv = |out, stride| LayerSpec::Conv {
            out,
            kernel: 3,
            stride,
            pad: 1,
        };
        Self {
            name: "cnn".into(),
            input: [1, 16, 16],
            classes: 10,
            layers: vec![
                conv(16, 1),
                conv(32, 2),
                conv(32, 1),
                LayerSpec::GlobalPool,
                LayerSpec::Dense { out: 10 },
            ],
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "mlp" => Ok(Self::mlp()),
            "cnn" => Ok(Self::cnn()),
            other => Err(Error::Config(format!(
                "unknown architecture preset `{other}` (expected mlp or cnn)"
            ))),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let arch: ArchSpec = toml::from_str(text).map_err(|e| Error::Config(format!("architecture: {e}")))?;
        arch.resolve()?;
        Ok(arch)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("architecture serializes")
    }

    pub fn input_len(&self) -> usize {
        self.input.iter().product()
    }

    /// Check the layer sequence and compute every weight layer's shapes.
    pub fn resolve(&self) -> Result<Vec<ResolvedLayer>> {
        let bad = |msg: String| Err(Error::Config(format!("architecture `{}`: {msg}", self.name)));
        if self.input.contains(&0) || self.classes < 2 {
            return bad("input dimensions and class count must be positive (at least 2 classes)".into());
        }
        let [mut c, mut h, mut w] = self.input;
        let mut spatial = true;
        let mut pending_pool = false;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            match *layer {
                LayerSpec::Conv {
                    out: k,
                    kernel,
                    stride,
                    pad,
                } => {
                    if !spatial {
                        return bad(format!(
                            "layer {i}: convolution after the spatial dimensions were collapsed"
                        ));
                    }
                    if k == 0 || kernel == 0 || stride == 0 || kernel > h + 2 * pad || kernel > w + 2 * pad {
                        return bad(format!("layer {i}: invalid convolution geometry"));
                    }
                    let oh = (h + 2 * pad - kernel) / stride + 1;
                    let ow = (w + 2 * pad - kernel) / stride + 1;
                    out.push(ResolvedLayer {
                        kind: WeightKind::Conv { stride, pad },
                        role: LayerRole::Interior,
                        weight_shape: vec![k, c, kernel, kernel],
                        n_out: k,
                        macs: k * c * kernel * kernel * oh * ow,
                        pool_before: false,
                        flatten_before: false,
                    });
                    (c, h, w) = (k, oh, ow);
                }
                LayerSpec::GlobalPool => {
                    if !spatial || pending_pool {
                        return bad(format!("layer {i}: pooling needs a spatial input"));
                    }
                    pending_pool = true;
                    spatial = false;
                    (h, w) = (1, 1);
                }
                LayerSpec::Dense { out: k } => {
                    if k == 0 {
                        return bad(format!("layer {i}: dense layer with no outputs"));
                    }
                    let inputs = c * h * w;
                    out.push(ResolvedLayer {
                        kind: WeightKind::Dense,
                        role: LayerRole::Interior,
                        weight_shape: vec![inputs, k],
                        n_out: k,
                        macs: inputs * k,
                        pool_before: pending_pool,
                        flatten_before: spatial,
                    });
                    pending_pool = false;
                    spatial = false;
                    (c, h, w) = (k, 1, 1);
                }
            }
        }
        if pending_pool {
            return bad("pooling must be followed by a dense layer".into());
        }
        if out.len() < 2 {
            return bad("need at least two weight layers".into());
        }
        let last = out.len() - 1;
        if out[last].kind != WeightKind::Dense || out[last].n_out != self.classes {
            return bad(format!("the last layer must be dense with {} outputs", self.classes));
        }
        out[0].role = LayerRole::First;
        out[last].role = LayerRole::Last;
        Ok(out)
    }
}
