//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "FLXB" | version u16 | payload length u64 | payload | crc32(payload) u32
//! ```
//!
//! The payload holds the quantization policy, the architecture as TOML text,
//! one record per weight layer, the clipping-level table and every BN set.
//! Floor-scheme models store interior weights as packed codes at the largest
//! registered bit-width and first/last weights at their fixed bit-width;
//! rounding-scheme models store 32-bit real weights.

use std::fs;
use std::path::Path;

use crate::engine::Tensor;
use crate::error::{Error, Result};
use crate::io::bitpack::{pack, packed_len, unpack};
use crate::net::{AdaptiveModel, ArchSpec, ClipMode, LayerRole, QuantConfig};
use crate::quant::codes::{downshift_codes, require_modified, weight_decode, Codes};
use crate::quant::{AlphaGradient, BitWidth, QuantScheme};
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"FLXB";
pub const VERSION: u16 = 1;
const HEADER: usize = 4 + 2 + 8;

#[derive(Debug, Clone, PartialEq)]
pub enum WeightStore {
    Real(Vec<f32>),
    Codes(Codes),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRecord {
    pub role: LayerRole,
    pub weights: WeightStore,
    pub bias: Option<Vec<f32>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnRecord {
    pub gamma: Vec<f32>,
    pub beta: Vec<f32>,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

/// Parsed contents of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub config: QuantConfig,
    pub arch: ArchSpec,
    pub layers: Vec<LayerRecord>,
    /// `[clipped layer][column]`.
    pub alphas: Vec<Vec<f32>>,
    /// `[BN layer][set]`, one set per registered bit-width, then the
    /// full-precision set.
    pub bn: Vec<Vec<BnRecord>>,
}

fn to_f32<T: Scalar>(v: &[T]) -> Vec<f32> {
    v.iter().map(|x| x.to_f64_lossy() as f32).collect()
}

fn from_f32<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64_lossy(x as f64)).collect()
}

fn gradient_tag(g: AlphaGradient) -> u8 {
    match g {
        AlphaGradient::QuantError => 0,
        AlphaGradient::ClipIndicator => 1,
    }
}

fn gradient_from_tag(t: u8) -> Result<AlphaGradient> {
    match t {
        0 => Ok(AlphaGradient::QuantError),
        1 => Ok(AlphaGradient::ClipIndicator),
        t => Err(Error::Format(format!("unknown clipping gradient tag {t}"))),
    }
}

fn role_from_tag(t: u8) -> Result<LayerRole> {
    match t {
        0 => Ok(LayerRole::First),
        1 => Ok(LayerRole::Interior),
        2 => Ok(LayerRole::Last),
        t => Err(Error::Format(format!("unknown layer role tag {t}"))),
    }
}

impl ModelFile {
    pub fn from_model<T: Scalar>(model: &AdaptiveModel<T>) -> Result<Self> {
        let config = model.config().clone();
        let codes = match config.scheme {
            QuantScheme::Modified => Some(model.export_max_bit_codes()?),
            QuantScheme::Original => None,
        };
        let layers = model
            .layers()
            .iter()
            .enumerate()
            .map(|(l, layer)| LayerRecord {
                role: layer.spec.role,
                weights: match &codes {
                    Some(c) => WeightStore::Codes(c[l].clone()),
                    None => WeightStore::Real(to_f32(layer.weight.value.data())),
                },
                bias: layer.bias.as_ref().map(|b| to_f32(b.value.data())),
            })
            .collect();
        let clip = model.clip();
        let alphas = (0..clip.layers())
            .map(|l| {
                (0..clip.columns())
                    .map(|c| clip.param(l, c).value.data()[0].to_f64_lossy() as f32)
                    .collect()
            })
            .collect();
        let bn = model
            .layers()
            .iter()
            .filter_map(|l| l.bn.as_ref())
            .map(|bn| {
                bn.sets
                    .iter()
                    .chain(std::iter::once(&bn.full_precision))
                    .map(|s| BnRecord {
                        gamma: to_f32(s.gamma.value.data()),
                        beta: to_f32(s.beta.value.data()),
                        mean: to_f32(&s.stats.running_mean),
                        var: to_f32(&s.stats.running_var),
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            config,
            arch: model.arch().clone(),
            layers,
            alphas,
            bn,
        })
    }

    pub fn into_model<T: Scalar>(&self) -> Result<AdaptiveModel<T>> {
        let mut model = AdaptiveModel::<T>::new(self.arch.clone(), self.config.clone(), 0)?;
        let bad = |m: String| Error::Format(m);
        if self.layers.len() != model.layers().len() {
            return Err(bad(format!(
                "{} layer records for {} weight layers",
                self.layers.len(),
                model.layers().len()
            )));
        }
        for (layer, rec) in model.layers_mut().iter_mut().zip(&self.layers) {
            if rec.role != layer.spec.role {
                return Err(bad("layer role does not match the architecture".into()));
            }
            let values: Vec<T> = match &rec.weights {
                WeightStore::Real(v) => from_f32(v),
                WeightStore::Codes(c) => weight_decode(&c.values, c.bits),
            };
            layer.weight.value = Tensor::new(layer.spec.weight_shape.clone(), values)
                .map_err(|_| bad("weight record has the wrong length".into()))?;
            match (&mut layer.bias, &rec.bias) {
                (Some(b), Some(v)) if v.len() == b.value.numel() => b.value.data_mut().copy_from_slice(&from_f32(v)),
                (None, None) => {}
                _ => return Err(bad("bias record does not match the architecture".into())),
            }
        }
        let clip = model.clip_mut();
        if self.alphas.len() != clip.layers() || self.alphas.iter().any(|r| r.len() != clip.columns()) {
            return Err(bad("clipping-level table has the wrong shape".into()));
        }
        for (l, row) in self.alphas.iter().enumerate() {
            for (c, &a) in row.iter().enumerate() {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(bad(format!("clipping level {a} is not positive")));
                }
                clip.set(l, c, T::from_f64_lossy(a as f64));
            }
        }
        let bns: Vec<_> = model.layers_mut().iter_mut().filter_map(|l| l.bn.as_mut()).collect();
        if bns.len() != self.bn.len() {
            return Err(bad("BN record count does not match the architecture".into()));
        }
        for (bn, recs) in bns.into_iter().zip(&self.bn) {
            let sets: Vec<_> = bn
                .sets
                .iter_mut()
                .chain(std::iter::once(&mut bn.full_precision))
                .collect();
            if sets.len() != recs.len() {
                return Err(bad("BN set count does not match the bit-widths".into()));
            }
            for (set, rec) in sets.into_iter().zip(recs) {
                let c = set.stats.channels();
                if [&rec.gamma, &rec.beta, &rec.mean, &rec.var]
                    .iter()
                    .any(|v| v.len() != c)
                {
                    return Err(bad("BN record has the wrong channel count".into()));
                }
                set.gamma.value.data_mut().copy_from_slice(&from_f32(&rec.gamma));
                set.beta.value.data_mut().copy_from_slice(&from_f32(&rec.beta));
                set.stats.running_mean = from_f32(&rec.mean);
                set.stats.running_var = from_f32(&rec.var);
            }
        }
        Ok(model)
    }

    /// Rewrite a floor-scheme file for bit-width `k` by shifting every
    /// interior code and dropping the bit-widths above `k`.
    pub fn convert(&self, k: BitWidth) -> Result<Self> {
        require_modified(self.config.scheme, "bit-width conversion")?;
        let max = self.config.max_bits();
        if k > max {
            return Err(Error::contract(format!(
                "cannot convert up: stored bit-width is {max}, requested {k}"
            )));
        }
        let pos = self.config.position(k)?;
        if k == max {
            return Ok(self.clone());
        }
        let mut out = self.clone();
        for rec in &mut out.layers {
            if let (LayerRole::Interior, WeightStore::Codes(c)) = (rec.role, &mut rec.weights) {
                *c = Codes {
                    bits: k,
                    values: downshift_codes(&c.values, c.bits, k)?,
                };
            }
        }
        let keep = pos + 1;
        if self.config.clip_mode == ClipMode::Switchable {
            for row in &mut out.alphas {
                row.truncate(keep);
            }
        }
        for sets in &mut out.bn {
            let fp = sets.pop().expect("full-precision set");
            sets.truncate(keep);
            sets.push(fp);
        }
        out.config.bit_widths.truncate(keep);
        Ok(out)
    }

    fn payload(&self) -> Result<Vec<u8>> {
        let mut w = Vec::new();
        let c = &self.config;
        w.push(c.scheme.tag());
        w.push(c.clip_mode.tag());
        w.push(gradient_tag(c.alpha_gradient));
        w.push(c.first_last_bits.get());
        w.push(c.input_bits);
        w.push(c.bit_widths.len() as u8);
        w.extend(c.bit_widths.iter().map(|b| b.get()));
        w.extend_from_slice(&c.alpha_init.to_le_bytes());
        let arch = self.arch.to_toml();
        put_u32(&mut w, arch.len());
        w.extend_from_slice(arch.as_bytes());
        put_u32(&mut w, self.layers.len());
        for rec in &self.layers {
            w.push(rec.role.tag());
            match &rec.weights {
                WeightStore::Real(v) => {
                    w.push(0);
                    put_f32s(&mut w, v);
                }
                WeightStore::Codes(codes) => {
                    w.push(1);
                    w.push(codes.bits.get());
                    put_u32(&mut w, codes.values.len());
                    w.extend(pack(&codes.values, codes.bits)?);
                }
            }
            match &rec.bias {
                Some(b) => {
                    w.push(1);
                    put_f32s(&mut w, b);
                }
                None => w.push(0),
            }
        }
        put_u32(&mut w, self.alphas.len());
        put_u32(&mut w, self.alphas.first().map_or(0, Vec::len));
        for row in &self.alphas {
            w.extend(row.iter().flat_map(|a| a.to_le_bytes()));
        }
        put_u32(&mut w, self.bn.len());
        for sets in &self.bn {
            put_u32(&mut w, sets.len());
            for s in sets {
                put_f32s(&mut w, &s.gamma);
                w.extend(s.beta.iter().chain(&s.mean).chain(&s.var).flat_map(|a| a.to_le_bytes()));
            }
        }
        Ok(w)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let payload = self.payload()?;
        let mut out = Vec::with_capacity(payload.len() + HEADER + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER + 4 || &bytes[..4] != MAGIC {
            return Err(Error::Format("not a model file (bad magic or too short)".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!(
                "unsupported model file version {version} (expected {VERSION})"
            )));
        }
        let len = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes")) as usize;
        if bytes.len() != HEADER + len + 4 {
            return Err(Error::Format(format!(
                "payload length {len} does not match file size {}",
                bytes.len()
            )));
        }
        let payload = &bytes[HEADER..HEADER + len];
        let stored = u32::from_le_bytes(bytes[HEADER + len..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let file = Reader { buf: payload, pos: 0 }.model_file()?;
        Ok(file)
    }
}

fn put_u32(w: &mut Vec<u8>, v: usize) {
    w.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f32s(w: &mut Vec<u8>, v: &[f32]) {
    put_u32(w, v.len());
    w.extend(v.iter().flat_map(|a| a.to_le_bytes()));
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format("truncated payload".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self
            .take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::Format("length overflow".into()))?,
            )?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect())
    }

    fn counted_f32s(&mut self) -> Result<Vec<f32>> {
        let n = self.u32()?;
        self.f32s(n)
    }

    fn bits(&mut self) -> Result<BitWidth> {
        let b = self.u8()?;
        BitWidth::new(b as u32).map_err(|_| Error::Format(format!("invalid bit-width {b}")))
    }

    fn model_file(mut self) -> Result<ModelFile> {
        let scheme = QuantScheme::from_tag(self.u8()?)?;
        let clip_mode = ClipMode::from_tag(self.u8()?)?;
        let alpha_gradient = gradient_from_tag(self.u8()?)?;
        let first_last_bits = self.bits()?;
        let input_bits = self.u8()?;
        let n_bits = self.u8()? as usize;
        let bit_widths = (0..n_bits).map(|_| self.bits()).collect::<Result<Vec<_>>>()?;
        let alpha_init = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        let config = QuantConfig {
            scheme,
            bit_widths,
            first_last_bits,
            input_bits,
            clip_mode,
            alpha_init,
            alpha_gradient,
        };
        config.validate().map_err(|e| Error::Format(e.to_string()))?;
        let arch_len = self.u32()?;
        let arch_text =
            std::str::from_utf8(self.take(arch_len)?).map_err(|_| Error::Format("architecture is not UTF-8".into()))?;
        let arch = ArchSpec::from_toml(arch_text).map_err(|e| Error::Format(e.to_string()))?;
        let n_layers = self.u32()?;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let role = role_from_tag(self.u8()?)?;
            let weights = match self.u8()? {
                0 => WeightStore::Real(self.counted_f32s()?),
                1 => {
                    let bits = self.bits()?;
                    let count = self.u32()?;
                    let bytes = self.take(packed_len(count, bits))?;
                    WeightStore::Codes(Codes {
                        bits,
                        values: unpack(bytes, bits, count)?,
                    })
                }
                t => return Err(Error::Format(format!("unknown weight storage tag {t}"))),
            };
            let bias = match self.u8()? {
                0 => None,
                1 => Some(self.counted_f32s()?),
                t => return Err(Error::Format(format!("unknown bias flag {t}"))),
            };
            layers.push(LayerRecord { role, weights, bias });
        }
        let (rows, cols) = (self.u32()?, self.u32()?);
        let alphas = (0..rows).map(|_| self.f32s(cols)).collect::<Result<Vec<_>>>()?;
        let n_bn = self.u32()?;
        let mut bn = Vec::with_capacity(n_bn.min(1024));
        for _ in 0..n_bn {
            let n_sets = self.u32()?;
            let mut sets = Vec::with_capacity(n_sets.min(64));
            for _ in 0..n_sets {
                let gamma = self.counted_f32s()?;
                let c = gamma.len();
                sets.push(BnRecord {
                    gamma,
                    beta: self.f32s(c)?,
                    mean: self.f32s(c)?,
                    var: self.f32s(c)?,
                });
            }
            bn.push(sets);
        }
        if self.pos != self.buf.len() {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        Ok(ModelFile {
            config,
            arch,
            layers,
            alphas,
            bn,
        })
    }
}

pub fn save_model<T: Scalar>(model: &AdaptiveModel<T>, path: &Path) -> Result<()> {
    write_file(&ModelFile::from_model(model)?, path)
}

pub fn load_model<T: Scalar>(path: &Path) -> Result<AdaptiveModel<T>> {
    read_file(path)?.into_model()
}

pub fn read_file(path: &Path) -> Result<ModelFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    ModelFile::from_bytes(&bytes)
}

/// Write through a temporary sibling and rename, so readers never see a
/// partial file.
pub fn write_file(file: &ModelFile, path: &Path) -> Result<()> {
    let bytes = file.to_bytes()?;
    let tmp = path.with_extension("partial");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Read a floor-scheme model file, convert it to bit-width `k` and write
/// the result.
pub fn convert_file(input: &Path, k: BitWidth, output: &Path) -> Result<()> {
    let file = read_file(input)?;
    write_file(&file.convert(k)?, output)
}
