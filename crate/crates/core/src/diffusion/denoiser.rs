//! A small fully-connected conditional noise predictor with manual backprop.
//!
//! Input layout: `[x_n | reference | semantic | null_flag | sin/cos(step)]`.
//! Hidden layers use SiLU; the output layer is linear and has the data
//! dimensionality. Parameters live in one flat vector, layer by layer, each
//! layer as a row-major weight matrix followed by its bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Conditioning inputs. When `null` is set the semantic slot is all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub reference: Vec<f64>,
    pub semantic: Vec<f64>,
    pub null: bool,
}

impl Condition {
    pub fn new(reference: Vec<f64>, semantic: Vec<f64>) -> Self {
        Self {
            reference,
            semantic,
            null: false,
        }
    }

    /// The same reference with the semantic input replaced by the null label.
    pub fn nulled(&self) -> Self {
        Self {
            reference: self.reference.clone(),
            semantic: vec![0.0; self.semantic.len()],
            null: true,
        }
    }
}

/// Anything that predicts the noise in `x_n`.
pub trait NoisePredictor {
    fn data_dim(&self) -> usize;

    fn predict(&self, x_n: &[f64], cond: &Condition, step: usize, steps: usize) -> Vec<f64>;

    /// Whether the null-label branch saw any training signal.
    fn null_label_trained(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenoiserConfig {
    pub data_dim: usize,
    pub reference_dim: usize,
    pub semantic_dim: usize,
    pub hidden: Vec<usize>,
    pub time_freqs: usize,
}

impl DenoiserConfig {
    pub fn input_dim(&self) -> usize {
        self.data_dim + self.reference_dim + self.semantic_dim + 1 + 2 * self.time_freqs
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden.len() + 1);
        let mut fan_in = self.input_dim();
        for &h in &self.hidden {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims.push((fan_in, self.data_dim));
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layer_dims().iter().map(|(i, o)| i * o + o).sum()
    }

    fn validate(&self) -> Result<()> {
        if self.data_dim == 0 {
            return Err(Error::config("denoiser.data_dim", "must be >= 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("denoiser.hidden", "layer widths must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Denoiser {
    config: DenoiserConfig,
    layers: Vec<(usize, usize)>,
    params: Vec<f64>,
    grads: Vec<f64>,
    null_trained: bool,
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

/// Pre-activations and activations of one forward pass.
pub(crate) struct Trace {
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub(crate) fn output(&self) -> &[f64] {
        self.acts.last().expect("output layer")
    }
}

impl Denoiser {
    /// He-style initialisation from `seed`; the output layer starts near zero.
    pub fn new(config: DenoiserConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layers = config.layer_dims();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(config.param_count());
        let last = layers.len() - 1;
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let std = if l == last {
                0.1 / (fan_in as f64).sqrt()
            } else {
                (2.0 / fan_in as f64).sqrt()
            };
            for _ in 0..fan_in * fan_out {
                params.push(std * rng.sample::<f64, _>(StandardNormal));
            }
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        let n = params.len();
        Ok(Self {
            config,
            layers,
            params,
            grads: vec![0.0; n],
            null_trained: false,
        })
    }

    pub fn config(&self) -> &DenoiserConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn grads(&self) -> &[f64] {
        &self.grads
    }

    pub fn zero_grads(&mut self) {
        self.grads.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn set_null_trained(&mut self, trained: bool) {
        self.null_trained = trained;
    }

    fn input(&self, x_n: &[f64], cond: &Condition, step: usize, steps: usize) -> Vec<f64> {
        let c = &self.config;
        assert_eq!(x_n.len(), c.data_dim, "x_n has wrong dimensionality");
        assert_eq!(cond.reference.len(), c.reference_dim, "reference has wrong dimensionality");
        assert_eq!(cond.semantic.len(), c.semantic_dim, "semantic has wrong dimensionality");
        let mut v = Vec::with_capacity(c.input_dim());
        v.extend_from_slice(x_n);
        v.extend_from_slice(&cond.reference);
        if cond.null {
            v.extend(std::iter::repeat_n(0.0, c.semantic_dim));
            v.push(1.0);
        } else {
            v.extend_from_slice(&cond.semantic);
            v.push(0.0);
        }
        let t = step as f64 / steps as f64;
        for k in 0..c.time_freqs {
            let w = std::f64::consts::PI * (1u64 << k) as f64 * t;
            v.push(w.sin());
            v.push(w.cos());
        }
        v
    }

    pub(crate) fn forward_trace(
        &self,
        x_n: &[f64],
        cond: &Condition,
        step: usize,
        steps: usize,
    ) -> Trace {
        let mut acts = vec![self.input(x_n, cond, step, steps)];
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        let last = self.layers.len() - 1;
        for (l, &(fan_in, fan_out)) in self.layers.iter().enumerate() {
            let w = &self.params[offset..offset + fan_in * fan_out];
            let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
            let a = acts.last().expect("input pushed");
            let z: Vec<f64> = (0..fan_out)
                .map(|o| {
                    let row = &w[o * fan_in..(o + 1) * fan_in];
                    b[o] + row.iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>()
                })
                .collect();
            let out = if l == last {
                z.clone()
            } else {
                z.iter().map(|&v| silu(v)).collect()
            };
            pre.push(z);
            acts.push(out);
            offset += fan_in * fan_out + fan_out;
        }
        Trace { acts, pre }
    }

    /// Adds `d loss / d params` for one pass into the gradient buffer, given
    /// `d loss / d output`.
    pub(crate) fn backward(&mut self, trace: &Trace, d_out: &[f64]) {
        let mut delta = d_out.to_vec();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut offset = 0;
        for &(fan_in, fan_out) in &self.layers {
            offsets.push(offset);
            offset += fan_in * fan_out + fan_out;
        }
        for l in (0..self.layers.len()).rev() {
            let (fan_in, fan_out) = self.layers[l];
            let off = offsets[l];
            let a = &trace.acts[l];
            for o in 0..fan_out {
                let d = delta[o];
                let row = &mut self.grads[off + o * fan_in..off + (o + 1) * fan_in];
                for (g, ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
                self.grads[off + fan_in * fan_out + o] += d;
            }
            if l == 0 {
                break;
            }
            let w = &self.params[off..off + fan_in * fan_out];
            let z_prev = &trace.pre[l - 1];
            delta = (0..fan_in)
                .map(|i| {
                    let s: f64 = (0..fan_out).map(|o| w[o * fan_in + i] * delta[o]).sum();
                    s * silu_grad(z_prev[i])
                })
                .collect();
        }
    }

    /// Flat little-endian encoding: header then `f64` parameters.
    ///
    /// Header: magic `SCDN`, format version `u32`, data/reference/semantic
    /// dims, time frequencies, hidden layer count and widths (all `u32`),
    /// null-trained flag `u32`, schedule fingerprint `u64`, parameter count `u64`.
    pub fn to_bytes(&self, schedule_fingerprint: u64) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::with_capacity(64 + 8 * self.params.len());
        out.extend_from_slice(WEIGHTS_MAGIC);
        out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
        for v in [c.data_dim, c.reference_dim, c.semantic_dim, c.time_freqs, c.hidden.len()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for &h in &c.hidden {
            out.extend_from_slice(&(h as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.null_trained as u32).to_le_bytes());
        out.extend_from_slice(&schedule_fingerprint.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    /// Inverse of [`Denoiser::to_bytes`]; returns the stored schedule fingerprint too.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, u64)> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != WEIGHTS_MAGIC {
            return Err(Error::Payload("not a denoiser weight file".into()));
        }
        let version = r.u32()?;
        if version != WEIGHTS_VERSION {
            return Err(Error::Payload(format!("unsupported weight format v{version}")));
        }
        let data_dim = r.u32()? as usize;
        let reference_dim = r.u32()? as usize;
        let semantic_dim = r.u32()? as usize;
        let time_freqs = r.u32()? as usize;
        let layers = r.u32()? as usize;
        let hidden = (0..layers)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let null_trained = r.u32()? != 0;
        let fingerprint = r.u64()?;
        let count = r.u64()? as usize;
        let config = DenoiserConfig {
            data_dim,
            reference_dim,
            semantic_dim,
            hidden,
            time_freqs,
        };
        config.validate()?;
        if count != config.param_count() {
            return Err(Error::Payload(format!(
                "parameter count {count} does not match architecture ({})",
                config.param_count()
            )));
        }
        let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        if r.pos != bytes.len() {
            return Err(Error::Payload("trailing bytes after parameters".into()));
        }
        let layers = config.layer_dims();
        Ok((
            Self {
                config,
                layers,
                grads: vec![0.0; count],
                params,
                null_trained,
            },
            fingerprint,
        ))
    }
}

const WEIGHTS_MAGIC: &[u8; 4] = b"SCDN";
const WEIGHTS_VERSION: u32 = 1;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let s = self
            .bytes
            .get(self.pos..self.pos + n)
            .ok_or_else(|| Error::Payload("truncated weight file".into()))?;
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl NoisePredictor for Denoiser {
    fn data_dim(&self) -> usize {
        self.config.data_dim
    }

    fn predict(&self, x_n: &[f64], cond: &Condition, step: usize, steps: usize) -> Vec<f64> {
        let mut t = self.forward_trace(x_n, cond, step, steps);
        t.acts.pop().expect("output layer")
    }

    fn null_label_trained(&self) -> bool {
        self.null_trained
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> DenoiserConfig {
        DenoiserConfig {
            data_dim: 2,
            reference_dim: 2,
            semantic_dim: 3,
            hidden: vec![6, 5],
            time_freqs: 2,
        }
    }

    #[test]
    fn output_matches_data_dim() {
        let d = Denoiser::new(cfg(), 1).unwrap();
        let c = Condition::new(vec![0.1, 0.2], vec![1.0, 0.0, 0.0]);
        assert_eq!(d.predict(&[0.5, -0.5], &c, 3, 10).len(), 2);
        assert_eq!(d.params().len(), cfg().param_count());
    }

    #[test]
    fn null_label_differs_from_empty_semantic() {
        let d = Denoiser::new(cfg(), 1).unwrap();
        let empty = Condition::new(vec![0.1, 0.2], vec![0.0; 3]);
        let a = d.predict(&[0.5, -0.5], &empty, 3, 10);
        let b = d.predict(&[0.5, -0.5], &empty.nulled(), 3, 10);
        assert_ne!(a, b);
    }

    #[test]
    fn weights_round_trip() {
        let mut d = Denoiser::new(cfg(), 7).unwrap();
        d.set_null_trained(true);
        let bytes = d.to_bytes(0xdead_beef);
        let (back, fp) = Denoiser::from_bytes(&bytes).unwrap();
        assert_eq!(fp, 0xdead_beef);
        assert_eq!(back.params(), d.params());
        assert_eq!(back.config(), d.config());
        assert!(back.null_label_trained());
        assert!(Denoiser::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Denoiser::from_bytes(&bad).is_err());
    }

    #[test]
    fn rejects_zero_width() {
        let mut c = cfg();
        c.hidden = vec![4, 0];
        assert!(Denoiser::new(c, 0).is_err());
    }
}
