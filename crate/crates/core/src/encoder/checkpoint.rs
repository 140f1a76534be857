//! Checkpoint files.
//!
//! Layout: the line `PNGBERT-CKPT<TAB>1`, one line of JSON header
//! (`dtype`, `step`, `config`, ordered `tensors` with shapes, `head` flag),
//! then every tensor as raw little-endian floats in header order, row-major.
//! Training checkpoints use `f32`.

use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::adapter::ToyHead;
use crate::encoder::config::ModelConfig;
use crate::encoder::params::ModelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAGIC: &str = "PNGBERT-CKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub step: u64,
    pub params: ModelParams<T>,
    /// Downstream regression head, present after fine-tuning.
    pub head: Option<ToyHead<T>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorSpec {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: String,
    step: u64,
    config: ModelConfig,
    head: bool,
    tensors: Vec<TensorSpec>,
}

fn expected_specs(config: &ModelConfig, head: bool) -> Vec<(String, Vec<usize>)> {
    let mut specs = ModelParams::<f32>::expected_shapes(config);
    if head {
        specs.push(("head.weight".into(), vec![config.hidden_size]));
        specs.push(("head.bias".into(), vec![1]));
    }
    specs
}

fn width(dtype: &str) -> Result<usize> {
    match dtype {
        "f32" => Ok(4),
        "f64" => Ok(8),
        other => Err(Error::Format(format!("unsupported dtype `{other}`"))),
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(config: ModelConfig, params: ModelParams<T>) -> Self {
        Checkpoint {
            config,
            step: 0,
            params,
            head: None,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut tensors: Vec<TensorSpec> = self
            .params
            .tensors()
            .into_iter()
            .map(|t| TensorSpec {
                name: t.name,
                shape: t.shape,
            })
            .collect();
        if let Some(h) = &self.head {
            tensors.push(TensorSpec {
                name: "head.weight".into(),
                shape: vec![h.weight.len()],
            });
            tensors.push(TensorSpec {
                name: "head.bias".into(),
                shape: vec![1],
            });
        }
        let header = Header {
            dtype: T::DTYPE.into(),
            step: self.step,
            config: self.config.clone(),
            head: self.head.is_some(),
            tensors,
        };
        let mut out = format!("{MAGIC}\t{VERSION}\n").into_bytes();
        out.extend(serde_json::to_string(&header).expect("header serializes").bytes());
        out.push(b'\n');
        for t in self.params.tensors() {
            for &x in t.data {
                x.write_le(&mut out);
            }
        }
        if let Some(h) = &self.head {
            for &x in h.weight.iter() {
                x.write_le(&mut out);
            }
            h.bias.write_le(&mut out);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let nl = |from: usize| {
            bytes[from..]
                .iter()
                .position(|&b| b == b'\n')
                .map(|i| from + i)
                .ok_or_else(|| Error::Format("truncated checkpoint header".into()))
        };
        let magic_end = nl(0)?;
        let magic = std::str::from_utf8(&bytes[..magic_end]).unwrap_or("");
        let Some((m, v)) = magic.split_once('\t') else {
            return Err(Error::Format("missing checkpoint magic".into()));
        };
        if m != MAGIC {
            return Err(Error::Format("missing checkpoint magic".into()));
        }
        if v != VERSION.to_string() {
            return Err(Error::Format(format!(
                "checkpoint version {v} (expected {VERSION})"
            )));
        }
        let header_end = nl(magic_end + 1)?;
        let header: Header = serde_json::from_slice(&bytes[magic_end + 1..header_end])
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        header.config.validate()?;
        let w = width(&header.dtype)?;

        let expected = expected_specs(&header.config, header.head);
        if expected.len() != header.tensors.len() {
            return Err(Error::Format(format!(
                "header lists {} tensors, config implies {}",
                header.tensors.len(),
                expected.len()
            )));
        }
        for ((name, shape), spec) in expected.iter().zip(&header.tensors) {
            if *name != spec.name || *shape != spec.shape {
                return Err(Error::ShapeMismatch {
                    tensor: spec.name.clone(),
                    expected: shape.clone(),
                    found: spec.shape.clone(),
                });
            }
        }
        let count: usize = expected.iter().map(|(_, s)| s.iter().product::<usize>()).sum();
        let data = &bytes[header_end + 1..];
        if data.len() != count * w {
            return Err(Error::Format(format!(
                "checkpoint body is {} bytes, expected {}",
                data.len(),
                count * w
            )));
        }
        let read = |i: usize| -> T {
            let chunk = &data[i * w..(i + 1) * w];
            if w == T::WIDTH {
                T::read_le(chunk)
            } else if w == 4 {
                T::lit(f32::read_le(chunk) as f64)
            } else {
                T::lit(f64::read_le(chunk))
            }
        };
        let mut params = ModelParams::<T>::zeros(&header.config);
        let mut i = 0;
        for t in params.tensors_mut() {
            for x in t.data.iter_mut() {
                *x = read(i);
                i += 1;
            }
        }
        let head = header.head.then(|| {
            let d = header.config.hidden_size;
            let weight = Array1::from_shape_fn(d, |k| read(i + k));
            let bias = read(i + d);
            ToyHead { weight, bias }
        });
        Ok(Checkpoint {
            config: header.config,
            step: header.step,
            params,
            head,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads and checks that the stored tensors fit `config`, naming the first
    /// tensor that does not.
    pub fn load_expecting(path: impl AsRef<Path>, config: &ModelConfig) -> Result<Self> {
        let ckpt = Self::load(path)?;
        let want = ModelParams::<f32>::expected_shapes(config);
        let have = ModelParams::<f32>::expected_shapes(&ckpt.config);
        for ((name, w), (_, h)) in want.iter().zip(&have) {
            if w != h {
                return Err(Error::ShapeMismatch {
                    tensor: name.clone(),
                    expected: w.clone(),
                    found: h.clone(),
                });
            }
        }
        if want.len() != have.len() {
            return Err(Error::ShapeMismatch {
                tensor: "layers".into(),
                expected: vec![config.num_layers],
                found: vec![ckpt.config.num_layers],
            });
        }
        Ok(ckpt)
    }
}

pub fn save_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
    params: &ModelParams<T>,
    config: &ModelConfig,
    step: u64,
) -> Result<()> {
    Checkpoint {
        config: config.clone(),
        step,
        params: params.clone(),
        head: None,
    }
    .save(path)
}

pub fn load_checkpoint<T: Scalar>(
    path: impl AsRef<Path>,
) -> Result<(ModelParams<T>, ModelConfig, u64)> {
    let c = Checkpoint::<T>::load(path)?;
    Ok((c.params, c.config, c.step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    fn cfg() -> ModelConfig {
        ModelConfig {
            num_layers: 2,
            hidden_size: 8,
            num_heads: 2,
            ff_size: 16,
            vocab_size: 12,
            max_positions: 32,
            dropout_rate: 0.1,
            word_position: true,
        }
    }

    #[test]
    fn bitwise_round_trip_with_head() {
        let c = cfg();
        let mut ck = Checkpoint::new(c.clone(), ModelParams::<f32>::init(&c, &mut substream(5, Stream::Init)));
        ck.step = 17;
        ck.head = Some(ToyHead {
            weight: Array1::from_shape_fn(8, |i| i as f32 * 0.1),
            bias: -0.5,
        });
        let back = Checkpoint::<f32>::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
    }

    #[test]
    fn corrupt_magic_and_truncation() {
        let c = cfg();
        let ck = Checkpoint::new(c.clone(), ModelParams::<f32>::zeros(&c));
        let mut bytes = ck.to_bytes();
        let good = bytes.clone();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::<f32>::from_bytes(&bytes), Err(Error::Format(_))));
        let cut = &good[..good.len() - 3];
        assert!(matches!(Checkpoint::<f32>::from_bytes(cut), Err(Error::Format(_))));
        let v2 = String::from_utf8_lossy(&good).replacen("CKPT\t1", "CKPT\t2", 1);
        let err = Checkpoint::<f32>::from_bytes(v2.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn mismatched_config_names_tensor() {
        let c = cfg();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &ModelParams::<f32>::zeros(&c), &c, 3).unwrap();
        let mut other = c.clone();
        other.ff_size = 32;
        match Checkpoint::<f32>::load_expecting(&path, &other).unwrap_err() {
            Error::ShapeMismatch { tensor, .. } => assert_eq!(tensor, "layer0.ffn.in.weight"),
            e => panic!("{e}"),
        }
        let (p, c2, step) = load_checkpoint::<f32>(&path).unwrap();
        assert_eq!((c2, step), (c.clone(), 3));
        assert_eq!(p, ModelParams::zeros(&c));
    }

    #[test]
    fn f64_checkpoint_loads_as_f64() {
        let c = cfg();
        let p = ModelParams::<f64>::init(&c, &mut substream(2, Stream::Init));
        let ck = Checkpoint::new(c, p);
        let back = Checkpoint::<f64>::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
    }
}
