//! Flat binary parameter checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "ACDA"                      4 bytes magic
//! version                     u8 (currently 1)
//! network count               u32
//! per network:
//!   init_seed                 u64
//!   width count               u32
//!   widths                    u32 each
//!   hidden activation         u8  (0 tanh, 1 relu)
//!   output activation         u8  (0 identity, 1 softmax, 2 sigmoid)
//!   per layer, in order:
//!     weight                  f64 x fan_in*fan_out, row-major [fan_in, fan_out]
//!     bias                    f64 x fan_out
//! ```

use std::io::{Read, Write};

use super::{HiddenActivation, Layer, NetworkParams, NetworkSpec, OutputActivation};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ACDA";
pub const VERSION: u8 = 1;

pub fn write_checkpoint<W: Write>(mut w: W, networks: &[&NetworkParams]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(networks.len() as u32).to_le_bytes())?;
    for net in networks {
        w.write_all(&net.init_seed.to_le_bytes())?;
        let widths = &net.spec.layer_widths;
        w.write_all(&(widths.len() as u32).to_le_bytes())?;
        for &width in widths {
            w.write_all(&(width as u32).to_le_bytes())?;
        }
        let hidden = match net.spec.hidden_activation {
            HiddenActivation::Tanh => 0u8,
            HiddenActivation::Relu => 1,
        };
        let output = match net.spec.output_activation {
            OutputActivation::Identity => 0u8,
            OutputActivation::Softmax => 1,
            OutputActivation::Sigmoid => 2,
        };
        w.write_all(&[hidden, output])?;
        for t in net.tensors() {
            for v in t.data() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

struct Reader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => Error::Truncated {
                offset: self.offset,
                message: format!("expected {what}"),
            },
            _ => Error::Io(e),
        })?;
        self.offset += N as u64;
        Ok(buf)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        (0..n)
            .map(|_| Ok(f64::from_le_bytes(self.bytes(what)?)))
            .collect()
    }
}

pub fn read_checkpoint<R: Read>(r: R) -> Result<Vec<NetworkParams>> {
    let mut r = Reader {
        inner: r,
        offset: 0,
    };
    if &r.bytes::<4>("magic")? != MAGIC {
        return Err(Error::Format("bad checkpoint magic".into()));
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    let count = r.u32("network count")?;
    let mut nets = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let init_seed = r.u64("init seed")?;
        let nwidths = r.u32("width count")? as usize;
        let widths = (0..nwidths)
            .map(|_| r.u32("layer width").map(|w| w as usize))
            .collect::<Result<Vec<_>>>()?;
        let hidden = match r.u8("hidden activation")? {
            0 => HiddenActivation::Tanh,
            1 => HiddenActivation::Relu,
            other => return Err(Error::Format(format!("unknown hidden activation {other}"))),
        };
        let output = match r.u8("output activation")? {
            0 => OutputActivation::Identity,
            1 => OutputActivation::Softmax,
            2 => OutputActivation::Sigmoid,
            other => return Err(Error::Format(format!("unknown output activation {other}"))),
        };
        let spec = NetworkSpec::new(widths, hidden, output)
            .map_err(|e| Error::Format(format!("invalid network spec: {e}")))?;
        let mut layers = Vec::with_capacity(spec.num_layers());
        for win in spec.layer_widths.windows(2) {
            let (i, o) = (win[0], win[1]);
            let weight = Tensor::with_shape(vec![i, o], r.f64s(i * o, "weights")?);
            let bias = Tensor::with_shape(vec![o], r.f64s(o, "biases")?);
            layers.push(Layer { weight, bias });
        }
        nets.push(NetworkParams {
            spec,
            init_seed,
            layers,
        });
    }
    Ok(nets)
}
