use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Head, Mlp, NeuralError};
use crate::scalar::Scalar;

const FORMAT: &str = "mec-offload/mlp";
const VERSION: u32 = 1;

/// On-disk form of a network: layer sizes and parameters as `f64`.
#[derive(Debug, Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    layer_sizes: [usize; 3],
    head: Head,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl<F: Scalar> Mlp<F> {
    pub fn write_checkpoint<W: Write>(&self, out: W) -> Result<(), NeuralError> {
        let conv = |v: &[F]| v.iter().map(|p| p.as_f64()).collect::<Vec<_>>();
        let ckpt = Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            layer_sizes: [self.inputs(), self.hidden(), self.outputs()],
            head: self.head(),
            w1: conv(&self.w1),
            b1: conv(&self.b1),
            w2: conv(&self.w2),
            b2: conv(&self.b2),
        };
        serde_json::to_writer(out, &ckpt).map_err(|e| NeuralError::Checkpoint(e.to_string()))
    }

    pub fn read_checkpoint<R: Read>(input: R) -> Result<Self, NeuralError> {
        let ckpt: Checkpoint =
            serde_json::from_reader(input).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        if ckpt.format != FORMAT {
            return Err(NeuralError::Checkpoint(format!("unexpected format `{}`", ckpt.format)));
        }
        if ckpt.version != VERSION {
            return Err(NeuralError::Checkpoint(format!("unsupported version {}", ckpt.version)));
        }
        let conv = |v: Vec<f64>| v.into_iter().map(F::lit).collect::<Vec<_>>();
        let [i, h, o] = ckpt.layer_sizes;
        Mlp::from_parts((i, h, o), ckpt.head, conv(ckpt.w1), conv(ckpt.b1), conv(ckpt.w2), conv(ckpt.b2))
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_checkpoint(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        Self::read_checkpoint(BufReader::new(File::open(path)?))
    }
}
