//! Binary model files.
//!
//! Layout (little-endian): `"HRCM"`, version byte, 4 reserved zero bytes,
//! u64 `N, M, K, T`, f64 alpha, length-prefixed UTF-8 input alphabet, then
//! output alphabet, a reservoir tag byte (0 = dense, 1 = cyclic), `U` as
//! `N*M` f64 row-major, the dense reservoir as `N*N` f64 row-major (dense
//! only), and `W` as `K*N` f64 row-major.

use std::path::Path;

use crate::encoding::Alphabet;
use crate::readout::ReadoutWeights;
use crate::regimes::TrainedModel;
use crate::reservoir::{InputMatrix, Network, Reservoir};
use crate::wire::{read_preamble, write_preamble, Reader, Writer};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"HRCM";
pub const MODEL_VERSION: u8 = 1;

const TAG_DENSE: u8 = 0;
const TAG_CYCLIC: u8 = 1;

/// A trained model together with the character alphabets it was trained on.
#[derive(Clone, Debug, PartialEq)]
pub struct TextModel {
    pub model: TrainedModel,
    pub input_alphabet: Alphabet,
    pub output_alphabet: Alphabet,
    /// Length of the training sequence.
    pub trained_len: usize,
}

impl TextModel {
    pub fn new(
        model: TrainedModel,
        input_alphabet: Alphabet,
        output_alphabet: Alphabet,
        trained_len: usize,
    ) -> Result<Self> {
        if input_alphabet.len() != model.inputs() {
            return Err(Error::DimensionMismatch {
                expected: model.inputs(),
                actual: input_alphabet.len(),
            });
        }
        if output_alphabet.len() != model.outputs() {
            return Err(Error::DimensionMismatch {
                expected: model.outputs(),
                actual: output_alphabet.len(),
            });
        }
        Ok(TextModel {
            model,
            input_alphabet,
            output_alphabet,
            trained_len,
        })
    }

    /// Generates `len` symbols starting from `start`.
    pub fn generate(&self, start: char, len: usize) -> Result<String> {
        let index = self
            .input_alphabet
            .index_of(start)
            .ok_or(Error::UnknownSymbol {
                symbol: start,
                position: 0,
            })?;
        let seq = self.model.recall_generative(index, len)?;
        self.output_alphabet.decode(&seq)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let net = self.model.network();
        let mut w = Writer::default();
        write_preamble(&mut w, MODEL_MAGIC, MODEL_VERSION);
        for v in [
            net.size(),
            net.inputs(),
            self.model.outputs(),
            self.trained_len,
        ] {
            w.u64(v as u64);
        }
        w.f64(net.alpha());
        w.string(&self.input_alphabet.to_text());
        w.string(&self.output_alphabet.to_text());
        match net.reservoir() {
            Reservoir::DenseOrthogonal(q) => {
                w.u8(TAG_DENSE);
                w.matrix(net.input().matrix());
                w.matrix(q);
            }
            Reservoir::CyclicShift(_) => {
                w.u8(TAG_CYCLIC);
                w.matrix(net.input().matrix());
            }
        }
        w.matrix(self.model.readout().matrix());
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        read_preamble(&mut r, MODEL_MAGIC, MODEL_VERSION)?;
        let n = r.usize("N")?;
        let m = r.usize("M")?;
        let k = r.usize("K")?;
        let t = r.usize("T")?;
        let alpha = r.f64("alpha")?;
        let input_alphabet = read_alphabet(&mut r, m, "input alphabet")?;
        let output_alphabet = read_alphabet(&mut r, k, "output alphabet")?;
        if n == 0 || m == 0 || m > n {
            return Err(Error::Malformed(format!(
                "inconsistent dimensions N={n} M={m}"
            )));
        }
        let tag = r.u8("reservoir tag")?;
        let u = InputMatrix::from_matrix(r.matrix(n, m, "input matrix")?, 1e-9)?;
        let reservoir = match tag {
            TAG_DENSE => Reservoir::from_orthogonal(r.matrix(n, n, "reservoir")?, 1e-8)?,
            TAG_CYCLIC => Reservoir::cyclic(n)?,
            other => return Err(Error::Malformed(format!("unknown reservoir tag {other}"))),
        };
        let w = ReadoutWeights::from_matrix(r.matrix(k, n, "readout")?)?;
        r.finish("readout")?;
        let network = Network::new(u, reservoir, alpha)
            .map_err(|e| Error::Malformed(format!("invalid network: {e}")))?;
        TextModel::new(
            TrainedModel::new(network, w)?,
            input_alphabet,
            output_alphabet,
            t,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        TextModel::from_bytes(&data)
    }
}

fn read_alphabet(r: &mut Reader<'_>, size: usize, what: &str) -> Result<Alphabet> {
    let text = r.string(what)?;
    let alphabet = Alphabet::from_symbols(text.chars());
    if alphabet.len() != size || alphabet.to_text() != text {
        return Err(Error::Malformed(format!(
            "{what} does not hold {size} sorted distinct symbols"
        )));
    }
    Ok(alphabet)
}
