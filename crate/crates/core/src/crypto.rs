//! Password-keyed symmetric encryption in the associative regime.
//!
//! The password seeds a SHA-256 counter-mode keystream from which the input
//! matrix, a dense orthogonal reservoir and a key symbol sequence are drawn.
//! The message is masked with the key sequence (addition mod `K`), then a
//! readout is trained to map the key-driven reservoir states onto the masked
//! message. The readout weights are the ciphertext; decryption re-derives the
//! key material, replays the states through the weights and unmasks.
//!
//! There is no integrity protection: a wrong password decrypts to noise.

use crate::encoding::{Alphabet, SymbolSequence};
use crate::readout::ReadoutWeights;
use crate::regimes::{fit_associative, TrainedModel};
use crate::reservoir::{InputMatrix, Network, Reservoir, DEFAULT_ETA};
use crate::rng::{RandomStream, Sha256Keystream};
use crate::wire::{read_preamble, write_preamble, Reader, Writer};
use crate::{Error, Result};

pub const CIPHER_MAGIC: &[u8; 4] = b"HRC1";
pub const CIPHER_VERSION: u8 = 1;

pub const DEFAULT_KEY_ALPHABET: usize = 38;
pub const DEFAULT_N_FACTOR: f64 = 2.0;
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Printable ASCII plus tab, newline and carriage return.
pub fn default_text_alphabet() -> Alphabet {
    Alphabet::from_symbols((0x20u8..=0x7e).chain(*b"\t\n\r").map(char::from))
}

#[derive(Clone, Debug, PartialEq)]
pub struct CryptoParams {
    /// Reservoir size per message symbol; `N = max(ceil(n_factor * T), M)`.
    pub n_factor: f64,
    pub alpha: f64,
    /// Key alphabet size `M`.
    pub key_alphabet: usize,
    pub output_alphabet: Alphabet,
    pub eta: f64,
}

impl CryptoParams {
    pub fn new(output_alphabet: Alphabet) -> Self {
        CryptoParams {
            n_factor: DEFAULT_N_FACTOR,
            alpha: DEFAULT_ALPHA,
            key_alphabet: DEFAULT_KEY_ALPHABET,
            output_alphabet,
            eta: DEFAULT_ETA,
        }
    }

    pub fn reservoir_size(&self, t: usize) -> usize {
        ((self.n_factor * t as f64).ceil() as usize).max(self.key_alphabet)
    }

    fn validate(&self) -> Result<()> {
        if !(self.n_factor > 0.0 && self.n_factor.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "n_factor must be positive (got {})",
                self.n_factor
            )));
        }
        if self.key_alphabet < 2 {
            return Err(Error::DegenerateKeyAlphabet(self.key_alphabet));
        }
        if self.output_alphabet.is_empty() {
            return Err(Error::InvalidParameter("output alphabet is empty".into()));
        }
        crate::reservoir::validate_alpha(self.alpha)
    }
}

/// Secret material shared by both parties.
#[derive(Clone, Debug, PartialEq)]
pub struct KeyMaterial {
    pub input: InputMatrix,
    pub reservoir: Reservoir,
    pub key: SymbolSequence,
}

/// Consumes the keystream as: `N*M` uniforms for `U` (row-major), `N*N`
/// Box–Muller normals for the reservoir (row-major, QR with `diag(R) > 0`),
/// then `T` key symbols from 32-bit words with rejection sampling.
pub fn derive_key_material(password: &[u8], t: usize, n: usize, m: usize) -> Result<KeyMaterial> {
    if password.is_empty() {
        return Err(Error::EmptyPassword);
    }
    if m < 2 {
        return Err(Error::DegenerateKeyAlphabet(m));
    }
    if t < 1 {
        return Err(Error::InvalidParameter("key length must be >= 1".into()));
    }
    let bound = u32::try_from(m)
        .map_err(|_| Error::InvalidParameter(format!("key alphabet too large ({m})")))?;
    let mut stream = Sha256Keystream::new(password);
    let input = InputMatrix::random(m, n, &mut stream)?;
    let reservoir = Reservoir::dense_orthogonal(n, &mut stream)?;
    let key = (0..t).map(|_| stream.next_below(bound) as usize).collect();
    Ok(KeyMaterial {
        input,
        reservoir,
        key: SymbolSequence::new(key, m)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaskDirection {
    Encode,
    Decode,
}

/// `out(t) = (y(t) ± s(t)) mod K`; for `K = 2` this is bitwise XOR.
pub fn mask(
    message: &SymbolSequence,
    key: &SymbolSequence,
    direction: MaskDirection,
) -> Result<SymbolSequence> {
    if message.len() != key.len() {
        return Err(Error::LengthMismatch {
            left: message.len(),
            right: key.len(),
        });
    }
    let k = message.alphabet_size();
    let out = message
        .indices()
        .iter()
        .zip(key.indices())
        .map(|(&y, &s)| {
            let s = s % k;
            match direction {
                MaskDirection::Encode => (y + s) % k,
                MaskDirection::Decode => (y + k - s) % k,
            }
        })
        .collect();
    SymbolSequence::new(out, k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CipherText {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub alpha: f64,
    pub alphabet: Alphabet,
    pub weights: ReadoutWeights,
}

impl CipherText {
    pub fn k(&self) -> usize {
        self.alphabet.len()
    }

    /// `"HRC1"`, version, 4 reserved zero bytes, u64 `N, M, K, T`, f64 alpha,
    /// length-prefixed UTF-8 alphabet, then `K*N` f64 weights row-major. All
    /// little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::default();
        write_preamble(&mut w, CIPHER_MAGIC, CIPHER_VERSION);
        for v in [self.n, self.m, self.k(), self.t] {
            w.u64(v as u64);
        }
        w.f64(self.alpha);
        w.string(&self.alphabet.to_text());
        w.matrix(self.weights.matrix());
        w.buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let mut r = Reader::new(data);
        read_preamble(&mut r, CIPHER_MAGIC, CIPHER_VERSION)?;
        let n = r.usize("N")?;
        let m = r.usize("M")?;
        let k = r.usize("K")?;
        let t = r.usize("T")?;
        let alpha = r.f64("alpha")?;
        let text = r.string("alphabet")?;
        let alphabet = Alphabet::from_symbols(text.chars());
        if alphabet.len() != k || alphabet.to_text() != text {
            return Err(Error::Malformed(format!(
                "alphabet does not match K={k} sorted distinct symbols"
            )));
        }
        if n == 0 || m < 2 || m > n || t == 0 || k == 0 {
            return Err(Error::Malformed(format!(
                "inconsistent dimensions N={n} M={m} K={k} T={t}"
            )));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Malformed(format!("alpha {alpha} outside (0, 1]")));
        }
        let expected = k.checked_mul(n).and_then(|c| c.checked_mul(8));
        if expected != Some(r.remaining()) {
            return Err(Error::Malformed(format!(
                "payload has {} bytes; header implies K*N*8 = {}",
                r.remaining(),
                expected.map_or("overflow".to_string(), |e| e.to_string())
            )));
        }
        let weights = ReadoutWeights::from_matrix(r.matrix(k, n, "payload")?)?;
        r.finish("payload")?;
        Ok(CipherText {
            n,
            m,
            t,
            alpha,
            alphabet,
            weights,
        })
    }
}

pub fn encrypt(message: &str, password: &[u8], params: &CryptoParams) -> Result<CipherText> {
    params.validate()?;
    let plain = params.output_alphabet.encode(message)?;
    let t = plain.len();
    if t < 2 {
        return Err(Error::InvalidParameter(format!(
            "message must have at least 2 symbols (got {t})"
        )));
    }
    let n = params.reservoir_size(t);
    let km = derive_key_material(password, t, n, params.key_alphabet)?;
    let masked = mask(&plain, &km.key, MaskDirection::Encode)?;
    let network = Network::new(km.input, km.reservoir, params.alpha)?;
    let model = fit_associative(network, &km.key, &masked, params.eta)?;
    let recalled = model.recall_associative(&km.key)?;
    let err = crate::regimes::recall_error(&masked, &recalled)?;
    if err != 0.0 {
        return Err(Error::LossyEncryption(err));
    }
    Ok(CipherText {
        n,
        m: params.key_alphabet,
        t,
        alpha: params.alpha,
        alphabet: params.output_alphabet.clone(),
        weights: model.into_parts().1,
    })
}

pub fn decrypt(cipher: &CipherText, password: &[u8]) -> Result<String> {
    if cipher.weights.inputs() != cipher.n || cipher.weights.outputs() != cipher.k() {
        return Err(Error::Malformed(
            "weights do not match header dimensions".into(),
        ));
    }
    let km = derive_key_material(password, cipher.t, cipher.n, cipher.m)?;
    let network = Network::new(km.input, km.reservoir, cipher.alpha)?;
    let model = TrainedModel::new(network, cipher.weights.clone())?;
    let masked = model.recall_associative(&km.key)?;
    let plain = mask(&masked, &km.key, MaskDirection::Decode)?;
    cipher.alphabet.decode(&plain)
}
