//! Input matrix, isometric reservoirs and the normalized state update.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::rng::{RandomStream, SeededStream};
use crate::{Error, Result};

/// Default ridge parameter for the offline readout solve.
pub const DEFAULT_ETA: f64 = 1e-7;

const MIN_NORM: f64 = 1e-300;

/// `N x M` input matrix whose columns have zero mean and unit norm.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix {
    entries: DMatrix<f64>,
}

impl InputMatrix {
    /// Draws `N*M` uniforms in row-major order, then centers and normalizes
    /// every column.
    pub fn random<R: RandomStream + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "input matrix needs M >= 1 and N >= 1 (got M={m}, N={n})"
            )));
        }
        if m > n {
            return Err(Error::AlphabetExceedsReservoir {
                inputs: m,
                reservoir: n,
            });
        }
        let mut entries =
            DMatrix::from_row_iterator(n, m, std::iter::repeat_with(|| rng.next_f64()).take(n * m));
        for mut col in entries.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
            let norm = col.norm();
            if norm < MIN_NORM {
                return Err(Error::DegenerateState { norm });
            }
            col /= norm;
        }
        Ok(InputMatrix { entries })
    }

    /// Wraps an existing matrix, checking the column invariants to `tol`.
    pub fn from_matrix(entries: DMatrix<f64>, tol: f64) -> Result<Self> {
        if entries.ncols() > entries.nrows() {
            return Err(Error::AlphabetExceedsReservoir {
                inputs: entries.ncols(),
                reservoir: entries.nrows(),
            });
        }
        for (m, col) in entries.column_iter().enumerate() {
            if col.mean().abs() > tol || (col.norm() - 1.0).abs() > tol {
                return Err(Error::Malformed(format!(
                    "input column {m} is not zero-mean unit-norm"
                )));
            }
        }
        Ok(InputMatrix { entries })
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `U * one_hot(index)`.
    pub fn column(&self, index: usize) -> Result<&[f64]> {
        if index >= self.cols() {
            return Err(Error::IndexOutOfRange {
                index,
                size: self.cols(),
            });
        }
        let n = self.rows();
        Ok(&self.entries.as_slice()[index * n..(index + 1) * n])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReservoirKind {
    Dense,
    Cyclic,
}

impl std::str::FromStr for ReservoirKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(ReservoirKind::Dense),
            "cyclic" => Ok(ReservoirKind::Cyclic),
            other => Err(Error::InvalidParameter(format!(
                "unknown reservoir kind {other:?} (expected dense or cyclic)"
            ))),
        }
    }
}

impl std::fmt::Display for ReservoirKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReservoirKind::Dense => "dense",
            ReservoirKind::Cyclic => "cyclic",
        })
    }
}

/// Isometric recurrent operator.
#[derive(Clone, Debug, PartialEq)]
pub enum Reservoir {
    DenseOrthogonal(DMatrix<f64>),
    /// `out[n] = x[(n + 1) mod N]`.
    CyclicShift(usize),
}

impl Reservoir {
    /// Orthogonal factor of the QR decomposition of a standard-normal `N x N`
    /// matrix (filled row-major), with column signs fixed so that `diag(R) > 0`.
    pub fn dense_orthogonal<R: RandomStream + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "reservoir size must be >= 1".into(),
            ));
        }
        let mut normals = vec![0.0; n * n];
        rng.fill_normal(&mut normals);
        let v = DMatrix::from_row_slice(n, n, &normals);
        let qr = v.qr();
        let r = qr.r();
        let mut q = qr.q();
        for i in 0..n {
            if r[(i, i)] < 0.0 {
                q.column_mut(i).neg_mut();
            }
        }
        Ok(Reservoir::DenseOrthogonal(q))
    }

    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "reservoir size must be >= 1".into(),
            ));
        }
        Ok(Reservoir::CyclicShift(n))
    }

    /// Wraps a square matrix after checking `max |Q^T Q - I| <= tol`.
    pub fn from_orthogonal(q: DMatrix<f64>, tol: f64) -> Result<Self> {
        if !q.is_square() || q.nrows() == 0 {
            return Err(Error::Malformed("reservoir matrix must be square".into()));
        }
        let deviation = orthogonality_defect(&q);
        if deviation > tol {
            return Err(Error::Malformed(format!(
                "reservoir matrix is not orthogonal (defect {deviation:e})"
            )));
        }
        Ok(Reservoir::DenseOrthogonal(q))
    }

    /// Dense Kronecker product of orthogonal factors, itself orthogonal.
    /// Builds large dense reservoirs without an `O(N^3)` QR.
    pub fn kronecker(factors: &[DMatrix<f64>], tol: f64) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter(
                "kronecker needs at least one factor".into(),
            ));
        }
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        for f in factors {
            if let Reservoir::DenseOrthogonal(q) = Reservoir::from_orthogonal(f.clone(), tol)? {
                acc = acc.kronecker(&q);
            }
        }
        Ok(Reservoir::DenseOrthogonal(acc))
    }

    pub fn from_kind<R: RandomStream + ?Sized>(
        kind: ReservoirKind,
        n: usize,
        rng: &mut R,
    ) -> Result<Self> {
        match kind {
            ReservoirKind::Dense => Reservoir::dense_orthogonal(n, rng),
            ReservoirKind::Cyclic => Reservoir::cyclic(n),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Reservoir::DenseOrthogonal(q) => q.nrows(),
            Reservoir::CyclicShift(n) => *n,
        }
    }

    pub fn kind(&self) -> ReservoirKind {
        match self {
            Reservoir::DenseOrthogonal(_) => ReservoirKind::Dense,
            Reservoir::CyclicShift(_) => ReservoirKind::Cyclic,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.size();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        if out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: out.len(),
            });
        }
        match self {
            Reservoir::DenseOrthogonal(q) => {
                let xv = nalgebra::DVectorView::from_slice(x, n);
                let mut ov = nalgebra::DVectorViewMut::from_slice(out, n);
                ov.gemv(1.0, q, &xv, 0.0);
            }
            Reservoir::CyclicShift(_) => {
                out[..n - 1].copy_from_slice(&x[1..]);
                out[n - 1] = x[0];
            }
        }
        Ok(())
    }
}

/// `max |Q^T Q - I|` entrywise.
pub fn orthogonality_defect(q: &DMatrix<f64>) -> f64 {
    let gram = q.transpose() * q;
    let id = DMatrix::<f64>::identity(q.ncols(), q.ncols());
    (gram - id).amax()
}

/// Hidden state on the unit hypersphere, or the all-zero initial state.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    pub values: Vec<f64>,
    pub t: usize,
}

impl HiddenState {
    pub fn zero(n: usize) -> Self {
        HiddenState {
            values: vec![0.0; n],
            t: 0,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }
}

/// Reservoir and leak settings shared by training and recall.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n: usize,
    pub alpha: f64,
    pub eta: f64,
    pub reservoir: ReservoirKind,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(n: usize) -> Self {
        ModelConfig {
            n,
            alpha: 1.0,
            eta: DEFAULT_ETA,
            reservoir: ReservoirKind::Cyclic,
            seed: 0,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_reservoir(mut self, kind: ReservoirKind) -> Self {
        self.reservoir = kind;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be >= 1".into()));
        }
        validate_alpha(self.alpha)?;
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eta must be finite and >= 0 (got {})",
                self.eta
            )));
        }
        Ok(())
    }
}

pub(crate) fn validate_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1] (got {alpha})"
        )))
    }
}

/// The fixed (untrained) part of a model: `U`, the reservoir and the leak rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    input: InputMatrix,
    reservoir: Reservoir,
    alpha: f64,
}

impl Network {
    pub fn new(input: InputMatrix, reservoir: Reservoir, alpha: f64) -> Result<Self> {
        validate_alpha(alpha)?;
        if input.rows() != reservoir.size() {
            return Err(Error::DimensionMismatch {
                expected: reservoir.size(),
                actual: input.rows(),
            });
        }
        Ok(Network {
            input,
            reservoir,
            alpha,
        })
    }

    /// Draws `U` and then (for dense reservoirs) `Q` from the config's seed.
    pub fn from_config(inputs: usize, config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = SeededStream::new(config.seed);
        let input = InputMatrix::random(inputs, config.n, &mut rng)?;
        let reservoir = Reservoir::from_kind(config.reservoir, config.n, &mut rng)?;
        Network::new(input, reservoir, config.alpha)
    }

    pub fn size(&self) -> usize {
        self.reservoir.size()
    }

    pub fn inputs(&self) -> usize {
        self.input.cols()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn input(&self) -> &InputMatrix {
        &self.input
    }

    pub fn reservoir(&self) -> &Reservoir {
        &self.reservoir
    }

    /// Writes the successor of `x` under input symbol `input` into `out`.
    ///
    /// `v = (1 - a) x + a (R x + U e_input)`, `out = v / |v|`. From the zero
    /// state the result is the input column itself.
    pub fn step_into(&self, x: &[f64], input: usize, out: &mut [f64]) -> Result<()> {
        let u = self.input.column(input)?;
        if x.iter().all(|&v| v == 0.0) {
            if x.len() != u.len() || out.len() != u.len() {
                return Err(Error::DimensionMismatch {
                    expected: u.len(),
                    actual: x.len().min(out.len()),
                });
            }
            out.copy_from_slice(u);
            return Ok(());
        }
        let a = self.alpha;
        let keep = 1.0 - a;
        match &self.reservoir {
            Reservoir::CyclicShift(n) => {
                let n = *n;
                if x.len() != n || out.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        actual: x.len().min(out.len()),
                    });
                }
                for i in 0..n - 1 {
                    out[i] = keep * x[i] + a * (x[i + 1] + u[i]);
                }
                out[n - 1] = keep * x[n - 1] + a * (x[0] + u[n - 1]);
            }
            Reservoir::DenseOrthogonal(_) => {
                self.reservoir.apply_into(x, out)?;
                for ((o, &xi), &ui) in out.iter_mut().zip(x).zip(u) {
                    *o = keep * xi + a * (*o + ui);
                }
            }
        }
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm < MIN_NORM {
            return Err(Error::DegenerateState { norm });
        }
        let inv = 1.0 / norm;
        out.iter_mut().for_each(|v| *v *= inv);
        Ok(())
    }

    pub fn update(&self, x: &HiddenState, input: usize) -> Result<HiddenState> {
        let mut values = vec![0.0; self.size()];
        self.step_into(&x.values, input, &mut values)?;
        Ok(HiddenState { values, t: x.t + 1 })
    }
}

/// One state update with explicit components.
pub fn update_state(
    x: &HiddenState,
    input: usize,
    u: &InputMatrix,
    reservoir: &Reservoir,
    alpha: f64,
) -> Result<HiddenState> {
    validate_alpha(alpha)?;
    let net = Network {
        input: u.clone(),
        reservoir: reservoir.clone(),
        alpha,
    };
    if u.rows() != reservoir.size() {
        return Err(Error::DimensionMismatch {
            expected: reservoir.size(),
            actual: u.rows(),
        });
    }
    net.update(x, input)
}

pub fn norm(x: &[f64]) -> f64 {
    DVector::from_column_slice(x).norm()
}
