//! Softmax readout and the two ways of learning it.

use nalgebra::{DMatrix, DVectorView, DVectorViewMut};

use crate::encoding::one_hot;
use crate::{Error, Result};

/// `-ln` of the smallest positive double; cross entropy never exceeds this.
pub const CROSS_ENTROPY_CAP: f64 = 745.0;

/// `K x N` readout matrix; row `k` scores output symbol `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadoutWeights {
    entries: DMatrix<f64>,
}

impl ReadoutWeights {
    pub fn zeros(outputs: usize, n: usize) -> Self {
        ReadoutWeights {
            entries: DMatrix::zeros(outputs, n),
        }
    }

    pub fn from_matrix(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Malformed("readout weights must be finite".into()));
        }
        Ok(ReadoutWeights { entries })
    }

    pub fn outputs(&self) -> usize {
        self.entries.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Raw scores `W x` written into `out`.
    pub fn scores_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_state(x)?;
        if out.len() != self.outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.outputs(),
                actual: out.len(),
            });
        }
        let xv = DVectorView::from_slice(x, x.len());
        let mut ov = DVectorViewMut::from_slice(out, self.outputs());
        ov.gemv(1.0, &self.entries, &xv, 0.0);
        Ok(())
    }

    /// Index of the largest score; ties go to the lowest index.
    ///
    /// Softmax is monotone, so this is also the argmax of the probabilities.
    pub fn predict(&self, x: &[f64], scratch: &mut [f64]) -> Result<usize> {
        self.scores_into(x, scratch)?;
        Ok(argmax(scratch))
    }
}

/// First index of the maximum.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate().skip(1) {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// In-place max-shifted softmax.
pub fn softmax_in_place(scores: &mut [f64]) {
    let c = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - c).exp();
        total += *s;
    }
    let inv = 1.0 / total;
    scores.iter_mut().for_each(|s| *s *= inv);
}

pub fn softmax_probs(w: &ReadoutWeights, x: &[f64]) -> Result<Vec<f64>> {
    let mut p = vec![0.0; w.outputs()];
    w.scores_into(x, &mut p)?;
    softmax_in_place(&mut p);
    Ok(p)
}

/// `-ln p[target]`, capped at [`CROSS_ENTROPY_CAP`].
pub fn cross_entropy(p: &[f64], target: usize) -> Result<f64> {
    let &pt = p.get(target).ok_or(Error::IndexOutOfRange {
        index: target,
        size: p.len(),
    })?;
    if pt <= 0.0 {
        return Ok(CROSS_ENTROPY_CAP);
    }
    Ok((-pt.ln()).clamp(0.0, CROSS_ENTROPY_CAP))
}

/// Gradient of the cross entropy with respect to `W`: `(p - e_target) x^T`.
pub fn cross_entropy_gradient(
    w: &ReadoutWeights,
    x: &[f64],
    target: usize,
) -> Result<DMatrix<f64>> {
    let mut p = softmax_probs(w, x)?;
    if target >= p.len() {
        return Err(Error::IndexOutOfRange {
            index: target,
            size: p.len(),
        });
    }
    p[target] -= 1.0;
    Ok(DMatrix::from_fn(p.len(), x.len(), |k, n| p[k] * x[n]))
}

/// One unit-step gradient update: `W += (e_target - p) x^T`.
pub fn gradient_step(w: &ReadoutWeights, x: &[f64], target: usize) -> Result<ReadoutWeights> {
    let mut next = w.clone();
    let mut scratch = vec![0.0; w.outputs()];
    gradient_step_in_place(&mut next, x, target, &mut scratch)?;
    Ok(next)
}

/// In-place form of [`gradient_step`]; `scratch` must hold `K` values.
pub fn gradient_step_in_place(
    w: &mut ReadoutWeights,
    x: &[f64],
    target: usize,
    scratch: &mut [f64],
) -> Result<()> {
    if target >= w.outputs() {
        return Err(Error::IndexOutOfRange {
            index: target,
            size: w.outputs(),
        });
    }
    w.scores_into(x, scratch)?;
    softmax_in_place(scratch);
    for p in scratch.iter_mut() {
        *p = -*p;
    }
    scratch[target] += 1.0;
    let dv = DVectorView::from_slice(scratch, scratch.len());
    let xv = DVectorView::from_slice(x, x.len());
    w.entries.ger(1.0, &dv, &xv, 1.0);
    Ok(())
}

/// `W = (S X^T)(X X^T + eta I)^-1`; columns of `states` and `targets` pair up.
pub fn solve_offline(
    states: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    eta: f64,
) -> Result<ReadoutWeights> {
    if states.ncols() != targets.ncols() {
        return Err(Error::LengthMismatch {
            left: states.ncols(),
            right: targets.ncols(),
        });
    }
    // Sum column by column, in the same order as the incremental route, so
    // both produce identical normal equations even when X X^T is singular.
    let mut acc = NormalEquationsAccumulator::new(targets.nrows(), states.nrows());
    for (x, s) in states.column_iter().zip(targets.column_iter()) {
        acc.accumulate(x.as_slice(), s.as_slice())?;
    }
    solve_ridge(acc.yxt, acc.xxt, eta)
}

fn solve_ridge(cross: DMatrix<f64>, mut gram: DMatrix<f64>, eta: f64) -> Result<ReadoutWeights> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eta must be finite and >= 0 (got {eta})"
        )));
    }
    for i in 0..gram.nrows() {
        gram[(i, i)] += eta;
    }
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    // (X X^T + eta I) is symmetric, so W^T = A^-1 (S X^T)^T.
    let w = chol.solve(&cross.transpose()).transpose();
    ReadoutWeights::from_matrix(w).map_err(|_| Error::SingularSystem)
}

/// Running sums `Y X^T` and `X X^T`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalEquationsAccumulator {
    yxt: DMatrix<f64>,
    xxt: DMatrix<f64>,
    count: usize,
}

impl NormalEquationsAccumulator {
    pub fn new(outputs: usize, n: usize) -> Self {
        NormalEquationsAccumulator {
            yxt: DMatrix::zeros(outputs, n),
            xxt: DMatrix::zeros(n, n),
            count: 0,
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn yxt(&self) -> &DMatrix<f64> {
        &self.yxt
    }

    pub fn xxt(&self) -> &DMatrix<f64> {
        &self.xxt
    }

    pub fn accumulate(&mut self, x: &[f64], target: &[f64]) -> Result<()> {
        let n = self.xxt.nrows();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        if target.len() != self.yxt.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.yxt.nrows(),
                actual: target.len(),
            });
        }
        let xv = DVectorView::from_slice(x, n);
        let yv = DVectorView::from_slice(target, target.len());
        self.yxt.ger(1.0, &yv, &xv, 1.0);
        // Fill both triangles from the same products so the sum stays exactly symmetric.
        for j in 0..n {
            for i in j..n {
                let v = x[i] * x[j];
                self.xxt[(i, j)] += v;
                if i != j {
                    self.xxt[(j, i)] += v;
                }
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn accumulate_index(&mut self, x: &[f64], target: usize) -> Result<()> {
        self.accumulate(x, &one_hot(target, self.yxt.nrows())?)
    }

    pub fn solve(&self, eta: f64) -> Result<ReadoutWeights> {
        if self.count == 0 {
            return Err(Error::InvalidParameter(
                "accumulator is empty; accumulate at least one step".into(),
            ));
        }
        solve_ridge(self.yxt.clone(), self.xxt.clone(), eta)
    }
}

pub fn solve_from_accumulator(
    acc: &NormalEquationsAccumulator,
    eta: f64,
) -> Result<ReadoutWeights> {
    acc.solve(eta)
}
