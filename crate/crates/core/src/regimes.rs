//! Training and recall in the generative and associative regimes.
//!
//! Generative: the model learns to predict `s(t+1)` from the state reached
//! after consuming `s(0..=t)` and regenerates the sequence from `s(0)` by
//! feeding its own predictions back. Associative: the model maps the state
//! after `s(0..=t)` to a separate output symbol `y(t)`.

use nalgebra::DMatrix;

use crate::encoding::SymbolSequence;
use crate::readout::{gradient_step_in_place, solve_offline, ReadoutWeights};
use crate::reservoir::{ModelConfig, Network};
use crate::{Error, Result};

/// Network plus trained readout.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    network: Network,
    readout: ReadoutWeights,
}

impl TrainedModel {
    pub fn new(network: Network, readout: ReadoutWeights) -> Result<Self> {
        if readout.inputs() != network.size() {
            return Err(Error::DimensionMismatch {
                expected: network.size(),
                actual: readout.inputs(),
            });
        }
        Ok(TrainedModel { network, readout })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn readout(&self) -> &ReadoutWeights {
        &self.readout
    }

    pub fn into_parts(self) -> (Network, ReadoutWeights) {
        (self.network, self.readout)
    }

    /// Input alphabet size `M`.
    pub fn inputs(&self) -> usize {
        self.network.inputs()
    }

    /// Output alphabet size `K`.
    pub fn outputs(&self) -> usize {
        self.readout.outputs()
    }

    fn check_generative(&self) -> Result<()> {
        if self.inputs() != self.outputs() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs(),
                actual: self.outputs(),
            });
        }
        Ok(())
    }

    /// Regenerates `len` symbols starting from `start`, feeding predictions back.
    pub fn recall_generative(&self, start: usize, len: usize) -> Result<SymbolSequence> {
        recall_generative(self, start, len)
    }

    pub fn recall_associative(&self, inputs: &SymbolSequence) -> Result<SymbolSequence> {
        recall_associative(self, inputs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_error: f64,
    pub converged: bool,
}

/// States after consuming each prefix of `inputs`, one column per symbol.
pub fn drive(network: &Network, inputs: &[usize]) -> Result<DMatrix<f64>> {
    let n = network.size();
    let mut states = DMatrix::zeros(n, inputs.len());
    let data = states.as_mut_slice();
    let zero = vec![0.0; n];
    for (t, &symbol) in inputs.iter().enumerate() {
        let (done, rest) = data.split_at_mut(t * n);
        let prev = if t == 0 {
            &zero[..]
        } else {
            &done[(t - 1) * n..]
        };
        network.step_into(prev, symbol, &mut rest[..n])?;
    }
    Ok(states)
}

/// Teacher-forced states for generative training: `N x (T-1)`, column `t`
/// being the state after `s(0..=t)`.
pub fn drive_states(seq: &SymbolSequence, network: &Network) -> Result<DMatrix<f64>> {
    if seq.len() < 2 {
        return Err(Error::InvalidParameter(
            "generative training needs a sequence of length >= 2".into(),
        ));
    }
    check_inputs(seq, network)?;
    drive(network, &seq.indices()[..seq.len() - 1])
}

fn check_inputs(seq: &SymbolSequence, network: &Network) -> Result<()> {
    if seq.alphabet_size() != network.inputs() {
        return Err(Error::DimensionMismatch {
            expected: network.inputs(),
            actual: seq.alphabet_size(),
        });
    }
    Ok(())
}

fn one_hot_columns(indices: &[usize], size: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(size, indices.len());
    for (c, &i) in indices.iter().enumerate() {
        m[(i, c)] = 1.0;
    }
    m
}

/// Ridge-regression readout for next-symbol prediction on a given network.
pub fn fit_generative(network: Network, seq: &SymbolSequence, eta: f64) -> Result<TrainedModel> {
    let states = drive_states(seq, &network)?;
    let targets = one_hot_columns(&seq.indices()[1..], seq.alphabet_size());
    let readout = solve_offline(&states, &targets, eta)?;
    TrainedModel::new(network, readout)
}

pub fn train_offline_generative(
    seq: &SymbolSequence,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    let network = Network::from_config(seq.alphabet_size(), config)?;
    fit_generative(network, seq, config.eta)
}

/// Online cross-entropy training from `W = 0`, at most `max_epochs` epochs.
pub fn train_online_generative(
    seq: &SymbolSequence,
    config: &ModelConfig,
    max_epochs: usize,
) -> Result<(TrainedModel, TrainReport)> {
    train_online_generative_with(seq, config, max_epochs, |_, _| {})
}

/// As [`train_online_generative`], calling `on_epoch(epoch, error)` after
/// every epoch.
pub fn train_online_generative_with(
    seq: &SymbolSequence,
    config: &ModelConfig,
    max_epochs: usize,
    on_epoch: impl FnMut(usize, f64),
) -> Result<(TrainedModel, TrainReport)> {
    let network = Network::from_config(seq.alphabet_size(), config)?;
    let readout = ReadoutWeights::zeros(seq.alphabet_size(), network.size());
    let model = TrainedModel::new(network, readout)?;
    run_online(model, seq, max_epochs, on_epoch)
}

/// Continues online training from an existing model. If the model already
/// recalls `seq` perfectly it is returned unchanged with `epochs == 0`.
pub fn continue_online_generative(
    model: TrainedModel,
    seq: &SymbolSequence,
    max_epochs: usize,
) -> Result<(TrainedModel, TrainReport)> {
    check_inputs(seq, model.network())?;
    model.check_generative()?;
    let recalled = recall_generative(&model, seq.indices()[0], seq.len())?;
    let error = recall_error(seq, &recalled)?;
    if error == 0.0 {
        return Ok((
            model,
            TrainReport {
                epochs: 0,
                final_error: 0.0,
                converged: true,
            },
        ));
    }
    run_online(model, seq, max_epochs, |_, _| {})
}

fn run_online(
    model: TrainedModel,
    seq: &SymbolSequence,
    max_epochs: usize,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(TrainedModel, TrainReport)> {
    if seq.len() < 2 {
        return Err(Error::InvalidParameter(
            "generative training needs a sequence of length >= 2".into(),
        ));
    }
    check_inputs(seq, model.network())?;
    model.check_generative()?;
    // Teacher-forced states do not depend on W, so they are driven once.
    let states = drive_states(seq, model.network())?;
    let (network, mut readout) = model.into_parts();
    let s = seq.indices();
    let mut scratch = vec![0.0; readout.outputs()];
    let mut report = TrainReport {
        epochs: 0,
        final_error: 1.0,
        converged: false,
    };
    while report.epochs < max_epochs {
        for (t, x) in states.column_iter().enumerate() {
            gradient_step_in_place(&mut readout, x.as_slice(), s[t + 1], &mut scratch)?;
        }
        report.epochs += 1;
        let recalled = recall_with_teacher_states(&network, &readout, seq, &states)?;
        report.final_error = recall_error_indices(s, &recalled)?;
        on_epoch(report.epochs, report.final_error);
        if report.final_error == 0.0 {
            report.converged = true;
            break;
        }
    }
    Ok((TrainedModel::new(network, readout)?, report))
}

/// Generative recall of `seq` from its first symbol, reusing the
/// teacher-forced `states` for as long as the recalled prefix matches `seq`
/// (the live recurrence would recompute exactly those states) and switching
/// to the live recurrence after the first divergence.
fn recall_with_teacher_states(
    network: &Network,
    readout: &ReadoutWeights,
    seq: &SymbolSequence,
    states: &DMatrix<f64>,
) -> Result<Vec<usize>> {
    let s = seq.indices();
    let mut scratch = vec![0.0; readout.outputs()];
    let mut out = Vec::with_capacity(s.len());
    out.push(s[0]);
    let mut t = 0;
    while t + 1 < s.len() {
        let predicted = readout.predict(states.column(t).as_slice(), &mut scratch)?;
        out.push(predicted);
        if predicted != s[t + 1] {
            break;
        }
        t += 1;
    }
    if out.len() < s.len() {
        let mut x = states.column(t).as_slice().to_vec();
        let mut next = vec![0.0; x.len()];
        let mut symbol = *out.last().expect("non-empty");
        while out.len() < s.len() {
            network.step_into(&x, symbol, &mut next)?;
            std::mem::swap(&mut x, &mut next);
            symbol = readout.predict(&x, &mut scratch)?;
            out.push(symbol);
        }
    }
    Ok(out)
}

/// Readout mapping the state after `inputs(0..=t)` to `outputs(t)`.
pub fn fit_associative(
    network: Network,
    inputs: &SymbolSequence,
    outputs: &SymbolSequence,
    eta: f64,
) -> Result<TrainedModel> {
    if inputs.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left: inputs.len(),
            right: outputs.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::InvalidParameter(
            "associative training needs at least one pair".into(),
        ));
    }
    check_inputs(inputs, &network)?;
    let states = drive(&network, inputs.indices())?;
    let targets = one_hot_columns(outputs.indices(), outputs.alphabet_size());
    let readout = solve_offline(&states, &targets, eta)?;
    TrainedModel::new(network, readout)
}

pub fn train_offline_associative(
    inputs: &SymbolSequence,
    outputs: &SymbolSequence,
    config: &ModelConfig,
) -> Result<TrainedModel> {
    let network = Network::from_config(inputs.alphabet_size(), config)?;
    fit_associative(network, inputs, outputs, config.eta)
}

pub fn recall_generative(model: &TrainedModel, start: usize, len: usize) -> Result<SymbolSequence> {
    model.check_generative()?;
    let k = model.outputs();
    if start >= k {
        return Err(Error::IndexOutOfRange {
            index: start,
            size: k,
        });
    }
    if len == 0 {
        return Err(Error::InvalidParameter("recall length must be >= 1".into()));
    }
    let n = model.network.size();
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; k];
    let mut out = Vec::with_capacity(len);
    let mut symbol = start;
    out.push(symbol);
    for _ in 1..len {
        model.network.step_into(&x, symbol, &mut next)?;
        std::mem::swap(&mut x, &mut next);
        symbol = model.readout.predict(&x, &mut scratch)?;
        out.push(symbol);
    }
    SymbolSequence::new(out, k)
}

pub fn recall_associative(model: &TrainedModel, inputs: &SymbolSequence) -> Result<SymbolSequence> {
    check_inputs(inputs, model.network())?;
    let n = model.network.size();
    let mut x = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut scratch = vec![0.0; model.outputs()];
    let mut out = Vec::with_capacity(inputs.len());
    for &symbol in inputs.indices() {
        model.network.step_into(&x, symbol, &mut next)?;
        std::mem::swap(&mut x, &mut next);
        out.push(model.readout.predict(&x, &mut scratch)?);
    }
    SymbolSequence::new(out, model.outputs())
}

/// Fraction of positions where `a` and `b` differ.
pub fn recall_error(a: &SymbolSequence, b: &SymbolSequence) -> Result<f64> {
    recall_error_indices(a.indices(), b.indices())
}

pub fn recall_error_indices(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidParameter(
            "recall error needs non-empty sequences".into(),
        ));
    }
    let mismatches = a.iter().zip(b).filter(|(x, y)| x != y).count();
    Ok(mismatches as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::{InputMatrix, Reservoir, ReservoirKind};
    use crate::rng::{RandomStream, SeededStream};

    fn random_sequence(len: usize, m: usize, seed: u64) -> SymbolSequence {
        let mut rng = SeededStream::new(seed);
        let idx = (0..len)
            .map(|_| rng.next_below(m as u32) as usize)
            .collect();
        SymbolSequence::new(idx, m).unwrap()
    }

    fn seq(idx: &[usize], m: usize) -> SymbolSequence {
        SymbolSequence::new(idx.to_vec(), m).unwrap()
    }

    #[test]
    fn recall_error_examples() {
        let a = seq(&[0, 1, 2, 3], 4);
        assert_eq!(recall_error(&a, &a).unwrap(), 0.0);
        assert_eq!(recall_error(&a, &seq(&[1, 2, 3, 0], 4)).unwrap(), 1.0);
        assert_eq!(recall_error(&a, &seq(&[0, 1, 0, 0], 4)).unwrap(), 0.5);
        assert!(recall_error(&a, &seq(&[0], 4)).is_err());
    }

    #[test]
    fn drive_states_single_column() {
        let net = Network::from_config(3, &ModelConfig::new(5).with_seed(2)).unwrap();
        let x = drive_states(&seq(&[2, 0], 3), &net).unwrap();
        assert_eq!(x.ncols(), 1);
        assert_eq!(x.column(0).as_slice(), net.input().column(2).unwrap());
        assert!(drive_states(&seq(&[1], 3), &net).is_err());
    }

    #[test]
    fn drive_states_matches_unrolled_recurrence() {
        let mut rng = SeededStream::new(31);
        let u = InputMatrix::random(2, 3, &mut rng).unwrap();
        let alpha = 0.7;
        let net = Network::new(u.clone(), Reservoir::cyclic(3).unwrap(), alpha).unwrap();
        let s = seq(&[1, 0, 0, 1], 2);
        let states = drive_states(&s, &net).unwrap();
        // hand-unrolled: x1 = u_{s0}; x_{t+1} = normalize((1-a) x + a (shift(x) + u))
        let col = |i: usize| u.column(i).unwrap().to_vec();
        let mut x = col(1);
        let mut expected = vec![x.clone()];
        for &sym in &[0usize, 0] {
            let c = col(sym);
            let v: Vec<f64> = (0..3)
                .map(|n| (1.0 - alpha) * x[n] + alpha * (x[(n + 1) % 3] + c[n]))
                .collect();
            let s = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            x = v.iter().map(|a| a / s).collect();
            expected.push(x.clone());
        }
        assert_eq!(states.ncols(), 3);
        for (t, e) in expected.iter().enumerate() {
            for n in 0..3 {
                assert!((states[(n, t)] - e[n]).abs() < 1e-15);
            }
            assert!((states.column(t).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_sequence_is_recalled() {
        let s = seq(&[1, 1, 1, 1], 2);
        for kind in [ReservoirKind::Cyclic, ReservoirKind::Dense] {
            let cfg = ModelConfig::new(4).with_reservoir(kind).with_alpha(0.5);
            let model = train_offline_generative(&s, &cfg).unwrap();
            let r = model.recall_generative(1, 4).unwrap();
            assert_eq!(recall_error(&s, &r).unwrap(), 0.0);
        }
    }

    #[test]
    fn random_sequence_inside_perfect_region() {
        let s = random_sequence(100, 10, 4);
        let cfg = ModelConfig::new(80).with_seed(5);
        let model = train_offline_generative(&s, &cfg).unwrap();
        let r = model.recall_generative(s.indices()[0], 100).unwrap();
        assert_eq!(recall_error(&s, &r).unwrap(), 0.0);
    }

    #[test]
    fn online_training_converges_on_small_sequence() {
        let s = random_sequence(50, 5, 8);
        let cfg = ModelConfig::new(40).with_seed(1);
        let (model, report) = train_online_generative(&s, &cfg, 1000).unwrap();
        assert!(report.converged);
        assert!(report.epochs >= 1);
        assert_eq!(report.final_error, 0.0);
        let r = model.recall_generative(s.indices()[0], 50).unwrap();
        assert_eq!(r, s);

        // Warm start from a converged model does nothing.
        let (again, report) = continue_online_generative(model.clone(), &s, 50).unwrap();
        assert_eq!(report.epochs, 0);
        assert!(report.converged);
        assert_eq!(again, model);
    }

    #[test]
    fn online_and_offline_recall_agree_when_converged() {
        let s = random_sequence(60, 6, 21);
        let cfg = ModelConfig::new(48).with_seed(3).with_alpha(0.5);
        let offline = train_offline_generative(&s, &cfg).unwrap();
        let (online, report) = train_online_generative(&s, &cfg, 2000).unwrap();
        assert!(report.converged);
        let a = offline.recall_generative(s.indices()[0], 60).unwrap();
        let b = online.recall_generative(s.indices()[0], 60).unwrap();
        assert_eq!(a, b);
        assert_ne!(offline.readout(), online.readout());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let s = random_sequence(200, 3, 9);
        let cfg = ModelConfig::new(3).with_seed(1);
        let (_, report) = train_online_generative(&s, &cfg, 2).unwrap();
        assert_eq!(report.epochs, 2);
        assert!(!report.converged);
        assert!(report.final_error > 0.0);
    }

    #[test]
    fn recall_length_one_is_start_symbol() {
        let s = random_sequence(20, 4, 1);
        let model = train_offline_generative(&s, &ModelConfig::new(16)).unwrap();
        assert_eq!(model.recall_generative(3, 1).unwrap().indices(), &[3]);
        assert!(model.recall_generative(4, 1).is_err());
    }

    #[test]
    fn zero_readout_ties_resolve_to_lowest_index() {
        let net = Network::from_config(3, &ModelConfig::new(4)).unwrap();
        let model = TrainedModel::new(net, ReadoutWeights::zeros(3, 4)).unwrap();
        assert_eq!(
            model.recall_generative(2, 4).unwrap().indices(),
            &[2, 0, 0, 0]
        );
    }

    #[test]
    fn identity_association() {
        let s = random_sequence(100, 10, 12);
        let model = train_offline_associative(&s, &s, &ModelConfig::new(80).with_seed(4)).unwrap();
        assert_eq!(model.recall_associative(&s).unwrap(), s);
    }

    #[test]
    fn single_pair_association() {
        let s = seq(&[1], 2);
        let y = seq(&[2], 3);
        let model = train_offline_associative(&s, &y, &ModelConfig::new(2)).unwrap();
        assert_eq!(model.recall_associative(&s).unwrap(), y);
    }

    #[test]
    fn random_association_at_full_rank() {
        let s = random_sequence(256, 38, 13);
        let y = random_sequence(256, 38, 14);
        let cfg = ModelConfig::new(256)
            .with_seed(2)
            .with_reservoir(ReservoirKind::Dense);
        let model = train_offline_associative(&s, &y, &cfg).unwrap();
        let r = model.recall_associative(&s).unwrap();
        assert_eq!(recall_error(&y, &r).unwrap(), 0.0);
    }

    #[test]
    fn association_length_mismatch() {
        let err = train_offline_associative(&seq(&[0, 1], 2), &seq(&[0], 2), &ModelConfig::new(2));
        assert!(matches!(err, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn cached_recall_matches_live_recall() {
        let s = random_sequence(80, 6, 17);
        for (n, seed) in [(20, 1), (40, 2), (64, 3)] {
            let cfg = ModelConfig::new(n).with_seed(seed).with_alpha(0.6);
            let model = train_offline_generative(&s, &cfg).unwrap();
            let states = drive_states(&s, model.network()).unwrap();
            let cached =
                recall_with_teacher_states(model.network(), model.readout(), &s, &states).unwrap();
            let live = model.recall_generative(s.indices()[0], s.len()).unwrap();
            assert_eq!(cached, live.indices());
        }
    }

    #[test]
    fn recall_prefix_reproduces_training_states() {
        // While the recalled prefix matches, recall visits the teacher-forced states.
        let s = random_sequence(40, 5, 6);
        let cfg = ModelConfig::new(40).with_seed(6).with_alpha(0.4);
        let model = train_offline_generative(&s, &cfg).unwrap();
        let teacher = drive_states(&s, model.network()).unwrap();
        let recalled = model.recall_generative(s.indices()[0], 40).unwrap();
        assert_eq!(recalled, s);
        let replay = drive(model.network(), &recalled.indices()[..39]).unwrap();
        assert_eq!(teacher, replay);
    }
}
