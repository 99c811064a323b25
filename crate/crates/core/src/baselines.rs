//! Reference predictors: the add-1/2 (KT) estimator for featureless binary
//! sequences and projected online gradient descent.

use serde::{Deserialize, Serialize};

use crate::comparator::{project_slice, NormConstraint};
use crate::error::{Error, Result};
use crate::logistic::{dot, example_loss, sigmoid, ComparatorRef, Label, LabeledExample, ParamVector, RegretTrace};
use crate::online::OnlinePredictor;

/// Sufficient statistics of the KT estimator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct KtState {
    pub count_pos: u64,
    pub count_total: u64,
}

impl KtState {
    pub fn record(&mut self, label: Label) {
        self.count_total += 1;
        if label == Label::Pos {
            self.count_pos += 1;
        }
    }
}

/// `(n_+ + 1/2) / (n + 1)`.
pub fn kt_predict(state: &KtState) -> f64 {
    (state.count_pos as f64 + 0.5) / (state.count_total as f64 + 1.0)
}

// -ln of (k + 1/2)/(k + 1), ..., the sequential KT probability of a run of n
// labels containing `pos` positives, accumulated in a fixed order so that every
// permutation yields the same bits.
fn kt_code_length(pos: u64, total: u64) -> f64 {
    let neg = total - pos;
    let mut acc = 0.0;
    for k in 0..pos {
        acc -= (k as f64 + 0.5).ln();
    }
    for k in 0..neg {
        acc -= (k as f64 + 0.5).ln();
    }
    for n in 0..total {
        acc += (n as f64 + 1.0).ln();
    }
    acc
}

/// Total KT log-loss for `pos` positives among `total` labels. Depends only on the counts.
pub fn kt_log_loss(pos: u64, total: u64) -> Result<f64> {
    if pos > total {
        return Err(Error::InvalidArgument(format!("{pos} positives out of {total}")));
    }
    Ok(kt_code_length(pos, total))
}

/// Runs the KT estimator over `labels` against the empirical-rate comparator.
///
/// The cumulative regret at round `t` is evaluated from the prefix counts
/// rather than by summing per-round terms, so it is bit-for-bit invariant
/// under reordering of the prefix.
pub fn kt_run(labels: &[Label]) -> RegretTrace {
    let mut state = KtState::default();
    let mut alg = Vec::with_capacity(labels.len());
    let mut comp = Vec::with_capacity(labels.len());
    let mut cum = Vec::with_capacity(labels.len());
    let total_pos = labels.iter().filter(|&&l| l == Label::Pos).count() as u64;
    let n = labels.len() as u64;
    let p_hat = if n == 0 { 0.5 } else { total_pos as f64 / n as f64 };
    for &y in labels {
        let p = kt_predict(&state);
        alg.push(-(if y == Label::Pos { p } else { 1.0 - p }).ln());
        let (lp, lq) = (-p_hat.ln(), -(1.0 - p_hat).ln());
        comp.push(if y == Label::Pos { lp } else { lq });
        state.record(y);
        let neg = state.count_total - state.count_pos;
        let mut c = 0.0;
        if state.count_pos > 0 {
            c += state.count_pos as f64 * lp;
        }
        if neg > 0 {
            c += neg as f64 * lq;
        }
        cum.push(kt_code_length(state.count_pos, state.count_total) - c);
    }
    RegretTrace {
        per_round_alg_loss: alg,
        per_round_comparator_loss: comp,
        cumulative_regret: cum,
        comparator: ComparatorRef::EmpiricalRate(p_hat),
    }
}

/// KT as an online predictor over 1-dimensional `x = 1` examples.
#[derive(Debug, Clone, Default)]
pub struct KtPredictor {
    state: KtState,
}

impl KtPredictor {
    pub fn state(&self) -> KtState {
        self.state
    }
}

impl OnlinePredictor for KtPredictor {
    fn log_prob(&self, _features: &[f64], label: Label) -> Result<f64> {
        let p = kt_predict(&self.state);
        Ok(match label {
            Label::Pos => p.ln(),
            Label::Neg => (1.0 - p).ln(),
        })
    }

    fn observe(&mut self, example: &LabeledExample) -> Result<()> {
        self.state.record(example.label());
        Ok(())
    }
}

/// Step-size schedule for online gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    Constant(f64),
    /// `scale / sqrt(t)` at round `t >= 1`.
    InvSqrt { scale: f64 },
}

impl Default for LearningRate {
    fn default() -> Self {
        LearningRate::InvSqrt { scale: 1.0 }
    }
}

impl LearningRate {
    pub fn at(self, round: usize) -> f64 {
        match self {
            LearningRate::Constant(eta) => eta,
            LearningRate::InvSqrt { scale } => scale / (round as f64).sqrt(),
        }
    }

    fn validate(self) -> Result<()> {
        let v = match self {
            LearningRate::Constant(eta) => eta,
            LearningRate::InvSqrt { scale } => scale,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be nonnegative, got {v}")));
        }
        Ok(())
    }
}

/// Projected online gradient descent on the per-round logistic loss.
#[derive(Debug, Clone)]
pub struct OgdPredictor {
    theta: Vec<f64>,
    constraint: NormConstraint,
    rate: LearningRate,
    round: usize,
}

impl OgdPredictor {
    pub fn new(d: usize, constraint: NormConstraint, rate: LearningRate) -> Result<Self> {
        rate.validate()?;
        Ok(Self {
            theta: vec![0.0; d],
            constraint,
            rate,
            round: 0,
        })
    }

    pub fn theta(&self) -> ParamVector {
        ParamVector::from_finite(self.theta.clone())
    }
}

impl OnlinePredictor for OgdPredictor {
    fn log_prob(&self, features: &[f64], label: Label) -> Result<f64> {
        if features.len() != self.theta.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta.len(),
                got: features.len(),
            });
        }
        Ok(crate::logistic::log_sigmoid(label.sign() * dot(&self.theta, features)))
    }

    fn observe(&mut self, example: &LabeledExample) -> Result<()> {
        self.round += 1;
        let x = example.features();
        let y = example.label().sign();
        // d/dtheta ln(1 + e^{-y x.theta}) = -y sigma(-y x.theta) x
        let g = -y * sigmoid(-y * dot(&self.theta, x));
        let eta = self.rate.at(self.round);
        let stepped: Vec<f64> = self.theta.iter().zip(x).map(|(t, xi)| t - eta * g * xi).collect();
        self.theta = project_slice(&stepped, &self.constraint);
        Ok(())
    }
}

/// Runs projected OGD from `theta = 0`; returns the trace and the iterate used
/// at each round.
pub fn ogd_run(
    examples: &[LabeledExample],
    constraint: &NormConstraint,
    rate: LearningRate,
    comparator: &ParamVector,
) -> Result<(RegretTrace, Vec<ParamVector>)> {
    let d = comparator.dim();
    let mut p = OgdPredictor::new(d, *constraint, rate)?;
    let mut alg = Vec::with_capacity(examples.len());
    let mut comp = Vec::with_capacity(examples.len());
    let mut iterates = Vec::with_capacity(examples.len());
    for ex in examples {
        iterates.push(p.theta());
        alg.push(p.step(ex)?);
        comp.push(example_loss(comparator, ex)?);
    }
    Ok((RegretTrace::from_losses(alg, comp, ComparatorRef::Param(comparator.clone())), iterates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparator::Norm;
    use std::f64::consts::LN_2;

    fn labels(v: &[i64]) -> Vec<Label> {
        v.iter().map(|&y| Label::try_from(y).unwrap()).collect()
    }

    #[test]
    fn kt_predictions() {
        assert_eq!(kt_predict(&KtState::default()), 0.5);
        assert_eq!(kt_predict(&KtState { count_pos: 1, count_total: 1 }), 0.75);
        assert!((kt_predict(&KtState { count_pos: 3, count_total: 4 }) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn kt_two_positives() {
        let t = kt_run(&labels(&[1, 1]));
        let expected = LN_2 + (4.0f64 / 3.0).ln();
        assert!((t.total_alg_loss() - expected).abs() < 1e-15);
        assert_eq!(t.total_comparator_loss(), 0.0);
        assert!((t.final_regret() - expected).abs() < 1e-15);
        assert!((t.final_regret() - 0.98083).abs() < 1e-5);
        assert_eq!(t.comparator, ComparatorRef::EmpiricalRate(1.0));
    }

    #[test]
    fn kt_alternating() {
        let t = kt_run(&labels(&[1, -1]));
        assert!((t.total_comparator_loss() - 2.0 * LN_2).abs() < 1e-15);
        assert!((t.final_regret() - LN_2).abs() < 1e-15);
    }

    #[test]
    fn kt_code_length_matches_sequential() {
        let s = labels(&[1, -1, -1, 1, 1, 1, -1]);
        let t = kt_run(&s);
        assert!((t.total_alg_loss() - kt_log_loss(4, 7).unwrap()).abs() < 1e-13);
        assert!(kt_log_loss(3, 2).is_err());
    }

    #[test]
    fn kt_predictor_agrees() {
        let s: Vec<_> = labels(&[1, -1, 1, 1])
            .into_iter()
            .map(|y| LabeledExample::new(vec![1.0], y).unwrap())
            .collect();
        let mut p = KtPredictor::default();
        let losses: Vec<f64> = s.iter().map(|e| p.step(e).unwrap()).collect();
        let t = kt_run(&s.iter().map(|e| e.label()).collect::<Vec<_>>());
        assert_eq!(losses, t.per_round_alg_loss);
        assert_eq!(p.state(), KtState { count_pos: 3, count_total: 4 });
    }

    #[test]
    fn ogd_zero_rate() {
        let c = NormConstraint::new(Norm::L2, 1.0).unwrap();
        let s: Vec<_> = (0..8)
            .map(|i| LabeledExample::new(vec![0.5, -1.0], if i % 3 == 0 { Label::Pos } else { Label::Neg }).unwrap())
            .collect();
        let (t, it) = ogd_run(&s, &c, LearningRate::Constant(0.0), &ParamVector::zeros(2)).unwrap();
        assert!(it.iter().all(|th| th.as_slice() == [0.0, 0.0]));
        assert!((t.total_alg_loss() - 8.0 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn ogd_ten_positives() {
        let c = NormConstraint::new(Norm::Linf, 1.0).unwrap();
        let s = vec![LabeledExample::new(vec![1.0], Label::Pos).unwrap(); 10];
        let (t, it) = ogd_run(&s, &c, LearningRate::default(), &ParamVector::zeros(1)).unwrap();
        let last = it.last().unwrap().as_slice()[0];
        assert!((0.0..=1.0).contains(&last));
        assert!(t.total_alg_loss() <= 10.0 * LN_2);
        // Losses never increase: theta only moves towards +1.
        assert!(t.per_round_alg_loss.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn ogd_rejects_negative_rate() {
        let c = NormConstraint::new(Norm::L1, 1.0).unwrap();
        assert!(ogd_run(&[], &c, LearningRate::Constant(-1.0), &ParamVector::zeros(1)).is_err());
    }
}
