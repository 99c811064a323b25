//! Logistic link, per-example log-loss and regret accounting.
//!
//! Everything is in nats. The loss `ln(1 + exp(-m))` with margin `m = y * x.theta`
//! is evaluated with the two-branch softplus so it stays finite and accurate for
//! margins of any magnitude.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary label in {-1, +1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Neg,
    Pos,
}

impl Label {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Label::Neg => -1.0,
            Label::Pos => 1.0,
        }
    }

    pub fn flipped(self) -> Label {
        match self {
            Label::Neg => Label::Pos,
            Label::Pos => Label::Neg,
        }
    }
}

impl TryFrom<i64> for Label {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        match v {
            -1 => Ok(Label::Neg),
            1 => Ok(Label::Pos),
            other => Err(Error::InvalidLabel(other)),
        }
    }
}

/// One round's feature vector and label. Every feature lies in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    features: Vec<f64>,
    label: Label,
}

impl LabeledExample {
    pub fn new(features: Vec<f64>, label: Label) -> Result<Self> {
        check_features(&features)?;
        Ok(Self { features, label })
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn label(&self) -> Label {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }
}

/// Rejects any feature outside [-1, 1] (NaN included).
pub fn check_features(features: &[f64]) -> Result<()> {
    for (index, &value) in features.iter().enumerate() {
        if !(-1.0..=1.0).contains(&value) {
            return Err(Error::FeatureOutOfRange { index, value });
        }
    }
    Ok(())
}

/// A finite parameter vector theta.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        for (index, &value) in weights.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFiniteParameter { index, value });
            }
        }
        Ok(Self(weights))
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    /// Callers guarantee finiteness.
    pub(crate) fn from_finite(weights: Vec<f64>) -> Self {
        debug_assert!(weights.iter().all(|w| w.is_finite()));
        Self(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The dot product `z = x . theta`.
    pub fn dot(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: features.len(),
            });
        }
        Ok(dot(&self.0, features))
    }
}

impl std::ops::Neg for &ParamVector {
    type Output = ParamVector;

    fn neg(self) -> ParamVector {
        ParamVector(self.0.iter().map(|w| -w).collect())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (1 + exp(-m))` without overflow.
#[inline]
pub fn sigmoid(m: f64) -> f64 {
    if m >= 0.0 {
        1.0 / (1.0 + (-m).exp())
    } else {
        let e = m.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(-m))`, the logistic loss at margin `m`.
#[inline]
pub fn softplus_neg(m: f64) -> f64 {
    if m >= 0.0 {
        (-m).exp().ln_1p()
    } else {
        -m + m.exp().ln_1p()
    }
}

/// `ln sigmoid(m) = -softplus_neg(m)`.
#[inline]
pub fn log_sigmoid(m: f64) -> f64 {
    -softplus_neg(m)
}

/// `p(y | x, theta) = 1 / (1 + exp(-y x.theta))`.
pub fn label_probability(theta: &ParamVector, example: &LabeledExample) -> Result<f64> {
    let z = theta.dot(example.features())?;
    Ok(sigmoid(example.label().sign() * z))
}

/// `ln(1 + exp(-y x.theta))` in nats.
pub fn example_loss(theta: &ParamVector, example: &LabeledExample) -> Result<f64> {
    let z = theta.dot(example.features())?;
    Ok(softplus_neg(example.label().sign() * z))
}

/// Total loss `L(theta, S)`; zero for an empty sequence.
pub fn cumulative_loss(theta: &ParamVector, examples: &[LabeledExample]) -> Result<f64> {
    examples
        .iter()
        .try_fold(0.0, |acc, ex| Ok(acc + example_loss(theta, ex)?))
}

/// The reference a regret trace was measured against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparatorRef {
    /// A parameter vector theta*.
    Param(ParamVector),
    /// The empirical label rate of a featureless binary sequence, which may sit at 0 or 1
    /// and therefore has no finite logit.
    EmpiricalRate(f64),
}

/// Per-round loss accounting of one online run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub per_round_alg_loss: Vec<f64>,
    pub per_round_comparator_loss: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    pub comparator: ComparatorRef,
}

impl RegretTrace {
    /// Builds the trace, accumulating the regret left to right.
    pub fn from_losses(alg: Vec<f64>, comparator_losses: Vec<f64>, comparator: ComparatorRef) -> Self {
        assert_eq!(alg.len(), comparator_losses.len(), "loss sequences must align");
        let mut acc = 0.0;
        let cumulative_regret = alg
            .iter()
            .zip(&comparator_losses)
            .map(|(a, c)| {
                acc += a - c;
                acc
            })
            .collect();
        Self {
            per_round_alg_loss: alg,
            per_round_comparator_loss: comparator_losses,
            cumulative_regret,
            comparator,
        }
    }

    pub fn len(&self) -> usize {
        self.per_round_alg_loss.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_round_alg_loss.is_empty()
    }

    /// Regret after the last round (0 for an empty trace).
    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    pub fn total_alg_loss(&self) -> f64 {
        self.per_round_alg_loss.iter().sum()
    }

    pub fn total_comparator_loss(&self) -> f64 {
        self.per_round_comparator_loss.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(x: &[f64], y: Label) -> LabeledExample {
        LabeledExample::new(x.to_vec(), y).unwrap()
    }

    fn pv(w: &[f64]) -> ParamVector {
        ParamVector::new(w.to_vec()).unwrap()
    }

    #[test]
    fn zero_theta_gives_half() {
        let e = ex(&[0.3, -0.7, 1.0], Label::Pos);
        assert_eq!(label_probability(&ParamVector::zeros(3), &e).unwrap(), 0.5);
        let loss = example_loss(&ParamVector::zeros(3), &e).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn ln3_probabilities() {
        let theta = pv(&[3f64.ln()]);
        let p = label_probability(&theta, &ex(&[1.0], Label::Pos)).unwrap();
        let q = label_probability(&theta, &ex(&[1.0], Label::Neg)).unwrap();
        assert!((p - 0.75).abs() < 1e-15);
        assert!((q - 0.25).abs() < 1e-15);
        let loss = example_loss(&theta, &ex(&[1.0], Label::Pos)).unwrap();
        assert!((loss - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn large_negative_margin_loss() {
        let loss = example_loss(&pv(&[-50.0]), &ex(&[1.0], Label::Pos)).unwrap();
        let expected = 50.0 + (-50f64).exp().ln_1p();
        assert!(((loss - expected) / expected).abs() <= 1e-12);
    }

    #[test]
    fn cumulative_loss_cases() {
        assert_eq!(cumulative_loss(&pv(&[0.4]), &[]).unwrap(), 0.0);
        let s = vec![ex(&[1.0], Label::Pos), ex(&[1.0], Label::Pos)];
        let l = cumulative_loss(&ParamVector::zeros(1), &s).unwrap();
        assert!((l - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            LabeledExample::new(vec![0.5, 1.5], Label::Pos),
            Err(Error::FeatureOutOfRange { index: 1, .. })
        ));
        assert!(LabeledExample::new(vec![f64::NAN], Label::Pos).is_err());
        assert!(matches!(Label::try_from(0), Err(Error::InvalidLabel(0))));
        assert!(ParamVector::new(vec![1.0, f64::INFINITY]).is_err());
        let e = ex(&[1.0, 0.0], Label::Pos);
        assert!(matches!(
            label_probability(&pv(&[1.0]), &e),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn trace_accumulates() {
        let t = RegretTrace::from_losses(
            vec![1.0, 0.5, 0.25],
            vec![0.5, 0.5, 0.5],
            ComparatorRef::Param(pv(&[0.0])),
        );
        assert_eq!(t.cumulative_regret, vec![0.5, 0.5, 0.25]);
        assert_eq!(t.final_regret(), 0.25);
    }
}
