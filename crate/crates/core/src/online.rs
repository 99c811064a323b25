//! The sequential prediction protocol shared by every algorithm.

use crate::error::{Error, Result};
use crate::logistic::{example_loss, ComparatorRef, Label, LabeledExample, ParamVector, RegretTrace};

/// An improper online predictor: it sees `x_t` before committing to a
/// probability for `y_t`, and learns `y_t` afterwards.
pub trait OnlinePredictor {
    /// Natural log of the probability assigned to `label` at the current round.
    fn log_prob(&self, features: &[f64], label: Label) -> Result<f64>;

    /// Incorporates a revealed example.
    fn observe(&mut self, example: &LabeledExample) -> Result<()>;

    /// Predict, score and update; returns the round loss in nats.
    fn step(&mut self, example: &LabeledExample) -> Result<f64> {
        let lp = self.log_prob(example.features(), example.label())?;
        self.observe(example)?;
        Ok(-lp)
    }
}

impl<P: OnlinePredictor + ?Sized> OnlinePredictor for Box<P> {
    fn log_prob(&self, features: &[f64], label: Label) -> Result<f64> {
        (**self).log_prob(features, label)
    }

    fn observe(&mut self, example: &LabeledExample) -> Result<()> {
        (**self).observe(example)
    }

    fn step(&mut self, example: &LabeledExample) -> Result<f64> {
        (**self).step(example)
    }
}

/// Runs `predictor` over `examples`, scoring it against a fixed `comparator`.
pub fn run_predictor<P: OnlinePredictor + ?Sized>(
    predictor: &mut P,
    examples: &[LabeledExample],
    comparator: &ParamVector,
) -> Result<RegretTrace> {
    let mut alg = Vec::with_capacity(examples.len());
    let mut comp = Vec::with_capacity(examples.len());
    for ex in examples {
        if ex.dim() != comparator.dim() {
            return Err(Error::DimensionMismatch {
                expected: comparator.dim(),
                got: ex.dim(),
            });
        }
        alg.push(predictor.step(ex)?);
        comp.push(example_loss(comparator, ex)?);
    }
    Ok(RegretTrace::from_losses(alg, comp, ComparatorRef::Param(comparator.clone())))
}
