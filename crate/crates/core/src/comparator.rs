//! Norm balls, exact Euclidean projections onto them, and the best fixed
//! comparator in hindsight computed by projected gradient descent.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{dot, sigmoid, softplus_neg, LabeledExample, ParamVector};

/// Which ball bounds the comparator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub const ALL: [Norm; 3] = [Norm::L1, Norm::L2, Norm::Linf];

    pub fn eval(self, v: &[f64]) -> f64 {
        match self {
            Norm::L1 => v.iter().map(|x| x.abs()).sum(),
            Norm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Norm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
            Norm::Linf => "linf",
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            "linf" | "l_inf" | "inf" => Ok(Norm::Linf),
            other => Err(Error::InvalidArgument(format!("unknown norm '{other}'"))),
        }
    }
}

/// The ball `{theta : ||theta||_norm <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormConstraint {
    norm: Norm,
    radius: f64,
}

impl NormConstraint {
    pub fn new(norm: Norm, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidRadius(radius));
        }
        Ok(Self { norm, radius })
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    // Relative slack absorbing the last-ulp error of a projection, so that
    // projected points test as feasible and projection stays idempotent.
    fn slack(&self) -> f64 {
        16.0 * f64::EPSILON * self.radius
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.norm.eval(v) <= self.radius + self.slack()
    }
}

/// Euclidean projection onto the ball. Feasible inputs come back unchanged.
pub fn project(theta: &ParamVector, constraint: &NormConstraint) -> ParamVector {
    ParamVector::from_finite(project_slice(theta.as_slice(), constraint))
}

pub(crate) fn project_slice(v: &[f64], c: &NormConstraint) -> Vec<f64> {
    if c.contains(v) {
        return v.to_vec();
    }
    let b = c.radius;
    match c.norm {
        Norm::Linf => v.iter().map(|x| x.clamp(-b, b)).collect(),
        Norm::L2 => {
            let scale = b / Norm::L2.eval(v);
            v.iter().map(|x| x * scale).collect()
        }
        Norm::L1 => {
            let tau = l1_threshold(v, b);
            v.iter()
                .map(|&x| {
                    let m = x.abs() - tau;
                    if m > 0.0 {
                        m.copysign(x)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Soft-threshold level that maps an infeasible `v` onto the L1 sphere of radius `b`
/// (the simplex-projection threshold on `|v|`).
fn l1_threshold(v: &[f64], b: f64) -> f64 {
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - b) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        } else {
            break;
        }
    }
    tau.max(0.0)
}

/// Output of [`best_comparator`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorResult {
    pub theta_star: ParamVector,
    pub loss: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Stop once the projected-gradient norm falls to this level.
    pub tol: f64,
    /// Overrides the default cap of `ceil(50 d ln(T + 1))` iterations.
    pub max_iter: Option<usize>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: None,
        }
    }
}

pub fn default_iteration_cap(d: usize, horizon: usize) -> usize {
    (50.0 * d as f64 * ((horizon + 1) as f64).ln()).ceil() as usize
}

/// Minimizes `L(theta, S)` over the ball.
pub fn best_comparator(
    examples: &[LabeledExample],
    constraint: &NormConstraint,
    tol: f64,
) -> Result<ComparatorResult> {
    best_comparator_with(
        examples,
        constraint,
        &SolverOptions {
            tol,
            max_iter: None,
        },
    )
}

pub fn best_comparator_with(
    examples: &[LabeledExample],
    constraint: &NormConstraint,
    opts: &SolverOptions,
) -> Result<ComparatorResult> {
    let first = examples.first().ok_or(Error::EmptySequence)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {}", opts.tol)));
    }
    let d = first.dim();
    for ex in examples {
        if ex.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: ex.dim(),
            });
        }
    }
    let cap = opts
        .max_iter
        .unwrap_or_else(|| default_iteration_cap(d, examples.len()));
    let objective = Objective { examples, d };

    // Curvature of the log-loss is at most 1/4 per unit of ||x||^2.
    let lipschitz: f64 = examples
        .iter()
        .map(|e| dot(e.features(), e.features()))
        .sum::<f64>()
        / 4.0;
    let mut step = if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 };

    let mut theta = vec![0.0; d];
    let (mut f, mut grad) = objective.value_and_grad(&theta);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    loop {
        if projected_gradient_norm(&theta, &grad, constraint) <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= cap {
            break;
        }
        iterations += 1;

        // Barzilai-Borwein trial step, then backtrack on the projection arc.
        if let Some((ref pt, ref pg)) = prev {
            let s: Vec<f64> = theta.iter().zip(pt).map(|(a, b)| a - b).collect();
            let r: Vec<f64> = grad.iter().zip(pg).map(|(a, b)| a - b).collect();
            let sr = dot(&s, &r);
            if sr > 0.0 {
                step = (dot(&s, &s) / sr).clamp(1e-10, 1e10);
            } else {
                step *= 2.0;
            }
        }

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let cand = project_slice(&trial, constraint);
            let diff: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
            let fc = objective.value(&cand);
            let model = f + dot(&grad, &diff) + dot(&diff, &diff) / (2.0 * step);
            if fc <= model + 1e-12 * f.abs().max(1.0) {
                accepted = Some(cand);
                break;
            }
            step *= 0.5;
        }
        let Some(next) = accepted else {
            // No progress possible at machine precision.
            break;
        };
        if next == theta {
            converged = projected_gradient_norm(&theta, &grad, constraint) <= opts.tol;
            break;
        }
        let (fn_, gn) = objective.value_and_grad(&next);
        prev = Some((std::mem::replace(&mut theta, next), std::mem::replace(&mut grad, gn)));
        f = fn_;
    }

    let theta_star = ParamVector::from_finite(theta);
    let loss = crate::logistic::cumulative_loss(&theta_star, examples)?;
    Ok(ComparatorResult {
        theta_star,
        loss,
        iterations,
        converged,
    })
}

fn projected_gradient_norm(theta: &[f64], grad: &[f64], c: &NormConstraint) -> f64 {
    let stepped: Vec<f64> = theta.iter().zip(grad).map(|(t, g)| t - g).collect();
    let p = project_slice(&stepped, c);
    p.iter()
        .zip(theta)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

struct Objective<'a> {
    examples: &'a [LabeledExample],
    d: usize,
}

impl Objective<'_> {
    fn value(&self, theta: &[f64]) -> f64 {
        self.examples
            .iter()
            .map(|e| softplus_neg(e.label().sign() * dot(e.features(), theta)))
            .sum()
    }

    fn value_and_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.d];
        let mut f = 0.0;
        for e in self.examples {
            let y = e.label().sign();
            let m = y * dot(e.features(), theta);
            f += softplus_neg(m);
            // d/dtheta ln(1 + exp(-m)) = -y x sigmoid(-m)
            let w = -y * sigmoid(-m);
            for (gi, xi) in g.iter_mut().zip(e.features()) {
                *gi += w * xi;
            }
        }
        (f, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::Label;

    fn pv(w: &[f64]) -> ParamVector {
        ParamVector::new(w.to_vec()).unwrap()
    }

    fn ball(norm: Norm, b: f64) -> NormConstraint {
        NormConstraint::new(norm, b).unwrap()
    }

    #[test]
    fn rejects_nonpositive_radius() {
        assert!(NormConstraint::new(Norm::L2, 0.0).is_err());
        assert!(NormConstraint::new(Norm::L1, -1.0).is_err());
        assert!(NormConstraint::new(Norm::Linf, f64::NAN).is_err());
    }

    #[test]
    fn feasible_points_unchanged() {
        let v = pv(&[0.2, -0.3]);
        for n in Norm::ALL {
            assert_eq!(project(&v, &ball(n, 1.0)), v);
        }
    }

    #[test]
    fn l2_radial_scaling() {
        let p = project(&pv(&[3.0, 4.0]), &ball(Norm::L2, 1.0));
        assert!((p.as_slice()[0] - 0.6).abs() < 1e-15);
        assert!((p.as_slice()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn l1_soft_threshold() {
        let p = project(&pv(&[3.0, 1.0]), &ball(Norm::L1, 2.0));
        assert_eq!(p.as_slice(), &[2.0, 0.0]);
        // Brute-force check of the same projection over a 0.01 lattice of the ball.
        let mut best = (f64::INFINITY, (0.0, 0.0));
        for i in -200..=200 {
            for j in -200..=200 {
                let (a, b) = (i as f64 * 0.01, j as f64 * 0.01);
                if a.abs() + b.abs() <= 2.0 + 1e-12 {
                    let dist = (a - 3.0).powi(2) + (b - 1.0).powi(2);
                    if dist < best.0 {
                        best = (dist, (a, b));
                    }
                }
            }
        }
        assert!((best.1 .0 - 2.0).abs() < 1e-9 && best.1 .1.abs() < 1e-9);
    }

    #[test]
    fn l1_ties_at_threshold_go_to_zero() {
        // |v| = (2, 1, 1) onto B = 1: tau = 1, both unit entries sit on the threshold.
        let p = project(&pv(&[2.0, 1.0, -1.0]), &ball(Norm::L1, 1.0));
        assert_eq!(p.as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn linf_clipping() {
        let p = project(&pv(&[3.0, -0.5, -7.0]), &ball(Norm::Linf, 1.0));
        assert_eq!(p.as_slice(), &[1.0, -0.5, -1.0]);
    }

    fn ex(x: f64, y: Label) -> LabeledExample {
        LabeledExample::new(vec![x], y).unwrap()
    }

    #[test]
    fn symmetric_labels_give_zero() {
        let s = vec![ex(1.0, Label::Pos), ex(1.0, Label::Neg)];
        for n in Norm::ALL {
            let r = best_comparator(&s, &ball(n, 3.0), 1e-8).unwrap();
            assert!(r.theta_star.as_slice()[0].abs() < 1e-12);
            assert!((r.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
            assert!(r.converged);
        }
    }

    #[test]
    fn separable_sequence_hits_boundary() {
        let s = vec![ex(1.0, Label::Pos); 10];
        let r = best_comparator(&s, &ball(Norm::Linf, 1.0), 1e-8).unwrap();
        assert_eq!(r.theta_star.as_slice(), &[1.0]);
        let expected = 10.0 * (-1f64).exp().ln_1p();
        assert!((r.loss - expected).abs() < 1e-12);
        assert!((r.loss - 3.13262).abs() < 1e-5);
    }

    #[test]
    fn empty_and_bad_tolerance_rejected() {
        assert!(matches!(
            best_comparator(&[], &ball(Norm::L2, 1.0), 1e-8),
            Err(Error::EmptySequence)
        ));
        assert!(best_comparator(&[ex(1.0, Label::Pos)], &ball(Norm::L2, 1.0), 0.0).is_err());
    }

    #[test]
    fn cap_reported_not_hidden() {
        let s: Vec<_> = (0..20)
            .map(|i| ex(((i * 7) % 11) as f64 / 11.0, if i % 3 == 0 { Label::Neg } else { Label::Pos }))
            .collect();
        let r = best_comparator_with(
            &s,
            &ball(Norm::L2, 5.0),
            &SolverOptions {
                tol: 1e-14,
                max_iter: Some(1),
            },
        )
        .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
    }
}
