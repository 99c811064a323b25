//! Discrete Bayesian mixtures over parameter grids.
//!
//! A [`ParamGrid`] is the support of the mixture, a [`LogPosterior`] its
//! log-domain weights. Prediction integrates the per-point label probability
//! against the posterior; the update multiplies in the likelihood of the
//! revealed label and renormalizes with logsumexp.
//!
//! Lattice grids keep every index `|i| <= floor(B/eps) + 1` per coordinate and
//! filter jointly by a margin rule widened by one lattice step per coordinate,
//! so every 2^d bracketing corner of any feasible comparator is a grid point.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparator::{Norm, NormConstraint};
use crate::error::{Error, Result};
use crate::logistic::{check_features, dot, example_loss, log_sigmoid, ComparatorRef, Label, LabeledExample, ParamVector, RegretTrace};
use crate::online::OnlinePredictor;

/// Default ceiling on grid cardinality.
pub const DEFAULT_CARDINALITY_CAP: u128 = 20_000_000;

// Below this many points the per-round map runs on the calling thread.
const PAR_MIN_POINTS: usize = 16_384;

/// Joint inclusion rule of a lattice grid: `||psi||_norm <= limit`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginRule {
    pub norm: Norm,
    pub limit: f64,
}

impl MarginRule {
    /// `B + d eps` (L1), `B + sqrt(d) eps` (L2), `B + eps` (Linf).
    pub fn for_lattice(constraint: &NormConstraint, d: usize, spacing: f64) -> Self {
        let b = constraint.radius();
        let limit = match constraint.norm() {
            Norm::L1 => b + d as f64 * spacing,
            Norm::L2 => b + (d as f64).sqrt() * spacing,
            Norm::Linf => b + spacing,
        };
        Self {
            norm: constraint.norm(),
            limit,
        }
    }

    pub fn describe(&self) -> String {
        format!("||psi||_{} <= {}", self.norm, self.limit)
    }
}

/// How a grid was constructed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridLayout {
    Lattice {
        spacing: f64,
        constraint: NormConstraint,
        margin: MarginRule,
    },
    /// Cartesian product of per-coordinate value sets.
    Product { per_dim: Vec<Vec<f64>> },
    Explicit,
}

/// Finite support of a discrete mixture. Points are stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    dim: usize,
    coords: Vec<f64>,
    layout: GridLayout,
}

impl ParamGrid {
    pub fn from_points(points: &[ParamVector]) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidArgument("grid needs at least one point".into()))?;
        let dim = first.dim();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            coords.extend_from_slice(p.as_slice());
        }
        Ok(Self {
            dim,
            coords,
            layout: GridLayout::Explicit,
        })
    }

    /// Power-set grid: every combination of one value per coordinate,
    /// enumerated lexicographically (last coordinate fastest).
    pub fn product(per_dim: Vec<Vec<f64>>, cap: u128) -> Result<Self> {
        if per_dim.is_empty() || per_dim.iter().any(|v| v.is_empty()) {
            return Err(Error::InvalidArgument("every coordinate needs at least one value".into()));
        }
        if let Some(bad) = per_dim.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite grid value {bad}")));
        }
        let requested = per_dim
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.len() as u128));
        if requested > cap {
            return Err(Error::CardinalityCap { requested, cap });
        }
        let dim = per_dim.len();
        let m = requested as usize;
        let mut coords = Vec::with_capacity(m * dim);
        let mut idx = vec![0usize; dim];
        for _ in 0..m {
            coords.extend(idx.iter().enumerate().map(|(j, &i)| per_dim[j][i]));
            for j in (0..dim).rev() {
                idx[j] += 1;
                if idx[j] < per_dim[j].len() {
                    break;
                }
                idx[j] = 0;
            }
        }
        Ok(Self {
            dim,
            coords,
            layout: GridLayout::Product { per_dim },
        })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn spacing(&self) -> Option<f64> {
        match self.layout {
            GridLayout::Lattice { spacing, .. } => Some(spacing),
            _ => None,
        }
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn param(&self, i: usize) -> ParamVector {
        ParamVector::from_finite(self.point(i).to_vec())
    }

    pub fn index_of(&self, v: &[f64]) -> Option<usize> {
        self.points().position(|p| p == v)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }

    /// `z_i = x . psi_i` for every point.
    fn dots_into(&self, features: &[f64], out: &mut Vec<f64>) {
        let m = self.len();
        out.resize(m, 0.0);
        if m >= PAR_MIN_POINTS {
            out.par_iter_mut()
                .zip(self.coords.par_chunks_exact(self.dim))
                .for_each(|(o, p)| *o = dot(p, features));
        } else {
            for (o, p) in out.iter_mut().zip(self.points()) {
                *o = dot(p, features);
            }
        }
    }
}

/// `4 / sqrt(T)`, the lattice step that balances `ln M` against quantization.
pub fn default_spacing(horizon: usize) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    Ok(4.0 / (horizon as f64).sqrt())
}

// floor() that forgives representation error just below an integer (0.3/0.1 -> 3).
fn floor_tol(x: f64) -> f64 {
    (x + x.abs() * 1e-12).floor()
}

#[derive(Clone, Copy)]
enum IndexRule {
    Cube,
    L1(u64),
    L2(u64),
}

impl IndexRule {
    fn cost(self, i: i64) -> u64 {
        match self {
            IndexRule::Cube => 0,
            IndexRule::L1(_) => i.unsigned_abs(),
            IndexRule::L2(_) => i.unsigned_abs() * i.unsigned_abs(),
        }
    }

    fn budget(self) -> u64 {
        match self {
            IndexRule::Cube => 0,
            IndexRule::L1(b) | IndexRule::L2(b) => b,
        }
    }

    // Largest |i| <= k whose cost fits in `budget`.
    fn reach(self, k: i64, budget: u64) -> i64 {
        match self {
            IndexRule::Cube => k,
            IndexRule::L1(_) => k.min(budget.min(i64::MAX as u64) as i64),
            IndexRule::L2(_) => k.min(isqrt(budget) as i64),
        }
    }
}

fn isqrt(n: u64) -> u64 {
    let mut r = (n as f64).sqrt() as u64;
    while r * r > n {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= n {
        r += 1;
    }
    r
}

fn lattice_rule(constraint: &NormConstraint, d: usize, spacing: f64) -> (i64, IndexRule) {
    let ratio = constraint.radius() / spacing;
    let k = floor_tol(ratio) as i64 + 1;
    let rule = match constraint.norm() {
        Norm::Linf => IndexRule::Cube,
        Norm::L1 => IndexRule::L1(floor_tol(ratio + d as f64) as u64),
        Norm::L2 => {
            let r = ratio + (d as f64).sqrt();
            IndexRule::L2(floor_tol(r * r) as u64)
        }
    };
    (k, rule)
}

fn count_lattice(d: usize, k: i64, rule: IndexRule) -> u128 {
    fn go(left: usize, budget: u64, k: i64, rule: IndexRule, memo: &mut HashMap<(usize, u64), u128>) -> u128 {
        let r = rule.reach(k, budget);
        if left == 1 {
            return (2 * r + 1) as u128;
        }
        if let Some(&c) = memo.get(&(left, budget)) {
            return c;
        }
        let mut total = 0u128;
        for i in -r..=r {
            let rest = budget - rule.cost(i).min(budget);
            total = total.saturating_add(go(left - 1, rest, k, rule, memo));
        }
        memo.insert((left, budget), total);
        total
    }
    match rule {
        IndexRule::Cube => ((2 * k + 1) as u128).saturating_pow(d as u32),
        _ => go(d, rule.budget(), k, rule, &mut HashMap::new()),
    }
}

/// All lattice points `i * eps` with `|i| <= floor(B/eps) + 1` per coordinate
/// that satisfy the margin rule, in lexicographic index order.
pub fn build_grid(d: usize, constraint: &NormConstraint, spacing: f64) -> Result<ParamGrid> {
    build_grid_with_cap(d, constraint, spacing, DEFAULT_CARDINALITY_CAP)
}

pub fn build_grid_with_cap(d: usize, constraint: &NormConstraint, spacing: f64, cap: u128) -> Result<ParamGrid> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("spacing must be positive, got {spacing}")));
    }
    let (k, rule) = lattice_rule(constraint, d, spacing);
    // A single axis already holds 2k+1 points; avoid counting huge lattices.
    let axis = (2 * k + 1) as u128;
    if axis > cap {
        let requested = match rule {
            IndexRule::Cube => axis.saturating_pow(d as u32),
            _ => axis,
        };
        return Err(Error::CardinalityCap { requested, cap });
    }
    let requested = count_lattice(d, k, rule);
    if requested > cap {
        return Err(Error::CardinalityCap { requested, cap });
    }

    let mut coords = Vec::with_capacity(requested as usize * d);
    let mut idx = vec![0i64; d];
    enumerate(0, rule.budget(), k, rule, spacing, &mut idx, &mut coords);
    debug_assert_eq!(coords.len(), requested as usize * d);
    Ok(ParamGrid {
        dim: d,
        coords,
        layout: GridLayout::Lattice {
            spacing,
            constraint: *constraint,
            margin: MarginRule::for_lattice(constraint, d, spacing),
        },
    })
}

fn enumerate(pos: usize, budget: u64, k: i64, rule: IndexRule, spacing: f64, idx: &mut Vec<i64>, out: &mut Vec<f64>) {
    if pos == idx.len() {
        out.extend(idx.iter().map(|&i| i as f64 * spacing));
        return;
    }
    let r = rule.reach(k, budget);
    for i in -r..=r {
        idx[pos] = i;
        let rest = budget - rule.cost(i).min(budget);
        enumerate(pos + 1, rest, k, rule, spacing, idx, out);
    }
}

/// Prior family over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Uniform,
    QuantizedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub kind: PriorKind,
    /// Variance nu^2 of the quantized Gaussian.
    pub gaussian_variance: Option<f64>,
}

impl PriorSpec {
    pub fn uniform() -> Self {
        Self {
            kind: PriorKind::Uniform,
            gaussian_variance: None,
        }
    }

    pub fn quantized_gaussian(variance: f64) -> Self {
        Self {
            kind: PriorKind::QuantizedGaussian,
            gaussian_variance: Some(variance),
        }
    }
}

/// `ln sum exp(v)`, evaluated left to right around the maximum.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Log-domain posterior weights aligned with a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPosterior {
    log_weights: Vec<f64>,
}

impl LogPosterior {
    /// Normalizes arbitrary log-weights.
    pub fn from_log_weights(mut log_weights: Vec<f64>) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::InvalidArgument("posterior needs at least one weight".into()));
        }
        let lse = logsumexp(&log_weights);
        if !lse.is_finite() {
            return Err(Error::InvalidArgument("log-weights do not normalize".into()));
        }
        log_weights.iter_mut().for_each(|w| *w -= lse);
        Ok(Self { log_weights })
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_normalizer(&self) -> f64 {
        logsumexp(&self.log_weights)
    }

    fn check_aligned(&self, grid: &ParamGrid) -> Result<()> {
        if self.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Prior weights on `grid`: uniform, or `exp(-||psi||^2 / (2 nu^2))` normalized.
pub fn init_posterior(grid: &ParamGrid, prior: &PriorSpec) -> Result<LogPosterior> {
    let m = grid.len();
    if m == 0 {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    match prior.kind {
        PriorKind::Uniform => Ok(LogPosterior {
            log_weights: vec![-(m as f64).ln(); m],
        }),
        PriorKind::QuantizedGaussian => {
            let nu2 = prior.gaussian_variance.ok_or_else(|| {
                Error::InvalidArgument("quantized Gaussian prior requires a variance".into())
            })?;
            if !(nu2 > 0.0 && nu2.is_finite()) {
                return Err(Error::InvalidArgument(format!("Gaussian variance must be positive, got {nu2}")));
            }
            let lw = grid.points().map(|p| -dot(p, p) / (2.0 * nu2)).collect();
            LogPosterior::from_log_weights(lw)
        }
    }
}

/// Bayes update: add `ln p(y | x, psi_i)` to every log-weight and renormalize.
pub fn posterior_update(posterior: &LogPosterior, grid: &ParamGrid, example: &LabeledExample) -> Result<LogPosterior> {
    let mut next = posterior.clone();
    let mut scratch = Vec::new();
    update_in_place(&mut next, grid, example.features(), example.label(), &mut scratch)?;
    Ok(next)
}

// Returns ln p(y | x, S_{t-1}) under the pre-update posterior.
fn update_in_place(
    posterior: &mut LogPosterior,
    grid: &ParamGrid,
    features: &[f64],
    label: Label,
    scratch: &mut Vec<f64>,
) -> Result<f64> {
    posterior.check_aligned(grid)?;
    grid.check_dim(features.len())?;
    let y = label.sign();
    grid.dots_into(features, scratch);
    let lw = &mut posterior.log_weights;
    let joint = |w: &mut f64, z: &mut f64| {
        *z = *w + log_sigmoid(y * *z);
    };
    if lw.len() >= PAR_MIN_POINTS {
        lw.par_iter_mut().zip(scratch.par_iter_mut()).for_each(|(w, z)| joint(w, z));
    } else {
        lw.iter_mut().zip(scratch.iter_mut()).for_each(|(w, z)| joint(w, z));
    }
    // The incoming posterior is normalized, so the joint normalizer is the predictive.
    let joint_lse = logsumexp(scratch);
    for (w, j) in lw.iter_mut().zip(scratch.iter()) {
        *w = j - joint_lse;
    }
    Ok(joint_lse)
}

/// Natural log of the mixture probability of `label` at `features`.
pub fn mixture_log_predict(posterior: &LogPosterior, grid: &ParamGrid, features: &[f64], label: Label) -> Result<f64> {
    posterior.check_aligned(grid)?;
    grid.check_dim(features.len())?;
    check_features(features)?;
    let y = label.sign();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let terms: Vec<f64> = grid
        .points()
        .zip(&posterior.log_weights)
        .map(|(p, w)| {
            let l = log_sigmoid(y * dot(p, features));
            lo = lo.min(l);
            hi = hi.max(l);
            w + l
        })
        .collect();
    let v = logsumexp(&terms) - logsumexp(&posterior.log_weights);
    // A convex combination never leaves the range of its components.
    Ok(v.clamp(lo, hi))
}

/// `sum_i w_i p(+1 | x, psi_i)`.
pub fn mixture_predict(posterior: &LogPosterior, grid: &ParamGrid, features: &[f64]) -> Result<f64> {
    Ok(mixture_log_predict(posterior, grid, features, Label::Pos)?.exp())
}

/// A grid mixture as an online predictor.
#[derive(Debug, Clone)]
pub struct MixturePredictor<'g> {
    grid: &'g ParamGrid,
    posterior: LogPosterior,
    scratch: Vec<f64>,
}

impl<'g> MixturePredictor<'g> {
    pub fn new(grid: &'g ParamGrid, prior: &PriorSpec) -> Result<Self> {
        Ok(Self {
            grid,
            posterior: init_posterior(grid, prior)?,
            scratch: Vec::new(),
        })
    }

    pub fn posterior(&self) -> &LogPosterior {
        &self.posterior
    }

    pub fn into_posterior(self) -> LogPosterior {
        self.posterior
    }
}

impl OnlinePredictor for MixturePredictor<'_> {
    fn log_prob(&self, features: &[f64], label: Label) -> Result<f64> {
        mixture_log_predict(&self.posterior, self.grid, features, label)
    }

    fn observe(&mut self, example: &LabeledExample) -> Result<()> {
        update_in_place(&mut self.posterior, self.grid, example.features(), example.label(), &mut self.scratch)?;
        Ok(())
    }

    // The update normalizer is the predictive probability, so one pass does both.
    fn step(&mut self, example: &LabeledExample) -> Result<f64> {
        let lp = update_in_place(&mut self.posterior, self.grid, example.features(), example.label(), &mut self.scratch)?;
        Ok(-lp)
    }
}

/// Sequential predict/score/update over `examples`, measured against `comparator`.
pub fn run_online(
    grid: &ParamGrid,
    prior: &PriorSpec,
    examples: &[LabeledExample],
    comparator: &ParamVector,
) -> Result<(RegretTrace, LogPosterior)> {
    grid.check_dim(comparator.dim())?;
    let mut predictor = MixturePredictor::new(grid, prior)?;
    let mut alg = Vec::with_capacity(examples.len());
    let mut comp = Vec::with_capacity(examples.len());
    for ex in examples {
        alg.push(predictor.step(ex)?);
        comp.push(example_loss(comparator, ex)?);
    }
    let trace = RegretTrace::from_losses(alg, comp, ComparatorRef::Param(comparator.clone()));
    Ok((trace, predictor.into_posterior()))
}

/// Quantized-Gaussian grid whose round-1 prediction at `probe` moves by less
/// than `tolerance` when the lattice step is halved. Returns the accepted
/// (coarser) grid; the step starts at `start_spacing` and halves until stable.
pub fn refine_gaussian_grid(
    d: usize,
    constraint: &NormConstraint,
    variance: f64,
    start_spacing: f64,
    probe: &[f64],
    tolerance: f64,
    cap: u128,
) -> Result<ParamGrid> {
    let prior = PriorSpec::quantized_gaussian(variance);
    let predict_at = |g: &ParamGrid| -> Result<f64> {
        let post = init_posterior(g, &prior)?;
        mixture_predict(&post, g, probe)
    };
    let mut coarse = build_grid_with_cap(d, constraint, start_spacing, cap)?;
    let mut p_coarse = predict_at(&coarse)?;
    let mut spacing = start_spacing;
    loop {
        spacing /= 2.0;
        let fine = build_grid_with_cap(d, constraint, spacing, cap)?;
        let p_fine = predict_at(&fine)?;
        if (p_fine - p_coarse).abs() < tolerance {
            return Ok(coarse);
        }
        coarse = fine;
        p_coarse = p_fine;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logistic::{label_probability, sigmoid};

    fn ball(norm: Norm, b: f64) -> NormConstraint {
        NormConstraint::new(norm, b).unwrap()
    }

    fn pv(w: &[f64]) -> ParamVector {
        ParamVector::new(w.to_vec()).unwrap()
    }

    fn explicit(points: &[&[f64]]) -> ParamGrid {
        let ps: Vec<_> = points.iter().map(|p| pv(p)).collect();
        ParamGrid::from_points(&ps).unwrap()
    }

    #[test]
    fn linf_d1_seven_points() {
        let g = build_grid(1, &ball(Norm::Linf, 1.0), 0.5).unwrap();
        let pts: Vec<f64> = g.points().map(|p| p[0]).collect();
        assert_eq!(pts, vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5]);
    }

    #[test]
    fn l1_d2_thirty_seven_points() {
        let g = build_grid(2, &ball(Norm::L1, 1.0), 0.5).unwrap();
        // Independent enumeration over the index cube.
        let mut oracle = 0;
        for i in -3i32..=3 {
            for j in -3i32..=3 {
                if (i.abs() + j.abs()) as f64 * 0.5 <= 2.0 {
                    oracle += 1;
                }
            }
        }
        assert_eq!(oracle, 37);
        assert_eq!(g.len(), 37);
        assert_eq!(g.point(0), &[-1.5, -0.5]);
    }

    #[test]
    fn wide_spacing_keeps_bracketing_triplet() {
        for n in Norm::ALL {
            let g = build_grid(1, &ball(n, 1.0), 2.5).unwrap();
            let pts: Vec<f64> = g.points().map(|p| p[0]).collect();
            assert_eq!(pts, vec![-2.5, 0.0, 2.5]);
        }
    }

    #[test]
    fn cap_error_names_sizes() {
        let err = build_grid_with_cap(3, &ball(Norm::Linf, 1.0), 0.5, 100).unwrap_err();
        match err {
            Error::CardinalityCap { requested, cap } => {
                assert_eq!(requested, 343);
                assert_eq!(cap, 100);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn counting_matches_enumeration() {
        for n in Norm::ALL {
            for d in 1..=4 {
                for &eps in &[0.3, 0.5, 0.7] {
                    let c = ball(n, 1.3);
                    let (k, rule) = lattice_rule(&c, d, eps);
                    let g = build_grid(d, &c, eps).unwrap();
                    assert_eq!(count_lattice(d, k, rule), g.len() as u128, "{n} d={d} eps={eps}");
                }
            }
        }
    }

    #[test]
    fn default_spacing_values() {
        assert_eq!(default_spacing(16).unwrap(), 1.0);
        assert_eq!(default_spacing(1).unwrap(), 4.0);
        assert_eq!(default_spacing(1024).unwrap(), 0.125);
        assert!(default_spacing(0).is_err());
    }

    #[test]
    fn uniform_prior() {
        let g = build_grid(2, &ball(Norm::L1, 1.0), 0.5).unwrap();
        let p = init_posterior(&g, &PriorSpec::uniform()).unwrap();
        for w in p.weights() {
            assert!((w - 1.0 / 37.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gaussian_prior_three_points() {
        let g = explicit(&[&[-1.0], &[0.0], &[1.0]]);
        let p = init_posterior(&g, &PriorSpec::quantized_gaussian(1.0)).unwrap();
        let w = p.weights();
        let z = 1.0 + 2.0 * (-0.5f64).exp();
        let expected = [(-0.5f64).exp() / z, 1.0 / z, (-0.5f64).exp() / z];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((w[0] - 0.27406).abs() < 1e-5 && (w[1] - 0.45187).abs() < 1e-5);
    }

    #[test]
    fn gaussian_flat_limit() {
        let g = build_grid(2, &ball(Norm::L2, 1.0), 0.25).unwrap();
        let p = init_posterior(&g, &PriorSpec::quantized_gaussian(1e12)).unwrap();
        let u = 1.0 / g.len() as f64;
        assert!(p.weights().iter().all(|w| (w - u).abs() <= 1e-6));
    }

    #[test]
    fn gaussian_requires_variance() {
        let g = explicit(&[&[0.0]]);
        let spec = PriorSpec {
            kind: PriorKind::QuantizedGaussian,
            gaussian_variance: None,
        };
        assert!(init_posterior(&g, &spec).is_err());
    }

    #[test]
    fn update_two_points() {
        let g = explicit(&[&[-1.0], &[1.0]]);
        let p0 = init_posterior(&g, &PriorSpec::uniform()).unwrap();
        let ex = LabeledExample::new(vec![1.0], Label::Pos).unwrap();
        let p1 = posterior_update(&p0, &g, &ex).unwrap();
        let w = p1.weights();
        assert!((w[0] - sigmoid(-1.0)).abs() < 1e-15);
        assert!((w[1] - sigmoid(1.0)).abs() < 1e-15);
        assert!((w[0] - 0.268941).abs() < 1e-6);
        assert!(p1.log_normalizer().abs() < 1e-12);
    }

    #[test]
    fn equal_likelihood_leaves_posterior() {
        // x = (0, 1) cannot tell points differing only in the first coordinate apart.
        let g = explicit(&[&[-1.0, 0.5], &[2.0, 0.5]]);
        let p0 = LogPosterior::from_log_weights(vec![0.2f64.ln(), 0.8f64.ln()]).unwrap();
        let ex = LabeledExample::new(vec![0.0, 1.0], Label::Neg).unwrap();
        let p1 = posterior_update(&p0, &g, &ex).unwrap();
        for (a, b) in p0.log_weights().iter().zip(p1.log_weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn predict_cases() {
        let g = explicit(&[&[-0.7, 0.2], &[0.7, -0.2]]);
        let p = init_posterior(&g, &PriorSpec::uniform()).unwrap();
        assert!((mixture_predict(&p, &g, &[0.3, -1.0]).unwrap() - 0.5).abs() < 1e-15);

        let single = explicit(&[&[0.9]]);
        let ps = init_posterior(&single, &PriorSpec::uniform()).unwrap();
        let direct = label_probability(&pv(&[0.9]), &LabeledExample::new(vec![0.4], Label::Pos).unwrap()).unwrap();
        assert!((mixture_predict(&ps, &single, &[0.4]).unwrap() - direct).abs() < 1e-15);

        let g2 = explicit(&[&[-1.0], &[1.0]]);
        let p2 = LogPosterior::from_log_weights(vec![0.75f64.ln(), 0.25f64.ln()]).unwrap();
        let v = mixture_predict(&p2, &g2, &[1.0]).unwrap();
        let expected = 0.75 * sigmoid(-1.0) + 0.25 * sigmoid(1.0);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.384471).abs() < 1e-6);
    }

    #[test]
    fn predict_rejects_mismatch() {
        let g = explicit(&[&[0.0, 0.0]]);
        let p = init_posterior(&g, &PriorSpec::uniform()).unwrap();
        assert!(matches!(mixture_predict(&p, &g, &[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(mixture_predict(&p, &g, &[0.0, 2.0]).is_err());
    }

    #[test]
    fn singleton_run_has_zero_regret() {
        let theta = pv(&[0.3, -0.4]);
        let g = ParamGrid::from_points(std::slice::from_ref(&theta)).unwrap();
        let s: Vec<_> = (0..12)
            .map(|t| {
                let x = vec![((t * 5) % 7) as f64 / 7.0, -((t * 3) % 5) as f64 / 5.0];
                LabeledExample::new(x, if t % 2 == 0 { Label::Pos } else { Label::Neg }).unwrap()
            })
            .collect();
        let (trace, _) = run_online(&g, &PriorSpec::uniform(), &s, &theta).unwrap();
        assert!(trace.cumulative_regret.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn product_grid_order() {
        let g = ParamGrid::product(vec![vec![1.0, 2.0], vec![-1.0, 0.0, 1.0]], 100).unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(0), &[1.0, -1.0]);
        assert_eq!(g.point(1), &[1.0, 0.0]);
        assert_eq!(g.point(3), &[2.0, -1.0]);
        assert!(ParamGrid::product(vec![vec![0.0; 10]; 3], 999).is_err());
    }

    #[test]
    fn refinement_stabilizes() {
        let c = ball(Norm::Linf, 1.0);
        let g = refine_gaussian_grid(1, &c, 1.0, 1.0, &[0.7], 1e-3, DEFAULT_CARDINALITY_CAP).unwrap();
        let eps = g.spacing().unwrap();
        let fine = build_grid(1, &c, eps / 2.0).unwrap();
        let prior = PriorSpec::quantized_gaussian(1.0);
        let a = mixture_predict(&init_posterior(&g, &prior).unwrap(), &g, &[0.7]).unwrap();
        let b = mixture_predict(&init_posterior(&fine, &prior).unwrap(), &fine, &[0.7]).unwrap();
        assert!((a - b).abs() < 1e-3);
    }
}
