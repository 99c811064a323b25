//! Lower-bound constructions: fixed segmented feature sequences, grids of
//! parameters that those sequences can tell apart, label sampling, maximum
//! likelihood identification and the Monte Carlo redundancy experiment.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logistic::{dot, log_sigmoid, sigmoid, Label, LabeledExample, ParamVector, RegretTrace};
use crate::mixture::{ParamGrid, DEFAULT_CARDINALITY_CAP};

/// Independent generator for trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// A fixed feature sequence made of one segment per identified coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentedDesign {
    pub d: usize,
    pub horizon: usize,
    pub gamma_levels: Option<usize>,
    pub features: Vec<Vec<f64>>,
}

impl SegmentedDesign {
    /// Rounds per (sub)segment; trailing rounds beyond `segments * len` are zero.
    pub fn segment_len(&self) -> usize {
        self.horizon / self.segment_count()
    }

    pub fn segment_count(&self) -> usize {
        match self.gamma_levels {
            None => self.d,
            Some(g) => (self.d - 1) * (2 * g + 1),
        }
    }
}

/// Without `gamma_levels`: `d` segments of `floor(T/d)` rounds, segment `i`
/// setting coordinate `i` to 1. With `gamma_levels = g`: one segment per
/// coordinate `2..=d`, each cut into `2g + 1` subsegments in which coordinate 1
/// takes the value `s / g`, `s = -g..=g`. Remainder rounds are all-zero.
pub fn build_design(d: usize, horizon: usize, gamma_levels: Option<usize>) -> Result<SegmentedDesign> {
    if d == 0 {
        return Err(Error::InfeasibleDesign("d must be at least 1".into()));
    }
    let mut features = Vec::with_capacity(horizon);
    match gamma_levels {
        None => {
            if horizon < d {
                return Err(Error::InfeasibleDesign(format!("T = {horizon} is smaller than d = {d}")));
            }
            let len = horizon / d;
            for i in 0..d {
                let mut x = vec![0.0; d];
                x[i] = 1.0;
                features.extend(std::iter::repeat_n(x, len));
            }
        }
        Some(g) => {
            if g == 0 {
                return Err(Error::InfeasibleDesign("gamma levels must be at least 1".into()));
            }
            if d < 2 {
                return Err(Error::InfeasibleDesign("the scaled design needs d >= 2".into()));
            }
            let parts = (d - 1) * (2 * g + 1);
            if horizon < parts {
                return Err(Error::InfeasibleDesign(format!(
                    "T = {horizon} is smaller than the {parts} subsegments"
                )));
            }
            let len = horizon / parts;
            for i in 1..d {
                for s in -(g as i64)..=(g as i64) {
                    let mut x = vec![0.0; d];
                    x[0] = s as f64 / g as f64;
                    x[i] = 1.0;
                    features.extend(std::iter::repeat_n(x, len));
                }
            }
        }
    }
    features.resize(horizon, vec![0.0; d]);
    Ok(SegmentedDesign {
        d,
        horizon,
        gamma_levels,
        features,
    })
}

/// How points are placed inside `[-ln T / 2, ln T / 2]`-like ranges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpacingRule {
    /// Evenly spaced label probabilities `j * delta`, mapped through the logit.
    Probability,
    /// Evenly spaced logits on `[-ln T / 2, ln T / 2]`.
    Logit,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-coordinate grid values and the probability step used to build them.
fn axis_values(rule: SpacingRule, k: usize, delta: f64, horizon: f64, interior_only: bool) -> Vec<f64> {
    let floor = 1.0 / (2.0 * horizon);
    let half = 0.5 * horizon.ln();
    let js: Vec<usize> = if interior_only { (1..k).collect() } else { (0..=k).collect() };
    js.into_iter()
        .map(|j| match rule {
            SpacingRule::Probability => logit((j as f64 * delta).clamp(floor, 1.0 - floor)),
            SpacingRule::Logit => -half + j as f64 * (2.0 * half / k as f64),
        })
        .collect()
}

/// Grid whose points the design can distinguish.
///
/// Plain design: `k = floor((T/d)^((1-eps)/2))`, `delta = (d/T)^((1-eps)/2)` and
/// `k + 1` values per coordinate (`j = 0..=k`); probabilities are clipped to
/// `[1/(2T), 1 - 1/(2T)]` before the logit. Scaled design with `g` levels:
/// coordinate 1 is pinned to `B = g ln T`, and every other coordinate takes the
/// interior values `j = 1..k-1` of each of the `2g + 1` shifted sub-grids, with
/// `delta = (d g / T)^((1-eps)/2)`.
pub fn build_theory_grid(design: &SegmentedDesign, rule: SpacingRule, eps_exponent: f64) -> Result<ParamGrid> {
    build_theory_grid_with_cap(design, rule, eps_exponent, DEFAULT_CARDINALITY_CAP)
}

pub fn build_theory_grid_with_cap(
    design: &SegmentedDesign,
    rule: SpacingRule,
    eps_exponent: f64,
    cap: u128,
) -> Result<ParamGrid> {
    if !(0.0..1.0).contains(&eps_exponent) {
        return Err(Error::InvalidArgument(format!("eps exponent must lie in [0, 1), got {eps_exponent}")));
    }
    let t = design.horizon as f64;
    let d = design.d as f64;
    let expo = (1.0 - eps_exponent) / 2.0;
    let per_dim = match design.gamma_levels {
        None => {
            let k = ((t / d).powf(expo) + 1e-9).floor() as usize;
            if k < 1 {
                return Err(Error::InfeasibleDesign("fewer than 2 grid values per coordinate".into()));
            }
            let delta = (d / t).powf(expo);
            vec![axis_values(rule, k, delta, t, false); design.d]
        }
        Some(g) => {
            let gf = g as f64;
            let k = ((t / (d * gf)).powf(expo) + 1e-9).floor() as usize;
            if k < 3 {
                return Err(Error::InfeasibleDesign(
                    "sub-grids need at least 2 interior values per coordinate".into(),
                ));
            }
            let delta = (d * gf / t).powf(expo);
            let ln_t = t.ln();
            let base = axis_values(rule, k, delta, t, true);
            let mut axis: Vec<f64> = (-(g as i64)..=(g as i64))
                .flat_map(|s| base.iter().map(move |v| v - s as f64 * ln_t))
                .collect();
            axis.sort_by(|a, b| a.total_cmp(b));
            let mut per_dim = vec![vec![gf * ln_t]];
            per_dim.extend(std::iter::repeat_n(axis, design.d - 1));
            per_dim
        }
    };
    ParamGrid::product(per_dim, cap)
}

/// Draws labels for the design's features from `theta`.
pub fn label_sequence<R: Rng>(design: &SegmentedDesign, theta: &[f64], rng: &mut R) -> Result<Vec<LabeledExample>> {
    design
        .features
        .iter()
        .map(|x| {
            let p = sigmoid(dot(theta, x));
            let y = if rng.gen::<f64>() < p { Label::Pos } else { Label::Neg };
            LabeledExample::new(x.clone(), y)
        })
        .collect()
}

/// Uniform grid index plus labels, all from `rng`.
pub fn sample_and_label_with<R: Rng>(
    design: &SegmentedDesign,
    grid: &ParamGrid,
    rng: &mut R,
) -> Result<(usize, Vec<LabeledExample>)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    if grid.dim() != design.d {
        return Err(Error::DimensionMismatch {
            expected: design.d,
            got: grid.dim(),
        });
    }
    let idx = rng.gen_range(0..grid.len());
    let s = label_sequence(design, grid.point(idx), rng)?;
    Ok((idx, s))
}

/// Draws `theta` uniformly from `grid` and labels the design with it.
pub fn sample_and_label(
    design: &SegmentedDesign,
    grid: &ParamGrid,
    seed: u64,
) -> Result<(ParamVector, Vec<LabeledExample>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (idx, s) = sample_and_label_with(design, grid, &mut rng)?;
    Ok((grid.param(idx), s))
}

/// Log-likelihood of the labels under one parameter.
pub fn sequence_log_likelihood(theta: &[f64], examples: &[LabeledExample]) -> f64 {
    examples
        .iter()
        .map(|e| log_sigmoid(e.label().sign() * dot(theta, e.features())))
        .sum()
}

const TIE_RTOL: f64 = 1e-12;

/// Maximum-likelihood grid point; the lowest index wins ties.
pub fn ml_identify(grid: &ParamGrid, examples: &[LabeledExample]) -> Result<(usize, ParamVector)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("grid is empty".into()));
    }
    if let Some(e) = examples.iter().find(|e| e.dim() != grid.dim()) {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: e.dim(),
        });
    }
    // Likelihoods equal up to summation order count as ties.
    let mut best = (0usize, sequence_log_likelihood(grid.point(0), examples));
    for (i, p) in grid.points().enumerate().skip(1) {
        let ll = sequence_log_likelihood(p, examples);
        if ll > best.1 + TIE_RTOL * (1.0 + best.1.abs()) {
            best = (i, ll);
        }
    }
    Ok((best.0, grid.param(best.0)))
}

/// Monte Carlo estimate of the identification error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistinguishabilityReport {
    pub grid_cardinality: usize,
    pub trials: usize,
    pub error_rate: f64,
    pub std_err: f64,
    /// `(1 - P_e) ln M - 1`.
    pub expected_regret_lower: f64,
}

fn fano_lower(m: usize, pe: f64) -> f64 {
    (1.0 - pe) * (m as f64).ln() - 1.0
}

fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

fn misidentified(grid: &ParamGrid, truth: usize, guess: usize) -> bool {
    // Duplicate points are indistinguishable by construction; compare values.
    grid.point(truth) != grid.point(guess)
}

/// Repeats sample / identify `trials` times, trial `i` on its own stream.
pub fn estimate_pe(
    design: &SegmentedDesign,
    grid: &ParamGrid,
    trials: usize,
    seed: u64,
) -> Result<DistinguishabilityReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let errors: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let (truth, s) = sample_and_label_with(design, grid, &mut rng)?;
            let (guess, _) = ml_identify(grid, &s)?;
            Ok(misidentified(grid, truth, guess))
        })
        .collect::<Result<_>>()?;
    let pe = errors.iter().filter(|&&e| e).count() as f64 / trials as f64;
    Ok(DistinguishabilityReport {
        grid_cardinality: grid.len(),
        trials,
        error_rate: pe,
        std_err: binomial_se(pe, trials),
        expected_regret_lower: fano_lower(grid.len(), pe),
    })
}

/// Average regret of an algorithm against the generating parameter, next to the
/// redundancy-capacity lower bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub grid_cardinality: usize,
    pub trials: usize,
    pub measured_expected_regret: f64,
    pub std_err: f64,
    pub error_rate: f64,
    pub bound: f64,
    /// `measured < bound - 3 * std_err`.
    pub violation: bool,
}

/// Runs `algorithm` on `trials` sequences drawn from a uniformly chosen grid
/// point and compares the mean regret against `(1 - P_e) ln M - 1`, with `P_e`
/// estimated by maximum likelihood on the same sequences.
pub fn capacity_experiment<F>(
    algorithm: F,
    design: &SegmentedDesign,
    grid: &ParamGrid,
    trials: usize,
    seed: u64,
) -> Result<CapacityReport>
where
    F: Fn(&[LabeledExample], &ParamVector) -> Result<RegretTrace> + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let outcomes: Vec<(f64, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let (truth, s) = sample_and_label_with(design, grid, &mut rng)?;
            let trace = algorithm(&s, &grid.param(truth))?;
            let (guess, _) = ml_identify(grid, &s)?;
            Ok((trace.final_regret(), misidentified(grid, truth, guess)))
        })
        .collect::<Result<_>>()?;
    let n = trials as f64;
    let mean = outcomes.iter().map(|o| o.0).sum::<f64>() / n;
    let var = if trials > 1 {
        outcomes.iter().map(|o| (o.0 - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let std_err = (var / n).sqrt();
    let pe = outcomes.iter().filter(|o| o.1).count() as f64 / n;
    let bound = fano_lower(grid.len(), pe);
    Ok(CapacityReport {
        grid_cardinality: grid.len(),
        trials,
        measured_expected_regret: mean,
        std_err,
        error_rate: pe,
        bound,
        violation: mean < bound - 3.0 * std_err,
    })
}
