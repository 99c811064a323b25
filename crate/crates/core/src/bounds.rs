//! Closed-form regret bounds for logistic regression under norm constraints.
//!
//! Asymptotic regimes become strict numeric thresholds: explicit constants are
//! used where the formulas give them and 1 otherwise; a query exactly at a
//! threshold falls in the lower region. Vanishing `(1 +- o(1))` factors are set to 1.
//!
//! Two layers are exposed. The `*_raw` functions evaluate the branch for one norm
//! exactly as written. [`lower_bound`] and [`upper_bound`] compose the raw values
//! through class inclusion (`L1 ball in L2 ball in Linf ball`): a lower bound for a
//! smaller class also holds for a larger one, an upper bound for a larger class
//! also holds for a smaller one. The composed values nest across norms and grow
//! with `T`, which the raw ones do not at small `d`.

use std::f64::consts::{E, PI};

use serde::{Deserialize, Serialize};

use crate::comparator::{Norm, NormConstraint};
use crate::error::{Error, Result};

/// Inputs of the bound calculator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery {
    pub d: usize,
    /// Horizon; real-valued so that e.g. `T = e^8` can be queried.
    pub horizon: f64,
    pub radius: f64,
    pub norm: Norm,
    /// The `eps` of `T^(1 - eps)`.
    pub eps_exponent: f64,
    pub drop_vanishing: bool,
}

impl BoundQuery {
    pub fn new(norm: Norm, d: usize, horizon: f64, radius: f64) -> Result<Self> {
        let q = Self {
            d,
            horizon,
            radius,
            norm,
            eps_exponent: 0.0,
            drop_vanishing: true,
        };
        q.validate()?;
        Ok(q)
    }

    pub fn with_eps_exponent(mut self, eps: f64) -> Result<Self> {
        self.eps_exponent = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_norm(mut self, norm: Norm) -> Self {
        self.norm = norm;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be at least 1".into()));
        }
        if !(self.horizon >= 2.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("T must be at least 2, got {}", self.horizon)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::InvalidRadius(self.radius));
        }
        if !(0.0..1.0).contains(&self.eps_exponent) {
            return Err(Error::InvalidArgument(format!(
                "eps exponent must lie in [0, 1), got {}",
                self.eps_exponent
            )));
        }
        if !self.drop_vanishing {
            return Err(Error::Unsupported(
                "only leading-order evaluation is available; no finite-T correction is defined".into(),
            ));
        }
        Ok(())
    }

    fn dim(&self) -> f64 {
        self.d as f64
    }

    /// `T^(1 - eps)`.
    fn t_eff(&self) -> f64 {
        self.horizon.powf(1.0 - self.eps_exponent)
    }
}

/// Which formula produced a bound value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `d = O(1)`: `(d/2) ln(T/d)`.
    FixedDimension,
    LinfLog,
    LinfPlateau,
    L2Log,
    L2Plateau,
    L1Log,
    L1Plateau,
    /// `(d/2) ln(B^2 T e / 4 + e)`.
    LinfUpper,
    /// `(d/2) ln(B^2 T e / (4d) + e)`.
    L2Upper,
    /// `(d/2) ln(B^2 T e^3 / (4 d^2))`, for `d < B sqrt(T)`.
    L1Sparse,
    /// `(d/2) ln(4e) + B sqrt(T) / 2`.
    L1Balanced,
    /// `d/2 + sqrt(2 d B sqrt(T))`.
    L1Dense,
    /// `(5/4) 2^(3/5) B^(2/5) d^(3/5) T^(1/5)`.
    L1Sublinear,
    /// The sparse formula at the horizon where `B sqrt(T) = d`: `(d/2) ln(e^3 / 4)`.
    /// A mixture tuned for that longer horizon covers every shorter one.
    L1SparseExtended,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::FixedDimension => "fixed_dimension",
            Region::LinfLog => "linf_log",
            Region::LinfPlateau => "linf_plateau",
            Region::L2Log => "l2_log",
            Region::L2Plateau => "l2_plateau",
            Region::L1Log => "l1_log",
            Region::L1Plateau => "l1_plateau",
            Region::LinfUpper => "linf_upper",
            Region::L2Upper => "l2_upper",
            Region::L1Sparse => "l1_sparse",
            Region::L1Balanced => "l1_balanced",
            Region::L1Dense => "l1_dense",
            Region::L1Sublinear => "l1_sublinear",
            Region::L1SparseExtended => "l1_sparse_extended",
        }
    }
}

/// A bound value tagged with its formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub region: Region,
    pub nats: f64,
}

impl Branch {
    fn new(region: Region, nats: f64) -> Self {
        Self { region, nats }
    }
}

fn max_branch(a: Branch, b: Branch) -> Branch {
    if b.nats > a.nats {
        b
    } else {
        a
    }
}

fn min_branch(a: Branch, b: Branch) -> Branch {
    if b.nats < a.nats {
        b
    } else {
        a
    }
}

/// `gamma = min(B / ln T, T^(1-eps) / min(T^(1-eps), d))`.
pub fn gamma_effective(q: &BoundQuery) -> f64 {
    let te = q.t_eff();
    (q.radius / q.horizon.ln()).min(te / te.min(q.dim()))
}

/// `L_inf` log/plateau switch point `(4/e) gamma T^(1-eps)`.
pub fn linf_lower_threshold(gamma: f64, t_eff: f64) -> f64 {
    4.0 / E * gamma * t_eff
}

/// `L2` switch point `sqrt((2 pi / e) gamma T^(1-eps))`.
pub fn l2_lower_threshold(gamma: f64, t_eff: f64) -> f64 {
    (2.0 * PI / E * gamma * t_eff).sqrt()
}

/// `L1` switch point `(4 gamma T^(1-eps) / e)^(1/3)`.
pub fn l1_lower_threshold(gamma: f64, t_eff: f64) -> f64 {
    (4.0 * gamma * t_eff / E).cbrt()
}

pub fn linf_lower_log(d: f64, t: f64, gamma: f64) -> f64 {
    d / 2.0 * (4.0 * gamma * t / d).ln()
}

pub fn linf_lower_plateau(gamma: f64, t_eff: f64) -> f64 {
    2.0 / E * gamma * t_eff
}

pub fn l2_lower_log(d: f64, t: f64, gamma: f64) -> f64 {
    d / 2.0 * (2.0 * PI * E * gamma * t / (d * d)).ln()
}

pub fn l2_lower_plateau(gamma: f64, t_eff: f64) -> f64 {
    l2_lower_threshold(gamma, t_eff)
}

pub fn l1_lower_log(d: f64, t: f64, gamma: f64) -> f64 {
    d / 2.0 * (4.0 * E * E * gamma * t / (d * d * d)).ln()
}

pub fn l1_lower_plateau(gamma: f64, t_eff: f64) -> f64 {
    1.5 * l1_lower_threshold(gamma, t_eff)
}

/// Lower-bound branch for `q.norm` alone.
pub fn lower_bound_raw(q: &BoundQuery) -> Branch {
    let d = q.dim();
    let t = q.horizon;
    if q.d <= 1 {
        return Branch::new(Region::FixedDimension, d / 2.0 * (t / d).ln());
    }
    let g = gamma_effective(q);
    let te = q.t_eff();
    match q.norm {
        Norm::Linf if d < linf_lower_threshold(g, te) => Branch::new(Region::LinfLog, linf_lower_log(d, t, g)),
        Norm::Linf => Branch::new(Region::LinfPlateau, linf_lower_plateau(g, te)),
        Norm::L2 if d < l2_lower_threshold(g, te) => Branch::new(Region::L2Log, l2_lower_log(d, t, g)),
        Norm::L2 => Branch::new(Region::L2Plateau, l2_lower_plateau(g, te)),
        Norm::L1 if d < l1_lower_threshold(g, te) => Branch::new(Region::L1Log, l1_lower_log(d, t, g)),
        Norm::L1 => Branch::new(Region::L1Plateau, l1_lower_plateau(g, te)),
    }
}

pub fn linf_upper(d: f64, t: f64, b: f64) -> f64 {
    d / 2.0 * (b * b * t * E / 4.0 + E).ln()
}

pub fn l2_upper(d: f64, t: f64, b: f64) -> f64 {
    d / 2.0 * (b * b * t * E / (4.0 * d) + E).ln()
}

pub fn l1_upper_sparse(d: f64, t: f64, b: f64) -> f64 {
    d / 2.0 * (b * b * t * E.powi(3) / (4.0 * d * d)).ln()
}

pub fn l1_upper_balanced(d: f64, t: f64, b: f64) -> f64 {
    d / 2.0 * (4.0 * E).ln() + b * t.sqrt() / 2.0
}

pub fn l1_upper_dense(d: f64, t: f64, b: f64) -> f64 {
    d / 2.0 + (2.0 * d * b * t.sqrt()).sqrt()
}

/// `(5/4) 2^(3/5) B^(2/5) d^(3/5) T^(1/5)`.
pub fn l1_upper_sublinear(d: f64, t: f64, b: f64) -> f64 {
    1.25 * 2f64.powf(0.6) * b.powf(0.4) * d.powf(0.6) * t.powf(0.2)
}

/// Upper-bound branch for `q.norm` alone. For `L1` with `d >= B sqrt(T)` the
/// smallest of the dense-regime expressions is returned.
pub fn upper_bound_raw(q: &BoundQuery) -> Branch {
    let (d, t, b) = (q.dim(), q.horizon, q.radius);
    match q.norm {
        Norm::Linf => Branch::new(Region::LinfUpper, linf_upper(d, t, b)),
        Norm::L2 => Branch::new(Region::L2Upper, l2_upper(d, t, b)),
        Norm::L1 if d < b * t.sqrt() => Branch::new(Region::L1Sparse, l1_upper_sparse(d, t, b)),
        Norm::L1 => [
            Branch::new(Region::L1Dense, l1_upper_dense(d, t, b)),
            Branch::new(Region::L1Sublinear, l1_upper_sublinear(d, t, b)),
            Branch::new(Region::L1SparseExtended, d / 2.0 * (E.powi(3) / 4.0).ln()),
        ]
        .into_iter()
        .fold(Branch::new(Region::L1Balanced, l1_upper_balanced(d, t, b)), min_branch),
    }
}

// Norms whose balls contain the ball of `n`, smallest first.
fn supersets(n: Norm) -> &'static [Norm] {
    match n {
        Norm::L1 => &[Norm::L1, Norm::L2, Norm::Linf],
        Norm::L2 => &[Norm::L2, Norm::Linf],
        Norm::Linf => &[Norm::Linf],
    }
}

fn subsets(n: Norm) -> &'static [Norm] {
    match n {
        Norm::L1 => &[Norm::L1],
        Norm::L2 => &[Norm::L2, Norm::L1],
        Norm::Linf => &[Norm::Linf, Norm::L2, Norm::L1],
    }
}

/// Largest raw lower bound over classes contained in `q.norm`'s ball.
pub fn lower_bound(q: &BoundQuery) -> Result<Branch> {
    q.validate()?;
    let mut it = subsets(q.norm).iter().map(|&n| lower_bound_raw(&q.with_norm(n)));
    let first = it.next().expect("nonempty");
    Ok(it.fold(first, max_branch))
}

/// Smallest raw upper bound over classes whose ball contains `q.norm`'s.
pub fn upper_bound(q: &BoundQuery) -> Result<Branch> {
    q.validate()?;
    let mut it = supersets(q.norm).iter().map(|&n| upper_bound_raw(&q.with_norm(n)));
    let first = it.next().expect("nonempty");
    Ok(it.fold(first, min_branch))
}

/// Whether the lower-bound construction is realizable: it needs logits up to
/// about `ln T` in every used coordinate, i.e. `gamma >= 1`.
pub fn lower_bound_in_region(q: &BoundQuery) -> bool {
    gamma_effective(q) >= 1.0
}

/// `ln M + d T eps^2 / 32`: the variational bound of a uniform prior on a
/// lattice of step `eps` with `M` points.
pub fn theorem2_instance_bound(m: usize, d: usize, horizon: usize, spacing: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidArgument("grid cardinality must be at least 1".into()));
    }
    if !(spacing >= 0.0 && spacing.is_finite()) {
        return Err(Error::InvalidArgument(format!("spacing must be nonnegative, got {spacing}")));
    }
    Ok((m as f64).ln() + d as f64 * horizon as f64 * spacing * spacing / 32.0)
}

/// Worst-case Gaussian prior variance: `B^2` for `L_inf`, `B^2 / d` for `L2`.
pub fn gaussian_prior_variance(constraint: &NormConstraint, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let b2 = constraint.radius() * constraint.radius();
    match constraint.norm() {
        Norm::Linf => Ok(b2),
        Norm::L2 => Ok(b2 / d as f64),
        Norm::L1 => Err(Error::Unsupported(
            "no Gaussian prior is defined for the L1 ball; use the lattice grid mixture".into(),
        )),
    }
}

/// `eps^2 = 4 nu^2 / (4 + T nu^2)`, the quantization step matched to a Gaussian prior.
pub fn gaussian_spacing_sq(variance: f64, horizon: f64) -> f64 {
    4.0 * variance / (4.0 + horizon * variance)
}

/// `(d (m - 1) / 2) ln(T / (m d))` for `m` labels.
pub fn multilabel_lower_bound(d: usize, m: usize, horizon: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 labels, got {m}")));
    }
    let md = (m * d) as f64;
    if horizon.is_nan() || horizon <= md {
        return Err(Error::InvalidArgument(format!("T must exceed m*d = {md}, got {horizon}")));
    }
    Ok(d as f64 * (m - 1) as f64 / 2.0 * (horizon / md).ln())
}

/// Summary-table row (1..=8): three `L1` rows, three `L2` rows, two `L_inf` rows.
pub fn classify_region(q: &BoundQuery) -> u8 {
    let d = q.dim();
    let gt = gamma_effective(q) * q.horizon;
    let (b, t) = (q.radius, q.horizon);
    match q.norm {
        Norm::L1 if d <= gt.cbrt() => 1,
        Norm::L1 if d <= b * t.sqrt() => 2,
        Norm::L1 => 3,
        Norm::L2 if d <= gt.sqrt() => 4,
        Norm::L2 if d <= b * b * t => 5,
        Norm::L2 => 6,
        Norm::Linf if d <= gt => 7,
        Norm::Linf => 8,
    }
}

/// Everything the calculator knows about one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub query: BoundQuery,
    pub gamma: f64,
    pub table_row: u8,
    pub lower_region: Region,
    pub lower_nats: f64,
    pub upper_region: Region,
    pub upper_nats: f64,
    pub lower_in_region: bool,
}

pub fn bound_report(q: &BoundQuery) -> Result<BoundReport> {
    let lo = lower_bound(q)?;
    let up = upper_bound(q)?;
    Ok(BoundReport {
        query: *q,
        gamma: gamma_effective(q),
        table_row: classify_region(q),
        lower_region: lo.region,
        lower_nats: lo.nats,
        upper_region: up.region,
        upper_nats: up.nats,
        lower_in_region: lower_bound_in_region(q),
    })
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
