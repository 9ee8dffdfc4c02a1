//! Candidate Lyapunov functions, limiting gradients, sampled verification of
//! the degree-k dissipative inequality, and estimation of the monotone
//! margin function.
//!
//! Verification is sampling-based, not exhaustive: the pointwise quantifier
//! over a continuum is approximated by dense low-discrepancy sampling with a
//! reported argmin. No finite procedure decides a strict inequality on a
//! continuum; every report states this gap in its header note.

use crate::expr::ScalarExpr;
use crate::hamiltonian::{HamError, SystemDef};
use crate::linalg;
use crate::sample::{RegionSpec, SampleError};
use thiserror::Error;

/// Default activity tolerance for max-type candidates: every gradient within
/// this distance of the max is treated as a limiting gradient. A superset of
/// the true limiting set is conservative here, because verification takes
/// the worst case over gradients.
pub const DEFAULT_ACTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClfError {
    #[error(transparent)]
    Ham(#[from] HamError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error("gradient undefined at the ball center")]
    GradientUndefined,
    #[error("candidate value failed to evaluate: {0}")]
    Eval(#[from] crate::expr::EvalError),
    #[error("nonpositive margin {margin} at level {level}: not a valid degree-k CLF on the region")]
    NonpositiveMargin { level: f64, margin: f64 },
    #[error("no samples landed in level cell {0}")]
    EmptyLevel(usize),
    #[error("gamma breakpoints must be strictly increasing with positive values")]
    NonMonotoneGamma,
}

/// A candidate control Lyapunov function.
#[derive(Debug, Clone, PartialEq)]
pub enum CLFCandidate {
    /// A smooth closed-form candidate; gradients are exact symbolic partials.
    SmoothExpr { expr: ScalarExpr },
    /// `U(x) = |x - center| - radius`, the distance to a closed ball
    /// (a point target when the radius is zero).
    DistanceToBall { center: Vec<f64>, radius: f64 },
    /// `U(x) = max_i g_i(x)` of smooth pieces; near-kink points contribute
    /// the gradients of every piece within `activity_tol` of the max.
    MaxOfSmooth {
        pieces: Vec<ScalarExpr>,
        activity_tol: f64,
    },
}

impl CLFCandidate {
    pub fn distance_to_ball(center: Vec<f64>, radius: f64) -> Self {
        assert!(radius >= 0.0);
        CLFCandidate::DistanceToBall { center, radius }
    }

    /// The candidate value at `x`.
    pub fn value(&self, x: &[f64]) -> Result<f64, ClfError> {
        match self {
            CLFCandidate::SmoothExpr { expr } => Ok(expr.eval(x)?),
            CLFCandidate::DistanceToBall { center, radius } => {
                Ok(linalg::dist(x, center) - radius)
            }
            CLFCandidate::MaxOfSmooth { pieces, .. } => {
                let mut best = f64::NEG_INFINITY;
                for piece in pieces {
                    best = best.max(piece.eval(x)?);
                }
                Ok(best)
            }
        }
    }

    /// The set of limiting gradients at `x` (for these candidate shapes, the
    /// classical gradients of all active smooth branches).
    pub fn limiting_gradients(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, ClfError> {
        let n = x.len();
        let grad_of = |e: &ScalarExpr| -> Result<Vec<f64>, ClfError> {
            (1..=n)
                .map(|j| e.partial(j).eval(x).map_err(ClfError::from))
                .collect()
        };
        match self {
            CLFCandidate::SmoothExpr { expr } => Ok(vec![grad_of(expr)?]),
            CLFCandidate::DistanceToBall { center, .. } => {
                let d = linalg::sub(x, center);
                let r = linalg::norm(&d);
                if r == 0.0 {
                    return Err(ClfError::GradientUndefined);
                }
                Ok(vec![linalg::scale(&d, 1.0 / r)])
            }
            CLFCandidate::MaxOfSmooth {
                pieces,
                activity_tol,
            } => {
                let values: Vec<f64> = pieces
                    .iter()
                    .map(|e| e.eval(x).map_err(ClfError::from))
                    .collect::<Result<_, _>>()?;
                let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut grads = Vec::new();
                for (e, v) in pieces.iter().zip(&values) {
                    if top - v <= *activity_tol {
                        grads.push(grad_of(e)?);
                    }
                }
                Ok(grads)
            }
        }
    }
}

/// The target set toward which trajectories are steered.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetDef {
    /// Closed ball (a point when the radius is zero).
    Ball { center: Vec<f64>, radius: f64 },
    /// General closed set given by a signed distance expression (negative
    /// inside, zero on the boundary).
    SignedDistance { expr: ScalarExpr },
}

impl TargetDef {
    /// Distance from `x` to the target, clamped at zero inside.
    pub fn distance(&self, x: &[f64]) -> Result<f64, ClfError> {
        match self {
            TargetDef::Ball { center, radius } => {
                Ok((linalg::dist(x, center) - radius).max(0.0))
            }
            TargetDef::SignedDistance { expr } => Ok(expr.eval(x)?.max(0.0)),
        }
    }
}

/// One verification failure: a sample where the degree-k Hamiltonian fails
/// to be strictly negative against every limiting gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct FailurePoint {
    pub x: Vec<f64>,
    pub margin: f64,
}

/// Outcome of sampled verification.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub samples: usize,
    /// `min` over samples of the margin `-max_p H^(k)(x, p)`.
    pub min_margin: f64,
    /// The sample attaining the minimum margin.
    pub argmin: Vec<f64>,
    /// Samples with nonpositive margin. Empty iff `min_margin > 0`.
    pub failures: Vec<FailurePoint>,
    /// Margin function table when one was estimated.
    pub gamma: Option<GammaFn>,
    pub seed: u64,
    /// Statement of the sampling gap carried into every emitted report.
    pub note: &'static str,
}

pub const VERIFICATION_NOTE: &str = "sampled verification: the pointwise inequality is checked \
on low-discrepancy samples only; the reported argmin is the worst sample, not a proven bound";

/// The margin `-max_p H^(k)(x, p)` over the limiting gradients at `x`.
pub fn margin_at(sys: &SystemDef, u: &CLFCandidate, x: &[f64]) -> Result<f64, ClfError> {
    let k = sys.max_degree();
    let mut worst = f64::INFINITY;
    for p in u.limiting_gradients(x)? {
        worst = worst.min(-sys.hamiltonian(k, x, &p)?);
    }
    Ok(worst)
}

/// Samples the region and evaluates the degree-k inequality at every point.
///
/// The region must avoid the target: its level band keeps `U` strictly
/// positive on every sample, which realizes the positive-definiteness side
/// of the candidate contract numerically.
pub fn verify(
    sys: &SystemDef,
    u: &CLFCandidate,
    region: &RegionSpec,
    samples: usize,
    seed: u64,
) -> Result<VerificationReport, ClfError> {
    assert!(region.u_min >= 0.0, "verification region must avoid the target");
    let pts = region.sample(samples, seed, |x| u.value(x).ok())?;
    let mut min_margin = f64::INFINITY;
    let mut argmin = pts[0].clone();
    let mut failures = Vec::new();
    for x in &pts {
        let m = margin_at(sys, u, x)?;
        if m < min_margin {
            min_margin = m;
            argmin = x.clone();
        }
        if m <= 0.0 {
            failures.push(FailurePoint {
                x: x.clone(),
                margin: m,
            });
        }
    }
    Ok(VerificationReport {
        samples: pts.len(),
        min_margin,
        argmin,
        failures,
        gamma: None,
        seed,
        note: VERIFICATION_NOTE,
    })
}

/// A continuous, strictly increasing margin function given by breakpoints,
/// evaluated by linear interpolation and extended constantly outside.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaFn {
    breaks: Vec<(f64, f64)>,
}

impl GammaFn {
    pub fn new(breaks: Vec<(f64, f64)>) -> Result<Self, ClfError> {
        if breaks.is_empty() {
            return Err(ClfError::NonMonotoneGamma);
        }
        for w in breaks.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(ClfError::NonMonotoneGamma);
            }
        }
        if breaks.iter().any(|&(u, g)| u <= 0.0 || g <= 0.0) {
            return Err(ClfError::NonMonotoneGamma);
        }
        Ok(Self { breaks })
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breaks
    }

    pub fn eval(&self, u: f64) -> f64 {
        let b = &self.breaks;
        if u <= b[0].0 {
            return b[0].1;
        }
        if u >= b[b.len() - 1].0 {
            return b[b.len() - 1].1;
        }
        let i = b.partition_point(|&(bu, _)| bu <= u) - 1;
        let (u0, g0) = b[i];
        let (u1, g1) = b[i + 1];
        g0 + (g1 - g0) * (u - u0) / (u1 - u0)
    }
}

/// Estimates the margin function on `U^-1((0, 2 sigma])` from level-set
/// sampling.
///
/// The raw level minimum `m_i` is the smallest sampled margin with `U(x)` in
/// the i-th cell; the margin function is the largest nondecreasing minorant
/// `min_{j >= i} m_j`, anchored at each cell's upper edge so interpolation
/// never exceeds a cell's own minimum, then made strictly increasing by
/// subtracting a downward ramp of slope `1e-6 * min_i m_i` (which keeps it
/// below the raw minima). Fails with [`ClfError::NonpositiveMargin`] if any
/// level minimum is nonpositive.
pub fn estimate_gamma(
    sys: &SystemDef,
    u: &CLFCandidate,
    region: &RegionSpec,
    sigma: f64,
    levels: usize,
    samples_per_level: usize,
    seed: u64,
) -> Result<GammaFn, ClfError> {
    assert!(levels >= 1 && sigma > 0.0);
    let top = 2.0 * sigma;
    let width = top / levels as f64;
    let mut cells: Vec<Vec<f64>> = vec![Vec::new(); levels];

    let mut leveled_region = region.clone();
    leveled_region.u_min = 0.0;
    leveled_region.u_max = leveled_region.u_max.min(top);
    let budget = samples_per_level * levels;
    let pts = leveled_region.sample(budget, seed, |x| u.value(x).ok())?;
    for x in &pts {
        let uv = u.value(x)?;
        let cell = ((uv / width).floor() as usize).min(levels - 1);
        cells[cell].push(margin_at(sys, u, x)?);
    }

    let mut raw = Vec::with_capacity(levels);
    for (i, cell) in cells.iter().enumerate() {
        if cell.is_empty() {
            // thin shells near the target may stay empty; inherit later
            raw.push(None);
            continue;
        }
        let m = cell.iter().copied().fold(f64::INFINITY, f64::min);
        if m <= 0.0 {
            return Err(ClfError::NonpositiveMargin {
                level: (i as f64 + 0.5) * width,
                margin: m,
            });
        }
        raw.push(Some(m));
    }
    // largest nondecreasing minorant: suffix minima over populated cells
    let mut suffix = vec![f64::INFINITY; levels + 1];
    for i in (0..levels).rev() {
        suffix[i] = match raw[i] {
            Some(m) => suffix[i + 1].min(m),
            None => suffix[i + 1],
        };
    }
    if !suffix[0].is_finite() {
        return Err(ClfError::EmptyLevel(0));
    }
    let min_m = suffix[0];
    let ramp = 1e-6 * min_m / top;
    let mut breaks = Vec::with_capacity(levels);
    for (i, s) in suffix.iter().take(levels).enumerate() {
        let edge = (i as f64 + 1.0) * width;
        // cells with an empty tail hold the last populated value
        let mono = if s.is_finite() { *s } else { min_m };
        breaks.push((edge, mono - ramp * (top - edge)));
    }
    GammaFn::new(breaks)
}
