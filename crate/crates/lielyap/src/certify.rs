//! Construction of a class-KL bounding function for synthesized runs, and
//! envelope checking of trajectories against it.
//!
//! The certificate is assembled from monotone piecewise-linear tables built
//! out of sampled data:
//!
//! - `delta_minus(u) = min { d(x) : U(x) >= u }` and
//!   `delta_plus(u) = max { d(x) : U(x) <= u }` relate candidate levels to
//!   target distances (both reduce to the identity when `U` is the distance);
//! - `tau_lo` / `tau_hi` bound the accepted step durations per level from
//!   below and above (the lower bound feeds the decay rate, the upper bound
//!   pays for the time between checkpoints);
//! - `gamma_tilde(u) = gamma(u) tau_lo(u)^(k-1) / (2 r_k^k)` converts the
//!   per-step decrease into a decrease per unit time, and
//!   `gamma_hat = min(u, gamma_tilde(u))` makes it invertible against
//!   `U(y(s_j)) (1 + s_j) <=`-style bounds;
//! - the envelope is
//!   `beta_hat(delta, s) = delta_plus(gamma_hat^-1(delta_minus_hat^-1(delta) / (1+s)))`,
//!   shifted in time by one step bound and padded with `M * tau_hi(...)` to
//!   cover motion between checkpoints.
//!
//! Every breakpoint is anchored on the conservative side of its level cell,
//! so the discrete inequalities behind the envelope hold for the very run
//! the tables were built from. Inverse lookups outside the sampled range are
//! extended constantly and flagged: extrapolation never silently certifies.

use crate::clf::{CLFCandidate, ClfError, GammaFn, TargetDef};
use crate::sample::RegionSpec;
use crate::steering::Trajectory;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Sample(#[from] crate::sample::SampleError),
    #[error("input table is not strictly increasing")]
    NonMonotoneInput,
    #[error("trajectory has no accepted steps to calibrate step-duration tables")]
    InsufficientData,
    #[error("no samples available for level {0}")]
    EmptyLevel(usize),
}

/// A strictly increasing piecewise-linear table through `(0, 0)`, evaluated
/// by interpolation inside its range and constant extension outside (which
/// sets the `extrapolated` flag on the result).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneTable {
    points: Vec<(f64, f64)>,
}

impl MonotoneTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, CertifyError> {
        if points.len() < 2 {
            return Err(CertifyError::NonMonotoneInput);
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(CertifyError::NonMonotoneInput);
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// Forward evaluation; the flag marks constant extension outside the range.
    pub fn eval(&self, x: f64) -> (f64, bool) {
        let p = &self.points;
        if x <= p[0].0 {
            return (p[0].1, x < p[0].0);
        }
        if x >= p[p.len() - 1].0 {
            return (p[p.len() - 1].1, x > p[p.len() - 1].0);
        }
        let i = p.partition_point(|&(px, _)| px <= x) - 1;
        let (x0, y0) = p[i];
        let (x1, y1) = p[i + 1];
        (y0 + (y1 - y0) * (x - x0) / (x1 - x0), false)
    }

    /// Inverse evaluation by bisection; the flag marks clamping outside the
    /// value range.
    pub fn inverse(&self, y: f64) -> (f64, bool) {
        let p = &self.points;
        if y <= p[0].1 {
            return (p[0].0, y < p[0].1);
        }
        if y >= p[p.len() - 1].1 {
            return (p[p.len() - 1].0, y > p[p.len() - 1].1);
        }
        let (mut lo, mut hi) = (p[0].0, p[p.len() - 1].0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid).0 < y {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi.abs().max(1.0) {
                break;
            }
        }
        (0.5 * (lo + hi), false)
    }
}

/// Nudge direction used when enforcing strict monotonicity on anchored data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Nudge {
    /// Values may only move down (tables that must stay below the data).
    Down,
    /// Values may only move up (tables that must stay above the data).
    Up,
}

/// Makes nondecreasing values strictly increasing by nudging ties in the
/// conservative direction only.
fn strictify(values: &mut [f64], direction: Nudge) {
    if values.is_empty() {
        return;
    }
    let scale = values
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let eps = 1e-12 * scale;
    match direction {
        Nudge::Up => {
            for i in 1..values.len() {
                if values[i] <= values[i - 1] {
                    values[i] = values[i - 1] + eps;
                }
            }
        }
        Nudge::Down => {
            for i in (0..values.len() - 1).rev() {
                if values[i] >= values[i + 1] {
                    values[i] = values[i + 1] - eps;
                }
            }
        }
    }
}

/// Largest word segment count over brackets of degree at most `k`:
/// 1, 4, 10, 22 for degrees one to four.
pub fn max_segment_count(k: usize) -> usize {
    assert!(k >= 1);
    let mut best = vec![0usize; k + 1];
    best[1] = 1;
    for d in 2..=k {
        let mut r = 0;
        for a in 1..d {
            r = r.max(2 * (best[a] + best[d - a]));
        }
        best[d] = r;
    }
    *best.iter().max().unwrap()
}

/// `gamma(u) * tau^(k-1) / (2 r_k^k)`, the per-unit-time decay rate induced
/// by one accepted step.
pub fn gamma_tilde_value(gamma_u: f64, tau_u: f64, k: usize, r_k: usize) -> f64 {
    gamma_u * tau_u.powi(k as i32 - 1) / (2.0 * (r_k as f64).powi(k as i32))
}

/// The assembled class-KL certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct KlFunction {
    pub gamma_tilde: MonotoneTable,
    pub gamma_hat: MonotoneTable,
    pub delta_minus: MonotoneTable,
    pub delta_minus_hat: MonotoneTable,
    pub delta_plus: MonotoneTable,
    pub tau_lo: MonotoneTable,
    pub tau_hi: MonotoneTable,
    /// Bound on field norms over the region; pays for inter-checkpoint motion.
    pub field_bound: f64,
    pub degree: usize,
    pub r_k: usize,
}

/// An envelope value together with its extrapolation flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaValue {
    pub value: f64,
    pub extrapolated: bool,
}

impl KlFunction {
    /// The pre-shift envelope `delta_plus(gamma_hat^-1(delta_minus_hat^-1(delta) / (1+s)))`.
    pub fn beta_hat(&self, delta: f64, s: f64) -> BetaValue {
        let (a, f1) = self.delta_minus_hat.inverse(delta);
        let (b, f2) = self.gamma_hat.inverse(a / (1.0 + s));
        let (v, f3) = self.delta_plus.eval(b);
        BetaValue {
            value: v,
            extrapolated: f1 || f2 || f3,
        }
    }

    /// The certified envelope: `beta_hat` delayed by one step-duration bound
    /// and padded with `M * tau_hi` for motion between checkpoints.
    pub fn beta(&self, delta: f64, s: f64) -> BetaValue {
        if delta == 0.0 {
            return BetaValue {
                value: 0.0,
                extrapolated: false,
            };
        }
        let (du, f1) = self.delta_minus.inverse(delta);
        let (tau_star, f2) = self.tau_hi.eval(du);
        let s_eff = (s - tau_star).max(0.0);
        let bh = self.beta_hat(delta, s_eff);
        let (arg, f3) = self.delta_minus.inverse(bh.value);
        let (tau_term, f4) = self.tau_hi.eval(arg);
        BetaValue {
            value: self.field_bound * tau_term + bh.value,
            extrapolated: f1 || f2 || bh.extrapolated || f3 || f4,
        }
    }
}

/// Builds the KL certificate from the margin function, one synthesized run
/// (which calibrates the step-duration tables and contributes its
/// checkpoints as samples), and level-set sampling of the region.
#[allow(clippy::too_many_arguments)]
pub fn build_kl(
    gamma: &GammaFn,
    traj: &Trajectory,
    u: &CLFCandidate,
    target: &TargetDef,
    region: &RegionSpec,
    field_bound: f64,
    degree: usize,
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<KlFunction, CertifyError> {
    if traj.steps() == 0 {
        return Err(CertifyError::InsufficientData);
    }
    assert!(levels >= 2);
    let r_k = max_segment_count(degree);

    // (u, d) samples: the sampled region plus the run's own checkpoints
    let mut ud: Vec<(f64, f64)> = Vec::new();
    let pts = region.sample(samples, seed, |x| u.value(x).ok())?;
    for x in &pts {
        ud.push((u.value(x)?, target.distance(x)?));
    }
    for c in &traj.checkpoints {
        ud.push((c.u, target.distance(&c.x)?));
    }

    let u_top = ud.iter().map(|p| p.0).fold(0.0f64, f64::max);
    let width = u_top / levels as f64;

    // distance tables: suffix minima anchored at cell right edges keep
    // delta_minus below every sample at or above the cell; prefix maxima
    // with one-cell lookahead keep delta_plus above every sample below
    let mut min_d = vec![f64::INFINITY; levels + 1];
    let mut max_d = vec![0.0f64; levels + 1];
    for &(uv, dv) in &ud {
        let cell = ((uv / width).floor() as usize).min(levels - 1);
        min_d[cell] = min_d[cell].min(dv);
        max_d[cell] = max_d[cell].max(dv);
    }
    let mut suffix_min = vec![f64::INFINITY; levels + 1];
    for i in (0..levels).rev() {
        suffix_min[i] = suffix_min[i + 1].min(min_d[i]);
    }
    let mut prefix_max = vec![0.0f64; levels + 1];
    for i in 0..levels {
        prefix_max[i + 1] = prefix_max[i].max(max_d[i]);
    }

    let edge = |i: usize| width * i as f64;
    let mut dm_vals: Vec<f64> = (0..levels)
        .map(|i| {
            if suffix_min[i].is_finite() {
                suffix_min[i]
            } else {
                // empty tail cells: extend with the line through the top
                edge(i + 1)
            }
        })
        .collect();
    strictify(&mut dm_vals, Nudge::Down);
    let mut dm_points = vec![(0.0, 0.0)];
    for (i, v) in dm_vals.iter().enumerate() {
        dm_points.push((edge(i + 1), v.max(1e-12 * width * (i + 1) as f64)));
    }
    strictify_pairs(&mut dm_points, Nudge::Down);
    let delta_minus = MonotoneTable::new(dm_points)?;

    let mut dp_vals: Vec<f64> = (0..levels)
        .map(|i| prefix_max[(i + 2).min(levels)].max(edge(i + 1) * 1e-12))
        .collect();
    strictify(&mut dp_vals, Nudge::Up);
    let mut dp_points = vec![(0.0, 0.0)];
    for (i, v) in dp_vals.iter().enumerate() {
        dp_points.push((edge(i + 1), *v));
    }
    strictify_pairs(&mut dp_points, Nudge::Up);
    let delta_plus = MonotoneTable::new(dp_points)?;

    // delta_minus_hat = min(delta_minus, id) at the shared breakpoints
    let dmh_points: Vec<(f64, f64)> = delta_minus
        .points()
        .iter()
        .map(|&(x, y)| (x, y.min(x)))
        .collect();
    let delta_minus_hat = MonotoneTable::new(dmh_points)?;

    // step-duration tables from the run's accepted steps; each duration is
    // bucketed at both its start and arrival level
    let mut t_min = vec![f64::INFINITY; levels + 1];
    let mut t_max = vec![0.0f64; levels + 1];
    for w in traj.checkpoints.windows(2) {
        let t = w[1].t;
        for uv in [w[0].u, w[1].u] {
            let cell = ((uv / width).floor() as usize).min(levels - 1);
            t_min[cell] = t_min[cell].min(t);
            t_max[cell] = t_max[cell].max(t);
        }
    }
    let mut tlo_suffix = vec![f64::INFINITY; levels + 1];
    for i in (0..levels).rev() {
        tlo_suffix[i] = tlo_suffix[i + 1].min(t_min[i]);
    }
    let mut thi_prefix = vec![0.0f64; levels + 1];
    for i in 0..levels {
        thi_prefix[i + 1] = thi_prefix[i].max(t_max[i]);
    }
    let t_global_min = tlo_suffix[0];
    let t_global_max = thi_prefix[levels];
    if !t_global_min.is_finite() || t_global_max <= 0.0 {
        return Err(CertifyError::InsufficientData);
    }

    let mut tlo_vals: Vec<f64> = (0..levels)
        .map(|i| {
            if tlo_suffix[i].is_finite() {
                tlo_suffix[i]
            } else {
                t_global_max
            }
        })
        .collect();
    strictify(&mut tlo_vals, Nudge::Down);
    let mut tlo_points = vec![(0.0, 0.0)];
    for (i, v) in tlo_vals.iter().enumerate() {
        tlo_points.push((edge(i + 1), *v));
    }
    strictify_pairs(&mut tlo_points, Nudge::Down);
    let tau_lo = MonotoneTable::new(tlo_points)?;

    let mut thi_vals: Vec<f64> = (0..levels)
        .map(|i| {
            let v = thi_prefix[i].max(thi_prefix[i + 1]);
            if v > 0.0 {
                v
            } else {
                t_global_min
            }
        })
        .collect();
    strictify(&mut thi_vals, Nudge::Up);
    // anchored at cell left edges so tau_hi is already >= every duration
    // bucketed at or below the cell
    let mut thi_points = vec![(0.0, 0.0)];
    for (i, v) in thi_vals.iter().enumerate() {
        thi_points.push((edge(i + 1), *v));
    }
    strictify_pairs(&mut thi_points, Nudge::Up);
    let tau_hi = MonotoneTable::new(thi_points)?;

    // decay tables on the same grid; tau_lo is evaluated at the cell's own
    // right edge, staying below the durations accepted within the cell
    let mut gt_vals: Vec<f64> = (0..levels)
        .map(|i| {
            let uv = edge(i + 1);
            gamma_tilde_value(gamma.eval(uv), tau_lo.eval(uv).0, degree, r_k)
        })
        .collect();
    strictify(&mut gt_vals, Nudge::Down);
    let mut gt_points = vec![(0.0, 0.0)];
    for (i, v) in gt_vals.iter().enumerate() {
        gt_points.push((edge(i + 1), v.max(1e-300)));
    }
    strictify_pairs(&mut gt_points, Nudge::Down);
    let gamma_tilde = MonotoneTable::new(gt_points)?;

    let gh_points: Vec<(f64, f64)> = gamma_tilde
        .points()
        .iter()
        .map(|&(x, y)| (x, y.min(x)))
        .collect();
    let gamma_hat = MonotoneTable::new(gh_points)?;

    Ok(KlFunction {
        gamma_tilde,
        gamma_hat,
        delta_minus,
        delta_minus_hat,
        delta_plus,
        tau_lo,
        tau_hi,
        field_bound,
        degree,
        r_k,
    })
}

/// Re-enforces strict monotonicity of both coordinates after value clamps.
fn strictify_pairs(points: &mut [(f64, f64)], direction: Nudge) {
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    match direction {
        Nudge::Up => {
            for i in 1..ys.len() {
                if ys[i] <= ys[i - 1] {
                    ys[i] = ys[i - 1] * (1.0 + 1e-12) + 1e-300;
                }
            }
        }
        Nudge::Down => {
            for i in (0..ys.len() - 1).rev() {
                if ys[i] >= ys[i + 1] {
                    ys[i] = ys[i + 1] * (1.0 - 1e-12) - 1e-300;
                }
            }
            // never push the zero anchor negative
            if ys[0] < 0.0 {
                ys[0] = 0.0;
                for i in 1..ys.len() {
                    if ys[i] <= ys[i - 1] {
                        ys[i] = ys[i - 1] + 1e-300 + ys[i - 1].abs() * 1e-15;
                    }
                }
            }
        }
    }
    for (p, y) in points.iter_mut().zip(ys) {
        p.1 = y;
    }
}

/// Envelope-check outcome over a dense trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    /// `max_s d(y(s)) - beta(d(x0), s)`; at most zero means certified.
    pub max_violation: f64,
    /// Time of the worst sample.
    pub argmax_s: f64,
    pub samples: usize,
    /// Whether any envelope evaluation left the sampled table range.
    pub extrapolated: bool,
}

/// Checks `d(y(s)) <= beta(d(x0), s)` at every dense sample of the run.
/// An empty run (start already in the target) is vacuously certified.
pub fn check_envelope(
    traj: &Trajectory,
    kl: &KlFunction,
    target: &TargetDef,
) -> Result<EnvelopeReport, CertifyError> {
    let d0 = target.distance(&traj.checkpoints[0].x)?;
    let mut report = EnvelopeReport {
        max_violation: 0.0,
        argmax_s: 0.0,
        samples: traj.dense.len(),
        extrapolated: false,
    };
    if traj.dense.is_empty() {
        return Ok(report);
    }
    let mut worst = f64::NEG_INFINITY;
    for sample in &traj.dense {
        let d = target.distance(&sample.x)?;
        let b = kl.beta(d0, sample.s);
        report.extrapolated |= b.extrapolated;
        let v = d - b.value;
        if v > worst {
            worst = v;
            report.argmax_s = sample.s;
        }
    }
    report.max_violation = worst;
    Ok(report)
}

/// Grid check of the class-KL shape of a built envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct KlShapeReport {
    pub zero_at_zero: bool,
    pub increasing_in_delta: bool,
    pub nonincreasing_in_s: bool,
    /// Largest envelope value at the probe horizon.
    pub tail_value: f64,
}

pub fn kl_shape(kl: &KlFunction, deltas: &[f64], times: &[f64], horizon: f64) -> KlShapeReport {
    let zero_at_zero = times.iter().all(|&s| kl.beta(0.0, s).value == 0.0);
    let mut increasing = true;
    for &s in times {
        let mut prev = kl.beta(0.0, s).value;
        for &d in deltas {
            let v = kl.beta(d, s).value;
            if v < prev {
                increasing = false;
            }
            prev = v;
        }
    }
    let mut nonincreasing = true;
    let mut tail: f64 = 0.0;
    for &d in deltas {
        let mut prev = f64::INFINITY;
        for &s in times {
            let v = kl.beta(d, s).value;
            if v > prev + 1e-12 {
                nonincreasing = false;
            }
            prev = v;
        }
        tail = tail.max(kl.beta(d, horizon).value);
    }
    KlShapeReport {
        zero_at_zero,
        increasing_in_delta: increasing,
        nonincreasing_in_s: nonincreasing,
        tail_value: tail,
    }
}
