//! Serializable run reports and file emission: JSON with sorted keys, and
//! trajectory / envelope tables as CSV with 17-significant-digit floats.

use crate::certify::{EnvelopeReport, KlFunction, KlShapeReport};
use crate::clf::VerificationReport;
use crate::steering::{AsymptoticReport, Trajectory};
use serde::Serialize;
use std::io::{self, Write};

/// Serializes any report as pretty JSON with deterministically sorted keys.
pub fn to_sorted_json<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report serializes");
    let mut s = serde_json::to_string_pretty(&v).expect("json prints");
    s.push('\n');
    s
}

/// 17-significant-digit decimal rendering, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketEntry {
    pub descriptor: String,
    pub degree: usize,
    pub r: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketsReport {
    pub generator_count: usize,
    pub max_degree: usize,
    pub basis: Vec<BracketEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct HamReport {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `H^(1)..H^(k)` at `(x, p)`.
    pub chain: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub min_margin: f64,
    pub argmin: Vec<f64>,
    pub failures: Vec<FailureEntry>,
    pub gamma: Option<Vec<(f64, f64)>>,
    pub seed: u64,
    pub note: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureEntry {
    pub x: Vec<f64>,
    pub margin: f64,
}

impl VerifyReport {
    pub fn from_verification(r: &VerificationReport) -> Self {
        Self {
            samples: r.samples,
            min_margin: r.min_margin,
            argmin: r.argmin.clone(),
            failures: r
                .failures
                .iter()
                .map(|f| FailureEntry {
                    x: f.x.clone(),
                    margin: f.margin,
                })
                .collect(),
            gamma: r.gamma.as_ref().map(|g| g.breakpoints().to_vec()),
            seed: r.seed,
            note: r.note.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckpointEntry {
    pub s: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub degree: usize,
    pub r: usize,
    pub t: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub steps: usize,
    pub duration: f64,
    pub termination: String,
    pub final_distance: f64,
    pub checkpoints: Vec<CheckpointEntry>,
}

impl SynthesisReport {
    pub fn from_trajectory(traj: &Trajectory, final_distance: f64) -> Self {
        Self {
            steps: traj.steps(),
            duration: traj.duration(),
            termination: format!("{:?}", traj.termination),
            final_distance,
            checkpoints: traj
                .checkpoints
                .iter()
                .map(|c| CheckpointEntry {
                    s: c.s,
                    x: c.x.clone(),
                    u: c.u,
                    degree: c.degree,
                    r: c.r,
                    t: c.t,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticEntry {
    pub descriptor: String,
    pub degree: usize,
    pub r: usize,
    pub errors: Vec<(f64, f64)>,
    pub slope: Option<f64>,
    pub direction: Vec<f64>,
    pub symbolic: Vec<f64>,
    pub rel_direction_error: Option<f64>,
}

impl AsymptoticEntry {
    pub fn from_report(r: &AsymptoticReport) -> Self {
        Self {
            descriptor: r.descriptor.clone(),
            degree: r.degree,
            r: r.r,
            errors: r.errors.clone(),
            slope: r.slope,
            direction: r.direction.clone(),
            symbolic: r.symbolic.clone(),
            rel_direction_error: r.rel_direction_error,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AsymptoticsReport {
    pub x: Vec<f64>,
    pub t_list: Vec<f64>,
    pub entries: Vec<AsymptoticEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub max_violation: f64,
    pub argmax_s: f64,
    pub dense_samples: usize,
    pub extrapolated: bool,
    pub kl_shape: KlShapeEntry,
    pub field_bound: f64,
    pub degree: usize,
    pub r_k: usize,
    pub tables: TablesEntry,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlShapeEntry {
    pub zero_at_zero: bool,
    pub increasing_in_delta: bool,
    pub nonincreasing_in_s: bool,
    pub tail_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TablesEntry {
    pub gamma_tilde: Vec<(f64, f64)>,
    pub gamma_hat: Vec<(f64, f64)>,
    pub delta_minus: Vec<(f64, f64)>,
    pub delta_minus_hat: Vec<(f64, f64)>,
    pub delta_plus: Vec<(f64, f64)>,
    pub tau_lo: Vec<(f64, f64)>,
    pub tau_hi: Vec<(f64, f64)>,
}

impl CertificateReport {
    pub fn new(kl: &KlFunction, envelope: &EnvelopeReport, shape: &KlShapeReport) -> Self {
        Self {
            max_violation: envelope.max_violation,
            argmax_s: envelope.argmax_s,
            dense_samples: envelope.samples,
            extrapolated: envelope.extrapolated,
            kl_shape: KlShapeEntry {
                zero_at_zero: shape.zero_at_zero,
                increasing_in_delta: shape.increasing_in_delta,
                nonincreasing_in_s: shape.nonincreasing_in_s,
                tail_value: shape.tail_value,
            },
            field_bound: kl.field_bound,
            degree: kl.degree,
            r_k: kl.r_k,
            tables: TablesEntry {
                gamma_tilde: kl.gamma_tilde.points().to_vec(),
                gamma_hat: kl.gamma_hat.points().to_vec(),
                delta_minus: kl.delta_minus.points().to_vec(),
                delta_minus_hat: kl.delta_minus_hat.points().to_vec(),
                delta_plus: kl.delta_plus.points().to_vec(),
                tau_lo: kl.tau_lo.points().to_vec(),
                tau_hi: kl.tau_hi.points().to_vec(),
            },
        }
    }
}

/// Writes the dense trajectory as CSV: `s,x1..xn,ctrl,seg,step`.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, dim: usize, out: &mut W) -> io::Result<()> {
    write!(out, "s")?;
    for i in 1..=dim {
        write!(out, ",x{i}")?;
    }
    writeln!(out, ",ctrl,seg,step")?;
    for d in &traj.dense {
        write!(out, "{}", fmt_f64(d.s))?;
        for v in &d.x {
            write!(out, ",{}", fmt_f64(*v))?;
        }
        writeln!(out, ",{},{},{}", d.ctrl, d.seg, d.step)?;
    }
    Ok(())
}

/// Writes the envelope as CSV over a `(delta, s)` grid: `delta,s,beta`.
pub fn write_beta_csv<W: Write>(
    kl: &KlFunction,
    deltas: &[f64],
    times: &[f64],
    out: &mut W,
) -> io::Result<()> {
    writeln!(out, "delta,s,beta")?;
    for &d in deltas {
        for &s in times {
            writeln!(
                out,
                "{},{},{}",
                fmt_f64(d),
                fmt_f64(s),
                fmt_f64(kl.beta(d, s).value)
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_keys_are_sorted() {
        #[derive(Serialize)]
        struct Scrambled {
            zebra: u32,
            alpha: u32,
            mid: u32,
        }
        let s = to_sorted_json(&Scrambled {
            zebra: 1,
            alpha: 2,
            mid: 3,
        });
        let a = s.find("alpha").unwrap();
        let m = s.find("mid").unwrap();
        let z = s.find("zebra").unwrap();
        assert!(a < m && m < z);
    }

    #[test]
    fn float_format_has_seventeen_significant_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
