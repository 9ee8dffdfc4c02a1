//! Deterministic low-discrepancy sampling of verification regions.
//!
//! Points come from a Halton sequence with one prime base per coordinate.
//! The sequence is fully determined by the seed (an index offset), so every
//! report is reproducible bit for bit.

use crate::linalg;
use thiserror::Error;

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SampleError {
    #[error("sampler produced no points in the region after {0} draws")]
    NoSamples(usize),
    #[error("region box has {found} coordinate ranges, expected {expected}")]
    BoxDim { expected: usize, found: usize },
    #[error("dimension {0} exceeds the supported Halton bases")]
    TooManyDims(usize),
}

/// Radical-inverse of `index` in the given base, in `(0, 1)`.
fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// A multidimensional Halton point stream. Degenerate box ranges (`lo == hi`)
/// produce that constant coordinate, which is how axis segments are sampled.
#[derive(Debug, Clone)]
pub struct HaltonSampler {
    lo: Vec<f64>,
    hi: Vec<f64>,
    index: u64,
}

impl HaltonSampler {
    /// Starts the stream inside the axis-aligned box, skipping `seed` leading
    /// points (plus a fixed burn-in that discards the degenerate start).
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, seed: u64) -> Result<Self, SampleError> {
        if lo.len() != hi.len() {
            return Err(SampleError::BoxDim {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.len() > PRIMES.len() {
            return Err(SampleError::TooManyDims(lo.len()));
        }
        Ok(Self {
            lo,
            hi,
            index: 20 + seed,
        })
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        let idx = self.index;
        self.index += 1;
        self.lo
            .iter()
            .zip(&self.hi)
            .enumerate()
            .map(|(d, (lo, hi))| lo + (hi - lo) * radical_inverse(idx, PRIMES[d]))
            .collect()
    }
}

/// A sampling region: an axis-aligned box intersected with a band of
/// candidate-Lyapunov values, with an optional cylindrical exclusion around
/// one coordinate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Keep samples with `u_min < U(x) <= u_max`.
    pub u_min: f64,
    pub u_max: f64,
    /// Exclude points whose distance to the `axis`-th coordinate axis is
    /// at most `radius` (distance measured in the remaining coordinates).
    pub exclude_tube: Option<AxisTube>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisTube {
    /// 1-based coordinate index of the axis kept.
    pub axis: usize,
    pub radius: f64,
}

impl RegionSpec {
    pub fn contains(&self, x: &[f64], u: f64) -> bool {
        if !(u > self.u_min && u <= self.u_max) {
            return false;
        }
        if let Some(tube) = &self.exclude_tube {
            let radial: Vec<f64> = x
                .iter()
                .enumerate()
                .filter(|(i, _)| i + 1 != tube.axis)
                .map(|(_, v)| *v)
                .collect();
            if linalg::norm(&radial) <= tube.radius {
                return false;
            }
        }
        true
    }

    /// Draws until `count` region points are accepted. The draw budget is
    /// proportional to `count`; thin regions that exhaust it raise
    /// [`SampleError::NoSamples`].
    pub fn sample<U>(&self, count: usize, seed: u64, mut u_of: U) -> Result<Vec<Vec<f64>>, SampleError>
    where
        U: FnMut(&[f64]) -> Option<f64>,
    {
        assert!(count >= 1);
        let mut halton = HaltonSampler::new(self.lo.clone(), self.hi.clone(), seed)?;
        let budget = count.saturating_mul(2000).max(100_000);
        let mut accepted = Vec::with_capacity(count);
        for _ in 0..budget {
            if accepted.len() == count {
                return Ok(accepted);
            }
            let x = halton.next_point();
            if let Some(u) = u_of(&x) {
                if self.contains(&x, u) {
                    accepted.push(x);
                }
            }
        }
        if accepted.is_empty() {
            Err(SampleError::NoSamples(budget))
        } else {
            Ok(accepted)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_two_prefix_is_van_der_corput() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert_eq!(radical_inverse(4, 2), 0.125);
        assert_eq!(radical_inverse(5, 3), 2.0 / 3.0 + 1.0 / 9.0);
    }

    #[test]
    fn sampling_is_deterministic_and_seed_sensitive() {
        let region = RegionSpec {
            lo: vec![-1.0; 3],
            hi: vec![1.0; 3],
            u_min: 0.0,
            u_max: 10.0,
            exclude_tube: None,
        };
        let u = |x: &[f64]| Some(crate::linalg::norm(x));
        let a = region.sample(50, 0, u).unwrap();
        let b = region.sample(50, 0, u).unwrap();
        assert_eq!(a, b);
        let c = region.sample(50, 7, u).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_box_dimensions_pin_coordinates() {
        let region = RegionSpec {
            lo: vec![0.0, 0.0, 1.0],
            hi: vec![0.0, 0.0, 3.0],
            u_min: 0.0,
            u_max: 10.0,
            exclude_tube: None,
        };
        let pts = region.sample(20, 0, |x| Some(x[2])).unwrap();
        for x in &pts {
            assert_eq!(x[0], 0.0);
            assert_eq!(x[1], 0.0);
            assert!(x[2] >= 1.0 && x[2] <= 3.0);
        }
    }

    #[test]
    fn tube_exclusion_removes_axis_neighborhood() {
        let region = RegionSpec {
            lo: vec![-1.0; 3],
            hi: vec![1.0; 3],
            u_min: 0.0,
            u_max: 10.0,
            exclude_tube: Some(AxisTube {
                axis: 3,
                radius: 0.25,
            }),
        };
        let pts = region.sample(100, 0, |x| Some(crate::linalg::norm(x))).unwrap();
        for x in &pts {
            assert!(x[0].hypot(x[1]) > 0.25);
        }
    }

    #[test]
    fn empty_region_errors() {
        let region = RegionSpec {
            lo: vec![0.0, 0.0],
            hi: vec![1.0, 1.0],
            u_min: 5.0,
            u_max: 6.0,
            exclude_tube: None,
        };
        assert!(matches!(
            region.sample(10, 0, |x| Some(crate::linalg::norm(x))),
            Err(SampleError::NoSamples(_))
        ));
    }
}
