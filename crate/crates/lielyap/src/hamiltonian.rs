//! Bracket Hamiltonians of degree `h`: the infimum of `<p, v>` over the
//! family of bracket directions available up to degree `h`.
//!
//! Three system classes are supported:
//!
//! - **smooth driftless**: directions are `±f_i` and every iterated bracket
//!   of degree at most `h`; since each bracket class enters with both signs,
//!   it contributes `-|<p, B(x)>|`;
//! - **Lipschitz driftless**: degree capped at 2; brackets are set-valued
//!   and contribute their min-max value `min_± sup_w <p, ±w>`;
//! - **drift**: degree capped at 2; degree 1 uses `{f0, f0 ± f_i}` (not
//!   symmetric), degree 2 adds `±[f0, f_i]` and `[f_j, f_l]` only where the
//!   drift vanishes, tested as `|f0(x)| <= eps_drift`.
//!
//! The infimum is a finite minimum because the enumerated bracket family is
//! finite. The chain `H^(h) <= H^(h-1)` holds exactly: each degree minimizes
//! over a superset of the previous one.

use crate::field::{FieldError, Generator, VectorFieldDef};
use crate::lie::{enumerate_brackets, FormalBracket, LieError, SetValuedBracket};
use crate::linalg;
use thiserror::Error;

/// Default tolerance for the drift-vanishing indicator. An exact zero test
/// is meaningless in floating point; this is a documented soundness caveat.
pub const DEFAULT_EPS_DRIFT: f64 = 1e-9;

/// Default tolerance for closed-region membership along guard boundaries.
pub const DEFAULT_BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HamError {
    #[error("degree {0} out of range 1..={1}")]
    DegreeOutOfRange(usize, usize),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Lie(#[from] LieError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("at least one generator required")]
    NoGenerators,
    #[error("generator {0} has dimension {1}, system has dimension {2}")]
    GeneratorDim(usize, usize, usize),
    #[error("drift has dimension {0}, system has dimension {1}")]
    DriftDim(usize, usize),
    #[error("max degree must be at least 1")]
    DegreeZero,
    #[error("lipschitz systems support degree at most 2 (got {0})")]
    LipschitzDegree(usize),
    #[error("systems with drift support degree at most 2 (got {0})")]
    DriftDegree(usize),
    #[error("piecewise generators require the lipschitz smoothness class")]
    PiecewiseNeedsLipschitz,
    #[error("drift systems require smooth generators")]
    DriftNeedsSmooth,
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// Smoothness class of the generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Smoothness {
    Smooth,
    Lipschitz,
}

/// A control system `dy = f0(y) + sum a_i f_i(y)` together with the bracket
/// directions enumerated up to `max_degree`, differentiated once up front.
///
/// Everything is immutable after construction; evaluation is pure and safe
/// to call concurrently.
#[derive(Debug, Clone)]
pub struct SystemDef {
    dim: usize,
    generators: Vec<Generator>,
    drift: Option<VectorFieldDef>,
    max_degree: usize,
    smoothness: Smoothness,
    eps_drift: f64,
    boundary_tol: f64,
    /// Canonical brackets of degree >= 2 with their symbolic fields
    /// (smooth driftless systems), in enumeration order.
    smooth_basis: Vec<(FormalBracket, VectorFieldDef)>,
    /// Set-valued pairs `(i, j)`, `i < j` (Lipschitz systems).
    setvalued: Vec<(usize, usize, SetValuedBracket)>,
    /// `[f0, f_i]` per generator (drift systems).
    drift_gen: Vec<VectorFieldDef>,
    /// `[f_j, f_l]`, `j < l` (drift systems).
    drift_pairs: Vec<(usize, usize, VectorFieldDef)>,
}

impl SystemDef {
    pub fn new(
        dim: usize,
        generators: Vec<Generator>,
        drift: Option<VectorFieldDef>,
        max_degree: usize,
        smoothness: Smoothness,
    ) -> Result<Self, SystemError> {
        if generators.is_empty() {
            return Err(SystemError::NoGenerators);
        }
        for (i, g) in generators.iter().enumerate() {
            if g.dim() != dim {
                return Err(SystemError::GeneratorDim(i + 1, g.dim(), dim));
            }
        }
        if let Some(f0) = &drift {
            if f0.dim() != dim {
                return Err(SystemError::DriftDim(f0.dim(), dim));
            }
        }
        if max_degree == 0 {
            return Err(SystemError::DegreeZero);
        }
        if smoothness == Smoothness::Lipschitz && max_degree > 2 {
            return Err(SystemError::LipschitzDegree(max_degree));
        }
        if drift.is_some() && max_degree > 2 {
            return Err(SystemError::DriftDegree(max_degree));
        }
        let any_piecewise = generators.iter().any(|g| g.as_smooth().is_none());
        if any_piecewise && smoothness != Smoothness::Lipschitz {
            return Err(SystemError::PiecewiseNeedsLipschitz);
        }
        if drift.is_some() && (any_piecewise || smoothness == Smoothness::Lipschitz) {
            return Err(SystemError::DriftNeedsSmooth);
        }

        let m = generators.len();
        let mut smooth_basis = Vec::new();
        let mut setvalued = Vec::new();
        let mut drift_gen = Vec::new();
        let mut drift_pairs = Vec::new();

        if let Some(f0) = &drift {
            let fields: Vec<&VectorFieldDef> =
                generators.iter().map(|g| g.as_smooth().unwrap()).collect();
            if max_degree >= 2 {
                for f in &fields {
                    drift_gen.push(crate::field::lie_bracket(f0, f));
                }
                for j in 1..=m {
                    for l in (j + 1)..=m {
                        drift_pairs.push((
                            j,
                            l,
                            crate::field::lie_bracket(fields[j - 1], fields[l - 1]),
                        ));
                    }
                }
            }
        } else {
            match smoothness {
                Smoothness::Smooth => {
                    let fields: Vec<VectorFieldDef> = generators
                        .iter()
                        .map(|g| g.as_smooth().unwrap().clone())
                        .collect();
                    for b in enumerate_brackets(m, max_degree)? {
                        if b.degree() >= 2 {
                            let field = b.symbolic_field(&fields)?;
                            smooth_basis.push((b, field));
                        }
                    }
                }
                Smoothness::Lipschitz => {
                    if max_degree >= 2 {
                        for i in 1..=m {
                            for j in (i + 1)..=m {
                                setvalued.push((
                                    i,
                                    j,
                                    SetValuedBracket::new(
                                        &generators[i - 1],
                                        &generators[j - 1],
                                        false,
                                    ),
                                ));
                            }
                        }
                    }
                }
            }
        }

        Ok(Self {
            dim,
            generators,
            drift,
            max_degree,
            smoothness,
            eps_drift: DEFAULT_EPS_DRIFT,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
            smooth_basis,
            setvalued,
            drift_gen,
            drift_pairs,
        })
    }

    /// Overrides the drift-vanishing tolerance.
    pub fn with_eps_drift(mut self, eps: f64) -> Self {
        self.eps_drift = eps;
        self
    }

    /// Overrides the guard-boundary tolerance.
    pub fn with_boundary_tol(mut self, tol: f64) -> Self {
        self.boundary_tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn generator_count(&self) -> usize {
        self.generators.len()
    }
    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }
    pub fn drift(&self) -> Option<&VectorFieldDef> {
        self.drift.as_ref()
    }
    pub fn max_degree(&self) -> usize {
        self.max_degree
    }
    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }
    pub fn eps_drift(&self) -> f64 {
        self.eps_drift
    }
    pub fn boundary_tol(&self) -> f64 {
        self.boundary_tol
    }

    /// Canonical smooth brackets of degree >= 2 with their symbolic fields.
    pub fn smooth_basis(&self) -> &[(FormalBracket, VectorFieldDef)] {
        &self.smooth_basis
    }

    /// Set-valued pairs `(i, j)`, `i < j`, for Lipschitz systems.
    pub fn setvalued_pairs(&self) -> &[(usize, usize, SetValuedBracket)] {
        &self.setvalued
    }

    /// `[f0, f_i]` bracket fields of a drift system.
    pub fn drift_gen_brackets(&self) -> &[VectorFieldDef] {
        &self.drift_gen
    }

    /// `[f_j, f_l]` bracket fields (`j < l`) of a drift system.
    pub fn drift_pair_brackets(&self) -> &[(usize, usize, VectorFieldDef)] {
        &self.drift_pairs
    }

    /// Whether the drift vanishes at `x` within `eps_drift`.
    pub fn drift_vanishes(&self, x: &[f64]) -> Result<bool, HamError> {
        match &self.drift {
            None => Ok(true),
            Some(f0) => Ok(linalg::norm(&f0.eval(x)?) <= self.eps_drift),
        }
    }

    /// The degree-`h` Hamiltonian `H^(h)(x, p)`.
    pub fn hamiltonian(&self, h: usize, x: &[f64], p: &[f64]) -> Result<f64, HamError> {
        if h < 1 || h > self.max_degree {
            return Err(HamError::DegreeOutOfRange(h, self.max_degree));
        }
        Ok(*self.hamiltonian_chain_upto(h, x, p)?.last().unwrap())
    }

    /// The chain `H^(1), ..., H^(k)`, monotone nonincreasing by construction:
    /// each entry is the running minimum over a growing direction family.
    pub fn hamiltonian_chain(&self, x: &[f64], p: &[f64]) -> Result<Vec<f64>, HamError> {
        let chain = self.hamiltonian_chain_upto(self.max_degree, x, p)?;
        debug_assert!(chain.windows(2).all(|w| w[1] <= w[0]));
        Ok(chain)
    }

    fn hamiltonian_chain_upto(
        &self,
        upto: usize,
        x: &[f64],
        p: &[f64],
    ) -> Result<Vec<f64>, HamError> {
        let mut chain = Vec::with_capacity(upto);
        let mut best: f64;
        if let Some(f0) = &self.drift {
            let v0 = f0.eval(x)?;
            best = linalg::dot(p, &v0);
            for g in &self.generators {
                let vi = g.eval(x, self.boundary_tol)?;
                let pv = linalg::dot(p, &vi);
                best = best.min(linalg::dot(p, &v0) + pv);
                best = best.min(linalg::dot(p, &v0) - pv);
            }
            // + 0.0 normalizes the -0.0 produced by -|0| terms
            chain.push(best + 0.0);
            if upto >= 2 {
                if linalg::norm(&v0) <= self.eps_drift {
                    for b in &self.drift_gen {
                        best = best.min(-linalg::dot(p, &b.eval(x)?).abs());
                    }
                    for (_, _, b) in &self.drift_pairs {
                        best = best.min(-linalg::dot(p, &b.eval(x)?).abs());
                    }
                }
                chain.push(best + 0.0);
            }
            return Ok(chain);
        }

        // driftless: degree 1 is -|<p, f_i>| over the generators
        best = f64::INFINITY;
        for g in &self.generators {
            let vi = g.eval(x, self.boundary_tol)?;
            best = best.min(-linalg::dot(p, &vi).abs());
        }
        chain.push(best + 0.0);
        for h in 2..=upto {
            match self.smoothness {
                Smoothness::Smooth => {
                    for (b, field) in &self.smooth_basis {
                        if b.degree() == h {
                            best = best.min(-linalg::dot(p, &field.eval(x)?).abs());
                        }
                    }
                }
                Smoothness::Lipschitz => {
                    for (_, _, sv) in &self.setvalued {
                        let set = sv.eval(x, self.boundary_tol)?;
                        best = best.min(set.sup_pairing(p));
                        best = best.min(set.negated().sup_pairing(p));
                    }
                }
            }
            chain.push(best + 0.0);
        }
        Ok(chain)
    }
}
