//! Bracket-approximating control words, feedback selection, step-size
//! backtracking against the descent test, and the recursive synthesis loop
//! driving the state to the target.
//!
//! A formal bracket `B` of degree `h` is realized by a piecewise-constant
//! control word of `r(B)` equal segments; executed over a duration `t` it
//! displaces the state by `B(x) (t/r)^h + O(t^(h+1))`. The word of a leaf is
//! its single signed control; the word of `[B1, B2]` is
//! `W(B1) W(B2) inv(W(B1)) inv(W(B2))`, where `inv` reverses the segment
//! order and negates every control.
//!
//! Step sizes are not derived from a priori constants: starting from a cap
//! `min(1, d(x,T) / 2M)` the duration is halved until the accepted-descent
//! inequality `U(y) - U(x) <= -(gamma(U(x))/2) (t/r)^h` holds, which the
//! asymptotics above guarantee for small `t`.

use crate::clf::{CLFCandidate, ClfError, GammaFn, TargetDef};
use crate::hamiltonian::{HamError, Smoothness, SystemDef};
use crate::lie::{FormalBracket, LieError};
use crate::linalg;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteerError {
    #[error(transparent)]
    Clf(#[from] ClfError),
    #[error(transparent)]
    Ham(#[from] HamError),
    #[error(transparent)]
    Lie(#[from] LieError),
    #[error(transparent)]
    Field(#[from] crate::field::FieldError),
    #[error("no bracket direction descends at u = {u} against gamma = {gamma}")]
    NoDescentDirection { u: f64, gamma: f64 },
    #[error("descent test not met after {halvings} halvings (last t = {last_t})")]
    StepFailure { halvings: usize, last_t: f64 },
    #[error("max steps ({0}) exceeded at distance {1}")]
    MaxStepsExceeded(usize, f64),
    #[error("trajectory blew up to a non-finite state")]
    NonFinite,
    #[error("invalid control word: {0}")]
    InvalidWord(String),
}

/// One constant-control segment: a signed generator or drift alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlAtom {
    DriftOnly,
    Gen { index: usize, sign: i8 },
}

impl ControlAtom {
    fn negated(self) -> Self {
        match self {
            ControlAtom::DriftOnly => ControlAtom::DriftOnly,
            ControlAtom::Gen { index, sign } => ControlAtom::Gen { index, sign: -sign },
        }
    }

    /// Signed integer code used in trajectory output (0 for drift-only).
    pub fn code(self) -> i32 {
        match self {
            ControlAtom::DriftOnly => 0,
            ControlAtom::Gen { index, sign } => i32::from(sign) * index as i32,
        }
    }
}

/// A piecewise-constant control schedule of equal-length segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlWord {
    segments: Vec<ControlAtom>,
}

impl ControlWord {
    pub fn single(atom: ControlAtom) -> Self {
        Self {
            segments: vec![atom],
        }
    }

    pub fn segments(&self) -> &[ControlAtom] {
        &self.segments
    }

    /// Segment count; equals `r(B)` for the word of a bracket `B`.
    pub fn r(&self) -> usize {
        self.segments.len()
    }

    /// Reverses the segment order and negates every control.
    pub fn inverse(&self) -> Self {
        Self {
            segments: self.segments.iter().rev().map(|a| a.negated()).collect(),
        }
    }

    pub fn concat(words: &[&ControlWord]) -> Self {
        Self {
            segments: words
                .iter()
                .flat_map(|w| w.segments.iter().copied())
                .collect(),
        }
    }
}

/// The commutator word realizing a formal bracket.
pub fn word_for_bracket(bracket: &FormalBracket) -> ControlWord {
    match bracket {
        FormalBracket::Leaf { index, sign } => ControlWord::single(ControlAtom::Gen {
            index: *index,
            sign: *sign,
        }),
        FormalBracket::Node { left, right, .. } => {
            let wl = word_for_bracket(left);
            let wr = word_for_bracket(right);
            ControlWord::concat(&[&wl, &wr, &wl.inverse(), &wr.inverse()])
        }
    }
}

/// Degree-2 bracket directions of a system with drift, meaningful at points
/// where the drift vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftBracketKind {
    /// `[f0, f_i]`
    DriftThenGen(usize),
    /// `[f_i, f0]`
    GenThenDrift(usize),
    /// `[f_j, f_l]`
    GenPair(usize, usize),
}

/// The word realizing a drift bracket; the drift stays active throughout.
///
/// With the bracket convention `[X, Y] = DY·X - DX·Y`, running `+e_i` then
/// `-e_i` from a drift zero displaces by `Df0·f_i (t/2)^2 = [f_i, f0] (t/2)^2`,
/// so `[f0, f_i]` takes the opposite segment order.
pub fn word_for_drift_bracket(kind: DriftBracketKind) -> ControlWord {
    let gen = |index, sign| ControlAtom::Gen { index, sign };
    match kind {
        DriftBracketKind::DriftThenGen(i) => ControlWord {
            segments: vec![gen(i, -1), gen(i, 1)],
        },
        DriftBracketKind::GenThenDrift(i) => ControlWord {
            segments: vec![gen(i, 1), gen(i, -1)],
        },
        DriftBracketKind::GenPair(j, l) => ControlWord {
            segments: vec![gen(j, 1), gen(l, 1), gen(j, -1), gen(l, -1)],
        },
    }
}

/// A point of the dense trajectory record.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    /// Time within the current word (shifted to global time by the caller).
    pub s: f64,
    pub x: Vec<f64>,
    pub ctrl: i32,
    /// Index of the active segment within the word.
    pub seg: usize,
}

/// Result of flowing a control word.
#[derive(Debug, Clone, PartialEq)]
pub struct WordOutcome {
    pub endpoint: Vec<f64>,
    pub path: Vec<PathSample>,
}

/// Flows the system along `word` for total duration `t` with classical
/// fourth-order steps, hitting segment boundaries exactly (`substeps` fixed
/// steps per segment). Path samples are recorded every `record_stride`
/// substeps and at every segment boundary.
pub fn execute_word(
    sys: &SystemDef,
    x0: &[f64],
    word: &ControlWord,
    t: f64,
    substeps: usize,
    record_stride: usize,
) -> Result<WordOutcome, SteerError> {
    assert!(t >= 0.0 && substeps >= 1);
    let tol = sys.boundary_tol();
    let velocity = |atom: ControlAtom, y: &[f64]| -> Result<Vec<f64>, SteerError> {
        let mut v = match sys.drift() {
            Some(f0) => f0.eval(y)?,
            None => vec![0.0; sys.dim()],
        };
        match atom {
            ControlAtom::DriftOnly => {
                if sys.drift().is_none() {
                    return Err(SteerError::InvalidWord(
                        "drift-only segment in a driftless system".into(),
                    ));
                }
            }
            ControlAtom::Gen { index, sign } => {
                let g = sys
                    .generators()
                    .get(index - 1)
                    .ok_or_else(|| SteerError::InvalidWord(format!("generator f{index}")))?;
                linalg::axpy(&mut v, f64::from(sign), &g.eval(y, tol)?);
            }
        }
        Ok(v)
    };

    let r = word.r();
    let dt = t / (r as f64 * substeps as f64);
    let mut y = x0.to_vec();
    let mut path = vec![PathSample {
        s: 0.0,
        x: y.clone(),
        ctrl: word.segments[0].code(),
        seg: 0,
    }];
    if t == 0.0 {
        return Ok(WordOutcome { endpoint: y, path });
    }
    let stride = record_stride.max(1);
    for (seg, atom) in word.segments.iter().enumerate() {
        for sub in 0..substeps {
            let k1 = velocity(*atom, &y)?;
            let mut y2 = y.clone();
            linalg::axpy(&mut y2, dt / 2.0, &k1);
            let k2 = velocity(*atom, &y2)?;
            let mut y3 = y.clone();
            linalg::axpy(&mut y3, dt / 2.0, &k2);
            let k3 = velocity(*atom, &y3)?;
            let mut y4 = y.clone();
            linalg::axpy(&mut y4, dt, &k3);
            let k4 = velocity(*atom, &y4)?;
            for i in 0..y.len() {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(SteerError::NonFinite);
            }
            let done = sub + 1;
            if done % stride == 0 || done == substeps {
                path.push(PathSample {
                    s: dt * (seg * substeps + done) as f64,
                    x: y.clone(),
                    ctrl: atom.code(),
                    seg,
                });
            }
        }
    }
    Ok(WordOutcome { endpoint: y, path })
}

/// A direction the steering loop can realize by a control word.
#[derive(Debug, Clone, PartialEq)]
pub enum SteerDirection {
    /// A formal bracket of the driftless system (a signed leaf at degree 1).
    Formal(FormalBracket),
    /// A set-valued pair `[f_i, f_j]_set` of a Lipschitz system.
    SetValuedPair(usize, usize),
    /// Drift-system degree-1 element `f0 + coeff * f_i` (`coeff` in -1..=1;
    /// the index is ignored when `coeff` is 0).
    DriftElement { coeff: i8, index: usize },
    /// Drift-system degree-2 bracket.
    DriftBracket(DriftBracketKind),
}

impl SteerDirection {
    pub fn degree(&self) -> usize {
        match self {
            SteerDirection::Formal(b) => b.degree(),
            SteerDirection::SetValuedPair(..) => 2,
            SteerDirection::DriftElement { .. } => 1,
            SteerDirection::DriftBracket(_) => 2,
        }
    }

    pub fn word(&self) -> ControlWord {
        match self {
            SteerDirection::Formal(b) => word_for_bracket(b),
            SteerDirection::SetValuedPair(i, j) => {
                word_for_drift_bracket(DriftBracketKind::GenPair(*i, *j))
            }
            SteerDirection::DriftElement { coeff, index } => match coeff {
                0 => ControlWord::single(ControlAtom::DriftOnly),
                s => ControlWord::single(ControlAtom::Gen {
                    index: *index,
                    sign: *s,
                }),
            },
            SteerDirection::DriftBracket(kind) => word_for_drift_bracket(*kind),
        }
    }

    pub fn descriptor(&self) -> String {
        match self {
            SteerDirection::Formal(b) => b.to_string(),
            SteerDirection::SetValuedPair(i, j) => format!("[f{i},f{j}]_set"),
            SteerDirection::DriftElement { coeff, index } => match coeff {
                0 => "f0".to_string(),
                1 => format!("f0+f{index}"),
                _ => format!("f0-f{index}"),
            },
            SteerDirection::DriftBracket(kind) => match kind {
                DriftBracketKind::DriftThenGen(i) => format!("[f0,f{i}]"),
                DriftBracketKind::GenThenDrift(i) => format!("[f{i},f0]"),
                DriftBracketKind::GenPair(j, l) => format!("[f{j},f{l}]"),
            },
        }
    }

    /// Worst-case pairing `max_p sup_w <p, w>` over the multivalued gradient
    /// set and the direction's value set at `x`.
    fn worst_pairing(&self, sys: &SystemDef, x: &[f64], pset: &[Vec<f64>]) -> Result<f64, SteerError> {
        let tol = sys.boundary_tol();
        let pair_vec = |v: &[f64]| -> f64 {
            pset.iter()
                .map(|p| linalg::dot(p, v))
                .fold(f64::NEG_INFINITY, f64::max)
        };
        match self {
            SteerDirection::Formal(b) => match b {
                FormalBracket::Leaf { index, sign } => {
                    let v = sys.generators()[index - 1].eval(x, tol)?;
                    Ok(pair_vec(&linalg::scale(&v, f64::from(*sign))))
                }
                node => {
                    // canonical node fields are precomputed on the system
                    for (formal, field) in sys.smooth_basis() {
                        if formal == node {
                            return Ok(pair_vec(&field.eval(x)?));
                        }
                    }
                    // negated canonical bracket
                    if let FormalBracket::Node { left, right, .. } = node {
                        let flipped = FormalBracket::node((**right).clone(), (**left).clone());
                        for (formal, field) in sys.smooth_basis() {
                            if *formal == flipped {
                                return Ok(pair_vec(&linalg::scale(&field.eval(x)?, -1.0)));
                            }
                        }
                    }
                    let fields: Vec<_> = sys
                        .generators()
                        .iter()
                        .map(|g| g.as_smooth().cloned().ok_or(LieError::NotSetValued))
                        .collect::<Result<_, _>>()?;
                    Ok(pair_vec(&crate::lie::eval_bracket(node, &fields, x)?))
                }
            },
            SteerDirection::SetValuedPair(i, j) => {
                let set = crate::lie::setvalued_pair(sys.generators(), *i, *j, x, tol)?;
                Ok(pset
                    .iter()
                    .map(|p| set.sup_pairing(p))
                    .fold(f64::NEG_INFINITY, f64::max))
            }
            SteerDirection::DriftElement { coeff, index } => {
                let f0 = sys
                    .drift()
                    .ok_or_else(|| SteerError::InvalidWord("drift element without drift".into()))?;
                let mut v = f0.eval(x)?;
                if *coeff != 0 {
                    let g = sys.generators()[index - 1].eval(x, tol)?;
                    linalg::axpy(&mut v, f64::from(*coeff), &g);
                }
                Ok(pair_vec(&v))
            }
            SteerDirection::DriftBracket(kind) => {
                let v = match kind {
                    DriftBracketKind::DriftThenGen(i) => {
                        sys.drift_gen_brackets()[i - 1].eval(x)?
                    }
                    DriftBracketKind::GenThenDrift(i) => {
                        linalg::scale(&sys.drift_gen_brackets()[i - 1].eval(x)?, -1.0)
                    }
                    DriftBracketKind::GenPair(j, l) => {
                        let (a, b) = if j < l { (*j, *l) } else { (*l, *j) };
                        let field = sys
                            .drift_pair_brackets()
                            .iter()
                            .find(|(pj, pl, _)| *pj == a && *pl == b)
                            .map(|(_, _, f)| f)
                            .ok_or_else(|| {
                                SteerError::InvalidWord(format!("pair bracket f{j},f{l}"))
                            })?;
                        let v = field.eval(x)?;
                        if j < l {
                            v
                        } else {
                            linalg::scale(&v, -1.0)
                        }
                    }
                };
                Ok(pair_vec(&v))
            }
        }
    }
}

/// Enumerates the steerable directions of exact degree `h`, in a fixed
/// deterministic order.
fn directions_of_degree(sys: &SystemDef, h: usize) -> Vec<SteerDirection> {
    let m = sys.generator_count();
    let mut out = Vec::new();
    if sys.drift().is_some() {
        match h {
            1 => {
                out.push(SteerDirection::DriftElement { coeff: 0, index: 0 });
                for i in 1..=m {
                    out.push(SteerDirection::DriftElement { coeff: 1, index: i });
                    out.push(SteerDirection::DriftElement { coeff: -1, index: i });
                }
            }
            2 => {
                for i in 1..=m {
                    out.push(SteerDirection::DriftBracket(DriftBracketKind::DriftThenGen(i)));
                    out.push(SteerDirection::DriftBracket(DriftBracketKind::GenThenDrift(i)));
                }
                for j in 1..=m {
                    for l in (j + 1)..=m {
                        out.push(SteerDirection::DriftBracket(DriftBracketKind::GenPair(j, l)));
                        out.push(SteerDirection::DriftBracket(DriftBracketKind::GenPair(l, j)));
                    }
                }
            }
            _ => {}
        }
        return out;
    }
    if h == 1 {
        for i in 1..=m {
            out.push(SteerDirection::Formal(FormalBracket::signed_leaf(i, 1)));
            out.push(SteerDirection::Formal(FormalBracket::signed_leaf(i, -1)));
        }
        return out;
    }
    match sys.smoothness() {
        Smoothness::Smooth => {
            for (b, _) in sys.smooth_basis() {
                if b.degree() == h {
                    out.push(SteerDirection::Formal(b.clone()));
                    if let FormalBracket::Node { left, right, .. } = b {
                        out.push(SteerDirection::Formal(FormalBracket::node(
                            (**right).clone(),
                            (**left).clone(),
                        )));
                    }
                }
            }
        }
        Smoothness::Lipschitz => {
            if h == 2 {
                for (i, j, _) in sys.setvalued_pairs() {
                    out.push(SteerDirection::SetValuedPair(*i, *j));
                    out.push(SteerDirection::SetValuedPair(*j, *i));
                }
            }
        }
    }
    out
}

/// A selected feedback direction, its degree, and the worst-case pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackChoice {
    pub direction: SteerDirection,
    pub degree: usize,
    pub r: usize,
    pub pairing: f64,
}

/// Picks the lowest degree `h` at which some direction pairs below
/// `-gamma_value` against every limiting gradient, then the direction with
/// the most negative worst-case pairing (ties: lowest enumeration index).
/// Bracket directions of a drift system are only admissible where the drift
/// vanishes within its tolerance.
pub fn select_feedback(
    sys: &SystemDef,
    x: &[f64],
    pset: &[Vec<f64>],
    gamma_value: f64,
) -> Result<FeedbackChoice, SteerError> {
    for h in 1..=sys.max_degree() {
        if h >= 2 && sys.drift().is_some() && !sys.drift_vanishes(x)? {
            continue;
        }
        let mut best: Option<FeedbackChoice> = None;
        for dir in directions_of_degree(sys, h) {
            let pairing = dir.worst_pairing(sys, x, pset)?;
            if pairing <= -gamma_value {
                let better = match &best {
                    None => true,
                    Some(b) => pairing < b.pairing,
                };
                if better {
                    let r = dir.word().r();
                    best = Some(FeedbackChoice {
                        degree: h,
                        r,
                        pairing,
                        direction: dir,
                    });
                }
            }
        }
        if let Some(choice) = best {
            return Ok(choice);
        }
    }
    Err(SteerError::NoDescentDirection {
        u: f64::NAN,
        gamma: gamma_value,
    })
}

/// Tuning knobs of the stepper.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepKnobs {
    /// Bound on field norms over the working region; caps the trial
    /// duration at `d(x,T) / (2 m_hat)` so a step cannot escape it.
    pub m_hat: f64,
    pub substeps: usize,
    pub max_halvings: usize,
    /// Dense-path recording stride in substeps.
    pub record_stride: usize,
}

impl StepKnobs {
    pub fn new(m_hat: f64) -> Self {
        Self {
            m_hat,
            substeps: 32,
            max_halvings: 40,
            record_stride: 8,
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub x_next: Vec<f64>,
    pub u_next: f64,
    pub t: f64,
    pub degree: usize,
    pub r: usize,
    pub decrease: f64,
    pub threshold: f64,
    pub descriptor: String,
    pub path: Vec<PathSample>,
}

/// Backtracks the duration for an already-selected direction until the
/// descent inequality `U(y) - U(x) <= -(gamma_value/2) (t/r)^h` holds.
///
/// When the test is near-marginal (within 10% of the threshold) the word is
/// re-integrated at doubled resolution before deciding, so acceptance is
/// never an integration artifact.
pub fn backtrack_step(
    sys: &SystemDef,
    u: &CLFCandidate,
    choice: &FeedbackChoice,
    gamma_value: f64,
    x: &[f64],
    t0: f64,
    knobs: &StepKnobs,
) -> Result<StepOutcome, SteerError> {
    let word = choice.direction.word();
    let u0 = u.value(x)?;
    let mut t = t0;
    for _ in 0..knobs.max_halvings {
        let mut outcome = execute_word(sys, x, &word, t, knobs.substeps, knobs.record_stride)?;
        let mut u_next = u.value(&outcome.endpoint)?;
        let threshold = -(gamma_value / 2.0) * (t / choice.r as f64).powi(choice.degree as i32);
        let mut decrease = u_next - u0;
        if (decrease - threshold).abs() <= 0.1 * threshold.abs() {
            outcome = execute_word(sys, x, &word, t, knobs.substeps * 2, knobs.record_stride)?;
            u_next = u.value(&outcome.endpoint)?;
            decrease = u_next - u0;
        }
        if decrease <= threshold {
            return Ok(StepOutcome {
                x_next: outcome.endpoint,
                u_next,
                t,
                degree: choice.degree,
                r: choice.r,
                decrease,
                threshold,
                descriptor: choice.direction.descriptor(),
                path: outcome.path,
            });
        }
        t /= 2.0;
    }
    Err(SteerError::StepFailure {
        halvings: knobs.max_halvings,
        last_t: t * 2.0,
    })
}

/// Selects a feedback direction at `x` and backtracks its duration.
pub fn step(
    sys: &SystemDef,
    u: &CLFCandidate,
    target: &TargetDef,
    gamma: &GammaFn,
    x: &[f64],
    knobs: &StepKnobs,
) -> Result<StepOutcome, SteerError> {
    let u0 = u.value(x)?;
    let gamma_value = gamma.eval(u0);
    let pset = u.limiting_gradients(x)?;
    let choice = select_feedback(sys, x, &pset, gamma_value).map_err(|e| match e {
        SteerError::NoDescentDirection { gamma, .. } => {
            SteerError::NoDescentDirection { u: u0, gamma }
        }
        other => other,
    })?;
    let d = target.distance(x)?;
    let t0 = (d / (2.0 * knobs.m_hat)).min(1.0);
    backtrack_step(sys, u, &choice, gamma_value, x, t0, knobs)
}

/// An accepted-step record: time, state, candidate value, feedback degree,
/// segment count, and the accepted duration.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub u: f64,
    pub degree: usize,
    pub r: usize,
    pub t: f64,
}

/// Why a synthesis run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    AlreadyInTarget,
    ReachedTarget,
}

/// One dense trajectory sample with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSample {
    pub s: f64,
    pub x: Vec<f64>,
    pub ctrl: i32,
    pub seg: usize,
    pub step: usize,
}

/// A synthesized trajectory: strictly descending checkpoints plus the dense
/// path underneath them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub checkpoints: Vec<Checkpoint>,
    pub dense: Vec<DenseSample>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.checkpoints.len() - 1
    }

    pub fn duration(&self) -> f64 {
        self.checkpoints.last().map_or(0.0, |c| c.s)
    }
}

/// Iterates accepted steps from `x0` until the target distance drops to
/// `eps_d` (or `max_steps` is exhausted, which is an error carrying the
/// remaining distance).
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    sys: &SystemDef,
    u: &CLFCandidate,
    target: &TargetDef,
    gamma: &GammaFn,
    x0: &[f64],
    eps_d: f64,
    max_steps: usize,
    knobs: &StepKnobs,
) -> Result<Trajectory, SteerError> {
    let mut checkpoints = vec![Checkpoint {
        s: 0.0,
        x: x0.to_vec(),
        u: u.value(x0)?,
        degree: 0,
        r: 0,
        t: 0.0,
    }];
    let mut dense = Vec::new();
    if target.distance(x0)? <= eps_d {
        return Ok(Trajectory {
            checkpoints,
            dense,
            termination: Termination::AlreadyInTarget,
        });
    }
    let mut x = x0.to_vec();
    let mut s = 0.0;
    for step_index in 1..=max_steps {
        let out = step(sys, u, target, gamma, &x, knobs)?;
        for sample in &out.path {
            if sample.s == 0.0 && !dense.is_empty() {
                continue; // segment start duplicates the previous endpoint
            }
            dense.push(DenseSample {
                s: s + sample.s,
                x: sample.x.clone(),
                ctrl: sample.ctrl,
                seg: sample.seg,
                step: step_index,
            });
        }
        s += out.t;
        x = out.x_next.clone();
        checkpoints.push(Checkpoint {
            s,
            x: x.clone(),
            u: out.u_next,
            degree: out.degree,
            r: out.r,
            t: out.t,
        });
        if target.distance(&x)? <= eps_d {
            return Ok(Trajectory {
                checkpoints,
                dense,
                termination: Termination::ReachedTarget,
            });
        }
    }
    Err(SteerError::MaxStepsExceeded(
        max_steps,
        target.distance(&x)?,
    ))
}

/// Empirical check of the word asymptotics for one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub descriptor: String,
    pub degree: usize,
    pub r: usize,
    /// `(t, |y(t) - x - v(x) (t/r)^h|)` per probed duration.
    pub errors: Vec<(f64, f64)>,
    /// Least-squares slope of `log e` against `log t`; `None` when every
    /// error sits below the numerical floor (the estimate holds trivially).
    pub slope: Option<f64>,
    /// `(y(t_min) - x) (r/t_min)^h`, the extrapolated direction.
    pub direction: Vec<f64>,
    /// The symbolic bracket value `v(x)`.
    pub symbolic: Vec<f64>,
    /// Relative direction error; `None` when the symbolic value is ~0.
    pub rel_direction_error: Option<f64>,
}

/// The symbolic value a direction should realize at `x`. Set-valued pairs
/// are supported at points where the value set is a singleton.
pub fn direction_value(
    sys: &SystemDef,
    dir: &SteerDirection,
    x: &[f64],
) -> Result<Vec<f64>, SteerError> {
    let tol = sys.boundary_tol();
    match dir {
        SteerDirection::Formal(b) => {
            if sys.smoothness() == Smoothness::Lipschitz {
                return Err(SteerError::InvalidWord(
                    "formal brackets need smooth generators; use a set-valued pair".into(),
                ));
            }
            let fields: Vec<_> = sys
                .generators()
                .iter()
                .map(|g| g.as_smooth().unwrap().clone())
                .collect();
            Ok(crate::lie::eval_bracket(b, &fields, x)?)
        }
        SteerDirection::SetValuedPair(i, j) => {
            let set = crate::lie::setvalued_pair(sys.generators(), *i, *j, x, tol)?;
            if set.vertices().len() != 1 {
                return Err(SteerError::InvalidWord(
                    "set-valued bracket is multivalued at this point".into(),
                ));
            }
            Ok(set.vertices()[0].clone())
        }
        SteerDirection::DriftElement { coeff, index } => {
            let f0 = sys
                .drift()
                .ok_or_else(|| SteerError::InvalidWord("drift element without drift".into()))?;
            let mut v = f0.eval(x)?;
            if *coeff != 0 {
                linalg::axpy(
                    &mut v,
                    f64::from(*coeff),
                    &sys.generators()[index - 1].eval(x, tol)?,
                );
            }
            Ok(v)
        }
        SteerDirection::DriftBracket(kind) => match kind {
            DriftBracketKind::DriftThenGen(i) => Ok(sys.drift_gen_brackets()[i - 1].eval(x)?),
            DriftBracketKind::GenThenDrift(i) => Ok(linalg::scale(
                &sys.drift_gen_brackets()[i - 1].eval(x)?,
                -1.0,
            )),
            DriftBracketKind::GenPair(j, l) => {
                let (a, b) = if j < l { (*j, *l) } else { (*l, *j) };
                let field = sys
                    .drift_pair_brackets()
                    .iter()
                    .find(|(pj, pl, _)| *pj == a && *pl == b)
                    .map(|(_, _, f)| f)
                    .ok_or_else(|| SteerError::InvalidWord(format!("pair bracket f{j},f{l}")))?;
                let v = field.eval(x)?;
                Ok(if *j < *l { v } else { linalg::scale(&v, -1.0) })
            }
        },
    }
}

/// Executes the direction's word over every duration in `t_list`, measures
/// the displacement error against `v(x) (t/r)^h`, and fits the error order.
pub fn asymptotic_order(
    sys: &SystemDef,
    dir: &SteerDirection,
    x: &[f64],
    t_list: &[f64],
    substeps: usize,
) -> Result<AsymptoticReport, SteerError> {
    assert!(!t_list.is_empty());
    let word = dir.word();
    let r = word.r();
    let h = dir.degree();
    let symbolic = direction_value(sys, dir, x)?;
    let floor = 1e-12 * (1.0 + linalg::norm(x));
    let mut errors = Vec::with_capacity(t_list.len());
    let mut t_min = f64::INFINITY;
    let mut disp_at_min = vec![0.0; x.len()];
    for &t in t_list {
        let out = execute_word(sys, x, &word, t, substeps, usize::MAX)?;
        let disp = linalg::sub(&out.endpoint, x);
        let predicted = linalg::scale(&symbolic, (t / r as f64).powi(h as i32));
        let e = linalg::dist(&disp, &predicted);
        errors.push((t, e));
        if t < t_min {
            t_min = t;
            disp_at_min = disp;
        }
    }
    let fit: Vec<(f64, f64)> = errors
        .iter()
        .filter(|(_, e)| *e > floor)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    let slope = if fit.len() >= 2 {
        let n = fit.len() as f64;
        let sx: f64 = fit.iter().map(|(a, _)| a).sum();
        let sy: f64 = fit.iter().map(|(_, b)| b).sum();
        let sxx: f64 = fit.iter().map(|(a, _)| a * a).sum();
        let sxy: f64 = fit.iter().map(|(a, b)| a * b).sum();
        Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
    } else {
        None
    };
    let direction = linalg::scale(&disp_at_min, (r as f64 / t_min).powi(h as i32));
    let sym_norm = linalg::norm(&symbolic);
    let rel_direction_error = if sym_norm > floor {
        Some(linalg::dist(&direction, &symbolic) / sym_norm)
    } else {
        None
    };
    Ok(AsymptoticReport {
        descriptor: dir.descriptor(),
        degree: h,
        r,
        errors,
        slope,
        direction,
        symbolic,
        rel_direction_error,
    })
}
