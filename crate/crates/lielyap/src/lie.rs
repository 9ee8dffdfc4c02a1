//! Formal iterated brackets, their degree and segment count, exact bracket
//! evaluation for smooth fields, and set-valued degree-2 brackets for
//! piecewise Lipschitz fields.
//!
//! The degree of a formal bracket counts generator occurrences; the segment
//! count follows the recursion `r(leaf) = 1`, `r([B1,B2]) = 2(r1 + r2)`, so
//! `r = 1, 4, 10` for degrees 1, 2, 3 built by left-nesting, and
//! `r([[g1,g2],[g3,g4]]) = 16`.

use crate::expr::ScalarExpr;
use crate::field::{lie_bracket, FieldError, Generator, VectorFieldDef};
use crate::linalg;
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("bracket degree must be at least 1")]
    DegreeOutOfRange,
    #[error("generator index {0} out of range (m = {1})")]
    GeneratorOutOfRange(usize, usize),
    #[error("set-valued brackets require piecewise fields and degree exactly 2")]
    NotSetValued,
    #[error("no piece pair is realizable at the point")]
    EmptyPieceSet,
}

/// A formal iterated Lie bracket over generator indices.
///
/// Leaves carry a sign so the degree-1 family `{±f_i}` can be enumerated
/// directly; inner nodes cache their degree and segment count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FormalBracket {
    Leaf {
        /// 1-based generator index.
        index: usize,
        sign: i8,
    },
    Node {
        left: Box<FormalBracket>,
        right: Box<FormalBracket>,
        degree: usize,
        r: usize,
    },
}

impl FormalBracket {
    pub fn leaf(index: usize) -> Self {
        FormalBracket::Leaf { index, sign: 1 }
    }

    pub fn signed_leaf(index: usize, sign: i8) -> Self {
        assert!(sign == 1 || sign == -1);
        FormalBracket::Leaf { index, sign }
    }

    /// `[left, right]` with cached degree and segment count.
    pub fn node(left: FormalBracket, right: FormalBracket) -> Self {
        let degree = left.degree() + right.degree();
        let r = 2 * (left.r() + right.r());
        FormalBracket::Node {
            left: Box::new(left),
            right: Box::new(right),
            degree,
            r,
        }
    }

    /// Number of generator occurrences in the formal expression.
    pub fn degree(&self) -> usize {
        match self {
            FormalBracket::Leaf { .. } => 1,
            FormalBracket::Node { degree, .. } => *degree,
        }
    }

    /// Number of equal-length control segments in the approximating word.
    pub fn r(&self) -> usize {
        match self {
            FormalBracket::Leaf { .. } => 1,
            FormalBracket::Node { r, .. } => *r,
        }
    }

    /// Structural order used for canonical enumeration: leaves before nodes,
    /// leaves by index then sign, nodes recursively by (left, right).
    fn cmp_structure(&self, other: &FormalBracket) -> Ordering {
        use FormalBracket::*;
        match (self, other) {
            (Leaf { index: a, sign: sa }, Leaf { index: b, sign: sb }) => {
                a.cmp(b).then(sb.cmp(sa))
            }
            (Leaf { .. }, Node { .. }) => Ordering::Less,
            (Node { .. }, Leaf { .. }) => Ordering::Greater,
            (
                Node {
                    left: l1,
                    right: r1,
                    degree: d1,
                    ..
                },
                Node {
                    left: l2,
                    right: r2,
                    degree: d2,
                    ..
                },
            ) => d1
                .cmp(d2)
                .then_with(|| l1.cmp_structure(l2))
                .then_with(|| r1.cmp_structure(r2)),
        }
    }

    /// Builds the bracket's vector field by recursive symbolic construction.
    pub fn symbolic_field(&self, fields: &[VectorFieldDef]) -> Result<VectorFieldDef, LieError> {
        match self {
            FormalBracket::Leaf { index, sign } => {
                let f = fields
                    .get(index - 1)
                    .ok_or(LieError::GeneratorOutOfRange(*index, fields.len()))?;
                Ok(if *sign == 1 {
                    f.clone()
                } else {
                    f.scaled(-1.0)
                })
            }
            FormalBracket::Node { left, right, .. } => {
                let lf = left.symbolic_field(fields)?;
                let rf = right.symbolic_field(fields)?;
                Ok(lie_bracket(&lf, &rf))
            }
        }
    }
}

impl fmt::Display for FormalBracket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormalBracket::Leaf { index, sign } => {
                write!(f, "{}f{index}", if *sign == 1 { "+" } else { "-" })
            }
            FormalBracket::Node { left, right, .. } => write!(f, "[{left},{right}]"),
        }
    }
}

/// Enumerates the bracket family of degree at most `k` over `m` generators.
///
/// Degree-1 entries carry both signs (`±f_i`); higher-degree trees are
/// deduplicated by antisymmetry (each unordered class appears once, oriented
/// with the structurally smaller subtree on the left) and by `[B,B] = 0`.
pub fn enumerate_brackets(m: usize, k: usize) -> Result<Vec<FormalBracket>, LieError> {
    if k == 0 {
        return Err(LieError::DegreeOutOfRange);
    }
    let mut out = Vec::new();
    for i in 1..=m {
        out.push(FormalBracket::signed_leaf(i, 1));
        out.push(FormalBracket::signed_leaf(i, -1));
    }
    // canonical unsigned trees per exact degree
    let mut by_degree: Vec<Vec<FormalBracket>> = vec![Vec::new(); k + 1];
    if k >= 1 {
        by_degree[1] = (1..=m).map(FormalBracket::leaf).collect();
    }
    for d in 2..=k {
        let mut level = Vec::new();
        for dl in 1..d {
            let dr = d - dl;
            for l in &by_degree[dl] {
                for r in &by_degree[dr] {
                    if l.cmp_structure(r) == Ordering::Less {
                        level.push(FormalBracket::node(l.clone(), r.clone()));
                    }
                }
            }
        }
        level.sort_by(|a, b| a.cmp_structure(b));
        out.extend(level.iter().cloned());
        by_degree[d] = level;
    }
    Ok(out)
}

/// Evaluates a formal bracket exactly at `x` by building its symbolic field.
pub fn eval_bracket(
    bracket: &FormalBracket,
    fields: &[VectorFieldDef],
    x: &[f64],
) -> Result<Vec<f64>, LieError> {
    Ok(bracket.symbolic_field(fields)?.eval(x)?)
}

/// The value set of a set-valued bracket: a nonempty vertex list whose convex
/// hull is the bracket value. For smooth data the list is a singleton.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketValueSet {
    vertices: Vec<Vec<f64>>,
}

impl BracketValueSet {
    pub fn singleton(v: Vec<f64>) -> Self {
        Self { vertices: vec![v] }
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    /// `sup` of `<p, w>` over the hull; attained at a vertex.
    pub fn sup_pairing(&self, p: &[f64]) -> f64 {
        self.vertices
            .iter()
            .map(|w| linalg::dot(p, w))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// The negated set, realizing antisymmetry of the bracket.
    pub fn negated(&self) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| linalg::scale(v, -1.0)).collect(),
        }
    }
}

/// Probes whether the intersection of the strict guard regions touches `x`:
/// there must be points arbitrarily close to `x` where every guard is
/// strictly positive. Guards already strictly positive at `x` stay positive
/// nearby; for guards vanishing at `x` we walk along combinations of their
/// gradients.
fn jointly_realizable(guards: &[&ScalarExpr], x: &[f64], tol: f64) -> Result<bool, LieError> {
    let n = x.len();
    let mut active: Vec<&ScalarExpr> = Vec::new();
    for g in guards {
        let v = g.eval(x).map_err(FieldError::from)?;
        if v < -tol {
            return Ok(false);
        }
        if v <= tol {
            active.push(g);
        }
    }
    if active.is_empty() {
        return Ok(true);
    }
    let mut grads = Vec::new();
    for g in &active {
        let mut grad = vec![0.0; n];
        for j in 1..=n {
            grad[j - 1] = g.partial(j).eval(x).map_err(FieldError::from)?;
        }
        let nrm = linalg::norm(&grad);
        if nrm <= tol {
            // degenerate guard; cannot certify a direction, treat as blocking
            return Ok(false);
        }
        grads.push(linalg::scale(&grad, 1.0 / nrm));
    }
    let scale = 1.0 + linalg::norm(x);
    // try the summed-gradient direction, then every sign combination
    let mut directions = vec![grads.iter().fold(vec![0.0; n], |acc, g| linalg::add(&acc, g))];
    let combos = 1usize << grads.len().min(10);
    for mask in 0..combos {
        let mut d = vec![0.0; n];
        for (bit, g) in grads.iter().enumerate() {
            let s = if mask >> bit & 1 == 1 { -1.0 } else { 1.0 };
            linalg::axpy(&mut d, s, g);
        }
        directions.push(d);
    }
    for d in directions {
        if linalg::norm(&d) <= tol {
            continue;
        }
        for delta in [1e-6, 1e-7, 1e-8] {
            let probe: Vec<f64> = x
                .iter()
                .zip(&d)
                .map(|(xi, di)| xi + delta * scale * di)
                .collect();
            let mut ok = true;
            for g in guards {
                if g.eval(&probe).map_err(FieldError::from)? <= 0.0 {
                    ok = false;
                    break;
                }
            }
            if ok {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Reduces a finite vertex list to extreme points. Duplicates are merged; a
/// collinear set keeps only its two endpoints. Higher-dimensional hulls keep
/// all generating vertices, which leaves every `sup` computation unchanged.
fn extreme_points(mut vs: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut dedup: Vec<Vec<f64>> = Vec::new();
    for v in vs.drain(..) {
        if !dedup.iter().any(|u| linalg::dist(u, &v) <= tol) {
            dedup.push(v);
        }
    }
    if dedup.len() <= 2 {
        return dedup;
    }
    // collinearity test against the longest difference from vertex 0
    let base = dedup[0].clone();
    let mut dir: Vec<f64> = Vec::new();
    let mut best = 0.0;
    for v in &dedup[1..] {
        let d = linalg::sub(v, &base);
        let n = linalg::norm(&d);
        if n > best {
            best = n;
            dir = linalg::scale(&d, 1.0 / n);
        }
    }
    let mut ts = Vec::with_capacity(dedup.len());
    for v in &dedup {
        let d = linalg::sub(v, &base);
        let t = linalg::dot(&d, &dir);
        let residual = linalg::dist(&d, &linalg::scale(&dir, t));
        if residual > tol * (1.0 + best) {
            return dedup; // not collinear; keep generating set
        }
        ts.push(t);
    }
    let (mut lo, mut hi) = (0usize, 0usize);
    for (i, t) in ts.iter().enumerate() {
        if *t < ts[lo] {
            lo = i;
        }
        if *t > ts[hi] {
            hi = i;
        }
    }
    vec![dedup[lo].clone(), dedup[hi].clone()]
}

/// A set-valued bracket `[f_i, f_j]_set` with the per-piece-pair classical
/// bracket fields differentiated once up front, so pointwise evaluation only
/// selects realizable pairs and evaluates.
#[derive(Debug, Clone)]
pub struct SetValuedBracket {
    pairs: Vec<PairEntry>,
}

#[derive(Debug, Clone)]
struct PairEntry {
    guards: Vec<ScalarExpr>,
    bracket: VectorFieldDef,
}

impl SetValuedBracket {
    /// Prepares `[gi, gj]_set`. `same_generator` marks `i = j`, where only
    /// diagonal piece pairs occur (the one field is differentiated once per
    /// nearby point), making the value exactly `{0}`.
    pub fn new(gi: &Generator, gj: &Generator, same_generator: bool) -> Self {
        let split = |g: &Generator| -> Vec<(Vec<ScalarExpr>, VectorFieldDef)> {
            match g {
                Generator::Smooth(f) => vec![(Vec::new(), f.clone())],
                Generator::Piecewise(pw) => pw
                    .pieces()
                    .iter()
                    .map(|p| (p.guards.clone(), p.field.clone()))
                    .collect(),
            }
        };
        let pi = split(gi);
        let pj = split(gj);
        let mut pairs = Vec::new();
        for (a, (ga, fa)) in pi.iter().enumerate() {
            for (b, (gb, fb)) in pj.iter().enumerate() {
                if same_generator && a != b {
                    continue;
                }
                let mut guards = ga.clone();
                guards.extend(gb.iter().cloned());
                pairs.push(PairEntry {
                    guards,
                    bracket: lie_bracket(fa, fb),
                });
            }
        }
        Self { pairs }
    }

    /// The value set at `x`: the convex hull of classical brackets of every
    /// jointly realizable piece pair whose closed regions contain `x`,
    /// returned by its extreme points.
    pub fn eval(&self, x: &[f64], tol: f64) -> Result<BracketValueSet, LieError> {
        let mut vertices = Vec::new();
        for pair in &self.pairs {
            let guards: Vec<&ScalarExpr> = pair.guards.iter().collect();
            if !jointly_realizable(&guards, x, tol)? {
                continue;
            }
            vertices.push(pair.bracket.eval(x)?);
        }
        if vertices.is_empty() {
            return Err(LieError::EmptyPieceSet);
        }
        let scale = vertices
            .iter()
            .map(|v| linalg::norm(v))
            .fold(0.0f64, f64::max)
            .max(1.0);
        Ok(BracketValueSet {
            vertices: extreme_points(vertices, 1e-12 * scale),
        })
    }
}

/// Degree-2 set-valued bracket of two generators of a system, in either
/// order (antisymmetry holds by construction).
pub fn setvalued_pair(
    generators: &[Generator],
    i: usize,
    j: usize,
    x: &[f64],
    tol: f64,
) -> Result<BracketValueSet, LieError> {
    let m = generators.len();
    let gi = generators
        .get(i - 1)
        .ok_or(LieError::GeneratorOutOfRange(i, m))?;
    let gj = generators
        .get(j - 1)
        .ok_or(LieError::GeneratorOutOfRange(j, m))?;
    SetValuedBracket::new(gi, gj, i == j).eval(x, tol)
}
