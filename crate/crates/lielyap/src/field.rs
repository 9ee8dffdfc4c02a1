//! Vector fields with closed-form components, exact Jacobians, and
//! piecewise-defined fields for the merely Lipschitz case.

use crate::expr::{EvalError, ScalarExpr};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("field has {found} components, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no piece's closed region contains the point")]
    EmptyPieceSet,
}

/// A smooth vector field given by one expression per component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldDef {
    dim: usize,
    components: Vec<ScalarExpr>,
}

impl VectorFieldDef {
    pub fn new(dim: usize, components: Vec<ScalarExpr>) -> Result<Self, FieldError> {
        if components.len() != dim {
            return Err(FieldError::DimensionMismatch {
                expected: dim,
                found: components.len(),
            });
        }
        Ok(Self { dim, components })
    }

    /// Zero field of the given dimension.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            components: vec![ScalarExpr::constant(0.0); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[ScalarExpr] {
        &self.components
    }

    /// Component-wise evaluation at `x`.
    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, FieldError> {
        debug_assert_eq!(x.len(), self.dim);
        self.components
            .iter()
            .map(|c| c.eval(x).map_err(FieldError::from))
            .collect()
    }

    /// Jacobian matrix at `x`; row `i` holds the gradient of component `i`.
    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, FieldError> {
        self.components
            .iter()
            .map(|c| {
                (1..=self.dim)
                    .map(|j| c.partial(j).eval(x).map_err(FieldError::from))
                    .collect()
            })
            .collect()
    }

    /// Scales the field by a constant.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            dim: self.dim,
            components: self
                .components
                .iter()
                .map(|c| ScalarExpr::mul(ScalarExpr::constant(s), c.clone()))
                .collect(),
        }
    }

    /// Maximum absolute discrepancy between the symbolic Jacobian and a
    /// central-difference Jacobian with step `h`. Oracle for the symbolic
    /// differentiation path.
    pub fn fd_check(&self, x: &[f64], h: f64) -> Result<f64, FieldError> {
        let sym = self.jacobian(x)?;
        let mut worst: f64 = 0.0;
        for j in 0..self.dim {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let fp = self.eval(&xp)?;
            let fm = self.eval(&xm)?;
            for i in 0..self.dim {
                let num = (fp[i] - fm[i]) / (2.0 * h);
                worst = worst.max((sym[i][j] - num).abs());
            }
        }
        Ok(worst)
    }
}

/// Exact Lie bracket `[f, g] = Dg·f - Df·g` as a symbolic vector field.
pub fn lie_bracket(f: &VectorFieldDef, g: &VectorFieldDef) -> VectorFieldDef {
    assert_eq!(f.dim, g.dim);
    let n = f.dim;
    let components = (0..n)
        .map(|i| {
            let mut acc = ScalarExpr::constant(0.0);
            for j in 1..=n {
                acc = ScalarExpr::add(
                    acc,
                    ScalarExpr::sub(
                        ScalarExpr::mul(g.components[i].partial(j), f.components[j - 1].clone()),
                        ScalarExpr::mul(f.components[i].partial(j), g.components[j - 1].clone()),
                    ),
                );
            }
            acc
        })
        .collect();
    VectorFieldDef {
        dim: n,
        components,
    }
}

/// One region of a piecewise field: strict sign conditions `g(x) > 0` and the
/// smooth field valid there.
#[derive(Debug, Clone, PartialEq)]
pub struct Piece {
    pub guards: Vec<ScalarExpr>,
    pub field: VectorFieldDef,
}

/// A Lipschitz vector field defined by smooth pieces whose guard regions
/// partition the domain up to a measure-zero boundary set.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseVectorFieldDef {
    dim: usize,
    pieces: Vec<Piece>,
}

impl PiecewiseVectorFieldDef {
    pub fn new(dim: usize, pieces: Vec<Piece>) -> Result<Self, FieldError> {
        for p in &pieces {
            if p.field.dim() != dim {
                return Err(FieldError::DimensionMismatch {
                    expected: dim,
                    found: p.field.dim(),
                });
            }
        }
        Ok(Self { dim, pieces })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    /// Indices of pieces whose closed region contains `x`: every guard
    /// satisfies `g(x) >= -tol`.
    pub fn pieces_at(&self, x: &[f64], tol: f64) -> Result<Vec<usize>, FieldError> {
        let mut out = Vec::new();
        'piece: for (k, p) in self.pieces.iter().enumerate() {
            for g in &p.guards {
                if g.eval(x)? < -tol {
                    continue 'piece;
                }
            }
            out.push(k);
        }
        Ok(out)
    }

    /// Evaluates the field using the first piece owning `x` (boundary
    /// tolerance `tol`). The field is continuous, so the choice of owning
    /// piece on a boundary does not change the value.
    pub fn eval(&self, x: &[f64], tol: f64) -> Result<Vec<f64>, FieldError> {
        let owners = self.pieces_at(x, tol)?;
        match owners.first() {
            Some(&k) => self.pieces[k].field.eval(x),
            None => Err(FieldError::EmptyPieceSet),
        }
    }
}

/// Either a smooth field or a piecewise (Lipschitz) one.
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Smooth(VectorFieldDef),
    Piecewise(PiecewiseVectorFieldDef),
}

impl Generator {
    pub fn dim(&self) -> usize {
        match self {
            Generator::Smooth(f) => f.dim(),
            Generator::Piecewise(f) => f.dim(),
        }
    }

    /// Point value; piecewise fields are continuous so this is piece-independent.
    pub fn eval(&self, x: &[f64], tol: f64) -> Result<Vec<f64>, FieldError> {
        match self {
            Generator::Smooth(f) => f.eval(x),
            Generator::Piecewise(f) => f.eval(x, tol),
        }
    }

    /// The smooth field, if this generator is smooth.
    pub fn as_smooth(&self) -> Option<&VectorFieldDef> {
        match self {
            Generator::Smooth(f) => Some(f),
            Generator::Piecewise(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expr;

    fn field(dim: usize, comps: &[&str]) -> VectorFieldDef {
        VectorFieldDef::new(
            dim,
            comps.iter().map(|c| parse_expr(c, dim).unwrap()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn eval_field_nonholonomic_generator() {
        // f1 = (1, 0, -x2) at (1,1,0) -> (1, 0, -1)
        let f1 = field(3, &["1", "0", "-x2"]);
        assert_eq!(f1.eval(&[1.0, 1.0, 0.0]).unwrap(), vec![1.0, 0.0, -1.0]);
    }

    #[test]
    fn eval_zero_field() {
        let z = VectorFieldDef::zero(4);
        assert_eq!(z.eval(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn eval_quadratic_generator() {
        // f2 = (0, 1, x1^2) at (2,0,0) -> (0, 1, 4)
        let f2 = field(3, &["0", "1", "x1^2"]);
        assert_eq!(f2.eval(&[2.0, 0.0, 0.0]).unwrap(), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn jacobian_rows_are_component_gradients() {
        let f2 = field(3, &["0", "1", "x1"]);
        let j = f2.jacobian(&[0.3, -0.2, 5.0]).unwrap();
        assert_eq!(j[2], vec![1.0, 0.0, 0.0]);

        let constant = field(2, &["3", "-1"]);
        assert_eq!(
            constant.jacobian(&[9.0, 9.0]).unwrap(),
            vec![vec![0.0, 0.0]; 2]
        );

        let f1 = field(3, &["1", "0", "x2^2"]);
        let j = f1.jacobian(&[0.0, 3.0, 0.0]).unwrap();
        assert_eq!(j[2], vec![0.0, 6.0, 0.0]);
    }

    #[test]
    fn fd_check_bounds_polynomial_fields() {
        let f = field(3, &["x1*x2", "x3^2 - x1", "x2^3"]);
        let d = f.fd_check(&[0.5, -0.75, 0.25], 1e-5).unwrap();
        assert!(d <= 1e-6, "discrepancy {d}");
    }

    #[test]
    fn fd_check_exact_on_linear_fields() {
        let f = field(2, &["2*x1 - x2", "x1"]);
        let d = f.fd_check(&[0.0, 0.0], 1e-5).unwrap();
        assert!(d <= 1e-12, "discrepancy {d}");
    }

    #[test]
    fn fd_check_on_gated_twist_field() {
        // phi(x3) = x3^2 gating the twist direction
        let f = field(3, &["1", "0", "-x2*x3^2"]);
        let d = f.fd_check(&[0.5, 1.25, 0.75], 1e-5).unwrap();
        assert!(d <= 1e-6, "discrepancy {d}");
    }

    #[test]
    fn bracket_of_nonholonomic_pair_is_constant_vertical() {
        let f1 = field(3, &["1", "0", "-x2"]);
        let f2 = field(3, &["0", "1", "x1"]);
        let b = lie_bracket(&f1, &f2);
        for x in [[0.0, 0.0, 0.0], [1.0, -2.0, 3.0], [5.0, 5.0, -5.0]] {
            assert_eq!(b.eval(&x).unwrap(), vec![0.0, 0.0, 2.0]);
        }
    }

    #[test]
    fn piecewise_owning_piece_and_empty_region() {
        // |x1| written as two pieces: x1 > 0 -> x1, -x1 > 0 -> -x1
        let pw = PiecewiseVectorFieldDef::new(
            1,
            vec![
                Piece {
                    guards: vec![parse_expr("x1", 1).unwrap()],
                    field: field(1, &["x1"]),
                },
                Piece {
                    guards: vec![parse_expr("-x1", 1).unwrap()],
                    field: field(1, &["-x1"]),
                },
            ],
        )
        .unwrap();
        assert_eq!(pw.eval(&[2.0], 1e-12).unwrap(), vec![2.0]);
        assert_eq!(pw.eval(&[-2.0], 1e-12).unwrap(), vec![2.0]);
        // on the boundary both pieces own the point and agree
        assert_eq!(pw.pieces_at(&[0.0], 1e-12).unwrap(), vec![0, 1]);
        assert_eq!(pw.eval(&[0.0], 1e-12).unwrap(), vec![0.0]);

        let gated = PiecewiseVectorFieldDef::new(
            1,
            vec![Piece {
                guards: vec![parse_expr("x1 - 1", 1).unwrap()],
                field: field(1, &["1"]),
            }],
        )
        .unwrap();
        assert!(matches!(
            gated.eval(&[0.0], 1e-12),
            Err(FieldError::EmptyPieceSet)
        ));
    }
}
