//! JSON system configuration: parsing with positioned diagnostics, emission
//! for round-trip fidelity, and compilation into runnable objects.

use crate::clf::{CLFCandidate, TargetDef, DEFAULT_ACTIVITY_TOL};
use crate::expr::parse_expr;
use crate::field::{Generator, Piece, PiecewiseVectorFieldDef, VectorFieldDef};
use crate::hamiltonian::{Smoothness, SystemDef, DEFAULT_BOUNDARY_TOL, DEFAULT_EPS_DRIFT};
use crate::sample::{AxisTube, RegionSpec};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One problem found while parsing or validating a configuration, with the
/// JSON path and, for expression errors, the column inside the expression.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
    pub line: Option<usize>,
    pub col: Option<usize>,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)?;
        if let (Some(l), Some(c)) = (self.line, self.col) {
            write!(f, " (line {l}, column {c})")?;
        } else if let Some(c) = self.col {
            write!(f, " (column {c})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub diagnostics: Vec<Diagnostic>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.diagnostics {
            writeln!(f, "{d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

/// A generator: smooth components or guarded pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GeneratorConfig {
    Smooth { components: Vec<String> },
    Piecewise { pieces: Vec<PieceConfig> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PieceConfig {
    /// Strict sign conditions `g(x) > 0` delimiting the piece.
    pub guards: Vec<String>,
    pub components: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessConfig {
    #[default]
    Smooth,
    Lipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    Ball { center: Vec<f64>, radius: f64 },
    SignedDistance { expr: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClfConfig {
    DistanceToBall {
        center: Vec<f64>,
        radius: f64,
    },
    Smooth {
        expr: String,
    },
    MaxOfSmooth {
        exprs: Vec<String>,
        #[serde(default = "default_activity_tol")]
        activity_tol: f64,
    },
}

fn default_activity_tol() -> f64 {
    DEFAULT_ACTIVITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeConfig {
    /// 1-based coordinate axis around which the tube is removed.
    pub axis: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub u_min: f64,
    pub u_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclude_tube: Option<TubeConfig>,
}

/// Numeric knobs; every field has a default so fixtures stay terse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Knobs {
    /// Verification sample count.
    pub samples: usize,
    /// Bound on field norms over the region (caps trial step durations and
    /// pays for inter-checkpoint motion in the envelope).
    pub m_hat: f64,
    /// Drift-vanishing tolerance.
    pub eps_drift: f64,
    /// Guard-boundary tolerance.
    pub boundary_tol: f64,
    /// Integrator substeps per word segment.
    pub substeps: usize,
    /// Step-size halvings before giving up.
    pub max_halvings: usize,
    /// Dense-path recording stride in substeps.
    pub record_stride: usize,
    /// Margin-estimation level count.
    pub levels: usize,
    /// Margin-estimation samples per level.
    pub samples_per_level: usize,
    /// Target distance at which synthesis stops.
    pub eps_d: f64,
    pub max_steps: usize,
    pub seed: u64,
    /// Default synthesis start point.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Certificate level count.
    pub kl_levels: usize,
    /// Certificate region samples.
    pub kl_samples: usize,
    /// Durations probed by the asymptotic-order check.
    pub t_list: Vec<f64>,
    /// Base point for the asymptotic-order check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub asym_point: Option<Vec<f64>>,
}

impl Default for Knobs {
    fn default() -> Self {
        Self {
            samples: 10_000,
            m_hat: 4.0,
            eps_drift: DEFAULT_EPS_DRIFT,
            boundary_tol: DEFAULT_BOUNDARY_TOL,
            substeps: 32,
            max_halvings: 40,
            record_stride: 8,
            levels: 16,
            samples_per_level: 60,
            eps_d: 0.05,
            max_steps: 30_000,
            seed: 0,
            x0: None,
            kl_levels: 24,
            kl_samples: 2000,
            t_list: vec![0.1, 0.05, 0.025, 0.0125, 0.01],
            asym_point: None,
        }
    }
}

/// The full system configuration as stored in fixture files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub dim: usize,
    pub generators: Vec<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<Vec<String>>,
    pub degree: usize,
    #[serde(default)]
    pub smoothness: SmoothnessConfig,
    pub target: TargetConfig,
    pub clf: ClfConfig,
    pub region: RegionConfig,
    #[serde(default)]
    pub knobs: Knobs,
}

fn push(diags: &mut Vec<Diagnostic>, path: &str, message: &str) {
    diags.push(Diagnostic {
        path: path.to_string(),
        message: message.to_string(),
        line: None,
        col: None,
    });
}

fn expr_at(
    diags: &mut Vec<Diagnostic>,
    dim: usize,
    path: &str,
    src: &str,
) -> Option<crate::expr::ScalarExpr> {
    match parse_expr(src, dim) {
        Ok(e) => Some(e),
        Err(err) => {
            diags.push(Diagnostic {
                path: path.to_string(),
                message: err.msg,
                line: None,
                col: Some(err.col),
            });
            None
        }
    }
}

fn field_of(
    diags: &mut Vec<Diagnostic>,
    dim: usize,
    path: &str,
    comps: &[String],
) -> Option<VectorFieldDef> {
    if comps.len() != dim {
        push(
            diags,
            path,
            &format!("{} components for dimension {dim}", comps.len()),
        );
        return None;
    }
    let mut exprs = Vec::with_capacity(dim);
    for (i, c) in comps.iter().enumerate() {
        exprs.push(expr_at(diags, dim, &format!("{path}[{i}]"), c)?);
    }
    VectorFieldDef::new(dim, exprs).ok()
}

/// Parses a configuration, reporting syntax errors with line positions and
/// semantic problems with their JSON path.
pub fn parse_config(text: &str) -> Result<SystemConfig, ConfigError> {
    let cfg: SystemConfig = serde_json::from_str(text).map_err(|e| ConfigError {
        diagnostics: vec![Diagnostic {
            path: "$".into(),
            message: e.to_string(),
            line: Some(e.line()),
            col: Some(e.column()),
        }],
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Emits a configuration as pretty JSON with sorted keys; `parse_config` of
/// the output reproduces the input exactly.
pub fn emit_config(cfg: &SystemConfig) -> String {
    let value = serde_json::to_value(cfg).expect("config serializes");
    serde_json::to_string_pretty(&value).expect("json prints")
}

/// Everything compiled and ready to run.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    pub sys: SystemDef,
    pub clf: CLFCandidate,
    pub target: TargetDef,
    pub region: RegionSpec,
    pub knobs: Knobs,
}

impl SystemConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        self.compile().map(|_| ())
    }

    /// Compiles every expression and assembles the system, collecting all
    /// diagnostics instead of stopping at the first.
    pub fn compile(&self) -> Result<CompiledSystem, ConfigError> {
        let mut diags: Vec<Diagnostic> = Vec::new();
        let n = self.dim;

        if self.generators.is_empty() {
            push(&mut diags, "$.generators", "at least one generator required");
        }
        let mut generators = Vec::new();
        for (gi, g) in self.generators.iter().enumerate() {
            match g {
                GeneratorConfig::Smooth { components } => {
                    if let Some(f) = field_of(
                        &mut diags,
                        n,
                        &format!("$.generators[{gi}].components"),
                        components,
                    ) {
                        generators.push(Generator::Smooth(f));
                    }
                }
                GeneratorConfig::Piecewise { pieces } => {
                    let mut built = Vec::new();
                    for (pi, piece) in pieces.iter().enumerate() {
                        let base = format!("$.generators[{gi}].pieces[{pi}]");
                        let field = field_of(
                            &mut diags,
                            n,
                            &format!("{base}.components"),
                            &piece.components,
                        );
                        let mut guards = Vec::new();
                        for (qi, q) in piece.guards.iter().enumerate() {
                            if let Some(e) =
                                expr_at(&mut diags, n, &format!("{base}.guards[{qi}]"), q)
                            {
                                guards.push(e);
                            }
                        }
                        if let Some(field) = field {
                            built.push(Piece { guards, field });
                        }
                    }
                    if let Ok(pw) = PiecewiseVectorFieldDef::new(n, built) {
                        generators.push(Generator::Piecewise(pw));
                    }
                }
            }
        }

        let drift = match &self.drift {
            Some(comps) => field_of(&mut diags, n, "$.drift", comps),
            None => None,
        };

        let clf = match &self.clf {
            ClfConfig::DistanceToBall { center, radius } => {
                if center.len() != n {
                    push(
                        &mut diags,
                        "$.clf.center",
                        &format!("{} coordinates for dimension {n}", center.len()),
                    );
                }
                if *radius < 0.0 {
                    push(&mut diags, "$.clf.radius", "radius must be nonnegative");
                }
                CLFCandidate::DistanceToBall {
                    center: center.clone(),
                    radius: radius.max(0.0),
                }
            }
            ClfConfig::Smooth { expr } => CLFCandidate::SmoothExpr {
                expr: expr_at(&mut diags, n, "$.clf.expr", expr)
                    .unwrap_or(crate::expr::ScalarExpr::Const(0.0)),
            },
            ClfConfig::MaxOfSmooth {
                exprs,
                activity_tol,
            } => {
                let mut pieces = Vec::new();
                for (i, e) in exprs.iter().enumerate() {
                    if let Some(p) = expr_at(&mut diags, n, &format!("$.clf.exprs[{i}]"), e) {
                        pieces.push(p);
                    }
                }
                CLFCandidate::MaxOfSmooth {
                    pieces,
                    activity_tol: *activity_tol,
                }
            }
        };

        let target = match &self.target {
            TargetConfig::Ball { center, radius } => {
                if center.len() != n {
                    push(
                        &mut diags,
                        "$.target.center",
                        &format!("{} coordinates for dimension {n}", center.len()),
                    );
                }
                TargetDef::Ball {
                    center: center.clone(),
                    radius: *radius,
                }
            }
            TargetConfig::SignedDistance { expr } => TargetDef::SignedDistance {
                expr: expr_at(&mut diags, n, "$.target.expr", expr)
                    .unwrap_or(crate::expr::ScalarExpr::Const(0.0)),
            },
        };

        if self.region.lo.len() != n || self.region.hi.len() != n {
            push(
                &mut diags,
                "$.region",
                &format!("region box must have {n} coordinate ranges"),
            );
        }
        if let Some(x0) = &self.knobs.x0 {
            if x0.len() != n {
                push(
                    &mut diags,
                    "$.knobs.x0",
                    &format!("{} coordinates for dimension {n}", x0.len()),
                );
            }
        }

        if !diags.is_empty() {
            return Err(ConfigError { diagnostics: diags });
        }

        let smoothness = match self.smoothness {
            SmoothnessConfig::Smooth => Smoothness::Smooth,
            SmoothnessConfig::Lipschitz => Smoothness::Lipschitz,
        };
        let sys = SystemDef::new(n, generators, drift, self.degree, smoothness)
            .map_err(|e| ConfigError {
                diagnostics: vec![Diagnostic {
                    path: "$".into(),
                    message: e.to_string(),
                    line: None,
                    col: None,
                }],
            })?
            .with_eps_drift(self.knobs.eps_drift)
            .with_boundary_tol(self.knobs.boundary_tol);

        let region = RegionSpec {
            lo: self.region.lo.clone(),
            hi: self.region.hi.clone(),
            u_min: self.region.u_min,
            u_max: self.region.u_max,
            exclude_tube: self.region.exclude_tube.as_ref().map(|t| AxisTube {
                axis: t.axis,
                radius: t.radius,
            }),
        };

        Ok(CompiledSystem {
            sys,
            clf,
            target,
            region,
            knobs: self.knobs.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal(dim: usize) -> SystemConfig {
        SystemConfig {
            dim,
            generators: vec![GeneratorConfig::Smooth {
                components: vec!["1".into(); dim],
            }],
            drift: None,
            degree: 1,
            smoothness: SmoothnessConfig::Smooth,
            target: TargetConfig::Ball {
                center: vec![0.0; dim],
                radius: 0.0,
            },
            clf: ClfConfig::DistanceToBall {
                center: vec![0.0; dim],
                radius: 0.0,
            },
            region: RegionConfig {
                lo: vec![-1.0; dim],
                hi: vec![1.0; dim],
                u_min: 0.0,
                u_max: 1.0,
                exclude_tube: None,
            },
            knobs: Knobs::default(),
        }
    }

    #[test]
    fn emit_then_parse_is_identity() {
        let mut cfg = minimal(3);
        cfg.generators.push(GeneratorConfig::Piecewise {
            pieces: vec![PieceConfig {
                guards: vec!["x1".into()],
                components: vec!["x1".into(), "0".into(), "1".into()],
            }],
        });
        cfg.smoothness = SmoothnessConfig::Lipschitz;
        cfg.knobs.x0 = Some(vec![0.0, 0.0, 2.0]);
        cfg.knobs.seed = 9;
        let text = emit_config(&cfg);
        let back = parse_config(&text).unwrap();
        assert_eq!(cfg, back);
        // and emission is stable
        assert_eq!(text, emit_config(&back));
    }

    #[test]
    fn syntax_errors_carry_line_positions() {
        let err = parse_config("{\n  \"dim\": 3,\n  oops\n}").unwrap_err();
        assert_eq!(err.diagnostics.len(), 1);
        assert_eq!(err.diagnostics[0].line, Some(3));
    }

    #[test]
    fn empty_generator_list_is_diagnosed() {
        let mut cfg = minimal(2);
        cfg.generators.clear();
        let err = parse_config(&emit_config(&cfg)).unwrap_err();
        assert!(err
            .diagnostics
            .iter()
            .any(|d| d.message.contains("at least one generator")));
    }

    #[test]
    fn bad_expressions_are_located() {
        let mut cfg = minimal(2);
        cfg.generators = vec![GeneratorConfig::Smooth {
            components: vec!["x1".into(), "x9 + 1".into()],
        }];
        let err = parse_config(&emit_config(&cfg)).unwrap_err();
        let d = &err.diagnostics[0];
        assert_eq!(d.path, "$.generators[0].components[1]");
        assert!(d.message.contains("out of range"));
        assert_eq!(d.col, Some(1));
    }

    #[test]
    fn dimension_mismatches_are_diagnosed() {
        let mut cfg = minimal(3);
        cfg.generators = vec![GeneratorConfig::Smooth {
            components: vec!["1".into(), "0".into()],
        }];
        cfg.knobs.x0 = Some(vec![1.0]);
        let err = parse_config(&emit_config(&cfg)).unwrap_err();
        assert!(err.diagnostics.len() >= 2);
    }

    #[test]
    fn compiles_drift_system() {
        let mut cfg = minimal(2);
        cfg.generators = vec![GeneratorConfig::Smooth {
            components: vec!["0".into(), "1".into()],
        }];
        cfg.drift = Some(vec!["x2".into(), "0".into()]);
        cfg.degree = 2;
        let built = cfg.compile().unwrap();
        assert!(built.sys.drift().is_some());
        assert_eq!(built.sys.max_degree(), 2);
    }
}
