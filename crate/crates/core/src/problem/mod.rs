//! Problem files: a TOML description of a control problem with its candidate
//! and an optional critical direction, or of a finite-dimensional problem.
//!
//! A file may start from a built-in preset (`preset = "ccs126"`); its own
//! keys are merged over the preset table by table. The resolved file has a
//! canonical TOML form whose SHA-256 digest identifies the input in reports.

mod build;

pub use build::{DirectionSetup, OcpSetup, OpSetup, Setup};

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::conditions::Tolerances;
use crate::error::{Error, Result};
use crate::expr::Expr;

pub const SCHEMA_VERSION: u32 = 1;

/// Built-in presets as `(name, source)`.
pub const PRESETS: &[(&str, &str)] = &[
    ("ccs126", include_str!("../../presets/ccs126.toml")),
    ("linear-lq-euclid", include_str!("../../presets/linear-lq-euclid.toml")),
    ("disc-op", include_str!("../../presets/disc-op.toml")),
];

/// A number, or an expression in the declared parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Scalar::Num(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    /// Mayer problem with endpoint constraints.
    Ocp,
    /// Integral cost with fixed endpoints, reduced to `Ocp` by augmentation.
    Ocpe,
    /// Finite-dimensional problem over a convex set.
    Op,
}

/// A condition on the parameters, satisfied when `expr > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hypothesis {
    pub expr: String,
    pub message: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartName {
    Euclidean,
    Sphere,
    Hyperbolic,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereCoordsName {
    Spherical,
    Stereographic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub kind: ChartName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<SphereCoordsName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curvature: Option<Scalar>,
    /// Rows of metric expressions in `x1..xn` (custom charts).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_unit: Option<usize>,
}

/// Expressions in `y1..yn`, `u1..um`, `t` and the parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSpec {
    pub f: Vec<String>,
    /// Integrand of the cost (`ocpe` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub running_cost: Option<String>,
}

/// `ocp`: expressions in `y0_1..y0_n`, `yT_1..yT_n` and the parameters.
/// `ocpe`: the fixed initial and terminal states.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inequalities: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equalities: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Scalar>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<Scalar>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SetSpec {
    Ball { center: Vec<Scalar>, radius: Scalar },
    /// Bounds may be the TOML floats `inf` / `-inf`.
    Box { lower: Vec<Scalar>, upper: Vec<Scalar> },
    /// `{u : a u <= b}`, `a` by rows.
    Polyhedron { a: Vec<Vec<Scalar>>, b: Vec<Scalar> },
    Product { parts: Vec<SetSpec> },
    Whole { dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub horizon: Scalar,
}

/// Controls are expressions in `t` and the parameters, sampled at interval
/// midpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<Vec<Scalar>>,
    pub u: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionSpec {
    /// Control perturbation, expressions in `t`.
    pub v: Vec<String>,
    #[serde(rename = "X0", default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<Scalar>>,
    /// Second-order initial perturbation; only enters the expansion check.
    #[serde(rename = "W", default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Scalar>>,
    /// Candidate second-order corrections, each a list of expressions in `t`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sigma: Vec<Vec<String>>,
    /// Report the second-order expansion residual of the best correction.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub expansion: bool,
}

/// Finite-dimensional problem in `e1..eN`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpSpec {
    pub set: SetSpec,
    pub objective: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inequalities: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub equalities: Vec<String>,
    pub point: Vec<Scalar>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Vec<Scalar>>,
    /// Grid spacing of an exhaustive search around `point` (`N <= 3`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bruteforce_resolution: Option<f64>,
    /// Number of random points checked against the separating multiplier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub separation_samples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub kind: ProblemKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hypotheses: Vec<Hypothesis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chart: Option<ChartSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<EndpointSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_set: Option<SetSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<CandidateSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<DirectionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub op: Option<OpSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// Outcome of one hypothesis for the current parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub message: String,
    pub value: f64,
    pub holds: bool,
}

impl ProblemFile {
    /// Parses a problem file, resolving a `preset` key if present.
    pub fn parse(text: &str) -> Result<ProblemFile> {
        let mut table: toml::Table = text.parse().map_err(|e| syntax_error(text, &e))?;
        let merged = match table.remove("preset") {
            None => table,
            Some(toml::Value::String(name)) => {
                let src = preset_source(&name)?;
                let mut base: toml::Table = src.parse().map_err(|e| syntax_error(src, &e))?;
                merge(&mut base, table);
                base
            }
            Some(_) => return Err(Error::input("preset", "expected a preset name")),
        };
        let file: ProblemFile = serde_path_to_error::deserialize(toml::Value::Table(merged)).map_err(|e| {
            let path = e.path().to_string();
            Error::input(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<ProblemFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        ProblemFile::parse(&text)
    }

    pub fn preset(name: &str) -> Result<ProblemFile> {
        ProblemFile::parse(preset_source(name)?)
    }

    /// Canonical TOML form; parsing it gives back an equal problem.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("problem files serialise to TOML")
    }

    /// Hex SHA-256 of [`Self::canonical`].
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Sets a declared parameter.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        match self.parameters.get_mut(name) {
            Some(v) => {
                *v = value;
                Ok(())
            }
            None => Err(Error::input(format!("parameters.{name}"), "parameter is not declared")),
        }
    }

    pub fn set_grid(&mut self, n: usize) -> Result<()> {
        match &mut self.grid {
            Some(g) if n > 0 => {
                g.n = n;
                Ok(())
            }
            Some(_) => Err(Error::input("grid.N", "grid size must be positive")),
            None => Err(Error::input("grid", "problem has no grid")),
        }
    }

    pub(crate) fn constants(&self) -> Vec<(String, f64)> {
        self.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn check_hypotheses(&self) -> Result<Vec<HypothesisCheck>> {
        let consts = self.constants();
        self.hypotheses
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let value = eval_scalar(&Scalar::Expr(h.expr.clone()), &consts, &format!("hypotheses[{i}].expr"))?;
                Ok(HypothesisCheck {
                    message: h.message.clone(),
                    value,
                    holds: value > 0.0,
                })
            })
            .collect()
    }

    /// Structural checks that do not need the problem to be built.
    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::input(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        for (name, v) in &self.parameters {
            if !v.is_finite() {
                return Err(Error::input(format!("parameters.{name}"), "parameter must be finite"));
            }
            if !is_identifier(name) {
                return Err(Error::input(format!("parameters.{name}"), "not a valid identifier"));
            }
        }
        let need = |present: bool, path: &str| {
            if present {
                Ok(())
            } else {
                Err(Error::input(path, format!("missing for kind {:?}", self.kind).to_lowercase()))
            }
        };
        match self.kind {
            ProblemKind::Ocp | ProblemKind::Ocpe => {
                need(self.chart.is_some(), "chart")?;
                need(self.dynamics.is_some(), "dynamics")?;
                need(self.endpoint.is_some(), "endpoint")?;
                need(self.control_set.is_some(), "control_set")?;
                need(self.grid.is_some(), "grid")?;
                need(self.candidate.is_some(), "candidate")?;
                if self.op.is_some() {
                    return Err(Error::input("op", "only allowed for kind op"));
                }
            }
            ProblemKind::Op => {
                need(self.op.is_some(), "op")?;
                for (present, path) in [
                    (self.chart.is_some(), "chart"),
                    (self.dynamics.is_some(), "dynamics"),
                    (self.endpoint.is_some(), "endpoint"),
                    (self.control_set.is_some(), "control_set"),
                    (self.grid.is_some(), "grid"),
                    (self.candidate.is_some(), "candidate"),
                    (self.direction.is_some(), "direction"),
                ] {
                    if present {
                        return Err(Error::input(path, "not allowed for kind op"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl SetSpec {
    /// Parses an inline TOML table such as
    /// `{ kind = "ball", center = [0, 0], radius = 1 }`.
    pub fn parse_inline(text: &str) -> Result<SetSpec> {
        #[derive(Deserialize)]
        struct Wrap {
            set: SetSpec,
        }
        let src = format!("set = {text}");
        let table: toml::Table = src.parse().map_err(|e| syntax_error(&src, &e))?;
        serde_path_to_error::deserialize::<_, Wrap>(toml::Value::Table(table))
            .map(|w| w.set)
            .map_err(|e| Error::input(e.path().to_string(), e.into_inner().to_string()))
    }
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

fn preset_source(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| Error::input("preset", format!("unknown preset {name:?}; known: {}", preset_names().join(", "))))
}

/// Merges `over` into `base`: tables recursively, everything else replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn syntax_error(text: &str, e: &toml::de::Error) -> Error {
    let path = match e.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {col}")
        }
        None => "<input>".into(),
    };
    Error::input(path, e.message().to_string())
}

fn is_identifier(s: &str) -> bool {
    let mut c = s.chars();
    c.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_') && c.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Re-tags expression errors with the field they came from.
pub(crate) fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Expr { pos, message } => Error::input(path, format!("at byte {pos}: {message}")),
        other => other,
    }
}

pub(crate) fn eval_scalar(s: &Scalar, consts: &[(String, f64)], path: &str) -> Result<f64> {
    let v = match s {
        Scalar::Num(x) => *x,
        Scalar::Expr(src) => {
            let c: Vec<(&str, f64)> = consts.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            Expr::parse_with(src, &[], &c).map_err(|e| at(path, e))?.eval(&[])
        }
    };
    if v.is_nan() {
        return Err(Error::input(path, "evaluates to NaN"));
    }
    Ok(v)
}

pub(crate) fn eval_vec(s: &[Scalar], consts: &[(String, f64)], path: &str) -> Result<Vec<f64>> {
    s.iter()
        .enumerate()
        .map(|(i, x)| eval_scalar(x, consts, &format!("{path}[{i}]")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip() {
        for name in preset_names() {
            let p = ProblemFile::preset(name).unwrap();
            let again = ProblemFile::parse(&p.canonical()).unwrap();
            assert_eq!(p, again, "{name}");
            assert_eq!(p.digest(), again.digest());
            assert_eq!(p.digest().len(), 64);
        }
    }

    #[test]
    fn preset_overrides_merge() {
        let p = ProblemFile::parse("preset = \"ccs126\"\n[parameters]\nT = 0.3\n[grid]\nN = 40\n").unwrap();
        assert_eq!(p.parameters["T"], 0.3);
        assert_eq!(p.parameters["theta"], 3.0);
        assert_eq!(p.grid.as_ref().unwrap().n, 40);
        assert!(matches!(p.grid.unwrap().horizon, Scalar::Expr(_)));
    }

    #[test]
    fn diagnostics_name_the_field() {
        let err = |src: &str| match ProblemFile::parse(src) {
            Err(Error::Input { path, .. }) => path,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("preset = \"ccs126\"\n[control_set]\nkind = \"disc\"\n"), "control_set.kind");
        assert_eq!(err("preset = \"ccs126\"\n[grid]\nN = -3\n"), "grid.N");
        assert_eq!(err("preset = \"ccs126\"\n[tolerances]\nact = 1\n"), "tolerances.act");
        assert_eq!(err("schema_version = 2\nkind = \"op\"\n"), "schema_version");
        assert_eq!(err("kind = \n"), "line 1, column 8");
        assert_eq!(err("preset = \"nope\"\n"), "preset");
    }

    #[test]
    fn hypotheses_are_evaluated() {
        let mut p = ProblemFile::preset("ccs126").unwrap();
        assert!(p.check_hypotheses().unwrap().iter().all(|h| h.holds));
        p.set_parameter("theta", 2.0).unwrap();
        let h = p.check_hypotheses().unwrap();
        assert!(h.iter().any(|h| !h.holds && h.message == "theta > 2"));
        assert!(p.set_parameter("gamma", 1.0).is_err());
    }
}
