//! Model files: `{"schema_version": 1, "kind": ..., "payload": {...}}`.

use cpsemi::friedrichs_wcl::Profile;
use cpsemi::ComplexMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Lindblad,
    Classical,
    Friedrichs,
    PauliFierz,
    ToyDilation,
    Langevin,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Lindblad => "lindblad",
            Kind::Classical => "classical",
            Kind::Friedrichs => "friedrichs",
            Kind::PauliFierz => "pauli_fierz",
            Kind::ToyDilation => "toy_dilation",
            Kind::Langevin => "langevin",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}, column {column}, field `{path}`: {message}")]
    Field {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("unsupported schema_version {0} (this build reads version {SCHEMA_VERSION})")]
    SchemaVersion(u32),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Envelope<'a> {
    schema_version: u32,
    kind: Kind,
    #[serde(borrow)]
    payload: &'a RawValue,
}

/// Radial cut-off r and point count n of a symmetric reservoir grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub r: f64,
    #[serde(alias = "n_pts")]
    pub n: usize,
}

/// Either an explicit density matrix or a Gibbs state of K at inverse temperature β.
#[derive(Clone, Debug, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub rho: Option<ComplexMatrix>,
    pub k: Option<ComplexMatrix>,
    pub beta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladPayload {
    pub dim: Option<usize>,
    pub theta: Option<ComplexMatrix>,
    pub delta: Option<ComplexMatrix>,
    #[serde(default)]
    pub nu: Vec<ComplexMatrix>,
    /// Asserts 2Δ = Σ ν_j* ν_j.
    #[serde(default)]
    pub markov: bool,
    pub state: Option<StateSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalPayload {
    pub m: Vec<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalSpec {
    pub k: f64,
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    /// h×d coupling operator; defaults to the eigenvector rows of K at k.
    pub op: Option<ComplexMatrix>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtendedSpec {
    pub du: Option<f64>,
    pub n_ref: Option<usize>,
    pub window: Option<f64>,
}

fn default_friedrichs_lambdas() -> Vec<f64> {
    vec![0.5, 0.35, 0.25]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FriedrichsPayload {
    pub k: ComplexMatrix,
    pub intervals: Vec<IntervalSpec>,
    #[serde(default = "default_friedrichs_lambdas")]
    pub lambda_schedule: Vec<f64>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub t0: f64,
    pub extended: Option<ExtendedSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BohrSpec {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    pub ops: Vec<ComplexMatrix>,
}

/// Emission window (a, b) around ω > 0 plus its mirrored absorption window, weighted at the model β.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalSpec {
    pub omega: f64,
    pub a: f64,
    pub b: f64,
    pub profile: Profile,
    pub ops: Vec<ComplexMatrix>,
}

fn default_pf_lambdas() -> Vec<f64> {
    vec![0.6, 0.45]
}

fn default_cells() -> usize {
    8
}

fn two() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PauliFierzPayload {
    pub k: ComplexMatrix,
    #[serde(default)]
    pub bohr: Vec<BohrSpec>,
    #[serde(default)]
    pub thermal: Vec<ThermalSpec>,
    pub beta: Option<f64>,
    pub observable: Option<ComplexMatrix>,
    #[serde(default = "default_pf_lambdas")]
    pub lambda_schedule: Vec<f64>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "two")]
    pub n_max: usize,
    /// D1, D1′, D2, D2′ of the two-point KMS identity.
    pub kms_ops: Option<[ComplexMatrix; 4]>,
    pub state: Option<StateSpec>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToyPayload {
    pub upsilon: ComplexMatrix,
    pub nu: Option<ComplexMatrix>,
    pub grids: Vec<GridSpec>,
    #[serde(default = "one")]
    pub t: f64,
    /// Resolvent comparison point as [re, im].
    pub resolvent_z: Option<[f64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinPayload {
    pub upsilon: ComplexMatrix,
    pub nu: Vec<ComplexMatrix>,
    pub grids: Vec<GridSpec>,
    #[serde(default = "two")]
    pub n_max: usize,
    #[serde(default = "one")]
    pub t: f64,
    pub observable: Option<ComplexMatrix>,
    pub k: Option<ComplexMatrix>,
    pub y: Option<ComplexMatrix>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Lindblad(LindbladPayload),
    Classical(ClassicalPayload),
    Friedrichs(FriedrichsPayload),
    PauliFierz(PauliFierzPayload),
    ToyDilation(ToyPayload),
    Langevin(LangevinPayload),
}

impl Model {
    pub fn kind(&self) -> Kind {
        match self {
            Model::Lindblad(_) => Kind::Lindblad,
            Model::Classical(_) => Kind::Classical,
            Model::Friedrichs(_) => Kind::Friedrichs,
            Model::PauliFierz(_) => Kind::PauliFierz,
            Model::ToyDilation(_) => Kind::ToyDilation,
            Model::Langevin(_) => Kind::Langevin,
        }
    }
}

/// 1-based (line, column) of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, column)
}

fn field_error(path: String, err: serde_json::Error, line: usize, column: usize) -> ParseError {
    let message = err.to_string();
    let message = match message.rfind(" at line ") {
        Some(p) => message[..p].to_string(),
        None => message,
    };
    if path.is_empty() || path == "." {
        ParseError::Syntax { line, column, message }
    } else {
        ParseError::Field {
            line,
            column,
            path,
            message,
        }
    }
}

fn payload<T: DeserializeOwned>(text: &str, raw: &RawValue) -> Result<T, ParseError> {
    let sub = raw.get();
    let offset = sub.as_ptr() as usize - text.as_ptr() as usize;
    let (l0, c0) = position(text, offset);
    let mut de = serde_json::Deserializer::from_str(sub);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = if inner.line() <= 1 {
            (l0, c0 + inner.column().saturating_sub(1))
        } else {
            (l0 + inner.line() - 1, inner.column())
        };
        field_error(format!("payload.{path}").trim_end_matches('.').to_string(), inner, line, column)
    })
}

/// Parses and schema-checks a model file; unknown fields are rejected.
pub fn parse_model_str(text: &str) -> Result<Model, ParseError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let env: Envelope = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let (line, column) = (inner.line(), inner.column());
        field_error(path, inner, line, column)
    })?;
    de.end().map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: "trailing characters after the model object".into(),
    })?;
    if env.schema_version != SCHEMA_VERSION {
        return Err(ParseError::SchemaVersion(env.schema_version));
    }
    Ok(match env.kind {
        Kind::Lindblad => Model::Lindblad(payload(text, env.payload)?),
        Kind::Classical => Model::Classical(payload(text, env.payload)?),
        Kind::Friedrichs => Model::Friedrichs(payload(text, env.payload)?),
        Kind::PauliFierz => Model::PauliFierz(payload(text, env.payload)?),
        Kind::ToyDilation => Model::ToyDilation(payload(text, env.payload)?),
        Kind::Langevin => Model::Langevin(payload(text, env.payload)?),
    })
}
