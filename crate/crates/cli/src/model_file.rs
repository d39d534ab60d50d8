//! Model JSON, `format_version` 1.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "p": 2, "q": 1,
//!   "hidden_activation": "logistic",
//!   "output_activation": "identity",
//!   "theta": [...],
//!   "lambda": 0.01,
//!   "column_meta": [{"name": "age", "kind": "continuous", "mean": ..., "sd": ...}],
//!   "response_meta": {"name": "charges", "mean": ..., "sd": ...}
//! }
//! ```
//!
//! Floats are written with 17 significant digits so they read back exactly.

use serde::ser::Error as _;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use fnnstat_core::likelihood::Family;
use fnnstat_core::{Architecture, ColumnKind, ColumnMeta, OutputActivation, ParamVector, ResponseMeta};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

fn f17<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if !v.is_finite() {
        return Err(S::Error::custom(format!("cannot store non-finite value {v}")));
    }
    let raw = RawValue::from_string(format!("{v:.16e}")).map_err(S::Error::custom)?;
    raw.serialize(s)
}

fn f17_vec<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    struct F(f64);
    impl Serialize for F {
        fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
            f17(&self.0, s)
        }
    }
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        seq.serialize_element(&F(*x))?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMetaJson {
    pub name: String,
    pub kind: String,
    #[serde(serialize_with = "f17")]
    pub mean: f64,
    #[serde(serialize_with = "f17")]
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMetaJson {
    pub name: String,
    #[serde(serialize_with = "f17")]
    pub mean: f64,
    #[serde(serialize_with = "f17")]
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub p: usize,
    pub q: usize,
    pub hidden_activation: String,
    pub output_activation: String,
    #[serde(serialize_with = "f17_vec")]
    pub theta: Vec<f64>,
    #[serde(serialize_with = "f17")]
    pub lambda: f64,
    pub column_meta: Vec<ColumnMetaJson>,
    pub response_meta: Option<ResponseMetaJson>,
}

/// A loaded model, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub theta: ParamVector,
    pub lambda: f64,
    pub column_meta: Vec<ColumnMeta>,
    pub response_meta: Option<ResponseMeta>,
}

impl Model {
    pub fn family(&self) -> Family {
        Family::from_output(self.arch.output_activation)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            format_version: FORMAT_VERSION,
            p: self.arch.p(),
            q: self.arch.q(),
            hidden_activation: "logistic".into(),
            output_activation: self.arch.output_activation.name().into(),
            theta: self.theta.as_slice().to_vec(),
            lambda: self.lambda,
            column_meta: self
                .column_meta
                .iter()
                .map(|m| ColumnMetaJson {
                    name: m.name.clone(),
                    kind: kind_name(m.kind).into(),
                    mean: m.mean,
                    sd: m.sd,
                })
                .collect(),
            response_meta: self.response_meta.as_ref().map(|m| ResponseMetaJson {
                name: m.name.clone(),
                mean: m.mean,
                sd: m.sd,
            }),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_file())?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(file)
    }

    pub fn from_file(f: ModelFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(CliError::Input(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                f.format_version
            )));
        }
        if f.hidden_activation != "logistic" {
            return Err(CliError::Input(format!("unsupported hidden activation '{}'", f.hidden_activation)));
        }
        let output = match f.output_activation.as_str() {
            "identity" => OutputActivation::Identity,
            "logistic" => OutputActivation::Logistic,
            other => return Err(CliError::Input(format!("unsupported output activation '{other}'"))),
        };
        let arch = Architecture::new(f.p, f.q, output)?;
        let theta = ParamVector::from_vec(&arch, f.theta)?;
        if theta.as_slice().iter().any(|v| !v.is_finite()) {
            return Err(CliError::Input("model parameters must be finite".into()));
        }
        if !(f.lambda >= 0.0) || !f.lambda.is_finite() {
            return Err(CliError::Input(format!("model lambda must be finite and >= 0, got {}", f.lambda)));
        }
        if f.column_meta.len() != f.p {
            return Err(CliError::Input(format!("model has {} column_meta entries for p = {}", f.column_meta.len(), f.p)));
        }
        let column_meta = f
            .column_meta
            .into_iter()
            .map(|m| {
                let kind = match m.kind.as_str() {
                    "continuous" => ColumnKind::Continuous,
                    "dummy" => ColumnKind::Dummy,
                    other => return Err(CliError::Input(format!("unknown column kind '{other}'"))),
                };
                if !(m.sd > 0.0) || !m.sd.is_finite() || !m.mean.is_finite() {
                    return Err(CliError::Input(format!("column '{}' has invalid mean/sd", m.name)));
                }
                Ok(ColumnMeta {
                    name: m.name,
                    kind,
                    mean: m.mean,
                    sd: m.sd,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let response_meta = match f.response_meta {
            Some(m) if !(m.sd > 0.0) || !m.sd.is_finite() || !m.mean.is_finite() => {
                return Err(CliError::Input("response_meta has invalid mean/sd".into()));
            }
            Some(m) => Some(ResponseMeta {
                name: m.name,
                mean: m.mean,
                sd: m.sd,
            }),
            None => None,
        };
        Ok(Self {
            arch,
            theta,
            lambda: f.lambda,
            column_meta,
            response_meta,
        })
    }
}

pub fn kind_name(kind: ColumnKind) -> &'static str {
    match kind {
        ColumnKind::Continuous => "continuous",
        ColumnKind::Dummy => "dummy",
    }
}
