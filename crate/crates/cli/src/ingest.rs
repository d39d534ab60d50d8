//! CSV ingestion: factor dummy encoding, standardization and the plan that
//! records both.
//!
//! A column is numeric when every cell parses as a finite number and the
//! schema does not list it as a factor. Numeric columns holding only 0 and 1
//! are kept as dummies; other numeric columns are standardized with the
//! sample sd. Factors are encoded against a reference level (the first level
//! in file order unless the schema pins one) into `variable.level` columns.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use fnnstat_core::effects::sample_sd;
use fnnstat_core::{ColumnKind, ColumnMeta, Dataset, ResponseMeta};

use crate::error::{CliError, Result};

const MISSING: [&str; 6] = ["", "NA", "na", "NaN", "nan", "null"];

/// Optional per-file overrides, read from JSON.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    #[serde(default)]
    pub response: Option<String>,
    /// Multiplies the raw response before anything else (e.g. 0.001 for
    /// dollars to thousands).
    #[serde(default)]
    pub response_scale: Option<f64>,
    /// Columns treated as factors even when numeric.
    #[serde(default)]
    pub factors: Vec<String>,
    /// Reference level per factor.
    #[serde(default)]
    pub reference: BTreeMap<String, String>,
    /// Full level order per factor; the first is the default reference.
    #[serde(default)]
    pub levels: BTreeMap<String, Vec<String>>,
    /// Model column renames, applied after encoding (`"smoker.yes": "smoker"`).
    #[serde(default)]
    pub rename: BTreeMap<String, String>,
    /// Raw columns to ignore.
    #[serde(default)]
    pub drop: Vec<String>,
}

impl Schema {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestOptions {
    /// Response column; falls back to the schema's.
    pub response: Option<String>,
    pub standardize_covariates: bool,
    pub standardize_response: bool,
    pub schema: Schema,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            response: None,
            standardize_covariates: true,
            standardize_response: true,
            schema: Schema::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ColumnAction {
    Standardize { mean: f64, sd: f64 },
    Passthrough,
    DummyEncode { reference: String, levels: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanColumn {
    pub source: String,
    #[serde(flatten)]
    pub action: ColumnAction,
    /// Model columns produced, in order.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResponsePlan {
    pub source: String,
    pub scale: f64,
    #[serde(flatten)]
    pub action: ColumnAction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessPlan {
    pub columns: Vec<PlanColumn>,
    pub response: ResponsePlan,
}

impl PreprocessPlan {
    /// Model column names in design order.
    pub fn model_columns(&self) -> Vec<&str> {
        self.columns.iter().flat_map(|c| c.outputs.iter().map(String::as_str)).collect()
    }
}

/// Encoded but unstandardized design.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDesign {
    pub names: Vec<String>,
    pub kinds: Vec<ColumnKind>,
    /// Row-major, `n × names.len()`.
    pub x: Vec<f64>,
    /// Response after scaling.
    pub y: Vec<f64>,
    pub response: String,
    pub response_scale: f64,
    columns: Vec<PlanColumn>,
}

impl RawDesign {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.p();
        (0..self.n()).map(|i| self.x[i * p + j]).collect()
    }
}

enum Parsed {
    Numeric(Vec<f64>),
    Factor(Vec<String>),
}

/// Reads and encodes a CSV file.
pub fn read_design(path: &Path, options: &IngestOptions) -> Result<RawDesign> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    read_design_from(file, options).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn read_design_from<R: Read>(reader: R, options: &IngestOptions) -> Result<RawDesign> {
    let schema = &options.schema;
    let response = options
        .response
        .clone()
        .or_else(|| schema.response.clone())
        .ok_or_else(|| CliError::Input("no response column given (use --response or a schema)".into()))?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() {
        return Err(CliError::Input("empty header".into()));
    }
    for (i, h) in header.iter().enumerate() {
        if header[..i].contains(h) {
            return Err(CliError::Input(format!("duplicate column '{h}'")));
        }
    }
    let response_col = header
        .iter()
        .position(|h| *h == response)
        .ok_or_else(|| CliError::Input(format!("unknown response column '{response}' (columns: {})", header.join(", "))))?;
    for name in schema.drop.iter().chain(&schema.factors).chain(schema.reference.keys()).chain(schema.levels.keys()) {
        if !header.contains(name) {
            return Err(CliError::Input(format!("schema names unknown column '{name}'")));
        }
    }

    let mut cells: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut missing = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(CliError::Input(format!(
                "row {} has {} fields, expected {}",
                row + 1,
                record.len(),
                header.len()
            )));
        }
        for (j, value) in record.iter().enumerate() {
            if MISSING.contains(&value) && !schema.drop.contains(&header[j]) {
                missing.push(format!("row {} column '{}'", row + 1, header[j]));
            }
            cells[j].push(value.to_string());
        }
    }
    if !missing.is_empty() {
        let shown = missing.iter().take(10).cloned().collect::<Vec<_>>().join(", ");
        let more = if missing.len() > 10 { format!(" and {} more", missing.len() - 10) } else { String::new() };
        return Err(CliError::Input(format!("missing values at {shown}{more}")));
    }
    let n = cells[0].len();
    if n == 0 {
        return Err(CliError::Input("no data rows".into()));
    }

    let parse = |j: usize| -> Parsed {
        if !schema.factors.contains(&header[j]) {
            let nums: Option<Vec<f64>> = cells[j].iter().map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite())).collect();
            if let Some(nums) = nums {
                return Parsed::Numeric(nums);
            }
        }
        Parsed::Factor(cells[j].clone())
    };

    let scale = schema.response_scale.unwrap_or(1.0);
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(CliError::Input(format!("response_scale must be positive, got {scale}")));
    }
    let y = match parse(response_col) {
        Parsed::Numeric(v) => v.into_iter().map(|v| v * scale).collect::<Vec<_>>(),
        Parsed::Factor(_) => return Err(CliError::Input(format!("response column '{response}' is not numeric"))),
    };

    let mut names = Vec::new();
    let mut kinds = Vec::new();
    let mut columns_x: Vec<Vec<f64>> = Vec::new();
    let mut columns = Vec::new();
    for (j, source) in header.iter().enumerate() {
        if j == response_col || schema.drop.contains(source) {
            continue;
        }
        match parse(j) {
            Parsed::Numeric(values) => {
                let binary = values.iter().all(|&v| v == 0.0 || v == 1.0);
                let kind = if binary { ColumnKind::Dummy } else { ColumnKind::Continuous };
                if values.iter().all(|&v| v == values[0]) {
                    return Err(CliError::Input(format!("zero variance column '{source}'")));
                }
                names.push(source.clone());
                kinds.push(kind);
                columns_x.push(values);
                columns.push(PlanColumn {
                    source: source.clone(),
                    action: ColumnAction::Passthrough,
                    outputs: vec![source.clone()],
                });
            }
            Parsed::Factor(values) => {
                let mut levels: Vec<String> = Vec::new();
                for v in &values {
                    if !levels.contains(v) {
                        levels.push(v.clone());
                    }
                }
                if let Some(order) = schema.levels.get(source) {
                    let mut sorted = order.clone();
                    sorted.sort();
                    let mut seen = levels.clone();
                    seen.sort();
                    if sorted != seen {
                        return Err(CliError::Input(format!(
                            "schema levels for '{source}' [{}] do not match the data [{}]",
                            order.join(", "),
                            levels.join(", ")
                        )));
                    }
                    levels = order.clone();
                }
                if levels.len() < 2 {
                    return Err(CliError::Input(format!("zero variance column '{source}' (single level)")));
                }
                let reference = match schema.reference.get(source) {
                    Some(r) if levels.contains(r) => r.clone(),
                    Some(r) => {
                        return Err(CliError::Input(format!("reference level '{r}' not found in column '{source}'")));
                    }
                    None => levels[0].clone(),
                };
                let others: Vec<String> = levels.iter().filter(|l| **l != reference).cloned().collect();
                let mut outputs = Vec::new();
                for level in &others {
                    let name = format!("{source}.{level}");
                    names.push(name.clone());
                    outputs.push(name);
                    kinds.push(ColumnKind::Dummy);
                    columns_x.push(values.iter().map(|v| if v == level { 1.0 } else { 0.0 }).collect());
                }
                columns.push(PlanColumn {
                    source: source.clone(),
                    action: ColumnAction::DummyEncode { reference, levels: others },
                    outputs,
                });
            }
        }
    }

    for (from, to) in &schema.rename {
        let Some(j) = names.iter().position(|n| n == from) else {
            return Err(CliError::Input(format!("schema renames unknown model column '{from}'")));
        };
        names[j] = to.clone();
        for c in &mut columns {
            for o in &mut c.outputs {
                if o == from {
                    *o = to.clone();
                }
            }
        }
    }
    for (i, name) in names.iter().enumerate() {
        if names[..i].contains(name) {
            return Err(CliError::Input(format!("duplicate model column '{name}'")));
        }
    }
    if names.is_empty() {
        return Err(CliError::Input("no covariate columns".into()));
    }

    let p = names.len();
    let mut x = vec![0.0; n * p];
    for (j, col) in columns_x.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            x[i * p + j] = *v;
        }
    }
    Ok(RawDesign {
        names,
        kinds,
        x,
        y,
        response,
        response_scale: scale,
        columns,
    })
}

/// Standardizes a raw design with its own statistics.
pub fn standardize(raw: &RawDesign, options: &IngestOptions) -> Result<(Dataset, PreprocessPlan)> {
    let meta: Vec<ColumnMeta> = (0..raw.p())
        .map(|j| {
            let name = raw.names[j].clone();
            if raw.kinds[j] == ColumnKind::Continuous && options.standardize_covariates {
                let col = raw.column(j);
                ColumnMeta {
                    name,
                    kind: ColumnKind::Continuous,
                    mean: col.iter().sum::<f64>() / col.len() as f64,
                    sd: sample_sd(&col),
                }
            } else {
                ColumnMeta::identity(name, raw.kinds[j])
            }
        })
        .collect();
    let response_meta = if options.standardize_response {
        let sd = sample_sd(&raw.y);
        if !(sd > 0.0) {
            return Err(CliError::Input(format!("zero variance column '{}' (response)", raw.response)));
        }
        ResponseMeta {
            name: raw.response.clone(),
            mean: raw.y.iter().sum::<f64>() / raw.n() as f64,
            sd,
        }
    } else {
        ResponseMeta {
            name: raw.response.clone(),
            mean: 0.0,
            sd: 1.0,
        }
    };
    let data = apply_meta(raw, &meta, &response_meta)?;
    let plan = plan_for(raw, &meta, &response_meta);
    Ok((data, plan))
}

/// Standardizes a raw design with given statistics (e.g. a saved model's).
pub fn apply_meta(raw: &RawDesign, meta: &[ColumnMeta], response_meta: &ResponseMeta) -> Result<Dataset> {
    if meta.len() != raw.p() || meta.iter().zip(&raw.names).any(|(m, n)| m.name != *n) {
        return Err(CliError::Input(format!(
            "data columns [{}] do not match model columns [{}]",
            raw.names.join(", "),
            meta.iter().map(|m| m.name.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    let p = raw.p();
    let x = raw
        .x
        .iter()
        .enumerate()
        .map(|(idx, &v)| meta[idx % p].to_standardized(v))
        .collect();
    let y = raw.y.iter().map(|&v| (v - response_meta.mean) / response_meta.sd).collect();
    Ok(Dataset::new(p, x, y)?.with_meta(meta.to_vec(), Some(response_meta.clone()))?)
}

fn plan_for(raw: &RawDesign, meta: &[ColumnMeta], response_meta: &ResponseMeta) -> PreprocessPlan {
    let mut columns = raw.columns.clone();
    for c in &mut columns {
        if let ColumnAction::Passthrough = c.action {
            let m = &meta[raw.names.iter().position(|n| *n == c.outputs[0]).expect("plan output")];
            if m.kind == ColumnKind::Continuous && (m.mean != 0.0 || m.sd != 1.0) {
                c.action = ColumnAction::Standardize { mean: m.mean, sd: m.sd };
            }
        }
    }
    let action = if response_meta.mean != 0.0 || response_meta.sd != 1.0 {
        ColumnAction::Standardize {
            mean: response_meta.mean,
            sd: response_meta.sd,
        }
    } else {
        ColumnAction::Passthrough
    };
    PreprocessPlan {
        columns,
        response: ResponsePlan {
            source: raw.response.clone(),
            scale: raw.response_scale,
            action,
        },
    }
}

/// Reads, encodes and standardizes a CSV file.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<(Dataset, PreprocessPlan)> {
    standardize(&read_design(path, options)?, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(response: &str) -> IngestOptions {
        IngestOptions {
            response: Some(response.into()),
            ..Default::default()
        }
    }

    fn run(csv: &str, o: &IngestOptions) -> Result<(Dataset, PreprocessPlan)> {
        standardize(&read_design_from(csv.as_bytes(), o)?, o)
    }

    #[test]
    fn two_level_factor_is_one_dummy() {
        let csv = "age,smoker,y\n20,no,1\n30,yes,2\n40,no,4\n";
        let (d, plan) = run(csv, &opts("y")).unwrap();
        assert_eq!(d.p(), 2);
        assert_eq!(d.column_meta[1].name, "smoker.yes");
        assert_eq!(d.column_meta[1].kind, ColumnKind::Dummy);
        assert_eq!(d.column(1), vec![0.0, 1.0, 0.0]);
        assert_eq!(plan.model_columns(), vec!["age", "smoker.yes"]);
        assert!(matches!(&plan.columns[1].action, ColumnAction::DummyEncode { reference, .. } if reference == "no"));
    }

    #[test]
    fn standardization_uses_sample_sd() {
        let csv = "a,y\n1,1\n2,2\n3,4\n";
        let (d, _) = run(csv, &opts("y")).unwrap();
        assert_eq!(d.column(0), vec![-1.0, 0.0, 1.0]);
        let m = d.response_meta.clone().unwrap();
        assert!((m.mean - 7.0 / 3.0).abs() < 1e-15);
        assert!((m.sd - (7.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn constant_column_is_rejected() {
        let err = run("a,b,y\n1,5,1\n2,5,2\n3,5,3\n", &opts("y")).unwrap_err();
        assert!(err.to_string().contains("zero variance column 'b'"), "{err}");
        let err = run("a,b,y\n1,u,1\n2,u,2\n3,u,3\n", &opts("y")).unwrap_err();
        assert!(err.to_string().contains("zero variance column 'b'"), "{err}");
    }

    #[test]
    fn missing_values_are_listed() {
        let err = run("a,b,y\n1,,1\n2,3,NA\n", &opts("y")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1 column 'b'") && msg.contains("row 2 column 'y'"), "{msg}");
        assert_eq!(err.exit_code(), crate::error::EXIT_INPUT);
    }

    #[test]
    fn unknown_response_is_rejected() {
        let err = run("a,y\n1,2\n3,4\n", &opts("charges")).unwrap_err();
        assert!(err.to_string().contains("unknown response column 'charges'"));
    }

    #[test]
    fn schema_pins_reference_and_renames() {
        let csv = "r,s,y\nsw,no,1\nne,yes,2\nnw,no,3\nse,no,5\n";
        let mut o = opts("y");
        o.schema.reference.insert("r".into(), "ne".into());
        o.schema.rename.insert("s.yes".into(), "s".into());
        o.schema.response_scale = Some(0.5);
        let (d, plan) = run(csv, &o).unwrap();
        let names: Vec<_> = d.column_meta.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, vec!["r.sw", "r.nw", "r.se", "s"]);
        assert_eq!(plan.response.scale, 0.5);
        let m = d.response_meta.unwrap();
        assert!((m.mean - 11.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn schema_level_order() {
        let csv = "r,y\nsw,1\nne,2\nnw,3\nse,5\n";
        let mut o = opts("y");
        o.schema.levels.insert("r".into(), vec!["ne".into(), "nw".into(), "se".into(), "sw".into()]);
        let (d, _) = run(csv, &o).unwrap();
        let names: Vec<_> = d.column_meta.iter().map(|m| m.name.as_str()).collect();
        assert_eq!(names, vec!["r.nw", "r.se", "r.sw"]);
        o.schema.levels.insert("r".into(), vec!["ne".into(), "nw".into()]);
        assert!(run(csv, &o).is_err());
    }

    #[test]
    fn round_trip_to_raw() {
        let csv = "a,b,y\n1.5,10,1\n2.25,-3,2\n-7,4.5,4\n0.125,8,3\n";
        let (d, _) = run(csv, &opts("y")).unwrap();
        let raw = read_design_from(csv.as_bytes(), &opts("y")).unwrap();
        for j in 0..2 {
            for (z, r) in d.column(j).iter().zip(raw.column(j)) {
                assert!((d.column_meta[j].to_raw(*z) - r).abs() <= 1e-10);
            }
        }
        let m = d.response_meta.clone().unwrap();
        for (z, r) in d.y().iter().zip(&raw.y) {
            assert!((z * m.sd + m.mean - r).abs() <= 1e-10);
        }
    }

    #[test]
    fn saved_meta_must_match_columns() {
        let csv = "a,b,y\n1,2,1\n2,5,2\n3,1,4\n";
        let (d, _) = run(csv, &opts("y")).unwrap();
        let raw = read_design_from("b,a,y\n1,2,1\n2,5,2\n3,1,4\n".as_bytes(), &opts("y")).unwrap();
        assert!(apply_meta(&raw, &d.column_meta, d.response_meta.as_ref().unwrap()).is_err());
        let raw = read_design_from(csv.as_bytes(), &opts("y")).unwrap();
        assert_eq!(apply_meta(&raw, &d.column_meta, d.response_meta.as_ref().unwrap()).unwrap(), d);
    }

    #[test]
    fn binary_numeric_column_is_dummy_and_not_scaled() {
        let (d, plan) = run("a,b,y\n1,0,1\n2,1,2\n4,1,4\n", &opts("y")).unwrap();
        assert_eq!(d.column_meta[1].kind, ColumnKind::Dummy);
        assert_eq!(d.column(1), vec![0.0, 1.0, 1.0]);
        assert_eq!(plan.columns[1].action, ColumnAction::Passthrough);
    }
}
