//! Text, JSON and CSV renderings of an [`InferenceReport`].
//!
//! The text layout puts one row per covariate: the input weights `ω_j1..ω_jq`
//! with significance codes from the single-parameter tests, then the
//! multiple-parameter p-value. Output-layer and intercept parameters follow
//! in a second block.

use std::fmt::Write as _;

use serde::Serialize;

use fnnstat_core::inference::{significance_code, InferenceReport, ParameterTest, SIGNIFICANCE_LEGEND};

use crate::error::Result;
use crate::output::csv_field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Serialize)]
struct ParamJson<'a> {
    index: usize,
    label: &'a str,
    estimate: f64,
    std_error: Option<f64>,
    statistic: Option<f64>,
    p_value: Option<f64>,
    code: &'static str,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct CovariateJson<'a> {
    index: usize,
    name: &'a str,
    weights: Vec<ParamJson<'a>>,
    statistic: Option<f64>,
    df: Option<f64>,
    p_value: Option<f64>,
    error: Option<&'a str>,
}

#[derive(Debug, Serialize)]
struct ReportJson<'a> {
    format_version: u32,
    p: usize,
    q: usize,
    family: &'static str,
    lambda: f64,
    sigma_sq_hat: Option<f64>,
    positive_definite: bool,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
    reducible: bool,
    reducibility: Vec<String>,
    covariates: Vec<CovariateJson<'a>>,
    other_parameters: Vec<ParamJson<'a>>,
}

fn param_json(t: &ParameterTest) -> ParamJson<'_> {
    ParamJson {
        index: t.index,
        label: &t.label,
        estimate: t.estimate,
        std_error: t.std_error,
        statistic: t.wald.map(|w| w.statistic),
        p_value: t.wald.map(|w| w.p_value),
        code: t.wald.map_or("", |w| significance_code(w.p_value)),
        error: t.error.as_deref(),
    }
}

/// Parameters outside the covariate rows: hidden intercepts and the output
/// layer.
fn other_parameters(report: &InferenceReport) -> Vec<&ParameterTest> {
    let inputs: Vec<usize> = report.covariates.iter().flat_map(|c| c.weight_indices.iter().copied()).collect();
    report.parameters.iter().filter(|t| !inputs.contains(&t.index)).collect()
}

pub fn reducibility_lines(report: &InferenceReport) -> Vec<String> {
    report
        .reducibility
        .reasons
        .iter()
        .map(|r| {
            let nodes: Vec<String> = r.nodes.iter().map(|k| format!("h{k}")).collect();
            format!("{}: {}", r.kind.name(), nodes.join(", "))
        })
        .collect()
}

pub fn to_json(report: &InferenceReport) -> Result<String> {
    let doc = ReportJson {
        format_version: 1,
        p: report.p,
        q: report.q,
        family: report.family.name(),
        lambda: report.lambda,
        sigma_sq_hat: report.sigma_sq_hat,
        positive_definite: report.positive_definite,
        min_eigenvalue: report.min_eigenvalue,
        max_eigenvalue: report.max_eigenvalue,
        reducible: report.reducibility.reducible(),
        reducibility: reducibility_lines(report),
        covariates: report
            .covariates
            .iter()
            .map(|c| CovariateJson {
                index: c.index,
                name: &c.name,
                weights: c.weight_indices.iter().map(|&i| param_json(&report.parameters[i])).collect(),
                statistic: c.wald.map(|w| w.statistic),
                df: c.wald.map(|w| w.df),
                p_value: c.wald.map(|w| w.p_value),
                error: c.error.as_deref(),
            })
            .collect(),
        other_parameters: other_parameters(report).into_iter().map(param_json).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc)?;
    s.push('\n');
    Ok(s)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:e}"))
}

/// One row per parameter; covariate rows repeat the multiple-parameter
/// test.
pub fn to_csv(report: &InferenceReport) -> String {
    let mut out = String::from("covariate,label,node,estimate,std_error,statistic,p_value,code,mp_statistic,mp_df,mp_p_value\n");
    for c in &report.covariates {
        for (k, &i) in c.weight_indices.iter().enumerate() {
            let t = &report.parameters[i];
            let _ = writeln!(
                out,
                "{},{},{},{:e},{},{},{},{},{},{},{}",
                csv_field(&c.name),
                csv_field(&t.label),
                k + 1,
                t.estimate,
                opt(t.std_error),
                opt(t.wald.map(|w| w.statistic)),
                opt(t.wald.map(|w| w.p_value)),
                t.wald.map_or("", |w| significance_code(w.p_value)),
                opt(c.wald.map(|w| w.statistic)),
                opt(c.wald.map(|w| w.df)),
                opt(c.wald.map(|w| w.p_value)),
            );
        }
    }
    for t in other_parameters(report) {
        let _ = writeln!(
            out,
            ",{},,{:e},{},{},{},{},,,",
            csv_field(&t.label),
            t.estimate,
            opt(t.std_error),
            opt(t.wald.map(|w| w.statistic)),
            opt(t.wald.map(|w| w.p_value)),
            t.wald.map_or("", |w| significance_code(w.p_value)),
        );
    }
    out
}

/// `<0.001` below one in a thousand, three decimals otherwise.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".into()
    } else {
        format!("{p:.3}")
    }
}

fn estimate_cell(t: &ParameterTest) -> String {
    match t.wald {
        Some(w) => format!("{:.2}{}", t.estimate, significance_code(w.p_value)),
        None => format!("{:.2}?", t.estimate),
    }
}

pub fn to_text(report: &InferenceReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Feedforward network: p = {}, q = {}, family = {}, lambda = {}",
        report.p,
        report.q,
        report.family.name(),
        report.lambda
    );
    if let Some(s2) = report.sigma_sq_hat {
        let _ = writeln!(out, "Residual variance (standardized scale): {s2:.4}");
    }
    let _ = writeln!(
        out,
        "Covariance: {} (eigenvalues {:.3e} to {:.3e})",
        if report.positive_definite { "positive definite" } else { "NOT positive definite" },
        report.min_eigenvalue,
        report.max_eigenvalue
    );
    for line in reducibility_lines(report) {
        let _ = writeln!(out, "Reducible: {line}");
    }
    out.push('\n');

    let name_w = report.covariates.iter().map(|c| c.name.len()).max().unwrap_or(0).max(9);
    let cell_w = 10;
    let sp_w = cell_w * report.q;
    let _ = writeln!(out, "{:name_w$}  {:^sp_w$}  {:>10}", "", "SP", "MP");
    let mut header = format!("{:name_w$}  ", "");
    for k in 1..=report.q {
        let _ = write!(header, "{:>cell_w$}", format!("w[j,{k}]"));
    }
    let _ = writeln!(out, "{header}  {:>10}", "p-value");
    for c in &report.covariates {
        let mut line = format!("{:name_w$}  ", c.name);
        for &i in &c.weight_indices {
            let _ = write!(line, "{:>cell_w$}", estimate_cell(&report.parameters[i]));
        }
        let mp = c.wald.map_or_else(|| "NA".to_string(), |w| format_p(w.p_value));
        let _ = writeln!(out, "{line}  {mp:>10}");
    }

    let others = other_parameters(report);
    if !others.is_empty() {
        out.push('\n');
        let _ = writeln!(out, "{:name_w$}  {:>10}  {:>10}  {:>10}", "parameter", "estimate", "std.error", "p-value");
        for t in others {
            let se = t.std_error.map_or_else(|| "NA".to_string(), |s| format!("{s:.3}"));
            let p = t.wald.map_or_else(|| "NA".to_string(), |w| format_p(w.p_value));
            let _ = writeln!(out, "{:name_w$}  {:>10}  {se:>10}  {p:>10}", t.label, estimate_cell(t));
        }
    }
    let failures: Vec<String> = report
        .parameters
        .iter()
        .filter_map(|t| t.error.as_ref().map(|e| format!("{}: {e}", t.label)))
        .chain(report.covariates.iter().filter_map(|c| c.error.as_ref().map(|e| format!("{}: {e}", c.name))))
        .collect();
    if !failures.is_empty() {
        out.push('\n');
        for f in failures {
            let _ = writeln!(out, "failed: {f}");
        }
    }
    out.push_str("---\n");
    out.push_str(SIGNIFICANCE_LEGEND);
    out.push('\n');
    out
}

pub fn render(report: &InferenceReport, format: Format) -> Result<String> {
    Ok(match format {
        Format::Text => to_text(report),
        Format::Json => to_json(report)?,
        Format::Csv => to_csv(report),
    })
}
