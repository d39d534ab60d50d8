//! Scenario JSON for `simulate` and the CSV tables it produces.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "study": "scenario",
//!   "q": 2, "pattern": "5-1", "n": 1000, "lambda": 0.01,
//!   "replicates": 200, "restarts": 10, "seed": 1, "noise_sd": 1.0
//! }
//! ```
//!
//! `study` is `scenario` (rates, estimation table), `power` (needs `effects`)
//! or `pd` (needs `lambdas` and `ns`). `true_theta` optionally replaces the
//! default true parameters.

use std::fmt::Write as _;

use serde::Deserialize;

use fnnstat_core::simgen::{PdRow, PowerRow, SimReport, SimScenario, ZeroPattern};
use fnnstat_core::ParamVector;

use crate::error::{CliError, Result};
use crate::output::csv_field;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    Scenario,
    Power,
    Pd,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format_version: u32,
    #[serde(default = "default_study")]
    pub study: Study,
    pub q: usize,
    pub pattern: String,
    pub n: usize,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub replicates: Option<usize>,
    #[serde(default)]
    pub restarts: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub noise_sd: Option<f64>,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub true_theta: Option<Vec<f64>>,
    #[serde(default)]
    pub effects: Vec<f64>,
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub ns: Vec<usize>,
}

fn default_study() -> Study {
    Study::Scenario
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub seed: Option<u64>,
    pub restarts: Option<usize>,
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        if f.format_version != 1 {
            return Err(CliError::Input(format!("unsupported scenario format_version {}", f.format_version)));
        }
        match f.study {
            Study::Power if f.effects.is_empty() => Err(CliError::Input("power study needs a nonempty 'effects' list".into())),
            Study::Power if f.effects.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) => {
                Err(CliError::Input("effect sizes must be finite and nonnegative".into()))
            }
            Study::Pd if f.lambdas.is_empty() || f.ns.is_empty() => {
                Err(CliError::Input("pd study needs nonempty 'lambdas' and 'ns' lists".into()))
            }
            _ => Ok(f),
        }
    }

    /// The base scenario with defaults filled in and overrides applied.
    pub fn scenario(&self, o: &Overrides) -> Result<SimScenario> {
        let pattern = ZeroPattern::parse(&self.pattern)?;
        let lambda = o.lambda.or(self.lambda).unwrap_or(0.01);
        let mut s = SimScenario::new(self.q, pattern, self.n, lambda)?;
        if let Some(r) = self.replicates {
            s.replicates = r;
        }
        if let Some(r) = o.restarts.or(self.restarts) {
            s.restarts = r;
        }
        if let Some(seed) = o.seed.or(self.seed) {
            s.seed = seed;
        }
        if let Some(sd) = self.noise_sd {
            s.noise_sd = sd;
        }
        if let Some(m) = self.max_iters {
            s.max_iters = m;
        }
        if let Some(t) = &self.true_theta {
            s.true_theta = ParamVector::from_vec(&s.arch()?, t.clone())?;
        }
        s.validate()?;
        Ok(s)
    }
}

fn num(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        format!("{v}")
    }
}

/// Rejection rates: one row per single-parameter target, then one per
/// covariate.
pub fn rates_csv(r: &SimReport) -> String {
    let mut out = String::from("test,target,truth_zero,rejections,replicates,rate\n");
    for row in &r.single {
        let _ = writeln!(out, "single,{},{},{},{},{}", csv_field(&row.label), row.truth_zero, row.rejections, r.replicates, num(row.rate));
    }
    for row in &r.multi {
        let _ = writeln!(out, "multi,{},{},{},{},{}", csv_field(&row.label), row.truth_zero, row.rejections, r.replicates, num(row.rate));
    }
    out
}

/// Per-parameter truth, mean estimate, SE, SEE and coverage.
pub fn params_csv(r: &SimReport) -> String {
    let mut out = String::from("parameter,truth,mean_estimate,se,see,cp,n_estimates,n_pd\n");
    for p in &r.params {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            csv_field(&p.label),
            num(p.truth),
            num(p.mean_estimate),
            num(p.se),
            num(p.see),
            num(p.cp),
            p.n_estimates,
            p.n_pd
        );
    }
    out
}

pub fn summary_csv(r: &SimReport) -> String {
    format!(
        "q,pattern,n,lambda,replicates,failures,non_converged,pd_count,pd_rate\n{},{},{},{},{},{},{},{},{}\n",
        r.q,
        r.pattern.name(),
        r.n,
        num(r.lambda),
        r.replicates,
        r.failures,
        r.non_converged,
        r.pd_count,
        num(r.pd_rate)
    )
}

pub fn power_csv(rows: &[PowerRow]) -> String {
    let mut out = String::from("effect,single_power,multi_power\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", num(r.effect), num(r.single_power), num(r.multi_power));
    }
    out
}

pub fn pd_csv(rows: &[PdRow]) -> String {
    let mut out = String::from("lambda,q,pattern,n,replicates,pd_rate\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{},{}", num(r.lambda), r.q, r.pattern.name(), r.n, r.replicates, num(r.pd_rate));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let f = ScenarioFile::parse(r#"{"format_version": 1, "q": 2, "pattern": "5-1", "n": 100, "seed": 4}"#).unwrap();
        let s = f.scenario(&Overrides::default()).unwrap();
        assert_eq!((s.lambda, s.replicates, s.restarts, s.seed), (0.01, 200, 10, 4));
        let s = f
            .scenario(&Overrides {
                lambda: Some(0.0),
                seed: Some(9),
                restarts: Some(3),
            })
            .unwrap();
        assert_eq!((s.lambda, s.restarts, s.seed), (0.0, 3, 9));
    }

    #[test]
    fn rejects_bad_files() {
        for text in [
            r#"{"format_version": 2, "q": 2, "pattern": "5-1", "n": 100}"#,
            r#"{"format_version": 1, "q": 2, "pattern": "5-1", "n": 100, "bogus": 1}"#,
            r#"{"format_version": 1, "study": "power", "q": 2, "pattern": "5-1", "n": 100}"#,
            r#"{"format_version": 1, "study": "pd", "q": 2, "pattern": "5-1", "n": 100, "lambdas": [0]}"#,
        ] {
            assert!(ScenarioFile::parse(text).is_err(), "{text}");
        }
        let f = ScenarioFile::parse(r#"{"format_version": 1, "q": 2, "pattern": "4-2", "n": 100}"#).unwrap();
        assert!(f.scenario(&Overrides::default()).is_err());
        let f = ScenarioFile::parse(r#"{"format_version": 1, "q": 1, "pattern": "5-1", "n": 10, "true_theta": [1, 2]}"#).unwrap();
        assert!(f.scenario(&Overrides::default()).is_err());
    }
}
