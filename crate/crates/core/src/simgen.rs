//! Monte Carlo harness for the Wald tests: type-I error, power, estimator
//! spread versus estimated standard errors, coverage, and
//! positive-definiteness rates of the sandwich covariance.
//!
//! Every replicate is a pure function of `(scenario, replicate index)`; the
//! [`run_replicate`] / [`aggregate`] split lets callers schedule replicates
//! however they like and still obtain identical reports.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{fabs, sqrt};

use crate::canonical::align_to;
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig};
use crate::inference::{estimate_covariance, wald_multi, wald_single};
use crate::likelihood::{Family, LikelihoodSpec, SigmaSq};
use crate::model::{forward_batch, Architecture, Dataset, OutputActivation, ParamVector};
use crate::rng::{mix_seed, standard_normal, stream_rng};
use crate::special::Z_95;

/// Significance level used for rejection rates.
pub const ALPHA: f64 = 0.05;

/// Which covariates are disconnected in the true network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZeroPattern {
    /// Five non-zero covariates, `x1` zero.
    FiveOne,
    /// Three non-zero covariates, `x1`, `x3`, `x4` zero.
    ThreeThree,
}

impl ZeroPattern {
    /// 1-based indices of the zero covariates.
    pub fn zero_covariates(self) -> &'static [usize] {
        match self {
            ZeroPattern::FiveOne => &[1],
            ZeroPattern::ThreeThree => &[1, 3, 4],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ZeroPattern::FiveOne => "5-1",
            ZeroPattern::ThreeThree => "3-3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "5-1" => Ok(ZeroPattern::FiveOne),
            "3-3" => Ok(ZeroPattern::ThreeThree),
            other => Err(Error::InvalidInput(format!("unknown zero pattern '{other}' (expected 5-1 or 3-3)"))),
        }
    }
}

/// Default `ω_2`, truncated to `q`.
pub const DEFAULT_OMEGA_2: [f64; 6] = [-0.14, -0.27, -0.20, -0.29, 0.27, 0.20];

// Remaining default true weights. Rows are inputs 0 (intercept) and 1..=6,
// columns hidden nodes; row 2 is replaced by DEFAULT_OMEGA_2 and the rows
// of zero covariates are cleared.
const DEFAULT_OMEGA: [[f64; 6]; 7] = [
    [0.2, -0.3, 0.1, -0.2, 0.3, -0.1],
    [0.6, -0.5, 0.4, 0.7, -0.6, 0.5],
    [0.0; 6],
    [0.8, -0.5, 0.6, -0.4, 0.5, -0.7],
    [-0.6, 0.4, 0.7, -0.5, -0.3, 0.6],
    [0.5, 0.9, -0.4, 0.6, 0.7, -0.5],
    [-0.7, -0.4, -0.6, 0.3, 0.5, 0.8],
];
const DEFAULT_GAMMA_0: f64 = 0.5;
const DEFAULT_GAMMA: [f64; 6] = [6.0, 10.0, 8.0, 7.0, 9.0, 5.0];

/// Default true parameter vector for `p = 6` and `q ≤ 6`.
pub fn default_true_theta(q: usize, pattern: ZeroPattern) -> Result<ParamVector> {
    if q == 0 || q > 6 {
        return Err(Error::InvalidInput(format!("default true parameters exist for q in 1..=6, got {q}")));
    }
    let arch = Architecture::new(6, q, OutputActivation::Identity)?;
    let mut t = ParamVector::zeros(&arch);
    for (j, row) in DEFAULT_OMEGA.iter().enumerate() {
        for k in 1..=q {
            let v = if j == 2 { DEFAULT_OMEGA_2[k - 1] } else { row[k - 1] };
            t.set_omega(j, k, v);
        }
    }
    for &j in pattern.zero_covariates() {
        for k in 1..=q {
            t.set_omega(j, k, 0.0);
        }
    }
    t.set_gamma(0, DEFAULT_GAMMA_0);
    for k in 1..=q {
        t.set_gamma(k, DEFAULT_GAMMA[k - 1]);
    }
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub p: usize,
    pub q: usize,
    pub pattern: ZeroPattern,
    pub true_theta: ParamVector,
    pub n: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub restarts: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init_scale: f64,
}

impl SimScenario {
    /// Scenario with the default true parameters, 200 replicates, 10
    /// restarts and unit noise.
    pub fn new(q: usize, pattern: ZeroPattern, n: usize, lambda: f64) -> Result<Self> {
        let fit = FitConfig::default();
        let s = Self {
            p: 6,
            q,
            pattern,
            true_theta: default_true_theta(q, pattern)?,
            n,
            lambda,
            replicates: 200,
            restarts: 10,
            seed: 0,
            noise_sd: 1.0,
            max_iters: fit.max_iters,
            grad_tol: fit.grad_tol,
            init_scale: fit.init_scale,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn arch(&self) -> Result<Architecture> {
        Architecture::new(self.p, self.q, OutputActivation::Identity)
    }

    pub fn validate(&self) -> Result<()> {
        let arch = self.arch()?;
        if self.true_theta.shape() != (self.p, self.q) {
            return Err(Error::DimensionMismatch {
                what: "true parameter vector",
                expected: arch.r(),
                actual: self.true_theta.len(),
            });
        }
        for &j in self.pattern.zero_covariates() {
            if j > self.p {
                return Err(Error::InvalidInput(format!("zero covariate {j} exceeds p = {}", self.p)));
            }
            if self.true_theta.omega_row(j).iter().any(|&w| w != 0.0) {
                return Err(Error::InvalidInput(format!("zero covariate x{j} has nonzero true weights")));
            }
        }
        if self.n == 0 || self.replicates == 0 || self.restarts == 0 {
            return Err(Error::InvalidInput("n, replicates and restarts must be positive".into()));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidInput(format!("noise sd must be finite and >= 0, got {}", self.noise_sd)));
        }
        LikelihoodSpec::new(Family::Gaussian, self.lambda)?;
        self.fit_config(0).validate()
    }

    fn fit_config(&self, replicate: usize) -> FitConfig {
        FitConfig {
            n_restarts: self.restarts,
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            init_scale: self.init_scale,
            seed: mix_seed(self.seed, replicate as u64 + 1),
        }
    }

    /// Copy with `ω_2 = (v, …, v)`.
    pub fn with_effect(&self, v: f64) -> Self {
        let mut s = self.clone();
        for k in 1..=self.q {
            s.true_theta.set_omega(2, k, v);
        }
        s
    }
}

/// Dataset of replicate `index`: standard-normal covariates and
/// `y = NN(x, θ_true) + noise_sd · N(0, 1)`.
pub fn generate(scenario: &SimScenario, index: usize) -> Result<Dataset> {
    let arch = scenario.arch()?;
    let mut rng = stream_rng(scenario.seed, index as u64);
    let n = scenario.n;
    let x: Vec<f64> = (0..n * scenario.p).map(|_| standard_normal(&mut rng)).collect();
    let mean = forward_batch(&arch, &scenario.true_theta, &Dataset::new(scenario.p, x.clone(), vec![0.0; n])?)?;
    let y = if scenario.noise_sd == 0.0 {
        mean
    } else {
        mean.iter().map(|m| m + scenario.noise_sd * standard_normal(&mut rng)).collect()
    };
    Dataset::new(scenario.p, x, y)
}

/// Per-replicate results. Vectors are empty for failed replicates; `NaN`
/// marks a quantity that could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub index: usize,
    pub failure: Option<String>,
    pub converged: bool,
    pub positive_definite: bool,
    /// Estimate aligned to the true parameters.
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Single-parameter p-values, one per parameter.
    pub single_p: Vec<f64>,
    /// Multiple-parameter p-values, one per covariate.
    pub multi_p: Vec<f64>,
}

/// Generate, fit, align, and test one replicate.
pub fn run_replicate(scenario: &SimScenario, index: usize) -> ReplicateOutcome {
    let failed = |reason: String| ReplicateOutcome {
        index,
        failure: Some(reason),
        converged: false,
        positive_definite: false,
        estimate: Vec::new(),
        std_error: Vec::new(),
        single_p: Vec::new(),
        multi_p: Vec::new(),
    };
    let run = || -> Result<ReplicateOutcome> {
        let arch = scenario.arch()?;
        let data = generate(scenario, index)?;
        let spec = LikelihoodSpec::new(Family::Gaussian, scenario.lambda)?;
        let fitted = fit(&arch, &data, &spec, &scenario.fit_config(index))?;
        let (aligned, _) = align_to(&fitted.theta_hat, &scenario.true_theta);
        let s2 = SigmaSq::new(fitted.sigma_sq_hat.unwrap_or(f64::NAN))?;
        let r = arch.r();
        let (pd, se, single, multi) = match estimate_covariance(&arch, &aligned, &data, &spec, Some(s2)) {
            Ok(cov) => (
                cov.positive_definite,
                (0..r).map(|i| cov.std_error(i).unwrap_or(f64::NAN)).collect(),
                (0..r)
                    .map(|i| wald_single(&aligned, &cov, i).map_or(f64::NAN, |w| w.p_value))
                    .collect(),
                (1..=arch.p())
                    .map(|j| wald_multi(&aligned, &cov, &arch, j).map_or(f64::NAN, |w| w.p_value))
                    .collect(),
            ),
            Err(_) => (false, vec![f64::NAN; r], vec![f64::NAN; r], vec![f64::NAN; arch.p()]),
        };
        Ok(ReplicateOutcome {
            index,
            failure: None,
            converged: fitted.converged,
            positive_definite: pd,
            estimate: aligned.into_vec(),
            std_error: se,
            single_p: single,
            multi_p: multi,
        })
    };
    run().unwrap_or_else(|e| failed(e.to_string()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    /// Flat parameter index (single tests) or covariate index (multiple).
    pub index: usize,
    pub label: String,
    pub truth_zero: bool,
    pub rejections: usize,
    /// `rejections / replicates`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub index: usize,
    pub label: String,
    pub truth: f64,
    pub mean_estimate: f64,
    /// Standard deviation of the estimates over successful replicates.
    pub se: f64,
    /// Mean estimated standard error over positive-definite replicates.
    pub see: f64,
    /// Coverage of the nominal 95% interval over positive-definite replicates.
    pub cp: f64,
    pub n_estimates: usize,
    pub n_pd: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub q: usize,
    pub pattern: ZeroPattern,
    pub n: usize,
    pub lambda: f64,
    pub replicates: usize,
    pub failures: usize,
    pub non_converged: usize,
    pub pd_count: usize,
    /// `pd_count / replicates`; failed replicates count as not PD.
    pub pd_rate: f64,
    pub single: Vec<RateRow>,
    pub multi: Vec<RateRow>,
    pub params: Vec<ParamRow>,
}

impl SimReport {
    pub fn single_rate(&self, index: usize) -> f64 {
        self.single[index].rate
    }

    /// Rejection rate of the multiple-parameter test for covariate `j`.
    pub fn multi_rate(&self, j: usize) -> f64 {
        self.multi[j - 1].rate
    }

    pub fn param(&self, index: usize) -> &ParamRow {
        &self.params[index]
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return f64::NAN;
    }
    let m = mean(v);
    sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64)
}

/// Reduces replicate outcomes (in any order) to a report.
pub fn aggregate(scenario: &SimScenario, mut outcomes: Vec<ReplicateOutcome>) -> Result<SimReport> {
    let arch = scenario.arch()?;
    outcomes.sort_by_key(|o| o.index);
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.failure.is_none()).collect();
    let pd: Vec<&ReplicateOutcome> = ok.iter().copied().filter(|o| o.positive_definite).collect();
    let reps = scenario.replicates as f64;
    let truth = scenario.true_theta.as_slice();

    let single = (0..arch.r())
        .map(|i| {
            let rejections = ok.iter().filter(|o| o.single_p[i] < ALPHA).count();
            RateRow {
                index: i,
                label: arch.param_label(i),
                truth_zero: truth[i] == 0.0,
                rejections,
                rate: rejections as f64 / reps,
            }
        })
        .collect();
    let multi = (1..=arch.p())
        .map(|j| {
            let rejections = ok.iter().filter(|o| o.multi_p[j - 1] < ALPHA).count();
            RateRow {
                index: j,
                label: format!("x{j}"),
                truth_zero: scenario.true_theta.omega_row(j).iter().all(|&w| w == 0.0),
                rejections,
                rate: rejections as f64 / reps,
            }
        })
        .collect();
    let params = (0..arch.r())
        .map(|i| {
            let est: Vec<f64> = ok.iter().map(|o| o.estimate[i]).collect();
            let pd_se: Vec<(f64, f64)> = pd
                .iter()
                .filter(|o| o.std_error[i].is_finite())
                .map(|o| (o.estimate[i], o.std_error[i]))
                .collect();
            let see: Vec<f64> = pd_se.iter().map(|&(_, s)| s).collect();
            let covered = pd_se.iter().filter(|&&(e, s)| fabs(e - truth[i]) <= Z_95 * s).count();
            ParamRow {
                index: i,
                label: arch.param_label(i),
                truth: truth[i],
                mean_estimate: mean(&est),
                se: sd(&est),
                see: mean(&see),
                cp: if pd_se.is_empty() { f64::NAN } else { covered as f64 / pd_se.len() as f64 },
                n_estimates: est.len(),
                n_pd: pd_se.len(),
            }
        })
        .collect();
    Ok(SimReport {
        q: scenario.q,
        pattern: scenario.pattern,
        n: scenario.n,
        lambda: scenario.lambda,
        replicates: scenario.replicates,
        failures: outcomes.len() - ok.len() + scenario.replicates.saturating_sub(outcomes.len()),
        non_converged: ok.iter().filter(|o| !o.converged).count(),
        pd_count: pd.len(),
        pd_rate: pd.len() as f64 / reps,
        single,
        multi,
        params,
    })
}

/// All replicates, serially.
pub fn run_scenario(scenario: &SimScenario) -> Result<SimReport> {
    scenario.validate()?;
    let outcomes = (0..scenario.replicates).map(|i| run_replicate(scenario, i)).collect();
    aggregate(scenario, outcomes)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerRow {
    pub effect: f64,
    /// Single-parameter rejection rate for `ω_21`.
    pub single_power: f64,
    /// Multiple-parameter rejection rate for `ω_2`.
    pub multi_power: f64,
}

/// Power as a function of a common effect `ω_2k = v`, with a custom
/// scenario runner (for example a parallel one).
pub fn power_sweep_with(
    base: &SimScenario,
    effects: &[f64],
    mut runner: impl FnMut(&SimScenario) -> Result<SimReport>,
) -> Result<Vec<PowerRow>> {
    if effects.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidInput("effect values must be nonnegative".into()));
    }
    let arch = base.arch()?;
    effects
        .iter()
        .map(|&v| {
            let rep = runner(&base.with_effect(v))?;
            Ok(PowerRow {
                effect: v,
                single_power: rep.single_rate(arch.omega_index(2, 1)),
                multi_power: rep.multi_rate(2),
            })
        })
        .collect()
}

pub fn power_sweep(base: &SimScenario, effects: &[f64]) -> Result<Vec<PowerRow>> {
    power_sweep_with(base, effects, run_scenario)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdRow {
    pub lambda: f64,
    pub q: usize,
    pub pattern: ZeroPattern,
    pub n: usize,
    pub replicates: usize,
    pub pd_rate: f64,
}

/// Scenarios for every `(λ, n)` pair, other settings from `base`.
pub fn pd_grid(base: &SimScenario, lambdas: &[f64], ns: &[usize]) -> Vec<SimScenario> {
    let mut out = Vec::new();
    for &lambda in lambdas {
        for &n in ns {
            out.push(SimScenario { lambda, n, ..base.clone() });
        }
    }
    out
}

/// Positive-definiteness rate per scenario, with a custom runner.
pub fn pd_study_with(cells: &[SimScenario], mut runner: impl FnMut(&SimScenario) -> Result<SimReport>) -> Result<Vec<PdRow>> {
    cells
        .iter()
        .map(|s| {
            let rep = runner(s)?;
            Ok(PdRow {
                lambda: s.lambda,
                q: s.q,
                pattern: s.pattern,
                n: s.n,
                replicates: s.replicates,
                pd_rate: rep.pd_rate,
            })
        })
        .collect()
}

pub fn pd_study(cells: &[SimScenario]) -> Result<Vec<PdRow>> {
    pd_study_with(cells, run_scenario)
}
