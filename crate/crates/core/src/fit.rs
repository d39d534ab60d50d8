//! Penalized maximum likelihood by multi-restart BFGS.
//!
//! Each restart draws its starting point from its own random stream keyed by
//! `(seed, restart index)`, so restarts can be run in any order (or in
//! parallel, see the companion crate) and [`select_best`] still returns the
//! same result as [`fit`].

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::canonical::canonicalize;
use crate::error::{Error, Result};
use crate::likelihood::{check_response, sigma_sq_hat, Family, FitObjective, LikelihoodSpec};
use crate::model::{check_compatible, Architecture, Dataset, ParamVector};
use crate::optim::{minimize, BfgsConfig, Termination};
use crate::rng::{stream_rng, uniform, StreamRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub n_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            n_restarts: 10,
            max_iters: 5000,
            grad_tol: 1e-8,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_restarts == 0 {
            return Err(Error::InvalidInput("n_restarts must be at least 1".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidInput(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if !(self.init_scale >= 0.0) || !self.init_scale.is_finite() {
            return Err(Error::InvalidInput(format!("init_scale must be finite and >= 0, got {}", self.init_scale)));
        }
        Ok(())
    }
}

/// Outcome of one optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub index: usize,
    pub theta: Vec<f64>,
    /// Penalized log-likelihood at the end point (Gaussian: unit working
    /// variance); `-inf` when the run failed.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_inf: f64,
    pub failure: Option<String>,
    /// Penalized log-likelihood after each accepted step.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    /// Penalized log-likelihood at `theta_hat`. For Gaussian fits this is
    /// evaluated at unit working variance, which orders restarts exactly as
    /// the penalized residual sum of squares does.
    pub loglik: f64,
    /// `RSS / n` (Gaussian only).
    pub sigma_sq_hat: Option<f64>,
    pub restart_logliks: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Max-norm of the objective gradient at `theta_hat`.
    pub grad_inf: f64,
    pub lambda: f64,
    pub family: Family,
}

/// I.i.d. uniform(−scale, scale) starting values.
pub fn initialize(arch: &Architecture, init_scale: f64, rng: &mut StreamRng) -> ParamVector {
    let values = (0..arch.r()).map(|_| uniform(rng, init_scale)).collect();
    ParamVector::from_vec(arch, values).expect("length matches architecture")
}

fn check_inputs(arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig) -> Result<()> {
    config.validate()?;
    check_compatible(arch, &ParamVector::zeros(arch), data)?;
    spec.check(arch)?;
    check_response(spec.family, data)
}

fn run_from(arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig, start: &[f64], index: usize) -> RestartOutcome {
    let objective = FitObjective {
        arch,
        data,
        family: spec.family,
        lambda: spec.lambda(),
    };
    let bfgs = BfgsConfig {
        max_iters: config.max_iters,
        grad_tol: config.grad_tol,
    };
    let out = minimize(|t: &[f64], g: &mut [f64]| objective.value_grad(t, g), start, &bfgs);
    let finite = out.f.is_finite() && out.x.iter().all(|v| v.is_finite());
    let failure = match out.termination {
        Termination::NonFinite => Some(format!("restart {index}: non-finite objective at the starting point")),
        _ if !finite => Some(format!("restart {index}: optimizer produced non-finite values")),
        _ => None,
    };
    RestartOutcome {
        index,
        loglik: if failure.is_none() { objective.to_loglik(out.f) } else { f64::NEG_INFINITY },
        converged: out.converged(),
        iterations: out.iterations,
        grad_inf: out.grad_inf,
        trace: out.trace.iter().map(|&f| objective.to_loglik(f)).collect(),
        theta: out.x,
        failure,
    }
}

/// Runs restart `index` of `config`.
pub fn fit_restart(arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig, index: usize) -> Result<RestartOutcome> {
    check_inputs(arch, data, spec, config)?;
    let mut rng = stream_rng(config.seed, index as u64);
    let start = initialize(arch, config.init_scale, &mut rng);
    Ok(run_from(arch, data, spec, config, start.as_slice(), index))
}

/// Optimizes from a given starting point (no randomization).
pub fn fit_from(arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig, start: &ParamVector) -> Result<FitResult> {
    check_inputs(arch, data, spec, config)?;
    check_compatible(arch, start, data)?;
    let outcome = run_from(arch, data, spec, config, start.as_slice(), 0);
    select_best(arch, data, spec, config, vec![outcome])
}

/// Picks the restart with the highest penalized log-likelihood (lowest index
/// on ties), canonicalizes it, and assembles the [`FitResult`].
pub fn select_best(
    arch: &Architecture,
    data: &Dataset,
    spec: &LikelihoodSpec,
    config: &FitConfig,
    mut outcomes: Vec<RestartOutcome>,
) -> Result<FitResult> {
    outcomes.sort_by_key(|o| o.index);
    let restart_logliks: Vec<f64> = outcomes.iter().map(|o| o.loglik).collect();
    let best = outcomes
        .iter()
        .filter(|o| o.failure.is_none())
        .fold(None::<&RestartOutcome>, |acc, o| match acc {
            Some(b) if b.loglik >= o.loglik => Some(b),
            _ => Some(o),
        });
    let Some(best) = best else {
        return Err(Error::AllRestartsFailed(
            outcomes.iter().filter_map(|o| o.failure.clone()).collect(),
        ));
    };

    let objective = FitObjective {
        arch,
        data,
        family: spec.family,
        lambda: spec.lambda(),
    };
    let mut theta = canonicalize(&ParamVector::from_vec(arch, best.theta.clone())?);
    let mut grad = vec![0.0; arch.r()];
    let mut value = objective.value_grad(theta.as_slice(), &mut grad);
    let mut grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let mut iterations = best.iterations;
    let mut converged = best.converged;

    // The flip map mixes γ_0 into γ_k, so the canonical point's gradient can
    // exceed the tolerance by a rounding-sized amount; polish it.
    if converged && grad_inf > config.grad_tol {
        let polished = run_from(arch, data, spec, config, theta.as_slice(), best.index);
        if polished.failure.is_none() && polished.loglik >= best.loglik {
            theta = canonicalize(&ParamVector::from_vec(arch, polished.theta)?);
            value = objective.value_grad(theta.as_slice(), &mut grad);
            grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
            iterations += polished.iterations;
        }
        converged = grad_inf <= config.grad_tol;
    }

    let loglik = objective.to_loglik(value).max(best.loglik);
    let sigma_sq_hat = match spec.family {
        Family::Gaussian => Some(sigma_sq_hat(arch, &theta, data)?),
        Family::Bernoulli => None,
    };
    Ok(FitResult {
        theta_hat: theta,
        loglik,
        sigma_sq_hat,
        restart_logliks,
        converged,
        iterations,
        grad_inf,
        lambda: spec.lambda(),
        family: spec.family,
    })
}

/// Penalized MLE with `config.n_restarts` random restarts, run serially.
pub fn fit(arch: &Architecture, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig) -> Result<FitResult> {
    check_inputs(arch, data, spec, config)?;
    let outcomes = (0..config.n_restarts)
        .map(|i| fit_restart(arch, data, spec, config, i))
        .collect::<Result<Vec<_>>>()?;
    select_best(arch, data, spec, config, outcomes)
}
