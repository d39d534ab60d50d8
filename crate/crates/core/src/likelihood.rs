//! Penalized log-likelihood, its gradient, and the observed information.
//!
//! `ℓ(θ) = Σ log f(y_i | θ) − λ‖θ̃‖²` where `θ̃` drops the intercepts. All
//! derivatives are analytic (backpropagation through the single hidden
//! layer); the observed information uses exact second derivatives of the
//! unpenalized log-likelihood.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::log;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{log_sigmoid, sigmoid, symmetrize};
use crate::model::{check_compatible, eta_with_hidden, Architecture, Dataset, OutputActivation, ParamVector};

/// Lower clamp applied to Bernoulli probabilities before taking logs.
pub const BERNOULLI_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Gaussian,
    Bernoulli,
}

impl Family {
    pub fn output_activation(self) -> OutputActivation {
        match self {
            Family::Gaussian => OutputActivation::Identity,
            Family::Bernoulli => OutputActivation::Logistic,
        }
    }

    pub fn from_output(act: OutputActivation) -> Self {
        match act {
            OutputActivation::Identity => Family::Gaussian,
            OutputActivation::Logistic => Family::Bernoulli,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Bernoulli => "bernoulli",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LikelihoodSpec {
    pub family: Family,
    lambda: f64,
}

impl LikelihoodSpec {
    pub fn new(family: Family, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        Ok(Self { family, lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Same family with a different penalty.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda)
    }

    pub(crate) fn check(&self, arch: &Architecture) -> Result<()> {
        if arch.output_activation != self.family.output_activation() {
            return Err(Error::FamilyMismatch(match self.family {
                Family::Gaussian => "gaussian requires identity output",
                Family::Bernoulli => "bernoulli requires logistic output",
            }));
        }
        Ok(())
    }
}

/// Gaussian noise variance σ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaSq(f64);

impl SigmaSq {
    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveVariance(value));
        }
        Ok(Self(value))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `λ ‖θ̃‖²`.
pub fn penalty(theta: &ParamVector, lambda: f64) -> f64 {
    lambda * theta.penalized_view().iter().map(|v| v * v).sum::<f64>()
}

fn penalty_slice(arch: &Architecture, theta: &[f64], lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (i, v) in theta.iter().enumerate() {
        if !arch.is_intercept(i) {
            acc += v * v;
        }
    }
    lambda * acc
}

fn add_penalty_gradient(arch: &Architecture, theta: &[f64], lambda: f64, grad: &mut [f64], sign: f64) {
    if lambda == 0.0 {
        return;
    }
    for (i, (g, v)) in grad.iter_mut().zip(theta).enumerate() {
        if !arch.is_intercept(i) {
            *g += sign * 2.0 * lambda * v;
        }
    }
}

pub(crate) fn check_response(family: Family, data: &Dataset) -> Result<()> {
    if family == Family::Bernoulli {
        if let Some((row, &value)) = data.y().iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryResponse { row, value });
        }
    }
    Ok(())
}

fn check_all(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    spec: &LikelihoodSpec,
    sigma_sq: Option<SigmaSq>,
) -> Result<f64> {
    check_compatible(arch, theta, data)?;
    spec.check(arch)?;
    check_response(spec.family, data)?;
    if let Some(i) = theta.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "parameter vector", index: i });
    }
    match spec.family {
        Family::Gaussian => sigma_sq.map(SigmaSq::value).ok_or(Error::MissingVariance),
        Family::Bernoulli => Ok(1.0),
    }
}

/// Per-observation log density and its first two derivatives with respect to
/// the output pre-activation η. Returns `(log f, dℓ/dη, −d²ℓ/dη²)`.
#[inline]
fn obs_terms(family: Family, y: f64, eta: f64, sigma_sq: f64) -> (f64, f64, f64) {
    match family {
        Family::Gaussian => {
            let r = y - eta;
            let ll = -0.5 * log(2.0 * core::f64::consts::PI * sigma_sq) - 0.5 * r * r / sigma_sq;
            (ll, r / sigma_sq, 1.0 / sigma_sq)
        }
        Family::Bernoulli => {
            let floor = log(BERNOULLI_EPS);
            let lp = log_sigmoid(eta).max(floor);
            let lq = log_sigmoid(-eta).max(floor);
            let mu = sigmoid(eta);
            (y * lp + (1.0 - y) * lq, y - mu, mu * (1.0 - mu))
        }
    }
}

/// Data part of the log-likelihood plus (optionally) its gradient.
fn data_loglik(
    arch: &Architecture,
    theta: &[f64],
    data: &Dataset,
    family: Family,
    sigma_sq: f64,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    let (p, q) = (arch.p(), arch.q());
    let g0 = arch.gamma_index(0);
    let mut hidden = vec![0.0; q];
    let mut total = 0.0;
    if let Some(g) = grad.as_deref_mut() {
        g.fill(0.0);
    }
    for i in 0..data.n() {
        let x = data.row(i);
        let eta = eta_with_hidden(p, q, theta, x, &mut hidden);
        let (ll, c, _) = obs_terms(family, data.y()[i], eta, sigma_sq);
        total += ll;
        if let Some(g) = grad.as_deref_mut() {
            backprop(p, q, theta, x, &hidden, c, g0, g);
        }
    }
    total
}

/// Adds `c · ∇_θ η(x)` to `g`.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn backprop(p: usize, q: usize, theta: &[f64], x: &[f64], hidden: &[f64], c: f64, g0: usize, g: &mut [f64]) {
    g[g0] += c;
    for k in 0..q {
        let h = hidden[k];
        g[g0 + 1 + k] += c * h;
        let a = c * theta[g0 + 1 + k] * h * (1.0 - h);
        g[k] += a;
        for j in 0..p {
            g[(j + 1) * q + k] += a * x[j];
        }
    }
}

/// Penalized log-likelihood `Σ log f(y_i|θ) − λ‖θ̃‖²`.
///
/// Gaussian requires `sigma_sq`; Bernoulli ignores it.
pub fn log_likelihood(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    spec: &LikelihoodSpec,
    sigma_sq: Option<SigmaSq>,
) -> Result<f64> {
    let s2 = check_all(arch, theta, data, spec, sigma_sq)?;
    let ll = data_loglik(arch, theta.as_slice(), data, spec.family, s2, None);
    Ok(ll - penalty_slice(arch, theta.as_slice(), spec.lambda))
}

/// `∂ℓ/∂θ`, including the `−2λθ̃` penalty term.
pub fn gradient(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    spec: &LikelihoodSpec,
    sigma_sq: Option<SigmaSq>,
) -> Result<Vec<f64>> {
    let s2 = check_all(arch, theta, data, spec, sigma_sq)?;
    let mut g = vec![0.0; arch.r()];
    data_loglik(arch, theta.as_slice(), data, spec.family, s2, Some(&mut g));
    add_penalty_gradient(arch, theta.as_slice(), spec.lambda, &mut g, -1.0);
    Ok(g)
}

/// Observed information `−∇∇ᵀ ℓ(θ)|_{λ=0}`, symmetric `r × r`.
pub fn observed_information(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    spec: &LikelihoodSpec,
    sigma_sq: Option<SigmaSq>,
) -> Result<DMatrix<f64>> {
    let s2 = check_all(arch, theta, data, spec, sigma_sq)?;
    let (p, q, r) = (arch.p(), arch.q(), arch.r());
    let t = theta.as_slice();
    let g0 = arch.gamma_index(0);
    let mut info = DMatrix::<f64>::zeros(r, r);
    let mut hidden = vec![0.0; q];
    let mut grad_eta = vec![0.0; r];

    for i in 0..data.n() {
        let x = data.row(i);
        let eta = eta_with_hidden(p, q, t, x, &mut hidden);
        let (_, c, w) = obs_terms(spec.family, data.y()[i], eta, s2);

        grad_eta.fill(0.0);
        backprop(p, q, t, x, &hidden, 1.0, g0, &mut grad_eta);

        // w ∇η ∇ηᵀ (upper triangle; mirrored below)
        for a in 0..r {
            let wa = w * grad_eta[a];
            if wa == 0.0 {
                continue;
            }
            for b in a..r {
                info[(a, b)] += wa * grad_eta[b];
            }
        }

        // − c ∇²η
        for k in 0..q {
            let h = hidden[k];
            let d1 = h * (1.0 - h);
            let d2 = d1 * (1.0 - 2.0 * h);
            let gk = t[g0 + 1 + k];
            let gamma_idx = g0 + 1 + k;
            for j in 0..=p {
                let xj = if j == 0 { 1.0 } else { x[j - 1] };
                let wj = j * q + k;
                // (ω_jk, γ_k); ω indices are always below γ indices
                info[(wj, gamma_idx)] -= c * d1 * xj;
                for l in j..=p {
                    let xl = if l == 0 { 1.0 } else { x[l - 1] };
                    info[(wj, l * q + k)] -= c * gk * d2 * xj * xl;
                }
            }
        }
    }

    for a in 0..r {
        for b in a..r {
            let v = info[(a, b)];
            if !v.is_finite() {
                return Err(Error::NonFiniteSecondDerivative { row: a, col: b });
            }
            info[(b, a)] = v;
        }
    }
    symmetrize(&mut info);
    Ok(info)
}

/// Residual sum of squares on the output scale.
pub fn rss(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    let fitted = crate::model::forward_batch(arch, theta, data)?;
    Ok(fitted.iter().zip(data.y()).map(|(f, y)| (y - f) * (y - f)).sum())
}

/// Profiled noise variance `RSS / n`.
pub fn sigma_sq_hat(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<f64> {
    Ok(rss(arch, theta, data)? / data.n() as f64)
}

/// Unpenalized log-likelihood at `θ`; Gaussian uses the profiled `σ̂² = RSS/n`.
pub fn profile_log_likelihood(arch: &Architecture, theta: &ParamVector, data: &Dataset, family: Family) -> Result<f64> {
    let spec = LikelihoodSpec::new(family, 0.0)?;
    match family {
        Family::Gaussian => {
            let s2 = sigma_sq_hat(arch, theta, data)?;
            log_likelihood(arch, theta, data, &spec, Some(SigmaSq::new(s2)?))
        }
        Family::Bernoulli => log_likelihood(arch, theta, data, &spec, None),
    }
}

/// The function minimized by the fitter: the negative penalized
/// log-likelihood with constants dropped. Gaussian fits use a unit working
/// variance, i.e. `½ RSS + λ‖θ̃‖²`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FitObjective<'a> {
    pub arch: &'a Architecture,
    pub data: &'a Dataset,
    pub family: Family,
    pub lambda: f64,
}

impl FitObjective<'_> {
    /// Objective value; fills `grad` with its gradient.
    pub fn value_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let ll = match self.family {
            Family::Gaussian => {
                let (p, q) = (self.arch.p(), self.arch.q());
                let g0 = self.arch.gamma_index(0);
                let mut hidden = vec![0.0; q];
                grad.fill(0.0);
                let mut acc = 0.0;
                for i in 0..self.data.n() {
                    let x = self.data.row(i);
                    let eta = eta_with_hidden(p, q, theta, x, &mut hidden);
                    let r = self.data.y()[i] - eta;
                    acc -= 0.5 * r * r;
                    backprop(p, q, theta, x, &hidden, r, g0, grad);
                }
                acc
            }
            Family::Bernoulli => data_loglik(self.arch, theta, self.data, self.family, 1.0, Some(grad)),
        };
        for g in grad.iter_mut() {
            *g = -*g;
        }
        add_penalty_gradient(self.arch, theta, self.lambda, grad, 1.0);
        -ll + penalty_slice(self.arch, theta, self.lambda)
    }

    /// Converts an objective value to the penalized log-likelihood reported
    /// in fit results (Gaussian at unit working variance).
    pub fn to_loglik(self, objective: f64) -> f64 {
        match self.family {
            Family::Gaussian => -0.5 * self.data.n() as f64 * log(2.0 * core::f64::consts::PI) - objective,
            Family::Bernoulli => -objective,
        }
    }

    /// Hessian of the objective, `I_o(θ; σ²=1) + 2λ D` with `D` the
    /// penalized-coordinate indicator.
    #[allow(dead_code)]
    pub fn hessian(&self, theta: &ParamVector) -> Result<DMatrix<f64>> {
        let spec = LikelihoodSpec::new(self.family, 0.0)?;
        let s2 = match self.family {
            Family::Gaussian => Some(SigmaSq::new(1.0)?),
            Family::Bernoulli => None,
        };
        let mut h = observed_information(self.arch, theta, self.data, &spec, s2)?;
        for i in 0..self.arch.r() {
            if !self.arch.is_intercept(i) {
                h[(i, i)] += 2.0 * self.lambda;
            }
        }
        Ok(h)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Dataset, OutputActivation};
    use crate::rng::{stream_rng, uniform};
    use std::vec::Vec;

    fn gaussian_arch(p: usize, q: usize) -> Architecture {
        Architecture::new(p, q, OutputActivation::Identity).unwrap()
    }

    #[test]
    fn penalty_examples() {
        let a = gaussian_arch(1, 1);
        let mut t = ParamVector::zeros(&a);
        t.set_omega(0, 1, 123.0);
        t.set_omega(1, 1, 3.0);
        t.set_gamma(0, -77.0);
        t.set_gamma(1, 4.0);
        assert!((penalty(&t, 0.01) - 0.25).abs() < 1e-15);
        assert_eq!(penalty(&t, 0.0), 0.0);
        let mut shifted = t.clone();
        shifted.set_gamma(0, 5.0);
        assert_eq!(penalty(&t, 0.3), penalty(&shifted, 0.3));
    }

    #[test]
    fn gaussian_single_observation() {
        let a = gaussian_arch(1, 1);
        let t = ParamVector::zeros(&a);
        let d = Dataset::new(1, vec![2.0], vec![0.0]).unwrap();
        let spec = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        let ll = log_likelihood(&a, &t, &d, &spec, Some(SigmaSq::new(1.0).unwrap())).unwrap();
        assert!((ll + 0.9189385332046727).abs() < 1e-15);
        assert!((ll - -0.9189385).abs() < 1e-7);
    }

    #[test]
    fn bernoulli_single_observation() {
        let a = Architecture::new(1, 1, OutputActivation::Logistic).unwrap();
        let t = ParamVector::zeros(&a);
        let d = Dataset::new(1, vec![0.4], vec![1.0]).unwrap();
        let spec = LikelihoodSpec::new(Family::Bernoulli, 0.0).unwrap();
        let ll = log_likelihood(&a, &t, &d, &spec, None).unwrap();
        assert!((ll - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn bernoulli_clamp_keeps_loglik_finite() {
        let a = Architecture::new(1, 1, OutputActivation::Logistic).unwrap();
        let mut t = ParamVector::zeros(&a);
        t.set_gamma(0, 900.0);
        let d = Dataset::new(1, vec![0.0], vec![0.0]).unwrap();
        let spec = LikelihoodSpec::new(Family::Bernoulli, 0.0).unwrap();
        let ll = log_likelihood(&a, &t, &d, &spec, None).unwrap();
        assert!((ll - BERNOULLI_EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn errors() {
        let a = Architecture::new(1, 1, OutputActivation::Logistic).unwrap();
        let t = ParamVector::zeros(&a);
        let d = Dataset::new(1, vec![0.0, 1.0], vec![0.0, 0.5]).unwrap();
        let spec = LikelihoodSpec::new(Family::Bernoulli, 0.0).unwrap();
        assert!(matches!(
            log_likelihood(&a, &t, &d, &spec, None),
            Err(Error::NonBinaryResponse { row: 1, .. })
        ));
        assert!(SigmaSq::new(0.0).is_err());
        assert!(SigmaSq::new(-1.0).is_err());
        assert!(LikelihoodSpec::new(Family::Gaussian, -0.1).is_err());
        let ga = gaussian_arch(1, 1);
        let gspec = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        assert!(matches!(
            log_likelihood(&ga, &ParamVector::zeros(&ga), &d, &gspec, None),
            Err(Error::MissingVariance)
        ));
        assert!(matches!(
            log_likelihood(&a, &t, &d, &gspec, None),
            Err(Error::FamilyMismatch(_))
        ));
    }

    fn random_instance(seed: u64, p: usize, q: usize, n: usize) -> (Architecture, ParamVector, Dataset) {
        let a = gaussian_arch(p, q);
        let mut rng = stream_rng(seed, 0);
        let t = ParamVector::from_vec(&a, (0..a.r()).map(|_| uniform(&mut rng, 1.5)).collect()).unwrap();
        let x: Vec<f64> = (0..n * p).map(|_| uniform(&mut rng, 2.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| uniform(&mut rng, 3.0)).collect();
        (a, t, Dataset::new(p, x, y).unwrap())
    }

    #[test]
    fn gaussian_matches_literal_loop() {
        let (a, t, d) = random_instance(11, 2, 3, 5);
        let lambda = 0.01;
        let s2 = 0.7;
        let spec = LikelihoodSpec::new(Family::Gaussian, lambda).unwrap();
        let got = log_likelihood(&a, &t, &d, &spec, Some(SigmaSq::new(s2).unwrap())).unwrap();

        // literal term-by-term evaluation
        let mut expected = 0.0;
        for i in 0..d.n() {
            let xi = d.row(i);
            let mut out = t.gamma(0);
            for k in 1..=3 {
                let mut s = t.omega(0, k);
                for j in 1..=2 {
                    s += t.omega(j, k) * xi[j - 1];
                }
                out += t.gamma(k) * (1.0 / (1.0 + (-s).exp()));
            }
            let r = d.y()[i] - out;
            expected += -0.5 * (2.0 * std::f64::consts::PI * s2).ln() - r * r / (2.0 * s2);
        }
        let mut pen = 0.0;
        for j in 1..=2 {
            for k in 1..=3 {
                pen += t.omega(j, k).powi(2);
            }
        }
        for k in 1..=3 {
            pen += t.gamma(k).powi(2);
        }
        expected -= lambda * pen;
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn penalty_only_gradient() {
        let (a, mut t, d) = random_instance(3, 1, 1, 4);
        // disconnect the data: y equals the constant output exactly
        t.set_gamma(1, 0.0);
        let mut d = d;
        for y in d.y_mut() {
            *y = t.gamma(0);
        }
        let lambda = 50.0;
        t.set_omega(1, 1, 0.8);
        let spec = LikelihoodSpec::new(Family::Gaussian, lambda).unwrap();
        let g = gradient(&a, &t, &d, &spec, Some(SigmaSq::new(1.0).unwrap())).unwrap();
        // only the penalty acts on ω_11 when γ_1 = 0
        assert!((g[a.omega_index(1, 1)] - -2.0 * lambda * 0.8).abs() < 1e-12);
        assert_eq!(g[a.gamma_index(0)], 0.0);
    }

    #[test]
    fn gamma_gamma_information_entry() {
        // p = 1, q = 1, γ_1 = 0: ∂²/∂γ_1² of −RSS/2σ² is −Σ σ(s_i)²/σ²
        let a = gaussian_arch(1, 1);
        let mut t = ParamVector::zeros(&a);
        t.set_omega(0, 1, 0.3);
        t.set_omega(1, 1, -1.1);
        t.set_gamma(0, 0.2);
        let d = Dataset::new(1, vec![-1.0, 0.0, 0.5, 2.0], vec![0.1, 0.4, -0.3, 1.0]).unwrap();
        let s2 = 0.5;
        let spec = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        let info = observed_information(&a, &t, &d, &spec, Some(SigmaSq::new(s2).unwrap())).unwrap();
        let expected: f64 = d
            .x()
            .iter()
            .map(|&x| {
                let h = 1.0 / (1.0 + (-(0.3 - 1.1 * x)).exp());
                h * h / s2
            })
            .sum();
        let gi = a.gamma_index(1);
        assert!((info[(gi, gi)] - expected).abs() < 1e-12);
        assert_eq!(info, info.transpose());
    }

    #[test]
    fn information_ignores_lambda() {
        let (a, t, d) = random_instance(5, 2, 2, 8);
        let s2 = Some(SigmaSq::new(1.3).unwrap());
        let i0 = observed_information(&a, &t, &d, &LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap(), s2).unwrap();
        let i1 = observed_information(&a, &t, &d, &LikelihoodSpec::new(Family::Gaussian, 5.0).unwrap(), s2).unwrap();
        assert_eq!(i0, i1);
    }

    #[test]
    fn argmax_matches_min_rss() {
        let (a, _, d) = random_instance(9, 2, 2, 12);
        let spec = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        let s2 = Some(SigmaSq::new(0.8).unwrap());
        let mut rng = stream_rng(9, 1);
        let candidates: Vec<ParamVector> = (0..25)
            .map(|_| ParamVector::from_vec(&a, (0..a.r()).map(|_| uniform(&mut rng, 2.0)).collect()).unwrap())
            .collect();
        let by_ll = candidates
            .iter()
            .enumerate()
            .max_by(|x, y| {
                log_likelihood(&a, x.1, &d, &spec, s2)
                    .unwrap()
                    .total_cmp(&log_likelihood(&a, y.1, &d, &spec, s2).unwrap())
            })
            .unwrap()
            .0;
        let by_rss = candidates
            .iter()
            .enumerate()
            .min_by(|x, y| rss(&a, x.1, &d).unwrap().total_cmp(&rss(&a, y.1, &d).unwrap()))
            .unwrap()
            .0;
        assert_eq!(by_ll, by_rss);
    }

    #[test]
    fn objective_gradient_matches_value() {
        let (a, t, d) = random_instance(21, 3, 2, 10);
        let obj = FitObjective { arch: &a, data: &d, family: Family::Gaussian, lambda: 0.05 };
        let mut g = vec![0.0; a.r()];
        obj.value_grad(t.as_slice(), &mut g);
        let h = 1e-6;
        for i in 0..a.r() {
            let mut tp = t.as_slice().to_vec();
            let mut tm = tp.clone();
            tp[i] += h;
            tm[i] -= h;
            let mut scratch = vec![0.0; a.r()];
            let fd = (obj.value_grad(&tp, &mut scratch) - obj.value_grad(&tm, &mut scratch)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6 * (1.0 + g[i].abs()), "coord {i}");
        }
    }
}
