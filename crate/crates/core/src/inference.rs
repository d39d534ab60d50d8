//! Sandwich covariance and Wald tests.
//!
//! `Σ̂ = (I_o + 2λI)⁻¹ I_o (I_o + 2λI)⁻¹` and `A = (I_o + 2λI)⁻¹ I_o`. Both
//! share the eigenvectors of `I_o`, so they are assembled from one symmetric
//! eigendecomposition: an eigenvalue `e` of `I_o` maps to `e / (e + 2λ)²` in
//! `Σ̂` and to `e / (e + 2λ)` in `A`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use libm::{fabs, sqrt};
use nalgebra::{DMatrix, DVector};

use crate::canonical::{check_reducible, ReducibilityReport, DEFAULT_REDUCIBILITY_TOL};
use crate::error::{Error, Result};
use crate::fit::FitResult;
use crate::likelihood::{observed_information, Family, LikelihoodSpec, SigmaSq};
use crate::linalg::{from_eigen, spd_solve, sym_eigen};
use crate::model::{check_compatible, selection_matrix, Architecture, Dataset, ParamVector};
pub use crate::special::chi_square_survival;

/// Relative eigenvalue floor for the positive-definiteness flag.
pub const PD_RELATIVE_FLOOR: f64 = 1e-10;

/// Significance-code legend, in the usual `0 *** 0.001 ** 0.01 * 0.05` form.
pub const SIGNIFICANCE_LEGEND: &str = "Significance codes: 0 *** 0.001 ** 0.01 * 0.05";

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub sigma_hat: DMatrix<f64>,
    pub a_matrix: DMatrix<f64>,
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub lambda: f64,
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        self.sigma_hat.nrows()
    }

    /// `√Σ̂_jj`, or `None` when the diagonal entry is not positive.
    pub fn std_error(&self, index: usize) -> Option<f64> {
        let v = self.sigma_hat[(index, index)];
        (v > 0.0 && v.is_finite()).then(|| sqrt(v))
    }
}

/// PD test on a set of eigenvalues with the relative floor.
pub fn eigenvalues_positive_definite(min_eig: f64, max_eig: f64) -> bool {
    min_eig > PD_RELATIVE_FLOOR * max_eig.max(1.0)
}

/// Sandwich covariance from an observed information matrix.
pub fn sandwich_covariance(info: &DMatrix<f64>, lambda: f64) -> Result<CovarianceEstimate> {
    let r = info.nrows();
    if info.ncols() != r {
        return Err(Error::DimensionMismatch {
            what: "information matrix columns",
            expected: r,
            actual: info.ncols(),
        });
    }
    if r == 0 {
        return Err(Error::InvalidInput("empty information matrix".into()));
    }
    if let Some(i) = info.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "information matrix", index: i });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let mut sym = info.clone();
    crate::linalg::symmetrize(&mut sym);
    let (eig, vectors) = sym_eigen(&sym);

    let shifted: Vec<f64> = eig.iter().map(|e| e + 2.0 * lambda).collect();
    let scale = shifted.iter().fold(0.0f64, |m, v| m.max(fabs(*v)));
    let min_abs = shifted.iter().fold(f64::INFINITY, |m, v| m.min(fabs(*v)));
    if !(min_abs > r as f64 * f64::EPSILON * scale) {
        return Err(Error::SingularInformation { min_abs_eigenvalue: min_abs });
    }

    let sigma_eig: Vec<f64> = eig.iter().zip(&shifted).map(|(e, s)| e / (s * s)).collect();
    let sigma_hat = from_eigen(&vectors, &sigma_eig);
    let a_matrix = if lambda == 0.0 {
        DMatrix::identity(r, r)
    } else {
        let a_eig: Vec<f64> = eig.iter().zip(&shifted).map(|(e, s)| e / s).collect();
        from_eigen(&vectors, &a_eig)
    };
    let min_eigenvalue = sigma_eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max_eigenvalue = sigma_eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(CovarianceEstimate {
        sigma_hat,
        a_matrix,
        positive_definite: eigenvalues_positive_definite(min_eigenvalue, max_eigenvalue),
        min_eigenvalue,
        max_eigenvalue,
        lambda,
    })
}

/// Observed information at `theta` followed by the sandwich formula.
/// Gaussian models need `sigma_sq` (normally the profiled `RSS / n`).
pub fn estimate_covariance(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    spec: &LikelihoodSpec,
    sigma_sq: Option<SigmaSq>,
) -> Result<CovarianceEstimate> {
    let info = observed_information(arch, theta, data, spec, sigma_sq)?;
    sandwich_covariance(&info, spec.lambda())
}

/// [`estimate_covariance`] at a fit's estimate and profiled variance.
pub fn covariance_for_fit(arch: &Architecture, fit: &FitResult, data: &Dataset) -> Result<CovarianceEstimate> {
    let spec = LikelihoodSpec::new(fit.family, fit.lambda)?;
    let s2 = fit.sigma_sq_hat.map(SigmaSq::new).transpose()?;
    estimate_covariance(arch, &fit.theta_hat, data, &spec, s2)
}

/// `tr(S A Sᵀ)`.
pub fn effective_df(cov: &CovarianceEstimate, s_matrix: &DMatrix<f64>) -> f64 {
    (s_matrix * &cov.a_matrix * s_matrix.transpose()).trace()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WaldTarget {
    /// Flat parameter index.
    Parameter(usize),
    /// Covariate index `j ∈ 1..=p`.
    Covariate(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub target: WaldTarget,
}

/// `θ̂_j² / Σ̂_jj` against `χ²₁`.
pub fn wald_single(theta_hat: &ParamVector, cov: &CovarianceEstimate, index: usize) -> Result<WaldResult> {
    if index >= theta_hat.len() || theta_hat.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            what: "parameter index / covariance",
            expected: cov.dim(),
            actual: index.max(theta_hat.len()),
        });
    }
    let var = cov.sigma_hat[(index, index)];
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::NonPositiveVarianceEntry { index, value: var });
    }
    let t = theta_hat.as_slice()[index];
    let statistic = t * t / var;
    Ok(WaldResult {
        statistic,
        df: 1.0,
        p_value: chi_square_survival(statistic, 1.0),
        target: WaldTarget::Parameter(index),
    })
}

/// `ω̂_jᵀ (S Σ̂ Sᵀ)⁻¹ ω̂_j` against `χ²` with `tr(S A Sᵀ)` degrees of freedom.
pub fn wald_multi(theta_hat: &ParamVector, cov: &CovarianceEstimate, arch: &Architecture, j: usize) -> Result<WaldResult> {
    crate::model::check_theta(arch, theta_hat)?;
    if cov.dim() != arch.r() {
        return Err(Error::DimensionMismatch {
            what: "covariance dimension",
            expected: arch.r(),
            actual: cov.dim(),
        });
    }
    let s = selection_matrix(arch, j)?;
    let omega = DVector::from_column_slice(theta_hat.omega_row(j));
    let sub = &s * &cov.sigma_hat * s.transpose();
    let statistic = if arch.q() == 1 {
        let var = sub[(0, 0)];
        if !(var > 0.0) || !var.is_finite() {
            return Err(Error::SingularSubCovariance { covariate: j });
        }
        omega[0] * omega[0] / var
    } else {
        let solved = spd_solve(&sub, &omega).ok_or(Error::SingularSubCovariance { covariate: j })?;
        omega.dot(&solved)
    };
    let df = effective_df(cov, &s);
    if !(df > 0.0) || !statistic.is_finite() {
        return Err(Error::SingularSubCovariance { covariate: j });
    }
    Ok(WaldResult {
        statistic: statistic.max(0.0),
        df,
        p_value: chi_square_survival(statistic.max(0.0), df),
        target: WaldTarget::Covariate(j),
    })
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05, empty otherwise.
pub fn significance_code(p_value: f64) -> &'static str {
    if p_value < 0.001 {
        "***"
    } else if p_value < 0.01 {
        "**"
    } else if p_value < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterTest {
    pub index: usize,
    pub label: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub wald: Option<WaldResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovariateTest {
    /// Covariate index `j ∈ 1..=p`.
    pub index: usize,
    pub name: String,
    /// Flat indices of `ω_j1, …, ω_jq`.
    pub weight_indices: Vec<usize>,
    pub wald: Option<WaldResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceReport {
    pub p: usize,
    pub q: usize,
    pub family: Family,
    pub lambda: f64,
    pub sigma_sq_hat: Option<f64>,
    /// Every parameter in layout order (by input index, then hidden node,
    /// then the output weights).
    pub parameters: Vec<ParameterTest>,
    /// One multiple-parameter test per covariate, in covariate order.
    pub covariates: Vec<CovariateTest>,
    pub positive_definite: bool,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    pub reducibility: ReducibilityReport,
}

impl InferenceReport {
    pub fn parameter(&self, index: usize) -> &ParameterTest {
        &self.parameters[index]
    }

    /// `ω_jk` test for covariate `j ∈ 1..=p` and node `k ∈ 1..=q`.
    pub fn weight(&self, j: usize, k: usize) -> &ParameterTest {
        &self.parameters[j * self.q + k - 1]
    }
}

/// Report for a converged fit.
pub fn summarize(fit: &FitResult, cov: &CovarianceEstimate, arch: &Architecture, data: &Dataset) -> Result<InferenceReport> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    summarize_theta(arch, &fit.theta_hat, cov, data, fit.family, fit.lambda, fit.sigma_sq_hat)
}

/// Report for an arbitrary parameter vector (e.g. a loaded model). Failed
/// cells carry an error message instead of aborting the report.
pub fn summarize_theta(
    arch: &Architecture,
    theta: &ParamVector,
    cov: &CovarianceEstimate,
    data: &Dataset,
    family: Family,
    lambda: f64,
    sigma_sq_hat: Option<f64>,
) -> Result<InferenceReport> {
    check_compatible(arch, theta, data)?;
    if cov.dim() != arch.r() {
        return Err(Error::DimensionMismatch {
            what: "covariance dimension",
            expected: arch.r(),
            actual: cov.dim(),
        });
    }
    let parameters = (0..arch.r())
        .map(|i| {
            let (wald, error) = split(wald_single(theta, cov, i));
            ParameterTest {
                index: i,
                label: arch.param_label(i),
                estimate: theta.as_slice()[i],
                std_error: cov.std_error(i),
                wald,
                error,
            }
        })
        .collect();
    let covariates = (1..=arch.p())
        .map(|j| {
            let (wald, error) = split(wald_multi(theta, cov, arch, j));
            CovariateTest {
                index: j,
                name: data.column_meta[j - 1].name.clone(),
                weight_indices: (1..=arch.q()).map(|k| arch.omega_index(j, k)).collect(),
                wald,
                error,
            }
        })
        .collect();
    Ok(InferenceReport {
        p: arch.p(),
        q: arch.q(),
        family,
        lambda,
        sigma_sq_hat,
        parameters,
        covariates,
        positive_definite: cov.positive_definite,
        min_eigenvalue: cov.min_eigenvalue,
        max_eigenvalue: cov.max_eigenvalue,
        reducibility: check_reducible(arch, theta, data, DEFAULT_REDUCIBILITY_TOL)?,
    })
}

fn split(r: Result<WaldResult>) -> (Option<WaldResult>, Option<String>) {
    match r {
        Ok(w) => (Some(w), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{apply_symmetry, SymmetryOp};
    use crate::fit::{fit, FitConfig};
    use crate::likelihood::observed_information;
    use crate::model::{forward_batch, OutputActivation};
    use crate::rng::{standard_normal, stream_rng, uniform};
    use proptest::prelude::*;
    use std::vec;
    use std::vec::Vec;

    fn random_spd(r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 0);
        let b = DMatrix::from_fn(r, r + 2, |_, _| uniform(&mut rng, 1.0));
        &b * b.transpose() + DMatrix::identity(r, r) * 0.1
    }

    #[test]
    fn lambda_zero_inverts() {
        let info = random_spd(7, 1);
        let cov = sandwich_covariance(&info, 0.0).unwrap();
        let prod = &cov.sigma_hat * &info;
        assert!((prod - DMatrix::identity(7, 7)).abs().max() < 1e-8);
        assert_eq!(cov.a_matrix, DMatrix::identity(7, 7));
        assert!(cov.positive_definite);
    }

    #[test]
    fn scalar_closed_form() {
        let info = DMatrix::identity(5, 5) * 2.0;
        let cov = sandwich_covariance(&info, 0.01).unwrap();
        for i in 0..5 {
            assert!((cov.sigma_hat[(i, i)] - 2.0 / (2.02f64 * 2.02)).abs() < 1e-15);
            assert!((cov.sigma_hat[(i, i)] - 0.4901480).abs() < 1e-7);
        }
        let s = DMatrix::from_fn(2, 5, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
        let df = effective_df(&cov, &s);
        assert!((df - 2.0 * 2.0 / 2.02).abs() < 1e-14);
    }

    #[test]
    fn huge_ridge_keeps_psd_information_positive() {
        let info = random_spd(6, 4) * 1e4;
        let lambda = 1e6;
        let cov = sandwich_covariance(&info, lambda).unwrap();
        let (eig, _) = sym_eigen(&info);
        let mut expected: Vec<f64> = eig.iter().map(|e| e / ((e + 2.0 * lambda) * (e + 2.0 * lambda))).collect();
        expected.sort_by(f64::total_cmp);
        assert!(cov.min_eigenvalue > 0.0);
        assert!((cov.min_eigenvalue - expected[0]).abs() <= 1e-9 * expected[0]);
        assert!((cov.max_eigenvalue - expected[5]).abs() <= 1e-9 * expected[5]);
    }

    #[test]
    fn effective_df_is_q_when_unpenalized() {
        let a = Architecture::new(3, 4, OutputActivation::Identity).unwrap();
        let cov = sandwich_covariance(&random_spd(a.r(), 4), 0.0).unwrap();
        for j in 1..=3 {
            assert_eq!(effective_df(&cov, &selection_matrix(&a, j).unwrap()), 4.0);
        }
    }

    #[test]
    fn effective_df_matches_eigen_oracle() {
        let a = Architecture::new(2, 3, OutputActivation::Identity).unwrap();
        let info = random_spd(a.r(), 8);
        let lambda = 0.01;
        let cov = sandwich_covariance(&info, lambda).unwrap();
        // A = (I + 2λ I_o⁻¹)⁻¹ computed through a direct inverse
        let shifted = &info + DMatrix::identity(a.r(), a.r()) * (2.0 * lambda);
        let a_direct = shifted.try_inverse().unwrap() * &info;
        for j in 1..=2 {
            let s = selection_matrix(&a, j).unwrap();
            let expected: f64 = (0..3).map(|k| a_direct[(a.omega_index(j, k + 1), a.omega_index(j, k + 1))]).sum();
            assert!((effective_df(&cov, &s) - expected).abs() < 1e-10);
            assert!(effective_df(&cov, &s) <= 3.0);
        }
    }

    #[test]
    fn singular_information_is_reported() {
        let mut info = DMatrix::identity(3, 3);
        info[(2, 2)] = 0.0;
        let err = sandwich_covariance(&info, 0.0).unwrap_err();
        assert!(matches!(err, Error::SingularInformation { .. }));
        assert!(err.to_string().contains("larger ridge penalty"));
        // the ridge term repairs it
        assert!(sandwich_covariance(&info, 0.01).is_ok());
    }

    fn diag_cov(d: &[f64], lambda: f64) -> CovarianceEstimate {
        let m = DMatrix::from_diagonal(&DVector::from_column_slice(d));
        CovarianceEstimate {
            sigma_hat: m.clone(),
            a_matrix: DMatrix::identity(d.len(), d.len()),
            positive_definite: true,
            min_eigenvalue: 1.0,
            max_eigenvalue: 1.0,
            lambda,
        }
    }

    #[test]
    fn single_parameter_examples() {
        let a = Architecture::new(1, 1, OutputActivation::Identity).unwrap();
        let cov = diag_cov(&[1.0; 4], 0.0);
        let mut t = ParamVector::zeros(&a);
        let w = wald_single(&t, &cov, 1).unwrap();
        assert_eq!((w.statistic, w.p_value, w.df), (0.0, 1.0, 1.0));
        t.set_omega(1, 1, 2.0);
        let w = wald_single(&t, &cov, 1).unwrap();
        assert_eq!(w.statistic, 4.0);
        let erfc_oracle = libm::erfc(2.0 / core::f64::consts::SQRT_2);
        assert!((w.p_value - erfc_oracle).abs() < 1e-14);
        assert!((w.p_value - 0.0455003).abs() < 1e-7);

        let cov = diag_cov(&[1.0, 0.25, 1.0, 1.0], 0.0);
        t.set_omega(1, 1, 1.959964 * 0.5);
        assert!((wald_single(&t, &cov, 1).unwrap().p_value - 0.05).abs() < 1e-6);

        let bad = diag_cov(&[1.0, 0.0, 1.0, 1.0], 0.0);
        assert!(matches!(wald_single(&t, &bad, 1), Err(Error::NonPositiveVarianceEntry { index: 1, .. })));
    }

    #[test]
    fn multi_parameter_examples() {
        let a = Architecture::new(1, 2, OutputActivation::Identity).unwrap();
        let cov = diag_cov(&[1.0; 7], 0.0);
        let mut t = ParamVector::zeros(&a);
        let w = wald_multi(&t, &cov, &a, 1).unwrap();
        assert_eq!((w.statistic, w.p_value), (0.0, 1.0));
        t.set_omega(1, 1, 2.0);
        let w = wald_multi(&t, &cov, &a, 1).unwrap();
        assert!((w.statistic - 4.0).abs() < 1e-15);
        assert_eq!(w.df, 2.0);
        assert!((w.p_value - (-2.0f64).exp()).abs() < 1e-14);
        assert!(matches!(wald_multi(&t, &cov, &a, 0), Err(Error::CovariateOutOfRange { .. })));

        let mut singular = cov.clone();
        singular.sigma_hat[(2, 2)] = 0.0;
        singular.sigma_hat[(3, 3)] = 0.0;
        assert!(matches!(wald_multi(&t, &singular, &a, 1), Err(Error::SingularSubCovariance { covariate: 1 })));
    }

    #[test]
    fn multi_equals_single_for_one_node() {
        let a = Architecture::new(3, 1, OutputActivation::Identity).unwrap();
        let cov = sandwich_covariance(&random_spd(a.r(), 12), 0.01).unwrap();
        let mut rng = stream_rng(12, 1);
        let t = ParamVector::from_vec(&a, (0..a.r()).map(|_| uniform(&mut rng, 1.0)).collect()).unwrap();
        for j in 1..=3 {
            let m = wald_multi(&t, &cov, &a, j).unwrap();
            let s = wald_single(&t, &cov, a.omega_index(j, 1)).unwrap();
            assert_eq!(m.statistic, s.statistic);
        }
    }

    #[test]
    fn scaling_covariance_scales_statistics() {
        let a = Architecture::new(2, 2, OutputActivation::Identity).unwrap();
        let cov = sandwich_covariance(&random_spd(a.r(), 13), 0.01).unwrap();
        let mut rng = stream_rng(13, 1);
        let t = ParamVector::from_vec(&a, (0..a.r()).map(|_| uniform(&mut rng, 1.0)).collect()).unwrap();
        let mut scaled = cov.clone();
        scaled.sigma_hat *= 3.0;
        for j in 1..=2 {
            let w0 = wald_multi(&t, &cov, &a, j).unwrap().statistic;
            let w1 = wald_multi(&t, &scaled, &a, j).unwrap().statistic;
            assert!((w1 - w0 / 3.0).abs() < 1e-12 * w0.max(1.0));
        }
        for i in 0..a.r() {
            let w0 = wald_single(&t, &cov, i).unwrap().statistic;
            let w1 = wald_single(&t, &scaled, i).unwrap().statistic;
            assert!((w1 - w0 / 3.0).abs() < 1e-12 * w0.max(1.0));
        }
    }

    #[test]
    fn significance_codes() {
        assert_eq!(significance_code(0.0005), "***");
        assert_eq!(significance_code(0.001), "**");
        assert_eq!(significance_code(0.009), "**");
        assert_eq!(significance_code(0.04), "*");
        assert_eq!(significance_code(0.05), "");
    }

    /// Cyclic Jacobi eigenvalue solver, independent of the library one.
    fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        let n = m.nrows();
        let mut a = m.clone();
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[(p, q)].abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let (akp, akq) = (a[(k, p)], a[(k, q)]);
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                }
            }
        }
        (0..n).map(|i| a[(i, i)]).collect()
    }

    #[test]
    fn pd_flag_matches_independent_eigensolver() {
        let mut rng = stream_rng(77, 0);
        let mut flagged = [0usize; 2];
        for trial in 0..50 {
            let r = 3 + trial % 5;
            let b = DMatrix::from_fn(r, r, |_, _| uniform(&mut rng, 1.0));
            // mix definite and indefinite symmetric matrices
            let shift = if trial % 2 == 0 { 0.2 } else { -0.3 };
            let info = &b * b.transpose() + DMatrix::identity(r, r) * shift;
            let Ok(cov) = sandwich_covariance(&info, 0.01) else { continue };
            let eig = jacobi_eigenvalues(&cov.sigma_hat);
            let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(cov.positive_definite, min > PD_RELATIVE_FLOOR * max.max(1.0), "trial {trial}");
            flagged[cov.positive_definite as usize] += 1;
        }
        assert!(flagged[0] > 0 && flagged[1] > 0);
    }

    fn fitted_instance(lambda: f64) -> (Architecture, FitResult, Dataset) {
        let a = Architecture::new(3, 2, OutputActivation::Identity).unwrap();
        let mut truth = ParamVector::zeros(&a);
        let vals = [0.2, -0.3, 1.0, -0.6, 0.0, 0.0, 0.7, 0.9, 0.4, 2.5, 3.5];
        truth.as_mut_slice().copy_from_slice(&vals);
        let n = 400;
        let mut rng = stream_rng(31, 0);
        let x: Vec<f64> = (0..3 * n).map(|_| standard_normal(&mut rng)).collect();
        let d0 = Dataset::new(3, x.clone(), vec![0.0; n]).unwrap();
        let y: Vec<f64> = forward_batch(&a, &truth, &d0).unwrap().iter().map(|m| m + 0.5 * standard_normal(&mut rng)).collect();
        let d = Dataset::new(3, x, y).unwrap();
        let spec = LikelihoodSpec::new(Family::Gaussian, lambda).unwrap();
        let f = fit(&a, &d, &spec, &FitConfig { n_restarts: 4, seed: 3, ..FitConfig::default() }).unwrap();
        (a, f, d)
    }

    #[test]
    fn report_matches_recomputation() {
        let (a, f, d) = fitted_instance(0.01);
        let cov = covariance_for_fit(&a, &f, &d).unwrap();
        let rep = summarize(&f, &cov, &a, &d).unwrap();
        assert_eq!(rep.parameters.len(), a.r());
        for (i, pt) in rep.parameters.iter().enumerate() {
            let direct = wald_single(&f.theta_hat, &cov, i).unwrap();
            assert_eq!(pt.wald.unwrap(), direct);
        }
        for ct in &rep.covariates {
            let direct = wald_multi(&f.theta_hat, &cov, &a, ct.index).unwrap();
            assert_eq!(ct.wald.unwrap(), direct);
        }
        // x2 has no effect in the truth, x1 and x3 do
        assert!(rep.covariates[0].wald.unwrap().p_value < 0.001);
        assert!(rep.covariates[2].wald.unwrap().p_value < 0.001);
    }

    #[test]
    fn report_with_unit_diagonal_matches_single_tests() {
        let (a, f, d) = fitted_instance(0.01);
        let cov = diag_cov(&vec![1.0; a.r()], 0.01);
        let rep = summarize(&f, &cov, &a, &d).unwrap();
        for pt in &rep.parameters {
            assert_eq!(pt.wald.unwrap().p_value, wald_single(&f.theta_hat, &cov, pt.index).unwrap().p_value);
        }
    }

    #[test]
    fn covariate_tests_are_symmetry_invariant() {
        let (a, f, d) = fitted_instance(0.0);
        let spec = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        let s2 = Some(SigmaSq::new(f.sigma_sq_hat.unwrap()).unwrap());
        let base = estimate_covariance(&a, &f.theta_hat, &d, &spec, s2).unwrap();
        for op in SymmetryOp::all(2) {
            let moved = apply_symmetry(&f.theta_hat, &op);
            let cov = estimate_covariance(&a, &moved, &d, &spec, s2).unwrap();
            for j in 1..=3 {
                let p0 = wald_multi(&f.theta_hat, &base, &a, j).unwrap().p_value;
                let p1 = wald_multi(&moved, &cov, &a, j).unwrap().p_value;
                assert!((p0 - p1).abs() < 1e-6, "op {op:?} j {j}: {p0} vs {p1}");
            }
        }
    }

    #[test]
    fn sandwich_matches_finite_difference_information() {
        let (a, f, d) = fitted_instance(0.01);
        let s2 = f.sigma_sq_hat.unwrap();
        let spec0 = LikelihoodSpec::new(Family::Gaussian, 0.0).unwrap();
        let sigma = Some(SigmaSq::new(s2).unwrap());
        let ll = |t: &[f64]| {
            crate::likelihood::log_likelihood(&a, &ParamVector::from_vec(&a, t.to_vec()).unwrap(), &d, &spec0, sigma).unwrap()
        };
        let r = a.r();
        let h = 1e-4;
        let t0 = f.theta_hat.as_slice().to_vec();
        let mut fd = DMatrix::zeros(r, r);
        for i in 0..r {
            for j in i..r {
                let eval = |di: f64, dj: f64| {
                    let mut t = t0.clone();
                    t[i] += di;
                    t[j] += dj;
                    ll(&t)
                };
                let v = -(eval(h, h) - eval(h, -h) - eval(-h, h) + eval(-h, -h)) / (4.0 * h * h);
                fd[(i, j)] = v;
                fd[(j, i)] = v;
            }
        }
        let analytic = observed_information(&a, &f.theta_hat, &d, &spec0, sigma).unwrap();
        let c1 = sandwich_covariance(&analytic, 0.01).unwrap();
        let c2 = sandwich_covariance(&fd, 0.01).unwrap();
        assert!((c1.sigma_hat - c2.sigma_hat).abs().max() < 1e-3);
    }

    proptest! {
        #[test]
        fn survival_monotone(df in 0.2f64..30.0, x in 0.0f64..60.0, dx in 0.0f64..10.0) {
            prop_assert!(chi_square_survival(x + dx, df) <= chi_square_survival(x, df));
        }
    }
}
