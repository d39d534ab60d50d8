//! Hidden-layer size selection (BIC, k-fold CV) and the linear baseline.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use libm::{log, sqrt};
use nalgebra::{DMatrix, DVector};

use crate::effects::sample_sd;
use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, FitResult};
use crate::likelihood::{profile_log_likelihood, Family, LikelihoodSpec};
use crate::model::{forward_batch, Architecture, ColumnKind, Dataset};
use crate::rng::{mix_seed, permutation, stream_rng};
use crate::special::normal_two_sided_p;

/// Ordinary least squares with normal-theory standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// Intercept first, then one coefficient per covariate.
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub rss: f64,
    /// `RSS / (n − p − 1)`.
    pub sigma_sq: f64,
    pub n: usize,
}

impl LinearFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.beta[0] + self.beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    /// Unpenalized Gaussian log-likelihood at `σ̂² = RSS / n`.
    pub fn log_likelihood(&self) -> f64 {
        let n = self.n as f64;
        let s2 = self.rss / n;
        -0.5 * n * (log(2.0 * core::f64::consts::PI * s2) + 1.0)
    }
}

/// Relative pivot below which a design column counts as collinear.
const PIVOT_TOL: f64 = 1e-10;

/// OLS by the normal equations. Fails on rank-deficient designs, naming the
/// offending columns (0 = intercept).
pub fn fit_linear(data: &Dataset) -> Result<LinearFit> {
    let (n, p) = (data.n(), data.p());
    let m = p + 1;
    if n <= m {
        return Err(Error::InvalidInput(format!("linear model needs more rows ({n}) than coefficients ({m})")));
    }
    let mut xtx = DMatrix::<f64>::zeros(m, m);
    let mut xty = DVector::<f64>::zeros(m);
    let mut row = vec![1.0; m];
    for i in 0..n {
        row[1..].copy_from_slice(data.row(i));
        let y = data.y()[i];
        for a in 0..m {
            xty[a] += row[a] * y;
            for b in a..m {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    for a in 0..m {
        for b in 0..a {
            xtx[(a, b)] = xtx[(b, a)];
        }
    }

    let collinear = collinear_columns(&xtx);
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    let chol = xtx.clone().cholesky().ok_or_else(|| Error::RankDeficient((0..m).collect()))?;
    let beta = chol.solve(&xty);
    let inv = chol.inverse();

    let mut rss = 0.0;
    for i in 0..n {
        row[1..].copy_from_slice(data.row(i));
        let fitted: f64 = row.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        let r = data.y()[i] - fitted;
        rss += r * r;
    }
    let sigma_sq = rss / (n - m) as f64;
    let se: Vec<f64> = (0..m).map(|a| sqrt(sigma_sq * inv[(a, a)])).collect();
    let beta: Vec<f64> = beta.iter().copied().collect();
    let p_values = beta.iter().zip(&se).map(|(b, s)| normal_two_sided_p(b / s)).collect();
    Ok(LinearFit {
        beta,
        se,
        p_values,
        rss,
        sigma_sq,
        n,
    })
}

/// Gaussian elimination with scaled pivots on the Gram matrix; a column whose
/// pivot collapses relative to its diagonal is a linear combination of the
/// earlier ones.
fn collinear_columns(gram: &DMatrix<f64>) -> Vec<usize> {
    let m = gram.nrows();
    let mut a = gram.clone();
    let mut bad = Vec::new();
    for k in 0..m {
        let diag = gram[(k, k)];
        if !(a[(k, k)] > PIVOT_TOL * diag.max(f64::MIN_POSITIVE)) {
            bad.push(k);
            for j in 0..m {
                a[(k, j)] = 0.0;
                a[(j, k)] = 0.0;
            }
            continue;
        }
        for i in (k + 1)..m {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..m {
                a[(i, j)] -= f * a[(k, j)];
            }
        }
    }
    bad
}

/// `−2ℓ + K log n`.
pub fn bic_from_loglik(loglik: f64, k: usize, n: usize) -> f64 {
    -2.0 * loglik + k as f64 * log(n as f64)
}

/// Raw parameter count used by BIC: `r` plus one for the Gaussian variance.
pub fn bic_parameter_count(arch: &Architecture, family: Family) -> usize {
    match family {
        Family::Gaussian => arch.r() + 1,
        Family::Bernoulli => arch.r(),
    }
}

/// BIC of a fitted network, using the unpenalized log-likelihood whatever
/// `λ` was used for fitting.
pub fn bic(fit: &FitResult, arch: &Architecture, data: &Dataset) -> Result<f64> {
    if !fit.converged {
        return Err(Error::NotConverged);
    }
    let ll = profile_log_likelihood(arch, &fit.theta_hat, data, fit.family)?;
    Ok(bic_from_loglik(ll, bic_parameter_count(arch, fit.family), data.n()))
}

/// BIC of the linear model; `K = p + 2` (coefficients plus variance).
pub fn linear_bic(fit: &LinearFit) -> f64 {
    bic_from_loglik(fit.log_likelihood(), fit.beta.len() + 1, fit.n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Candidate {
    Linear,
    Network(usize),
}

impl Candidate {
    /// `0` for the linear model, `q` for a network.
    pub fn q(self) -> usize {
        match self {
            Candidate::Linear => 0,
            Candidate::Network(q) => q,
        }
    }

    pub fn from_q(q: usize) -> Self {
        if q == 0 {
            Candidate::Linear
        } else {
            Candidate::Network(q)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub rmse: f64,
    /// `sd(fold RMSEs) / √folds`.
    pub se: f64,
    pub fold_rmse: Vec<f64>,
}

/// Fold label of every row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = stream_rng(mix_seed(seed, 0xC0DE_F01D), 0);
    let order = permutation(&mut rng, n);
    let mut labels = vec![0; n];
    for (pos, &row) in order.iter().enumerate() {
        labels[row] = pos % folds;
    }
    labels
}

/// At least two folds and no more folds than rows.
pub fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InvalidInput(format!("{n} rows cannot fill {folds} folds")));
    }
    Ok(())
}

/// Re-standardizes the training and test rows with training statistics.
/// Returns `(train, test, response sd)`; the response is
/// standardized only for Gaussian fits. Values are mapped back to raw units
/// through the dataset's column metadata first.
fn restandardize(data: &Dataset, train_rows: &[usize], test_rows: &[usize], family: Family) -> Result<(Dataset, Dataset, f64)> {
    let p = data.p();
    let raw_x = |i: usize, j: usize| data.column_meta[j].to_raw(data.row(i)[j]);
    let raw_y = |i: usize| data.response_meta.as_ref().map_or(data.y()[i], |m| data.y()[i] * m.sd + m.mean);

    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    for j in 0..p {
        if data.column_meta[j].kind == ColumnKind::Continuous {
            let col: Vec<f64> = train_rows.iter().map(|&i| raw_x(i, j)).collect();
            let sd = sample_sd(&col);
            if !(sd > 0.0) {
                return Err(Error::InvalidInput(format!("column '{}' is constant in the training folds", data.column_meta[j].name)));
            }
            centers[j] = col.iter().sum::<f64>() / col.len() as f64;
            scales[j] = sd;
        }
    }
    let (ym, ys) = match family {
        Family::Gaussian => {
            let ys: Vec<f64> = train_rows.iter().map(|&i| raw_y(i)).collect();
            let sd = sample_sd(&ys);
            if !(sd > 0.0) {
                return Err(Error::InvalidInput("response is constant in the training folds".into()));
            }
            (ys.iter().sum::<f64>() / ys.len() as f64, sd)
        }
        Family::Bernoulli => (0.0, 1.0),
    };
    let build = |rows: &[usize]| -> Result<Dataset> {
        let mut x = Vec::with_capacity(rows.len() * p);
        for &i in rows {
            for j in 0..p {
                x.push((raw_x(i, j) - centers[j]) / scales[j]);
            }
        }
        let y = rows.iter().map(|&i| (raw_y(i) - ym) / ys).collect();
        let mut out = Dataset::new(p, x, y)?;
        out.column_meta = data.column_meta.clone();
        Ok(out)
    };
    Ok((build(train_rows)?, build(test_rows)?, ys))
}

/// Held-out RMSE (raw response units) of one fold.
pub fn cv_fold(
    candidate: Candidate,
    data: &Dataset,
    labels: &[usize],
    fold: usize,
    spec: &LikelihoodSpec,
    config: &FitConfig,
) -> Result<f64> {
    let train: Vec<usize> = (0..data.n()).filter(|&i| labels[i] != fold).collect();
    let test: Vec<usize> = (0..data.n()).filter(|&i| labels[i] == fold).collect();
    if test.is_empty() || train.is_empty() {
        return Err(Error::FoldFailed { fold, reason: "empty fold".into() });
    }
    let fail = |e: Error| Error::FoldFailed { fold, reason: e.to_string() };
    let (tr, te, ys) = restandardize(data, &train, &test, spec.family).map_err(fail)?;
    let pred: Vec<f64> = match candidate {
        Candidate::Linear => {
            let lin = fit_linear(&tr).map_err(fail)?;
            (0..te.n()).map(|i| lin.predict(te.row(i))).collect()
        }
        Candidate::Network(q) => {
            let arch = Architecture::new(data.p(), q, spec.family.output_activation()).map_err(fail)?;
            let cfg = FitConfig {
                seed: mix_seed(config.seed, fold as u64 + 1),
                ..*config
            };
            let f = fit(&arch, &tr, spec, &cfg).map_err(fail)?;
            forward_batch(&arch, &f.theta_hat, &te).map_err(fail)?
        }
    };
    let sse: f64 = pred
        .iter()
        .zip(te.y())
        .map(|(pz, yz)| {
            let diff = (pz - yz) * ys;
            diff * diff
        })
        .sum();
    Ok(sqrt(sse / te.n() as f64))
}

/// Combines fold RMSEs into the mean and its standard error.
pub fn summarize_folds(fold_rmse: Vec<f64>) -> CvResult {
    let k = fold_rmse.len() as f64;
    let rmse = fold_rmse.iter().sum::<f64>() / k;
    let se = sample_sd(&fold_rmse) / sqrt(k);
    CvResult { rmse, se, fold_rmse }
}

/// k-fold cross-validated RMSE on the raw response scale.
pub fn cross_validate(candidate: Candidate, data: &Dataset, folds: usize, spec: &LikelihoodSpec, config: &FitConfig) -> Result<CvResult> {
    check_folds(data.n(), folds)?;
    let labels = fold_assignment(data.n(), folds, config.seed);
    let fold_rmse = (0..folds)
        .map(|f| cv_fold(candidate, data, &labels, f, spec, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_folds(fold_rmse))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// `0` is the linear model.
    pub q: usize,
    pub bic: Option<f64>,
    pub cv_rmse: Option<f64>,
    pub cv_se: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionSweep {
    pub rows: Vec<SweepRow>,
}

impl SelectionSweep {
    /// Candidate with the smallest BIC.
    pub fn best_bic(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| r.bic.map(|b| (r.q, b)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(q, _)| q)
    }

    /// Candidate with the smallest CV RMSE.
    pub fn best_cv(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| r.cv_rmse.map(|b| (r.q, b)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(q, _)| q)
    }
}

/// BIC on the full data for one candidate.
pub fn candidate_bic(candidate: Candidate, data: &Dataset, spec: &LikelihoodSpec, config: &FitConfig) -> Result<f64> {
    match candidate {
        Candidate::Linear => Ok(linear_bic(&fit_linear(data)?)),
        Candidate::Network(q) => {
            let arch = Architecture::new(data.p(), q, spec.family.output_activation())?;
            let f = fit(&arch, data, spec, config)?;
            bic(&f, &arch, data)
        }
    }
}

/// Assembles a sweep row from the per-candidate results.
pub fn sweep_row(q: usize, bic: Result<f64>, cv: Result<CvResult>) -> SweepRow {
    let mut errors = Vec::new();
    let bic = bic.map_err(|e| errors.push(format!("bic: {e}"))).ok();
    let cv = cv.map_err(|e| errors.push(format!("cv: {e}"))).ok();
    SweepRow {
        q,
        bic,
        cv_rmse: cv.as_ref().map(|c| c.rmse),
        cv_se: cv.as_ref().map(|c| c.se),
        error: if errors.is_empty() { None } else { Some(errors.join("; ")) },
    }
}

/// BIC and CV RMSE for every candidate size (`0` = linear model).
pub fn sweep(data: &Dataset, q_list: &[usize], folds: usize, spec: &LikelihoodSpec, config: &FitConfig) -> Result<SelectionSweep> {
    if q_list.is_empty() {
        return Err(Error::InvalidInput("no candidate hidden-layer sizes".into()));
    }
    check_folds(data.n(), folds)?;
    let rows = q_list
        .iter()
        .map(|&q| {
            let c = Candidate::from_q(q);
            sweep_row(q, candidate_bic(c, data, spec, config), cross_validate(c, data, folds, spec, config))
        })
        .collect();
    Ok(SelectionSweep { rows })
}
