//! Partial dependence and partial covariate effects (PCE).
//!
//! `NN̄(v) = mean_i NN(x_i with column j set to v)` and
//! `β̂(v, d) = NN̄(v + d) − NN̄(v)`. Pointwise standard errors use the delta
//! method with the analytic gradient of `β̂` in `θ`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::inference::CovarianceEstimate;
use crate::likelihood::backprop;
use crate::linalg::sigmoid;
use crate::model::{check_compatible, eta_with_hidden, Architecture, ColumnKind, ColumnMeta, Dataset, OutputActivation, ParamVector, ResponseMeta};
use crate::special::z_for_level;

/// Default number of grid points.
pub const DEFAULT_GRID_POINTS: usize = 101;

/// A covariate held fixed while another one is varied.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioning {
    /// Covariate index `k ∈ 1..=p`.
    pub covariate: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PceConfig {
    /// Covariate index `j ∈ 1..=p`.
    pub covariate: usize,
    pub d: f64,
    pub grid: Vec<f64>,
    pub level: f64,
    pub conditioning: Option<Conditioning>,
}

impl PceConfig {
    /// Defaults: `d` = sample sd of column `j`, 101 grid points over
    /// `[min, max − d]`, 95% bands, no conditioning.
    pub fn new(data: &Dataset, covariate: usize) -> Result<Self> {
        check_covariate(data.p(), covariate)?;
        let col = data.column(covariate - 1);
        let d = sample_sd(&col);
        Ok(Self {
            covariate,
            d,
            grid: default_grid(&col, d, DEFAULT_GRID_POINTS),
            level: 0.95,
            conditioning: None,
        })
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        check_covariate(p, self.covariate)?;
        if self.grid.is_empty() {
            return Err(Error::InvalidInput("PCE grid is empty".into()));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) || self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("PCE grid must be finite and strictly increasing".into()));
        }
        if !self.d.is_finite() {
            return Err(Error::InvalidInput(format!("PCE step d must be finite, got {}", self.d)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidInput(format!("confidence level must be in (0, 1), got {}", self.level)));
        }
        if let Some(c) = &self.conditioning {
            check_covariate(p, c.covariate)?;
            if c.covariate == self.covariate {
                return Err(Error::InvalidInput("conditioning covariate must differ from the varied one".into()));
            }
            if c.values.is_empty() || c.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("conditioning values must be finite and nonempty".into()));
            }
        }
        Ok(())
    }
}

fn check_covariate(p: usize, j: usize) -> Result<()> {
    if j == 0 || j > p {
        return Err(Error::CovariateOutOfRange { index: j, p });
    }
    Ok(())
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
}

/// `points` equally spaced values over `[min, max − d]`; a single point when
/// the interval is empty.
pub fn default_grid(column: &[f64], d: f64, points: usize) -> Vec<f64> {
    let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max) - d;
    if !(hi > lo) || points < 2 {
        return vec![lo];
    }
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i + 1 == points { hi } else { lo + step * i as f64 }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffectScale {
    Standardized,
    Original,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcePoint {
    pub x: f64,
    pub beta_hat: f64,
    pub se: f64,
    pub lo: f64,
    pub hi: f64,
}

/// A pinned covariate value attached to a conditioned curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionValue {
    pub covariate: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PceCurve {
    pub covariate: usize,
    pub d: f64,
    pub level: f64,
    pub condition: Option<ConditionValue>,
    pub points: Vec<PcePoint>,
    pub scale: EffectScale,
}

/// Pins applied to every row: `(0-based column, value)`.
type Pins<'a> = &'a [(usize, f64)];

fn mean_output(arch: &Architecture, theta: &[f64], data: &Dataset, pins: Pins, grad: Option<&mut [f64]>) -> f64 {
    let (p, q) = (arch.p(), arch.q());
    let g0 = arch.gamma_index(0);
    let n = data.n() as f64;
    let mut row = vec![0.0; p];
    let mut hidden = vec![0.0; q];
    let mut total = 0.0;
    let mut grad = grad;
    for i in 0..data.n() {
        row.copy_from_slice(data.row(i));
        for &(c, v) in pins {
            row[c] = v;
        }
        let eta = eta_with_hidden(p, q, theta, &row, &mut hidden);
        let (out, slope) = match arch.output_activation {
            OutputActivation::Identity => (eta, 1.0),
            OutputActivation::Logistic => {
                let m = sigmoid(eta);
                (m, m * (1.0 - m))
            }
        };
        total += out;
        if let Some(g) = grad.as_deref_mut() {
            backprop(p, q, theta, &row, &hidden, slope / n, g0, g);
        }
    }
    total / n
}

/// `NN̄(x_value)` for covariate `j ∈ 1..=p`; `data` is not modified.
pub fn partial_dependence(arch: &Architecture, theta: &ParamVector, data: &Dataset, j: usize, x_value: f64) -> Result<f64> {
    check_compatible(arch, theta, data)?;
    check_covariate(arch.p(), j)?;
    Ok(mean_output(arch, theta.as_slice(), data, &[(j - 1, x_value)], None))
}

/// `β̂(x, d)` and its gradient in `θ`, with optional extra pins (1-based
/// covariate, value).
pub fn pce_with_gradient(
    arch: &Architecture,
    theta: &ParamVector,
    data: &Dataset,
    j: usize,
    x: f64,
    d: f64,
    extra: Option<(usize, f64)>,
) -> Result<(f64, Vec<f64>)> {
    check_compatible(arch, theta, data)?;
    check_covariate(arch.p(), j)?;
    if let Some((k, _)) = extra {
        check_covariate(arch.p(), k)?;
    }
    let r = arch.r();
    let mut g_hi = vec![0.0; r];
    let mut g_lo = vec![0.0; r];
    let mut pins: Vec<(usize, f64)> = Vec::with_capacity(2);
    if let Some((k, v)) = extra {
        pins.push((k - 1, v));
    }
    pins.push((j - 1, x + d));
    let hi = mean_output(arch, theta.as_slice(), data, &pins, Some(&mut g_hi));
    let last = pins.len() - 1;
    pins[last].1 = x;
    let lo = mean_output(arch, theta.as_slice(), data, &pins, Some(&mut g_lo));
    let g = g_hi.iter().zip(&g_lo).map(|(a, b)| a - b).collect();
    Ok((hi - lo, g))
}

fn delta_se(cov: &CovarianceEstimate, g: &[f64]) -> f64 {
    let gv = DVector::from_column_slice(g);
    sqrt((&cov.sigma_hat * &gv).dot(&gv).max(0.0))
}

fn point(cov: &CovarianceEstimate, x: f64, beta_hat: f64, g: &[f64], z: f64) -> PcePoint {
    let se = delta_se(cov, g);
    PcePoint {
        x,
        beta_hat,
        se,
        lo: beta_hat - z * se,
        hi: beta_hat + z * se,
    }
}

fn require_pd(cov: &CovarianceEstimate, arch: &Architecture) -> Result<()> {
    if cov.dim() != arch.r() {
        return Err(Error::DimensionMismatch {
            what: "covariance dimension",
            expected: arch.r(),
            actual: cov.dim(),
        });
    }
    if !cov.positive_definite {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

/// PCE curve(s) on the standardized scale: one curve, or one per
/// conditioning value.
pub fn pce_curve(
    arch: &Architecture,
    theta: &ParamVector,
    cov: &CovarianceEstimate,
    data: &Dataset,
    config: &PceConfig,
) -> Result<Vec<PceCurve>> {
    check_compatible(arch, theta, data)?;
    config.validate(arch.p())?;
    require_pd(cov, arch)?;
    let z = z_for_level(config.level);
    let conditions: Vec<Option<ConditionValue>> = match &config.conditioning {
        None => vec![None],
        Some(c) => c
            .values
            .iter()
            .map(|&value| Some(ConditionValue { covariate: c.covariate, value }))
            .collect(),
    };
    conditions
        .into_iter()
        .map(|condition| {
            let extra = condition.map(|c| (c.covariate, c.value));
            let points = config
                .grid
                .iter()
                .map(|&x| {
                    let (b, g) = pce_with_gradient(arch, theta, data, config.covariate, x, config.d, extra)?;
                    Ok(point(cov, x, b, &g, z))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(PceCurve {
                covariate: config.covariate,
                d: config.d,
                level: config.level,
                condition,
                points,
                scale: EffectScale::Standardized,
            })
        })
        .collect()
}

/// Effect of switching dummy column `j` from 0 to 1, with a 95% band.
pub fn pce_binary(arch: &Architecture, theta: &ParamVector, cov: &CovarianceEstimate, data: &Dataset, j: usize) -> Result<PcePoint> {
    check_compatible(arch, theta, data)?;
    check_covariate(arch.p(), j)?;
    if data.column_meta[j - 1].kind != ColumnKind::Dummy {
        return Err(Error::NotDummy(j));
    }
    let config = PceConfig {
        covariate: j,
        d: 1.0,
        grid: vec![0.0],
        level: 0.95,
        conditioning: None,
    };
    Ok(pce_curve(arch, theta, cov, data, &config)?.remove(0).points[0])
}

/// Values a covariate is pinned at when screening for interactions:
/// mean ± one sd for continuous columns, 0 and 1 for dummy columns.
pub fn interaction_values(data: &Dataset, k: usize) -> Result<[f64; 2]> {
    check_covariate(data.p(), k)?;
    let col = data.column(k - 1);
    Ok(match data.column_meta[k - 1].kind {
        ColumnKind::Dummy => [0.0, 1.0],
        ColumnKind::Continuous => {
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let sd = sample_sd(&col);
            [mean - sd, mean + sd]
        }
    })
}

/// Two PCE curves for covariate `j` with covariate `k` pinned at the
/// [`interaction_values`]. Uses `base` for everything except conditioning.
pub fn interaction_screen(
    arch: &Architecture,
    theta: &ParamVector,
    cov: &CovarianceEstimate,
    data: &Dataset,
    base: &PceConfig,
    k: usize,
) -> Result<(PceCurve, PceCurve)> {
    if base.covariate == k {
        return Err(Error::InvalidInput("interaction screen needs two different covariates".into()));
    }
    let values = interaction_values(data, k)?;
    let config = PceConfig {
        conditioning: Some(Conditioning {
            covariate: k,
            values: values.to_vec(),
        }),
        ..base.clone()
    };
    let mut curves = pce_curve(arch, theta, cov, data, &config)?;
    let second = curves.pop().expect("two conditioning values");
    let first = curves.pop().expect("two conditioning values");
    Ok((first, second))
}

/// Maps a standardized-scale curve back to raw units: the grid (and any
/// pinned value) through the covariate's mean / sd, effects through the
/// response sd.
pub fn to_original_scale(curve: &PceCurve, column_meta: &[ColumnMeta], response_meta: Option<&ResponseMeta>) -> Result<PceCurve> {
    if curve.scale == EffectScale::Original {
        return Ok(curve.clone());
    }
    let meta = column_meta
        .get(curve.covariate.wrapping_sub(1))
        .ok_or_else(|| Error::MissingMetadata(format!("column metadata for covariate {}", curve.covariate)))?;
    let ysd = response_meta.map_or(1.0, |m| m.sd);
    let condition = match curve.condition {
        Some(c) => {
            let m = column_meta
                .get(c.covariate.wrapping_sub(1))
                .ok_or_else(|| Error::MissingMetadata(format!("column metadata for covariate {}", c.covariate)))?;
            Some(ConditionValue {
                covariate: c.covariate,
                value: m.to_raw(c.value),
            })
        }
        None => None,
    };
    Ok(PceCurve {
        covariate: curve.covariate,
        d: curve.d * meta.sd,
        level: curve.level,
        condition,
        points: curve
            .points
            .iter()
            .map(|pt| PcePoint {
                x: meta.to_raw(pt.x),
                beta_hat: pt.beta_hat * ysd,
                se: pt.se * ysd,
                lo: pt.lo * ysd,
                hi: pt.hi * ysd,
            })
            .collect(),
        scale: EffectScale::Original,
    })
}

/// Label such as `smoker=1` for a conditioned curve.
pub fn condition_label(curve: &PceCurve, column_meta: &[ColumnMeta]) -> String {
    match curve.condition {
        None => String::new(),
        Some(c) => {
            let name = column_meta.get(c.covariate.wrapping_sub(1)).map_or_else(|| format!("x{}", c.covariate), |m| m.name.clone());
            format!("{name}={}", c.value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::sandwich_covariance;
    use crate::model::forward;
    use crate::rng::{standard_normal, stream_rng, uniform};
    use nalgebra::DMatrix;
    use std::vec::Vec;

    fn setup(p: usize, q: usize, n: usize, seed: u64) -> (Architecture, ParamVector, Dataset, CovarianceEstimate) {
        let a = Architecture::new(p, q, OutputActivation::Identity).unwrap();
        let mut rng = stream_rng(seed, 0);
        let t = ParamVector::from_vec(&a, (0..a.r()).map(|_| uniform(&mut rng, 1.5)).collect()).unwrap();
        let x: Vec<f64> = (0..n * p).map(|_| standard_normal(&mut rng)).collect();
        let d = Dataset::new(p, x, vec![0.0; n]).unwrap();
        let b = DMatrix::from_fn(a.r(), a.r(), |_, _| uniform(&mut rng, 1.0));
        let info = &b * b.transpose() + DMatrix::identity(a.r(), a.r());
        let cov = sandwich_covariance(&info, 0.01).unwrap();
        (a, t, d, cov)
    }

    #[test]
    fn partial_dependence_single_row() {
        let (a, t, d, _) = setup(3, 2, 1, 1);
        let mut row = d.row(0).to_vec();
        row[1] = 0.37;
        assert_eq!(partial_dependence(&a, &t, &d, 2, 0.37).unwrap(), forward(&a, &t, &row).unwrap());
    }

    #[test]
    fn partial_dependence_loop_oracle() {
        let (a, t, d, _) = setup(3, 2, 5, 2);
        let mut acc = 0.0;
        for i in 0..5 {
            let mut row = d.row(i).to_vec();
            row[0] = -0.8;
            acc += forward(&a, &t, &row).unwrap();
        }
        assert!((partial_dependence(&a, &t, &d, 1, -0.8).unwrap() - acc / 5.0).abs() < 1e-12);
    }

    #[test]
    fn disconnected_covariate_has_flat_dependence_and_zero_effect() {
        let (a, mut t, d, cov) = setup(3, 2, 30, 3);
        t.set_omega(2, 1, 0.0);
        t.set_omega(2, 2, 0.0);
        let v0 = partial_dependence(&a, &t, &d, 2, -2.0).unwrap();
        let v1 = partial_dependence(&a, &t, &d, 2, 5.0).unwrap();
        assert_eq!(v0, v1);
        let cfg = PceConfig::new(&d, 2).unwrap();
        for pt in &pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0].points {
            assert_eq!(pt.beta_hat, 0.0);
        }
    }

    #[test]
    fn zero_step_gives_zero_effect_and_se() {
        let (a, t, d, cov) = setup(2, 3, 20, 4);
        let cfg = PceConfig { d: 0.0, ..PceConfig::new(&d, 1).unwrap() };
        for pt in &pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0].points {
            assert_eq!((pt.beta_hat, pt.se), (0.0, 0.0));
        }
    }

    #[test]
    fn bands_are_symmetric() {
        let (a, t, d, cov) = setup(2, 2, 20, 5);
        let cfg = PceConfig::new(&d, 1).unwrap();
        assert_eq!(cfg.grid.len(), DEFAULT_GRID_POINTS);
        for pt in &pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0].points {
            assert!(pt.lo <= pt.beta_hat && pt.beta_hat <= pt.hi);
            assert!(((pt.hi - pt.beta_hat) - (pt.beta_hat - pt.lo)).abs() < 1e-12);
            assert!(((pt.hi - pt.beta_hat) - 1.959964 * pt.se).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_gradient_matches_finite_differences() {
        for output in [OutputActivation::Identity, OutputActivation::Logistic] {
            let (a0, t, d, _) = setup(3, 2, 25, 6);
            let a = Architecture::new(3, 2, output).unwrap();
            let _ = a0;
            let (_, g) = pce_with_gradient(&a, &t, &d, 2, 0.3, 0.9, Some((1, 0.5))).unwrap();
            let h = 1e-6;
            #[allow(clippy::needless_range_loop)]
            for i in 0..a.r() {
                let mut tp = t.clone();
                let mut tm = t.clone();
                tp.as_mut_slice()[i] += h;
                tm.as_mut_slice()[i] -= h;
                let fp = pce_with_gradient(&a, &tp, &d, 2, 0.3, 0.9, Some((1, 0.5))).unwrap().0;
                let fm = pce_with_gradient(&a, &tm, &d, 2, 0.3, 0.9, Some((1, 0.5))).unwrap().0;
                let fd = (fp - fm) / (2.0 * h);
                let rel = (fd - g[i]).abs() / g[i].abs().max(fd.abs()).max(1e-3);
                assert!(rel < 1e-5, "coord {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn binary_matches_curve_definition() {
        let (a, t, mut d, cov) = setup(2, 2, 20, 7);
        let col: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        for (i, v) in col.iter().enumerate() {
            d.x_mut()[i * 2 + 1] = *v;
        }
        let mut meta = d.column_meta.clone();
        meta[1].kind = ColumnKind::Dummy;
        let d = d.with_meta(meta, None).unwrap();
        let b = pce_binary(&a, &t, &cov, &d, 2).unwrap();
        let cfg = PceConfig { covariate: 2, d: 1.0, grid: vec![0.0], level: 0.95, conditioning: None };
        assert_eq!(b, pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0].points[0]);
        assert!(matches!(pce_binary(&a, &t, &cov, &d, 1), Err(Error::NotDummy(1))));
    }

    #[test]
    fn disconnected_conditioner_gives_identical_curves() {
        let (a, mut t, d, cov) = setup(3, 2, 30, 8);
        t.set_omega(3, 1, 0.0);
        t.set_omega(3, 2, 0.0);
        let (c1, c2) = interaction_screen(&a, &t, &cov, &d, &PceConfig::new(&d, 1).unwrap(), 3).unwrap();
        for (x, y) in c1.points.iter().zip(&c2.points) {
            assert!((x.beta_hat - y.beta_hat).abs() <= 1e-12);
        }
    }

    #[test]
    fn conditioned_curve_matches_pinned_dataset() {
        let (a, t, d, cov) = setup(3, 2, 15, 9);
        let cfg = PceConfig {
            grid: vec![-1.0, 0.0, 1.5],
            d: 0.7,
            conditioning: Some(Conditioning { covariate: 3, values: vec![0.4] }),
            ..PceConfig::new(&d, 1).unwrap()
        };
        let curve = &pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0];
        let pinned = d.with_column_set(2, 0.4);
        for pt in &curve.points {
            let brute = partial_dependence(&a, &t, &pinned, 1, pt.x + 0.7).unwrap() - partial_dependence(&a, &t, &pinned, 1, pt.x).unwrap();
            assert!((pt.beta_hat - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn near_linear_network_gives_flat_curve() {
        // σ(εs) ≈ 1/2 + εs/4, so γ = 4c/ε keeps a slope c in the linear regime
        let a = Architecture::new(2, 1, OutputActivation::Identity).unwrap();
        let eps = 1e-3;
        let mut t = ParamVector::zeros(&a);
        t.set_omega(1, 1, eps);
        t.set_omega(2, 1, -eps);
        t.set_gamma(1, 4.0 * 1.3 / eps);
        let (_, _, d, cov) = setup(2, 1, 40, 10);
        let cfg = PceConfig::new(&d, 1).unwrap();
        let curve = &pce_curve(&a, &t, &cov, &d, &cfg).unwrap()[0];
        let first = curve.points[0].beta_hat;
        for pt in &curve.points {
            assert!((pt.beta_hat - first).abs() < 1e-3);
        }
    }

    #[test]
    fn original_scale_mapping() {
        let (a, t, d, cov) = setup(2, 2, 20, 11);
        let curve = pce_curve(&a, &t, &cov, &d, &PceConfig::new(&d, 1).unwrap()).unwrap().remove(0);
        let same = to_original_scale(&curve, &d.column_meta, None).unwrap();
        assert_eq!(same.points, curve.points);
        let resp = ResponseMeta { name: "y".into(), mean: 10.0, sd: 2.0 };
        let doubled = to_original_scale(&curve, &d.column_meta, Some(&resp)).unwrap();
        for (x, y) in curve.points.iter().zip(&doubled.points) {
            assert_eq!(y.beta_hat, 2.0 * x.beta_hat);
            assert_eq!(y.lo, 2.0 * x.lo);
            assert_eq!(y.x, x.x);
        }
        assert!(matches!(to_original_scale(&curve, &[], None), Err(Error::MissingMetadata(_))));
    }

    #[test]
    fn non_pd_covariance_is_rejected() {
        let (a, t, d, mut cov) = setup(2, 2, 10, 12);
        cov.positive_definite = false;
        assert!(matches!(pce_curve(&a, &t, &cov, &d, &PceConfig::new(&d, 1).unwrap()), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn config_validation() {
        let (_, _, d, _) = setup(2, 2, 10, 13);
        let mut cfg = PceConfig::new(&d, 1).unwrap();
        cfg.grid = vec![1.0, 1.0];
        assert!(cfg.validate(2).is_err());
        assert!(PceConfig::new(&d, 0).is_err());
        let cfg = PceConfig { conditioning: Some(Conditioning { covariate: 1, values: vec![0.0] }), ..PceConfig::new(&d, 1).unwrap() };
        assert!(cfg.validate(2).is_err());
    }
}
