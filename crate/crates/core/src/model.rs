//! Network architecture, parameter layout and the forward map.
//!
//! The flat parameter vector is laid out as
//! `(ω_0, ω_1, …, ω_p, γ)` where `ω_j = (ω_j1, …, ω_jq)` holds the weights from
//! input `j` (input 0 is the intercept) to each hidden node and
//! `γ = (γ_0, γ_1, …, γ_q)` holds the output intercept and hidden-to-output
//! weights. Its length is `r = (p + 2) q + 1`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum HiddenActivation {
    #[default]
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputActivation {
    Identity,
    Logistic,
}

impl OutputActivation {
    #[inline]
    pub fn apply(self, eta: f64) -> f64 {
        match self {
            OutputActivation::Identity => eta,
            OutputActivation::Logistic => sigmoid(eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputActivation::Identity => "identity",
            OutputActivation::Logistic => "logistic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Architecture {
    p: usize,
    q: usize,
    pub hidden_activation: HiddenActivation,
    pub output_activation: OutputActivation,
}

impl Architecture {
    pub fn new(p: usize, q: usize, output_activation: OutputActivation) -> Result<Self> {
        if p == 0 || q == 0 {
            return Err(Error::InvalidArchitecture(format!(
                "need p >= 1 and q >= 1, got p={p}, q={q}"
            )));
        }
        Ok(Self {
            p,
            q,
            hidden_activation: HiddenActivation::Logistic,
            output_activation,
        })
    }

    /// Number of covariates, excluding the intercept.
    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of hidden nodes.
    #[inline]
    pub fn q(&self) -> usize {
        self.q
    }

    /// Total parameter count `(p + 2) q + 1`.
    #[inline]
    pub fn r(&self) -> usize {
        (self.p + 2) * self.q + 1
    }

    /// Flat index of `ω_jk`, `j ∈ 0..=p`, `k ∈ 1..=q`.
    #[inline]
    pub fn omega_index(&self, j: usize, k: usize) -> usize {
        debug_assert!(j <= self.p && k >= 1 && k <= self.q);
        j * self.q + (k - 1)
    }

    /// Flat index of `γ_k`, `k ∈ 0..=q`.
    #[inline]
    pub fn gamma_index(&self, k: usize) -> usize {
        debug_assert!(k <= self.q);
        (self.p + 1) * self.q + k
    }

    /// True for the unpenalized intercepts `ω_0k` and `γ_0`.
    #[inline]
    pub fn is_intercept(&self, index: usize) -> bool {
        index < self.q || index == self.gamma_index(0)
    }

    /// Human-readable label of a flat parameter index, e.g. `w[2,1]` or `g[0]`.
    pub fn param_label(&self, index: usize) -> String {
        let split = (self.p + 1) * self.q;
        if index < split {
            format!("w[{},{}]", index / self.q, index % self.q + 1)
        } else {
            format!("g[{}]", index - split)
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "covariate vector",
                expected: self.p,
                actual: x.len(),
            });
        }
        Ok(())
    }
}

/// Flat parameter vector with structured accessors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    p: usize,
    q: usize,
    values: Vec<f64>,
}

impl ParamVector {
    pub fn zeros(arch: &Architecture) -> Self {
        Self {
            p: arch.p(),
            q: arch.q(),
            values: vec![0.0; arch.r()],
        }
    }

    pub fn from_vec(arch: &Architecture, values: Vec<f64>) -> Result<Self> {
        if values.len() != arch.r() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: arch.r(),
                actual: values.len(),
            });
        }
        Ok(Self {
            p: arch.p(),
            q: arch.q(),
            values,
        })
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(p, q)` this vector was laid out for.
    pub fn shape(&self) -> (usize, usize) {
        (self.p, self.q)
    }

    #[inline]
    fn omega_index(&self, j: usize, k: usize) -> usize {
        assert!(j <= self.p && (1..=self.q).contains(&k), "omega({j},{k}) out of range");
        j * self.q + (k - 1)
    }

    #[inline]
    fn gamma_index(&self, k: usize) -> usize {
        assert!(k <= self.q, "gamma({k}) out of range");
        (self.p + 1) * self.q + k
    }

    /// Weight from input `j` (0 = intercept) to hidden node `k` (1-based).
    #[inline]
    pub fn omega(&self, j: usize, k: usize) -> f64 {
        self.values[self.omega_index(j, k)]
    }

    #[inline]
    pub fn set_omega(&mut self, j: usize, k: usize, value: f64) {
        let i = self.omega_index(j, k);
        self.values[i] = value;
    }

    /// Output weight of hidden node `k`; `k = 0` is the output intercept.
    #[inline]
    pub fn gamma(&self, k: usize) -> f64 {
        self.values[self.gamma_index(k)]
    }

    #[inline]
    pub fn set_gamma(&mut self, k: usize, value: f64) {
        let i = self.gamma_index(k);
        self.values[i] = value;
    }

    /// `ω_j = (ω_j1, …, ω_jq)`.
    pub fn omega_row(&self, j: usize) -> &[f64] {
        let start = self.omega_index(j, 1);
        &self.values[start..start + self.q]
    }

    /// `ω_·k = (ω_0k, …, ω_pk)`: every input weight into hidden node `k`.
    pub fn omega_column(&self, k: usize) -> Vec<f64> {
        (0..=self.p).map(|j| self.omega(j, k)).collect()
    }

    /// `θ̃`: all weights with `ω_0k` and `γ_0` removed.
    pub fn penalized_view(&self) -> Vec<f64> {
        let q = self.q;
        let gamma0 = (self.p + 1) * q;
        self.values
            .iter()
            .enumerate()
            .filter(|&(i, _)| i >= q && i != gamma0)
            .map(|(_, &v)| v)
            .collect()
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        if self.values.len() != arch.r() || self.p != arch.p() || self.q != arch.q() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: arch.r(),
                actual: self.values.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ColumnKind {
    Continuous,
    Dummy,
}

/// Per-column metadata: standardized value = (raw - mean) / sd.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMeta {
    pub name: String,
    pub kind: ColumnKind,
    pub mean: f64,
    pub sd: f64,
}

impl ColumnMeta {
    pub fn identity(name: impl Into<String>, kind: ColumnKind) -> Self {
        Self {
            name: name.into(),
            kind,
            mean: 0.0,
            sd: 1.0,
        }
    }

    #[inline]
    pub fn to_raw(&self, standardized: f64) -> f64 {
        standardized * self.sd + self.mean
    }

    #[inline]
    pub fn to_standardized(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.sd
    }
}

/// Response standardization metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMeta {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
}

/// Row-major design (intercept column implicit) plus response.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    pub column_meta: Vec<ColumnMeta>,
    pub response_meta: Option<ResponseMeta>,
}

impl Dataset {
    /// Builds a dataset from row-major covariates. Column metadata defaults
    /// to identity continuous columns named `x1..xp`.
    pub fn new(p: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::InvalidInput("dataset needs at least one row".into()));
        }
        if p == 0 {
            return Err(Error::InvalidInput("dataset needs at least one covariate".into()));
        }
        if x.len() != n * p {
            return Err(Error::DimensionMismatch {
                what: "design matrix entries",
                expected: n * p,
                actual: x.len(),
            });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "design matrix", index: i });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "response", index: i });
        }
        let column_meta = (1..=p)
            .map(|j| ColumnMeta::identity(format!("x{j}"), ColumnKind::Continuous))
            .collect();
        Ok(Self {
            n,
            p,
            x,
            y,
            column_meta,
            response_meta: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], y: Vec<f64>) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch {
                what: "row length",
                expected: p,
                actual: bad.len(),
            });
        }
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "response length",
                expected: rows.len(),
                actual: y.len(),
            });
        }
        Self::new(p, rows.concat(), y)
    }

    /// Replaces the column metadata, validating dummy columns.
    pub fn with_meta(mut self, column_meta: Vec<ColumnMeta>, response_meta: Option<ResponseMeta>) -> Result<Self> {
        if column_meta.len() != self.p {
            return Err(Error::DimensionMismatch {
                what: "column metadata",
                expected: self.p,
                actual: column_meta.len(),
            });
        }
        for (j, meta) in column_meta.iter().enumerate() {
            if meta.kind == ColumnKind::Dummy {
                if let Some(i) = (0..self.n).find(|&i| {
                    let v = self.x[i * self.p + j];
                    v != 0.0 && v != 1.0
                }) {
                    return Err(Error::InvalidInput(format!(
                        "dummy column '{}' has non-binary value {} at row {i}",
                        meta.name,
                        self.x[i * self.p + j]
                    )));
                }
            }
            if !(meta.sd > 0.0) || !meta.mean.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "column '{}' has invalid standardization (mean {}, sd {})",
                    meta.name, meta.mean, meta.sd
                )));
            }
        }
        self.column_meta = column_meta;
        self.response_meta = response_meta;
        Ok(self)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Column `j` (0-based over covariates).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.x[i * self.p + j]).collect()
    }

    /// Copy of the dataset with column `j` (0-based) set to `value` in every row.
    pub fn with_column_set(&self, j: usize, value: f64) -> Self {
        let mut out = self.clone();
        out.set_column(j, value);
        out
    }

    pub(crate) fn set_column(&mut self, j: usize, value: f64) {
        for i in 0..self.n {
            self.x[i * self.p + j] = value;
        }
    }

    /// Subset of rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut x = Vec::with_capacity(rows.len() * self.p);
        let mut y = Vec::with_capacity(rows.len());
        for &i in rows {
            x.extend_from_slice(self.row(i));
            y.push(self.y[i]);
        }
        Self {
            n: rows.len(),
            p: self.p,
            x,
            y,
            column_meta: self.column_meta.clone(),
            response_meta: self.response_meta.clone(),
        }
    }

    #[cfg(test)]
    pub(crate) fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    #[cfg(test)]
    pub(crate) fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    fn check(&self, arch: &Architecture) -> Result<()> {
        if self.p != arch.p() {
            return Err(Error::DimensionMismatch {
                what: "dataset columns",
                expected: arch.p(),
                actual: self.p,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_compatible(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<()> {
    theta.check(arch)?;
    data.check(arch)
}

pub(crate) fn check_theta(arch: &Architecture, theta: &ParamVector) -> Result<()> {
    theta.check(arch)
}

/// Net input `s_k(x) = Σ_j ω_jk x_j` (with `x_0 = 1`) for every hidden node.
#[inline]
pub(crate) fn net_inputs(q: usize, theta: &[f64], x: &[f64], out: &mut [f64]) {
    out[..q].copy_from_slice(&theta[..q]);
    for (j, &xj) in x.iter().enumerate() {
        let row = &theta[(j + 1) * q..(j + 2) * q];
        for (s, &w) in out.iter_mut().zip(row) {
            *s += w * xj;
        }
    }
}

/// Output pre-activation `η = γ_0 + Σ γ_k σ(s_k)`; fills `hidden` with σ(s_k).
#[inline]
pub(crate) fn eta_with_hidden(p: usize, q: usize, theta: &[f64], x: &[f64], hidden: &mut [f64]) -> f64 {
    net_inputs(q, theta, x, hidden);
    let g = &theta[(p + 1) * q..];
    let mut eta = g[0];
    for (h, &gk) in hidden.iter_mut().zip(&g[1..]) {
        *h = sigmoid(*h);
        eta += gk * *h;
    }
    eta
}

/// `NN(x, θ)` for a single covariate vector (intercept excluded from `x`).
pub fn forward(arch: &Architecture, theta: &ParamVector, x: &[f64]) -> Result<f64> {
    check_theta(arch, theta)?;
    arch.check_input(x)?;
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "covariate vector", index: i });
    }
    let mut hidden = vec![0.0; arch.q()];
    let eta = eta_with_hidden(arch.p(), arch.q(), theta.as_slice(), x, &mut hidden);
    Ok(arch.output_activation.apply(eta))
}

/// `NN(x_i, θ)` for every row of `data`, in row order.
pub fn forward_batch(arch: &Architecture, theta: &ParamVector, data: &Dataset) -> Result<Vec<f64>> {
    check_compatible(arch, theta, data)?;
    let mut hidden = vec![0.0; arch.q()];
    Ok((0..data.n())
        .map(|i| {
            let eta = eta_with_hidden(arch.p(), arch.q(), theta.as_slice(), data.row(i), &mut hidden);
            arch.output_activation.apply(eta)
        })
        .collect())
}

/// `q × r` 0/1 matrix `S` with `S θ = ω_j`, for covariate `j ∈ 1..=p`.
pub fn selection_matrix(arch: &Architecture, j: usize) -> Result<DMatrix<f64>> {
    if j == 0 || j > arch.p() {
        return Err(Error::CovariateOutOfRange { index: j, p: arch.p() });
    }
    let mut s = DMatrix::zeros(arch.q(), arch.r());
    for k in 1..=arch.q() {
        s[(k - 1, arch.omega_index(j, k))] = 1.0;
    }
    Ok(s)
}
