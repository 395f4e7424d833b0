//! Linear canonical correlation analysis between the flattened latent
//! inputs and features of the generated signals.
//!
//! Both variable groups are centered; each within-group covariance is
//! whitened via its eigendecomposition with a relative cutoff of 1e-8 on
//! the eigenvalues (near-null directions are dropped, which regularizes
//! rank-deficient inputs without perturbing well-conditioned ones). The
//! singular values of the whitened cross-covariance are the canonical
//! correlations; loadings are Pearson correlations between the original
//! columns and the canonical variates.

use crate::data::write_text_atomic;
use crate::error::{Error, Result};
use crate::numerics::{inv_sqrt_psd, sym_eigen, Matrix};

/// Relative eigenvalue cutoff used when whitening the within-group
/// covariances.
pub const WHITEN_CUTOFF: f64 = 1e-8;

/// Canonical correlations, weight vectors, and loadings.
///
/// Components are sorted by descending correlation and sign-oriented so the
/// feature-side loading of largest magnitude is positive.
#[derive(Debug, Clone)]
pub struct CcaResult {
    /// `rho_1 >= rho_2 >= ... >= 0`, clamped into [0, 1].
    pub correlations: Vec<f64>,
    /// Input-side weights, `p x r` (column `k` maps inputs to variate `k`).
    pub x_weights: Matrix,
    /// Feature-side weights, `q x r`.
    pub y_weights: Matrix,
    /// Correlation of each input column with each input variate, `p x r`.
    pub x_loadings: Matrix,
    /// Correlation of each feature column with each feature variate, `q x r`.
    pub y_loadings: Matrix,
    /// Zero-variance columns whose loadings were reported as 0.
    pub warnings: Vec<String>,
}

impl CcaResult {
    pub fn num_components(&self) -> usize {
        self.correlations.len()
    }

    /// Input-side loading vector of the strongest component.
    pub fn first_input_loadings(&self) -> Vec<f64> {
        (0..self.x_loadings.rows())
            .map(|i| self.x_loadings.get(i, 0))
            .collect()
    }
}

/// Center each column; constant columns (detected exactly on the raw data)
/// become exactly zero. Returns the centered matrix and the constant flags.
fn center_columns(m: &Matrix) -> (Matrix, Vec<bool>) {
    let n = m.rows();
    let mut out = m.clone();
    let mut constant = vec![false; m.cols()];
    for j in 0..m.cols() {
        let first = m.get(0, j);
        if (0..n).all(|i| m.get(i, j) == first) {
            constant[j] = true;
            for i in 0..n {
                out.set(i, j, 0.0);
            }
            continue;
        }
        let mean: f64 = (0..n).map(|i| m.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            out.set(i, j, m.get(i, j) - mean);
        }
    }
    (out, constant)
}

/// `A^T B / (n - 1)` for centered matrices with matching row counts.
fn covariance(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let at = a.transpose();
    let mut cov = at.matmul(b)?;
    let scale = 1.0 / (n as f64 - 1.0);
    for v in cov.data_mut() {
        *v *= scale;
    }
    Ok(cov)
}

/// Fit a linear CCA of `x` (`N x p`) against `y` (`N x q`).
pub fn cca_fit(x: &Matrix, y: &Matrix) -> Result<CcaResult> {
    let n = x.rows();
    if y.rows() != n {
        return Err(Error::shape(
            "cca_fit",
            format!("{n} rows in both groups"),
            format!("{} in y", y.rows()),
        ));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("cca_fit needs at least 2 rows".into()));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(Error::NonFinite("cca_fit input".into()));
    }
    let p = x.cols();
    let q = y.cols();
    if p == 0 || q == 0 {
        return Err(Error::InvalidArgument("cca_fit needs non-empty columns".into()));
    }

    let (xc, x_constant) = center_columns(x);
    let (yc, y_constant) = center_columns(y);
    let sxx = covariance(&xc, &xc)?;
    let syy = covariance(&yc, &yc)?;
    let sxy = covariance(&xc, &yc)?;

    let wx = inv_sqrt_psd(&sxx, WHITEN_CUTOFF)?;
    let wy = inv_sqrt_psd(&syy, WHITEN_CUTOFF)?;
    let k = wx.matmul(&sxy)?.matmul(&wy)?; // p x q

    let r = p.min(q);
    // Singular triplets of K via the eigendecomposition of the smaller Gram
    // matrix.
    let (sigmas, mut x_dirs, mut y_dirs) = if q <= p {
        let m = k.transpose().matmul(&k)?; // q x q
        let (vals, u) = sym_eigen(&m)?;
        let mut sig = Vec::with_capacity(r);
        let mut xd = Matrix::zeros(p, r);
        let yd = Matrix::from_fn(q, r, |i, j| u.get(i, j));
        for comp in 0..r {
            let s = vals[comp].max(0.0).sqrt();
            sig.push(s);
            if s > 1e-12 {
                // x-direction = K u / sigma
                for i in 0..p {
                    let mut acc = 0.0;
                    for j in 0..q {
                        acc += k.get(i, j) * u.get(j, comp);
                    }
                    xd.set(i, comp, acc / s);
                }
            }
        }
        (sig, xd, yd)
    } else {
        let m = k.matmul(&k.transpose())?; // p x p
        let (vals, v) = sym_eigen(&m)?;
        let mut sig = Vec::with_capacity(r);
        let xd = Matrix::from_fn(p, r, |i, j| v.get(i, j));
        let mut yd = Matrix::zeros(q, r);
        for comp in 0..r {
            let s = vals[comp].max(0.0).sqrt();
            sig.push(s);
            if s > 1e-12 {
                for j in 0..q {
                    let mut acc = 0.0;
                    for i in 0..p {
                        acc += k.get(i, j) * v.get(i, comp);
                    }
                    yd.set(j, comp, acc / s);
                }
            }
        }
        (sig, xd, yd)
    };

    // Back out weights in the original coordinates.
    let mut x_weights = Matrix::zeros(p, r);
    let mut y_weights = Matrix::zeros(q, r);
    for comp in 0..r {
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += wx.get(i, j) * x_dirs.get(j, comp);
            }
            x_weights.set(i, comp, acc);
        }
        for i in 0..q {
            let mut acc = 0.0;
            for j in 0..q {
                acc += wy.get(i, j) * y_dirs.get(j, comp);
            }
            y_weights.set(i, comp, acc);
        }
    }

    // Canonical variates.
    let u_variates = xc.matmul(&x_weights)?; // N x r
    let v_variates = yc.matmul(&y_weights)?; // N x r

    let mut warnings = Vec::new();
    let x_loadings = loadings(&xc, &x_constant, &u_variates, "input", &mut warnings);
    let y_loadings = loadings(&yc, &y_constant, &v_variates, "feature", &mut warnings);

    let correlations: Vec<f64> = sigmas.iter().map(|s| s.clamp(0.0, 1.0)).collect();

    let mut result = CcaResult {
        correlations,
        x_weights,
        y_weights,
        x_loadings,
        y_loadings,
        warnings,
    };
    orient_components(&mut result);
    let _ = (&mut x_dirs, &mut y_dirs);
    Ok(result)
}

/// Pearson correlations between each (centered) column and each variate.
/// Zero-variance columns get loading 0 and a warning.
fn loadings(
    centered: &Matrix,
    constant: &[bool],
    variates: &Matrix,
    side: &str,
    warnings: &mut Vec<String>,
) -> Matrix {
    let n = centered.rows();
    let cols = centered.cols();
    let comps = variates.cols();
    let mut out = Matrix::zeros(cols, comps);
    let col_norm: Vec<f64> = (0..cols)
        .map(|j| (0..n).map(|i| centered.get(i, j).powi(2)).sum::<f64>().sqrt())
        .collect();
    let var_norm: Vec<f64> = (0..comps)
        .map(|k| (0..n).map(|i| variates.get(i, k).powi(2)).sum::<f64>().sqrt())
        .collect();
    for j in 0..cols {
        if constant[j] || col_norm[j] == 0.0 {
            let msg = format!("{side} column {j} has zero variance; loadings reported as 0");
            log::warn!("{msg}");
            warnings.push(msg);
            continue;
        }
        for k in 0..comps {
            if var_norm[k] == 0.0 {
                continue;
            }
            let mut dot = 0.0;
            for i in 0..n {
                dot += centered.get(i, j) * variates.get(i, k);
            }
            out.set(j, k, dot / (col_norm[j] * var_norm[k]));
        }
    }
    out
}

/// Flip component signs so the feature-side loading of largest magnitude is
/// positive; keeps runs comparable and control directions stable.
fn orient_components(result: &mut CcaResult) {
    for comp in 0..result.num_components() {
        let mut best = 0usize;
        let mut best_abs = 0.0;
        for j in 0..result.y_loadings.rows() {
            let v = result.y_loadings.get(j, comp).abs();
            if v > best_abs {
                best_abs = v;
                best = j;
            }
        }
        if result.y_loadings.get(best, comp) < 0.0 {
            for m in [
                &mut result.x_weights,
                &mut result.y_weights,
                &mut result.x_loadings,
                &mut result.y_loadings,
            ] {
                for i in 0..m.rows() {
                    let v = m.get(i, comp);
                    m.set(i, comp, -v);
                }
            }
        }
    }
}

/// CSV with columns `variable,component,loading`; input-side rows first.
pub fn loadings_csv(result: &CcaResult, input_names: &[String], feature_names: &[&str]) -> String {
    let mut out = String::from("variable,component,loading\n");
    for comp in 0..result.num_components() {
        for (i, name) in input_names.iter().enumerate() {
            out.push_str(&format!("{name},{},{}\n", comp + 1, result.x_loadings.get(i, comp)));
        }
        for (j, name) in feature_names.iter().enumerate() {
            out.push_str(&format!("{name},{},{}\n", comp + 1, result.y_loadings.get(j, comp)));
        }
    }
    out
}

pub fn write_loadings_csv(
    path: &std::path::Path,
    result: &CcaResult,
    input_names: &[String],
    feature_names: &[&str],
) -> Result<()> {
    write_text_atomic(path, &loadings_csv(result, input_names, feature_names))
}
