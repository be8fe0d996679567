//! Exact Gaussian process regression with a squared-exponential kernel.
//!
//! Hyperparameters live in log space, `(log l, log sf2, log sn2)`, and the
//! loss is the negative log marginal likelihood
//! `0.5 y^T K^-1 y + 0.5 log|K| + 0.5 N log(2 pi)` with
//! `K = sf2 exp(-|x - x'|^2 / (2 l^2)) + sn2 I`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::{Dataset, Normalization, Prediction};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GprParams {
    pub log_lengthscale: f64,
    pub log_signal_var: f64,
    pub log_noise_var: f64,
}

impl Default for GprParams {
    /// `l = 1`, `sf2 = 1`, `sn2 = 0.01`.
    fn default() -> Self {
        Self::from_natural(1.0, 1.0, 0.01)
    }
}

impl GprParams {
    pub fn from_natural(lengthscale: f64, signal_var: f64, noise_var: f64) -> Self {
        Self {
            log_lengthscale: lengthscale.ln(),
            log_signal_var: signal_var.ln(),
            log_noise_var: noise_var.ln(),
        }
    }

    pub fn lengthscale(&self) -> f64 {
        self.log_lengthscale.exp()
    }

    pub fn signal_var(&self) -> f64 {
        self.log_signal_var.exp()
    }

    pub fn noise_var(&self) -> f64 {
        self.log_noise_var.exp()
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.log_lengthscale, self.log_signal_var, self.log_noise_var]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self {
            log_lengthscale: v[0],
            log_signal_var: v[1],
            log_noise_var: v[2],
        }
    }

    fn check(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.lengthscale()) && ok(self.signal_var()) && ok(self.noise_var()) {
            Ok(())
        } else {
            Err(Error::Invalid(format!("GPR hyperparameters out of range: {self:?}")))
        }
    }
}

struct Kernel {
    /// Squared distances scaled by `1 / l^2`.
    scaled_r2: DMatrix<f64>,
    /// Signal part `sf2 exp(-r2 / (2 l^2))`.
    k_se: DMatrix<f64>,
    /// Full covariance, noise included.
    k: DMatrix<f64>,
}

fn build_kernel(p: &GprParams, data: &Dataset) -> Result<Kernel> {
    p.check()?;
    data.validate()?;
    let n = data.len();
    let inv_l2 = (-2.0 * p.log_lengthscale).exp();
    let sf2 = p.signal_var();
    let sn2 = p.noise_var();
    let mut scaled_r2 = DMatrix::zeros(n, n);
    let mut k_se = DMatrix::zeros(n, n);
    for i in 0..n {
        k_se[(i, i)] = sf2;
        for j in 0..i {
            let r2: f64 = data.points[i]
                .x
                .iter()
                .zip(&data.points[j].x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            let s = r2 * inv_l2;
            let v = sf2 * (-0.5 * s).exp();
            scaled_r2[(i, j)] = s;
            scaled_r2[(j, i)] = s;
            k_se[(i, j)] = v;
            k_se[(j, i)] = v;
        }
    }
    let mut k = k_se.clone();
    for i in 0..n {
        k[(i, i)] += sn2;
    }
    Ok(Kernel {
        scaled_r2,
        k_se,
        k,
    })
}

/// Cholesky factor of `k`, escalating diagonal jitter from `1e-10` up to
/// `1e-4` times the mean diagonal when the plain factorization fails.
fn factorize(k: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok(c);
    }
    let n = k.nrows();
    let mean_diag = k.diagonal().sum() / n as f64;
    let mut rel = 1e-10;
    while rel <= 1e-4 * (1.0 + 1e-9) {
        let jitter = rel * mean_diag;
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok(c);
        }
        rel *= 10.0;
    }
    Err(Error::Singular {
        jitter: 1e-4 * mean_diag,
    })
}

fn targets(data: &Dataset) -> DVector<f64> {
    DVector::from_iterator(data.len(), data.ys())
}

fn nll_from(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let n = y.len() as f64;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    0.5 * y.dot(alpha) + 0.5 * log_det + 0.5 * n * LN_2PI
}

/// Negative log marginal likelihood.
pub fn loss(p: &GprParams, data: &Dataset) -> Result<f64> {
    let kern = build_kernel(p, data)?;
    let chol = factorize(&kern.k)?;
    let y = targets(data);
    let alpha = chol.solve(&y);
    Ok(nll_from(&chol, &y, &alpha))
}

/// Derivatives of `K` with respect to `(log l, log sf2, log sn2)`.
fn dk(kern: &Kernel, p: &GprParams) -> [DMatrix<f64>; 3] {
    let n = kern.k.nrows();
    let d_l = kern.k_se.component_mul(&kern.scaled_r2);
    let d_sf = kern.k_se.clone();
    let d_sn = DMatrix::identity(n, n) * p.noise_var();
    [d_l, d_sf, d_sn]
}

/// Loss and its gradient with respect to the log-space hyperparameters,
/// `dNLL/dθ_j = 0.5 tr[(K^-1 - α α^T) dK/dθ_j]`.
pub fn loss_and_grad(p: &GprParams, data: &Dataset) -> Result<(f64, [f64; 3])> {
    let kern = build_kernel(p, data)?;
    let chol = factorize(&kern.k)?;
    let y = targets(data);
    let alpha = chol.solve(&y);
    let value = nll_from(&chol, &y, &alpha);
    let mut w = chol.inverse();
    w -= &alpha * alpha.transpose();
    let grads = dk(&kern, p);
    let mut g = [0.0; 3];
    for (gj, dkj) in g.iter_mut().zip(&grads) {
        *gj = 0.5 * w.component_mul(dkj).sum();
    }
    Ok((value, g))
}

pub fn loss_grad(p: &GprParams, data: &Dataset) -> Result<[f64; 3]> {
    loss_and_grad(p, data).map(|(_, g)| g)
}

/// Exact Hessian of the loss in log space.
///
/// `H_ij = α^T K_j K^-1 K_i α - 0.5 α^T K_ij α + 0.5 tr(K^-1 K_ij)
///         - 0.5 tr(K^-1 K_j K^-1 K_i)`
pub fn loss_hessian(p: &GprParams, data: &Dataset) -> Result<[[f64; 3]; 3]> {
    let kern = build_kernel(p, data)?;
    let chol = factorize(&kern.k)?;
    let y = targets(data);
    let alpha = chol.solve(&y);
    let kinv = chol.inverse();
    let first = dk(&kern, p);
    let n = kern.k.nrows();

    // Second derivatives; (sf, sn) and (l, sn) cross terms vanish.
    let s = &kern.scaled_r2;
    let d_ll = kern
        .k_se
        .zip_map(s, |k, r| k * (r * r - 2.0 * r));
    let d_lsf = first[0].clone();
    let d_sfsf = kern.k_se.clone();
    let d_snsn = first[2].clone();
    let zero = DMatrix::zeros(n, n);
    let second = |i: usize, j: usize| -> &DMatrix<f64> {
        match (i.min(j), i.max(j)) {
            (0, 0) => &d_ll,
            (0, 1) => &d_lsf,
            (1, 1) => &d_sfsf,
            (2, 2) => &d_snsn,
            _ => &zero,
        }
    };

    let kinv_d: Vec<DMatrix<f64>> = first.iter().map(|d| &kinv * d).collect();
    let d_alpha: Vec<DVector<f64>> = first.iter().map(|d| d * &alpha).collect();
    let mut h = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let kij = second(i, j);
            let v = d_alpha[j].dot(&(&kinv * &d_alpha[i])) - 0.5 * alpha.dot(&(kij * &alpha))
                + 0.5 * kinv.component_mul(kij).sum()
                - 0.5 * kinv_d[j].component_mul(&kinv_d[i].transpose()).sum();
            h[i][j] = v;
            h[j][i] = v;
        }
    }
    Ok(h)
}

/// A factorized GP ready for repeated predictions.
#[derive(Debug, Clone)]
pub struct GprPosterior {
    params: GprParams,
    xs: Vec<Vec<f64>>,
    alpha: DVector<f64>,
    l: DMatrix<f64>,
    normalization: Option<Normalization>,
}

impl GprPosterior {
    pub fn fit(p: &GprParams, data: &Dataset) -> Result<Self> {
        let kern = build_kernel(p, data)?;
        let chol = factorize(&kern.k)?;
        let alpha = chol.solve(&targets(data));
        Ok(Self {
            params: *p,
            xs: data.points.iter().map(|o| o.x.clone()).collect(),
            alpha,
            l: chol.unpack(),
            normalization: data.normalization.clone(),
        })
    }

    /// Prediction at a raw-space point.
    pub fn predict(&self, x: &[f64]) -> Prediction {
        match &self.normalization {
            Some(norm) => {
                let z = norm.normalize_x(x);
                let p = self.predict_model_space(&z);
                Prediction {
                    mean: norm.denormalize_y(p.mean),
                    variance: p.variance * norm.y_scale * norm.y_scale,
                }
            }
            None => self.predict_model_space(x),
        }
    }

    /// Prediction with variance clamped to `[0, sf2]`, no de-normalization.
    pub fn predict_model_space(&self, z: &[f64]) -> Prediction {
        let sf2 = self.params.signal_var();
        let inv_2l2 = 0.5 * (-2.0 * self.params.log_lengthscale).exp();
        let n = self.xs.len();
        let mut v: Vec<f64> = self
            .xs
            .iter()
            .map(|xi| {
                let r2: f64 = xi.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum();
                sf2 * (-r2 * inv_2l2).exp()
            })
            .collect();
        let mean = v.iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum();
        // Forward substitution: v <- L^-1 k*.
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.l[(i, j)] * v[j];
            }
            v[i] = s / self.l[(i, i)];
        }
        let reduction: f64 = v.iter().map(|a| a * a).sum();
        Prediction {
            mean,
            variance: (sf2 - reduction).clamp(0.0, sf2),
        }
    }

    pub fn params(&self) -> &GprParams {
        &self.params
    }
}

/// Posterior mean and variance at `x`, de-normalized by the dataset's record.
pub fn predict(p: &GprParams, data: &Dataset, x: &[f64]) -> Result<Prediction> {
    Ok(GprPosterior::fit(p, data)?.predict(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_closed_form() {
        let d = Dataset::from_xy(&[vec![0.0]], &[0.0], 0);
        let v = loss(&GprParams::default(), &d).unwrap();
        let expect = 0.5 * (2.0 * std::f64::consts::PI).ln() + 0.5 * 1.01f64.ln();
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
        assert!((v - 0.92392).abs() < 1e-5);
    }

    #[test]
    fn zero_targets_drop_data_fit_term() {
        let xs = vec![vec![0.0, 0.1], vec![0.4, 0.2], vec![0.9, 0.7]];
        let d = Dataset::from_xy(&xs, &[0.0; 3], 0);
        let p = GprParams::from_natural(0.5, 1.3, 0.05);
        let kern = build_kernel(&p, &d).unwrap();
        let log_det = kern.k.clone().determinant().ln();
        let expect = 0.5 * log_det + 1.5 * LN_2PI;
        assert!((loss(&p, &d).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn interpolates_training_point_with_tiny_noise() {
        let xs = vec![vec![0.1], vec![0.5], vec![0.8]];
        let d = Dataset::from_xy(&xs, &[1.0, -0.5, 2.0], 0);
        let p = GprParams::from_natural(0.3, 1.0, 1e-10);
        let pred = predict(&p, &d, &[0.5]).unwrap();
        assert!((pred.mean + 0.5).abs() < 1e-6);
    }

    #[test]
    fn reverts_to_prior_far_away() {
        let xs = vec![vec![0.1], vec![0.5]];
        let d = Dataset::from_xy(&xs, &[1.0, -0.5], 0);
        let p = GprParams::from_natural(0.1, 2.0, 0.01);
        let pred = predict(&p, &d, &[50.0]).unwrap();
        assert!(pred.mean.abs() < 1e-12);
        assert!((pred.variance - 2.0).abs() < 1e-12);
    }

    #[test]
    fn duplicated_inputs_do_not_crash() {
        let xs = vec![vec![0.3], vec![0.3], vec![0.3]];
        let d = Dataset::from_xy(&xs, &[1.0, 1.0, 1.0], 0);
        let p = GprParams::from_natural(1.0, 1.0, 1e-14);
        let m1 = predict(&p, &d, &[0.2]).unwrap().mean;
        let m2 = predict(&p, &d, &[0.2]).unwrap().mean;
        assert!(m1.is_finite());
        assert_eq!(m1, m2);
    }

    #[test]
    fn rejects_non_finite_hyperparameters() {
        let d = Dataset::from_xy(&[vec![0.0]], &[0.0], 0);
        let p = GprParams {
            log_lengthscale: 1e4,
            ..GprParams::default()
        };
        assert!(loss(&p, &d).is_err());
    }
}
