//! Matrix-variate Gaussian process regression.
//!
//! Outputs `Y` (n x d) are modelled as `MN(0, K', Omega)`: rows share the SE
//! kernel covariance `K' = K + noise`, columns share the output covariance
//! `Omega = Phi Phi^T` with `Phi` lower-triangular and a log-parameterized
//! diagonal. With `d = 1` and `Omega = I` this is ordinary scalar GP
//! regression.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Added to every self-Gram diagonal before factorization.
pub const GRAM_JITTER: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("Gram matrix is not positive definite")]
    IllConditioned,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid hyperparameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sf2: f64,
    pub l2: f64,
    pub sigma_n2: f64,
}

impl KernelParams {
    pub fn validate(&self) -> Result<(), GpError> {
        let ok = self.sf2 > 0.0 && self.l2 > 0.0 && self.sigma_n2 >= 0.0;
        if ok && self.sf2.is_finite() && self.l2.is_finite() && self.sigma_n2.is_finite() {
            Ok(())
        } else {
            Err(GpError::InvalidParams(format!("{self:?}")))
        }
    }
}

impl Default for KernelParams {
    fn default() -> Self {
        Self { sf2: 1.0, l2: 1.0, sigma_n2: 1e-4 }
    }
}

/// Cholesky-style parameterization of the output covariance.
///
/// `psi[i]` is the log of `Phi[i][i]`; `phi` holds the strictly lower
/// entries in row-major order (`Phi[1][0], Phi[2][0], Phi[2][1], ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCovParams {
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl OutputCovParams {
    pub fn identity(d: usize) -> Self {
        Self { psi: vec![0.0; d], phi: vec![0.0; d * (d - 1) / 2] }
    }

    pub fn dim(&self) -> usize {
        self.psi.len()
    }

    pub fn factor(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut f = DMatrix::zeros(d, d);
        let mut k = 0;
        for i in 0..d {
            for j in 0..i {
                f[(i, j)] = self.phi[k];
                k += 1;
            }
            f[(i, i)] = self.psi[i].exp();
        }
        f
    }

    pub fn omega(&self) -> DMatrix<f64> {
        let f = self.factor();
        &f * f.transpose()
    }

    fn check(&self, d: usize) -> Result<(), GpError> {
        if self.psi.len() != d || self.phi.len() != d * (d - 1) / 2 {
            return Err(GpError::Shape(format!("output covariance for d={} given for d={d}", self.dim())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kernel: KernelParams,
    pub output: OutputCovParams,
}

/// Training inputs `x` (n x p) and outputs `y` (n x d).
///
/// `extra_noise`, when present, adds a per-sample variance to the self-Gram
/// diagonal on top of the shared `sigma_n2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub extra_noise: Option<DVector<f64>>,
}

impl TrainingSet {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self, GpError> {
        Self::build(x, y, None)
    }

    pub fn with_noise(x: DMatrix<f64>, y: DMatrix<f64>, noise: DVector<f64>) -> Result<Self, GpError> {
        Self::build(x, y, Some(noise))
    }

    fn build(x: DMatrix<f64>, y: DMatrix<f64>, extra_noise: Option<DVector<f64>>) -> Result<Self, GpError> {
        if x.nrows() == 0 || x.nrows() != y.nrows() || y.ncols() == 0 {
            return Err(GpError::Shape(format!("x is {}x{}, y is {}x{}", x.nrows(), x.ncols(), y.nrows(), y.ncols())));
        }
        if let Some(e) = &extra_noise {
            if e.len() != x.nrows() || e.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(GpError::Shape("per-sample noise must be n finite non-negative values".into()));
            }
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(GpError::Shape("non-finite training data".into()));
        }
        Ok(Self { x, y, extra_noise })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.y.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Predictive mean, m x d.
    pub mean: DMatrix<f64>,
    /// Row covariance, m x m.
    pub sigma_hat: DMatrix<f64>,
    /// Column covariance, d x d (equal to the prior `Omega`).
    pub omega_hat: DMatrix<f64>,
    /// Marginal variance of each predicted entry, `sigma_hat[i][i] * omega_hat[j][j]`.
    pub per_output_var: DMatrix<f64>,
}

/// Squared-exponential kernel `sf2 * exp(-|a-b|^2 / (2 l2))`, without noise.
pub fn kernel_se(a: &[f64], b: &[f64], kp: &KernelParams) -> f64 {
    let r2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    kp.sf2 * (-r2 / (2.0 * kp.l2)).exp()
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Cross-covariance `k(x_i, x2_j)`; no noise term.
pub fn gram(x: &DMatrix<f64>, x2: &DMatrix<f64>, kp: &KernelParams) -> DMatrix<f64> {
    let rows: Vec<_> = (0..x.nrows()).map(|i| row(x, i)).collect();
    let cols: Vec<_> = (0..x2.nrows()).map(|j| row(x2, j)).collect();
    DMatrix::from_fn(x.nrows(), x2.nrows(), |i, j| kernel_se(&rows[i], &cols[j], kp))
}

/// Self-covariance `K' = K + sigma_n2 I` (plus optional per-sample noise),
/// without the factorization jitter.
pub fn self_gram(x: &DMatrix<f64>, kp: &KernelParams, extra: Option<&DVector<f64>>) -> DMatrix<f64> {
    let mut k = gram(x, x, kp);
    for i in 0..x.nrows() {
        k[(i, i)] += kp.sigma_n2 + extra.map_or(0.0, |e| e[i]);
    }
    k
}

fn factorize(train: &TrainingSet, kp: &KernelParams) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>), GpError> {
    kp.validate()?;
    let mut k = self_gram(&train.x, kp, train.extra_noise.as_ref());
    let n = k.nrows();
    for i in 0..n {
        k[(i, i)] += GRAM_JITTER;
    }
    let chol = Cholesky::new(k.clone()).ok_or(GpError::IllConditioned)?;
    Ok((k, chol))
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Predictive distribution at `xstar` (m x p).
///
/// `sigma_hat` is the latent covariance: the test-set block uses the kernel
/// without observation noise.
pub fn predict(
    train: &TrainingSet,
    kp: &KernelParams,
    oc: &OutputCovParams,
    xstar: &DMatrix<f64>,
) -> Result<Prediction, GpError> {
    oc.check(train.d())?;
    let (_, chol) = factorize(train, kp)?;
    let alpha = chol.solve(&train.y);
    predict_factored(train, kp, oc, &chol, &alpha, xstar)
}

fn predict_factored(
    train: &TrainingSet,
    kp: &KernelParams,
    oc: &OutputCovParams,
    chol: &Cholesky<f64, Dyn>,
    alpha: &DMatrix<f64>,
    xstar: &DMatrix<f64>,
) -> Result<Prediction, GpError> {
    if xstar.ncols() != train.x.ncols() {
        return Err(GpError::Shape(format!(
            "test inputs have {} columns, expected {}",
            xstar.ncols(),
            train.x.ncols()
        )));
    }
    let ks = gram(xstar, &train.x, kp); // m x n
    let mean = &ks * alpha;
    let kss = gram(xstar, xstar, kp);
    // L^-1 Ks^T, so that Ks K'^-1 Ks^T = V^T V.
    let v = chol.l_dirty().solve_lower_triangular(&ks.transpose()).ok_or(GpError::IllConditioned)?;
    let mut sigma_hat = kss - v.transpose() * &v;
    sigma_hat = (&sigma_hat + sigma_hat.transpose()) * 0.5;
    let omega_hat = oc.omega();
    let m = xstar.nrows();
    let d = omega_hat.nrows();
    let per_output_var = DMatrix::from_fn(m, d, |i, j| sigma_hat[(i, i)].max(0.0) * omega_hat[(j, j)]);
    Ok(Prediction { mean, sigma_hat, omega_hat, per_output_var })
}

/// Negative log marginal likelihood of the matrix-variate model:
/// `nd/2 ln 2pi + d/2 ln|K'| + n/2 ln|Omega| + 1/2 tr(K'^-1 Y Omega^-1 Y^T)`.
pub fn nlml(train: &TrainingSet, kp: &KernelParams, oc: &OutputCovParams) -> Result<f64, GpError> {
    oc.check(train.d())?;
    let (_, chol) = factorize(train, kp)?;
    nlml_factored(train, oc, &chol)
}

/// `Omega^-1 = Phi^-T Phi^-1`, from triangular solves on the factor.
fn omega_inverse(oc: &OutputCovParams) -> Result<DMatrix<f64>, GpError> {
    let phi = oc.factor();
    if phi.diagonal().iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(GpError::IllConditioned);
    }
    let d = phi.nrows();
    let inv = phi.solve_lower_triangular(&DMatrix::identity(d, d)).ok_or(GpError::IllConditioned)?;
    let w = inv.transpose() * inv;
    if w.iter().all(|v| v.is_finite()) {
        Ok(w)
    } else {
        Err(GpError::IllConditioned)
    }
}

fn nlml_factored(train: &TrainingSet, oc: &OutputCovParams, chol: &Cholesky<f64, Dyn>) -> Result<f64, GpError> {
    let (n, d) = (train.n() as f64, train.d() as f64);
    let ln_det_omega = 2.0 * oc.psi.iter().sum::<f64>();
    let alpha = chol.solve(&train.y);
    // tr(K'^-1 Y W Y^T) = tr(W Y^T K'^-1 Y)
    let b = train.y.transpose() * &alpha;
    let w = omega_inverse(oc)?;
    let trace = (w * b).trace();
    Ok(0.5 * n * d * (2.0 * std::f64::consts::PI).ln() + 0.5 * d * log_det(chol) + 0.5 * n * ln_det_omega + 0.5 * trace)
}

/// Which hyperparameters are free during fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitMask {
    pub sf2: bool,
    pub l2: bool,
    pub sigma_n2: bool,
    /// Fit `Omega`. The first diagonal entry stays fixed at `psi[0]` to pin
    /// the scale shared between `sf2` and `Omega`.
    pub output_cov: bool,
}

impl FitMask {
    /// Kernel scale and length only (univariate mode, fixed noise).
    pub const KERNEL_ONLY: FitMask = FitMask { sf2: true, l2: true, sigma_n2: false, output_cov: false };
    pub const ALL: FitMask = FitMask { sf2: true, l2: true, sigma_n2: true, output_cov: true };
}

/// NLML gradient. Positive scalars are differentiated in log space; entries
/// for frozen parameters are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct NlmlGradient {
    pub log_sf2: f64,
    pub log_l2: f64,
    pub log_sigma_n2: f64,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
}

impl NlmlGradient {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.log_sf2, self.log_l2, self.log_sigma_n2];
        v.extend(&self.psi);
        v.extend(&self.phi);
        v
    }

    pub fn norm(&self) -> f64 {
        self.to_vec().iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn nlml_grad(
    train: &TrainingSet,
    kp: &KernelParams,
    oc: &OutputCovParams,
    mask: FitMask,
) -> Result<NlmlGradient, GpError> {
    oc.check(train.d())?;
    let (_, chol) = factorize(train, kp)?;
    grad_factored(train, kp, oc, &chol, mask)
}

fn grad_factored(
    train: &TrainingSet,
    kp: &KernelParams,
    oc: &OutputCovParams,
    chol: &Cholesky<f64, Dyn>,
    mask: FitMask,
) -> Result<NlmlGradient, GpError> {
    let n = train.n();
    let d = train.d();
    let a = chol.inverse();
    let alpha = chol.solve(&train.y);
    let phi_m = oc.factor();
    let w = omega_inverse(oc)?;

    // dL = 1/2 tr(G dK'), G = d K'^-1 - alpha W alpha^T
    let g = &a * d as f64 - &alpha * &w * alpha.transpose();
    let k = gram(&train.x, &train.x, kp);
    let half_contract = |dk: &DMatrix<f64>| 0.5 * g.component_mul(dk).sum();

    let log_sf2 = if mask.sf2 { half_contract(&k) } else { 0.0 };
    let log_l2 = if mask.l2 {
        let dk = DMatrix::from_fn(n, n, |i, j| {
            let r2 = (train.x.row(i) - train.x.row(j)).norm_squared();
            k[(i, j)] * r2 / (2.0 * kp.l2)
        });
        half_contract(&dk)
    } else {
        0.0
    };
    let log_sigma_n2 = if mask.sigma_n2 { 0.5 * kp.sigma_n2 * g.trace() } else { 0.0 };

    let mut psi = vec![0.0; d];
    let mut phi = vec![0.0; d * (d - 1) / 2];
    if mask.output_cov {
        // dL/dPhi = H Phi, H = n W - W B W, B = Y^T K'^-1 Y
        let b = train.y.transpose() * &alpha;
        let h = &w * n as f64 - &w * b * &w;
        let dphi = h * &phi_m;
        let mut kk = 0;
        for i in 0..d {
            for j in 0..i {
                phi[kk] = dphi[(i, j)];
                kk += 1;
            }
            if i > 0 {
                psi[i] = dphi[(i, i)] * phi_m[(i, i)];
            }
        }
    }
    Ok(NlmlGradient { log_sf2, log_l2, log_sigma_n2, psi, phi })
}

/// Unconstrained coordinates `[ln sf2, ln l2, ln sigma_n2, psi.., phi..]`.
fn pack(h: &Hyperparams) -> Vec<f64> {
    let mut v = vec![h.kernel.sf2.ln(), h.kernel.l2.ln(), h.kernel.sigma_n2.ln()];
    v.extend(&h.output.psi);
    v.extend(&h.output.phi);
    v
}

fn unpack(v: &[f64], d: usize) -> Hyperparams {
    let kernel = KernelParams { sf2: v[0].exp(), l2: v[1].exp(), sigma_n2: v[2].exp() };
    let psi = v[3..3 + d].to_vec();
    let phi = v[3 + d..].to_vec();
    Hyperparams { kernel, output: OutputCovParams { psi, phi } }
}

fn free_flags(mask: FitMask, d: usize) -> Vec<bool> {
    let mut f = vec![mask.sf2, mask.l2, mask.sigma_n2];
    f.extend((0..d).map(|i| mask.output_cov && i > 0));
    f.extend(std::iter::repeat_n(mask.output_cov, d * (d - 1) / 2));
    f
}

/// Summary of a hyperparameter fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub params: Hyperparams,
    pub nlml: f64,
    /// NLML after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub restarts: usize,
}

const GRAD_TOL: f64 = 1e-6;

/// Maximum-likelihood fit by gradient descent with backtracking line search.
///
/// Deterministic given `init`. If the initial point cannot be factorized the
/// search restarts from a jittered copy, at most three times.
pub fn fit_hyperparams(
    train: &TrainingSet,
    init: &Hyperparams,
    budget: usize,
    mask: FitMask,
) -> Result<FitReport, GpError> {
    if budget == 0 {
        return Err(GpError::InvalidParams("fit budget must be at least 1".into()));
    }
    let d = train.d();
    init.output.check(d)?;
    if mask.sigma_n2 && init.kernel.sigma_n2 <= 0.0 {
        return Err(GpError::InvalidParams("sigma_n2 must be positive to be fitted".into()));
    }
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start = init.clone();
    for restart in 0..=3 {
        match descend(train, &start, budget, mask) {
            Ok(mut report) => {
                report.restarts = restart;
                return Ok(report);
            }
            Err(GpError::IllConditioned) if restart < 3 => {
                let mut v = pack(&start);
                let free = free_flags(mask, d);
                for (x, f) in v.iter_mut().zip(&free) {
                    if *f {
                        *x += jitter_rng.random_range(-0.5..0.5);
                    }
                }
                // Widening the noise is the usual cure for a singular Gram.
                if start.kernel.sigma_n2 > 0.0 {
                    v[2] += 1.0;
                } else {
                    v[2] = (1e-6f64).ln();
                }
                start = unpack(&v, d);
            }
            Err(e) => return Err(e),
        }
    }
    Err(GpError::IllConditioned)
}

fn evaluate(train: &TrainingSet, h: &Hyperparams, mask: FitMask) -> Result<(f64, Vec<f64>), GpError> {
    let (_, chol) = factorize(train, &h.kernel)?;
    let f = nlml_factored(train, &h.output, &chol)?;
    let g = grad_factored(train, &h.kernel, &h.output, &chol, mask)?.to_vec();
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(GpError::IllConditioned);
    }
    Ok((f, g))
}

fn descend(train: &TrainingSet, init: &Hyperparams, budget: usize, mask: FitMask) -> Result<FitReport, GpError> {
    let d = train.d();
    let free = free_flags(mask, d);
    let zero_noise = init.kernel.sigma_n2 == 0.0;
    let masked = |mut g: Vec<f64>| {
        for (gi, fr) in g.iter_mut().zip(&free) {
            if !fr {
                *gi = 0.0;
            }
        }
        g
    };
    let mut x = pack(init);
    let (mut f, g0) = evaluate(train, init, mask)?;
    let mut g = masked(g0);
    let mut trace = vec![f];
    let mut step = 0.1;
    for _ in 0..budget {
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2.sqrt() < GRAD_TOL {
            break;
        }
        let mut accepted = None;
        let mut t = step;
        for _ in 0..60 {
            let cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            let mut h = unpack(&cand, d);
            if zero_noise {
                h.kernel.sigma_n2 = 0.0;
            }
            if let Ok((fc, gc)) = evaluate(train, &h, mask) {
                if fc <= f - 1e-4 * t * g2 {
                    accepted = Some((cand, fc, masked(gc)));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        // Barzilai-Borwein estimate of the local inverse curvature.
        let s: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-8, 1e3) } else { (t * 2.0).min(1e3) };
        x = cand;
        f = fc;
        g = gc;
        trace.push(f);
    }
    let mut params = unpack(&x, d);
    if zero_noise {
        params.kernel.sigma_n2 = 0.0;
    }
    Ok(FitReport { params, nlml: f, trace, restarts: 0 })
}

/// A fitted model with a cached factorization of the training Gram matrix.
///
/// When `centered`, each output column's training mean is subtracted before
/// regression and added back to predictions.
#[derive(Debug, Clone)]
pub struct MvgprModel {
    train: TrainingSet,
    params: Hyperparams,
    offsets: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    alpha: DMatrix<f64>,
}

impl MvgprModel {
    pub fn new(train: TrainingSet, params: Hyperparams, centered: bool) -> Result<Self, GpError> {
        params.output.check(train.d())?;
        let d = train.d();
        let offsets = if centered { DVector::from_fn(d, |j, _| train.y.column(j).mean()) } else { DVector::zeros(d) };
        let mut train = train;
        for j in 0..d {
            let o = offsets[j];
            train.y.column_mut(j).add_scalar_mut(-o);
        }
        let (_, chol) = factorize(&train, &params.kernel)?;
        let alpha = chol.solve(&train.y);
        Ok(Self { train, params, offsets, chol, alpha })
    }

    /// Fits hyperparameters from `init`, then builds the model.
    pub fn fit(
        train: TrainingSet,
        init: &Hyperparams,
        budget: usize,
        mask: FitMask,
        centered: bool,
    ) -> Result<(Self, FitReport), GpError> {
        let mut centered_train = train.clone();
        if centered {
            for j in 0..train.d() {
                let m = train.y.column(j).mean();
                centered_train.y.column_mut(j).add_scalar_mut(-m);
            }
        }
        let report = fit_hyperparams(&centered_train, init, budget, mask)?;
        let model = Self::new(train, report.params.clone(), centered)?;
        Ok((model, report))
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn n(&self) -> usize {
        self.train.n()
    }

    pub fn predict(&self, xstar: &DMatrix<f64>) -> Result<Prediction, GpError> {
        let mut p =
            predict_factored(&self.train, &self.params.kernel, &self.params.output, &self.chol, &self.alpha, xstar)?;
        for j in 0..p.mean.ncols() {
            let o = self.offsets[j];
            p.mean.column_mut(j).add_scalar_mut(o);
        }
        Ok(p)
    }

    /// Mean and marginal variance per output at a single 2D input.
    pub fn predict_point(&self, x: f64, y: f64) -> Result<(Vec<f64>, Vec<f64>), GpError> {
        let p = self.predict(&DMatrix::from_row_slice(1, 2, &[x, y]))?;
        Ok((p.mean.row(0).iter().copied().collect(), p.per_output_var.row(0).iter().copied().collect()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn set(x: &[[f64; 2]], y: &[f64], d: usize) -> TrainingSet {
        let xm = DMatrix::from_fn(x.len(), 2, |i, j| x[i][j]);
        TrainingSet::new(xm, DMatrix::from_row_slice(x.len(), d, y)).unwrap()
    }

    #[test]
    fn kernel_points() {
        let kp = KernelParams { sf2: 2.0, l2: 0.5, sigma_n2: 0.0 };
        assert_eq!(kernel_se(&[1.0, 2.0], &[1.0, 2.0], &kp), 2.0);
        // |a-b|^2 = 2 l2 = 1
        assert_abs_diff_eq!(kernel_se(&[0.0, 0.0], &[1.0, 0.0], &kp), 2.0 * (-1.0f64).exp(), epsilon = 1e-15);
        let mut last = f64::INFINITY;
        for i in 0..50 {
            let v = kernel_se(&[0.0, 0.0], &[0.1 * i as f64, 0.05 * i as f64], &kp);
            assert!(v < last || i == 0);
            last = v;
        }
    }

    #[test]
    fn noise_only_on_self_gram_diagonal() {
        let kp = KernelParams { sf2: 1.0, l2: 1.0, sigma_n2: 0.1 };
        let x = DMatrix::from_row_slice(1, 2, &[0.3, 0.4]);
        assert_abs_diff_eq!(self_gram(&x, &kp, None)[(0, 0)], 1.1, epsilon = 1e-15);
        let x2 = DMatrix::from_row_slice(2, 2, &[0.3, 0.4, 5.0, 5.0]);
        let c = gram(&x, &x2, &kp);
        assert_abs_diff_eq!(c[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn self_gram_is_spd_on_distinct_inputs() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.3, 0.1, -0.2, 0.7]);
        let kp = KernelParams { sf2: 1.3, l2: 0.4, sigma_n2: 0.0 };
        assert!(Cholesky::new(self_gram(&x, &kp, None)).is_some());
    }

    #[test]
    fn noise_free_interpolation() {
        let t = set(&[[0.5, -0.2]], &[1.7], 1);
        let kp = KernelParams { sf2: 1.0, l2: 1.0, sigma_n2: 0.0 };
        let p = predict(&t, &kp, &OutputCovParams::identity(1), &t.x).unwrap();
        assert_abs_diff_eq!(p.mean[(0, 0)], 1.7, epsilon = 1e-9);
        assert_abs_diff_eq!(p.sigma_hat[(0, 0)], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn far_field_recovers_prior() {
        let t = set(&[[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]], &[1.0, 2.0, 3.0], 1);
        let kp = KernelParams { sf2: 0.7, l2: 0.25, sigma_n2: 1e-3 };
        let far = DMatrix::from_row_slice(1, 2, &[10.0, 10.0]);
        let p = predict(&t, &kp, &OutputCovParams::identity(1), &far).unwrap();
        assert_abs_diff_eq!(p.mean[(0, 0)], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.sigma_hat[(0, 0)], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn nlml_single_point() {
        let t = set(&[[0.0, 0.0]], &[0.0], 1);
        let kp = KernelParams { sf2: 1.0, l2: 1.0, sigma_n2: 0.0 };
        let v = nlml(&t, &kp, &OutputCovParams::identity(1)).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (2.0 * std::f64::consts::PI).ln(), epsilon = 1e-9);
    }

    #[test]
    fn nlml_scaling_only_moves_trace_term() {
        let t = set(&[[0.0, 0.0], [0.4, 0.1], [0.9, -0.3]], &[0.3, -0.1, 0.5, 0.2, 0.0, 0.1], 2);
        let kp = KernelParams { sf2: 1.0, l2: 0.5, sigma_n2: 0.01 };
        let oc = OutputCovParams { psi: vec![0.1, -0.2], phi: vec![0.3] };
        let zero = set(&[[0.0, 0.0], [0.4, 0.1], [0.9, -0.3]], &[0.0; 6], 2);
        let base = nlml(&zero, &kp, &oc).unwrap();
        let t1 = nlml(&t, &kp, &oc).unwrap() - base;
        let mut scaled = t.clone();
        scaled.y *= 3.0;
        let t3 = nlml(&scaled, &kp, &oc).unwrap() - base;
        assert_abs_diff_eq!(t3, 9.0 * t1, epsilon = 1e-9);
    }

    #[test]
    fn frozen_output_cov_has_zero_gradient() {
        let t = set(&[[0.0, 0.0], [0.4, 0.1], [0.9, -0.3]], &[0.3, -0.1, 0.5], 1);
        let g = nlml_grad(&t, &KernelParams::default(), &OutputCovParams::identity(1), FitMask::KERNEL_ONLY).unwrap();
        assert!(g.psi.iter().all(|v| *v == 0.0));
        assert_eq!(g.log_sigma_n2, 0.0);
    }

    #[test]
    fn fit_at_fixed_point_is_stationary() {
        let t = set(&[[0.0, 0.0], [0.4, 0.1], [0.9, -0.3], [1.3, 0.2]], &[0.3, -0.1, 0.5, 0.4], 1);
        let init = Hyperparams {
            kernel: KernelParams { sf2: 0.2, l2: 0.3, sigma_n2: 0.01 },
            output: OutputCovParams::identity(1),
        };
        let first = fit_hyperparams(&t, &init, 5000, FitMask::KERNEL_ONLY).unwrap();
        let again = fit_hyperparams(&t, &first.params, 100, FitMask::KERNEL_ONLY).unwrap();
        assert_abs_diff_eq!(again.params.kernel.sf2, first.params.kernel.sf2, epsilon = 1e-6);
        assert_abs_diff_eq!(again.params.kernel.l2, first.params.kernel.l2, epsilon = 1e-6);
    }

    #[test]
    fn zero_budget_rejected() {
        let t = set(&[[0.0, 0.0]], &[1.0], 1);
        let init = Hyperparams { kernel: KernelParams::default(), output: OutputCovParams::identity(1) };
        assert!(fit_hyperparams(&t, &init, 0, FitMask::KERNEL_ONLY).is_err());
    }

    #[test]
    fn invalid_kernel_params_rejected() {
        let t = set(&[[0.0, 0.0], [0.5, 0.0]], &[1.0, 2.0], 1);
        let kp = KernelParams { sf2: -1.0, l2: 1.0, sigma_n2: 0.0 };
        assert!(matches!(predict(&t, &kp, &OutputCovParams::identity(1), &t.x), Err(GpError::InvalidParams(_))));
    }

    #[test]
    fn centered_model_returns_channel_means_far_away() {
        let t = set(&[[0.0, 0.0], [0.3, 0.0], [0.6, 0.0]], &[10.0, 0.1, 11.0, 0.2, 12.0, 0.3], 2);
        let params = Hyperparams {
            kernel: KernelParams { sf2: 1.0, l2: 0.1, sigma_n2: 1e-4 },
            output: OutputCovParams::identity(2),
        };
        let m = MvgprModel::new(t, params, true).unwrap();
        let (mean, var) = m.predict_point(100.0, 100.0).unwrap();
        assert_abs_diff_eq!(mean[0], 11.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mean[1], 0.2, epsilon = 1e-9);
        assert_abs_diff_eq!(var[0], 1.0, epsilon = 1e-9);
    }
}
