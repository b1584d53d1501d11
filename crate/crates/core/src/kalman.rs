//! Mode-matched Kalman prediction and correction.

use core::f64::consts::PI;

use crate::linalg::{self, PSD_TOL};
use crate::model::MjlsModel;
use crate::{Error, Matrix, Result, Vector};

/// Mean and covariance of a Gaussian state estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBelief {
    pub mean: Vector,
    pub cov: Matrix,
}

impl GaussianBelief {
    pub fn new(mean: Vector, cov: Matrix) -> Self {
        GaussianBelief { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Covariance symmetric and PSD within `1e-10`, dimensions consistent.
    pub fn is_valid(&self) -> bool {
        self.cov.shape() == (self.mean.len(), self.mean.len()) && linalg::is_psd(&self.cov, PSD_TOL)
    }
}

/// How the corrected covariance is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceUpdate {
    /// `P = P⁻ - K S Kᵀ`, then symmetrized.
    #[default]
    Standard,
    /// `P = (I - K C) P⁻ (I - K C)ᵀ + K R Kᵀ` with `R = D V Dᵀ`.
    Joseph,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanOptions {
    pub covariance_update: CovarianceUpdate,
    /// Smallest admissible ratio of extreme eigenvalues of the innovation covariance.
    pub condition_floor: f64,
}

impl Default for KalmanOptions {
    fn default() -> Self {
        KalmanOptions { covariance_update: CovarianceUpdate::Standard, condition_floor: 1e-12 }
    }
}

/// Everything one mode-matched filter produces in one step.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeStepOutput {
    pub predicted: GaussianBelief,
    pub innovation: Vector,
    pub innovation_cov: Matrix,
    pub gain: Matrix,
    pub posterior: GaussianBelief,
    /// `log N(innovation; 0, innovation_cov)`.
    pub log_likelihood: f64,
}

impl ModeStepOutput {
    pub fn likelihood(&self) -> f64 {
        libm::exp(self.log_likelihood)
    }
}

/// Log-density of `N(0, cov)` at `residual`, via a Cholesky factor.
pub fn gaussian_logpdf(residual: &Vector, cov: &Matrix) -> Result<f64> {
    let n = residual.len();
    if cov.shape() != (n, n) {
        return Err(Error::Dimension(alloc::format!(
            "residual has length {n} but covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let chol = linalg::symmetrize(cov).cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l_dirty();
    let mut log_det_half = 0.0;
    for i in 0..n {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        log_det_half += libm::log(d);
    }
    let z = l
        .solve_lower_triangular(residual)
        .ok_or(Error::NotPositiveDefinite)?;
    let maha = z.norm_squared();
    Ok(-0.5 * (n as f64) * libm::log(2.0 * PI) - log_det_half - 0.5 * maha)
}

/// One prediction and correction of the filter matched to `mode`.
///
/// `step` is only used to label failures.
pub fn kf_step(
    model: &MjlsModel,
    mode: usize,
    prior: &GaussianBelief,
    y: &Vector,
    options: &KalmanOptions,
    step: usize,
) -> Result<ModeStepOutput> {
    let m = model.modes.get(mode).ok_or_else(|| {
        Error::Dimension(alloc::format!("mode {mode} out of range ({} modes)", model.n_theta()))
    })?;
    if prior.mean.len() != model.n_x || prior.cov.shape() != (model.n_x, model.n_x) {
        return Err(Error::Dimension(alloc::format!(
            "prior has dimension {} but the model state has {}",
            prior.mean.len(),
            model.n_x
        )));
    }
    if y.len() != model.n_y {
        return Err(Error::Dimension(alloc::format!(
            "observation has length {} but n_y = {}",
            y.len(),
            model.n_y
        )));
    }

    let x_pred = &m.a * &prior.mean;
    let p_pred = linalg::symmetrize(
        &(&m.a * &prior.cov * m.a.transpose() + &m.b * &model.w * m.b.transpose()),
    );

    let meas_cov = &m.d * &model.v * m.d.transpose();
    let s = linalg::symmetrize(&(&m.c * &p_pred * m.c.transpose() + &meas_cov));

    let eig = linalg::sym_eigenvalues(&s);
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(ratio >= options.condition_floor) {
        return Err(Error::SingularInnovation { mode, step, ratio });
    }
    let chol = s.clone().cholesky().ok_or(Error::SingularInnovation { mode, step, ratio })?;

    // K = P⁻ Cᵀ S⁻¹, solved as Kᵀ = S⁻¹ C P⁻.
    let gain = chol.solve(&(&m.c * &p_pred)).transpose();
    let innovation = y - &m.c * &x_pred;
    let mean = &x_pred + &gain * &innovation;

    let cov = match options.covariance_update {
        CovarianceUpdate::Standard => &p_pred - &gain * &s * gain.transpose(),
        CovarianceUpdate::Joseph => {
            let i_kc = Matrix::identity(model.n_x, model.n_x) - &gain * &m.c;
            &i_kc * &p_pred * i_kc.transpose() + &gain * &meas_cov * gain.transpose()
        }
    };
    let cov = linalg::symmetrize(&cov);

    let log_likelihood = gaussian_logpdf(&innovation, &s)?;

    Ok(ModeStepOutput {
        predicted: GaussianBelief::new(x_pred, p_pred),
        innovation,
        innovation_cov: s,
        gain,
        posterior: GaussianBelief::new(mean, cov),
        log_likelihood,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::scalar_model;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn scalar_step_by_hand() {
        // P⁻ = 1·1·1 + 1 = 2, S = 2 + 2 = 4, K = 2/4, x = 0 + 0.5·4, P = 2 - 0.25·4.
        let mut m = scalar_model(1.0, Matrix::identity(1, 1), &[1.0]);
        m.v = Matrix::from_element(1, 1, 2.0);
        let prior = GaussianBelief::new(Vector::zeros(1), Matrix::identity(1, 1));
        let y = Vector::from_element(1, 4.0);
        for update in [CovarianceUpdate::Standard, CovarianceUpdate::Joseph] {
            let opts = KalmanOptions { covariance_update: update, ..Default::default() };
            let out = kf_step(&m, 0, &prior, &y, &opts, 1).unwrap();
            assert!(approx(out.predicted.cov[(0, 0)], 2.0, 1e-15));
            assert!(approx(out.innovation_cov[(0, 0)], 4.0, 1e-15));
            assert!(approx(out.gain[(0, 0)], 0.5, 1e-15));
            assert!(approx(out.posterior.mean[0], 2.0, 1e-15));
            assert!(approx(out.posterior.cov[(0, 0)], 1.0, 1e-15));
            assert!(out.likelihood() > 0.0);
        }
    }

    #[test]
    fn huge_measurement_noise_leaves_prediction() {
        let mut m = scalar_model(0.8, Matrix::identity(1, 1), &[1.0]);
        m.v = Matrix::from_element(1, 1, 1e12);
        let prior = GaussianBelief::new(Vector::from_element(1, 3.0), Matrix::identity(1, 1));
        let y = Vector::from_element(1, -50.0);
        let out = kf_step(&m, 0, &prior, &y, &Default::default(), 1).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        assert!(rel(out.posterior.mean[0], out.predicted.mean[0]) < 1e-6);
        assert!(rel(out.posterior.cov[(0, 0)], out.predicted.cov[(0, 0)]) < 1e-6);
    }

    #[test]
    fn noiseless_measurement_is_singular() {
        let mut m = scalar_model(1.0, Matrix::identity(1, 1), &[1.0]);
        m.w = Matrix::zeros(1, 1);
        m.v = Matrix::zeros(1, 1);
        m.modes[0].d = Matrix::zeros(1, 1);
        let prior = GaussianBelief::new(Vector::zeros(1), Matrix::zeros(1, 1));
        let err = kf_step(&m, 0, &prior, &Vector::zeros(1), &Default::default(), 7).unwrap_err();
        assert!(matches!(err, Error::SingularInnovation { mode: 0, step: 7, .. }));
    }

    #[test]
    fn logpdf_values() {
        let two_pi = 2.0 * PI;
        let v = gaussian_logpdf(&Vector::zeros(2), &Matrix::identity(2, 2)).unwrap();
        assert!(approx(v, libm::log(1.0 / two_pi), 1e-14));
        let v = gaussian_logpdf(&Vector::from_row_slice(&[1.0, 0.0]), &Matrix::identity(2, 2))
            .unwrap();
        assert!(approx(v, libm::log(1.0 / two_pi) - 0.5, 1e-14));
        let v = gaussian_logpdf(&Vector::from_element(1, 2.0), &Matrix::from_element(1, 1, 4.0))
            .unwrap();
        assert!(approx(v, libm::log(1.0 / libm::sqrt(8.0 * PI)) - 0.5, 1e-14));
    }

    #[test]
    fn logpdf_rejects_non_pd() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(gaussian_logpdf(&Vector::zeros(2), &c), Err(Error::NotPositiveDefinite));
        assert!(matches!(
            gaussian_logpdf(&Vector::zeros(3), &Matrix::identity(2, 2)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn logpdf_matches_dense_formula() {
        let c = Matrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 0.5]);
        let r = Vector::from_row_slice(&[0.7, -1.1]);
        let inv = c.clone().try_inverse().unwrap();
        let expected = -libm::log(2.0 * PI)
            - 0.5 * libm::log(c.determinant())
            - 0.5 * (r.transpose() * inv * &r)[(0, 0)];
        assert!(approx(gaussian_logpdf(&r, &c).unwrap(), expected, 1e-13));
    }
}
