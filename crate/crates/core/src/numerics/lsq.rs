//! Levenberg–Marquardt damped least squares for small parameter vectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Stop when the relative cost decrease of an accepted step is below this.
    pub ftol: f64,
    /// Stop when the step is below this relative to the parameters.
    pub xtol: f64,
    pub initial_damping: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-14,
            xtol: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmFit {
    pub params: Vec<f64>,
    /// Σ rᵢ² at the optimum.
    pub chi2: f64,
    pub residuals: Vec<f64>,
    /// Central-difference Jacobian of the residuals at the optimum.
    pub jacobian: DMatrix<f64>,
    pub iterations: usize,
}

impl LmFit {
    /// (JᵀJ)⁻¹, or `None` when the normal matrix is singular.
    pub fn normal_inverse(&self) -> Option<DMatrix<f64>> {
        let jtj = self.jacobian.transpose() * &self.jacobian;
        jtj.try_inverse()
    }
}

/// Central-difference Jacobian, rows = residuals, columns = parameters.
pub fn jacobian<F>(residuals: &F, x: &[f64], r0_len: usize) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut jac = DMatrix::zeros(r0_len, x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-4);
        xp[j] = x[j] + h;
        let up = residuals(&xp);
        xp[j] = x[j] - h;
        let dn = residuals(&xp);
        xp[j] = x[j];
        for i in 0..r0_len {
            jac[(i, j)] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    jac
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimizes Σ rᵢ(x)² starting from `x0`.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], settings: &LmSettings) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut x = x0.to_vec();
    let mut r = residuals(&x);
    let m = r.len();
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(Error::Degenerate(
            "residuals are not finite at the starting point".into(),
        ));
    }
    let mut lambda = settings.initial_damping;

    for iter in 1..=settings.max_iterations {
        let jac = jacobian(&residuals, &x, m);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);

        let mut accepted = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..x.len() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rt = residuals(&trial);
            let ct = sum_sq(&rt);
            if ct.is_finite() && ct <= cost {
                let rel_drop = (cost - ct) / cost.max(f64::MIN_POSITIVE);
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                let small_step = step.norm() <= settings.xtol * (xnorm + settings.xtol);
                x = trial;
                r = rt;
                cost = ct;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if rel_drop <= settings.ftol || small_step {
                    let jacobian = self::jacobian(&residuals, &x, m);
                    return Ok(LmFit {
                        params: x,
                        chi2: cost,
                        residuals: r,
                        jacobian,
                        iterations: iter,
                    });
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: already at a minimum
            let jacobian = self::jacobian(&residuals, &x, m);
            return Ok(LmFit {
                params: x,
                chi2: cost,
                residuals: r,
                jacobian,
                iterations: iter,
            });
        }
    }
    Err(Error::FitNonConvergence(settings.max_iterations))
}
