//! Adaptive Dormand–Prince 5(4) integrator.

use nalgebra::SMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// State vector of an initial-value problem.
pub trait OdeState: Clone {
    /// `self + Σ cᵢ·vᵢ`
    fn add_scaled(&self, terms: &[(f64, &Self)]) -> Self;

    /// Hairer's scaled RMS norm of `err` against the step endpoints.
    fn error_norm(&self, err: &Self, next: &Self, rtol: f64, atol: f64) -> f64;

    fn rms(&self) -> f64;

    fn scaled(&self, c: f64) -> Self;
}

impl<const R: usize, const C: usize> OdeState for SMatrix<Complex64, R, C> {
    fn add_scaled(&self, terms: &[(f64, &Self)]) -> Self {
        let mut out = *self;
        for (c, v) in terms {
            if *c != 0.0 {
                out += *v * Complex64::new(*c, 0.0);
            }
        }
        out
    }

    fn error_norm(&self, err: &Self, next: &Self, rtol: f64, atol: f64) -> f64 {
        let n = (R * C) as f64;
        let sum: f64 = self
            .iter()
            .zip(next.iter())
            .zip(err.iter())
            .map(|((a, b), e)| {
                let sc = atol + rtol * a.norm().max(b.norm());
                (e.norm() / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    fn rms(&self) -> f64 {
        (self.iter().map(|z| z.norm_sqr()).sum::<f64>() / (R * C) as f64).sqrt()
    }

    fn scaled(&self, c: f64) -> Self {
        self * Complex64::new(c, 0.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeSettings {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step; 0 means unbounded.
    pub max_step: f64,
}

impl Default for OdeSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            max_steps: 10_000_000,
            max_step: 0.0,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// fifth-order minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = rhs(t, y)` from `t0` to `t1`.
///
/// `on_step(t, y)` runs after every accepted step and may modify the state
/// (e.g. project it back onto a constraint); the modified state is what the
/// next step starts from.
pub fn integrate<S, F, G>(
    mut rhs: F,
    t0: f64,
    t1: f64,
    y0: S,
    settings: &OdeSettings,
    mut on_step: G,
) -> Result<S>
where
    S: OdeState,
    F: FnMut(f64, &S) -> S,
    G: FnMut(f64, &mut S),
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(y0);
    }
    let max_step = if settings.max_step > 0.0 {
        settings.max_step.min(span)
    } else {
        span
    };

    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, &y);

    // Hairer & Wanner's starting-step heuristic.
    let d0 = y.rms();
    let d1 = k1.rms();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6 * span
    } else {
        0.01 * d0 / d1
    };
    h = h.min(max_step);

    let mut steps = 0;
    while t < t1 {
        if steps >= settings.max_steps {
            return Err(Error::StepUnderflow { time: t, step: h });
        }
        let last = t + h >= t1;
        if last {
            h = t1 - t;
        }
        if h <= 1e-14 * t.abs().max(span) {
            return Err(Error::StepUnderflow { time: t, step: h });
        }

        let k2 = rhs(t + C2 * h, &y.add_scaled(&[(h * A21, &k1)]));
        let k3 = rhs(t + C3 * h, &y.add_scaled(&[(h * A31, &k1), (h * A32, &k2)]));
        let k4 = rhs(
            t + C4 * h,
            &y.add_scaled(&[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]),
        );
        let k5 = rhs(
            t + C5 * h,
            &y.add_scaled(&[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]),
        );
        let k6 = rhs(
            t + h,
            &y.add_scaled(&[
                (h * A61, &k1),
                (h * A62, &k2),
                (h * A63, &k3),
                (h * A64, &k4),
                (h * A65, &k5),
            ]),
        );
        let next = y.add_scaled(&[
            (h * B1, &k1),
            (h * B3, &k3),
            (h * B4, &k4),
            (h * B5, &k5),
            (h * B6, &k6),
        ]);
        let k7 = rhs(t + h, &next);
        let err = k1.scaled(h * E1).add_scaled(&[
            (h * E3, &k3),
            (h * E4, &k4),
            (h * E5, &k5),
            (h * E6, &k6),
            (h * E7, &k7),
        ]);
        let norm = y.error_norm(&err, &next, settings.rtol, settings.atol);
        steps += 1;

        if !norm.is_finite() {
            h *= 0.2;
        } else if norm <= 1.0 {
            t = if last { t1 } else { t + h };
            y = next;
            on_step(t, &mut y);
            // on_step may have moved the state, so k7 cannot be reused
            k1 = rhs(t, &y);
            let fac = if norm == 0.0 {
                5.0
            } else {
                (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * fac).min(max_step);
        } else {
            h *= (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(y)
}
