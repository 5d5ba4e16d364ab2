//! Globally adaptive 15-point Gauss–Kronrod quadrature on finite intervals.
//!
//! Integrands are complex-valued; real integrands just return a zero
//! imaginary part. Refinement always bisects the interval with the largest
//! error estimate (lowest index on ties), so results are deterministic.

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the 7-point rule at XGK[1], XGK[3], XGK[5] and 0.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: Complex64,
    pub error: f64,
    pub evaluations: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: Complex64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> Complex64>(f: &mut F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        k += s * WGK[j];
        if j % 2 == 1 {
            g += s * WG[j / 2];
        }
    }
    Panel {
        a,
        b,
        value: k * half,
        error: ((k - g) * half).norm(),
    }
}

/// ∫_a^b f(x) dx to within max(abs_tol, rel_tol·|I|).
pub fn integrate<F: FnMut(f64) -> Complex64>(
    mut f: F,
    a: f64,
    b: f64,
    settings: &QuadSettings,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut panels = vec![kronrod(&mut f, a, b)];
    let mut evaluations = 15;
    loop {
        let value: Complex64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let target = settings.abs_tol.max(settings.rel_tol * value.norm());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
            });
        }
        if panels.len() >= settings.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                tolerance: settings.rel_tol,
                estimate: error / value.norm().max(f64::MIN_POSITIVE),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.error > panels[best].error { i } else { best });
        let Panel { a: lo, b: hi, .. } = panels.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::QuadratureNonConvergence {
                tolerance: settings.rel_tol,
                estimate: error / value.norm().max(f64::MIN_POSITIVE),
            });
        }
        panels.push(kronrod(&mut f, lo, mid));
        panels.push(kronrod(&mut f, mid, hi));
        evaluations += 30;
    }
}

/// Iterated ∫_a^b dx ∫_c^d dy f(x, y); the inner integrals run at a tenth
/// of the outer tolerance.
pub fn integrate_2d<F: FnMut(f64, f64) -> Complex64>(
    mut f: F,
    (a, b): (f64, f64),
    (c, d): (f64, f64),
    settings: &QuadSettings,
) -> Result<QuadResult> {
    let inner = QuadSettings {
        rel_tol: settings.rel_tol * 0.1,
        abs_tol: settings.abs_tol * 0.1,
        max_intervals: settings.max_intervals,
    };
    let mut failure = None;
    let mut evaluations = 0;
    let outer = integrate(
        |x| match integrate(|y| f(x, y), c, d, &inner) {
            Ok(r) => {
                evaluations += r.evaluations;
                r.value
            }
            Err(e) => {
                failure.get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        },
        a,
        b,
        settings,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(QuadResult {
        evaluations,
        ..outer
    })
}
