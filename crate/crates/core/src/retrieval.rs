//! Forward retrieval of a stored spin wave into the signal mode.
//!
//! Everything here works in units of the intermediate-state linewidth γ_ge:
//! d = OD/2, Δ̃ = 2Δ/γ_ge, Ω̃ = Ω_c/γ_ge, γ̃_s = (γ_gr + γ_cr)/γ_ge and
//! t̃ = γ_ge·t. The efficiency is available two ways: the kernel double
//! integral over the medium, and the time integral of the emitted intensity.

use num_complex::Complex64;

use crate::dynamics;
use crate::error::{Error, Result};
use crate::numerics::bessel::{i0_complex, i0e};
use crate::numerics::quadrature::{integrate, integrate_2d, QuadSettings};
use crate::params::{PhysicalParams, PulseSchedule};

const F_XS_TOL: f64 = 1e-12;
const IMAG_RESIDUE_TOL: f64 = 1e-8;
/// Time integral stops once |E|² drops below this fraction of its peak.
pub const TRUNCATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalParams {
    pub d: f64,
    pub delta_tilde: f64,
    pub omega_tilde: f64,
    pub gamma_s_tilde: f64,
    pub x_s: f64,
    pub f_xs: f64,
}

impl RetrievalParams {
    /// Derives x_s and f(x_s) from the primary quantities.
    pub fn new(d: f64, delta_tilde: f64, omega_tilde: f64, gamma_s_tilde: f64) -> Result<Self> {
        if !(omega_tilde.is_finite() && omega_tilde != 0.0) {
            return Err(Error::validation("omega_tilde", "must be finite and non-zero"));
        }
        let x_s = 2.0 * gamma_s_tilde / (omega_tilde * omega_tilde);
        let rp = Self {
            d,
            delta_tilde,
            omega_tilde,
            gamma_s_tilde,
            x_s,
            f_xs: f_of(x_s, delta_tilde),
        };
        rp.validate()?;
        Ok(rp)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.d,
            self.delta_tilde,
            self.omega_tilde,
            self.gamma_s_tilde,
            self.x_s,
            self.f_xs,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("retrieval", "non-finite parameter"));
        }
        if self.d <= 0.0 {
            return Err(Error::validation("d", "must be positive"));
        }
        if self.x_s < 0.0 || self.gamma_s_tilde < 0.0 {
            return Err(Error::validation("x_s", "must be non-negative"));
        }
        if !(self.f_xs > 0.0 && self.f_xs <= 1.0) {
            return Err(Error::validation("f_xs", "must lie in (0, 1]"));
        }
        if (self.f_xs - f_of(self.x_s, self.delta_tilde)).abs() >= F_XS_TOL {
            return Err(Error::validation(
                "f_xs",
                "inconsistent with x_s and delta_tilde",
            ));
        }
        Ok(())
    }

    /// Same parameters at a different optical depth parameter d.
    pub fn with_d(&self, d: f64) -> Result<Self> {
        Self::new(d, self.delta_tilde, self.omega_tilde, self.gamma_s_tilde)
    }
}

fn f_of(x_s: f64, delta_tilde: f64) -> f64 {
    2.0 / (2.0 + x_s * (1.0 + delta_tilde * delta_tilde))
}

/// Retrieval-stage dimensionless parameters (uses `delta_ret` and `omega_c_ret`).
pub fn dimensionless_params(params: &PhysicalParams) -> Result<RetrievalParams> {
    if !(params.gamma_ge > 0.0) {
        return Err(Error::validation("gamma_ge", "must be positive for retrieval"));
    }
    if !(params.omega_c_ret > 0.0) {
        return Err(Error::validation("omega_c_ret", "must be positive for retrieval"));
    }
    if !(params.od > 0.0) {
        return Err(Error::validation("od", "must be positive"));
    }
    RetrievalParams::new(
        params.od / 2.0,
        2.0 * params.delta_ret / params.gamma_ge,
        params.omega_c_ret / params.gamma_ge,
        (params.gamma_gr + params.gamma_cr) / params.gamma_ge,
    )
}

/// Spin-wave amplitude S(z̃) on z̃ ∈ [0, 1], linear between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWaveProfile {
    z: Vec<f64>,
    values: Vec<Complex64>,
}

impl Default for SpinWaveProfile {
    fn default() -> Self {
        Self::uniform()
    }
}

impl SpinWaveProfile {
    pub fn uniform() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn constant(value: Complex64) -> Self {
        Self {
            z: vec![0.0, 1.0],
            values: vec![value; 2],
        }
    }

    /// Samples with strictly increasing positions spanning exactly [0, 1].
    pub fn tabulated(z: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if z.len() != values.len() || z.len() < 2 {
            return Err(Error::validation(
                "spin_wave",
                "need at least two (z, S) samples of equal length",
            ));
        }
        if z[0] != 0.0 || z[z.len() - 1] != 1.0 {
            return Err(Error::validation("spin_wave", "samples must span [0, 1]"));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("spin_wave", "positions must increase"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::validation("spin_wave", "non-finite amplitude"));
        }
        Ok(Self { z, values })
    }

    /// `n` evenly spaced samples of `f`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let n = n.max(2);
        let z: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let values = z.iter().map(|&x| f(x)).collect();
        Self::tabulated(z, values)
    }

    pub fn at(&self, z: f64) -> Complex64 {
        let z = z.clamp(0.0, 1.0);
        let idx = self.z.partition_point(|&x| x < z);
        if idx == 0 {
            return self.values[0];
        }
        let (z0, z1) = (self.z[idx - 1], self.z[idx]);
        let w = (z - z0) / (z1 - z0);
        self.values[idx - 1] * (1.0 - w) + self.values[idx] * w
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm() == 0.0)
    }
}

/// Retrieval kernel K_r(z̄, z̄′).
///
/// The Bessel factor is taken in scaled form so that e^{x} folds into the
/// exponent and large d cannot overflow.
pub fn kernel(zbar: f64, zbar_prime: f64, rp: &RetrievalParams) -> Complex64 {
    debug_assert!((0.0..=1.0).contains(&zbar) && (0.0..=1.0).contains(&zbar_prime));
    let a = rp.d * rp.f_xs / 2.0;
    let x = rp.d * (zbar * zbar_prime).sqrt() * rp.f_xs;
    let re = -a * (1.0 + rp.x_s) * (zbar + zbar_prime) + x;
    let im = a * rp.x_s * rp.delta_tilde * (zbar - zbar_prime);
    Complex64::new(re, im).exp() * (a * i0e(x))
}

/// Kernel double integral with its imaginary leftover.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalResult {
    pub efficiency: f64,
    pub imaginary_residue: f64,
    pub error_estimate: f64,
}

pub fn retrieval_efficiency(profile: &SpinWaveProfile, rp: &RetrievalParams) -> Result<f64> {
    retrieval_efficiency_detailed(profile, rp, &QuadSettings::default()).map(|r| r.efficiency)
}

pub fn retrieval_efficiency_detailed(
    profile: &SpinWaveProfile,
    rp: &RetrievalParams,
    settings: &QuadSettings,
) -> Result<RetrievalResult> {
    rp.validate()?;
    if profile.is_zero() {
        return Ok(RetrievalResult {
            efficiency: 0.0,
            imaginary_residue: 0.0,
            error_estimate: 0.0,
        });
    }
    let r = integrate_2d(
        |z, zp| kernel(z, zp, rp) * profile.at(1.0 - z) * profile.at(1.0 - zp).conj(),
        (0.0, 1.0),
        (0.0, 1.0),
        settings,
    )?;
    let efficiency = r.value.re;
    let imaginary_residue = r.value.im.abs();
    if imaginary_residue > IMAG_RESIDUE_TOL * efficiency.abs().max(settings.abs_tol) {
        log::warn!(
            "retrieval integral has imaginary residue {imaginary_residue:.3e} (real part {efficiency:.6})"
        );
    }
    Ok(RetrievalResult {
        efficiency,
        imaginary_residue,
        error_estimate: r.error,
    })
}

/// Control Rabi frequency during retrieval, in units of γ_ge.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlDrive {
    Constant(f64),
    /// Piecewise-linear Ω̃(t̃), held at the last value after the final sample.
    Samples { t: Vec<f64>, omega: Vec<f64> },
}

impl ControlDrive {
    pub fn samples(t: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != omega.len() {
            return Err(Error::validation("drive", "need matching, non-empty samples"));
        }
        if t[0] != 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("drive", "times must start at 0 and increase"));
        }
        if omega.iter().chain(&t).any(|v| !v.is_finite()) {
            return Err(Error::validation("drive", "non-finite sample"));
        }
        Ok(Self::Samples { t, omega })
    }

    pub fn omega(&self, t: f64) -> f64 {
        match self {
            Self::Constant(w) => *w,
            Self::Samples { t: ts, omega } => {
                let idx = ts.partition_point(|&x| x <= t);
                if idx == ts.len() {
                    return omega[ts.len() - 1];
                }
                if idx == 0 {
                    return omega[0];
                }
                let w = (t - ts[idx - 1]) / (ts[idx] - ts[idx - 1]);
                omega[idx - 1] * (1.0 - w) + omega[idx] * w
            }
        }
    }

    /// h(t̃) = ∫₀^t̃ Ω̃² dt̃″, exact for the piecewise-linear drive.
    pub fn pulse_area(&self, t: f64) -> f64 {
        match self {
            Self::Constant(w) => w * w * t,
            Self::Samples { t: ts, omega } => {
                // ∫ (a + (b−a)s)² ds over [0, 1] = (a² + ab + b²)/3
                let seg = |a: f64, b: f64, len: f64| len * (a * a + a * b + b * b) / 3.0;
                let mut area = 0.0;
                for i in 1..ts.len() {
                    if t <= ts[i - 1] {
                        return area;
                    }
                    if t < ts[i] {
                        return area + seg(omega[i - 1], self.omega(t), t - ts[i - 1]);
                    }
                    area += seg(omega[i - 1], omega[i], ts[i] - ts[i - 1]);
                }
                let last = omega[ts.len() - 1];
                area + last * last * (t - ts[ts.len() - 1])
            }
        }
    }
}

/// Output field E(z̃ = 1, t̃) of forward retrieval.
pub fn field_envelope(
    t_tilde: f64,
    profile: &SpinWaveProfile,
    rp: &RetrievalParams,
    drive: &ControlDrive,
) -> Result<Complex64> {
    if !(t_tilde >= 0.0) {
        return Err(Error::validation("t_tilde", "must be non-negative"));
    }
    let omega = drive.omega(t_tilde);
    if omega == 0.0 || profile.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let h = drive.pulse_area(t_tilde);
    let a = Complex64::new(1.0, rp.delta_tilde).inv();
    let d = rp.d;
    let mut failure = None;
    let integral = integrate(
        |z| {
            let bessel = match i0_complex(a * (2.0 * (h * d * z).sqrt())) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    Complex64::new(0.0, 0.0)
                }
            };
            a * (-(h + d * z) * a).exp() * bessel * profile.at(1.0 - z)
        },
        0.0,
        1.0,
        &QuadSettings {
            abs_tol: 1e-15,
            ..QuadSettings::default()
        },
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(integral.value * (-d.sqrt() * omega * (-rp.gamma_s_tilde * t_tilde).exp()))
}

/// η_r as ∫|E(1, t̃)|² dt̃, integrated chunk by chunk until the intensity
/// has fallen below [`TRUNCATION`] of its running peak.
pub fn time_domain_efficiency(
    profile: &SpinWaveProfile,
    rp: &RetrievalParams,
    drive: &ControlDrive,
) -> Result<f64> {
    rp.validate()?;
    if profile.is_zero() {
        return Ok(0.0);
    }
    const MAX_T: f64 = 1e5;
    let settings = QuadSettings {
        rel_tol: 1e-8,
        abs_tol: 0.0,
        max_intervals: 200,
    };
    let mut peak = 0.0f64;
    let mut total = 0.0;
    let mut t0 = 0.0;
    // the intensity is sharpest right after switch-on; start with short chunks
    let mut len = 0.25;
    while t0 < MAX_T {
        let t1 = t0 + len;
        let mut failure = None;
        let mut chunk_peak = 0.0f64;
        let chunk = integrate(
            |t| {
                let e = field_envelope(t, profile, rp, drive).unwrap_or_else(|err| {
                    failure.get_or_insert(err);
                    Complex64::new(0.0, 0.0)
                });
                let i = e.norm_sqr();
                chunk_peak = chunk_peak.max(i);
                Complex64::new(i, 0.0)
            },
            t0,
            t1,
            &QuadSettings {
                abs_tol: TRUNCATION * 1e-3 * peak,
                ..settings
            },
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        total += chunk.value.re;
        peak = peak.max(chunk_peak);
        let tail = field_envelope(t1, profile, rp, drive)?.norm_sqr();
        if peak > 0.0 && chunk_peak < TRUNCATION * peak && tail < TRUNCATION * peak {
            return Ok(total);
        }
        if peak == 0.0 && t1 > 10.0 {
            return Ok(0.0);
        }
        t0 = t1;
        len = (len * 1.5).min(20.0);
    }
    log::warn!("time-domain retrieval integral truncated at t~ = {MAX_T}");
    Ok(total)
}

/// (t̃, E) on an even grid, for envelope tables.
pub fn envelope_table(
    profile: &SpinWaveProfile,
    rp: &RetrievalParams,
    drive: &ControlDrive,
    t_max: f64,
    n: usize,
) -> Result<Vec<(f64, Complex64)>> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            let t = t_max * i as f64 / (n - 1) as f64;
            field_envelope(t, profile, rp, drive).map(|e| (t, e))
        })
        .collect()
}

/// P_th = η_w·η_s·η_r.
pub fn generation_probability(eta_w: f64, eta_s: f64, eta_r: f64) -> Result<f64> {
    for v in [eta_w, eta_s, eta_r] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::OutOfRange {
                value: v,
                min: 0.0,
                max: 1.0,
            });
        }
    }
    Ok(eta_w * eta_s * eta_r)
}

/// Write, storage and retrieval efficiencies and their product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryReport {
    pub eta_w: f64,
    pub eta_s: f64,
    pub eta_r: f64,
    pub p_th: f64,
}

/// Full chain from the ground state with a uniform spin wave.
///
/// Nothing written means nothing stored, and no retrieval control field
/// means nothing retrieved; both report zero instead of failing.
pub fn theory(params: &PhysicalParams, schedule: &PulseSchedule) -> Result<TheoryReport> {
    let (eta_w, eta_s) = match dynamics::write_and_storage(params, schedule) {
        Err(Error::NoStoredPopulation(w)) => (w, 0.0),
        other => other?,
    };
    let eta_r = if params.omega_c_ret == 0.0 {
        0.0
    } else {
        let rp = dimensionless_params(params)?;
        retrieval_efficiency(&SpinWaveProfile::uniform(), &rp)?
    };
    let p_th = generation_probability(eta_w, eta_s, eta_r.clamp(0.0, 1.0))?;
    Ok(TheoryReport {
        eta_w,
        eta_s,
        eta_r,
        p_th,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{two_pi_khz, two_pi_mhz};
    use proptest::prelude::*;

    fn reported() -> RetrievalParams {
        dimensionless_params(&PhysicalParams::reported()).unwrap()
    }

    fn bessel_series(x: f64) -> f64 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..40 {
            term *= (x * x / 4.0) / (k * k) as f64;
            sum += term;
        }
        sum
    }

    /// Dense trapezoid rule over [0, 1]² with the unscaled Bessel series.
    fn trapezoid_oracle(rp: &RetrievalParams, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        let a = rp.d * rp.f_xs / 2.0;
        let mut sum = 0.0;
        for i in 0..=n {
            let z = i as f64 * h;
            let wi = if i == 0 || i == n { 0.5 } else { 1.0 };
            for j in 0..=n {
                let zp = j as f64 * h;
                let wj = if j == 0 || j == n { 0.5 } else { 1.0 };
                let k = a
                    * (-a * (1.0 + rp.x_s) * (z + zp)).exp()
                    * (a * rp.x_s * rp.delta_tilde * (z - zp)).cos()
                    * bessel_series(rp.d * (z * zp).sqrt() * rp.f_xs);
                sum += wi * wj * k;
            }
        }
        sum * h * h
    }

    #[test]
    fn optical_depth_halved() {
        assert_eq!(reported().d, 6.5);
    }

    #[test]
    fn lossless_spin_wave_gives_unit_f() {
        let mut p = PhysicalParams::reported();
        p.gamma_gr = 0.0;
        p.gamma_cr = 0.0;
        let rp = dimensionless_params(&p).unwrap();
        assert_eq!(rp.x_s, 0.0);
        assert_eq!(rp.f_xs, 1.0);
    }

    #[test]
    fn reported_dimensionless_values_by_hand() {
        let rp = reported();
        let gamma_ge = two_pi_mhz(6.9);
        let gs = (two_pi_khz(88.0) + two_pi_khz(5.0)) / gamma_ge;
        let om = two_pi_mhz(6.8) / gamma_ge;
        let dt = 2.0 * two_pi_mhz(7.0) / gamma_ge;
        let xs = 2.0 * gs / (om * om);
        assert!((rp.gamma_s_tilde - 93.0 / 6900.0).abs() < 1e-15);
        assert!((rp.omega_tilde - 6.8 / 6.9).abs() < 1e-15);
        assert!((rp.delta_tilde - 14.0 / 6.9).abs() < 1e-14);
        assert!((rp.x_s - xs).abs() < 1e-15);
        assert!((rp.f_xs - 2.0 / (2.0 + xs * (1.0 + dt * dt))).abs() < 1e-15);
        assert!((rp.x_s - 0.027_76).abs() < 1e-5);
    }

    #[test]
    fn zero_rates_or_drive_rejected() {
        let mut p = PhysicalParams::reported();
        p.gamma_ge = 0.0;
        assert!(dimensionless_params(&p).is_err());
        let mut p = PhysicalParams::reported();
        p.omega_c_ret = 0.0;
        assert!(dimensionless_params(&p).is_err());
    }

    #[test]
    fn inconsistent_f_rejected() {
        let mut rp = reported();
        rp.f_xs *= 1.0 + 1e-9;
        assert!(rp.validate().is_err());
    }

    #[test]
    fn kernel_at_origin() {
        let rp = reported();
        let k = kernel(0.0, 0.0, &rp);
        assert!((k.re - rp.d * rp.f_xs / 2.0).abs() < 1e-15);
        assert_eq!(k.im, 0.0);
    }

    #[test]
    fn uniform_profile_retrieval_near_reported() {
        let eta = retrieval_efficiency(&SpinWaveProfile::uniform(), &reported()).unwrap();
        assert!((eta - 0.6344).abs() < 5e-4, "{eta}");
    }

    #[test]
    fn imaginary_residue_is_small() {
        let r = retrieval_efficiency_detailed(
            &SpinWaveProfile::uniform(),
            &reported(),
            &QuadSettings::default(),
        )
        .unwrap();
        assert!(r.imaginary_residue < 1e-8 * r.efficiency, "{r:?}");
    }

    #[test]
    fn zero_profile_gives_zero() {
        let s = SpinWaveProfile::constant(Complex64::new(0.0, 0.0));
        assert_eq!(retrieval_efficiency(&s, &reported()).unwrap(), 0.0);
        let e = field_envelope(1.0, &s, &reported(), &ControlDrive::Constant(1.0)).unwrap();
        assert_eq!(e, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn matches_dense_trapezoid_without_decay() {
        let rp = RetrievalParams::new(6.5, 0.0, 1.0, 0.0).unwrap();
        let eta = retrieval_efficiency(&SpinWaveProfile::uniform(), &rp).unwrap();
        let oracle = trapezoid_oracle(&rp, 2000);
        assert!((eta - oracle).abs() < 1e-4, "{eta} vs {oracle}");
    }

    #[test]
    fn monotone_in_optical_depth() {
        let base = RetrievalParams::new(1.0, 0.0, 1.0, 0.0).unwrap();
        let mut last = 0.0;
        for d in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let rp = base.with_d(d).unwrap();
            let eta = retrieval_efficiency(&SpinWaveProfile::uniform(), &rp).unwrap();
            let oracle = trapezoid_oracle(&rp, 800);
            assert!((eta - oracle).abs() < 1e-3, "d={d}: {eta} vs {oracle}");
            assert!(eta >= last, "d={d}: {eta} < {last}");
            assert!(eta <= 1.0 + 1e-8);
            last = eta;
        }
    }

    #[test]
    fn field_at_switch_on() {
        let rp = reported();
        let s = SpinWaveProfile::uniform();
        let e = field_envelope(0.0, &s, &rp, &ControlDrive::Constant(rp.omega_tilde)).unwrap();
        // ∫₀¹ a e^{−d z a} dz = (1 − e^{−d a})/d with a = 1/(1 + iΔ̃)
        let a = Complex64::new(1.0, rp.delta_tilde).inv();
        let want = (Complex64::new(1.0, 0.0) - (-rp.d * a).exp()) / rp.d
            * (-rp.d.sqrt() * rp.omega_tilde);
        assert!((e - want).norm() < 1e-10, "{e} vs {want}");
    }

    #[test]
    fn no_drive_no_field() {
        let rp = reported();
        let s = SpinWaveProfile::uniform();
        for t in [0.0, 0.5, 3.0] {
            assert_eq!(
                field_envelope(t, &s, &rp, &ControlDrive::Constant(0.0)).unwrap(),
                Complex64::new(0.0, 0.0)
            );
        }
    }

    #[test]
    fn time_and_kernel_routes_agree() {
        let rp = reported();
        let s = SpinWaveProfile::uniform();
        let kernel_route = retrieval_efficiency(&s, &rp).unwrap();
        let time_route =
            time_domain_efficiency(&s, &rp, &ControlDrive::Constant(rp.omega_tilde)).unwrap();
        assert!(
            (kernel_route - time_route).abs() < 1e-3,
            "{kernel_route} vs {time_route}"
        );
    }

    #[test]
    fn piecewise_drive_area() {
        let d = ControlDrive::samples(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 2.0]).unwrap();
        assert!((d.pulse_area(1.0) - 4.0 / 3.0).abs() < 1e-14);
        assert!((d.pulse_area(3.0) - (4.0 / 3.0 + 8.0)).abs() < 1e-14);
        assert!((d.pulse_area(4.0) - (4.0 / 3.0 + 12.0)).abs() < 1e-14);
        assert!((d.pulse_area(0.5) - 0.5 / 3.0 * 1.0).abs() < 1e-14);
    }

    #[test]
    fn profile_interpolation() {
        let s = SpinWaveProfile::from_fn(3, |z| Complex64::new(z * z, 0.0)).unwrap();
        assert_eq!(s.at(0.25).re, 0.125);
        assert_eq!(s.at(1.0).re, 1.0);
        assert!(SpinWaveProfile::tabulated(vec![0.0, 0.5], vec![Complex64::new(1.0, 0.0); 2]).is_err());
    }

    #[test]
    fn generation_probability_product() {
        assert!((generation_probability(0.82, 0.82, 0.63).unwrap() - 0.423_612).abs() < 1e-12);
        assert_eq!(generation_probability(0.0, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(generation_probability(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(generation_probability(1.1, 0.5, 0.5).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn kernel_is_hermitian(z in 0.0..=1.0f64, zp in 0.0..=1.0f64,
                               d in 0.1..20.0f64, dt in -5.0..5.0f64, gs in 0.0..0.2f64) {
            let rp = RetrievalParams::new(d, dt, 1.0, gs).unwrap();
            let a = kernel(z, zp, &rp);
            let b = kernel(zp, z, &rp).conj();
            prop_assert!((a - b).norm() <= 1e-14 * a.norm().max(1e-300));
        }

        #[test]
        fn kernel_matches_series(z in 0.0..=1.0f64, zp in 0.0..=1.0f64,
                                 d in 0.1..10.0f64, dt in -5.0..5.0f64, xs in 0.0..0.5f64) {
            let rp = RetrievalParams::new(d, dt, 1.0, xs / 2.0).unwrap();
            let a = d * rp.f_xs / 2.0;
            let expo = Complex64::new(
                -a * (1.0 + xs) * (z + zp),
                a * xs * dt * (z - zp),
            ).exp();
            let want = expo * a * bessel_series(d * (z * zp).sqrt() * rp.f_xs);
            let got = kernel(z, zp, &rp);
            prop_assert!((got - want).norm() <= 1e-12 * want.norm(), "{} vs {}", got, want);
        }

        #[test]
        fn efficiency_bounded_and_detuning_even(d in 0.2..15.0f64, dt in 0.0..6.0f64,
                                                 gs in 0.0..0.1f64) {
            let s = SpinWaveProfile::uniform();
            let plus = RetrievalParams::new(d, dt, 1.0, gs).unwrap();
            let minus = RetrievalParams::new(d, -dt, 1.0, gs).unwrap();
            let ep = retrieval_efficiency(&s, &plus).unwrap();
            let em = retrieval_efficiency(&s, &minus).unwrap();
            prop_assert!(ep >= 0.0 && ep <= 1.0 + 1e-8);
            prop_assert!((ep - em).abs() <= 1e-9);
        }
    }

    #[test]
    fn zero_drive_reports_zeros() {
        let mut p = PhysicalParams::reported();
        p.omega_p = 0.0;
        p.omega_c_write = 0.0;
        p.omega_c_ret = 0.0;
        let r = theory(&p, &PulseSchedule::reported()).unwrap();
        assert_eq!((r.eta_w, r.eta_s, r.eta_r, r.p_th), (0.0, 0.0, 0.0, 0.0));
    }
}
