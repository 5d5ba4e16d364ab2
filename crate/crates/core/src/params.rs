//! Physical, timing, optical and detector parameter sets.
//!
//! Every frequency is an angular frequency in rad/s and every duration is in
//! seconds. [`two_pi_mhz`] and [`two_pi_khz`] convert from the 2π×MHz form
//! that lab notes are usually written in.

use std::f64::consts::PI;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2π × `f` MHz in rad/s.
pub fn two_pi_mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// 2π × `f` kHz in rad/s.
pub fn two_pi_khz(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

fn check_finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite, got {v}")))
    }
}

fn check_nonneg(field: &str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v < 0.0 {
        return Err(Error::validation(field, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

fn check_positive(field: &str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if v <= 0.0 {
        return Err(Error::validation(field, format!("must be > 0, got {v}")));
    }
    Ok(())
}

fn check_unit(field: &str, v: f64) -> Result<()> {
    check_finite(field, v)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::validation(field, format!("must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Drive, detuning and decay parameters of the four-level super-atom
/// (basis |g⟩, |e⟩, |r⟩, |c⟩), plus ensemble size and optical depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Single-atom probe Rabi frequency on g–e.
    pub omega_p: f64,
    /// Control Rabi frequency on e–r during the write pulse.
    pub omega_c_write: f64,
    /// Control Rabi frequency during retrieval.
    pub omega_c_ret: f64,
    /// Intermediate-state detuning during the write pulse.
    pub delta_p: f64,
    /// Two-photon detuning during the write pulse.
    pub delta_2ph: f64,
    /// Intermediate-state detuning of the control field during retrieval.
    pub delta_ret: f64,
    pub gamma_ge: f64,
    pub gamma_gr: f64,
    pub gamma_cr: f64,
    pub gamma_gc: f64,
    /// Number of atoms sharing the collective excitation.
    pub n_collective: f64,
    /// Resonant optical depth of the blockaded volume.
    pub od: f64,
}

impl PhysicalParams {
    /// The operating point of the reported experiment: √N = 20, OD = 13,
    /// write at Δp = 2π×50 MHz, retrieve at Δc = 2π×7 MHz.
    pub fn reported() -> Self {
        Self {
            omega_p: two_pi_mhz(1.0),
            omega_c_write: two_pi_mhz(6.8),
            omega_c_ret: two_pi_mhz(6.8),
            delta_p: two_pi_mhz(50.0),
            delta_2ph: two_pi_mhz(-2.0),
            delta_ret: two_pi_mhz(7.0),
            gamma_ge: two_pi_mhz(6.9),
            gamma_gr: two_pi_khz(88.0),
            gamma_cr: two_pi_khz(5.0),
            gamma_gc: two_pi_khz(2.5),
            n_collective: 400.0,
            od: 13.0,
        }
    }

    pub fn sqrt_n(&self) -> f64 {
        self.n_collective.sqrt()
    }

    /// Collectively enhanced two-photon Rabi frequency √N Ωp Ωc / (2Δp).
    pub fn effective_two_photon_rabi(&self) -> f64 {
        self.sqrt_n() * self.omega_p * self.omega_c_write / (2.0 * self.delta_p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega_p", self.omega_p),
            ("omega_c_write", self.omega_c_write),
            ("omega_c_ret", self.omega_c_ret),
            ("delta_p", self.delta_p),
            ("delta_2ph", self.delta_2ph),
            ("delta_ret", self.delta_ret),
        ] {
            check_finite(name, v)?;
        }
        for (name, v) in [
            ("gamma_ge", self.gamma_ge),
            ("gamma_gr", self.gamma_gr),
            ("gamma_cr", self.gamma_cr),
            ("gamma_gc", self.gamma_gc),
            ("od", self.od),
        ] {
            check_nonneg(name, v)?;
        }
        check_finite("n_collective", self.n_collective)?;
        if self.n_collective < 1.0 {
            return Err(Error::validation(
                "n_collective",
                format!("must be >= 1, got {}", self.n_collective),
            ));
        }
        if !(self.gamma_ge > self.gamma_gr && self.gamma_gr > self.gamma_cr) {
            warn!(
                "decay rates violate gamma_ge > gamma_gr > gamma_cr ({:.3e}, {:.3e}, {:.3e} rad/s)",
                self.gamma_ge, self.gamma_gr, self.gamma_cr
            );
        }
        Ok(())
    }
}

/// One write/store/retrieve cycle repeated `n_pulses` times with period `t_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    pub t_w: f64,
    pub t_s: f64,
    pub t_r: f64,
    pub t_p: f64,
    pub n_pulses: u64,
    pub duty_cycle: f64,
    /// Software gate length, anchored at the start of retrieval.
    pub gate_window: f64,
}

impl PulseSchedule {
    /// 370 ns write, 350 ns storage, 2.5 µs period, 1.4 µs gate.
    pub fn reported() -> Self {
        Self {
            t_w: 370e-9,
            t_s: 350e-9,
            t_r: 1.78e-6,
            t_p: 2.5e-6,
            n_pulses: 100_000,
            duty_cycle: 0.6,
            gate_window: 1.4e-6,
        }
    }

    pub fn repetition_rate(&self) -> f64 {
        1.0 / self.t_p
    }

    /// Offset of the retrieval start (and gate start) inside each period.
    pub fn retrieval_start(&self) -> f64 {
        self.t_w + self.t_s
    }

    pub fn period_ns(&self) -> u64 {
        (self.t_p * 1e9).round() as u64
    }

    pub fn gate_start_ns(&self) -> u64 {
        (self.retrieval_start() * 1e9).round() as u64
    }

    pub fn gate_ns(&self) -> u64 {
        (self.gate_window * 1e9).round() as u64
    }

    /// Wall-clock length of the pulse train in seconds.
    pub fn run_duration(&self) -> f64 {
        self.n_pulses as f64 * self.t_p
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("t_w", self.t_w),
            ("t_s", self.t_s),
            ("t_r", self.t_r),
            ("t_p", self.t_p),
            ("gate_window", self.gate_window),
        ] {
            check_positive(name, v)?;
        }
        check_finite("duty_cycle", self.duty_cycle)?;
        if !(self.duty_cycle > 0.0 && self.duty_cycle <= 1.0) {
            return Err(Error::validation(
                "duty_cycle",
                format!("must lie in (0, 1], got {}", self.duty_cycle),
            ));
        }
        if self.n_pulses == 0 {
            return Err(Error::validation("n_pulses", "must be >= 1"));
        }
        // 1 ps slack for decimal round-off in config files
        if self.t_w + self.t_s + self.t_r > self.t_p + 1e-12 {
            return Err(Error::validation(
                "t_p",
                format!(
                    "t_w + t_s + t_r = {:.4e} s exceeds the pulse period {:.4e} s",
                    self.t_w + self.t_s + self.t_r,
                    self.t_p
                ),
            ));
        }
        if self.gate_window > self.t_p + 1e-12 {
            return Err(Error::validation(
                "gate_window",
                format!(
                    "gate {:.4e} s is longer than the pulse period {:.4e} s",
                    self.gate_window, self.t_p
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalStage {
    pub label: String,
    pub efficiency: f64,
}

/// Ordered chain of lossy optical elements between the ensemble and the
/// detectors.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OpticalPath {
    pub stages: Vec<OpticalStage>,
}

impl OpticalPath {
    pub fn new(stages: impl IntoIterator<Item = (impl Into<String>, f64)>) -> Self {
        Self {
            stages: stages
                .into_iter()
                .map(|(label, efficiency)| OpticalStage {
                    label: label.into(),
                    efficiency,
                })
                .collect(),
        }
    }

    /// The measured probe-path losses: optics, AOM, PMF coupling, HOM
    /// interferometer and SPAD.
    pub fn reported() -> Self {
        Self::new([
            ("optics transmission", 0.75),
            ("AOM diffraction", 0.79),
            ("PMF coupling", 0.75),
            ("HOM interferometer", 0.38),
            ("SPAD", 0.67),
        ])
    }

    pub fn efficiency(&self) -> f64 {
        path_efficiency(self)
    }

    /// Stages of `self` followed by the stages of `other`.
    pub fn concat(&self, other: &OpticalPath) -> OpticalPath {
        let mut stages = self.stages.clone();
        stages.extend(other.stages.iter().cloned());
        OpticalPath { stages }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.stages.iter().enumerate() {
            check_unit(&format!("optics.stages[{i}].efficiency"), s.efficiency)?;
        }
        Ok(())
    }
}

/// Product of all stage efficiencies; 1 for an empty path.
pub fn path_efficiency(path: &OpticalPath) -> f64 {
    path.stages.iter().map(|s| s.efficiency).product()
}

/// Two-channel SPAD pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    /// Dark plus stray-light click rate per channel (s⁻¹).
    pub background_rates: [f64; 2],
    /// Extra detection efficiency applied on top of the optical path.
    pub efficiency: f64,
    /// Gaussian timing jitter σ in seconds.
    pub jitter: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            background_rates: [0.0, 0.0],
            efficiency: 1.0,
            jitter: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn reported() -> Self {
        Self {
            background_rates: [80.0, 100.0],
            efficiency: 1.0,
            jitter: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("background_rates[0]", self.background_rates[0])?;
        check_nonneg("background_rates[1]", self.background_rates[1])?;
        check_unit("efficiency", self.efficiency)?;
        check_nonneg("jitter", self.jitter)
    }
}

/// Amplitude transmission and reflection of one input port for one
/// polarization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortAmplitudes {
    pub t: f64,
    pub r: f64,
}

impl PortAmplitudes {
    pub fn from_intensities(t: f64, r: f64) -> Self {
        Self {
            t: t.sqrt(),
            r: r.sqrt(),
        }
    }

    pub fn transmission(&self) -> f64 {
        self.t * self.t
    }

    pub fn reflection(&self) -> f64 {
        self.r * self.r
    }

    pub fn loss(&self) -> f64 {
        (1.0 - self.transmission() - self.reflection()).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortCoeffs {
    pub h: PortAmplitudes,
    pub v: PortAmplitudes,
}

/// Possibly lossy, polarization-dependent two-port beamsplitter.
///
/// Port 1 feeds output 3 by transmission and output 4 by reflection; port 2
/// the other way round. Only α = φ₁ + φ₂ enters any probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSplitterCoeffs {
    pub port1: PortCoeffs,
    pub port2: PortCoeffs,
    pub phi1: f64,
    pub phi2: f64,
}

impl BeamSplitterCoeffs {
    /// Lossless 50:50 splitter with α = π.
    pub fn ideal() -> Self {
        Self::symmetric(0.5, 0.5)
    }

    /// Identical intensity coefficients on both ports and polarizations.
    pub fn symmetric(t: f64, r: f64) -> Self {
        let a = PortAmplitudes::from_intensities(t, r);
        let p = PortCoeffs { h: a, v: a };
        Self {
            port1: p,
            port2: p,
            phi1: PI,
            phi2: 0.0,
        }
    }

    /// The HOM combining splitter as characterized; port 2 V was not
    /// measured and is taken equal to port 2 H.
    pub fn reported() -> Self {
        let p2h = PortAmplitudes::from_intensities(0.511, 0.426);
        Self {
            port1: PortCoeffs {
                h: PortAmplitudes::from_intensities(0.502, 0.421),
                v: PortAmplitudes::from_intensities(0.484, 0.428),
            },
            port2: PortCoeffs { h: p2h, v: p2h },
            phi1: PI,
            phi2: 0.0,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.phi1 + self.phi2
    }

    pub fn validate(&self) -> Result<()> {
        let entries = [
            ("port1.h", self.port1.h),
            ("port1.v", self.port1.v),
            ("port2.h", self.port2.h),
            ("port2.v", self.port2.v),
        ];
        for (name, a) in entries {
            check_nonneg(&format!("{name}.t"), a.t)?;
            check_nonneg(&format!("{name}.r"), a.r)?;
            let total = a.transmission() + a.reflection();
            if total > 1.0 + 1e-12 {
                return Err(Error::validation(
                    name,
                    format!("t² + r² = {total} exceeds 1"),
                ));
            }
        }
        check_finite("phi1", self.phi1)?;
        check_finite("phi2", self.phi2)
    }
}
