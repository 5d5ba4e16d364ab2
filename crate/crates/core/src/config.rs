//! TOML run configuration.
//!
//! ```toml
//! [physics]
//! x2pi = true            # frequencies below are f in 2π×f MHz
//! omega_p = 1.0
//! omega_c_write = 6.8
//! omega_c_ret = 6.8      # optional, defaults to omega_c_write
//! delta_p = 50.0
//! delta_2ph = -2.0
//! delta_ret = 7.0        # optional, default 0
//! gamma_ge = 6.9
//! gamma_gr = 0.088
//! gamma_cr = 0.005       # optional, default 0
//! gamma_gc = 0.0025      # optional, default 0
//! n_collective = 400
//! od = 13
//!
//! [schedule]             # seconds
//! t_w = 370e-9
//! t_s = 350e-9
//! t_r = 1.78e-6          # optional, defaults to t_p - t_w - t_s
//! t_p = 2.5e-6
//! n_pulses = 100000      # optional, default 1
//! duty_cycle = 0.6       # optional, default 1
//! gate_window = 1.4e-6   # optional, defaults to t_r
//!
//! [optics]
//! stages = [{ label = "AOM", efficiency = 0.79 }]
//!
//! [detectors]
//! background_rates = [80.0, 100.0]
//! efficiency = 1.0
//! jitter = 0.0
//!
//! [beamsplitter]
//! intensity = true       # values are T = t², R = r² rather than amplitudes
//! t1_h = 0.502
//! r1_h = 0.421
//! # t1_v, r1_v default to port 1 H; t2_v, r2_v to port 2 H
//! # phi1, phi2 default to π and 0 (α = π)
//!
//! [source]               # optional, Monte Carlo source model
//! p_c = 0.019
//! tau_c = 65e-6
//! p_max = 0.35
//! g2 = 1e-4              # or p2 = ... (second-photon probability per emission)
//! mode_overlap = 0.982
//! rise_time = 0.0
//! decay_time = 200e-9
//! ```
//!
//! Without `x2pi` (or with `x2pi = false`) frequencies are read as rad/s.
//! All sections except `[physics]` and `[schedule]` may be omitted.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{
    BeamSplitterCoeffs, DetectorModel, OpticalPath, OpticalStage, PhysicalParams, PortAmplitudes,
    PortCoeffs, PulseSchedule,
};

/// Optional Monte Carlo source settings from the `[source]` section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSettings {
    pub p_c: f64,
    pub tau_c: f64,
    pub p_max: f64,
    /// Target g²(0); converted to a second-photon probability by the
    /// generator when `p2` is absent.
    pub g2: Option<f64>,
    pub p2: Option<f64>,
    pub mode_overlap: f64,
    pub rise_time: f64,
    pub decay_time: f64,
}

impl Default for SourceSettings {
    fn default() -> Self {
        Self {
            p_c: 0.019,
            tau_c: 65e-6,
            p_max: 0.35,
            g2: Some(1e-4),
            p2: None,
            mode_overlap: 0.982,
            rise_time: 0.0,
            decay_time: 200e-9,
        }
    }
}

/// Everything a run needs, validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub physics: PhysicalParams,
    pub schedule: PulseSchedule,
    pub optics: OpticalPath,
    pub detectors: DetectorModel,
    pub beamsplitter: BeamSplitterCoeffs,
    pub source: Option<SourceSettings>,
}

impl Config {
    /// Reported operating point with the default source model.
    pub fn reported() -> Self {
        Self {
            physics: PhysicalParams::reported(),
            schedule: PulseSchedule::reported(),
            optics: OpticalPath::reported(),
            detectors: DetectorModel::reported(),
            beamsplitter: BeamSplitterCoeffs::reported(),
            source: Some(SourceSettings::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.physics.validate()?;
        self.schedule.validate()?;
        self.optics.validate()?;
        self.detectors.validate()?;
        self.beamsplitter.validate()
    }

    /// Canonical text form: rad/s frequencies and amplitude coefficients.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig::from(self);
        toml::to_string(&raw).expect("config serializes")
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: impl AsRef<Path>) -> Result<Config> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    parse_config(&text).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_config(text: &str) -> Result<Config> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse {
        path: "<string>".into(),
        message: e.to_string(),
    })?;
    let cfg = raw.into_config()?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    physics: RawPhysics,
    schedule: RawSchedule,
    #[serde(default)]
    optics: Option<RawOptics>,
    #[serde(default)]
    detectors: Option<RawDetectors>,
    #[serde(default)]
    beamsplitter: Option<RawBeamSplitter>,
    #[serde(default)]
    source: Option<RawSource>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhysics {
    #[serde(default)]
    x2pi: bool,
    omega_p: f64,
    omega_c_write: f64,
    omega_c_ret: Option<f64>,
    delta_p: f64,
    delta_2ph: f64,
    delta_ret: Option<f64>,
    gamma_ge: f64,
    gamma_gr: f64,
    gamma_cr: Option<f64>,
    gamma_gc: Option<f64>,
    n_collective: f64,
    od: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchedule {
    t_w: f64,
    t_s: f64,
    t_r: Option<f64>,
    t_p: f64,
    n_pulses: Option<u64>,
    duty_cycle: Option<f64>,
    gate_window: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptics {
    #[serde(default)]
    stages: Vec<OpticalStage>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetectors {
    background_rates: Option<[f64; 2]>,
    efficiency: Option<f64>,
    jitter: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeamSplitter {
    #[serde(default)]
    intensity: bool,
    t1_h: f64,
    r1_h: f64,
    t1_v: Option<f64>,
    r1_v: Option<f64>,
    t2_h: f64,
    r2_h: f64,
    t2_v: Option<f64>,
    r2_v: Option<f64>,
    phi1: Option<f64>,
    phi2: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    p_c: f64,
    tau_c: f64,
    p_max: f64,
    g2: Option<f64>,
    p2: Option<f64>,
    mode_overlap: Option<f64>,
    rise_time: Option<f64>,
    decay_time: Option<f64>,
}

impl RawConfig {
    fn into_config(self) -> Result<Config> {
        let p = self.physics;
        let f = if p.x2pi { 2.0 * PI * 1e6 } else { 1.0 };
        let physics = PhysicalParams {
            omega_p: p.omega_p * f,
            omega_c_write: p.omega_c_write * f,
            omega_c_ret: p.omega_c_ret.unwrap_or(p.omega_c_write) * f,
            delta_p: p.delta_p * f,
            delta_2ph: p.delta_2ph * f,
            delta_ret: p.delta_ret.unwrap_or(0.0) * f,
            gamma_ge: p.gamma_ge * f,
            gamma_gr: p.gamma_gr * f,
            gamma_cr: p.gamma_cr.unwrap_or(0.0) * f,
            gamma_gc: p.gamma_gc.unwrap_or(0.0) * f,
            n_collective: p.n_collective,
            od: p.od,
        };

        let s = self.schedule;
        let t_r = s.t_r.unwrap_or(s.t_p - s.t_w - s.t_s);
        let schedule = PulseSchedule {
            t_w: s.t_w,
            t_s: s.t_s,
            t_r,
            t_p: s.t_p,
            n_pulses: s.n_pulses.unwrap_or(1),
            duty_cycle: s.duty_cycle.unwrap_or(1.0),
            gate_window: s.gate_window.unwrap_or(t_r),
        };

        let optics = OpticalPath {
            stages: self.optics.map(|o| o.stages).unwrap_or_default(),
        };

        let detectors = match self.detectors {
            Some(d) => {
                let def = DetectorModel::default();
                DetectorModel {
                    background_rates: d.background_rates.unwrap_or(def.background_rates),
                    efficiency: d.efficiency.unwrap_or(def.efficiency),
                    jitter: d.jitter.unwrap_or(def.jitter),
                }
            }
            None => DetectorModel::default(),
        };

        let beamsplitter = match self.beamsplitter {
            Some(b) => b.into_coeffs()?,
            None => BeamSplitterCoeffs::ideal(),
        };

        let source = self.source.map(|s| {
            let def = SourceSettings::default();
            SourceSettings {
                p_c: s.p_c,
                tau_c: s.tau_c,
                p_max: s.p_max,
                g2: if s.p2.is_some() { s.g2 } else { s.g2.or(def.g2) },
                p2: s.p2,
                mode_overlap: s.mode_overlap.unwrap_or(def.mode_overlap),
                rise_time: s.rise_time.unwrap_or(def.rise_time),
                decay_time: s.decay_time.unwrap_or(def.decay_time),
            }
        });

        Ok(Config {
            physics,
            schedule,
            optics,
            detectors,
            beamsplitter,
            source,
        })
    }
}

impl RawBeamSplitter {
    fn into_coeffs(self) -> Result<BeamSplitterCoeffs> {
        let amp = |t: f64, r: f64, field: &str| -> Result<PortAmplitudes> {
            if t < 0.0 || r < 0.0 {
                return Err(Error::validation(
                    field,
                    "transmission and reflection must be >= 0",
                ));
            }
            Ok(if self.intensity {
                PortAmplitudes::from_intensities(t, r)
            } else {
                PortAmplitudes { t, r }
            })
        };
        let p1h = amp(self.t1_h, self.r1_h, "beamsplitter.t1_h")?;
        let p1v = amp(
            self.t1_v.unwrap_or(self.t1_h),
            self.r1_v.unwrap_or(self.r1_h),
            "beamsplitter.t1_v",
        )?;
        let p2h = amp(self.t2_h, self.r2_h, "beamsplitter.t2_h")?;
        let p2v = amp(
            self.t2_v.unwrap_or(self.t2_h),
            self.r2_v.unwrap_or(self.r2_h),
            "beamsplitter.t2_v",
        )?;
        let (phi1, phi2) = match (self.phi1, self.phi2) {
            (None, None) => (PI, 0.0),
            (a, b) => (a.unwrap_or(0.0), b.unwrap_or(0.0)),
        };
        Ok(BeamSplitterCoeffs {
            port1: PortCoeffs { h: p1h, v: p1v },
            port2: PortCoeffs { h: p2h, v: p2v },
            phi1,
            phi2,
        })
    }
}

impl From<&Config> for RawConfig {
    fn from(c: &Config) -> Self {
        let p = &c.physics;
        let s = &c.schedule;
        let bs = &c.beamsplitter;
        RawConfig {
            physics: RawPhysics {
                x2pi: false,
                omega_p: p.omega_p,
                omega_c_write: p.omega_c_write,
                omega_c_ret: Some(p.omega_c_ret),
                delta_p: p.delta_p,
                delta_2ph: p.delta_2ph,
                delta_ret: Some(p.delta_ret),
                gamma_ge: p.gamma_ge,
                gamma_gr: p.gamma_gr,
                gamma_cr: Some(p.gamma_cr),
                gamma_gc: Some(p.gamma_gc),
                n_collective: p.n_collective,
                od: p.od,
            },
            schedule: RawSchedule {
                t_w: s.t_w,
                t_s: s.t_s,
                t_r: Some(s.t_r),
                t_p: s.t_p,
                n_pulses: Some(s.n_pulses),
                duty_cycle: Some(s.duty_cycle),
                gate_window: Some(s.gate_window),
            },
            optics: Some(RawOptics {
                stages: c.optics.stages.clone(),
            }),
            detectors: Some(RawDetectors {
                background_rates: Some(c.detectors.background_rates),
                efficiency: Some(c.detectors.efficiency),
                jitter: Some(c.detectors.jitter),
            }),
            beamsplitter: Some(RawBeamSplitter {
                intensity: false,
                t1_h: bs.port1.h.t,
                r1_h: bs.port1.h.r,
                t1_v: Some(bs.port1.v.t),
                r1_v: Some(bs.port1.v.r),
                t2_h: bs.port2.h.t,
                r2_h: bs.port2.h.r,
                t2_v: Some(bs.port2.v.t),
                r2_v: Some(bs.port2.v.r),
                phi1: Some(bs.phi1),
                phi2: Some(bs.phi2),
            }),
            source: c.source.map(|s| RawSource {
                p_c: s.p_c,
                tau_c: s.tau_c,
                p_max: s.p_max,
                g2: s.g2,
                p2: s.p2,
                mode_overlap: Some(s.mode_overlap),
                rise_time: Some(s.rise_time),
                decay_time: Some(s.decay_time),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::two_pi_mhz;

    const MINIMAL: &str = r#"
[physics]
x2pi = true
omega_p = 1.0
omega_c_write = 6.8
delta_p = 50.0
delta_2ph = -2.0
gamma_ge = 6.9
gamma_gr = 0.088
n_collective = 400
od = 13

[schedule]
t_w = 370e-9
t_s = 350e-9
t_p = 2.5e-6
"#;

    #[test]
    fn x2pi_frequencies_become_angular() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert!((cfg.physics.omega_c_write - two_pi_mhz(6.8)).abs() < 1e-6);
        assert!((cfg.physics.gamma_ge - two_pi_mhz(6.9)).abs() < 1e-6);
        assert_eq!(cfg.physics.omega_c_ret, cfg.physics.omega_c_write);
        assert_eq!(cfg.physics.gamma_cr, 0.0);
    }

    #[test]
    fn defaults_fill_optional_sections() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert!((cfg.schedule.t_r - 1.78e-6).abs() < 1e-15);
        assert_eq!(cfg.schedule.gate_window, cfg.schedule.t_r);
        assert_eq!(cfg.optics.efficiency(), 1.0);
        assert_eq!(cfg.beamsplitter, BeamSplitterCoeffs::ideal());
        assert!(cfg.source.is_none());
    }

    #[test]
    fn missing_phases_give_alpha_pi() {
        let text = format!(
            "{MINIMAL}\n[beamsplitter]\nintensity = true\nt1_h = 0.502\nr1_h = 0.421\nt2_h = 0.511\nr2_h = 0.426\n"
        );
        let cfg = parse_config(&text).unwrap();
        assert!((cfg.beamsplitter.alpha() - PI).abs() < 1e-15);
        assert!((cfg.beamsplitter.port1.h.transmission() - 0.502).abs() < 1e-15);
        assert_eq!(cfg.beamsplitter.port2.v, cfg.beamsplitter.port2.h);
    }

    #[test]
    fn overfull_period_is_a_validation_error() {
        let text = MINIMAL.replace("t_p = 2.5e-6", "t_p = 2.5e-6\nt_r = 2e-6");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "t_p"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_text_is_a_parse_error() {
        assert!(matches!(
            parse_config("[physics\nomega_p = "),
            Err(Error::Parse { .. })
        ));
        let unknown = MINIMAL.replace("od = 13", "od = 13\nbogus = 1");
        assert!(matches!(parse_config(&unknown), Err(Error::Parse { .. })));
    }

    #[test]
    fn negative_rate_names_the_field() {
        let text = MINIMAL.replace("gamma_gr = 0.088", "gamma_gr = -0.088");
        match parse_config(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "gamma_gr"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn reported_config_round_trips() {
        let cfg = Config::reported();
        let back = parse_config(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, MINIMAL).unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.physics.n_collective, 400.0);
        assert!(matches!(
            load_config(dir.path().join("missing.toml")),
            Err(Error::Io(_))
        ));
    }
}
