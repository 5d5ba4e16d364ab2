//! Long-lived contaminant Rydberg states as a two-state Markov chain.
//!
//! Each pulse either finds a contaminant in the ensemble or not. An existing
//! contaminant survives one period with probability e = exp(−t_p/τ_c); an
//! empty ensemble acquires one with probability P_c. A photon can only be
//! generated (with probability P_max) when no contaminant is present.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::lsq::{levenberg_marquardt, LmSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminantParams {
    /// Creation probability per pulse.
    pub p_c: f64,
    /// Lifetime in seconds.
    pub tau_c: f64,
    /// Generation probability without a contaminant.
    pub p_max: f64,
    /// Pulse period in seconds.
    pub t_p: f64,
}

impl ContaminantParams {
    pub fn new(p_c: f64, tau_c: f64, p_max: f64, t_p: f64) -> Result<Self> {
        let cp = Self {
            p_c,
            tau_c,
            p_max,
            t_p,
        };
        cp.validate()?;
        Ok(cp)
    }

    /// P_c = 1.9e-2, τ_c = 65 µs, P_max = 0.35 at t_p = 2.5 µs.
    pub fn reported() -> Self {
        Self {
            p_c: 0.019,
            tau_c: 65e-6,
            p_max: 0.35,
            t_p: 2.5e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [("p_c", self.p_c), ("p_max", self.p_max)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(field, format!("{v} is outside [0, 1]")));
            }
        }
        for (field, v) in [("tau_c", self.tau_c), ("t_p", self.t_p)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(field, format!("{v} must be positive")));
            }
        }
        if self.lambda().abs() >= 1.0 {
            return Err(Error::validation(
                "tau_c",
                "survival minus creation probability must have magnitude below 1",
            ));
        }
        Ok(())
    }

    /// Same source at a different pulse period.
    pub fn with_period(&self, t_p: f64) -> Self {
        Self { t_p, ..*self }
    }

    /// e = exp(−t_p/τ_c)
    pub fn survival(&self) -> f64 {
        (-self.t_p / self.tau_c).exp()
    }

    /// λ = e − P_c, the per-pulse memory of the chain.
    pub fn lambda(&self) -> f64 {
        self.survival() - self.p_c
    }

    /// Stationary presence probability P_c/(1 − e + P_c).
    pub fn steady_presence(&self) -> f64 {
        self.p_c / (1.0 - self.lambda())
    }
}

/// P_n, the probability of a contaminant during pulse `n` (first pulse n = 1).
pub fn presence_prob(n: u64, cp: &ContaminantParams) -> f64 {
    debug_assert!(n >= 1);
    let lam = cp.lambda();
    let mag = lam.abs().powf(n as f64);
    let lam_n = if lam < 0.0 && n % 2 == 1 { -mag } else { mag };
    let one_minus = 1.0 - lam_n;
    cp.p_c * one_minus / (1.0 - lam)
}

/// P_g(n) = P_max(1 − P_n).
pub fn photon_prob(n: u64, cp: &ContaminantParams) -> f64 {
    cp.p_max * (1.0 - presence_prob(n, cp))
}

/// Long-train generation probability P_s.
pub fn steady_state(cp: &ContaminantParams) -> f64 {
    cp.p_max * (1.0 - cp.steady_presence())
}

/// g² between emissions `m` pulses apart, 1 + P_c λ^|m|/(1 − e).
pub fn pulse_autocorrelation(m: i64, cp: &ContaminantParams) -> Result<f64> {
    if m == 0 {
        return Err(Error::validation("m", "pulse lag must be non-zero"));
    }
    let e = cp.survival();
    Ok(1.0 + cp.p_c * cp.lambda().powi(m.unsigned_abs().min(i32::MAX as u64) as i32) / (1.0 - e))
}

/// P_c = rate·t_s·density_scale, clamped to [0, 1].
pub fn creation_linear_model(t_s: f64, rate: f64, density_scale: f64) -> Result<f64> {
    if !(t_s >= 0.0) {
        return Err(Error::validation("t_s", "must be non-negative"));
    }
    Ok((rate * t_s * density_scale).clamp(0.0, 1.0))
}

/// Success frequency at one pulse index of a train.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrainPoint {
    pub pulse_index: u64,
    pub success_rate: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PulseTrainData {
    pub points: Vec<PulseTrainPoint>,
}

impl PulseTrainData {
    /// Frequencies and binomial standard errors from per-index success counts
    /// over `trials` trains. Index 1 is `successes[0]`.
    pub fn from_counts(successes: &[u64], trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::ZeroCounts("no trains recorded".into()));
        }
        let n = trials as f64;
        let points = successes
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let p = k as f64 / n;
                // keep the weight finite at p = 0 or 1
                let var = (p * (1.0 - p)).max(1.0 / n) / n;
                PulseTrainPoint {
                    pulse_index: i as u64 + 1,
                    success_rate: p,
                    stderr: var.sqrt(),
                }
            })
            .collect();
        Ok(Self { points })
    }

    /// CSV with header `pulse_index,success_rate,stderr`.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let points = rdr
            .deserialize()
            .collect::<std::result::Result<Vec<PulseTrainPoint>, _>>()?;
        Ok(Self { points })
    }

    pub fn read_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        for p in &self.points {
            wtr.serialize(p)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// 1/σ² from the supplied standard errors (binomial by construction).
    #[default]
    Stderr,
    Unweighted,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Pulse period of the measured train; not fitted.
    pub t_p: f64,
    pub weighting: Weighting,
    pub lm: LmSettings,
}

impl FitOptions {
    pub fn new(t_p: f64) -> Self {
        Self {
            t_p,
            weighting: Weighting::default(),
            lm: LmSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContaminantFit {
    pub params: ContaminantParams,
    /// Covariance of (p_c, tau_c, p_max).
    pub covariance: [[f64; 3]; 3],
    pub chi2: f64,
    /// Model minus data, per point.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Index of the winning multi-start.
    pub start: usize,
    /// The lifetime is not constrained by the data.
    pub degenerate: bool,
}

impl ContaminantFit {
    pub fn std_errors(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.covariance[i][i].max(0.0).sqrt())
    }

    pub fn residual_norm(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

const N_STARTS: usize = 5;

/// Weighted least-squares fit of P_g(n) to a pulse train.
///
/// Parameters are (P_c, ln τ_c, P_max). Five lifetime starts are spaced
/// logarithmically between t_p and 1000·t_p; the lowest χ² wins and ties go
/// to the earliest start.
pub fn fit_pulse_train(data: &PulseTrainData, opts: &FitOptions) -> Result<ContaminantFit> {
    let pts = &data.points;
    let mut indices: Vec<u64> = pts.iter().map(|p| p.pulse_index).collect();
    indices.sort_unstable();
    indices.dedup();
    if indices.len() < 5 {
        return Err(Error::validation(
            "pulse_train",
            "need at least five distinct pulse indices",
        ));
    }
    if indices[0] == 0 {
        return Err(Error::validation("pulse_train", "pulse indices start at 1"));
    }
    for p in pts {
        if !(0.0..=1.0).contains(&p.success_rate) {
            return Err(Error::OutOfRange {
                value: p.success_rate,
                min: 0.0,
                max: 1.0,
            });
        }
        if opts.weighting == Weighting::Stderr && !(p.stderr > 0.0 && p.stderr.is_finite()) {
            return Err(Error::validation("stderr", "must be positive for weighted fits"));
        }
    }
    if !(opts.t_p > 0.0) {
        return Err(Error::validation("t_p", "must be positive"));
    }
    let (lo, hi) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
        (a.min(p.success_rate), b.max(p.success_rate))
    });
    if hi - lo <= 1e-12 {
        return Err(Error::Degenerate(
            "constant success rate: contaminant lifetime is unidentifiable".into(),
        ));
    }

    let weights: Vec<f64> = pts
        .iter()
        .map(|p| match opts.weighting {
            Weighting::Stderr => 1.0 / p.stderr,
            Weighting::Unweighted => 1.0,
        })
        .collect();
    let t_p = opts.t_p;
    let model = |x: &[f64], n: u64| {
        let cp = ContaminantParams {
            p_c: x[0],
            tau_c: x[1].exp(),
            p_max: x[2],
            t_p,
        };
        photon_prob(n, &cp)
    };
    let residuals = |x: &[f64]| -> Vec<f64> {
        pts.iter()
            .zip(&weights)
            .map(|(p, w)| (model(x, p.pulse_index) - p.success_rate) * w)
            .collect()
    };

    // starting values from the first point and the late-train plateau
    let mut sorted: Vec<&PulseTrainPoint> = pts.iter().collect();
    sorted.sort_by_key(|p| p.pulse_index);
    let first = sorted[0].success_rate.max(1e-6);
    let tail = &sorted[sorted.len() * 4 / 5..];
    let plateau = tail.iter().map(|p| p.success_rate).sum::<f64>() / tail.len() as f64;
    let q = (1.0 - plateau / first).clamp(1e-4, 0.9);

    let mut best: Option<(usize, crate::numerics::lsq::LmFit)> = None;
    let mut last_err = None;
    for k in 0..N_STARTS {
        let tau0 = t_p * 10f64.powf(3.0 * k as f64 / (N_STARTS - 1) as f64);
        let e0 = (-t_p / tau0).exp();
        let pc0 = (q * (1.0 - e0) / (1.0 - q)).clamp(1e-6, 0.5);
        let pmax0 = (first / (1.0 - pc0)).min(1.0);
        match levenberg_marquardt(&residuals, &[pc0, tau0.ln(), pmax0], &opts.lm) {
            Ok(fit) if fit.chi2.is_finite() => {
                let better = best.as_ref().is_none_or(|(_, b)| fit.chi2 < b.chi2);
                if better {
                    best = Some((k, fit));
                }
            }
            Ok(_) => {}
            Err(e) => {
                log::debug!("fit start {k} failed: {e}");
                last_err = Some(e);
            }
        }
    }
    let Some((start, fit)) = best else {
        return Err(last_err.unwrap_or(Error::FitNonConvergence(opts.lm.max_iterations)));
    };

    let x = &fit.params;
    let tau = x[1].exp();
    let params = ContaminantParams {
        p_c: x[0],
        tau_c: tau,
        p_max: x[2],
        t_p,
    };
    let dof = (pts.len() as f64 - 3.0).max(1.0);
    let scale = match opts.weighting {
        Weighting::Stderr => 1.0,
        Weighting::Unweighted => fit.chi2 / dof,
    };
    let jac_chain = [1.0, tau, 1.0];
    let (covariance, mut degenerate) = match fit.normal_inverse() {
        Some(inv) => {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = inv[(i, j)] * scale * jac_chain[i] * jac_chain[j];
                }
            }
            (c, false)
        }
        None => ([[f64::INFINITY; 3]; 3], true),
    };
    let sd_tau = covariance[1][1].sqrt();
    if !(sd_tau.is_finite()) || sd_tau > 10.0 * tau {
        degenerate = true;
    }
    if degenerate {
        log::warn!("contaminant lifetime is poorly constrained by the pulse train");
    }
    let residuals = pts
        .iter()
        .map(|p| model(x, p.pulse_index) - p.success_rate)
        .collect();
    Ok(ContaminantFit {
        params,
        covariance,
        chi2: fit.chi2,
        residuals,
        iterations: fit.iterations,
        start,
        degenerate,
    })
}
