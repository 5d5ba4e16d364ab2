//! Collective write and storage of the spin wave.
//!
//! The blockaded ensemble is treated as a single four-level super-atom with
//! basis (|g⟩, |e⟩, |r⟩, |c⟩) whose probe coupling is enhanced by √N. The
//! density matrix obeys a Lindblad equation with four jump operators:
//! e→g (γ_ge), r→g (γ_gr), r→c (γ_cr) and c→g (γ_gc). Probe and control are
//! square pulses on during the write time and off during storage.

use std::io::Write;

use nalgebra::Matrix4;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ode::{self, OdeSettings};
use crate::params::{PhysicalParams, PulseSchedule};

pub type Operator = Matrix4<Complex64>;

pub const G: usize = 0;
pub const E: usize = 1;
pub const R: usize = 2;
pub const C: usize = 3;

const HERMITIAN_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-8;
const POSITIVITY_TOL: f64 = 1e-8;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Four-level density matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(Operator);

impl DensityMatrix {
    /// Wraps `m` after checking hermiticity, unit trace and positivity.
    pub fn new(m: Operator) -> Result<Self> {
        let rho = Self(m);
        rho.check()?;
        Ok(rho)
    }

    pub(crate) fn new_unchecked(m: Operator) -> Self {
        Self(m)
    }

    /// |level⟩⟨level|
    pub fn pure(level: usize) -> Self {
        let mut m = Operator::zeros();
        m[(level, level)] = c(1.0);
        Self(m)
    }

    pub fn ground() -> Self {
        Self::pure(G)
    }

    pub fn matrix(&self) -> &Operator {
        &self.0
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Largest elementwise |ρ − ρ†|.
    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * c(0.5);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check(&self) -> Result<()> {
        let h = self.hermiticity_error();
        if h > HERMITIAN_TOL {
            return Err(Error::validation(
                "rho",
                format!("not Hermitian (max deviation {h:.3e})"),
            ));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::validation("rho", format!("trace {tr} differs from 1")));
        }
        let ev = self.min_eigenvalue();
        if ev < -POSITIVITY_TOL {
            return Err(Error::validation(
                "rho",
                format!("negative eigenvalue {ev:.3e}"),
            ));
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.0 = (self.0 + self.0.adjoint()) * c(0.5);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Write,
    Store,
}

/// Rotating-frame Hamiltonian in rad/s (ħ = 1).
///
/// H = ½ [[0, √N Ωp, 0, 0], [√N Ωp, −2Δp, Ωc, 0], [0, Ωc, −2δ, 0], [0, 0, 0, 0]];
/// the drives vanish during storage.
pub fn hamiltonian(params: &PhysicalParams, stage: Stage) -> Operator {
    let (omega_p, omega_c) = match stage {
        Stage::Write => (params.omega_p, params.omega_c_write),
        Stage::Store => (0.0, 0.0),
    };
    let coupling = params.sqrt_n() * omega_p;
    let mut h = Operator::zeros();
    h[(G, E)] = c(0.5 * coupling);
    h[(E, G)] = c(0.5 * coupling);
    h[(E, E)] = c(-params.delta_p);
    h[(E, R)] = c(0.5 * omega_c);
    h[(R, E)] = c(0.5 * omega_c);
    h[(R, R)] = c(-params.delta_2ph);
    h
}

/// The four jump operators √γ |to⟩⟨from|.
pub fn jump_operators(params: &PhysicalParams) -> [Operator; 4] {
    let jump = |rate: f64, to: usize, from: usize| {
        let mut m = Operator::zeros();
        m[(to, from)] = c(rate.sqrt());
        m
    };
    [
        jump(params.gamma_ge, G, E),
        jump(params.gamma_gr, G, R),
        jump(params.gamma_cr, C, R),
        jump(params.gamma_gc, G, C),
    ]
}

/// Precomputed generator dρ/dt = −i[H, ρ] + Σ (L ρ L† − ½{L†L, ρ}).
#[derive(Debug, Clone)]
pub struct Liouvillian {
    hamiltonian: Operator,
    jumps: Vec<(Operator, Operator)>,
    // −i H − ½ Σ L†L, so that dρ/dt = K ρ + ρ K† + Σ L ρ L†
    effective: Operator,
}

impl Liouvillian {
    pub fn new(hamiltonian: Operator, jumps: &[Operator]) -> Self {
        let mut effective = hamiltonian * Complex64::new(0.0, -1.0);
        let mut pairs = Vec::new();
        for l in jumps {
            if l.iter().all(|z| z.norm() == 0.0) {
                continue;
            }
            let ld = l.adjoint();
            effective -= (ld * l) * c(0.5);
            pairs.push((*l, ld));
        }
        Self {
            hamiltonian,
            jumps: pairs,
            effective,
        }
    }

    pub fn for_stage(params: &PhysicalParams, stage: Stage) -> Self {
        Self::new(hamiltonian(params, stage), &jump_operators(params))
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.hamiltonian
    }

    pub fn apply(&self, rho: &Operator) -> Operator {
        let k_rho = self.effective * rho;
        let mut out = k_rho + k_rho.adjoint();
        for (l, ld) in &self.jumps {
            out += l * rho * ld;
        }
        out
    }
}

/// Time-ordered density-matrix samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    samples: Vec<(f64, DensityMatrix)>,
}

impl Trajectory {
    pub fn new(samples: Vec<(f64, DensityMatrix)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::validation("trajectory", "no samples"));
        }
        if samples.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::validation(
                "trajectory",
                "sample times must be strictly increasing",
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[(f64, DensityMatrix)] {
        &self.samples
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn last(&self) -> &DensityMatrix {
        &self.samples[self.samples.len() - 1].1
    }

    /// Population of `level` at `t`, linear between samples.
    pub fn population_at(&self, level: usize, t: f64) -> Result<f64> {
        let end = self.end_time();
        // tolerate round-off in t_w + t_s
        let slack = 1e-12 * end.abs().max(1e-9);
        if t > end + slack || t < self.start_time() - slack {
            return Err(Error::TrajectoryTooShort { requested: t, end });
        }
        let t = t.clamp(self.start_time(), end);
        let idx = self.samples.partition_point(|(ts, _)| *ts < t);
        if idx == 0 {
            return Ok(self.samples[0].1.population(level));
        }
        let (t1, r1) = &self.samples[idx];
        if *t1 == t {
            return Ok(r1.population(level));
        }
        let (t0, r0) = &self.samples[idx - 1];
        let w = (t - t0) / (t1 - t0);
        Ok((1.0 - w) * r0.population(level) + w * r1.population(level))
    }

    /// CSV with columns `time_s,rho_gg,rho_ee,rho_rr,rho_cc,trace`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_s", "rho_gg", "rho_ee", "rho_rr", "rho_cc", "trace"])?;
        for (t, rho) in &self.samples {
            wtr.write_record(
                [
                    *t,
                    rho.population(G),
                    rho.population(E),
                    rho.population(R),
                    rho.population(C),
                    rho.trace(),
                ]
                .iter()
                .map(|v| format!("{v:.12e}")),
            )?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Integrator tolerances for [`evolve_with`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveSettings {
    pub ode: OdeSettings,
    /// Re-symmetrize ρ ← (ρ + ρ†)/2 after every accepted step.
    pub symmetrize: bool,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        Self {
            ode: OdeSettings {
                rtol: 1e-9,
                atol: 1e-12,
                ..OdeSettings::default()
            },
            symmetrize: true,
        }
    }
}

/// Write for `t_w`, then store for `t_s`, recording every accepted step.
pub fn evolve(
    rho0: &DensityMatrix,
    params: &PhysicalParams,
    schedule: &PulseSchedule,
) -> Result<Trajectory> {
    evolve_with(rho0, params, schedule, &EvolveSettings::default())
}

pub fn evolve_with(
    rho0: &DensityMatrix,
    params: &PhysicalParams,
    schedule: &PulseSchedule,
    settings: &EvolveSettings,
) -> Result<Trajectory> {
    rho0.check()?;
    params.validate()?;
    let mut samples = vec![(0.0, *rho0)];
    let stages = [
        (Stage::Write, 0.0, schedule.t_w),
        (Stage::Store, schedule.t_w, schedule.t_w + schedule.t_s),
    ];
    let mut state = *rho0.matrix();
    for (stage, t0, t1) in stages {
        if t1 <= t0 {
            continue;
        }
        let gen = Liouvillian::for_stage(params, stage);
        state = ode::integrate(
            |_, rho: &Operator| gen.apply(rho),
            t0,
            t1,
            state,
            &settings.ode,
            |t, rho| {
                let mut dm = DensityMatrix::new_unchecked(*rho);
                if settings.symmetrize {
                    dm.symmetrize();
                    *rho = dm.0;
                }
                samples.push((t, dm));
            },
        )?;
    }
    Trajectory::new(samples)
}

/// ρ_rr at the end of the write pulse.
pub fn write_efficiency(traj: &Trajectory, t_w: f64) -> Result<f64> {
    traj.population_at(R, t_w)
}

/// Fraction of the written Rydberg population left after storing for `t_s`.
pub fn storage_efficiency(traj: &Trajectory, t_w: f64, t_s: f64) -> Result<f64> {
    let written = traj.population_at(R, t_w)?;
    let stored = traj.population_at(R, t_w + t_s)?;
    if written < 1e-12 {
        return Err(Error::NoStoredPopulation(written));
    }
    Ok(stored / written)
}

/// Convenience: (η_w, η_s) starting from the ground state.
pub fn write_and_storage(params: &PhysicalParams, schedule: &PulseSchedule) -> Result<(f64, f64)> {
    let traj = evolve(&DensityMatrix::ground(), params, schedule)?;
    let eta_w = write_efficiency(&traj, schedule.t_w)?;
    let eta_s = storage_efficiency(&traj, schedule.t_w, schedule.t_s)?;
    Ok((eta_w, eta_s))
}
