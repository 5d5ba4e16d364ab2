//! Monte Carlo time-tag generator.
//!
//! A run is built in three stages: the source emits photons pulse by pulse
//! ([`simulate_emissions`]), the optical path thins them ([`apply_losses`]),
//! and a splitter network routes survivors onto two detectors that also
//! click on dark counts ([`route_and_detect`]).
//!
//! Every stage draws from its own ChaCha8 stream derived from the run seed,
//! so switching one stage off or changing its parameters leaves the draws of
//! the others untouched.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::config::SourceSettings;
use crate::contaminant::{steady_state, ContaminantParams};
use crate::error::{Error, Result};
use crate::params::{BeamSplitterCoeffs, DetectorModel, OpticalPath, PortAmplitudes, PulseSchedule};
use crate::timetag::{TimeTag, TimeTagStream};

pub const STREAM_EMISSION: u64 = 0;
pub const STREAM_LOSS: u64 = 1;
pub const STREAM_ROUTING: u64 = 2;
pub const STREAM_DARKS: u64 = 3;
pub const STREAM_JITTER: u64 = 4;

/// Detector channel fed by splitter output 3 (port-1 transmission).
pub const CHANNEL_A: u8 = 1;
/// Detector channel fed by splitter output 4.
pub const CHANNEL_B: u8 = 2;

pub fn subsystem_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const ENVELOPE_TABLE: usize = 4096;

/// Photon intensity profile after the retrieval start: a rise of
/// 1 − e^{−t/τ_rise} times an exponential decay, cut off at the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub rise_time: f64,
    pub decay_time: f64,
    pub truncation: f64,
    // cumulative distribution on an even grid over [0, truncation]
    cdf: Vec<f64>,
}

impl Envelope {
    pub fn new(rise_time: f64, decay_time: f64, truncation: f64) -> Result<Self> {
        if !(rise_time >= 0.0 && rise_time.is_finite()) {
            return Err(Error::validation("rise_time", "must be finite and non-negative"));
        }
        if !(decay_time > 0.0) {
            return Err(Error::validation("decay_time", "must be positive"));
        }
        if !(truncation > 0.0 && truncation.is_finite()) {
            return Err(Error::validation("truncation", "must be positive"));
        }
        let mut env = Self {
            rise_time,
            decay_time,
            truncation,
            cdf: Vec::new(),
        };
        if rise_time > 0.0 {
            let h = truncation / ENVELOPE_TABLE as f64;
            let mut cdf = Vec::with_capacity(ENVELOPE_TABLE + 1);
            cdf.push(0.0);
            let mut acc = 0.0;
            for i in 0..ENVELOPE_TABLE {
                let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
                // Simpson on each cell
                acc += h / 6.0
                    * (env.shape(a) + 4.0 * env.shape(0.5 * (a + b)) + env.shape(b));
                cdf.push(acc);
            }
            let total = acc;
            cdf.iter_mut().for_each(|v| *v /= total);
            env.cdf = cdf;
        }
        Ok(env)
    }

    /// Zero rise, 200 ns decay, cut at `gate`.
    pub fn default_for_gate(gate: f64) -> Result<Self> {
        Self::new(0.0, 200e-9, gate)
    }

    fn shape(&self, t: f64) -> f64 {
        let rise = if self.rise_time > 0.0 {
            -(-t / self.rise_time).exp_m1()
        } else {
            1.0
        };
        rise * (-t / self.decay_time).exp()
    }

    fn norm(&self) -> f64 {
        if self.rise_time > 0.0 {
            let t = self.truncation;
            let (r, d) = (self.rise_time, self.decay_time);
            let k = 1.0 / r + 1.0 / d;
            d * -(-t / d).exp_m1() - -(-t * k).exp_m1() / k
        } else {
            self.decay_time * -(-self.truncation / self.decay_time).exp_m1()
        }
    }

    /// Normalized density on [0, truncation].
    pub fn density(&self, t: f64) -> f64 {
        if !(0.0..=self.truncation).contains(&t) {
            return 0.0;
        }
        self.shape(t) / self.norm()
    }

    /// Inverse-CDF draw from a uniform `u` ∈ [0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        if self.rise_time == 0.0 {
            let mass = -(-self.truncation / self.decay_time).exp_m1();
            return (-self.decay_time * (-u * mass).ln_1p()).min(self.truncation);
        }
        let idx = self.cdf.partition_point(|&c| c <= u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[idx - 1], self.cdf[idx]);
        let h = self.truncation / ENVELOPE_TABLE as f64;
        let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
        ((idx - 1) as f64 + w) * h
    }
}

/// Source statistics and photon shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    pub cp: ContaminantParams,
    /// Probability of a second photon given that the pulse emitted.
    pub p2: f64,
    pub envelope: Envelope,
    /// Overlap of photons from different pulses.
    pub mode_overlap: f64,
}

impl SourceModel {
    pub fn new(cp: ContaminantParams, p2: f64, envelope: Envelope, mode_overlap: f64) -> Result<Self> {
        let src = Self {
            cp,
            p2,
            envelope,
            mode_overlap,
        };
        src.validate()?;
        Ok(src)
    }

    /// Second-photon probability giving a heralded g²(0) of `g2` at the
    /// steady-state generation probability (P₂ ≈ g²P₁²/2).
    pub fn p2_for_g2(g2: f64, cp: &ContaminantParams) -> f64 {
        (g2 * steady_state(cp) / 2.0).clamp(0.0, 1.0)
    }

    /// From the config `[source]` section and the run schedule.
    pub fn from_settings(s: &SourceSettings, schedule: &PulseSchedule) -> Result<Self> {
        let cp = ContaminantParams::new(s.p_c, s.tau_c, s.p_max, schedule.t_p)?;
        let p2 = match (s.p2, s.g2) {
            (Some(p2), _) => p2,
            (None, Some(g2)) => Self::p2_for_g2(g2, &cp),
            (None, None) => 0.0,
        };
        let envelope = Envelope::new(s.rise_time, s.decay_time, schedule.gate_window)?;
        Self::new(cp, p2, envelope, s.mode_overlap)
    }

    pub fn validate(&self) -> Result<()> {
        self.cp.validate()?;
        if !(0.0..=1.0).contains(&self.p2) {
            return Err(Error::validation("p2", "must lie in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.mode_overlap) {
            return Err(Error::validation("mode_overlap", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Topology {
    #[default]
    Hbt,
    Hom,
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hbt" => Ok(Self::Hbt),
            "hom" => Ok(Self::Hom),
            other => Err(Error::validation(
                "topology",
                format!("unknown topology `{other}` (expected hbt or hom)"),
            )),
        }
    }
}

/// Relative polarization of the two HOM arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HomPolarization {
    #[default]
    Parallel,
    /// Port 1 is rotated to V: fully distinguishable, V coefficients apply.
    Perpendicular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub n_pulses: u64,
    pub topology: Topology,
    pub hom_delay: f64,
    pub hom_polarization: HomPolarization,
    /// Contaminant state resets every this many pulses; `None` is one
    /// continuous train.
    pub train_length: Option<u64>,
    pub schedule: PulseSchedule,
    pub path: OpticalPath,
    pub detectors: DetectorModel,
    pub beamsplitter: BeamSplitterCoeffs,
}

impl SimConfig {
    pub fn new(
        seed: u64,
        schedule: PulseSchedule,
        path: OpticalPath,
        detectors: DetectorModel,
        beamsplitter: BeamSplitterCoeffs,
    ) -> Self {
        Self {
            seed,
            n_pulses: schedule.n_pulses,
            topology: Topology::Hbt,
            hom_delay: 4.92e-6,
            hom_polarization: HomPolarization::Parallel,
            train_length: None,
            schedule,
            path,
            detectors,
            beamsplitter,
        }
    }

    /// Delay line length in pulse periods.
    pub fn hom_delay_pulses(&self) -> Result<u64> {
        let k = (self.hom_delay / self.schedule.t_p).round();
        if k < 1.0 || (k * self.schedule.t_p - self.hom_delay).abs() > 1e-9 {
            return Err(Error::validation(
                "hom_delay",
                format!(
                    "{:.4e} s is not a whole number of pulse periods ({:.4e} s)",
                    self.hom_delay, self.schedule.t_p
                ),
            ));
        }
        Ok(k as u64)
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.path.validate()?;
        self.detectors.validate()?;
        self.beamsplitter.validate()?;
        if self.n_pulses == 0 {
            return Err(Error::validation("n_pulses", "must be >= 1"));
        }
        if self.train_length == Some(0) {
            return Err(Error::validation("train_length", "must be >= 1"));
        }
        if self.topology == Topology::Hom {
            self.hom_delay_pulses()?;
        }
        Ok(())
    }
}

/// Photons leaving the source in one pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseEmission {
    pub pulse: u64,
    pub photons: u8,
    /// Offsets after the retrieval start, in seconds; only the first
    /// `photons` entries are meaningful.
    pub times: [f64; 2],
}

/// Emitting pulses of a run; silent pulses are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Emissions {
    pub n_pulses: u64,
    pub train_length: Option<u64>,
    /// Overlap of photons from different pulses, carried over from the source.
    pub mode_overlap: f64,
    pub records: Vec<PulseEmission>,
}

impl Emissions {
    pub fn photon_count(&self) -> u64 {
        self.records.iter().map(|r| r.photons as u64).sum()
    }

    /// Number of emitting pulses at each position within a train, position
    /// 1 first.
    pub fn per_index_successes(&self) -> Vec<u64> {
        let len = self.train_length.unwrap_or(self.n_pulses);
        let mut counts = vec![0u64; len as usize];
        for r in &self.records {
            counts[(r.pulse % len) as usize] += 1;
        }
        counts
    }

    pub fn n_trains(&self) -> u64 {
        let len = self.train_length.unwrap_or(self.n_pulses);
        self.n_pulses / len
    }

    /// Normalized correlation of the emit/no-emit indicator at lag `m`.
    pub fn indicator_autocorrelation(&self, m: u64) -> f64 {
        let pulses: std::collections::HashSet<u64> = self.records.iter().map(|r| r.pulse).collect();
        let n = self.n_pulses;
        if m >= n {
            return f64::NAN;
        }
        let mean = pulses.len() as f64 / n as f64;
        let joint = pulses
            .iter()
            .filter(|&&p| p + m < n && pulses.contains(&(p + m)))
            .count() as f64
            / (n - m) as f64;
        joint / (mean * mean)
    }
}

/// Runs the contaminant chain and emission draws for `n_pulses` pulses.
pub fn simulate_emissions(
    src: &SourceModel,
    n_pulses: u64,
    train_length: Option<u64>,
    seed: u64,
) -> Result<Emissions> {
    src.validate()?;
    if train_length == Some(0) {
        return Err(Error::validation("train_length", "must be >= 1"));
    }
    let mut rng = subsystem_rng(seed, STREAM_EMISSION);
    let survive = src.cp.survival();
    let mut present = false;
    let mut records = Vec::with_capacity((n_pulses as f64 * src.cp.p_max * 1.05) as usize);
    for pulse in 0..n_pulses {
        if train_length.is_some_and(|len| pulse % len == 0) {
            present = false;
        }
        let u: f64 = rng.random();
        present = if present { u < survive } else { u < src.cp.p_c };
        if present || rng.random::<f64>() >= src.cp.p_max {
            continue;
        }
        let first = src.envelope.sample(rng.random());
        let two = rng.random::<f64>() < src.p2;
        let second = if two {
            src.envelope.sample(rng.random())
        } else {
            0.0
        };
        records.push(PulseEmission {
            pulse,
            photons: if two { 2 } else { 1 },
            times: [first, second],
        });
    }
    Ok(Emissions {
        n_pulses,
        train_length,
        mode_overlap: src.mode_overlap,
        records,
    })
}

/// Keeps each photon independently with probability
/// `path.efficiency() × det_eff`.
pub fn apply_losses(emissions: &Emissions, path: &OpticalPath, det_eff: f64, seed: u64) -> Result<Emissions> {
    path.validate()?;
    if !(0.0..=1.0).contains(&det_eff) {
        return Err(Error::validation("efficiency", "must lie in [0, 1]"));
    }
    let keep = path.efficiency() * det_eff;
    let mut rng = subsystem_rng(seed, STREAM_LOSS);
    let mut records = Vec::with_capacity((emissions.records.len() as f64 * keep * 1.1) as usize);
    for rec in &emissions.records {
        let mut out = PulseEmission {
            photons: 0,
            times: [0.0; 2],
            ..*rec
        };
        for &t in &rec.times[..rec.photons as usize] {
            if rng.random::<f64>() < keep {
                out.times[out.photons as usize] = t;
                out.photons += 1;
            }
        }
        if out.photons > 0 {
            records.push(out);
        }
    }
    Ok(Emissions {
        records,
        ..emissions.clone()
    })
}

/// Where a detector click came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TagOrigin {
    Source,
    Dark,
}

/// Detector output with the provenance of each click, aligned with the
/// stream order.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub stream: TimeTagStream,
    pub origins: Vec<TagOrigin>,
}

/// Outcome probabilities for one photon in each input port of a splitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairOutcomes {
    /// One click on each output.
    pub split: f64,
    pub both_a: f64,
    pub both_b: f64,
    /// Exactly one photon survives and reaches A (resp. B).
    pub single_a: f64,
    pub single_b: f64,
    pub none: f64,
}

impl PairOutcomes {
    /// `p1` and `p2` are the amplitudes seen by the photons in ports 1 and
    /// 2; `overlap` is their mode overlap and `alpha` the phase sum.
    pub fn new(p1: PortAmplitudes, p2: PortAmplitudes, overlap: f64, alpha: f64) -> Self {
        let (t1, r1, t2, r2) = (p1.t, p1.r, p2.t, p2.r);
        let (l1, l2) = (p1.loss(), p2.loss());
        let cross = 2.0 * overlap * alpha.cos() * t1 * t2 * r1 * r2;
        let mut o = Self {
            split: t1 * t1 * t2 * t2 + r1 * r1 * r2 * r2 + cross,
            both_a: t1 * t1 * r2 * r2 * (1.0 + overlap),
            both_b: r1 * r1 * t2 * t2 * (1.0 + overlap),
            single_a: t1 * t1 * l2 + l1 * r2 * r2,
            single_b: r1 * r1 * l2 + l1 * t2 * t2,
            none: l1 * l2,
        };
        // The interference terms do not cancel on a lossy, unbalanced
        // splitter; the excess comes out of the both-lost outcome first.
        let total = o.split + o.both_a + o.both_b + o.single_a + o.single_b + o.none;
        let excess = total - 1.0;
        if excess > 0.0 {
            let take = excess.min(o.none);
            o.none -= take;
            let rest = total - take;
            if rest > 1.0 {
                o.scale(1.0 / rest);
            }
        } else if excess < 0.0 {
            o.none -= excess;
        }
        o.split = o.split.max(0.0);
        o
    }

    fn scale(&mut self, k: f64) {
        for v in [
            &mut self.split,
            &mut self.both_a,
            &mut self.both_b,
            &mut self.single_a,
            &mut self.single_b,
            &mut self.none,
        ] {
            *v *= k;
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [
            self.split,
            self.both_a,
            self.both_b,
            self.single_a,
            self.single_b,
            self.none,
        ]
    }
}

fn categorical(u: f64, probs: &[f64]) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Routes one photon through a single input port: Some(channel) or lost.
fn route_single(rng: &mut ChaCha8Rng, port: PortAmplitudes, transmit_to: u8, reflect_to: u8) -> Option<u8> {
    let u: f64 = rng.random();
    let t = port.transmission();
    if u < t {
        Some(transmit_to)
    } else if u < t + port.reflection() {
        Some(reflect_to)
    } else {
        None
    }
}

struct Click {
    channel: u8,
    time_s: f64,
}

/// Routes surviving photons and adds dark counts.
pub fn route_and_detect(emissions: &Emissions, cfg: &SimConfig) -> Result<Detection> {
    cfg.validate()?;
    let mut rng = subsystem_rng(cfg.seed, STREAM_ROUTING);
    let t_p = cfg.schedule.t_p;
    let offset = cfg.schedule.retrieval_start();
    let bs = &cfg.beamsplitter;
    let mut clicks: Vec<Click> = Vec::new();

    match cfg.topology {
        Topology::Hbt => {
            for rec in &emissions.records {
                let start = rec.pulse as f64 * t_p + offset;
                for &t in &rec.times[..rec.photons as usize] {
                    if let Some(channel) = route_single(&mut rng, bs.port1.h, CHANNEL_A, CHANNEL_B) {
                        clicks.push(Click {
                            channel,
                            time_s: start + t,
                        });
                    }
                }
            }
        }
        Topology::Hom => {
            let k = cfg.hom_delay_pulses()?;
            let (port1, overlap) = match cfg.hom_polarization {
                HomPolarization::Parallel => (bs.port1.h, 1.0),
                HomPolarization::Perpendicular => (bs.port1.v, 0.0),
            };
            let port2 = bs.port2.h;
            // arrival slot -> (long-arm photons, short-arm photons)
            let mut slots: BTreeMap<u64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for rec in &emissions.records {
                for &t in &rec.times[..rec.photons as usize] {
                    if rng.random::<f64>() < 0.5 {
                        slots.entry(rec.pulse + k).or_default().0.push(t);
                    } else {
                        slots.entry(rec.pulse).or_default().1.push(t);
                    }
                }
            }
            let c = overlap * emissions.mode_overlap;
            let pair = PairOutcomes::new(port1, port2, c, bs.alpha());
            let probs = pair.as_array();
            for (slot, (long, short)) in slots {
                let start = slot as f64 * t_p + offset;
                if long.len() == 1 && short.len() == 1 {
                    let (t1, t2) = (long[0], short[0]);
                    let outcome = categorical(rng.random(), &probs);
                    // which survivor of a one-photon-lost outcome
                    let first_survives = |rng: &mut ChaCha8Rng, via_1: f64, via_2: f64| {
                        rng.random::<f64>() * (via_1 + via_2) < via_1
                    };
                    let mut emit = |channel: u8, t: f64| {
                        clicks.push(Click {
                            channel,
                            time_s: start + t,
                        })
                    };
                    match outcome {
                        0 => {
                            emit(CHANNEL_A, t1);
                            emit(CHANNEL_B, t2);
                        }
                        1 => {
                            emit(CHANNEL_A, t1);
                            emit(CHANNEL_A, t2);
                        }
                        2 => {
                            emit(CHANNEL_B, t1);
                            emit(CHANNEL_B, t2);
                        }
                        3 => {
                            let a = port1.transmission() * port2.loss();
                            let b = port1.loss() * port2.reflection();
                            let t = if first_survives(&mut rng, a, b) { t1 } else { t2 };
                            emit(CHANNEL_A, t);
                        }
                        4 => {
                            let a = port1.reflection() * port2.loss();
                            let b = port1.loss() * port2.transmission();
                            let t = if first_survives(&mut rng, a, b) { t1 } else { t2 };
                            emit(CHANNEL_B, t);
                        }
                        _ => {}
                    }
                } else {
                    for &t in &long {
                        if let Some(ch) = route_single(&mut rng, port1, CHANNEL_A, CHANNEL_B) {
                            clicks.push(Click {
                                channel: ch,
                                time_s: start + t,
                            });
                        }
                    }
                    for &t in &short {
                        if let Some(ch) = route_single(&mut rng, port2, CHANNEL_B, CHANNEL_A) {
                            clicks.push(Click {
                                channel: ch,
                                time_s: start + t,
                            });
                        }
                    }
                }
            }
        }
    }

    if cfg.detectors.jitter > 0.0 {
        let mut jrng = subsystem_rng(cfg.seed, STREAM_JITTER);
        let normal = Normal::new(0.0, cfg.detectors.jitter)
            .map_err(|e| Error::validation("jitter", e.to_string()))?;
        for c in &mut clicks {
            c.time_s = (c.time_s + normal.sample(&mut jrng)).max(0.0);
        }
    }

    let mut tagged: Vec<(TimeTag, TagOrigin)> = clicks
        .into_iter()
        .map(|c| (TimeTag::new(c.channel, to_ns(c.time_s)), TagOrigin::Source))
        .collect();

    let run = run_length(cfg)?;
    let mut drng = subsystem_rng(cfg.seed, STREAM_DARKS);
    for (i, &rate) in cfg.detectors.background_rates.iter().enumerate() {
        let channel = [CHANNEL_A, CHANNEL_B][i];
        for t in dark_counts(&mut drng, rate, run)? {
            tagged.push((TimeTag::new(channel, to_ns(t)), TagOrigin::Dark));
        }
    }

    tagged.sort_by_key(|(t, o)| (t.timestamp, t.channel, *o == TagOrigin::Dark));
    let (tags, origins): (Vec<_>, Vec<_>) = tagged.into_iter().unzip();
    Ok(Detection {
        stream: TimeTagStream::from_sorted(tags)?,
        origins,
    })
}

fn to_ns(t: f64) -> u64 {
    (t * 1e9).round().max(0.0) as u64
}

/// Total span covered by the run, including the delay line.
pub fn run_length(cfg: &SimConfig) -> Result<f64> {
    let extra = match cfg.topology {
        Topology::Hbt => 0,
        Topology::Hom => cfg.hom_delay_pulses()?,
    };
    Ok((cfg.n_pulses + extra) as f64 * cfg.schedule.t_p)
}

/// Homogeneous Poisson process on [0, duration).
pub fn dark_counts(rng: &mut ChaCha8Rng, rate: f64, duration: f64) -> Result<Vec<f64>> {
    if rate == 0.0 {
        return Ok(Vec::new());
    }
    let exp = Exp::new(rate).map_err(|e| Error::validation("background_rates", e.to_string()))?;
    let mut out = Vec::with_capacity((rate * duration * 1.1) as usize + 8);
    let mut t = exp.sample(rng);
    while t < duration {
        out.push(t);
        t += exp.sample(rng);
    }
    Ok(out)
}

/// Tallies of one simulated run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimStats {
    pub pulses: u64,
    pub emitting_pulses: u64,
    pub emitted_photons: u64,
    pub surviving_photons: u64,
    pub source_clicks: u64,
    pub dark_clicks: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub emissions: Emissions,
    pub detection: Detection,
    pub stats: SimStats,
}

/// Emission, loss and detection in one call.
pub fn simulate(src: &SourceModel, cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let mut src = src.clone();
    src.cp.t_p = cfg.schedule.t_p;
    let emissions = simulate_emissions(&src, cfg.n_pulses, cfg.train_length, cfg.seed)?;
    let surviving = apply_losses(&emissions, &cfg.path, cfg.detectors.efficiency, cfg.seed)?;
    let detection = route_and_detect(&surviving, cfg)?;
    let dark = detection.origins.iter().filter(|o| **o == TagOrigin::Dark).count() as u64;
    let stats = SimStats {
        pulses: cfg.n_pulses,
        emitting_pulses: emissions.records.len() as u64,
        emitted_photons: emissions.photon_count(),
        surviving_photons: surviving.photon_count(),
        source_clicks: detection.origins.len() as u64 - dark,
        dark_clicks: dark,
    };
    Ok(SimOutput {
        emissions,
        detection,
        stats,
    })
}
