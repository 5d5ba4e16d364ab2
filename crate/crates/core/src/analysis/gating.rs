//! Software gate and single-channel rate estimates.

use crate::error::{Error, Result};
use crate::params::PulseSchedule;
use crate::timetag::{TimeTag, TimeTagStream};

/// Gate geometry in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateWindow {
    pub period_ns: u64,
    pub start_ns: u64,
    pub length_ns: u64,
}

impl GateWindow {
    pub fn from_schedule(sched: &PulseSchedule) -> Result<Self> {
        let g = Self {
            period_ns: sched.period_ns(),
            start_ns: sched.gate_start_ns() % sched.period_ns().max(1),
            length_ns: sched.gate_ns(),
        };
        if g.period_ns == 0 {
            return Err(Error::validation("t_p", "rounds to zero nanoseconds"));
        }
        if g.length_ns == 0 || g.length_ns > g.period_ns {
            return Err(Error::validation(
                "gate_window",
                "must be between 1 ns and the pulse period",
            ));
        }
        Ok(g)
    }

    /// Offset of `t` after the most recent gate opening.
    pub fn phase(&self, t: u64) -> u64 {
        (t + self.period_ns - self.start_ns) % self.period_ns
    }

    /// Closed-open: a tag exactly at the opening edge is inside, one exactly
    /// at the closing edge is not.
    pub fn contains(&self, t: u64) -> bool {
        self.phase(t) < self.length_ns
    }
}

/// Splits a stream into (in-gate, out-of-gate), preserving order.
pub fn gate(stream: &TimeTagStream, sched: &PulseSchedule) -> Result<(TimeTagStream, TimeTagStream)> {
    let g = GateWindow::from_schedule(sched)?;
    let (inside, outside): (Vec<TimeTag>, Vec<TimeTag>) =
        stream.tags().iter().partition(|t| g.contains(t.timestamp));
    Ok((
        TimeTagStream::from_sorted(inside)?,
        TimeTagStream::from_sorted(outside)?,
    ))
}

/// Per-channel in-gate signal profile and constant background rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RateProfiles {
    /// Phase bin width in seconds.
    pub bin_width: f64,
    /// Gate length in seconds.
    pub gate: f64,
    pub t_p: f64,
    pub n_pulses: u64,
    /// Source rate P_i(t) in events/s for each phase bin of the gate, with
    /// the background removed. Bins are `bin_width` wide except possibly
    /// the last, which ends at the gate edge. Noise can make single bins
    /// slightly negative; they are left unclipped so the estimate stays
    /// unbiased.
    pub profiles: [Vec<f64>; 2],
    /// Background rate B_i in events/s.
    pub background: [f64; 2],
    /// Poisson standard error of B_i.
    pub background_err: [f64; 2],
}

impl RateProfiles {
    /// Edges of phase bin `j` in seconds after the gate opening.
    pub fn bin_edges(&self, j: usize) -> (f64, f64) {
        let a = j as f64 * self.bin_width;
        (a, (a + self.bin_width).min(self.gate))
    }

    pub fn n_bins(&self) -> usize {
        self.profiles[0].len()
    }

    /// Mean source photons per pulse in the gate for channel `ch` (0 or 1).
    pub fn source_per_pulse(&self, ch: usize) -> f64 {
        (0..self.n_bins())
            .map(|j| {
                let (a, b) = self.bin_edges(j);
                self.profiles[ch][j] * (b - a)
            })
            .sum()
    }
}

/// B_i from out-of-gate tags and P_i(t) from in-gate tags folded over the
/// period; the run is `sched.n_pulses` periods long.
pub fn rate_profiles(
    out_tags: &TimeTagStream,
    in_tags: &TimeTagStream,
    sched: &PulseSchedule,
    bin_width: f64,
    channels: [u8; 2],
) -> Result<RateProfiles> {
    if out_tags.is_empty() && in_tags.is_empty() {
        return Err(Error::ZeroCounts("no tags to estimate rates from".into()));
    }
    if !(bin_width > 0.0) {
        return Err(Error::validation("bin_width", "must be positive"));
    }
    let g = GateWindow::from_schedule(sched)?;
    if g.length_ns >= g.period_ns {
        return Err(Error::validation(
            "gate_window",
            "gate covers the whole period; no out-of-gate time for the background",
        ));
    }
    let n = sched.n_pulses;
    let gate = g.length_ns as f64 * 1e-9;
    let t_p = g.period_ns as f64 * 1e-9;
    let off_time = n as f64 * (t_p - gate);
    let bin_ns = (bin_width * 1e9).round().max(1.0) as u64;
    let n_bins = g.length_ns.div_ceil(bin_ns) as usize;

    let mut background = [0.0; 2];
    let mut background_err = [0.0; 2];
    let mut profiles = [vec![0.0; n_bins], vec![0.0; n_bins]];
    for (i, &ch) in channels.iter().enumerate() {
        let k = out_tags.tags().iter().filter(|t| t.channel == ch).count() as f64;
        background[i] = k / off_time;
        background_err[i] = k.sqrt() / off_time;
        let mut hist = vec![0u64; n_bins];
        for t in in_tags.tags().iter().filter(|t| t.channel == ch) {
            hist[(g.phase(t.timestamp) / bin_ns) as usize] += 1;
        }
        for (j, &c) in hist.iter().enumerate() {
            let width = (((j as u64 + 1) * bin_ns).min(g.length_ns) - j as u64 * bin_ns) as f64 * 1e-9;
            profiles[i][j] = c as f64 / (n as f64 * width) - background[i];
        }
    }
    Ok(RateProfiles {
        bin_width: bin_ns as f64 * 1e-9,
        gate,
        t_p,
        n_pulses: n,
        profiles,
        background,
        background_err,
    })
}
