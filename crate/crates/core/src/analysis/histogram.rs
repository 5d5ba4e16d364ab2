//! Start–stop coincidence histograms.

use std::io::Write;

use crate::error::{Error, Result};

/// Counts of τ = t₂ − t₁ in uniform bins covering [−τ_max, τ_max).
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub bin_width_ns: u64,
    pub tau_max_ns: u64,
    pub counts: Vec<f64>,
    /// Pulses in the run the pairs were drawn from.
    pub pulses: u64,
}

impl CoincidenceHistogram {
    pub fn zeros(bin_width_ns: u64, tau_max_ns: u64, pulses: u64) -> Result<Self> {
        if bin_width_ns == 0 || tau_max_ns == 0 || tau_max_ns % bin_width_ns != 0 {
            return Err(Error::validation(
                "tau_max",
                "must be a positive multiple of the bin width",
            ));
        }
        Ok(Self {
            bin_width_ns,
            tau_max_ns,
            counts: vec![0.0; (2 * tau_max_ns / bin_width_ns) as usize],
            pulses,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Lower edge of bin `k` in ns.
    pub fn lower_edge(&self, k: usize) -> i64 {
        -(self.tau_max_ns as i64) + (k as u64 * self.bin_width_ns) as i64
    }

    pub fn center(&self, k: usize) -> f64 {
        self.lower_edge(k) as f64 + 0.5 * self.bin_width_ns as f64
    }

    pub fn bin_of(&self, tau_ns: i64) -> Option<usize> {
        let shifted = tau_ns + self.tau_max_ns as i64;
        if shifted < 0 || shifted >= 2 * self.tau_max_ns as i64 {
            return None;
        }
        Some((shifted as u64 / self.bin_width_ns) as usize)
    }

    /// Sum over bins whose centres fall in [lo, hi) ns.
    pub fn window_sum(&self, lo: f64, hi: f64) -> f64 {
        (0..self.len())
            .filter(|&k| {
                let c = self.center(k);
                c >= lo && c < hi
            })
            .map(|k| self.counts[k])
            .sum()
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    pub fn same_binning(&self, other: &Self) -> bool {
        self.bin_width_ns == other.bin_width_ns && self.tau_max_ns == other.tau_max_ns
    }
}

/// All pairs with |t₂ − t₁| < τ_max via a sorted two-pointer sweep.
pub fn coincidences(
    tags1: &[u64],
    tags2: &[u64],
    bin_width_ns: u64,
    tau_max_ns: u64,
    pulses: u64,
) -> Result<CoincidenceHistogram> {
    let mut h = CoincidenceHistogram::zeros(bin_width_ns, tau_max_ns, pulses)?;
    if tags1.windows(2).any(|w| w[1] < w[0]) || tags2.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::TagFormat("coincidence inputs must be sorted".into()));
    }
    let mut lo = 0;
    for &t1 in tags1 {
        let start = t1.saturating_sub(tau_max_ns);
        while lo < tags2.len() && tags2[lo] < start {
            lo += 1;
        }
        for &t2 in &tags2[lo..] {
            let tau = t2 as i64 - t1 as i64;
            if tau >= tau_max_ns as i64 {
                break;
            }
            if let Some(k) = h.bin_of(tau) {
                h.counts[k] += 1.0;
            }
        }
    }
    Ok(h)
}

/// CSV `tau_ns,counts,background,subtracted`.
pub fn write_histogram_csv<W: Write>(
    w: W,
    data: &CoincidenceHistogram,
    back: &CoincidenceHistogram,
) -> Result<()> {
    if !data.same_binning(back) {
        return Err(Error::validation("histogram", "binning mismatch"));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["tau_ns", "counts", "background", "subtracted"])?;
    for k in 0..data.len() {
        wtr.write_record([
            format!("{}", data.center(k)),
            format!("{}", data.counts[k]),
            format!("{:.6}", back.counts[k]),
            format!("{:.6}", data.counts[k] - back.counts[k]),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
