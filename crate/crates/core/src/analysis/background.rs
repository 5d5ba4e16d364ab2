//! Expected accidental coincidences involving at least one background click.
//!
//! For a pair of pulses m periods apart, clicks at gate phases t₁ (channel 1)
//! and t₂ (channel 2) give τ = t₂ − t₁ + m·t_p. The background part of the
//! rate product r₁(t₁)r₂(t₂) is P₁B₂ + B₁P₂ + B₁B₂ on the gate support, and
//! each term is integrated exactly over the phase bins and the τ bin.

use super::gating::RateProfiles;
use super::histogram::CoincidenceHistogram;
use crate::error::Result;

/// ∫_{−∞}^{z} clamp(s, 0, len) ds
fn ramp_integral(z: f64, len: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z <= len {
        0.5 * z * z
    } else {
        0.5 * len * len + len * (z - len)
    }
}

/// Area of {(x, y) ∈ [x0, x1) × [y0, y1) : x + y ∈ [c0, c1)}.
pub(crate) fn sum_in_window(x: (f64, f64), y: (f64, f64), c: (f64, f64)) -> f64 {
    let len = y.1 - y.0;
    if len <= 0.0 || x.1 <= x.0 || c.1 <= c.0 {
        return 0.0;
    }
    let below = |z: f64| ramp_integral(z - y.0 - x.0, len) - ramp_integral(z - y.0 - x.1, len);
    below(c.1) - below(c.0)
}

/// C_back on the binning of `like`.
pub fn background_profile(profiles: &RateProfiles, like: &CoincidenceHistogram) -> Result<CoincidenceHistogram> {
    let mut out = CoincidenceHistogram::zeros(like.bin_width_ns, like.tau_max_ns, profiles.n_pulses)?;
    let [b1, b2] = profiles.background;
    if b1 == 0.0 && b2 == 0.0 {
        return Ok(out);
    }
    let g = profiles.gate;
    let t_p = profiles.t_p;
    let n = profiles.n_pulses as f64;
    let phase_bins: Vec<(f64, f64)> = (0..profiles.n_bins()).map(|j| profiles.bin_edges(j)).collect();
    let [p1, p2] = &profiles.profiles;

    for k in 0..out.len() {
        let lo = out.lower_edge(k) as f64 * 1e-9;
        let hi = lo + out.bin_width_ns as f64 * 1e-9;
        let m_lo = ((lo - g) / t_p).floor() as i64;
        let m_hi = ((hi + g) / t_p).ceil() as i64;
        let mut sum = 0.0;
        for m in m_lo..=m_hi {
            let shift = m as f64 * t_p;
            let tau = (lo - shift, hi - shift);
            if tau.1 <= -g || tau.0 >= g {
                continue;
            }
            let gate_box = (0.0, g);
            sum += b1 * b2 * sum_in_window(gate_box, tau, gate_box);
            for (j, &edges) in phase_bins.iter().enumerate() {
                if b2 != 0.0 {
                    sum += p1[j] * b2 * sum_in_window(edges, tau, gate_box);
                }
                if b1 != 0.0 {
                    sum += b1 * p2[j] * sum_in_window(gate_box, tau, edges);
                }
            }
        }
        let center = 0.5 * (lo + hi);
        let pairs = (n - center.abs() / t_p).max(0.0);
        out.counts[k] = sum * pairs;
    }
    Ok(out)
}
