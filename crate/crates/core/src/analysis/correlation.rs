//! Integrated g²(0), HOM visibility and the lossy-splitter visibility model.

use serde::Serialize;

use super::histogram::CoincidenceHistogram;
use crate::error::{Error, Result};
use crate::params::BeamSplitterCoeffs;

/// A value with its Poisson standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

/// Pulse lags used to normalize the zero-delay peak.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SidePeaks(Vec<i64>);

impl SidePeaks {
    pub fn new(lags: Vec<i64>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::validation("side_peaks", "need at least one side peak"));
        }
        if lags.contains(&0) {
            return Err(Error::validation("side_peaks", "the zero-delay peak cannot be a side peak"));
        }
        Ok(Self(lags))
    }

    /// Both signs of every lag with min ≤ |m| ≤ max.
    pub fn symmetric(min: u32, max: u32) -> Result<Self> {
        let mut lags = Vec::new();
        for m in min.max(1)..=max {
            lags.push(-(m as i64));
            lags.push(m as i64);
        }
        lags.sort_unstable();
        Self::new(lags)
    }

    pub fn lags(&self) -> &[i64] {
        &self.0
    }

    pub fn max_abs(&self) -> u64 {
        self.0.iter().map(|m| m.unsigned_abs()).max().unwrap_or(0)
    }
}

impl Default for SidePeaks {
    fn default() -> Self {
        Self::symmetric(10, 50).expect("static side-peak set")
    }
}

/// Peak integrals at lag m·t_p, each over one gate width centred on the lag.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakAreas {
    pub zero: f64,
    pub sides: Vec<f64>,
}

impl PeakAreas {
    pub fn measure(h: &CoincidenceHistogram, t_p_ns: f64, window_ns: f64, side: &SidePeaks) -> Result<Self> {
        let reach = side.max_abs() as f64 * t_p_ns + 0.5 * window_ns;
        if reach > h.tau_max_ns as f64 {
            return Err(Error::validation(
                "tau_max",
                format!("histogram range {} ns does not cover side peaks up to {reach} ns", h.tau_max_ns),
            ));
        }
        let area = |m: i64| {
            let c = m as f64 * t_p_ns;
            h.window_sum(c - 0.5 * window_ns, c + 0.5 * window_ns)
        };
        Ok(Self {
            zero: area(0),
            sides: side.lags().iter().map(|&m| area(m)).collect(),
        })
    }

    pub fn side_mean(&self) -> f64 {
        self.sides.iter().sum::<f64>() / self.sides.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct G2Result {
    pub raw: Estimate,
    pub back: Estimate,
    pub subtracted: Estimate,
    pub side_peaks: SidePeaks,
    pub zero_counts: f64,
    pub zero_background: f64,
    pub side_mean: f64,
}

/// Zero-delay peak over the mean side peak, raw, for the background model
/// and after subtraction.
pub fn g2_zero(
    data: &CoincidenceHistogram,
    back: &CoincidenceHistogram,
    t_p_ns: f64,
    window_ns: f64,
    side: &SidePeaks,
) -> Result<G2Result> {
    if !data.same_binning(back) {
        return Err(Error::validation("histogram", "data and background binning differ"));
    }
    let d = PeakAreas::measure(data, t_p_ns, window_ns, side)?;
    let b = PeakAreas::measure(back, t_p_ns, window_ns, side)?;
    let k = side.lags().len() as f64;
    let s = d.side_mean();
    if s <= 0.0 {
        return Err(Error::ZeroCounts("side peaks are empty".into()));
    }
    let z = d.zero;
    let raw = z / s;
    // var(mean side) = mean side / K for Poisson peaks
    let raw_err = (z / (s * s) + raw * raw / (k * s)).sqrt();
    let back_g2 = b.zero / s;
    let back_err = back_g2 / (k * s).sqrt();
    let s_sub = s - b.side_mean();
    if s_sub <= 0.0 {
        return Err(Error::ZeroCounts(
            "side peaks vanish after background subtraction".into(),
        ));
    }
    let sub = (z - b.zero) / s_sub;
    let sub_err = (z / (s_sub * s_sub) + sub * sub * s / (k * s_sub * s_sub)).sqrt();
    Ok(G2Result {
        raw: Estimate {
            value: raw,
            error: raw_err,
        },
        back: Estimate {
            value: back_g2,
            error: back_err,
        },
        subtracted: Estimate {
            value: sub,
            error: sub_err,
        },
        side_peaks: side.clone(),
        zero_counts: z,
        zero_background: b.zero,
        side_mean: s,
    })
}

/// 1 − Z∥/Z⊥ from two zero-delay peak integrals.
pub fn visibility_from_counts(parallel: f64, perpendicular: f64) -> Result<Estimate> {
    if perpendicular <= 0.0 {
        return Err(Error::ZeroCounts("no perpendicular coincidences".into()));
    }
    let ratio = parallel / perpendicular;
    let err = (parallel.max(0.0) / (perpendicular * perpendicular)
        + parallel * parallel / perpendicular.powi(3))
    .sqrt();
    Ok(Estimate {
        value: 1.0 - ratio,
        error: err,
    })
}

/// Raw HOM visibility from the parallel and perpendicular histograms.
pub fn hom_visibility(par: &CoincidenceHistogram, perp: &CoincidenceHistogram, window_ns: f64) -> Result<Estimate> {
    if !par.same_binning(perp) {
        return Err(Error::validation("histogram", "parallel and perpendicular binning differ"));
    }
    let half = 0.5 * window_ns;
    visibility_from_counts(par.window_sum(-half, half), perp.window_sum(-half, half))
}

// V = (A − 2c·cosα·K)/D, with A and D independent of c.
struct VisibilityTerms {
    a: f64,
    k: f64,
    d: f64,
}

fn visibility_terms(g2: f64, bs: &BeamSplitterCoeffs) -> VisibilityTerms {
    let (h1, v1, h2) = (bs.port1.h, bs.port1.v, bs.port2.h);
    let sq = |x: f64| x * x;
    let perp = sq(v1.t) * sq(h2.t) + sq(v1.r) * sq(h2.r);
    let a = perp - sq(h1.t) * sq(h2.t) - sq(h1.r) * sq(h2.r)
        + (sq(v1.t) * sq(v1.r) - sq(h1.t) * sq(h1.r)) * g2;
    let d = perp + (sq(v1.t) * sq(v1.r) + sq(h2.t) * sq(h2.r)) * g2;
    VisibilityTerms {
        a,
        k: bs.alpha().cos() * h1.t * h1.r * h2.t * h2.r,
        d,
    }
}

/// HOM visibility for overlap `c` on a lossy splitter whose port 1 has
/// separate H and V coefficients. Port 2 always sees H.
pub fn visibility_forward(c: f64, g2: f64, bs: &BeamSplitterCoeffs) -> Result<f64> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::OutOfRange {
            value: c,
            min: 0.0,
            max: 1.0,
        });
    }
    if !(g2 >= 0.0) {
        return Err(Error::validation("g2", "must be non-negative"));
    }
    let t = visibility_terms(g2, bs);
    if t.d.abs() < 1e-300 {
        return Err(Error::Degenerate("splitter gives no perpendicular coincidences".into()));
    }
    Ok((t.a - 2.0 * c * t.k) / t.d)
}

/// Closed-form inverse of [`visibility_forward`].
pub fn mode_overlap(v: f64, g2: f64, bs: &BeamSplitterCoeffs) -> Result<f64> {
    if !(g2 >= 0.0) {
        return Err(Error::validation("g2", "must be non-negative"));
    }
    let t = visibility_terms(g2, bs);
    if t.d.abs() < 1e-300 || t.k.abs() < 1e-300 {
        return Err(Error::Degenerate("visibility does not depend on the overlap".into()));
    }
    let c = (t.a - v * t.d) / (2.0 * t.k);
    const SLACK: f64 = 1e-12;
    if !(-SLACK..=1.0 + SLACK).contains(&c) {
        let ends = [t.a / t.d, (t.a - 2.0 * t.k) / t.d];
        return Err(Error::OutOfRange {
            value: v,
            min: ends[0].min(ends[1]),
            max: ends[0].max(ends[1]),
        });
    }
    Ok(c.clamp(0.0, 1.0))
}

/// Propagates a visibility error through [`mode_overlap`].
pub fn mode_overlap_error(v_err: f64, g2: f64, bs: &BeamSplitterCoeffs) -> f64 {
    let t = visibility_terms(g2, bs);
    v_err * (t.d / (2.0 * t.k)).abs()
}
