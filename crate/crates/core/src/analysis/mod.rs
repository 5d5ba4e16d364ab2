//! Time-tag analysis: software gating, coincidence histograms, background
//! reconstruction, g²(0) and HOM visibility.

mod background;
mod correlation;
mod gating;
mod histogram;

use std::io::Write;

use serde::Serialize;

pub use background::background_profile;
pub use correlation::{
    g2_zero, hom_visibility, mode_overlap, mode_overlap_error, visibility_forward,
    visibility_from_counts, Estimate, G2Result, PeakAreas, SidePeaks,
};
pub use gating::{gate, rate_profiles, GateWindow, RateProfiles};
pub use histogram::{coincidences, write_histogram_csv, CoincidenceHistogram};

use crate::error::Result;
use crate::params::{BeamSplitterCoeffs, PulseSchedule};
use crate::timetag::TimeTagStream;

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub bin_width_ns: u64,
    /// Phase bin of the single-channel profiles, seconds.
    pub profile_bin: f64,
    pub side_peaks: SidePeaks,
    /// Histogram half-range for HOM runs, in pulse periods.
    pub hom_range_periods: u64,
    pub channels: [u8; 2],
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bin_width_ns: 20,
            profile_bin: 20e-9,
            side_peaks: SidePeaks::default(),
            hom_range_periods: 10,
            channels: [1, 2],
        }
    }
}

fn tau_range_ns(reach_ns: f64, bin: u64) -> u64 {
    ((reach_ns / bin as f64).ceil() as u64 + 1) * bin
}

/// Gated histogram, its background model and the rate profiles behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub data: CoincidenceHistogram,
    pub background: CoincidenceHistogram,
    pub profiles: RateProfiles,
    pub in_gate: usize,
    pub out_of_gate: usize,
}

impl Correlation {
    pub fn subtracted(&self) -> Vec<f64> {
        self.data
            .counts
            .iter()
            .zip(&self.background.counts)
            .map(|(d, b)| d - b)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_histogram_csv(w, &self.data, &self.background)
    }
}

/// Gate, histogram and background model for a stream on the run schedule.
pub fn correlate(
    stream: &TimeTagStream,
    sched: &PulseSchedule,
    opts: &AnalysisOptions,
    tau_max_ns: u64,
) -> Result<Correlation> {
    let (inside, outside) = gate(stream, sched)?;
    let profiles = rate_profiles(&outside, &inside, sched, opts.profile_bin, opts.channels)?;
    let data = coincidences(
        &inside.channel(opts.channels[0]),
        &inside.channel(opts.channels[1]),
        opts.bin_width_ns,
        tau_max_ns,
        sched.n_pulses,
    )?;
    let background = background_profile(&profiles, &data)?;
    Ok(Correlation {
        data,
        background,
        profiles,
        in_gate: inside.len(),
        out_of_gate: outside.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtAnalysis {
    pub correlation: Correlation,
    pub g2: G2Result,
}

pub fn analyze_hbt(stream: &TimeTagStream, sched: &PulseSchedule, opts: &AnalysisOptions) -> Result<HbtAnalysis> {
    let g = GateWindow::from_schedule(sched)?;
    let reach = opts.side_peaks.max_abs() as f64 * g.period_ns as f64 + 0.5 * g.length_ns as f64;
    let correlation = correlate(stream, sched, opts, tau_range_ns(reach, opts.bin_width_ns))?;
    let g2 = g2_zero(
        &correlation.data,
        &correlation.background,
        g.period_ns as f64,
        g.length_ns as f64,
        &opts.side_peaks,
    )?;
    Ok(HbtAnalysis { correlation, g2 })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomAnalysis {
    pub parallel: Correlation,
    pub perpendicular: Correlation,
    pub v_raw: Estimate,
    pub v_sub: Estimate,
    /// Overlap inferred from `v_sub`; `None` when outside the attainable range.
    pub overlap: Option<Estimate>,
}

/// Visibilities from parallel and perpendicular runs; `g2` feeds the
/// splitter model used to infer the overlap.
pub fn analyze_hom(
    parallel: &TimeTagStream,
    perpendicular: &TimeTagStream,
    sched: &PulseSchedule,
    opts: &AnalysisOptions,
    g2: f64,
    bs: &BeamSplitterCoeffs,
) -> Result<HomAnalysis> {
    let g = GateWindow::from_schedule(sched)?;
    let reach = opts.hom_range_periods as f64 * g.period_ns as f64 + 0.5 * g.length_ns as f64;
    let tau_max = tau_range_ns(reach, opts.bin_width_ns);
    let par = correlate(parallel, sched, opts, tau_max)?;
    let perp = correlate(perpendicular, sched, opts, tau_max)?;
    let window = g.length_ns as f64;
    let half = 0.5 * window;
    let v_raw = hom_visibility(&par.data, &perp.data, window)?;
    let zp = par.data.window_sum(-half, half);
    let zq = perp.data.window_sum(-half, half);
    let bp = par.background.window_sum(-half, half);
    let bq = perp.background.window_sum(-half, half);
    let sub = visibility_from_counts(zp - bp, zq - bq)?;
    let ratio = (zp - bp) / (zq - bq);
    let v_sub = Estimate {
        value: sub.value,
        // Poisson noise sits on the raw counts, not on the model
        error: (zp / (zq - bq).powi(2) + ratio * ratio * zq / (zq - bq).powi(2)).sqrt(),
    };
    let overlap = match mode_overlap(v_sub.value, g2, bs) {
        Ok(c) => Some(Estimate {
            value: c,
            error: mode_overlap_error(v_sub.error, g2, bs),
        }),
        Err(e) => {
            log::warn!("cannot infer mode overlap: {e}");
            None
        }
    };
    Ok(HomAnalysis {
        parallel: par,
        perpendicular: perp,
        v_raw,
        v_sub,
        overlap,
    })
}

/// Headline numbers of an analysis run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AnalysisSummary {
    pub g2_raw: Option<Estimate>,
    pub g2_back: Option<Estimate>,
    pub g2_sub: Option<Estimate>,
    pub v_raw: Option<Estimate>,
    pub v_sub: Option<Estimate>,
    pub c: Option<Estimate>,
    pub side_peaks: Option<SidePeaks>,
}

impl AnalysisSummary {
    pub fn with_g2(mut self, g2: &G2Result) -> Self {
        self.g2_raw = Some(g2.raw);
        self.g2_back = Some(g2.back);
        self.g2_sub = Some(g2.subtracted);
        self.side_peaks = Some(g2.side_peaks.clone());
        self
    }

    pub fn with_hom(mut self, hom: &HomAnalysis) -> Self {
        self.v_raw = Some(hom.v_raw);
        self.v_sub = Some(hom.v_sub);
        self.c = hom.overlap;
        self
    }

    /// CSV with value columns `g2_raw,g2_back,g2_sub,V_raw,V_sub,c`, then
    /// their errors and the side-peak set; missing entries are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let fields = [self.g2_raw, self.g2_back, self.g2_sub, self.v_raw, self.v_sub, self.c];
        let mut wtr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["g2_raw", "g2_back", "g2_sub", "V_raw", "V_sub", "c"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(header.clone().iter().map(|s| format!("{s}_err")));
        header.push("side_peaks".into());
        wtr.write_record(&header)?;
        let fmt = |e: Option<Estimate>, err: bool| {
            e.map(|e| format!("{:.10e}", if err { e.error } else { e.value }))
                .unwrap_or_default()
        };
        let mut row: Vec<String> = fields.iter().map(|e| fmt(*e, false)).collect();
        row.extend(fields.iter().map(|e| fmt(*e, true)));
        row.push(
            self.side_peaks
                .as_ref()
                .map(|s| {
                    let lags = s.lags();
                    let pos: Vec<i64> = lags.iter().copied().filter(|m| *m > 0).collect();
                    match (pos.first(), pos.last()) {
                        (Some(a), Some(b)) if pos.len() as i64 == b - a + 1 && lags.len() == 2 * pos.len() => {
                            format!("+-{a}..{b}")
                        }
                        _ => lags.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(" "),
                    }
                })
                .unwrap_or_default(),
        );
        wtr.write_record(&row)?;
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timetag::TimeTag;
    use proptest::prelude::*;

    fn sched(n: u64) -> PulseSchedule {
        PulseSchedule {
            n_pulses: n,
            ..PulseSchedule::reported()
        }
    }

    #[test]
    fn gate_edges_closed_open() {
        let s = sched(10);
        // gate opens 720 ns into each 2500 ns period and lasts 1400 ns
        let tags = TimeTagStream::from_unsorted(vec![
            TimeTag::new(1, 720),
            TimeTag::new(1, 719),
            TimeTag::new(1, 2119),
            TimeTag::new(1, 2120),
            TimeTag::new(2, 2500 + 720),
        ]);
        let (inside, outside) = gate(&tags, &s).unwrap();
        assert_eq!(inside.channel(1), vec![720, 2119]);
        assert_eq!(inside.channel(2), vec![3220]);
        assert_eq!(outside.channel(1), vec![719, 2120]);
    }

    #[test]
    fn gate_partition_matches_construction() {
        let s = sched(1000);
        let g = GateWindow::from_schedule(&s).unwrap();
        let mut tags = Vec::new();
        let mut expect_in = 0;
        for p in 0..1000u64 {
            let off = (p * 7919) % g.period_ns;
            tags.push(TimeTag::new(1 + (p % 2) as u8, p * g.period_ns + off));
            let phase = (off + g.period_ns - g.start_ns) % g.period_ns;
            if phase < g.length_ns {
                expect_in += 1;
            }
        }
        let (inside, outside) = gate(&TimeTagStream::from_unsorted(tags), &s).unwrap();
        assert_eq!(inside.len(), expect_in);
        assert_eq!(outside.len(), 1000 - expect_in);
    }

    #[test]
    fn single_pair_histogram() {
        let h = coincidences(&[0], &[10], 20, 200, 1).unwrap();
        let k = h.bin_of(10).unwrap();
        assert_eq!(h.counts[k], 1.0);
        assert_eq!(h.total(), 1.0);
        assert_eq!(h.lower_edge(k), 0);
    }

    proptest! {
        #[test]
        fn swapping_inputs_mirrors(a in prop::collection::vec(0u64..100_000, 0..60),
                                   b in prop::collection::vec(0u64..100_000, 0..60)) {
            let mut a = a; a.sort_unstable();
            let mut b = b; b.sort_unstable();
            let fwd = coincidences(&a, &b, 20, 2000, 1).unwrap();
            let rev = coincidences(&b, &a, 20, 2000, 1).unwrap();
            // bins are closed-open, so mirror exactly on values off the edges
            let mut brute = vec![0.0; fwd.len()];
            for &x in &a { for &y in &b {
                if let Some(k) = fwd.bin_of(y as i64 - x as i64) { brute[k] += 1.0; }
            }}
            prop_assert_eq!(&fwd.counts, &brute);
            prop_assert_eq!(fwd.total(), rev.total() + edge_difference(&a, &b));
        }
    }

    // pairs at exactly −τ_max are counted one way but not the other
    fn edge_difference(a: &[u64], b: &[u64]) -> f64 {
        let mut d = 0.0;
        for &x in a {
            for &y in b {
                let tau = y as i64 - x as i64;
                if tau == -2000 {
                    d += 1.0;
                }
                if tau == 2000 {
                    d -= 1.0;
                }
            }
        }
        d
    }

    fn flat_profiles(b: [f64; 2], n_pulses: u64) -> RateProfiles {
        let s = sched(n_pulses);
        RateProfiles {
            bin_width: 20e-9,
            gate: s.gate_window,
            t_p: s.t_p,
            n_pulses,
            profiles: [vec![0.0; 70], vec![0.0; 70]],
            background: b,
            background_err: [0.0; 2],
        }
    }

    #[test]
    fn no_background_no_pedestal() {
        let like = CoincidenceHistogram::zeros(20, 10_000, 100).unwrap();
        let h = background_profile(&flat_profiles([0.0, 0.0], 100), &like).unwrap();
        assert!(h.counts.iter().all(|c| *c == 0.0));
    }

    /// ∫_{−∞}^{z} max(g − |s|, 0) ds
    fn tent_integral(z: f64, g: f64) -> f64 {
        let z = z.clamp(-g, g);
        if z <= 0.0 {
            0.5 * (g + z).powi(2)
        } else {
            g * g - 0.5 * (g - z).powi(2)
        }
    }

    #[test]
    fn constant_background_gives_triangles() {
        let like = CoincidenceHistogram::zeros(20, 10_000, 1_000_000).unwrap();
        let p = flat_profiles([80.0, 100.0], 1_000_000);
        let h = background_profile(&p, &like).unwrap();
        let g = 1.4e-6;
        for k in 0..h.len() {
            let lo = h.lower_edge(k) as f64 * 1e-9;
            let c = lo + 10e-9;
            // neighbouring triangles overlap when the gate exceeds half a period
            let tri: f64 = (-6..=6)
                .map(|m| {
                    let s = lo - m as f64 * 2.5e-6;
                    tent_integral(s + 20e-9, g) - tent_integral(s, g)
                })
                .sum();
            let pairs = 1e6 - c.abs() / 2.5e-6;
            let want = 80.0 * 100.0 * tri * pairs;
            assert!((h.counts[k] - want).abs() < 1e-9 * want.max(1e-12), "bin {k}: {} vs {want}", h.counts[k]);
        }
    }

    #[test]
    fn forward_reduces_to_symmetric_formula() {
        let bs = BeamSplitterCoeffs::ideal();
        assert!((visibility_forward(0.7, 0.0, &bs).unwrap() - 0.7).abs() < 1e-15);
        assert_eq!(visibility_forward(0.0, 0.0, &bs).unwrap(), 0.0);
        assert_eq!(mode_overlap(1.0, 0.0, &bs).unwrap(), 1.0);
    }

    #[test]
    fn reported_splitter_visibility() {
        let bs = BeamSplitterCoeffs::reported();
        let v = visibility_forward(0.982, 0.0, &bs).unwrap();
        assert!((v - 0.966).abs() < 0.002, "{v}");
        let c = mode_overlap(0.966, 2e-4, &bs).unwrap();
        assert!((c - 0.982).abs() < 0.002, "{c}");
        assert!(mode_overlap(1.2, 0.0, &bs).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn symmetric_ports_match_closed_form(t in 0.05..0.95f64, loss in 0.0..0.5f64,
                                              c in 0.0..=1.0f64, g2 in 0.0..0.5f64) {
            let tt = t * (1.0 - loss);
            let rr = (1.0 - t) * (1.0 - loss);
            let bs = BeamSplitterCoeffs::symmetric(tt, rr);
            let v = visibility_forward(c, g2, &bs).unwrap();
            let want = 2.0 * c / (tt / rr + rr / tt + 2.0 * g2);
            prop_assert!((v - want).abs() < 1e-14, "{} vs {}", v, want);
        }

        #[test]
        fn overlap_round_trip(c in 0.0..=1.0f64, g2 in 0.0..0.3f64,
                              t1 in 0.3..0.6f64, r1 in 0.3..0.4f64, t1v in 0.3..0.6f64,
                              r1v in 0.3..0.4f64, t2 in 0.3..0.6f64, r2 in 0.3..0.4f64) {
            let mut bs = BeamSplitterCoeffs::reported();
            bs.port1.h = crate::params::PortAmplitudes::from_intensities(t1, r1);
            bs.port1.v = crate::params::PortAmplitudes::from_intensities(t1v, r1v);
            bs.port2.h = crate::params::PortAmplitudes::from_intensities(t2, r2);
            let v = visibility_forward(c, g2, &bs).unwrap();
            let back = mode_overlap(v, g2, &bs).unwrap();
            prop_assert!((visibility_forward(back, g2, &bs).unwrap() - v).abs() < 1e-12);
            prop_assert!((back - c).abs() < 1e-9);
        }
    }

    #[test]
    fn side_peak_validation() {
        assert!(SidePeaks::new(vec![]).is_err());
        assert!(SidePeaks::new(vec![0, 1]).is_err());
        let d = SidePeaks::default();
        assert_eq!(d.lags().len(), 82);
        assert_eq!(d.max_abs(), 50);
    }

    #[test]
    fn visibility_limits() {
        let h = coincidences(&[0, 5000], &[10, 5010], 20, 200, 1).unwrap();
        assert_eq!(hom_visibility(&h, &h, 100.0).unwrap().value, 0.0);
        let empty = CoincidenceHistogram::zeros(20, 200, 1).unwrap();
        assert_eq!(hom_visibility(&empty, &h, 100.0).unwrap().value, 1.0);
        assert!(hom_visibility(&h, &empty, 100.0).is_err());
    }

    #[test]
    fn summary_csv_columns() {
        let mut buf = Vec::new();
        AnalysisSummary::default().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("g2_raw,g2_back,g2_sub,V_raw,V_sub,c,"));
    }
}
