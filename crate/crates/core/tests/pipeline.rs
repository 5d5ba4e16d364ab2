//! Simulated streams through the analysis chain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rydberg_sps::analysis::{analyze_hbt, analyze_hom, coincidences, gate, AnalysisOptions, SidePeaks};
use rydberg_sps::contaminant::ContaminantParams;
use rydberg_sps::streamgen::{simulate, simulate_emissions, Envelope, HomPolarization, SimConfig, SourceModel, Topology};
use rydberg_sps::{BeamSplitterCoeffs, DetectorModel, OpticalPath, PulseSchedule, TimeTag, TimeTagStream};

fn schedule(t_p: f64, n: u64) -> PulseSchedule {
    PulseSchedule {
        t_p,
        t_r: t_p - 720e-9,
        n_pulses: n,
        ..PulseSchedule::reported()
    }
}

fn config(seed: u64, sched: PulseSchedule, bg: [f64; 2]) -> SimConfig {
    SimConfig::new(
        seed,
        sched,
        OpticalPath::new([("path", 0.5)]),
        DetectorModel {
            background_rates: bg,
            ..DetectorModel::default()
        },
        BeamSplitterCoeffs::ideal(),
    )
}

fn source(cp: ContaminantParams, p2: f64) -> SourceModel {
    SourceModel::new(cp, p2, Envelope::default_for_gate(1.4e-6).unwrap(), 1.0).unwrap()
}

fn opts(side: (u32, u32)) -> AnalysisOptions {
    AnalysisOptions {
        side_peaks: SidePeaks::symmetric(side.0, side.1).unwrap(),
        ..AnalysisOptions::default()
    }
}

#[test]
fn single_photons_never_coincide_at_zero_delay() {
    let cp = ContaminantParams {
        p_c: 0.0,
        p_max: 1.0,
        ..ContaminantParams::reported()
    };
    let sched = schedule(2.5e-6, 20_000);
    let run = simulate(&source(cp, 0.0), &config(2, sched, [0.0, 0.0])).unwrap();
    let hbt = analyze_hbt(&run.detection.stream, &sched, &opts((1, 20))).unwrap();
    assert_eq!(hbt.g2.zero_counts, 0.0);
    assert_eq!(hbt.g2.raw.value, 0.0);
    assert!(hbt.g2.side_mean > 1000.0);
    assert_eq!(hbt.g2.back.value, 0.0);
}

#[test]
fn independent_clicks_give_unit_g2() {
    let sched = schedule(2.5e-6, 200_000);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tags = Vec::new();
    for p in 0..sched.n_pulses {
        for ch in [1u8, 2] {
            if rng.random::<f64>() < 0.3 {
                let t = p * 2500 + 720 + rng.random_range(0..1400);
                tags.push(TimeTag::new(ch, t));
            }
        }
    }
    let stream = TimeTagStream::from_unsorted(tags);
    let hbt = analyze_hbt(&stream, &sched, &opts((1, 20))).unwrap();
    let g = hbt.g2.raw;
    assert!((g.value - 1.0).abs() < 4.0 * g.error, "{g:?}");
    assert_eq!(hbt.correlation.out_of_gate, 0);
}

#[test]
fn contaminants_bunch_neighbouring_pulses() {
    let cp = ContaminantParams::reported();
    let em = simulate_emissions(&source(cp, 0.0), 4_000_000, None, 5).unwrap();
    let e = (-2.5f64 / 65.0).exp();
    let lam = e - cp.p_c;
    for m in [1u64, 5, 20] {
        let want = 1.0 + cp.p_c * lam.powi(m as i32) / (1.0 - e);
        let got = em.indicator_autocorrelation(m);
        // about four standard errors at this length
        assert!((got - want).abs() < 0.02, "m={m}: {got} vs {want}");
    }
}

#[test]
fn side_peaks_carry_the_bunching() {
    let cp = ContaminantParams::reported();
    let sched = schedule(2.5e-6, 2_000_000);
    let mut cfg = config(8, sched, [0.0, 0.0]);
    cfg.path = OpticalPath::default();
    let run = simulate(&source(cp, 0.0), &cfg).unwrap();
    let near = analyze_hbt(&run.detection.stream, &sched, &opts((1, 1))).unwrap();
    let far = analyze_hbt(&run.detection.stream, &sched, &opts((200, 240))).unwrap();
    let ratio = near.g2.side_mean / far.g2.side_mean;
    let e = (-2.5f64 / 65.0).exp();
    let want = 1.0 + cp.p_c * (e - cp.p_c) / (1.0 - e);
    assert!((ratio - want).abs() < 0.03, "{ratio} vs {want}");
}

#[test]
fn histogram_counts_every_pair_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut a: Vec<u64> = (0..400).map(|_| rng.random_range(0..200_000)).collect();
    let mut b: Vec<u64> = (0..400).map(|_| rng.random_range(0..200_000)).collect();
    a.sort_unstable();
    b.sort_unstable();
    let h = coincidences(&a, &b, 20, 5000, 1).unwrap();
    let brute = a
        .iter()
        .flat_map(|x| b.iter().map(move |y| *y as i64 - *x as i64))
        .filter(|t| (-5000..5000).contains(t))
        .count();
    assert_eq!(h.total() as usize, brute);
}

#[test]
fn gating_partitions_the_stream() {
    let cp = ContaminantParams::reported();
    let sched = schedule(2.5e-6, 50_000);
    let run = simulate(&source(cp, 0.0), &config(4, sched, [2e3, 3e3])).unwrap();
    let (inside, outside) = gate(&run.detection.stream, &sched).unwrap();
    assert_eq!(inside.len() + outside.len(), run.detection.stream.len());
    assert!(outside.len() > 100);
}

#[test]
fn hom_runs_recover_the_overlap() {
    let cp = ContaminantParams {
        p_c: 0.0,
        ..ContaminantParams::reported()
    };
    let sched = schedule(2.5e-6, 400_000);
    let mut src = source(cp, 0.0);
    src.mode_overlap = 0.9;
    let mut runs = Vec::new();
    for (seed, pol) in [(1, HomPolarization::Parallel), (2, HomPolarization::Perpendicular)] {
        let mut cfg = config(seed, sched, [0.0, 0.0]);
        cfg.path = OpticalPath::default();
        cfg.topology = Topology::Hom;
        cfg.hom_delay = 2.5e-6;
        cfg.hom_polarization = pol;
        runs.push(simulate(&src, &cfg).unwrap());
    }
    let hom = analyze_hom(
        &runs[0].detection.stream,
        &runs[1].detection.stream,
        &sched,
        &AnalysisOptions::default(),
        0.0,
        &BeamSplitterCoeffs::ideal(),
    )
    .unwrap();
    assert!((hom.v_raw.value - 0.9).abs() < 4.0 * hom.v_raw.error, "{:?}", hom.v_raw);
    let c = hom.overlap.unwrap();
    assert!((c.value - 0.9).abs() < 4.0 * c.error, "{c:?}");
}
