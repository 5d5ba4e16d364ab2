use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rydberg_sps::analysis::{self, AnalysisOptions, AnalysisSummary, Correlation, RateProfiles, SidePeaks};
use rydberg_sps::contaminant::{fit_pulse_train, photon_prob, FitOptions, PulseTrainData, Weighting};
use rydberg_sps::metrics::{benchmark_table, published_benchmarks, read_measurements};
use rydberg_sps::retrieval::theory;
use rydberg_sps::streamgen::{simulate, HomPolarization, SimConfig, SimOutput, SourceModel, Topology};
use rydberg_sps::{Config, PulseSchedule, TimeTagStream};
use serde_json::json;

use crate::{
    AnalyzeArgs, Command, FitArgs, FormatArg, MetricsArgs, Outcome, PolarizationArg, SimulateArgs, TopologyArg,
};

pub fn dispatch(command: &Command, config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    match command {
        Command::Theory => cmd_theory(config, out),
        Command::Simulate(a) => cmd_simulate(a, config, out),
        Command::Analyze(a) => cmd_analyze(a, config, out),
        Command::Fit(a) => cmd_fit(a, config, out),
        Command::Metrics(a) => cmd_metrics(a, out),
        Command::Reproduce(a) => crate::reproduce::cmd_reproduce(a, config, out),
        Command::Replay(_) => bail!("a manifest cannot replay another replay"),
    }
}

pub fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

fn cmd_theory(config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    let r = theory(&config.physics, &config.schedule)?;
    let path = out.join("theory.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["eta_w", "eta_s", "eta_r", "p_th"])?;
    w.write_record([r.eta_w, r.eta_s, r.eta_r, r.p_th].map(|x| format!("{x:.10e}")))?;
    w.flush()?;
    let report = format!(
        "write      {:.4}\nstorage    {:.4}\nretrieval  {:.4}\nP_th       {:.4}\n",
        r.eta_w, r.eta_s, r.eta_r, r.p_th
    );
    Ok(Outcome {
        summary: json!({"eta_w": r.eta_w, "eta_s": r.eta_s, "eta_r": r.eta_r, "p_th": r.p_th}),
        outputs: vec![path],
        seeds: vec![],
        report,
    })
}

pub fn source_model(config: &Config, schedule: &PulseSchedule) -> anyhow::Result<SourceModel> {
    let settings = config.source.unwrap_or_default();
    Ok(SourceModel::from_settings(&settings, schedule)?)
}

pub fn sim_config(config: &Config, seed: u64, schedule: PulseSchedule) -> SimConfig {
    let mut cfg = SimConfig::new(
        seed,
        schedule,
        config.optics.clone(),
        config.detectors,
        config.beamsplitter,
    );
    cfg.hom_delay = schedule.t_p;
    cfg
}

fn stats_json(run: &SimOutput) -> serde_json::Value {
    let s = run.stats;
    json!({
        "pulses": s.pulses,
        "emitting_pulses": s.emitting_pulses,
        "emitted_photons": s.emitted_photons,
        "surviving_photons": s.surviving_photons,
        "source_clicks": s.source_clicks,
        "dark_clicks": s.dark_clicks,
        "tags": run.detection.stream.len(),
    })
}

fn cmd_simulate(a: &SimulateArgs, config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    let mut schedule = config.schedule;
    if let Some(n) = a.pulses {
        schedule.n_pulses = n;
    }
    let src = source_model(config, &schedule)?;
    let mut cfg = sim_config(config, a.seed, schedule);
    cfg.topology = match a.topology {
        TopologyArg::Hbt => Topology::Hbt,
        TopologyArg::Hom => Topology::Hom,
    };
    cfg.hom_polarization = match a.polarization {
        PolarizationArg::Parallel => HomPolarization::Parallel,
        PolarizationArg::Perpendicular => HomPolarization::Perpendicular,
    };
    cfg.train_length = a.train_length;
    if let Some(d) = a.hom_delay {
        cfg.hom_delay = d;
    }
    let run = simulate(&src, &cfg)?;
    let path = match a.format {
        FormatArg::Csv => {
            let p = out.join("tags.csv");
            run.detection.stream.write_csv_path(&p)?;
            p
        }
        FormatArg::Binary => {
            let p = out.join("tags.ttag");
            run.detection.stream.write_binary_path(&p)?;
            p
        }
    };
    let summary = stats_json(&run);
    let report = format!(
        "{} pulses, {} emitting, {} source clicks, {} dark clicks\n",
        run.stats.pulses, run.stats.emitting_pulses, run.stats.source_clicks, run.stats.dark_clicks
    );
    Ok(Outcome {
        summary,
        outputs: vec![path],
        seeds: vec![a.seed],
        report,
    })
}

pub fn write_profiles(path: &Path, p: &RateProfiles) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["phase_s", "rate_1", "rate_2", "background_1", "background_2"])?;
    for j in 0..p.n_bins() {
        let (lo, hi) = p.bin_edges(j);
        w.write_record([
            format!("{:.6e}", 0.5 * (lo + hi)),
            format!("{:.6e}", p.profiles[0][j]),
            format!("{:.6e}", p.profiles[1][j]),
            format!("{:.6e}", p.background[0]),
            format!("{:.6e}", p.background[1]),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Histogram with an extra column normalised to the mean side peak.
pub fn write_normalised(path: &Path, c: &Correlation, norm: f64) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["tau_ns", "counts", "background", "subtracted", "normalised", "normalised_background"])?;
    let sub = c.subtracted();
    for k in 0..c.data.len() {
        let (d, b) = (c.data.counts[k], c.background.counts[k]);
        w.write_record([
            format!("{}", c.data.center(k)),
            format!("{d}"),
            format!("{b:.6e}"),
            format!("{:.6e}", sub[k]),
            format!("{:.6e}", d / norm),
            format!("{:.6e}", b / norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn summary_json(s: &AnalysisSummary) -> serde_json::Value {
    serde_json::to_value(s).expect("summary serializes")
}

fn cmd_analyze(a: &AnalyzeArgs, config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    let mut schedule = config.schedule;
    if let Some(n) = a.pulses {
        schedule.n_pulses = n;
    }
    let opts = AnalysisOptions {
        bin_width_ns: a.bin_ns,
        side_peaks: SidePeaks::symmetric(a.side_min, a.side_max)?,
        ..AnalysisOptions::default()
    };
    let tags = TimeTagStream::read_path(&a.tags).with_context(|| format!("reading {}", a.tags.display()))?;
    let mut outputs = Vec::new();
    let mut report = String::new();
    let summary = match &a.perp {
        None => {
            let hbt = analysis::analyze_hbt(&tags, &schedule, &opts)?;
            let hist = out.join("histogram.csv");
            hbt.correlation.write_csv(create(&hist)?)?;
            let prof = out.join("profiles.csv");
            write_profiles(&prof, &hbt.correlation.profiles)?;
            outputs.extend([hist, prof]);
            let g = &hbt.g2;
            writeln!(
                report,
                "g2_raw  {:.5} ± {:.5}\ng2_back {:.5}\ng2_sub  {:.5} ± {:.5}",
                g.raw.value, g.raw.error, g.back.value, g.subtracted.value, g.subtracted.error
            )?;
            AnalysisSummary::default().with_g2(g)
        }
        Some(perp) => {
            let perp = TimeTagStream::read_path(perp).with_context(|| format!("reading {}", perp.display()))?;
            let hom = analysis::analyze_hom(&tags, &perp, &schedule, &opts, a.g2, &config.beamsplitter)?;
            let par_path = out.join("hom_parallel.csv");
            let perp_path = out.join("hom_perpendicular.csv");
            hom.parallel.write_csv(create(&par_path)?)?;
            hom.perpendicular.write_csv(create(&perp_path)?)?;
            outputs.extend([par_path, perp_path]);
            writeln!(
                report,
                "V_raw {:.4} ± {:.4}\nV_sub {:.4} ± {:.4}",
                hom.v_raw.value, hom.v_raw.error, hom.v_sub.value, hom.v_sub.error
            )?;
            if let Some(c) = hom.overlap {
                writeln!(report, "c     {:.4} ± {:.4}", c.value, c.error)?;
            }
            AnalysisSummary::default().with_hom(&hom)
        }
    };
    let sp = out.join("summary.csv");
    summary.write_csv(create(&sp)?)?;
    outputs.push(sp);
    Ok(Outcome {
        summary: summary_json(&summary),
        outputs,
        seeds: vec![],
        report,
    })
}

pub fn write_fit(
    dir: &Path,
    prefix: &str,
    data: &PulseTrainData,
    fit: &rydberg_sps::contaminant::ContaminantFit,
) -> anyhow::Result<Vec<PathBuf>> {
    let se = fit.std_errors();
    let p = &fit.params;
    let params = dir.join(format!("{prefix}fit.csv"));
    let mut w = csv_writer(&params)?;
    w.write_record(["parameter", "value", "stderr"])?;
    for (name, v, e) in [("p_c", p.p_c, se[0]), ("tau_c", p.tau_c, se[1]), ("p_max", p.p_max, se[2])] {
        w.write_record([name.to_string(), format!("{v:.6e}"), format!("{e:.6e}")])?;
    }
    w.flush()?;
    let curve = dir.join(format!("{prefix}fit_curve.csv"));
    let mut w = csv_writer(&curve)?;
    w.write_record(["pulse_index", "success_rate", "stderr", "model"])?;
    for pt in &data.points {
        w.write_record([
            pt.pulse_index.to_string(),
            format!("{:.6e}", pt.success_rate),
            format!("{:.6e}", pt.stderr),
            format!("{:.6e}", photon_prob(pt.pulse_index, p)),
        ])?;
    }
    w.flush()?;
    Ok(vec![params, curve])
}

pub fn fit_json(fit: &rydberg_sps::contaminant::ContaminantFit) -> serde_json::Value {
    let se = fit.std_errors();
    json!({
        "p_c": fit.params.p_c, "p_c_err": se[0],
        "tau_c": fit.params.tau_c, "tau_c_err": se[1],
        "p_max": fit.params.p_max, "p_max_err": se[2],
        "chi2": fit.chi2, "degenerate": fit.degenerate,
    })
}

fn cmd_fit(a: &FitArgs, config: &Config, out: &Path) -> anyhow::Result<Outcome> {
    let data = PulseTrainData::read_path(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let mut opts = FitOptions::new(a.t_p.unwrap_or(config.schedule.t_p));
    if a.unweighted {
        opts.weighting = Weighting::Unweighted;
    }
    let fit = fit_pulse_train(&data, &opts)?;
    let outputs = write_fit(out, "", &data, &fit)?;
    let se = fit.std_errors();
    let mut report = format!(
        "P_c   {:.4e} ± {:.1e}\ntau_c {:.4e} ± {:.1e} s\nP_max {:.4} ± {:.4}\nchi2  {:.3}\n",
        fit.params.p_c, se[0], fit.params.tau_c, se[1], fit.params.p_max, se[2], fit.chi2
    );
    if fit.degenerate {
        report.push_str("warning: lifetime is not constrained by the data\n");
    }
    Ok(Outcome {
        summary: fit_json(&fit),
        outputs,
        seeds: vec![],
        report,
    })
}

fn cmd_metrics(a: &MetricsArgs, out: &Path) -> anyhow::Result<Outcome> {
    let rows = match &a.input {
        Some(p) => read_measurements(File::open(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => published_benchmarks()?.into_iter().map(|r| r.measurement).collect(),
    };
    let table = benchmark_table(&rows);
    for (label, e) in &table.errors {
        eprintln!("row {label}: {e}");
    }
    if table.rows.is_empty() && !table.errors.is_empty() {
        bail!(table.errors.into_iter().next().expect("non-empty").1);
    }
    let path = out.join("metrics.csv");
    table.write_csv(create(&path)?)?;
    let mut report = format!("{:<18} {:>8} {:>8} {:>12}\n", "label", "eta", "F", "brightness");
    for r in &table.rows {
        writeln!(report, "{:<18} {:>8.4} {:>8.4} {:>12.4e}", r.label, r.eta, r.fidelity, r.brightness)?;
    }
    let summary = json!({
        "rows": table.rows.iter().map(|r| json!({
            "label": r.label, "eta": r.eta, "F": r.fidelity, "brightness": r.brightness,
        })).collect::<Vec<_>>(),
        "errors": table.errors.iter().map(|(l, e)| json!({"label": l, "error": e.to_string()})).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        summary,
        outputs: vec![path],
        seeds: vec![],
        report,
    })
}
