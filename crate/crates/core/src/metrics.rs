//! Figures of merit for single-photon sources: single-mode efficiency,
//! fidelity and brightness from an (P, V, g²) characterisation.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One characterised source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMeasurement {
    pub label: String,
    /// Clock rate, Hz.
    #[serde(rename = "R_Hz")]
    pub rep_rate: f64,
    pub duty: f64,
    /// Probability of at least one photon per trigger, 1 − P₀.
    #[serde(rename = "P")]
    pub p: f64,
    /// Multi-photon-corrected HOM visibility.
    #[serde(rename = "V")]
    pub v: f64,
    pub g2: f64,
}

impl SourceMeasurement {
    pub fn new(label: impl Into<String>, rep_rate: f64, duty: f64, p: f64, v: f64, g2: f64) -> Result<Self> {
        let m = Self {
            label: label.into(),
            rep_rate,
            duty,
            p,
            v,
            g2,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, x) in [("P", self.p), ("V", self.v), ("duty", self.duty)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::validation(field, format!("{x} is outside [0, 1]")));
            }
        }
        if !(self.g2 >= 0.0 && self.g2.is_finite()) {
            return Err(Error::validation("g2", "must be non-negative"));
        }
        if self.p * self.g2 >= 1.0 {
            return Err(Error::validation("g2", "P·g² must be below 1"));
        }
        if !(self.rep_rate > 0.0 && self.rep_rate.is_finite()) {
            return Err(Error::validation("R_Hz", "must be positive"));
        }
        Ok(())
    }
}

/// Split of P into the single-mode part, distinguishable single photons
/// and multi-photon events.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub eta: f64,
    pub p1_prime: f64,
    pub p2: f64,
}

impl Decomposition {
    /// (P, V, g²) implied by the split.
    pub fn recompose(&self) -> (f64, f64, f64) {
        let q = self.eta + self.p1_prime;
        let p = q + self.p2;
        let v = if q > 0.0 { self.eta / q } else { 0.0 };
        let g2 = if p > 0.0 { 2.0 * self.p2 / (q + 2.0 * self.p2).powi(2) } else { 0.0 };
        (p, v, g2)
    }
}

/// η = P·V·(1 − ½P g²(1 + P g²)), accurate to second order in P g².
pub fn single_mode_efficiency(m: &SourceMeasurement) -> Result<f64> {
    m.validate()?;
    let pg = m.p * m.g2;
    Ok(m.p * m.v * (1.0 - 0.5 * pg * (1.0 + pg)))
}

/// Exact solution of P = η + P₁′ + P₂, V = η/(η + P₁′),
/// g² = 2P₂/(η + P₁′ + 2P₂)².
pub fn decompose(m: &SourceMeasurement) -> Result<Decomposition> {
    m.validate()?;
    let (p, g) = (m.p, m.g2);
    let disc = 1.0 - 2.0 * g * p;
    if disc < 0.0 {
        return Err(Error::validation(
            "g2",
            format!("no physical decomposition for P = {p}, g² = {g} (needs P·g² ≤ 1/2)"),
        ));
    }
    // g P₂² + 2(gP − 1) P₂ + g P² = 0, smaller root in cancellation-free form
    let p2 = g * p * p / ((1.0 - g * p) + disc.sqrt());
    let q = p - p2;
    Ok(Decomposition {
        eta: m.v * q,
        p1_prime: (1.0 - m.v) * q,
        p2,
    })
}

/// F = η/P
pub fn fidelity(eta: f64, p: f64) -> Result<f64> {
    if p <= 0.0 {
        return Err(Error::validation("P", "fidelity needs P > 0"));
    }
    Ok(eta / p)
}

/// Single-mode photons per second at clock rate `rep_rate` and `duty`.
pub fn brightness(eta: f64, rep_rate: f64, duty: f64) -> f64 {
    eta * rep_rate * duty
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceMetrics {
    pub label: String,
    pub eta: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    pub brightness: f64,
    /// `None` when the exact system has no physical root.
    pub decomposition: Option<Decomposition>,
}

pub fn evaluate(m: &SourceMeasurement) -> Result<SourceMetrics> {
    let eta = single_mode_efficiency(m)?;
    Ok(SourceMetrics {
        label: m.label.clone(),
        eta,
        fidelity: fidelity(eta, m.p)?,
        brightness: brightness(eta, m.rep_rate, m.duty),
        decomposition: decompose(m).ok(),
    })
}

#[derive(Debug, Default)]
pub struct BenchmarkTable {
    pub rows: Vec<SourceMetrics>,
    /// Rows that failed validation, by label.
    pub errors: Vec<(String, Error)>,
}

impl BenchmarkTable {
    /// Columns `label,eta,F,brightness,eta_exact,P1_prime,P2`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["label", "eta", "F", "brightness", "eta_exact", "P1_prime", "P2"])?;
        for r in &self.rows {
            let d = r.decomposition;
            let opt = |x: Option<f64>| x.map(|x| format!("{x:.6e}")).unwrap_or_default();
            wtr.write_record([
                r.label.clone(),
                format!("{:.6e}", r.eta),
                format!("{:.6e}", r.fidelity),
                format!("{:.6e}", r.brightness),
                opt(d.map(|d| d.eta)),
                opt(d.map(|d| d.p1_prime)),
                opt(d.map(|d| d.p2)),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn benchmark_table(rows: &[SourceMeasurement]) -> BenchmarkTable {
    let mut table = BenchmarkTable::default();
    for m in rows {
        match evaluate(m) {
            Ok(r) => table.rows.push(r),
            Err(e) => table.errors.push((m.label.clone(), e)),
        }
    }
    table
}

/// Reads `label,R_Hz,duty,P,V,g2`; extra columns are ignored.
pub fn read_measurements<R: Read>(r: R) -> Result<Vec<SourceMeasurement>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<Vec<SourceMeasurement>, _>>()?)
}

/// A number as printed in a published table, with its rounding half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Printed {
    pub value: f64,
    pub half_width: f64,
}

impl Printed {
    /// Half a unit in the last printed digit, so "0.10" → ±0.005 and
    /// "76e6" → ±0.5e6.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let value: f64 = s
            .parse()
            .map_err(|_| Error::validation("table", format!("cannot parse number `{s}`")))?;
        let (mant, exp) = match s.split_once(['e', 'E']) {
            Some((m, e)) => (
                m,
                e.parse::<i32>()
                    .map_err(|_| Error::validation("table", format!("bad exponent in `{s}`")))?,
            ),
            None => (s, 0),
        };
        let decimals = mant.split_once('.').map_or(0, |(_, d)| d.len() as i32);
        Ok(Self {
            value,
            half_width: 0.5 * 10f64.powi(exp - decimals),
        })
    }

    pub fn lo(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.value + self.half_width
    }
}

#[derive(Debug, Deserialize)]
struct RawBenchmark {
    label: String,
    kind: String,
    #[serde(rename = "R_Hz")]
    rep_rate: String,
    duty: String,
    #[serde(rename = "P")]
    p: String,
    #[serde(rename = "V")]
    v: String,
    g2: String,
    eta: String,
    brightness: String,
    brightness_unit: f64,
    #[serde(rename = "F")]
    fidelity: String,
}

/// A published benchmark row: inputs and the figures printed for them.
#[derive(Debug, Clone, PartialEq)]
pub struct PublishedRow {
    pub kind: String,
    pub measurement: SourceMeasurement,
    /// Inputs in the order R, duty, P, V, g².
    pub inputs: [Printed; 5],
    pub eta: Printed,
    /// s⁻¹
    pub brightness: Printed,
    pub fidelity: Printed,
}

const PUBLISHED: &str = include_str!("../data/source_benchmarks.csv");

/// Benchmark rows shipped with the crate.
pub fn published_benchmarks() -> Result<Vec<PublishedRow>> {
    read_published(PUBLISHED.as_bytes())
}

pub fn read_published<R: Read>(r: R) -> Result<Vec<PublishedRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for raw in rdr.deserialize::<RawBenchmark>() {
        let raw = raw?;
        let inputs = [&raw.rep_rate, &raw.duty, &raw.p, &raw.v, &raw.g2]
            .map(|s| Printed::parse(s));
        let [r, d, p, v, g] = match inputs {
            [Ok(a), Ok(b), Ok(c), Ok(d), Ok(e)] => [a, b, c, d, e],
            other => return Err(other.into_iter().find_map(|x| x.err()).expect("one input failed")),
        };
        let mut b = Printed::parse(&raw.brightness)?;
        b.value *= raw.brightness_unit;
        b.half_width *= raw.brightness_unit;
        out.push(PublishedRow {
            kind: raw.kind,
            measurement: SourceMeasurement {
                label: raw.label,
                rep_rate: r.value,
                duty: d.value,
                p: p.value,
                v: v.value,
                g2: g.value,
            },
            inputs: [r, d, p, v, g],
            eta: Printed::parse(&raw.eta)?,
            brightness: b,
            fidelity: Printed::parse(&raw.fidelity)?,
        });
    }
    Ok(out)
}

/// Comparison of recomputed figures against a published row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCheck {
    pub label: String,
    pub computed: SourceMetrics,
    /// Relative deviation (computed/printed − 1) of η, F, brightness.
    pub relative: [f64; 3],
    /// Whether some choice of inputs within their printed rounding
    /// reproduces each printed figure within its own rounding.
    pub rounding_consistent: [bool; 3],
}

impl RowCheck {
    pub fn max_relative(&self) -> f64 {
        self.relative.iter().fold(0.0f64, |a, r| a.max(r.abs()))
    }
}

pub fn check_published(row: &PublishedRow) -> Result<RowCheck> {
    let computed = evaluate(&row.measurement)?;
    let relative = [
        computed.eta / row.eta.value - 1.0,
        computed.fidelity / row.fidelity.value - 1.0,
        computed.brightness / row.brightness.value - 1.0,
    ];
    // figures are monotone in each input, so the corners bound the range
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for mask in 0..32u32 {
        let pick = |i: usize| {
            let x = row.inputs[i];
            if mask >> i & 1 == 1 { x.hi() } else { x.lo() }
        };
        let m = SourceMeasurement {
            label: String::new(),
            rep_rate: pick(0),
            duty: pick(1).min(1.0),
            p: pick(2).clamp(0.0, 1.0),
            v: pick(3).min(1.0),
            g2: pick(4).max(0.0),
        };
        let Ok(r) = evaluate(&m) else { continue };
        for (k, x) in [r.eta, r.fidelity, r.brightness].into_iter().enumerate() {
            lo[k] = lo[k].min(x);
            hi[k] = hi[k].max(x);
        }
    }
    let printed = [row.eta, row.fidelity, row.brightness];
    let rounding_consistent = [0, 1, 2].map(|k| lo[k] <= printed[k].hi() && hi[k] >= printed[k].lo());
    Ok(RowCheck {
        label: row.measurement.label.clone(),
        computed,
        relative,
        rounding_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meas(p: f64, v: f64, g2: f64) -> SourceMeasurement {
        SourceMeasurement::new("x", 1e6, 1.0, p, v, g2).unwrap()
    }

    #[test]
    fn no_multiphoton_is_product() {
        let m = meas(0.3, 0.8, 0.0);
        assert_eq!(single_mode_efficiency(&m).unwrap(), 0.3 * 0.8);
        let d = decompose(&m).unwrap();
        assert_eq!(d.p2, 0.0);
        assert_eq!(d.eta, 0.3 * 0.8);
        assert!((d.p1_prime - 0.3 * 0.2).abs() < 1e-15);
        let d = decompose(&meas(0.4, 1.0, 0.0)).unwrap();
        assert_eq!((d.eta, d.p1_prime), (0.4, 0.0));
    }

    #[test]
    fn reported_rows() {
        let m = SourceMeasurement::new("rydberg", 0.013e6, 0.6, 0.141, 0.982, 1e-4).unwrap();
        let eta = single_mode_efficiency(&m).unwrap();
        assert!((eta - 0.1385).abs() < 1e-4);
        assert!((fidelity(eta, m.p).unwrap() - 0.982).abs() < 1e-3);
        assert!((brightness(eta, m.rep_rate, m.duty) / 1.08e3 - 1.0).abs() < 5e-3);
        let d = decompose(&m).unwrap();
        let (p, v, g2) = d.recompose();
        assert!((p - m.p).abs() < 1e-12 && (v - m.v).abs() < 1e-12 && (g2 - m.g2).abs() < 1e-12);
        assert!((d.p2 / (1e-4 * 0.141f64.powi(2) / 2.0) - 1.0).abs() < 1e-3);

        let qd = meas(0.337, 0.93, 0.027);
        assert!((single_mode_efficiency(&qd).unwrap() - 0.312).abs() < 5e-4);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fidelity(0.0, 0.0).is_err());
        assert_eq!(fidelity(0.2, 0.2).unwrap(), 1.0);
        assert_eq!(fidelity(0.0, 0.2).unwrap(), 0.0);
        assert_eq!(brightness(1.0, 5e3, 1.0), 5e3);
        assert_eq!(brightness(0.0, 5e3, 0.3), 0.0);
        assert!(SourceMeasurement::new("x", 1e6, 1.0, 0.5, 0.9, 2.5).is_err());
        assert!(decompose(&meas(0.9, 0.9, 0.9)).is_err());
        assert!(benchmark_table(&[]).rows.is_empty());
    }

    #[test]
    fn table_keeps_valid_rows() {
        let bad = SourceMeasurement {
            label: "bad".into(),
            rep_rate: 1e6,
            duty: 1.0,
            p: 1.2,
            v: 0.9,
            g2: 0.0,
        };
        let t = benchmark_table(&[meas(0.1, 0.9, 0.01), bad]);
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.errors[0].0, "bad");
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"label,eta,F,brightness"));
    }

    #[test]
    fn printed_rounding() {
        let p = Printed::parse("0.10").unwrap();
        assert!((p.half_width - 0.005).abs() < 1e-15);
        let p = Printed::parse("76e6").unwrap();
        assert_eq!((p.value, p.half_width), (76e6, 0.5e6));
        let p = Printed::parse("0.052e6").unwrap();
        assert!((p.half_width - 500.0).abs() < 1e-9);
        assert!(Printed::parse("abc").is_err());
    }

    #[test]
    fn shipped_table_parses() {
        let rows = published_benchmarks().unwrap();
        assert_eq!(rows.len(), 16);
        let kir = rows.iter().find(|r| r.measurement.label == "kir2017").unwrap();
        let c = check_published(kir).unwrap();
        assert!(c.max_relative() < 1e-3, "{c:?}");
        assert!(c.rounding_consistent.iter().all(|b| *b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decompose_recompose(p in 0.0..=1.0f64, v in 1e-3..=1.0f64, g2 in 0.0..0.5f64) {
            let m = meas(p, v, g2);
            let d = decompose(&m).unwrap();
            let (p1, v1, g1) = d.recompose();
            prop_assert!((p1 - p).abs() < 1e-10);
            prop_assert!(p == 0.0 || (v1 - v).abs() < 1e-10);
            prop_assert!(p == 0.0 || (g1 - g2).abs() < 1e-10, "{} vs {}", g1, g2);
            prop_assert!(d.p2 >= 0.0 && d.p2 <= p);
        }

        #[test]
        fn efficiency_monotone(p in 0.01..0.9f64, v in 0.01..0.99f64, g2 in 0.0..0.5f64, dx in 1e-4..1e-2f64) {
            let e = single_mode_efficiency(&meas(p, v, g2)).unwrap();
            prop_assert!(single_mode_efficiency(&meas(p + dx * 0.1, v, g2)).unwrap() > e);
            prop_assert!(single_mode_efficiency(&meas(p, v + dx * 0.01, g2)).unwrap() > e);
            prop_assert!(single_mode_efficiency(&meas(p, v, g2 + dx)).unwrap() < e);
            prop_assert!(e <= p);
        }

        #[test]
        fn fidelity_ignores_rate(r in 1.0..1e9f64, duty in 1e-3..=1.0f64, p in 0.01..=1.0f64,
                                 v in 0.0..=1.0f64, g2 in 0.0..0.5f64) {
            let a = evaluate(&meas(p, v, g2)).unwrap();
            let b = evaluate(&SourceMeasurement::new("y", r, duty, p, v, g2).unwrap()).unwrap();
            prop_assert_eq!(a.fidelity, b.fidelity);
            prop_assert!((a.fidelity - a.eta / p).abs() < 1e-12);
        }
    }
}
