//! Reports (key-sorted JSON), counts CSV and gnuplot-style plot data.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::detection::ProbabilityTable;
use crate::error::{Error, Result};
use crate::experiment::{
    coherence_bound, fringe, power_scan, run_full_pipeline, stability_bound, CoherenceBound, CountRecord, Estimate,
    Fringe, ModelSummary, NetworkSpec, PipelineOutput, PowerScan, Reconstruction, SpectralParams,
    QUOTED_STABILITY_MARGIN_M, RNG_ALGORITHM,
};
use crate::fock::Color;
use crate::network::WRatios;

/// Phase steps per fringe in pipeline reports.
pub const FRINGE_STEPS: usize = 73;

pub const TOOL: &str = "wstate";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Block label of the direct (no interferometer) measurement in the counts CSV.
pub const DIRECT_PHASE: &str = "direct";

/// Where the numbers came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `analytic` (expected probabilities) or `sampled`.
    pub mode: String,
    pub seed: u64,
    pub rng: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub spectral: SpectralParams,
    pub coherence: CoherenceBound,
    pub stability_m: f64,
    /// The tighter margin usually quoted for these wavelengths; not derived here.
    pub quoted_stability_margin_m: f64,
    pub note: String,
}

impl BoundsReport {
    pub fn compute(spectral: &SpectralParams) -> Result<Self> {
        let stability_m = stability_bound(spectral)?;
        Ok(BoundsReport {
            spectral: *spectral,
            coherence: coherence_bound(spectral)?,
            stability_m,
            quoted_stability_margin_m: QUOTED_STABILITY_MARGIN_M,
            note: format!(
                "stability bound 2pi/dk0 = {:.4} um differs from the quoted {:.1} um margin by a factor {:.3}; both kept",
                stability_m * 1e6,
                QUOTED_STABILITY_MARGIN_M * 1e6,
                stability_m / QUOTED_STABILITY_MARGIN_M
            ),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<RunConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub populations: Option<ProbabilityTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub records: Vec<CountRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<Reconstruction>,
    /// Copies of the reconstruction's figures of merit, for quick lookup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub purity: Option<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_scan: Option<PowerScan>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fringes: Vec<Fringe>,
}

impl Report {
    pub fn new(mode: &str, seed: u64) -> Self {
        Report {
            tool: TOOL.into(),
            version: VERSION.into(),
            schema_version: SCHEMA_VERSION,
            provenance: Provenance {
                mode: mode.into(),
                seed,
                rng: RNG_ALGORITHM.into(),
            },
            config: None,
            populations: None,
            model: None,
            records: Vec::new(),
            reconstruction: None,
            fidelity: None,
            purity: None,
            bounds: None,
            power_scan: None,
            fringes: Vec::new(),
        }
    }

    pub fn from_pipeline(out: PipelineOutput, config: Option<RunConfig>) -> Self {
        let mut r = Report::new(&out.mode, out.seed);
        r.provenance.rng = out.rng;
        r.config = config;
        r.populations = Some(out.populations);
        r.model = Some(out.model);
        r.records = out.records;
        r.with_reconstruction(out.reconstruction)
    }

    pub fn with_reconstruction(mut self, rec: Reconstruction) -> Self {
        self.fidelity = Some(rec.fidelity);
        self.purity = Some(rec.purity);
        self.reconstruction = Some(rec);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }
}

/// Everything a `pipeline` run reports: reconstruction, bounds, power scan and fringes.
///
/// The power scan uses the configured ratios, or the exact ones when the
/// network is given as an element list.
pub fn pipeline_report(cfg: &RunConfig, default_seed: u64) -> Result<Report> {
    cfg.validate()?;
    let pcfg = cfg.pipeline(default_seed);
    let out = run_full_pipeline(&pcfg)?;
    let mut echo = cfg.clone();
    echo.seed = Some(pcfg.seed);
    let mut r = Report::from_pipeline(out, Some(echo));
    r.bounds = Some(BoundsReport::compute(&cfg.spectral())?);
    let ratios = match cfg.network() {
        NetworkSpec::Ratios(r) => r,
        NetworkSpec::Elements(_) => WRatios::exact(),
    };
    if cfg.power_scan.betas.len() >= 3 {
        r.power_scan = Some(power_scan(
            &cfg.power_scan.betas,
            ratios,
            &pcfg.geometry,
            cfg.efficiency(),
            cfg.power_scan.shots,
            pcfg.seed,
        )?);
    }
    r.fringes = Color::BOTH
        .iter()
        .map(|&c| fringe(&pcfg.geometry, c, FRINGE_STEPS))
        .collect::<Result<_>>()?;
    Ok(r)
}

/// Pretty JSON with object keys sorted, so output is independent of field order.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's default Map is a BTreeMap, so going through Value sorts keys.
    let v = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn emit_report(report: &Report, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &report.to_json()?)
}

pub fn read_report(path: impl AsRef<Path>) -> Result<Report> {
    Report::from_json(&read_text(path)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    Populations,
    PowerScan,
    Fringe,
}

impl std::str::FromStr for PlotKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "populations" => Ok(PlotKind::Populations),
            "power_scan" | "power-scan" => Ok(PlotKind::PowerScan),
            "fringe" => Ok(PlotKind::Fringe),
            other => Err(Error::Config(format!("unknown plot kind {other:?}"))),
        }
    }
}

/// Whitespace-separated columns with `#` header lines.
pub fn plot_data(kind: PlotKind, report: &Report) -> Result<String> {
    let mut out = String::new();
    let p = &report.provenance;
    let _ = writeln!(out, "# {TOOL} {VERSION} mode={} seed={}", p.mode, p.seed);
    match kind {
        PlotKind::Populations => {
            let t = report
                .populations
                .as_ref()
                .ok_or_else(|| Error::MissingData("populations (run the pipeline or simulate stage)".into()))?;
            out.push_str("# post-selected three-fold outcome probabilities\n");
            out.push_str("# index outcome_jkl probability[1]\n");
            for (i, v) in t.probabilities.iter().enumerate() {
                let _ = writeln!(out, "{i} {} {v:.17e}", ProbabilityTable::label(i));
            }
        }
        PlotKind::PowerScan => {
            let s = report
                .power_scan
                .as_ref()
                .ok_or_else(|| Error::MissingData("power_scan (run the power-scan stage)".into()))?;
            let _ = writeln!(out, "# fit: rate ~ beta^slope, slope = {} +- {}", s.fit.slope, s.fit.slope_sigma);
            out.push_str("# beta[1] rate[counts or probability per pulse] probability[per pulse]\n");
            for pt in &s.points {
                let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", pt.beta, pt.rate, pt.probability);
            }
        }
        PlotKind::Fringe => {
            if report.fringes.is_empty() {
                return Err(Error::MissingData("fringe (run the fringe stage)".into()));
            }
            for f in &report.fringes {
                let _ = writeln!(out, "# color {} visibility {}", f.color, f.visibility);
                out.push_str("# phase[rad] p_m[1] p_n[1]\n");
                for (phi, m, n) in &f.points {
                    let _ = writeln!(out, "{phi:.17e} {m:.17e} {n:.17e}");
                }
                out.push_str("\n\n");
            }
        }
    }
    Ok(out)
}

pub fn emit_plot_data(kind: PlotKind, report: &Report, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &plot_data(kind, report)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRow {
    block: String,
    phase_r: String,
    phase_b: String,
    outcome: String,
    counts: u64,
    shots: u64,
    seed: u64,
    stream: u64,
}

/// Long-format counts: one row per outcome. Direct records carry `direct`
/// in both phase columns.
pub fn counts_to_csv(records: &[CountRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let (pr, pb) = match r.phase {
            Some((a, b)) => (a.to_string(), b.to_string()),
            None => (DIRECT_PHASE.to_string(), DIRECT_PHASE.to_string()),
        };
        for (o, c) in r.outcomes.iter().zip(&r.counts) {
            w.serialize(CountRow {
                block: r.block.clone(),
                phase_r: pr.clone(),
                phase_b: pb.clone(),
                outcome: o.clone(),
                counts: *c,
                shots: r.shots,
                seed: r.seed,
                stream: r.stream,
            })
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

/// Inverse of [`counts_to_csv`]; consecutive rows with the same block, phase
/// and stream form one record.
pub fn counts_from_csv(text: &str) -> Result<Vec<CountRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let mut out: Vec<CountRecord> = Vec::new();
    for (n, row) in rd.deserialize::<CountRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("counts row {}: {e}", n + 2)))?;
        let phase = if row.phase_r == DIRECT_PHASE && row.phase_b == DIRECT_PHASE {
            None
        } else {
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("counts row {}: bad phase {s:?}", n + 2)))
            };
            Some((parse(&row.phase_r)?, parse(&row.phase_b)?))
        };
        let same = out
            .last()
            .is_some_and(|r| r.block == row.block && r.phase == phase && r.stream == row.stream);
        if !same {
            out.push(CountRecord {
                block: row.block,
                phase,
                outcomes: Vec::new(),
                counts: Vec::new(),
                shots: row.shots,
                seed: row.seed,
                stream: row.stream,
            });
        }
        let r = out.last_mut().expect("record pushed above");
        r.outcomes.push(row.outcome);
        r.counts.push(row.counts);
    }
    Ok(out)
}
