use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use wstate_core::config::{parse_config, RunConfig, SEED_ENV};
use wstate_core::error::{Error, ErrorKind, Result};
use wstate_core::experiment::{measurements_from_records, power_scan, reconstruct, run_full_pipeline, NetworkSpec};
use wstate_core::network::{xi_minus, WRatios};
use wstate_core::report::{
    counts_from_csv, counts_to_csv, emit_plot_data, pipeline_report, read_text, to_sorted_json, write_text,
    BoundsReport, PlotKind, Report,
};

const AFTER_HELP: &str = concat!(
    "Config files are JSON with schema_version = 1 (see docs/config.md).\n",
    "The seed comes from --seed, then the config, then the WSTATE_SEED environment variable, then 0.\n",
    "Exit codes: 0 success, 2 config error, 3 numeric or physicality error, 4 I/O error."
);

#[derive(Parser)]
#[command(name = "wstate", version, about = "Three-photon energy W state: simulation and two-photon tomography", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Post-selected outcome probabilities of the analytic model, as CSV
    Simulate(Common),
    /// Sampled coincidence counts for every setting, as CSV
    Sample {
        #[command(flatten)]
        common: Common,
        /// Coincidences per setting; overrides the config
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Reconstruct the density matrix from a counts CSV, as a JSON report
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Counts CSV as written by `sample`
        #[arg(long)]
        counts: PathBuf,
    },
    /// Coherence and path-stability length bounds
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        #[arg(long)]
        lambda_b_nm: Option<f64>,
        #[arg(long)]
        lambda_r_nm: Option<f64>,
        #[arg(long)]
        bandwidth_b_nm: Option<f64>,
        #[arg(long)]
        bandwidth_r_nm: Option<f64>,
    },
    /// Four-fold rate against |beta| with a log-log slope, as CSV
    PowerScan {
        #[command(flatten)]
        common: Common,
        /// Comma-separated |beta| grid; overrides the config
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
        /// Expected counts at the largest beta; omit for analytic rates
        #[arg(long)]
        shots: Option<u64>,
    },
    /// Full run from a config, as a JSON report
    Pipeline {
        #[command(flatten)]
        common: Common,
        /// Directory for populations, power-scan and fringe plot data
        #[arg(long)]
        plot_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Run config JSON; defaults apply when omitted
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

impl Common {
    fn load(&self) -> Result<(RunConfig, u64)> {
        let mut cfg = match &self.config {
            Some(p) => parse_config(p)?,
            None => RunConfig::default(),
        };
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        cfg.validate()?;
        Ok((cfg, env_seed()?))
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.output {
            Some(p) => write_text(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn env_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}: `{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn bounds_text(b: &BoundsReport) -> String {
    let show = |l: Option<f64>| l.map_or("unbounded".to_string(), |m| format!("{:.3} um", m * 1e6));
    format!(
        "lambda_b = {} nm, lambda_r = {} nm, bandwidth_b = {} nm, bandwidth_r = {} nm\n\
         delta_kappa = {:.6e} rad/m\n\
         coherence bound pi/delta_kappa = {}\n\
         coherence bound 2pi/delta_kappa = {}\n\
         stability bound 2pi/delta_k0 = {:.4} um\n\
         quoted stability margin = {:.1} um\n\
         note: {}\n",
        b.spectral.lambda_b_nm,
        b.spectral.lambda_r_nm,
        b.spectral.bandwidth_b_nm,
        b.spectral.bandwidth_r_nm,
        b.coherence.delta_kappa,
        show(b.coherence.bound.meters()),
        show(b.coherence.bound_2pi.meters()),
        b.stability_m * 1e6,
        b.quoted_stability_margin_m * 1e6,
        b.note
    )
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(common) => {
            let (mut cfg, env) = common.load()?;
            cfg.shots = None;
            let out = run_full_pipeline(&cfg.pipeline(env))?;
            common.emit(&out.populations.to_csv())
        }
        Command::Sample { common, shots } => {
            let (mut cfg, env) = common.load()?;
            cfg.shots = shots.or(cfg.shots).or(Some(10_000));
            cfg.validate()?;
            let out = run_full_pipeline(&cfg.pipeline(env))?;
            common.emit(&counts_to_csv(&out.records)?)
        }
        Command::Reconstruct { common, counts } => {
            let (cfg, env) = common.load()?;
            let records = counts_from_csv(&read_text(&counts)?)?;
            let seed = records.first().map_or(cfg.resolved_seed(env), |r| r.seed);
            let rec = reconstruct(measurements_from_records(&records)?, xi_minus(&cfg.geometry()))?;
            let mut report = Report::new("sampled", seed).with_reconstruction(rec);
            report.records = records;
            common.emit(&report.to_json()?)
        }
        Command::Bounds {
            common,
            format,
            lambda_b_nm,
            lambda_r_nm,
            bandwidth_b_nm,
            bandwidth_r_nm,
        } => {
            let (mut cfg, _) = common.load()?;
            let s = &mut cfg.spectral;
            s.lambda_b_nm = lambda_b_nm.unwrap_or(s.lambda_b_nm);
            s.lambda_r_nm = lambda_r_nm.unwrap_or(s.lambda_r_nm);
            s.bandwidth_b_nm = bandwidth_b_nm.unwrap_or(s.bandwidth_b_nm);
            s.bandwidth_r_nm = bandwidth_r_nm.unwrap_or(s.bandwidth_r_nm);
            cfg.validate()?;
            let b = BoundsReport::compute(&cfg.spectral())?;
            common.emit(&match format {
                Format::Text => bounds_text(&b),
                Format::Json => to_sorted_json(&b)?,
            })
        }
        Command::PowerScan { common, betas, shots } => {
            let (mut cfg, env) = common.load()?;
            if let Some(b) = betas {
                cfg.power_scan.betas = b;
            }
            cfg.power_scan.shots = shots.or(cfg.power_scan.shots);
            cfg.validate()?;
            let ratios = match cfg.network() {
                NetworkSpec::Ratios(r) => r,
                NetworkSpec::Elements(_) => WRatios::exact(),
            };
            let seed = cfg.resolved_seed(env);
            let scan = power_scan(
                &cfg.power_scan.betas,
                ratios,
                &cfg.geometry(),
                cfg.efficiency(),
                cfg.power_scan.shots,
                seed,
            )?;
            let mut text = format!(
                "# slope = {:.17e}\n# slope_sigma = {:.17e}\n# intercept = {:.17e}\n# mode = {}, seed = {seed}\n\
                 beta,probability,counts,rate\n",
                scan.fit.slope,
                scan.fit.slope_sigma,
                scan.fit.intercept,
                if scan.shots.is_some() { "sampled" } else { "analytic" },
            );
            for p in &scan.points {
                let counts = p.counts.map_or(String::new(), |c| c.to_string());
                text.push_str(&format!("{:.17e},{:.17e},{counts},{:.17e}\n", p.beta, p.probability, p.rate));
            }
            common.emit(&text)
        }
        Command::Pipeline { common, plot_dir } => {
            let (cfg, env) = common.load()?;
            let report = pipeline_report(&cfg, env)?;
            let json = report.to_json()?;
            match (&common.output, &cfg.output.report) {
                (None, Some(p)) => write_text(p, &json)?,
                _ => common.emit(&json)?,
            }
            if let Some(dir) = plot_dir.or(cfg.output.plot_dir.as_ref().map(PathBuf::from)) {
                write_plots(&report, &dir)?;
            }
            Ok(())
        }
    }
}

fn write_plots(report: &Report, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    for (kind, name) in [
        (PlotKind::Populations, "populations.dat"),
        (PlotKind::PowerScan, "power_scan.dat"),
        (PlotKind::Fringe, "fringe.dat"),
    ] {
        emit_plot_data(kind, report, dir.join(name))?;
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Numeric => 3,
        ErrorKind::Io => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
