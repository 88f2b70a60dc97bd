//! Monte Carlo coincidence sampling, pump-power scans, interferometer bounds
//! and the end-to-end reconstruction pipeline.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::detection::{
    self, fourfold_probabilities, herald_blue_i, postselected_probabilities, two_photon_reduced, LocalUnitary,
    ProbabilityTable,
};
use crate::error::{Error, Result};
use crate::fock::Color;
use crate::linalg::CMatrix;
use crate::network::{
    apply_network, build_w_network, compile_network, sfwm_state, tomography_elements, xi_minus, Geometry,
    ModeMatrix, NetworkElement, SourceParams, WRatios, Wavevectors, CH_J, CH_JP, CH_K, CH_L, CH_M, CH_N, FIBER,
};
use crate::tomography::{
    self, assemble_rho_bar, fidelity, fidelity_pure, purity, tau_forward, tau_from_counts, w1_vector,
    AssembledRhoBar, BlockEstimate, PhaseSettingQuad, TauDiagonals, PHASE_SETTINGS,
};

/// Recorded in every report next to the seed.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.9), one stream per setting index";

/// Outcome labels of two-channel coincidences, in block order.
pub const PAIR_OUTCOMES: [&str; 4] = ["RB,0", "R,B", "B,R", "0,RB"];

/// `coherence_bound` values above this are reported as unbounded.
pub const UNBOUNDED_LENGTH_M: f64 = 1e3;

/// Independent RNG stream for one setting.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Probability mass added to every outcome before renormalization.
    pub accidental_floor: f64,
    /// When set, overrides the floor so the dominant outcome sits at this
    /// coincidence-to-accidental ratio.
    pub car_target: Option<f64>,
    /// Gaussian phase noise on the set-points and on `ξ₋`, rad.
    pub phase_jitter_rad: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn car(car: f64) -> Self {
        NoiseModel {
            car_target: Some(car),
            ..Self::default()
        }
    }

    pub fn with_jitter(mut self, sigma: f64) -> Self {
        self.phase_jitter_rad = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.accidental_floor >= 0.0) {
            return Err(Error::InvalidParameter("accidental_floor must be >= 0".into()));
        }
        if let Some(c) = self.car_target {
            if !(c > 1.0) {
                return Err(Error::InvalidParameter("car_target must exceed 1".into()));
            }
        }
        if !(self.phase_jitter_rad >= 0.0) {
            return Err(Error::InvalidParameter("phase_jitter_rad must be >= 0".into()));
        }
        Ok(())
    }

    /// Floor for a given distribution: with a CAR target, `p_max / (CAR − 1)`,
    /// so `(p_max + f) / f = CAR`.
    pub fn floor_for(&self, probs: &[f64]) -> f64 {
        match self.car_target {
            Some(car) => probs.iter().copied().fold(0.0, f64::max) / (car - 1.0),
            None => self.accidental_floor,
        }
    }

    /// `(p + f) / (1 + n f)` on normalized input.
    pub fn apply(&self, probs: &[f64]) -> Vec<f64> {
        let total: f64 = probs.iter().sum();
        let p: Vec<f64> = probs.iter().map(|x| x / total).collect();
        let f = self.floor_for(&p);
        let norm = 1.0 + p.len() as f64 * f;
        p.iter().map(|x| (x + f) / norm).collect()
    }
}

/// Center wavelengths and full bandwidths, nm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub lambda_b_nm: f64,
    pub lambda_r_nm: f64,
    pub bandwidth_b_nm: f64,
    pub bandwidth_r_nm: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            lambda_b_nm: 694.0,
            lambda_r_nm: 975.0,
            bandwidth_b_nm: 2.1,
            bandwidth_r_nm: 4.3,
        }
    }
}

impl SpectralParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_b_nm > 0.0 && self.lambda_r_nm > 0.0) {
            return Err(Error::InvalidParameter("wavelengths must be positive".into()));
        }
        if !(self.bandwidth_b_nm >= 0.0 && self.bandwidth_r_nm >= 0.0) {
            return Err(Error::InvalidParameter("bandwidths must be >= 0".into()));
        }
        if self.lambda_b_nm > self.lambda_r_nm {
            return Err(Error::InvalidParameter("blue wavelength must be shorter than red".into()));
        }
        Ok(())
    }

    pub fn wavevectors(&self) -> Wavevectors {
        Wavevectors::from_wavelengths_m(self.lambda_r_nm * 1e-9, self.lambda_b_nm * 1e-9)
    }
}

/// Detection efficiencies applied per photon in the power scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Efficiencies {
    pub blue: f64,
    pub red: f64,
}

impl Default for Efficiencies {
    fn default() -> Self {
        Efficiencies { blue: 1.0, red: 1.0 }
    }
}

impl Efficiencies {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("blue", self.blue), ("red", self.red)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter(format!("{name} efficiency {v} outside (0, 1]")));
            }
        }
        Ok(())
    }

    /// Two blue and two red detections.
    pub fn fourfold(&self) -> f64 {
        self.blue.powi(2) * self.red.powi(2)
    }
}

/// Counts of one setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    /// `direct`, or a red-herald channel label for interferometer settings.
    pub block: String,
    /// `None` for the direct (no interferometer) measurement.
    pub phase: Option<(f64, f64)>,
    pub outcomes: Vec<String>,
    pub counts: Vec<u64>,
    pub shots: u64,
    pub seed: u64,
    pub stream: u64,
}

impl CountRecord {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn pair_counts(&self) -> Result<[u64; 4]> {
        self.counts
            .as_slice()
            .try_into()
            .map_err(|_| Error::Dimension(format!("expected 4 outcomes, found {}", self.counts.len())))
    }
}

/// Multinomial draw of `shots` over `probs` with the noise floor mixed in,
/// as a chain of conditional binomials.
pub fn sample_counts<R: Rng>(probs: &[f64], shots: u64, noise: &NoiseModel, rng: &mut R) -> Result<Vec<u64>> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots must be > 0".into()));
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) || probs.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::UnphysicalInput("probabilities must be non-negative with positive sum".into()));
    }
    let p = noise.apply(probs);
    let mut left = shots;
    let mut mass = 1.0;
    let mut counts = Vec::with_capacity(p.len());
    for (i, &pi) in p.iter().enumerate() {
        if i + 1 == p.len() {
            counts.push(left);
            break;
        }
        let q = if mass > 0.0 { (pi / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if left == 0 || q == 0.0 {
            0
        } else {
            Binomial::new(left, q).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng)
        };
        counts.push(c);
        left -= c;
        mass -= pi;
    }
    Ok(counts)
}

/// [`sample_counts`] on its own stream, packaged as a record.
#[allow(clippy::too_many_arguments)]
pub fn sample_record(
    block: &str,
    phase: Option<(f64, f64)>,
    outcomes: &[&str],
    probs: &[f64],
    shots: u64,
    noise: &NoiseModel,
    seed: u64,
    stream: u64,
) -> Result<CountRecord> {
    let mut rng = rng_for(seed, stream);
    let counts = sample_counts(probs, shots, noise, &mut rng)?;
    Ok(CountRecord {
        block: block.to_string(),
        phase,
        outcomes: outcomes.iter().map(|s| s.to_string()).collect(),
        counts,
        shots,
        seed,
        stream,
    })
}

/// Total four-fold probability for one pump amplitude: blue-only in i and a
/// single-color click in each of j, k, l.
pub fn fourfold_probability(source: &SourceParams, network: &ModeMatrix) -> Result<f64> {
    let psi = apply_network(&sfwm_state(source)?, network)?;
    Ok(fourfold_probabilities(&psi)?.iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub slope: f64,
    pub slope_sigma: f64,
    pub intercept: f64,
    pub points: usize,
}

/// Ordinary least squares of `ln y` on `ln x`.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit> {
    let n = points.len();
    if n < 3 {
        return Err(Error::UnderdeterminedFit(n));
    }
    if points.iter().any(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::InvalidParameter("log-log fit needs positive values".into()));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::UnderdeterminedFit(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let slope_sigma = (rss / (nf - 2.0) / sxx).sqrt();
    Ok(PowerLawFit {
        slope,
        slope_sigma,
        intercept,
        points: n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerScanPoint {
    pub beta: f64,
    /// Four-fold probability per pulse times the detection efficiency.
    pub probability: f64,
    /// Sampled four-fold counts, when sampling.
    pub counts: Option<u64>,
    /// The value entering the fit: the probability, or the counts.
    pub rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerScan {
    pub points: Vec<PowerScanPoint>,
    pub fit: PowerLawFit,
    pub shots: Option<u64>,
    pub seed: u64,
}

/// Default β grid, 0.05 to 0.14 in ten steps.
pub fn default_betas() -> Vec<f64> {
    (0..10).map(|i| 0.05 + 0.01 * i as f64).collect()
}

/// Four-fold rate against `|β|`, with a log-log fit.
///
/// `shots` is the expected count budget at the largest β of the grid; the
/// other points get Poisson counts with means scaled by their probability.
/// `None` fits the analytic probabilities. Points with zero counts are dropped.
pub fn power_scan(
    betas: &[f64],
    ratios: WRatios,
    geometry: &Geometry,
    efficiency: Efficiencies,
    shots: Option<u64>,
    seed: u64,
) -> Result<PowerScan> {
    if betas.len() < 3 {
        return Err(Error::UnderdeterminedFit(betas.len()));
    }
    if betas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("power-scan betas must be strictly increasing".into()));
    }
    efficiency.validate()?;
    let network = build_w_network(ratios, geometry)?;
    let eta = efficiency.fourfold();
    let mut probs = Vec::with_capacity(betas.len());
    for &b in betas {
        let source = SourceParams::from_pair_probability(b * b);
        probs.push(eta * fourfold_probability(&source, &network)?);
    }
    let p_max = probs.iter().copied().fold(0.0, f64::max);
    let mut points = Vec::with_capacity(betas.len());
    for (i, (&beta, &p)) in betas.iter().zip(&probs).enumerate() {
        let (counts, rate) = match shots {
            None => (None, p),
            Some(budget) => {
                let mean = budget as f64 * p / p_max;
                let c = if mean > 0.0 {
                    let mut rng = rng_for(seed, i as u64);
                    Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(&mut rng) as u64
                } else {
                    0
                };
                (Some(c), c as f64)
            }
        };
        points.push(PowerScanPoint {
            beta,
            probability: p,
            counts,
            rate,
        });
    }
    let usable: Vec<(f64, f64)> = points.iter().filter(|p| p.rate > 0.0).map(|p| (p.beta, p.rate)).collect();
    let fit = fit_power_law(&usable)?;
    Ok(PowerScan {
        points,
        fit,
        shots,
        seed,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "meters", rename_all = "snake_case")]
pub enum LengthBound {
    Finite(f64),
    Unbounded,
}

impl LengthBound {
    fn from_length(l: f64) -> Self {
        if l.is_finite() && l <= UNBOUNDED_LENGTH_M {
            LengthBound::Finite(l)
        } else {
            LengthBound::Unbounded
        }
    }

    pub fn meters(&self) -> Option<f64> {
        match self {
            LengthBound::Finite(l) => Some(*l),
            LengthBound::Unbounded => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherenceBound {
    /// `κ_c = π Δλ_c / λ_c²`, rad/m.
    pub kappa_b: f64,
    pub kappa_r: f64,
    pub delta_kappa: f64,
    /// `π / Δκ`.
    pub bound: LengthBound,
    /// `2π / Δκ`.
    pub bound_2pi: LengthBound,
}

/// Path-imbalance limit set by the photons' bandwidths.
pub fn coherence_bound(spec: &SpectralParams) -> Result<CoherenceBound> {
    spec.validate()?;
    let kappa = |bw: f64, l: f64| PI * (bw * 1e-9) / (l * 1e-9).powi(2);
    let kappa_b = kappa(spec.bandwidth_b_nm, spec.lambda_b_nm);
    let kappa_r = kappa(spec.bandwidth_r_nm, spec.lambda_r_nm);
    let delta_kappa = kappa_b + kappa_r;
    Ok(CoherenceBound {
        kappa_b,
        kappa_r,
        delta_kappa,
        bound: LengthBound::from_length(PI / delta_kappa),
        bound_2pi: LengthBound::from_length(2.0 * PI / delta_kappa),
    })
}

/// `2π / Δk₀ = λ_B λ_R / (λ_R − λ_B)`, meters.
pub fn stability_bound(spec: &SpectralParams) -> Result<f64> {
    if spec.lambda_b_nm == spec.lambda_r_nm {
        return Err(Error::DegenerateColors);
    }
    spec.validate()?;
    let (b, r) = (spec.lambda_b_nm * 1e-9, spec.lambda_r_nm * 1e-9);
    Ok(b * r / (r - b))
}

/// The commonly quoted tighter path-stability margin for the default
/// wavelengths, reported next to [`stability_bound`] for comparison.
pub const QUOTED_STABILITY_MARGIN_M: f64 = 1.7e-6;

/// How the generation network is specified.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSpec {
    Ratios(WRatios),
    /// Explicit elements from the fiber to channels i, j, k, l.
    Elements(Vec<NetworkElement>),
}

impl NetworkSpec {
    pub fn compile(&self, geometry: &Geometry) -> Result<ModeMatrix> {
        match self {
            NetworkSpec::Ratios(r) => build_w_network(*r, geometry),
            NetworkSpec::Elements(els) => compile_network(&[FIBER], els, geometry.wavevectors()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: SourceParams,
    pub network: NetworkSpec,
    pub geometry: Geometry,
    pub noise: NoiseModel,
    /// Coincidences per setting; `None` uses expected probabilities without sampling.
    pub shots: Option<u64>,
    pub phase_settings: Vec<(f64, f64)>,
    pub seed: u64,
    /// Leakage allowed outside the mixed-color block of each reduced matrix.
    pub forced_zero_tol: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            source: SourceParams::default(),
            network: NetworkSpec::Ratios(WRatios::exact()),
            geometry: Geometry::zero(SpectralParams::default().wavevectors()),
            noise: NoiseModel::none(),
            shots: None,
            phase_settings: PHASE_SETTINGS.to_vec(),
            seed: 0,
            forced_zero_tol: detection::NOISY_ZERO_TOL,
        }
    }
}

/// `τ` diagonals measured for one red-herald channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeasurement {
    pub red_channel: String,
    /// Two-channel counting without the interferometer.
    pub direct: TauDiagonals,
    pub settings: Vec<((f64, f64), TauDiagonals)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    pub measurement: ChannelMeasurement,
    pub estimate: BlockEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
}

/// Reconstructed `ρ̄` and its figures of merit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub xi_minus: f64,
    pub channels: Vec<ChannelEstimate>,
    pub assembled: AssembledRhoBar,
    pub trace: f64,
    /// `<W1|ρ̄|W1>`.
    pub fidelity: Estimate,
    /// Square-root formula; `None` when `√σ ρ̄ √σ` is not PSD.
    pub fidelity_sqrt: Option<f64>,
    pub purity: Estimate,
}

/// Inverts each channel's measurements and assembles `ρ̄`. Needs j, k and l.
pub fn reconstruct(measurements: Vec<ChannelMeasurement>, xi_minus: f64) -> Result<Reconstruction> {
    let mut channels = Vec::with_capacity(3);
    for red in [CH_J, CH_K, CH_L] {
        let m = measurements
            .iter()
            .find(|m| m.red_channel == red)
            .ok_or_else(|| Error::MissingData(format!("red-herald channel {red}")))?
            .clone();
        let quad = PhaseSettingQuad::from_settings(&m.settings)?;
        let estimate = BlockEstimate::from_measurements(&m.direct, &quad, xi_minus)?;
        channels.push(ChannelEstimate { measurement: m, estimate });
    }
    let assembled = assemble_rho_bar(
        &channels[0].estimate,
        &channels[1].estimate,
        &channels[2].estimate,
        tomography::DUPLICATE_TOL,
    )?;
    let rho = &assembled.matrix;
    Ok(Reconstruction {
        xi_minus,
        trace: rho.trace(),
        fidelity: Estimate {
            value: fidelity_pure(rho, &w1_vector())?,
            sigma: tomography::fidelity_w1_sigma(&assembled),
        },
        fidelity_sqrt: fidelity(rho, &detection::w1_density()).ok(),
        purity: Estimate {
            value: purity(rho),
            sigma: tomography::purity_sigma(&assembled),
        },
        channels,
        assembled,
    })
}

/// Groups count records into per-channel measurements. Records whose block
/// is not j, k or l (such as population counts) are skipped.
pub fn measurements_from_records(records: &[CountRecord]) -> Result<Vec<ChannelMeasurement>> {
    let mut out = Vec::new();
    for red in [CH_J, CH_K, CH_L] {
        let mine: Vec<&CountRecord> = records.iter().filter(|r| r.block == red).collect();
        if mine.is_empty() {
            continue;
        }
        let mut direct = None;
        let mut settings = Vec::new();
        for r in mine {
            if r.outcomes.iter().map(String::as_str).ne(PAIR_OUTCOMES) {
                return Err(Error::Parse(format!("channel {red}: outcomes must be {PAIR_OUTCOMES:?} in order")));
            }
            let tau = tau_from_counts(&r.pair_counts()?)?;
            match r.phase {
                None if direct.is_some() => {
                    return Err(Error::Parse(format!("channel {red}: more than one direct record")));
                }
                None => direct = Some(tau),
                Some(p) => settings.push((p, tau)),
            }
        }
        out.push(ChannelMeasurement {
            red_channel: red.to_string(),
            direct: direct.ok_or_else(|| Error::MissingData(format!("direct counts of channel {red}")))?,
            settings,
        });
    }
    Ok(out)
}

/// The simulated state the measurements probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub rho_bar: DensityMatrix,
    /// Ten-ket reduced matrices after red detection in j, k, l.
    pub reduced: Vec<DensityMatrix>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    /// `analytic` or `sampled`.
    pub mode: String,
    pub seed: u64,
    pub rng: String,
    pub populations: ProbabilityTable,
    pub model: ModelSummary,
    pub records: Vec<CountRecord>,
    pub reconstruction: Reconstruction,
}

/// The heralded three-channel state `ρ̃` for a config.
pub fn heralded_state(cfg: &PipelineConfig) -> Result<DensityMatrix> {
    cfg.geometry.validate()?;
    let network = cfg.network.compile(&cfg.geometry)?;
    let psi = apply_network(&sfwm_state(&cfg.source)?, &network)?;
    herald_blue_i(&psi)
}

/// `τ` at a setting with jitter drawn from `rng`: `φ_R, φ_B` each get an
/// independent offset and `ξ₋` another, the latter applied through `φ_R`
/// (`L_R` and `φ_R` enter only as `k_R L_R + φ_R`).
fn jittered_tau<R: Rng>(
    block: &CMatrix,
    geometry: &Geometry,
    phase: (f64, f64),
    sigma: f64,
    rng: &mut R,
) -> Result<TauDiagonals> {
    let mut g = geometry.with_phases(phase.0, phase.1);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let (d_r, d_b, d_xi) = (normal.sample(rng), normal.sample(rng), normal.sample(rng));
        g.phi_r += d_r - d_xi;
        g.phi_b += d_b;
    }
    tau_forward(block, &g)
}

fn expected(noise: &NoiseModel, probs: &[f64; 4]) -> [f64; 4] {
    let clipped = probs.map(|p| p.max(0.0));
    let p = noise.apply(&clipped);
    [p[0], p[1], p[2], p[3]]
}

/// One setting: expected probabilities, or a sample drawn from `rng`.
fn measure<R: Rng>(
    cfg: &PipelineConfig,
    red: &str,
    phase: Option<(f64, f64)>,
    probs: &[f64; 4],
    stream: u64,
    rng: &mut R,
    records: &mut Vec<CountRecord>,
) -> Result<TauDiagonals> {
    match cfg.shots {
        None => Ok(TauDiagonals::analytic(expected(&cfg.noise, probs))),
        Some(n) => {
            let clipped = probs.map(|p| p.max(0.0));
            let rec = CountRecord {
                block: red.to_string(),
                phase,
                outcomes: PAIR_OUTCOMES.iter().map(|s| s.to_string()).collect(),
                counts: sample_counts(&clipped, n, &cfg.noise, rng)?,
                shots: n,
                seed: cfg.seed,
                stream,
            };
            let tau = tau_from_counts(&rec.pair_counts()?)?;
            records.push(rec);
            Ok(tau)
        }
    }
}

/// Simulates the source and networks, measures every red-herald channel at
/// the direct and interferometer settings, and reconstructs `ρ̄`.
///
/// Stream 0 samples the populations; channel `c` (0 for j) uses stream
/// `16(c+1)` for its direct counts and `16(c+1) + 1 + s` for setting `s`.
pub fn run_full_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutput> {
    cfg.noise.validate()?;
    if cfg.shots == Some(0) {
        return Err(Error::InvalidParameter("shots must be > 0".into()));
    }
    let rho_tilde = heralded_state(cfg)?;
    let rho_bar_model = detection::rho_bar(&rho_tilde, Some(cfg.forced_zero_tol))?;
    let populations = postselected_probabilities(
        &rho_bar_model,
        &LocalUnitary::identity(CH_J),
        &LocalUnitary::identity(CH_K),
        &LocalUnitary::identity(CH_L),
    )?;
    let mut records = Vec::new();
    if let Some(n) = cfg.shots {
        let labels: Vec<String> = (0..8).map(ProbabilityTable::label).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        records.push(sample_record(
            "populations",
            None,
            &refs,
            &populations.probabilities,
            n,
            &cfg.noise,
            cfg.seed,
            0,
        )?);
    }

    let mut reduced = Vec::with_capacity(3);
    let mut measurements = Vec::with_capacity(3);
    for (ci, red) in [CH_J, CH_K, CH_L].into_iter().enumerate() {
        let r = two_photon_reduced(&rho_tilde, red, Some(cfg.forced_zero_tol))?;
        let block = r.block();
        let base = 16 * (ci as u64 + 1);

        let diag = [block[(0, 0)].re, block[(1, 1)].re, block[(2, 2)].re, block[(3, 3)].re];
        let mut rng = rng_for(cfg.seed, base);
        let direct = measure(cfg, red, None, &diag, base, &mut rng, &mut records)?;

        let mut settings = Vec::with_capacity(cfg.phase_settings.len());
        for (si, &phase) in cfg.phase_settings.iter().enumerate() {
            let stream = base + 1 + si as u64;
            let mut rng = rng_for(cfg.seed, stream);
            let exact = jittered_tau(&block, &cfg.geometry, phase, cfg.noise.phase_jitter_rad, &mut rng)?;
            let tau = measure(cfg, red, Some(phase), &exact.tau, stream, &mut rng, &mut records)?;
            settings.push((phase, tau));
        }
        measurements.push(ChannelMeasurement {
            red_channel: red.to_string(),
            direct,
            settings,
        });
        reduced.push(r.matrix);
    }

    let reconstruction = reconstruct(measurements, xi_minus(&cfg.geometry))?;
    Ok(PipelineOutput {
        mode: if cfg.shots.is_some() { "sampled" } else { "analytic" }.to_string(),
        seed: cfg.seed,
        rng: RNG_ALGORITHM.to_string(),
        populations,
        model: ModelSummary {
            rho_bar: rho_bar_model,
            reduced,
        },
        records,
        reconstruction,
    })
}

/// Single-photon fringe behind BS3 and the tomography interferometer as `φ_c` is scanned.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fringe {
    pub color: Color,
    /// `(φ, P_m, P_n)`.
    pub points: Vec<(f64, f64, f64)>,
    pub visibility: f64,
}

pub fn fringe(geometry: &Geometry, color: Color, steps: usize) -> Result<Fringe> {
    geometry.validate()?;
    if steps < 2 {
        return Err(Error::InvalidParameter("fringe needs at least 2 phase steps".into()));
    }
    let input = crate::fock::ModeLabel::new(CH_JP, color);
    let out_m = crate::fock::ModeLabel::new(CH_M, color);
    let out_n = crate::fock::ModeLabel::new(CH_N, color);
    let mut points = Vec::with_capacity(steps);
    for s in 0..steps {
        let phi = 2.0 * PI * s as f64 / (steps - 1) as f64;
        let g = match color {
            Color::R => geometry.with_phases(phi, geometry.phi_b),
            Color::B => geometry.with_phases(geometry.phi_r, phi),
        };
        let mut elements = vec![NetworkElement::Beamsplitter {
            input: CH_JP.into(),
            second_input: None,
            reflect: CH_K.into(),
            transmit: CH_L.into(),
            reflectance: 0.5,
            reflect_length_m: g.l_k,
            transmit_length_m: g.l_l,
        }];
        elements.extend(tomography_elements(CH_K, CH_L, &g));
        let m = compile_network(&[CH_JP], &elements, g.wavevectors())?;
        points.push((phi, m.entry(&out_m, &input).norm_sqr(), m.entry(&out_n, &input).norm_sqr()));
    }
    let max = points.iter().map(|p| p.1).fold(f64::MIN, f64::max);
    let min = points.iter().map(|p| p.1).fold(f64::MAX, f64::min);
    let visibility = if max + min > 0.0 { (max - min) / (max + min) } else { 0.0 };
    Ok(Fringe {
        color,
        points,
        visibility,
    })
}
