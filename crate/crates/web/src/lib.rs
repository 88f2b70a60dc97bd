//! Browser bindings. Every function returns a JSON string for the page to parse.

use std::f64::consts::PI;

use serde::Serialize;
use wasm_bindgen::prelude::*;
use wstate_core::config::RunConfig;
use wstate_core::detection::{two_photon_reduced, ProbabilityTable, W1_BLOCK};
use wstate_core::error::Error;
use wstate_core::experiment::{heralded_state, run_full_pipeline};
use wstate_core::network::CH_J;
use wstate_core::tomography::tau_forward;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn config(reflectances: [f64; 3], pair_probability: f64) -> Result<RunConfig, JsError> {
    let mut cfg = RunConfig::default();
    cfg.network.reflectances = Some(reflectances);
    cfg.source.pair_probability = pair_probability;
    cfg.validate().map_err(js)?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Populations {
    labels: Vec<String>,
    probabilities: [f64; 8],
}

/// Post-selected j, k, l color outcomes for the given beamsplitter reflectances.
#[wasm_bindgen]
pub fn populations(r1: f64, r2: f64, r3: f64, pair_probability: f64) -> Result<String, JsError> {
    let cfg = config([r1, r2, r3], pair_probability)?;
    let out = run_full_pipeline(&cfg.pipeline(0)).map_err(js)?;
    json(&Populations {
        labels: (0..8).map(ProbabilityTable::label).collect(),
        probabilities: out.populations.probabilities,
    })
}

#[derive(Serialize)]
struct PhaseScan {
    phi_r: Vec<f64>,
    tau22: Vec<f64>,
    tau33: Vec<f64>,
}

/// `τ22` and `τ33` of the (i, j) two-photon block as `φ_R` runs over one period.
/// Lengths are in micrometers.
#[wasm_bindgen]
pub fn phase_scan(l_m_um: f64, l_b_um: f64, phi_b: f64, steps: usize) -> Result<String, JsError> {
    if steps < 2 {
        return Err(JsError::new("steps must be at least 2"));
    }
    let mut cfg = RunConfig::default();
    cfg.geometry.l_m_m = l_m_um * 1e-6;
    cfg.geometry.l_b_m = l_b_um * 1e-6;
    cfg.validate().map_err(js)?;
    let pcfg = cfg.pipeline(0);
    let rho = heralded_state(&pcfg).map_err(js)?;
    let block = two_photon_reduced(&rho, CH_J, Some(pcfg.forced_zero_tol)).map_err(js)?.block();
    let mut scan = PhaseScan {
        phi_r: Vec::with_capacity(steps),
        tau22: Vec::with_capacity(steps),
        tau33: Vec::with_capacity(steps),
    };
    for s in 0..steps {
        let phi = 2.0 * PI * s as f64 / (steps - 1) as f64;
        let t = tau_forward(&block, &pcfg.geometry.with_phases(phi, phi_b)).map_err(js)?;
        scan.phi_r.push(phi);
        scan.tau22.push(t.tau22());
        scan.tau33.push(t.tau33());
    }
    json(&scan)
}

#[derive(Serialize)]
struct Tomography {
    mode: String,
    fidelity: f64,
    fidelity_sigma: f64,
    purity: f64,
    purity_sigma: f64,
    labels: Vec<String>,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

/// Simulated tomography run. `shots = 0` gives the analytic reconstruction;
/// `car <= 0` disables the accidental floor.
#[wasm_bindgen]
pub fn reconstruct(shots: u32, seed: u32, car: f64, jitter_rad: f64) -> Result<String, JsError> {
    let mut cfg = RunConfig {
        seed: Some(seed.into()),
        shots: (shots > 0).then_some(shots.into()),
        ..RunConfig::default()
    };
    cfg.noise.car_target = (car > 0.0).then_some(car);
    cfg.noise.phase_jitter_rad = jitter_rad;
    cfg.validate().map_err(js)?;
    let out = run_full_pipeline(&cfg.pipeline(0)).map_err(js)?;
    let r = &out.reconstruction;
    let m = r.assembled.matrix.elements();
    let pick = |imag: bool| -> Vec<Vec<f64>> {
        let part = |a, b| if imag { m[(a, b)].im } else { m[(a, b)].re };
        W1_BLOCK.iter().map(|&a| W1_BLOCK.iter().map(|&b| part(a, b)).collect()).collect()
    };
    json(&Tomography {
        mode: out.mode.clone(),
        fidelity: r.fidelity.value,
        fidelity_sigma: r.fidelity.sigma,
        purity: r.purity.value,
        purity_sigma: r.purity.sigma,
        labels: W1_BLOCK.iter().map(|&i| ProbabilityTable::label(i)).collect(),
        re: pick(false),
        im: pick(true),
    })
}
