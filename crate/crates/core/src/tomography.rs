//! Reduced-density-matrix tomography: forward `τ = S ρ S†` predictions, the
//! linear inversion for `ρ56`, assembly of `ρ̄`, fidelity and purity.
//!
//! Blocks are 4x4 over `{|RB,0>, |R,B>, |B,R>, |0,RB>}`; in comments and
//! method names their entries keep the ten-ket labels 4..7, so `ρ56` is
//! block entry `(1, 2)`.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::detection::{jkl_basis, W1_BLOCK};
use crate::error::{Error, Result};
use crate::fock::{Channel, Color};
use crate::linalg::{self, c64, CMatrix};
use crate::network::{color_scattering_matrix, tomography_s_matrix, xi_minus, xi_plus, Geometry, CH_J, CH_K, CH_L};

/// `(φ_R, φ_B)` in the order `(0,0), (π/2,π/2), (0,π/2), (π/2,0)`.
pub const PHASE_SETTINGS: [(f64, f64); 4] = [(0.0, 0.0), (FRAC_PI_2, FRAC_PI_2), (0.0, FRAC_PI_2), (FRAC_PI_2, 0.0)];

/// Slack allowed on `τ ∈ [0, 1]` before an input counts as unphysical.
pub const TAU_RANGE_TOL: f64 = 1e-12;

/// Tolerance on the spread of duplicate diagonal estimates before a warning is recorded.
pub const DUPLICATE_TOL: f64 = 0.05;

fn entry(block: &CMatrix, a: usize, b: usize) -> Complex64 {
    block[(a - 4, b - 4)]
}

fn check_block(block: &CMatrix) -> Result<()> {
    if block.shape() != (4, 4) {
        return Err(Error::Dimension(format!("expected a 4x4 block, got {:?}", block.shape())));
    }
    Ok(())
}

/// Diagonal of `τ` at one phase setting, optionally with count statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauDiagonals {
    /// `τ11, τ22, τ33, τ44`.
    pub tau: [f64; 4],
    /// Standard errors; zero for analytic values.
    pub sigma: [f64; 4],
    /// Standard error of `τ22 + τ33`.
    pub pair_sum_sigma: f64,
    /// Coincidences behind the estimate; zero for analytic values.
    pub events: u64,
}

impl TauDiagonals {
    pub fn analytic(tau: [f64; 4]) -> Self {
        TauDiagonals {
            tau,
            sigma: [0.0; 4],
            pair_sum_sigma: 0.0,
            events: 0,
        }
    }

    pub fn tau22(&self) -> f64 {
        self.tau[1]
    }

    pub fn tau33(&self) -> f64 {
        self.tau[2]
    }

    pub fn pair_sum(&self) -> f64 {
        self.tau[1] + self.tau[2]
    }

    pub fn total(&self) -> f64 {
        self.tau.iter().sum()
    }

    fn check_range(&self) -> Result<()> {
        for (i, t) in self.tau.iter().enumerate() {
            if !t.is_finite() || *t < -TAU_RANGE_TOL || *t > 1.0 + TAU_RANGE_TOL {
                return Err(Error::UnphysicalInput(format!("tau{0}{0} = {t} outside [0, 1]", i + 1)));
            }
        }
        Ok(())
    }
}

/// `τ` diagonals at the four phase settings used by the inversion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSettingQuad {
    pub zero_zero: TauDiagonals,
    pub half_half: TauDiagonals,
    pub zero_half: TauDiagonals,
    pub half_zero: TauDiagonals,
}

impl PhaseSettingQuad {
    /// In [`PHASE_SETTINGS`] order.
    pub fn from_array([zero_zero, half_half, zero_half, half_zero]: [TauDiagonals; 4]) -> Self {
        PhaseSettingQuad {
            zero_zero,
            half_half,
            zero_half,
            half_zero,
        }
    }

    /// Picks the four required settings out of an arbitrary list, matching phases to 1e-9 rad.
    pub fn from_settings(settings: &[((f64, f64), TauDiagonals)]) -> Result<Self> {
        let find = |target: (f64, f64)| {
            settings
                .iter()
                .find(|((r, b), _)| (r - target.0).abs() < 1e-9 && (b - target.1).abs() < 1e-9)
                .map(|(_, t)| t.clone())
                .ok_or_else(|| {
                    Error::MissingData(format!("phase setting ({:.4}, {:.4})", target.0, target.1))
                })
        };
        Ok(PhaseSettingQuad {
            zero_zero: find(PHASE_SETTINGS[0])?,
            half_half: find(PHASE_SETTINGS[1])?,
            zero_half: find(PHASE_SETTINGS[2])?,
            half_zero: find(PHASE_SETTINGS[3])?,
        })
    }

    pub fn as_array(&self) -> [&TauDiagonals; 4] {
        [&self.zero_zero, &self.half_half, &self.zero_half, &self.half_zero]
    }

    fn check_range(&self) -> Result<()> {
        self.as_array().iter().try_for_each(|t| t.check_range())
    }

    /// Mean block trace seen across the four settings; 1 for count-normalized inputs.
    fn block_trace(&self) -> f64 {
        self.as_array().iter().map(|t| t.total()).sum::<f64>() / 4.0
    }
}

/// `S ρ S†` by direct matrix product.
pub fn tau_matrix(block: &CMatrix, geometry: &Geometry) -> Result<CMatrix> {
    check_block(block)?;
    let s = tomography_s_matrix(geometry);
    Ok(&s * block * s.adjoint())
}

/// Diagonal of `S ρ S†`; the reference computation for everything below.
pub fn tau_forward(block: &CMatrix, geometry: &Geometry) -> Result<TauDiagonals> {
    let tau = tau_matrix(block, geometry)?;
    Ok(TauDiagonals::analytic([tau[(0, 0)].re, tau[(1, 1)].re, tau[(2, 2)].re, tau[(3, 3)].re]))
}

struct Entries {
    r11: f64,
    r12: f64,
    b11: f64,
    b12: f64,
    x_r: Complex64,
    x_b: Complex64,
}

fn entries(geometry: &Geometry) -> Entries {
    let r = color_scattering_matrix(geometry, Color::R);
    let b = color_scattering_matrix(geometry, Color::B);
    Entries {
        r11: r[0][0].norm_sqr(),
        r12: r[0][1].norm_sqr(),
        b11: b[0][0].norm_sqr(),
        b12: b[0][1].norm_sqr(),
        x_r: r[0][0] * r[0][1].conj(),
        x_b: b[0][0] * b[0][1].conj(),
    }
}

/// `τ22` expanded in the entries `S^R_11, S^R_12, S^B_11, S^B_12`.
pub fn tau22_entry_form(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let e = entries(geometry);
    let p = |a, b| entry(block, a, b);
    let rb = e.x_r * e.x_b;
    let rbc = e.x_r * e.x_b.conj();
    Ok(e.r11 * e.b12 * p(4, 4).re + e.r11 * e.b11 * p(5, 5).re + e.r12 * e.b12 * p(6, 6).re
        + e.r12 * e.b11 * p(7, 7).re
        - 2.0 * e.r11 * e.x_b.re * p(4, 5).re
        + 2.0 * e.r11 * e.x_b.im * p(4, 5).im
        + 2.0 * e.x_r.re * e.b12 * p(4, 6).re
        - 2.0 * e.x_r.im * e.b12 * p(4, 6).im
        - 2.0 * rb.re * p(4, 7).re
        + 2.0 * rb.im * p(4, 7).im
        - 2.0 * rbc.re * p(5, 6).re
        + 2.0 * rbc.im * p(5, 6).im
        + 2.0 * e.x_r.re * e.b11 * p(5, 7).re
        - 2.0 * e.x_r.im * e.b11 * p(5, 7).im
        - 2.0 * e.r12 * e.x_b.re * p(6, 7).re
        + 2.0 * e.r12 * e.x_b.im * p(6, 7).im)
}

/// `τ33` expanded in the same entries.
pub fn tau33_entry_form(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let e = entries(geometry);
    let p = |a, b| entry(block, a, b);
    let rb = e.x_r * e.x_b;
    let rbc = e.x_r * e.x_b.conj();
    Ok(e.r12 * e.b11 * p(4, 4).re + e.r12 * e.b12 * p(5, 5).re + e.r11 * e.b11 * p(6, 6).re
        + e.r11 * e.b12 * p(7, 7).re
        + 2.0 * e.r12 * e.x_b.re * p(4, 5).re
        - 2.0 * e.r12 * e.x_b.im * p(4, 5).im
        - 2.0 * e.x_r.re * e.b11 * p(4, 6).re
        + 2.0 * e.x_r.im * e.b11 * p(4, 6).im
        - 2.0 * rb.re * p(4, 7).re
        + 2.0 * rb.im * p(4, 7).im
        - 2.0 * rbc.re * p(5, 6).re
        + 2.0 * rbc.im * p(5, 6).im
        - 2.0 * e.x_r.re * e.b12 * p(5, 7).re
        + 2.0 * e.x_r.im * e.b12 * p(5, 7).im
        + 2.0 * e.r11 * e.x_b.re * p(6, 7).re
        - 2.0 * e.r11 * e.x_b.im * p(6, 7).im)
}

/// Color phases `θ_c = k_c(L_m − L_n − L_c) − φ_c` and `Θ± = ξ± − (φ_R ± φ_B)`.
struct Phases {
    theta_r: f64,
    theta_b: f64,
    big_plus: f64,
    big_minus: f64,
}

fn phases(g: &Geometry) -> Phases {
    Phases {
        theta_r: g.k_r * (g.l_m - g.l_n - g.l_r) - g.phi_r,
        theta_b: g.k_b * (g.l_m - g.l_n - g.l_b) - g.phi_b,
        big_plus: xi_plus(g) - (g.phi_r + g.phi_b),
        big_minus: xi_minus(g) - (g.phi_r - g.phi_b),
    }
}

/// `τ22` in sinusoidal form; the constant term is a quarter of the block trace.
pub fn tau22_sinusoidal(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let p = |a, b| entry(block, a, b);
    let ph = phases(geometry);
    let trace = linalg::trace(block).re;
    Ok(trace / 4.0
        - (p(4, 5).re + p(6, 7).re) / 2.0 * ph.theta_b.sin()
        - (p(4, 5).im + p(6, 7).im) / 2.0 * ph.theta_b.cos()
        + (p(4, 6).re + p(5, 7).re) / 2.0 * ph.theta_r.sin()
        + (p(4, 6).im + p(5, 7).im) / 2.0 * ph.theta_r.cos()
        + 0.5 * ph.big_plus.cos() * p(4, 7).re
        - 0.5 * ph.big_minus.cos() * p(5, 6).re
        - 0.5 * ph.big_plus.sin() * p(4, 7).im
        + 0.5 * ph.big_minus.sin() * p(5, 6).im)
}

/// `τ33` in sinusoidal form with the index pattern that follows from the direct product.
pub fn tau33_sinusoidal(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let p = |a, b| entry(block, a, b);
    let ph = phases(geometry);
    let trace = linalg::trace(block).re;
    Ok(trace / 4.0
        + (p(4, 5).re + p(6, 7).re) / 2.0 * ph.theta_b.sin()
        + (p(4, 5).im + p(6, 7).im) / 2.0 * ph.theta_b.cos()
        - (p(4, 6).re + p(5, 7).re) / 2.0 * ph.theta_r.sin()
        - (p(4, 6).im + p(5, 7).im) / 2.0 * ph.theta_r.cos()
        + 0.5 * ph.big_plus.cos() * p(4, 7).re
        - 0.5 * ph.big_plus.sin() * p(4, 7).im
        - 0.5 * ph.big_minus.cos() * p(5, 6).re
        + 0.5 * ph.big_minus.sin() * p(5, 6).im)
}

/// The commonly quoted sinusoidal `τ33`, which groups `ρ47` with `ρ57` in the
/// red term and uses `ρ37` for the `Θ+` term. `ρ37` couples `|0,RR>` to
/// `|0,RB>` and is absent from the block, so it enters as zero here. Kept as a
/// cross-check: it agrees with [`tau_forward`] only when `ρ46` and `ρ47` vanish.
pub fn tau33_sinusoidal_as_quoted(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let p = |a, b| entry(block, a, b);
    let ph = phases(geometry);
    let trace = linalg::trace(block).re;
    let rho37 = c64(0.0, 0.0);
    Ok(trace / 4.0
        + (p(4, 5).re + p(6, 7).re) / 2.0 * ph.theta_b.sin()
        + (p(4, 5).im + p(6, 7).im) / 2.0 * ph.theta_b.cos()
        - (p(4, 7).re + p(5, 7).re) / 2.0 * ph.theta_r.sin()
        - (p(4, 7).im + p(5, 7).im) / 2.0 * ph.theta_r.cos()
        + 0.5 * ph.big_plus.cos() * rho37.re
        - 0.5 * ph.big_plus.sin() * rho37.im
        - 0.5 * ph.big_minus.cos() * p(5, 6).re
        + 0.5 * ph.big_minus.sin() * p(5, 6).im)
}

/// `τ22 + τ33 = T/2 + Re[ρ47 e^{iΘ+}] − Re[ρ56 e^{iΘ−}]`.
pub fn pair_sum_closed_form(block: &CMatrix, geometry: &Geometry) -> Result<f64> {
    check_block(block)?;
    let ph = phases(geometry);
    let trace = linalg::trace(block).re;
    Ok(trace / 2.0 + (entry(block, 4, 7) * Complex64::from_polar(1.0, ph.big_plus)).re
        - (entry(block, 5, 6) * Complex64::from_polar(1.0, ph.big_minus)).re)
}

/// Reconstructed `ρ56` with standard errors on its real and imaginary parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalEstimate {
    pub value: Complex64,
    pub sigma_re: f64,
    pub sigma_im: f64,
}

/// `Re ρ56 = A cos ξ₋ + D sin ξ₋`, `Im ρ56 = −A sin ξ₋ + D cos ξ₋` with
/// `A = [T − Σ(0,0) − Σ(π/2,π/2)]/2`, `D = [Σ(0,π/2) − Σ(π/2,0)]/2`,
/// `Σ = τ22 + τ33` and `T` the block trace (1 for normalized counts).
pub fn invert_offdiagonal(quad: &PhaseSettingQuad, xi_minus: f64) -> Result<OffDiagonalEstimate> {
    quad.check_range()?;
    let t = quad.block_trace();
    let a = 0.5 * (t - quad.zero_zero.pair_sum() - quad.half_half.pair_sum());
    let d = 0.5 * (quad.zero_half.pair_sum() - quad.half_zero.pair_sum());
    let sa = 0.5 * quad.zero_zero.pair_sum_sigma.hypot(quad.half_half.pair_sum_sigma);
    let sd = 0.5 * quad.zero_half.pair_sum_sigma.hypot(quad.half_zero.pair_sum_sigma);
    let (s, c) = xi_minus.sin_cos();
    Ok(OffDiagonalEstimate {
        value: c64(a * c + d * s, -a * s + d * c),
        sigma_re: (c * sa).hypot(s * sd),
        sigma_im: (s * sa).hypot(c * sd),
    })
}

/// The balanced-interferometer (`ξ₋ = 0`) inversion written in terms of
/// `P_RB ≡ τ22` and `P_BR ≡ τ33`.
pub fn invert_offdiagonal_balanced(quad: &PhaseSettingQuad) -> Result<OffDiagonalEstimate> {
    quad.check_range()?;
    let t = quad.block_trace();
    let p_rb = |x: &TauDiagonals| x.tau22();
    let p_br = |x: &TauDiagonals| x.tau33();
    let q = quad;
    let re = 0.5 * (t - p_br(&q.zero_zero) - p_rb(&q.zero_zero) - p_br(&q.half_half) - p_rb(&q.half_half));
    let im = 0.5 * (p_br(&q.zero_half) + p_rb(&q.zero_half) - p_br(&q.half_zero) - p_rb(&q.half_zero));
    Ok(OffDiagonalEstimate {
        value: c64(re, im),
        sigma_re: 0.5 * q.zero_zero.pair_sum_sigma.hypot(q.half_half.pair_sum_sigma),
        sigma_im: 0.5 * q.zero_half.pair_sum_sigma.hypot(q.half_zero.pair_sum_sigma),
    })
}

/// `τ_αα = C_αα / Σ_γ C_γγ` with binomial standard errors `√(τ(1−τ)/N)`.
pub fn tau_from_counts(counts: &[u64; 4]) -> Result<TauDiagonals> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::MissingData("a setting with zero coincidences".into()));
    }
    let nf = n as f64;
    let tau = counts.map(|c| c as f64 / nf);
    let sigma = tau.map(|t| (t * (1.0 - t) / nf).sqrt());
    let s = tau[1] + tau[2];
    Ok(TauDiagonals {
        tau,
        sigma,
        pair_sum_sigma: (s * (1.0 - s) / nf).sqrt(),
        events: n,
    })
}

/// Estimates of the block entries that enter `ρ̄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockEstimate {
    pub rho55: f64,
    pub rho66: f64,
    pub sigma55: f64,
    pub sigma66: f64,
    pub rho56: OffDiagonalEstimate,
    /// Weight used when this block's diagonals are averaged with another block's.
    pub events: u64,
}

impl BlockEstimate {
    /// Diagonals from direct two-channel counting, `ρ56` from the four interferometer settings.
    pub fn from_measurements(direct: &TauDiagonals, quad: &PhaseSettingQuad, xi_minus: f64) -> Result<Self> {
        direct.check_range()?;
        Ok(BlockEstimate {
            rho55: direct.tau22(),
            rho66: direct.tau33(),
            sigma55: direct.sigma[1],
            sigma66: direct.sigma[2],
            rho56: invert_offdiagonal(quad, xi_minus)?,
            events: direct.events,
        })
    }

    /// Reads the entries off a known block.
    pub fn exact(block: &CMatrix) -> Result<Self> {
        check_block(block)?;
        Ok(BlockEstimate {
            rho55: block[(1, 1)].re,
            rho66: block[(2, 2)].re,
            sigma55: 0.0,
            sigma66: 0.0,
            rho56: OffDiagonalEstimate {
                value: block[(1, 2)],
                sigma_re: 0.0,
                sigma_im: 0.0,
            },
            events: 0,
        })
    }
}

/// `ρ̄` assembled from the three blocks, with elementwise standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssembledRhoBar {
    pub matrix: DensityMatrix,
    /// Standard errors of the real parts over the 8-ket basis, row-major.
    pub sigma_re: Vec<f64>,
    /// Standard errors of the imaginary parts, row-major.
    pub sigma_im: Vec<f64>,
    pub warnings: Vec<String>,
}

impl AssembledRhoBar {
    pub fn sigma_re(&self, a: usize, b: usize) -> f64 {
        self.sigma_re[a * 8 + b]
    }

    pub fn sigma_im(&self, a: usize, b: usize) -> f64 {
        self.sigma_im[a * 8 + b]
    }
}

/// Event-weighted mean; falls back to the plain mean when neither side has counts.
fn weighted(x: (f64, f64, u64), y: (f64, f64, u64)) -> (f64, f64) {
    let (wx, wy) = if x.2 + y.2 == 0 {
        (1.0, 1.0)
    } else {
        (x.2 as f64, y.2 as f64)
    };
    let w = wx + wy;
    ((wx * x.0 + wy * y.0) / w, (wx * x.1).hypot(wy * y.1) / w)
}

/// Places `4/3`-scaled block entries into the `{RRB, RBR, BRR}` block of `ρ̄`.
///
/// `rho_i` is over (k, l) after red in j, `rho_ii` over (j, l) after red in k,
/// `rho_iii` over (j, k) after red in l. Duplicate diagonal estimates are
/// averaged with event-count weights; a spread above `duplicate_tol` is
/// recorded as a warning.
pub fn assemble_rho_bar(
    rho_i: &BlockEstimate,
    rho_ii: &BlockEstimate,
    rho_iii: &BlockEstimate,
    duplicate_tol: f64,
) -> Result<AssembledRhoBar> {
    let scale = 4.0 / 3.0;
    let mut warnings = Vec::new();
    let mut diag = |label: &str, x: (f64, f64, u64), y: (f64, f64, u64)| {
        if (x.0 - y.0).abs() > duplicate_tol {
            warnings.push(format!(
                "duplicate estimates of {label} differ by {:.4} (> {duplicate_tol})",
                (x.0 - y.0).abs()
            ));
        }
        weighted(x, y)
    };
    let d_rrb = diag("RRB", (rho_i.rho55, rho_i.sigma55, rho_i.events), (rho_ii.rho55, rho_ii.sigma55, rho_ii.events));
    let d_rbr = diag("RBR", (rho_i.rho66, rho_i.sigma66, rho_i.events), (rho_iii.rho55, rho_iii.sigma55, rho_iii.events));
    let d_brr = diag("BRR", (rho_ii.rho66, rho_ii.sigma66, rho_ii.events), (rho_iii.rho66, rho_iii.sigma66, rho_iii.events));

    let [rrb, rbr, brr] = W1_BLOCK;
    let mut m = CMatrix::zeros(8, 8);
    let mut s_re = vec![0.0; 64];
    let mut s_im = vec![0.0; 64];
    for (idx, (v, s)) in [(rrb, d_rrb), (rbr, d_rbr), (brr, d_brr)] {
        m[(idx, idx)] = c64(scale * v, 0.0);
        s_re[idx * 8 + idx] = scale * s;
    }
    for (a, b, est) in [(rrb, rbr, &rho_i.rho56), (rrb, brr, &rho_ii.rho56), (rbr, brr, &rho_iii.rho56)] {
        m[(a, b)] = est.value * scale;
        m[(b, a)] = est.value.conj() * scale;
        for (x, y) in [(a, b), (b, a)] {
            s_re[x * 8 + y] = scale * est.sigma_re;
            s_im[x * 8 + y] = scale * est.sigma_im;
        }
    }
    let channels = [CH_J, CH_K, CH_L].into_iter().map(Channel::from).collect();
    Ok(AssembledRhoBar {
        matrix: DensityMatrix::new(jkl_basis(), channels, m)?,
        sigma_re: s_re,
        sigma_im: s_im,
        warnings,
    })
}

/// `|W1>` as a column over the 8-ket basis.
pub fn w1_vector() -> CMatrix {
    let mut v = CMatrix::zeros(8, 1);
    for idx in W1_BLOCK {
        v[(idx, 0)] = c64(1.0 / 3f64.sqrt(), 0.0);
    }
    v
}

/// `[Tr √(√σ ρ √σ)]²` through Hermitian square roots.
///
/// The target must be PSD, and so must `√σ ρ √σ`. A slightly unphysical `ρ`
/// (as linear inversion can produce) is accepted as long as that product is.
pub fn fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    if rho.dim() != target.dim() {
        return Err(Error::Dimension("fidelity needs matrices over the same basis".into()));
    }
    let root = linalg::psd_sqrt(target.elements())?;
    let inner = &root * rho.elements() * &root;
    let f = linalg::trace(&linalg::psd_sqrt(&inner)?).re;
    Ok(f * f)
}

/// `<ψ|ρ|ψ>` for a column vector `ψ`.
pub fn fidelity_pure(rho: &DensityMatrix, psi: &CMatrix) -> Result<f64> {
    if psi.nrows() != rho.dim() || psi.ncols() != 1 {
        return Err(Error::Dimension("state vector does not match the basis".into()));
    }
    Ok((psi.adjoint() * rho.elements() * psi)[(0, 0)].re)
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.elements().iter().map(|z| z.norm_sqr()).sum()
}

/// First-order standard error of `<W1|ρ|W1> = (Σ ρ_aa + 2 Σ_{a<b} Re ρ_ab)/3`.
pub fn fidelity_w1_sigma(assembled: &AssembledRhoBar) -> f64 {
    let mut var = 0.0;
    for &a in &W1_BLOCK {
        for &b in &W1_BLOCK {
            if a == b {
                var += assembled.sigma_re(a, a).powi(2);
            } else if a < b {
                var += (2.0 * assembled.sigma_re(a, b)).powi(2);
            }
        }
    }
    var.sqrt() / 3.0
}

/// First-order standard error of `Tr(ρ²)`.
pub fn purity_sigma(assembled: &AssembledRhoBar) -> f64 {
    let m = assembled.matrix.elements();
    let mut var = 0.0;
    for &a in &W1_BLOCK {
        for &b in &W1_BLOCK {
            if a == b {
                var += (2.0 * m[(a, a)].re * assembled.sigma_re(a, a)).powi(2);
            } else if a < b {
                var += (4.0 * m[(a, b)].re * assembled.sigma_re(a, b)).powi(2);
                var += (4.0 * m[(a, b)].im * assembled.sigma_im(a, b)).powi(2);
            }
        }
    }
    var.sqrt()
}
