//! Color-resolved detection, heralding and post-selection.
//!
//! Detectors are not number resolving: `P_R` fires on one or more red photons
//! with no blue, `P_B` on one or more blue with no red, and `P_0` covers the
//! vacuum together with every mixed-color occupation.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::{self, to_density, DensityMatrix};
use crate::error::{Error, Result};
use crate::fock::{Channel, Color, FockState, OccupationState};
use crate::linalg::{self, c64, CMatrix};
use crate::network::{CH_I, CH_J, CH_K, CH_L};

/// Forced-zero tolerance for noiseless forward simulations.
pub const IDEAL_ZERO_TOL: f64 = 1e-12;
/// Forced-zero tolerance, in trace weight, for sampled or noisy inputs.
pub const NOISY_ZERO_TOL: f64 = 0.05;
/// Herald and conditioning probabilities below this are treated as never firing.
pub const MIN_PROBABILITY: f64 = 1e-15;

/// Indices of `|RRB>`, `|RBR>`, `|BRR>` in the single-photon-per-channel basis.
pub const W1_BLOCK: [usize; 3] = [1, 2, 4];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PvmOutcome {
    RedOnly,
    BlueOnly,
    NullOrMixed,
}

impl PvmOutcome {
    pub const ALL: [PvmOutcome; 3] = [PvmOutcome::RedOnly, PvmOutcome::BlueOnly, PvmOutcome::NullOrMixed];

    pub fn classify(n_red: u32, n_blue: u32) -> PvmOutcome {
        match (n_red, n_blue) {
            (r, 0) if r > 0 => PvmOutcome::RedOnly,
            (0, b) if b > 0 => PvmOutcome::BlueOnly,
            _ => PvmOutcome::NullOrMixed,
        }
    }

    pub fn detected(color: Color) -> PvmOutcome {
        match color {
            Color::R => PvmOutcome::RedOnly,
            Color::B => PvmOutcome::BlueOnly,
        }
    }

    pub fn of(ket: &OccupationState, channel: &Channel) -> PvmOutcome {
        Self::classify(ket.count_in(channel, Color::R), ket.count_in(channel, Color::B))
    }
}

/// `P ρ P` over the same basis together with `Tr(P ρ)`.
pub fn project_color(
    rho: &DensityMatrix,
    channel: &Channel,
    outcome: PvmOutcome,
) -> Result<(DensityMatrix, f64)> {
    if !rho.channels().contains(channel) {
        return Err(Error::UnknownChannel(channel.to_string()));
    }
    let keep: Vec<bool> = rho.basis().iter().map(|k| PvmOutcome::of(k, channel) == outcome).collect();
    let n = rho.dim();
    let e = rho.elements();
    let projected = CMatrix::from_fn(n, n, |i, j| if keep[i] && keep[j] { e[(i, j)] } else { c64(0.0, 0.0) });
    let prob = (0..n).filter(|&i| keep[i]).map(|i| e[(i, i)].re).sum::<f64>();
    Ok((rho.with_elements(projected), prob))
}

/// `P|ψ>` for a pure state.
pub fn project_state(psi: &FockState, channel: &Channel, outcome: PvmOutcome) -> Result<FockState> {
    if !psi.channels().contains(channel) {
        return Err(Error::UnknownChannel(channel.to_string()));
    }
    Ok(psi.filter(|k| PvmOutcome::of(k, channel) == outcome))
}

/// Conditions on `outcome` in `channel`, normalizes, and traces that channel out.
pub fn herald(psi: &FockState, channel: &Channel, outcome: PvmOutcome) -> Result<DensityMatrix> {
    let projected = project_state(psi, channel, outcome)?;
    let prob = projected.norm_sqr() / psi.norm_sqr().max(f64::MIN_POSITIVE);
    if prob < MIN_PROBABILITY {
        return Err(Error::HeraldNeverFires(prob));
    }
    let rho = to_density(&projected)?.normalized()?;
    let keep: BTreeSet<Channel> = psi.channels().iter().filter(|c| *c != channel).cloned().collect();
    density::partial_trace(&rho, &keep)
}

/// `ρ̃ = Tr_i(P_Bi |Ψ><Ψ| P_Bi) / Tr(P_Bi |Ψ><Ψ|)`.
pub fn herald_blue_i(psi: &FockState) -> Result<DensityMatrix> {
    herald(psi, &Channel::from(CH_I), PvmOutcome::BlueOnly)
}

/// `|RRR>, |RRB>, |RBR>, |RBB>, |BRR>, |BRB>, |BBR>, |BBB>` over three channels.
pub fn single_photon_basis(channels: [&str; 3]) -> Vec<OccupationState> {
    (0..8)
        .map(|idx| {
            let color = |bit: usize| if idx >> bit & 1 == 0 { Color::R } else { Color::B };
            OccupationState::from_photons([(channels[0], color(2)), (channels[1], color(1)), (channels[2], color(0))])
        })
        .collect()
}

pub fn jkl_basis() -> Vec<OccupationState> {
    single_photon_basis([CH_J, CH_K, CH_L])
}

/// `|W1> = (|RRB> + |RBR> + |BRR>)/√3` on j, k, l.
pub fn w1_state() -> FockState {
    let mut s = FockState::empty([CH_J, CH_K, CH_L]);
    let basis = jkl_basis();
    let a = c64(1.0 / 3f64.sqrt(), 0.0);
    for idx in W1_BLOCK {
        s.add(basis[idx].clone(), a).expect("three photons fit the truncation");
    }
    s
}

/// `|W1><W1|` over the 8-ket basis.
pub fn w1_density() -> DensityMatrix {
    let rho = to_density(&w1_state()).expect("W1 is normalized");
    density::restrict(&rho, &jkl_basis()).expect("W1 kets live on j, k, l")
}

/// Trace weight on basis kets outside `block`.
pub fn outside_block_weight(rho: &DensityMatrix, block: &[usize]) -> f64 {
    (0..rho.dim())
        .filter(|i| !block.contains(i))
        .map(|i| rho.elements()[(i, i)].re.abs())
        .sum()
}

/// Largest `|ρ_ab|` with `a` or `b` outside `block`.
pub fn outside_block_max_element(rho: &DensityMatrix, block: &[usize]) -> f64 {
    let n = rho.dim();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            if !(block.contains(&a) && block.contains(&b)) {
                worst = worst.max(rho.elements()[(a, b)].norm());
            }
        }
    }
    worst
}

/// Restricts `ρ̃` on j, k, l to one photon per channel and renormalizes.
///
/// With `forced_zero_tol` set, errors when the weight outside the
/// `{RRB, RBR, BRR}` block exceeds it.
pub fn rho_bar(rho_tilde: &DensityMatrix, forced_zero_tol: Option<f64>) -> Result<DensityMatrix> {
    let restricted = density::restrict(rho_tilde, &jkl_basis())?;
    let tr = restricted.trace();
    if tr < MIN_PROBABILITY {
        return Err(Error::NoPostSelectedSupport);
    }
    let out = restricted.scaled(1.0 / tr);
    if let Some(tol) = forced_zero_tol {
        let weight = outside_block_weight(&out, &W1_BLOCK);
        if weight > tol {
            return Err(Error::ForcedZeroViolated { weight, tol });
        }
    }
    Ok(out)
}

/// A 2x2 unitary on the `{R, B}` single-photon frame of one channel.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalUnitary {
    pub channel: Channel,
    matrix: CMatrix,
}

impl LocalUnitary {
    pub fn new(channel: impl Into<Channel>, m: [[Complex64; 2]; 2]) -> Result<Self> {
        let matrix = CMatrix::from_row_slice(2, 2, &[m[0][0], m[0][1], m[1][0], m[1][1]]);
        if linalg::isometry_defect(&matrix) > 1e-12 {
            return Err(Error::InvalidParameter("local operation is not unitary".into()));
        }
        Ok(LocalUnitary {
            channel: channel.into(),
            matrix,
        })
    }

    pub fn identity(channel: impl Into<Channel>) -> Self {
        LocalUnitary {
            channel: channel.into(),
            matrix: CMatrix::identity(2, 2),
        }
    }

    /// Exchanges the two colors.
    pub fn swap(channel: impl Into<Channel>) -> Self {
        let one = c64(1.0, 0.0);
        let zero = c64(0.0, 0.0);
        Self::new(channel, [[zero, one], [one, zero]]).expect("permutation is unitary")
    }

    /// `e^{iα} [[e^{iβ}cos θ, e^{iγ}sin θ], [-e^{-iγ}sin θ, e^{-iβ}cos θ]]`.
    pub fn from_angles(channel: impl Into<Channel>, alpha: f64, beta: f64, gamma: f64, theta: f64) -> Self {
        let g = Complex64::from_polar(1.0, alpha);
        let m = [
            [g * Complex64::from_polar(theta.cos(), beta), g * Complex64::from_polar(theta.sin(), gamma)],
            [-g * Complex64::from_polar(theta.sin(), -gamma), g * Complex64::from_polar(theta.cos(), -beta)],
        ];
        Self::new(channel, m).expect("parametrized U(2) element")
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// Post-selected outcome probabilities `p_{JKL}` indexed like the 8-ket basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityTable {
    pub probabilities: [f64; 8],
}

impl ProbabilityTable {
    pub fn index(j: Color, k: Color, l: Color) -> usize {
        4 * j.index() + 2 * k.index() + l.index()
    }

    pub fn outcome(index: usize) -> [Color; 3] {
        let c = |bit: usize| if index >> bit & 1 == 0 { Color::R } else { Color::B };
        [c(2), c(1), c(0)]
    }

    pub fn get(&self, j: Color, k: Color, l: Color) -> f64 {
        self.probabilities[Self::index(j, k, l)]
    }

    pub fn label(index: usize) -> String {
        Self::outcome(index).iter().map(|c| c.symbol()).collect()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    /// CSV with header `outcome_j,outcome_k,outcome_l,probability`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("outcome_j,outcome_k,outcome_l,probability\n");
        for (i, p) in self.probabilities.iter().enumerate() {
            let [j, k, l] = Self::outcome(i);
            let _ = writeln!(out, "{j},{k},{l},{p:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut probabilities = [f64::NAN; 8];
        for (n, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", n + 1)));
            }
            let c: Vec<Color> = cols[..3].iter().map(|s| s.parse()).collect::<Result<_>>()?;
            let p: f64 = cols[3].parse().map_err(|_| Error::Parse(format!("line {}: bad probability", n + 1)))?;
            probabilities[Self::index(c[0], c[1], c[2])] = p;
        }
        if probabilities.iter().any(|p| p.is_nan()) {
            return Err(Error::Parse("probability table is missing outcomes".into()));
        }
        Ok(ProbabilityTable { probabilities })
    }
}

/// `p_{JKL} = Tr(P_L P_K P_J U ρ̄ U† P_J P_K P_L)` with `U = U_j ⊗ U_k ⊗ U_l`,
/// normalized over the eight three-detection outcomes.
pub fn postselected_probabilities(
    rho_bar: &DensityMatrix,
    u_j: &LocalUnitary,
    u_k: &LocalUnitary,
    u_l: &LocalUnitary,
) -> Result<ProbabilityTable> {
    let expected = single_photon_basis([u_j.channel.as_str(), u_k.channel.as_str(), u_l.channel.as_str()]);
    if rho_bar.basis() != expected.as_slice() {
        return Err(Error::Dimension(
            "probabilities need rho_bar over the single-photon basis of the unitaries' channels".into(),
        ));
    }
    let u = linalg::kron(&linalg::kron(u_j.matrix(), u_k.matrix()), u_l.matrix());
    let evolved = &u * rho_bar.elements() * u.adjoint();
    let mut probabilities = [0.0; 8];
    for (i, p) in probabilities.iter_mut().enumerate() {
        *p = evolved[(i, i)].re.max(0.0);
    }
    let total: f64 = probabilities.iter().sum();
    if total < MIN_PROBABILITY {
        return Err(Error::NoPostSelectedSupport);
    }
    probabilities.iter_mut().for_each(|p| *p /= total);
    Ok(ProbabilityTable { probabilities })
}

/// Unnormalized four-fold probabilities: blue-only in i and a single-color
/// detection `J, K, L` in j, k, l, computed on the pure network output.
pub fn fourfold_probabilities(psi: &FockState) -> Result<[f64; 8]> {
    let heralded = project_state(psi, &Channel::from(CH_I), PvmOutcome::BlueOnly)?;
    let channels = [Channel::from(CH_J), Channel::from(CH_K), Channel::from(CH_L)];
    for ch in &channels {
        if !psi.channels().contains(ch) {
            return Err(Error::UnknownChannel(ch.to_string()));
        }
    }
    let norm = psi.norm_sqr();
    let mut out = [0.0; 8];
    for (idx, p) in out.iter_mut().enumerate() {
        let colors = ProbabilityTable::outcome(idx);
        let hit = heralded.filter(|k| {
            channels
                .iter()
                .zip(colors)
                .all(|(ch, c)| PvmOutcome::of(k, ch) == PvmOutcome::detected(c))
        });
        *p = hit.norm_sqr() / norm;
    }
    Ok(out)
}

/// The ten two-photon kets over `(a, b)`:
/// `|RR,0>, |R,R>, |0,RR>, |RB,0>, |R,B>, |B,R>, |0,RB>, |BB,0>, |B,B>, |0,BB>`.
pub fn two_photon_basis(a: &str, b: &str) -> Vec<OccupationState> {
    use Color::{B, R};
    let kets: [&[(&str, Color)]; 10] = [
        &[(a, R), (a, R)],
        &[(a, R), (b, R)],
        &[(b, R), (b, R)],
        &[(a, R), (a, B)],
        &[(a, R), (b, B)],
        &[(a, B), (b, R)],
        &[(b, R), (b, B)],
        &[(a, B), (a, B)],
        &[(a, B), (b, B)],
        &[(b, B), (b, B)],
    ];
    kets.iter().map(|k| OccupationState::from_photons(k.iter().copied())).collect()
}

/// Offset of `|RB,0>` (ket 4) in [`two_photon_basis`]; the block runs through ket 7.
pub const RB_BLOCK_START: usize = 3;

/// Two-photon reduced matrix after red detection in one of j, k, l.
#[derive(Clone, Debug)]
pub struct TwoPhotonReduced {
    pub red_channel: Channel,
    /// Remaining channels in canonical order, `(k, l)`, `(j, l)` or `(j, k)`.
    pub pair: (Channel, Channel),
    /// 10x10 matrix over [`two_photon_basis`], normalized on that subspace.
    pub matrix: DensityMatrix,
    /// `Tr(P_R ρ̃)`.
    pub red_probability: f64,
    /// Weight of the two-photon subspace after red conditioning, before renormalization.
    pub two_photon_weight: f64,
}

impl TwoPhotonReduced {
    /// The `{|RB,0>, |R,B>, |B,R>, |0,RB>}` block.
    pub fn block(&self) -> CMatrix {
        self.matrix.elements().view((RB_BLOCK_START, RB_BLOCK_START), (4, 4)).into_owned()
    }

    /// Weight outside the mixed-color block.
    pub fn leakage(&self) -> f64 {
        outside_block_weight(&self.matrix, &[3, 4, 5, 6])
    }
}

/// Conditions `ρ̃` (channel i already traced) on red in `red_channel`, traces it
/// out, and restricts to the ten two-photon kets of the remaining pair.
pub fn two_photon_reduced(
    rho_tilde: &DensityMatrix,
    red_channel: &str,
    forced_zero_tol: Option<f64>,
) -> Result<TwoPhotonReduced> {
    let red = Channel::from(red_channel);
    let (projected, prob) = project_color(rho_tilde, &red, PvmOutcome::RedOnly)?;
    if prob < MIN_PROBABILITY {
        return Err(Error::HeraldNeverFires(prob));
    }
    let keep: BTreeSet<Channel> = rho_tilde.channels().iter().filter(|c| **c != red).cloned().collect();
    if keep.len() != 2 {
        return Err(Error::Dimension(format!(
            "two-photon reduction needs exactly two remaining channels, found {}",
            keep.len()
        )));
    }
    let reduced = density::partial_trace(&projected.scaled(1.0 / prob), &keep)?;
    let mut it = keep.iter();
    let a = it.next().expect("two channels").clone();
    let b = it.next().expect("two channels").clone();
    let restricted = density::restrict(&reduced, &two_photon_basis(a.as_str(), b.as_str()))?;
    let weight = restricted.trace();
    if weight < MIN_PROBABILITY {
        return Err(Error::NoPostSelectedSupport);
    }
    let out = TwoPhotonReduced {
        red_channel: red,
        pair: (a, b),
        matrix: restricted.scaled(1.0 / weight),
        red_probability: prob,
        two_photon_weight: weight,
    };
    if let Some(tol) = forced_zero_tol {
        let leak = out.leakage();
        if leak > tol {
            return Err(Error::ForcedZeroViolated { weight: leak, tol });
        }
    }
    Ok(out)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::network::{apply_network, build_w_network, sfwm_state, Geometry, SourceParams, WRatios, Wavevectors};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_geometry(rng: &mut ChaCha8Rng) -> Geometry {
        let mut g = Geometry::zero(Wavevectors::default());
        for l in [&mut g.l_j, &mut g.l_jp, &mut g.l_k, &mut g.l_l] {
            *l = rng.random_range(0.0..5e-6);
        }
        g
    }

    fn network_output(ratios: WRatios, g: &Geometry, p: f64) -> FockState {
        apply_network(&sfwm_state(&SourceParams::from_pair_probability(p)).unwrap(), &build_w_network(ratios, g).unwrap())
            .unwrap()
    }

    fn random_rho8(rng: &mut ChaCha8Rng) -> DensityMatrix {
        let a = CMatrix::from_fn(8, 8, |_, _| c64(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let m = &a * a.adjoint();
        let tr = m.trace().re;
        let channels = [CH_J, CH_K, CH_L].into_iter().map(Channel::from).collect();
        DensityMatrix::new(jkl_basis(), channels, m / c64(tr, 0.0)).unwrap()
    }

    fn random_unitary(ch: &str, rng: &mut ChaCha8Rng) -> LocalUnitary {
        let mut a = || rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        LocalUnitary::from_angles(ch, a(), a(), a(), a())
    }

    fn identities() -> [LocalUnitary; 3] {
        [LocalUnitary::identity(CH_J), LocalUnitary::identity(CH_K), LocalUnitary::identity(CH_L)]
    }

    #[test]
    fn projectors_partition_every_ket() {
        let ch = Channel::from("k");
        for n_r in 0..=4u32 {
            for n_b in 0..=(4 - n_r) {
                let mut ket = OccupationState::vacuum();
                for _ in 0..n_r {
                    ket.add_photon(crate::fock::ModeLabel::new("k", Color::R));
                }
                for _ in 0..n_b {
                    ket.add_photon(crate::fock::ModeLabel::new("k", Color::B));
                }
                let hits = PvmOutcome::ALL.iter().filter(|&&o| PvmOutcome::of(&ket, &ch) == o).count();
                assert_eq!(hits, 1);
            }
        }
    }

    #[test]
    fn blue_only_rejects_mixed_channel() {
        let mut s = FockState::empty(["k"]);
        s.add("k:R,k:B".parse().unwrap(), c64(1.0, 0.0)).unwrap();
        let rho = to_density(&s).unwrap();
        let (_, p) = project_color(&rho, &"k".into(), PvmOutcome::BlueOnly).unwrap();
        assert_eq!(p, 0.0);
        let (_, p0) = project_color(&rho, &"k".into(), PvmOutcome::NullOrMixed).unwrap();
        assert_eq!(p0, 1.0);
    }

    #[test]
    fn red_only_on_single_red_keeps_state() {
        let mut s = FockState::empty(["k", "l"]);
        s.add("k:R,l:B".parse().unwrap(), c64(1.0, 0.0)).unwrap();
        let rho = to_density(&s).unwrap();
        let (out, p) = project_color(&rho, &"k".into(), PvmOutcome::RedOnly).unwrap();
        assert_eq!(p, 1.0);
        assert_eq!(out, rho);
    }

    #[test]
    fn vacuum_channel_reads_null() {
        let rho = to_density(&FockState::vacuum(["k"])).unwrap();
        let (_, p) = project_color(&rho, &"k".into(), PvmOutcome::NullOrMixed).unwrap();
        assert_eq!(p, 1.0);
        assert!(project_color(&rho, &"q".into(), PvmOutcome::RedOnly).is_err());
    }

    #[test]
    fn basis_order_matches_labels() {
        let labels: Vec<String> = jkl_basis().iter().map(|k| k.to_string()).collect();
        assert_eq!(labels[0], "j:R,k:R,l:R");
        assert_eq!(labels[1], "j:R,k:R,l:B");
        assert_eq!(labels[2], "j:R,k:B,l:R");
        assert_eq!(labels[4], "j:B,k:R,l:R");
        assert_eq!(labels[7], "j:B,k:B,l:B");
        for i in 0..8 {
            assert_eq!(ProbabilityTable::label(i), labels[i].replace(['j', 'k', 'l', ':', ','], ""));
        }
    }

    #[test]
    fn two_photon_basis_layout() {
        let b: Vec<String> = two_photon_basis("k", "l").iter().map(|k| k.to_string()).collect();
        assert_eq!(b[3], "k:R,k:B");
        assert_eq!(b[4], "k:R,l:B");
        assert_eq!(b[5], "k:B,l:R");
        assert_eq!(b[6], "l:R,l:B");
    }

    #[test]
    fn probability_csv_round_trip() {
        let t = ProbabilityTable {
            probabilities: [0.0, 1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0 / 3.0, 0.0, 0.0, 0.0],
        };
        let csv = t.to_csv();
        assert!(csv.starts_with("outcome_j,outcome_k,outcome_l,probability\n"));
        assert_eq!(ProbabilityTable::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn projection_is_idempotent() {
        let psi = network_output(WRatios::exact(), &Geometry::zero(Wavevectors::default()), 0.02);
        let rho = herald_blue_i(&psi).unwrap();
        for ch in [CH_J, CH_K, CH_L] {
            for o in PvmOutcome::ALL {
                let (once, p1) = project_color(&rho, &ch.into(), o).unwrap();
                let (twice, p2) = project_color(&once, &ch.into(), o).unwrap();
                assert!((once.elements() - twice.elements()).iter().all(|z| z.norm() < 1e-14));
                assert!((p1 - p2).abs() < 1e-14);
            }
            let total: f64 = PvmOutcome::ALL.iter().map(|&o| project_color(&rho, &ch.into(), o).unwrap().1).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_pair_herald_leaves_one_red_photon() {
        let g = Geometry::zero(Wavevectors::default());
        let mut source = SourceParams::from_pair_probability(0.02);
        source.max_pairs = 1;
        let psi = apply_network(&sfwm_state(&source).unwrap(), &build_w_network(WRatios::exact(), &g).unwrap()).unwrap();
        let rho = herald_blue_i(&psi).unwrap();
        for (k, amp) in rho.basis().iter().zip(rho.elements().diagonal().iter()) {
            if amp.re > 1e-15 {
                assert_eq!(k.total(), 1);
                assert_eq!(k.color_total(Color::R), 1);
            }
        }
        for ch in ["j:R", "k:R", "l:R"] {
            let idx = rho.index_of(&ch.parse().unwrap()).unwrap();
            assert!((rho.elements()[(idx, idx)].re - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn no_blue_in_i_never_heralds() {
        let mut s = FockState::empty([CH_I, CH_J]);
        s.add("i:R,j:B".parse().unwrap(), c64(1.0, 0.0)).unwrap();
        assert!(matches!(herald_blue_i(&s), Err(Error::HeraldNeverFires(_))));
    }

    #[test]
    fn dephased_rho_bar_is_diagonal_thirds() {
        let w = w1_density();
        let diag = w.with_elements(CMatrix::from_diagonal(&w.elements().diagonal()));
        let out = rho_bar(&diag, Some(IDEAL_ZERO_TOL)).unwrap();
        let expected = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0].map(|x: f64| x / 3.0);
        for a in 0..8 {
            for b in 0..8 {
                let e = if a == b { expected[a] } else { 0.0 };
                assert!((out.elements()[(a, b)] - c64(e, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn leakage_beyond_tolerance_is_an_error() {
        let mut s = w1_state();
        s.add("j:R,k:R,l:R".parse().unwrap(), c64(0.5, 0.0)).unwrap();
        let rho = to_density(&s.normalized().unwrap()).unwrap();
        assert!(matches!(rho_bar(&rho, Some(IDEAL_ZERO_TOL)), Err(Error::ForcedZeroViolated { .. })));
        assert!(rho_bar(&rho, None).is_ok());
    }

    #[test]
    fn swap_on_j_relabels_outcomes() {
        let [_, uk, ul] = identities();
        let t = postselected_probabilities(&w1_density(), &LocalUnitary::swap(CH_J), &uk, &ul).unwrap();
        use Color::{B, R};
        for (j, k, l) in [(B, R, B), (B, B, R), (R, R, R)] {
            assert!((t.get(j, k, l) - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((t.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_match_ket_by_ket_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let rho = random_rho8(&mut rng);
            let us = [random_unitary(CH_J, &mut rng), random_unitary(CH_K, &mut rng), random_unitary(CH_L, &mut rng)];
            let t = postselected_probabilities(&rho, &us[0], &us[1], &us[2]).unwrap();
            let bit = |idx: usize, ch: usize| idx >> (2 - ch) & 1;
            let mut oracle = [0.0; 8];
            for (out, o) in oracle.iter_mut().enumerate() {
                let amp = |ket: usize| -> Complex64 { (0..3).map(|c| us[c].matrix()[(bit(out, c), bit(ket, c))]).product() };
                let mut acc = c64(0.0, 0.0);
                for a in 0..8 {
                    for b in 0..8 {
                        acc += amp(a) * rho.elements()[(a, b)] * amp(b).conj();
                    }
                }
                *o = acc.re;
            }
            let norm: f64 = oracle.iter().sum();
            for i in 0..8 {
                assert!((t.probabilities[i] - oracle[i] / norm).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn populations_ignore_path_lengths() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let [uj, uk, ul] = identities();
        let base = {
            let psi = network_output(WRatios::exact(), &Geometry::zero(Wavevectors::default()), 0.02);
            postselected_probabilities(&rho_bar(&herald_blue_i(&psi).unwrap(), None).unwrap(), &uj, &uk, &ul).unwrap()
        };
        for _ in 0..20 {
            let psi = network_output(WRatios::exact(), &random_geometry(&mut rng), 0.02);
            let t = postselected_probabilities(&rho_bar(&herald_blue_i(&psi).unwrap(), None).unwrap(), &uj, &uk, &ul).unwrap();
            for i in 0..8 {
                assert!((t.probabilities[i] - base.probabilities[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn w1_only_two_photon_block() {
        let r = two_photon_reduced(&w1_density(), CH_J, Some(IDEAL_ZERO_TOL)).unwrap();
        let b = r.block();
        assert!((b[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!((b[(2, 2)].re - 0.5).abs() < 1e-15);
        assert!((b[(1, 2)] - c64(0.5, 0.0)).norm() < 1e-15);

        let w = w1_density();
        let dephased = w.with_elements(CMatrix::from_diagonal(&w.elements().diagonal()));
        let d = two_photon_reduced(&dephased, CH_J, Some(IDEAL_ZERO_TOL)).unwrap().block();
        assert_eq!(d[(1, 2)], c64(0.0, 0.0));
        assert!((d[(1, 1)].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn local_unitary_must_be_unitary() {
        let z = c64(0.0, 0.0);
        assert!(LocalUnitary::new(CH_J, [[c64(1.0, 0.0), c64(1.0, 0.0)], [z, c64(1.0, 0.0)]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn energy_conservation_zero_pattern(seed in any::<u64>(), p in 0.001f64..0.19) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ratios = WRatios { bs1: rng.random_range(0.05..0.95), bs2: rng.random_range(0.05..0.95), bs3: rng.random_range(0.05..0.95) };
            let psi = network_output(ratios, &random_geometry(&mut rng), p);
            let rho = rho_bar(&herald_blue_i(&psi).unwrap(), None).unwrap();
            prop_assert!(outside_block_max_element(&rho, &W1_BLOCK) < 1e-12);
        }

        #[test]
        fn tables_sum_to_one(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_rho8(&mut rng);
            let us = [random_unitary(CH_J, &mut rng), random_unitary(CH_K, &mut rng), random_unitary(CH_L, &mut rng)];
            let t = postselected_probabilities(&rho, &us[0], &us[1], &us[2]).unwrap();
            prop_assert!((t.total() - 1.0).abs() < 1e-12);
        }
    }
}
