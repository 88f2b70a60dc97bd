//! Pair source and linear-optical networks.
//!
//! A network is an ordered list of [`NetworkElement`]s compiled into a single
//! [`ModeMatrix`], the linear map `a†_in -> Σ M[out, in] a†_out` on creation
//! operators. Beamsplitters use the i-on-reflection convention and are
//! color-independent; color enters only through propagation phases `e^{+ikL}`.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Channel, Color, FockState, ModeLabel, OccupationState};
use crate::linalg::{self, c64, CMatrix};

pub const FIBER: &str = "fiber";
pub const CH_I: &str = "i";
pub const CH_J: &str = "j";
pub const CH_JP: &str = "j'";
pub const CH_K: &str = "k";
pub const CH_L: &str = "l";
pub const CH_M: &str = "m";
pub const CH_N: &str = "n";
const BS1_THROUGH: &str = "bs1-bs2";

/// Largest pair probability accepted by [`sfwm_state`].
pub const MAX_PAIR_PROBABILITY: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    /// Pair-generation amplitude; `|beta|^2` is the per-pulse pair probability.
    pub beta: Complex64,
    pub max_pairs: u8,
}

impl SourceParams {
    pub fn new(beta: Complex64) -> Self {
        SourceParams { beta, max_pairs: 2 }
    }

    pub fn from_pair_probability(p: f64) -> Self {
        Self::new(c64(p.max(0.0).sqrt(), 0.0))
    }

    pub fn pair_probability(&self) -> f64 {
        self.beta.norm_sqr()
    }
}

impl Default for SourceParams {
    fn default() -> Self {
        Self::from_pair_probability(0.02)
    }
}

/// Output of the fiber truncated at two pairs: the vacuum, `β a†_B a†_R|0>`
/// and `(β²/2)(a†_B)²(a†_R)²|0>`.
///
/// The pair terms keep their bare operator amplitudes (`β` on `|1_B 1_R>`,
/// `β²` on `|2_B 2_R>`) and the vacuum amplitude absorbs the normalization,
/// so the four-photon population is exactly `|β|^4`.
pub fn sfwm_state(params: &SourceParams) -> Result<FockState> {
    let p = params.pair_probability();
    if !(p < MAX_PAIR_PROBABILITY) {
        return Err(Error::Perturbative(p));
    }
    if params.max_pairs > 2 {
        return Err(Error::InvalidParameter(format!(
            "max_pairs = {} (at most 2 pairs fit the truncation)",
            params.max_pairs
        )));
    }
    let blue = ModeLabel::new(FIBER, Color::B);
    let red = ModeLabel::new(FIBER, Color::R);

    // (operator coefficient, pair count); the ket amplitude is coefficient × Π sqrt(n!).
    let beta = params.beta;
    let terms = [(beta, 1usize), (beta * beta * 0.5, 2usize)];
    let mut state = FockState::empty([FIBER]);
    let mut pair_weight = 0.0;
    for &(coeff, pairs) in terms.iter().take(params.max_pairs as usize) {
        let mut ket = OccupationState::vacuum();
        for _ in 0..pairs {
            ket.add_photon(blue.clone());
            ket.add_photon(red.clone());
        }
        let amp = coeff * ket.bosonic_norm();
        pair_weight += amp.norm_sqr();
        state.add(ket, amp)?;
    }
    state.add(OccupationState::vacuum(), c64((1.0 - pair_weight).sqrt(), 0.0))?;
    state.prune();
    Ok(state)
}

/// Free-space wavevectors `2π/λ` of the two colors, rad/m.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wavevectors {
    pub k_r: f64,
    pub k_b: f64,
}

impl Wavevectors {
    pub fn from_wavelengths_m(lambda_r: f64, lambda_b: f64) -> Self {
        Wavevectors {
            k_r: 2.0 * PI / lambda_r,
            k_b: 2.0 * PI / lambda_b,
        }
    }

    pub fn of(&self, color: Color) -> f64 {
        match color {
            Color::R => self.k_r,
            Color::B => self.k_b,
        }
    }
}

impl Default for Wavevectors {
    fn default() -> Self {
        Self::from_wavelengths_m(975e-9, 694e-9)
    }
}

/// Path lengths (m), wavevectors (rad/m) and tomography phase settings (rad).
///
/// `l_j`, `l_jp`, `l_k`, `l_l` are the generation-network segments after BS2
/// and BS3; `l_m`, `l_n` are the outer tomography arms and `l_r`, `l_b` the
/// color-separated Sagnac paths on channel `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub l_j: f64,
    pub l_jp: f64,
    pub l_k: f64,
    pub l_l: f64,
    pub l_m: f64,
    pub l_n: f64,
    pub l_r: f64,
    pub l_b: f64,
    pub k_r: f64,
    pub k_b: f64,
    pub phi_r: f64,
    pub phi_b: f64,
}

impl Geometry {
    /// All lengths and phases zero.
    pub fn zero(k: Wavevectors) -> Self {
        Geometry {
            l_j: 0.0,
            l_jp: 0.0,
            l_k: 0.0,
            l_l: 0.0,
            l_m: 0.0,
            l_n: 0.0,
            l_r: 0.0,
            l_b: 0.0,
            k_r: k.k_r,
            k_b: k.k_b,
            phi_r: 0.0,
            phi_b: 0.0,
        }
    }

    pub fn wavevectors(&self) -> Wavevectors {
        Wavevectors {
            k_r: self.k_r,
            k_b: self.k_b,
        }
    }

    pub fn with_phases(mut self, phi_r: f64, phi_b: f64) -> Self {
        self.phi_r = phi_r;
        self.phi_b = phi_b;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("l_j", self.l_j),
            ("l_jp", self.l_jp),
            ("l_k", self.l_k),
            ("l_l", self.l_l),
            ("l_m", self.l_m),
            ("l_n", self.l_n),
            ("l_r", self.l_r),
            ("l_b", self.l_b),
        ];
        for (name, v) in lengths {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be a finite length >= 0")));
            }
        }
        if !(self.k_r > 0.0 && self.k_b > 0.0) {
            return Err(Error::InvalidParameter("wavevectors must be positive".into()));
        }
        Ok(())
    }
}

/// One beamsplitter. `input` transmits into `transmit` and reflects (with a
/// factor `i`) into `reflect`; the optional `second_input` does the opposite.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamsplitterSpec {
    pub input: Channel,
    pub second_input: Option<Channel>,
    pub reflect: Channel,
    pub transmit: Channel,
    pub r: f64,
    pub t: f64,
    /// Propagation length after the splitter on the reflected output.
    pub reflect_length: f64,
    pub transmit_length: f64,
}

impl BeamsplitterSpec {
    /// `reflectance` is the power ratio `r²`.
    pub fn new(
        input: impl Into<Channel>,
        reflect: impl Into<Channel>,
        transmit: impl Into<Channel>,
        reflectance: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&reflectance) {
            return Err(Error::InvalidParameter(format!(
                "reflectance must be in [0, 1], got {reflectance}"
            )));
        }
        Ok(BeamsplitterSpec {
            input: input.into(),
            second_input: None,
            reflect: reflect.into(),
            transmit: transmit.into(),
            r: reflectance.sqrt(),
            t: (1.0 - reflectance).sqrt(),
            reflect_length: 0.0,
            transmit_length: 0.0,
        })
    }

    pub fn with_second_input(mut self, ch: impl Into<Channel>) -> Self {
        self.second_input = Some(ch.into());
        self
    }

    pub fn with_lengths(mut self, reflect_length: f64, transmit_length: f64) -> Self {
        self.reflect_length = reflect_length;
        self.transmit_length = transmit_length;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if (self.r * self.r + self.t * self.t - 1.0).abs() > 1e-12 || self.r < 0.0 || self.t < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beamsplitter r = {}, t = {} violate r² + t² = 1",
                self.r, self.t
            )));
        }
        if self.reflect == self.transmit {
            return Err(Error::InvalidParameter("beamsplitter outputs must differ".into()));
        }
        Ok(())
    }
}

/// Linear map on creation operators: `a†_in -> Σ_out entries[(out, in)] a†_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeMatrix {
    inputs: Vec<ModeLabel>,
    outputs: Vec<ModeLabel>,
    entries: CMatrix,
}

impl ModeMatrix {
    pub fn new(inputs: Vec<ModeLabel>, outputs: Vec<ModeLabel>, entries: CMatrix) -> Result<Self> {
        if entries.nrows() != outputs.len() || entries.ncols() != inputs.len() {
            return Err(Error::Dimension(format!(
                "{}x{} entries for {} outputs and {} inputs",
                entries.nrows(),
                entries.ncols(),
                outputs.len(),
                inputs.len()
            )));
        }
        for list in [&inputs, &outputs] {
            let unique: BTreeSet<&ModeLabel> = list.iter().collect();
            if unique.len() != list.len() {
                return Err(Error::InvalidParameter("repeated mode in mode matrix".into()));
            }
        }
        Ok(ModeMatrix {
            inputs,
            outputs,
            entries,
        })
    }

    pub fn identity(modes: &[ModeLabel]) -> Self {
        let n = modes.len();
        ModeMatrix {
            inputs: modes.to_vec(),
            outputs: modes.to_vec(),
            entries: CMatrix::identity(n, n),
        }
    }

    pub fn inputs(&self) -> &[ModeLabel] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[ModeLabel] {
        &self.outputs
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    /// `M[out, in]`; zero when either mode is absent.
    pub fn entry(&self, out: &ModeLabel, input: &ModeLabel) -> Complex64 {
        match (
            self.outputs.iter().position(|m| m == out),
            self.inputs.iter().position(|m| m == input),
        ) {
            (Some(o), Some(i)) => self.entries[(o, i)],
            _ => c64(0.0, 0.0),
        }
    }

    /// `max |M†M - I|`; also checks `MM†` when the matrix is square.
    pub fn unitarity_defect(&self) -> f64 {
        let mut d = linalg::isometry_defect(&self.entries);
        if self.inputs.len() == self.outputs.len() {
            d = d.max(linalg::isometry_defect(&self.entries.adjoint()));
        }
        d
    }

    /// True when some entry maps a red mode onto a blue one or back.
    pub fn couples_colors(&self) -> bool {
        self.outputs.iter().enumerate().any(|(o, om)| {
            self.inputs
                .iter()
                .enumerate()
                .any(|(i, im)| om.color != im.color && self.entries[(o, i)] != c64(0.0, 0.0))
        })
    }

    /// Applies `self` first, then `next`. Outputs of `self` that `next` does not
    /// consume pass through unchanged; inputs of `next` not fed by `self` are vacuum ports.
    pub fn then(&self, next: &ModeMatrix) -> Result<ModeMatrix> {
        let consumed: BTreeSet<&ModeLabel> = next.inputs.iter().collect();
        let passthrough: Vec<ModeLabel> = self
            .outputs
            .iter()
            .filter(|m| !consumed.contains(m))
            .cloned()
            .collect();
        if let Some(clash) = passthrough.iter().find(|m| next.outputs.contains(m)) {
            return Err(Error::InvalidParameter(format!(
                "mode {clash} is both passed through and produced by the next element"
            )));
        }
        let mut outputs = next.outputs.clone();
        outputs.extend(passthrough.iter().cloned());

        let self_row: BTreeMap<&ModeLabel, usize> =
            self.outputs.iter().enumerate().map(|(i, m)| (m, i)).collect();
        let mut entries = CMatrix::zeros(outputs.len(), self.inputs.len());
        for a in 0..self.inputs.len() {
            for (o, _) in next.outputs.iter().enumerate() {
                let mut acc = c64(0.0, 0.0);
                for (x, xm) in next.inputs.iter().enumerate() {
                    if let Some(&row) = self_row.get(xm) {
                        acc += next.entries[(o, x)] * self.entries[(row, a)];
                    }
                }
                entries[(o, a)] = acc;
            }
            for (p, pm) in passthrough.iter().enumerate() {
                entries[(next.outputs.len() + p, a)] = self.entries[(self_row[pm], a)];
            }
        }
        Ok(ModeMatrix {
            inputs: self.inputs.clone(),
            outputs,
            entries,
        })
    }

    pub fn output_channels(&self) -> BTreeSet<Channel> {
        self.outputs.iter().map(|m| m.channel.clone()).collect()
    }
}

fn modes_of(channels: &[&Channel]) -> Vec<ModeLabel> {
    // All red copies first, then all blue ones, so the matrices are block diagonal in color.
    Color::BOTH
        .iter()
        .flat_map(|&color| channels.iter().map(move |c| ModeLabel { channel: (*c).clone(), color }))
        .collect()
}

/// Per-color 2x2 blocks: transmitted `t e^{ikL_t}`, reflected `i r e^{ikL_r}`.
pub fn beamsplitter_mode_matrix(spec: &BeamsplitterSpec, k: Wavevectors) -> Result<ModeMatrix> {
    spec.validate()?;
    let mut ins = vec![&spec.input];
    if let Some(second) = &spec.second_input {
        ins.push(second);
    }
    let outs = [&spec.transmit, &spec.reflect];
    let inputs = modes_of(&ins);
    let outputs = modes_of(&outs);
    let mut entries = CMatrix::zeros(outputs.len(), inputs.len());
    let i_unit = c64(0.0, 1.0);
    for (ci, &color) in Color::BOTH.iter().enumerate() {
        let kc = k.of(color);
        let prop_t = Complex64::from_polar(1.0, kc * spec.transmit_length);
        let prop_r = Complex64::from_polar(1.0, kc * spec.reflect_length);
        let row_t = 2 * ci;
        let row_r = 2 * ci + 1;
        let col1 = ins.len() * ci;
        entries[(row_t, col1)] = prop_t * spec.t;
        entries[(row_r, col1)] = prop_r * i_unit * spec.r;
        if ins.len() == 2 {
            entries[(row_t, col1 + 1)] = prop_t * i_unit * spec.r;
            entries[(row_r, col1 + 1)] = prop_r * spec.t;
        }
    }
    ModeMatrix::new(inputs, outputs, entries)
}

fn diagonal_phase(channel: &Channel, phase_r: f64, phase_b: f64) -> ModeMatrix {
    let modes = modes_of(&[channel]);
    let mut entries = CMatrix::zeros(2, 2);
    entries[(0, 0)] = Complex64::from_polar(1.0, phase_r);
    entries[(1, 1)] = Complex64::from_polar(1.0, phase_b);
    ModeMatrix {
        inputs: modes.clone(),
        outputs: modes,
        entries,
    }
}

/// An element of a network config, applied in list order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum NetworkElement {
    Beamsplitter {
        input: Channel,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        second_input: Option<Channel>,
        reflect: Channel,
        transmit: Channel,
        /// Power reflectance `r²`.
        reflectance: f64,
        #[serde(default)]
        reflect_length_m: f64,
        #[serde(default)]
        transmit_length_m: f64,
    },
    /// Propagation over `length_m` plus a color-independent phase.
    Phase {
        channel: Channel,
        #[serde(default)]
        length_m: f64,
        #[serde(default)]
        phase_rad: f64,
    },
    /// Color-separated arm: red and blue see their own lengths and phases.
    SagnacColorPhase {
        channel: Channel,
        #[serde(default)]
        length_r_m: f64,
        #[serde(default)]
        length_b_m: f64,
        #[serde(default)]
        phase_r_rad: f64,
        #[serde(default)]
        phase_b_rad: f64,
    },
}

impl NetworkElement {
    pub fn mode_matrix(&self, k: Wavevectors) -> Result<ModeMatrix> {
        match self {
            NetworkElement::Beamsplitter {
                input,
                second_input,
                reflect,
                transmit,
                reflectance,
                reflect_length_m,
                transmit_length_m,
            } => {
                let mut spec = BeamsplitterSpec::new(input.clone(), reflect.clone(), transmit.clone(), *reflectance)?
                    .with_lengths(*reflect_length_m, *transmit_length_m);
                if let Some(s) = second_input {
                    spec = spec.with_second_input(s.clone());
                }
                beamsplitter_mode_matrix(&spec, k)
            }
            NetworkElement::Phase {
                channel,
                length_m,
                phase_rad,
            } => Ok(diagonal_phase(
                channel,
                k.k_r * length_m + phase_rad,
                k.k_b * length_m + phase_rad,
            )),
            NetworkElement::SagnacColorPhase {
                channel,
                length_r_m,
                length_b_m,
                phase_r_rad,
                phase_b_rad,
            } => Ok(diagonal_phase(
                channel,
                k.k_r * length_r_m + phase_r_rad,
                k.k_b * length_b_m + phase_b_rad,
            )),
        }
    }
}

/// Folds `elements` in order starting from the identity on `source` channels.
pub fn compile_network(source: &[&str], elements: &[NetworkElement], k: Wavevectors) -> Result<ModeMatrix> {
    let channels: Vec<Channel> = source.iter().map(|s| Channel::from(*s)).collect();
    let refs: Vec<&Channel> = channels.iter().collect();
    let mut m = ModeMatrix::identity(&modes_of(&refs));
    for el in elements {
        m = m.then(&el.mode_matrix(k)?)?;
    }
    Ok(m)
}

/// Substitutes every creation operator through `matrix` and re-expands into Fock amplitudes.
pub fn apply_network(state: &FockState, matrix: &ModeMatrix) -> Result<FockState> {
    let column: BTreeMap<&ModeLabel, Vec<(&ModeLabel, Complex64)>> = matrix
        .inputs
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let col = matrix
                .outputs
                .iter()
                .enumerate()
                .filter(|(o, _)| matrix.entries[(*o, i)] != c64(0.0, 0.0))
                .map(|(o, om)| (om, matrix.entries[(o, i)]))
                .collect();
            (m, col)
        })
        .collect();

    let mut out: BTreeMap<OccupationState, Complex64> = BTreeMap::new();
    for (ket, &amp) in state.iter() {
        // |n> = Π (a†)^n / sqrt(n!) |0>; expand the operator monomial first.
        let mut partial: BTreeMap<OccupationState, Complex64> = BTreeMap::new();
        partial.insert(OccupationState::vacuum(), amp / ket.bosonic_norm());
        for (mode, n) in ket.modes() {
            let col = column
                .get(mode)
                .ok_or_else(|| Error::UnroutedMode(mode.to_string()))?;
            for _ in 0..n {
                let mut next = BTreeMap::new();
                for (occ, c) in &partial {
                    for (om, m) in col {
                        let mut grown = occ.clone();
                        grown.add_photon((*om).clone());
                        *next.entry(grown).or_insert(c64(0.0, 0.0)) += c * m;
                    }
                }
                partial = next;
            }
        }
        for (occ, c) in partial {
            // (a†)^k |0> = sqrt(k!) |k>
            let a = c * occ.bosonic_norm();
            *out.entry(occ).or_insert(c64(0.0, 0.0)) += a;
        }
    }
    Ok(FockState::from_parts(out, matrix.output_channels(), state.max_photons()))
}

/// Power reflectances of BS1, BS2, BS3 in the generation network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WRatios {
    pub bs1: f64,
    pub bs2: f64,
    pub bs3: f64,
}

impl WRatios {
    /// 1/4, 1/3, 1/2: every photon reaches each of i, j, k, l with probability 1/4.
    pub fn exact() -> Self {
        WRatios {
            bs1: 0.25,
            bs2: 1.0 / 3.0,
            bs3: 0.5,
        }
    }

    /// The rounded catalogue values 25/75, 33/67, 50/50.
    pub fn nominal() -> Self {
        WRatios {
            bs1: 0.25,
            bs2: 0.33,
            bs3: 0.5,
        }
    }
}

impl Default for WRatios {
    fn default() -> Self {
        Self::exact()
    }
}

/// fiber -> BS1 (reflect i) -> BS2 (reflect j over `l_j`, transmit j' over `l_jp`)
/// -> BS3 (reflect k over `l_k`, transmit l over `l_l`).
pub fn w_network_elements(ratios: WRatios, geometry: &Geometry) -> Vec<NetworkElement> {
    vec![
        NetworkElement::Beamsplitter {
            input: FIBER.into(),
            second_input: None,
            reflect: CH_I.into(),
            transmit: BS1_THROUGH.into(),
            reflectance: ratios.bs1,
            reflect_length_m: 0.0,
            transmit_length_m: 0.0,
        },
        NetworkElement::Beamsplitter {
            input: BS1_THROUGH.into(),
            second_input: None,
            reflect: CH_J.into(),
            transmit: CH_JP.into(),
            reflectance: ratios.bs2,
            reflect_length_m: geometry.l_j,
            transmit_length_m: geometry.l_jp,
        },
        NetworkElement::Beamsplitter {
            input: CH_JP.into(),
            second_input: None,
            reflect: CH_K.into(),
            transmit: CH_L.into(),
            reflectance: ratios.bs3,
            reflect_length_m: geometry.l_k,
            transmit_length_m: geometry.l_l,
        },
    ]
}

pub fn build_w_network(ratios: WRatios, geometry: &Geometry) -> Result<ModeMatrix> {
    geometry.validate()?;
    compile_network(&[FIBER], &w_network_elements(ratios, geometry), geometry.wavevectors())
}

/// Nested interferometer mixing `first` and `second` into `m` and `n`: outer arms
/// `l_m` on `first` and `l_n` on `second`, the color-separated Sagnac on `second`,
/// then a 50/50 beamsplitter.
pub fn tomography_elements(first: &str, second: &str, geometry: &Geometry) -> Vec<NetworkElement> {
    vec![
        NetworkElement::Phase {
            channel: first.into(),
            length_m: geometry.l_m,
            phase_rad: 0.0,
        },
        NetworkElement::Phase {
            channel: second.into(),
            length_m: geometry.l_n,
            phase_rad: 0.0,
        },
        NetworkElement::SagnacColorPhase {
            channel: second.into(),
            length_r_m: geometry.l_r,
            length_b_m: geometry.l_b,
            phase_r_rad: geometry.phi_r,
            phase_b_rad: geometry.phi_b,
        },
        NetworkElement::Beamsplitter {
            input: first.into(),
            second_input: Some(second.into()),
            reflect: CH_N.into(),
            transmit: CH_M.into(),
            reflectance: 0.5,
            reflect_length_m: 0.0,
            transmit_length_m: 0.0,
        },
    ]
}

/// Single-photon mode matrix of the tomography interferometer from (k, l) to (m, n).
pub fn build_tomography_network(geometry: &Geometry) -> Result<ModeMatrix> {
    geometry.validate()?;
    compile_network(&[CH_K, CH_L], &tomography_elements(CH_K, CH_L, geometry), geometry.wavevectors())
}

/// `S^c(φ_c)`: rows (m, n), columns (k, l).
pub fn color_scattering_matrix(geometry: &Geometry, color: Color) -> [[Complex64; 2]; 2] {
    let (k, l_c, phi) = match color {
        Color::R => (geometry.k_r, geometry.l_r, geometry.phi_r),
        Color::B => (geometry.k_b, geometry.l_b, geometry.phi_b),
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = c64(0.0, 1.0);
    let arm_m = Complex64::from_polar(s, k * geometry.l_m);
    let arm_n = Complex64::from_polar(s, k * (geometry.l_n + l_c) + phi);
    [[arm_m, i * arm_n], [i * arm_m, arm_n]]
}

/// Two-photon scattering matrix `S(φ_R, φ_B)` over `{|RB,0>, |R,B>, |B,R>, |0,RB>}`,
/// written out entry by entry.
pub fn tomography_s_matrix(geometry: &Geometry) -> CMatrix {
    let r = color_scattering_matrix(geometry, Color::R);
    let b = color_scattering_matrix(geometry, Color::B);
    let (r11, r12, r21, r22) = (r[0][0], r[0][1], r[1][0], r[1][1]);
    let (b11, b12, b21, b22) = (b[0][0], b[0][1], b[1][0], b[1][1]);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            r11 * b11, r11 * b12, r12 * b11, r12 * b12,
            r11 * b21, r11 * b22, r12 * b21, r12 * b22,
            r21 * b11, r21 * b12, r22 * b11, r22 * b12,
            r21 * b21, r21 * b22, r22 * b21, r22 * b22,
        ],
    )
}

/// Static phase of the outer interferometer, `(k_R−k_B)(L_m−L_n) − (k_R L_R − k_B L_B)`.
pub fn xi_minus(geometry: &Geometry) -> f64 {
    (geometry.k_r - geometry.k_b) * (geometry.l_m - geometry.l_n)
        - (geometry.k_r * geometry.l_r - geometry.k_b * geometry.l_b)
}

/// `(k_R+k_B)(L_m−L_n) − (k_R L_R + k_B L_B)`.
pub fn xi_plus(geometry: &Geometry) -> f64 {
    (geometry.k_r + geometry.k_b) * (geometry.l_m - geometry.l_n)
        - (geometry.k_r * geometry.l_r + geometry.k_b * geometry.l_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{herald_blue_i, rho_bar, W1_BLOCK};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn balanced_splitter_matches_convention() {
        let spec = BeamsplitterSpec::new("a", "d", "c", 0.5).unwrap().with_second_input("b");
        let m = beamsplitter_mode_matrix(&spec, Wavevectors::default()).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for color in Color::BOTH {
            let a = ModeLabel::new("a", color);
            let b = ModeLabel::new("b", color);
            let c = ModeLabel::new("c", color);
            let d = ModeLabel::new("d", color);
            assert!(close(m.entry(&c, &a), c64(s, 0.0), 1e-15));
            assert!(close(m.entry(&d, &a), c64(0.0, s), 1e-15));
            assert!(close(m.entry(&c, &b), c64(0.0, s), 1e-15));
            assert!(close(m.entry(&d, &b), c64(s, 0.0), 1e-15));
        }
        assert!(m.unitarity_defect() < 1e-12);
        assert!(!m.couples_colors());
    }

    #[test]
    fn unbalanced_splitter_magnitudes() {
        let spec = BeamsplitterSpec::new("a", "r", "t", 0.25).unwrap();
        let m = beamsplitter_mode_matrix(&spec, Wavevectors::default()).unwrap();
        let a = ModeLabel::new("a", Color::R);
        assert!((m.entry(&ModeLabel::new("r", Color::R), &a).norm() - 0.5).abs() < 1e-15);
        assert!((m.entry(&ModeLabel::new("t", Color::R), &a).norm() - 0.75f64.sqrt()).abs() < 1e-15);
        assert!(m.unitarity_defect() < 1e-12);
    }

    #[test]
    fn fully_transmitting_splitter_is_propagation() {
        let k = Wavevectors::default();
        let spec = BeamsplitterSpec::new("a", "r", "t", 0.0).unwrap().with_lengths(0.0, 1.3e-6);
        let m = beamsplitter_mode_matrix(&spec, k).unwrap();
        for color in Color::BOTH {
            let got = m.entry(&ModeLabel::new("t", color), &ModeLabel::new("a", color));
            assert!(close(got, Complex64::from_polar(1.0, k.of(color) * 1.3e-6), 1e-15));
            assert_eq!(m.entry(&ModeLabel::new("r", color), &ModeLabel::new("a", color)).norm(), 0.0);
        }
    }

    #[test]
    fn reflectance_out_of_range_is_rejected() {
        let err = BeamsplitterSpec::new("a", "r", "t", 1.5).unwrap_err();
        assert!(err.to_string().contains("reflectance"));
    }

    #[test]
    fn source_rejects_large_beta() {
        let params = SourceParams::from_pair_probability(0.25);
        assert!(matches!(sfwm_state(&params), Err(Error::Perturbative(_))));
    }

    #[test]
    fn xi_minus_special_cases() {
        let mut g = Geometry::zero(Wavevectors::default());
        g.l_m = 2e-6;
        g.l_n = 2e-6;
        assert_eq!(xi_minus(&g), 0.0);
        let mut g = Geometry::zero(Wavevectors { k_r: 7.0e6, k_b: 7.0e6 });
        g.l_r = 3e-6;
        g.l_b = 1e-6;
        g.l_m = 5e-6;
        assert!((xi_minus(&g) - (-7.0e6 * 2e-6)).abs() < 1e-12);
    }

    fn ket(s: &str) -> OccupationState {
        s.parse().unwrap()
    }

    fn single(ket_str: &str, channels: &[&str]) -> FockState {
        let mut s = FockState::empty(channels.iter().copied());
        s.add(ket(ket_str), c64(1.0, 0.0)).unwrap();
        s
    }

    fn random_geometry(rng: &mut ChaCha8Rng) -> Geometry {
        let mut g = Geometry::zero(Wavevectors::default());
        for l in [&mut g.l_j, &mut g.l_jp, &mut g.l_k, &mut g.l_l, &mut g.l_m, &mut g.l_n, &mut g.l_r, &mut g.l_b] {
            *l = rng.random_range(0.0..5e-6);
        }
        g.with_phases(rng.random_range(-PI..PI), rng.random_range(-PI..PI))
    }

    fn wrap(x: f64) -> f64 {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn source_amplitudes() {
        let vac = sfwm_state(&SourceParams::new(c64(0.0, 0.0))).unwrap();
        assert_eq!(vac.len(), 1);
        assert_eq!(vac.amplitude(&OccupationState::vacuum()), c64(1.0, 0.0));

        let s = sfwm_state(&SourceParams::new(c64(0.1, 0.0))).unwrap();
        // (β²/2)(a†_B)²(a†_R)²|0> = (β²/2)·sqrt(2!)·sqrt(2!)|2_B 2_R>.
        let oracle = 0.1f64.powi(2) / 2.0 * 2f64.sqrt() * 2f64.sqrt();
        assert!((s.amplitude(&ket("fiber:B,fiber:B,fiber:R,fiber:R")).re - oracle).abs() < 1e-15);
        assert!((oracle - 0.01).abs() < 1e-15);
        assert!((s.amplitude(&ket("fiber:B,fiber:R")).re - 0.1).abs() < 1e-15);
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_and_single_photon_routing() {
        let psi = sfwm_state(&SourceParams::default()).unwrap();
        let fiber = [ModeLabel::new(FIBER, Color::R), ModeLabel::new(FIBER, Color::B)];
        assert_eq!(apply_network(&psi, &ModeMatrix::identity(&fiber)).unwrap(), psi);

        let spec = BeamsplitterSpec::new("a", "r", "t", 0.5).unwrap();
        let m = beamsplitter_mode_matrix(&spec, Wavevectors::default()).unwrap();
        let out = apply_network(&single("a:R", &["a"]), &m).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(out.amplitude(&ket("t:R")), c64(s, 0.0), 1e-15));
        assert!(close(out.amplitude(&ket("r:R")), c64(0.0, s), 1e-15));

        let err = apply_network(&single("q:R", &["q"]), &m).unwrap_err();
        assert!(matches!(err, Error::UnroutedMode(_)));
    }

    #[test]
    fn hong_ou_mandel_dip() {
        let spec = BeamsplitterSpec::new("a", "d", "c", 0.5).unwrap().with_second_input("b");
        let m = beamsplitter_mode_matrix(&spec, Wavevectors::default()).unwrap();
        for color in ["R", "B"] {
            let out = apply_network(&single(&format!("a:{color},b:{color}"), &["a", "b"]), &m).unwrap();
            assert!(out.amplitude(&ket(&format!("c:{color},d:{color}"))).norm() < 1e-14);
            assert!((out.norm() - 1.0).abs() < 1e-12);
        }
        // Distinguishable colors do not bunch.
        let out = apply_network(&single("a:R,b:B", &["a", "b"]), &m).unwrap();
        assert!((out.amplitude(&ket("c:R,d:B")).norm() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn w_prefactor_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let ratios = WRatios {
                bs1: rng.random_range(0.05..0.95),
                bs2: rng.random_range(0.05..0.95),
                bs3: rng.random_range(0.05..0.95),
            };
            let beta = rng.random_range(0.01..0.4);
            let g = random_geometry(&mut rng);
            let psi = apply_network(
                &sfwm_state(&SourceParams::new(c64(beta, 0.0))).unwrap(),
                &build_w_network(ratios, &g).unwrap(),
            )
            .unwrap();
            let rt = |r2: f64| (r2.sqrt(), (1.0 - r2).sqrt());
            let ((ri, ti), (rj, tj), (rk, tk)) = (rt(ratios.bs1), rt(ratios.bs2), rt(ratios.bs3));
            let oracle = 2.0 * ri * ti.powi(3) * rj * tj.powi(2) * rk * tk * beta * beta;
            for w in ["j:R,k:R,l:B", "j:R,k:B,l:R", "j:B,k:R,l:R"] {
                let amp = psi.amplitude(&ket(&format!("i:B,{w}")));
                assert!((amp.norm() - oracle).abs() < 1e-14, "{w}: {} vs {oracle}", amp.norm());
            }
        }
    }

    #[test]
    fn w_relative_phases_follow_path_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let g = random_geometry(&mut rng);
            let psi = apply_network(&sfwm_state(&SourceParams::default()).unwrap(), &build_w_network(WRatios::exact(), &g).unwrap())
                .unwrap();
            let rho = rho_bar(&herald_blue_i(&psi).unwrap(), Some(1e-12)).unwrap();
            let [rrb, rbr, brr] = W1_BLOCK;
            let m = rho.elements();
            let dk = g.k_b - g.k_r;
            // Phases are the conjugates of the e^{-ikL} form under the e^{+ikL} convention.
            let expected_rbr = dk * (g.l_k - g.l_l);
            let expected_brr = dk * (g.l_j - g.l_jp - g.l_l);
            assert!(wrap(m[(rbr, rrb)].arg() - expected_rbr).abs() < 1e-10);
            assert!(wrap(m[(brr, rrb)].arg() - expected_brr).abs() < 1e-10);
            for idx in W1_BLOCK {
                assert!((m[(idx, idx)].re - 1.0 / 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn s_matrix_three_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs = ["k:R,k:B", "k:R,l:B", "k:B,l:R", "l:R,l:B"];
        let outputs = ["m:R,m:B", "m:R,n:B", "m:B,n:R", "n:R,n:B"];
        for n in 0..20 {
            let g = if n == 0 { Geometry::zero(Wavevectors::default()) } else { random_geometry(&mut rng) };
            let printed = tomography_s_matrix(&g);
            let to_matrix = |s: [[Complex64; 2]; 2]| CMatrix::from_fn(2, 2, |a, b| s[a][b]);
            let product = linalg::kron(
                &to_matrix(color_scattering_matrix(&g, Color::R)),
                &to_matrix(color_scattering_matrix(&g, Color::B)),
            );
            let net = build_tomography_network(&g).unwrap();
            for (col, input) in inputs.iter().enumerate() {
                let out = apply_network(&single(input, &[CH_K, CH_L]), &net).unwrap();
                for (row, output) in outputs.iter().enumerate() {
                    let fock = out.amplitude(&ket(output));
                    assert!(close(printed[(row, col)], product[(row, col)], 1e-14));
                    assert!(close(printed[(row, col)], fock, 1e-12), "({row},{col}) {} vs {fock}", printed[(row, col)]);
                }
            }
            if n == 0 {
                assert!(printed.iter().all(|z| (z.norm() - 0.5).abs() < 1e-15));
                assert!(close(printed[(0, 0)], c64(0.5, 0.0), 1e-15));
                assert!(close(printed[(3, 0)], c64(-0.5, 0.0), 1e-15));
            }
        }
    }

    #[test]
    fn s_matrix_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let s = tomography_s_matrix(&random_geometry(&mut rng));
            assert!(linalg::isometry_defect(&s) < 1e-12);
        }
    }

    #[test]
    fn xi_minus_hand_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let g = random_geometry(&mut rng);
            let hand = g.k_r * g.l_m - g.k_r * g.l_n - g.k_b * g.l_m + g.k_b * g.l_n - g.k_r * g.l_r + g.k_b * g.l_b;
            assert!((xi_minus(&g) - hand).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn network_preserves_norm_number_and_color(seed in any::<u64>(), p in 0.0f64..0.19) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let ratios = WRatios { bs1: rng.random_range(0.0..1.0), bs2: rng.random_range(0.0..1.0), bs3: rng.random_range(0.0..1.0) };
            let g = random_geometry(&mut rng);
            let net = build_w_network(ratios, &g).unwrap();
            prop_assert!(net.unitarity_defect() < 1e-10);
            prop_assert!(!net.couples_colors());
            let psi = sfwm_state(&SourceParams::from_pair_probability(p)).unwrap();
            let out = apply_network(&psi, &net).unwrap();
            prop_assert!((out.norm() - psi.norm()).abs() < 1e-12);
            for total in 0..=4usize {
                for reds in 0..=total {
                    let w_in: f64 = psi.iter().filter(|(k, _)| k.total() == total && k.color_total(Color::R) == reds).map(|(_, a)| a.norm_sqr()).sum();
                    let w_out: f64 = out.iter().filter(|(k, _)| k.total() == total && k.color_total(Color::R) == reds).map(|(_, a)| a.norm_sqr()).sum();
                    prop_assert!((w_in - w_out).abs() < 1e-12);
                }
            }
        }
    }
}
