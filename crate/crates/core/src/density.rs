//! Density matrices over an explicit, ordered ket basis.

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{Channel, FockState, OccupationState};
use crate::linalg::{self, CMatrix, HERMITIAN_TOL};

/// Complex square matrix over a declared ordered basis of occupation kets.
///
/// Construction only enforces shape, basis uniqueness and Hermiticity; the
/// PSD and trace conditions are checked by [`DensityMatrix::validate_physical`]
/// because linear-inversion estimates are allowed to be slightly unphysical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "DensityMatrixWire", try_from = "DensityMatrixWire")]
pub struct DensityMatrix {
    basis: Vec<OccupationState>,
    channels: BTreeSet<Channel>,
    elements: CMatrix,
}

impl DensityMatrix {
    pub fn new(
        basis: Vec<OccupationState>,
        channels: BTreeSet<Channel>,
        elements: CMatrix,
    ) -> Result<Self> {
        let n = basis.len();
        if elements.nrows() != n || elements.ncols() != n {
            return Err(Error::Dimension(format!(
                "basis has {n} kets but matrix is {}x{}",
                elements.nrows(),
                elements.ncols()
            )));
        }
        let mut seen = BTreeSet::new();
        for ket in &basis {
            if !seen.insert(ket) {
                return Err(Error::DuplicateKet(ket.to_string()));
            }
            for ch in ket.channels() {
                if !channels.contains(&ch) {
                    return Err(Error::UnknownChannel(ch.to_string()));
                }
            }
        }
        let defect = linalg::max_hermitian_defect(&elements);
        if defect > HERMITIAN_TOL {
            return Err(Error::UnphysicalInput(format!(
                "matrix is not Hermitian (defect {defect:e})"
            )));
        }
        Ok(DensityMatrix {
            basis,
            channels,
            elements,
        })
    }

    /// Basis kets are taken from strings such as `j:R,k:R,l:B`; channels are
    /// the union of those appearing in the basis.
    pub fn from_kets(kets: &[&str], elements: CMatrix) -> Result<Self> {
        let basis: Vec<OccupationState> =
            kets.iter().map(|k| k.parse()).collect::<Result<_>>()?;
        let channels = basis.iter().flat_map(|k| k.channels()).collect();
        Self::new(basis, channels, elements)
    }

    pub fn basis(&self) -> &[OccupationState] {
        &self.basis
    }

    pub fn channels(&self) -> &BTreeSet<Channel> {
        &self.channels
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, ket: &OccupationState) -> Option<usize> {
        self.basis.iter().position(|k| k == ket)
    }

    /// `<a|rho|b>`; zero when either ket is outside the basis.
    pub fn element(&self, a: &OccupationState, b: &OccupationState) -> Complex64 {
        match (self.index_of(a), self.index_of(b)) {
            (Some(i), Some(j)) => self.elements[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.elements).re
    }

    pub fn normalized(&self) -> Result<DensityMatrix> {
        let t = self.trace();
        if t <= 0.0 {
            return Err(Error::EmptyState);
        }
        Ok(self.scaled(1.0 / t))
    }

    pub fn scaled(&self, factor: f64) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.clone(),
            channels: self.channels.clone(),
            elements: self.elements.map(|z| z * factor),
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::eigenvalues(&self.elements)
    }

    /// PSD within `-1e-9`, real trace in `[0, 1 + 1e-10]`.
    pub fn validate_physical(&self) -> Result<()> {
        linalg::ensure_psd(&self.elements)?;
        let tr = linalg::trace(&self.elements);
        if tr.im.abs() > HERMITIAN_TOL || tr.re < -HERMITIAN_TOL || tr.re > 1.0 + HERMITIAN_TOL {
            return Err(Error::UnphysicalInput(format!("trace {tr} outside [0, 1]")));
        }
        Ok(())
    }

    pub(crate) fn with_elements(&self, elements: CMatrix) -> DensityMatrix {
        DensityMatrix {
            basis: self.basis.clone(),
            channels: self.channels.clone(),
            elements,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `|psi><psi|` over the kets present in `state`. The trace equals the squared norm.
pub fn to_density(state: &FockState) -> Result<DensityMatrix> {
    if state.norm_sqr() == 0.0 {
        return Err(Error::EmptyState);
    }
    let (basis, amps): (Vec<OccupationState>, Vec<Complex64>) =
        state.iter().map(|(k, a)| (k.clone(), *a)).unzip();
    let n = basis.len();
    let elements = CMatrix::from_fn(n, n, |i, j| amps[i] * amps[j].conj());
    Ok(DensityMatrix {
        basis,
        channels: state.channels().clone(),
        elements,
    })
}

/// Traces out every channel not in `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: &BTreeSet<Channel>) -> Result<DensityMatrix> {
    if let Some(ch) = keep.iter().find(|c| !rho.channels.contains(*c)) {
        return Err(Error::UnknownChannel(ch.to_string()));
    }
    let splits: Vec<(OccupationState, OccupationState)> =
        rho.basis.iter().map(|k| k.split(keep)).collect();

    let mut index: BTreeMap<OccupationState, usize> = BTreeMap::new();
    for (kept, _) in &splits {
        let next = index.len();
        index.entry(kept.clone()).or_insert(next);
    }
    // Canonical order of the reduced basis.
    let basis: Vec<OccupationState> = index.keys().cloned().collect();
    let position: BTreeMap<&OccupationState, usize> =
        basis.iter().enumerate().map(|(i, k)| (k, i)).collect();

    let n = basis.len();
    let mut out = CMatrix::zeros(n, n);
    for (a, (ka, ra)) in splits.iter().enumerate() {
        for (b, (kb, rb)) in splits.iter().enumerate() {
            if ra == rb {
                out[(position[ka], position[kb])] += rho.elements[(a, b)];
            }
        }
    }
    Ok(DensityMatrix {
        basis,
        channels: keep.clone(),
        elements: out,
    })
}

/// Submatrix over `basis`, in the requested order; kets absent from `rho` get zero rows.
pub fn restrict(rho: &DensityMatrix, basis: &[OccupationState]) -> Result<DensityMatrix> {
    let mut seen = BTreeSet::new();
    for ket in basis {
        if !seen.insert(ket) {
            return Err(Error::DuplicateKet(ket.to_string()));
        }
        for ch in ket.channels() {
            if !rho.channels.contains(&ch) {
                return Err(Error::UnknownChannel(ch.to_string()));
            }
        }
    }
    let idx: Vec<Option<usize>> = basis.iter().map(|k| rho.index_of(k)).collect();
    let n = basis.len();
    let elements = CMatrix::from_fn(n, n, |i, j| match (idx[i], idx[j]) {
        (Some(a), Some(b)) => rho.elements[(a, b)],
        _ => Complex64::new(0.0, 0.0),
    });
    Ok(DensityMatrix {
        basis: basis.to_vec(),
        channels: rho.channels.clone(),
        elements,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityMatrixWire {
    basis: Vec<String>,
    channels: Vec<String>,
    elements: Vec<[f64; 2]>,
}

impl From<DensityMatrix> for DensityMatrixWire {
    fn from(rho: DensityMatrix) -> Self {
        let n = rho.dim();
        let mut elements = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let z = rho.elements[(i, j)];
                elements.push([z.re, z.im]);
            }
        }
        DensityMatrixWire {
            basis: rho.basis.iter().map(|k| k.to_string()).collect(),
            channels: rho.channels.iter().map(|c| c.to_string()).collect(),
            elements,
        }
    }
}

impl TryFrom<DensityMatrixWire> for DensityMatrix {
    type Error = Error;

    fn try_from(w: DensityMatrixWire) -> Result<Self> {
        let basis: Vec<OccupationState> =
            w.basis.iter().map(|k| k.parse()).collect::<Result<_>>()?;
        let n = basis.len();
        if w.elements.len() != n * n {
            return Err(Error::Dimension(format!(
                "{} elements for a {n}-ket basis",
                w.elements.len()
            )));
        }
        let elements =
            CMatrix::from_fn(n, n, |i, j| Complex64::new(w.elements[i * n + j][0], w.elements[i * n + j][1]));
        let channels = w.channels.into_iter().map(Channel::new).collect();
        DensityMatrix::new(basis, channels, elements)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::Color;
    use crate::linalg::c64;
    use proptest::prelude::*;

    fn ket(s: &str) -> OccupationState {
        s.parse().unwrap()
    }

    fn state(channels: &[&str], terms: &[(&str, Complex64)]) -> FockState {
        let mut s = FockState::empty(channels.iter().copied());
        for (k, a) in terms {
            s.add(ket(k), *a).unwrap();
        }
        s
    }

    fn keep(chs: &[&str]) -> BTreeSet<Channel> {
        chs.iter().map(|c| Channel::from(*c)).collect()
    }

    #[test]
    fn to_density_examples() {
        let one = to_density(&state(&["k"], &[("k:R", c64(1.0, 0.0))])).unwrap();
        assert_eq!(one.dim(), 1);
        assert_eq!(one.elements()[(0, 0)], c64(1.0, 0.0));

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sup = to_density(&state(&["k"], &[("k:R", c64(h, 0.0)), ("k:B", c64(h, 0.0))])).unwrap();
        assert!(sup.elements().iter().all(|z| (z - c64(0.5, 0.0)).norm() < 1e-15));

        let w = to_density(&crate::detection::w1_state()).unwrap();
        assert_eq!(w.dim(), 3);
        assert!(w.elements().iter().all(|z| (z - c64(1.0 / 3.0, 0.0)).norm() < 1e-15));

        assert!(matches!(to_density(&FockState::empty(["k"])), Err(Error::EmptyState)));
    }

    #[test]
    fn partial_trace_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = to_density(&state(&["k", "l"], &[("k:R,l:B", c64(h, 0.0)), ("k:B,l:R", c64(h, 0.0))])).unwrap();
        let same = partial_trace(&bell, &keep(&["k", "l"])).unwrap();
        assert_eq!(same.elements(), bell.elements());

        let marginal = partial_trace(&bell, &keep(&["k"])).unwrap();
        assert_eq!(marginal.basis(), &[ket("k:R"), ket("k:B")]);
        let expected = CMatrix::from_diagonal_element(2, 2, c64(0.5, 0.0));
        assert!((marginal.elements() - expected).norm() < 1e-15);

        // (|R> + i|B>)_k (x) (0.6|R> + 0.8|B>)_l: keeping k gives rho_k with unit weight.
        let product = to_density(&state(
            &["k", "l"],
            &[
                ("k:R,l:R", c64(0.6 * h, 0.0)),
                ("k:R,l:B", c64(0.8 * h, 0.0)),
                ("k:B,l:R", c64(0.0, 0.6 * h)),
                ("k:B,l:B", c64(0.0, 0.8 * h)),
            ],
        ))
        .unwrap();
        let rho_k = partial_trace(&product, &keep(&["k"])).unwrap();
        let rho_a = to_density(&state(&["k"], &[("k:R", c64(h, 0.0)), ("k:B", c64(0.0, h))])).unwrap();
        assert!((rho_k.elements() - rho_a.elements()).norm() < 1e-15);

        assert!(matches!(partial_trace(&bell, &keep(&["q"])), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn restrict_examples() {
        let w = to_density(&crate::detection::w1_state()).unwrap();
        assert_eq!(restrict(&w, w.basis()).unwrap(), w);
        let rrr = restrict(&w, &[ket("j:R,k:R,l:R")]).unwrap();
        assert_eq!(rrr.elements()[(0, 0)], c64(0.0, 0.0));
        assert!(matches!(restrict(&w, &[ket("j:R,k:R,l:B"), ket("j:R,k:R,l:B")]), Err(Error::DuplicateKet(_))));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => c64(0.1 + 0.2, 0.0),
            (1, 1) => c64(1.0 / 3.0, 0.0),
            (0, 1) => c64(std::f64::consts::PI / 17.0, -1e-300),
            _ => c64(std::f64::consts::PI / 17.0, 1e-300),
        });
        let rho = DensityMatrix::from_kets(&["j:R,k:B", "j:B,k:R"], m).unwrap();
        let text = rho.to_json().unwrap();
        assert!(text.contains("\"j:R,k:B\""));
        let back = DensityMatrix::from_json(&text).unwrap();
        for (a, b) in back.elements().iter().zip(rho.elements().iter()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
            assert_eq!(a.im.to_bits(), b.im.to_bits());
        }
        assert_eq!(back, rho);
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let m = CMatrix::from_fn(2, 2, |i, j| if i < j { c64(0.5, 0.0) } else { c64(0.0, 0.0) });
        assert!(DensityMatrix::from_kets(&["k:R", "k:B"], m).is_err());
    }

    const CHANNELS: [&str; 3] = ["a", "b", "c"];

    /// Up to 12 kets with 1 to 4 photons over three two-color channels.
    fn arb_state() -> impl Strategy<Value = FockState> {
        let photon = (0usize..3, any::<bool>());
        let ket = prop::collection::vec(photon, 1..=4);
        let amp = (-1.0f64..1.0, -1.0f64..1.0);
        prop::collection::vec((ket, amp), 1..12).prop_filter_map("nonzero", |terms| {
            let mut s = FockState::empty(CHANNELS);
            for (photons, (re, im)) in terms {
                let k = OccupationState::from_photons(
                    photons
                        .into_iter()
                        .map(|(c, blue)| (CHANNELS[c], if blue { Color::B } else { Color::R })),
                );
                let prev = s.amplitude(&k);
                s.add(k, prev + c64(re, im)).ok()?;
            }
            (s.norm_sqr() > 1e-6).then(|| s.normalized().ok()).flatten()
        })
    }

    fn max_eig(rho: &DensityMatrix) -> f64 {
        rho.eigenvalues().into_iter().fold(f64::MIN, f64::max)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn trace_is_squared_norm(s in arb_state(), scale in 0.1f64..2.0) {
            let s = s.scaled(c64(scale, 0.0));
            prop_assert!((to_density(&s).unwrap().trace() - s.norm_sqr()).abs() < 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace_and_positivity(s in arb_state(), pick in 0usize..3) {
            let rho = to_density(&s).unwrap();
            let reduced = partial_trace(&rho, &keep(&[CHANNELS[pick]])).unwrap();
            prop_assert!((reduced.trace() - rho.trace()).abs() < 1e-12);
            prop_assert!(reduced.validate_physical().is_ok());
        }

        #[test]
        fn sequential_trace_equals_joint(s in arb_state()) {
            let rho = to_density(&s).unwrap();
            let step = partial_trace(&partial_trace(&rho, &keep(&["b", "c"])).unwrap(), &keep(&["c"])).unwrap();
            let joint = partial_trace(&rho, &keep(&["c"])).unwrap();
            prop_assert_eq!(step.basis(), joint.basis());
            prop_assert!((step.elements() - joint.elements()).iter().all(|z| z.norm() < 1e-12));
        }

        #[test]
        fn restriction_does_not_raise_the_spectrum(s in arb_state(), mask in any::<u16>()) {
            let rho = partial_trace(&to_density(&s).unwrap(), &keep(&["a", "b"])).unwrap();
            let sub: Vec<OccupationState> = rho
                .basis()
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> (i % 16) & 1 == 1)
                .map(|(_, k)| k.clone())
                .collect();
            prop_assume!(!sub.is_empty());
            let r = restrict(&rho, &sub).unwrap();
            prop_assert!(max_eig(&r) <= max_eig(&rho) + 1e-9);
        }
    }
}
