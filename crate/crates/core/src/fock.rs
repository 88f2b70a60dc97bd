//! Truncated multimode bosonic Fock space over (channel, color) modes.
//!
//! Occupation kets are sparse maps from [`ModeLabel`] to photon counts with
//! zero entries never stored, so structural equality is ket equality. Keys
//! order by channel id and then R before B, which makes every basis
//! enumeration in the crate deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation: the analysis never needs amplitudes with more than four photons.
pub const DEFAULT_MAX_PHOTONS: usize = 4;

/// Amplitudes with magnitude at or below this are dropped from a [`FockState`].
pub const PRUNE_THRESHOLD: f64 = 1e-15;

/// The two discrete frequency bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Color {
    R,
    B,
}

impl Color {
    pub const BOTH: [Color; 2] = [Color::R, Color::B];

    pub fn other(self) -> Color {
        match self {
            Color::R => Color::B,
            Color::B => Color::R,
        }
    }

    /// Index in the `{R, B}` single-photon frame.
    pub fn index(self) -> usize {
        match self {
            Color::R => 0,
            Color::B => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Color::R => 'R',
            Color::B => 'B',
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

impl FromStr for Color {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" => Ok(Color::R),
            "B" => Ok(Color::B),
            _ => Err(Error::InvalidKet(s.to_string())),
        }
    }
}

/// Symbolic channel id such as `i`, `j`, `j'`, `fiber`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Channel(String);

impl Channel {
    pub fn new(name: impl Into<String>) -> Self {
        Channel(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Channel {
    fn from(s: &str) -> Self {
        Channel(s.to_string())
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A single bosonic mode.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeLabel {
    pub channel: Channel,
    pub color: Color,
}

impl ModeLabel {
    pub fn new(channel: impl Into<Channel>, color: Color) -> Self {
        ModeLabel {
            channel: channel.into(),
            color,
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.channel, self.color)
    }
}

/// Occupation-number ket in canonical form.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationState {
    occ: BTreeMap<ModeLabel, u32>,
}

impl OccupationState {
    pub fn vacuum() -> Self {
        Self::default()
    }

    /// Builds a ket from a list of created photons; repeated modes accumulate.
    pub fn from_photons<I, C>(photons: I) -> Self
    where
        I: IntoIterator<Item = (C, Color)>,
        C: Into<Channel>,
    {
        let mut ket = Self::vacuum();
        for (ch, color) in photons {
            ket.add_photon(ModeLabel::new(ch, color));
        }
        ket
    }

    pub fn add_photon(&mut self, mode: ModeLabel) {
        *self.occ.entry(mode).or_insert(0) += 1;
    }

    pub fn count(&self, mode: &ModeLabel) -> u32 {
        self.occ.get(mode).copied().unwrap_or(0)
    }

    pub fn count_in(&self, channel: &Channel, color: Color) -> u32 {
        self.occ
            .get(&ModeLabel {
                channel: channel.clone(),
                color,
            })
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.occ.values().map(|&n| n as usize).sum()
    }

    pub fn color_total(&self, color: Color) -> usize {
        self.occ
            .iter()
            .filter(|(m, _)| m.color == color)
            .map(|(_, &n)| n as usize)
            .sum()
    }

    pub fn is_vacuum(&self) -> bool {
        self.occ.is_empty()
    }

    pub fn modes(&self) -> impl Iterator<Item = (&ModeLabel, u32)> {
        self.occ.iter().map(|(m, &n)| (m, n))
    }

    pub fn channels(&self) -> BTreeSet<Channel> {
        self.occ.keys().map(|m| m.channel.clone()).collect()
    }

    /// Splits into the part on `keep` and the part on every other channel.
    pub fn split(&self, keep: &BTreeSet<Channel>) -> (OccupationState, OccupationState) {
        let mut kept = OccupationState::vacuum();
        let mut rest = OccupationState::vacuum();
        for (m, &n) in &self.occ {
            if keep.contains(&m.channel) {
                kept.occ.insert(m.clone(), n);
            } else {
                rest.occ.insert(m.clone(), n);
            }
        }
        (kept, rest)
    }

    /// Product of `sqrt(n!)` over occupied modes.
    pub fn bosonic_norm(&self) -> f64 {
        self.occ
            .values()
            .map(|&n| (1..=n).map(f64::from).product::<f64>().sqrt())
            .product()
    }
}

impl fmt::Display for OccupationState {
    /// `j:R,k:R,l:B`; a doubly occupied mode repeats (`k:R,k:R`); the vacuum is `vac`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.occ.is_empty() {
            return f.write_str("vac");
        }
        let mut first = true;
        for (m, &n) in &self.occ {
            for _ in 0..n {
                if !first {
                    f.write_str(",")?;
                }
                write!(f, "{m}")?;
                first = false;
            }
        }
        Ok(())
    }
}

impl FromStr for OccupationState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "vac" || s.is_empty() {
            return Ok(Self::vacuum());
        }
        let mut ket = Self::vacuum();
        for item in s.split(',') {
            let (ch, col) = item
                .trim()
                .rsplit_once(':')
                .ok_or_else(|| Error::InvalidKet(s.to_string()))?;
            if ch.is_empty() {
                return Err(Error::InvalidKet(s.to_string()));
            }
            let color = col.parse().map_err(|_| Error::InvalidKet(s.to_string()))?;
            ket.add_photon(ModeLabel::new(ch, color));
        }
        Ok(ket)
    }
}

/// Sparse superposition of occupation kets.
///
/// `channels` is the declared set of channels the state lives on, so that a
/// channel left in vacuum is still known to partial traces and projections.
#[derive(Clone, Debug, PartialEq)]
pub struct FockState {
    amplitudes: BTreeMap<OccupationState, Complex64>,
    channels: BTreeSet<Channel>,
    max_photons: usize,
}

impl FockState {
    pub fn empty<I, C>(channels: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<Channel>,
    {
        FockState {
            amplitudes: BTreeMap::new(),
            channels: channels.into_iter().map(Into::into).collect(),
            max_photons: DEFAULT_MAX_PHOTONS,
        }
    }

    pub fn vacuum<I, C>(channels: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: Into<Channel>,
    {
        let mut s = Self::empty(channels);
        s.amplitudes
            .insert(OccupationState::vacuum(), Complex64::new(1.0, 0.0));
        s
    }

    pub fn with_max_photons(mut self, max_photons: usize) -> Self {
        self.max_photons = max_photons;
        self
    }

    pub fn max_photons(&self) -> usize {
        self.max_photons
    }

    pub fn channels(&self) -> &BTreeSet<Channel> {
        &self.channels
    }

    /// Adds `amp` to the amplitude of `ket`; the ket's channels join the declared set.
    pub fn add(&mut self, ket: OccupationState, amp: Complex64) -> Result<()> {
        let n = ket.total();
        if n > self.max_photons {
            return Err(Error::Truncation {
                found: n,
                max: self.max_photons,
            });
        }
        self.channels.extend(ket.channels());
        let slot = self.amplitudes.entry(ket).or_insert(Complex64::new(0.0, 0.0));
        *slot += amp;
        Ok(())
    }

    pub fn amplitude(&self, ket: &OccupationState) -> Complex64 {
        self.amplitudes
            .get(ket)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&OccupationState, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<FockState> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::EmptyState);
        }
        let mut out = self.clone();
        for a in out.amplitudes.values_mut() {
            *a /= n;
        }
        Ok(out)
    }

    pub fn scaled(&self, factor: Complex64) -> FockState {
        let mut out = self.clone();
        for a in out.amplitudes.values_mut() {
            *a *= factor;
        }
        out.prune();
        out
    }

    /// Drops amplitudes with magnitude at or below [`PRUNE_THRESHOLD`].
    pub fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() > PRUNE_THRESHOLD);
    }

    /// Keeps only kets accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&OccupationState) -> bool) -> FockState {
        FockState {
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
            channels: self.channels.clone(),
            max_photons: self.max_photons,
        }
    }

    /// Inner product `<self|other>`.
    pub fn inner(&self, other: &FockState) -> Complex64 {
        self.amplitudes
            .iter()
            .map(|(k, a)| a.conj() * other.amplitude(k))
            .sum()
    }

    pub(crate) fn from_parts(
        amplitudes: BTreeMap<OccupationState, Complex64>,
        channels: BTreeSet<Channel>,
        max_photons: usize,
    ) -> FockState {
        let mut s = FockState {
            amplitudes,
            channels,
            max_photons,
        };
        s.prune();
        s
    }
}

/// Squared-norm square root of the amplitude map.
pub fn norm(state: &FockState) -> f64 {
    state.norm()
}
