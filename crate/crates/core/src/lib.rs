//! Simulation and two-photon tomography of a three-photon energy W state.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod density;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod fock;
pub mod linalg;
pub mod network;
pub mod report;
pub mod tomography;
