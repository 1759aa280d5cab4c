//! Numerical core for the asymptotic mean value Laplacian on sampled metric
//! measure spaces.
//!
//! Given a space with a metric and a normalized measure, the finite-radius
//! operator compares each function value with its average over the ball of
//! radius `r`, scaled by `1 / r^2`. Its symmetrized form is self-adjoint in
//! the weighted inner product, annihilates constants, and its low spectrum
//! converges (after a dimensional constant) to the Laplace spectrum as
//! `r -> 0`.
//!
//! Pipeline: [`geometry`] samples model spaces and builds ball indices and
//! volumes; [`operator`] assembles the sparse symmetrized kernel; [`spectra`]
//! computes the low spectrum and Rayleigh-quotient bounds; [`reference`]
//! supplies closed-form targets (Laplace spectra, the exact sup-metric torus
//! spectrum, target constants); [`harness`] runs reproducible experiments
//! and writes CSV/JSON.

pub mod error;
pub mod geometry;
pub mod harness;
pub mod operator;
pub mod reference;
pub mod spectra;
pub mod util;

pub use error::{AmvError, Result};
pub use geometry::{
    ball_index, ball_index_brute_force, ball_volume, sample, BallIndex, SampleSet,
    SpaceDescriptor, SpaceKind, Strategy, VolumeField, VolumeMode,
};
pub use harness::{
    relative_error, run, target_constant, Command, ExperimentConfig, ResultTable, Row,
    TableMetadata, TestFunction, CSV_HEADER,
};
pub use operator::{assemble, AmvOperator};
pub use reference::{
    cm, cm_rational, laplace_spectrum, sinc, sinc_scan, torus_linf_amv_spectrum, RefSpectrum,
    SincScanPoint, SincSpectrum,
};
pub use spectra::{
    eig_lowest, essential_threshold, rayleigh, spectral_radius, symmetrize, tent_upper_bound,
    SpectralResult, SymmetrizedOp, TentBoundReport,
};
