//! Parametrised graph shift operators (PGSO).
//!
//! The operator family
//!
//! ```text
//! gamma(A, S) = m1 * D_a^e1 + m2 * D_a^e2 * A_a * D_a^e3 + m3 * I
//! A_a = A + a I,   D_a = diag(A_a 1)
//! ```
//!
//! spans the adjacency matrix, the classical Laplacians and the GCN
//! normalisation with seven scalars `S = (m1, m2, m3, e1, e2, e3, a)`.
//! This crate builds the operator sparsely, applies it matrix-free,
//! differentiates it with respect to all seven scalars, bounds its
//! (always real) spectrum, and trains small GNNs whose shift operator is
//! learned together with the weights.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | graph storage, file formats, SBM sampling, splits |
//! | [`operator`] | parameter tuples, presets, build/apply/gradients |
//! | [`spectral`] | symmetric similar matrix, eigenvalues, Gershgorin bounds |
//! | [`nn`] | layers, loss, Adam with parameter groups, models |
//! | [`train`] | training loops and experiment sweeps |
//!
//! With the default `parallel` feature, row loops and sweep cells run on
//! rayon. Every reduction happens in a fixed order, so results are
//! bit-identical with and without the feature.

pub mod fmt;
pub mod graph;
pub mod nn;
pub mod operator;
pub mod par;
pub mod rng;
pub mod spectral;
pub mod train;

pub use graph::{AttributedGraph, DegreeVector, GraphError, Labels, SbmSpec, SplitAssignment};
pub use operator::{ClampEpsilon, OperatorError, ParamGradient, ParamSet, PgsoMatrix, Preset};
pub use spectral::{GershgorinReport, SpectralError, SpectralReport};
