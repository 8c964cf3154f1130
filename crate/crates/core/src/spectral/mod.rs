//! Spectral analysis of `gamma(A, S)`.
//!
//! `gamma` is similar to the symmetric matrix
//! `D_a^{-(e2-e3)/2} gamma D_a^{(e2-e3)/2}
//!   = m1 D_a^e1 + m2 D_a^{(e2+e3)/2} A_a D_a^{(e2+e3)/2} + m3 I`,
//! so its spectrum is real and can be computed with a symmetric solver.
//! Similarity by `D_a^{e3}` instead gives rows whose off-diagonal mass is
//! `|m2| b_i^{e2+e3} d_i`, which is where the Gershgorin interval comes
//! from. The interval needs only the degree vector.

mod eigen;

pub use eigen::symmetric_eigenvalues;

use crate::graph::AttributedGraph;
use crate::operator::{ClampEpsilon, ParamSet, PreparedOperator};
use ndarray::Array2;
use thiserror::Error;

pub const DEFAULT_DENSE_LIMIT: usize = 2000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("graph has {n} nodes, dense eigensolves are limited to {limit}")]
    SizeLimit { n: usize, limit: usize },
    #[error("eigensolver did not converge (eigenvalue {0})")]
    NoConvergence(usize),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralOptions {
    pub dense_limit: usize,
    pub clamp: ClampEpsilon,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { dense_limit: DEFAULT_DENSE_LIMIT, clamp: ClampEpsilon::default() }
    }
}

impl SpectralOptions {
    fn check(&self, g: &AttributedGraph) -> Result<()> {
        if g.n() > self.dense_limit {
            return Err(SpectralError::SizeLimit { n: g.n(), limit: self.dense_limit });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMode {
    Full,
    BoundsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectralMethod {
    DenseSymmetric,
    BoundsOnly,
}

/// Per-node Gershgorin centres and radii and the resulting interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GershgorinReport {
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    pub support_lo: f64,
    pub support_hi: f64,
}

impl GershgorinReport {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.support_lo + self.support_hi)
    }

    /// Containment slack `1e-9 * max(1, |support_hi|)`.
    pub fn tolerance(&self) -> f64 {
        1e-9 * self.support_hi.abs().max(1.0)
    }

    pub fn contains(&self, lambda: f64) -> bool {
        let tol = self.tolerance();
        lambda >= self.support_lo - tol && lambda <= self.support_hi + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    /// Ascending; empty in bounds-only mode.
    pub eigenvalues: Vec<f64>,
    pub gershgorin: GershgorinReport,
    pub method: SpectralMethod,
    pub clamp_count: usize,
}

impl SpectralReport {
    pub fn lambda_min(&self) -> Option<f64> {
        self.eigenvalues.first().copied()
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.eigenvalues.last().copied()
    }

    pub fn all_contained(&self) -> bool {
        self.eigenvalues.iter().all(|&l| self.gershgorin.contains(l))
    }
}

/// The symmetric matrix similar to `gamma(A, S)`.
pub fn symmetric_similar(g: &AttributedGraph, s: ParamSet, opts: &SpectralOptions) -> Result<Array2<f64>> {
    opts.check(g)?;
    let op = PreparedOperator::new(g, s, opts.clamp);
    let half = 0.5 * (s.e2 + s.e3);
    let scale: Vec<f64> = op.augmented_degrees().iter().map(|b| b.powf(half)).collect();
    let n = g.n();
    let mut m = Array2::zeros((n, n));
    for i in 0..n {
        m[[i, i]] = op.diagonal()[i];
        for &j in g.neighbors(i) {
            m[[i, j]] = s.m2 * scale[i] * scale[j];
        }
    }
    let sym = (&m + &m.t()) * 0.5;
    Ok(sym)
}

/// Ascending eigenvalues of `gamma(A, S)`.
pub fn eigenvalues(g: &AttributedGraph, s: ParamSet, opts: &SpectralOptions) -> Result<Vec<f64>> {
    let m = symmetric_similar(g, s, opts)?;
    symmetric_eigenvalues(&m).map_err(SpectralError::NoConvergence)
}

/// Gershgorin interval: `C_i = m1 b_i^e1 + m2 b_i^(e2+e3) a + m3`,
/// `R_i = |m2| b_i^(e2+e3) d_i` with `b_i` the clamped augmented degree.
pub fn gershgorin(g: &AttributedGraph, s: ParamSet, clamp: ClampEpsilon) -> GershgorinReport {
    let op = PreparedOperator::new(g, s, clamp);
    gershgorin_prepared(&op)
}

pub(crate) fn gershgorin_prepared(op: &PreparedOperator<'_>) -> GershgorinReport {
    let s = op.params();
    let g = op.graph();
    let n = g.n();
    let mut centers = Vec::with_capacity(n);
    let mut radii = Vec::with_capacity(n);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (i, &b) in op.augmented_degrees().iter().enumerate() {
        let sym = b.powf(s.e2 + s.e3);
        let c = s.m1 * b.powf(s.e1) + s.m2 * sym * s.a + s.m3;
        let r = s.m2.abs() * sym * g.degree(i) as f64;
        lo = lo.min(c - r);
        hi = hi.max(c + r);
        centers.push(c);
        radii.push(r);
    }
    GershgorinReport { centers, radii, support_lo: lo, support_hi: hi }
}

pub fn spectral_report(g: &AttributedGraph, s: ParamSet, mode: SpectralMode, opts: &SpectralOptions) -> Result<SpectralReport> {
    let op = PreparedOperator::new(g, s, opts.clamp);
    let gershgorin = gershgorin_prepared(&op);
    let clamp_count = op.clamp_count();
    match mode {
        SpectralMode::BoundsOnly => Ok(SpectralReport {
            eigenvalues: Vec::new(),
            gershgorin,
            method: SpectralMethod::BoundsOnly,
            clamp_count,
        }),
        SpectralMode::Full => Ok(SpectralReport {
            eigenvalues: eigenvalues(g, s, opts)?,
            gershgorin,
            method: SpectralMethod::DenseSymmetric,
            clamp_count,
        }),
    }
}
