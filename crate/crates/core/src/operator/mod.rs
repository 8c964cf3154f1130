//! The parametrised graph shift operator
//! `gamma(A, S) = m1 D_a^e1 + m2 D_a^e2 A_a D_a^e3 + m3 I`.
//!
//! Augmented degrees `d_i + a` are clamped from below at a small
//! positive epsilon before any real power is taken. At a clamped node the
//! derivative through the base is zero.

mod csr;
mod kernel;

pub use csr::CsrMatrix;
pub use kernel::{apply, build_operator, input_gradient, is_gso, param_gradient, PgsoMatrix, PreparedOperator};

use crate::fmt::g17;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("unknown preset '{0}'")]
    UnknownPreset(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("clamp epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("invalid parameter record: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, OperatorError>;

/// The seven scalars `(m1, m2, m3, e1, e2, e3, a)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamSet {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
    pub a: f64,
}

impl ParamSet {
    pub const NAMES: [&'static str; 7] = ["m1", "m2", "m3", "e1", "e2", "e3", "a"];
    /// Positions of the exponential parameters in [`ParamSet::to_array`].
    pub const EXPONENT_SLOTS: [usize; 3] = [3, 4, 5];

    pub const fn new(m1: f64, m2: f64, m3: f64, e1: f64, e2: f64, e3: f64, a: f64) -> Self {
        Self { m1, m2, m3, e1, e2, e3, a }
    }

    pub const fn zeros() -> Self {
        Self::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    }

    pub fn to_array(&self) -> [f64; 7] {
        [self.m1, self.m2, self.m3, self.e1, self.e2, self.e3, self.a]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// `e2 == e3` makes the operator symmetric on undirected graphs.
    pub fn is_symmetric(&self) -> bool {
        self.e2 == self.e3
    }
}

impl fmt::Display for ParamSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = Self::NAMES
            .iter()
            .zip(self.to_array())
            .map(|(k, v)| format!("{k}={}", g17(v)))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

impl FromStr for ParamSet {
    type Err = OperatorError;

    /// Parses `m1=… m2=… m3=… e1=… e2=… e3=… a=…` (any order, each key once).
    fn from_str(s: &str) -> Result<Self> {
        let mut vals: [Option<f64>; 7] = [None; 7];
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| OperatorError::Parse(format!("expected key=value, found '{tok}'")))?;
            let idx = Self::NAMES
                .iter()
                .position(|n| *n == k)
                .ok_or_else(|| OperatorError::Parse(format!("unknown key '{k}'")))?;
            if vals[idx].is_some() {
                return Err(OperatorError::Parse(format!("duplicate key '{k}'")));
            }
            let x: f64 = v.parse().map_err(|_| OperatorError::Parse(format!("invalid value '{v}' for {k}")))?;
            if !x.is_finite() {
                return Err(OperatorError::Parse(format!("non-finite value for {k}")));
            }
            vals[idx] = Some(x);
        }
        let mut out = [0.0; 7];
        for (i, v) in vals.iter().enumerate() {
            out[i] = v.ok_or_else(|| OperatorError::Parse(format!("missing key '{}'", Self::NAMES[i])))?;
        }
        Ok(Self::from_array(out))
    }
}

/// Named parametrisations reproducing classical shift operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Adjacency,
    UnnormalisedLaplacian,
    SignlessLaplacian,
    RandomWalkLaplacian,
    SymmetricLaplacian,
    GcnNorm,
    MeanAggregation,
    AllZeros,
}

impl Preset {
    pub const ALL: [Preset; 8] = [
        Preset::Adjacency,
        Preset::UnnormalisedLaplacian,
        Preset::SignlessLaplacian,
        Preset::RandomWalkLaplacian,
        Preset::SymmetricLaplacian,
        Preset::GcnNorm,
        Preset::MeanAggregation,
        Preset::AllZeros,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Adjacency => "adjacency",
            Preset::UnnormalisedLaplacian => "unnormalised_laplacian",
            Preset::SignlessLaplacian => "signless_laplacian",
            Preset::RandomWalkLaplacian => "random_walk_laplacian",
            Preset::SymmetricLaplacian => "symmetric_laplacian",
            Preset::GcnNorm => "gcn_norm",
            Preset::MeanAggregation => "mean_aggregation",
            Preset::AllZeros => "all_zeros",
        }
    }

    pub fn formula(self) -> &'static str {
        match self {
            Preset::Adjacency => "A",
            Preset::UnnormalisedLaplacian => "D - A",
            Preset::SignlessLaplacian => "D + A",
            Preset::RandomWalkLaplacian => "I - D^-1 A",
            Preset::SymmetricLaplacian => "I - D^-1/2 A D^-1/2",
            Preset::GcnNorm => "D_1^-1/2 A_1 D_1^-1/2",
            Preset::MeanAggregation => "D^-1 A",
            Preset::AllZeros => "0",
        }
    }

    pub const fn params(self) -> ParamSet {
        match self {
            Preset::Adjacency => ParamSet::new(0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0),
            Preset::UnnormalisedLaplacian => ParamSet::new(1.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0),
            Preset::SignlessLaplacian => ParamSet::new(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0),
            Preset::RandomWalkLaplacian => ParamSet::new(0.0, -1.0, 1.0, 0.0, -1.0, 0.0, 0.0),
            Preset::SymmetricLaplacian => ParamSet::new(0.0, -1.0, 1.0, 0.0, -0.5, -0.5, 0.0),
            Preset::GcnNorm => ParamSet::new(0.0, 1.0, 0.0, 0.0, -0.5, -0.5, 1.0),
            Preset::MeanAggregation => ParamSet::new(0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0),
            Preset::AllZeros => ParamSet::zeros(),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = OperatorError;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| OperatorError::UnknownPreset(s.to_string()))
    }
}

pub fn preset(name: &str) -> Result<ParamSet> {
    name.parse::<Preset>().map(Preset::params)
}

/// Lower bound applied to augmented degrees `d_i + a`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ClampEpsilon(f64);

impl ClampEpsilon {
    pub const DEFAULT: f64 = 1e-6;

    pub fn new(eps: f64) -> Result<Self> {
        if eps > 0.0 && eps.is_finite() {
            Ok(Self(eps))
        } else {
            Err(OperatorError::InvalidEpsilon(eps))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for ClampEpsilon {
    fn default() -> Self {
        Self(Self::DEFAULT)
    }
}

/// Inner products `<upstream, d(gamma h)/d theta>` for each parameter.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamGradient {
    pub d_m1: f64,
    pub d_m2: f64,
    pub d_m3: f64,
    pub d_e1: f64,
    pub d_e2: f64,
    pub d_e3: f64,
    pub d_a: f64,
}

impl ParamGradient {
    pub fn to_array(&self) -> [f64; 7] {
        [self.d_m1, self.d_m2, self.d_m3, self.d_e1, self.d_e2, self.d_e3, self.d_a]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self { d_m1: v[0], d_m2: v[1], d_m3: v[2], d_e1: v[3], d_e2: v[4], d_e3: v[5], d_a: v[6] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}
