use super::{NnError, Result};
use crate::graph::AttributedGraph;
use crate::operator::{ClampEpsilon, ParamSet, PreparedOperator};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(self, z: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => z.clone(),
            Activation::Relu => z.mapv(|x| x.max(0.0)),
        }
    }

    /// Multiplies `upstream` by the derivative evaluated at pre-activation `z`.
    pub fn backward(self, z: &Array2<f64>, upstream: &Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Identity => upstream.clone(),
            Activation::Relu => {
                let mut out = upstream.clone();
                ndarray::Zip::from(&mut out).and(z).for_each(|o, &zi| {
                    if zi <= 0.0 {
                        *o = 0.0;
                    }
                });
                out
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
        }
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "identity" => Ok(Self::Identity),
            "relu" => Ok(Self::Relu),
            _ => Err(format!("unknown activation '{s}'")),
        }
    }
}

/// Weight matrix `in x out` and optional bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub w: Array2<f64>,
    pub bias: Option<Array1<f64>>,
}

impl LayerWeights {
    pub fn new(w: Array2<f64>, bias: Option<Array1<f64>>) -> Result<Self> {
        if let Some(b) = &bias {
            if b.len() != w.ncols() {
                return Err(NnError::Shape(format!("bias length {} vs {} output columns", b.len(), w.ncols())));
            }
        }
        Ok(Self { w, bias })
    }

    /// Glorot-uniform weights and a zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit));
        Self { w, bias: bias.then(|| Array1::zeros(fan_out)) }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    pub(crate) fn check_input(&self, h: &Array2<f64>) -> Result<()> {
        if h.ncols() != self.in_dim() {
            return Err(NnError::Shape(format!("input has {} columns, layer expects {}", h.ncols(), self.in_dim())));
        }
        Ok(())
    }

    pub(crate) fn add_bias(&self, z: &mut Array2<f64>) {
        if let Some(b) = &self.bias {
            *z += b;
        }
    }

    /// `h W + b`.
    pub fn linear(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(h)?;
        let mut z = h.dot(&self.w);
        self.add_bias(&mut z);
        Ok(z)
    }
}

/// `act(gamma h W + b)`.
pub fn gcn_pgso_layer(
    g: &AttributedGraph,
    s: ParamSet,
    h: &Array2<f64>,
    w: &LayerWeights,
    act: Activation,
    eps: ClampEpsilon,
) -> Result<Array2<f64>> {
    w.check_input(h)?;
    let propagated = PreparedOperator::new(g, s, eps).apply(h)?;
    let mut z = propagated.dot(&w.w);
    w.add_bias(&mut z);
    Ok(act.apply(&z))
}

/// Message-passing form of the same layer:
/// `act((m1 b_i^e1 + m3) h_i W + m2 sum_{j in N(i) + i} eps_ij h_j W + b)`
/// with `eps_ij = b_i^e2 b_j^e3` and the self term additionally weighted by `a`.
pub fn gin_pgso_layer(
    g: &AttributedGraph,
    s: ParamSet,
    h: &Array2<f64>,
    w: &LayerWeights,
    act: Activation,
    eps: ClampEpsilon,
) -> Result<Array2<f64>> {
    w.check_input(h)?;
    if h.nrows() != g.n() {
        return Err(NnError::Shape(format!("input has {} rows, graph has {} nodes", h.nrows(), g.n())));
    }
    let hw = h.dot(&w.w);
    let mut z = gin_aggregate(g, s, &hw, eps);
    w.add_bias(&mut z);
    Ok(act.apply(&z))
}

pub(crate) fn gin_aggregate(g: &AttributedGraph, s: ParamSet, hw: &Array2<f64>, eps: ClampEpsilon) -> Array2<f64> {
    let base: Vec<f64> = (0..g.n()).map(|i| (g.degree(i) as f64 + s.a).max(eps.get())).collect();
    let mut out = Array2::zeros(hw.raw_dim());
    crate::par::for_each_row_mut(&mut out, |i, mut row| {
        let bi = base[i];
        let self_weight = s.m1 * bi.powf(s.e1) + s.m3;
        row.scaled_add(self_weight, &hw.row(i));
        let edge = |j: usize| bi.powf(s.e2) * base[j].powf(s.e3);
        row.scaled_add(s.m2 * s.a * edge(i), &hw.row(i));
        for &j in g.neighbors(i) {
            row.scaled_add(s.m2 * edge(j), &hw.row(j));
        }
    });
    out
}

/// Simplified graph convolution: `gamma^k x W + b`, no nonlinearity.
pub fn sgc_pgso_forward(
    g: &AttributedGraph,
    s: ParamSet,
    x: &Array2<f64>,
    k: usize,
    w: &LayerWeights,
    eps: ClampEpsilon,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(NnError::InvalidModel("SGC needs at least one propagation step".into()));
    }
    w.check_input(x)?;
    let op = PreparedOperator::new(g, s, eps);
    let mut h = op.apply(x)?;
    for _ in 1..k {
        h = op.apply(&h)?;
    }
    w.linear(&h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReadoutMode {
    Sum,
    Mean,
}

impl ReadoutMode {
    pub fn name(self) -> &'static str {
        match self {
            ReadoutMode::Sum => "sum",
            ReadoutMode::Mean => "mean",
        }
    }
}

impl fmt::Display for ReadoutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ReadoutMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            _ => Err(format!("unknown readout '{s}' (expected sum or mean)")),
        }
    }
}

/// Column-wise sum or mean over nodes.
pub fn readout(h: &Array2<f64>, mode: ReadoutMode) -> Result<Array1<f64>> {
    if h.nrows() == 0 {
        return Err(NnError::EmptyGraph);
    }
    let sum = h.sum_axis(Axis(0));
    Ok(match mode {
        ReadoutMode::Sum => sum,
        ReadoutMode::Mean => sum / h.nrows() as f64,
    })
}

/// Mean negative log-softmax over the masked rows, and its gradient with
/// respect to the logits (zero outside the mask).
pub fn softmax_cross_entropy(logits: &Array2<f64>, targets: &[usize], mask: Option<&[usize]>) -> Result<(f64, Array2<f64>)> {
    let (rows, classes) = logits.dim();
    if targets.len() != rows {
        return Err(NnError::Shape(format!("{} targets for {rows} rows", targets.len())));
    }
    let all: Vec<usize>;
    let mask = match mask {
        Some(m) => m,
        None => {
            all = (0..rows).collect();
            &all
        }
    };
    if mask.is_empty() {
        return Err(NnError::EmptyMask);
    }
    let mut grad = Array2::zeros((rows, classes));
    let mut loss = 0.0;
    let scale = 1.0 / mask.len() as f64;
    for &r in mask {
        if r >= rows {
            return Err(NnError::Shape(format!("mask row {r} out of range for {rows} rows")));
        }
        let t = targets[r];
        if t >= classes {
            return Err(NnError::TargetRange { target: t, classes });
        }
        let row = logits.row(r);
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let lse = max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln();
        loss += lse - row[t];
        let mut grow = grad.row_mut(r);
        for (c, g) in grow.iter_mut().enumerate() {
            *g = ((row[c] - lse).exp() - if c == t { 1.0 } else { 0.0 }) * scale;
        }
    }
    Ok((loss * scale, grad))
}
