use super::adam::{AdamState, GroupLayout, ParamBlock, ParamGroup};
use super::layers::{gin_aggregate, Activation, LayerWeights, ReadoutMode};
use super::{NnError, Result};
use crate::fmt::g17;
use crate::graph::AttributedGraph;
use crate::operator::{ClampEpsilon, ParamSet, PreparedOperator};
use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Gcn,
    Gin,
    Sgc { hops: usize },
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Gin => "gin",
            Architecture::Sgc { .. } => "sgc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Node,
    Graph,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Node => "node",
            Task::Graph => "graph",
        }
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "node" => Ok(Task::Node),
            "graph" => Ok(Task::Graph),
            _ => Err(format!("unknown task '{s}' (expected node or graph)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorMode {
    /// Not trained.
    Fixed,
    /// One trainable tuple shared by all propagation steps.
    Pgso,
    /// One trainable tuple per propagation step.
    Mpgso,
}

impl OperatorMode {
    pub fn name(self) -> &'static str {
        match self {
            OperatorMode::Fixed => "fixed",
            OperatorMode::Pgso => "pgso",
            OperatorMode::Mpgso => "mpgso",
        }
    }
}

impl FromStr for OperatorMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" | "preset" => Ok(Self::Fixed),
            "pgso" => Ok(Self::Pgso),
            "mpgso" => Ok(Self::Mpgso),
            _ => Err(format!("unknown operator mode '{s}'")),
        }
    }
}

/// Operator parameters of a model: one tuple, or one per step for mPGSO.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSlot {
    mode: OperatorMode,
    params: Vec<ParamSet>,
}

impl OperatorSlot {
    pub fn new(mode: OperatorMode, init: ParamSet, steps: usize) -> Self {
        let count = if mode == OperatorMode::Mpgso { steps.max(1) } else { 1 };
        Self { mode, params: vec![init; count] }
    }

    pub fn mode(&self) -> OperatorMode {
        self.mode
    }

    pub fn params(&self) -> &[ParamSet] {
        &self.params
    }

    pub fn trainable(&self) -> bool {
        self.mode != OperatorMode::Fixed
    }

    fn index(&self, step: usize) -> usize {
        if self.mode == OperatorMode::Mpgso {
            step
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    /// `act(gamma_step H W + b)`; `gin` selects the message-passing kernel.
    Conv { weights: LayerWeights, act: Activation, step: usize, gin: bool },
    /// `gamma_step H`.
    Propagate { step: usize },
    /// `act(H W + b)`.
    Dense { weights: LayerWeights, act: Activation },
    Readout(ReadoutMode),
}

impl Stage {
    fn weights(&self) -> Option<&LayerWeights> {
        match self {
            Stage::Conv { weights, .. } | Stage::Dense { weights, .. } => Some(weights),
            _ => None,
        }
    }

    fn weights_mut(&mut self) -> Option<&mut LayerWeights> {
        match self {
            Stage::Conv { weights, .. } | Stage::Dense { weights, .. } => Some(weights),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub task: Task,
    pub in_dim: usize,
    pub hidden: usize,
    pub classes: usize,
    /// Number of graph convolutions (ignored by SGC, which uses `hops`).
    pub depth: usize,
    pub readout: ReadoutMode,
    pub dropout: f64,
    pub clamp: ClampEpsilon,
    pub mode: OperatorMode,
    pub init: ParamSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    task: Task,
    stages: Vec<Stage>,
    slot: OperatorSlot,
    dropout: f64,
    clamp: ClampEpsilon,
}

enum Record {
    Conv { input: Array2<f64>, mask: Option<Array2<f64>>, inner: Array2<f64>, propagate_first: bool, z: Array2<f64> },
    Propagate { input: Array2<f64> },
    Dense { input: Array2<f64>, mask: Option<Array2<f64>>, z: Array2<f64> },
    Readout { rows: usize },
}

/// Intermediate values of one forward pass, consumed by [`Model::backward`].
pub struct ForwardCache<'g> {
    ops: Vec<PreparedOperator<'g>>,
    records: Vec<Record>,
    pub output: Array2<f64>,
}

impl ForwardCache<'_> {
    /// Clamped augmented-degree count summed over operator tuples.
    pub fn clamp_count(&self) -> usize {
        self.ops.iter().map(|o| o.clamp_count()).sum()
    }
}

/// Gradients aligned with the model's weighted stages and operator tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<(Array2<f64>, Option<Array1<f64>>)>,
    pub ops: Vec<[f64; 7]>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        let weights = model
            .stages
            .iter()
            .filter_map(Stage::weights)
            .map(|w| (Array2::zeros(w.w.raw_dim()), w.bias.as_ref().map(|b| Array1::zeros(b.len()))))
            .collect();
        Self { weights, ops: vec![[0.0; 7]; model.slot.params.len()] }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for ((w, b), (ow, ob)) in self.weights.iter_mut().zip(&other.weights) {
            *w += ow;
            if let (Some(b), Some(ob)) = (b, ob) {
                *b += ob;
            }
        }
        for (o, oo) in self.ops.iter_mut().zip(&other.ops) {
            for (x, y) in o.iter_mut().zip(oo) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, f: f64) {
        for (w, b) in &mut self.weights {
            *w *= f;
            if let Some(b) = b {
                *b *= f;
            }
        }
        for o in &mut self.ops {
            o.iter_mut().for_each(|x| *x *= f);
        }
    }

    /// Same order as [`Model::flat_params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.weights {
            out.extend(w.iter());
            if let Some(b) = b {
                out.extend(b.iter());
            }
        }
        for o in &self.ops {
            out.extend_from_slice(o);
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|x| x.is_finite())
    }
}

fn dropout_mask(shape: (usize, usize), rate: f64, rng: &mut impl Rng) -> Array2<f64> {
    let keep = 1.0 - rate;
    Array2::from_shape_fn(shape, |_| if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
}

impl Model {
    pub fn new(spec: &ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        if spec.in_dim == 0 || spec.hidden == 0 || spec.classes == 0 {
            return Err(NnError::InvalidModel("dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&spec.dropout) {
            return Err(NnError::InvalidModel(format!("dropout {} outside [0, 1)", spec.dropout)));
        }
        let mut stages = Vec::new();
        let steps = match spec.arch {
            Architecture::Gcn | Architecture::Gin => {
                if spec.depth == 0 {
                    return Err(NnError::InvalidModel("depth must be at least 1".into()));
                }
                let gin = spec.arch == Architecture::Gin;
                let mut fan_in = spec.in_dim;
                for l in 0..spec.depth {
                    let last = l + 1 == spec.depth;
                    let (out, act) = match (spec.task, last) {
                        (Task::Node, true) => (spec.classes, Activation::Identity),
                        _ => (spec.hidden, Activation::Relu),
                    };
                    stages.push(Stage::Conv { weights: LayerWeights::glorot(fan_in, out, true, rng), act, step: l, gin });
                    fan_in = out;
                }
                if spec.task == Task::Graph {
                    stages.push(Stage::Readout(spec.readout));
                    stages.push(Stage::Dense {
                        weights: LayerWeights::glorot(spec.hidden, spec.classes, true, rng),
                        act: Activation::Identity,
                    });
                }
                spec.depth
            }
            Architecture::Sgc { hops } => {
                if hops == 0 {
                    return Err(NnError::InvalidModel("SGC needs at least one hop".into()));
                }
                stages.extend((0..hops).map(|step| Stage::Propagate { step }));
                if spec.task == Task::Graph {
                    stages.push(Stage::Readout(spec.readout));
                }
                stages.push(Stage::Dense {
                    weights: LayerWeights::glorot(spec.in_dim, spec.classes, true, rng),
                    act: Activation::Identity,
                });
                hops
            }
        };
        Ok(Self {
            arch: spec.arch,
            task: spec.task,
            stages,
            slot: OperatorSlot::new(spec.mode, spec.init, steps),
            dropout: spec.dropout,
            clamp: spec.clamp,
        })
    }

    pub fn arch(&self) -> Architecture {
        self.arch
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn slot(&self) -> &OperatorSlot {
        &self.slot
    }

    pub fn operator_params(&self) -> &[ParamSet] {
        &self.slot.params
    }

    pub fn set_operator_params(&mut self, params: Vec<ParamSet>) -> Result<()> {
        if params.len() != self.slot.params.len() {
            return Err(NnError::InvalidModel(format!(
                "expected {} operator tuples, got {}",
                self.slot.params.len(),
                params.len()
            )));
        }
        self.slot.params = params;
        Ok(())
    }

    pub fn clamp(&self) -> ClampEpsilon {
        self.clamp
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    /// Forward pass. Dropout is applied before every weighted stage that
    /// consumes a hidden representation, only when `rng` is given.
    pub fn forward<'g>(&self, g: &'g AttributedGraph, x: &Array2<f64>, mut rng: Option<&mut crate::rng::Rng>) -> Result<ForwardCache<'g>> {
        if x.nrows() != g.n() {
            return Err(NnError::Shape(format!("input has {} rows, graph has {} nodes", x.nrows(), g.n())));
        }
        let ops: Vec<PreparedOperator<'g>> =
            self.slot.params.iter().map(|&p| PreparedOperator::new(g, p, self.clamp)).collect();
        let mut records = Vec::with_capacity(self.stages.len());
        let mut h = x.clone();
        let mut seen_weighted = false;
        for stage in &self.stages {
            let mut take_mask = |h: &mut Array2<f64>, seen: bool| -> Option<Array2<f64>> {
                match rng.as_deref_mut() {
                    Some(r) if seen && self.dropout > 0.0 => {
                        let m = dropout_mask(h.dim(), self.dropout, r);
                        *h *= &m;
                        Some(m)
                    }
                    _ => None,
                }
            };
            match stage {
                Stage::Conv { weights, act, step, gin } => {
                    weights.check_input(&h)?;
                    let mask = take_mask(&mut h, seen_weighted);
                    let op = &ops[self.slot.index(*step)];
                    let propagate_first = !gin && weights.in_dim() <= weights.out_dim();
                    let (inner, mut z) = if propagate_first {
                        let q = op.apply(&h)?;
                        let z = q.dot(&weights.w);
                        (q, z)
                    } else {
                        let p = h.dot(&weights.w);
                        let z = if *gin { gin_aggregate(g, op.params(), &p, self.clamp) } else { op.apply(&p)? };
                        (p, z)
                    };
                    weights.add_bias(&mut z);
                    let out = act.apply(&z);
                    records.push(Record::Conv { input: h, mask, inner, propagate_first, z });
                    h = out;
                    seen_weighted = true;
                }
                Stage::Propagate { step } => {
                    let out = ops[self.slot.index(*step)].apply(&h)?;
                    records.push(Record::Propagate { input: h });
                    h = out;
                }
                Stage::Dense { weights, act } => {
                    weights.check_input(&h)?;
                    let mask = take_mask(&mut h, seen_weighted);
                    let mut z = h.dot(&weights.w);
                    weights.add_bias(&mut z);
                    let out = act.apply(&z);
                    records.push(Record::Dense { input: h, mask, z });
                    h = out;
                    seen_weighted = true;
                }
                Stage::Readout(mode) => {
                    let rows = h.nrows();
                    let v = super::layers::readout(&h, *mode)?;
                    records.push(Record::Readout { rows });
                    h = v.insert_axis(Axis(0));
                }
            }
        }
        Ok(ForwardCache { ops, records, output: h })
    }

    /// Evaluation-mode output (no dropout).
    pub fn predict(&self, g: &AttributedGraph, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(g, x, None)?.output)
    }

    /// Backpropagates `d_output` through a cached forward pass.
    pub fn backward(&self, cache: &ForwardCache<'_>, d_output: &Array2<f64>) -> Result<Gradients> {
        if d_output.dim() != cache.output.dim() {
            return Err(NnError::Shape(format!("upstream {:?} vs output {:?}", d_output.dim(), cache.output.dim())));
        }
        let mut grads = Gradients::zeros_like(self);
        let train_ops = self.slot.trainable();
        let mut widx = grads.weights.len();
        let mut d = d_output.clone();
        for (si, (stage, rec)) in self.stages.iter().zip(&cache.records).enumerate().rev() {
            // the network input needs no gradient
            let need_input = si > 0;
            match (stage, rec) {
                (Stage::Conv { weights, act, step, .. }, Record::Conv { input, mask, inner, propagate_first, z }) => {
                    widx -= 1;
                    let dz = act.backward(z, &d);
                    if let Some(b) = &mut grads.weights[widx].1 {
                        *b = dz.sum_axis(Axis(0));
                    }
                    let oi = self.slot.index(*step);
                    let op = &cache.ops[oi];
                    let mut dh = if *propagate_first {
                        grads.weights[widx].0 = inner.t().dot(&dz);
                        let dq = dz.dot(&weights.w.t());
                        if train_ops {
                            accumulate(&mut grads.ops[oi], op.param_gradient(input, &dq)?.to_array());
                        }
                        if need_input {
                            op.input_gradient(&dq)?
                        } else {
                            Array2::zeros((0, 0))
                        }
                    } else {
                        let dp = op.input_gradient(&dz)?;
                        if train_ops {
                            accumulate(&mut grads.ops[oi], op.param_gradient(inner, &dz)?.to_array());
                        }
                        grads.weights[widx].0 = input.t().dot(&dp);
                        if need_input {
                            dp.dot(&weights.w.t())
                        } else {
                            Array2::zeros((0, 0))
                        }
                    };
                    if let (Some(m), true) = (mask, need_input) {
                        dh *= m;
                    }
                    d = dh;
                }
                (Stage::Propagate { step }, Record::Propagate { input }) => {
                    let oi = self.slot.index(*step);
                    let op = &cache.ops[oi];
                    if train_ops {
                        accumulate(&mut grads.ops[oi], op.param_gradient(input, &d)?.to_array());
                    }
                    if need_input {
                        d = op.input_gradient(&d)?;
                    }
                }
                (Stage::Dense { weights, act }, Record::Dense { input, mask, z }) => {
                    widx -= 1;
                    let dz = act.backward(z, &d);
                    if let Some(b) = &mut grads.weights[widx].1 {
                        *b = dz.sum_axis(Axis(0));
                    }
                    grads.weights[widx].0 = input.t().dot(&dz);
                    let mut dh = dz.dot(&weights.w.t());
                    if let Some(m) = mask {
                        dh *= m;
                    }
                    d = dh;
                }
                (Stage::Readout(mode), Record::Readout { rows }) => {
                    let row = d.row(0).to_owned();
                    let scale = match mode {
                        ReadoutMode::Sum => 1.0,
                        ReadoutMode::Mean => 1.0 / *rows as f64,
                    };
                    d = Array2::from_shape_fn((*rows, row.len()), |(_, c)| row[c] * scale);
                }
                _ => unreachable!("records mirror stages"),
            }
        }
        Ok(grads)
    }

    /// One optimiser update. Operator tuples are updated only when the
    /// slot is trainable. Nothing changes if any gradient is non-finite.
    pub fn apply_gradients(&mut self, adam: &mut AdamState, grads: &Gradients, epoch: usize) -> Result<()> {
        let other = GroupLayout::Uniform(ParamGroup::Other);
        let grad_w: Vec<Array2<f64>> = grads.weights.iter().map(|(w, _)| w.as_standard_layout().into_owned()).collect();
        let mut op_vals: Vec<[f64; 7]> = self.slot.params.iter().map(ParamSet::to_array).collect();
        let train_ops = self.slot.trainable();
        {
            let mut blocks = Vec::new();
            let weighted = self.stages.iter_mut().filter_map(Stage::weights_mut);
            for ((lw, gw), (_, gb)) in weighted.zip(&grad_w).zip(&grads.weights) {
                let LayerWeights { w, bias } = lw;
                blocks.push(ParamBlock {
                    values: w.as_slice_mut().expect("weights are contiguous"),
                    grads: gw.as_slice().expect("standard layout"),
                    layout: other,
                });
                if let (Some(b), Some(gb)) = (bias.as_mut(), gb.as_ref()) {
                    blocks.push(ParamBlock {
                        values: b.as_slice_mut().expect("bias is contiguous"),
                        grads: gb.as_slice().expect("contiguous"),
                        layout: other,
                    });
                }
            }
            if train_ops {
                for (v, g) in op_vals.iter_mut().zip(&grads.ops) {
                    blocks.push(ParamBlock { values: v, grads: g, layout: GroupLayout::OperatorParams });
                }
            }
            adam.step(&mut blocks, epoch)?;
        }
        if train_ops {
            self.slot.params = op_vals.into_iter().map(ParamSet::from_array).collect();
        }
        Ok(())
    }

    /// All trainable scalars: weights (row-major) and biases per weighted
    /// stage, then operator tuples when trainable.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for w in self.stages.iter().filter_map(Stage::weights) {
            out.extend(w.w.iter());
            if let Some(b) = &w.bias {
                out.extend(b.iter());
            }
        }
        for p in &self.slot.params {
            out.extend_from_slice(&p.to_array());
        }
        out
    }

    pub fn set_flat_params(&mut self, v: &[f64]) -> Result<()> {
        if v.len() != self.flat_params().len() {
            return Err(NnError::Shape(format!("expected {} parameters, got {}", self.flat_params().len(), v.len())));
        }
        let mut it = v.iter().copied();
        for w in self.stages.iter_mut().filter_map(Stage::weights_mut) {
            w.w.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
            if let Some(b) = &mut w.bias {
                b.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
            }
        }
        for p in &mut self.slot.params {
            let mut a = [0.0; 7];
            a.iter_mut().for_each(|x| *x = it.next().expect("length checked"));
            *p = ParamSet::from_array(a);
        }
        Ok(())
    }

    /// Text checkpoint; floats use 17 significant digits and reload
    /// bit-exactly.
    pub fn to_checkpoint(&self) -> String {
        let mut s = String::new();
        let hops = match self.arch {
            Architecture::Sgc { hops } => hops,
            _ => 0,
        };
        let _ = writeln!(s, "pgso-model 1");
        let _ = writeln!(s, "arch {} hops {}", self.arch.name(), hops);
        let _ = writeln!(s, "task {}", self.task.name());
        let _ = writeln!(s, "dropout {}", g17(self.dropout));
        let _ = writeln!(s, "clamp {}", g17(self.clamp.get()));
        let _ = writeln!(s, "mode {} {}", self.slot.mode.name(), self.slot.params.len());
        for p in &self.slot.params {
            let _ = writeln!(s, "op {p}");
        }
        let _ = writeln!(s, "stages {}", self.stages.len());
        let write_weights = |s: &mut String, w: &LayerWeights| {
            for row in w.w.rows() {
                let vals: Vec<String> = row.iter().map(|&x| g17(x)).collect();
                let _ = writeln!(s, "w {}", vals.join(" "));
            }
            if let Some(b) = &w.bias {
                let vals: Vec<String> = b.iter().map(|&x| g17(x)).collect();
                let _ = writeln!(s, "b {}", vals.join(" "));
            }
        };
        for stage in &self.stages {
            match stage {
                Stage::Conv { weights, act, step, gin } => {
                    let _ = writeln!(
                        s,
                        "conv {} {} {} {} {} {}",
                        weights.in_dim(),
                        weights.out_dim(),
                        act.name(),
                        u8::from(weights.bias.is_some()),
                        step,
                        u8::from(*gin)
                    );
                    write_weights(&mut s, weights);
                }
                Stage::Propagate { step } => {
                    let _ = writeln!(s, "propagate {step}");
                }
                Stage::Dense { weights, act } => {
                    let _ = writeln!(
                        s,
                        "dense {} {} {} {}",
                        weights.in_dim(),
                        weights.out_dim(),
                        act.name(),
                        u8::from(weights.bias.is_some())
                    );
                    write_weights(&mut s, weights);
                }
                Stage::Readout(mode) => {
                    let _ = writeln!(s, "readout {mode}");
                }
            }
        }
        s
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
        let mut next = |want: &str| -> Result<(usize, Vec<String>)> {
            let (ln, l) = lines.next().ok_or(NnError::Checkpoint { line: 0, msg: format!("unexpected end, wanted '{want}'") })?;
            let toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
            if toks.first().map(String::as_str) != Some(want) {
                return Err(NnError::Checkpoint { line: ln, msg: format!("expected '{want}', found '{l}'") });
            }
            Ok((ln, toks))
        };
        fn num<T: FromStr>(tok: Option<&String>, line: usize) -> Result<T> {
            tok.and_then(|t| t.parse().ok()).ok_or(NnError::Checkpoint { line, msg: "invalid or missing number".into() })
        }
        let bad = |line: usize, msg: String| NnError::Checkpoint { line, msg };

        let (ln, header) = next("pgso-model")?;
        if header.get(1).map(String::as_str) != Some("1") {
            return Err(bad(ln, "unsupported checkpoint version".into()));
        }
        let (ln, a) = next("arch")?;
        let hops: usize = num(a.get(3), ln)?;
        let arch = match a.get(1).map(String::as_str) {
            Some("gcn") => Architecture::Gcn,
            Some("gin") => Architecture::Gin,
            Some("sgc") => Architecture::Sgc { hops },
            _ => return Err(bad(ln, "unknown architecture".into())),
        };
        let (ln, t) = next("task")?;
        let task: Task = t.get(1).ok_or(bad(ln, "missing task".into()))?.parse().map_err(|e| bad(ln, e))?;
        let (ln, d) = next("dropout")?;
        let dropout: f64 = num(d.get(1), ln)?;
        let (ln, c) = next("clamp")?;
        let clamp = ClampEpsilon::new(num(c.get(1), ln)?).map_err(|e| bad(ln, e.to_string()))?;
        let (ln, m) = next("mode")?;
        let mode: OperatorMode = m.get(1).ok_or(bad(ln, "missing mode".into()))?.parse().map_err(|e| bad(ln, e))?;
        let count: usize = num(m.get(2), ln)?;
        let mut params = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, o) = next("op")?;
            let record = o[1..].join(" ");
            params.push(record.parse::<ParamSet>().map_err(|e| bad(ln, e.to_string()))?);
        }
        let (ln, st) = next("stages")?;
        let n_stages: usize = num(st.get(1), ln)?;
        let mut stages = Vec::with_capacity(n_stages);
        let read_weights = |next: &mut dyn FnMut(&str) -> Result<(usize, Vec<String>)>,
                                fan_in: usize,
                                fan_out: usize,
                                bias: bool|
         -> Result<LayerWeights> {
            let mut w = Array2::zeros((fan_in, fan_out));
            for r in 0..fan_in {
                let (ln, row) = next("w")?;
                if row.len() != fan_out + 1 {
                    return Err(NnError::Checkpoint { line: ln, msg: format!("expected {fan_out} weights") });
                }
                for c in 0..fan_out {
                    w[[r, c]] = num(row.get(c + 1), ln)?;
                }
            }
            let b = if bias {
                let (ln, row) = next("b")?;
                if row.len() != fan_out + 1 {
                    return Err(NnError::Checkpoint { line: ln, msg: format!("expected {fan_out} biases") });
                }
                Some(row[1..].iter().map(|t| num(Some(t), ln)).collect::<Result<Array1<f64>>>()?)
            } else {
                None
            };
            LayerWeights::new(w, b)
        };
        for _ in 0..n_stages {
            let (ln, l) = lines.next().ok_or(bad(0, "missing stage".into()))?;
            let toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
            let act = |i: usize| -> Result<Activation> {
                toks.get(i).ok_or(bad(ln, "missing activation".into()))?.parse().map_err(|e| bad(ln, e))
            };
            let mut nx = |want: &str| -> Result<(usize, Vec<String>)> {
                let (ln, l) = lines.next().ok_or(bad(0, format!("unexpected end, wanted '{want}'")))?;
                let toks: Vec<String> = l.split_whitespace().map(str::to_string).collect();
                if toks.first().map(String::as_str) != Some(want) {
                    return Err(bad(ln, format!("expected '{want}', found '{l}'")));
                }
                Ok((ln, toks))
            };
            match toks.first().map(String::as_str) {
                Some("conv") => {
                    let (fi, fo) = (num(toks.get(1), ln)?, num(toks.get(2), ln)?);
                    let bias = num::<u8>(toks.get(4), ln)? == 1;
                    let step = num(toks.get(5), ln)?;
                    let gin = num::<u8>(toks.get(6), ln)? == 1;
                    let weights = read_weights(&mut nx, fi, fo, bias)?;
                    stages.push(Stage::Conv { weights, act: act(3)?, step, gin });
                }
                Some("dense") => {
                    let (fi, fo) = (num(toks.get(1), ln)?, num(toks.get(2), ln)?);
                    let bias = num::<u8>(toks.get(4), ln)? == 1;
                    let weights = read_weights(&mut nx, fi, fo, bias)?;
                    stages.push(Stage::Dense { weights, act: act(3)? });
                }
                Some("propagate") => stages.push(Stage::Propagate { step: num(toks.get(1), ln)? }),
                Some("readout") => {
                    let mode = toks.get(1).ok_or(bad(ln, "missing readout".into()))?.parse().map_err(|e| bad(ln, e))?;
                    stages.push(Stage::Readout(mode));
                }
                _ => return Err(bad(ln, format!("unknown stage '{l}'"))),
            }
        }
        Ok(Self { arch, task, stages, slot: OperatorSlot { mode, params }, dropout, clamp })
    }
}

fn accumulate(acc: &mut [f64; 7], v: [f64; 7]) {
    for (a, x) in acc.iter_mut().zip(v) {
        *a += x;
    }
}
