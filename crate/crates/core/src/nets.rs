//! Real-valued acceptor architectures and their forward passes.
//!
//! A [`NetworkSpec`] is an architecture tag plus a map of named weight
//! tensors. Every tensor participates in the `θ → Nθ` scaling used by the
//! asymptotic analysis, including the acceptance head.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lang::{Alphabet, LangError, SentenceMatrix};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetsError {
    #[error("shape mismatch for {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: String,
        got: String,
    },
    #[error("unknown tensor {0:?} for this architecture")]
    UnknownTensor(String),
    #[error("operation requires {expected} but network is {got}")]
    Arch { expected: String, got: Arch },
    #[error("attention over an empty sequence is undefined")]
    EmptyAttention,
    #[error("checkpoint line {line}: {message}")]
    Checkpoint { line: usize, message: String },
    #[error(transparent)]
    Lang(#[from] LangError),
}

pub type Result<T> = std::result::Result<T, NetsError>;

fn shape_err(what: impl Into<String>, expected: impl fmt::Display, got: impl fmt::Display) -> NetsError {
    NetsError::Shape {
        what: what.into(),
        expected: expected.to_string(),
        got: got.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arch {
    Srn,
    Gru,
    Lstm,
    Cnn,
    AttnEnc,
    CounterCell,
}

impl Arch {
    pub fn tag(self) -> &'static str {
        match self {
            Arch::Srn => "srn",
            Arch::Gru => "gru",
            Arch::Lstm => "lstm",
            Arch::Cnn => "cnn",
            Arch::AttnEnc => "attn-enc",
            Arch::CounterCell => "counter-cell",
        }
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Arch::Srn | Arch::Gru | Arch::Lstm | Arch::CounterCell)
    }
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "srn" => Arch::Srn,
            "gru" => Arch::Gru,
            "lstm" => Arch::Lstm,
            "cnn" => Arch::Cnn,
            "attn-enc" | "attn" => Arch::AttnEnc,
            "counter-cell" | "counter" => Arch::CounterCell,
            other => return Err(format!("unknown architecture {other:?}")),
        })
    }
}

/// Output nonlinearity applied to the LSTM cell state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputSquash {
    #[default]
    Identity,
    Tanh,
}

impl OutputSquash {
    pub fn tag(self) -> &'static str {
        match self {
            OutputSquash::Identity => "identity",
            OutputSquash::Tanh => "tanh",
        }
    }
}

/// Dense row-major matrix. Vectors are `n × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn column(values: &[f64]) -> Self {
        Self {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect()
    }

    /// `W e_j`: column `j`, i.e. the product with a one-hot vector.
    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, j)).collect()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn add3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    a.iter().zip(b).zip(c).map(|((x, y), z)| x + y + z).collect()
}

/// Architecture tag plus named weight tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub arch: Arch,
    pub alphabet: Alphabet,
    pub hidden: usize,
    /// CNN half-window: column `t` sees `x_{t-window} .. x_{t+window}`.
    pub window: usize,
    pub lstm_output: OutputSquash,
    /// Output vocabulary of an optional language-model head (`Wy`, `by`).
    pub vocab: Option<String>,
    tensors: BTreeMap<String, Tensor>,
}

impl NetworkSpec {
    /// Names and shapes of every tensor the architecture requires.
    pub fn layout(&self) -> Vec<(&'static str, usize, usize)> {
        let s = self.alphabet.size();
        let k = self.hidden;
        let mut out = match self.arch {
            Arch::Srn => vec![("W", k, s), ("U", k, k), ("b", k, 1)],
            Arch::Gru => vec![
                ("Wz", k, s),
                ("Uz", k, k),
                ("bz", k, 1),
                ("Wr", k, s),
                ("Ur", k, k),
                ("br", k, 1),
                ("Wu", k, s),
                ("Uu", k, k),
                ("bu", k, 1),
            ],
            Arch::Lstm => vec![
                ("Wf", k, s),
                ("Uf", k, k),
                ("bf", k, 1),
                ("Wi", k, s),
                ("Ui", k, k),
                ("bi", k, 1),
                ("Wo", k, s),
                ("Uo", k, k),
                ("bo", k, 1),
                ("Wc", k, s),
                ("Uc", k, k),
                ("bc", k, 1),
            ],
            Arch::Cnn => vec![("Wh", k, (2 * self.window + 1) * s), ("bh", k, 1)],
            Arch::AttnEnc => vec![("Wv", k, s), ("bv", k, 1), ("Wq", k, k)],
            Arch::CounterCell => vec![("theta", 2, 1)],
        };
        out.push(("Wa", 1, k));
        out.push(("ba", 1, 1));
        if let Some(v) = &self.vocab {
            let n = v.chars().count();
            out.push(("Wy", n, k));
            out.push(("by", n, 1));
        }
        out
    }

    /// A network of the given shape with every weight zero.
    pub fn zeros(arch: Arch, alphabet: Alphabet, hidden: usize) -> Self {
        let hidden = if arch == Arch::CounterCell { 1 } else { hidden };
        let mut net = Self {
            arch,
            alphabet,
            hidden,
            window: 0,
            lstm_output: OutputSquash::Identity,
            vocab: None,
            tensors: BTreeMap::new(),
        };
        net.reshape();
        net
    }

    pub fn with_window(mut self, window: usize) -> Self {
        self.window = window;
        self.reshape();
        self
    }

    pub fn with_vocab(mut self, vocab: &str) -> Self {
        self.vocab = Some(vocab.to_string());
        self.reshape();
        self
    }

    pub fn with_lstm_output(mut self, squash: OutputSquash) -> Self {
        self.lstm_output = squash;
        self
    }

    /// Fills every tensor with uniform noise in `[-bound, bound]`.
    pub fn randomize(&mut self, rng: &mut impl Rng, bound: f64) {
        for t in self.tensors.values_mut() {
            for v in &mut t.data {
                *v = rng.random_range(-bound..=bound);
            }
        }
    }

    fn reshape(&mut self) {
        let mut fresh = BTreeMap::new();
        for (name, r, c) in self.layout() {
            let t = match self.tensors.remove(name) {
                Some(t) if t.rows == r && t.cols == c => t,
                _ => Tensor::zeros(r, c),
            };
            fresh.insert(name.to_string(), t);
        }
        self.tensors = fresh;
    }

    pub fn tensor(&self, name: &str) -> &Tensor {
        self.tensors
            .get(name)
            .unwrap_or_else(|| panic!("{} network has no tensor {name:?}", self.arch))
    }

    pub fn tensor_mut(&mut self, name: &str) -> &mut Tensor {
        let arch = self.arch;
        self.tensors
            .get_mut(name)
            .unwrap_or_else(|| panic!("{arch} network has no tensor {name:?}"))
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    /// Replaces a tensor, checking its shape against the layout.
    pub fn set_tensor(&mut self, name: &str, t: Tensor) -> Result<()> {
        let (_, r, c) = self
            .layout()
            .into_iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| NetsError::UnknownTensor(name.to_string()))?;
        if t.rows != r || t.cols != c {
            return Err(shape_err(
                name,
                format!("{r}x{c}"),
                format!("{}x{}", t.rows, t.cols),
            ));
        }
        self.tensors.insert(name.to_string(), t);
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensors.values().map(|t| t.data.len()).sum()
    }

    /// The network with weights `N θ`.
    pub fn scaled(&self, n: f64) -> Self {
        let mut out = self.clone();
        for t in out.tensors.values_mut() {
            for v in &mut t.data {
                *v *= n;
            }
        }
        out
    }

    fn vec(&self, name: &str) -> &[f64] {
        &self.tensor(name).data
    }

    fn expect_arch(&self, arch: Arch) -> Result<()> {
        if self.arch == arch {
            Ok(())
        } else {
            Err(NetsError::Arch {
                expected: arch.tag().to_string(),
                got: self.arch,
            })
        }
    }

    fn check_step_shapes(&self, x: &[f64], h_prev: &[f64]) -> Result<()> {
        if x.len() != self.alphabet.size() {
            return Err(shape_err("input row", self.alphabet.size(), x.len()));
        }
        if h_prev.len() != self.hidden {
            return Err(shape_err("hidden state", self.hidden, h_prev.len()));
        }
        Ok(())
    }

    fn gate(&self, w: &str, u: &str, b: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
        add3(
            &self.tensor(w).matvec(x),
            &self.tensor(u).matvec(h),
            self.vec(b),
        )
    }

    /// Acceptance probability `σ(W^a h + b^a)`.
    pub fn readout(&self, h: &[f64]) -> f64 {
        let wa = self.tensor("Wa");
        sigmoid(wa.row(0).iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.vec("ba")[0])
    }

    /// Language-model logits `W^y h + b^y`.
    pub fn lm_logits(&self, h: &[f64]) -> Vec<f64> {
        self.tensor("Wy")
            .matvec(h)
            .iter()
            .zip(self.vec("by"))
            .map(|(a, b)| a + b)
            .collect()
    }
}

/// `h_t = tanh(W x_t + U h_{t-1} + b)`.
pub fn srn_step(x: &[f64], h_prev: &[f64], net: &NetworkSpec) -> Result<Vec<f64>> {
    net.expect_arch(Arch::Srn)?;
    net.check_step_shapes(x, h_prev)?;
    Ok(net
        .gate("W", "U", "b", x, h_prev)
        .into_iter()
        .map(f64::tanh)
        .collect())
}

pub fn gru_step(x: &[f64], h_prev: &[f64], net: &NetworkSpec) -> Result<Vec<f64>> {
    net.expect_arch(Arch::Gru)?;
    net.check_step_shapes(x, h_prev)?;
    let z: Vec<f64> = net.gate("Wz", "Uz", "bz", x, h_prev).into_iter().map(sigmoid).collect();
    let r: Vec<f64> = net.gate("Wr", "Ur", "br", x, h_prev).into_iter().map(sigmoid).collect();
    let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
    let u: Vec<f64> = net.gate("Wu", "Uu", "bu", x, &rh).into_iter().map(f64::tanh).collect();
    Ok((0..net.hidden)
        .map(|i| z[i] * h_prev[i] + (1.0 - z[i]) * u[i])
        .collect())
}

/// One LSTM step, returning `(h_t, c_t)`.
pub fn lstm_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    net: &NetworkSpec,
) -> Result<(Vec<f64>, Vec<f64>)> {
    net.expect_arch(Arch::Lstm)?;
    net.check_step_shapes(x, h_prev)?;
    if c_prev.len() != net.hidden {
        return Err(shape_err("cell state", net.hidden, c_prev.len()));
    }
    let f: Vec<f64> = net.gate("Wf", "Uf", "bf", x, h_prev).into_iter().map(sigmoid).collect();
    let i: Vec<f64> = net.gate("Wi", "Ui", "bi", x, h_prev).into_iter().map(sigmoid).collect();
    let o: Vec<f64> = net.gate("Wo", "Uo", "bo", x, h_prev).into_iter().map(sigmoid).collect();
    let g: Vec<f64> = net.gate("Wc", "Uc", "bc", x, h_prev).into_iter().map(f64::tanh).collect();
    let c: Vec<f64> = (0..net.hidden).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
    let h = (0..net.hidden)
        .map(|j| {
            o[j] * match net.lstm_output {
                OutputSquash::Identity => c[j],
                OutputSquash::Tanh => c[j].tanh(),
            }
        })
        .collect();
    Ok((h, c))
}

/// The two-parameter counting cell. The forget gate reads a constant unit
/// input and the input gate reads the bit in signed form, so that
/// `θ = (1, 1)` accumulates the number of ones and `θ = (-1, 1)` copies the
/// current bit.
pub fn counter_cell_step(bit: usize, h_prev: f64, theta: [f64; 2]) -> f64 {
    debug_assert!(bit <= 1);
    let signed = 2.0 * bit as f64 - 1.0;
    let f = sigmoid(theta[0]);
    let i = sigmoid(theta[1] * signed);
    f * h_prev + i
}

/// Convolution columns, pooled vector and acceptance probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnTrace {
    pub columns: Vec<Vec<f64>>,
    pub pooled: Vec<f64>,
    pub p: f64,
}

/// Window of one-hot rows around `t`, zero-padded outside the sentence,
/// flattened offset-major.
pub fn cnn_window(x: &SentenceMatrix, t: usize, window: usize) -> Vec<f64> {
    let s = x.width();
    let mut out = vec![0.0; (2 * window + 1) * s];
    for off in 0..=2 * window {
        let pos = t as isize + off as isize - window as isize;
        if pos >= 0 && (pos as usize) < x.len() {
            out[off * s + x.index(pos as usize)] = 1.0;
        }
    }
    out
}

pub fn cnn_forward(x: &SentenceMatrix, net: &NetworkSpec) -> Result<CnnTrace> {
    net.expect_arch(Arch::Cnn)?;
    if x.width() != net.alphabet.size() {
        return Err(shape_err("input width", net.alphabet.size(), x.width()));
    }
    let wh = net.tensor("Wh");
    let bh = net.vec("bh");
    let columns: Vec<Vec<f64>> = (0..x.len())
        .map(|t| {
            wh.matvec(&cnn_window(x, t, net.window))
                .iter()
                .zip(bh)
                .map(|(a, b)| (a + b).tanh())
                .collect()
        })
        .collect();
    // Max over an empty set is taken as the tanh minimum.
    let mut pooled = vec![-1.0; net.hidden];
    if !columns.is_empty() {
        pooled = vec![f64::NEG_INFINITY; net.hidden];
        for col in &columns {
            for (p, v) in pooled.iter_mut().zip(col) {
                *p = p.max(*v);
            }
        }
    }
    let p = net.readout(&pooled);
    Ok(CnnTrace { columns, pooled, p })
}

/// Unscaled dot-product attention `softmax(q Kᵀ) V`.
pub fn attention(q: &[f64], keys: &[Vec<f64>], values: &[Vec<f64>]) -> Result<Vec<f64>> {
    if keys.is_empty() {
        return Err(NetsError::EmptyAttention);
    }
    if keys.len() != values.len() {
        return Err(shape_err("value rows", keys.len(), values.len()));
    }
    let scores: Vec<f64> = keys
        .iter()
        .map(|k| k.iter().zip(q).map(|(a, b)| a * b).sum())
        .collect();
    let weights = softmax(&scores);
    let dim = values[0].len();
    let mut out = vec![0.0; dim];
    for (w, v) in weights.iter().zip(values) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    Ok(out)
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Per-step states of an acceptor run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HiddenTrace {
    /// `h_t` for `t = 1..n` (convolution columns for a CNN, attention
    /// summaries for an attention encoder).
    pub h: Vec<Vec<f64>>,
    /// LSTM cell states.
    pub c: Vec<Vec<f64>>,
    /// Attention encoder values `v_t`.
    pub values: Vec<Vec<f64>>,
    /// CNN pooled vector.
    pub pooled: Vec<f64>,
    pub p: f64,
}

impl HiddenTrace {
    /// The state the acceptance head reads.
    pub fn final_state(&self, hidden: usize) -> Vec<f64> {
        if !self.pooled.is_empty() {
            return self.pooled.clone();
        }
        self.h.last().cloned().unwrap_or_else(|| vec![0.0; hidden])
    }
}

/// Runs the acceptor on `x`; recurrent networks start from `h_0 = c_0 = 0`
/// and are read out at the last step.
pub fn acceptor_forward(net: &NetworkSpec, x: &SentenceMatrix) -> Result<HiddenTrace> {
    if x.width() != net.alphabet.size() {
        return Err(shape_err("input width", net.alphabet.size(), x.width()));
    }
    let k = net.hidden;
    let mut trace = HiddenTrace::default();
    match net.arch {
        Arch::Srn | Arch::Gru => {
            let mut h = vec![0.0; k];
            for t in 0..x.len() {
                let row = x.row(t);
                h = if net.arch == Arch::Srn {
                    srn_step(&row, &h, net)?
                } else {
                    gru_step(&row, &h, net)?
                };
                trace.h.push(h.clone());
            }
        }
        Arch::Lstm => {
            let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
            for t in 0..x.len() {
                (h, c) = lstm_step(&x.row(t), &h, &c, net)?;
                trace.h.push(h.clone());
                trace.c.push(c.clone());
            }
        }
        Arch::CounterCell => {
            if net.alphabet.size() != 2 {
                return Err(shape_err("counter cell alphabet", 2, net.alphabet.size()));
            }
            let th = net.vec("theta");
            let mut h = 0.0;
            for t in 0..x.len() {
                h = counter_cell_step(x.index(t), h, [th[0], th[1]]);
                trace.h.push(vec![h]);
            }
        }
        Arch::Cnn => {
            let cnn = cnn_forward(x, net)?;
            trace.h = cnn.columns;
            trace.pooled = cnn.pooled;
            trace.p = cnn.p;
            return Ok(trace);
        }
        Arch::AttnEnc => {
            let wv = net.tensor("Wv");
            let bv = net.vec("bv");
            let wq = net.tensor("Wq");
            for t in 0..x.len() {
                let v: Vec<f64> = wv
                    .col(x.index(t))
                    .iter()
                    .zip(bv)
                    .map(|(a, b)| sigmoid(a + b))
                    .collect();
                trace.values.push(v);
                let q = wq.matvec(&trace.values[t]);
                let h = attention(&q, &trace.values, &trace.values)?;
                trace.h.push(h);
            }
        }
    }
    trace.p = net.readout(&trace.final_state(k));
    Ok(trace)
}

const CHECKPOINT_MAGIC: &str = "neural-automata-checkpoint 1";

impl NetworkSpec {
    /// Text checkpoint. Numbers are written in shortest round-trip form so
    /// that reading back yields bit-identical weights.
    pub fn to_checkpoint(&self) -> String {
        let mut out = String::new();
        out.push_str(CHECKPOINT_MAGIC);
        out.push('\n');
        out.push_str(&format!("arch {}\n", self.arch));
        out.push_str(&format!("alphabet {}\n", self.alphabet));
        out.push_str(&format!("hidden {}\n", self.hidden));
        out.push_str(&format!("window {}\n", self.window));
        out.push_str(&format!("lstm_output {}\n", self.lstm_output.tag()));
        if let Some(v) = &self.vocab {
            out.push_str(&format!("vocab {v}\n"));
        }
        for (name, t) in &self.tensors {
            out.push_str(&format!("tensor {name} {} {}\n", t.rows, t.cols));
            for r in 0..t.rows {
                let row: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
                out.push_str(&row.join(" "));
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self> {
        let err = |line: usize, m: &str| NetsError::Checkpoint {
            line,
            message: m.to_string(),
        };
        let lines: Vec<&str> = text.lines().collect();
        if lines.first().map(|l| l.trim()) != Some(CHECKPOINT_MAGIC) {
            return Err(err(1, "missing checkpoint header"));
        }
        let mut header: BTreeMap<&str, &str> = BTreeMap::new();
        let mut idx = 1;
        while idx < lines.len() && !lines[idx].starts_with("tensor") && lines[idx] != "end" {
            let (k, v) = lines[idx]
                .split_once(' ')
                .ok_or_else(|| err(idx + 1, "expected `key value`"))?;
            header.insert(k, v.trim());
            idx += 1;
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| err(1, &format!("missing `{k}`")));
        let arch: Arch = get("arch")?.parse().map_err(|e: String| err(2, &e))?;
        let alphabet = Alphabet::parse(get("alphabet")?)?;
        let hidden: usize = get("hidden")?.parse().map_err(|_| err(4, "bad hidden size"))?;
        let window: usize = get("window")?.parse().map_err(|_| err(5, "bad window"))?;
        let squash = match get("lstm_output")? {
            "identity" => OutputSquash::Identity,
            "tanh" => OutputSquash::Tanh,
            _ => return Err(err(6, "bad lstm_output")),
        };
        let mut net = NetworkSpec::zeros(arch, alphabet, hidden)
            .with_window(window)
            .with_lstm_output(squash);
        if let Some(v) = header.get("vocab") {
            net = net.with_vocab(v);
        }
        let mut seen = std::collections::BTreeSet::new();
        while idx < lines.len() && lines[idx] != "end" {
            let parts: Vec<&str> = lines[idx].split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "tensor" {
                return Err(err(idx + 1, "expected `tensor NAME ROWS COLS`"));
            }
            let rows: usize = parts[2].parse().map_err(|_| err(idx + 1, "bad rows"))?;
            let cols: usize = parts[3].parse().map_err(|_| err(idx + 1, "bad cols"))?;
            let mut data = Vec::with_capacity(rows * cols);
            for r in 0..rows {
                let ln = idx + 2 + r;
                let line = lines.get(ln - 1).ok_or_else(|| err(ln, "truncated tensor"))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|v| v.parse::<f64>().map_err(|_| err(ln, "bad number")))
                    .collect::<Result<_>>()?;
                if vals.len() != cols {
                    return Err(err(ln, "wrong number of columns"));
                }
                data.extend(vals);
            }
            net.set_tensor(parts[1], Tensor { rows, cols, data })?;
            seen.insert(parts[1].to_string());
            idx += 1 + rows;
        }
        if idx >= lines.len() {
            return Err(err(lines.len(), "missing `end`"));
        }
        if let Some((missing, _, _)) = net.layout().into_iter().find(|(n, _, _)| !seen.contains(*n)) {
            return Err(err(idx + 1, &format!("tensor {missing:?} missing")));
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::encode_one_hot;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bin() -> Alphabet {
        Alphabet::binary()
    }

    fn random_net(arch: Arch, hidden: usize, seed: u64, bound: f64) -> NetworkSpec {
        let mut net = NetworkSpec::zeros(arch, bin(), hidden).with_window(1);
        net.randomize(&mut ChaCha8Rng::seed_from_u64(seed), bound);
        net
    }

    #[test]
    fn srn_examples() {
        let mut net = NetworkSpec::zeros(Arch::Srn, bin(), 1);
        assert_eq!(srn_step(&[1.0, 0.0], &[0.0], &net).unwrap(), vec![0.0]);
        net.set_tensor("W", Tensor::from_rows(&[vec![1.0, 0.0]])).unwrap();
        let h = srn_step(&[1.0, 0.0], &[0.0], &net).unwrap();
        assert!((h[0] - 1f64.tanh()).abs() < 1e-12);
        assert!((h[0] - 0.7616).abs() < 1e-4);
        let h = srn_step(&[1.0, 0.0], &[0.0], &net.scaled(100.0)).unwrap();
        assert!((h[0] - 1.0).abs() < 1e-6);
        assert!(matches!(
            srn_step(&[1.0], &[0.0], &net),
            Err(NetsError::Shape { .. })
        ));
    }

    #[test]
    fn gru_gate_saturation() {
        let net = NetworkSpec::zeros(Arch::Gru, bin(), 2);
        assert_eq!(gru_step(&[1.0, 0.0], &[0.0, 0.0], &net).unwrap(), vec![0.0, 0.0]);

        let mut keep = random_net(Arch::Gru, 2, 3, 1.0);
        keep.set_tensor("bz", Tensor::column(&[40.0, 40.0])).unwrap();
        let h_prev = [0.3, -0.6];
        let h = gru_step(&[0.0, 1.0], &h_prev, &keep).unwrap();
        for (a, b) in h.iter().zip(h_prev) {
            assert!((a - b).abs() < 1e-9);
        }

        let mut rewrite = keep.clone();
        rewrite.set_tensor("bz", Tensor::column(&[-40.0, -40.0])).unwrap();
        let h = gru_step(&[0.0, 1.0], &h_prev, &rewrite).unwrap();
        let r: Vec<f64> = rewrite
            .gate("Wr", "Ur", "br", &[0.0, 1.0], &h_prev)
            .into_iter()
            .map(sigmoid)
            .collect();
        let rh: Vec<f64> = r.iter().zip(h_prev).map(|(a, b)| a * b).collect();
        let u: Vec<f64> = rewrite
            .gate("Wu", "Uu", "bu", &[0.0, 1.0], &rh)
            .into_iter()
            .map(f64::tanh)
            .collect();
        for (a, b) in h.iter().zip(u) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn saturated_lstm(f: f64, i: f64, g: f64) -> NetworkSpec {
        let mut net = NetworkSpec::zeros(Arch::Lstm, bin(), 1);
        net.set_tensor("bf", Tensor::column(&[f])).unwrap();
        net.set_tensor("bi", Tensor::column(&[i])).unwrap();
        net.set_tensor("bc", Tensor::column(&[g])).unwrap();
        net.set_tensor("bo", Tensor::column(&[40.0])).unwrap();
        net
    }

    #[test]
    fn lstm_examples() {
        let keep = saturated_lstm(40.0, -40.0, 40.0);
        let (_, c) = lstm_step(&[1.0, 0.0], &[0.0], &[3.0], &keep).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-9);
        let add = saturated_lstm(40.0, 40.0, 40.0);
        let (h, c) = lstm_step(&[1.0, 0.0], &[0.0], &[3.0], &add).unwrap();
        assert!((c[0] - 4.0).abs() < 1e-9);
        assert!((h[0] - 4.0).abs() < 1e-9, "identity output by default");
        let zero = NetworkSpec::zeros(Arch::Lstm, bin(), 1);
        let (h, c) = lstm_step(&[1.0, 0.0], &[0.0], &[0.0], &zero).unwrap();
        assert_eq!((h[0], c[0]), (0.0, 0.0));
        let squashed = add.clone().with_lstm_output(OutputSquash::Tanh);
        let (h, _) = lstm_step(&[1.0, 0.0], &[0.0], &[3.0], &squashed).unwrap();
        assert!(h[0] < 1.0);
    }

    #[test]
    fn counter_cell_examples() {
        let plus = [50.0, 50.0];
        let mut h = 0.0;
        for bit in [1, 0, 1] {
            h = counter_cell_step(bit, h, plus);
        }
        assert!((h - 2.0).abs() < 1e-9);
        let id = [-50.0, 50.0];
        let mut h = 0.0;
        for bit in [1, 0] {
            h = counter_cell_step(bit, h, id);
        }
        assert!(h.abs() < 1e-9);
    }

    #[test]
    fn cnn_zero_weights_and_detector() {
        let net = NetworkSpec::zeros(Arch::Cnn, Alphabet::parse("ab").unwrap(), 1).with_window(1);
        let x = encode_one_hot("abba", &net.alphabet).unwrap();
        let tr = cnn_forward(&x, &net).unwrap();
        assert_eq!(tr.pooled, vec![0.0]);
        assert_eq!(tr.p, 0.5);

        // Filter fires when the centre symbol is b.
        let mut det = net.clone();
        det.set_tensor("Wh", Tensor::from_rows(&[vec![0.0, 0.0, 0.0, 2.0, 0.0, 0.0]])).unwrap();
        det.set_tensor("bh", Tensor::column(&[-1.0])).unwrap();
        let det = det.scaled(30.0);
        let with_b = cnn_forward(&encode_one_hot("aab", &det.alphabet).unwrap(), &det).unwrap();
        let without = cnn_forward(&encode_one_hot("aaa", &det.alphabet).unwrap(), &det).unwrap();
        assert!((with_b.pooled[0] - 1.0).abs() < 1e-9);
        assert!((without.pooled[0] + 1.0).abs() < 1e-9);

        let empty = cnn_forward(&encode_one_hot("", &det.alphabet).unwrap(), &det).unwrap();
        assert_eq!(empty.pooled, vec![-1.0]);
    }

    #[test]
    fn attention_examples() {
        let v = vec![vec![1.0, 2.0]];
        assert_eq!(attention(&[3.0, 4.0], &v, &v).unwrap(), vec![1.0, 2.0]);
        let keys = vec![vec![1.0], vec![2.0], vec![3.0]];
        let vals = vec![vec![0.0], vec![3.0], vec![6.0]];
        let out = attention(&[0.0], &keys, &vals).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-12);
        let keys = vec![vec![0.0], vec![1.0], vec![0.0]];
        let out = attention(&[60.0], &keys, &vals).unwrap();
        assert!((out[0] - 3.0).abs() < 1e-9);
        assert_eq!(attention(&[1.0], &[], &[]), Err(NetsError::EmptyAttention));
    }

    #[test]
    fn zero_weight_acceptor_outputs_half() {
        for arch in [Arch::Srn, Arch::Gru, Arch::Lstm, Arch::AttnEnc] {
            let net = NetworkSpec::zeros(arch, bin(), 3);
            let x = encode_one_hot("0110", &bin()).unwrap();
            assert_eq!(acceptor_forward(&net, &x).unwrap().p, 0.5, "{arch}");
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_identical() {
        for (i, arch) in [Arch::Srn, Arch::Gru, Arch::Lstm, Arch::Cnn, Arch::AttnEnc, Arch::CounterCell]
            .into_iter()
            .enumerate()
        {
            let mut net = random_net(arch, 3, i as u64, 7.0);
            net.tensor_mut("Wa").data[0] = 1e-300;
            net.tensor_mut("ba").data[0] = -0.1;
            let back = NetworkSpec::from_checkpoint(&net.to_checkpoint()).unwrap();
            assert_eq!(back, net);
            for ((_, a), (_, b)) in net.tensors().zip(back.tensors()) {
                for (x, y) in a.data.iter().zip(&b.data) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
        let lm = random_net(Arch::Lstm, 2, 9, 1.0).with_vocab("abc$");
        assert_eq!(NetworkSpec::from_checkpoint(&lm.to_checkpoint()).unwrap(), lm);
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let net = random_net(Arch::Srn, 2, 1, 1.0);
        let text = net.to_checkpoint();
        assert!(NetworkSpec::from_checkpoint(&text.replace("tensor U 2 2", "tensor U 3 2")).is_err());
        assert!(NetworkSpec::from_checkpoint(&text.replace("end\n", "")).is_err());
        assert!(NetworkSpec::from_checkpoint(&text[1..]).is_err());
        let truncated: String = text.lines().take(8).collect::<Vec<_>>().join("\n");
        assert!(NetworkSpec::from_checkpoint(&truncated).is_err());
    }

    proptest! {
        #[test]
        fn squashed_recurrent_states_stay_in_open_interval(
            seed in any::<u64>(),
            bits in proptest::collection::vec(0usize..2, 1..12),
            bound in 0.1f64..2.0,
        ) {
            for arch in [Arch::Srn, Arch::Gru] {
                let net = random_net(arch, 3, seed, bound);
                let x = SentenceMatrix::from_indices(2, bits.clone());
                let tr = acceptor_forward(&net, &x).unwrap();
                for h in &tr.h {
                    prop_assert!(h.iter().all(|v| v.abs() < 1.0));
                }
            }
        }

        #[test]
        fn attention_stays_in_convex_hull(
            q in proptest::collection::vec(-5.0f64..5.0, 2),
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..8),
        ) {
            let out = attention(&q, &rows, &rows).unwrap();
            for d in 0..2 {
                let lo = rows.iter().map(|r| r[d]).fold(f64::INFINITY, f64::min);
                let hi = rows.iter().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out[d] >= lo - 1e-9 && out[d] <= hi + 1e-9);
            }
        }

        #[test]
        fn attention_argmax_is_scale_invariant(
            q in proptest::collection::vec(-5.0f64..5.0, 2),
            keys in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 2), 1..8),
        ) {
            let argmax = |q: &[f64]| {
                let scores: Vec<f64> = keys.iter().map(|k| k[0] * q[0] + k[1] * q[1]).collect();
                let w = softmax(&scores);
                (0..w.len()).max_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap()).unwrap()
            };
            let doubled: Vec<f64> = q.iter().map(|v| 2.0 * v).collect();
            prop_assert_eq!(argmax(&q), argmax(&doubled));
        }

        #[test]
        fn saturated_lstm_cell_moves_by_a_c_plus_b(
            c_prev in -10i32..10,
            f in any::<bool>(), i in any::<bool>(), g in any::<bool>(),
        ) {
            let big = |on: bool| if on { 60.0 } else { -60.0 };
            let net = saturated_lstm(big(f), big(i), big(g));
            let (_, c) = lstm_step(&[1.0, 0.0], &[0.0], &[c_prev as f64], &net).unwrap();
            let a = if f { 1.0 } else { 0.0 };
            let b = if i { if g { 1.0 } else { -1.0 } } else { 0.0 };
            prop_assert!((c[0] - (a * c_prev as f64 + b)).abs() < 1e-9);
        }
    }
}
