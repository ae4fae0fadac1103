//! Trainable language models and encoder-decoders, each with a taped
//! forward pass for training and a plain forward pass for evaluation.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::autodiff::{Tape, Var};
use crate::lang::{Alphabet, END};
use crate::nets::{gru_step, lstm_step, softmax, srn_step, Arch, NetworkSpec, OutputSquash, Tensor};

/// Named trainable tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamSet {
    pub names: Vec<String>,
    pub values: Vec<Tensor>,
}

impl ParamSet {
    /// Every tensor of `net` except the acceptance head, under `prefix`.
    pub fn from_net(net: &NetworkSpec, prefix: &str) -> Self {
        let mut out = Self {
            names: Vec::new(),
            values: Vec::new(),
        };
        out.extend_from_net(net, prefix);
        out
    }

    pub fn extend_from_net(&mut self, net: &NetworkSpec, prefix: &str) {
        for (name, t) in net.tensors() {
            if name == "Wa" || name == "ba" {
                continue;
            }
            self.names.push(format!("{prefix}{name}"));
            self.values.push(t.clone());
        }
    }

    pub fn push(&mut self, name: &str, t: Tensor) {
        self.names.push(name.to_string());
        self.values.push(t);
    }

    pub fn index(&self, name: &str) -> usize {
        self.names
            .iter()
            .position(|n| n == name)
            .unwrap_or_else(|| panic!("no parameter {name:?}"))
    }

    pub fn get(&self, name: &str) -> &Tensor {
        &self.values[self.index(name)]
    }

    /// Copies the tensors stored under `prefix` back into `net`.
    pub fn write_to(&self, net: &mut NetworkSpec, prefix: &str) {
        for (name, t) in self.names.iter().zip(&self.values) {
            if let Some(local) = name.strip_prefix(prefix) {
                if net.tensors().any(|(n, _)| n == local) {
                    net.set_tensor(local, t.clone()).expect("shapes are preserved");
                }
            }
        }
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.values.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(|t| t.data.len()).sum()
    }

    /// Records every tensor on the tape, in order.
    pub fn load(&self, tape: &mut Tape) -> Vec<Var> {
        self.values.iter().enumerate().map(|(i, t)| tape.param(i, t)).collect()
    }
}

/// Adds iid `N(0, sd²)` noise to a state vector; `sd = 0` returns it unchanged.
pub fn inject_noise(state: &[f64], sd: f64, rng: &mut impl Rng) -> Vec<f64> {
    if sd == 0.0 {
        return state.to_vec();
    }
    let normal = Normal::new(0.0, sd).expect("finite non-negative sd");
    state.iter().map(|v| v + normal.sample(rng)).collect()
}

/// Resolved parameter handles of one recurrent layer.
#[derive(Debug, Clone, Copy)]
struct CellVars {
    arch: Arch,
    squash: OutputSquash,
    /// `(W, U, b)` per gate in the order of the architecture's layout.
    gates: [(Var, Var, Var); 4],
}

impl CellVars {
    fn resolve(arch: Arch, squash: OutputSquash, params: &ParamSet, vars: &[Var], prefix: &str) -> Self {
        let names: &[&str] = match arch {
            Arch::Srn => &[""],
            Arch::Gru => &["z", "r", "u"],
            Arch::Lstm => &["f", "i", "o", "c"],
            other => panic!("{other} is not a trainable recurrent layer"),
        };
        let get = |n: String| vars[params.index(&format!("{prefix}{n}"))];
        let mut gates = [(vars[0], vars[0], vars[0]); 4];
        for (slot, g) in gates.iter_mut().zip(names) {
            *slot = (get(format!("W{g}")), get(format!("U{g}")), get(format!("b{g}")));
        }
        Self { arch, squash, gates }
    }

    fn pre(&self, tape: &mut Tape, gate: usize, x: usize, h: Var) -> Var {
        let (w, u, b) = self.gates[gate];
        tape.gate(w, x, u, h, b)
    }

    /// One step; `noise` perturbs `h_{t-1}` (SRN, GRU) or `c_{t-1}` (LSTM).
    fn step(&self, tape: &mut Tape, x: usize, h: Var, c: Var, noise: Option<Var>) -> (Var, Var) {
        match self.arch {
            Arch::Srn => {
                let h = noise.map_or(h, |n| tape.add(h, n));
                let z = self.pre(tape, 0, x, h);
                (tape.tanh(z), c)
            }
            Arch::Gru => {
                let h = noise.map_or(h, |n| tape.add(h, n));
                let zp = self.pre(tape, 0, x, h);
                let z = tape.sigmoid(zp);
                let rp = self.pre(tape, 1, x, h);
                let r = tape.sigmoid(rp);
                let rh = tape.mul(r, h);
                let up = self.pre(tape, 2, x, rh);
                let u = tape.tanh(up);
                let keep = tape.mul(z, h);
                let nz = tape.one_minus(z);
                let write = tape.mul(nz, u);
                (tape.add(keep, write), c)
            }
            Arch::Lstm => {
                let c = noise.map_or(c, |n| tape.add(c, n));
                let fp = self.pre(tape, 0, x, h);
                let f = tape.sigmoid(fp);
                let ip = self.pre(tape, 1, x, h);
                let i = tape.sigmoid(ip);
                let op = self.pre(tape, 2, x, h);
                let o = tape.sigmoid(op);
                let gp = self.pre(tape, 3, x, h);
                let g = tape.tanh(gp);
                let kept = tape.mul(f, c);
                let added = tape.mul(i, g);
                let c = tape.add(kept, added);
                let out = match self.squash {
                    OutputSquash::Identity => c,
                    OutputSquash::Tanh => tape.tanh(c),
                };
                (tape.mul(o, out), c)
            }
            _ => unreachable!("checked in resolve"),
        }
    }
}

fn plain_step(net: &NetworkSpec, x: usize, h: &[f64], c: &[f64], noise: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
    let mut row = vec![0.0; net.alphabet.size()];
    row[x] = 1.0;
    let add = |v: &[f64]| -> Vec<f64> {
        match noise {
            Some(n) => v.iter().zip(n).map(|(a, b)| a + b).collect(),
            None => v.to_vec(),
        }
    };
    match net.arch {
        Arch::Srn => (srn_step(&row, &add(h), net).expect("shapes"), c.to_vec()),
        Arch::Gru => (gru_step(&row, &add(h), net).expect("shapes"), c.to_vec()),
        Arch::Lstm => lstm_step(&row, h, &add(c), net).expect("shapes"),
        other => panic!("{other} is not a trainable recurrent layer"),
    }
}

/// Next-symbol language model over a recurrent layer with a softmax head.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    pub net: NetworkSpec,
}

impl LanguageModel {
    pub fn new(arch: Arch, input: Alphabet, vocab: &str, hidden: usize, squash: OutputSquash) -> Self {
        Self {
            net: NetworkSpec::zeros(arch, input, hidden)
                .with_vocab(vocab)
                .with_lstm_output(squash),
        }
    }

    pub fn params(&self) -> ParamSet {
        ParamSet::from_net(&self.net, "")
    }

    pub fn set_params(&mut self, p: &ParamSet) {
        p.write_to(&mut self.net, "");
    }

    /// Summed cross-entropy of `targets` given `input`, recorded on `tape`.
    /// `noise[t]` is added to the carried state before step `t`.
    pub fn loss_on_tape(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        input: &[usize],
        targets: &[usize],
        noise: Option<&[Vec<f64>]>,
    ) -> Var {
        let vars = params.load(tape);
        let cell = CellVars::resolve(self.net.arch, self.net.lstm_output, params, &vars, "");
        let wy = vars[params.index("Wy")];
        let by = vars[params.index("by")];
        let k = self.net.hidden;
        let mut h = tape.constant(vec![0.0; k]);
        let mut c = tape.constant(vec![0.0; k]);
        let mut losses = Vec::with_capacity(input.len());
        for (t, (&x, &y)) in input.iter().zip(targets).enumerate() {
            let n = noise.map(|n| tape.constant(n[t].clone()));
            (h, c) = cell.step(tape, x, h, c, n);
            let lin = tape.matvec(wy, h);
            let logits = tape.add(lin, by);
            losses.push(tape.softmax_ce(logits, y));
        }
        tape.sum(losses)
    }

    /// The same loss computed without the tape.
    pub fn loss_plain(&self, input: &[usize], targets: &[usize], noise: Option<&[Vec<f64>]>) -> f64 {
        let k = self.net.hidden;
        let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
        let mut total = 0.0;
        for (t, (&x, &y)) in input.iter().zip(targets).enumerate() {
            (h, c) = plain_step(&self.net, x, &h, &c, noise.map(|n| n[t].as_slice()));
            let z = self.net.lm_logits(&h);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - z[y];
        }
        total
    }

    /// Greedy next-symbol prediction at every position.
    pub fn predict(&self, input: &[usize]) -> Vec<usize> {
        let k = self.net.hidden;
        let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
        input
            .iter()
            .map(|&x| {
                (h, c) = plain_step(&self.net, x, &h, &c, None);
                argmax(&self.net.lm_logits(&h))
            })
            .collect()
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub const START: char = '^';

/// LSTM encoder-decoder over binary strings, optionally with dot-product
/// attention of the decoder state over the encoder states.
#[derive(Debug, Clone, PartialEq)]
pub struct Seq2Seq {
    pub encoder: NetworkSpec,
    pub decoder: NetworkSpec,
    /// `(W^c, b^c)` of `h̃ = tanh(W^c [ctx; h] + b^c)`.
    pub attention: Option<(Tensor, Tensor)>,
}

impl Seq2Seq {
    pub fn new(hidden: usize, attention: bool) -> Self {
        let bin = Alphabet::binary();
        let dec_in = Alphabet::new(['0', '1', START]).expect("distinct symbols");
        let vocab: String = ['0', '1', END].iter().collect();
        Self {
            encoder: NetworkSpec::zeros(Arch::Lstm, bin, hidden).with_lstm_output(OutputSquash::Tanh),
            decoder: NetworkSpec::zeros(Arch::Lstm, dec_in, hidden)
                .with_vocab(&vocab)
                .with_lstm_output(OutputSquash::Tanh),
            attention: attention.then(|| (Tensor::zeros(hidden, 2 * hidden), Tensor::zeros(hidden, 1))),
        }
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden
    }

    pub fn params(&self) -> ParamSet {
        let mut p = ParamSet::from_net(&self.encoder, "enc.");
        p.extend_from_net(&self.decoder, "dec.");
        if let Some((wc, bc)) = &self.attention {
            p.push("attn.Wc", wc.clone());
            p.push("attn.bc", bc.clone());
        }
        p
    }

    pub fn set_params(&mut self, p: &ParamSet) {
        p.write_to(&mut self.encoder, "enc.");
        p.write_to(&mut self.decoder, "dec.");
        if let Some((wc, bc)) = &mut self.attention {
            *wc = p.get("attn.Wc").clone();
            *bc = p.get("attn.bc").clone();
        }
    }

    /// Decoder inputs and targets for teacher forcing: `^ y` and `y $`.
    pub fn teacher_pairs(target: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut inputs = vec![2];
        inputs.extend_from_slice(target);
        let mut outs = target.to_vec();
        outs.push(2);
        (inputs, outs)
    }

    pub fn loss_on_tape(&self, tape: &mut Tape, params: &ParamSet, input: &[usize], target: &[usize]) -> Var {
        let vars = params.load(tape);
        let enc = CellVars::resolve(Arch::Lstm, OutputSquash::Tanh, params, &vars, "enc.");
        let dec = CellVars::resolve(Arch::Lstm, OutputSquash::Tanh, params, &vars, "dec.");
        let wy = vars[params.index("dec.Wy")];
        let by = vars[params.index("dec.by")];
        let attn = self
            .attention
            .as_ref()
            .map(|_| (vars[params.index("attn.Wc")], vars[params.index("attn.bc")]));
        let k = self.hidden();
        let mut h = tape.constant(vec![0.0; k]);
        let mut c = tape.constant(vec![0.0; k]);
        let mut states = Vec::with_capacity(input.len());
        for &x in input {
            (h, c) = enc.step(tape, x, h, c, None);
            states.push(h);
        }
        let (dec_in, dec_out) = Self::teacher_pairs(target);
        let mut losses = Vec::with_capacity(dec_in.len());
        for (&x, &y) in dec_in.iter().zip(&dec_out) {
            (h, c) = dec.step(tape, x, h, c, None);
            let top = match attn {
                Some((wc, bc)) if !states.is_empty() => {
                    let scores: Vec<Var> = states.iter().map(|s| tape.dot(h, *s)).collect();
                    let scores = tape.stack(scores);
                    let alpha = tape.softmax(scores);
                    let ctx = tape.weighted_sum(alpha, states.clone());
                    let cat = tape.concat(ctx, h);
                    let lin = tape.matvec(wc, cat);
                    let pre = tape.add(lin, bc);
                    tape.tanh(pre)
                }
                _ => h,
            };
            let lin = tape.matvec(wy, top);
            let logits = tape.add(lin, by);
            losses.push(tape.softmax_ce(logits, y));
        }
        tape.sum(losses)
    }

    fn encode(&self, input: &[usize]) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let k = self.hidden();
        let (mut h, mut c) = (vec![0.0; k], vec![0.0; k]);
        let mut states = Vec::with_capacity(input.len());
        for &x in input {
            (h, c) = plain_step(&self.encoder, x, &h, &c, None);
            states.push(h.clone());
        }
        (h, c, states)
    }

    fn logits(&self, h: &[f64], states: &[Vec<f64>]) -> Vec<f64> {
        match &self.attention {
            Some((wc, bc)) if !states.is_empty() => {
                let scores: Vec<f64> = states
                    .iter()
                    .map(|s| s.iter().zip(h).map(|(a, b)| a * b).sum())
                    .collect();
                let alpha = softmax(&scores);
                let mut cat = vec![0.0; h.len()];
                for (a, s) in alpha.iter().zip(states) {
                    for (acc, v) in cat.iter_mut().zip(s) {
                        *acc += a * v;
                    }
                }
                cat.extend_from_slice(h);
                let top: Vec<f64> = wc
                    .matvec(&cat)
                    .iter()
                    .zip(&bc.data)
                    .map(|(a, b)| (a + b).tanh())
                    .collect();
                self.decoder.lm_logits(&top)
            }
            _ => self.decoder.lm_logits(h),
        }
    }

    pub fn loss_plain(&self, input: &[usize], target: &[usize]) -> f64 {
        let (mut h, mut c, states) = self.encode(input);
        let (dec_in, dec_out) = Self::teacher_pairs(target);
        let mut total = 0.0;
        for (&x, &y) in dec_in.iter().zip(&dec_out) {
            (h, c) = plain_step(&self.decoder, x, &h, &c, None);
            let z = self.logits(&h, &states);
            let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - z[y];
        }
        total
    }

    /// Greedy decoding fed with its own predictions, stopping at the end
    /// marker or after `max_len` symbols.
    pub fn decode(&self, input: &[usize], max_len: usize) -> Vec<usize> {
        let (mut h, mut c, states) = self.encode(input);
        let mut out = Vec::new();
        let mut prev = 2;
        while out.len() < max_len {
            (h, c) = plain_step(&self.decoder, prev, &h, &c, None);
            let y = argmax(&self.logits(&h, &states));
            if y == 2 {
                break;
            }
            out.push(y);
            prev = y;
        }
        out
    }
}

pub const SEQ2SEQ_MAGIC: &str = "neural-automata-seq2seq 1";

fn tensor_text(name: &str, t: &Tensor) -> String {
    let mut out = format!("{name} {} {}\n", t.rows, t.cols);
    for r in 0..t.rows {
        let row: Vec<String> = t.row(r).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

fn parse_tensor<'a>(lines: &mut impl Iterator<Item = &'a str>, name: &str) -> Result<Tensor, String> {
    let head = lines.next().ok_or(format!("missing tensor {name}"))?;
    let mut parts = head.split_whitespace();
    if parts.next() != Some(name) {
        return Err(format!("expected tensor {name}, found {head:?}"));
    }
    let mut dim = || -> Result<usize, String> {
        parts.next().and_then(|d| d.parse().ok()).ok_or(format!("bad shape for {name}"))
    };
    let (rows, cols) = (dim()?, dim()?);
    let mut t = Tensor::zeros(rows, cols);
    for r in 0..rows {
        let row = lines.next().ok_or(format!("{name}: missing row {r}"))?;
        let vals: Vec<f64> = row
            .split_whitespace()
            .map(|v| v.parse().map_err(|_| format!("{name}: bad number {v:?}")))
            .collect::<Result<_, _>>()?;
        if vals.len() != cols {
            return Err(format!("{name}: row {r} has {} values, expected {cols}", vals.len()));
        }
        for (c, v) in vals.into_iter().enumerate() {
            t.set(r, c, v);
        }
    }
    Ok(t)
}

impl Seq2Seq {
    /// Text checkpoint: the encoder and decoder checkpoints followed by the
    /// attention combination layer, if any.
    pub fn to_text(&self) -> String {
        let mut out = format!("{SEQ2SEQ_MAGIC}\n== encoder\n{}== decoder\n{}", self.encoder.to_checkpoint(), self.decoder.to_checkpoint());
        if let Some((wc, bc)) = &self.attention {
            out.push_str("== attention\n");
            out.push_str(&tensor_text("Wc", wc));
            out.push_str(&tensor_text("bc", bc));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, String> {
        let body = text
            .strip_prefix(SEQ2SEQ_MAGIC)
            .ok_or("missing seq2seq checkpoint header")?;
        let rest = body.trim_start_matches(['\r', '\n']);
        let rest = rest.strip_prefix("== encoder\n").ok_or("missing encoder section")?;
        let (enc, rest) = rest.split_once("== decoder\n").ok_or("missing decoder section")?;
        let (dec, att) = match rest.split_once("== attention\n") {
            Some((d, a)) => (d, Some(a)),
            None => (rest, None),
        };
        let encoder = NetworkSpec::from_checkpoint(enc).map_err(|e| format!("encoder: {e}"))?;
        let decoder = NetworkSpec::from_checkpoint(dec).map_err(|e| format!("decoder: {e}"))?;
        let attention = match att {
            Some(a) => {
                let mut lines = a.lines().filter(|l| !l.trim().is_empty());
                Some((parse_tensor(&mut lines, "Wc")?, parse_tensor(&mut lines, "bc")?))
            }
            None => None,
        };
        let k = encoder.hidden;
        if decoder.hidden != k {
            return Err("encoder and decoder sizes differ".into());
        }
        if let Some((wc, bc)) = &attention {
            if (wc.rows, wc.cols, bc.rows, bc.cols) != (k, 2 * k, k, 1) {
                return Err("attention layer has the wrong shape".into());
            }
        }
        Ok(Self {
            encoder,
            decoder,
            attention,
        })
    }
}
