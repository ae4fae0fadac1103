//! Gradient training of recurrent language models and encoder-decoders,
//! with optional Gaussian state noise.

pub mod autodiff;
pub mod models;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lang::{gen_counting_corpus, gen_reversal_corpus, Alphabet, Corpus, LangError, END};
use crate::nets::{Arch, OutputSquash, Tensor};
use autodiff::{GradError, Tape};
pub use models::{argmax, inject_noise, LanguageModel, ParamSet, Seq2Seq};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("loss diverged (non-finite) in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("architecture {0} cannot be trained as a language model")]
    Arch(Arch),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error(transparent)]
    Lang(#[from] LangError),
}

pub type Result<T> = std::result::Result<T, TrainError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// Optimiser settings shared by both experiments.
#[derive(Debug, Clone, Serialize)]
pub struct OptimConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub clip: f64,
    pub batch: usize,
    /// Epochs without validation improvement before the learning rate halves.
    pub patience: usize,
}

/// Settings of one counting run.
#[derive(Debug, Clone, Serialize)]
pub struct TrainConfig {
    pub arch: Arch,
    pub hidden: usize,
    pub lstm_output: OutputSquash,
    pub epochs: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub init_bound: f64,
    pub optim: OptimConfig,
    pub train_n: (usize, usize),
    /// Upper bounds on n of successive training stages, each trained for
    /// `epochs` epochs; the last stage always ends at `train_n.1`.
    pub curriculum: Vec<usize>,
    pub train_count: usize,
    pub val_count: usize,
    pub test_n: (usize, usize),
    pub test_count: usize,
}

impl TrainConfig {
    pub fn counting(arch: Arch) -> Self {
        Self {
            arch,
            hidden: 2,
            lstm_output: OutputSquash::Tanh,
            epochs: 100,
            noise_sd: 0.0,
            seed: 0,
            init_bound: 0.5,
            optim: OptimConfig {
                optimizer: OptimizerKind::Sgd,
                lr: 1.0,
                clip: 5.0,
                batch: 8,
                patience: 10,
            },
            train_n: (2, 64),
            curriculum: vec![8, 16, 32],
            train_count: 200,
            val_count: 40,
            test_n: (96, 128),
            test_count: 40,
        }
    }

    /// Training and test lengths of the original experiment.
    pub fn full_scale(mut self) -> Self {
        self.train_n = (5, 1000);
        self.test_n = (2000, 2200);
        self.curriculum = vec![16, 64, 256];
        self
    }

    /// Upper bound on n of each training stage.
    pub fn stage_bounds(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .curriculum
            .iter()
            .copied()
            .filter(|&b| b >= self.train_n.0 && b < self.train_n.1)
            .collect();
        out.push(self.train_n.1);
        out
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| TrainError::Config(format!("invalid {what} {value:?}"));
        let range = |v: &str| -> Option<(usize, usize)> {
            let (a, b) = v.split_once(',').or_else(|| v.split_once(".."))?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        };
        match key {
            "arch" => self.arch = value.parse().map_err(|_| bad(key))?,
            "hidden" => self.hidden = value.parse().map_err(|_| bad(key))?,
            "lstm_output" => self.lstm_output = parse_squash(value).ok_or_else(|| bad(key))?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad(key))?,
            "noise" | "noise_sd" => self.noise_sd = value.parse().map_err(|_| bad(key))?,
            "seed" => self.seed = value.parse().map_err(|_| bad(key))?,
            "init_bound" => self.init_bound = value.parse().map_err(|_| bad(key))?,
            "train_n" => self.train_n = range(value).ok_or_else(|| bad(key))?,
            "train_count" => self.train_count = value.parse().map_err(|_| bad(key))?,
            "curriculum" => {
                self.curriculum = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad(key))?
            }
            "val_count" => self.val_count = value.parse().map_err(|_| bad(key))?,
            "test_n" => self.test_n = range(value).ok_or_else(|| bad(key))?,
            "test_count" => self.test_count = value.parse().map_err(|_| bad(key))?,
            other => return self.optim.set(other, value),
        }
        Ok(())
    }
}

impl OptimConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || TrainError::Config(format!("invalid {key} {value:?}"));
        match key {
            "optimizer" => {
                self.optimizer = match value {
                    "sgd" => OptimizerKind::Sgd,
                    "adam" => OptimizerKind::Adam,
                    _ => return Err(bad()),
                }
            }
            "lr" => self.lr = value.parse().map_err(|_| bad())?,
            "clip" => self.clip = value.parse().map_err(|_| bad())?,
            "batch" => self.batch = value.parse().map_err(|_| bad())?,
            "patience" => self.patience = value.parse().map_err(|_| bad())?,
            other => return Err(TrainError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }
}

fn parse_squash(v: &str) -> Option<OutputSquash> {
    match v {
        "identity" => Some(OutputSquash::Identity),
        "tanh" => Some(OutputSquash::Tanh),
        _ => None,
    }
}

/// Gradient-norm clipping followed by an SGD or Adam update.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub cfg: OptimConfig,
    pub lr: f64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: i32,
}

impl Optimizer {
    pub fn new(cfg: OptimConfig, params: &ParamSet) -> Self {
        Self {
            lr: cfg.lr,
            cfg,
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
        }
    }

    /// Applies one update and returns the pre-clipping gradient norm.
    pub fn step(&mut self, params: &mut ParamSet, grads: &mut [Tensor]) -> f64 {
        let norm = grads
            .iter()
            .flat_map(|g| &g.data)
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();
        if norm > self.cfg.clip {
            let s = self.cfg.clip / norm;
            for g in grads.iter_mut() {
                for x in &mut g.data {
                    *x *= s;
                }
            }
        }
        match self.cfg.optimizer {
            OptimizerKind::Sgd => {
                for (p, g) in params.values.iter_mut().zip(grads.iter()) {
                    for (w, d) in p.data.iter_mut().zip(&g.data) {
                        *w -= self.lr * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                let (b1, b2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);
                self.t += 1;
                let c1 = 1.0 - b1.powi(self.t);
                let c2 = 1.0 - b2.powi(self.t);
                for (i, (p, g)) in params.values.iter_mut().zip(grads.iter()).enumerate() {
                    let (m, v) = (&mut self.m[i].data, &mut self.v[i].data);
                    for k in 0..p.data.len() {
                        m[k] = b1 * m[k] + (1.0 - b1) * g.data[k];
                        v[k] = b2 * v[k] + (1.0 - b2) * g.data[k] * g.data[k];
                        p.data[k] -= self.lr * (m[k] / c1) / ((v[k] / c2).sqrt() + eps);
                    }
                }
            }
        }
        norm
    }
}

/// Loss curves of a run; losses are per target symbol.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct Curves {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub lr: Vec<f64>,
    pub best_epoch: usize,
}

/// Generic mini-batch loop. `loss` records the loss of item `i` on the tape
/// and returns it with its number of target symbols; `val` scores the
/// current parameters. The parameters with the best validation loss are
/// kept.
fn fit(
    params: &mut ParamSet,
    cfg: &OptimConfig,
    epochs: usize,
    items: usize,
    rng: &mut ChaCha8Rng,
    mut loss: impl FnMut(&mut Tape, &ParamSet, usize, &mut ChaCha8Rng) -> (autodiff::Var, usize),
    mut val: impl FnMut(&ParamSet) -> f64,
) -> Result<Curves> {
    let mut opt = Optimizer::new(cfg.clone(), params);
    let mut tape = Tape::new();
    let mut order: Vec<usize> = (0..items).collect();
    let mut curves = Curves::default();
    let mut best = (val(params), params.clone());
    let mut stale = 0;
    for epoch in 0..epochs {
        order.shuffle(rng);
        let (mut total, mut symbols) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch.max(1)) {
            let mut grads = params.zeros_like();
            let mut batch_symbols = 0;
            for &i in chunk {
                tape.clear();
                let (l, n) = loss(&mut tape, params, i, rng);
                let value = tape.scalar(l);
                if !value.is_finite() {
                    return Err(TrainError::Diverged { epoch });
                }
                total += value;
                batch_symbols += n;
                tape.backward(l, &mut grads)?;
            }
            symbols += batch_symbols;
            let scale = 1.0 / batch_symbols.max(1) as f64;
            for g in &mut grads {
                for x in &mut g.data {
                    *x *= scale;
                }
            }
            opt.step(params, &mut grads);
        }
        let v = val(params);
        if !v.is_finite() {
            return Err(TrainError::Diverged { epoch });
        }
        curves.train_loss.push(total / symbols.max(1) as f64);
        curves.val_loss.push(v);
        curves.lr.push(opt.lr);
        if v < best.0 - 1e-6 {
            best = (v, params.clone());
            curves.best_epoch = epoch + 1;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                opt.lr *= 0.5;
                stale = 0;
            }
        }
    }
    *params = best.1;
    Ok(curves)
}

fn init_params(params: &mut ParamSet, bound: f64, rng: &mut ChaCha8Rng) {
    for t in &mut params.values {
        for v in &mut t.data {
            *v = rng.random_range(-bound..=bound);
        }
    }
}

/// Scores of a next-symbol predictor on `a^n b^n c` strings.
#[derive(Debug, Clone, Default, Serialize, PartialEq)]
pub struct CountingScore {
    /// Accuracy over every position except the one whose gold symbol is the
    /// first `b`, which no predictor can anticipate.
    pub overall_acc: f64,
    /// Accuracy where the gold next symbol is `c`.
    pub c_acc: f64,
    /// Accuracy over every position.
    pub all_positions_acc: f64,
    pub positions: usize,
    pub c_positions: usize,
}

pub const COUNTING_INPUT: &str = "abc";

pub fn counting_vocab() -> String {
    format!("{COUNTING_INPUT}{END}")
}

/// Index sequences of a counting corpus item.
pub fn counting_indices(input: &str, target: &str) -> (Vec<usize>, Vec<usize>) {
    let vocab = counting_vocab();
    let ix = |s: &str, alpha: &str| -> Vec<usize> {
        s.chars()
            .map(|c| alpha.chars().position(|a| a == c).expect("counting symbol"))
            .collect()
    };
    (ix(input, COUNTING_INPUT), ix(target, &vocab))
}

/// Greedy next-symbol accuracy of `predict` on a counting corpus.
pub fn eval_counting(mut predict: impl FnMut(&[usize]) -> Vec<usize>, corpus: &Corpus) -> CountingScore {
    let (a, b, c) = (0, 1, 2);
    let (mut hit, mut total, mut c_hit, mut c_total, mut all_hit, mut all_total) = (0, 0, 0, 0, 0, 0);
    for item in &corpus.items {
        let (x, y) = counting_indices(&item.input, &item.target);
        let pred = predict(&x);
        for (t, (&p, &g)) in pred.iter().zip(&y).enumerate() {
            let ok = p == g;
            all_total += 1;
            all_hit += ok as usize;
            if !(x[t] == a && g == b) {
                total += 1;
                hit += ok as usize;
            }
            if g == c {
                c_total += 1;
                c_hit += ok as usize;
            }
        }
    }
    let pct = |a: usize, n: usize| if n == 0 { 0.0 } else { 100.0 * a as f64 / n as f64 };
    CountingScore {
        overall_acc: pct(hit, total),
        c_acc: pct(c_hit, c_total),
        all_positions_acc: pct(all_hit, all_total),
        positions: total,
        c_positions: c_total,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CountingMetrics {
    pub test: CountingScore,
    pub curves: Curves,
}

fn lm_indices(corpus: &Corpus) -> Vec<(Vec<usize>, Vec<usize>)> {
    corpus
        .items
        .iter()
        .map(|it| counting_indices(&it.input, &it.target))
        .collect()
}

/// Trains a language model on `a^n b^n c` and scores it on longer strings.
pub fn train_lm(cfg: &TrainConfig) -> Result<(LanguageModel, CountingMetrics)> {
    if !matches!(cfg.arch, Arch::Srn | Arch::Gru | Arch::Lstm) {
        return Err(TrainError::Arch(cfg.arch));
    }
    let test = gen_counting_corpus(cfg.test_n.0, cfg.test_n.1, cfg.test_count, cfg.seed ^ 0x5eed_0002)?;
    let mut model = LanguageModel::new(
        cfg.arch,
        Alphabet::parse(COUNTING_INPUT)?,
        &counting_vocab(),
        cfg.hidden,
        cfg.lstm_output,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = model.params();
    init_params(&mut params, cfg.init_bound, &mut rng);
    let k = cfg.hidden;
    let sd = cfg.noise_sd;
    let mut noise_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x0401_5e00);
    let mut scratch = model.clone();
    let mut curves = Curves::default();
    for (stage, hi) in cfg.stage_bounds().into_iter().enumerate() {
        let stage_seed = cfg.seed.wrapping_add((stage as u64) << 32);
        let train = gen_counting_corpus(cfg.train_n.0, hi, cfg.train_count, stage_seed)?;
        let val = gen_counting_corpus(cfg.train_n.0, hi, cfg.val_count, stage_seed ^ 0x5eed_0001)?;
        let train_ix = lm_indices(&train);
        let val_ix = lm_indices(&val);
        let c = fit(
            &mut params,
            &cfg.optim,
            cfg.epochs,
            train_ix.len(),
            &mut rng,
            |tape, p, i, _| {
                let (x, y) = &train_ix[i];
                let noise: Option<Vec<Vec<f64>>> = (sd > 0.0)
                    .then(|| x.iter().map(|_| inject_noise(&vec![0.0; k], sd, &mut noise_rng)).collect());
                (model.loss_on_tape(tape, p, x, y, noise.as_deref()), y.len())
            },
            |p| {
                scratch.set_params(p);
                let (loss, n) = val_ix
                    .iter()
                    .fold((0.0, 0), |(l, n), (x, y)| (l + scratch.loss_plain(x, y, None), n + y.len()));
                loss / n as f64
            },
        )?;
        if c.best_epoch > 0 {
            curves.best_epoch = curves.train_loss.len() + c.best_epoch;
        }
        curves.train_loss.extend(c.train_loss);
        curves.val_loss.extend(c.val_loss);
        curves.lr.extend(c.lr);
    }
    model.set_params(&params);
    let test = eval_counting(|x| model.predict(x), &test);
    Ok((model, CountingMetrics { test, curves }))
}

/// Settings of the reversal experiment.
#[derive(Debug, Clone, Serialize)]
pub struct ReversalConfig {
    pub attention: bool,
    pub hidden: usize,
    pub epochs: usize,
    pub seed: u64,
    pub trials: usize,
    pub init_bound: f64,
    pub optim: OptimConfig,
    pub train_count: usize,
    pub train_len: (f64, f64),
    pub val_count: usize,
    pub gen_count: usize,
    pub gen_len: (f64, f64),
}

impl ReversalConfig {
    pub fn desk(attention: bool) -> Self {
        Self {
            attention,
            hidden: 10,
            epochs: 100,
            seed: 0,
            trials: 10,
            init_bound: 0.3,
            optim: OptimConfig {
                optimizer: OptimizerKind::Sgd,
                lr: 1.0,
                clip: 5.0,
                batch: 4,
                patience: 20,
            },
            train_count: 800,
            train_len: (10.0, 2.0),
            val_count: 200,
            gen_count: 200,
            gen_len: (30.0, 3.0),
        }
    }

    pub fn full_scale(mut self) -> Self {
        self.gen_len = (50.0, 5.0);
        self
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || TrainError::Config(format!("invalid {key} {value:?}"));
        let pair = |v: &str| -> Option<(f64, f64)> {
            let (a, b) = v.split_once(',')?;
            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
        };
        match key {
            "attention" => self.attention = value.parse().map_err(|_| bad())?,
            "hidden" => self.hidden = value.parse().map_err(|_| bad())?,
            "epochs" => self.epochs = value.parse().map_err(|_| bad())?,
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "trials" => self.trials = value.parse().map_err(|_| bad())?,
            "init_bound" => self.init_bound = value.parse().map_err(|_| bad())?,
            "train_count" => self.train_count = value.parse().map_err(|_| bad())?,
            "train_len" => self.train_len = pair(value).ok_or_else(bad)?,
            "val_count" => self.val_count = value.parse().map_err(|_| bad())?,
            "gen_count" => self.gen_count = value.parse().map_err(|_| bad())?,
            "gen_len" => self.gen_len = pair(value).ok_or_else(bad)?,
            other => return self.optim.set(other, value),
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct TrialScore {
    pub seed: u64,
    pub val_exact: f64,
    pub gen_exact: f64,
    pub val_token: f64,
    pub gen_token: f64,
    pub curves: Curves,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReversalMetrics {
    pub trials: Vec<TrialScore>,
    pub max_val_exact: f64,
    pub max_gen_exact: f64,
}

fn bits(s: &str) -> Vec<usize> {
    s.chars().map(|c| if c == '1' { 1 } else { 0 }).collect()
}

/// Exact-match and per-symbol accuracy of greedy decoding.
pub fn eval_reversal(model: &Seq2Seq, corpus: &Corpus) -> (f64, f64) {
    let (mut exact, mut tok_hit, mut tok_total) = (0usize, 0usize, 0usize);
    for item in &corpus.items {
        let x = bits(&item.input);
        let y = bits(&item.target);
        let out = model.decode(&x, 2 * y.len() + 2);
        exact += (out == y) as usize;
        tok_total += y.len();
        tok_hit += y.iter().zip(&out).filter(|(a, b)| a == b).count();
    }
    let n = corpus.len().max(1) as f64;
    (100.0 * exact as f64 / n, 100.0 * tok_hit as f64 / tok_total.max(1) as f64)
}

/// One trial of the reversal experiment.
pub fn train_reversal_trial(cfg: &ReversalConfig, seed: u64) -> Result<(Seq2Seq, TrialScore)> {
    let train = gen_reversal_corpus(cfg.train_count, cfg.train_len.0, cfg.train_len.1, seed)?;
    let val = gen_reversal_corpus(cfg.val_count, cfg.train_len.0, cfg.train_len.1, seed ^ 0x5eed_0001)?;
    let gen = gen_reversal_corpus(cfg.gen_count, cfg.gen_len.0, cfg.gen_len.1, seed ^ 0x5eed_0002)?;
    let mut model = Seq2Seq::new(cfg.hidden, cfg.attention);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = model.params();
    init_params(&mut params, cfg.init_bound, &mut rng);
    let train_ix: Vec<(Vec<usize>, Vec<usize>)> =
        train.items.iter().map(|it| (bits(&it.input), bits(&it.target))).collect();
    let val_ix: Vec<(Vec<usize>, Vec<usize>)> =
        val.items.iter().map(|it| (bits(&it.input), bits(&it.target))).collect();
    let mut scratch = model.clone();
    let curves = fit(
        &mut params,
        &cfg.optim,
        cfg.epochs,
        train_ix.len(),
        &mut rng,
        |tape, p, i, _| {
            let (x, y) = &train_ix[i];
            (model.loss_on_tape(tape, p, x, y), y.len() + 1)
        },
        |p| {
            scratch.set_params(p);
            let (l, n) = val_ix
                .iter()
                .fold((0.0, 0), |(l, n), (x, y)| (l + scratch.loss_plain(x, y), n + y.len() + 1));
            l / n as f64
        },
    )?;
    model.set_params(&params);
    let (val_exact, val_token) = eval_reversal(&model, &val);
    let (gen_exact, gen_token) = eval_reversal(&model, &gen);
    Ok((
        model,
        TrialScore {
            seed,
            val_exact,
            gen_exact,
            val_token,
            gen_token,
            curves,
        },
    ))
}

/// Runs `cfg.trials` independent trials and reports the maxima. Trials run
/// on up to `jobs` threads; results do not depend on `jobs`.
pub fn train_seq2seq_reversal(cfg: &ReversalConfig, jobs: usize) -> Result<(Seq2Seq, ReversalMetrics)> {
    use rayon::prelude::*;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    let run = || -> Vec<Result<(Seq2Seq, TrialScore)>> {
        seeds.par_iter().map(|&s| train_reversal_trial(cfg, s)).collect()
    };
    let results = if jobs <= 1 {
        seeds.iter().map(|&s| train_reversal_trial(cfg, s)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| TrainError::Config(e.to_string()))?
            .install(run)
    };
    let mut best: Option<Seq2Seq> = None;
    let mut trials = Vec::new();
    let mut best_val = f64::NEG_INFINITY;
    for r in results {
        let (model, score) = r?;
        if score.val_exact > best_val {
            best_val = score.val_exact;
            best = Some(model);
        }
        trials.push(score);
    }
    let max_val_exact = trials.iter().map(|t| t.val_exact).fold(0.0, f64::max);
    let max_gen_exact = trials.iter().map(|t| t.gen_exact).fold(0.0, f64::max);
    Ok((
        best.ok_or_else(|| TrainError::Config("at least one trial is required".into()))?,
        ReversalMetrics {
            trials,
            max_val_exact,
            max_gen_exact,
        },
    ))
}

/// Largest coordinate-wise relative error between taped gradients and
/// central differences of the plain forward pass.
#[derive(Debug, Clone, Copy, Serialize, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub coordinates: usize,
}

pub const FD_STEP: f64 = 1e-5;

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps vanishing coordinates
/// from dividing round-off by zero.
pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn check_params(
    params: &mut ParamSet,
    analytic: &[Tensor],
    mut loss: impl FnMut(&ParamSet) -> f64,
) -> GradCheck {
    let mut worst: f64 = 0.0;
    let mut coords = 0;
    for i in 0..params.values.len() {
        for k in 0..params.values[i].data.len() {
            let orig = params.values[i].data[k];
            params.values[i].data[k] = orig + FD_STEP;
            let up = loss(params);
            params.values[i].data[k] = orig - FD_STEP;
            let down = loss(params);
            params.values[i].data[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[i].data[k], numeric));
            coords += 1;
        }
    }
    GradCheck {
        max_rel_err: worst,
        coordinates: coords,
    }
}

/// Gradient check of a random small language model on a random string,
/// with fixed random state noise when `noisy`.
pub fn grad_check_lm(arch: Arch, seed: u64, noisy: bool) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = LanguageModel::new(
        arch,
        Alphabet::parse(COUNTING_INPUT)?,
        &counting_vocab(),
        2,
        if rng.random_bool(0.5) { OutputSquash::Tanh } else { OutputSquash::Identity },
    );
    let mut params = model.params();
    init_params(&mut params, 1.0, &mut rng);
    let len = rng.random_range(1..=6);
    let x: Vec<usize> = (0..len).map(|_| rng.random_range(0..3)).collect();
    let y: Vec<usize> = (0..len).map(|_| rng.random_range(0..4)).collect();
    let noise: Option<Vec<Vec<f64>>> =
        noisy.then(|| (0..len).map(|_| inject_noise(&[0.0, 0.0], 0.1, &mut rng)).collect());
    let mut tape = Tape::new();
    let l = model.loss_on_tape(&mut tape, &params, &x, &y, noise.as_deref());
    let mut grads = params.zeros_like();
    tape.backward(l, &mut grads)?;
    Ok(check_params(&mut params, &grads, |p| {
        model.set_params(p);
        model.loss_plain(&x, &y, noise.as_deref())
    }))
}

/// Gradient check of a random small encoder-decoder.
pub fn grad_check_seq2seq(attention: bool, seed: u64) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Seq2Seq::new(3, attention);
    let mut params = model.params();
    init_params(&mut params, 1.0, &mut rng);
    let len = rng.random_range(1..=5);
    let x: Vec<usize> = (0..len).map(|_| rng.random_range(0..2)).collect();
    let y: Vec<usize> = x.iter().rev().copied().collect();
    let mut tape = Tape::new();
    let l = model.loss_on_tape(&mut tape, &params, &x, &y);
    let mut grads = params.zeros_like();
    tape.backward(l, &mut grads)?;
    Ok(check_params(&mut params, &grads, |p| {
        model.set_params(p);
        model.loss_plain(&x, &y)
    }))
}

#[cfg(test)]
mod tests;
