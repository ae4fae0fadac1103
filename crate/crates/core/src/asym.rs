//! Limit semantics of acceptors under `θ → Nθ`, `N → ∞`.
//!
//! Every scaled pre-activation has the form `N·z` where `z` is computed from
//! limit values in exact rational arithmetic, so squashing units collapse to
//! step functions of `sign(z)`. A pre-activation whose limit is exactly zero
//! makes the limit of the network undefined; it is reported as unstable.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::lang::SentenceMatrix;
use crate::nets::{acceptor_forward, Arch, NetsError, NetworkSpec, OutputSquash};

/// A limit value: an exact rational or a signed infinity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AsymScalar {
    NegInf,
    Finite(BigRational),
    PosInf,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymError {
    #[error("unsupported configuration at {unit}: {reason}")]
    Unsupported { unit: UnitRef, reason: String },
    #[error("undefined infinite arithmetic: {0}")]
    Infinite(String),
    #[error("attention over an empty sequence is undefined")]
    EmptyAttention,
    #[error("input {index} is asymptotically unstable at {unit}")]
    UnstableInput { index: usize, unit: UnitRef },
    #[error("no scale up to 2^{max_log2} rounds every input correctly")]
    NoConvergence { max_log2: u32 },
    #[error(transparent)]
    Nets(#[from] NetsError),
}

pub type Result<T> = std::result::Result<T, AsymError>;

impl AsymScalar {
    pub fn zero() -> Self {
        AsymScalar::Finite(BigRational::zero())
    }

    pub fn one() -> Self {
        AsymScalar::Finite(BigRational::one())
    }

    pub fn half() -> Self {
        Self::ratio(1, 2)
    }

    pub fn int(v: i64) -> Self {
        AsymScalar::Finite(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        AsymScalar::Finite(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    /// Exact conversion of a finite float (infinities map to `±∞`).
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            AsymScalar::PosInf
        } else if v == f64::NEG_INFINITY {
            AsymScalar::NegInf
        } else {
            AsymScalar::Finite(BigRational::from_float(v).expect("NaN has no limit value"))
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, AsymScalar::Finite(_))
    }

    pub fn finite(&self) -> Option<&BigRational> {
        match self {
            AsymScalar::Finite(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.finite().is_some_and(Zero::is_zero)
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            AsymScalar::NegInf => f64::NEG_INFINITY,
            AsymScalar::PosInf => f64::INFINITY,
            AsymScalar::Finite(r) => r.to_f64().unwrap_or(f64::NAN),
        }
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        match self {
            AsymScalar::NegInf => -1,
            AsymScalar::PosInf => 1,
            AsymScalar::Finite(r) if r.is_positive() => 1,
            AsymScalar::Finite(r) if r.is_negative() => -1,
            AsymScalar::Finite(_) => 0,
        }
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        use AsymScalar::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a + b)),
            (PosInf, NegInf) | (NegInf, PosInf) => Err(AsymError::Infinite("∞ - ∞".into())),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
        }
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        use AsymScalar::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Ok(Finite(a * b)),
            _ => match self.signum() * other.signum() {
                0 => Err(AsymError::Infinite("∞ · 0".into())),
                1 => Ok(PosInf),
                _ => Ok(NegInf),
            },
        }
    }

    /// Multiplication by a finite rational.
    pub fn scale(&self, by: &BigRational) -> Result<Self> {
        self.try_mul(&AsymScalar::Finite(by.clone()))
    }
}

impl fmt::Display for AsymScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsymScalar::NegInf => f.write_str("-inf"),
            AsymScalar::PosInf => f.write_str("inf"),
            AsymScalar::Finite(r) => write!(f, "{r}"),
        }
    }
}

pub type AsymVec = Vec<AsymScalar>;

/// `lim σ(N x)`.
pub fn asym_sigmoid(x: &AsymScalar) -> AsymScalar {
    match x.signum() {
        1 => AsymScalar::one(),
        -1 => AsymScalar::zero(),
        _ => AsymScalar::half(),
    }
}

/// `lim tanh(N x)`.
pub fn asym_tanh(x: &AsymScalar) -> AsymScalar {
    AsymScalar::int(x.signum() as i64)
}

/// `lim softmax(N u)`: uniform weight over the maximizing coordinates.
pub fn asym_softmax(u: &[AsymScalar]) -> AsymVec {
    let Some(max) = u.iter().max() else {
        return Vec::new();
    };
    let m = u.iter().filter(|x| *x == max).count() as i64;
    u.iter()
        .map(|x| {
            if x == max {
                AsymScalar::ratio(1, m)
            } else {
                AsymScalar::zero()
            }
        })
        .collect()
}

fn dot(a: &[AsymScalar], b: &[AsymScalar]) -> Result<AsymScalar> {
    a.iter()
        .zip(b)
        .try_fold(AsymScalar::zero(), |acc, (x, y)| acc.try_add(&x.try_mul(y)?))
}

/// Limit of `softmax(N q Kᵀ) V`: the mean of the value rows whose keys
/// maximize `q·k`.
pub fn asym_attention(q: &[AsymScalar], keys: &[AsymVec], values: &[AsymVec]) -> Result<AsymVec> {
    if keys.is_empty() || keys.len() != values.len() {
        return Err(AsymError::EmptyAttention);
    }
    let scores = keys.iter().map(|k| dot(q, k)).collect::<Result<Vec<_>>>()?;
    average_of_maxima(&scores, values)
}

fn average_of_maxima(scores: &[AsymScalar], values: &[AsymVec]) -> Result<AsymVec> {
    let max = scores.iter().max().expect("non-empty");
    let chosen: Vec<&AsymVec> = scores
        .iter()
        .zip(values)
        .filter(|(s, _)| *s == max)
        .map(|(_, v)| v)
        .collect();
    let m = BigRational::new(BigInt::one(), BigInt::from(chosen.len()));
    let dim = values[0].len();
    (0..dim)
        .map(|d| {
            chosen
                .iter()
                .try_fold(AsymScalar::zero(), |acc, v| acc.try_add(&v[d]))?
                .scale(&m)
        })
        .collect()
}

/// Identifies a unit: time step (`None` for the readout), gate and index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnitRef {
    pub step: Option<usize>,
    pub gate: &'static str,
    pub index: usize,
}

impl fmt::Display for UnitRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.step {
            Some(t) => write!(f, "t={t} {}[{}]", self.gate, self.index),
            None => write!(f, "readout {}[{}]", self.gate, self.index),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Accept,
    Reject,
    Unstable,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accept => "accept",
            Outcome::Reject => "reject",
            Outcome::Unstable => "unstable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AsymDecision {
    pub outcome: Outcome,
    /// First unit whose pre-activation limit was exactly zero.
    pub witness: Option<UnitRef>,
}

/// Where evaluation hit an exact-zero pre-activation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instability {
    pub unit: UnitRef,
    /// True when the unit feeds the hidden state, false for the readout.
    pub in_state: bool,
}

/// Limit values of every quantity of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AsymTrace {
    pub h: Vec<AsymVec>,
    pub c: Vec<AsymVec>,
    pub values: Vec<AsymVec>,
    pub pooled: AsymVec,
    pub p: Option<AsymScalar>,
    pub instability: Option<Instability>,
    /// Smallest `|z|` over every scaled pre-activation evaluated.
    pub margin: Option<BigRational>,
}

impl AsymTrace {
    pub fn state_stable(&self) -> bool {
        !self.instability.as_ref().is_some_and(|i| i.in_state)
    }

    pub fn decision(&self) -> AsymDecision {
        let outcome = match (&self.instability, &self.p) {
            (None, Some(p)) if p.signum() > 0 && *p == AsymScalar::one() => Outcome::Accept,
            (None, Some(p)) if p.is_zero() => Outcome::Reject,
            _ => Outcome::Unstable,
        };
        AsymDecision {
            outcome,
            witness: self.instability.as_ref().map(|i| i.unit.clone()),
        }
    }
}

#[derive(Debug, Clone)]
struct RatMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigRational>,
}

impl RatMatrix {
    fn at(&self, r: usize, c: usize) -> &BigRational {
        &self.data[r * self.cols + c]
    }
}

/// A network with its weights converted to exact rationals, ready for
/// repeated symbolic evaluation.
#[derive(Debug, Clone)]
pub struct SymbolicNet {
    arch: Arch,
    hidden: usize,
    window: usize,
    width: usize,
    squash: OutputSquash,
    mats: BTreeMap<String, RatMatrix>,
}

struct Step {
    t: Option<usize>,
    margin: Option<BigRational>,
}

enum Halt {
    Unstable(UnitRef),
    Error(AsymError),
}

impl From<AsymError> for Halt {
    fn from(e: AsymError) -> Self {
        Halt::Error(e)
    }
}

type StepResult<T> = std::result::Result<T, Halt>;

impl Step {
    /// Records `|z|` and returns the sign, halting on an exact zero.
    fn sign(&mut self, z: &BigRational, gate: &'static str, index: usize) -> StepResult<i8> {
        let unit = || UnitRef {
            step: self.t,
            gate,
            index,
        };
        if z.is_zero() {
            return Err(Halt::Unstable(unit()));
        }
        let a = z.abs();
        if self.margin.as_ref().is_none_or(|m| a < *m) {
            self.margin = Some(a);
        }
        Ok(if z.is_positive() { 1 } else { -1 })
    }
}

fn step01(s: i8) -> AsymScalar {
    if s > 0 {
        AsymScalar::one()
    } else {
        AsymScalar::zero()
    }
}

fn sign_pm(s: i8) -> AsymScalar {
    AsymScalar::int(s as i64)
}

impl SymbolicNet {
    pub fn new(net: &NetworkSpec) -> Self {
        let mats = net
            .tensors()
            .map(|(name, t)| {
                let data = t
                    .data
                    .iter()
                    .map(|&v| BigRational::from_float(v).expect("weights must be finite"))
                    .collect();
                (
                    name.to_string(),
                    RatMatrix {
                        rows: t.rows,
                        cols: t.cols,
                        data,
                    },
                )
            })
            .collect();
        Self {
            arch: net.arch,
            hidden: net.hidden,
            window: net.window,
            width: net.alphabet.size(),
            squash: net.lstm_output,
            mats,
        }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    fn m(&self, name: &str) -> &RatMatrix {
        &self.mats[name]
    }

    /// `z = W e_x + U h + b` for a scaled layer. An infinite state entry
    /// with a nonzero weight is rejected.
    fn affine(
        &self,
        step: &Step,
        gate: &'static str,
        w: &str,
        x: Option<usize>,
        u: Option<(&str, &[AsymScalar])>,
        b: &str,
    ) -> Result<Vec<BigRational>> {
        let wm = self.m(w);
        let bm = self.m(b);
        let mut out = Vec::with_capacity(wm.rows);
        for i in 0..wm.rows {
            let mut z = bm.data[i].clone();
            if let Some(col) = x {
                z += wm.at(i, col);
            }
            if let Some((uname, h)) = u {
                let um = self.m(uname);
                for (j, hj) in h.iter().enumerate() {
                    let wij = um.at(i, j);
                    if wij.is_zero() {
                        continue;
                    }
                    match hj {
                        AsymScalar::Finite(v) => z += wij * v,
                        _ => {
                            return Err(AsymError::Unsupported {
                                unit: UnitRef {
                                    step: step.t,
                                    gate,
                                    index: i,
                                },
                                reason: format!(
                                    "infinite state h[{j}] feeds a scaled map with nonzero weight"
                                ),
                            })
                        }
                    }
                }
            }
            out.push(z);
        }
        Ok(out)
    }

    fn signs(&self, step: &mut Step, gate: &'static str, z: &[BigRational]) -> StepResult<Vec<i8>> {
        z.iter().enumerate().map(|(i, v)| step.sign(v, gate, i)).collect()
    }

    /// Symbolic run over `x`.
    pub fn evaluate(&self, x: &SentenceMatrix) -> Result<AsymTrace> {
        let mut trace = AsymTrace::default();
        let mut step = Step { t: None, margin: None };
        match self.run_state(x, &mut trace, &mut step) {
            Ok(()) => {}
            Err(Halt::Unstable(unit)) => {
                trace.instability = Some(Instability { unit, in_state: true });
                trace.margin = step.margin;
                return Ok(trace);
            }
            Err(Halt::Error(e)) => return Err(e),
        }
        step.t = None;
        let state = self.final_state(&trace);
        let wa = self.m("Wa");
        let mut z = AsymScalar::Finite(self.m("ba").data[0].clone());
        for (j, v) in state.iter().enumerate() {
            let w = wa.at(0, j);
            if w.is_zero() {
                continue;
            }
            if !v.is_finite() {
                return Err(AsymError::Unsupported {
                    unit: UnitRef {
                        step: None,
                        gate: "Wa",
                        index: 0,
                    },
                    reason: format!("infinite state entry {j} feeds the readout"),
                });
            }
            z = z.try_add(&v.scale(w)?)?;
        }
        let zr = z.finite().expect("finite by construction").clone();
        match step.sign(&zr, "Wa", 0) {
            Ok(s) => trace.p = Some(step01(s)),
            Err(Halt::Unstable(unit)) => {
                trace.p = Some(AsymScalar::half());
                trace.instability = Some(Instability {
                    unit,
                    in_state: false,
                });
            }
            Err(Halt::Error(e)) => return Err(e),
        }
        trace.margin = step.margin;
        Ok(trace)
    }

    fn final_state(&self, trace: &AsymTrace) -> AsymVec {
        if self.arch == Arch::Cnn {
            return trace.pooled.clone();
        }
        trace
            .h
            .last()
            .cloned()
            .unwrap_or_else(|| vec![AsymScalar::zero(); self.hidden])
    }

    fn run_state(&self, x: &SentenceMatrix, trace: &mut AsymTrace, step: &mut Step) -> StepResult<()> {
        if x.width() != self.width {
            return Err(Halt::Error(AsymError::Nets(NetsError::Shape {
                what: "input width".into(),
                expected: self.width.to_string(),
                got: x.width().to_string(),
            })));
        }
        let k = self.hidden;
        match self.arch {
            Arch::Srn => {
                let mut h = vec![AsymScalar::zero(); k];
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let z = self.affine(step, "h", "W", Some(x.index(t)), Some(("U", &h)), "b")?;
                    h = self.signs(step, "h", &z)?.into_iter().map(sign_pm).collect();
                    trace.h.push(h.clone());
                }
            }
            Arch::Gru => {
                let mut h = vec![AsymScalar::zero(); k];
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let xi = Some(x.index(t));
                    let zz = self.affine(step, "z", "Wz", xi, Some(("Uz", &h)), "bz")?;
                    let z = self.signs(step, "z", &zz)?;
                    let zr = self.affine(step, "r", "Wr", xi, Some(("Ur", &h)), "br")?;
                    let r = self.signs(step, "r", &zr)?;
                    let rh: AsymVec = h
                        .iter()
                        .zip(&r)
                        .map(|(v, &s)| if s > 0 { v.clone() } else { AsymScalar::zero() })
                        .collect();
                    let zu = self.affine(step, "u", "Wu", xi, Some(("Uu", &rh)), "bu")?;
                    let u = self.signs(step, "u", &zu)?;
                    h = (0..k)
                        .map(|i| if z[i] > 0 { h[i].clone() } else { sign_pm(u[i]) })
                        .collect();
                    trace.h.push(h.clone());
                }
            }
            Arch::Lstm => {
                let mut h = vec![AsymScalar::zero(); k];
                let mut c = vec![AsymScalar::zero(); k];
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let xi = Some(x.index(t));
                    let zf = self.affine(step, "f", "Wf", xi, Some(("Uf", &h)), "bf")?;
                    let f = self.signs(step, "f", &zf)?;
                    let zi = self.affine(step, "i", "Wi", xi, Some(("Ui", &h)), "bi")?;
                    let i = self.signs(step, "i", &zi)?;
                    let zo = self.affine(step, "o", "Wo", xi, Some(("Uo", &h)), "bo")?;
                    let o = self.signs(step, "o", &zo)?;
                    let zc = self.affine(step, "c~", "Wc", xi, Some(("Uc", &h)), "bc")?;
                    let g = self.signs(step, "c~", &zc)?;
                    let mut next_c = Vec::with_capacity(k);
                    for j in 0..k {
                        let kept = if f[j] > 0 { c[j].clone() } else { AsymScalar::zero() };
                        let add = if i[j] > 0 { sign_pm(g[j]) } else { AsymScalar::zero() };
                        next_c.push(kept.try_add(&add)?);
                    }
                    c = next_c;
                    h = Vec::with_capacity(k);
                    for j in 0..k {
                        let out = match self.squash {
                            OutputSquash::Identity => c[j].clone(),
                            OutputSquash::Tanh if c[j].is_zero() => AsymScalar::zero(),
                            OutputSquash::Tanh => {
                                return Err(Halt::Error(AsymError::Unsupported {
                                    unit: UnitRef {
                                        step: step.t,
                                        gate: "h",
                                        index: j,
                                    },
                                    reason: "tanh of a nonzero unscaled cell value has no rational limit"
                                        .into(),
                                }))
                            }
                        };
                        h.push(if o[j] > 0 { out } else { AsymScalar::zero() });
                    }
                    trace.h.push(h.clone());
                    trace.c.push(c.clone());
                }
            }
            Arch::CounterCell => {
                let theta = self.m("theta");
                let mut step_f = Step { t: None, margin: None };
                let f = step_f.sign(&theta.data[0], "f", 0);
                let mut h = AsymScalar::zero();
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let fs = match &f {
                        Ok(s) => *s,
                        Err(_) => {
                            return Err(Halt::Unstable(UnitRef {
                                step: step.t,
                                gate: "f",
                                index: 0,
                            }))
                        }
                    };
                    step.sign(&theta.data[0], "f", 0)?;
                    let signed = if x.index(t) == 1 {
                        theta.data[1].clone()
                    } else {
                        -theta.data[1].clone()
                    };
                    let is = step.sign(&signed, "i", 0)?;
                    let kept = if fs > 0 { h } else { AsymScalar::zero() };
                    h = kept.try_add(&step01(is))?;
                    trace.h.push(vec![h.clone()]);
                }
            }
            Arch::Cnn => {
                let wh = self.m("Wh");
                let bh = self.m("bh");
                let s = self.width;
                let mut pooled: Option<Vec<i8>> = None;
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let mut col = Vec::with_capacity(k);
                    for f in 0..k {
                        let mut z = bh.data[f].clone();
                        for off in 0..=2 * self.window {
                            let pos = t as isize + off as isize - self.window as isize;
                            if pos >= 0 && (pos as usize) < x.len() {
                                z += wh.at(f, off * s + x.index(pos as usize));
                            }
                        }
                        col.push(step.sign(&z, "h", f)?);
                    }
                    pooled = Some(match pooled {
                        None => col.clone(),
                        Some(p) => p.iter().zip(&col).map(|(a, b)| *a.max(b)).collect(),
                    });
                    trace.h.push(col.into_iter().map(sign_pm).collect());
                }
                trace.pooled = pooled
                    .map(|p| p.into_iter().map(sign_pm).collect())
                    .unwrap_or_else(|| vec![AsymScalar::int(-1); k]);
            }
            Arch::AttnEnc => {
                let wq = self.m("Wq");
                for t in 0..x.len() {
                    step.t = Some(t + 1);
                    let zv = self.affine(step, "v", "Wv", Some(x.index(t)), None, "bv")?;
                    let v: AsymVec = self.signs(step, "v", &zv)?.into_iter().map(step01).collect();
                    trace.values.push(v);
                    let vt = &trace.values[t];
                    let q: AsymVec = (0..wq.rows)
                        .map(|i| {
                            (0..wq.cols).try_fold(AsymScalar::zero(), |acc, j| {
                                acc.try_add(&vt[j].scale(wq.at(i, j))?)
                            })
                        })
                        .collect::<Result<_>>()?;
                    let h = asym_attention(&q, &trace.values, &trace.values)?;
                    trace.h.push(h);
                }
            }
        }
        Ok(())
    }

    /// Limit pre-activations are exact, so the margin is a rational.
    pub fn margin_over<'a>(&self, inputs: impl IntoIterator<Item = &'a SentenceMatrix>) -> Result<Option<BigRational>> {
        let mut best: Option<BigRational> = None;
        for x in inputs {
            let tr = self.evaluate(x)?;
            if tr.instability.is_some() {
                return Ok(Some(BigRational::zero()));
            }
            if let Some(m) = tr.margin {
                if best.as_ref().is_none_or(|b| m < *b) {
                    best = Some(m);
                }
            }
        }
        Ok(best)
    }
}

/// Limit acceptance decision for one input.
pub fn asym_accept(net: &NetworkSpec, x: &SentenceMatrix) -> Result<AsymDecision> {
    Ok(SymbolicNet::new(net).evaluate(x)?.decision())
}

/// Scales tried by [`find_scale`]: `2^0 .. 2^30`.
pub const MAX_SCALE_LOG2: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleReport {
    pub scale: f64,
    /// `|p - 1/2|` per checked input at the returned scale.
    pub margins: Vec<f64>,
    pub checked: usize,
}

fn rounds_to(p: f64, accept: bool) -> bool {
    if accept {
        p > 0.5
    } else {
        p < 0.5
    }
}

/// Smallest `N = 2^i` for which rounding the continuous output at `Nθ`
/// reproduces the asymptotic decision on every input shorter than `m`.
pub fn find_scale(net: &NetworkSpec, inputs: &[SentenceMatrix], m: usize) -> Result<ScaleReport> {
    let sym = SymbolicNet::new(net);
    let mut targets = Vec::new();
    for (index, x) in inputs.iter().enumerate().filter(|(_, x)| x.len() < m) {
        let d = sym.evaluate(x)?.decision();
        match d.outcome {
            Outcome::Accept => targets.push((x, true)),
            Outcome::Reject => targets.push((x, false)),
            Outcome::Unstable => {
                return Err(AsymError::UnstableInput {
                    index,
                    unit: d.witness.expect("unstable decisions carry a witness"),
                })
            }
        }
    }
    for log2 in 0..=MAX_SCALE_LOG2 {
        let n = f64::powi(2.0, log2 as i32);
        let scaled = net.scaled(n);
        let mut margins = Vec::with_capacity(targets.len());
        let mut ok = true;
        for (x, accept) in &targets {
            let p = acceptor_forward(&scaled, x)?.p;
            if !rounds_to(p, *accept) {
                ok = false;
                break;
            }
            margins.push((p - 0.5).abs());
        }
        if ok {
            return Ok(ScaleReport {
                scale: n,
                margins,
                checked: targets.len(),
            });
        }
    }
    Err(AsymError::NoConvergence {
        max_log2: MAX_SCALE_LOG2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    ConvergedToZero,
    ConvergedToOne,
    OscillatingOrFlat,
}

impl Verdict {
    pub fn agrees_with(self, outcome: Outcome) -> bool {
        matches!(
            (self, outcome),
            (Verdict::ConvergedToOne, Outcome::Accept)
                | (Verdict::ConvergedToZero, Outcome::Reject)
                | (Verdict::OscillatingOrFlat, Outcome::Unstable)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergencePoint {
    pub scale: f64,
    pub p: f64,
    /// State read by the acceptance head.
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    pub verdict: Verdict,
}

pub const CONVERGENCE_TOL: f64 = 1e-3;

/// `1, 2, 4, …, 2^max_log2`.
pub fn doubling_schedule(max_log2: u32) -> Vec<f64> {
    (0..=max_log2).map(|i| f64::powi(2.0, i as i32)).collect()
}

/// Evaluates the continuous network along a scale schedule. The output is
/// converged when the last three scales all lie within `1e-3` of 0 or of 1.
pub fn check_convergence(net: &NetworkSpec, x: &SentenceMatrix, schedule: &[f64]) -> Result<ConvergenceReport> {
    let mut points = Vec::with_capacity(schedule.len());
    for &n in schedule {
        let scaled = net.scaled(n);
        let tr = acceptor_forward(&scaled, x)?;
        points.push(ConvergencePoint {
            scale: n,
            p: tr.p,
            state: tr.final_state(net.hidden),
        });
    }
    let tail: Vec<f64> = points.iter().rev().take(3).map(|pt| pt.p).collect();
    let verdict = if tail.len() == 3 && tail.iter().all(|p| (p - 1.0).abs() <= CONVERGENCE_TOL) {
        Verdict::ConvergedToOne
    } else if tail.len() == 3 && tail.iter().all(|p| p.abs() <= CONVERGENCE_TOL) {
        Verdict::ConvergedToZero
    } else {
        Verdict::OscillatingOrFlat
    };
    Ok(ConvergenceReport { points, verdict })
}
