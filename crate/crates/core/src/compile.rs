//! Exact weight constructions for classical automata.
//!
//! DFAs become SRN or GRU acceptors through one predicate unit per
//! (previous state, current symbol) pair plus a flag unit that is 0 only
//! before the first symbol. Strictly local grammars become max-pooled CNNs
//! with one filter per forbidden gram.

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::asym::{AsymError, SymbolicNet};
use crate::lang::{encode_one_hot, gram_shape, Alphabet, Dfa, SentenceMatrix, SlGrammar, PAD};
use crate::nets::{Arch, NetworkSpec, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompileError {
    #[error("gram width {0} is even; the convolution window is symmetric")]
    EvenWidth(usize),
    #[error("counter-example needs window k >= 1")]
    ZeroWindow,
    #[error(transparent)]
    Asym(#[from] AsymError),
}

pub type Result<T> = std::result::Result<T, CompileError>;

/// Meaning of one hidden unit of a compiled DFA network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UnitRole {
    /// True iff the previous state was `state` and the current symbol is `symbol`.
    Predicate { state: usize, symbol: usize },
    /// True from the first symbol onwards.
    Flag,
}

#[derive(Debug, Clone)]
pub struct DfaCompilation {
    pub net: NetworkSpec,
    pub unit_map: Vec<UnitRole>,
    pub margin: BigRational,
}

#[derive(Debug, Clone)]
pub struct CnnCompilation {
    pub net: NetworkSpec,
    /// Forbidden gram detected by each filter.
    pub filter_map: Vec<String>,
    pub k: usize,
}

fn predicate_unit(dfa: &Dfa, state: usize, symbol: usize) -> usize {
    state * dfa.alphabet().size() + symbol
}

/// Weights `(W, U, b)` of the predicate layer and the head `(Wa, ba)`.
fn dfa_layer(dfa: &Dfa) -> (Tensor, Tensor, Tensor, Tensor, Tensor, Vec<UnitRole>) {
    let s = dfa.alphabet().size();
    let q = dfa.num_states();
    let units = q * s + 1;
    let flag = units - 1;
    let mut w = Tensor::zeros(units, s);
    let mut u = Tensor::zeros(units, units);
    let mut b = Tensor::zeros(units, 1);
    let mut roles = Vec::with_capacity(units);
    for state in 0..q {
        let sources = dfa.inverse(state);
        let fan = sources.len() as f64;
        for symbol in 0..s {
            let row = predicate_unit(dfa, state, symbol);
            roles.push(UnitRole::Predicate { state, symbol });
            w.set(row, symbol, 2.0);
            for &(j, a) in &sources {
                u.set(row, predicate_unit(dfa, j, a), 1.0);
            }
            if state == dfa.start() {
                u.set(row, flag, fan - 2.0);
                b.set(row, 0, -1.0);
            } else {
                u.set(row, flag, fan);
                b.set(row, 0, -3.0);
            }
        }
    }
    roles.push(UnitRole::Flag);
    b.set(flag, 0, 2.0);

    let mut wa = Tensor::zeros(1, units);
    let mut count = 0.0;
    for target in dfa.accepting_states() {
        for (j, a) in dfa.inverse(target) {
            wa.set(0, predicate_unit(dfa, j, a), 1.0);
            count += 1.0;
        }
    }
    let e = if dfa.is_accepting(dfa.start()) { 1.0 } else { -1.0 };
    wa.set(0, flag, count - 1.0 - e);
    let ba = Tensor::column(&[e]);
    (w, u, b, wa, ba, roles)
}

/// Probe strings for margins: every string up to length 4.
fn probe_inputs(alphabet: &Alphabet) -> Vec<SentenceMatrix> {
    alphabet
        .strings_up_to(0, 4)
        .map(|ix| SentenceMatrix::from_indices(alphabet.size(), ix))
        .collect()
}

fn margin_of(net: &NetworkSpec) -> BigRational {
    SymbolicNet::new(net)
        .margin_over(&probe_inputs(&net.alphabet))
        .expect("compiled networks evaluate symbolically")
        .unwrap_or_else(|| BigRational::from_integer(1.into()))
}

/// SRN whose predicate units track the DFA run.
pub fn compile_dfa_to_srn(dfa: &Dfa) -> DfaCompilation {
    let (w, u, b, wa, ba, roles) = dfa_layer(dfa);
    let mut net = NetworkSpec::zeros(Arch::Srn, dfa.alphabet().clone(), roles.len());
    for (name, t) in [("W", w), ("U", u), ("b", b), ("Wa", wa), ("ba", ba)] {
        net.set_tensor(name, t).expect("layout matches");
    }
    let margin = margin_of(&net);
    DfaCompilation {
        net,
        unit_map: roles,
        margin,
    }
}

/// GRU with the update gate closed (always rewrite) and the reset gate open.
pub fn compile_dfa_to_gru(dfa: &Dfa) -> DfaCompilation {
    let (w, u, b, wa, ba, roles) = dfa_layer(dfa);
    let units = roles.len();
    let mut net = NetworkSpec::zeros(Arch::Gru, dfa.alphabet().clone(), units);
    let gates = [
        ("Wu", w),
        ("Uu", u),
        ("bu", b),
        ("bz", Tensor::column(&vec![-2.0; units])),
        ("br", Tensor::column(&vec![2.0; units])),
        ("Wa", wa),
        ("ba", ba),
    ];
    for (name, t) in gates {
        net.set_tensor(name, t).expect("layout matches");
    }
    let margin = margin_of(&net);
    DfaCompilation {
        net,
        unit_map: roles,
        margin,
    }
}

/// Filter weights for a gram placed so that gram position `o` lines up with
/// window offset `o + shift`. Offsets outside the gram are don't-cares.
fn gram_filter(gram: &[char], shift: isize, window: usize, alphabet: &Alphabet) -> (Vec<f64>, f64) {
    let s = alphabet.size();
    let span = 2 * window + 1;
    let mut row = vec![0.0; span * s];
    let mut positive = 0.0;
    for (o, &c) in gram.iter().enumerate() {
        let off = o as isize + shift;
        if off < 0 || off >= span as isize {
            continue;
        }
        let base = off as usize * s;
        if c == PAD {
            for a in 0..s {
                row[base + a] = -2.0;
            }
        } else {
            let a = alphabet.index_of(c).expect("gram symbols are in the alphabet");
            row[base + a] = 2.0;
            positive += 1.0;
        }
    }
    (row, -(2.0 * positive - 1.0))
}

/// Max-pooled CNN with one detector per forbidden gram and a head that
/// accepts iff no detector fires.
pub fn compile_sl_to_cnn(g: &SlGrammar) -> Result<CnnCompilation> {
    let width = g.width();
    if width % 2 == 0 {
        return Err(CompileError::EvenWidth(width));
    }
    let window = width / 2;
    let alphabet = g.alphabet().clone();
    let all_pad: String = std::iter::repeat(PAD).take(width).collect();
    let filters: Vec<String> = g.forbidden().into_iter().filter(|f| *f != all_pad).collect();
    let k = filters.len();
    let s = alphabet.size();
    let mut wh = Tensor::zeros(k, width * s);
    let mut bh = Tensor::zeros(k, 1);
    for (f, gram) in filters.iter().enumerate() {
        let chars: Vec<char> = gram.chars().collect();
        let shape = gram_shape(&chars).expect("well-formed gram");
        // A gram with more than `window` leading pads only fits the first
        // column; its core starts at offset `window` there. Trailing pads are
        // handled symmetrically at the last column.
        let shift = if shape.prefix > window {
            window as isize - shape.prefix as isize
        } else if shape.suffix > window {
            shape.suffix as isize - window as isize
        } else {
            0
        };
        let (row, bias) = gram_filter(&chars, shift, window, &alphabet);
        let pad_guard = if shape.prefix > window {
            (0..window).collect::<Vec<_>>()
        } else if shape.suffix > window {
            (window + 1..width).collect()
        } else {
            Vec::new()
        };
        for (c, v) in row.into_iter().enumerate() {
            wh.set(f, c, v);
        }
        for off in pad_guard {
            for a in 0..s {
                wh.set(f, off * s + a, -2.0);
            }
        }
        bh.set(f, 0, bias);
    }
    let mut net = NetworkSpec::zeros(Arch::Cnn, alphabet, k).with_window(window);
    net.set_tensor("Wh", wh).expect("layout matches");
    net.set_tensor("bh", bh).expect("layout matches");
    net.set_tensor("Wa", Tensor::from_rows(&[vec![-1.0; k]])).expect("layout matches");
    net.set_tensor("ba", Tensor::column(&[-(k as f64) + 0.5])).expect("layout matches");
    Ok(CnnCompilation {
        net,
        filter_map: filters,
        k,
    })
}

/// Two strings over `{a, b}` with identical sets of width-`2k+1` windows:
/// `a^m b a^m` and `a^m b a^m b a^m` with `m = 2k + 1`. Any CNN of window
/// `k` pools them to the same vector, yet only the first has a single `b`.
pub fn cnn_counterexample_pair(k: usize) -> Result<(String, String)> {
    if k == 0 {
        return Err(CompileError::ZeroWindow);
    }
    let a = "a".repeat(2 * k + 1);
    Ok((format!("{a}b{a}"), format!("{a}b{a}b{a}")))
}

/// `(θ⁺, θ^Id)` for the two-parameter counter cell.
pub fn counter_params() -> ([f64; 2], [f64; 2]) {
    ([1.0, 1.0], [-1.0, 1.0])
}

pub fn counter_cell(theta: [f64; 2]) -> NetworkSpec {
    let mut net = NetworkSpec::zeros(Arch::CounterCell, Alphabet::binary(), 1);
    net.set_tensor("theta", Tensor::column(&theta)).expect("layout matches");
    net
}

/// Encoder with `v_t = 1[x_t = 1]` and constant keys: the summary is the
/// fraction of ones.
pub fn attention_counting_encoder() -> NetworkSpec {
    let mut net = NetworkSpec::zeros(Arch::AttnEnc, Alphabet::binary(), 1);
    net.set_tensor("Wv", Tensor::from_rows(&[vec![-1.0, 1.0]])).expect("layout matches");
    net
}

/// Encoder with `v_t = x_t` and a zero query, so `V_n` is the input itself.
pub fn attention_identity_encoder(alphabet: Alphabet) -> NetworkSpec {
    let s = alphabet.size();
    let mut net = NetworkSpec::zeros(Arch::AttnEnc, alphabet, s);
    let mut wv = Tensor::zeros(s, s);
    for i in 0..s {
        wv.set(i, i, 1.0);
    }
    net.set_tensor("Wv", wv).expect("layout matches");
    net.set_tensor("bv", Tensor::column(&vec![-0.5; s])).expect("layout matches");
    net
}

/// Identity encoder whose query matches the current symbol, so the maximum
/// score picks rows equal to `v_n` and the summary retrieves `x_n`.
pub fn attention_retrieval_encoder(alphabet: Alphabet) -> NetworkSpec {
    let s = alphabet.size();
    let mut net = attention_identity_encoder(alphabet);
    let mut wq = Tensor::zeros(s, s);
    for i in 0..s {
        wq.set(i, i, 2.0);
    }
    net.set_tensor("Wq", wq).expect("layout matches");
    net
}

/// Convenience for building probe inputs from text.
pub fn encode(alphabet: &Alphabet, s: &str) -> SentenceMatrix {
    encode_one_hot(s, alphabet).expect("string over the alphabet")
}
