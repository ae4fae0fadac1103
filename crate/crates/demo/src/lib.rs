//! Browser demo: compile a DFA and query it in the limit, count
//! configurations of fixed constructions, and show the CNN counterexample.
//!
//! Each operation returns a JSON string. The plain functions are usable
//! natively; the `wasm_*` exports wrap them for JavaScript.

use neural_automata::asym::{asym_accept, find_scale, SymbolicNet};
use neural_automata::compile::{
    attention_counting_encoder, attention_identity_encoder, cnn_counterexample_pair, compile_dfa_to_gru,
    compile_dfa_to_srn, compile_sl_to_cnn, counter_cell, counter_params, encode,
};
use neural_automata::lang::{encode_one_hot, fixtures, Alphabet, Dfa};
use neural_automata::nets::{acceptor_forward, NetworkSpec};
use neural_automata::statecomp::{complexity_curve, Enumeration, Selector};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const SCALE_M: usize = 8;
const MAX_INPUT: usize = 64;
pub const MAX_COMPLEXITY_N: usize = 12;

fn dfa_fixture(name: &str) -> Result<Dfa, String> {
    match name {
        "parity" => Ok(fixtures::parity()),
        "one-b" => Ok(fixtures::one_b()),
        "contains-ab" => Ok(fixtures::contains_ab()),
        _ => Err(format!("unknown automaton `{name}`")),
    }
}

/// Compiles the named DFA into an SRN or GRU and decides `input` three ways:
/// the automaton itself, the exact large-weight limit, and the finite network
/// at the smallest scale that realizes the limit on short strings.
pub fn accept(fixture: &str, arch: &str, input: &str) -> Result<Value, String> {
    let dfa = dfa_fixture(fixture)?;
    if input.chars().count() > MAX_INPUT {
        return Err(format!("input longer than {MAX_INPUT} symbols"));
    }
    let comp = match arch {
        "srn" => compile_dfa_to_srn(&dfa),
        "gru" => compile_dfa_to_gru(&dfa),
        _ => return Err(format!("unknown architecture `{arch}`")),
    };
    let x = encode_one_hot(input, dfa.alphabet()).map_err(|e| e.to_string())?;
    let expected = dfa.accepts(input).map_err(|e| e.to_string())?;
    let limit = asym_accept(&comp.net, &x).map_err(|e| e.to_string())?;
    let short: Vec<_> = dfa
        .alphabet()
        .strings_up_to(0, SCALE_M - 1)
        .map(|s| encode(dfa.alphabet(), &dfa.alphabet().render(&s)))
        .collect();
    let report = find_scale(&comp.net, &short, SCALE_M).map_err(|e| e.to_string())?;
    let p = acceptor_forward(&comp.net.scaled(report.scale), &x)
        .map_err(|e| e.to_string())?
        .p;
    Ok(json!({
        "alphabet": dfa.alphabet().symbols().iter().collect::<String>(),
        "states": dfa.num_states(),
        "hidden": comp.net.hidden,
        "dfa": if expected { "accept" } else { "reject" },
        "limit": limit.outcome.to_string(),
        "scale": report.scale,
        "p": p,
    }))
}

fn construction(model: &str) -> Result<(NetworkSpec, Selector), String> {
    let (plus, id) = counter_params();
    Ok(match model {
        "counter-plus" => (counter_cell(plus), Selector::H),
        "counter-id" => (counter_cell(id), Selector::H),
        "identity" => (attention_identity_encoder(Alphabet::binary()), Selector::V),
        "counting" => (attention_counting_encoder(), Selector::Summary),
        _ => return Err(format!("unknown construction `{model}`")),
    })
}

/// Exact configuration counts for lengths `1..=n_max` plus the growth class.
pub fn complexity(model: &str, n_max: usize) -> Result<Value, String> {
    if !(1..=MAX_COMPLEXITY_N).contains(&n_max) {
        return Err(format!("n must be between 1 and {MAX_COMPLEXITY_N}"));
    }
    let (net, selector) = construction(model)?;
    let opts = Enumeration {
        jobs: 1,
        ..Enumeration::default()
    };
    let curve = complexity_curve(&net, selector, 1..=n_max, opts).map_err(|e| e.to_string())?;
    Ok(json!({
        "selector": selector.to_string(),
        "counts": curve.points.iter().map(|p| p.count).collect::<Vec<_>>(),
        "class": curve.class.to_string(),
    }))
}

/// The `a*ba*` counterexample pair for window size `k` and the pooled
/// vectors of the compiled CNNs whose window is at most `k`.
pub fn cnn_pair(k: usize) -> Result<Value, String> {
    let (x1, x2) = cnn_counterexample_pair(k).map_err(|e| e.to_string())?;
    let one_b = fixtures::one_b();
    let mut cnns = Vec::new();
    for (name, g) in [("no-aa", fixtures::no_aa()), ("no-bab", fixtures::no_bab())] {
        let comp = compile_sl_to_cnn(&g).map_err(|e| e.to_string())?;
        if comp.net.window > k {
            continue;
        }
        let sym = SymbolicNet::new(&comp.net);
        let alphabet = &comp.net.alphabet;
        let t1 = sym.evaluate(&encode(alphabet, &x1)).map_err(|e| e.to_string())?;
        let t2 = sym.evaluate(&encode(alphabet, &x2)).map_err(|e| e.to_string())?;
        let show = |v: &[neural_automata::asym::AsymScalar]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        cnns.push(json!({
            "name": name,
            "window": comp.net.window,
            "pooled": [show(&t1.pooled), show(&t2.pooled)],
            "decision": [t1.decision().outcome.to_string(), t2.decision().outcome.to_string()],
            "identical": t1.pooled == t2.pooled,
        }));
    }
    Ok(json!({
        "pair": [x1.clone(), x2.clone()],
        "in_language": [
            one_b.accepts(&x1).map_err(|e| e.to_string())?,
            one_b.accepts(&x2).map_err(|e| e.to_string())?,
        ],
        "cnns": cnns,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = accept)]
pub fn wasm_accept(fixture: &str, arch: &str, input: &str) -> Result<String, JsError> {
    to_js(accept(fixture, arch, input))
}

#[wasm_bindgen(js_name = complexity)]
pub fn wasm_complexity(model: &str, n_max: usize) -> Result<String, JsError> {
    to_js(complexity(model, n_max))
}

#[wasm_bindgen(js_name = cnnPair)]
pub fn wasm_cnn_pair(k: usize) -> Result<String, JsError> {
    to_js(cnn_pair(k))
}
