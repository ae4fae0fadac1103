use neural_automata::asym::{asym_accept, find_scale, Outcome};
use neural_automata::compile::{compile_dfa_to_gru, compile_dfa_to_srn, compile_sl_to_cnn, counter_cell, counter_params};
use neural_automata::lang::{encode_one_hot, Alphabet, Dfa, SlGrammar};
use neural_automata::nets::{acceptor_forward, NetworkSpec};
use neural_automata::statecomp::{complexity_curve, Enumeration, Selector};
use proptest::prelude::*;

// multiple of three, read as binary, most significant bit first
const MOD3: &str = "dfa 3 0 0\n0 0 0\n0 1 1\n1 0 2\n1 1 0\n2 0 1\n2 1 2\n";

fn mod3(s: &str) -> bool {
    s.chars().fold(0, |r, c| (2 * r + (c == '1') as u32) % 3) == 0
}

fn strings(alphabet: &Alphabet, max: usize) -> Vec<String> {
    alphabet.strings_up_to(0, max).map(|ix| alphabet.render(&ix)).collect()
}

#[test]
fn user_dfa_survives_text_checkpoint_and_compilation() {
    let dfa = Dfa::parse(MOD3).unwrap();
    assert_eq!(Dfa::parse(&dfa.to_text()).unwrap().to_text(), dfa.to_text());
    for comp in [compile_dfa_to_srn(&dfa), compile_dfa_to_gru(&dfa)] {
        let net = NetworkSpec::from_checkpoint(&comp.net.to_checkpoint()).unwrap();
        for s in strings(dfa.alphabet(), 7) {
            let x = encode_one_hot(&s, dfa.alphabet()).unwrap();
            let want = if mod3(&s) { Outcome::Accept } else { Outcome::Reject };
            assert_eq!(asym_accept(&net, &x).unwrap().outcome, want, "{s:?}");
        }
    }
}

#[test]
fn found_scale_realizes_the_limit_numerically() {
    let dfa = Dfa::parse(MOD3).unwrap();
    let comp = compile_dfa_to_srn(&dfa);
    let short: Vec<_> = strings(dfa.alphabet(), 5)
        .iter()
        .map(|s| encode_one_hot(s, dfa.alphabet()).unwrap())
        .collect();
    let report = find_scale(&comp.net, &short, 6).unwrap();
    let scaled = comp.net.scaled(report.scale);
    for s in strings(dfa.alphabet(), 5) {
        let p = acceptor_forward(&scaled, &encode_one_hot(&s, dfa.alphabet()).unwrap()).unwrap().p;
        assert_eq!(p > 0.5, mod3(&s), "{s:?}: p = {p}");
    }
}

#[test]
fn user_grammar_compiles_to_an_agreeing_cnn() {
    // forbids bb
    let g = SlGrammar::parse("sl 3 ab\n###\n##a\n##b\n#a#\n#aa\n#ab\n#b#\n#ba\na##\naa#\naaa\naab\nab#\naba\nb##\nba#\nbaa\nbab\n").unwrap();
    let net = compile_sl_to_cnn(&g).unwrap().net;
    for s in strings(g.alphabet(), 8) {
        let x = encode_one_hot(&s, g.alphabet()).unwrap();
        let want = if s.contains("bb") { Outcome::Reject } else { Outcome::Accept };
        assert_eq!(asym_accept(&net, &x).unwrap().outcome, want, "{s:?}");
    }
}

#[test]
fn counter_cell_curves() {
    let (plus, id) = counter_params();
    let opts = Enumeration::default();
    let counting = complexity_curve(&counter_cell(plus), Selector::H, 1..=8, opts).unwrap();
    assert!(counting.points.iter().all(|p| p.count == p.n + 1));
    let identity = complexity_curve(&counter_cell(id), Selector::H, 1..=8, opts).unwrap();
    assert!(identity.points.iter().all(|p| p.count == 2));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn compiled_srn_matches_dfa_on_random_strings(bits in proptest::collection::vec(any::<bool>(), 0..40)) {
        let dfa = Dfa::parse(MOD3).unwrap();
        let net = compile_dfa_to_srn(&dfa).net;
        let s: String = bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        let x = encode_one_hot(&s, dfa.alphabet()).unwrap();
        let accepted = asym_accept(&net, &x).unwrap().outcome == Outcome::Accept;
        prop_assert_eq!(accepted, mod3(&s));
    }
}
