use na_demo::{accept, cnn_pair, complexity};

#[test]
fn parity_agrees_three_ways() {
    for (s, want) in [("", "accept"), ("1", "reject"), ("1011", "reject"), ("0110", "accept")] {
        let v = accept("parity", "srn", s).unwrap();
        assert_eq!(v["dfa"], want);
        assert_eq!(v["limit"], want);
        let p = v["p"].as_f64().unwrap();
        assert_eq!(p > 0.5, want == "accept", "{s}: p = {p}");
    }
}

#[test]
fn gru_compilation_matches_dfa() {
    let v = accept("contains-ab", "gru", "bbab").unwrap();
    assert_eq!(v["dfa"], "accept");
    assert_eq!(v["limit"], "accept");
}

#[test]
fn bad_inputs_are_errors() {
    assert!(accept("parity", "srn", "012").is_err());
    assert!(accept("nope", "srn", "0").is_err());
    assert!(accept("parity", "cnn", "0").is_err());
    assert!(complexity("counter-plus", 0).is_err());
    assert!(complexity("counter-plus", 99).is_err());
    assert!(complexity("nope", 3).is_err());
}

#[test]
fn counter_counts_are_linear() {
    let v = complexity("counter-plus", 12).unwrap();
    let counts: Vec<u64> = v["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(counts, (2..=13).collect::<Vec<u64>>());
    assert_eq!(v["class"], "Θ(n)");
}

#[test]
fn identity_encoder_is_exponential() {
    let v = complexity("identity", 5).unwrap();
    let counts: Vec<u64> = v["counts"].as_array().unwrap().iter().map(|c| c.as_u64().unwrap()).collect();
    assert_eq!(counts, vec![2, 4, 8, 16, 32]);
}

#[test]
fn cnn_pair_is_indistinguishable() {
    for k in [1, 2, 3] {
        let v = cnn_pair(k).unwrap();
        assert_ne!(v["in_language"][0], v["in_language"][1]);
        for c in v["cnns"].as_array().unwrap() {
            assert_eq!(c["identical"], true);
            assert_eq!(c["decision"][0], c["decision"][1]);
        }
    }
}
