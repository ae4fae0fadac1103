use super::*;
use crate::lang::{Corpus, CorpusItem, Split};

fn ideal_counter(x: &[usize]) -> Vec<usize> {
    let mut balance = 0i64;
    x.iter()
        .map(|&s| match s {
            0 => {
                balance += 1;
                0
            }
            1 => {
                balance -= 1;
                if balance == 0 {
                    2
                } else {
                    1
                }
            }
            _ => 3,
        })
        .collect()
}

fn corpus(lo: usize, hi: usize, count: usize) -> Corpus {
    gen_counting_corpus(lo, hi, count, 7).unwrap()
}

#[test]
fn ideal_counter_scores_full_marks() {
    let s = eval_counting(ideal_counter, &corpus(1, 40, 50));
    assert_eq!(s.overall_acc, 100.0);
    assert_eq!(s.c_acc, 100.0);
    assert_eq!(s.c_positions, 50);
    assert!(s.all_positions_acc < 100.0);
}

#[test]
fn uniform_random_predictor_is_near_a_quarter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = corpus(20, 60, 200);
    let s = eval_counting(|x| x.iter().map(|_| rng.random_range(0..4)).collect(), &c);
    assert!(s.positions >= 10_000);
    assert!((s.overall_acc - 25.0).abs() <= 5.0, "{}", s.overall_acc);
}

#[test]
fn always_b_after_first_b_never_scores_on_c() {
    let s = eval_counting(|x| x.iter().map(|&s| if s == 0 { 0 } else { 1 }).collect(), &corpus(2, 30, 40));
    assert_eq!(s.c_acc, 0.0);
    assert!(s.overall_acc > 80.0);
}

#[test]
fn predicting_a_everywhere_gets_about_half() {
    let s = eval_counting(|x| vec![0; x.len()], &corpus(100, 120, 20));
    assert!((s.overall_acc - 50.0).abs() < 1.0, "{}", s.overall_acc);
}

#[test]
fn accuracies_lie_in_percent_range() {
    let c = Corpus {
        items: vec![CorpusItem {
            input: "abc".into(),
            target: "bc$".into(),
        }],
        split: Split::Gen,
        seed: 0,
    };
    for guess in 0..4 {
        let s = eval_counting(|x| vec![guess; x.len()], &c);
        for v in [s.overall_acc, s.c_acc, s.all_positions_acc] {
            assert!((0.0..=100.0).contains(&v));
        }
    }
}

fn one_tensor(v: &[f64]) -> ParamSet {
    let mut p = ParamSet::default();
    p.push("w", Tensor::column(v));
    p
}

fn optim(kind: OptimizerKind, lr: f64, clip: f64) -> OptimConfig {
    OptimConfig {
        optimizer: kind,
        lr,
        clip,
        batch: 1,
        patience: 1,
    }
}

#[test]
fn sgd_step_is_plain_descent() {
    let mut p = one_tensor(&[1.0, -2.0]);
    let mut opt = Optimizer::new(optim(OptimizerKind::Sgd, 0.1, 100.0), &p);
    let mut g = vec![Tensor::column(&[0.5, 1.0])];
    opt.step(&mut p, &mut g);
    assert!((p.values[0].data[0] - 0.95).abs() < 1e-12);
    assert!((p.values[0].data[1] + 2.1).abs() < 1e-12);
}

#[test]
fn clipping_rescales_to_the_threshold() {
    let mut p = one_tensor(&[0.0, 0.0]);
    let mut opt = Optimizer::new(optim(OptimizerKind::Sgd, 1.0, 1.0), &p);
    let mut g = vec![Tensor::column(&[3.0, 4.0])];
    let norm = opt.step(&mut p, &mut g);
    assert!((norm - 5.0).abs() < 1e-12);
    assert!((p.values[0].data[0] + 0.6).abs() < 1e-12);
    assert!((p.values[0].data[1] + 0.8).abs() < 1e-12);
}

#[test]
fn first_adam_step_moves_by_lr_times_sign() {
    let mut p = one_tensor(&[0.0, 0.0, 0.0]);
    let mut opt = Optimizer::new(optim(OptimizerKind::Adam, 0.01, 1e9), &p);
    let mut g = vec![Tensor::column(&[3.0, -0.002, 40.0])];
    opt.step(&mut p, &mut g);
    for (w, s) in p.values[0].data.iter().zip([-1.0, 1.0, -1.0]) {
        assert!((w - 0.01 * s).abs() < 1e-7, "{w}");
    }
}

#[test]
fn config_overrides_parse_and_reject_unknown_keys() {
    let mut c = TrainConfig::counting(Arch::Srn);
    c.set("arch", "lstm").unwrap();
    c.set("noise", "0.1").unwrap();
    c.set("train_n", "3,9").unwrap();
    c.set("curriculum", "4,6").unwrap();
    c.set("optimizer", "sgd").unwrap();
    c.set("lstm_output", "identity").unwrap();
    assert_eq!(c.arch, Arch::Lstm);
    assert_eq!(c.noise_sd, 0.1);
    assert_eq!(c.train_n, (3, 9));
    assert_eq!(c.stage_bounds(), vec![4, 6, 9]);
    assert_eq!(c.optim.optimizer, OptimizerKind::Sgd);
    assert_eq!(c.lstm_output, OutputSquash::Identity);
    assert!(c.set("bogus", "1").is_err());
    assert!(c.set("hidden", "two").is_err());
    let mut r = ReversalConfig::desk(true);
    r.set("gen_len", "50,5").unwrap();
    assert_eq!(r.gen_len, (50.0, 5.0));
    assert!(r.set("attention", "maybe").is_err());
}

#[test]
fn full_scale_uses_the_original_lengths() {
    let c = TrainConfig::counting(Arch::Gru).full_scale();
    assert_eq!((c.train_n, c.test_n), ((5, 1000), (2000, 2200)));
    assert_eq!(ReversalConfig::desk(false).full_scale().gen_len, (50.0, 5.0));
}

#[test]
fn cnn_is_not_a_language_model() {
    assert_eq!(
        train_lm(&TrainConfig::counting(Arch::Cnn)).unwrap_err(),
        TrainError::Arch(Arch::Cnn)
    );
}

fn tiny(arch: Arch) -> TrainConfig {
    let mut c = TrainConfig::counting(arch);
    c.epochs = 3;
    c.curriculum.clear();
    c.train_n = (2, 6);
    c.train_count = 20;
    c.val_count = 10;
    c.test_n = (7, 9);
    c.test_count = 5;
    c
}

#[test]
fn training_is_deterministic_per_seed() {
    for arch in [Arch::Srn, Arch::Gru, Arch::Lstm] {
        let mut c = tiny(arch);
        c.noise_sd = 0.1;
        let (m1, r1) = train_lm(&c).unwrap();
        let (m2, r2) = train_lm(&c).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(r1.curves, r2.curves);
        assert_eq!(r1.test, r2.test);
    }
}

#[test]
fn training_reduces_validation_loss() {
    let mut c = tiny(Arch::Lstm);
    c.epochs = 15;
    let (_, r) = train_lm(&c).unwrap();
    assert_eq!(r.curves.val_loss.len(), 15);
    let best = r.curves.val_loss.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(best < r.curves.val_loss[0]);
}

#[test]
fn divergence_is_reported() {
    let mut c = tiny(Arch::Srn);
    c.optim.optimizer = OptimizerKind::Sgd;
    c.optim.lr = f64::INFINITY;
    assert!(matches!(train_lm(&c), Err(TrainError::Diverged { .. })));
}

#[test]
fn zero_noise_is_the_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(inject_noise(&[0.25, -3.0], 0.0, &mut rng), vec![0.25, -3.0]);
    let v = inject_noise(&[0.0; 4], 0.1, &mut rng);
    assert!(v.iter().any(|x| *x != 0.0));
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..5 {
        for arch in [Arch::Srn, Arch::Gru, Arch::Lstm] {
            for noisy in [false, true] {
                let g = grad_check_lm(arch, seed, noisy).unwrap();
                assert!(g.max_rel_err < 1e-4, "{arch} {seed} {noisy}: {}", g.max_rel_err);
                assert!(g.coordinates > 0);
            }
        }
        for att in [false, true] {
            let g = grad_check_seq2seq(att, seed).unwrap();
            assert!(g.max_rel_err < 1e-4, "seq2seq {att} {seed}: {}", g.max_rel_err);
        }
    }
}

#[test]
fn relative_error_has_a_floor() {
    assert_eq!(rel_err(1.0, 1.0), 0.0);
    assert!((rel_err(2.0, 1.0) - 0.5).abs() < 1e-15);
    assert!((rel_err(1e-9, 0.0) - 1e-3).abs() < 1e-15);
}

#[test]
fn reversal_trial_runs_and_scores_in_range() {
    let mut c = ReversalConfig::desk(true);
    c.hidden = 3;
    c.epochs = 2;
    c.train_count = 20;
    c.val_count = 10;
    c.gen_count = 5;
    c.gen_len = (12.0, 1.0);
    c.trials = 2;
    let (m, r) = train_seq2seq_reversal(&c, 1).unwrap();
    assert_eq!(r.trials.len(), 2);
    assert!((0.0..=100.0).contains(&r.max_val_exact));
    let out = m.decode(&[0, 1, 1], 10);
    assert!(out.len() <= 10 && out.iter().all(|&s| s < 2));
    let (_, r2) = train_seq2seq_reversal(&c, 2).unwrap();
    assert_eq!(r.trials, r2.trials);
}

#[test]
fn seq2seq_text_round_trips() {
    for att in [false, true] {
        let mut m = Seq2Seq::new(3, att);
        let mut p = m.params();
        init_params(&mut p, 1.0, &mut ChaCha8Rng::seed_from_u64(5));
        m.set_params(&p);
        let back = Seq2Seq::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
    }
    assert!(Seq2Seq::from_text("nonsense").is_err());
}
