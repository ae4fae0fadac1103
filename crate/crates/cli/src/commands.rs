use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde_json::{json, Value};

use neural_automata::asym::{asym_accept, find_scale, Outcome};
use neural_automata::compile::{
    attention_counting_encoder, attention_identity_encoder, attention_retrieval_encoder, compile_dfa_to_gru,
    compile_dfa_to_srn, compile_sl_to_cnn, counter_cell, counter_params,
};
use neural_automata::lang::{encode_one_hot, fixtures, Alphabet, Dfa, SentenceMatrix, SlGrammar};
use neural_automata::nets::{acceptor_forward, Arch, NetworkSpec};
use neural_automata::statecomp::{complexity_curve, Enumeration, Selector};
use neural_automata::train::{train_lm, train_seq2seq_reversal, ReversalConfig, TrainConfig};
use neural_automata::verify;

use crate::manifest::{out_dir, Recorder};
use crate::{AsymCmd, Cli, Cmd, CommonTrain, CompileArgs, CompileKind, ReportArgs, StatecompArgs, Theta, TrainCmd, VerifyArgs};

pub fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Compile(a) => compile(a),
        Cmd::Asym { cmd } => asym(cmd),
        Cmd::Statecomp(a) => statecomp(a),
        Cmd::Train { cmd } => train(cmd),
        Cmd::Verify(a) => verify_cmd(a),
        Cmd::Report(a) => report(a),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<NetworkSpec> {
    NetworkSpec::from_checkpoint(&read(path)?).with_context(|| format!("loading {}", path.display()))
}

fn manifest_in(dir: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    match dir {
        Some(d) => {
            out_dir(d)?;
            Ok(Some(d.join("manifest.json")))
        }
        None => Ok(None),
    }
}

enum Source {
    Dfa(Dfa),
    Sl(SlGrammar),
}

fn source(a: &CompileArgs, rec: &mut Recorder) -> Result<Source> {
    let wants_dfa = matches!(a.kind, CompileKind::Dfa2srn | CompileKind::Dfa2gru);
    if let Some(name) = &a.fixture {
        return Ok(match name.as_str() {
            "parity" => Source::Dfa(fixtures::parity()),
            "one-b" => Source::Dfa(fixtures::one_b()),
            "contains-ab" => Source::Dfa(fixtures::contains_ab()),
            "no-aa" => Source::Sl(fixtures::no_aa()),
            "no-bab" => Source::Sl(fixtures::no_bab()),
            other => bail!("unknown fixture {other:?}"),
        });
    }
    let path = a.input.as_ref().ok_or_else(|| anyhow!("--in or --fixture is required"))?;
    rec.input(path);
    let text = read(path)?;
    Ok(if wants_dfa {
        Source::Dfa(Dfa::parse(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Source::Sl(SlGrammar::parse(&text).with_context(|| format!("parsing {}", path.display()))?)
    })
}

/// Agreement of `net` with `lang` on every string of length `lo..=hi`,
/// symbolically and at the scale found by `find_scale`.
fn verify_table(net: &NetworkSpec, lang: &dyn Fn(&[usize]) -> bool, lo: usize, hi: usize) -> Result<bool> {
    let alphabet = net.alphabet.clone();
    let strings: Vec<Vec<usize>> = alphabet.strings_up_to(lo, hi).collect();
    let inputs: Vec<SentenceMatrix> = strings
        .iter()
        .map(|s| SentenceMatrix::from_indices(alphabet.size(), s.clone()))
        .collect();
    let mut sym_ok = 0;
    for (s, x) in strings.iter().zip(&inputs) {
        let want = if lang(s) { Outcome::Accept } else { Outcome::Reject };
        sym_ok += usize::from(asym_accept(net, x)?.outcome == want);
    }
    let (scale, num_ok) = match find_scale(net, &inputs, hi + 1) {
        Ok(r) => {
            let scaled = net.scaled(r.scale);
            let mut ok = 0;
            for (s, x) in strings.iter().zip(&inputs) {
                ok += usize::from((acceptor_forward(&scaled, x)?.p > 0.5) == lang(s));
            }
            (format!("N={}", r.scale), ok)
        }
        Err(e) => (format!("({e})"), 0),
    };
    let n = strings.len();
    let verdict = |ok: usize| if ok == n { "pass" } else { "FAIL" };
    println!("{:<10} {:<12} {:>8} {:>8}  result", "check", "scale", "strings", "agree");
    println!("{:<10} {:<12} {n:>8} {sym_ok:>8}  {}", "symbolic", "-", verdict(sym_ok));
    println!("{:<10} {:<12} {n:>8} {num_ok:>8}  {}", "numeric", scale, verdict(num_ok));
    Ok(sym_ok == n && num_ok == n)
}

fn compile(a: CompileArgs) -> Result<u8> {
    let mut rec = Recorder::new("compile");
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        out_dir(parent)?;
    }
    let needs_source = matches!(a.kind, CompileKind::Dfa2srn | CompileKind::Dfa2gru | CompileKind::Sl2cnn);
    let mut verified = true;
    let net = if needs_source {
        match (a.kind, source(&a, &mut rec)?) {
            (CompileKind::Sl2cnn, Source::Sl(g)) => {
                let comp = compile_sl_to_cnn(&g)?;
                for (i, gram) in comp.filter_map.iter().enumerate() {
                    println!("filter {i}: {gram}");
                }
                if let Some(len) = a.verify_len {
                    verified = verify_table(&comp.net, &|s| g.accepts_indices(s), 1, len)?;
                }
                comp.net
            }
            (CompileKind::Sl2cnn, Source::Dfa(_)) => bail!("sl2cnn needs an SL grammar"),
            (_, Source::Sl(_)) => bail!("{:?} needs a DFA", a.kind),
            (kind, Source::Dfa(dfa)) => {
                let comp = if kind == CompileKind::Dfa2srn {
                    compile_dfa_to_srn(&dfa)
                } else {
                    compile_dfa_to_gru(&dfa)
                };
                println!("units {} margin {}", comp.unit_map.len(), comp.margin);
                if let Some(len) = a.verify_len {
                    verified = verify_table(&comp.net, &|s| dfa.accepts_indices(s), 0, len)?;
                }
                comp.net
            }
        }
    } else {
        if a.verify_len.is_some() {
            bail!("--verify-len applies to dfa2srn, dfa2gru and sl2cnn only");
        }
        match a.kind {
            CompileKind::Counter => {
                let (plus, id) = counter_params();
                counter_cell(if a.theta == Theta::Plus { plus } else { id })
            }
            CompileKind::AttnCounting => attention_counting_encoder(),
            CompileKind::AttnIdentity => attention_identity_encoder(Alphabet::parse(&a.alphabet)?),
            _ => attention_retrieval_encoder(Alphabet::parse(&a.alphabet)?),
        }
    };
    rec.config(&json!({
        "kind": format!("{:?}", a.kind),
        "fixture": a.fixture,
        "verify_len": a.verify_len,
        "theta": format!("{:?}", a.theta),
        "alphabet": a.alphabet,
    }))?;
    rec.write(&a.out, &net.to_checkpoint())?;
    let mut m = a.out.clone().into_os_string();
    m.push(".manifest.json");
    rec.finish(Some(PathBuf::from(m)), if verified { 0 } else { 1 })
}

fn asym(cmd: AsymCmd) -> Result<u8> {
    let mut rec = Recorder::new("asym");
    match cmd {
        AsymCmd::Accept { model, input, out } => {
            let manifest = manifest_in(&out)?;
            rec.input(&model);
            let net = load_model(&model)?;
            let x = encode_one_hot(&input, &net.alphabet)?;
            let d = asym_accept(&net, &x)?;
            println!("{}", d.outcome);
            if let Some(w) = &d.witness {
                eprintln!("zero pre-activation at {w}");
            }
            rec.config(&json!({ "model": model, "input": input, "outcome": d.outcome.to_string() }))?;
            let code = match d.outcome {
                Outcome::Accept => 0,
                Outcome::Reject => 1,
                Outcome::Unstable => 2,
            };
            rec.finish(manifest, code)
        }
        AsymCmd::Scale { model, m, out } => {
            let manifest = manifest_in(&out)?;
            rec.input(&model);
            let net = load_model(&model)?;
            let inputs: Vec<SentenceMatrix> = net
                .alphabet
                .strings_up_to(0, m.saturating_sub(1))
                .map(|s| SentenceMatrix::from_indices(net.alphabet.size(), s))
                .collect();
            let code = match find_scale(&net, &inputs, m) {
                Ok(r) => {
                    let min = r.margins.iter().cloned().fold(f64::INFINITY, f64::min);
                    println!("N = {} over {} strings, min |p - 1/2| = {min:.3e}", r.scale, r.checked);
                    0
                }
                Err(e) => {
                    println!("no finite scale: {e}");
                    1
                }
            };
            rec.config(&json!({ "model": model, "m": m }))?;
            rec.finish(manifest, code)
        }
    }
}

fn statecomp(a: StatecompArgs) -> Result<u8> {
    let mut rec = Recorder::new("statecomp");
    let manifest = manifest_in(&a.out)?;
    rec.input(&a.model);
    let net = load_model(&a.model)?;
    let selector: Selector = a.selector.parse().map_err(|e: String| anyhow!(e))?;
    if a.n_min == 0 || a.n_min > a.n_max {
        bail!("need 1 <= --n-min <= --n-max");
    }
    let opts = Enumeration {
        budget: a.budget,
        jobs: a.jobs.max(1),
    };
    let curve = complexity_curve(&net, selector, a.n_min..=a.n_max, opts)?;
    let csv = curve.to_csv();
    print!("{csv}");
    println!("# class: {}", curve.class);
    rec.config(&json!({
        "model": a.model,
        "selector": selector.to_string(),
        "n_min": a.n_min,
        "n_max": a.n_max,
        "budget": a.budget,
        "jobs": a.jobs,
        "class": curve.class.to_string(),
    }))?;
    if let Some(dir) = &a.out {
        rec.write(&dir.join("curve.csv"), &csv)?;
    }
    rec.finish(manifest, 0)
}

/// `key = value` lines; blank lines and `#` comments are ignored.
fn config_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var("NA_SEED") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("NA_SEED={v:?}"))?)),
        Err(_) => Ok(None),
    }
}

fn apply_common(
    common: &CommonTrain,
    rec: &mut Recorder,
    mut set: impl FnMut(&str, &str) -> Result<()>,
) -> Result<()> {
    if let Some(seed) = env_seed()? {
        set("seed", &seed.to_string())?;
    }
    if let Some(path) = &common.config {
        rec.input(path);
        for (k, v) in config_pairs(path)? {
            set(&k, &v).with_context(|| format!("{}: key {k}", path.display()))?;
        }
    }
    if let Some(seed) = common.seed {
        set("seed", &seed.to_string())?;
    }
    if let Some(e) = common.epochs {
        set("epochs", &e.to_string())?;
    }
    Ok(())
}

fn train(cmd: TrainCmd) -> Result<u8> {
    let mut rec = Recorder::new("train");
    match cmd {
        TrainCmd::Counting { arch, noise, common } => {
            let arch: Arch = arch.parse().map_err(|e: String| anyhow!(e))?;
            if !matches!(arch, Arch::Srn | Arch::Gru | Arch::Lstm) {
                bail!("counting needs --arch srn, gru or lstm");
            }
            let mut cfg = TrainConfig::counting(arch);
            if common.full_scale {
                cfg = cfg.full_scale();
            }
            cfg.noise_sd = noise;
            apply_common(&common, &mut rec, |k, v| Ok(cfg.set(k, v)?))?;
            out_dir(&common.out)?;
            rec.seed(cfg.seed);
            rec.config(&cfg)?;
            let (model, metrics) = train_lm(&cfg)?;
            let s = &metrics.test;
            println!(
                "{} noise {}: acc {:.2} acc on c {:.2} ({} positions, {} c positions)",
                arch.to_string().to_uppercase(),
                cfg.noise_sd,
                s.overall_acc,
                s.c_acc,
                s.positions,
                s.c_positions
            );
            let dir = &common.out;
            let json = json!({
                "task": "counting",
                "arch": arch.to_string(),
                "noise_sd": cfg.noise_sd,
                "seed": cfg.seed,
                "test": metrics.test,
                "curves": metrics.curves,
            });
            rec.write(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
            let mut csv = String::from("epoch,train_loss,val_loss,lr\n");
            let c = &metrics.curves;
            for i in 0..c.train_loss.len() {
                csv.push_str(&format!("{},{},{},{}\n", i + 1, c.train_loss[i], c.val_loss[i], c.lr[i]));
            }
            rec.write(&dir.join("metrics.csv"), &csv)?;
            rec.write(&dir.join("model.ckpt"), &model.net.to_checkpoint())?;
            rec.write(&dir.join("config.json"), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;
            rec.finish(Some(dir.join("manifest.json")), 0)
        }
        TrainCmd::Reversal {
            arch,
            attention,
            trials,
            jobs,
            common,
        } => {
            if arch.to_ascii_lowercase() != "lstm" {
                bail!("reversal uses an LSTM encoder-decoder; --arch must be lstm");
            }
            let mut cfg = ReversalConfig::desk(attention);
            if common.full_scale {
                cfg = cfg.full_scale();
            }
            apply_common(&common, &mut rec, |k, v| Ok(cfg.set(k, v)?))?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            out_dir(&common.out)?;
            for i in 0..cfg.trials as u64 {
                rec.seed(cfg.seed.wrapping_add(i));
            }
            rec.config(&cfg)?;
            let (model, metrics) = train_seq2seq_reversal(&cfg, jobs.max(1))?;
            println!(
                "LSTM{}: max val exact {:.1}, max gen exact {:.1} over {} trials",
                if cfg.attention { "-Attn" } else { "" },
                metrics.max_val_exact,
                metrics.max_gen_exact,
                metrics.trials.len()
            );
            let dir = &common.out;
            let json = json!({
                "task": "reversal",
                "attention": cfg.attention,
                "max_val_exact": metrics.max_val_exact,
                "max_gen_exact": metrics.max_gen_exact,
                "trials": metrics.trials,
            });
            rec.write(&dir.join("metrics.json"), &(serde_json::to_string_pretty(&json)? + "\n"))?;
            let mut csv = String::from("seed,val_exact,gen_exact,val_token,gen_token,best_epoch\n");
            for t in &metrics.trials {
                csv.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    t.seed, t.val_exact, t.gen_exact, t.val_token, t.gen_token, t.curves.best_epoch
                ));
            }
            rec.write(&dir.join("metrics.csv"), &csv)?;
            rec.write(&dir.join("model.ckpt"), &model.to_text())?;
            rec.write(&dir.join("config.json"), &(serde_json::to_string_pretty(&cfg)? + "\n"))?;
            rec.finish(Some(dir.join("manifest.json")), 0)
        }
    }
}

const TRAINING_CRITERIA: [usize; 2] = [7, 8];

fn verify_cmd(a: VerifyArgs) -> Result<u8> {
    let mut rec = Recorder::new("verify");
    let manifest = manifest_in(&a.out)?;
    let mut ids: Vec<usize> = if a.only.is_empty() {
        (1..=verify::CRITERIA).collect()
    } else {
        a.only.clone()
    };
    if a.skip_training {
        ids.retain(|i| !TRAINING_CRITERIA.contains(i));
    }
    let mut results = Vec::new();
    for id in &ids {
        let r = verify::run(*id, a.jobs.max(1)).ok_or_else(|| anyhow!("no criterion {id}"))?;
        println!("{r}");
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    rec.config(&json!({ "criteria": ids, "jobs": a.jobs, "skip_training": a.skip_training }))?;
    if let Some(dir) = &a.out {
        rec.write(&dir.join("verify.json"), &(serde_json::to_string_pretty(&results)? + "\n"))?;
        let mut csv = String::from("id,name,passed,seconds,detail\n");
        for r in &results {
            csv.push_str(&format!(
                "{},{},{},{:.3},\"{}\"\n",
                r.id,
                r.name,
                r.passed,
                r.seconds,
                r.detail.replace('"', "'")
            ));
        }
        rec.write(&dir.join("verify.csv"), &csv)?;
    }
    rec.finish(manifest, if failed == 0 { 0 } else { 1 })
}

fn num(v: &Value, key: &str) -> Result<f64> {
    v.pointer(key)
        .and_then(Value::as_f64)
        .ok_or_else(|| anyhow!("metrics.json lacks {key}"))
}

fn report(a: ReportArgs) -> Result<u8> {
    let mut rec = Recorder::new("report");
    out_dir(&a.out)?;
    let mut table1 = String::from("arch,state_complexity,noise_sd,acc,acc_on_c,seed\n");
    let mut table2 = String::from("model,state_complexity,val_acc,gen_acc\n");
    for dir in &a.runs {
        let path = dir.join("metrics.json");
        rec.input(&path);
        let v: Value = serde_json::from_str(&read(&path)?).with_context(|| format!("parsing {}", path.display()))?;
        match v.get("task").and_then(Value::as_str) {
            Some("counting") => {
                let arch = v.get("arch").and_then(Value::as_str).unwrap_or("?").to_uppercase();
                let class = if arch == "LSTM" { "O(n^k)" } else { "O(1)" };
                table1.push_str(&format!(
                    "{arch},{class},{},{:.1},{:.1},{}\n",
                    num(&v, "/noise_sd")?,
                    num(&v, "/test/overall_acc")?,
                    num(&v, "/test/c_acc")?,
                    num(&v, "/seed")?
                ));
            }
            Some("reversal") => {
                let att = v.get("attention").and_then(Value::as_bool).unwrap_or(false);
                table2.push_str(&format!(
                    "{},{},{:.1},{:.1}\n",
                    if att { "LSTM-Attn" } else { "LSTM" },
                    if att { "2^Theta(n)" } else { "O(n^k)" },
                    num(&v, "/max_val_exact")?,
                    num(&v, "/max_gen_exact")?
                ));
            }
            _ => bail!("{}: unknown task", path.display()),
        }
    }
    print!("{table1}\n{table2}");
    rec.write(&a.out.join("table1.csv"), &table1)?;
    rec.write(&a.out.join("table2.csv"), &table2)?;
    rec.config(&json!({ "runs": a.runs }))?;
    rec.finish(Some(a.out.join("manifest.json")), 0)
}
