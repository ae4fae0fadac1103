//! Formal languages: alphabets, one-hot sentences, DFAs, strictly local
//! grammars and the corpus generators used by the training experiments.

use std::collections::BTreeSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Padding symbol for strictly local grams. Never part of an [`Alphabet`].
pub const PAD: char = '#';

/// End-of-sequence marker appended to language-model and transduction targets.
pub const END: char = '$';

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LangError {
    #[error("symbol {symbol:?} at position {position} is not in the alphabet")]
    UnknownSymbol { symbol: char, position: usize },
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("invalid automaton: {0}")]
    InvalidAutomaton(String),
    #[error("invalid grammar: {0}")]
    InvalidGrammar(String),
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid corpus configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, LangError>;

fn parse_err(line: usize, message: impl Into<String>) -> LangError {
    LangError::Parse {
        line,
        message: message.into(),
    }
}

/// An ordered set of single-character symbols. The one-hot index of a
/// symbol is its position.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(LangError::InvalidAlphabet("alphabet is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for &c in &symbols {
            if c == PAD || c == END {
                return Err(LangError::InvalidAlphabet(format!(
                    "{c:?} is reserved and cannot be an input symbol"
                )));
            }
            if c.is_whitespace() {
                return Err(LangError::InvalidAlphabet(
                    "whitespace cannot be a symbol".into(),
                ));
            }
            if !seen.insert(c) {
                return Err(LangError::InvalidAlphabet(format!(
                    "duplicate symbol {c:?}"
                )));
            }
        }
        Ok(Self { symbols })
    }

    /// Parses an alphabet written as a string of symbols, e.g. `"ab"`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(s.chars())
    }

    pub fn binary() -> Self {
        Self {
            symbols: vec!['0', '1'],
        }
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn symbol(&self, index: usize) -> char {
        self.symbols[index]
    }

    pub fn index_of(&self, c: char) -> Option<usize> {
        self.symbols.iter().position(|&s| s == c)
    }

    pub fn contains(&self, c: char) -> bool {
        self.index_of(c).is_some()
    }

    /// Maps a string to symbol indices, rejecting unknown characters.
    pub fn indices(&self, s: &str) -> Result<Vec<usize>> {
        s.chars()
            .enumerate()
            .map(|(position, symbol)| {
                self.index_of(symbol)
                    .ok_or(LangError::UnknownSymbol { symbol, position })
            })
            .collect()
    }

    pub fn render(&self, indices: &[usize]) -> String {
        indices.iter().map(|&i| self.symbols[i]).collect()
    }

    /// All strings of exactly length `n`, in lexicographic index order.
    pub fn strings_of_length(&self, n: usize) -> StringsOfLength {
        StringsOfLength {
            base: self.size(),
            current: Some(vec![0; n]),
        }
    }

    /// All strings with `lo <= length <= hi`, shortest first.
    pub fn strings_up_to(&self, lo: usize, hi: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
        (lo..=hi).flat_map(move |n| self.strings_of_length(n))
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.symbols {
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Odometer over `base^n` index strings.
#[derive(Debug, Clone)]
pub struct StringsOfLength {
    base: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for StringsOfLength {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        let mut carry = true;
        for digit in next.iter_mut().rev() {
            *digit += 1;
            if *digit < self.base {
                carry = false;
                break;
            }
            *digit = 0;
        }
        if !carry {
            self.current = Some(next);
        }
        Some(out)
    }
}

/// One-hot matrix representation of a sentence. Rows are stored as symbol
/// indices; [`SentenceMatrix::row`] expands them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentenceMatrix {
    width: usize,
    indices: Vec<usize>,
}

impl SentenceMatrix {
    pub fn from_indices(width: usize, indices: Vec<usize>) -> Self {
        assert!(
            indices.iter().all(|&i| i < width),
            "symbol index out of range for width {width}"
        );
        Self { width, indices }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn index(&self, t: usize) -> usize {
        self.indices[t]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.width];
        row[self.indices[t]] = 1.0;
        row
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|t| self.row(t)).collect()
    }
}

pub fn encode_one_hot(s: &str, alphabet: &Alphabet) -> Result<SentenceMatrix> {
    Ok(SentenceMatrix {
        width: alphabet.size(),
        indices: alphabet.indices(s)?,
    })
}

/// Complete deterministic finite automaton.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dfa {
    alphabet: Alphabet,
    start: usize,
    accepting: Vec<bool>,
    /// `delta[q][a]` is the successor of state `q` on symbol index `a`.
    delta: Vec<Vec<usize>>,
}

impl Dfa {
    pub fn new(
        alphabet: Alphabet,
        start: usize,
        accepting: impl IntoIterator<Item = usize>,
        delta: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let q = delta.len();
        if q == 0 {
            return Err(LangError::InvalidAutomaton("no states".into()));
        }
        if start >= q {
            return Err(LangError::InvalidAutomaton(format!(
                "start state {start} out of range"
            )));
        }
        for (state, row) in delta.iter().enumerate() {
            if row.len() != alphabet.size() {
                return Err(LangError::InvalidAutomaton(format!(
                    "state {state} has {} transitions, expected {}",
                    row.len(),
                    alphabet.size()
                )));
            }
            if let Some(&bad) = row.iter().find(|&&next| next >= q) {
                return Err(LangError::InvalidAutomaton(format!(
                    "transition from {state} targets unknown state {bad}"
                )));
            }
        }
        let mut flags = vec![false; q];
        for f in accepting {
            if f >= q {
                return Err(LangError::InvalidAutomaton(format!(
                    "accepting state {f} out of range"
                )));
            }
            flags[f] = true;
        }
        Ok(Self {
            alphabet,
            start,
            accepting: flags,
            delta,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.delta.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn is_accepting(&self, q: usize) -> bool {
        self.accepting[q]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&q| self.accepting[q])
    }

    pub fn next(&self, q: usize, symbol: usize) -> usize {
        self.delta[q][symbol]
    }

    /// Pairs `(j, a)` with `delta(j, a) = target`.
    pub fn inverse(&self, target: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (j, row) in self.delta.iter().enumerate() {
            for (a, &next) in row.iter().enumerate() {
                if next == target {
                    out.push((j, a));
                }
            }
        }
        out
    }

    pub fn run(&self, indices: &[usize]) -> usize {
        indices.iter().fold(self.start, |q, &a| self.delta[q][a])
    }

    pub fn accepts_indices(&self, indices: &[usize]) -> bool {
        self.accepting[self.run(indices)]
    }

    pub fn accepts(&self, s: &str) -> Result<bool> {
        Ok(self.accepts_indices(&self.alphabet.indices(s)?))
    }

    /// Reads the line-oriented format: a header `dfa Q start F...` followed
    /// by one `q sym q'` line per transition. The alphabet order is the order
    /// in which symbols first appear.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `dfa` header"))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("dfa") {
            return Err(parse_err(hline, "header must start with `dfa`"));
        }
        let q: usize = parse_num(tokens.next(), hline, "state count")?;
        let start: usize = parse_num(tokens.next(), hline, "start state")?;
        let accepting = tokens
            .map(|t| parse_num(Some(t), hline, "accepting state"))
            .collect::<Result<Vec<usize>>>()?;

        let mut symbols: Vec<char> = Vec::new();
        let mut triples = Vec::new();
        for (ln, line) in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(ln, "expected `q sym q'`"));
            }
            let from: usize = parse_num(Some(parts[0]), ln, "source state")?;
            let mut sym_chars = parts[1].chars();
            let sym = match (sym_chars.next(), sym_chars.next()) {
                (Some(c), None) => c,
                _ => return Err(parse_err(ln, "symbol must be one character")),
            };
            let to: usize = parse_num(Some(parts[2]), ln, "target state")?;
            if !symbols.contains(&sym) {
                symbols.push(sym);
            }
            triples.push((ln, from, sym, to));
        }
        let alphabet = Alphabet::new(symbols)?;
        let mut delta = vec![vec![usize::MAX; alphabet.size()]; q];
        for (ln, from, sym, to) in triples {
            if from >= q || to >= q {
                return Err(parse_err(ln, "state out of range"));
            }
            let a = alphabet.index_of(sym).expect("symbol collected above");
            if delta[from][a] != usize::MAX {
                return Err(parse_err(ln, "duplicate transition"));
            }
            delta[from][a] = to;
        }
        if delta.iter().flatten().any(|&d| d == usize::MAX) {
            return Err(LangError::InvalidAutomaton(
                "transition function is not total".into(),
            ));
        }
        Self::new(alphabet, start, accepting, delta)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("dfa {} {}", self.num_states(), self.start);
        for f in self.accepting_states() {
            out.push_str(&format!(" {f}"));
        }
        out.push('\n');
        for (q, row) in self.delta.iter().enumerate() {
            for (a, &next) in row.iter().enumerate() {
                out.push_str(&format!("{q} {} {next}\n", self.alphabet.symbol(a)));
            }
        }
        out
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"))
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what}")))
}

/// Shape of a gram: `#^prefix core #^suffix` with `core` free of padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GramShape {
    pub prefix: usize,
    pub suffix: usize,
}

/// Returns the padding shape of a gram, or `None` when `#` occurs inside it.
pub fn gram_shape(gram: &[char]) -> Option<GramShape> {
    let prefix = gram.iter().take_while(|&&c| c == PAD).count();
    if prefix == gram.len() {
        return Some(GramShape { prefix, suffix: 0 });
    }
    let suffix = gram.iter().rev().take_while(|&&c| c == PAD).count();
    let core = &gram[prefix..gram.len() - suffix];
    if core.contains(&PAD) {
        None
    } else {
        Some(GramShape { prefix, suffix })
    }
}

/// Strictly k-local grammar: the set of permitted k-grams over `Σ ∪ {#}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlGrammar {
    alphabet: Alphabet,
    k: usize,
    allowed: BTreeSet<String>,
}

impl SlGrammar {
    pub fn new(
        alphabet: Alphabet,
        k: usize,
        allowed: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        if k == 0 {
            return Err(LangError::InvalidGrammar("gram width must be positive".into()));
        }
        let mut set = BTreeSet::new();
        for gram in allowed {
            let chars: Vec<char> = gram.chars().collect();
            if chars.len() != k {
                return Err(LangError::InvalidGrammar(format!(
                    "gram {gram:?} has width {}, expected {k}",
                    chars.len()
                )));
            }
            if let Some(&bad) = chars.iter().find(|&&c| c != PAD && !alphabet.contains(c)) {
                return Err(LangError::InvalidGrammar(format!(
                    "gram {gram:?} uses symbol {bad:?} outside the alphabet"
                )));
            }
            if gram_shape(&chars).is_none() {
                return Err(LangError::InvalidGrammar(format!(
                    "gram {gram:?} has padding in its interior"
                )));
            }
            set.insert(gram);
        }
        Ok(Self {
            alphabet,
            k,
            allowed: set,
        })
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn width(&self) -> usize {
        self.k
    }

    pub fn allowed(&self) -> &BTreeSet<String> {
        &self.allowed
    }

    pub fn allows(&self, gram: &str) -> bool {
        self.allowed.contains(gram)
    }

    /// Every gram that can occur as a window of a padded string, i.e. every
    /// `#^p w #^s` of width k with `w` over the alphabet.
    pub fn well_formed_grams(&self) -> Vec<String> {
        let k = self.k;
        let mut out = Vec::new();
        for core_len in 0..=k {
            for prefix in 0..=(k - core_len) {
                let suffix = k - core_len - prefix;
                if core_len == 0 && prefix != k {
                    continue;
                }
                for core in self.alphabet.strings_of_length(core_len) {
                    let mut g = String::new();
                    g.extend(std::iter::repeat(PAD).take(prefix));
                    g.push_str(&self.alphabet.render(&core));
                    g.extend(std::iter::repeat(PAD).take(suffix));
                    out.push(g);
                }
            }
        }
        out
    }

    /// Well-formed grams that the grammar does not allow.
    pub fn forbidden(&self) -> Vec<String> {
        self.well_formed_grams()
            .into_iter()
            .filter(|g| !self.allowed.contains(g))
            .collect()
    }

    pub fn accepts_indices(&self, indices: &[usize]) -> bool {
        let padded = self.pad(indices);
        if padded.len() < self.k {
            return true;
        }
        padded.windows(self.k).all(|w| {
            let gram: String = w.iter().collect();
            self.allowed.contains(&gram)
        })
    }

    pub fn accepts(&self, s: &str) -> Result<bool> {
        Ok(self.accepts_indices(&self.alphabet.indices(s)?))
    }

    fn pad(&self, indices: &[usize]) -> Vec<char> {
        let pad = self.k - 1;
        let mut out = Vec::with_capacity(indices.len() + 2 * pad);
        out.extend(std::iter::repeat(PAD).take(pad));
        out.extend(indices.iter().map(|&i| self.alphabet.symbol(i)));
        out.extend(std::iter::repeat(PAD).take(pad));
        out
    }

    /// Reads a header `sl k [alphabet]` followed by one allowed gram per line.
    /// Without an explicit alphabet, symbols are taken from the grams in
    /// order of first appearance.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = content_lines(text);
        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing `sl` header"))?;
        let mut tokens = header.split_whitespace();
        if tokens.next() != Some("sl") {
            return Err(parse_err(hline, "header must start with `sl`"));
        }
        let k: usize = parse_num(tokens.next(), hline, "gram width")?;
        let declared = tokens.next().map(Alphabet::parse).transpose()?;
        let grams: Vec<String> = lines.map(|(_, l)| l.to_string()).collect();
        let alphabet = match declared {
            Some(a) => a,
            None => {
                let mut symbols = Vec::new();
                for c in grams.iter().flat_map(|g| g.chars()) {
                    if c != PAD && !symbols.contains(&c) {
                        symbols.push(c);
                    }
                }
                Alphabet::new(symbols)?
            }
        };
        Self::new(alphabet, k, grams)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("sl {} {}\n", self.k, self.alphabet);
        for g in &self.allowed {
            out.push_str(g);
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Gen,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Gen => "gen",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusItem {
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub items: Vec<CorpusItem>,
    pub split: Split,
    pub seed: u64,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    /// One item per line, tab-separated input and target.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str(&item.input);
            out.push('\t');
            out.push_str(&item.target);
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str, split: Split, seed: u64) -> Result<Self> {
        let items = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| {
                let (input, target) = l
                    .split_once('\t')
                    .ok_or_else(|| parse_err(i + 1, "expected a tab separator"))?;
                Ok(CorpusItem {
                    input: input.to_string(),
                    target: target.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { items, split, seed })
    }
}

/// Builds `a^n b^n c` with its next-symbol targets.
pub fn counting_item(n: usize) -> CorpusItem {
    let mut input = String::with_capacity(2 * n + 1);
    input.extend(std::iter::repeat('a').take(n));
    input.extend(std::iter::repeat('b').take(n));
    input.push('c');
    let mut target: String = input.chars().skip(1).collect();
    target.push(END);
    CorpusItem { input, target }
}

/// Language-model corpus of `a^n b^n c` strings with `n` uniform on
/// `[n_lo, n_hi]`.
pub fn gen_counting_corpus(n_lo: usize, n_hi: usize, count: usize, seed: u64) -> Result<Corpus> {
    if count == 0 {
        return Err(LangError::Config("count must be positive".into()));
    }
    if n_lo == 0 || n_lo > n_hi {
        return Err(LangError::Config(format!(
            "need 1 <= n_lo <= n_hi, got [{n_lo}, {n_hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..count)
        .map(|_| counting_item(rng.random_range(n_lo..=n_hi)))
        .collect();
    Ok(Corpus {
        items,
        split: Split::Train,
        seed,
    })
}

/// Binary strings paired with their reversal. Lengths are drawn from a
/// normal distribution, rounded to the nearest integer and clamped at 1.
pub fn gen_reversal_corpus(count: usize, len_mean: f64, len_sd: f64, seed: u64) -> Result<Corpus> {
    if !(len_mean > 0.0) {
        return Err(LangError::Config("mean length must be positive".into()));
    }
    let normal = Normal::new(len_mean, len_sd)
        .map_err(|e| LangError::Config(format!("length distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items = (0..count)
        .map(|_| {
            let len = normal.sample(&mut rng).round().max(1.0) as usize;
            let input: String = (0..len)
                .map(|_| if rng.random_bool(0.5) { '1' } else { '0' })
                .collect();
            let target = input.chars().rev().collect();
            CorpusItem { input, target }
        })
        .collect();
    Ok(Corpus {
        items,
        split: Split::Train,
        seed,
    })
}

/// Automata and grammars shipped with the crate.
pub mod fixtures {
    use super::{Dfa, SlGrammar};

    pub const PARITY_DFA: &str = include_str!("../fixtures/parity.dfa");
    pub const ONE_B_DFA: &str = include_str!("../fixtures/astar_b_astar.dfa");
    pub const CONTAINS_AB_DFA: &str = include_str!("../fixtures/contains_ab.dfa");
    pub const NO_AA_SL3: &str = include_str!("../fixtures/no_aa.sl");
    pub const NO_BAB_SL5: &str = include_str!("../fixtures/no_bab.sl");

    /// Even number of `1`s over `{0,1}`.
    pub fn parity() -> Dfa {
        Dfa::parse(PARITY_DFA).expect("bundled fixture")
    }

    /// Exactly one `b` over `{a,b}`.
    pub fn one_b() -> Dfa {
        Dfa::parse(ONE_B_DFA).expect("bundled fixture")
    }

    /// Contains the substring `ab`, with an absorbing accept state.
    pub fn contains_ab() -> Dfa {
        Dfa::parse(CONTAINS_AB_DFA).expect("bundled fixture")
    }

    pub fn all_dfas() -> Vec<(&'static str, Dfa)> {
        vec![
            ("parity", parity()),
            ("a*ba*", one_b()),
            ("contains-ab", contains_ab()),
        ]
    }

    /// Width-3 grammar over `{a,b}` forbidding every gram that contains `aa`.
    pub fn no_aa() -> SlGrammar {
        SlGrammar::parse(NO_AA_SL3).expect("bundled fixture")
    }

    /// Width-5 grammar over `{a,b}` forbidding every gram that contains `bab`.
    pub fn no_bab() -> SlGrammar {
        SlGrammar::parse(NO_BAB_SL5).expect("bundled fixture")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a_star_b_a_star_regex(s: &str) -> bool {
        s.chars().filter(|&c| c == 'b').count() == 1
    }

    #[test]
    fn alphabet_rejects_reserved_and_duplicates() {
        assert!(Alphabet::parse("a#").is_err());
        assert!(Alphabet::parse("a$").is_err());
        assert!(Alphabet::parse("aba").is_err());
        assert!(Alphabet::parse("").is_err());
        assert_eq!(Alphabet::parse("ab").unwrap().index_of('b'), Some(1));
    }

    #[test]
    fn one_hot_encoding() {
        let ab = Alphabet::parse("ab").unwrap();
        assert_eq!(
            encode_one_hot("ab", &ab).unwrap().dense(),
            vec![vec![1.0, 0.0], vec![0.0, 1.0]]
        );
        assert_eq!(encode_one_hot("", &ab).unwrap().len(), 0);
        let bin = Alphabet::binary();
        assert_eq!(
            encode_one_hot("110", &bin).unwrap().dense(),
            vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]]
        );
        assert_eq!(
            encode_one_hot("ac", &ab),
            Err(LangError::UnknownSymbol {
                symbol: 'c',
                position: 1
            })
        );
    }

    #[test]
    fn string_enumeration_counts() {
        let bin = Alphabet::binary();
        assert_eq!(bin.strings_of_length(0).count(), 1);
        assert_eq!(bin.strings_of_length(3).count(), 8);
        assert_eq!(bin.strings_up_to(1, 8).count(), 510);
        let first: Vec<_> = bin.strings_of_length(2).collect();
        assert_eq!(first, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn dfa_examples() {
        let parity = fixtures::parity();
        assert!(parity.accepts("11").unwrap());
        assert!(parity.accepts("").unwrap());
        assert!(!parity.accepts("1").unwrap());
        let one_b = fixtures::one_b();
        assert!(one_b.accepts("aabaa").unwrap());
        assert!(!one_b.accepts("abab").unwrap());
        assert!(matches!(
            parity.accepts("12"),
            Err(LangError::UnknownSymbol { symbol: '2', .. })
        ));
    }

    #[test]
    fn bundled_dfas_match_brute_force_oracles() {
        let oracles: Vec<(Dfa, Box<dyn Fn(&str) -> bool>)> = vec![
            (
                fixtures::parity(),
                Box::new(|s: &str| s.chars().filter(|&c| c == '1').count() % 2 == 0),
            ),
            (fixtures::one_b(), Box::new(a_star_b_a_star_regex)),
            (fixtures::contains_ab(), Box::new(|s: &str| s.contains("ab"))),
        ];
        for (dfa, oracle) in oracles {
            for w in dfa.alphabet().strings_up_to(0, 8) {
                let s = dfa.alphabet().render(&w);
                assert_eq!(dfa.accepts(&s).unwrap(), oracle(&s), "{s:?}");
            }
        }
    }

    #[test]
    fn dfa_text_round_trip_and_inverse() {
        let d = fixtures::contains_ab();
        let again = Dfa::parse(&d.to_text()).unwrap();
        assert_eq!(d, again);
        let inv = d.inverse(2);
        assert!(inv.contains(&(1, 1)));
        assert!(inv.contains(&(2, 0)) && inv.contains(&(2, 1)));
    }

    #[test]
    fn dfa_parse_errors() {
        assert!(Dfa::parse("dfa 2 0\n0 a 1\n").is_err());
        assert!(Dfa::parse("nfa 1 0\n0 a 0\n").is_err());
        assert!(Dfa::parse("dfa 1 0\n0 a 3\n").is_err());
        assert!(Dfa::parse("dfa 1 0 0\n0 a 0\n0 a 0\n").is_err());
    }

    fn alternating() -> SlGrammar {
        let ab = Alphabet::parse("ab").unwrap();
        SlGrammar::new(
            ab,
            2,
            ["#a", "ab", "ba", "b#", "a#", "#b"].map(String::from),
        )
        .unwrap()
    }

    #[test]
    fn sl_examples() {
        let g = alternating();
        assert!(g.accepts("abab").unwrap());
        assert!(!g.accepts("aab").unwrap());
        let everything = SlGrammar::new(g.alphabet().clone(), 2, g.well_formed_grams()).unwrap();
        for w in g.alphabet().strings_up_to(0, 6) {
            assert!(everything.accepts_indices(&w));
        }
    }

    #[test]
    fn sl_grams_validated() {
        let ab = Alphabet::parse("ab").unwrap();
        assert!(SlGrammar::new(ab.clone(), 3, ["a#b".to_string()]).is_err());
        assert!(SlGrammar::new(ab.clone(), 3, ["ab".to_string()]).is_err());
        assert!(SlGrammar::new(ab.clone(), 3, ["acb".to_string()]).is_err());
        assert!(SlGrammar::new(ab, 3, ["#a#".to_string(), "###".to_string()]).is_ok());
    }

    #[test]
    fn well_formed_gram_count() {
        // k=3 over two symbols: 2^3 cores, 2*2^2 with one pad, 3*2 with two
        // pads (#x#, ##x, x##), plus ###.
        assert_eq!(fixtures::no_aa().well_formed_grams().len(), 8 + 8 + 6 + 1);
    }

    #[test]
    fn sl_fixture_matches_substring_oracle() {
        let g = fixtures::no_aa();
        for w in g.alphabet().strings_up_to(1, 10) {
            let s = g.alphabet().render(&w);
            assert_eq!(g.accepts(&s).unwrap(), !s.contains("aa"), "{s}");
        }
        let g5 = fixtures::no_bab();
        for w in g5.alphabet().strings_up_to(1, 9) {
            let s = g5.alphabet().render(&w);
            assert_eq!(g5.accepts(&s).unwrap(), !s.contains("bab"), "{s}");
        }
    }

    #[test]
    fn sl_text_round_trip() {
        let g = fixtures::no_aa();
        assert_eq!(SlGrammar::parse(&g.to_text()).unwrap(), g);
    }

    #[test]
    fn counting_corpus() {
        let c = gen_counting_corpus(2, 2, 1, 7).unwrap();
        assert_eq!(c.items[0].input, "aabbc");
        assert_eq!(c.items[0].target, "abbc$");
        assert!(gen_counting_corpus(2, 3, 0, 7).is_err());
        assert!(gen_counting_corpus(0, 3, 1, 7).is_err());
        assert!(gen_counting_corpus(4, 3, 1, 7).is_err());
        let big = gen_counting_corpus(5, 1000, 200, 1).unwrap();
        assert!(big
            .items
            .iter()
            .all(|it| (11..=2001).contains(&it.input.len())));
        assert_eq!(big, gen_counting_corpus(5, 1000, 200, 1).unwrap());
    }

    #[test]
    fn reversal_corpus() {
        let one = gen_reversal_corpus(1, 1.0, 0.0, 3).unwrap();
        let item = &one.items[0];
        assert!(item.input == "0" || item.input == "1");
        assert_eq!(item.input, item.target);

        let train = gen_reversal_corpus(800, 10.0, 2.0, 11).unwrap();
        assert_eq!(train.len(), 800);
        let mean = train.items.iter().map(|i| i.input.len() as f64).sum::<f64>() / 800.0;
        assert!((mean - 10.0).abs() < 0.3, "mean length {mean}");
        for it in &train.items {
            assert_eq!(it.target, it.input.chars().rev().collect::<String>());
        }
        assert_eq!(train, gen_reversal_corpus(800, 10.0, 2.0, 11).unwrap());
        assert!(gen_reversal_corpus(3, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn corpus_tsv_round_trip() {
        let c = gen_counting_corpus(1, 4, 5, 9).unwrap();
        let back = Corpus::from_tsv(&c.to_tsv(), Split::Train, 9).unwrap();
        assert_eq!(c, back);
    }
}
