//! Exhaustive configuration sets and state-complexity growth.
//!
//! Every input of a given length is evaluated symbolically; the limit values
//! of the selected quantity are collected into an exact set.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::asym::{AsymError, AsymScalar, AsymTrace, AsymVec, SymbolicNet};
use crate::lang::SentenceMatrix;
use crate::nets::{Arch, NetworkSpec};

pub const DEFAULT_BUDGET: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("length {n} needs {needed} inputs, budget is {budget}")]
    Budget { n: usize, needed: String, budget: u64 },
    #[error("selector {selector} is not defined for {arch}")]
    Selector { selector: Selector, arch: Arch },
    #[error("growth classification needs at least 4 points, got {0}")]
    TooFewPoints(usize),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Asym(#[from] AsymError),
}

pub type Result<T> = std::result::Result<T, StateError>;

/// Which hidden quantity to collect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Selector {
    /// `h_n`; the pooled vector for a CNN.
    H,
    /// LSTM cell `c_n`.
    C,
    /// Whole value matrix `V_n` of an attention encoder.
    V,
    /// Attention summary `h_n`.
    Summary,
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Selector::H => "h",
            Selector::C => "c",
            Selector::V => "V",
            Selector::Summary => "summary",
        })
    }
}

impl FromStr for Selector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "h" => Ok(Selector::H),
            "c" => Ok(Selector::C),
            "V" | "v" => Ok(Selector::V),
            "summary" => Ok(Selector::Summary),
            other => Err(format!("unknown selector {other:?} (expected h, c, V or summary)")),
        }
    }
}

fn check_selector(selector: Selector, arch: Arch) -> Result<()> {
    let ok = match selector {
        Selector::H => true,
        Selector::C => arch == Arch::Lstm,
        Selector::V | Selector::Summary => arch == Arch::AttnEnc,
    };
    if ok {
        Ok(())
    } else {
        Err(StateError::Selector { selector, arch })
    }
}

fn select(trace: &AsymTrace, selector: Selector, arch: Arch, hidden: usize) -> AsymVec {
    let last_or_zero = |seq: &Vec<AsymVec>| seq.last().cloned().unwrap_or_else(|| vec![AsymScalar::zero(); hidden]);
    match selector {
        Selector::H if arch == Arch::Cnn => trace.pooled.clone(),
        Selector::H | Selector::Summary => last_or_zero(&trace.h),
        Selector::C => last_or_zero(&trace.c),
        Selector::V => trace.values.concat(),
    }
}

/// Exact configuration set of one quantity at one length.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSet {
    pub n: usize,
    pub selector: Selector,
    pub values: BTreeSet<AsymVec>,
    pub inputs: u64,
    pub unstable: u64,
}

impl ConfigSet {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    /// Limit values taken by a single coordinate.
    pub fn coordinate(&self, j: usize) -> BTreeSet<AsymScalar> {
        self.values.iter().filter_map(|v| v.get(j).cloned()).collect()
    }
}

fn input_count(size: usize, n: usize, budget: u64) -> Result<u64> {
    let mut total: u64 = 1;
    for _ in 0..n {
        total = match total.checked_mul(size as u64) {
            Some(t) if t <= budget => t,
            _ => {
                return Err(StateError::Budget {
                    n,
                    needed: format!("{size}^{n}"),
                    budget,
                })
            }
        };
    }
    if total > budget {
        return Err(StateError::Budget {
            n,
            needed: total.to_string(),
            budget,
        });
    }
    Ok(total)
}

fn decode(mut code: u64, size: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = (code % size as u64) as usize;
        code /= size as u64;
    }
    out
}

#[derive(Default)]
struct Partial {
    values: BTreeSet<AsymVec>,
    unstable: u64,
}

impl Partial {
    fn merge(mut self, other: Partial) -> Partial {
        self.values.extend(other.values);
        self.unstable += other.unstable;
        self
    }
}

/// Options shared by every enumeration.
#[derive(Debug, Clone, Copy)]
pub struct Enumeration {
    pub budget: u64,
    pub jobs: usize,
}

impl Default for Enumeration {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            jobs: 1,
        }
    }
}

impl Enumeration {
    fn run<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        if self.jobs <= 1 {
            return Ok(f());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| StateError::Pool(e.to_string()))?;
        Ok(pool.install(f))
    }
}

fn config_set_symbolic(
    sym: &SymbolicNet,
    net: &NetworkSpec,
    selector: Selector,
    n: usize,
    opts: Enumeration,
) -> Result<ConfigSet> {
    let size = net.alphabet.size();
    let total = input_count(size, n, opts.budget)?;
    let width = size;
    let eval = |code: u64| -> std::result::Result<Partial, AsymError> {
        let x = SentenceMatrix::from_indices(width, decode(code, size, n));
        let tr = sym.evaluate(&x)?;
        let mut part = Partial::default();
        if tr.state_stable() {
            part.values.insert(select(&tr, selector, net.arch, net.hidden));
        } else {
            part.unstable = 1;
        }
        Ok(part)
    };
    let merged = if opts.jobs <= 1 {
        (0..total).try_fold(Partial::default(), |acc, code| eval(code).map(|p| acc.merge(p)))?
    } else {
        opts.run(|| {
            (0..total)
                .into_par_iter()
                .map(eval)
                .try_reduce(Partial::default, |a, b| Ok(a.merge(b)))
        })??
    };
    Ok(ConfigSet {
        n,
        selector,
        values: merged.values,
        inputs: total,
        unstable: merged.unstable,
    })
}

/// Limit values of `selector` over every input of length `n`.
pub fn config_set(net: &NetworkSpec, selector: Selector, n: usize, opts: Enumeration) -> Result<ConfigSet> {
    check_selector(selector, net.arch)?;
    let sym = SymbolicNet::new(net);
    config_set_symbolic(&sym, net, selector, n, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GrowthClass {
    Constant,
    Linear,
    Quadratic,
    Exponential,
    Inconclusive,
}

impl fmt::Display for GrowthClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrowthClass::Constant => "O(1)",
            GrowthClass::Linear => "Θ(n)",
            GrowthClass::Quadratic => "Θ(n²)",
            GrowthClass::Exponential => "2^Θ(n)",
            GrowthClass::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub count: usize,
    pub unstable: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityCurve {
    pub selector: Selector,
    pub points: Vec<CurvePoint>,
    pub class: GrowthClass,
}

impl ComplexityCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,count,unstable_count\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n, p.count, p.unstable));
        }
        out
    }
}

/// Least-squares slope of `ln y` against `ln x`.
fn loglog_slope(points: &[(usize, usize)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, c)| *n >= 1 && *c >= 1)
        .map(|&(n, c)| ((n as f64).ln(), (c as f64).ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Decide the growth class of `(n, count)` points.
pub fn classify_growth(points: &[(usize, usize)]) -> Result<GrowthClass> {
    if points.len() < 4 {
        return Err(StateError::TooFewPoints(points.len()));
    }
    let mut pts = points.to_vec();
    pts.sort_unstable();
    let top = &pts[pts.len() / 2..];
    if top.iter().all(|p| p.1 == top[0].1) {
        return Ok(GrowthClass::Constant);
    }
    if pts.windows(2).all(|w| w[0].1 > 0 && w[1].1 as f64 >= 1.8 * w[0].1 as f64) {
        return Ok(GrowthClass::Exponential);
    }
    Ok(match loglog_slope(&pts) {
        Some(s) if (s - 1.0).abs() <= 0.25 => GrowthClass::Linear,
        Some(s) if (s - 2.0).abs() <= 0.25 => GrowthClass::Quadratic,
        _ => GrowthClass::Inconclusive,
    })
}

/// Configuration counts over a range of lengths plus their growth class.
pub fn complexity_curve(
    net: &NetworkSpec,
    selector: Selector,
    lengths: impl IntoIterator<Item = usize>,
    opts: Enumeration,
) -> Result<ComplexityCurve> {
    check_selector(selector, net.arch)?;
    let sym = SymbolicNet::new(net);
    let mut points = Vec::new();
    for n in lengths {
        let set = config_set_symbolic(&sym, net, selector, n, opts)?;
        points.push(CurvePoint {
            n,
            count: set.count(),
            unstable: set.unstable,
        });
    }
    let pairs: Vec<(usize, usize)> = points.iter().map(|p| (p.n, p.count)).collect();
    let class = if pairs.len() >= 4 {
        classify_growth(&pairs)?
    } else {
        GrowthClass::Inconclusive
    };
    Ok(ComplexityCurve { selector, points, class })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::Alphabet;
    use crate::nets::Tensor;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn counter(theta: [f64; 2]) -> NetworkSpec {
        let mut net = NetworkSpec::zeros(Arch::CounterCell, Alphabet::binary(), 1);
        net.set_tensor("theta", Tensor::column(&theta)).unwrap();
        net
    }

    fn identity_encoder() -> NetworkSpec {
        let mut net = NetworkSpec::zeros(Arch::AttnEnc, Alphabet::binary(), 2);
        net.set_tensor("Wv", Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]])).unwrap();
        net.set_tensor("bv", Tensor::column(&[-0.5, -0.5])).unwrap();
        net
    }

    fn ints(set: &ConfigSet) -> Vec<i64> {
        set.values
            .iter()
            .map(|v| {
                let r = v[0].finite().unwrap();
                assert!(r.is_integer());
                r.to_integer().try_into().unwrap()
            })
            .collect()
    }

    #[test]
    fn counter_plus_counts_ones() {
        let set = config_set(&counter([1.0, 1.0]), Selector::H, 4, Enumeration::default()).unwrap();
        assert_eq!(ints(&set), vec![0, 1, 2, 3, 4]);
        assert_eq!(set.inputs, 16);
        assert_eq!(set.unstable, 0);
    }

    #[test]
    fn counter_identity_copies_input() {
        let set = config_set(&counter([-1.0, 1.0]), Selector::H, 4, Enumeration::default()).unwrap();
        assert_eq!(ints(&set), vec![0, 1]);
    }

    #[test]
    fn identity_encoder_values_are_all_distinct() {
        let set = config_set(&identity_encoder(), Selector::V, 3, Enumeration::default()).unwrap();
        assert_eq!(set.count(), 8);
    }

    #[test]
    fn unstable_inputs_are_counted_apart() {
        let set = config_set(&counter([0.0, 1.0]), Selector::H, 3, Enumeration::default()).unwrap();
        assert_eq!(set.count(), 0);
        assert_eq!(set.unstable, 8);
    }

    #[test]
    fn budget_is_enforced() {
        let opts = Enumeration { budget: 15, jobs: 1 };
        assert!(matches!(
            config_set(&counter([1.0, 1.0]), Selector::H, 4, opts),
            Err(StateError::Budget { .. })
        ));
    }

    #[test]
    fn selector_must_match_arch() {
        assert!(matches!(
            config_set(&counter([1.0, 1.0]), Selector::C, 2, Enumeration::default()),
            Err(StateError::Selector { .. })
        ));
    }

    #[test]
    fn parallel_enumeration_matches_serial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = NetworkSpec::zeros(Arch::Gru, Alphabet::binary(), 3);
        net.randomize(&mut rng, 1.0);
        let a = config_set(&net, Selector::H, 8, Enumeration::default()).unwrap();
        let b = config_set(&net, Selector::H, 8, Enumeration { budget: DEFAULT_BUDGET, jobs: 4 }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn growth_examples() {
        let constant: Vec<_> = (1..=8).map(|n| (n, 4)).collect();
        assert_eq!(classify_growth(&constant).unwrap(), GrowthClass::Constant);
        let linear: Vec<_> = (1..=10).map(|n| (n, n + 1)).collect();
        assert_eq!(classify_growth(&linear).unwrap(), GrowthClass::Linear);
        let exp: Vec<_> = (1..=10).map(|n| (n, 1usize << n)).collect();
        assert_eq!(classify_growth(&exp).unwrap(), GrowthClass::Exponential);
        let quad: Vec<_> = (1..=10).map(|n| (n, n * n)).collect();
        assert_eq!(classify_growth(&quad).unwrap(), GrowthClass::Quadratic);
        assert!(matches!(classify_growth(&constant[..3]), Err(StateError::TooFewPoints(3))));
    }

    #[test]
    fn curves_for_counter_and_encoder() {
        let c = complexity_curve(&counter([1.0, 1.0]), Selector::H, 1..=10, Enumeration::default()).unwrap();
        assert_eq!(c.class, GrowthClass::Linear);
        assert!(c.points.iter().all(|p| p.count == p.n + 1));
        let v = complexity_curve(&identity_encoder(), Selector::V, 1..=8, Enumeration::default()).unwrap();
        assert_eq!(v.class, GrowthClass::Exponential);
        assert!(v.points.iter().all(|p| p.count == 1 << p.n));
        assert!(c.to_csv().starts_with("n,count,unstable_count\n1,2,0\n"));
    }

    fn random_net(arch: Arch, hidden: usize, seed: u64) -> NetworkSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = NetworkSpec::zeros(arch, Alphabet::binary(), hidden);
        net.randomize(&mut rng, 1.0);
        net
    }

    /// Weights on a 1/64 grid keep exact arithmetic cheap.
    fn quantized(mut net: NetworkSpec) -> NetworkSpec {
        for (_, t) in net.tensors_mut() {
            for v in &mut t.data {
                *v = (*v * 64.0).round() / 64.0 + 1.0 / 128.0;
            }
        }
        net
    }

    fn int_range(values: &BTreeSet<AsymScalar>) -> (i64, i64) {
        let ints: Vec<i64> = values
            .iter()
            .map(|v| {
                let r = v.finite().unwrap();
                assert!(r.is_integer());
                r.to_integer().try_into().unwrap()
            })
            .collect();
        (ints[0], *ints.last().unwrap())
    }

    #[test]
    fn lstm_cell_value_set_can_grow_by_more_than_two() {
        let net = quantized(random_net(Arch::Lstm, 2, 9982688526558432799));
        let s5 = config_set(&net, Selector::C, 5, Enumeration::default()).unwrap().coordinate(1);
        let s6 = config_set(&net, Selector::C, 6, Enumeration::default()).unwrap().coordinate(1);
        assert_eq!(s5.len(), 3);
        assert_eq!(s6.len(), 6);
        assert_eq!(int_range(&s5), (-5, -1));
        assert_eq!(int_range(&s6), (-6, 1));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn srn_bounded_by_two_to_k(seed in any::<u64>(), k in 1usize..4) {
            let net = random_net(Arch::Srn, k, seed);
            for n in 0..=8 {
                let set = config_set(&net, Selector::H, n, Enumeration::default()).unwrap();
                prop_assert!(set.count() <= 1 << k);
                prop_assert!(set.count() as u64 <= 2u64.pow(n as u32));
            }
        }

        #[test]
        fn gru_coordinates_in_three_values(seed in any::<u64>()) {
            let net = random_net(Arch::Gru, 2, seed);
            for n in 0..=8 {
                let set = config_set(&net, Selector::H, n, Enumeration::default()).unwrap();
                prop_assert!(set.count() <= 9);
                for v in &set.values {
                    for x in v {
                        prop_assert!([-1, 0, 1].iter().any(|&i| *x == AsymScalar::int(i)));
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(4))]

        #[test]
        fn lstm_cell_range_widens_by_at_most_one_each_side(seed in any::<u64>()) {
            let net = quantized(random_net(Arch::Lstm, 2, seed));
            let mut prev: Option<Vec<(i64, i64)>> = None;
            for n in 0..=12usize {
                let set = config_set(&net, Selector::C, n, Enumeration::default()).unwrap();
                if set.unstable > 0 {
                    break;
                }
                let ranges: Vec<(i64, i64)> = (0..2).map(|j| int_range(&set.coordinate(j))).collect();
                for (j, &(lo, hi)) in ranges.iter().enumerate() {
                    prop_assert!(set.coordinate(j).len() <= 2 * n + 1);
                    if let Some(p) = &prev {
                        prop_assert!(lo >= p[j].0 - 1 && hi <= p[j].1 + 1);
                    }
                }
                prev = Some(ranges);
            }
        }
    }
}
