//! Exhaustive checks of the finite-distribution inequalities behind the negative
//! results, plus an enumeration check of the combinator walks.
//!
//! Distributions are weight vectors over a shared finite support `0..len`.

use serde::Serialize;

use crate::combinators::{bf_error_bound, grid_position, BFState};
use crate::error::{config, Result};
use crate::rng::SplitMix64;

const TOL: f64 = 1e-12;

pub const MAX_TV_SUPPORT: usize = 4;
pub const MAX_TV_POWER: u32 = 6;
pub const MAX_LECAM_SUPPORT: usize = 12;
pub const MAX_CLASS: usize = 5;
/// Cap on `classes^support` for the partition search.
pub const MAX_PARTITIONS: u64 = 1 << 20;

fn check_dist(name: &str, p: &[f64]) -> Result<()> {
    if p.is_empty() || p.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
        return config(format!("{name}: weights must be finite and nonnegative"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return config(format!("{name}: weights sum to {total}"));
    }
    Ok(())
}

fn pad(p: &[f64], len: usize) -> Vec<f64> {
    let mut v = p.to_vec();
    v.resize(len, 0.0);
    v
}

pub fn total_variation(mu: &[f64], nu: &[f64]) -> f64 {
    let len = mu.len().max(nu.len());
    let (a, b) = (pad(mu, len), pad(nu, len));
    0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub exact: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Exact TV between the `n`-fold products, by walking all `len^n` outcome
/// tuples, against `1 - (1 - TV)^n`.
pub fn oracle_tv_product(mu: &[f64], nu: &[f64], n: u32) -> Result<BoundCheck> {
    check_dist("mu", mu)?;
    check_dist("nu", nu)?;
    let len = mu.len().max(nu.len());
    if len > MAX_TV_SUPPORT || !(1..=MAX_TV_POWER).contains(&n) {
        return config(format!(
            "tv oracle takes support <= {MAX_TV_SUPPORT} and 1 <= n <= {MAX_TV_POWER}"
        ));
    }
    let (a, b) = (pad(mu, len), pad(nu, len));
    let mut digits = vec![0usize; n as usize];
    let mut sum = 0.0;
    loop {
        let pa: f64 = digits.iter().map(|&d| a[d]).product();
        let pb: f64 = digits.iter().map(|&d| b[d]).product();
        sum += (pa - pb).abs();
        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < len {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            break;
        }
    }
    let exact = 0.5 * sum;
    let bound = 1.0 - (1.0 - total_variation(&a, &b)).powi(n as i32);
    Ok(BoundCheck {
        exact,
        bound,
        holds: exact <= bound + TOL,
    })
}

/// Minimax error over all deterministic tests `support -> {0, 1}` against
/// `(1 - TV) / 2`.
pub fn oracle_lecam(mu0: &[f64], mu1: &[f64]) -> Result<BoundCheck> {
    check_dist("mu0", mu0)?;
    check_dist("mu1", mu1)?;
    let len = mu0.len().max(mu1.len());
    if len > MAX_LECAM_SUPPORT {
        return config(format!("le cam oracle takes support <= {MAX_LECAM_SUPPORT}, got {len}"));
    }
    let (a, b) = (pad(mu0, len), pad(mu1, len));
    let mut exact = f64::INFINITY;
    for mask in 0u32..(1 << len) {
        // Bit x set means the test answers 1 on x.
        let err0: f64 = (0..len).filter(|x| mask >> x & 1 == 1).map(|x| a[x]).sum();
        let err1: f64 = (0..len).filter(|x| mask >> x & 1 == 0).map(|x| b[x]).sum();
        exact = exact.min(err0.max(err1));
    }
    let bound = (1.0 - total_variation(&a, &b)) / 2.0;
    Ok(BoundCheck {
        exact,
        bound,
        holds: exact + TOL >= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartitionCheck {
    pub exact: f64,
    /// Sum over the support of the largest class weight.
    pub envelope_mass: f64,
    pub bound: f64,
    pub holds: bool,
    /// The bound is at most zero and says nothing.
    pub vacuous: bool,
}

/// Minimax identification error over every map `support -> class` against
/// `1 - N / |class|`.
pub fn oracle_ml_partition(class: &[Vec<f64>]) -> Result<PartitionCheck> {
    let m = class.len();
    if !(1..=MAX_CLASS).contains(&m) {
        return config(format!("partition oracle takes 1..={MAX_CLASS} distributions, got {m}"));
    }
    for (i, p) in class.iter().enumerate() {
        check_dist(&format!("class[{i}]"), p)?;
    }
    let len = class.iter().map(Vec::len).max().unwrap();
    let maps = (m as u64).checked_pow(len as u32).filter(|&c| c <= MAX_PARTITIONS);
    let Some(maps) = maps else {
        return config(format!("{m}^{len} maps exceed the enumeration cap {MAX_PARTITIONS}"));
    };
    let class: Vec<Vec<f64>> = class.iter().map(|p| pad(p, len)).collect();
    let envelope_mass: f64 = (0..len).map(|x| class.iter().map(|p| p[x]).fold(0.0, f64::max)).sum();

    let mut assign = vec![0usize; len];
    let mut exact = f64::INFINITY;
    for _ in 0..maps {
        let worst = (0..m)
            .map(|j| (0..len).filter(|&x| assign[x] != j).map(|x| class[j][x]).sum::<f64>())
            .fold(0.0, f64::max);
        exact = exact.min(worst);
        for slot in assign.iter_mut() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    let bound = 1.0 - envelope_mass / m as f64;
    Ok(PartitionCheck {
        exact,
        envelope_mass,
        bound,
        holds: exact + TOL >= bound,
        vacuous: bound <= TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub instances: u64,
    pub violations: u64,
    /// Instances where the bound was at most zero (partition suite only).
    pub vacuous: u64,
    /// Largest `exact - bound` (tv) or `bound - exact` (lower bounds) seen.
    pub worst_slack: f64,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }
}

fn random_dist(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    // Some coordinates are zeroed so disjoint and point-mass cases show up.
    let mut w: Vec<f64> = (0..len)
        .map(|_| if rng.bernoulli(0.2) { 0.0 } else { rng.next_f64() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[(rng.next_u64() % len as u64) as usize] = 1.0;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Half the time `nu` is a small perturbation of `mu`.
fn random_pair(rng: &mut SplitMix64, len: usize) -> (Vec<f64>, Vec<f64>) {
    let mu = random_dist(rng, len);
    let nu = if rng.bernoulli(0.5) {
        let noise = random_dist(rng, len);
        let t = rng.next_f64() * 0.2;
        mu.iter().zip(&noise).map(|(a, b)| (1.0 - t) * a + t * b).collect()
    } else {
        random_dist(rng, len)
    };
    (mu, nu)
}

fn range(rng: &mut SplitMix64, lo: u64, hi: u64) -> u64 {
    lo + rng.next_u64() % (hi - lo + 1)
}

pub fn tv_suite(instances: u64, seed: u64) -> SuiteReport {
    let mut rng = SplitMix64::new(seed);
    let mut report = SuiteReport::new("tv", instances);
    for _ in 0..instances {
        let len = range(&mut rng, 2, MAX_TV_SUPPORT as u64) as usize;
        let n = range(&mut rng, 1, MAX_TV_POWER as u64) as u32;
        let (mu, nu) = random_pair(&mut rng, len);
        let c = oracle_tv_product(&mu, &nu, n).expect("instance within limits");
        report.record(c.holds, c.exact - c.bound);
    }
    report
}

pub fn lecam_suite(instances: u64, seed: u64) -> SuiteReport {
    let mut rng = SplitMix64::new(seed);
    let mut report = SuiteReport::new("lecam", instances);
    for _ in 0..instances {
        let len = range(&mut rng, 1, MAX_LECAM_SUPPORT as u64) as usize;
        let (mu0, mu1) = random_pair(&mut rng, len);
        let c = oracle_lecam(&mu0, &mu1).expect("instance within limits");
        report.record(c.holds, c.bound - c.exact);
    }
    report
}

pub fn ml_partition_suite(instances: u64, seed: u64) -> SuiteReport {
    let mut rng = SplitMix64::new(seed);
    let mut report = SuiteReport::new("mlpartition", instances);
    for _ in 0..instances {
        let m = range(&mut rng, 2, MAX_CLASS as u64) as usize;
        let max_len = (1..=8).rev().find(|&l| (m as u64).pow(l) <= MAX_PARTITIONS).unwrap();
        let len = range(&mut rng, 1, max_len as u64) as usize;
        let class: Vec<Vec<f64>> = (0..m).map(|_| random_dist(&mut rng, len)).collect();
        let c = oracle_ml_partition(&class).expect("instance within limits");
        report.record(c.holds, c.bound - c.exact);
        if c.vacuous {
            report.vacuous += 1;
        }
    }
    report.notes.push(format!(
        "{} of {} instances have a bound <= 0; the bound only bites when the class members overlap heavily",
        report.vacuous, instances
    ));
    report
}

/// Checks the closed-form walk states against step-by-step advancing for
/// `positions` steps, that every pair `s <= t` is visited once in order, the
/// first-arrival bound for `k <= 50`, and that grid positions enumerate each
/// anti-diagonal exactly once.
pub fn combinator_state_suite(positions: u64) -> SuiteReport {
    let mut report = SuiteReport::new("combinator-state", 0);
    let mut state = BFState::default();
    let mut first_arrival = vec![None; 51];
    let check = |report: &mut SuiteReport, ok: bool, msg: String| {
        report.instances += 1;
        if !ok {
            report.violations += 1;
            if report.notes.len() < 10 {
                report.notes.push(msg);
            }
        }
    };
    for losses in 0..positions {
        let closed = BFState::after(losses);
        check(
            &mut report,
            closed == state,
            format!("after({losses}) = {closed:?}, walk at {state:?}"),
        );
        if state.s <= 50 && first_arrival[state.s].is_none() {
            first_arrival[state.s] = Some(losses);
        }
        let next = state.advance();
        let in_order = if state.s < state.t {
            next == BFState {
                s: state.s + 1,
                t: state.t,
            }
        } else {
            next == BFState { s: 1, t: state.t + 1 }
        };
        check(
            &mut report,
            in_order && state.s <= state.t,
            format!("bad step {state:?} -> {next:?}"),
        );
        state = next;
    }
    for k in 1..=50u64 {
        let ok = match first_arrival[k as usize] {
            Some(at) => at == bf_error_bound(k),
            None => positions <= bf_error_bound(k),
        };
        check(
            &mut report,
            ok,
            format!("first arrival at s = {k} was {:?}", first_arrival[k as usize]),
        );
    }
    let mut expect = (1u64, 1u64);
    for s in 1..=positions {
        let got = grid_position(s);
        check(
            &mut report,
            got == expect,
            format!("grid_position({s}) = {got:?}, expected {expect:?}"),
        );
        expect = if expect.0 == 1 {
            (expect.1 + 1, 1)
        } else {
            (expect.0 - 1, expect.1 + 1)
        };
    }
    report
}

impl SuiteReport {
    fn new(suite: &str, instances: u64) -> Self {
        Self {
            suite: suite.to_string(),
            instances,
            violations: 0,
            vacuous: 0,
            worst_slack: f64::NEG_INFINITY,
            notes: Vec::new(),
        }
    }

    fn record(&mut self, holds: bool, slack: f64) {
        if !holds {
            self.violations += 1;
        }
        self.worst_slack = self.worst_slack.max(slack);
    }
}

pub const SUITES: [&str; 4] = ["tv", "lecam", "mlpartition", "combinator-state"];

/// Default sizes: 100 random instances, or 10^6 walk positions.
pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    Ok(match name {
        "tv" => tv_suite(100, seed),
        "lecam" => lecam_suite(100, seed),
        "mlpartition" => ml_partition_suite(100, seed),
        "combinator-state" => combinator_state_suite(1_000_000),
        _ => {
            return config(format!(
                "unknown oracle suite `{name}`; expected one of {}",
                SUITES.join(", ")
            ))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn tv_examples() {
        let c = oracle_tv_product(&[1.0], &[0.5, 0.5], 2).unwrap();
        assert!(close(c.exact, 0.75) && close(c.bound, 0.75) && c.holds);
        let c = oracle_tv_product(&[0.3, 0.7], &[0.3, 0.7], 4).unwrap();
        assert!(close(c.exact, 0.0) && close(c.bound, 0.0));
        let c = oracle_tv_product(&[0.9, 0.1], &[0.8, 0.2], 3).unwrap();
        assert!(close(c.bound, 0.271) && c.holds);
        // Independent check: TV of the binomial counts equals TV of the tuples.
        let binom = |p: f64, k: i32| [1.0, 3.0, 3.0, 1.0][k as usize] * p.powi(k) * (1.0 - p).powi(3 - k);
        let direct = 0.5 * (0..4).map(|k| (binom(0.1, k) - binom(0.2, k)).abs()).sum::<f64>();
        assert!(close(c.exact, direct));
    }

    #[test]
    fn lecam_examples() {
        let c = oracle_lecam(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert!(close(c.exact, 0.5) && close(c.bound, 0.5));
        let c = oracle_lecam(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(close(c.exact, 0.0) && close(c.bound, 0.0));
        let c = oracle_lecam(&[0.6, 0.4], &[0.4, 0.6]).unwrap();
        assert!(close(c.exact, 0.4) && close(c.bound, 0.4));
        assert!(oracle_lecam(&[1.0 / 13.0; 13], &[1.0 / 13.0; 13]).is_err());
    }

    #[test]
    fn partition_examples() {
        let c = oracle_ml_partition(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(close(c.exact, 0.5) && close(c.envelope_mass, 1.0) && close(c.bound, 0.5));
        let c = oracle_ml_partition(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(close(c.exact, 0.0) && close(c.envelope_mass, 2.0) && close(c.bound, 0.0));
        assert!(c.vacuous);
        let c = oracle_ml_partition(&[vec![0.7, 0.3], vec![0.3, 0.7]]).unwrap();
        assert!(close(c.envelope_mass, 1.4) && close(c.exact, 0.3) && close(c.bound, 0.3));
        assert!(oracle_ml_partition(&vec![vec![1.0]; 6]).is_err());
    }

    #[test]
    fn suites_pass() {
        for name in SUITES.iter().take(3) {
            let r = run_suite(name, 11).unwrap();
            assert_eq!(r.instances, 100);
            assert!(r.pass(), "{r:?}");
        }
        let r = combinator_state_suite(20_000);
        assert!(r.pass(), "{r:?}");
        assert!(run_suite("nope", 0).is_err());
    }
}
