//! Predictors for {0,1}-valued functionals of a mean vector that are
//! decided by finitely many comparisons `g_i(t) >= g_j(t)`.
//!
//! Running means are re-evaluated at sample sizes `L = 1, 2, 4, ...` with
//! each comparison relaxed by the margin `δ(L) = c L^(-1/3)`, which shrinks
//! more slowly than the `L^(-1/2)` estimation error.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::game::{Outcome, Prediction, Predictor};

pub type Feature = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type Program = Arc<dyn Fn(&[bool]) -> bool + Send + Sync>;

#[derive(Clone)]
pub struct Comparison {
    pub left: Feature,
    pub right: Feature,
}

/// Bit `1{left(t) >= right(t) - margin}`.
pub fn compare(c: &Comparison, t: &[f64], margin: f64) -> bool {
    (c.left)(t) >= (c.right)(t) - margin
}

pub fn stage_margin(c: f64, samples: u64) -> f64 {
    c * (samples as f64).powf(-1.0 / 3.0)
}

#[derive(Clone)]
pub struct Functional {
    pub comparisons: Vec<Comparison>,
    pub program: Program,
}

impl Functional {
    pub fn eval(&self, t: &[f64], margin: f64) -> bool {
        let bits: Vec<bool> = self.comparisons.iter().map(|c| compare(c, t, margin)).collect();
        (self.program)(&bits)
    }
}

pub struct FunctionalPredictor {
    functional: Functional,
    margin_c: f64,
    sums: Vec<f64>,
    seen: u64,
    next_eval: u64,
    answer: bool,
}

impl FunctionalPredictor {
    pub fn new(functional: Functional, margin_c: f64) -> Self {
        Self {
            functional,
            margin_c,
            sums: Vec::new(),
            seen: 0,
            next_eval: 1,
            answer: false,
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.seen.max(1) as f64;
        self.sums.iter().map(|s| s / n).collect()
    }
}

impl Predictor for FunctionalPredictor {
    fn predict(&self) -> Prediction {
        Prediction::Binary(self.answer)
    }

    fn observe(&mut self, outcome: &Outcome, _: Option<bool>) {
        let x = outcome.as_slice().expect("vector outcomes");
        if self.sums.is_empty() {
            self.sums = vec![0.0; x.len()];
        }
        for (s, v) in self.sums.iter_mut().zip(x) {
            *s += v;
        }
        self.seen += 1;
        if self.seen == self.next_eval {
            let margin = stage_margin(self.margin_c, self.seen);
            self.answer = self.functional.eval(&self.mean(), margin);
            self.next_eval = self.next_eval.saturating_mul(2);
        }
    }
}

fn matrix(entries: &[f64], dim: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(dim, dim, &entries[..dim * dim])
}

pub fn determinant(entries: &[f64], dim: usize) -> f64 {
    matrix(entries, dim).determinant()
}

/// All `size x size` minors, rows and columns in lexicographic order.
pub fn minors(entries: &[f64], dim: usize, size: usize) -> Vec<f64> {
    let subsets = subsets(dim, size);
    let m = matrix(entries, dim);
    let mut out = Vec::with_capacity(subsets.len() * subsets.len());
    for rows in &subsets {
        for cols in &subsets {
            let sub = DMatrix::from_fn(size, size, |i, j| m[(rows[i], cols[j])]);
            out.push(sub.determinant());
        }
    }
    out
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Characteristic polynomial `λ^d + c_1 λ^(d-1) + ... + c_d` as
/// `[1, c_1, ..., c_d]`, by Faddeev–LeVerrier.
pub fn char_poly(entries: &[f64], dim: usize) -> Vec<f64> {
    let a = matrix(entries, dim);
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    for k in 1..=dim {
        m = &a * &m + DMatrix::identity(dim, dim) * coeffs[k - 1];
        let c = -(&a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Resultant of `p` and `p'` for a monic `p` given as `[1, c_1, ..., c_d]`;
/// zero exactly when `p` has a repeated root.
pub fn resultant_with_derivative(p: &[f64]) -> f64 {
    let d = p.len() - 1;
    if d <= 1 {
        return 1.0;
    }
    let dp: Vec<f64> = (0..d).map(|i| p[i] * (d - i) as f64).collect();
    // Sylvester matrix: d-1 shifted copies of p, then d shifted copies of p'.
    let n = 2 * d - 1;
    let mut s = DMatrix::<f64>::zeros(n, n);
    for r in 0..d - 1 {
        for (i, c) in p.iter().enumerate() {
            s[(r, r + i)] = *c;
        }
    }
    for r in 0..d {
        for (i, c) in dp.iter().enumerate() {
            s[(d - 1 + r, r + i)] = *c;
        }
    }
    s.determinant()
}

fn zero() -> Feature {
    Arc::new(|_| 0.0)
}

/// Comparisons `(f, 0)` and `(0, f)`; both bits set means `|f| <= margin`.
fn zero_tests(features: Vec<Feature>) -> Vec<Comparison> {
    features
        .into_iter()
        .flat_map(|f| {
            [
                Comparison {
                    left: f.clone(),
                    right: zero(),
                },
                Comparison { left: zero(), right: f },
            ]
        })
        .collect()
}

fn is_zero(bits: &[bool], i: usize) -> bool {
    bits[2 * i] && bits[2 * i + 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixProperty {
    Singular,
    RankEquals(usize),
    RepeatedEigenvalue,
    /// Input holds two matrices back to back.
    SpectrumEqual,
}

/// Tolerance for ground-truth bits computed from exact means.
pub const TRUTH_TOLERANCE: f64 = 1e-12;

impl MatrixProperty {
    pub fn name(&self) -> String {
        match self {
            MatrixProperty::Singular => "singular".into(),
            MatrixProperty::RankEquals(r) => format!("rank_{r}"),
            MatrixProperty::RepeatedEigenvalue => "repeated_eigenvalue".into(),
            MatrixProperty::SpectrumEqual => "spectrum_equal".into(),
        }
    }

    pub fn functional(&self, dim: usize) -> Functional {
        match *self {
            MatrixProperty::Singular => Functional {
                comparisons: zero_tests(vec![Arc::new(move |t| determinant(t, dim))]),
                program: Arc::new(|b| is_zero(b, 0)),
            },
            MatrixProperty::RankEquals(r) => {
                assert!(r <= dim);
                let lower = if r == 0 { 0 } else { subsets(dim, r).len().pow(2) };
                let upper = if r == dim { 0 } else { subsets(dim, r + 1).len().pow(2) };
                let mut features: Vec<Feature> = Vec::new();
                for i in 0..lower {
                    features.push(Arc::new(move |t| minors(t, dim, r)[i]));
                }
                for i in 0..upper {
                    features.push(Arc::new(move |t| minors(t, dim, r + 1)[i]));
                }
                Functional {
                    comparisons: zero_tests(features),
                    program: Arc::new(move |b| {
                        let some_nonzero = lower == 0 || (0..lower).any(|i| !is_zero(b, i));
                        let all_zero_above = (lower..lower + upper).all(|i| is_zero(b, i));
                        some_nonzero && all_zero_above
                    }),
                }
            }
            MatrixProperty::RepeatedEigenvalue => Functional {
                comparisons: zero_tests(vec![Arc::new(move |t| resultant_with_derivative(&char_poly(t, dim)))]),
                program: Arc::new(|b| is_zero(b, 0)),
            },
            MatrixProperty::SpectrumEqual => {
                let mut features: Vec<Feature> = Vec::new();
                for i in 0..=dim {
                    for j in (i + 1)..=dim {
                        features.push(Arc::new(move |t| {
                            let a = char_poly(&t[..dim * dim], dim);
                            let b = char_poly(&t[dim * dim..2 * dim * dim], dim);
                            a[i] * b[j] - a[j] * b[i]
                        }));
                    }
                }
                let count = features.len();
                Functional {
                    comparisons: zero_tests(features),
                    program: Arc::new(move |b| (0..count).all(|i| is_zero(b, i))),
                }
            }
        }
    }

    pub fn predictor(&self, dim: usize, margin_c: f64) -> FunctionalPredictor {
        FunctionalPredictor::new(self.functional(dim), margin_c)
    }

    /// The property of the exact mean matrix (or pair).
    pub fn truth(&self, dim: usize, means: &[f64]) -> bool {
        self.functional(dim).eval(means, TRUTH_TOLERANCE)
    }
}
