//! Exact Shapley factorisation of a gate activation over its summands.
//!
//! For summands `y_1..y_n` and an activation `a`, the contribution of `y_i` is
//! the average, over orderings of the summands, of `a(prefix + y_i) - a(prefix)`,
//! evaluated elementwise. The empty prefix is valued at `a(0)`, so a zero
//! summand always receives exactly zero. The resting value `a(0)` itself is
//! credited to the intercept term when one is present and shared equally
//! otherwise, which makes the contributions sum to `a(Σ y_i)`.
//!
//! With [`BiasPolicy::BiasFixedFirst`] the intercept occupies the first position
//! of every ordering: it receives `a(b)` and only the `(n-1)!` orderings of the
//! remaining terms are averaged.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest summand count handled by exact enumeration.
pub const MAX_TERMS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply<T: Scalar>(self, v: T) -> T {
        match self {
            Activation::Sigmoid => v.sigmoid(),
            Activation::Tanh => v.tanh(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TermLabel {
    Beta,
    Gamma,
    Bias,
    Extra,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BiasPolicy {
    #[default]
    FullPermutations,
    BiasFixedFirst,
}

impl BiasPolicy {
    pub fn name(self) -> &'static str {
        match self {
            BiasPolicy::FullPermutations => "full",
            BiasPolicy::BiasFixedFirst => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summand<T> {
    pub label: TermLabel,
    pub value: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummandList<T> {
    terms: Vec<Summand<T>>,
    activation: Activation,
}

impl<T: Scalar> SummandList<T> {
    pub fn new(terms: Vec<Summand<T>>, activation: Activation) -> Result<Self> {
        if terms.is_empty() || terms.len() > MAX_TERMS {
            return Err(Error::Summands(format!(
                "expected 1..={MAX_TERMS} terms, got {}",
                terms.len()
            )));
        }
        let len = terms[0].value.len();
        if terms.iter().any(|t| t.value.len() != len) {
            return Err(Error::Summands("summand vectors differ in length".into()));
        }
        Ok(SummandList { terms, activation })
    }

    pub fn terms(&self) -> &[Summand<T>] {
        &self.terms
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn bias_index(&self) -> Result<Option<usize>> {
        let mut found = self
            .terms
            .iter()
            .enumerate()
            .filter(|(_, t)| t.label == TermLabel::Bias)
            .map(|(i, _)| i);
        let first = found.next();
        if found.next().is_some() {
            return Err(Error::Summands("more than one bias term".into()));
        }
        Ok(first)
    }
}

/// One contribution vector per term, in input order.
pub fn shapley_contributions<T: Scalar>(
    input: &SummandList<T>,
    policy: BiasPolicy,
) -> Result<Vec<Vec<T>>> {
    let bias = input.bias_index()?;
    if policy == BiasPolicy::BiasFixedFirst && bias.is_none() {
        return Err(Error::Summands(
            "fixed-first policy requires exactly one bias term".into(),
        ));
    }
    let values: Vec<&[T]> = input.terms.iter().map(|t| t.value.as_slice()).collect();
    Ok(contributions(input.activation, &values, bias, policy))
}

/// Unchecked core used by the decomposer. `terms` must be non-empty, at most
/// [`MAX_TERMS`] long and of equal length; `bias` must be set for the fixed policy.
pub(crate) fn contributions<T: Scalar>(
    activation: Activation,
    terms: &[&[T]],
    bias: Option<usize>,
    policy: BiasPolicy,
) -> Vec<Vec<T>> {
    let n = terms.len();
    let dim = terms[0].len();
    let rest = activation.apply(T::zero());
    let mut cache = SubsetValues::new(activation, terms);
    let mut out = vec![vec![T::zero(); dim]; n];

    let fixed = match (policy, bias) {
        (BiasPolicy::BiasFixedFirst, Some(b)) => Some(b),
        _ => None,
    };
    let base = fixed.map_or(0usize, |b| 1 << b);
    let players: Vec<usize> = (0..n).filter(|&i| Some(i) != fixed).collect();
    let m = players.len();
    // weights[k]: share of orderings in which exactly k other players precede.
    let weights: Vec<T> = (0..m)
        .map(|k| {
            T::from_f64(factorial(k) * factorial(m - 1 - k) / factorial(m))
                .expect("shapley weight")
        })
        .collect();

    let mut marginals: Vec<T> = Vec::with_capacity(1 << m);
    for &i in &players {
        let others: Vec<usize> = players.iter().copied().filter(|&j| j != i).collect();
        for k in 0..dim {
            marginals.clear();
            for subset in 0usize..(1 << others.len()) {
                let mut mask = base;
                for (bit, &j) in others.iter().enumerate() {
                    if subset & (1 << bit) != 0 {
                        mask |= 1 << j;
                    }
                }
                let (before, after) = cache.pair(mask, mask | (1 << i));
                let w = weights[subset.count_ones() as usize];
                marginals.push(w * (after[k] - before[k]));
            }
            // Summing in sorted order makes the result independent of the
            // player's position, so identical terms receive identical values.
            marginals.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            out[i][k] = marginals.iter().copied().sum();
        }
    }

    match (fixed, bias) {
        (Some(b), _) => out[b] = cache.value(1 << b).to_vec(),
        (None, Some(b)) => out[b].iter_mut().for_each(|v| *v += rest),
        (None, None) => {
            if rest != T::zero() {
                let share = rest / T::from_usize(n).expect("term count");
                for contrib in &mut out {
                    contrib.iter_mut().for_each(|v| *v += share);
                }
            }
        }
    }
    out
}

/// Memoised activation of subset sums. Members are added in ascending index
/// order, so a subset's value does not depend on the ordering that reached it.
struct SubsetValues<'a, T> {
    activation: Activation,
    terms: &'a [&'a [T]],
    values: Vec<Option<Vec<T>>>,
}

impl<'a, T: Scalar> SubsetValues<'a, T> {
    fn new(activation: Activation, terms: &'a [&'a [T]]) -> Self {
        SubsetValues {
            activation,
            terms,
            values: vec![None; 1 << terms.len()],
        }
    }

    fn ensure(&mut self, mask: usize) {
        if self.values[mask].is_some() {
            return;
        }
        let dim = self.terms[0].len();
        let mut sum = vec![T::zero(); dim];
        for (i, term) in self.terms.iter().enumerate() {
            if mask & (1 << i) != 0 {
                for (s, &v) in sum.iter_mut().zip(term.iter()) {
                    *s += v;
                }
            }
        }
        let act = self.activation;
        sum.iter_mut().for_each(|s| *s = act.apply(*s));
        self.values[mask] = Some(sum);
    }

    fn value(&mut self, mask: usize) -> &[T] {
        self.ensure(mask);
        self.values[mask].as_deref().unwrap()
    }

    fn pair(&mut self, a: usize, b: usize) -> (&[T], &[T]) {
        self.ensure(a);
        self.ensure(b);
        (
            self.values[a].as_deref().unwrap(),
            self.values[b].as_deref().unwrap(),
        )
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}
