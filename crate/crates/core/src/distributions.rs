//! Exact finite discrete distributions.
//!
//! Every entropy and KL computation in the crate goes through
//! [`FiniteDistribution`]. Values are in nats.

use rand::Rng;

use crate::{neumaier_sum, Error, Result, Scalar};

/// Probability vector over the support `0..support_size()`.
///
/// Invariants: entries are finite and non-negative and sum to one within
/// [`Scalar::SIMPLEX_TOLERANCE`]; the support is non-empty.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<S> {
    probs: Vec<S>,
}

impl<S: Scalar> FiniteDistribution<S> {
    /// Validates `probs`. Inputs whose sum is within
    /// [`Scalar::RENORMALIZE_TOLERANCE`] of one are renormalized, anything
    /// further off is rejected.
    pub fn new(probs: Vec<S>) -> Result<Self> {
        check_entries(&probs)?;
        let sum = neumaier_sum(probs.iter().copied());
        if (sum - S::one()).abs().as_f64() > S::RENORMALIZE_TOLERANCE {
            return Err(Error::Validation(format!("entries sum to {sum}, expected 1")));
        }
        Ok(Self::normalized(probs, sum))
    }

    /// Normalizes arbitrary non-negative weights with a positive finite total.
    pub fn from_weights(weights: Vec<S>) -> Result<Self> {
        check_entries(&weights)?;
        let sum = neumaier_sum(weights.iter().copied());
        if !(sum > S::zero()) || !sum.is_finite() {
            return Err(Error::Validation(format!("weights have total {sum}")));
        }
        Ok(Self::normalized(weights, sum))
    }

    pub fn uniform(support_size: usize) -> Result<Self> {
        if support_size == 0 {
            return Err(Error::Validation("empty support".into()));
        }
        let p = S::one() / S::lit(support_size as f64);
        Ok(Self {
            probs: vec![p; support_size],
        })
    }

    pub fn point_mass(support_size: usize, index: usize) -> Result<Self> {
        if index >= support_size {
            return Err(Error::Lookup {
                what: "support index",
                id: index,
            });
        }
        let mut probs = vec![S::zero(); support_size];
        probs[index] = S::one();
        Ok(Self { probs })
    }

    fn normalized(mut probs: Vec<S>, sum: S) -> Self {
        if sum != S::one() {
            for p in probs.iter_mut() {
                *p = *p / sum;
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &[S] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.probs.len()
    }

    pub fn prob(&self, index: usize) -> S {
        self.probs[index]
    }

    /// Shannon entropy `-Σ p ln p` with `0 ln 0 = 0`, clamped into `[0, ln V]`.
    pub fn entropy(&self) -> S {
        let h = -neumaier_sum(
            self.probs
                .iter()
                .filter(|&&p| p > S::zero())
                .map(|&p| p * p.ln()),
        );
        let ceiling = S::lit(self.probs.len() as f64).ln();
        h.max(S::zero()).min(ceiling)
    }

    /// `(q_i + ε) / (1 + V ε)`; full support whenever `ε > 0`.
    pub fn smooth(&self, epsilon: S) -> Result<Self> {
        if !(epsilon >= S::zero()) || !epsilon.is_finite() {
            return Err(Error::domain(format!("smoothing epsilon {epsilon} must be finite and >= 0")));
        }
        if epsilon == S::zero() {
            return Ok(self.clone());
        }
        let denom = S::one() + S::lit(self.probs.len() as f64) * epsilon;
        Ok(Self {
            probs: self.probs.iter().map(|&q| (q + epsilon) / denom).collect(),
        })
    }

    /// `(1 - λ) q + λ uniform`.
    pub fn mix_uniform(&self, lambda: S) -> Result<Self> {
        if !(lambda >= S::zero() && lambda <= S::one()) {
            return Err(Error::domain(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let u = lambda / S::lit(self.probs.len() as f64);
        let keep = S::one() - lambda;
        Ok(Self {
            probs: self.probs.iter().map(|&q| keep * q + u).collect(),
        })
    }

    /// Draws a support index with probability `p_i`; zero-mass indices are never returned.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut last_positive = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            let p = p.as_f64();
            if p > 0.0 {
                cum += p;
                last_positive = i;
                if u < cum {
                    return i;
                }
            }
        }
        last_positive
    }

    pub fn min_prob(&self) -> S {
        self.probs.iter().copied().fold(S::infinity(), S::min)
    }
}

fn check_entries<S: Scalar>(probs: &[S]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Validation("empty support".into()));
    }
    if let Some((i, p)) = probs
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < S::zero())
    {
        return Err(Error::Validation(format!("entry {i} is {p}")));
    }
    Ok(())
}

pub fn entropy<S: Scalar>(d: &FiniteDistribution<S>) -> S {
    d.entropy()
}

/// `Σ p_i ln(p_i / q_i)`; `+∞` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_divergence<S: Scalar>(p: &FiniteDistribution<S>, q: &FiniteDistribution<S>) -> Result<S> {
    if p.support_size() != q.support_size() {
        return Err(Error::Dimension {
            left: p.support_size(),
            right: q.support_size(),
        });
    }
    let mut terms = Vec::with_capacity(p.support_size());
    for (&pi, &qi) in p.probs.iter().zip(&q.probs) {
        if pi == S::zero() {
            continue;
        }
        if qi == S::zero() {
            return Ok(S::infinity());
        }
        terms.push(pi * (pi / qi).ln());
    }
    Ok(neumaier_sum(terms).max(S::zero()))
}

pub fn smooth<S: Scalar>(q: &FiniteDistribution<S>, epsilon: S) -> Result<FiniteDistribution<S>> {
    q.smooth(epsilon)
}

pub fn sample<S: Scalar, R: Rng + ?Sized>(d: &FiniteDistribution<S>, rng: &mut R) -> usize {
    d.sample(rng)
}

/// Per-token NLL ceiling implied by ε-smoothing over `vocab` outcomes: `ln((1 + Vε)/ε)`.
pub fn smoothing_nll_ceiling<S: Scalar>(vocab: usize, epsilon: S) -> S {
    ((S::one() + S::lit(vocab as f64) * epsilon) / epsilon).ln()
}
