//! The model `q` as a next-token scorer, and windowed sequence NLL.

mod external;

use std::collections::HashMap;
use std::sync::Arc;

pub use external::{ExternalScorer, ScorerRequest, ScorerResponse, DEFAULT_TIMEOUT};

use crate::world::{context_index, sequence_probabilities, window_of};
use crate::{Creation, Error, FiniteDistribution, Info, Prompt, Result, Scalar, Token, WorldSpec};

/// A conditional next-token distribution provider `q(· | prefix, u, I[c])`.
///
/// `prefix` is the already-windowed prefix. Implementations must be
/// deterministic in their arguments and safe for concurrent reads.
pub trait ModelScorer<S: Scalar>: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>>;
}

impl<S: Scalar, T: ModelScorer<S> + ?Sized> ModelScorer<S> for &T {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        (**self).next_token_dist(info, prompt, prefix)
    }
}

impl<S: Scalar, T: ModelScorer<S> + ?Sized> ModelScorer<S> for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        (**self).next_token_dist(info, prompt, prefix)
    }
}

impl<S: Scalar, T: ModelScorer<S> + ?Sized> ModelScorer<S> for Arc<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        (**self).next_token_dist(info, prompt, prefix)
    }
}

/// Per-token negative log-likelihoods of one creation, in nats.
#[derive(Debug, Clone, PartialEq)]
pub struct NllBreakdown<S> {
    pub per_token: Vec<S>,
    pub total: S,
}

/// `-ln q(x)` under the window-ω factorization. A realized token with zero
/// probability makes the total `+∞`.
pub fn sequence_nll<S: Scalar, M: ModelScorer<S> + ?Sized>(
    scorer: &M,
    x: &Creation,
    u: &Prompt,
    info: &Info,
    window: usize,
) -> Result<NllBreakdown<S>> {
    let tokens = x.tokens();
    let vocab = scorer.vocab_size();
    let mut per_token = Vec::with_capacity(tokens.len());
    for (t, &tok) in tokens.iter().enumerate() {
        if tok as usize >= vocab {
            return Err(Error::domain(format!("token {tok} outside scorer vocabulary {vocab}")));
        }
        let q = scorer.next_token_dist(info, u, window_of(tokens, t, window))?;
        per_token.push(-q.prob(tok as usize).ln());
    }
    let total = per_token.iter().fold(S::zero(), |acc, &v| acc + v);
    Ok(NllBreakdown { per_token, total })
}

/// Whether the sequence NLL respects the declared almost-sure bound `M`.
pub fn check_bound_m<S: Scalar>(nll: &NllBreakdown<S>, m: S) -> Result<bool> {
    if !(m > S::zero()) {
        return Err(Error::domain(format!("M = {m} must be positive")));
    }
    Ok(nll.total <= m)
}

/// Probabilities of all `V^T` creations under `scorer`, lexicographic order.
pub fn scorer_sequence_probabilities<S: Scalar, M: ModelScorer<S> + ?Sized>(
    scorer: &M,
    info: &Info,
    prompt: &Prompt,
    seq_len: usize,
    window: usize,
    cap: u64,
) -> Result<Vec<S>> {
    sequence_probabilities(scorer.vocab_size(), seq_len, window, cap, |ctx| {
        scorer.next_token_dist(info, prompt, ctx)
    })
}

/// The world's own law exposed as a scorer (the `q = p` baseline).
///
/// Requests are routed to the unique creator owning the given `Info`;
/// prefixes longer than the world window are cut to the last ω tokens.
#[derive(Debug, Clone, Copy)]
pub struct TruthScorer<'w, S> {
    world: &'w WorldSpec<S>,
}

pub fn scorer_from_world<S: Scalar>(world: &WorldSpec<S>) -> TruthScorer<'_, S> {
    TruthScorer { world }
}

impl<S: Scalar> ModelScorer<S> for TruthScorer<'_, S> {
    fn vocab_size(&self) -> usize {
        self.world.vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        let c = self
            .world
            .creator_for_info(info)
            .ok_or_else(|| Error::domain(format!("info {:?} does not identify a unique creator", info.raw())))?;
        let w = self.world.window();
        let prefix = &prefix[prefix.len().saturating_sub(w)..];
        Ok(self.world.truth_next_token(c, prompt, prefix)?.clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct UniformScorer {
    pub vocab: usize,
}

impl<S: Scalar> ModelScorer<S> for UniformScorer {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_dist(&self, _: &Info, _: &Prompt, _: &[Token]) -> Result<FiniteDistribution<S>> {
        FiniteDistribution::uniform(self.vocab)
    }
}

/// `(1 - λ) q + λ · uniform` at every step.
#[derive(Debug, Clone)]
pub struct MixedScorer<M, S> {
    inner: M,
    lambda: S,
}

pub fn mix_with_uniform<S: Scalar, M: ModelScorer<S>>(inner: M, lambda: S) -> Result<MixedScorer<M, S>> {
    if !(lambda >= S::zero() && lambda <= S::one()) {
        return Err(Error::domain(format!("mixing weight {lambda} outside [0, 1]")));
    }
    Ok(MixedScorer { inner, lambda })
}

impl<M, S: Scalar> MixedScorer<M, S> {
    pub fn lambda(&self) -> S {
        self.lambda
    }
}

impl<S: Scalar, M: ModelScorer<S>> ModelScorer<S> for MixedScorer<M, S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        self.inner.next_token_dist(info, prompt, prefix)?.mix_uniform(self.lambda)
    }
}

/// Applies ε-smoothing to every next-token distribution.
#[derive(Debug, Clone)]
pub struct SmoothedScorer<M, S> {
    inner: M,
    epsilon: S,
}

impl<S: Scalar, M: ModelScorer<S>> SmoothedScorer<M, S> {
    pub fn new(inner: M, epsilon: S) -> Result<Self> {
        if !(epsilon >= S::zero()) {
            return Err(Error::domain(format!("smoothing epsilon {epsilon} must be >= 0")));
        }
        Ok(Self { inner, epsilon })
    }
}

impl<S: Scalar, M: ModelScorer<S>> ModelScorer<S> for SmoothedScorer<M, S> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        self.inner.next_token_dist(info, prompt, prefix)?.smooth(self.epsilon)
    }
}

/// Lookup key of a [`TableScorer`]: which parts of the condition it keeps.
pub type TableKey = (Option<Info>, Option<Prompt>);

/// Explicit next-token tables keyed by (info, prompt, windowed prefix).
/// Unknown keys and contexts fall back to uniform.
#[derive(Debug, Clone)]
pub struct TableScorer<S> {
    vocab: usize,
    window: usize,
    use_info: bool,
    use_prompt: bool,
    tables: HashMap<TableKey, Vec<Option<FiniteDistribution<S>>>>,
}

impl<S: Scalar> TableScorer<S> {
    pub fn new(vocab: usize, window: usize, use_info: bool, use_prompt: bool) -> Self {
        Self {
            vocab,
            window,
            use_info,
            use_prompt,
            tables: HashMap::new(),
        }
    }

    pub fn key(&self, info: &Info, prompt: &Prompt) -> TableKey {
        (
            self.use_info.then(|| info.clone()),
            self.use_prompt.then(|| prompt.clone()),
        )
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Sets the row for one context; `prefix` is already windowed.
    pub fn insert(&mut self, key: TableKey, prefix: &[Token], row: FiniteDistribution<S>) -> Result<()> {
        if row.support_size() != self.vocab {
            return Err(Error::Dimension {
                left: row.support_size(),
                right: self.vocab,
            });
        }
        if prefix.len() > self.window {
            return Err(Error::domain("prefix longer than table window"));
        }
        let slots = (0..=self.window).map(|k| self.vocab.pow(k as u32)).sum();
        let table = self.tables.entry(key).or_insert_with(|| vec![None; slots]);
        table[context_index(prefix, self.vocab)] = Some(row);
        Ok(())
    }

    pub fn contexts(&self) -> usize {
        self.tables
            .values()
            .map(|t| t.iter().filter(|r| r.is_some()).count())
            .sum()
    }
}

impl<S: Scalar> ModelScorer<S> for TableScorer<S> {
    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn next_token_dist(&self, info: &Info, prompt: &Prompt, prefix: &[Token]) -> Result<FiniteDistribution<S>> {
        let prefix = &prefix[prefix.len().saturating_sub(self.window)..];
        if let Some(&t) = prefix.iter().find(|&&t| t as usize >= self.vocab) {
            return Err(Error::domain(format!("prefix token {t} outside vocabulary")));
        }
        match self
            .tables
            .get(&self.key(info, prompt))
            .and_then(|t| t[context_index(prefix, self.vocab)].as_ref())
        {
            Some(row) => Ok(row.clone()),
            None => FiniteDistribution::uniform(self.vocab),
        }
    }
}
