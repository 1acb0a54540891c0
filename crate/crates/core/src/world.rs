//! Synthetic creator universes with exactly known ground truth.
//!
//! A world fixes the creator distribution `D_C`, the prompt distribution
//! `D_U` (the joint is always the product `D_C(c) D_U(u)`), the information
//! map `I[c]`, and per (creator, prompt) an order-ω Markov token law. Rows of
//! a law are keyed by the windowed prefix only; a prefix shorter than ω means
//! the position is still inside the first window.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, FiniteDistribution, Result, Scalar};

pub type Token = u32;

/// Default bound on `V^T` for anything that enumerates creations.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Creator {
    pub id: usize,
}

impl Creator {
    pub fn new(id: usize) -> Self {
        Self { id }
    }
}

/// Token of the information namespace. Distinct from [`Token`] so creation
/// tokens can never leak into `I[c]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureToken(pub u32);

/// The creation-free information `I[c]` a model conditions on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Info {
    tokens: Vec<FeatureToken>,
}

impl Info {
    pub fn new(tokens: impl IntoIterator<Item = u32>) -> Self {
        Self {
            tokens: tokens.into_iter().map(FeatureToken).collect(),
        }
    }

    pub fn tokens(&self) -> &[FeatureToken] {
        &self.tokens
    }

    pub fn raw(&self) -> Vec<u32> {
        self.tokens.iter().map(|t| t.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Prompt {
    pub id: usize,
    pub tokens: Vec<u32>,
}

/// A sequence of exactly `T` tokens over `[0, V)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Creation {
    tokens: Vec<Token>,
}

impl Creation {
    pub fn new(tokens: Vec<Token>, vocab_size: usize, seq_len: usize) -> Result<Self> {
        if tokens.len() != seq_len {
            return Err(Error::domain(format!(
                "creation has {} tokens, expected {seq_len}",
                tokens.len()
            )));
        }
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= vocab_size) {
            return Err(Error::domain(format!("token {t} outside vocabulary of size {vocab_size}")));
        }
        Ok(Self { tokens })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(tokens: Vec<Token>) -> Self {
        Self { tokens }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// The conditioning window at (0-based) position `t`: `tokens[t-ω..t]`,
/// or the whole prefix while `t < ω`.
pub fn window_of(tokens: &[Token], t: usize, window: usize) -> &[Token] {
    &tokens[t.saturating_sub(window)..t]
}

/// Number of distinct windowed prefixes: `Σ_{k=0}^{ω} V^k`.
fn context_count(vocab: usize, window: usize) -> Result<usize> {
    let mut total = 0usize;
    let mut pow = 1usize;
    for _ in 0..=window {
        total = total
            .checked_add(pow)
            .ok_or_else(|| Error::domain("context table too large"))?;
        pow = pow
            .checked_mul(vocab)
            .ok_or_else(|| Error::domain("context table too large"))?;
    }
    Ok(total)
}

fn context_offset(vocab: usize, len: usize) -> usize {
    (0..len).map(|k| vocab.pow(k as u32)).sum()
}

/// Index of a windowed prefix in canonical table order: all length-0
/// contexts, then length-1 in lexicographic order, and so on.
pub fn context_index(prefix: &[Token], vocab: usize) -> usize {
    let base = prefix.iter().fold(0usize, |acc, &t| acc * vocab + t as usize);
    context_offset(vocab, prefix.len()) + base
}

/// An order-ω Markov token law with one row per windowed prefix.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovLaw<S> {
    vocab: usize,
    window: usize,
    rows: Vec<FiniteDistribution<S>>,
}

impl<S: Scalar> MarkovLaw<S> {
    pub fn new(vocab: usize, window: usize, rows: Vec<FiniteDistribution<S>>) -> Result<Self> {
        let expected = context_count(vocab, window)?;
        if rows.len() != expected {
            return Err(Error::Dimension {
                left: rows.len(),
                right: expected,
            });
        }
        if let Some(r) = rows.iter().find(|r| r.support_size() != vocab) {
            return Err(Error::Dimension {
                left: r.support_size(),
                right: vocab,
            });
        }
        Ok(Self { vocab, window, rows })
    }

    /// The same next-token row in every context.
    pub fn iid(vocab: usize, window: usize, row: FiniteDistribution<S>) -> Result<Self> {
        let n = context_count(vocab, window)?;
        Self::new(vocab, window, vec![row; n])
    }

    pub fn row(&self, prefix: &[Token]) -> Result<&FiniteDistribution<S>> {
        if prefix.len() > self.window {
            return Err(Error::domain(format!(
                "prefix of length {} exceeds window {}",
                prefix.len(),
                self.window
            )));
        }
        if let Some(&t) = prefix.iter().find(|&&t| t as usize >= self.vocab) {
            return Err(Error::domain(format!("prefix token {t} outside vocabulary")));
        }
        Ok(&self.rows[context_index(prefix, self.vocab)])
    }

    pub fn rows(&self) -> &[FiniteDistribution<S>] {
        &self.rows
    }
}

/// JSON form of a creation law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawConfig {
    /// One next-token row shared by every context.
    Iid(Vec<f64>),
    /// First-order chain; requires `window == 1`.
    Markov {
        initial: Vec<f64>,
        transition: Vec<Vec<f64>>,
    },
    /// Every context row in canonical order (see [`context_index`]).
    Table(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawEntry {
    pub creator: usize,
    /// `None` applies the law to every prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<usize>,
    pub law: LawConfig,
}

/// World config file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub vocab_size: usize,
    pub seq_len: usize,
    pub window: usize,
    pub creator_weights: Vec<f64>,
    /// Defaults to uniform over `prompts`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_weights: Option<Vec<f64>>,
    /// Prompt token lists; defaults to a single empty prompt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompts: Option<Vec<Vec<u32>>>,
    /// Feature tokens `I[c]` per creator.
    pub info: Vec<Vec<u32>>,
    pub laws: Vec<LawEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enumeration_cap: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct WorldSpec<S> {
    vocab_size: usize,
    seq_len: usize,
    window: usize,
    creator_weights: FiniteDistribution<S>,
    prompt_weights: FiniteDistribution<S>,
    prompts: Vec<Vec<u32>>,
    info_map: Vec<Info>,
    /// Indexed by `creator * num_prompts + prompt`.
    laws: Vec<MarkovLaw<S>>,
    enumeration_cap: u64,
}

fn to_dist<S: Scalar>(v: &[f64]) -> Result<FiniteDistribution<S>> {
    FiniteDistribution::new(v.iter().map(|&p| S::lit(p)).collect())
}

impl LawConfig {
    fn build<S: Scalar>(&self, vocab: usize, window: usize) -> Result<MarkovLaw<S>> {
        match self {
            LawConfig::Iid(row) => MarkovLaw::iid(vocab, window, to_dist(row)?),
            LawConfig::Markov { initial, transition } => {
                if window != 1 {
                    return Err(Error::domain("markov law requires window 1"));
                }
                let mut rows = vec![to_dist(initial)?];
                for r in transition {
                    rows.push(to_dist(r)?);
                }
                MarkovLaw::new(vocab, window, rows)
            }
            LawConfig::Table(rows) => MarkovLaw::new(
                vocab,
                window,
                rows.iter().map(|r| to_dist(r)).collect::<Result<_>>()?,
            ),
        }
    }
}

impl<S: Scalar> WorldSpec<S> {
    pub fn from_config(cfg: &WorldConfig) -> Result<Self> {
        if cfg.vocab_size == 0 || cfg.seq_len == 0 {
            return Err(Error::domain("vocab_size and seq_len must be positive"));
        }
        let creator_weights = to_dist::<S>(&cfg.creator_weights)?;
        let num_creators = creator_weights.support_size();
        let prompts = cfg.prompts.clone().unwrap_or_else(|| vec![Vec::new()]);
        if prompts.is_empty() {
            return Err(Error::domain("at least one prompt is required"));
        }
        let prompt_weights = match &cfg.prompt_weights {
            Some(w) => to_dist::<S>(w)?,
            None => FiniteDistribution::uniform(prompts.len())?,
        };
        if prompt_weights.support_size() != prompts.len() {
            return Err(Error::Dimension {
                left: prompt_weights.support_size(),
                right: prompts.len(),
            });
        }
        if cfg.info.len() != num_creators {
            return Err(Error::Dimension {
                left: cfg.info.len(),
                right: num_creators,
            });
        }
        let num_prompts = prompts.len();
        let mut laws: Vec<Option<MarkovLaw<S>>> = vec![None; num_creators * num_prompts];
        for entry in &cfg.laws {
            if entry.creator >= num_creators {
                return Err(Error::Lookup {
                    what: "creator",
                    id: entry.creator,
                });
            }
            let law = entry.law.build(cfg.vocab_size, cfg.window)?;
            let targets: Vec<usize> = match entry.prompt {
                Some(u) if u >= num_prompts => return Err(Error::Lookup { what: "prompt", id: u }),
                Some(u) => vec![u],
                None => (0..num_prompts).collect(),
            };
            for u in targets {
                let slot = &mut laws[entry.creator * num_prompts + u];
                if slot.is_some() {
                    return Err(Error::domain(format!(
                        "law for creator {} prompt {u} given twice",
                        entry.creator
                    )));
                }
                *slot = Some(law.clone());
            }
        }
        let laws = laws
            .into_iter()
            .enumerate()
            .map(|(i, l)| {
                l.ok_or_else(|| {
                    Error::domain(format!(
                        "no law for creator {} prompt {}",
                        i / num_prompts,
                        i % num_prompts
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vocab_size: cfg.vocab_size,
            seq_len: cfg.seq_len,
            window: cfg.window,
            creator_weights,
            prompt_weights,
            prompts,
            info_map: cfg.info.iter().map(|t| Info::new(t.iter().copied())).collect(),
            laws,
            enumeration_cap: cfg.enumeration_cap.unwrap_or(DEFAULT_ENUMERATION_CAP),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn num_creators(&self) -> usize {
        self.creator_weights.support_size()
    }

    pub fn num_prompts(&self) -> usize {
        self.prompts.len()
    }

    pub fn creator_weights(&self) -> &FiniteDistribution<S> {
        &self.creator_weights
    }

    pub fn prompt_weights(&self) -> &FiniteDistribution<S> {
        &self.prompt_weights
    }

    pub fn enumeration_cap(&self) -> u64 {
        self.enumeration_cap
    }

    /// `D_{U,C}(u, c) = D_C(c) D_U(u)`.
    pub fn pair_weight(&self, c: Creator, u: &Prompt) -> S {
        self.creator_weights.prob(c.id) * self.prompt_weights.prob(u.id)
    }

    pub fn creator(&self, id: usize) -> Result<Creator> {
        if id < self.num_creators() {
            Ok(Creator { id })
        } else {
            Err(Error::Lookup { what: "creator", id })
        }
    }

    pub fn prompt(&self, id: usize) -> Result<Prompt> {
        self.prompts
            .get(id)
            .map(|tokens| Prompt {
                id,
                tokens: tokens.clone(),
            })
            .ok_or(Error::Lookup { what: "prompt", id })
    }

    pub fn creators(&self) -> impl Iterator<Item = Creator> {
        (0..self.num_creators()).map(Creator::new)
    }

    pub fn all_prompts(&self) -> Vec<Prompt> {
        (0..self.num_prompts()).map(|u| self.prompt(u).unwrap()).collect()
    }

    /// Creator of the given id is the one owning `info`, if exactly one does.
    pub fn creator_for_info(&self, info: &Info) -> Option<Creator> {
        let mut hits = self.info_map.iter().enumerate().filter(|(_, i)| *i == info);
        let first = hits.next()?;
        match hits.next() {
            Some(_) => None,
            None => Some(Creator::new(first.0)),
        }
    }

    pub fn draw_creator<R: Rng + ?Sized>(&self, rng: &mut R) -> Creator {
        Creator::new(self.creator_weights.sample(rng))
    }

    pub fn draw_prompt<R: Rng + ?Sized>(&self, rng: &mut R) -> Prompt {
        self.prompt(self.prompt_weights.sample(rng)).unwrap()
    }

    pub fn information_of(&self, c: Creator) -> Result<Info> {
        self.info_map
            .get(c.id)
            .cloned()
            .ok_or(Error::Lookup { what: "creator", id: c.id })
    }

    pub fn law(&self, c: Creator, u: &Prompt) -> Result<&MarkovLaw<S>> {
        self.creator(c.id)?;
        if u.id >= self.num_prompts() {
            return Err(Error::Lookup { what: "prompt", id: u.id });
        }
        Ok(&self.laws[c.id * self.num_prompts() + u.id])
    }

    /// Exact `p(x^(t) | windowed prefix, u, c)`; the prefix may not exceed ω tokens.
    pub fn truth_next_token(&self, c: Creator, u: &Prompt, prefix: &[Token]) -> Result<&FiniteDistribution<S>> {
        self.law(c, u)?.row(prefix)
    }

    pub fn draw_creation<R: Rng + ?Sized>(&self, c: Creator, u: &Prompt, rng: &mut R) -> Result<Creation> {
        let law = self.law(c, u)?;
        let mut tokens = Vec::with_capacity(self.seq_len);
        for t in 0..self.seq_len {
            let next = law.row(window_of(&tokens, t, self.window))?.sample(rng);
            tokens.push(next as Token);
        }
        Ok(Creation::from_raw(tokens))
    }

    /// `V^T`, or a capacity error when it exceeds the cap.
    pub fn num_sequences(&self) -> Result<usize> {
        num_sequences(self.vocab_size, self.seq_len, self.enumeration_cap)
    }

    /// All `V^T` creations in lexicographic order (first token most significant).
    pub fn enumerate_creations(&self) -> Result<impl Iterator<Item = Creation>> {
        let total = self.num_sequences()?;
        let (v, len) = (self.vocab_size, self.seq_len);
        Ok((0..total).map(move |i| Creation::from_raw(decode_index(i, v, len))))
    }

    /// Lexicographic index of a creation in [`Self::enumerate_creations`] order.
    pub fn creation_index(&self, x: &Creation) -> usize {
        x.tokens()
            .iter()
            .fold(0usize, |acc, &t| acc * self.vocab_size + t as usize)
    }

    /// The exact product law over all `V^T` creations.
    pub fn sequence_distribution(&self, c: Creator, u: &Prompt) -> Result<FiniteDistribution<S>> {
        let law = self.law(c, u)?;
        let probs = sequence_probabilities(
            self.vocab_size,
            self.seq_len,
            self.window,
            self.enumeration_cap,
            |ctx| Ok(law.row(ctx)?.clone()),
        )?;
        FiniteDistribution::new(probs)
    }

    /// `H[p(·|u,c)]` over whole creations.
    pub fn sequence_entropy(&self, c: Creator, u: &Prompt) -> Result<S> {
        Ok(self.sequence_distribution(c, u)?.entropy())
    }
}

pub(crate) fn num_sequences(vocab: usize, seq_len: usize, cap: u64) -> Result<usize> {
    let requested = (vocab as u128)
        .checked_pow(seq_len as u32)
        .unwrap_or(u128::MAX);
    if requested > cap as u128 {
        return Err(Error::Capacity { requested, cap });
    }
    Ok(requested as usize)
}

fn decode_index(mut index: usize, vocab: usize, seq_len: usize) -> Vec<Token> {
    let mut tokens = vec![0; seq_len];
    for slot in tokens.iter_mut().rev() {
        *slot = (index % vocab) as Token;
        index /= vocab;
    }
    tokens
}

/// Probabilities of every creation (lexicographic order) under the windowed
/// autoregressive law whose next-token rows `next` returns. Each distinct
/// windowed prefix is queried once.
pub fn sequence_probabilities<S, F>(
    vocab: usize,
    seq_len: usize,
    window: usize,
    cap: u64,
    mut next: F,
) -> Result<Vec<S>>
where
    S: Scalar,
    F: FnMut(&[Token]) -> Result<FiniteDistribution<S>>,
{
    num_sequences(vocab, seq_len, cap)?;
    let mut memo: Vec<Option<FiniteDistribution<S>>> = vec![None; context_count(vocab, window.min(seq_len))?];
    let mut level = vec![S::one()];
    for t in 0..seq_len {
        let k = t.min(window);
        let modulus = vocab.pow(k as u32);
        let mut out = Vec::with_capacity(level.len() * vocab);
        for (i, &mass) in level.iter().enumerate() {
            let ctx_tail = i % modulus;
            let slot = context_offset(vocab, k) + ctx_tail;
            if memo[slot].is_none() {
                let ctx = decode_index(ctx_tail, vocab, k);
                let row = next(&ctx)?;
                if row.support_size() != vocab {
                    return Err(Error::Dimension {
                        left: row.support_size(),
                        right: vocab,
                    });
                }
                memo[slot] = Some(row);
            }
            let row = memo[slot].as_ref().unwrap();
            out.extend(row.probs().iter().map(|&q| mass * q));
        }
        level = out;
    }
    Ok(level)
}
