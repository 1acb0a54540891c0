//! Empirical creativity metrics E0–E3 and the entropy weights `r`.
//!
//! E0/E2 are means of evaluator bits over drawn creators (or
//! creator/prompt pairs). E1/E3 are entropy-weighted NLL means:
//! `(1/n) Σ NLL_q(x_i) / r_i` with `r_i = τ + H[p(·|u_i, c_i)]`.
//!
//! Entropies come from an exact world or are supplied by the caller; they
//! are never estimated from the samples.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::scoring::{sequence_nll, ModelScorer};
use crate::{pairwise_sum, Creation, Creator, Error, Info, Prompt, Result, Scalar, WorldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MetricKind {
    E0,
    E1,
    E2,
    E3,
}

impl MetricKind {
    /// E1 and E3 are NLL-based and carry `r_min_used` / `M_observed`.
    pub fn is_weighted_nll(self) -> bool {
        matches!(self, MetricKind::E1 | MetricKind::E3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue<S> {
    pub kind: MetricKind,
    pub value: S,
    pub n: usize,
    /// Smallest weight `r` among the samples (E1/E3).
    pub r_min_used: Option<S>,
    /// Largest per-sequence NLL among the samples (E1/E3).
    pub m_observed: Option<S>,
}

impl<S: Scalar> MetricValue<S> {
    /// A bare metric value, e.g. read back from a report or the command line.
    pub fn new(kind: MetricKind, value: S, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("metric needs n >= 1"));
        }
        if value.is_nan() {
            return Err(Error::domain("metric value is NaN"));
        }
        if !kind.is_weighted_nll() && !(value >= S::zero() && value <= S::one()) {
            return Err(Error::domain(format!("{kind:?} value {value} outside [0, 1]")));
        }
        if kind.is_weighted_nll() && value < S::zero() {
            return Err(Error::domain(format!("{kind:?} value {value} is negative")));
        }
        Ok(Self {
            kind,
            value,
            n,
            r_min_used: None,
            m_observed: None,
        })
    }
}

fn bit_mean<S: Scalar>(kind: MetricKind, bits: &[u8]) -> Result<MetricValue<S>> {
    if bits.is_empty() {
        return Err(Error::domain("no evaluator bits"));
    }
    if let Some(b) = bits.iter().find(|&&b| b > 1) {
        return Err(Error::domain(format!("evaluator bit {b} is not 0 or 1")));
    }
    let ones = bits.iter().filter(|&&b| b == 1).count();
    Ok(MetricValue {
        kind,
        value: S::lit(ones as f64) / S::lit(bits.len() as f64),
        n: bits.len(),
        r_min_used: None,
        m_observed: None,
    })
}

/// E0: mean evaluator bit over drawn creators.
pub fn e0<S: Scalar>(bits: &[u8]) -> Result<MetricValue<S>> {
    bit_mean(MetricKind::E0, bits)
}

/// E2: mean evaluator bit over drawn (prompt, creator) pairs.
pub fn e2<S: Scalar>(bits: &[u8]) -> Result<MetricValue<S>> {
    bit_mean(MetricKind::E2, bits)
}

/// `r = τ + H`.
pub fn r_weight<S: Scalar>(tau: S, entropy: S) -> Result<S> {
    if !(tau > S::zero()) || !tau.is_finite() {
        return Err(Error::domain(format!("tau = {tau} must be positive")));
    }
    if !(entropy >= S::zero()) {
        return Err(Error::domain(format!("entropy {entropy} must be >= 0")));
    }
    Ok(tau + entropy)
}

/// One sample's contribution to E1/E3: its sequence NLL and the exact
/// entropy of the law that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTerm<S> {
    pub nll: S,
    pub entropy: S,
}

/// `(1/n) Σ nll_i / (τ + H_i)`, reduced by fixed-order pairwise summation.
pub fn weighted_nll_metric<S: Scalar>(kind: MetricKind, terms: &[WeightedTerm<S>], tau: S) -> Result<MetricValue<S>> {
    if !kind.is_weighted_nll() {
        return Err(Error::domain(format!("{kind:?} is not an NLL metric")));
    }
    if terms.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let mut weighted = Vec::with_capacity(terms.len());
    let mut r_min = S::infinity();
    let mut m_obs = S::zero();
    for term in terms {
        let r = r_weight(tau, term.entropy)?;
        r_min = r_min.min(r);
        m_obs = m_obs.max(term.nll);
        weighted.push(term.nll / r);
    }
    Ok(MetricValue {
        kind,
        value: pairwise_sum(&weighted) / S::lit(terms.len() as f64),
        n: terms.len(),
        r_min_used: Some(r_min),
        m_observed: Some(m_obs),
    })
}

/// Memoized exact `H[p(·|u,c)]` lookups.
struct EntropyCache<'w, S> {
    world: &'w WorldSpec<S>,
    cache: HashMap<(usize, usize), S>,
}

impl<'w, S: Scalar> EntropyCache<'w, S> {
    fn new(world: &'w WorldSpec<S>) -> Self {
        Self {
            world,
            cache: HashMap::new(),
        }
    }

    fn get(&mut self, c: Creator, u: &Prompt) -> Result<S> {
        if let Some(&h) = self.cache.get(&(c.id, u.id)) {
            return Ok(h);
        }
        let h = self.world.sequence_entropy(c, u)?;
        self.cache.insert((c.id, u.id), h);
        Ok(h)
    }
}

/// E1 over (creation, creator) pairs. The world must have a single prompt,
/// which plays the role of the empty context.
pub fn e1<S: Scalar, M: ModelScorer<S> + ?Sized>(
    samples: &[(Creation, Creator)],
    scorer: &M,
    world: &WorldSpec<S>,
    tau: S,
    window: usize,
) -> Result<MetricValue<S>> {
    if world.num_prompts() != 1 {
        return Err(Error::domain(format!(
            "E1 needs a prompt-free world, this one has {} prompts",
            world.num_prompts()
        )));
    }
    let u = world.prompt(0)?;
    let triples: Vec<(Creation, Prompt, Creator)> = samples
        .iter()
        .map(|(x, c)| (x.clone(), u.clone(), *c))
        .collect();
    world_weighted_metric(MetricKind::E1, &triples, scorer, world, tau, window)
}

/// E3 over (creation, prompt, creator) triples.
pub fn e3<S: Scalar, M: ModelScorer<S> + ?Sized>(
    samples: &[(Creation, Prompt, Creator)],
    scorer: &M,
    world: &WorldSpec<S>,
    tau: S,
    window: usize,
) -> Result<MetricValue<S>> {
    world_weighted_metric(MetricKind::E3, samples, scorer, world, tau, window)
}

fn world_weighted_metric<S: Scalar, M: ModelScorer<S> + ?Sized>(
    kind: MetricKind,
    samples: &[(Creation, Prompt, Creator)],
    scorer: &M,
    world: &WorldSpec<S>,
    tau: S,
    window: usize,
) -> Result<MetricValue<S>> {
    if samples.is_empty() {
        return Err(Error::domain("no samples"));
    }
    let mut entropies = EntropyCache::new(world);
    let mut terms = Vec::with_capacity(samples.len());
    for (x, u, c) in samples {
        let info = world.information_of(*c)?;
        let nll = sequence_nll(scorer, x, u, &info, window)?;
        terms.push(WeightedTerm {
            nll: nll.total,
            entropy: entropies.get(*c, u)?,
        });
    }
    weighted_nll_metric(kind, &terms, tau)
}

/// A sample carrying its own conditioning and an externally supplied entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord<S> {
    pub creation: Creation,
    pub prompt: Prompt,
    pub info: Info,
    pub entropy: S,
}

/// E1/E3 without a world: entropies are taken from the records.
pub fn weighted_nll_from_records<S: Scalar, M: ModelScorer<S> + ?Sized>(
    kind: MetricKind,
    records: &[ScoredRecord<S>],
    scorer: &M,
    tau: S,
    window: usize,
) -> Result<MetricValue<S>> {
    let terms = records
        .iter()
        .map(|r| {
            Ok(WeightedTerm {
                nll: sequence_nll(scorer, &r.creation, &r.prompt, &r.info, window)?.total,
                entropy: r.entropy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    weighted_nll_metric(kind, &terms, tau)
}

/// `τ + min H[p(·|u,c)]` over pairs with positive `D_{U,C}` mass.
pub fn r_min_exact<S: Scalar>(world: &WorldSpec<S>, tau: S) -> Result<S> {
    let mut min_h = S::infinity();
    for c in world.creators() {
        for u in world.all_prompts() {
            if world.pair_weight(c, &u) > S::zero() {
                min_h = min_h.min(world.sequence_entropy(c, &u)?);
            }
        }
    }
    r_weight(tau, min_h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{mix_with_uniform, scorer_from_world, UniformScorer};
    use crate::world::{LawConfig, LawEntry, WorldConfig};
    use crate::{fixtures, World};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn e0_and_e2_examples() {
        for f in [e0::<f64>, e2::<f64>] {
            assert_eq!(f(&[0, 0, 0, 0]).unwrap().value, 0.0);
            assert_eq!(f(&[1, 1]).unwrap().value, 1.0);
            let m = f(&[0, 1, 0, 1]).unwrap();
            assert_eq!(m.value, 0.5);
            assert_eq!(m.n, 4);
            assert!(matches!(f(&[]), Err(Error::Domain(_))));
            assert!(matches!(f(&[0, 2]), Err(Error::Domain(_))));
        }
        assert_eq!(e2::<f64>(&[1]).unwrap().kind, MetricKind::E2);
    }

    #[test]
    fn r_weight_examples() {
        assert_eq!(r_weight(0.1, 0.0).unwrap(), 0.1);
        // mpmath: 1.1931471805599453
        assert_abs_diff_eq!(r_weight(0.5, 2f64.ln()).unwrap(), 1.193_147_180_559_945_3, epsilon = 1e-12);
        // mpmath: 3.0794415416798359
        assert_abs_diff_eq!(r_weight(1.0, 3.0 * 2f64.ln()).unwrap(), 3.079_441_541_679_836, epsilon = 1e-12);
        assert!(matches!(r_weight(0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(r_weight(-1.0, 1.0), Err(Error::Domain(_))));
    }

    /// Creator 0 always writes token 0, creator 1 is uniform; V=2, T=1.
    fn point_and_uniform_world() -> World {
        World::from_config(&WorldConfig {
            vocab_size: 2,
            seq_len: 1,
            window: 0,
            creator_weights: vec![0.5, 0.5],
            prompt_weights: None,
            prompts: None,
            info: vec![vec![0], vec![1]],
            laws: vec![
                LawEntry {
                    creator: 0,
                    prompt: None,
                    law: LawConfig::Iid(vec![1.0, 0.0]),
                },
                LawEntry {
                    creator: 1,
                    prompt: None,
                    law: LawConfig::Iid(vec![0.5, 0.5]),
                },
            ],
            enumeration_cap: None,
        })
        .unwrap()
    }

    #[test]
    fn e1_examples() {
        let w = World::from_config(&fixtures::point_mass_world()).unwrap();
        let u = w.prompt(0).unwrap();
        let c = Creator::new(0);
        let x = w.draw_creation(c, &u, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let m = e1(&[(x.clone(), c), (x, c)], &scorer_from_world(&w), &w, 0.5, 1).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(m.r_min_used, Some(0.5));
        assert_eq!(m.m_observed, Some(0.0));

        let w = point_and_uniform_world();
        let uni = UniformScorer { vocab: 2 };
        let a = (Creation::new(vec![0], 2, 1).unwrap(), Creator::new(0));
        let m = e1(std::slice::from_ref(&a), &uni, &w, 1.0, 0).unwrap();
        assert_abs_diff_eq!(m.value, std::f64::consts::LN_2, epsilon = 1e-12);

        let b = (Creation::new(vec![1], 2, 1).unwrap(), Creator::new(1));
        let m = e1(&[a, b], &uni, &w, 1.0, 0).unwrap();
        // mpmath: (ln2 + ln2/(1+ln2))/2 = 0.55126553570515203
        assert_abs_diff_eq!(m.value, 0.551_265_535_705_152, epsilon = 1e-12);
        assert_abs_diff_eq!(m.r_min_used.unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.m_observed.unwrap(), 2f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn e1_errors() {
        let w = point_and_uniform_world();
        let uni = UniformScorer { vocab: 2 };
        assert!(matches!(e1(&[], &uni, &w, 1.0, 0), Err(Error::Domain(_))));
        let w2 = World::from_config(&fixtures::two_prompt_world()).unwrap();
        let x = Creation::new(vec![0, 0, 0], 2, 3).unwrap();
        assert!(matches!(e1(&[(x, Creator::new(0))], &uni, &w2, 1.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn infinite_nll_propagates() {
        let w = point_and_uniform_world();
        let truth = scorer_from_world(&w);
        let x = Creation::new(vec![1], 2, 1).unwrap();
        let m = e1(&[(x, Creator::new(0))], &truth, &w, 1.0, 0).unwrap();
        assert!(m.value.is_infinite());
        assert!(m.m_observed.unwrap().is_infinite());
    }

    fn draw_triples(w: &World, n: usize, seed: u64) -> Vec<(Creation, Prompt, Creator)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let c = w.draw_creator(&mut rng);
                let u = w.draw_prompt(&mut rng);
                let x = w.draw_creation(c, &u, &mut rng).unwrap();
                (x, u, c)
            })
            .collect()
    }

    #[test]
    fn e3_matches_e1_in_single_prompt_world() {
        let w = World::from_config(&fixtures::default_world()).unwrap();
        let scorer = mix_with_uniform(scorer_from_world(&w), 0.4).unwrap();
        let triples = draw_triples(&w, 50, 3);
        let pairs: Vec<_> = triples.iter().map(|(x, _, c)| (x.clone(), *c)).collect();
        let a = e1(&pairs, &scorer, &w, 0.7, 1).unwrap();
        let b = e3(&triples, &scorer, &w, 0.7, 1).unwrap();
        assert_eq!(a.value, b.value);
        assert_eq!(b.kind, MetricKind::E3);
    }

    #[test]
    fn e3_truth_scorer_is_zero_on_deterministic_world() {
        let w = World::from_config(&fixtures::two_deterministic_creators(3, 0)).unwrap();
        let triples = draw_triples(&w, 30, 4);
        let m = e3(&triples, &scorer_from_world(&w), &w, 0.2, 0).unwrap();
        assert_eq!(m.value, 0.0);
    }

    /// Independent recomputation: enumerate the creation's probability under
    /// the uniform scorer in closed form (T ln V) and the entropy by summing
    /// over the explicit sequence table.
    #[test]
    fn e3_two_prompt_brute_force() {
        let w = World::from_config(&fixtures::two_prompt_world()).unwrap();
        let uni = UniformScorer { vocab: 2 };
        let triples = draw_triples(&w, 40, 5);
        let tau = 0.3;
        let mut expected = 0.0;
        for (_, u, c) in &triples {
            let p = w.sequence_distribution(*c, u).unwrap();
            let h: f64 = -p.probs().iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
            expected += 3.0 * 2f64.ln() / (tau + h);
        }
        expected /= triples.len() as f64;
        let m = e3(&triples, &uni, &w, tau, 0).unwrap();
        assert_abs_diff_eq!(m.value, expected, epsilon = 1e-10);
    }

    #[test]
    fn streaming_matches_naive_loop() {
        for (name, cfg) in fixtures::all_fixtures() {
            let w = World::from_config(&cfg).unwrap();
            let scorer = mix_with_uniform(UniformScorer { vocab: w.vocab_size() }, 0.5).unwrap();
            let triples = draw_triples(&w, 37, 6);
            let tau = 0.25;
            let mut naive = 0.0;
            for (x, u, c) in &triples {
                let info = w.information_of(*c).unwrap();
                let mut nll = 0.0;
                for t in 0..x.len() {
                    let ctx = &x.tokens()[t.saturating_sub(w.window())..t];
                    let q: crate::FiniteDistribution<f64> = scorer.next_token_dist(&info, u, ctx).unwrap();
                    nll -= q.prob(x.tokens()[t] as usize).ln();
                }
                naive += nll / (tau + w.sequence_entropy(*c, u).unwrap());
            }
            naive /= triples.len() as f64;
            let m = e3(&triples, &scorer, &w, tau, w.window()).unwrap();
            assert!((m.value - naive).abs() <= 1e-10, "{name}");
        }
    }

    #[test]
    fn records_path_matches_world_path() {
        let w = World::from_config(&fixtures::two_prompt_world()).unwrap();
        let uni = UniformScorer { vocab: 2 };
        let triples = draw_triples(&w, 10, 8);
        let records: Vec<ScoredRecord<f64>> = triples
            .iter()
            .map(|(x, u, c)| ScoredRecord {
                creation: x.clone(),
                prompt: u.clone(),
                info: w.information_of(*c).unwrap(),
                entropy: w.sequence_entropy(*c, u).unwrap(),
            })
            .collect();
        let a = weighted_nll_from_records(MetricKind::E3, &records, &uni, 0.5, 0).unwrap();
        let b = e3(&triples, &uni, &w, 0.5, 0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn r_min_exact_examples() {
        let w = World::from_config(&fixtures::two_deterministic_creators(2, 0)).unwrap();
        assert_eq!(r_min_exact(&w, 0.3).unwrap(), 0.3);

        let w = World::from_config(&fixtures::uniform_world(2, 1, 3)).unwrap();
        assert_abs_diff_eq!(r_min_exact(&w, 0.3).unwrap(), 0.3 + 2f64.ln(), epsilon = 1e-12);

        let w = World::from_config(&fixtures::two_prompt_world()).unwrap();
        let r_min = r_min_exact(&w, 0.4).unwrap();
        for c in w.creators() {
            for u in w.all_prompts() {
                assert!(r_min <= r_weight(0.4, w.sequence_entropy(c, &u).unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn r_min_ignores_zero_mass_pairs() {
        let mut cfg = point_and_uniform_world_config();
        cfg.creator_weights = vec![0.0, 1.0];
        let w = World::from_config(&cfg).unwrap();
        assert_abs_diff_eq!(r_min_exact(&w, 1.0).unwrap(), 1.0 + 2f64.ln(), epsilon = 1e-12);
    }

    fn point_and_uniform_world_config() -> WorldConfig {
        let mut cfg = fixtures::two_deterministic_creators(1, 0);
        cfg.laws[1].law = LawConfig::Iid(vec![0.5, 0.5]);
        cfg
    }

    /// With q = p, the expected per-sample weighted NLL is Σ D(u,c) H/(τ+H).
    #[test]
    fn truth_scorer_mean_matches_exact_expectation() {
        let w = World::from_config(&fixtures::default_world()).unwrap();
        let tau = 0.5;
        let mut exact = 0.0;
        for c in w.creators() {
            let u = w.prompt(0).unwrap();
            let h = w.sequence_entropy(c, &u).unwrap();
            exact += w.pair_weight(c, &u) * h / (tau + h);
        }
        let triples = draw_triples(&w, 20_000, 9);
        let m = e3(&triples, &scorer_from_world(&w), &w, tau, 1).unwrap();
        // per-sample terms lie in [0, T ln 10 / τ]; sd of the mean is well under 0.01
        assert!((m.value - exact).abs() < 0.02, "{} vs {exact}", m.value);
    }

    proptest! {
        #[test]
        fn bit_metrics_bounded_and_monotone(bits in prop::collection::vec(0u8..2, 1..50), flip in 0usize..50) {
            let m = e0::<f64>(&bits).unwrap();
            prop_assert!((0.0..=1.0).contains(&m.value));
            let i = flip % bits.len();
            if bits[i] == 0 {
                let mut raised = bits.clone();
                raised[i] = 1;
                prop_assert!(e0::<f64>(&raised).unwrap().value > m.value);
            }
        }

        #[test]
        fn larger_tau_never_increases_metric(
            nlls in prop::collection::vec(0.01f64..10.0, 1..20),
            ents in prop::collection::vec(0.0f64..5.0, 20),
            tau in 0.01f64..3.0,
            bump in 0.01f64..3.0,
        ) {
            let terms: Vec<_> = nlls.iter().zip(&ents).map(|(&nll, &entropy)| WeightedTerm { nll, entropy }).collect();
            let a = weighted_nll_metric(MetricKind::E1, &terms, tau).unwrap();
            let b = weighted_nll_metric(MetricKind::E1, &terms, tau + bump).unwrap();
            prop_assert!(b.value < a.value);
            prop_assert!(a.value >= 0.0);
        }
    }
}
