//! The evaluator `L` and exact population oracles.
//!
//! The built-in evaluator judges a model against one (prompt, creator) pair
//! by the exact sequence-level KL divergence `D_KL(p(·|u,c) ‖ q(·|u,I[c]))`:
//! `L = 0` iff the divergence is strictly below τ.

use std::collections::HashMap;

use crate::distributions::kl_divergence;
use crate::scoring::{scorer_sequence_probabilities, ModelScorer};
use crate::{Creator, Error, FiniteDistribution, Prompt, Result, Scalar, WorldSpec};

/// A binary judge of emulation success. `0` means the model passes for the creator.
pub trait Evaluator<S: Scalar>: Send + Sync {
    fn judge(&self, scorer: &dyn ModelScorer<S>, u: &Prompt, c: Creator) -> Result<u8>;
}

/// Exact `D_KL(p(·|u,c) ‖ q(·|u,I[c]))` over whole creations, using the
/// world's window for the model's factorization.
pub fn sequence_kl<S: Scalar, M: ModelScorer<S> + ?Sized>(
    world: &WorldSpec<S>,
    scorer: &M,
    c: Creator,
    u: &Prompt,
) -> Result<S> {
    if scorer.vocab_size() != world.vocab_size() {
        return Err(Error::Dimension {
            left: scorer.vocab_size(),
            right: world.vocab_size(),
        });
    }
    let p = world.sequence_distribution(c, u)?;
    let info = world.information_of(c)?;
    let q = scorer_sequence_probabilities(
        scorer,
        &info,
        u,
        world.seq_len(),
        world.window(),
        world.enumeration_cap(),
    )?;
    kl_divergence(&p, &FiniteDistribution::new(q)?)
}

/// The KL-threshold evaluator over an enumerable world.
#[derive(Debug, Clone, Copy)]
pub struct KlThresholdEvaluator<'w, S> {
    world: &'w WorldSpec<S>,
    tau: S,
}

pub fn kl_threshold_evaluator<S: Scalar>(world: &WorldSpec<S>, tau: S) -> Result<KlThresholdEvaluator<'_, S>> {
    if !(tau > S::zero()) {
        return Err(Error::domain(format!("tau = {tau} must be positive")));
    }
    world.num_sequences()?;
    Ok(KlThresholdEvaluator { world, tau })
}

impl<S: Scalar> KlThresholdEvaluator<'_, S> {
    pub fn tau(&self) -> S {
        self.tau
    }

    pub fn world(&self) -> &WorldSpec<S> {
        self.world
    }
}

impl<S: Scalar> Evaluator<S> for KlThresholdEvaluator<'_, S> {
    fn judge(&self, scorer: &dyn ModelScorer<S>, u: &Prompt, c: Creator) -> Result<u8> {
        let kl = sequence_kl(self.world, scorer, c, u)?;
        Ok(if kl < self.tau { 0 } else { 1 })
    }
}

/// Bits recorded elsewhere (e.g. human judgments), keyed by (prompt id, creator id).
/// Pairs without a record are an error.
#[derive(Debug, Clone, Default)]
pub struct RecordedEvaluator {
    bits: HashMap<(usize, usize), u8>,
}

impl RecordedEvaluator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, u: &Prompt, c: Creator, bit: u8) -> Result<()> {
        if bit > 1 {
            return Err(Error::domain(format!("evaluator bit {bit} is not 0 or 1")));
        }
        self.bits.insert((u.id, c.id), bit);
        Ok(())
    }
}

impl<S: Scalar> Evaluator<S> for RecordedEvaluator {
    fn judge(&self, _: &dyn ModelScorer<S>, u: &Prompt, c: Creator) -> Result<u8> {
        self.bits
            .get(&(u.id, c.id))
            .copied()
            .ok_or(Error::Lookup { what: "recorded judgment", id: c.id })
    }
}

/// Judgments for every (prompt, creator) pair with positive mass, as
/// `(prompt, creator, D_{U,C} weight, bit)`.
pub fn judge_all<S: Scalar, E: Evaluator<S> + ?Sized>(
    world: &WorldSpec<S>,
    scorer: &dyn ModelScorer<S>,
    ev: &E,
) -> Result<Vec<(Prompt, Creator, S, u8)>> {
    let mut out = Vec::new();
    for c in world.creators() {
        for u in world.all_prompts() {
            let w = world.pair_weight(c, &u);
            if w > S::zero() {
                let bit = ev.judge(scorer, &u, c)?;
                out.push((u, c, w, bit));
            }
        }
    }
    Ok(out)
}

/// `Σ_{u,c} D_{U,C}(u,c) · L(q, u, c)`.
#[allow(non_snake_case)]
pub fn exact_expected_L<S: Scalar, E: Evaluator<S> + ?Sized>(
    world: &WorldSpec<S>,
    scorer: &dyn ModelScorer<S>,
    ev: &E,
) -> Result<S> {
    let total = judge_all(world, scorer, ev)?
        .into_iter()
        .filter(|j| j.3 == 1)
        .fold(S::zero(), |acc, j| acc + j.2);
    Ok(total.min(S::one()))
}

/// Whether the model is δ-creative in truth: `E[L] ≤ δ`.
pub fn exact_delta_claim<S: Scalar, E: Evaluator<S> + ?Sized>(
    world: &WorldSpec<S>,
    scorer: &dyn ModelScorer<S>,
    ev: &E,
    delta: S,
) -> Result<bool> {
    Ok(exact_expected_L(world, scorer, ev)? <= delta)
}

/// `E_{(x,u,c)}[NLL_q(x) / r(u,c)]` by full enumeration, with
/// `r(u,c) = τ + H[p(·|u,c)]`.
pub fn exact_weighted_nll<S: Scalar>(world: &WorldSpec<S>, scorer: &dyn ModelScorer<S>, tau: S) -> Result<S> {
    if !(tau > S::zero()) {
        return Err(Error::domain(format!("tau = {tau} must be positive")));
    }
    let mut total = S::zero();
    for u in world.all_prompts() {
        for c in world.creators() {
            let w = world.pair_weight(c, &u);
            if !(w > S::zero()) {
                continue;
            }
            let p = world.sequence_distribution(c, &u)?;
            let info = world.information_of(c)?;
            let q = scorer_sequence_probabilities(
                scorer,
                &info,
                &u,
                world.seq_len(),
                world.window(),
                world.enumeration_cap(),
            )?;
            let mut nll = S::zero();
            for (&px, &qx) in p.probs().iter().zip(&q) {
                if px > S::zero() {
                    nll = nll - px * qx.ln();
                }
            }
            total = total + w * nll / (tau + p.entropy());
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{mix_with_uniform, scorer_from_world, SmoothedScorer, TableScorer, UniformScorer};
    use crate::{fixtures, World};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn world(cfg: crate::WorldConfig) -> World {
        World::from_config(&cfg).unwrap()
    }

    #[test]
    fn judge_examples() {
        let w = world(fixtures::default_world());
        let truth = scorer_from_world(&w);
        let u = w.prompt(0).unwrap();
        let ev = kl_threshold_evaluator(&w, 0.01).unwrap();
        let vacuous = kl_threshold_evaluator(&w, 1e9).unwrap();
        let mixed = mix_with_uniform(truth, 0.9).unwrap();
        for c in w.creators() {
            assert_eq!(ev.judge(&truth, &u, c).unwrap(), 0);
            assert_eq!(vacuous.judge(&mixed, &u, c).unwrap(), 0);
        }

        let mut cfg = fixtures::two_deterministic_creators(1, 0);
        cfg.creator_weights = vec![1.0, 0.0];
        let w = world(cfg);
        let ev = kl_threshold_evaluator(&w, 0.5).unwrap();
        let u = w.prompt(0).unwrap();
        // KL = ln 2 = 0.693 >= 0.5
        assert_abs_diff_eq!(
            sequence_kl(&w, &UniformScorer { vocab: 2 }, Creator::new(0), &u).unwrap(),
            std::f64::consts::LN_2,
            epsilon = 1e-12
        );
        assert_eq!(ev.judge(&UniformScorer { vocab: 2 }, &u, Creator::new(0)).unwrap(), 1);
    }

    #[test]
    fn kl_equal_to_tau_fails() {
        let w = world(fixtures::two_deterministic_creators(1, 0));
        let u = w.prompt(0).unwrap();
        let kl = sequence_kl(&w, &UniformScorer { vocab: 2 }, Creator::new(0), &u).unwrap();
        let ev = kl_threshold_evaluator(&w, kl).unwrap();
        assert_eq!(ev.judge(&UniformScorer { vocab: 2 }, &u, Creator::new(0)).unwrap(), 1);
    }

    #[test]
    fn infinite_kl_fails() {
        let w = world(fixtures::two_deterministic_creators(2, 0));
        let truth = scorer_from_world(&w);
        // creator 1's rows answer creator 0's requests
        let mut swapped = TableScorer::new(2, 0, false, false);
        swapped
            .insert((None, None), &[], FiniteDistribution::point_mass(2, 1).unwrap())
            .unwrap();
        let u = w.prompt(0).unwrap();
        assert!(sequence_kl(&w, &swapped, Creator::new(0), &u).unwrap().is_infinite());
        let ev = kl_threshold_evaluator(&w, 1e9).unwrap();
        assert_eq!(ev.judge(&swapped, &u, Creator::new(0)).unwrap(), 1);
        assert_eq!(ev.judge(&truth, &u, Creator::new(1)).unwrap(), 0);
    }

    #[test]
    fn evaluator_construction_errors() {
        let w = world(fixtures::default_world());
        assert!(matches!(kl_threshold_evaluator(&w, 0.0), Err(Error::Domain(_))));
        let mut cfg = fixtures::uniform_world(10, 7, 2);
        cfg.enumeration_cap = Some(1000);
        let big = world(cfg);
        assert!(matches!(kl_threshold_evaluator(&big, 1.0), Err(Error::Capacity { .. })));
    }

    #[test]
    fn expected_l_examples() {
        let w = world(fixtures::default_world());
        let ev = kl_threshold_evaluator(&w, 0.1).unwrap();
        assert_eq!(exact_expected_L(&w, &scorer_from_world(&w), &ev).unwrap(), 0.0);
        assert!(exact_delta_claim(&w, &scorer_from_world(&w), &ev, 1e-6).unwrap());

        let w = world(fixtures::one_failing_creator_world());
        let ev = kl_threshold_evaluator(&w, 1.0).unwrap();
        let uni = UniformScorer { vocab: 2 };
        assert_eq!(exact_expected_L(&w, &uni, &ev).unwrap(), 0.25);
        assert!(!exact_delta_claim(&w, &uni, &ev, 0.2).unwrap());
        assert!(exact_delta_claim(&w, &uni, &ev, 0.25).unwrap());
    }

    #[test]
    fn borderline_fixture_is_just_above_delta() {
        let w = world(fixtures::borderline_world());
        let ev = kl_threshold_evaluator(&w, 0.2).unwrap();
        let truth = scorer_from_world(&w);
        let half = mix_with_uniform(truth, 0.5).unwrap();
        assert_abs_diff_eq!(exact_expected_L(&w, &half, &ev).unwrap(), 0.12, epsilon = 1e-12);
        let quarter = mix_with_uniform(truth, 0.25).unwrap();
        assert_eq!(exact_expected_L(&w, &quarter, &ev).unwrap(), 0.0);
    }

    #[test]
    fn recorded_evaluator() {
        let w = world(fixtures::one_failing_creator_world());
        let u = w.prompt(0).unwrap();
        let mut ev = RecordedEvaluator::new();
        for c in w.creators() {
            ev.record(&u, c, (c.id == 2) as u8).unwrap();
        }
        assert!(ev.record(&u, Creator::new(0), 2).is_err());
        let uni = UniformScorer { vocab: 2 };
        assert_eq!(exact_expected_L(&w, &uni, &ev).unwrap(), 0.25);
        let empty = RecordedEvaluator::new();
        assert!(exact_expected_L(&w, &uni, &empty).is_err());
    }

    #[test]
    fn judge_depends_only_on_tables() {
        let w = world(fixtures::two_prompt_world());
        let ev = kl_threshold_evaluator(&w, 0.05).unwrap();
        let mut table = TableScorer::new(2, 0, true, true);
        for c in w.creators() {
            for u in w.all_prompts() {
                let key = table.key(&w.information_of(c).unwrap(), &u);
                table.insert(key, &[], w.truth_next_token(c, &u, &[]).unwrap().clone()).unwrap();
            }
        }
        let truth = scorer_from_world(&w);
        for c in w.creators() {
            for u in w.all_prompts() {
                assert_eq!(ev.judge(&table, &u, c).unwrap(), ev.judge(&truth, &u, c).unwrap());
            }
        }
    }

    #[test]
    fn hinge_chain_holds_on_fixtures() {
        for (name, cfg) in fixtures::all_fixtures() {
            let w = world(cfg);
            let truth = scorer_from_world(&w);
            let scorers: Vec<Box<dyn ModelScorer<f64> + '_>> = vec![
                Box::new(truth),
                Box::new(UniformScorer { vocab: w.vocab_size() }),
                Box::new(mix_with_uniform(truth, 0.5).unwrap()),
                Box::new(SmoothedScorer::new(UniformScorer { vocab: w.vocab_size() }, 0.3).unwrap()),
            ];
            for tau in [0.05, 0.5, 2.0] {
                let ev = kl_threshold_evaluator(&w, tau).unwrap();
                for s in &scorers {
                    let el = exact_expected_L(&w, s.as_ref(), &ev).unwrap();
                    let rhs = exact_weighted_nll(&w, s.as_ref(), tau).unwrap();
                    assert!(el <= rhs + 1e-9, "{name} tau {tau}: {el} > {rhs}");
                }
            }
        }
    }

    #[test]
    fn weighted_nll_of_truth_is_entropy_ratio() {
        let w = world(fixtures::two_prompt_world());
        let tau = 0.4;
        let mut expected = 0.0;
        for u in w.all_prompts() {
            for c in w.creators() {
                let h = w.sequence_entropy(c, &u).unwrap();
                expected += w.pair_weight(c, &u) * h / (tau + h);
            }
        }
        let got = exact_weighted_nll(&w, &scorer_from_world(&w), tau).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-12);
    }

    #[test]
    fn unknown_info_is_an_error() {
        let w = world(fixtures::default_world());
        let mut cfg = fixtures::default_world();
        cfg.info = vec![vec![1], vec![1], vec![2]];
        let dup = world(cfg);
        let ev = kl_threshold_evaluator(&w, 0.1).unwrap();
        let truth_dup = scorer_from_world(&dup);
        assert!(ev.judge(&truth_dup, &w.prompt(0).unwrap(), Creator::new(0)).is_err());
    }

    proptest! {
        #[test]
        fn expected_l_in_unit_interval(lambda in 0.0f64..=1.0, tau in 0.001f64..3.0) {
            let w = world(fixtures::default_world());
            let ev = kl_threshold_evaluator(&w, tau).unwrap();
            let s = mix_with_uniform(scorer_from_world(&w), lambda).unwrap();
            let el = exact_expected_L(&w, &s, &ev).unwrap();
            prop_assert!((0.0..=1.0).contains(&el));
            prop_assert!(el <= exact_weighted_nll(&w, &s, tau).unwrap() + 1e-9);
        }
    }
}
