//! Named worlds used across the test suites, the acceptance run and the
//! bundled CLI configs.

use crate::world::{LawConfig, LawEntry, WorldConfig};

fn iid_for_all(rows: Vec<Vec<f64>>) -> Vec<LawEntry> {
    rows.into_iter()
        .enumerate()
        .map(|(c, row)| LawEntry {
            creator: c,
            prompt: None,
            law: LawConfig::Iid(row),
        })
        .collect()
}

fn singleton_info(k: usize) -> Vec<Vec<u32>> {
    (0..k as u32).map(|c| vec![c]).collect()
}

/// Three creators, V=2, T=3, ω=1, one prompt; creators differ in profile and info.
pub fn default_world() -> WorldConfig {
    WorldConfig {
        vocab_size: 2,
        seq_len: 3,
        window: 1,
        creator_weights: vec![0.5, 0.3, 0.2],
        prompt_weights: None,
        prompts: None,
        info: vec![vec![100], vec![101], vec![102, 7]],
        laws: vec![
            LawEntry {
                creator: 0,
                prompt: None,
                law: LawConfig::Markov {
                    initial: vec![0.7, 0.3],
                    transition: vec![vec![0.9, 0.1], vec![0.2, 0.8]],
                },
            },
            LawEntry {
                creator: 1,
                prompt: None,
                law: LawConfig::Iid(vec![0.5, 0.5]),
            },
            LawEntry {
                creator: 2,
                prompt: None,
                law: LawConfig::Markov {
                    initial: vec![0.1, 0.9],
                    transition: vec![vec![0.6, 0.4], vec![0.3, 0.7]],
                },
            },
        ],
        enumeration_cap: None,
    }
}

/// One creator that always writes `0 1 1` (V=2, T=3, ω=1).
pub fn point_mass_world() -> WorldConfig {
    WorldConfig {
        vocab_size: 2,
        seq_len: 3,
        window: 1,
        creator_weights: vec![1.0],
        prompt_weights: None,
        prompts: None,
        info: vec![vec![0]],
        laws: vec![LawEntry {
            creator: 0,
            prompt: None,
            law: LawConfig::Table(vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]),
        }],
        enumeration_cap: None,
    }
}

/// `creators` equally weighted creators emitting i.i.d. uniform tokens, ω=0.
pub fn uniform_world(vocab: usize, seq_len: usize, creators: usize) -> WorldConfig {
    WorldConfig {
        vocab_size: vocab,
        seq_len,
        window: 0,
        creator_weights: vec![1.0 / creators as f64; creators],
        prompt_weights: None,
        prompts: None,
        info: singleton_info(creators),
        laws: iid_for_all(vec![vec![1.0 / vocab as f64; vocab]; creators]),
        enumeration_cap: None,
    }
}

/// Two equally likely creators over V=2: creator 0 always writes token 0,
/// creator 1 always writes token 1.
pub fn two_deterministic_creators(seq_len: usize, window: usize) -> WorldConfig {
    WorldConfig {
        vocab_size: 2,
        seq_len,
        window,
        creator_weights: vec![0.5, 0.5],
        prompt_weights: None,
        prompts: None,
        info: singleton_info(2),
        laws: iid_for_all(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        enumeration_cap: None,
    }
}

/// Two creators with identical deterministic laws (always token 0).
pub fn identical_creators(seq_len: usize) -> WorldConfig {
    let mut cfg = two_deterministic_creators(seq_len, 0);
    cfg.laws = iid_for_all(vec![vec![1.0, 0.0], vec![1.0, 0.0]]);
    cfg
}

/// Three creators, two prompts with weights (0.6, 0.4), V=2, T=3, ω=0.
/// Laws depend on the prompt; creator 2 is deterministic under prompt 0.
pub fn two_prompt_world() -> WorldConfig {
    let law = |c: usize, u: usize, row: Vec<f64>| LawEntry {
        creator: c,
        prompt: Some(u),
        law: LawConfig::Iid(row),
    };
    WorldConfig {
        vocab_size: 2,
        seq_len: 3,
        window: 0,
        creator_weights: vec![0.5, 0.25, 0.25],
        prompt_weights: Some(vec![0.6, 0.4]),
        prompts: Some(vec![vec![1], vec![2, 3]]),
        info: vec![vec![10], vec![11], vec![12]],
        laws: vec![
            law(0, 0, vec![0.8, 0.2]),
            law(0, 1, vec![0.3, 0.7]),
            law(1, 0, vec![0.5, 0.5]),
            law(1, 1, vec![0.6, 0.4]),
            law(2, 0, vec![1.0, 0.0]),
            law(2, 1, vec![0.1, 0.9]),
        ],
        enumeration_cap: None,
    }
}

/// Four equally weighted creators (V=2, T=2, ω=0); creator 0 is deterministic,
/// the rest are uniform. Against a uniform scorer with τ < 2 ln 2 exactly one
/// creator is distinguishable, so `E[L] = 0.25`.
pub fn one_failing_creator_world() -> WorldConfig {
    let mut rows = vec![vec![1.0, 0.0]];
    rows.extend(vec![vec![0.5, 0.5]; 3]);
    WorldConfig {
        vocab_size: 2,
        seq_len: 2,
        window: 0,
        creator_weights: vec![0.25; 4],
        prompt_weights: None,
        prompts: None,
        info: singleton_info(4),
        laws: iid_for_all(rows),
        enumeration_cap: None,
    }
}

/// Coverage fixture for the E0 certificate. Creator 0 (weight 0.12) is
/// low-entropy; the others are close to uniform. Mixing the true law with
/// uniform at λ = 0.5 puts creator 0 at sequence KL ≈ 0.515 and the others
/// below 0.004, so with τ = 0.2 exactly creator 0 is distinguishable and
/// `E[L] = 0.12`, just above δ = 0.1. At λ = 0.25 creator 0 sits at
/// KL ≈ 0.18 < τ and `E[L] = 0`.
pub fn borderline_world() -> WorldConfig {
    WorldConfig {
        vocab_size: 2,
        seq_len: 3,
        window: 1,
        creator_weights: vec![0.12, 0.30, 0.30, 0.28],
        prompt_weights: None,
        prompts: None,
        info: singleton_info(4),
        laws: vec![
            LawEntry {
                creator: 0,
                prompt: None,
                law: LawConfig::Iid(vec![0.95, 0.05]),
            },
            LawEntry {
                creator: 1,
                prompt: None,
                law: LawConfig::Iid(vec![0.55, 0.45]),
            },
            LawEntry {
                creator: 2,
                prompt: None,
                law: LawConfig::Iid(vec![0.5, 0.5]),
            },
            LawEntry {
                creator: 3,
                prompt: None,
                law: LawConfig::Markov {
                    initial: vec![0.5, 0.5],
                    transition: vec![vec![0.55, 0.45], vec![0.45, 0.55]],
                },
            },
        ],
        enumeration_cap: None,
    }
}

/// Coverage fixture for the prompt-conditioned NLL certificate: four
/// creators, two prompts, V=2, T=3, ω=1. Half the (creator, prompt) pairs are
/// deterministic, so an unfitted context (uniform fallback) is at sequence KL
/// 3 ln 2 from the truth.
pub fn prompt_coverage_world() -> WorldConfig {
    let law = |c: usize, u: usize, law: LawConfig| LawEntry {
        creator: c,
        prompt: Some(u),
        law,
    };
    let det = |tok: usize| {
        let mut row = vec![0.0, 0.0];
        row[tok] = 1.0;
        LawConfig::Iid(row)
    };
    WorldConfig {
        vocab_size: 2,
        seq_len: 3,
        window: 1,
        creator_weights: vec![0.25, 0.25, 0.25, 0.25],
        prompt_weights: Some(vec![0.5, 0.5]),
        prompts: Some(vec![vec![1], vec![2]]),
        info: vec![vec![20], vec![21], vec![22], vec![23]],
        laws: vec![
            law(0, 0, det(0)),
            law(0, 1, det(1)),
            law(1, 0, LawConfig::Iid(vec![0.5, 0.5])),
            law(1, 1, LawConfig::Iid(vec![0.7, 0.3])),
            law(
                2,
                0,
                LawConfig::Markov {
                    initial: vec![0.5, 0.5],
                    transition: vec![vec![0.8, 0.2], vec![0.3, 0.7]],
                },
            ),
            law(2, 1, det(1)),
            law(3, 0, det(0)),
            law(3, 1, LawConfig::Iid(vec![0.4, 0.6])),
        ],
        enumeration_cap: None,
    }
}

/// Every fixture with a name, for tests that sweep all of them.
pub fn all_fixtures() -> Vec<(&'static str, WorldConfig)> {
    vec![
        ("default", default_world()),
        ("point_mass", point_mass_world()),
        ("uniform_2x3", uniform_world(2, 3, 2)),
        ("uniform_3x2", uniform_world(3, 2, 3)),
        ("two_deterministic", two_deterministic_creators(2, 0)),
        ("two_deterministic_w1", two_deterministic_creators(3, 1)),
        ("identical", identical_creators(2)),
        ("two_prompt", two_prompt_world()),
        ("one_failing", one_failing_creator_world()),
        ("borderline", borderline_world()),
        ("prompt_coverage", prompt_coverage_world()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::World;

    #[test]
    fn all_fixtures_build() {
        for (name, cfg) in all_fixtures() {
            World::from_config(&cfg).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}
