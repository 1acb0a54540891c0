//! Monte Carlo experiments checking the certificates against exact ground truth.
//!
//! Every trial draws its own sample from the world, computes the metric,
//! attempts the certificate and, when it fires, checks the claim `E[L] ≤ δ`
//! by exact enumeration. Trials run on a rayon pool; per-trial seeds are a
//! pure function of `(master_seed, trial index)` so results do not depend on
//! scheduling or pool size.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{certify, corollary4_bound, finite_class_gap_constant, CertificateKind, QProvider};
use crate::distributions::smoothing_nll_ceiling;
use crate::evaluator::{kl_threshold_evaluator, Evaluator, KlThresholdEvaluator};
use crate::metrics::{r_min_exact, weighted_nll_metric, MetricKind, MetricValue, WeightedTerm};
use crate::scoring::{mix_with_uniform, scorer_from_world, sequence_nll, ModelScorer, SmoothedScorer, TableScorer};
use crate::world::window_of;
use crate::{Creation, Creator, Error, FiniteDistribution, Info, Prompt, Result, Scalar, Token, WorldConfig, WorldSpec};

/// How each trial obtains its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScorerFamily {
    /// The world's own law.
    Truth,
    /// `(1 - λ) p + λ uniform`.
    UniformMix { lambda: f64 },
    /// Smoothed empirical frequencies from a fresh draw of `samples_per_fit` triples.
    Fitted { epsilon: f64, samples_per_fit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub world: WorldConfig,
    pub scorer_family: ScorerFamily,
    pub certificate: CertificateKind,
    pub delta: f64,
    pub t: f64,
    pub tau: f64,
    /// Declared NLL bound; derived from the scorer family when absent.
    #[serde(default)]
    pub m_bound: Option<f64>,
    pub n: usize,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub certificate: CertificateKind,
    pub n: usize,
    pub delta: f64,
    pub t: f64,
    pub tau: f64,
    pub m_bound: Option<f64>,
    pub r_min: Option<f64>,
    pub trials_run: usize,
    pub trials_certified: usize,
    /// Certified trials whose exact claim `E[L] ≤ δ` is false.
    pub failures: usize,
    /// `failures / max(trials_certified, 1)`.
    pub failure_rate: f64,
    /// `failures / trials_run`.
    pub unconditional_failure_rate: f64,
    /// `t + 3 sqrt(t (1 - t) / R)`.
    pub monte_carlo_bound: f64,
    pub within_bound: bool,
    pub trial_seeds: Vec<u64>,
    pub exact_expected_l: Vec<f64>,
    /// `None` for an infinite metric value.
    pub metric_values: Vec<Option<f64>>,
    pub certified: Vec<bool>,
}

/// `t + 3 sqrt(t (1 - t) / R)`.
pub fn monte_carlo_bound(t: f64, trials: usize) -> f64 {
    t + 3.0 * (t * (1.0 - t) / trials as f64).sqrt()
}

/// Seed of trial `index`: first word of the ChaCha8 stream `index` keyed by `master_seed`.
pub fn trial_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Exact per-pair tables shared read-only by all trials.
struct Prepared<'w, S> {
    world: &'w WorldSpec<S>,
    creations: Vec<Creation>,
    /// Indexed by `creator * num_prompts + prompt`.
    pairs: Vec<PairTable<S>>,
}

struct PairTable<S> {
    prompt: Prompt,
    creator: Creator,
    info: Info,
    weight: S,
    law: FiniteDistribution<S>,
    entropy: S,
}

impl<'w, S: Scalar> Prepared<'w, S> {
    fn new(world: &'w WorldSpec<S>) -> Result<Self> {
        let creations: Vec<Creation> = world.enumerate_creations()?.collect();
        let mut pairs = Vec::with_capacity(world.num_creators() * world.num_prompts());
        for c in world.creators() {
            for u in world.all_prompts() {
                let law = world.sequence_distribution(c, &u)?;
                pairs.push(PairTable {
                    weight: world.pair_weight(c, &u),
                    entropy: law.entropy(),
                    info: world.information_of(c)?,
                    prompt: u,
                    creator: c,
                    law,
                });
            }
        }
        Ok(Self {
            world,
            creations,
            pairs,
        })
    }

    /// Draws `c ~ D_C` and, when `prompted`, `u ~ D_U` (otherwise the only prompt).
    fn draw_pair<R: Rng + ?Sized>(&self, prompted: bool, rng: &mut R) -> usize {
        let c = self.world.draw_creator(rng);
        let u = if prompted {
            self.world.draw_prompt(rng).id
        } else {
            0
        };
        c.id * self.world.num_prompts() + u
    }

    fn draw_creation<R: Rng + ?Sized>(&self, pair: usize, rng: &mut R) -> usize {
        self.pairs[pair].law.sample(rng)
    }

    fn draw_triples<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(Creation, Prompt, Creator)> {
        (0..n)
            .map(|_| {
                let pair = self.draw_pair(true, rng);
                let x = self.draw_creation(pair, rng);
                let p = &self.pairs[pair];
                (self.creations[x].clone(), p.prompt.clone(), p.creator)
            })
            .collect()
    }

    /// `L(q, u, c)` for every pair; zero-mass pairs are recorded as 0.
    fn judgments(&self, scorer: &dyn ModelScorer<S>, ev: &KlThresholdEvaluator<'_, S>) -> Result<Vec<u8>> {
        self.pairs
            .iter()
            .map(|p| {
                if p.weight > S::zero() {
                    ev.judge(scorer, &p.prompt, p.creator)
                } else {
                    Ok(0)
                }
            })
            .collect()
    }

    fn expected_l(&self, bits: &[u8]) -> S {
        let total = self
            .pairs
            .iter()
            .zip(bits)
            .filter(|(_, &b)| b == 1)
            .fold(S::zero(), |acc, (p, _)| acc + p.weight);
        total.min(S::one())
    }

    /// Sequence NLL of every creation under every positive-mass pair's conditioning.
    fn nll_table(&self, scorer: &dyn ModelScorer<S>) -> Result<Vec<Vec<S>>> {
        let window = self.world.window();
        self.pairs
            .iter()
            .map(|p| {
                if !(p.weight > S::zero()) {
                    return Ok(Vec::new());
                }
                self.creations
                    .iter()
                    .map(|x| Ok(sequence_nll(scorer, x, &p.prompt, &p.info, window)?.total))
                    .collect()
            })
            .collect()
    }

    /// Largest `-ln p(x)` over positive-mass pairs and creations in the support.
    fn truth_nll_max(&self) -> S {
        let mut m = S::zero();
        for p in self.pairs.iter().filter(|p| p.weight > S::zero()) {
            for &px in p.law.probs() {
                if px > S::zero() {
                    m = m.max(-px.ln());
                }
            }
        }
        m
    }
}

/// Smoothed empirical next-token frequencies per (info, prompt, windowed prefix).
/// Unseen contexts fall back to uniform.
pub fn fit_empirical_model<S: Scalar>(
    samples: &[(Creation, Prompt, Creator)],
    world: &WorldSpec<S>,
    epsilon: S,
) -> Result<TableScorer<S>> {
    fit_table(samples, world, epsilon, true, true)
}

/// As [`fit_empirical_model`] but pooling all conditions: a model of the marginal `q(x)`.
pub fn fit_marginal_model<S: Scalar>(
    samples: &[(Creation, Prompt, Creator)],
    world: &WorldSpec<S>,
    epsilon: S,
) -> Result<TableScorer<S>> {
    fit_table(samples, world, epsilon, false, false)
}

fn fit_table<S: Scalar>(
    samples: &[(Creation, Prompt, Creator)],
    world: &WorldSpec<S>,
    epsilon: S,
    use_info: bool,
    use_prompt: bool,
) -> Result<TableScorer<S>> {
    if !(epsilon > S::zero()) || !epsilon.is_finite() {
        return Err(Error::domain(format!("smoothing epsilon {epsilon} must be positive")));
    }
    let vocab = world.vocab_size();
    let window = world.window();
    let mut table = TableScorer::new(vocab, window, use_info, use_prompt);
    let mut counts: HashMap<_, HashMap<Vec<Token>, Vec<u64>>> = HashMap::new();
    for (x, u, c) in samples {
        if x.len() != world.seq_len() || x.tokens().iter().any(|&t| t as usize >= vocab) {
            return Err(Error::domain("sample does not fit the world's vocabulary and length"));
        }
        let key = table.key(&world.information_of(*c)?, u);
        let per_key = counts.entry(key).or_default();
        for (t, &tok) in x.tokens().iter().enumerate() {
            let ctx = window_of(x.tokens(), t, window).to_vec();
            per_key.entry(ctx).or_insert_with(|| vec![0; vocab])[tok as usize] += 1;
        }
    }
    for (key, contexts) in counts {
        for (ctx, row) in contexts {
            let freq = FiniteDistribution::from_weights(row.into_iter().map(|k| S::lit(k as f64)).collect())?;
            table.insert(key.clone(), &ctx, freq.smooth(epsilon)?)?;
        }
    }
    Ok(table)
}

struct TrialOutcome<S> {
    seed: u64,
    expected_l: S,
    metric: MetricValue<S>,
    certified: bool,
    claim: bool,
}

/// Declared NLL bound for a coverage run: the configured value, else the
/// smoothing ceiling `T ln((1+Vε)/ε)` for fitted scorers, `T ln(V/λ)` for
/// uniform mixtures, and the exact maximum for the truth.
fn derive_m_bound<S: Scalar>(cfg: &TrialConfig, prep: &Prepared<'_, S>) -> S {
    if let Some(m) = cfg.m_bound {
        return S::lit(m);
    }
    let world = prep.world;
    let len = S::lit(world.seq_len() as f64);
    let vocab = S::lit(world.vocab_size() as f64);
    let exact = || prep.truth_nll_max().max(S::epsilon());
    match cfg.scorer_family {
        ScorerFamily::Fitted { epsilon, .. } => len * smoothing_nll_ceiling(world.vocab_size(), S::lit(epsilon)),
        ScorerFamily::UniformMix { lambda } if lambda > 0.0 => len * (vocab / S::lit(lambda)).ln(),
        _ => exact(),
    }
}

fn validate(cfg: &TrialConfig, world: &WorldSpec<impl Scalar>) -> Result<()> {
    if cfg.trials == 0 {
        return Err(Error::domain("trials must be >= 1"));
    }
    if cfg.n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    if !cfg.certificate.prompted() && world.num_prompts() != 1 {
        return Err(Error::domain(format!(
            "{} needs a prompt-free world",
            cfg.certificate.short_name()
        )));
    }
    match cfg.scorer_family {
        ScorerFamily::UniformMix { lambda } if !(0.0..=1.0).contains(&lambda) => {
            Err(Error::domain(format!("mixing weight {lambda} outside [0, 1]")))
        }
        ScorerFamily::Fitted { epsilon, .. } if !(epsilon > 0.0) => {
            Err(Error::domain(format!("smoothing epsilon {epsilon} must be positive")))
        }
        _ => Ok(()),
    }
}

fn run_trial<S: Scalar>(
    cfg: &TrialConfig,
    prep: &Prepared<'_, S>,
    ev: &KlThresholdEvaluator<'_, S>,
    bounds: Option<(S, S)>,
    seed: u64,
) -> Result<TrialOutcome<S>> {
    let world = prep.world;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = scorer_from_world(world);
    let scorer: Box<dyn ModelScorer<S> + '_> = match cfg.scorer_family {
        ScorerFamily::Truth => Box::new(truth),
        ScorerFamily::UniformMix { lambda } => Box::new(mix_with_uniform(truth, S::lit(lambda))?),
        ScorerFamily::Fitted {
            epsilon,
            samples_per_fit,
        } => {
            let train = prep.draw_triples(samples_per_fit, &mut rng);
            Box::new(fit_empirical_model(&train, world, S::lit(epsilon))?)
        }
    };
    let bits = prep.judgments(scorer.as_ref(), ev)?;
    let expected_l = prep.expected_l(&bits);
    let delta = S::lit(cfg.delta);
    let kind = cfg.certificate;
    let prompted = kind.prompted();
    let metric = if kind.needs_bounds() {
        let nll = prep.nll_table(scorer.as_ref())?;
        let terms: Vec<WeightedTerm<S>> = (0..cfg.n)
            .map(|_| {
                let pair = prep.draw_pair(prompted, &mut rng);
                let x = prep.draw_creation(pair, &mut rng);
                WeightedTerm {
                    nll: nll[pair][x],
                    entropy: prep.pairs[pair].entropy,
                }
            })
            .collect();
        weighted_nll_metric(kind.metric(), &terms, S::lit(cfg.tau))?
    } else {
        let ones = (0..cfg.n)
            .filter(|_| bits[prep.draw_pair(prompted, &mut rng)] == 1)
            .count();
        MetricValue {
            kind: kind.metric(),
            value: S::lit(ones as f64) / S::lit(cfg.n as f64),
            n: cfg.n,
            r_min_used: None,
            m_observed: None,
        }
    };
    let (m, r_min) = match bounds {
        Some((m, r)) => (Some(m), Some(r)),
        None => (None, None),
    };
    let cert = certify(kind, &metric, delta, S::lit(cfg.t), m, r_min)?;
    Ok(TrialOutcome {
        seed,
        expected_l,
        metric,
        certified: cert.certified,
        claim: expected_l <= delta,
    })
}

/// Runs `cfg.trials` independent trials in double precision.
pub fn run_coverage_experiment(cfg: &TrialConfig, jobs: Option<usize>) -> Result<CoverageReport> {
    run_coverage_experiment_as::<f64>(cfg, jobs)
}

/// [`run_coverage_experiment`] at an arbitrary scalar precision.
pub fn run_coverage_experiment_as<S: Scalar>(cfg: &TrialConfig, jobs: Option<usize>) -> Result<CoverageReport> {
    let world = WorldSpec::<S>::from_config(&cfg.world)?;
    validate(cfg, &world)?;
    let prep = Prepared::new(&world)?;
    let ev = kl_threshold_evaluator(&world, S::lit(cfg.tau))?;
    let bounds = if cfg.certificate.needs_bounds() {
        Some((derive_m_bound(cfg, &prep), r_min_exact(&world, S::lit(cfg.tau))?))
    } else {
        None
    };
    let outcomes = with_pool(jobs, || {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|i| run_trial(cfg, &prep, &ev, bounds, trial_seed(cfg.master_seed, i)))
            .collect::<Result<Vec<_>>>()
    })??;

    let trials_certified = outcomes.iter().filter(|o| o.certified).count();
    let failures = outcomes.iter().filter(|o| o.certified && !o.claim).count();
    let failure_rate = failures as f64 / trials_certified.max(1) as f64;
    let mc = monte_carlo_bound(cfg.t, cfg.trials);
    Ok(CoverageReport {
        certificate: cfg.certificate,
        n: cfg.n,
        delta: cfg.delta,
        t: cfg.t,
        tau: cfg.tau,
        m_bound: bounds.map(|b| b.0.as_f64()),
        r_min: bounds.map(|b| b.1.as_f64()),
        trials_run: outcomes.len(),
        trials_certified,
        failures,
        failure_rate,
        unconditional_failure_rate: failures as f64 / outcomes.len() as f64,
        monte_carlo_bound: mc,
        within_bound: failure_rate <= mc,
        trial_seeds: outcomes.iter().map(|o| o.seed).collect(),
        exact_expected_l: outcomes.iter().map(|o| o.expected_l.as_f64()).collect(),
        metric_values: outcomes
            .iter()
            .map(|o| Some(o.metric.value.as_f64()).filter(|v| v.is_finite()))
            .collect(),
        certified: outcomes.iter().map(|o| o.certified).collect(),
    })
}

/// `{ smooth(mix(p, k/(size-1)), ε) : k = 0..size }`, a finite model class
/// whose NLL is bounded by `T ln((1+Vε)/ε)`.
pub fn smoothed_mixture_class<S: Scalar>(
    world: &WorldSpec<S>,
    size: usize,
    epsilon: S,
) -> Result<Vec<Box<dyn ModelScorer<S> + '_>>> {
    if size < 2 {
        return Err(Error::domain("class size must be >= 2"));
    }
    let truth = scorer_from_world(world);
    (0..size)
        .map(|k| {
            let lambda = S::lit(k as f64 / (size - 1) as f64);
            let member = SmoothedScorer::new(mix_with_uniform(truth, lambda)?, epsilon)?;
            Ok(Box::new(member) as Box<dyn ModelScorer<S> + '_>)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub seed: u64,
    pub train_n: usize,
    pub class_size: usize,
    /// Index of the empirical minimizer `q_S` in the class.
    pub selected: usize,
    /// `1/r`-weighted training NLL of `q_S`.
    pub train_weighted_nll: f64,
    pub m_bound: f64,
    pub r_min: f64,
    pub gap_constant: f64,
    pub bound: f64,
    /// Exact `E[L]` of `q_S`, the probability that a fresh draw fails.
    pub expected_l: f64,
    pub fresh_creator: usize,
    pub fresh_prompt: usize,
    pub fresh_loss: u8,
    /// `L` at the fresh draw is not below the bound.
    pub sampled_violation: bool,
    /// Probability over a fresh draw, given this training set, that the bound fails.
    pub exact_violation_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCoverage {
    pub draws: usize,
    pub delta: f64,
    pub violations: usize,
    /// `δ D + 3 sqrt(δ (1 - δ) D)`.
    pub allowed_violations: f64,
    pub within_bound: bool,
    /// Mean of the exact per-draw violation probabilities.
    pub mean_exact_violation_probability: f64,
    pub reports: Vec<TrainingReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingParams {
    pub train_n: usize,
    pub delta: f64,
    pub tau: f64,
    /// Almost-sure NLL bound shared by every class member.
    pub m_bound: f64,
}

/// Class-wide exact quantities reused by every training draw.
struct ClassTables<S> {
    nll: Vec<Vec<Vec<S>>>,
    bits: Vec<Vec<u8>>,
    expected_l: Vec<S>,
}

fn class_tables<S: Scalar>(
    prep: &Prepared<'_, S>,
    class: &[Box<dyn ModelScorer<S> + '_>],
    ev: &KlThresholdEvaluator<'_, S>,
) -> Result<ClassTables<S>> {
    let mut nll = Vec::with_capacity(class.len());
    let mut bits = Vec::with_capacity(class.len());
    let mut expected_l = Vec::with_capacity(class.len());
    for q in class {
        nll.push(prep.nll_table(q.as_ref())?);
        let b = prep.judgments(q.as_ref(), ev)?;
        expected_l.push(prep.expected_l(&b));
        bits.push(b);
    }
    Ok(ClassTables { nll, bits, expected_l })
}

fn training_draw<S: Scalar>(
    prep: &Prepared<'_, S>,
    tables: &ClassTables<S>,
    params: &TrainingParams,
    r_min: S,
    seed: u64,
) -> Result<TrainingReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<(usize, usize)> = (0..params.train_n)
        .map(|_| {
            let pair = prep.draw_pair(true, &mut rng);
            (pair, prep.draw_creation(pair, &mut rng))
        })
        .collect();
    let m = S::lit(params.m_bound);
    let tau = S::lit(params.tau);
    let mut best: Option<(usize, MetricValue<S>)> = None;
    for (k, nll) in tables.nll.iter().enumerate() {
        let terms: Vec<WeightedTerm<S>> = draws
            .iter()
            .map(|&(pair, x)| WeightedTerm {
                nll: nll[pair][x],
                entropy: prep.pairs[pair].entropy,
            })
            .collect();
        let metric = weighted_nll_metric(MetricKind::E3, &terms, tau)?;
        let observed = metric.m_observed.unwrap_or(S::zero());
        if observed > m {
            return Err(Error::BoundViolation {
                declared: params.m_bound,
                observed: observed.as_f64(),
            });
        }
        if best.as_ref().is_none_or(|(_, b)| metric.value < b.value) {
            best = Some((k, metric));
        }
    }
    let (selected, metric) = best.ok_or_else(|| Error::domain("empty model class"))?;
    let delta = S::lit(params.delta);
    let gap = finite_class_gap_constant(m, r_min)?;
    let q = QProvider::FiniteClass {
        class_size: tables.nll.len() as u64,
    };
    let bound = corollary4_bound(metric.value, params.train_n as u64, delta, &q, gap, true, None)?;
    let fresh = prep.draw_pair(true, &mut rng);
    let fresh_loss = tables.bits[selected][fresh];
    let expected_l = tables.expected_l[selected];
    let exact_violation_probability = if bound <= S::zero() {
        S::one()
    } else if bound <= S::one() {
        expected_l
    } else {
        S::zero()
    };
    Ok(TrainingReport {
        seed,
        train_n: params.train_n,
        class_size: tables.nll.len(),
        selected,
        train_weighted_nll: metric.value.as_f64(),
        m_bound: params.m_bound,
        r_min: r_min.as_f64(),
        gap_constant: gap.as_f64(),
        bound: bound.as_f64(),
        expected_l: expected_l.as_f64(),
        fresh_creator: prep.pairs[fresh].creator.id,
        fresh_prompt: prep.pairs[fresh].prompt.id,
        fresh_loss,
        sampled_violation: S::lit(fresh_loss as f64) >= bound,
        exact_violation_probability: exact_violation_probability.as_f64(),
    })
}

fn check_training_params(params: &TrainingParams, class_len: usize) -> Result<()> {
    if params.train_n == 0 {
        return Err(Error::domain("train_n must be >= 1"));
    }
    if class_len == 0 {
        return Err(Error::domain("empty model class"));
    }
    if !(params.m_bound > 0.0) {
        return Err(Error::domain(format!("M = {} must be positive", params.m_bound)));
    }
    Ok(())
}

/// One training draw: pick the class member with the least weighted training
/// NLL, evaluate the training-time bound with the exact finite-class gap, and
/// test it at one fresh draw `z̄`.
pub fn run_training_experiment<S: Scalar>(
    world: &WorldSpec<S>,
    class: &[Box<dyn ModelScorer<S> + '_>],
    params: &TrainingParams,
    seed: u64,
) -> Result<TrainingReport> {
    check_training_params(params, class.len())?;
    let prep = Prepared::new(world)?;
    let ev = kl_threshold_evaluator(world, S::lit(params.tau))?;
    let tables = class_tables(&prep, class, &ev)?;
    let r_min = r_min_exact(world, S::lit(params.tau))?;
    training_draw(&prep, &tables, params, r_min, seed)
}

/// `draws` seeded repetitions of [`run_training_experiment`].
pub fn run_training_coverage<S: Scalar>(
    world: &WorldSpec<S>,
    class: &[Box<dyn ModelScorer<S> + '_>],
    params: &TrainingParams,
    master_seed: u64,
    draws: usize,
    jobs: Option<usize>,
) -> Result<TrainingCoverage> {
    check_training_params(params, class.len())?;
    if draws == 0 {
        return Err(Error::domain("draws must be >= 1"));
    }
    let prep = Prepared::new(world)?;
    let ev = kl_threshold_evaluator(world, S::lit(params.tau))?;
    let tables = class_tables(&prep, class, &ev)?;
    let r_min = r_min_exact(world, S::lit(params.tau))?;
    let reports = with_pool(jobs, || {
        (0..draws as u64)
            .into_par_iter()
            .map(|i| training_draw(&prep, &tables, params, r_min, trial_seed(master_seed, i)))
            .collect::<Result<Vec<_>>>()
    })??;
    let violations = reports.iter().filter(|r| r.sampled_violation).count();
    let d = params.delta;
    let allowed = d * draws as f64 + 3.0 * (d * (1.0 - d) * draws as f64).sqrt();
    Ok(TrainingCoverage {
        draws,
        delta: d,
        violations,
        allowed_violations: allowed,
        within_bound: violations as f64 <= allowed,
        mean_exact_violation_probability: reports.iter().map(|r| r.exact_violation_probability).sum::<f64>()
            / draws as f64,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalizationReport {
    pub seed: u64,
    pub train_n: usize,
    pub conditional_expected_l: f64,
    pub marginal_expected_l: f64,
    /// `marginal - conditional`.
    pub difference: f64,
}

/// Fits a conditional model `q(x | u, I[c])` and a marginal model `q(x)` on the
/// same draw and compares their exact `E[L]` under the KL evaluator.
pub fn marginalization_contrast_experiment<S: Scalar>(
    world: &WorldSpec<S>,
    train_n: usize,
    epsilon: S,
    tau: S,
    seed: u64,
) -> Result<MarginalizationReport> {
    if world.num_creators() < 2 {
        return Err(Error::domain("contrast needs at least two creators"));
    }
    if train_n == 0 {
        return Err(Error::domain("train_n must be >= 1"));
    }
    let prep = Prepared::new(world)?;
    let ev = kl_threshold_evaluator(world, tau)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = prep.draw_triples(train_n, &mut rng);
    let conditional = fit_empirical_model(&samples, world, epsilon)?;
    let marginal = fit_marginal_model(&samples, world, epsilon)?;
    let cond = prep.expected_l(&prep.judgments(&conditional, &ev)?).as_f64();
    let marg = prep.expected_l(&prep.judgments(&marginal, &ev)?).as_f64();
    Ok(MarginalizationReport {
        seed,
        train_n,
        conditional_expected_l: cond,
        marginal_expected_l: marg,
        difference: marg - cond,
    })
}
