//! `creativity-cert` command-line front end.

mod dataset;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use creativity_cert::certificates::{
    achievable_delta, certify, corollary4_bound, finite_class_gap_constant, min_n, CertificateKind, QProvider,
};
use creativity_cert::distributions::smoothing_nll_ceiling;
use creativity_cert::metrics::{e0, e2, weighted_nll_from_records, MetricKind};
use creativity_cert::scoring::ExternalScorer;
use creativity_cert::scoring::{mix_with_uniform, scorer_from_world, ModelScorer, SmoothedScorer, UniformScorer};
use creativity_cert::simharness::{
    marginalization_contrast_experiment, run_coverage_experiment, run_training_coverage, smoothed_mixture_class,
    trial_seed, TrainingParams, TrialConfig,
};
use creativity_cert::{Error, Info, Metric, Prompt, World, WorldConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use report::{
    canonical_command, emit, sha256_hex, to_value, CertificateView, CliResult, Failure, MetricView, Report, EXIT_NOT_CERTIFIED,
    EXIT_OK,
};

const SEED_ENV: &str = "CREATIVITY_CERT_SEED";

#[derive(Parser)]
#[command(name = "creativity-cert", version, about = "Statistical creativity metrics and certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute E0-E3 over a JSONL dataset, optionally certifying in the same run.
    Evaluate(EvaluateArgs),
    /// Decide a certificate from a metric value or an evaluate report.
    Certify(CertifyArgs),
    /// Required sample size and achievable delta for a metric value.
    Plan(PlanArgs),
    /// Run a coverage, training or marginalization experiment from a config.
    Simulate(SimulateArgs),
    /// Training-time generalization bound on the evaluator loss.
    Bound(BoundArgs),
    /// Probe an external scorer for protocol conformance.
    ScorerCheck(ScorerCheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Mode {
    E0,
    E1,
    E2,
    E3,
}

impl Mode {
    fn kind(self) -> MetricKind {
        match self {
            Mode::E0 => MetricKind::E0,
            Mode::E1 => MetricKind::E1,
            Mode::E2 => MetricKind::E2,
            Mode::E3 => MetricKind::E3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScorerChoice {
    Truth,
    Uniform,
    Mix,
    External,
}

/// Certificate options shared by `evaluate` and `certify`.
#[derive(Args, Clone, Debug)]
struct CertOpts {
    /// thm1 | thm2 | cor2 | cor3
    #[arg(long)]
    certificate: Option<CertificateKind>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    /// Declared almost-sure bound on sequence NLL.
    #[arg(long)]
    m_bound: Option<f64>,
    /// Declared lower bound on the entropy weight.
    #[arg(long)]
    r_min: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    /// World config (JSON); supplies vocab, window, exact entropies and the truth scorer.
    #[arg(long)]
    world: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "truth")]
    scorer: ScorerChoice,
    /// Uniform mixing weight for `--scorer mix`.
    #[arg(long)]
    lambda: Option<f64>,
    /// Additive smoothing applied on top of the chosen scorer.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Command line of the external scorer, whitespace separated.
    #[arg(long)]
    scorer_cmd: Option<String>,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    /// Markov window of the scorer context.
    #[arg(long)]
    omega: Option<usize>,
    #[command(flatten)]
    cert: CertOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    /// Report produced by `evaluate`.
    #[arg(long, conflicts_with_all = ["value", "n"])]
    report: Option<PathBuf>,
    #[arg(long, requires = "n")]
    value: Option<f64>,
    #[arg(long, requires = "value")]
    n: Option<usize>,
    /// Largest observed sequence NLL (E1/E3).
    #[arg(long)]
    m_observed: Option<f64>,
    /// Smallest observed entropy weight (E1/E3).
    #[arg(long)]
    r_min_used: Option<f64>,
    #[command(flatten)]
    cert: CertOpts,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    value: f64,
    #[arg(long)]
    certificate: CertificateKind,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    t: f64,
    #[arg(long)]
    m_bound: Option<f64>,
    #[arg(long)]
    r_min: Option<f64>,
    /// Sample sizes for the achievable-delta curve.
    #[arg(long, value_delimiter = ',', default_value = "100,300,1000,3000,10000")]
    n_list: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides trials (coverage), draws (training) or seeds (marginalization).
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the config's master seed; CREATIVITY_CERT_SEED overrides both.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum QChoice {
    FiniteClass,
    NormBased,
    Robustness,
    InfoTheoretic,
}

#[derive(Args)]
struct BoundArgs {
    /// Training loss: 1/r-weighted NLL, or plain NLL with --unweighted.
    #[arg(long)]
    train_e: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    delta: f64,
    #[arg(long, value_enum)]
    q_provider: QChoice,
    #[arg(long)]
    class_size: Option<u64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    rho: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    frobenius: Vec<f64>,
    #[arg(long)]
    lipschitz_c: Option<f64>,
    #[arg(long)]
    covering_number: Option<f64>,
    /// Comma-separated `mi:weight` pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair)]
    mi_pairs: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 1.0, conflicts_with = "exact_gap")]
    gap_constant: f64,
    /// Use the exact finite-class gap constant sqrt(2) M / r_min.
    #[arg(long, requires_all = ["m_bound", "r_min"])]
    exact_gap: bool,
    #[arg(long)]
    m_bound: Option<f64>,
    #[arg(long)]
    unweighted: bool,
    #[arg(long)]
    r_min: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScorerCheckArgs {
    #[arg(long)]
    vocab: usize,
    #[arg(long, default_value_t = 5_000)]
    timeout_ms: u64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    info: Vec<u32>,
    #[arg(long, value_delimiter = ',')]
    prompt: Vec<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scorer program and its arguments.
    #[arg(last = true, required = true)]
    cmd: Vec<String>,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected mi:weight, got '{s}'"))?;
    let a = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
    Ok((a, b))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| anyhow::Error::from(Error::Validation(format!("{}: {e}", path.display()))))
}

fn certificate_of(opts: &CertOpts, metric: &Metric) -> CliResult<CertificateView> {
    let kind = opts
        .certificate
        .ok_or_else(|| Failure::usage("--certificate is required"))?;
    let delta = opts.delta.ok_or_else(|| Failure::usage("--delta is required"))?;
    let t = opts.t.ok_or_else(|| Failure::usage("--t is required"))?;
    if kind.needs_bounds() && (opts.m_bound.is_none() || opts.r_min.is_none()) {
        return Err(Failure::usage(format!("{} requires --m-bound and --r-min", kind.short_name())));
    }
    let (m, r) = if kind.needs_bounds() {
        (opts.m_bound, opts.r_min)
    } else {
        (None, None)
    };
    let cert = certify(kind, metric, delta, t, m, r)?;
    Ok(CertificateView::new(&cert, delta, t, m, r))
}

fn cert_inputs(opts: &CertOpts) -> Value {
    json!({
        "certificate": opts.certificate,
        "delta": opts.delta,
        "t": opts.t,
        "m_bound": opts.m_bound,
        "r_min": opts.r_min,
    })
}

fn verdict_code(cert: Option<&CertificateView>) -> u8 {
    match cert {
        Some(c) if !c.certified => EXIT_NOT_CERTIFIED,
        _ => EXIT_OK,
    }
}

fn load_world(path: &Path) -> anyhow::Result<(WorldConfig, World)> {
    let cfg: WorldConfig = read_json(path)?;
    let world = World::from_config(&cfg)?;
    Ok((cfg, world))
}

fn build_scorer<'w>(
    a: &EvaluateArgs,
    world: Option<&'w World>,
    vocab: usize,
) -> CliResult<Box<dyn ModelScorer<f64> + 'w>> {
    let need_world = || world.ok_or_else(|| Failure::usage(format!("--scorer {:?} needs --world", a.scorer).to_lowercase()));
    let base: Box<dyn ModelScorer<f64> + 'w> = match a.scorer {
        ScorerChoice::Truth => Box::new(scorer_from_world(need_world()?)),
        ScorerChoice::Uniform => Box::new(UniformScorer { vocab }),
        ScorerChoice::Mix => {
            let lambda = a.lambda.ok_or_else(|| Failure::usage("--scorer mix needs --lambda"))?;
            Box::new(mix_with_uniform(scorer_from_world(need_world()?), lambda)?)
        }
        ScorerChoice::External => {
            let line = a
                .scorer_cmd
                .as_deref()
                .ok_or_else(|| Failure::usage("--scorer external needs --scorer-cmd"))?;
            let mut parts = line.split_whitespace();
            let prog = parts.next().ok_or_else(|| Failure::usage("--scorer-cmd is empty"))?;
            let mut cmd = std::process::Command::new(prog);
            cmd.args(parts);
            Box::new(ExternalScorer::spawn(cmd, vocab, Duration::from_millis(a.timeout_ms))?)
        }
    };
    Ok(match a.epsilon {
        Some(eps) => Box::new(SmoothedScorer::new(base, eps)?),
        None => base,
    })
}

fn cmd_evaluate(a: &EvaluateArgs, command: String) -> CliResult<u8> {
    let bytes = std::fs::read(&a.dataset).with_context(|| format!("reading {}", a.dataset.display()))?;
    let text = String::from_utf8(bytes.clone()).map_err(|e| Error::Validation(format!("dataset is not UTF-8: {e}")))?;
    let records = dataset::parse(&text)?;
    let kind = a.mode.kind();
    let loaded = a.world.as_deref().map(load_world).transpose()?;
    let world = loaded.as_ref().map(|(_, w)| w);

    let mut inputs = json!({
        "mode": a.mode,
        "dataset_sha256": sha256_hex(&bytes),
        "records": records.len(),
        "world": loaded.as_ref().map(|(cfg, _)| to_value(cfg)),
        "certify": cert_inputs(&a.cert),
    });

    let metric = if kind.is_weighted_nll() {
        let vocab = match (a.vocab, world) {
            (Some(v), Some(w)) if v != w.vocab_size() => {
                return Err(Failure::usage(format!("--vocab {v} disagrees with the world ({})", w.vocab_size())))
            }
            (Some(v), _) => v,
            (None, Some(w)) => w.vocab_size(),
            (None, None) => return Err(Failure::usage("--vocab or --world is required")),
        };
        let omega = a
            .omega
            .or(world.map(|w| w.window()))
            .ok_or_else(|| Failure::usage("--omega or --world is required"))?;
        let scored = dataset::scored_records(&records, kind, world, vocab)?;
        let scorer = build_scorer(a, world, vocab)?;
        inputs["scorer"] = json!({
            "kind": a.scorer,
            "lambda": a.lambda,
            "epsilon": a.epsilon,
            "command": a.scorer_cmd,
        });
        inputs["vocab"] = json!(vocab);
        inputs["omega"] = json!(omega);
        inputs["tau"] = json!(a.tau);
        weighted_nll_from_records(kind, &scored, scorer.as_ref(), a.tau, omega)?
    } else {
        let bits = dataset::bits(&records, kind)?;
        if kind == MetricKind::E0 {
            e0(&bits)?
        } else {
            e2(&bits)?
        }
    };

    let cert = match a.cert.certificate {
        Some(_) => Some(certificate_of(&a.cert, &metric)?),
        None => None,
    };
    let code = verdict_code(cert.as_ref());
    let summary = summary_line(&metric, cert.as_ref());
    let result = json!({ "metric": MetricView::from(&metric), "certificate": cert });
    let mut rep = Report::new(command, inputs, result);
    if kind.is_weighted_nll() {
        rep.notes.push("metric.value null means +inf".into());
    }
    emit(&rep, a.out.as_deref(), &summary)?;
    Ok(code)
}

fn summary_line(metric: &Metric, cert: Option<&CertificateView>) -> String {
    let mut s = format!("{:?} = {} (n = {})", metric.kind, metric.value, metric.n);
    if let Some(c) = cert {
        s.push_str(&format!(
            "; {} {}",
            c.kind.short_name(),
            if c.certified { "certified" } else { "not certified" }
        ));
    }
    s
}

fn cmd_certify(a: &CertifyArgs, command: String) -> CliResult<u8> {
    let view = match (&a.report, a.value, a.n) {
        (Some(path), _, _) => {
            let doc: Value = read_json(path)?;
            let m = doc
                .pointer("/result/metric")
                .cloned()
                .ok_or_else(|| Failure::usage(format!("{} has no result.metric", path.display())))?;
            serde_json::from_value::<MetricView>(m).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?
        }
        (None, Some(value), Some(n)) => {
            let kind = a
                .cert
                .certificate
                .ok_or_else(|| Failure::usage("--certificate is required"))?;
            let mut m = Metric::new(kind.metric(), value, n)?;
            m.m_observed = a.m_observed;
            m.r_min_used = a.r_min_used;
            MetricView::from(&m)
        }
        _ => return Err(Failure::usage("give --report or --value with --n")),
    };
    let metric = view.to_metric();
    let cert = certificate_of(&a.cert, &metric)?;
    let code = verdict_code(Some(&cert));
    let summary = summary_line(&metric, Some(&cert));
    let inputs = json!({ "metric": view, "certify": cert_inputs(&a.cert) });
    let rep = Report::new(command, inputs, json!({ "certificate": cert }));
    emit(&rep, a.out.as_deref(), &summary)?;
    Ok(code)
}

fn cmd_plan(a: &PlanArgs, command: String) -> CliResult<u8> {
    let (m, r) = if a.certificate.needs_bounds() {
        match (a.m_bound, a.r_min) {
            (Some(m), Some(r)) => (Some(m), Some(r)),
            _ => {
                return Err(Failure::usage(format!(
                    "{} requires --m-bound and --r-min",
                    a.certificate.short_name()
                )))
            }
        }
    } else {
        (None, None)
    };
    let metric = Metric::new(a.certificate.metric(), a.value, 1)?;
    let required_n = min_n(metric.value, a.delta, a.t, m, r)?;
    let curve = a
        .n_list
        .iter()
        .map(|&n| Ok(json!({ "n": n, "delta": achievable_delta(a.value, n, a.t, m, r)? })))
        .collect::<Result<Vec<_>, Error>>()?;
    let inputs = json!({
        "value": a.value,
        "certificate": a.certificate,
        "delta": a.delta,
        "t": a.t,
        "m_bound": m,
        "r_min": r,
        "n_list": a.n_list,
    });
    let rep = Report::new(command, inputs, json!({ "required_n": required_n, "achievable_delta": curve }));
    emit(&rep, a.out.as_deref(), &format!("required_n = {required_n}"))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainingConfig {
    world: WorldConfig,
    class_size: usize,
    epsilon: f64,
    train_n: usize,
    delta: f64,
    tau: f64,
    /// Defaults to the smoothing ceiling `T ln((1 + V ε) / ε)`.
    #[serde(default)]
    m_bound: Option<f64>,
    draws: usize,
    master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MarginalizationConfig {
    world: WorldConfig,
    train_n: usize,
    epsilon: f64,
    tau: f64,
    seeds: usize,
    master_seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
enum Experiment {
    Coverage(TrialConfig),
    Training(TrainingConfig),
    Marginalization(MarginalizationConfig),
}

fn seed_override(flag: Option<u64>) -> CliResult<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| Failure::usage(format!("{SEED_ENV}='{s}': {e}"))),
        _ => Ok(flag),
    }
}

fn cmd_simulate(a: &SimulateArgs, command: String) -> CliResult<u8> {
    let mut exp: Experiment = read_json(&a.config)?;
    let seed = seed_override(a.seed)?;
    match &mut exp {
        Experiment::Coverage(c) => {
            c.trials = a.trials.unwrap_or(c.trials);
            c.master_seed = seed.unwrap_or(c.master_seed);
        }
        Experiment::Training(c) => {
            c.draws = a.trials.unwrap_or(c.draws);
            c.master_seed = seed.unwrap_or(c.master_seed);
        }
        Experiment::Marginalization(c) => {
            c.seeds = a.trials.unwrap_or(c.seeds);
            c.master_seed = seed.unwrap_or(c.master_seed);
        }
    }
    let inputs = to_value(&exp);
    let (master_seed, result, summary, code) = match &exp {
        Experiment::Coverage(c) => {
            let rep = run_coverage_experiment(c, a.jobs)?;
            let summary = format!(
                "{} trials, {} certified, {} failures, failure rate {} (bound {})",
                rep.trials_run, rep.trials_certified, rep.failures, rep.failure_rate, rep.monte_carlo_bound
            );
            let code = if rep.within_bound { EXIT_OK } else { EXIT_NOT_CERTIFIED };
            (c.master_seed, to_value(&rep), summary, code)
        }
        Experiment::Training(c) => {
            let world = World::from_config(&c.world)?;
            let m_bound = c
                .m_bound
                .unwrap_or_else(|| world.seq_len() as f64 * smoothing_nll_ceiling(world.vocab_size(), c.epsilon));
            let class = smoothed_mixture_class(&world, c.class_size, c.epsilon)?;
            let params = TrainingParams {
                train_n: c.train_n,
                delta: c.delta,
                tau: c.tau,
                m_bound,
            };
            let cov = run_training_coverage(&world, &class, &params, c.master_seed, c.draws, a.jobs)?;
            let summary = format!(
                "{} draws, {} violations (allowed {})",
                cov.draws, cov.violations, cov.allowed_violations
            );
            let code = if cov.within_bound { EXIT_OK } else { EXIT_NOT_CERTIFIED };
            (c.master_seed, to_value(&cov), summary, code)
        }
        Experiment::Marginalization(c) => {
            let world = World::from_config(&c.world)?;
            let reports = (0..c.seeds as u64)
                .map(|i| {
                    marginalization_contrast_experiment(&world, c.train_n, c.epsilon, c.tau, trial_seed(c.master_seed, i))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            let cond_max = reports.iter().map(|r| r.conditional_expected_l).fold(0.0, f64::max);
            let marg_min = reports.iter().map(|r| r.marginal_expected_l).fold(1.0, f64::min);
            let summary = format!(
                "{} seeds, max conditional E[L] {cond_max}, min marginal E[L] {marg_min}",
                reports.len()
            );
            let result = json!({
                "max_conditional_expected_l": cond_max,
                "min_marginal_expected_l": marg_min,
                "reports": reports,
            });
            (c.master_seed, result, summary, EXIT_OK)
        }
    };
    let mut rep = Report::new(command, inputs, result);
    rep.seed = Some(master_seed);
    emit(&rep, a.out.as_deref(), &summary)?;
    Ok(code)
}

fn q_provider(a: &BoundArgs) -> CliResult<QProvider> {
    fn need<T: Copy>(v: Option<T>, flag: &str) -> CliResult<T> {
        v.ok_or_else(|| Failure::usage(format!("{flag} is required for this --q-provider")))
    }
    Ok(match a.q_provider {
        QChoice::FiniteClass => QProvider::FiniteClass {
            class_size: need(a.class_size, "--class-size")?,
        },
        QChoice::NormBased => QProvider::NormBased {
            b: need(a.b, "--b")?,
            rho: need(a.rho, "--rho")?,
            frobenius_bounds: a.frobenius.clone(),
        },
        QChoice::Robustness => QProvider::Robustness {
            lipschitz_c: need(a.lipschitz_c, "--lipschitz-c")?,
            covering_number: need(a.covering_number, "--covering-number")?,
        },
        QChoice::InfoTheoretic => QProvider::InfoTheoretic {
            mi_pairs: a.mi_pairs.clone(),
        },
    })
}

fn cmd_bound(a: &BoundArgs, command: String) -> CliResult<u8> {
    let q = q_provider(a)?;
    if a.unweighted && a.r_min.is_none() {
        return Err(Failure::usage("--unweighted requires --r-min"));
    }
    let gap = if a.exact_gap {
        finite_class_gap_constant(a.m_bound.expect("required by clap"), a.r_min.expect("required by clap"))?
    } else {
        a.gap_constant
    };
    let bound = corollary4_bound(a.train_e, a.n, a.delta, &q, gap, !a.unweighted, a.r_min)?;
    let q_value = q.evaluate(a.delta / 2.0)?;
    let inputs = json!({
        "train_e": a.train_e,
        "n": a.n,
        "delta": a.delta,
        "q_provider": q,
        "gap_constant": gap,
        "weighted": !a.unweighted,
        "r_min": a.r_min,
    });
    let mut rep = Report::new(command, inputs, json!({ "bound": bound, "q_half_delta": q_value }));
    rep.notes.push(if a.unweighted {
        "train_e is the plain training NLL; the first term uses 2/(delta r_min)".into()
    } else {
        "train_e is the 1/r-weighted training NLL".into()
    });
    emit(&rep, a.out.as_deref(), &format!("bound = {bound}"))?;
    Ok(EXIT_OK)
}

fn cmd_scorer_check(a: &ScorerCheckArgs, command: String) -> CliResult<u8> {
    if a.vocab == 0 {
        return Err(Failure::usage("--vocab must be positive"));
    }
    let mut cmd = std::process::Command::new(&a.cmd[0]);
    cmd.args(&a.cmd[1..]);
    let scorer = ExternalScorer::spawn(cmd, a.vocab, Duration::from_millis(a.timeout_ms))?;
    let info = Info::new(a.info.iter().copied());
    let prompt = Prompt {
        id: 0,
        tokens: a.prompt.clone(),
    };
    let last = (a.vocab - 1) as u32;
    let prefixes: Vec<Vec<u32>> = vec![vec![], vec![0], vec![last], vec![0, last], vec![]];
    let mut probes = Vec::new();
    let mut error = None;
    for p in &prefixes {
        match scorer.query(&info, &prompt, p) {
            Ok(probs) => probes.push(json!({ "prefix": p, "probs": probs })),
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    let exchanges = scorer.exchanges();
    if error.is_none() && exchanges != prefixes.len() - 1 {
        error = Some(format!("expected {} exchanges with caching, saw {exchanges}", prefixes.len() - 1));
    }
    let ok = error.is_none();
    let inputs = json!({ "vocab": a.vocab, "info": a.info, "prompt": a.prompt, "command": a.cmd, "timeout_ms": a.timeout_ms });
    let result = json!({ "ok": ok, "exchanges": exchanges, "probes": probes, "error": error });
    let rep = Report::new(command, inputs, result);
    let summary = match &error {
        None => format!("ok ({exchanges} exchanges)"),
        Some(e) => format!("protocol failure: {e}"),
    };
    emit(&rep, a.out.as_deref(), &summary)?;
    if !ok {
        eprintln!("error: {summary}");
    }
    Ok(if ok { EXIT_OK } else { EXIT_NOT_CERTIFIED })
}

fn run(cli: &Cli, command: String) -> CliResult<u8> {
    match &cli.command {
        Command::Evaluate(a) => cmd_evaluate(a, command),
        Command::Certify(a) => cmd_certify(a, command),
        Command::Plan(a) => cmd_plan(a, command),
        Command::Simulate(a) => cmd_simulate(a, command),
        Command::Bound(a) => cmd_bound(a, command),
        Command::ScorerCheck(a) => cmd_scorer_check(a, command),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = Cli::parse_from(&args);
    match run(&cli, canonical_command(&args)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
