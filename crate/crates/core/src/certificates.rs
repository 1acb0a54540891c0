//! δ-creativity certificates: the sample-size tests, their inversions, the
//! generalization-gap providers `Q(t)` and the training-time bound.
//!
//! Bit-valued metrics (E0, E2) certify when
//! `E < δ` and `n ≥ ln(1/t) / (2 (δ - E)²)`.
//! NLL-valued metrics (E1, E3) with a sequence NLL bound `M` and weight floor
//! `r_min` certify when `E < δ` and `n ≥ M² ln(1/t) / (2 r_min² (δ - E)²)`.

use serde::{Deserialize, Serialize};

use crate::metrics::{MetricKind, MetricValue};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CertificateKind {
    #[serde(rename = "thm1")]
    Theorem1,
    #[serde(rename = "thm2")]
    Theorem2,
    #[serde(rename = "cor2")]
    Corollary2,
    #[serde(rename = "cor3")]
    Corollary3,
}

impl CertificateKind {
    pub const ALL: [CertificateKind; 4] = [
        CertificateKind::Theorem1,
        CertificateKind::Theorem2,
        CertificateKind::Corollary2,
        CertificateKind::Corollary3,
    ];

    /// The metric this certificate consumes.
    pub fn metric(self) -> MetricKind {
        match self {
            CertificateKind::Theorem1 => MetricKind::E0,
            CertificateKind::Theorem2 => MetricKind::E1,
            CertificateKind::Corollary2 => MetricKind::E2,
            CertificateKind::Corollary3 => MetricKind::E3,
        }
    }

    /// Whether `M` and `r_min` are required.
    pub fn needs_bounds(self) -> bool {
        matches!(self, CertificateKind::Theorem2 | CertificateKind::Corollary3)
    }

    /// Whether samples carry prompts.
    pub fn prompted(self) -> bool {
        matches!(self, CertificateKind::Corollary2 | CertificateKind::Corollary3)
    }

    pub fn short_name(self) -> &'static str {
        match self {
            CertificateKind::Theorem1 => "thm1",
            CertificateKind::Theorem2 => "thm2",
            CertificateKind::Corollary2 => "cor2",
            CertificateKind::Corollary3 => "cor3",
        }
    }
}

impl std::str::FromStr for CertificateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown certificate kind '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult<S> {
    pub kind: CertificateKind,
    pub certified: bool,
    pub n: usize,
    /// `None` when `E ≥ δ` (no n suffices) or the threshold overflows.
    pub required_n: Option<u64>,
    /// `n - required_n`.
    pub margin: Option<i128>,
    pub threshold: Option<S>,
    pub statement: String,
}

fn check_unit_open<S: Scalar>(name: &str, v: S) -> Result<()> {
    if v > S::zero() && v < S::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} must lie in (0, 1)")))
    }
}

fn check_confidence<S: Scalar>(t: S) -> Result<()> {
    if t > S::zero() && t <= S::one() {
        Ok(())
    } else {
        Err(Error::domain(format!("t = {t} must lie in (0, 1]")))
    }
}

fn check_positive<S: Scalar>(name: &str, v: S) -> Result<()> {
    if v > S::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} = {v} must be positive and finite")))
    }
}

/// `ratio² ln(1/t) / (2 (δ - E)²)`; `None` when `E ≥ δ`.
fn threshold<S: Scalar>(e: S, delta: S, t: S, ratio: S) -> Option<S> {
    if !(e < delta) {
        return None;
    }
    let gap = delta - e;
    Some(ratio * ratio * (S::one() / t).ln() / (S::lit(2.0) * gap * gap))
}

/// Smallest integer strictly clear of the threshold by the arithmetic
/// tolerance, at least 1.
fn ceil_threshold<S: Scalar>(thr: S) -> Option<u64> {
    let padded = thr + S::lit(S::CERTIFICATE_TOLERANCE) * thr.max(S::one());
    let n = padded.ceil().max(S::one());
    if !n.is_finite() || n.as_f64() >= u64::MAX as f64 {
        return None;
    }
    Some(n.as_f64() as u64)
}

fn bound_ratio<S: Scalar>(m: Option<S>, r_min: Option<S>) -> Result<S> {
    match (m, r_min) {
        (None, None) => Ok(S::one()),
        (Some(m), Some(r)) => {
            check_positive("M", m)?;
            check_positive("r_min", r)?;
            Ok(m / r)
        }
        _ => Err(Error::domain("M and r_min must be given together")),
    }
}

fn statement(kind: CertificateKind, delta: f64, t: f64, certified: bool) -> String {
    let law = if kind.prompted() { "D_{U,C}" } else { "D_C" };
    let verdict = if certified { "is" } else { "is not certified as" };
    format!(
        "q {verdict} {delta}-creative w.r.t. L under {law} with confidence {}",
        1.0 - t
    )
}

/// The generic decision procedure behind all four certificates.
pub fn certify<S: Scalar>(
    kind: CertificateKind,
    metric: &MetricValue<S>,
    delta: S,
    t: S,
    m: Option<S>,
    r_min: Option<S>,
) -> Result<CertificateResult<S>> {
    check_unit_open("delta", delta)?;
    check_unit_open("t", t)?;
    if metric.kind != kind.metric() {
        return Err(Error::domain(format!(
            "{} needs an {:?} metric, got {:?}",
            kind.short_name(),
            kind.metric(),
            metric.kind
        )));
    }
    if metric.n == 0 {
        return Err(Error::domain("metric has n = 0"));
    }
    if metric.value.is_nan() {
        return Err(Error::domain("metric value is NaN"));
    }
    let ratio = if kind.needs_bounds() {
        let (m, r) = match (m, r_min) {
            (Some(m), Some(r)) => (m, r),
            _ => return Err(Error::domain(format!("{} requires M and r_min", kind.short_name()))),
        };
        let ratio = bound_ratio(Some(m), Some(r))?;
        if let Some(obs) = metric.m_observed {
            if obs > m {
                return Err(Error::BoundViolation {
                    declared: m.as_f64(),
                    observed: obs.as_f64(),
                });
            }
        }
        if let Some(used) = metric.r_min_used {
            if used < r {
                return Err(Error::WeightViolation {
                    declared: r.as_f64(),
                    observed: used.as_f64(),
                });
            }
        }
        ratio
    } else {
        S::one()
    };
    let thr = threshold(metric.value, delta, t, ratio);
    let required_n = thr.and_then(ceil_threshold);
    let certified = match required_n {
        Some(req) => metric.value < delta && metric.n as u64 >= req,
        None => false,
    };
    Ok(CertificateResult {
        kind,
        certified,
        n: metric.n,
        required_n,
        margin: required_n.map(|req| metric.n as i128 - req as i128),
        threshold: thr,
        statement: statement(kind, delta.as_f64(), t.as_f64(), certified),
    })
}

pub fn certify_theorem1<S: Scalar>(e0: &MetricValue<S>, delta: S, t: S) -> Result<CertificateResult<S>> {
    certify(CertificateKind::Theorem1, e0, delta, t, None, None)
}

pub fn certify_corollary2<S: Scalar>(e2: &MetricValue<S>, delta: S, t: S) -> Result<CertificateResult<S>> {
    certify(CertificateKind::Corollary2, e2, delta, t, None, None)
}

pub fn certify_theorem2<S: Scalar>(
    e1: &MetricValue<S>,
    delta: S,
    t: S,
    m: S,
    r_min: S,
) -> Result<CertificateResult<S>> {
    certify(CertificateKind::Theorem2, e1, delta, t, Some(m), Some(r_min))
}

pub fn certify_corollary3<S: Scalar>(
    e3: &MetricValue<S>,
    delta: S,
    t: S,
    m: S,
    r_min: S,
) -> Result<CertificateResult<S>> {
    certify(CertificateKind::Corollary3, e3, delta, t, Some(m), Some(r_min))
}

/// Smallest n for which the certificate fires at metric value `e`.
/// `M` and `r_min` are given together or not at all.
pub fn min_n<S: Scalar>(e: S, delta: S, t: S, m: Option<S>, r_min: Option<S>) -> Result<u64> {
    check_unit_open("delta", delta)?;
    check_unit_open("t", t)?;
    if e.is_nan() || e < S::zero() {
        return Err(Error::domain(format!("metric value {e} must be >= 0")));
    }
    let ratio = bound_ratio(m, r_min)?;
    let thr = threshold(e, delta, t, ratio).ok_or(Error::Infeasible {
        value: e.as_f64(),
        delta: delta.as_f64(),
    })?;
    ceil_threshold(thr).ok_or_else(|| Error::domain(format!("required n {thr} does not fit in 64 bits")))
}

pub fn min_n_theorem1<S: Scalar>(e0: S, delta: S, t: S) -> Result<u64> {
    min_n(e0, delta, t, None, None)
}

pub fn min_n_theorem2<S: Scalar>(e1: S, delta: S, t: S, m: S, r_min: S) -> Result<u64> {
    min_n(e1, delta, t, Some(m), Some(r_min))
}

/// `δ* = E + (M / r_min) sqrt(ln(1/t) / (2n))`, the infimum of certifiable δ
/// at sample size n (the set of certifiable δ is open at δ*).
pub fn achievable_delta<S: Scalar>(e: S, n: u64, t: S, m: Option<S>, r_min: Option<S>) -> Result<S> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    check_unit_open("t", t)?;
    if !e.is_finite() || e < S::zero() {
        return Err(Error::domain(format!("metric value {e} must be finite and >= 0")));
    }
    let ratio = bound_ratio(m, r_min)?;
    Ok(e + ratio * ((S::one() / t).ln() / (S::lit(2.0) * S::lit(n as f64))).sqrt())
}

/// `Q(t) = ln(|Q| / t)` for a finite model class.
pub fn q_finite_class<S: Scalar>(class_size: u64, t: S) -> Result<S> {
    if class_size == 0 {
        return Err(Error::domain("class size must be >= 1"));
    }
    check_confidence(t)?;
    Ok((S::lit(class_size as f64) / t).ln())
}

/// `Q(t) = B² ρ Π_j M_F(j)² + ln(1/t)`; one Frobenius bound per layer.
pub fn q_norm_based<S: Scalar>(b: S, rho: usize, frobenius_bounds: &[S], t: S) -> Result<S> {
    check_positive("B", b)?;
    if rho == 0 {
        return Err(Error::domain("depth rho must be >= 1"));
    }
    if frobenius_bounds.len() != rho {
        return Err(Error::Dimension {
            left: frobenius_bounds.len(),
            right: rho,
        });
    }
    for &f in frobenius_bounds {
        check_positive("Frobenius bound", f)?;
    }
    check_confidence(t)?;
    let prod = frobenius_bounds.iter().fold(S::one(), |acc, &f| acc * f * f);
    Ok(b * b * S::lit(rho as f64) * prod + (S::one() / t).ln())
}

/// `Q(t) = c² + N + ln(1/t)` with a caller-supplied covering number `N`.
pub fn q_robustness<S: Scalar>(lipschitz_c: S, covering_number: S, t: S) -> Result<S> {
    if !(lipschitz_c >= S::zero() && lipschitz_c.is_finite()) {
        return Err(Error::domain(format!("c = {lipschitz_c} must be >= 0")));
    }
    if !(covering_number >= S::zero() && covering_number.is_finite()) {
        return Err(Error::domain(format!("covering number {covering_number} must be >= 0")));
    }
    check_confidence(t)?;
    Ok(lipschitz_c * lipschitz_c + covering_number + (S::one() / t).ln())
}

/// `Q(t) = min_j (I(X; Z_j | Y) + I(S; Θ_j)) + ln(1/t)`.
pub fn q_info_theoretic<S: Scalar>(mi_pairs: &[(S, S)], t: S) -> Result<S> {
    if mi_pairs.is_empty() {
        return Err(Error::domain("no mutual-information pairs"));
    }
    check_confidence(t)?;
    let mut best = S::infinity();
    for &(a, b) in mi_pairs {
        if !(a >= S::zero() && b >= S::zero()) || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain(format!("mutual information ({a}, {b}) must be finite and >= 0")));
        }
        best = best.min(a + b);
    }
    Ok(best + (S::one() / t).ln())
}

/// A generalization-gap complexity `Q(t)` with its scalar inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QProvider {
    FiniteClass {
        class_size: u64,
    },
    NormBased {
        b: f64,
        rho: usize,
        frobenius_bounds: Vec<f64>,
    },
    Robustness {
        lipschitz_c: f64,
        covering_number: f64,
    },
    InfoTheoretic {
        mi_pairs: Vec<(f64, f64)>,
    },
}

impl QProvider {
    pub fn evaluate<S: Scalar>(&self, t: S) -> Result<S> {
        match self {
            QProvider::FiniteClass { class_size } => q_finite_class(*class_size, t),
            QProvider::NormBased {
                b,
                rho,
                frobenius_bounds,
            } => {
                let bounds: Vec<S> = frobenius_bounds.iter().map(|&f| S::lit(f)).collect();
                q_norm_based(S::lit(*b), *rho, &bounds, t)
            }
            QProvider::Robustness {
                lipschitz_c,
                covering_number,
            } => q_robustness(S::lit(*lipschitz_c), S::lit(*covering_number), t),
            QProvider::InfoTheoretic { mi_pairs } => {
                let pairs: Vec<(S, S)> = mi_pairs.iter().map(|&(a, b)| (S::lit(a), S::lit(b))).collect();
                q_info_theoretic(&pairs, t)
            }
        }
    }
}

/// Training-time bound on the evaluator loss at a fresh draw:
/// `2δ⁻¹·E + gap_constant·sqrt(δ⁻² Q(δ/2) / n)`.
///
/// With `weighted = true`, `train_e` is the `1/r`-weighted training NLL.
/// Otherwise it is the unweighted training NLL and the first term becomes
/// `2 / (δ r_min) · train_e`.
pub fn corollary4_bound<S: Scalar>(
    train_e: S,
    n: u64,
    delta: S,
    q: &QProvider,
    gap_constant: S,
    weighted: bool,
    r_min: Option<S>,
) -> Result<S> {
    if n == 0 {
        return Err(Error::domain("n must be >= 1"));
    }
    check_unit_open("delta", delta)?;
    if train_e.is_nan() || train_e < S::zero() {
        return Err(Error::domain(format!("training loss {train_e} must be >= 0")));
    }
    check_positive("gap constant", gap_constant)?;
    let two = S::lit(2.0);
    let first = if weighted {
        two / delta * train_e
    } else {
        let r = r_min.ok_or_else(|| Error::domain("unweighted bound requires r_min"))?;
        check_positive("r_min", r)?;
        two / (delta * r) * train_e
    };
    let qv = q.evaluate(delta / two)?;
    Ok(first + gap_constant * (qv / (delta * delta * S::lit(n as f64))).sqrt())
}

/// Gap constant that makes [`corollary4_bound`] with a finite class the
/// exact union-bound gap `2δ⁻¹ (M / r_min) sqrt(ln(|Q| / (δ/2)) / (2n))`.
pub fn finite_class_gap_constant<S: Scalar>(m: S, r_min: S) -> Result<S> {
    check_positive("M", m)?;
    check_positive("r_min", r_min)?;
    Ok(S::SQRT_2() * m / r_min)
}
