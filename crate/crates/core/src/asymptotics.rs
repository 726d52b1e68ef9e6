//! Desk-scale experiments on the large-`n` behaviour: the limit law of
//! `T/E[T]`, the slowdown of topheavy vectors once `c2 ≫ 1/ln² n`, and the
//! shortness of the early phase.
//!
//! The bands used to judge these runs are finite-`n` calibrations of limit
//! statements, not exact properties.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::distributions::{topheavy, ProbabilityVector};
use crate::dynamics::{k_one, k_star};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::report::{fmt_f64, Csv};
use crate::simulate::{batch_runs, delta_audit, summarize, SimConfig, SummaryStats};

/// Default truncation of the limit series.
pub const DEFAULT_TRUNCATION: usize = 1000;
/// Draws per random stream when sampling the limit law in bulk.
const LIMIT_CHUNK: usize = 4096;
/// Offset separating limit-law streams from simulation streams.
const LIMIT_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// `Σ_{k=2}^{K} 2/(k(k-1)) Y_k + 2/K` with unit exponentials `Y_k`; the
/// constant is the mean of the discarded tail.
pub fn kingman_limit_sample<R: Rng + ?Sized>(rng: &mut R, truncation: usize) -> f64 {
    let mut sum = 2.0 / truncation as f64;
    for k in 2..=truncation {
        let kf = k as f64;
        let y: f64 = rng.sample(Exp1);
        sum += 2.0 / (kf * (kf - 1.0)) * y;
    }
    sum
}

/// `count` limit draws, reproducible for any thread count.
pub fn kingman_batch(seed: u64, count: usize, truncation: usize, exec: Execution) -> Vec<f64> {
    par::map_chunks(exec, count, LIMIT_CHUNK, |range| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ LIMIT_SEED_SALT);
        rng.set_stream((range.start / LIMIT_CHUNK) as u64);
        range
            .map(|_| kingman_limit_sample(&mut rng, truncation))
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

/// Variance of the truncated limit variable, `Σ_{k=2}^{K} 4/(k(k-1))²`.
pub fn kingman_variance(truncation: usize) -> f64 {
    (2..=truncation)
        .map(|k| {
            let c = 2.0 / (k as f64 * (k as f64 - 1.0));
            c * c
        })
        .sum()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `λ(n)` in the rule `c2(n) = λ(n)/ln² n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `λ(n) = ln n`.
    LnN,
    /// `λ(n) = (ln n)^a`.
    LnPower { a: f64 },
    Constant { value: f64 },
}

impl LambdaRule {
    pub fn lambda(&self, n: usize) -> f64 {
        let l = (n as f64).ln();
        match *self {
            LambdaRule::LnN => l,
            LambdaRule::LnPower { a } => l.powf(a),
            LambdaRule::Constant { value } => value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum C2Rule {
    Fixed { c2: f64 },
    Lambda { lambda: LambdaRule },
}

impl C2Rule {
    pub fn c2(&self, n: usize) -> f64 {
        match self {
            C2Rule::Fixed { c2 } => *c2,
            C2Rule::Lambda { lambda } => lambda.lambda(n) / (n as f64).ln().powi(2),
        }
    }

    pub fn lambda(&self, n: usize) -> Option<f64> {
        match self {
            C2Rule::Fixed { .. } => None,
            C2Rule::Lambda { lambda } => Some(lambda.lambda(n)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Limit,
    Threshold,
    EarlyPhase,
}

fn default_truncation() -> usize {
    DEFAULT_TRUNCATION
}

fn default_epsilon() -> f64 {
    0.2
}

fn default_k_hat_exponent() -> f64 {
    0.75
}

/// Declarative description of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub ns: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c2_rule: Option<C2Rule>,
    pub replicates: usize,
    /// Replicates for the uniform control of the threshold experiment;
    /// defaults to `replicates`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_replicates: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// `k̂ = n^a`; its passage time is recorded in the threshold experiment.
    #[serde(default = "default_k_hat_exponent")]
    pub k_hat_exponent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truncation < 2 {
            return Err(Error::Precondition("truncation K must be >= 2".into()));
        }
        if self.ns.is_empty() || self.ns.iter().any(|&n| n < 2) {
            return Err(Error::Precondition("ns must list box counts >= 2".into()));
        }
        let distributional = matches!(self.kind, ExperimentKind::Limit | ExperimentKind::Threshold);
        if distributional && self.replicates < 100 {
            return Err(Error::Precondition(format!(
                "distributional experiments need >= 100 replicates, got {}",
                self.replicates
            )));
        }
        if self.replicates == 0 {
            return Err(Error::Precondition("replicates must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.25) {
            return Err(Error::OutOfRange {
                name: "epsilon",
                value: self.epsilon,
                lo: 0.0,
                hi: 0.25,
            });
        }
        if self.kind == ExperimentKind::Threshold && self.c2_rule.is_none() {
            return Err(Error::Precondition("threshold experiment needs a c2 rule".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitLawResult {
    pub n: usize,
    pub replicates: usize,
    pub t: SummaryStats,
    /// `mean(T) / (2n)`.
    pub mean_ratio: f64,
    /// KS distance between `T/mean(T)` and half the limit variable.
    pub ks_d: f64,
}

/// Uniform `p` on `n` boxes: compares `T/mean(T)` with the limit law.
///
/// The limit variable has mean 2, so `T/mean(T)` (mean 1) is compared with
/// draws divided by 2.
pub fn limit_law_experiment(
    n: usize,
    replicates: usize,
    seed: u64,
    truncation: usize,
    exec: Execution,
) -> Result<LimitLawResult> {
    let config = SimConfig::new(ProbabilityVector::uniform(n)?)
        .with_replicates(replicates)
        .with_seed(seed);
    let runs = batch_runs(&config, exec)?;
    let summary = summarize(&config, &runs);
    let mean = summary.t.mean;
    let normalized: Vec<f64> = runs.iter().map(|r| r.t as f64 / mean).collect();
    let limit: Vec<f64> = kingman_batch(seed, replicates, truncation, exec)
        .into_iter()
        .map(|x| x / 2.0)
        .collect();
    Ok(LimitLawResult {
        n,
        replicates,
        t: summary.t,
        mean_ratio: mean / (2.0 * n as f64),
        ks_d: ks_two_sample(&normalized, &limit),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub n: usize,
    pub c2: f64,
    pub lambda: Option<f64>,
    pub topheavy: SummaryStats,
    /// `E[T] c2` for the topheavy vector.
    pub topheavy_scaled: f64,
    /// Fraction of replicates with `T >= c2⁻¹ √λ / 20`.
    pub slow_fraction: f64,
    /// Mean passage time to `k̂ = n^a` for the topheavy vector.
    pub tau_k_hat: f64,
    pub uniform: SummaryStats,
    /// `E[T] / n` for uniform `p`, i.e. `E[T] c2` at `c2 = 1/n`.
    pub uniform_scaled: f64,
}

fn stream_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x2545_f491_4f6c_dd1d))
}

pub fn threshold_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ThresholdRow>> {
    config.validate()?;
    let rule = config.c2_rule.expect("validated");
    let control = config.control_replicates.unwrap_or(config.replicates);
    config
        .ns
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let c2 = rule.c2(n);
            if !(c2 > 0.0 && c2 <= 1.0) {
                return Err(Error::OutOfRange {
                    name: "c2",
                    value: c2,
                    lo: 1.0 / n as f64,
                    hi: 1.0,
                });
            }
            let lambda = rule.lambda(n);
            let k_hat = (n as f64).powf(config.k_hat_exponent).max(1.0);
            let seed = stream_seed(config.seed, 2 * i);
            let th_cfg = SimConfig::new(topheavy(n, c2)?)
                .with_replicates(config.replicates)
                .with_seed(seed)
                .with_thresholds(vec![k_hat]);
            let runs = batch_runs(&th_cfg, exec)?;
            let summary = summarize(&th_cfg, &runs);
            let slow_at = lambda.unwrap_or(1.0).sqrt() / (20.0 * c2);
            let slow = runs.iter().filter(|r| r.t as f64 >= slow_at).count();
            let uni_cfg = SimConfig::new(ProbabilityVector::uniform(n)?)
                .with_replicates(control)
                .with_seed(stream_seed(config.seed, 2 * i + 1));
            let uniform = summarize(&uni_cfg, &batch_runs(&uni_cfg, exec)?).t;
            Ok(ThresholdRow {
                n,
                c2,
                lambda,
                topheavy: summary.t,
                topheavy_scaled: summary.t.mean * c2,
                slow_fraction: slow as f64 / runs.len() as f64,
                tau_k_hat: summary.passages[0].stats.mean,
                uniform,
                uniform_scaled: uniform.mean / n as f64,
            })
        })
        .collect()
}

pub fn threshold_csv(rows: &[ThresholdRow]) -> String {
    let mut csv = Csv::new(&[
        "n",
        "c2",
        "lambda",
        "topheavy_mean_T",
        "topheavy_stderr",
        "topheavy_ET_c2",
        "slow_fraction",
        "tau_k_hat",
        "uniform_mean_T",
        "uniform_stderr",
        "uniform_ET_c2",
    ]);
    for r in rows {
        csv.row([
            r.n.to_string(),
            fmt_f64(r.c2),
            r.lambda.map_or_else(String::new, fmt_f64),
            fmt_f64(r.topheavy.mean),
            r.topheavy.stderr.map_or_else(String::new, fmt_f64),
            fmt_f64(r.topheavy_scaled),
            fmt_f64(r.slow_fraction),
            fmt_f64(r.tau_k_hat),
            fmt_f64(r.uniform.mean),
            r.uniform.stderr.map_or_else(String::new, fmt_f64),
            fmt_f64(r.uniform_scaled),
        ]);
    }
    csv.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EarlyPhaseResult {
    pub n: usize,
    pub epsilon: f64,
    pub c2: f64,
    pub k_star: f64,
    pub k_one: f64,
    pub mean_tau_k_star: f64,
    /// `5 c2^{-1/2} ln n`.
    pub bound: f64,
    /// `E[τ(k*)] c2`.
    pub ratio_to_c2inv: f64,
    /// `E[τ(k₁) - τ(k*)] c2`.
    pub middle_ratio: f64,
    /// Fraction of replicates with `τ(k*) <= 5 c2^{-1/2} ln n`.
    pub within_bound: f64,
}

/// Uniform `p`: passage times to `k*` and `k₁`.
pub fn early_phase_experiment(
    n: usize,
    eps: f64,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<EarlyPhaseResult> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: eps,
            lo: 0.0,
            hi: 0.25,
        });
    }
    let p = ProbabilityVector::uniform(n)?;
    let c2 = 1.0 / n as f64;
    let ks = k_star(c2, n, eps);
    let k1 = k_one(c2, n, eps);
    let config = SimConfig::new(p)
        .with_replicates(replicates)
        .with_seed(seed)
        .with_thresholds(vec![ks.max(1.0), k1.max(1.0)]);
    let runs = batch_runs(&config, exec)?;
    let summary = summarize(&config, &runs);
    let bound = 5.0 / c2.sqrt() * (n as f64).ln();
    let middle: f64 = runs
        .iter()
        .map(|r| (r.passages[1] - r.passages[0]) as f64)
        .sum::<f64>()
        / runs.len() as f64;
    let within = runs.iter().filter(|r| r.passages[0] as f64 <= bound).count();
    let mean_tau = summary.passages[0].stats.mean;
    Ok(EarlyPhaseResult {
        n,
        epsilon: eps,
        c2,
        k_star: ks,
        k_one: k1,
        mean_tau_k_star: mean_tau,
        bound,
        ratio_to_c2inv: mean_tau * c2,
        middle_ratio: middle * c2,
        within_bound: within as f64 / runs.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaAuditResult {
    pub n: usize,
    pub k_star: f64,
    pub replicates: usize,
    pub total_violations: usize,
    pub replicates_with_violation: usize,
}

/// Counts envelope violations above `k*` over trajectory-recorded replicates.
pub fn delta_audit_experiment(
    p: &ProbabilityVector,
    eps: f64,
    replicates: usize,
    seed: u64,
    exec: Execution,
) -> Result<DeltaAuditResult> {
    let n = p.n();
    let ks = k_star(p.moments().c2, n, eps);
    let config = SimConfig::new(p.clone())
        .with_replicates(replicates)
        .with_seed(seed)
        .with_trajectory(true);
    let runs = batch_runs(&config, exec)?;
    let counts: Vec<usize> = runs
        .iter()
        .map(|r| delta_audit(r, p, ks))
        .collect::<Result<_>>()?;
    Ok(DeltaAuditResult {
        n,
        k_star: ks,
        replicates,
        total_violations: counts.iter().sum(),
        replicates_with_violation: counts.iter().filter(|&&c| c > 0).count(),
    })
}

/// One banded check inside a [`Verdict`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn band(name: String, value: f64, lo: Option<f64>, hi: Option<f64>) -> Self {
        let pass = lo.is_none_or(|l| value >= l) && hi.is_none_or(|h| value <= h);
        Self {
            name,
            value,
            lo,
            hi,
            pass,
        }
    }

    fn flag(name: String, pass: bool) -> Self {
        Self {
            name,
            value: f64::from(u8::from(pass)),
            lo: None,
            hi: None,
            pass,
        }
    }
}

/// Pass/fail summary of an experiment. The bands are desk-scale
/// calibrations of limit statements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub experiment: &'static str,
    pub calibration: &'static str,
    pub pass: bool,
    pub checks: Vec<Check>,
}

const CALIBRATION: &str = "desk-scale bands for asymptotic statements; not exact properties";

impl Verdict {
    fn new(experiment: &'static str, checks: Vec<Check>) -> Self {
        Self {
            experiment,
            calibration: CALIBRATION,
            pass: checks.iter().all(|c| c.pass),
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// `mean(T)/(2n)` in `[0.90, 1.02]` and `D <= 0.10` per row, and `D`
/// decreasing along the rows.
pub fn limit_verdict(rows: &[LimitLawResult]) -> Verdict {
    let mut checks = Vec::new();
    for r in rows {
        checks.push(Check::band(format!("mean_ratio n={}", r.n), r.mean_ratio, Some(0.90), Some(1.02)));
        checks.push(Check::band(format!("ks_d n={}", r.n), r.ks_d, None, Some(0.10)));
    }
    if rows.len() > 1 {
        let decreasing = rows.windows(2).all(|w| w[1].ks_d < w[0].ks_d);
        checks.push(Check::flag("ks_d decreasing in n".into(), decreasing));
    }
    Verdict::new("limit", checks)
}

/// Topheavy `E[T] c2` strictly increasing, uniform control in `[1.8, 2.05]`,
/// slow fraction at the largest `n` at least 0.99.
pub fn threshold_verdict(rows: &[ThresholdRow]) -> Verdict {
    let mut checks = vec![Check::flag(
        "topheavy E[T]c2 increasing in n".into(),
        rows.windows(2).all(|w| w[1].topheavy_scaled > w[0].topheavy_scaled),
    )];
    for r in rows {
        checks.push(Check::band(format!("uniform E[T]c2 n={}", r.n), r.uniform_scaled, Some(1.8), Some(2.05)));
    }
    if let Some(last) = rows.last() {
        checks.push(Check::band(format!("slow_fraction n={}", last.n), last.slow_fraction, Some(0.99), None));
    }
    Verdict::new("threshold", checks)
}

/// `E[τ(k*)] c2 <= 0.1` and `E[τ(k₁) - τ(k*)] c2 <= 0.2`.
pub fn early_phase_verdict(rows: &[EarlyPhaseResult]) -> Verdict {
    let mut checks = Vec::new();
    for r in rows {
        checks.push(Check::band(format!("tau_k_star c2 n={}", r.n), r.ratio_to_c2inv, None, Some(0.1)));
        checks.push(Check::band(format!("middle c2 n={}", r.n), r.middle_ratio, None, Some(0.2)));
        checks.push(Check::band(format!("tau_k_star / bound n={}", r.n), r.mean_tau_k_star / r.bound, None, Some(1.0)));
    }
    Verdict::new("early_phase", checks)
}

pub fn limit_csv(rows: &[LimitLawResult]) -> String {
    let mut csv = Csv::new(&["n", "replicates", "mean_T", "stderr_T", "mean_ratio", "ks_d"]);
    for r in rows {
        csv.row([
            r.n.to_string(),
            r.replicates.to_string(),
            fmt_f64(r.t.mean),
            r.t.stderr.map_or_else(String::new, fmt_f64),
            fmt_f64(r.mean_ratio),
            fmt_f64(r.ks_d),
        ]);
    }
    csv.finish()
}

pub fn early_phase_csv(rows: &[EarlyPhaseResult]) -> String {
    let mut csv = Csv::new(&[
        "n",
        "epsilon",
        "k_star",
        "k_one",
        "mean_tau_k_star",
        "bound",
        "ratio_to_c2inv",
        "middle_ratio",
        "within_bound",
    ]);
    for r in rows {
        csv.row([
            r.n.to_string(),
            fmt_f64(r.epsilon),
            fmt_f64(r.k_star),
            fmt_f64(r.k_one),
            fmt_f64(r.mean_tau_k_star),
            fmt_f64(r.bound),
            fmt_f64(r.ratio_to_c2inv),
            fmt_f64(r.middle_ratio),
            fmt_f64(r.within_bound),
        ]);
    }
    csv.finish()
}

/// Runs `config` for every `n`, returning the per-`n` CSV and the verdict.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<(String, Verdict)> {
    config.validate()?;
    match config.kind {
        ExperimentKind::Limit => {
            let rows = config
                .ns
                .iter()
                .map(|&n| limit_law_experiment(n, config.replicates, config.seed, config.truncation, exec))
                .collect::<Result<Vec<_>>>()?;
            Ok((limit_csv(&rows), limit_verdict(&rows)))
        }
        ExperimentKind::Threshold => {
            let rows = threshold_experiment(config, exec)?;
            Ok((threshold_csv(&rows), threshold_verdict(&rows)))
        }
        ExperimentKind::EarlyPhase => {
            let rows = config
                .ns
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    early_phase_experiment(n, config.epsilon, config.replicates, stream_seed(config.seed, i), exec)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((early_phase_csv(&rows), early_phase_verdict(&rows)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn kingman_k2_is_one_scaled_exponential_plus_one() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        let y: f64 = b.sample(Exp1);
        assert_abs_diff_eq!(kingman_limit_sample(&mut a, 2), 1.0 + y, epsilon = 1e-15);
        assert_abs_diff_eq!(kingman_variance(2), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn kingman_mean_is_two() {
        let draws = kingman_batch(5, 100_000, 200, Execution::Parallel);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = kingman_variance(200).sqrt() / (draws.len() as f64).sqrt();
        assert!((mean - 2.0).abs() < 4.0 * sd, "{mean}");
    }

    #[test]
    fn kingman_batch_is_deterministic() {
        let a = kingman_batch(3, 10_000, 50, Execution::Sequential);
        let b = kingman_batch(3, 10_000, 50, Execution::Parallel);
        assert_eq!(a, b);
    }

    #[test]
    fn ks_basics() {
        assert_eq!(ks_two_sample(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]), 0.0);
        assert_eq!(ks_two_sample(&[1.0, 2.0], &[3.0, 4.0]), 1.0);
        assert_abs_diff_eq!(ks_two_sample(&[1.0, 2.0, 3.0, 4.0], &[2.5]), 0.5, epsilon = 1e-15);
        // Ties across samples are stepped together.
        assert_eq!(ks_two_sample(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0]), 1.0 / 3.0);
    }

    #[test]
    fn ks_split_half_null() {
        let draws = kingman_batch(9, 20_000, 200, Execution::Parallel);
        let (a, b) = draws.split_at(10_000);
        assert!(ks_two_sample(a, b) <= 0.03);
    }

    #[test]
    fn lambda_rules() {
        let rule = C2Rule::Lambda {
            lambda: LambdaRule::LnN,
        };
        let n = 1000;
        assert_abs_diff_eq!(rule.c2(n), 1.0 / (n as f64).ln(), epsilon = 1e-15);
        let json = r#"{"kind":"lambda","lambda":{"rule":"ln_n"}}"#;
        assert_eq!(serde_json::from_str::<C2Rule>(json).unwrap(), rule);
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig {
            kind: ExperimentKind::Limit,
            ns: vec![100],
            c2_rule: None,
            replicates: 100,
            control_replicates: None,
            seed: 1,
            truncation: 1000,
            epsilon: 0.2,
            k_hat_exponent: 0.75,
            output: None,
        };
        assert!(cfg.validate().is_ok());
        cfg.replicates = 99;
        assert!(cfg.validate().is_err());
        cfg.replicates = 100;
        cfg.truncation = 1;
        assert!(cfg.validate().is_err());
        cfg.truncation = 2;
        cfg.kind = ExperimentKind::Threshold;
        assert!(cfg.validate().is_err());
        let parsed: ExperimentConfig =
            serde_json::from_str(r#"{"kind":"early_phase","ns":[50],"replicates":10,"seed":3}"#)
                .unwrap();
        assert_eq!(parsed.truncation, DEFAULT_TRUNCATION);
        assert!(parsed.validate().is_ok());
    }

    #[test]
    fn early_phase_trivial_when_k_star_exceeds_n() {
        // ln 2 < 1, so k* > n and the passage is immediate.
        let res = early_phase_experiment(2, 0.2, 50, 1, Execution::Sequential).unwrap();
        assert!(res.k_star >= 2.0);
        assert_eq!(res.mean_tau_k_star, 0.0);
    }

    #[test]
    fn small_limit_run() {
        let res = limit_law_experiment(50, 500, 4, 200, Execution::Parallel).unwrap();
        assert!(res.mean_ratio > 0.8 && res.mean_ratio < 1.05);
        assert!(res.ks_d < 0.2);
    }

    #[test]
    fn small_threshold_run() {
        let cfg = ExperimentConfig {
            kind: ExperimentKind::Threshold,
            ns: vec![50, 200],
            c2_rule: Some(C2Rule::Lambda {
                lambda: LambdaRule::LnN,
            }),
            replicates: 200,
            control_replicates: None,
            seed: 2,
            truncation: 1000,
            epsilon: 0.2,
            k_hat_exponent: 0.75,
            output: None,
        };
        let rows = threshold_experiment(&cfg, Execution::Parallel).unwrap();
        assert_eq!(rows.len(), 2);
        let csv = threshold_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("n,c2,lambda,"));
    }

    #[test]
    fn verdicts_and_dispatch() {
        let cfg = ExperimentConfig {
            kind: ExperimentKind::Limit,
            ns: vec![20, 200],
            c2_rule: None,
            replicates: 300,
            control_replicates: None,
            seed: 11,
            truncation: 300,
            epsilon: 0.2,
            k_hat_exponent: 0.75,
            output: None,
        };
        let (csv, verdict) = run_experiment(&cfg, Execution::Parallel).unwrap();
        assert!(csv.starts_with("n,replicates,mean_T,stderr_T,mean_ratio,ks_d\n"));
        assert_eq!(verdict.checks.len(), 5);
        assert_eq!(verdict.pass, verdict.checks.iter().all(|c| c.pass));
        let json: serde_json::Value = serde_json::from_str(&verdict.to_json()).unwrap();
        assert_eq!(json["experiment"], "limit");

        let early = ExperimentConfig {
            kind: ExperimentKind::EarlyPhase,
            ns: vec![100],
            replicates: 20,
            ..cfg
        };
        let (csv, verdict) = run_experiment(&early, Execution::Sequential).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(verdict.pass, "{verdict:?}");
    }

    #[test]
    fn band_checks() {
        assert!(Check::band("x".into(), 1.0, Some(0.9), Some(1.0)).pass);
        assert!(!Check::band("x".into(), 1.1, Some(0.9), Some(1.0)).pass);
        assert!(!Check::band("x".into(), 0.0, Some(0.5), None).pass);
        assert_eq!(Check::flag("f".into(), true).value, 1.0);
    }

    #[test]
    fn audit_runs_on_tiny_case() {
        let p = ProbabilityVector::uniform(2).unwrap();
        let res = delta_audit_experiment(&p, 0.2, 20, 3, Execution::Sequential).unwrap();
        assert_eq!(res.replicates, 20);
    }
}
