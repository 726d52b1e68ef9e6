//! Seeded Monte Carlo engine for the coalescence process.
//!
//! Replicate `i` draws from `ChaCha8Rng` seeded with the master seed and set to
//! stream `i`, so every replicate is reproducible on its own. Batches are cut
//! into fixed-size chunks whose accumulators are merged in index order; the
//! statistics are therefore bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distributions::ProbabilityVector;
use crate::dynamics::psi;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::report::{fmt_f64, Csv};

/// Replicates per accumulator chunk.
pub const CHUNK: usize = 256;

/// Walker/Vose alias table for O(1) sampling from a fixed vector.
#[derive(Debug, Clone)]
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(p: &ProbabilityVector) -> Self {
        let n = p.n();
        let mut scaled: Vec<f64> = p.weights().iter().map(|&w| w * n as f64).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            prob[s] = scaled[s];
            alias[s] = l as u32;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // Leftovers are 1 up to rounding.
        for i in small.into_iter().chain(large) {
            prob[i] = 1.0;
        }
        Self { prob, alias }
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

/// Alias table plus a generation-stamped scratch array for counting distinct
/// boxes without clearing between steps.
#[derive(Debug, Clone)]
pub struct Sampler<'a> {
    table: &'a AliasTable,
    stamps: Vec<u32>,
    generation: u32,
}

impl<'a> Sampler<'a> {
    pub fn new(table: &'a AliasTable) -> Self {
        Self {
            table,
            stamps: vec![0; table.len()],
            generation: 0,
        }
    }

    /// Drops `k` balls and returns the number of distinct boxes hit.
    pub fn step<R: Rng + ?Sized>(&mut self, k: usize, rng: &mut R) -> usize {
        if k <= 1 {
            return k;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamps.fill(0);
            self.generation = 1;
        }
        let mut distinct = 0;
        for _ in 0..k {
            let j = self.table.sample(rng);
            if self.stamps[j] != self.generation {
                self.stamps[j] = self.generation;
                distinct += 1;
            }
        }
        distinct
    }
}

/// One round from `k` balls with a freshly built table. For repeated steps
/// build an [`AliasTable`] and a [`Sampler`] once.
pub fn step<R: Rng + ?Sized>(p: &ProbabilityVector, k: usize, rng: &mut R) -> usize {
    let table = AliasTable::new(p);
    Sampler::new(&table).step(k, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub p: ProbabilityVector,
    pub b0: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub record_trajectory: bool,
    /// Thresholds `θ` for which `τ(θ) = min{t : B(t) <= θ}` is recorded.
    pub passage_thresholds: Vec<f64>,
}

impl SimConfig {
    /// `b0 = n`, one replicate, seed 0, no trajectory, no thresholds.
    pub fn new(p: ProbabilityVector) -> Self {
        let b0 = p.n();
        Self {
            p,
            b0,
            replicates: 1,
            master_seed: 0,
            record_trajectory: false,
            passage_thresholds: Vec::new(),
        }
    }

    pub fn with_b0(mut self, b0: usize) -> Self {
        self.b0 = b0;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_trajectory(mut self, record: bool) -> Self {
        self.record_trajectory = record;
        self
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.passage_thresholds = thresholds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Precondition("replicates must be >= 1".into()));
        }
        if self.b0 == 0 || self.b0 > self.p.n() {
            return Err(Error::StateOutOfRange {
                k: self.b0,
                n: self.p.n(),
            });
        }
        if let Some(&th) = self
            .passage_thresholds
            .iter()
            .find(|&&th| th < 1.0 || !th.is_finite())
        {
            return Err(Error::Precondition(format!(
                "passage threshold {th} must be a finite value >= 1"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunResult {
    /// Coalescence time `T = τ(1)`.
    pub t: usize,
    /// `B(0), ..., B(T)` when recorded.
    pub trajectory: Option<Vec<usize>>,
    /// `τ(θ)` for each configured threshold, in configuration order.
    pub passages: Vec<usize>,
}

/// The random stream of one replicate.
pub fn replicate_rng(master_seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate as u64);
    rng
}

fn run_with(config: &SimConfig, sampler: &mut Sampler<'_>, replicate: usize) -> RunResult {
    let mut rng = replicate_rng(config.master_seed, replicate);
    let thresholds = &config.passage_thresholds;
    let mut passages = vec![usize::MAX; thresholds.len()];
    let mut trajectory = config.record_trajectory.then(|| vec![config.b0]);
    let mut b = config.b0;
    let mut t = 0;
    loop {
        for (slot, &th) in passages.iter_mut().zip(thresholds) {
            if *slot == usize::MAX && b as f64 <= th {
                *slot = t;
            }
        }
        if b <= 1 {
            break;
        }
        b = sampler.step(b, &mut rng);
        t += 1;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(b);
        }
    }
    RunResult {
        t,
        trajectory,
        passages,
    }
}

/// Replicate `replicate` of `config`.
pub fn run(config: &SimConfig, replicate: usize) -> Result<RunResult> {
    config.validate()?;
    let table = AliasTable::new(&config.p);
    let mut sampler = Sampler::new(&table);
    Ok(run_with(config, &mut sampler, replicate))
}

/// All replicates, in replicate order.
pub fn batch_runs(config: &SimConfig, exec: Execution) -> Result<Vec<RunResult>> {
    config.validate()?;
    let table = AliasTable::new(&config.p);
    let chunks = par::map_chunks(exec, config.replicates, CHUNK, |range| {
        let mut sampler = Sampler::new(&table);
        range
            .map(|i| run_with(config, &mut sampler, i))
            .collect::<Vec<_>>()
    });
    Ok(chunks.into_iter().flatten().collect())
}

/// Count / mean / second central moment accumulator with exact merging.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Accumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Accumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Accumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        let delta = other.mean - self.mean;
        self.mean += delta * nb / total;
        self.m2 += other.m2 + delta * delta * na * nb / total;
        self.count += other.count;
    }

    pub fn stats(&self) -> SummaryStats {
        let count = self.count as usize;
        let variance = (count > 1).then(|| self.m2 / (count - 1) as f64);
        let stderr = variance.map(|v| (v / count as f64).sqrt());
        let half = stderr.map(|s| 1.96 * s);
        SummaryStats {
            count,
            mean: self.mean,
            variance,
            stderr,
            ci95_low: half.map(|h| self.mean - h),
            ci95_high: half.map(|h| self.mean + h),
        }
    }
}

impl FromIterator<f64> for Accumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Accumulator::default();
        for x in iter {
            acc.push(x);
        }
        acc
    }
}

/// Sample statistics. Spread fields are `None` for a single observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub variance: Option<f64>,
    pub stderr: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PassageStats {
    pub threshold: f64,
    pub stats: SummaryStats,
}

/// Statistics of `T` and of every recorded passage time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub n: usize,
    pub b0: usize,
    pub master_seed: u64,
    pub t: SummaryStats,
    pub passages: Vec<PassageStats>,
}

impl BatchSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

/// Chunked accumulation in replicate order.
pub fn summarize(config: &SimConfig, runs: &[RunResult]) -> BatchSummary {
    let width = config.passage_thresholds.len();
    let mut t_acc = Accumulator::default();
    let mut pass_acc = vec![Accumulator::default(); width];
    for chunk in runs.chunks(CHUNK) {
        let local_t: Accumulator = chunk.iter().map(|r| r.t as f64).collect();
        t_acc.merge(&local_t);
        for (j, acc) in pass_acc.iter_mut().enumerate() {
            let local: Accumulator = chunk.iter().map(|r| r.passages[j] as f64).collect();
            acc.merge(&local);
        }
    }
    BatchSummary {
        n: config.p.n(),
        b0: config.b0,
        master_seed: config.master_seed,
        t: t_acc.stats(),
        passages: config
            .passage_thresholds
            .iter()
            .zip(&pass_acc)
            .map(|(&threshold, acc)| PassageStats {
                threshold,
                stats: acc.stats(),
            })
            .collect(),
    }
}

pub fn batch(config: &SimConfig) -> Result<BatchSummary> {
    batch_with(config, Execution::default())
}

pub fn batch_with(config: &SimConfig, exec: Execution) -> Result<BatchSummary> {
    let runs = batch_runs(config, exec)?;
    Ok(summarize(config, &runs))
}

/// Number of `t` with `B(t) >= k*` and `B(t+1) > Ψ_p(B(t))`.
pub fn delta_audit(result: &RunResult, p: &ProbabilityVector, k_star: f64) -> Result<usize> {
    let tr = result.trajectory.as_ref().ok_or(Error::MissingTrajectory)?;
    Ok(tr
        .windows(2)
        .filter(|w| w[0] as f64 >= k_star && w[1] as f64 > psi(p, w[0] as f64))
        .count())
}

/// Per-replicate CSV: `replicate,T,tau@θ...`.
pub fn runs_csv(config: &SimConfig, runs: &[RunResult]) -> String {
    let mut header = vec!["replicate".to_string(), "T".to_string()];
    header.extend(
        config
            .passage_thresholds
            .iter()
            .map(|th| format!("tau@{}", fmt_f64(*th))),
    );
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header_refs);
    for (i, r) in runs.iter().enumerate() {
        let mut cells = vec![i.to_string(), r.t.to_string()];
        cells.extend(r.passages.iter().map(usize::to_string));
        csv.row(cells);
    }
    csv.finish()
}
