//! Exact transition kernel `π_{kb} = P(B(t+1) = b | B(t) = k)` of the ball
//! count, expected coalescence times, the law of `T`, and the phase split.
//!
//! The kernel is built by a dynamic program over boxes. After processing a set
//! of boxes `S` of total mass `Q`, `α[s][b]` is the probability that `s` balls
//! conditioned to land in `S` occupy exactly `b` of its boxes. Adding a box of
//! mass `w` mixes over the binomial number of balls it receives (success
//! probability `w/(Q+w)`); once every box is in, `π_{kb} = α[k][b]`. Entries
//! stay in `[0, 1]` throughout, so no rescaling is needed. A run of equal
//! masses is entered in one go through the classical occupancy recurrence.

use std::fmt::Write as _;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::distributions::ProbabilityVector;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Largest `n` accepted by the big-integer oracle.
pub const ORACLE_MAX_N: usize = 300;

/// Degree above which the per-box update is spread over threads.
const PARALLEL_DEGREE: usize = 96;

/// Row `k` of the kernel; `probs[b - 1] = π_{kb}` for `b = 1..=k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionRow {
    pub k: usize,
    pub probs: Vec<f64>,
}

impl TransitionRow {
    pub fn prob(&self, b: usize) -> f64 {
        if b == 0 || b > self.k {
            0.0
        } else {
            self.probs[b - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &q)| (i + 1) as f64 * q)
            .sum()
    }

    /// `P(B(t+1) < k)`, summed directly rather than as `1 - π_kk`.
    pub fn leave_prob(&self) -> f64 {
        self.probs[..self.k - 1].iter().sum()
    }
}

/// Rows `k = 1..=n` of the kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangularKernel {
    rows: Vec<TransitionRow>,
    #[serde(skip)]
    source: ProbabilityVector,
}

fn ln_factorials(max: usize) -> Vec<f64> {
    let mut t = vec![0.0; max + 1];
    for i in 1..=max {
        t[i] = t[i - 1] + (i as f64).ln();
    }
    t
}

/// Binomial(s, ρ) pmf for `e = 0..=s`, evaluated in log space.
fn binomial_pmf(s: usize, rho: f64, lnf: &[f64]) -> Vec<f64> {
    let (ln_r, ln_1r) = (rho.ln(), (-rho).ln_1p());
    (0..=s)
        .map(|e| {
            (lnf[s] - lnf[e] - lnf[s - e] + e as f64 * ln_r + (s - e) as f64 * ln_1r).exp()
        })
        .collect()
}

/// Occupancy table for `m` equally likely boxes: entry `[s][b]` is the
/// probability that `s` balls fill exactly `b` of them.
fn occupancy(m: usize, degree: usize) -> Vec<Vec<f64>> {
    let mf = m as f64;
    let mut alpha = Vec::with_capacity(degree + 1);
    alpha.push(vec![1.0]);
    for s in 1..=degree {
        let prev: &Vec<f64> = &alpha[s - 1];
        let row: Vec<f64> = (0..=s)
            .map(|b| {
                let stay = if b < s { prev[b] * b as f64 / mf } else { 0.0 };
                let grow = if b >= 1 && b <= m {
                    prev[b - 1] * (mf - (b - 1) as f64) / mf
                } else {
                    0.0
                };
                stay + grow
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Folds one box into the table. `rho` is its share of the enlarged mass.
fn add_box(
    alpha: &[Vec<f64>],
    rho: f64,
    lnf: &[f64],
    exec: Execution,
) -> Vec<Vec<f64>> {
    let degree = alpha.len() - 1;
    let exec = if degree >= PARALLEL_DEGREE {
        exec
    } else {
        Execution::Sequential
    };
    par::map_range(exec, degree + 1, |s| {
        let pmf = binomial_pmf(s, rho, lnf);
        let mut row: Vec<f64> = alpha[s].iter().map(|&a| pmf[0] * a).collect();
        for (e, &w) in pmf.iter().enumerate().skip(1) {
            if w == 0.0 {
                continue;
            }
            // The new box is occupied: `s - e` balls sit on `b - 1` old boxes.
            for (b_old, &a) in alpha[s - e].iter().enumerate() {
                row[b_old + 1] += w * a;
            }
        }
        row
    })
}

/// Conditional occupancy table up to `degree` balls for the whole vector.
fn occupancy_dp(p: &ProbabilityVector, degree: usize, exec: Execution) -> Vec<Vec<f64>> {
    let runs: Vec<(f64, usize)> = p.runs().into_iter().filter(|&(w, _)| w > 0.0).collect();
    let lead = runs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.cmp(&b.1 .1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .expect("a probability vector has positive mass");
    let (w0, m0) = runs[lead];
    let mut alpha = occupancy(m0, degree);
    let mut mass = w0 * m0 as f64;
    let lnf = ln_factorials(degree);
    for (i, &(w, m)) in runs.iter().enumerate() {
        if i == lead {
            continue;
        }
        for _ in 0..m {
            mass += w;
            alpha = add_box(&alpha, w / mass, &lnf, exec);
        }
    }
    alpha
}

fn row_from(alpha_k: &[f64], k: usize) -> TransitionRow {
    if k == 1 {
        return TransitionRow { k, probs: vec![1.0] };
    }
    TransitionRow {
        k,
        probs: alpha_k[1..=k].iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// Row `k` of the kernel.
pub fn transition_row(p: &ProbabilityVector, k: usize) -> Result<TransitionRow> {
    if k == 0 || k > p.n() {
        return Err(Error::StateOutOfRange { k, n: p.n() });
    }
    let alpha = occupancy_dp(p, k, Execution::default());
    Ok(row_from(&alpha[k], k))
}

impl TriangularKernel {
    /// Full kernel, rows `1..=n`, from a single pass of the box DP.
    pub fn build(p: &ProbabilityVector) -> Self {
        Self::build_with(p, Execution::default())
    }

    pub fn build_with(p: &ProbabilityVector, exec: Execution) -> Self {
        let n = p.n();
        let alpha = occupancy_dp(p, n, exec);
        let rows = (1..=n).map(|k| row_from(&alpha[k], k)).collect();
        Self {
            rows,
            source: p.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn source(&self) -> &ProbabilityVector {
        &self.source
    }

    pub fn row(&self, k: usize) -> &TransitionRow {
        &self.rows[k - 1]
    }

    pub fn rows(&self) -> &[TransitionRow] {
        &self.rows
    }

    pub fn prob(&self, k: usize, b: usize) -> f64 {
        self.row(k).prob(b)
    }

    /// `E[T(m)]` for `m = 1..=n` (index `m - 1`), by back-substitution.
    pub fn expected_t_all(&self) -> Result<Vec<f64>> {
        let mut et = vec![0.0; self.n()];
        for m in 2..=self.n() {
            let row = self.row(m);
            let leave = row.leave_prob();
            if leave <= 0.0 {
                return Err(Error::DegenerateKernel(m));
            }
            let acc: f64 = (1..m).map(|b| row.prob(b) * et[b - 1]).sum();
            et[m - 1] = (1.0 + acc) / leave;
        }
        Ok(et)
    }

    /// `P(T <= t)` for `t = 0..=t_max`, starting from `m` balls.
    pub fn distribution_t(&self, m: usize, t_max: usize) -> Result<Vec<f64>> {
        let n = self.n();
        if m == 0 || m > n {
            return Err(Error::StateOutOfRange { k: m, n });
        }
        let mut state = vec![0.0; n + 1];
        state[m] = 1.0;
        let mut cdf = Vec::with_capacity(t_max + 1);
        cdf.push(state[1]);
        for _ in 0..t_max {
            let mut next = vec![0.0; n + 1];
            next[1] = state[1];
            for (k, &mass) in state.iter().enumerate().skip(2) {
                if mass == 0.0 {
                    continue;
                }
                for (i, &q) in self.row(k).probs.iter().enumerate() {
                    next[i + 1] += mass * q;
                }
            }
            state = next;
            cdf.push(state[1].min(1.0));
        }
        Ok(cdf)
    }

    /// Expected time spent in states `k > k*` (early), `k₁ < k <= k*`
    /// (middle) and `2 <= k <= k₁` (late), starting from `n` balls.
    pub fn phase_decomposition(&self, k_star: f64, k_1: f64) -> Result<Phases> {
        let n = self.n();
        if !(1.0 <= k_1 && k_1 <= k_star && k_star <= n as f64) {
            return Err(Error::Precondition(format!(
                "need 1 <= k1 <= k* <= n, got k1 = {k_1}, k* = {k_star}, n = {n}"
            )));
        }
        let holding = self.expected_holding_times()?;
        let mut phases = Phases::default();
        for (k, &h) in holding.iter().enumerate().skip(2) {
            let kf = k as f64;
            if kf > k_star {
                phases.early += h;
            } else if kf > k_1 {
                phases.middle += h;
            } else {
                phases.late += h;
            }
        }
        Ok(phases)
    }

    /// Expected total time in each state (index = state) started from `n`:
    /// visit probability of the jump chain over the leave probability.
    pub fn expected_holding_times(&self) -> Result<Vec<f64>> {
        let n = self.n();
        let mut visit = vec![0.0; n + 1];
        visit[n] = 1.0;
        let mut holding = vec![0.0; n + 1];
        for k in (2..=n).rev() {
            let row = self.row(k);
            let leave = row.leave_prob();
            if leave <= 0.0 {
                return Err(Error::DegenerateKernel(k));
            }
            holding[k] = visit[k] / leave;
            for b in 1..k {
                visit[b] += visit[k] * row.prob(b) / leave;
            }
        }
        Ok(holding)
    }

    /// CSV with columns `k,b,prob`, one line per entry `b <= k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,b,prob\n");
        for row in &self.rows {
            for (i, q) in row.probs.iter().enumerate() {
                writeln!(out, "{},{},{:.16e}", row.k, i + 1, q).expect("write to String");
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Phases {
    pub early: f64,
    pub middle: f64,
    pub late: f64,
}

impl Phases {
    pub fn total(&self) -> f64 {
        self.early + self.middle + self.late
    }
}

/// `(Σ_{i<b} π_{ki}, Σ_{i>b} π_{ki})`.
pub fn tails(row: &TransitionRow, b: usize) -> (f64, f64) {
    let b = b.clamp(1, row.k);
    let minus = row.probs[..b - 1].iter().sum();
    let plus = row.probs[b..].iter().sum();
    (minus, plus)
}

/// `C(k,2) c2 - C(k,3) c3 - C(k,2) C(k-2,2) c2² / 2`.
///
/// Each overlapping pair of pairs is counted once here although three pairs
/// of pairs share any given triple, so this can exceed `1 - π_kk` (already at
/// `k = 3` for uniform `p`). [`bonferroni_collision_bound`] is the valid form.
pub fn collision_gap_lower_bound(p: &ProbabilityVector, k: usize) -> f64 {
    collision_terms(p, k, 1.0)
}

/// Second Bonferroni bound on the probability of at least one collision among
/// `k` balls: `C(k,2) c2 - 3 C(k,3) c3 - C(k,2) C(k-2,2) c2² / 2`.
pub fn bonferroni_collision_bound(p: &ProbabilityVector, k: usize) -> f64 {
    collision_terms(p, k, 3.0)
}

fn collision_terms(p: &ProbabilityVector, k: usize, triple_weight: f64) -> f64 {
    let m = p.moments();
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let kf = k as f64;
    let choose3 = (kf * (kf - 1.0) * (kf - 2.0) / 6.0).max(0.0);
    choose2(k) * m.c2
        - triple_weight * choose3 * m.c3
        - 0.5 * choose2(k) * choose2(k.saturating_sub(2)) * m.c2 * m.c2
}

/// Uniform-row oracle `π_{kb} = C(n,b) b! S(k,b) / n^k`, with Stirling
/// numbers of the second kind in exact integer arithmetic.
pub fn uniform_row_oracle(n: usize, k: usize) -> Result<TransitionRow> {
    if n > ORACLE_MAX_N {
        return Err(Error::ExactRange {
            n,
            limit: ORACLE_MAX_N,
        });
    }
    if k == 0 || k > n {
        return Err(Error::StateOutOfRange { k, n });
    }
    // S(s, b) rows for s = 0..=k.
    let mut stirling = vec![BigUint::one()];
    for s in 1..=k {
        let mut next = vec![BigUint::zero(); s + 1];
        for b in 1..=s {
            let mut v = BigUint::zero();
            if b < s {
                v += &stirling[b] * BigUint::from(b);
            }
            v += &stirling[b - 1];
            next[b] = v;
        }
        stirling = next;
    }
    let denom = BigUint::from(n).pow(k as u32);
    let mut falling = BigUint::one();
    let probs = (1..=k)
        .map(|b| {
            falling *= BigUint::from(n + 1 - b);
            ratio_to_f64(&(&falling * &stirling[b]), &denom)
        })
        .collect();
    Ok(TransitionRow { k, probs })
}

/// `num / den` correctly scaled to f64 for arbitrarily large operands.
fn ratio_to_f64(num: &BigUint, den: &BigUint) -> f64 {
    if num.is_zero() {
        return 0.0;
    }
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let q = if shift >= 0 {
        (num << shift as u64) / den
    } else {
        num / (den << (-shift) as u64)
    };
    let mant = q.to_f64().expect("quotient fits in f64");
    // Split the power of two so intermediate factors stay representable.
    let half = shift / 2;
    mant * 2f64.powi(-(half as i32)) * 2f64.powi(-((shift - half) as i32))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{random_simplex, topheavy};
    use crate::dynamics::expected_next;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new_checked(w.to_vec(), false).unwrap()
    }

    /// Brute-force row: enumerate all n^k assignments.
    fn enumerate_row(p: &ProbabilityVector, k: usize) -> Vec<f64> {
        let n = p.n();
        let mut probs = vec![0.0; k];
        let total = n.pow(k as u32);
        for code in 0..total {
            let mut c = code;
            let mut weight = 1.0;
            let mut seen = vec![false; n];
            for _ in 0..k {
                let box_ = c % n;
                c /= n;
                weight *= p.weights()[box_];
                seen[box_] = true;
            }
            let b = seen.iter().filter(|&&s| s).count();
            probs[b - 1] += weight;
        }
        probs
    }

    #[test]
    fn row_examples() {
        let r = transition_row(&ProbabilityVector::uniform(2).unwrap(), 2).unwrap();
        assert_abs_diff_eq!(r.prob(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(r.prob(2), 0.5, epsilon = 1e-15);
        let r = transition_row(&ProbabilityVector::uniform(3).unwrap(), 3).unwrap();
        for (b, want) in [(1, 1.0 / 9.0), (2, 2.0 / 3.0), (3, 2.0 / 9.0)] {
            assert_abs_diff_eq!(r.prob(b), want, epsilon = 1e-15);
        }
        let r = transition_row(&pv(&[0.75, 0.25]), 2).unwrap();
        assert_abs_diff_eq!(r.prob(1), 0.625, epsilon = 1e-15);
        assert_abs_diff_eq!(r.prob(2), 0.375, epsilon = 1e-15);
        assert!(transition_row(&pv(&[0.75, 0.25]), 3).is_err());
    }

    #[test]
    fn dp_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(2..=5);
            let mut w: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            if rng.random_bool(0.3) {
                w[0] = 0.0;
            }
            if rng.random_bool(0.3) {
                w[1] = w[n - 1];
            }
            let p = ProbabilityVector::new_checked(w, true).unwrap();
            let kernel = TriangularKernel::build(&p);
            for k in 1..=n {
                let brute = enumerate_row(&p, k);
                for b in 1..=k {
                    assert_abs_diff_eq!(kernel.prob(k, b), brute[b - 1], epsilon = 1e-13);
                }
            }
        }
    }

    #[test]
    fn oracle_examples() {
        for n in [3usize, 7, 40] {
            let all = uniform_row_oracle(n, n).unwrap();
            let ln_n_fact: f64 = (1..=n).map(|i| (i as f64).ln()).sum();
            let want = (ln_n_fact - n as f64 * (n as f64).ln()).exp();
            assert!((all.prob(n) - want).abs() <= 1e-12 * want);
            let one = uniform_row_oracle(n, 5.min(n)).unwrap();
            let want = (n as f64).powi(1 - 5.min(n) as i32);
            assert!((one.prob(1) - want).abs() <= 1e-14 * want);
        }
        let big = uniform_row_oracle(300, 300).unwrap();
        assert_abs_diff_eq!(big.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(uniform_row_oracle(301, 2).is_err());
    }

    #[test]
    fn oracle_matches_dp_at_moderate_n() {
        let n = 120;
        let kernel = TriangularKernel::build(&ProbabilityVector::uniform(n).unwrap());
        for k in [1, 2, 17, 60, 120] {
            let oracle = uniform_row_oracle(n, k).unwrap();
            for b in 1..=k {
                assert_abs_diff_eq!(kernel.prob(k, b), oracle.prob(b), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn row_invariants_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let n = rng.random_range(2..=50);
            let p = random_simplex(n, &mut rng);
            let kernel = TriangularKernel::build(&p);
            assert_eq!(kernel.prob(1, 1), 1.0);
            for k in 1..=n {
                let row = kernel.row(k);
                assert_abs_diff_eq!(row.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
                assert!(row.probs.iter().all(|&q| q >= 0.0));
                assert_abs_diff_eq!(row.mean(), expected_next(&p, k), epsilon = 1e-9);
            }
            for k in 2..=n {
                assert!(kernel.prob(k, k) < kernel.prob(k - 1, k - 1));
            }
        }
    }

    #[test]
    fn large_topheavy_kernel_is_stochastic() {
        let p = topheavy(400, 0.05).unwrap();
        let kernel = TriangularKernel::build(&p);
        for k in [2, 100, 400] {
            let row = kernel.row(k);
            assert_abs_diff_eq!(row.probs.iter().sum::<f64>(), 1.0, epsilon = 1e-10);
            assert_abs_diff_eq!(row.mean(), expected_next(&p, k), epsilon = 1e-9);
        }
    }

    #[test]
    fn tails_examples() {
        let row = transition_row(&ProbabilityVector::uniform(3).unwrap(), 3).unwrap();
        assert_eq!(tails(&row, 1).0, 0.0);
        assert_eq!(tails(&row, 3).1, 0.0);
        let (m, pl) = tails(&row, 2);
        assert_abs_diff_eq!(m, 1.0 / 9.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pl, 2.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn collision_bound() {
        let p = pv(&[0.5, 0.3, 0.2]);
        assert_abs_diff_eq!(collision_gap_lower_bound(&p, 2), p.moments().c2, epsilon = 1e-15);
        assert_abs_diff_eq!(bonferroni_collision_bound(&p, 2), p.moments().c2, epsilon = 1e-15);
        for n in [3usize, 5, 9] {
            let u = ProbabilityVector::uniform(n).unwrap();
            let nf = n as f64;
            let exact = 1.0 - transition_row(&u, 3).unwrap().prob(3);
            assert_abs_diff_eq!(exact, 3.0 / nf - 2.0 / (nf * nf), epsilon = 1e-14);
            assert_abs_diff_eq!(
                collision_gap_lower_bound(&u, 3),
                3.0 / nf - 1.0 / (nf * nf),
                epsilon = 1e-14
            );
            // The single-count line overshoots the exact value here.
            assert!(collision_gap_lower_bound(&u, 3) > exact);
            assert_abs_diff_eq!(bonferroni_collision_bound(&u, 3), 3.0 / nf - 3.0 / (nf * nf), epsilon = 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(2..=10);
            let p = random_simplex(n, &mut rng);
            let kernel = TriangularKernel::build(&p);
            for k in 2..=n {
                let bound = bonferroni_collision_bound(&p, k);
                if bound >= 0.0 {
                    assert!(bound <= 1.0 - kernel.prob(k, k) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn expected_times() {
        let et = TriangularKernel::build(&ProbabilityVector::uniform(2).unwrap())
            .expected_t_all()
            .unwrap();
        assert_eq!(et, vec![0.0, 2.0]);
        let et = TriangularKernel::build(&pv(&[0.75, 0.25]))
            .expected_t_all()
            .unwrap();
        assert_abs_diff_eq!(et[1], 1.6, epsilon = 1e-12);
        let et = TriangularKernel::build(&pv(&[1.0, 0.0, 0.0, 0.0]))
            .expected_t_all()
            .unwrap();
        assert_eq!(et, vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn law_of_t() {
        let kernel = TriangularKernel::build(&ProbabilityVector::uniform(2).unwrap());
        let cdf = kernel.distribution_t(2, 30).unwrap();
        for (t, &c) in cdf.iter().enumerate() {
            assert_abs_diff_eq!(c, 1.0 - 0.5f64.powi(t as i32), epsilon = 1e-15);
        }
        assert_eq!(kernel.distribution_t(1, 3).unwrap(), vec![1.0; 4]);

        let p = topheavy(8, 0.3).unwrap();
        let kernel = TriangularKernel::build(&p);
        let et = kernel.expected_t_all().unwrap();
        let cdf = kernel.distribution_t(8, 2000).unwrap();
        assert_eq!(cdf[0], 0.0);
        assert!(cdf.windows(2).all(|w| w[1] >= w[0] && w[1] <= 1.0));
        let tail_sum: f64 = cdf.iter().map(|c| 1.0 - c).sum();
        assert_abs_diff_eq!(tail_sum, et[7], epsilon = 1e-8);
    }

    #[test]
    fn phases_sum_to_expected_time() {
        let kernel = TriangularKernel::build(&ProbabilityVector::uniform(10).unwrap());
        let et = kernel.expected_t_all().unwrap()[9];
        let ph = kernel.phase_decomposition(5.0, 3.0).unwrap();
        assert_abs_diff_eq!(ph.total(), et, epsilon = 1e-8);
        let all_late = kernel.phase_decomposition(10.0, 10.0).unwrap();
        assert_eq!((all_late.early, all_late.middle), (0.0, 0.0));
        assert_abs_diff_eq!(all_late.late, et, epsilon = 1e-8);
        assert!(kernel.phase_decomposition(3.0, 5.0).is_err());
    }

    #[test]
    fn csv_export() {
        let kernel = TriangularKernel::build(&ProbabilityVector::uniform(3).unwrap());
        let csv = kernel.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,b,prob");
        assert_eq!(lines.len(), 1 + 6);
        assert!(lines[1].starts_with("1,1,1.0000000000000000e0"));
    }
}
