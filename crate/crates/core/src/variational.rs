//! Numerical corroboration of the extremal-distribution results: `F_q(k)` is
//! minimized over `{Σq² = c2}` by the topheavy vector and over
//! `{Σq² = c2, Σq³ = c3}` by a three-level vector.
//!
//! The searches move on the constraint manifold exactly. Three coordinates
//! with fixed sum and sum of squares lie on a circle, so a move is a rotation.
//! Four coordinates with fixed first three power sums leave one free
//! coordinate; the other three are the roots of the cubic fixed by Newton's
//! identities.

use std::f64::consts::PI;
use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::distributions::{sample_fixed_c2, three_level_all, topheavy, ProbabilityVector};
use crate::dynamics::f_sum;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Local moves per restart.
const MOVES_PER_RESTART: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub q_best: ProbabilityVector,
    pub f_best: f64,
    pub restarts: usize,
}

impl SearchResult {
    /// Number of distinct entries after clustering values within `tol`.
    pub fn distinct_levels(&self, tol: f64) -> usize {
        distinct_levels(self.q_best.weights(), tol)
    }
}

pub fn distinct_levels(q: &[f64], tol: f64) -> usize {
    let mut v = q.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    let mut count = 0;
    let mut anchor = f64::INFINITY;
    for x in v {
        if (anchor - x).abs() > tol {
            count += 1;
            anchor = x;
        }
    }
    count
}

fn restart_rng(base: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(i as u64);
    rng
}

fn three_distinct<R: Rng + ?Sized>(n: usize, rng: &mut R) -> [usize; 3] {
    let a = rng.random_range(0..n);
    let mut b = rng.random_range(0..n - 1);
    if b >= a {
        b += 1;
    }
    let mut c = rng.random_range(0..n);
    while c == a || c == b {
        c = rng.random_range(0..n);
    }
    [a, b, c]
}

/// Rotates `(q_a, q_b, q_c)` about their centroid within the plane of fixed
/// sum. Returns the new triple, or `None` if it leaves the simplex.
fn rotate_triple(v: [f64; 3], angle: f64) -> Option<[f64; 3]> {
    const S2: f64 = std::f64::consts::SQRT_2;
    let s6 = 6f64.sqrt();
    let m = (v[0] + v[1] + v[2]) / 3.0;
    let d = [v[0] - m, v[1] - m, v[2] - m];
    // Orthonormal basis of the plane: u1 = (1,-1,0)/√2, u2 = (1,1,-2)/√6.
    let a = (d[0] - d[1]) / S2;
    let b = (d[0] + d[1] - 2.0 * d[2]) / s6;
    let (sin, cos) = angle.sin_cos();
    let (a2, b2) = (a * cos - b * sin, a * sin + b * cos);
    let out = [
        m + a2 / S2 + b2 / s6,
        m - a2 / S2 + b2 / s6,
        m - 2.0 * b2 / s6,
    ];
    out.iter().all(|&x| x >= 0.0).then_some(out)
}

fn random_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Log-uniform magnitude between 1e-4 and π covers coarse and fine moves.
    let mag = (rng.random::<f64>() * (PI / 1e-4).ln()).exp() * 1e-4;
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

fn descend_c2<R: Rng + ?Sized>(q: &mut [f64], k: f64, moves: usize, rng: &mut R) {
    let n = q.len();
    if n < 3 {
        return;
    }
    for _ in 0..moves {
        let idx = three_distinct(n, rng);
        let old = idx.map(|i| q[i]);
        let Some(new) = rotate_triple(old, random_angle(rng)) else {
            continue;
        };
        let delta: f64 = (0..3)
            .map(|j| (-k * new[j]).exp() - (-k * old[j]).exp())
            .sum();
        if delta < 0.0 {
            for j in 0..3 {
                q[idx[j]] = new[j];
            }
        }
    }
}

/// Random-restart search for the minimum of `F_q(k)` over `Σq = 1, Σq² = c2`.
/// `budget` is the total number of local moves.
pub fn minimize_f_over_dc2<R: Rng + ?Sized>(
    n: usize,
    c2: f64,
    k: f64,
    budget: usize,
    rng: &mut R,
) -> Result<SearchResult> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::Precondition(format!("k must be positive, got {k}")));
    }
    // Validates (n, c2).
    topheavy(n, c2)?;
    let restarts = (budget / MOVES_PER_RESTART).max(1);
    let moves = budget.min(MOVES_PER_RESTART);
    let base: u64 = rng.random();
    let results = par::map_range(Execution::default(), restarts, |i| {
        let mut rng = restart_rng(base, i);
        let start = sample_fixed_c2(n, c2, &mut rng)?;
        let mut q = start.weights().to_vec();
        descend_c2(&mut q, k, moves, &mut rng);
        let q = ProbabilityVector::new_checked(q, true)?;
        let f = f_sum(&q, k);
        Ok((q, f))
    });
    best_of(results, restarts)
}

fn best_of(results: Vec<Result<(ProbabilityVector, f64)>>, restarts: usize) -> Result<SearchResult> {
    let mut best: Option<(ProbabilityVector, f64)> = None;
    for r in results {
        let (q, f) = r?;
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((q, f));
        }
    }
    let (q_best, f_best) = best.ok_or_else(|| Error::Precondition("empty search".into()))?;
    Ok(SearchResult {
        q_best,
        f_best,
        restarts,
    })
}

/// Real roots of `t³ - e1 t² + e2 t - e3`, ascending, when all three are real.
fn cubic_roots(e1: f64, e2: f64, e3: f64) -> Option<[f64; 3]> {
    let shift = e1 / 3.0;
    let p = e2 - e1 * e1 / 3.0;
    let q = -2.0 * e1.powi(3) / 27.0 + e1 * e2 / 3.0 - e3;
    let scale = e1.abs().max(1e-300).powi(3);
    if p >= 0.0 {
        // A triple root at most; only accept the exact degenerate case.
        return (p.abs() <= 1e-14 * e1 * e1 && q.abs() <= 1e-14 * scale)
            .then_some([shift; 3]);
    }
    let disc = 4.0 * p.powi(3) + 27.0 * q * q;
    if disc > 1e-12 * scale * scale {
        return None;
    }
    let r = 2.0 * (-p / 3.0).sqrt();
    let arg = (3.0 * q / (p * r)).clamp(-1.0, 1.0);
    let theta = arg.acos() / 3.0;
    let mut roots = [0, 1, 2].map(|j| shift + r * (theta - 2.0 * PI * j as f64 / 3.0).cos());
    roots.sort_by(f64::total_cmp);
    Some(roots)
}

/// Moves coordinate `a` by `delta` and re-solves `b, c, d` so that the first
/// three power sums of the four coordinates are unchanged. The re-solved
/// values keep the rank order the three coordinates had before.
fn four_move(q: &[f64], idx: [usize; 4], delta: f64) -> Option<[f64; 4]> {
    let old = idx.map(|i| q[i]);
    let (s1, s2, s3) = old
        .iter()
        .fold((0.0, 0.0, 0.0), |(a, b, c), &x| (a + x, b + x * x, c + x * x * x));
    let xa = old[0] + delta;
    if xa < 0.0 {
        return None;
    }
    let (p1, p2, p3) = (s1 - xa, s2 - xa * xa, s3 - xa.powi(3));
    let e1 = p1;
    let e2 = (p1 * p1 - p2) / 2.0;
    let e3 = (p1.powi(3) - 3.0 * p1 * p2 + 2.0 * p3) / 6.0;
    let roots = cubic_roots(e1, e2, e3)?;
    if roots[0] < 0.0 {
        return None;
    }
    let mut order = [1usize, 2, 3];
    order.sort_by(|&i, &j| old[i].total_cmp(&old[j]));
    let mut out = [xa, 0.0, 0.0, 0.0];
    for (rank, &slot) in order.iter().enumerate() {
        out[slot] = roots[rank];
    }
    Some(out)
}

fn four_distinct<R: Rng + ?Sized>(n: usize, rng: &mut R) -> [usize; 4] {
    let mut idx = [0usize; 4];
    let mut filled = 0;
    while filled < 4 {
        let c = rng.random_range(0..n);
        if !idx[..filled].contains(&c) {
            idx[filled] = c;
            filled += 1;
        }
    }
    idx
}

fn walk_c2c3<R: Rng + ?Sized>(q: &mut [f64], k: f64, moves: usize, greedy: bool, rng: &mut R) {
    let n = q.len();
    for _ in 0..moves {
        let idx = four_distinct(n, rng);
        let spread = idx.iter().map(|&i| q[i]).fold(0.0f64, f64::max).max(1e-12);
        let delta = spread * random_angle(rng) / PI;
        let Some(new) = four_move(q, idx, delta) else {
            continue;
        };
        let gain: f64 = (0..4)
            .map(|j| (-k * new[j]).exp() - (-k * q[idx[j]]).exp())
            .sum();
        if !greedy || gain < 0.0 {
            for j in 0..4 {
                q[idx[j]] = new[j];
            }
        }
    }
}

/// Random-restart search over `{Σq = 1, Σq² = c2(p), Σq³ = c3(p)}` starting
/// from `p`. Each restart first wanders without regard to `F`, then descends.
pub fn minimize_f_over_dc2c3<R: Rng + ?Sized>(
    p: &ProbabilityVector,
    k: f64,
    budget: usize,
    rng: &mut R,
) -> Result<SearchResult> {
    if p.n() < 4 {
        return Err(Error::Precondition(
            "four-coordinate moves need n >= 4".into(),
        ));
    }
    let restarts = (budget / MOVES_PER_RESTART).max(1);
    let moves = budget.min(MOVES_PER_RESTART);
    let base: u64 = rng.random();
    let results = par::map_range(Execution::default(), restarts, |i| {
        let mut rng = restart_rng(base, i);
        let mut q = p.weights().to_vec();
        walk_c2c3(&mut q, k, moves / 5, false, &mut rng);
        walk_c2c3(&mut q, k, moves - moves / 5, true, &mut rng);
        let q = ProbabilityVector::new_checked(q, true)?;
        let f = f_sum(&q, k);
        Ok((q, f))
    });
    best_of(results, restarts)
}

/// `F` values along the chain `F_p >= min_ν F_r >= F_θ >= F_u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingReport {
    pub k: f64,
    pub f_p: f64,
    /// `(ν, F_r)` for every three-level solution found.
    pub three_level: Vec<(usize, f64)>,
    pub f_r_min: Option<f64>,
    pub f_theta: f64,
    pub f_u: f64,
    pub ordered: bool,
}

/// Evaluates the chain for `p` at `k`, scanning `ν` over `nu_scan`.
///
/// The three-level link uses the minimum over `ν`: the extremal statement is
/// about the best three-level vector, and individual non-optimal `ν` may sit
/// above `F_p`. Every `F_r` must still dominate `F_θ`.
pub fn ordering_chain(
    p: &ProbabilityVector,
    k: f64,
    nu_scan: RangeInclusive<usize>,
) -> Result<OrderingReport> {
    const TOL: f64 = 1e-9;
    let n = p.n();
    let m = p.moments();
    let f_p = f_sum(p, k);
    let f_theta = f_sum(&topheavy(n, m.c2)?, k);
    let f_u = f_sum(&ProbabilityVector::uniform(n)?, k);
    let mut three_level = Vec::new();
    for nu in nu_scan.filter(|&nu| nu >= 1 && nu + 2 <= n) {
        if let Ok(all) = three_level_all(n, m.c2, m.c3, nu) {
            three_level.extend(all.iter().map(|r| (nu, f_sum(r, k))));
        }
    }
    let f_r_min = three_level.iter().map(|&(_, f)| f).reduce(f64::min);
    let mut ordered = f_theta >= f_u - TOL && f_p >= f_theta - TOL;
    if let Some(fr) = f_r_min {
        ordered &= f_p >= fr - TOL
            && three_level.iter().all(|&(_, f)| f >= f_theta - TOL);
    }
    Ok(OrderingReport {
        k,
        f_p,
        three_level,
        f_r_min,
        f_theta,
        f_u,
        ordered,
    })
}

/// `det` of the 4×4 matrix with rows `(e^{-x_i}, 1, x_i, x_i²)`.
pub fn case1_determinant(x1: f64, x2: f64, x3: f64, x4: f64) -> Result<f64> {
    if !(x1 > x2 && x2 > x3 && x3 > x4 && x4 >= 0.0) {
        return Err(Error::Precondition(format!(
            "need x1 > x2 > x3 > x4 >= 0, got ({x1}, {x2}, {x3}, {x4})"
        )));
    }
    let mut m = [x1, x2, x3, x4].map(|x| [(-x).exp(), 1.0, x, x * x]);
    let mut det = 1.0;
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("nonempty range");
        if m[pivot][col] == 0.0 {
            return Ok(0.0);
        }
        if pivot != col {
            m.swap(pivot, col);
            det = -det;
        }
        det *= m[col][col];
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for j in col..4 {
                m[row][j] -= f * m[col][j];
            }
        }
    }
    Ok(det)
}

/// `T(x) = e^{-x} [(x-x4)²(1 - e^{x-x1}) + (x-x1)²(e^{x-x4} - 1) + Δ]` with
/// `Δ = (x-x1)(x4-x1)(x4-x)`.
pub fn case2_t(x1: f64, x: f64, x4: f64) -> Result<f64> {
    if !(x1 > x && x > x4 && x4 >= 0.0) {
        return Err(Error::Precondition(format!(
            "need x1 > x > x4 >= 0, got ({x1}, {x}, {x4})"
        )));
    }
    let delta = (x - x1) * (x4 - x1) * (x4 - x);
    let inner = -(x - x4).powi(2) * (x - x1).exp_m1() + (x - x1).powi(2) * (x - x4).exp_m1() + delta;
    Ok((-x).exp() * inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::random_simplex;
    use approx::assert_abs_diff_eq;

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new_checked(w.to_vec(), false).unwrap()
    }

    #[test]
    fn rotation_preserves_two_sums() {
        let v = [0.5, 0.2, 0.1];
        let w = rotate_triple(v, 0.3).unwrap();
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 0.8, epsilon = 1e-15);
        let sq = |a: [f64; 3]| a.iter().map(|x| x * x).sum::<f64>();
        assert_abs_diff_eq!(sq(w), sq(v), epsilon = 1e-15);
        assert!(rotate_triple([0.5, 0.0, 0.0], PI / 2.0).is_none());
    }

    #[test]
    fn four_move_preserves_three_sums() {
        let q = [0.4, 0.3, 0.2, 0.1];
        let out = four_move(&q, [0, 1, 2, 3], -0.01).unwrap();
        assert!(four_move(&q, [0, 1, 2, 3], 0.01).is_none());
        for pow in 1..=3 {
            let a: f64 = q.iter().map(|x| x.powi(pow)).sum();
            let b: f64 = out.iter().map(|x| x.powi(pow)).sum();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        assert!(out[1] > out[2] && out[2] > out[3]);
    }

    #[test]
    fn dc2_search_example() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let (n, c2, k) = (4, 0.3, 5.0);
        let res = minimize_f_over_dc2(n, c2, k, 100_000, &mut rng).unwrap();
        let f_theta = f_sum(&topheavy(n, c2).unwrap(), k);
        let gap = res.f_best - f_theta;
        assert!(gap >= -1e-9 && gap <= 0.05 * f_theta, "gap {gap}");
        assert_abs_diff_eq!(res.q_best.moments().c2, c2, epsilon = 1e-9);
        let sorted = res.q_best.sorted_desc();
        assert!(sorted[0] - sorted[1] > 10.0 * (sorted[1] - sorted[3]));
    }

    #[test]
    fn dc2_search_at_uniform_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let res = minimize_f_over_dc2(5, 0.2, 3.0, 2000, &mut rng).unwrap();
        assert_abs_diff_eq!(res.f_best, 5.0 * (-3.0f64 / 5.0).exp(), epsilon = 1e-12);
        assert_eq!(res.distinct_levels(1e-6), 1);
    }

    #[test]
    fn dc2c3_search_stays_on_manifold() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let p = pv(&[0.35, 0.3, 0.2, 0.1, 0.05]);
        let res = minimize_f_over_dc2c3(&p, 5.0, 5000, &mut rng).unwrap();
        let (a, b) = (p.moments(), res.q_best.moments());
        assert_abs_diff_eq!(a.c2, b.c2, epsilon = 1e-10);
        assert_abs_diff_eq!(a.c3, b.c3, epsilon = 1e-10);
        assert!(res.f_best <= f_sum(&p, 5.0) + 1e-12);
    }

    #[test]
    fn chain_examples() {
        let u = ProbabilityVector::uniform(5).unwrap();
        let r = ordering_chain(&u, 3.0, 1..=3).unwrap();
        assert!(r.ordered);
        assert_abs_diff_eq!(r.f_p, r.f_theta, epsilon = 1e-12);
        assert_abs_diff_eq!(r.f_p, r.f_u, epsilon = 1e-12);

        let p = pv(&[0.4, 0.3, 0.2, 0.1]);
        let r = ordering_chain(&p, 3.0, 1..=2).unwrap();
        assert!(r.ordered, "{r:?}");
        assert!(r.f_r_min.is_some());
        assert!(r.f_p > r.f_r_min.unwrap() && r.f_r_min.unwrap() > r.f_theta && r.f_theta > r.f_u);

        let t = topheavy(6, 0.4).unwrap();
        let r = ordering_chain(&t, 4.0, 1..=4).unwrap();
        assert!(r.ordered);
        assert_abs_diff_eq!(r.f_p, r.f_theta, epsilon = 1e-10);
    }

    #[test]
    fn chain_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..50 {
            let n = rng.random_range(4..=8);
            let p = random_simplex(n, &mut rng);
            for k in [1.0, 4.0, 12.0] {
                let r = ordering_chain(&p, k, 1..=n - 2).unwrap();
                assert!(r.ordered, "{r:?}");
                assert!(r.f_r_min.is_some(), "no three-level vector for {p:?}");
            }
        }
    }

    /// Cofactor expansion along the exponential column; each minor is a
    /// Vandermonde determinant.
    fn determinant_by_cofactors(x: [f64; 4]) -> f64 {
        let vandermonde = |a: f64, b: f64, c: f64| (b - a) * (c - a) * (c - b);
        (0..4)
            .map(|i| {
                let rest: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| x[j]).collect();
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                sign * (-x[i]).exp() * vandermonde(rest[0], rest[1], rest[2])
            })
            .sum()
    }

    #[test]
    fn case1_examples() {
        let d = case1_determinant(3.0, 2.0, 1.0, 0.0).unwrap();
        assert!(d > 0.0);
        assert_abs_diff_eq!(d, determinant_by_cofactors([3.0, 2.0, 1.0, 0.0]), epsilon = 1e-14);
        assert!(case1_determinant(1.0, 2.0, 0.5, 0.0).is_err());
        let near = case1_determinant(3.0, 1.0 + 1e-7, 1.0, 0.0).unwrap();
        assert!(near > 0.0 && near < 1e-6);
    }

    #[test]
    fn case1_positive_on_random_quadruples() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..10_000 {
            let mut x = [0.0; 4].map(|_: f64| rng.random_range(0.0..20.0));
            x.sort_by(|a: &f64, b: &f64| b.total_cmp(a));
            if x.windows(2).any(|w| w[0] == w[1]) {
                continue;
            }
            let d = case1_determinant(x[0], x[1], x[2], x[3]).unwrap();
            assert!(d > 0.0, "{x:?} -> {d}");
            let oracle = determinant_by_cofactors(x);
            assert!((d - oracle).abs() <= 1e-8 * oracle.abs().max(1e-300) + 1e-12);
        }
    }

    #[test]
    fn case2_examples() {
        let t = case2_t(2.0, 1.0, 0.0).unwrap();
        assert!(t > 0.0);
        // Expanded form: -(x-x4)² e^{-x1} + (Δ - (x1-x4)(x1+x4-2x)) e^{-x} + (x-x1)² e^{-x4}.
        let direct = -(-2.0f64).exp() + (-2.0 - 0.0) * (-1.0f64).exp() + 1.0;
        assert_abs_diff_eq!(t, direct, epsilon = 1e-15);
        assert!(case2_t(1.0, 2.0, 0.0).is_err());
        assert!(case2_t(2.0, 2.0 - 1e-6, 0.0).unwrap() < 1e-9);
        assert!(case2_t(2.0, 1e-6, 0.0).unwrap() < 1e-9);
    }

    #[test]
    fn case2_positive_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        for _ in 0..10_000 {
            let mut x = [0.0; 3].map(|_: f64| rng.random_range(0.0..20.0));
            x.sort_by(|a: &f64, b: &f64| b.total_cmp(a));
            if x[0] == x[1] || x[1] == x[2] {
                continue;
            }
            assert!(case2_t(x[0], x[1], x[2]).unwrap() > 0.0, "{x:?}");
        }
    }

    #[test]
    fn clustering() {
        assert_eq!(distinct_levels(&[0.5, 0.2, 0.2 + 1e-9, 0.1], 1e-6), 3);
    }
}
