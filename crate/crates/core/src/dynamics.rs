//! Deterministic one-step maps of the ball count and the recurrences built
//! from them.
//!
//! All maps take a real-valued ball count `k`.

use serde::Serialize;

use crate::distributions::ProbabilityVector;
use crate::error::{Error, Result};

/// `F_p(k) = Σ exp(-k p_j)`, the expected number of empty boxes proxy.
pub fn f_sum(p: &ProbabilityVector, k: f64) -> f64 {
    p.weights().iter().map(|&w| (-k * w).exp()).sum()
}

/// `Φ_p(k) = n - F_p(k)`, summed as `Σ (1 - e^{-k p_j})` to avoid cancellation.
pub fn phi(p: &ProbabilityVector, k: f64) -> f64 {
    p.weights().iter().map(|&w| -(-k * w).exp_m1()).sum()
}

/// Exact conditional mean `E[B(t+1) | B(t) = k] = Σ (1 - (1 - p_j)^k)`.
pub fn expected_next(p: &ProbabilityVector, k: usize) -> f64 {
    let k = k as f64;
    p.weights()
        .iter()
        .map(|&w| -(k * (-w).ln_1p()).exp_m1())
        .sum()
}

/// `Ψ_p(k) = (k + Φ_p(k)) / 2`.
pub fn psi(p: &ProbabilityVector, k: f64) -> f64 {
    0.5 * (k + phi(p, k))
}

/// `N(p, k) = Ψ_p(k) - Φ_p(k) = (k - n + F_p(k)) / 2`, summed termwise as
/// `Σ (e^{-k p_j} - 1 + k p_j) / 2`.
pub fn n_gap(p: &ProbabilityVector, k: f64) -> f64 {
    0.5 * p
        .weights()
        .iter()
        .map(|&w| (-k * w).exp_m1() + k * w)
        .sum::<f64>()
}

/// `H_p(k) = N(p, k)² / k`.
pub fn h_margin(p: &ProbabilityVector, k: f64) -> f64 {
    if k <= 0.0 {
        return 0.0;
    }
    let gap = n_gap(p, k);
    gap * gap / k
}

/// `k* = c2⁻¹ (ln n)^{-ε}`.
pub fn k_star(c2: f64, n: usize, eps: f64) -> f64 {
    (n as f64).ln().powf(-eps) / c2
}

/// `k₁ = c2^{-1/2} (ln n)^{-ε/4}`.
pub fn k_one(c2: f64, n: usize, eps: f64) -> f64 {
    (n as f64).ln().powf(-eps / 4.0) / c2.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    ReachedThreshold,
    MaxIterations,
}

/// Iterates of a deterministic map; `values[t]` is the state at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeterministicTrajectory {
    pub values: Vec<f64>,
    pub stop_reason: StopReason,
}

impl DeterministicTrajectory {
    /// Time at which the threshold was reached, if it was.
    pub fn hitting_time(&self) -> Option<usize> {
        (self.stop_reason == StopReason::ReachedThreshold).then(|| self.values.len() - 1)
    }
}

/// Iterates `x <- Ψ_p(x)` from `b0` until `x <= stop_at` or `max_t` steps.
pub fn iterate_psi(
    p: &ProbabilityVector,
    b0: f64,
    stop_at: f64,
    max_t: usize,
) -> Result<DeterministicTrajectory> {
    let n = p.n() as f64;
    if !(stop_at > 0.0 && stop_at <= b0 && b0 <= n) {
        return Err(Error::Precondition(format!(
            "need 0 < stop_at <= b0 <= n, got stop_at = {stop_at}, b0 = {b0}, n = {n}"
        )));
    }
    let mut values = vec![b0];
    let mut x = b0;
    while x > stop_at {
        if values.len() > max_t {
            return Ok(DeterministicTrajectory {
                values,
                stop_reason: StopReason::MaxIterations,
            });
        }
        x = psi(p, x);
        values.push(x);
    }
    Ok(DeterministicTrajectory {
        values,
        stop_reason: StopReason::ReachedThreshold,
    })
}

/// `n (1 - √c2/4)^t + 2 c2^{-1/2}`, the linear-decay envelope for
/// `c2 >= 2/n`.
pub fn topheavy_linear_envelope(c2: f64, n: usize, t: usize) -> f64 {
    let rate = 1.0 - c2.sqrt() / 4.0;
    n as f64 * rate.powi(t as i32) + 2.0 / c2.sqrt()
}

/// Positive root `x(t)` of `1 - e^{-x} = x (1 - 2/(t+2))`, `t >= 1`.
pub fn case2_root(t: usize) -> Result<f64> {
    if t == 0 {
        return Err(Error::Precondition(
            "case2_root needs t >= 1 (the t = 0 root diverges)".into(),
        ));
    }
    let c = t as f64 / (t as f64 + 2.0);
    let g = |x: f64| -(-x).exp_m1() - c * x;
    // g > 0 on (0, 1-c] and g(1/c) < 0.
    let (mut lo, mut hi) = (1.0 - c, 1.0 / c);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `max{1, max_{1<=t<=t_max} (t+1) x(t)}`.
pub fn a_star(t_max: usize) -> f64 {
    (1..=t_max)
        .map(|t| (t as f64 + 1.0) * case2_root(t).expect("t >= 1"))
        .fold(1.0, f64::max)
}

/// `η(x) = 1.5 (1 - e^{-x}) - 0.5 x`.
pub fn eta(x: f64) -> f64 {
    -1.5 * (-x).exp_m1() - 0.5 * x
}

/// `γ = 1 - 2√c`.
pub fn gamma_of(c: f64) -> f64 {
    1.0 - 2.0 * c.sqrt()
}

/// One row of the table written by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DynamicsRow {
    pub k: f64,
    pub f: f64,
    pub phi: f64,
    pub psi: f64,
    pub h: f64,
}

pub fn dynamics_table(p: &ProbabilityVector, ks: &[f64]) -> Vec<DynamicsRow> {
    ks.iter()
        .map(|&k| DynamicsRow {
            k,
            f: f_sum(p, k),
            phi: phi(p, k),
            psi: psi(p, k),
            h: h_margin(p, k),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{random_simplex, topheavy};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pv(w: &[f64]) -> ProbabilityVector {
        ProbabilityVector::new_checked(w.to_vec(), false).unwrap()
    }

    #[test]
    fn f_examples() {
        let u = ProbabilityVector::uniform(7).unwrap();
        assert_abs_diff_eq!(f_sum(&u, 0.0), 7.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f_sum(&u, 3.0), 7.0 * (-3.0f64 / 7.0).exp(), epsilon = 1e-13);
        let p = pv(&[0.75, 0.25]);
        assert_abs_diff_eq!(f_sum(&p, 4.0), (-3.0f64).exp() + (-1.0f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(f_sum(&p, 4.0), 0.417666, epsilon = 1e-6);
    }

    #[test]
    fn phi_psi_examples() {
        let u = ProbabilityVector::uniform(10).unwrap();
        assert_eq!(phi(&u, 0.0), 0.0);
        assert_eq!(psi(&u, 0.0), 0.0);
        assert_abs_diff_eq!(phi(&u, 4.0), 10.0 * (1.0 - (-0.4f64).exp()), epsilon = 1e-13);
        let expected = (10.0 + 10.0 * (1.0 - (-1.0f64).exp())) / 2.0;
        assert_abs_diff_eq!(psi(&u, 10.0), expected, epsilon = 1e-13);
        assert_abs_diff_eq!(psi(&u, 10.0), 8.161, epsilon = 1e-3);
    }

    #[test]
    fn expected_next_examples() {
        let p = pv(&[0.5, 0.5]);
        assert_eq!(expected_next(&p, 1), 1.0);
        assert_abs_diff_eq!(expected_next(&p, 2), 1.5, epsilon = 1e-15);
        let point = pv(&[1.0, 0.0, 0.0]);
        assert_eq!(expected_next(&point, 5), 1.0);
    }

    #[test]
    fn ordering_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let n = rng.random_range(2..40);
            let p = random_simplex(n, &mut rng);
            let k = rng.random_range(1..=n);
            let kf = k as f64;
            let (ph, ps, en) = (phi(&p, kf), psi(&p, kf), expected_next(&p, k));
            assert!(0.0 <= ph && ph <= en + 1e-12 && en <= kf + 1e-12);
            assert!(ph <= ps && ps <= kf);
            assert!(ps < kf, "psi({kf}) = {ps}");
            assert_abs_diff_eq!(ph + f_sum(&p, kf), n as f64, epsilon = 1e-12);
            let u = ProbabilityVector::uniform(n).unwrap();
            assert!(f_sum(&p, kf) >= f_sum(&u, kf) - 1e-12);
        }
    }

    #[test]
    fn h_margin_behaviour() {
        let u = ProbabilityVector::uniform(50).unwrap();
        assert!(h_margin(&u, 1e-4) < 1e-12);
        for k in 1..=50 {
            let k = k as f64;
            assert!(h_margin(&u, k) >= k.powi(3) / (36.0 * 2500.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let n = rng.random_range(2..50);
            let p = random_simplex(n, &mut rng);
            for k in 1..n {
                assert!(h_margin(&p, k as f64 + 1.0) > h_margin(&p, k as f64) - 1e-12);
            }
        }
    }

    #[test]
    fn thresholds() {
        let n = 1000;
        assert_abs_diff_eq!(
            k_star(1.0 / n as f64, n, 0.2),
            n as f64 * (n as f64).ln().powf(-0.2),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(k_star(0.1, 16, 0.2), 8.15, epsilon = 5e-3);
        let direct = 10.0 * (-0.05 * 100f64.ln().ln()).exp();
        assert_abs_diff_eq!(k_one(0.01, 100, 0.2), direct, epsilon = 1e-12);
        assert_abs_diff_eq!(k_one(0.01, 100, 0.2), 9.265, epsilon = 1e-3);
        for (c2, n) in [(0.01, 100), (0.1, 16), (0.5, 1000), (1e-4, 10_000)] {
            assert!(k_one(c2, n, 0.2) < k_star(c2, n, 0.2));
        }
    }

    #[test]
    fn psi_iteration() {
        let u = ProbabilityVector::uniform(100).unwrap();
        let tr = iterate_psi(&u, 40.0, 40.0, 10).unwrap();
        assert_eq!(tr.hitting_time(), Some(0));
        let tr = iterate_psi(&u, 100.0, 1.0, 3).unwrap();
        assert_eq!(tr.stop_reason, StopReason::MaxIterations);
        assert!(iterate_psi(&u, 101.0, 1.0, 3).is_err());

        for (n, c2) in [(100usize, 0.02), (1000, 0.01), (1000, 0.3), (10_000, 0.001)] {
            let p = topheavy(n, c2).unwrap();
            let ks = k_star(c2, n, 0.2);
            let tr = iterate_psi(&p, n as f64, ks, 1_000_000).unwrap();
            let hit = tr.hitting_time().unwrap() as f64;
            assert!(hit <= 5.0 / c2.sqrt() * (n as f64).ln());
            assert!(tr.values.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn uniform_psi_follows_harmonic_envelope() {
        let n = 10_000;
        let u = ProbabilityVector::uniform(n).unwrap();
        let a = a_star(100_000).max(1.0);
        let tr = iterate_psi(&u, n as f64, 1.0, 1_000_000).unwrap();
        for (t, &x) in tr.values.iter().enumerate() {
            assert!(x <= a * n as f64 / (t as f64 + 1.0) + 1e-9, "t = {t}");
        }
    }

    #[test]
    fn envelope_dominates_topheavy_iterates() {
        let (n, c2) = (1000, 0.01);
        let p = topheavy(n, c2).unwrap();
        assert_abs_diff_eq!(topheavy_linear_envelope(c2, n, 0), 1000.0 + 20.0, epsilon = 1e-9);
        let tr = iterate_psi(&p, n as f64, k_star(c2, n, 0.2), 100_000).unwrap();
        for (t, &x) in tr.values.iter().enumerate() {
            assert!(x <= topheavy_linear_envelope(c2, n, t));
            assert!(topheavy_linear_envelope(c2, n, t + 1) < topheavy_linear_envelope(c2, n, t));
        }
    }

    #[test]
    fn case2_root_behaviour() {
        assert!(case2_root(0).is_err());
        let x1 = case2_root(1).unwrap();
        assert_abs_diff_eq!(-(-x1).exp_m1(), x1 / 3.0, epsilon = 1e-12);
        let prod = 1002.0 * case2_root(1000).unwrap();
        assert!((3.9..=4.1).contains(&prod), "{prod}");
        let roots: Vec<f64> = (1..=100).map(|t| case2_root(t).unwrap()).collect();
        assert!(roots.windows(2).all(|w| w[1] < w[0]));
        let a = a_star(100_000);
        assert_abs_diff_eq!(a, 2.0 * x1, epsilon = 1e-12);
    }

    #[test]
    fn eta_gamma() {
        assert_eq!(eta(0.0), 0.0);
        let grid: Vec<f64> = (0..=100).map(|i| 3f64.ln() * i as f64 / 100.0).collect();
        assert!(grid.windows(2).all(|w| eta(w[1]) > eta(w[0])));
        for i in 0..1000 {
            let x = i as f64 * 0.02;
            assert!(eta(x) <= -(-x).exp_m1() + 1e-15);
        }
        let (n, c) = (100.0, 0.04);
        let g = gamma_of(c);
        assert_abs_diff_eq!(g, 0.6, epsilon = 1e-15);
        let mut x = 1.0 - 1.0 / (n - 1.0);
        for t in 0..=200 {
            assert!(x >= 2.0 / 3.0 * g.powi(t) / (t as f64 + 1.0), "t = {t}");
            x = eta(g * x);
        }
    }
}
