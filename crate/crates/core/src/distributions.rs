//! Allocation laws: validated probability vectors, their collision moments,
//! and the extremal families that minimize `F_q(k) = Σ exp(-k q_j)` under
//! moment constraints.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of an un-normalized input from total mass 1.
pub const INPUT_SUM_TOLERANCE: f64 = 1e-9;

const MOMENT_SLACK: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 200;
const NEWTON_TOL: f64 = 1e-12;
const SHAPE_TOL: f64 = 1e-9;

/// A probability vector `p = (p_1, ..., p_n)` over `n >= 2` boxes.
///
/// Stored order is preserved; `sorted_desc` gives the nonincreasing view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityVector {
    weights: Vec<f64>,
}

/// Collision moments `c2 = Σ p²` and `c3 = Σ p³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub c2: f64,
    pub c3: f64,
}

impl ProbabilityVector {
    /// Validates `weights`. With `normalize` the weights are divided by their
    /// sum; without it the sum must already be within 1e-9 of one.
    pub fn new_checked(weights: Vec<f64>, normalize: bool) -> Result<Self> {
        if weights.len() < 2 {
            return Err(Error::TooShort(weights.len()));
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroSum);
        }
        if !normalize && (sum - 1.0).abs() > INPUT_SUM_TOLERANCE {
            return Err(Error::NotNormalized { sum });
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooShort(n));
        }
        Ok(Self {
            weights: vec![1.0 / n as f64; n],
        })
    }

    /// Trusted constructor for vectors built by the closed forms below.
    fn from_parts(weights: Vec<f64>) -> Self {
        let sum: f64 = weights.iter().sum();
        Self {
            weights: weights.into_iter().map(|w| w.max(0.0) / sum).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut w = self.weights.clone();
        w.sort_by(|a, b| b.total_cmp(a));
        w
    }

    /// Run-length view of the sorted weights: `(value, multiplicity)` pairs,
    /// largest value first. Only exactly equal values are merged.
    pub fn runs(&self) -> Vec<(f64, usize)> {
        let mut runs: Vec<(f64, usize)> = Vec::new();
        for w in self.sorted_desc() {
            match runs.last_mut() {
                Some((v, m)) if *v == w => *m += 1,
                _ => runs.push((w, 1)),
            }
        }
        runs
    }

    pub fn moments(&self) -> Moments {
        let (c2, c3) = self
            .weights
            .iter()
            .fold((0.0, 0.0), |(s2, s3), &p| (s2 + p * p, s3 + p * p * p));
        Moments { c2, c3 }
    }

    pub fn is_uniform(&self) -> bool {
        let first = self.weights[0];
        self.weights.iter().all(|&w| w == first)
    }
}

impl Moments {
    /// `1/n <= c2` and `c2² <= c3 <= c2^{3/2}`, each with `slack`.
    pub fn is_consistent(&self, n: usize, slack: f64) -> bool {
        self.c2 >= 1.0 / n as f64 - slack
            && self.c3 >= self.c2 * self.c2 - slack
            && self.c3 <= self.c2.powf(1.5) + slack
    }
}

fn check_c2(n: usize, c2: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::TooShort(n));
    }
    let lo = 1.0 / n as f64;
    if !(c2 >= lo - MOMENT_SLACK && c2 <= 1.0 + MOMENT_SLACK) {
        return Err(Error::OutOfRange {
            name: "c2",
            value: c2,
            lo,
            hi: 1.0,
        });
    }
    Ok(())
}

/// The two-valued minimizer `θ(c2) = (θ1, θ2, ..., θ2)` with a single large
/// entry, `θ1 = (1 + sqrt((n-1)(n c2 - 1)))/n`.
pub fn topheavy(n: usize, c2: f64) -> Result<ProbabilityVector> {
    check_c2(n, c2)?;
    let nf = n as f64;
    let radicand = ((nf - 1.0) * (c2 * nf - 1.0)).max(0.0);
    let theta1 = ((1.0 + radicand.sqrt()) / nf).min(1.0);
    let theta2 = ((1.0 - theta1) / (nf - 1.0)).max(0.0);
    let mut weights = vec![theta2; n];
    weights[0] = theta1;
    Ok(ProbabilityVector { weights })
}

/// Three-level vector `(r1 ×ν, r2, r3 ×(n-ν-1))` with `r1 >= r2 >= r3 >= 0`
/// reproducing the moments `(c2, c3)`.
///
/// Damped Newton from `r1 = sqrt(c2/ν)` is tried first; when it fails or lands
/// on a vector of the wrong shape the one-dimensional scan of
/// [`three_level_all`] supplies the answer.
pub fn three_level(n: usize, c2: f64, c3: f64, nu: usize) -> Result<ProbabilityVector> {
    let system = ThreeLevelSystem::new(n, c2, c3, nu)?;
    if let Some(levels) = system.newton(system.initial_guess()) {
        if system.has_shape(levels) {
            return Ok(system.assemble(system.snap(levels)));
        }
    }
    let mut candidates = system.scan();
    if candidates.is_empty() {
        let residual = system
            .newton_raw(system.initial_guess())
            .map_or(f64::INFINITY, |(_, r)| r);
        return Err(Error::Infeasible(format!(
            "no three-level vector with nu = {nu} reproduces c2 = {c2}, c3 = {c3} \
             (Newton residual {residual:e})"
        )));
    }
    Ok(system.assemble(system.snap(candidates.remove(0))))
}

/// Every three-level vector for this `ν` found by scanning `r1` over its
/// feasible interval (there can be more than one).
pub fn three_level_all(n: usize, c2: f64, c3: f64, nu: usize) -> Result<Vec<ProbabilityVector>> {
    let system = ThreeLevelSystem::new(n, c2, c3, nu)?;
    Ok(system
        .scan()
        .into_iter()
        .map(|levels| system.assemble(system.snap(levels)))
        .collect())
}

struct ThreeLevelSystem {
    n: usize,
    nu: f64,
    mu: f64,
    c2: f64,
    c3: f64,
}

type Levels = [f64; 3];

impl ThreeLevelSystem {
    fn new(n: usize, c2: f64, c3: f64, nu: usize) -> Result<Self> {
        check_c2(n, c2)?;
        if nu < 1 || nu + 2 > n {
            return Err(Error::OutOfRange {
                name: "nu",
                value: nu as f64,
                lo: 1.0,
                hi: n as f64 - 2.0,
            });
        }
        let (lo, hi) = (c2 * c2, c2.powf(1.5));
        if !(c3 >= lo - MOMENT_SLACK && c3 <= hi + MOMENT_SLACK) {
            return Err(Error::OutOfRange {
                name: "c3",
                value: c3,
                lo,
                hi,
            });
        }
        Ok(Self {
            n,
            nu: nu as f64,
            mu: (n - nu - 1) as f64,
            c2,
            c3,
        })
    }

    fn initial_guess(&self) -> Levels {
        let r1 = (self.c2 / self.nu).sqrt();
        let r3 = (1.0 - self.nu * r1) / (self.n as f64 - self.nu);
        [r1, 0.5 * (r1 + r3), r3]
    }

    fn residual(&self, [a, b, c]: Levels) -> [f64; 3] {
        let (nu, mu) = (self.nu, self.mu);
        [
            nu * a + b + mu * c - 1.0,
            nu * a * a + b * b + mu * c * c - self.c2,
            nu * a.powi(3) + b.powi(3) + mu * c.powi(3) - self.c3,
        ]
    }

    fn norm(r: [f64; 3]) -> f64 {
        r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    fn newton_raw(&self, mut x: Levels) -> Option<(Levels, f64)> {
        let (nu, mu) = (self.nu, self.mu);
        let mut res = self.residual(x);
        for _ in 0..NEWTON_MAX_ITER {
            let norm = Self::norm(res);
            if norm <= NEWTON_TOL {
                return Some((x, norm));
            }
            let [a, b, c] = x;
            let jac = [
                [nu, 1.0, mu],
                [2.0 * nu * a, 2.0 * b, 2.0 * mu * c],
                [3.0 * nu * a * a, 3.0 * b * b, 3.0 * mu * c * c],
            ];
            let step = solve3(jac, res.map(|v| -v))?;
            let mut damping = 1.0;
            loop {
                let trial = [
                    x[0] + damping * step[0],
                    x[1] + damping * step[1],
                    x[2] + damping * step[2],
                ];
                let trial_res = self.residual(trial);
                if Self::norm(trial_res) < norm || damping < 1e-10 {
                    x = trial;
                    res = trial_res;
                    break;
                }
                damping *= 0.5;
            }
        }
        let norm = Self::norm(res);
        Some((x, norm))
    }

    fn newton(&self, x0: Levels) -> Option<Levels> {
        self.newton_raw(x0)
            .filter(|(_, r)| *r <= NEWTON_TOL)
            .map(|(x, _)| x)
    }

    /// The two-level solution `r2 = r3` at the top of the feasible `r1`
    /// range, when it reproduces `c3`.
    fn two_level(&self) -> Option<Levels> {
        let (nu, n) = (self.nu, self.n as f64);
        let disc = nu * nu + nu * n * ((self.mu + 1.0) * self.c2 - 1.0);
        if disc < 0.0 {
            return None;
        }
        let r1 = (nu + disc.sqrt()) / (nu * n);
        let r = (1.0 - nu * r1) / (self.mu + 1.0);
        let levels = [r1, r, r];
        (Self::norm(self.residual(levels)) <= 1e-11 && self.has_shape(levels)).then_some(levels)
    }

    /// Near `r2 = r3` the cubic residual is quadratic in the gap, so solvers
    /// stop about `sqrt(eps)` short; snap to the exact two-level vector.
    fn snap(&self, levels: Levels) -> Levels {
        if levels[1] - levels[2] > 1e-4 {
            return levels;
        }
        match self.two_level() {
            Some(t) if (0..3).all(|i| (t[i] - levels[i]).abs() < 1e-4) => t,
            _ => levels,
        }
    }

    fn has_shape(&self, [a, b, c]: Levels) -> bool {
        a >= b - SHAPE_TOL && b >= c - SHAPE_TOL && c >= -SHAPE_TOL
    }

    /// `(r2, r3)` on the branch `r2 >= r3` for a given `r1`, if real.
    fn tail_levels(&self, r1: f64) -> Option<(f64, f64)> {
        let (nu, mu) = (self.nu, self.mu);
        let a = 1.0 - nu * r1;
        let b = self.c2 - nu * r1 * r1;
        let disc = ((mu + 1.0) * b - a * a) / mu;
        if disc < -1e-14 {
            return None;
        }
        let root = disc.max(0.0).sqrt();
        Some(((a + mu * root) / (mu + 1.0), (a - root) / (mu + 1.0)))
    }

    fn cubic_gap(&self, r1: f64) -> Option<f64> {
        self.tail_levels(r1).map(|(r2, r3)| {
            self.nu * r1.powi(3) + r2.powi(3) + self.mu * r3.powi(3) - self.c3
        })
    }

    fn scan(&self) -> Vec<Levels> {
        const GRID: usize = 4000;
        let (nu, n) = (self.nu, self.n as f64);
        // (μ+1)(c2 - ν r1²) >= (1 - ν r1)² bounds r1 to [lo, hi].
        let disc = nu * nu + nu * n * ((self.mu + 1.0) * self.c2 - 1.0);
        if disc < 0.0 {
            return Vec::new();
        }
        let lo = ((nu - disc.sqrt()) / (nu * n)).max(0.0);
        let hi = (nu + disc.sqrt()) / (nu * n);
        if hi <= lo {
            return Vec::new();
        }
        let width = hi - lo;
        let mut roots = Vec::new();
        let consider = |r1: f64, roots: &mut Vec<f64>| {
            if !roots.iter().any(|&r| (r - r1).abs() <= 1e-9 * width.max(1e-300)) {
                roots.push(r1);
            }
        };
        let at = |i: usize| lo + width * i as f64 / GRID as f64;
        let mut prev: Option<(f64, f64)> = None;
        for i in 0..=GRID {
            let r1 = at(i);
            let Some(g) = self.cubic_gap(r1) else {
                prev = None;
                continue;
            };
            if g.abs() <= 1e-13 {
                consider(r1, &mut roots);
            }
            if let Some((r_prev, g_prev)) = prev {
                if g_prev * g < 0.0 {
                    consider(self.bisect(r_prev, r1, g_prev), &mut roots);
                }
            }
            prev = Some((r1, g));
        }
        let mut found: Vec<Levels> = roots
            .into_iter()
            .filter_map(|r1| {
                let (r2, r3) = self.tail_levels(r1)?;
                let mut levels = [r1, r2, r3];
                if r2 - r3 > 1e-7 {
                    if let Some(polished) = self.newton(levels) {
                        if (polished[0] - r1).abs() < 1e-6 {
                            levels = polished;
                        }
                    }
                }
                let ok = Self::norm(self.residual(levels)) <= 1e-10 && self.has_shape(levels);
                ok.then_some(levels)
            })
            .collect();
        found.sort_by(|a, b| b[0].total_cmp(&a[0]));
        found
    }

    fn bisect(&self, mut a: f64, mut b: f64, ga: f64) -> f64 {
        let sign_a = ga.signum();
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            match self.cubic_gap(m) {
                Some(g) if g.signum() == sign_a => a = m,
                Some(_) => b = m,
                None => break,
            }
            if (b - a).abs() <= 1e-16 * b.abs().max(1e-300) {
                break;
            }
        }
        0.5 * (a + b)
    }

    fn assemble(&self, [a, b, c]: Levels) -> ProbabilityVector {
        let nu = self.nu as usize;
        let mut w = vec![a.max(0.0); nu];
        w.push(b.max(0.0));
        w.extend(std::iter::repeat_n(c.max(0.0), self.n - nu - 1));
        ProbabilityVector::from_parts(w)
    }
}

/// Solves a 3×3 linear system by Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut rhs: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[pivot][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (rhs[row] - s) / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// A uniformly distributed point of the simplex (flat Dirichlet).
pub fn random_simplex<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ProbabilityVector {
    let w: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    ProbabilityVector::from_parts(w)
}

/// Samples a point with `Σq = 1` and `Σq² = c2`.
///
/// A flat-Dirichlet point `q0` is moved along the segment toward the uniform
/// vector (when its `c2` is too large) or toward the point mass at its largest
/// coordinate (when too small). Along either segment `Σq²` is a monotone
/// quadratic in the segment parameter, so the crossing is solved exactly.
pub fn sample_fixed_c2<R: Rng + ?Sized>(n: usize, c2: f64, rng: &mut R) -> Result<ProbabilityVector> {
    check_c2(n, c2)?;
    let nf = n as f64;
    let floor = 1.0 / nf;
    if c2 <= floor + 1e-15 {
        return ProbabilityVector::uniform(n);
    }
    let q0 = random_simplex(n, rng);
    let c0 = q0.moments().c2;
    let mut q = q0.weights;
    if c0 > c2 {
        let s = 1.0 - ((c2 - floor) / (c0 - floor)).sqrt();
        for w in &mut q {
            *w = (1.0 - s) * *w + s * floor;
        }
    } else if c0 < c2 {
        let (j, &qj) = q
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("n >= 2");
        // c2(s) = c0 + b s + a s², a = |q0 - e_j|², b = 2(q_j - c0) >= 0.
        let a = c0 - 2.0 * qj + 1.0;
        let b = 2.0 * (qj - c0);
        let gap = c2 - c0;
        let s = (2.0 * gap / (b + (b * b + 4.0 * a * gap).sqrt())).min(1.0);
        for (i, w) in q.iter_mut().enumerate() {
            *w = (1.0 - s) * *w + if i == j { s } else { 0.0 };
        }
    }
    Ok(ProbabilityVector::from_parts(q))
}

/// JSON descriptor of a distribution family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DistributionSpec {
    Uniform {
        n: usize,
    },
    Topheavy {
        n: usize,
        c2: f64,
    },
    ThreeLevel {
        n: usize,
        c2: f64,
        c3: f64,
        nu: usize,
    },
    Explicit {
        weights: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default)]
        normalize: bool,
    },
}

impl DistributionSpec {
    pub fn build(&self) -> Result<ProbabilityVector> {
        match self {
            DistributionSpec::Uniform { n } => ProbabilityVector::uniform(*n),
            DistributionSpec::Topheavy { n, c2 } => topheavy(*n, *c2),
            DistributionSpec::ThreeLevel { n, c2, c3, nu } => three_level(*n, *c2, *c3, *nu),
            DistributionSpec::Explicit {
                weights,
                n,
                normalize,
            } => {
                if let Some(n) = n {
                    if *n != weights.len() {
                        return Err(Error::Precondition(format!(
                            "descriptor says n = {n} but lists {} weights",
                            weights.len()
                        )));
                    }
                }
                ProbabilityVector::new_checked(weights.clone(), *normalize)
            }
        }
    }
}
