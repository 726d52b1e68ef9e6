//! Chernoff-type tail bounds for the next ball count, the tilted exponent
//! `H(z, r, b)` and its stationary curve, and the lower bound on `E[T(m)]`.
//!
//! With `a_j = n p_j r` and `u_j = e^{-a_j}`,
//! `H = k ln(k/(r n e)) - b ln z + Σ [a_j + ln(u_j + z(1 - u_j))]`,
//! which never exponentiates a positive argument.

use serde::Serialize;

use crate::distributions::ProbabilityVector;
use crate::dynamics::{h_margin, k_star, phi};
use crate::error::{Error, Result};
use crate::report::{fmt_f64, Csv};

const NEWTON_TOL: f64 = 1e-9;
const NEWTON_MAX_ITER: usize = 100;

/// `H(z, r, b)`.
pub fn h_value(p: &ProbabilityVector, k: usize, z: f64, r: f64, b: f64) -> f64 {
    let (n, kf) = (p.n() as f64, k as f64);
    let sum: f64 = p
        .weights()
        .iter()
        .map(|&w| {
            let a = n * w * r;
            let u = (-a).exp();
            a + (u + z * (1.0 - u)).ln()
        })
        .sum();
    kf * ((kf / (r * n)).ln() - 1.0) - b * z.ln() + sum
}

/// Gradient and Hessian of `H` in `(z, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub hz: f64,
    pub hr: f64,
    pub hzz: f64,
    pub hrr: f64,
    pub hrz: f64,
}

impl Derivatives {
    /// `χ = H_zz H_rr - H_rz²`.
    pub fn chi(&self) -> f64 {
        self.hzz * self.hrr - self.hrz * self.hrz
    }
}

pub fn derivatives(p: &ProbabilityVector, k: usize, z: f64, r: f64, b: f64) -> Derivatives {
    let (n, kf) = (p.n() as f64, k as f64);
    let (mut s_z, mut s_r, mut s_zz, mut s_rz, mut s_rr) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &w in p.weights() {
        let np = n * w;
        let u = (-np * r).exp();
        let d = u + z * (1.0 - u);
        let ratio = (1.0 - u) / d;
        s_z += ratio;
        s_r += np / d;
        s_zz += ratio * ratio;
        let e_d2 = u / (d * d);
        s_rz += np * e_d2;
        s_rr += np * np * e_d2;
    }
    Derivatives {
        hz: -b / z + s_z,
        hr: -kf / r + z * s_r,
        hzz: b / (z * z) - s_zz,
        hrr: kf / (r * r) + z * (1.0 - z) * s_rr,
        hrz: s_rz,
    }
}

/// A point `(z(b), r(b))` with `H_z = H_r = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub b: f64,
    pub z: f64,
    pub r: f64,
    pub residual_z: f64,
    pub residual_r: f64,
}

/// `b* = Φ_p(k)`, where the stationary point is `(1, k/n)`.
pub fn b_star(p: &ProbabilityVector, k: usize) -> f64 {
    phi(p, k as f64)
}

/// Newton on `(ln z, r)` for the scaled system `z H_z = 0, H_r = 0`, with
/// step halving on the residual norm.
fn newton(p: &ProbabilityVector, k: usize, b: f64, z0: f64, r0: f64) -> Result<(f64, f64, Derivatives)> {
    let norm = |d: &Derivatives| d.hz.abs().max(d.hr.abs());
    let scaled = |z: f64, d: &Derivatives| (z * d.hz).abs().max(d.hr.abs());
    let (mut zeta, mut r) = (z0.ln(), r0);
    let mut d = derivatives(p, k, z0, r0, b);
    for _ in 0..NEWTON_MAX_ITER {
        let z = zeta.exp();
        if norm(&d) <= NEWTON_TOL * 1e-3 {
            break;
        }
        // Jacobian of (z H_z, H_r) in (ζ, r).
        let j11 = z * d.hz + z * z * d.hzz;
        let j12 = z * d.hrz;
        let j21 = z * d.hrz;
        let j22 = d.hrr;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let f1 = z * d.hz;
        let f2 = d.hr;
        let dzeta = -(j22 * f1 - j12 * f2) / det;
        let dr = -(j11 * f2 - j21 * f1) / det;
        let current = scaled(z, &d);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let (zt, rt) = (zeta + t * dzeta, r + t * dr);
            if rt > 0.0 && zt.is_finite() {
                let dt = derivatives(p, k, zt.exp(), rt, b);
                if scaled(zt.exp(), &dt) < current {
                    zeta = zt;
                    r = rt;
                    d = dt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let z = zeta.exp();
    if norm(&d) <= NEWTON_TOL && z.is_finite() && z > 0.0 && r.is_finite() {
        Ok((z, r, d))
    } else {
        Err(Error::NoConvergence {
            what: "stationary system",
            residual: norm(&d),
        })
    }
}

/// Solves `H_z = H_r = 0` at `b` by Newton continuation from `b*` in steps of
/// `k/50`; a failed step is retried with halved increments a few times.
pub fn solve_stationary(p: &ProbabilityVector, k: usize, b: f64) -> Result<StationaryPoint> {
    if k == 0 || k > p.n() {
        return Err(Error::StateOutOfRange { k, n: p.n() });
    }
    let start = b_star(p, k);
    let full_step = k as f64 / 50.0;
    let (mut z, mut r) = (1.0, k as f64 / p.n() as f64);
    let mut at = start;
    let mut step = full_step;
    let d = loop {
        let remaining = b - at;
        let next = if remaining.abs() <= step {
            b
        } else {
            at + step.copysign(remaining)
        };
        match newton(p, k, next, z, r) {
            Ok((zi, ri, di)) => {
                (z, r) = (zi, ri);
                at = next;
                step = (2.0 * step).min(full_step);
                if at == b {
                    break di;
                }
            }
            Err(e) => {
                step *= 0.5;
                if step < full_step / 64.0 {
                    return Err(e);
                }
            }
        }
    };
    Ok(StationaryPoint {
        b,
        z,
        r,
        residual_z: d.hz,
        residual_r: d.hr,
    })
}

/// `h(b) = H(z(b), r(b), b)`.
pub fn h_curve(p: &ProbabilityVector, k: usize, b: f64) -> Result<(StationaryPoint, f64)> {
    let sp = solve_stationary(p, k, b)?;
    Ok((sp, h_value(p, k, sp.z, sp.r, b)))
}

/// Step of the central difference for `h'`.
pub const FD_STEP_FIRST: f64 = 1e-3;
/// Step of the second difference for `h''`.
pub const FD_STEP_SECOND: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvaturePoint {
    pub point: StationaryPoint,
    pub h: f64,
    /// `-ln z(b)`.
    pub h_prime: f64,
    pub h_prime_fd: f64,
    pub h_second_fd: f64,
    pub chi: f64,
    pub slope_ok: bool,
    pub concave_ok: bool,
    pub chi_ok: bool,
}

impl CurvaturePoint {
    pub fn passed(&self) -> bool {
        self.slope_ok && self.concave_ok && self.chi_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub k: usize,
    pub b_star: f64,
    pub points: Vec<CurvaturePoint>,
    /// Grid values at which some solve did not converge.
    pub skipped: Vec<f64>,
}

impl CurvatureReport {
    pub fn all_passed(&self) -> bool {
        self.points.iter().all(CurvaturePoint::passed)
    }

    /// `b, z, r, h, h2, chi` per solved point.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["b", "z", "r", "h", "h2", "chi"]);
        for pt in &self.points {
            csv.row(
                [
                    pt.point.b,
                    pt.point.z,
                    pt.point.r,
                    pt.h,
                    pt.h_second_fd,
                    pt.chi,
                ]
                .map(fmt_f64),
            );
        }
        csv.finish()
    }
}

/// Checks, at each grid value: `h'(b) = -ln z(b)` against an extrapolated
/// central difference (relative error 1e-4, absolute where `-ln z` is within 1e-9 of
/// zero); second difference `<= -1/k + 1e-6`; `χ > 0`.
pub fn curvature_check(p: &ProbabilityVector, k: usize, b_grid: &[f64]) -> CurvatureReport {
    let kf = k as f64;
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &b in b_grid {
        let solved = (|| -> Result<CurvaturePoint> {
            let (sp, h) = h_curve(p, k, b)?;
            let central = |d: f64| -> Result<f64> {
                Ok((h_curve(p, k, b + d)?.1 - h_curve(p, k, b - d)?.1) / (2.0 * d))
            };
            let (_, h_plus2) = h_curve(p, k, b + FD_STEP_SECOND)?;
            let (_, h_minus2) = h_curve(p, k, b - FD_STEP_SECOND)?;
            let h_prime = -sp.z.ln();
            // Richardson step cancels the O(d²) term of the central difference.
            let coarse = central(FD_STEP_FIRST)?;
            let h_prime_fd = (4.0 * central(FD_STEP_FIRST / 2.0)? - coarse) / 3.0;
            let h_second_fd = (h_plus2 - 2.0 * h + h_minus2) / (FD_STEP_SECOND * FD_STEP_SECOND);
            let err = (h_prime_fd - h_prime).abs();
            let slope_ok = if h_prime.abs() <= 1e-9 {
                err <= 1e-6
            } else {
                err <= 1e-4 * h_prime.abs()
            };
            let chi = derivatives(p, k, sp.z, sp.r, b).chi();
            Ok(CurvaturePoint {
                point: sp,
                h,
                h_prime,
                h_prime_fd,
                h_second_fd,
                chi,
                slope_ok,
                concave_ok: h_second_fd <= -1.0 / kf + 1e-6,
                chi_ok: chi > 0.0,
            })
        })();
        match solved {
            Ok(pt) => points.push(pt),
            Err(_) => skipped.push(b),
        }
    }
    CurvatureReport {
        k,
        b_star: b_star(p, k),
        points,
        skipped,
    }
}

fn check_side(p: &ProbabilityVector, k: usize, b: f64, below: bool) -> Result<f64> {
    let center = phi(p, k as f64);
    if (below && b > center) || (!below && b < center) {
        return Err(Error::Precondition(format!(
            "b = {b} is on the wrong side of Φ_p(k) = {center}"
        )));
    }
    Ok(center)
}

/// `ln(3√k) - (Φ_p(k) - b)²/(2k)`.
fn ln_chernoff(k: usize, center: f64, b: f64) -> f64 {
    let kf = k as f64;
    (3.0 * kf.sqrt()).ln() - (center - b).powi(2) / (2.0 * kf)
}

/// Bound on `P(B(t+1) <= b | B(t) = k)` for `b <= Φ_p(k)`. May exceed 1.
pub fn chernoff_minus(p: &ProbabilityVector, k: usize, b: f64) -> Result<f64> {
    let center = check_side(p, k, b, true)?;
    Ok(ln_chernoff(k, center, b).exp())
}

/// Bound on `P(B(t+1) >= b | B(t) = k)` for `b >= Φ_p(k)`. May exceed 1.
pub fn chernoff_plus(p: &ProbabilityVector, k: usize, b: f64) -> Result<f64> {
    let center = check_side(p, k, b, false)?;
    Ok(ln_chernoff(k, center, b).exp())
}

/// `2/c2 (1 - 1/m - (m-1)(m-2) c3 / (12 c2))`, a lower bound on `E[T(m)]`.
pub fn lower_bound_et(c2: f64, c3: f64, m: usize) -> f64 {
    let mf = m as f64;
    2.0 / c2 * (1.0 - 1.0 / mf - (mf - 1.0) * (mf - 2.0) * c3 / (12.0 * c2))
}

/// `H_p(k*) / (ln n)^{1+ε}`; grows with `n` when the margin at `k*` beats
/// any fixed multiple of `(ln n)^{1+ε}`.
pub fn margin_ratio_at_k_star(p: &ProbabilityVector, eps: f64) -> f64 {
    let n = p.n();
    let ks = k_star(p.moments().c2, n, eps).min(n as f64);
    h_margin(p, ks) / (n as f64).ln().powf(1.0 + eps)
}
