//! Exponential cone `K = cl{(r, p, q) : q > 0, q e^{r/q} <= p}`, its dual
//! `K* = cl{(u, v, w) : u < 0, -u e^{w/u} <= e v}`, and the degree-3
//! logarithmically homogeneous barrier used by the solver.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Barrier parameter of one cone block.
pub const BARRIER_DEGREE: f64 = 3.0;

/// One primal `(r, p, q)` block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ConePoint {
    pub r: f64,
    pub p: f64,
    pub q: f64,
}

/// One dual `(u, v, w)` block.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DualConePoint {
    pub u: f64,
    pub v: f64,
    pub w: f64,
}

impl ConePoint {
    pub const fn new(r: f64, p: f64, q: f64) -> Self {
        Self { r, p, q }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.p, self.q]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    /// `q ln(p/q) - r`, positive exactly on the interior when `p, q > 0`.
    pub fn log_slack(self) -> f64 {
        self.q * (self.p / self.q).ln() - self.r
    }

    pub fn dot(self, d: DualConePoint) -> f64 {
        self.r * d.u + self.p * d.v + self.q * d.w
    }
}

impl DualConePoint {
    pub const fn new(u: f64, v: f64, w: f64) -> Self {
        Self { u, v, w }
    }
}

pub fn in_exp_cone(pt: ConePoint, tol: f64) -> bool {
    let ConePoint { r, p, q } = pt;
    if q > 0.0 && q * (r / q).exp() <= p + tol {
        return true;
    }
    q.abs() <= tol && r <= tol && p >= -tol
}

pub fn in_dual_exp_cone(pt: DualConePoint, tol: f64) -> bool {
    let DualConePoint { u, v, w } = pt;
    if u < 0.0 && -u * (w / u).exp() <= E * v + tol {
        return true;
    }
    u.abs() <= tol && v >= -tol && w >= -tol
}

/// Value, gradient and Hessian of the barrier at one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierEval {
    pub value: f64,
    pub gradient: [f64; 3],
    pub hessian: [[f64; 3]; 3],
    /// `hessian^{-1}`, formed in closed form rather than by factorization.
    pub inverse_hessian: [[f64; 3]; 3],
}

/// `-ln(q ln(p/q) - r) - ln p - ln q` and its exact first and second
/// derivatives in `(r, p, q)`.
///
/// Returns [`Error::BoundaryPoint`] unless `p > 0`, `q > 0` and the log slack
/// is positive. Nothing is clamped: the caller is expected to shorten its step.
pub fn barrier(pt: ConePoint) -> Result<BarrierEval> {
    let ConePoint { r: _, p, q } = pt;
    if !(p > 0.0 && q > 0.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::BoundaryPoint);
    }
    let log_ratio = (p / q).ln();
    let s = q * log_ratio - pt.r;
    if s.is_nan() || s <= 0.0 || s.is_infinite() {
        return Err(Error::BoundaryPoint);
    }

    // Gradient of the slack s(r, p, q).
    let ds = [-1.0, q / p, log_ratio - 1.0];
    let value = -s.ln() - p.ln() - q.ln();
    let gradient = [-ds[0] / s, -ds[1] / s - 1.0 / p, -ds[2] / s - 1.0 / q];

    // Hessian of -ln s is (ds ds^T)/s^2 - (d2s)/s; d2s only touches (p, q).
    let mut hessian = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            hessian[i][j] = ds[i] * ds[j] / (s * s);
        }
    }
    let d2s_pp = -q / (p * p);
    let d2s_pq = 1.0 / p;
    let d2s_qq = -1.0 / q;
    hessian[1][1] += -d2s_pp / s + 1.0 / (p * p);
    hessian[1][2] += -d2s_pq / s;
    hessian[2][1] += -d2s_pq / s;
    hessian[2][2] += -d2s_qq / s + 1.0 / (q * q);

    Ok(BarrierEval {
        value,
        gradient,
        hessian,
        inverse_hessian: inverse_hessian(s, p, q, ds[1], ds[2]),
    })
}

/// In the coordinates `(s, p, q)` the barrier is `-ln s - ln p - ln q`, so
/// `H = J^{-T} M J^{-1}` where `J = d(r, p, q)/d(s, p, q)` and `M` is block
/// diagonal. Hence `H^{-1} = J M^{-1} J^T` with every term a sum of
/// nonnegative quadratic forms, which stays accurate even when `s` is tiny
/// and `H` is numerically rank one.
fn inverse_hessian(s: f64, p: f64, q: f64, a1: f64, a2: f64) -> [[f64; 3]; 3] {
    let denom = s + 2.0 * q;
    let kpp = p * p * (s + q) / denom;
    let kpq = p * q * q / denom;
    let kqq = q * q * (s + q) / denom;
    let k01 = a1 * kpp + a2 * kpq;
    let k02 = a1 * kpq + a2 * kqq;
    let k00 = s * s + a1 * a1 * kpp + 2.0 * a1 * a2 * kpq + a2 * a2 * kqq;
    [[k00, k01, k02], [k01, kpp, kpq], [k02, kpq, kqq]]
}
