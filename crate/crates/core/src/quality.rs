//! The `Num_err` audit of a returned solution: primal feasibility violation,
//! dual feasibility violation, and duality-gap violation. Coupling rows are
//! not audited; they only assign `p`.

use serde::{Deserialize, Serialize};

use crate::model::{lambda_dot_b, ExpConeModel};

/// Value standing in for `-inf` when some `mu` leaves the log domain.
pub const DUAL_DOMAIN_SENTINEL: f64 = -1e308;

/// `mu` values at or above this are treated as outside the log domain.
const MU_CEILING: f64 = -1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumErr {
    pub primal_violation: f64,
    pub dual_violation: f64,
    pub gap_violation: f64,
    /// Some `mu` was not strictly negative.
    pub dual_domain_violation: bool,
}

impl NumErr {
    pub fn as_array(&self) -> [f64; 3] {
        [
            self.primal_violation,
            self.dual_violation,
            self.gap_violation,
        ]
    }

    /// Largest component in absolute value.
    pub fn max_abs(&self) -> f64 {
        self.as_array().iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualViolation {
    pub value: f64,
    pub domain_violation: bool,
}

/// `max(|q'_{x,y,*} - b_y|, |q'_{x,*,z} - b_z|, -q)` with `q' = max(q, 0)`.
pub fn primal_violation(model: &ExpConeModel, q: &[f64]) -> f64 {
    let n_y = model.y_rows.len();
    let mut sums = vec![0.0; model.num_marginal_rows()];
    let mut worst = 0.0_f64;
    for (tr, &v) in model.rows_of.iter().zip(q) {
        worst = worst.max(-v);
        let clipped = v.max(0.0);
        sums[tr.y_row] += clipped;
        sums[n_y + tr.z_row] += clipped;
    }
    model
        .marginal_rhs()
        .iter()
        .zip(&sums)
        .fold(worst, |a, (b, s)| a.max((s - b).abs()))
}

/// `min(lambda_{x,y} + lambda_{x,z} + mu_{*,y,z} + 1 + ln(-mu_{x,y,z}), 0)`.
pub fn dual_violation(
    model: &ExpConeModel,
    lambda_y: &[f64],
    lambda_z: &[f64],
    mu: &[f64],
) -> DualViolation {
    let mu_star = model.group_mass(mu);
    let mut value = 0.0_f64;
    let mut domain_violation = false;
    for (tr, &m) in model.rows_of.iter().zip(mu) {
        if m >= MU_CEILING || m.is_nan() {
            domain_violation = true;
            continue;
        }
        let row = lambda_y[tr.y_row] + lambda_z[tr.z_row] + mu_star[tr.group] + 1.0 + (-m).ln();
        value = value.min(row);
    }
    if domain_violation {
        value = DUAL_DOMAIN_SENTINEL;
    }
    DualViolation {
        value,
        domain_violation,
    }
}

/// `-H(X|Y,Z) + lambda^T b` before clamping, with `H` taken over the
/// strictly positive entries of `q`.
pub fn gap_margin(model: &ExpConeModel, q: &[f64], lambda_y: &[f64], lambda_z: &[f64]) -> f64 {
    let positive: Vec<f64> = q.iter().map(|&v| v.max(0.0)).collect();
    let mass = model.group_mass(&positive);
    let h: f64 = model
        .rows_of
        .iter()
        .zip(&positive)
        .filter(|(_, &v)| v > 0.0)
        .map(|(tr, &v)| v * (mass[tr.group] / v).ln())
        .sum();
    -h + lambda_dot_b(model, lambda_y, lambda_z)
}

/// `max(-H(X|Y,Z) + lambda^T b, 0)`.
pub fn gap_violation(model: &ExpConeModel, q: &[f64], lambda_y: &[f64], lambda_z: &[f64]) -> f64 {
    gap_margin(model, q, lambda_y, lambda_z).max(0.0)
}

pub fn audit(
    model: &ExpConeModel,
    q: &[f64],
    lambda_y: &[f64],
    lambda_z: &[f64],
    mu: &[f64],
) -> NumErr {
    let dual = dual_violation(model, lambda_y, lambda_z, mu);
    NumErr {
        primal_violation: primal_violation(model, q),
        dual_violation: dual.value,
        gap_violation: gap_violation(model, q, lambda_y, lambda_z),
        dual_domain_violation: dual.domain_violation,
    }
}
