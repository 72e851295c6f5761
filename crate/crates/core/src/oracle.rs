//! Brute-force reference minimizer for small instances.
//!
//! The feasible set of the convex program, `{q >= 0 : q_{x,y,*} = b_y,
//! q_{x,*,z} = b_z}`, is parametrized as `q = q0 + N alpha` with `N` an
//! orthonormal null-space basis of the marginal equations. The objective
//! `sum q ln(q / q_{*,y,z}) = -H(X|Y,Z)` is then minimized by exhaustive grid
//! search over `alpha`, followed by one coordinate-wise refinement pass on a
//! grid a hundred times finer. Nothing here shares code with the barrier
//! solver it is used to certify.

use nalgebra::{DMatrix, DVector};

use crate::distributions::JointDistribution;
use crate::error::{Error, Result};
use crate::model::ExpConeModel;
use crate::pid::{decompose, SolveMeta};
use crate::quality::NumErr;
use crate::solver::SolveStatus;

/// Largest null-space dimension the grid search accepts.
pub const MAX_DIMENSION: usize = 3;
/// Singular values at or below this count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Entries of `q` this far below zero are treated as rounding and clipped.
const CLIP_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeParam {
    /// Least-squares particular solution of the marginal equations.
    pub q0: Vec<f64>,
    /// Orthonormal null-space basis, one vector per column.
    pub basis: Vec<Vec<f64>>,
    /// Bounds on each `alpha` coordinate implied by `0 <= q <= min(b_y, b_z)`.
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl PolytopeParam {
    pub fn new(model: &ExpConeModel) -> Self {
        let n = model.num_triplets();
        let n_y = model.y_rows.len();
        let m = model.num_marginal_rows();
        // Pad with zero rows so the SVD returns a full set of right vectors.
        let rows = m.max(n);
        let mut a = DMatrix::<f64>::zeros(rows, n);
        for (i, tr) in model.rows_of.iter().enumerate() {
            a[(tr.y_row, i)] = 1.0;
            a[(n_y + tr.z_row, i)] = 1.0;
        }
        let mut b = DVector::<f64>::zeros(rows);
        for (k, v) in model.marginal_rhs().into_iter().enumerate() {
            b[k] = v;
        }
        let svd = a.svd(true, true);
        let q0: Vec<f64> = svd
            .solve(&b, RANK_THRESHOLD)
            .expect("SVD computed with both factors")
            .iter()
            .copied()
            .collect();
        let v_t = svd.v_t.as_ref().expect("SVD computed with V");
        let basis: Vec<Vec<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, &s)| s <= RANK_THRESHOLD)
            .map(|(k, _)| v_t.row(k).iter().copied().collect())
            .collect();

        let cap: Vec<f64> = model
            .index
            .triplets()
            .iter()
            .map(|&(x, y, z)| model.marginals.b_y[&(x, y)].min(model.marginals.b_z[&(x, z)]))
            .collect();
        let mut lower = Vec::with_capacity(basis.len());
        let mut upper = Vec::with_capacity(basis.len());
        for v in &basis {
            let (mut lo, mut hi) = (0.0, 0.0);
            for i in 0..n {
                let a = v[i] * (0.0 - q0[i]);
                let c = v[i] * (cap[i] - q0[i]);
                lo += a.min(c);
                hi += a.max(c);
            }
            lower.push(lo);
            upper.push(hi);
        }
        Self {
            q0,
            basis,
            lower,
            upper,
        }
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// `q0 + N alpha`, or `None` when some entry is negative beyond rounding.
    pub fn point(&self, alpha: &[f64]) -> Option<Vec<f64>> {
        let mut q = self.q0.clone();
        for (v, &a) in self.basis.iter().zip(alpha) {
            for (qi, vi) in q.iter_mut().zip(v) {
                *qi += a * vi;
            }
        }
        for qi in &mut q {
            if *qi < -CLIP_TOL {
                return None;
            }
            *qi = qi.max(0.0);
        }
        Some(q)
    }
}

/// `sum q ln(q / q_{*,y,z})` in nats; zero entries contribute nothing.
pub fn objective(model: &ExpConeModel, q: &[f64]) -> f64 {
    let mass = model.group_mass(q);
    model
        .rows_of
        .iter()
        .zip(q)
        .filter(|(_, &v)| v > 0.0)
        .map(|(tr, &v)| v * (v / mass[tr.group]).ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub q: Vec<f64>,
    /// Minimum found, in nats.
    pub objective: f64,
    pub alpha: Vec<f64>,
    pub evaluations: usize,
}

/// Grid-minimize the convex program objective at spacing `grid_step`.
pub fn brute_force_min(model: &ExpConeModel, grid_step: f64) -> Result<OracleResult> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let poly = PolytopeParam::new(model);
    let d = poly.dimension();
    if d > MAX_DIMENSION {
        return Err(Error::DimensionTooLarge(d));
    }

    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut evaluations = 0;
    let mut consider = |alpha: &[f64], best: &mut Option<(f64, Vec<f64>, Vec<f64>)>| {
        evaluations += 1;
        if let Some(q) = poly.point(alpha) {
            let f = objective(model, &q);
            if best.as_ref().is_none_or(|(b, _, _)| f < *b) {
                *best = Some((f, alpha.to_vec(), q));
            }
        }
    };

    let counts: Vec<usize> = (0..d)
        .map(|k| ((poly.upper[k] - poly.lower[k]) / grid_step).floor() as usize + 1)
        .collect();
    let mut idx = vec![0usize; d];
    let mut alpha = vec![0.0; d];
    loop {
        for k in 0..d {
            alpha[k] = poly.lower[k] + idx[k] as f64 * grid_step;
        }
        consider(&alpha, &mut best);
        // Odometer increment; a zero-dimensional polytope visits one point.
        let mut k = 0;
        while k < d {
            idx[k] += 1;
            if idx[k] < counts[k] {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == d {
            break;
        }
    }

    let Some((_, incumbent, _)) = best.clone() else {
        return Err(Error::InfeasiblePoint(
            "grid contains no feasible point; refine the step".into(),
        ));
    };
    let fine = grid_step / 100.0;
    let mut current = incumbent;
    for k in 0..d {
        let centre = current[k];
        let mut trial = current.clone();
        for j in -100i32..=100 {
            trial[k] = centre + f64::from(j) * fine;
            consider(&trial, &mut best);
        }
        current = best.as_ref().expect("incumbent exists").1.clone();
    }

    let (objective, alpha, q) = best.expect("incumbent exists");
    Ok(OracleResult {
        q,
        objective,
        alpha,
        evaluations,
    })
}

/// `(SI, UIY, UIZ, CI)` in bits of the oracle optimum, via the same
/// decomposition formulas the estimator uses.
pub fn oracle_decomposition(
    p: &JointDistribution,
    model: &ExpConeModel,
    oracle: &OracleResult,
) -> Result<[f64; 4]> {
    let meta = SolveMeta {
        solver: "brute-force".into(),
        status: SolveStatus::Optimal,
        criterion: None,
        iterations: 0,
        newton_steps: oracle.evaluations,
    };
    let audit = NumErr {
        primal_violation: 0.0,
        dual_violation: 0.0,
        gap_violation: 0.0,
        dual_domain_violation: false,
    };
    decompose(p, model, &oracle.q, audit, meta).map(|r| r.parts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::marginals;
    use crate::gates::{gate, GateKind};
    use crate::model::build_model;
    use crate::quality::primal_violation;
    use std::f64::consts::LN_2;

    fn model(kind: GateKind) -> ExpConeModel {
        build_model(&marginals(&gate(kind))).unwrap()
    }

    #[test]
    fn basis_spans_null_space() {
        let m = model(GateKind::Xor);
        let poly = PolytopeParam::new(&m);
        // 8 unknowns, 8 marginal rows of rank 6.
        assert_eq!(poly.dimension(), 2);
        assert!(primal_violation(&m, &poly.q0) <= 1e-12);
        for v in &poly.basis {
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = poly.q0.iter().zip(v).map(|(a, b)| a + 0.01 * b).collect();
            let res = m.residual(
                &shifted
                    .iter()
                    .map(|&q| crate::cone::ConePoint::new(0.0, 0.0, q))
                    .collect::<Vec<_>>(),
            );
            for r in &res[..m.num_marginal_rows()] {
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rdn_is_a_single_point() {
        let m = model(GateKind::Rdn);
        let r = brute_force_min(&m, 1e-3).unwrap();
        assert_eq!(PolytopeParam::new(&m).dimension(), 0);
        assert!(r.objective.abs() < 1e-12);
        for q in r.q {
            assert!((q - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn xor_reaches_uniform_cube() {
        let m = model(GateKind::Xor);
        let r = brute_force_min(&m, 1e-3).unwrap();
        assert!((r.objective + LN_2).abs() < 1e-6, "{}", r.objective);
        assert!(primal_violation(&m, &r.q) <= 1e-12);
    }

    #[test]
    fn and_has_one_free_direction() {
        let m = model(GateKind::And);
        assert_eq!(PolytopeParam::new(&m).dimension(), 1);
        let r = brute_force_min(&m, 1e-4).unwrap();
        assert!((r.objective + 0.5 * LN_2).abs() < 1e-7, "{}", r.objective);
    }

    #[test]
    fn large_dimension_rejected() {
        let m = build_model(&marginals(
            &crate::gates::random_simplex_distribution(3, 3, 3, 1).unwrap(),
        ))
        .unwrap();
        assert!(matches!(
            brute_force_min(&m, 0.1),
            Err(Error::DimensionTooLarge(_))
        ));
        assert!(brute_force_min(&model(GateKind::And), 0.0).is_err());
    }
}
