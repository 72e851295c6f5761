//! Primal path-following barrier method for the exponential cone program.
//!
//! For a barrier parameter `t` the solver centers
//! `phi_t(w) = t c^T w + sum_i F(w_i)` subject to `A w = b` with equality
//! constrained Newton steps, then multiplies `t` by ten. On the central path
//! the duality gap equals `3 |T| / t`, which drives the stopping rule.
//!
//! The Newton system `[H A^T; A 0]` is solved through the normal equations
//! `A H^{-1} A^T y = A H^{-1} f - rho`. `H` is block diagonal with one 3x3
//! block per triplet, and coupling rows only interact inside a `(y, z)` group,
//! so the coupling block of the normal matrix is block diagonal. It is
//! eliminated group by group, leaving a dense Schur complement over the
//! marginal rows alone. That complement is singular with one null direction
//! per `x` (the XY rows and the XZ rows of `x` both sum to `q_{x,*,*}`); the
//! multiplier of the last XZ row of each `x` is pinned to zero, which selects
//! one solution without changing the step, `A^T y`, or `lambda^T b`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cone::{barrier, BarrierEval, ConePoint, DualConePoint, BARRIER_DEGREE};
use crate::error::{Error, Result};
use crate::linalg::{matvec3, Cholesky};
use crate::model::{initial_point, lambda_dot_b, ExpConeModel};
use crate::quality;

/// Name reported in the `Solver` field of results.
pub const SOLVER_NAME: &str = "expcone-barrier";

const T_INITIAL: f64 = 1.0;
const T_GROWTH: f64 = 10.0;
/// Centering stops once half the squared Newton decrement drops below this.
const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON_STEPS: usize = 80;
const FRACTION_TO_BOUNDARY: f64 = 0.99;
const ARMIJO: f64 = 0.01;
const MAX_BACKTRACKS: usize = 80;
/// Below this decrement the full Newton step is taken without a decrease test.
const FULL_STEP_DECREMENT: f64 = 0.25;
const REFINEMENT_PASSES: usize = 3;
const MAX_SHRINK: f64 = 10.0;

/// Tolerances and iteration budget. `max_iter` counts outer (centering)
/// iterations, each of which runs up to a fixed number of Newton steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    pub feastol: f64,
    pub abstol: f64,
    pub reltol: f64,
    pub feastol_inacc: f64,
    pub abstol_inacc: f64,
    pub reltol_inacc: f64,
    pub max_iter: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            feastol: 1e-7,
            abstol: 1e-6,
            reltol: 1e-6,
            feastol_inacc: 1e-3,
            abstol_inacc: 1e-4,
            reltol_inacc: 1e-4,
            max_iter: 100,
        }
    }
}

impl SolverParams {
    /// Names accepted by [`SolverParams::set`].
    pub const NAMES: [&'static str; 7] = [
        "feastol",
        "abstol",
        "reltol",
        "feastol_inacc",
        "abstol_inacc",
        "reltol_inacc",
        "max_iter",
    ];

    pub fn validate(&self) -> Result<()> {
        let strict = [
            ("feastol", self.feastol, self.feastol_inacc),
            ("abstol", self.abstol, self.abstol_inacc),
            ("reltol", self.reltol, self.reltol_inacc),
        ];
        for (name, tol, inacc) in strict {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} must be positive, got {tol}"
                )));
            }
            if !(inacc >= tol && inacc.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name}_inacc ({inacc}) must be at least {name} ({tol})"
                )));
            }
        }
        if self.max_iter < 1 {
            return Err(Error::InvalidParams("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Set one parameter by name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match name {
            "feastol" => self.feastol = value,
            "abstol" => self.abstol = value,
            "reltol" => self.reltol = value,
            "feastol_inacc" => self.feastol_inacc = value,
            "abstol_inacc" => self.abstol_inacc = value,
            "reltol_inacc" => self.reltol_inacc = value,
            "max_iter" => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::InvalidParams(format!(
                        "max_iter must be a positive integer, got {value}"
                    )));
                }
                self.max_iter = value as usize;
            }
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown parameter `{other}`; valid names are {}",
                    Self::NAMES.join(", ")
                )))
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    OptimalInaccurate,
    MaxIterations,
    NumericalFailure,
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::OptimalInaccurate => "optimal_inaccurate",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::NumericalFailure => "numerical_failure",
        })
    }
}

/// Which gap test ended the solve. When both hold the absolute one is reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GapCriterion {
    Absolute,
    Relative,
}

/// Diagnostics of one outer iteration, taken at the centered point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub t: f64,
    pub newton_steps: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub gap_bound: f64,
    pub primal_residual: f64,
    pub dual_violation: f64,
}

/// Dual multipliers in the row order of the model: `lambda_y` per XY row,
/// `lambda_z` per XZ row, `mu` per coupling row (triplet), and the cone
/// multipliers `nu = c + A^T (lambda, mu)` per triplet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub lambda_y: Vec<f64>,
    pub lambda_z: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<DualConePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualSolution {
    pub primal: Vec<ConePoint>,
    pub lambda_y: Vec<f64>,
    pub lambda_z: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<DualConePoint>,
    pub status: SolveStatus,
    pub criterion: Option<GapCriterion>,
    pub iterations: usize,
    pub newton_steps: usize,
    pub objective_primal: f64,
    pub objective_dual: f64,
    /// Barrier parameter of the returned iterate.
    pub t: f64,
    pub trace: Vec<IterationRecord>,
}

impl PrimalDualSolution {
    /// The `q` coordinate of every block.
    pub fn q(&self) -> Vec<f64> {
        self.primal.iter().map(|b| b.q).collect()
    }
}

/// Iterate plus the Newton multipliers computed there.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierState {
    pub t: f64,
    pub primal: Vec<ConePoint>,
    /// Multipliers `y` of `H dw + A^T y = -(t c + g)`, in row order.
    pub multipliers: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonDirection {
    pub step: Vec<[f64; 3]>,
    pub multipliers: Vec<f64>,
    /// `dw^T H dw`.
    pub decrement_sq: f64,
}

/// `c^T w + b^T eta`; coupling rows have zero right-hand side.
pub fn duality_gap(solution: &PrimalDualSolution, model: &ExpConeModel) -> f64 {
    model.primal_objective(&solution.primal)
        + lambda_dot_b(model, &solution.lambda_y, &solution.lambda_z)
}

/// Read the dual solution off a barrier iterate: `eta = y / t` and
/// `nu = c + A^T eta`, so that `nu1 = -1`, `nu2 = -mu` and
/// `nu3 = lambda_y + lambda_z + mu_{*,y,z}` hold exactly.
pub fn recover_duals(model: &ExpConeModel, state: &BarrierState) -> Result<DualSolution> {
    if !(state.t > 0.0 && state.t.is_finite()) {
        return Err(Error::IllConditionedKkt(format!(
            "barrier parameter must be positive, got {}",
            state.t
        )));
    }
    if state.multipliers.len() != model.num_rows() {
        return Err(Error::IllConditionedKkt(format!(
            "expected {} multipliers, got {}",
            model.num_rows(),
            state.multipliers.len()
        )));
    }
    if state.multipliers.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllConditionedKkt("non-finite multiplier".into()));
    }
    let n_y = model.y_rows.len();
    let n_m = model.num_marginal_rows();
    let eta: Vec<f64> = state.multipliers.iter().map(|y| y / state.t).collect();
    let lambda_y = eta[..n_y].to_vec();
    let lambda_z = eta[n_y..n_m].to_vec();
    let mu = eta[n_m..].to_vec();
    let mu_star = model.group_mass(&mu);
    let nu = model
        .rows_of
        .iter()
        .zip(&mu)
        .map(|(tr, &m)| {
            DualConePoint::new(
                -1.0,
                -m,
                lambda_y[tr.y_row] + lambda_z[tr.z_row] + mu_star[tr.group],
            )
        })
        .collect();
    Ok(DualSolution {
        lambda_y,
        lambda_z,
        mu,
        nu,
    })
}

struct GroupFactor {
    chol: Cholesky,
    /// Marginal-row indices touched by the group: the XY rows of its members
    /// followed by their XZ rows.
    cols: Vec<usize>,
    /// Coupling block of the normal matrix against those rows, `2n x n`.
    b: Vec<f64>,
    /// `N_g^{-1} B^T`, `n x 2n`.
    w: Vec<f64>,
}

/// Factorization of the normal matrix at one iterate.
struct KktFactor<'m> {
    model: &'m ExpConeModel,
    hess: Vec<[[f64; 3]; 3]>,
    kinv: Vec<[[f64; 3]; 3]>,
    groups: Vec<GroupFactor>,
    schur: Cholesky,
    /// Marginal row -> position in the reduced Schur system (None when pinned).
    reduced: Vec<Option<usize>>,
}

impl<'m> KktFactor<'m> {
    fn new(model: &'m ExpConeModel, evals: &[BarrierEval]) -> Result<Self> {
        let n_y = model.y_rows.len();
        let n_m = model.num_marginal_rows();
        let hess: Vec<[[f64; 3]; 3]> = evals.iter().map(|e| e.hessian).collect();
        let kinv: Vec<[[f64; 3]; 3]> = evals.iter().map(|e| e.inverse_hessian).collect();
        if kinv.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(Error::IllConditionedKkt(
                "non-finite inverse Hessian".into(),
            ));
        }

        let mut schur = vec![0.0; n_m * n_m];
        for (tr, k) in model.rows_of.iter().zip(&kinv) {
            let a = tr.y_row;
            let b = n_y + tr.z_row;
            let kqq = k[2][2];
            schur[a * n_m + a] += kqq;
            schur[b * n_m + b] += kqq;
            schur[a * n_m + b] += kqq;
            schur[b * n_m + a] += kqq;
        }

        let mut groups = Vec::with_capacity(model.groups.len());
        for members in &model.groups {
            let n = members.len();
            let s_g: f64 = members.iter().map(|&j| kinv[j][2][2]).sum();
            let mut ng = vec![0.0; n * n];
            for (a, &ka) in members.iter().enumerate() {
                for (b, &kb) in members.iter().enumerate() {
                    let mut v = s_g - kinv[kb][2][1] - kinv[ka][1][2];
                    if a == b {
                        v += kinv[ka][1][1];
                    }
                    ng[a * n + b] = v;
                }
            }
            let chol = Cholesky::factor(ng, n).map_err(|_| {
                Error::IllConditionedKkt("coupling block not positive definite".into())
            })?;
            let cols: Vec<usize> = members
                .iter()
                .map(|&k| model.rows_of[k].y_row)
                .chain(members.iter().map(|&k| n_y + model.rows_of[k].z_row))
                .collect();
            let mut b = vec![0.0; 2 * n * n];
            for l in 0..2 * n {
                let i = members[l % n];
                for c in 0..n {
                    let mut v = kinv[i][2][2];
                    if c == l % n {
                        v -= kinv[i][2][1];
                    }
                    b[l * n + c] = v;
                }
            }
            let mut w = vec![0.0; n * 2 * n];
            let mut col = vec![0.0; n];
            for l in 0..2 * n {
                col.copy_from_slice(&b[l * n..(l + 1) * n]);
                chol.solve_in_place(&mut col);
                for c in 0..n {
                    w[c * 2 * n + l] = col[c];
                }
            }
            for (l1, &r1) in cols.iter().enumerate() {
                for (l2, &r2) in cols.iter().enumerate() {
                    let s: f64 = (0..n).map(|c| b[l1 * n + c] * w[c * 2 * n + l2]).sum();
                    schur[r1 * n_m + r2] -= s;
                }
            }
            groups.push(GroupFactor { chol, cols, b, w });
        }

        // Pin the last XZ row of every x.
        let mut reduced = vec![None; n_m];
        let mut pinned = vec![false; n_m];
        for (i, &(x, _)) in model.z_rows.iter().enumerate() {
            let last = model.z_rows.get(i + 1).is_none_or(|&(nx, _)| nx != x);
            if last {
                pinned[n_y + i] = true;
            }
        }
        let mut n_free = 0;
        for (r, slot) in reduced.iter_mut().enumerate() {
            if !pinned[r] {
                *slot = Some(n_free);
                n_free += 1;
            }
        }
        let mut reduced_mat = vec![0.0; n_free * n_free];
        for r1 in 0..n_m {
            let Some(i1) = reduced[r1] else { continue };
            for r2 in 0..n_m {
                let Some(i2) = reduced[r2] else { continue };
                // Average the two triangles to keep the matrix exactly symmetric.
                reduced_mat[i1 * n_free + i2] = 0.5 * (schur[r1 * n_m + r2] + schur[r2 * n_m + r1]);
            }
        }
        let schur = Cholesky::factor(reduced_mat, n_free).map_err(|j| {
            Error::IllConditionedKkt(format!("Schur complement breaks down at pivot {j}"))
        })?;

        Ok(Self {
            model,
            hess,
            kinv,
            groups,
            schur,
            reduced,
        })
    }

    /// Solve `H dw + A^T y = f`, `A dw = rho`.
    fn solve(&self, f: &[[f64; 3]], rho: &[f64]) -> (Vec<[f64; 3]>, Vec<f64>) {
        let model = self.model;
        let n_y = model.y_rows.len();
        let n_m = model.num_marginal_rows();
        let u: Vec<[f64; 3]> = self
            .kinv
            .iter()
            .zip(f)
            .map(|(k, f)| matvec3(k, f))
            .collect();

        let mut rhs_m: Vec<f64> = rho[..n_m].iter().map(|r| -r).collect();
        for (tr, ui) in model.rows_of.iter().zip(&u) {
            rhs_m[tr.y_row] += ui[2];
            rhs_m[n_y + tr.z_row] += ui[2];
        }
        let uq: Vec<f64> = u.iter().map(|v| v[2]).collect();
        let mass = model.group_mass(&uq);

        let mut v_groups: Vec<Vec<f64>> = Vec::with_capacity(self.groups.len());
        for (g, (members, gf)) in model.groups.iter().zip(&self.groups).enumerate() {
            let n = members.len();
            let mut v: Vec<f64> = members
                .iter()
                .map(|&k| mass[g] - u[k][1] - rho[n_m + k])
                .collect();
            gf.chol.solve_in_place(&mut v);
            for (l, &r) in gf.cols.iter().enumerate() {
                let s: f64 = (0..n).map(|c| gf.b[l * n + c] * v[c]).sum();
                rhs_m[r] -= s;
            }
            v_groups.push(v);
        }

        let mut y_red = vec![0.0; self.schur.dim()];
        for (r, slot) in self.reduced.iter().enumerate() {
            if let Some(i) = slot {
                y_red[*i] = rhs_m[r];
            }
        }
        self.schur.solve_in_place(&mut y_red);
        let y_m: Vec<f64> = self
            .reduced
            .iter()
            .map(|slot| slot.map_or(0.0, |i| y_red[i]))
            .collect();

        let mut y_c = vec![0.0; model.num_triplets()];
        for ((members, gf), v) in model.groups.iter().zip(&self.groups).zip(&v_groups) {
            let n = members.len();
            for (c, &k) in members.iter().enumerate() {
                let s: f64 = gf
                    .cols
                    .iter()
                    .enumerate()
                    .map(|(l, &r)| gf.w[c * 2 * n + l] * y_m[r])
                    .sum();
                y_c[k] = v[c] - s;
            }
        }

        let y_c_mass = model.group_mass(&y_c);
        let step = model
            .rows_of
            .iter()
            .enumerate()
            .map(|(i, tr)| {
                let at_y = [
                    0.0,
                    -y_c[i],
                    y_m[tr.y_row] + y_m[n_y + tr.z_row] + y_c_mass[tr.group],
                ];
                let rhs = [f[i][0] - at_y[0], f[i][1] - at_y[1], f[i][2] - at_y[2]];
                matvec3(&self.kinv[i], &rhs)
            })
            .collect();
        let mut y = y_m;
        y.extend(y_c);
        (step, y)
    }

    /// Residuals `f - H dw - A^T y` and `rho - A dw` of a candidate solution.
    fn residuals(
        &self,
        f: &[[f64; 3]],
        rho: &[f64],
        dw: &[[f64; 3]],
        y: &[f64],
    ) -> (Vec<[f64; 3]>, Vec<f64>) {
        let model = self.model;
        let n_y = model.y_rows.len();
        let n_m = model.num_marginal_rows();
        let y_c = &y[n_m..];
        let y_c_mass = model.group_mass(y_c);
        let r1 = model
            .rows_of
            .iter()
            .enumerate()
            .map(|(i, tr)| {
                let hd = matvec3(&self.hess[i], &dw[i]);
                let at_y = [
                    0.0,
                    -y_c[i],
                    y[tr.y_row] + y[n_y + tr.z_row] + y_c_mass[tr.group],
                ];
                [
                    f[i][0] - hd[0] - at_y[0],
                    f[i][1] - hd[1] - at_y[1],
                    f[i][2] - hd[2] - at_y[2],
                ]
            })
            .collect();
        let as_points: Vec<ConePoint> = dw.iter().map(|d| ConePoint::from_array(*d)).collect();
        // residual() subtracts b; add it back to get A dw.
        let rhs: Vec<f64> = model
            .marginal_rhs()
            .into_iter()
            .chain(std::iter::repeat_n(0.0, model.num_triplets()))
            .collect();
        let r2 = model
            .residual(&as_points)
            .iter()
            .zip(&rhs)
            .zip(rho)
            .map(|((res, b), r)| r - (res + b))
            .collect();
        (r1, r2)
    }
}

fn evaluate(w: &[ConePoint]) -> Result<Vec<BarrierEval>> {
    w.iter().map(|b| barrier(*b)).collect()
}

/// `t c^T w + F(w)`, or `None` outside the cone interior.
fn merit(w: &[ConePoint], t: f64) -> Option<f64> {
    let mut total = 0.0;
    for b in w {
        total += -t * b.r + barrier(*b).ok()?.value;
    }
    Some(total)
}

fn direction_from_evals(
    model: &ExpConeModel,
    w: &[ConePoint],
    evals: &[BarrierEval],
    t: f64,
) -> Result<(NewtonDirection, Vec<[f64; 3]>)> {
    let factor = KktFactor::new(model, evals)?;
    // f = -(t c + g) with c = (-1, 0, 0) per block.
    let f: Vec<[f64; 3]> = evals
        .iter()
        .map(|e| [t - e.gradient[0], -e.gradient[1], -e.gradient[2]])
        .collect();
    let rho: Vec<f64> = model.residual(w).iter().map(|r| -r).collect();
    let (mut dw, mut y) = factor.solve(&f, &rho);
    for _ in 0..REFINEMENT_PASSES {
        let (r1, r2) = factor.residuals(&f, &rho, &dw, &y);
        let (ddw, dy) = factor.solve(&r1, &r2);
        for (a, b) in dw.iter_mut().zip(&ddw) {
            for k in 0..3 {
                a[k] += b[k];
            }
        }
        for (a, b) in y.iter_mut().zip(&dy) {
            *a += b;
        }
    }
    if dw.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
        return Err(Error::IllConditionedKkt("non-finite Newton step".into()));
    }
    let decrement_sq: f64 = dw
        .iter()
        .zip(&factor.hess)
        .map(|(d, h)| {
            let hd = matvec3(h, d);
            d[0] * hd[0] + d[1] * hd[1] + d[2] * hd[2]
        })
        .sum();
    Ok((
        NewtonDirection {
            step: dw,
            multipliers: y,
            decrement_sq,
        },
        f,
    ))
}

/// Equality-constrained Newton direction for `phi_t` at `w`.
pub fn newton_direction(model: &ExpConeModel, w: &[ConePoint], t: f64) -> Result<NewtonDirection> {
    let evals = evaluate(w)?;
    direction_from_evals(model, w, &evals, t).map(|(d, _)| d)
}

fn max_linear_step(w: &[ConePoint], dw: &[[f64; 3]]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (b, d) in w.iter().zip(dw) {
        if d[1] < 0.0 {
            alpha = alpha.min(-b.p / d[1]);
        }
        if d[2] < 0.0 {
            alpha = alpha.min(-b.q / d[2]);
        }
    }
    alpha
}

fn apply_step(w: &[ConePoint], dw: &[[f64; 3]], alpha: f64) -> Vec<ConePoint> {
    w.iter()
        .zip(dw)
        .map(|(b, d)| ConePoint::new(b.r + alpha * d[0], b.p + alpha * d[1], b.q + alpha * d[2]))
        .collect()
}

/// No block may move more than a factor `MAX_SHRINK` closer to the boundary
/// in one step; larger jumps leave the Hessians too ill-conditioned to solve.
fn keeps_distance(w: &[ConePoint], next: &[ConePoint]) -> bool {
    w.iter().zip(next).all(|(a, b)| {
        b.p * MAX_SHRINK >= a.p
            && b.q * MAX_SHRINK >= a.q
            && b.log_slack() * MAX_SHRINK >= a.log_slack()
    })
}

/// Result of centering at one barrier parameter.
struct Centering {
    /// Direction at the final iterate (its multipliers give the duals).
    direction: Option<NewtonDirection>,
    steps: usize,
    stalled: bool,
}

fn center(model: &ExpConeModel, w: &mut Vec<ConePoint>, t: f64) -> Centering {
    let mut steps = 0;
    loop {
        let evals = match evaluate(w) {
            Ok(e) => e,
            Err(_) => {
                return Centering {
                    direction: None,
                    steps,
                    stalled: true,
                }
            }
        };
        let (dir, f) = match direction_from_evals(model, w, &evals, t) {
            Ok(d) => d,
            Err(_) => {
                return Centering {
                    direction: None,
                    steps,
                    stalled: true,
                }
            }
        };
        if dir.decrement_sq / 2.0 <= NEWTON_TOL || steps >= MAX_NEWTON_STEPS {
            return Centering {
                direction: Some(dir),
                steps,
                stalled: false,
            };
        }
        let decrement = dir.decrement_sq.sqrt();
        let alpha_cap = (FRACTION_TO_BOUNDARY * max_linear_step(w, &dir.step)).min(1.0);
        let mut next = None;
        if decrement < FULL_STEP_DECREMENT && alpha_cap >= 1.0 {
            let cand = apply_step(w, &dir.step, 1.0);
            if merit(&cand, t).is_some() {
                next = Some(cand);
            }
        }
        if next.is_none() {
            let phi0 = merit(w, t).unwrap_or(f64::INFINITY);
            let slope: f64 = -f
                .iter()
                .zip(&dir.step)
                .map(|(a, b)| a[0] * b[0] + a[1] * b[1] + a[2] * b[2])
                .sum::<f64>();
            let mut alpha = alpha_cap;
            for _ in 0..MAX_BACKTRACKS {
                let cand = apply_step(w, &dir.step, alpha);
                if let Some(phi) = merit(&cand, t) {
                    if phi <= phi0 + ARMIJO * alpha * slope.min(0.0) && keeps_distance(w, &cand) {
                        next = Some(cand);
                        break;
                    }
                }
                alpha *= 0.5;
            }
        }
        match next {
            Some(cand) => {
                *w = cand;
                steps += 1;
            }
            None => {
                return Centering {
                    direction: Some(dir),
                    steps,
                    stalled: true,
                }
            }
        }
    }
}

/// Convergence measures of one primal-dual pair.
#[derive(Debug, Clone, Copy)]
struct Assessment {
    primal_objective: f64,
    dual_objective: f64,
    gap: f64,
    gap_bound: f64,
    primal_residual: f64,
    dual_violation: f64,
}

impl Assessment {
    fn new(model: &ExpConeModel, w: &[ConePoint], duals: &DualSolution, t: f64) -> Self {
        let primal_objective = model.primal_objective(w);
        let dual_objective = model.dual_objective(&duals.lambda_y, &duals.lambda_z);
        let primal_residual = model
            .residual(w)
            .iter()
            .fold(0.0_f64, |a, r| a.max(r.abs()));
        let dual_violation =
            quality::dual_violation(model, &duals.lambda_y, &duals.lambda_z, &duals.mu).value;
        Self {
            primal_objective,
            dual_objective,
            gap: primal_objective - dual_objective,
            gap_bound: BARRIER_DEGREE * model.num_triplets() as f64 / t,
            primal_residual,
            dual_violation,
        }
    }

    fn relative_gap(&self, gap: f64) -> f64 {
        if self.primal_objective < 0.0 {
            gap / -self.primal_objective
        } else if self.dual_objective > 0.0 {
            gap / self.dual_objective
        } else {
            f64::INFINITY
        }
    }

    fn meets(&self, feastol: f64, abstol: f64, reltol: f64) -> Option<GapCriterion> {
        if self.primal_residual > feastol || self.dual_violation < -feastol {
            return None;
        }
        let gap = self.gap.max(self.gap_bound);
        if gap <= abstol {
            Some(GapCriterion::Absolute)
        } else if self.relative_gap(gap) <= reltol {
            Some(GapCriterion::Relative)
        } else {
            None
        }
    }
}

#[derive(Clone)]
struct Candidate {
    primal: Vec<ConePoint>,
    duals: DualSolution,
    assessment: Assessment,
    t: f64,
}

pub fn solve(model: &ExpConeModel, params: &SolverParams) -> Result<PrimalDualSolution> {
    params.validate()?;
    let mut w = initial_point(model);
    if evaluate(&w).is_err() {
        return Err(Error::SolverException(
            "initial point is not interior to the cone".into(),
        ));
    }

    let mut t = T_INITIAL;
    let mut best: Option<Candidate> = None;
    let mut inaccurate: Option<Candidate> = None;
    let mut trace = Vec::new();
    let mut newton_steps = 0;
    let mut iterations = 0;
    let mut status = None;
    let mut criterion = None;

    while iterations < params.max_iter {
        iterations += 1;
        let centering = center(model, &mut w, t);
        newton_steps += centering.steps;
        let Some(direction) = centering.direction else {
            status = Some(SolveStatus::NumericalFailure);
            break;
        };
        let state = BarrierState {
            t,
            primal: w.clone(),
            multipliers: direction.multipliers,
        };
        let duals = match recover_duals(model, &state) {
            Ok(d) => d,
            Err(_) => {
                status = Some(SolveStatus::NumericalFailure);
                break;
            }
        };
        let assessment = Assessment::new(model, &w, &duals, t);
        trace.push(IterationRecord {
            iteration: iterations,
            t,
            newton_steps: centering.steps,
            primal_objective: assessment.primal_objective,
            dual_objective: assessment.dual_objective,
            gap: assessment.gap,
            gap_bound: assessment.gap_bound,
            primal_residual: assessment.primal_residual,
            dual_violation: assessment.dual_violation,
        });
        let met = assessment.meets(params.feastol, params.abstol, params.reltol);
        let candidate = Candidate {
            primal: w.clone(),
            duals,
            assessment,
            t,
        };
        if met.is_none()
            && assessment
                .meets(
                    params.feastol_inacc,
                    params.abstol_inacc,
                    params.reltol_inacc,
                )
                .is_some()
        {
            inaccurate = Some(candidate.clone());
        }
        best = Some(candidate);
        if met.is_some() {
            status = Some(SolveStatus::Optimal);
            criterion = met;
            break;
        }
        if centering.stalled {
            status = Some(SolveStatus::NumericalFailure);
            break;
        }
        t *= T_GROWTH;
    }

    // Later iterates can degrade once the KKT systems lose accuracy; prefer
    // the last one that met the relaxed tolerances.
    if status != Some(SolveStatus::Optimal) && inaccurate.is_some() {
        best = inaccurate;
    }
    let Some(best) = best else {
        return Err(Error::SolverException(
            "no dual estimate could be formed at any iterate".into(),
        ));
    };
    let status = match status {
        Some(SolveStatus::Optimal) => SolveStatus::Optimal,
        other => {
            let relaxed = best.assessment.meets(
                params.feastol_inacc,
                params.abstol_inacc,
                params.reltol_inacc,
            );
            if relaxed.is_some() {
                criterion = relaxed;
                SolveStatus::OptimalInaccurate
            } else {
                other.unwrap_or(SolveStatus::MaxIterations)
            }
        }
    };
    Ok(PrimalDualSolution {
        objective_primal: best.assessment.primal_objective,
        objective_dual: best.assessment.dual_objective,
        primal: best.primal,
        lambda_y: best.duals.lambda_y,
        lambda_z: best.duals.lambda_z,
        mu: best.duals.mu,
        nu: best.duals.nu,
        status,
        criterion,
        iterations,
        newton_steps,
        t: best.t,
        trace,
    })
}
