//! End-to-end estimator: distribution, marginals, cone program, solve, audit,
//! and the four-way decomposition reported in bits.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::{
    build_distribution, marginals, mutual_information, Grouping, JointDistribution, Outcome,
};
use crate::error::{Error, Result};
use crate::model::{build_model, ExpConeModel};
use crate::quality::{audit, NumErr};
use crate::solver::{
    solve, GapCriterion, IterationRecord, PrimalDualSolution, SolveStatus, SolverParams,
    SOLVER_NAME,
};

/// Allowed deviation of the cleaned `q*` mass from one.
pub const MASS_TOL: f64 = 1e-6;
/// Allowed disagreement, in bits, between the two ways of computing SI.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

/// How much progress output [`pid_with_log`] writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub enum OutputMode {
    /// Nothing.
    #[default]
    Quiet,
    /// Stage flags.
    Stages,
    /// Stage flags plus the solver's per-iteration trace.
    Trace,
}

impl TryFrom<u8> for OutputMode {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(OutputMode::Quiet),
            1 => Ok(OutputMode::Stages),
            2 => Ok(OutputMode::Trace),
            _ => Err(Error::InvalidParams(format!(
                "output mode must be 0, 1 or 2, got {v}"
            ))),
        }
    }
}

/// The externally visible record, with its documented key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnData {
    #[serde(rename = "SI")]
    pub si: f64,
    #[serde(rename = "UIY")]
    pub uiy: f64,
    #[serde(rename = "UIZ")]
    pub uiz: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
    #[serde(rename = "Num_err")]
    pub num_err: [f64; 3],
    #[serde(rename = "Solver")]
    pub solver: String,
}

/// Solver metadata carried into the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveMeta {
    pub solver: String,
    pub status: SolveStatus,
    pub criterion: Option<GapCriterion>,
    pub iterations: usize,
    pub newton_steps: usize,
}

impl SolveMeta {
    pub fn from_solution(sol: &PrimalDualSolution) -> Self {
        Self {
            solver: SOLVER_NAME.to_owned(),
            status: sol.status,
            criterion: sol.criterion,
            iterations: sol.iterations,
            newton_steps: sol.newton_steps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PidResult {
    pub si: f64,
    pub uiy: f64,
    pub uiz: f64,
    pub ci: f64,
    /// `MI(X; (Y, Z))` of the input, in bits.
    pub mi: f64,
    pub num_err: NumErr,
    pub meta: SolveMeta,
    pub warnings: Vec<String>,
}

impl PidResult {
    pub fn returndata(&self) -> ReturnData {
        ReturnData {
            si: self.si,
            uiy: self.uiy,
            uiz: self.uiz,
            ci: self.ci,
            num_err: self.num_err.as_array(),
            solver: self.meta.solver.clone(),
        }
    }

    /// `[SI, UIY, UIZ, CI]` in bits.
    pub fn parts(&self) -> [f64; 4] {
        [self.si, self.uiy, self.uiz, self.ci]
    }
}

/// Clip, prune and renormalize `q*`, then read off the decomposition.
pub fn decompose(
    p: &JointDistribution,
    model: &ExpConeModel,
    qstar: &[f64],
    num_err: NumErr,
    meta: SolveMeta,
) -> Result<PidResult> {
    let m = &model.marginals;
    let mut weights = BTreeMap::new();
    for (&(x, y, z), &v) in model.index.triplets().iter().zip(qstar) {
        if v > 0.0 {
            let o = Outcome {
                x: m.xs[x].clone(),
                y: m.ys[y].clone(),
                z: m.zs[z].clone(),
            };
            weights.insert(o, v);
        }
    }
    let mass: f64 = weights.values().sum();
    if mass.is_nan() || (mass - 1.0).abs() > MASS_TOL {
        return Err(Error::MassLoss { mass });
    }
    let q = JointDistribution::from_weights(weights);

    let bits = |v: f64| v / LN_2;
    let mi = bits(mutual_information(p, Grouping::XWithYZ));
    let uiy = bits(mutual_information(&q, Grouping::XWithYGivenZ));
    let uiz = bits(mutual_information(&q, Grouping::XWithZGivenY));
    let ci = mi - bits(mutual_information(&q, Grouping::XWithYZ));
    let si = bits(mutual_information(p, Grouping::XWithY)) - uiy;
    let si_alt = bits(mutual_information(p, Grouping::XWithZ)) - uiz;

    let mut warnings = Vec::new();
    if (si - si_alt).abs() > CROSS_CHECK_TOL {
        warnings.push(format!(
            "consistency warning: SI from I(X;Y) is {si:.9}, from I(X;Z) is {si_alt:.9}"
        ));
    }
    if meta.status != SolveStatus::Optimal {
        warnings.push(format!("solver status: {}", meta.status));
    }
    if num_err.dual_domain_violation {
        warnings.push("dual domain violation: some mu is not negative".to_owned());
    }
    Ok(PidResult {
        si,
        uiy,
        uiz,
        ci,
        mi,
        num_err,
        meta,
        warnings,
    })
}

/// Everything produced by one estimator run.
#[derive(Debug, Clone)]
pub struct PidRun {
    pub result: PidResult,
    pub model: ExpConeModel,
    pub solution: PrimalDualSolution,
}

/// One line of the iteration trace.
pub fn format_iteration(rec: &IterationRecord) -> String {
    format!(
        "iter {:>3}  t {:>8.1e}  newton {:>3}  pcost {:+.9e}  dcost {:+.9e}  gap {:>9.2e}  bound {:>9.2e}  pres {:>8.1e}  dres {:>9.1e}",
        rec.iteration,
        rec.t,
        rec.newton_steps,
        rec.primal_objective,
        rec.dual_objective,
        rec.gap,
        rec.gap_bound,
        rec.primal_residual,
        rec.dual_violation
    )
}

/// Run the whole pipeline on an already validated distribution.
pub fn run_distribution(
    p: &JointDistribution,
    params: &SolverParams,
    mode: OutputMode,
    log: &mut dyn Write,
) -> Result<PidRun> {
    params.validate()?;
    // Progress output is best effort; a closed sink must not abort a solve.
    if mode >= OutputMode::Stages {
        writeln!(log, "preparing model").ok();
    }
    let model = build_model(&marginals(p))?;
    if mode >= OutputMode::Stages {
        writeln!(
            log,
            "model: {} triplets, {} variables, {} equality rows",
            model.num_triplets(),
            model.num_vars(),
            model.num_rows()
        )
        .ok();
        writeln!(log, "calling solver").ok();
    }
    let solution = solve(&model, params)?;
    if mode >= OutputMode::Trace {
        for rec in &solution.trace {
            writeln!(log, "{}", format_iteration(rec)).ok();
        }
    }
    if mode >= OutputMode::Stages {
        writeln!(
            log,
            "solver finished: {} after {} iterations ({} Newton steps)",
            solution.status, solution.iterations, solution.newton_steps
        )
        .ok();
    }
    let q = solution.q();
    let num_err = audit(
        &model,
        &q,
        &solution.lambda_y,
        &solution.lambda_z,
        &solution.mu,
    );
    let result = decompose(p, &model, &q, num_err, SolveMeta::from_solution(&solution))?;
    Ok(PidRun {
        result,
        model,
        solution,
    })
}

/// Decompose a table of `(outcome, weight)` pairs, writing progress to `log`.
pub fn pid_with_log<I>(
    input: I,
    params: &SolverParams,
    mode: OutputMode,
    log: &mut dyn Write,
) -> Result<PidResult>
where
    I: IntoIterator<Item = (Outcome, f64)>,
{
    let p = build_distribution(input)?;
    run_distribution(&p, params, mode, log).map(|r| r.result)
}

/// Decompose a table of `(outcome, weight)` pairs silently.
pub fn pid<I>(input: I, params: &SolverParams) -> Result<PidResult>
where
    I: IntoIterator<Item = (Outcome, f64)>,
{
    pid_with_log(input, params, OutputMode::Quiet, &mut std::io::sink())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates::{copy_gate, gate, GateKind};

    fn and_input() -> Vec<(Outcome, f64)> {
        vec![
            (Outcome::new(0, 0, 0), 0.25),
            (Outcome::new(0, 0, 1), 0.25),
            (Outcome::new(0, 1, 0), 0.25),
            (Outcome::new(1, 1, 1), 0.25),
        ]
    }

    fn close(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn decompose_gate(kind: GateKind) -> PidResult {
        run_distribution(
            &gate(kind),
            &SolverParams::default(),
            OutputMode::Quiet,
            &mut std::io::sink(),
        )
        .unwrap()
        .result
    }

    #[test]
    fn xor_and_rdn() {
        let r = decompose_gate(GateKind::Xor);
        assert!(
            close(r.parts(), [0.0, 0.0, 0.0, 1.0], 1e-6),
            "{:?}",
            r.parts()
        );
        let r = decompose_gate(GateKind::Rdn);
        assert!(
            close(r.parts(), [1.0, 0.0, 0.0, 0.0], 1e-6),
            "{:?}",
            r.parts()
        );
    }

    #[test]
    fn and_gate_end_to_end() {
        let r = pid(and_input(), &SolverParams::default()).unwrap();
        assert!(
            close(r.parts(), GateKind::And.expected_bits(), 1e-5),
            "{:?}",
            r.parts()
        );
        assert!(r.num_err.max_abs() <= 1e-6, "{:?}", r.num_err);
        assert_eq!(r.meta.solver, SOLVER_NAME);
        assert!(r.warnings.is_empty(), "{:?}", r.warnings);
    }

    #[test]
    fn copy_four_by_four() {
        let p = copy_gate(4, 4).unwrap();
        let r = run_distribution(
            &p,
            &SolverParams::default(),
            OutputMode::Quiet,
            &mut std::io::sink(),
        )
        .unwrap()
        .result;
        assert!(r.ci <= 1e-7 && r.si <= 1e-7, "{:?}", r.parts());
        assert!((r.uiy - 2.0).abs() <= 1e-6);
        assert!((r.uiz - 2.0).abs() <= 1e-6);
    }

    #[test]
    fn negative_weight_rejected_before_solving() {
        let mut input = and_input();
        input[0].1 = -0.25;
        input[1].1 = 0.75;
        assert!(matches!(
            pid(input, &SolverParams::default()),
            Err(Error::NegativeProbability { .. })
        ));
    }

    #[test]
    fn returndata_keys() {
        let r = pid(and_input(), &SolverParams::default()).unwrap();
        let v = serde_json::to_value(r.returndata()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["CI", "Num_err", "SI", "Solver", "UIY", "UIZ"]);
        assert_eq!(v["Num_err"].as_array().unwrap().len(), 3);
    }

    #[test]
    fn mass_loss_is_reported() {
        let p = gate(GateKind::Xor);
        let model = build_model(&marginals(&p)).unwrap();
        let q = vec![0.1; model.num_triplets()];
        let meta = SolveMeta {
            solver: SOLVER_NAME.into(),
            status: SolveStatus::Optimal,
            criterion: None,
            iterations: 0,
            newton_steps: 0,
        };
        let err = decompose(
            &p,
            &model,
            &q,
            NumErr {
                primal_violation: 0.0,
                dual_violation: 0.0,
                gap_violation: 0.0,
                dual_domain_violation: false,
            },
            meta,
        )
        .unwrap_err();
        assert!(matches!(err, Error::MassLoss { .. }));
    }

    #[test]
    fn output_modes_nest() {
        let mut logs = Vec::new();
        for mode in [OutputMode::Quiet, OutputMode::Stages, OutputMode::Trace] {
            let mut buf = Vec::new();
            pid_with_log(and_input(), &SolverParams::default(), mode, &mut buf).unwrap();
            logs.push(String::from_utf8(buf).unwrap());
        }
        assert!(logs[0].is_empty());
        assert!(logs[1].contains("preparing model") && logs[1].contains("calling solver"));
        for line in logs[1].lines() {
            assert!(logs[2].contains(line));
        }
        assert!(logs[2].lines().any(|l| l.starts_with("iter")));
        assert!(OutputMode::try_from(3).is_err());
    }
}
