//! The `broja2pid` command line: single-instance decomposition, the gate
//! battery, COPY scaling and random-distribution sweeps.
//!
//! Every record is written to stdout as JSON (a pretty document for `pid`,
//! one line per record otherwise). Printing mode 1 adds plain-text stage
//! flags and mode 2 the solver's per-iteration trace, so the output of mode
//! `k` always contains the output of mode `k - 1`.

pub mod input;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use broja_core::distributions::JointDistribution;
use broja_core::gates::{copy_gate, gate, random_simplex_distribution, GateKind};
use broja_core::pid::{run_distribution, OutputMode, PidResult, ReturnData};
use broja_core::solver::{SolveStatus, SolverParams, SOLVER_NAME};
use broja_core::Error;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Environment variable that overrides the default sweep seed.
pub const SEED_ENV: &str = "BROJA2PID_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "broja2pid",
    version,
    about = "BROJA bivariate partial information decomposition"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decompose the distribution stored in a file.
    Pid {
        /// JSON array of {"x","y","z","p"} records, or a `x y z p` table.
        input: PathBuf,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Run the seven reference gates and report deviations from known values.
    Gates {
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Decompose COPY(m, n), where X = (Y, Z) with Y, Z independent uniform.
    Copy {
        m: usize,
        n: usize,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Decompose `count` distributions drawn uniformly from the simplex.
    Randompdf {
        nx: usize,
        ny: usize,
        nz: usize,
        count: usize,
        /// Base seed; instance i uses seed + i.
        #[arg(long, env = SEED_ENV, default_value_t = 0)]
        seed: u64,
        /// Worker threads (output order is unaffected).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Also write per-instance rows and the aggregate as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        opts: SolveOpts,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SolveOpts {
    #[arg(long, default_value_t = SolverParams::default().feastol)]
    pub feastol: f64,
    #[arg(long, default_value_t = SolverParams::default().abstol)]
    pub abstol: f64,
    #[arg(long, default_value_t = SolverParams::default().reltol)]
    pub reltol: f64,
    #[arg(long = "feastol-inacc", default_value_t = SolverParams::default().feastol_inacc)]
    pub feastol_inacc: f64,
    #[arg(long = "abstol-inacc", default_value_t = SolverParams::default().abstol_inacc)]
    pub abstol_inacc: f64,
    #[arg(long = "reltol-inacc", default_value_t = SolverParams::default().reltol_inacc)]
    pub reltol_inacc: f64,
    #[arg(long = "max-iter", default_value_t = SolverParams::default().max_iter)]
    pub max_iter: usize,
    /// Printing mode: 0 results only, 1 adds stage flags, 2 adds the solver trace.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    pub output: u8,
    #[arg(long = "cone-solver", default_value = SOLVER_NAME, value_parser = [SOLVER_NAME])]
    pub cone_solver: String,
}

impl SolveOpts {
    pub fn params(&self) -> SolverParams {
        SolverParams {
            feastol: self.feastol,
            abstol: self.abstol,
            reltol: self.reltol,
            feastol_inacc: self.feastol_inacc,
            abstol_inacc: self.abstol_inacc,
            reltol_inacc: self.reltol_inacc,
            max_iter: self.max_iter,
        }
    }

    fn mode(&self) -> OutputMode {
        OutputMode::try_from(self.output).expect("range checked by clap")
    }
}

/// One gate block of `gates`.
#[derive(Debug, Serialize, Deserialize)]
pub struct GateRecord {
    pub gate: String,
    pub status: SolveStatus,
    pub returndata: ReturnData,
    /// `[SI, UIY, UIZ, CI]` reference values in bits.
    pub expected: [f64; 4],
    pub max_deviation: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CopyRecord {
    pub m: usize,
    pub n: usize,
    pub status: SolveStatus,
    pub returndata: ReturnData,
    pub seconds: f64,
    /// Relative deviation of UIY from log2 m (absolute when m = 1).
    pub deviation_uiy: f64,
    pub deviation_uiz: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance: usize,
    pub seed: u64,
    pub status: Option<SolveStatus>,
    pub returndata: Option<ReturnData>,
    pub error: Option<String>,
    pub seconds: f64,
}

/// Means over the instances that reached status Optimal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub solved: usize,
    #[serde(rename = "SI")]
    pub si: f64,
    #[serde(rename = "UIY")]
    pub uiy: f64,
    #[serde(rename = "UIZ")]
    pub uiz: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
    pub seconds: f64,
}

impl Aggregate {
    pub fn from_records(records: &[InstanceRecord]) -> Self {
        let solved: Vec<(&ReturnData, f64)> = records
            .iter()
            .filter(|r| r.status == Some(SolveStatus::Optimal))
            .filter_map(|r| r.returndata.as_ref().map(|d| (d, r.seconds)))
            .collect();
        let mean = |f: &dyn Fn(&ReturnData, f64) -> f64| {
            if solved.is_empty() {
                f64::NAN
            } else {
                solved.iter().map(|(d, s)| f(d, *s)).sum::<f64>() / solved.len() as f64
            }
        };
        Self {
            count: records.len(),
            solved: solved.len(),
            si: mean(&|d, _| d.si),
            uiy: mean(&|d, _| d.uiy),
            uiz: mean(&|d, _| d.uiz),
            ci: mean(&|d, _| d.ci),
            seconds: mean(&|_, s| s),
        }
    }
}

#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    instance: &'a str,
    seed: Option<u64>,
    status: String,
    #[serde(rename = "SI")]
    si: f64,
    #[serde(rename = "UIY")]
    uiy: f64,
    #[serde(rename = "UIZ")]
    uiz: f64,
    #[serde(rename = "CI")]
    ci: f64,
    num_err_primal: f64,
    num_err_dual: f64,
    num_err_gap: f64,
    seconds: f64,
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                write!(err, "{text}").ok();
            } else {
                write!(out, "{text}").ok();
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Pid { input, opts } => cmd_pid(&input, &opts, out),
        Command::Gates { opts } => cmd_gates(&opts, out),
        Command::Copy { m, n, opts } => cmd_copy(m, n, &opts, out),
        Command::Randompdf {
            nx,
            ny,
            nz,
            count,
            seed,
            jobs,
            csv,
            opts,
        } => cmd_randompdf(
            nx,
            ny,
            nz,
            count,
            seed,
            jobs,
            csv.as_deref(),
            &opts,
            out,
            err,
        ),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            writeln!(err, "error: {}", e.message).ok();
            e.code
        }
    }
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn from_core(e: Error) -> Self {
        let code = match e {
            Error::SolverException(_)
            | Error::IllConditionedKkt(_)
            | Error::MassLoss { .. }
            | Error::BoundaryPoint => EXIT_SOLVER,
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn params_of(opts: &SolveOpts) -> Result<SolverParams, Failure> {
    let params = opts.params();
    params.validate().map_err(Failure::from_core)?;
    Ok(params)
}

fn solve_one(
    p: &JointDistribution,
    params: &SolverParams,
    mode: OutputMode,
    out: &mut dyn Write,
) -> Result<PidResult, Failure> {
    run_distribution(p, params, mode, out)
        .map(|r| r.result)
        .map_err(Failure::from_core)
}

fn emit_line<T: Serialize>(out: &mut dyn Write, value: &T) {
    let text = serde_json::to_string(value).expect("records serialize");
    writeln!(out, "{text}").ok();
}

pub fn cmd_pid(input: &std::path::Path, opts: &SolveOpts, out: &mut dyn Write) -> CmdResult {
    let params = params_of(opts)?;
    let rows = input::read_input(input).map_err(Failure::input)?;
    let p = broja_core::distributions::build_distribution(rows).map_err(Failure::from_core)?;
    let result = solve_one(&p, &params, opts.mode(), out)?;
    let text = serde_json::to_string_pretty(&result.returndata()).expect("records serialize");
    writeln!(out, "{text}").ok();
    Ok(EXIT_OK)
}

pub fn cmd_gates(opts: &SolveOpts, out: &mut dyn Write) -> CmdResult {
    let params = params_of(opts)?;
    let mut failed = false;
    for kind in GateKind::ALL {
        if opts.mode() >= OutputMode::Stages {
            writeln!(out, "gate {kind}").ok();
        }
        let result = match solve_one(&gate(kind), &params, opts.mode(), out) {
            Ok(r) => r,
            Err(e) => {
                writeln!(out, "gate {kind} failed: {}", e.message).ok();
                failed = true;
                continue;
            }
        };
        let expected = kind.expected_bits();
        let max_deviation = result
            .parts()
            .iter()
            .zip(&expected)
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        failed |= result.meta.status != SolveStatus::Optimal;
        emit_line(
            out,
            &GateRecord {
                gate: kind.name().to_owned(),
                status: result.meta.status,
                returndata: result.returndata(),
                expected,
                max_deviation,
            },
        );
    }
    Ok(if failed { EXIT_SOLVER } else { EXIT_OK })
}

/// Relative deviation, or the absolute one when the target is zero.
pub fn deviation(got: f64, target: f64) -> f64 {
    if target == 0.0 {
        got.abs()
    } else {
        (got - target).abs() / target.abs()
    }
}

pub fn cmd_copy(m: usize, n: usize, opts: &SolveOpts, out: &mut dyn Write) -> CmdResult {
    let params = params_of(opts)?;
    let p = copy_gate(m, n).map_err(Failure::from_core)?;
    let start = Instant::now();
    let result = solve_one(&p, &params, opts.mode(), out)?;
    let seconds = start.elapsed().as_secs_f64();
    emit_line(
        out,
        &CopyRecord {
            m,
            n,
            status: result.meta.status,
            returndata: result.returndata(),
            seconds,
            deviation_uiy: deviation(result.uiy, (m as f64).log2()),
            deviation_uiz: deviation(result.uiz, (n as f64).log2()),
        },
    );
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_randompdf(
    nx: usize,
    ny: usize,
    nz: usize,
    count: usize,
    seed: u64,
    jobs: usize,
    csv_path: Option<&std::path::Path>,
    opts: &SolveOpts,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> CmdResult {
    if count == 0 {
        return Err(Failure::input("count must be at least 1"));
    }
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(Failure::input(format!(
            "alphabet sizes must be at least 1, got {nx} {ny} {nz}"
        )));
    }
    if jobs == 0 {
        return Err(Failure::input("--jobs must be at least 1"));
    }
    let params = params_of(opts)?;
    let mode = opts.mode();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Failure::input(format!("cannot start worker pool: {e}")))?;

    // Each worker buffers its own progress output; buffers are replayed in
    // instance order.
    let outcomes: Vec<(Vec<u8>, InstanceRecord)> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| {
                let s = seed.wrapping_add(i as u64);
                let mut log = Vec::new();
                let start = Instant::now();
                let solved = random_simplex_distribution(nx, ny, nz, s)
                    .and_then(|p| run_distribution(&p, &params, mode, &mut log));
                let seconds = start.elapsed().as_secs_f64();
                let record = match solved {
                    Ok(run) => InstanceRecord {
                        instance: i,
                        seed: s,
                        status: Some(run.result.meta.status),
                        returndata: Some(run.result.returndata()),
                        error: None,
                        seconds,
                    },
                    Err(e) => InstanceRecord {
                        instance: i,
                        seed: s,
                        status: None,
                        returndata: None,
                        error: Some(e.to_string()),
                        seconds,
                    },
                };
                (log, record)
            })
            .collect()
    });

    let mut records = Vec::with_capacity(count);
    for (log, record) in outcomes {
        out.write_all(&log).ok();
        if let Some(e) = &record.error {
            writeln!(
                err,
                "instance {} (seed {}): {e}",
                record.instance, record.seed
            )
            .ok();
        }
        emit_line(out, &record);
        records.push(record);
    }
    let aggregate = Aggregate::from_records(&records);
    emit_line(out, &serde_json::json!({ "aggregate": aggregate }));

    if let Some(path) = csv_path {
        write_csv(path, &records, &aggregate).map_err(Failure::input)?;
    }
    Ok(if aggregate.solved >= 1 {
        EXIT_OK
    } else {
        EXIT_SOLVER
    })
}

fn write_csv(
    path: &std::path::Path,
    records: &[InstanceRecord],
    aggregate: &Aggregate,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        let label = r.instance.to_string();
        let status = r
            .status
            .map(|s| s.to_string())
            .unwrap_or_else(|| "error".to_owned());
        let (parts, num_err) = match &r.returndata {
            Some(d) => ([d.si, d.uiy, d.uiz, d.ci], d.num_err),
            None => ([f64::NAN; 4], [f64::NAN; 3]),
        };
        w.serialize(CsvRow {
            instance: &label,
            seed: Some(r.seed),
            status,
            si: parts[0],
            uiy: parts[1],
            uiz: parts[2],
            ci: parts[3],
            num_err_primal: num_err[0],
            num_err_dual: num_err[1],
            num_err_gap: num_err[2],
            seconds: r.seconds,
        })?;
    }
    w.serialize(CsvRow {
        instance: "mean",
        seed: None,
        status: format!("{}/{} optimal", aggregate.solved, aggregate.count),
        si: aggregate.si,
        uiy: aggregate.uiy,
        uiz: aggregate.uiz,
        ci: aggregate.ci,
        num_err_primal: f64::NAN,
        num_err_dual: f64::NAN,
        num_err_gap: f64::NAN,
        seconds: aggregate.seconds,
    })?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(status: Option<SolveStatus>, si: f64, seconds: f64) -> InstanceRecord {
        InstanceRecord {
            instance: 0,
            seed: 0,
            status,
            returndata: Some(ReturnData {
                si,
                uiy: 2.0 * si,
                uiz: 0.0,
                ci: 1.0,
                num_err: [0.0; 3],
                solver: SOLVER_NAME.into(),
            }),
            error: None,
            seconds,
        }
    }

    #[test]
    fn aggregate_is_mean_over_optimal_instances() {
        let recs = vec![
            record(Some(SolveStatus::Optimal), 0.1, 1.0),
            record(Some(SolveStatus::Optimal), 0.3, 3.0),
            record(Some(SolveStatus::MaxIterations), 100.0, 100.0),
        ];
        let a = Aggregate::from_records(&recs);
        assert_eq!((a.count, a.solved), (3, 2));
        assert!((a.si - 0.2).abs() <= 1e-12);
        assert!((a.uiy - 0.4).abs() <= 1e-12);
        assert!((a.seconds - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn deviation_handles_zero_target() {
        assert_eq!(deviation(1e-9, 0.0), 1e-9);
        assert!((deviation(2.000002, 2.0) - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        assert_eq!(
            Failure::from_core(Error::SolverException("x".into())).code,
            EXIT_SOLVER
        );
        assert_eq!(
            Failure::from_core(Error::NotNormalized { sum: 2.0 }).code,
            EXIT_INPUT
        );
        assert_eq!(
            Failure::from_core(Error::InvalidSize("m".into())).code,
            EXIT_INPUT
        );
    }
}
