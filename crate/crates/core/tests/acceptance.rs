//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p broja-core --test acceptance --release`.

use std::time::{Duration, Instant};

use broja_core::cone::{barrier, ConePoint};
use broja_core::distributions::{marginals, JointDistribution};
use broja_core::gates::{copy_gate, gate, random_simplex_distribution, GateKind};
use broja_core::model::{build_model, initial_point, INITIAL_SLACK};
use broja_core::oracle::{brute_force_min, objective, oracle_decomposition};
use broja_core::pid::{run_distribution, OutputMode, PidRun};
use broja_core::quality::gap_violation;
use broja_core::solver::{SolveStatus, SolverParams};
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every solve made by the suite, for the duality criterion.
#[derive(Default)]
struct Audit {
    runs: Vec<PidRun>,
}

impl Audit {
    fn run(&mut self, p: &JointDistribution) -> PidRun {
        let run = run_distribution(
            p,
            &SolverParams::default(),
            OutputMode::Quiet,
            &mut std::io::sink(),
        )
        .expect("solver produced an iterate");
        self.runs.push(run.clone());
        run
    }
}

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn max_dev(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter()
        .zip(&b)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn gate_battery(audit: &mut Audit, report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut all_optimal = true;
    let mut cases: Vec<(String, JointDistribution, [f64; 4])> =
        [GateKind::Xor, GateKind::Rdn, GateKind::Unq]
            .into_iter()
            .map(|g| (g.name().to_owned(), gate(g), g.expected_bits()))
            .collect();
    for (m, n) in [(1, 1), (2, 2), (2, 3), (3, 5), (4, 4)] {
        let expect = [0.0, (m as f64).log2(), (n as f64).log2(), 0.0];
        cases.push((format!("COPY({m},{n})"), copy_gate(m, n).unwrap(), expect));
    }
    let mut worst_case = String::new();
    for (name, p, expect) in &cases {
        let r = audit.run(p).result;
        all_optimal &= r.meta.status == SolveStatus::Optimal;
        let dev = max_dev(r.parts(), *expect);
        if dev >= worst {
            worst = dev;
            worst_case = name.clone();
        }
    }
    let elapsed = start.elapsed();
    report.line(
        "gate battery (XOR, RDN, UNQ, COPY) within 1e-6 bits, < 1 s",
        all_optimal && worst <= 1e-6 && elapsed < Duration::from_secs(1),
        format!(
            "{} instances, worst deviation {worst:.2e} bits ({worst_case}), {:.3} s",
            cases.len(),
            elapsed.as_secs_f64()
        ),
    );
}

fn and_vs_oracle(audit: &mut Audit, report: &mut Report) {
    let p = gate(GateKind::And);
    let model = build_model(&marginals(&p)).unwrap();
    let step = 1e-5;
    let start = Instant::now();
    let oracle = brute_force_min(&model, step).unwrap();
    let oracle_time = start.elapsed();
    let oracle_parts = oracle_decomposition(&p, &model, &oracle).unwrap();

    let run = audit.run(&p);
    let solver_obj = objective(&model, &run.solution.q());
    let dev = max_dev(run.result.parts(), oracle_parts);
    // Oracle is a grid minimum: never below the true minimum, and at most a
    // fine grid step above the solver's point.
    let sandwich = oracle.objective >= solver_obj - 1e-4 && oracle.objective <= solver_obj + step;
    report.line(
        "AND vs brute-force oracle within 1e-4 bits, oracle < 30 s at step 1e-5",
        run.result.meta.status == SolveStatus::Optimal
            && dev <= 1e-4
            && sandwich
            && oracle_time < Duration::from_secs(30),
        format!(
            "deviation {dev:.2e} bits, oracle objective {:.10} vs solver {:.10} nats, oracle {:.2} s",
            oracle.objective,
            solver_obj,
            oracle_time.as_secs_f64()
        ),
    );
}

fn copy_scaling(audit: &mut Audit, report: &mut Report) {
    let start = Instant::now();
    let mut worst = 0.0_f64;
    let mut worst_case = (0, 0);
    let mut all_optimal = true;
    // Relative deviation; for a zero target (m or n = 1) the absolute one.
    let dev = |got: f64, target: f64| {
        if target == 0.0 {
            got.abs()
        } else {
            (got - target).abs() / target
        }
    };
    for m in 1..=20 {
        for n in 1..=20 {
            let r = audit.run(&copy_gate(m, n).unwrap()).result;
            all_optimal &= r.meta.status == SolveStatus::Optimal;
            let d = dev(r.uiy, (m as f64).log2()).max(dev(r.uiz, (n as f64).log2()));
            if d > worst {
                worst = d;
                worst_case = (m, n);
            }
        }
    }
    let elapsed = start.elapsed();
    report.line(
        "COPY m,n <= 20: relative deviation of UIY, UIZ <= 1e-6, < 10 min",
        all_optimal && worst <= 1e-6 && elapsed < Duration::from_secs(600),
        format!(
            "400 instances, worst {worst:.2e} at {:?}, {:.1} s",
            worst_case,
            elapsed.as_secs_f64()
        ),
    );
}

fn random_robustness(audit: &mut Audit, report: &mut Report) {
    let start = Instant::now();
    let mut optimal = 0;
    let mut worst_err = 0.0_f64;
    let mut worst_sum = 0.0_f64;
    for seed in 0..100 {
        let p = random_simplex_distribution(5, 5, 5, seed).unwrap();
        let r = audit.run(&p).result;
        if r.meta.status != SolveStatus::Optimal {
            continue;
        }
        let sum: f64 = r.parts().iter().sum();
        worst_sum = worst_sum.max((sum - r.mi).abs());
        worst_err = worst_err.max(r.num_err.max_abs());
        if r.num_err.max_abs() <= 1e-6 {
            optimal += 1;
        }
    }
    let elapsed = start.elapsed();
    report.line(
        "random 5x5x5: >= 99/100 Optimal with Num_err <= 1e-6, sum rule 1e-6, < 5 min",
        optimal >= 99 && worst_sum <= 1e-6 && elapsed < Duration::from_secs(300),
        format!(
            "{optimal}/100 solved, worst Num_err {worst_err:.2e}, worst sum-rule error {worst_sum:.2e} bits, {:.1} s",
            elapsed.as_secs_f64()
        ),
    );
}

fn duality(audit: &Audit, report: &mut Report) {
    let mut iterates = 0;
    let mut min_gap = f64::INFINITY;
    let mut worst_gv = 0.0_f64;
    for run in &audit.runs {
        for rec in &run.solution.trace {
            iterates += 1;
            min_gap = min_gap.min(rec.gap);
        }
        if run.solution.status == SolveStatus::Optimal {
            let s = &run.solution;
            worst_gv = worst_gv.max(gap_violation(&run.model, &s.q(), &s.lambda_y, &s.lambda_z));
        }
    }
    report.line(
        "duality: gap >= -1e-9 on every iterate, gap_violation <= 1e-5 when Optimal",
        min_gap >= -1e-9 && worst_gv <= 1e-5,
        format!(
            "{} solves, {iterates} iterates, smallest gap {min_gap:.2e}, worst gap_violation {worst_gv:.2e} nats",
            audit.runs.len()
        ),
    );
}

fn barrier_calculus(report: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-4);
    let mut worst = 0.0_f64;
    let mut all_pd = true;
    for _ in 0..100 {
        let p: f64 = rng.random_range(0.05..3.0);
        let q: f64 = rng.random_range(0.05..3.0);
        let slack: f64 = rng.random_range(0.05..3.0);
        let pt = ConePoint::new(q * (p / q).ln() - slack, p, q);
        let b = barrier(pt).unwrap();
        for k in 0..3 {
            let mut plus = pt.to_array();
            let mut minus = pt.to_array();
            plus[k] += h;
            minus[k] -= h;
            let bp = barrier(ConePoint::from_array(plus)).unwrap();
            let bm = barrier(ConePoint::from_array(minus)).unwrap();
            worst = worst.max(rel((bp.value - bm.value) / (2.0 * h), b.gradient[k]));
            for j in 0..3 {
                worst = worst.max(rel(
                    (bp.gradient[j] - bm.gradient[j]) / (2.0 * h),
                    b.hessian[j][k],
                ));
            }
        }
        let m = Matrix3::from_fn(|i, j| b.hessian[i][j]);
        all_pd &= m == m.transpose() && m.symmetric_eigenvalues().iter().all(|&e| e > 0.0);
    }
    report.line(
        "barrier calculus: finite differences (h = 1e-6) within 1e-5, Hessian PD",
        worst <= 1e-5 && all_pd,
        format!("100 points, worst relative error {worst:.2e}, all Hessians PD: {all_pd}"),
    );
}

fn initialization(report: &mut Report) {
    let mut worst_res = 0.0_f64;
    let mut worst_slack = 0.0_f64;
    for g in GateKind::ALL {
        let model = build_model(&marginals(&gate(g))).unwrap();
        let w = initial_point(&model);
        worst_res = model
            .residual(&w)
            .iter()
            .fold(worst_res, |a, r| a.max(r.abs()));
        for b in &w {
            worst_slack = worst_slack.max((b.log_slack() - INITIAL_SLACK).abs());
        }
    }
    report.line(
        "initialization: residual <= 1e-12 and slack 100 on every gate",
        worst_res <= 1e-12 && worst_slack <= 1e-9,
        format!("7 gates, worst residual {worst_res:.2e}, worst slack deviation {worst_slack:.2e}"),
    );
}

fn timing(audit: &mut Audit, report: &mut Report) {
    let mut medians = Vec::new();
    let mut big_ok = true;
    let mut big_time = 0.0;
    for s in [4, 6, 8, 10] {
        let mut times = Vec::new();
        for seed in 0..5 {
            let p = random_simplex_distribution(s, s, s, 1000 + seed).unwrap();
            let start = Instant::now();
            let run = audit.run(&p);
            let t = start.elapsed().as_secs_f64();
            times.push(t);
            if s == 10 && seed == 0 {
                big_time = t;
                big_ok = run.solution.status == SolveStatus::Optimal && t < 120.0;
            }
        }
        times.sort_by(f64::total_cmp);
        medians.push(times[2]);
    }
    let monotone = medians.windows(2).all(|w| w[1] >= w[0]);
    report.line(
        "timing: s = 10 Optimal in < 120 s, median time monotone over s = 4, 6, 8, 10",
        big_ok && monotone,
        format!(
            "s = 10 solve {big_time:.3} s, medians {}",
            medians
                .iter()
                .map(|m| format!("{m:.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    let mut audit = Audit::default();
    gate_battery(&mut audit, &mut report);
    and_vs_oracle(&mut audit, &mut report);
    copy_scaling(&mut audit, &mut report);
    random_robustness(&mut audit, &mut report);
    barrier_calculus(&mut report);
    initialization(&mut report);
    timing(&mut audit, &mut report);
    duality(&audit, &mut report);
    if report.failures > 0 {
        println!("{} acceptance criteria failed", report.failures);
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
