use std::io::Write as _;

use broja_cli::{run, Aggregate, CopyRecord, GateRecord, InstanceRecord, EXIT_INPUT, EXIT_OK};
use broja_core::pid::ReturnData;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("broja2pid").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn and_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "x y z p\n0 0 0 0.25\n0 0 1 0.25\n0 1 0 0.25\n1 1 1 0.25").unwrap();
    f
}

#[test]
fn pid_mode_zero_prints_only_the_returndata() {
    let f = and_file();
    let (code, out, err) = invoke(&["pid", f.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let data: ReturnData = serde_json::from_str(&out).unwrap();
    assert!((data.ci - 0.5).abs() < 1e-6);
    assert!((data.si - (1.5 - 0.75 * 3f64.log2())).abs() < 1e-6);
    assert_eq!(data.solver, "expcone-barrier");
}

#[test]
fn higher_modes_extend_lower_ones() {
    let f = and_file();
    let path = f.path().to_str().unwrap();
    let outs: Vec<String> = ["0", "1", "2"]
        .iter()
        .map(|m| invoke(&["pid", path, "--output", m]).1)
        .collect();
    let lines = |s: &str| s.lines().map(str::to_owned).collect::<Vec<_>>();
    for w in outs.windows(2) {
        let (lo, hi) = (lines(&w[0]), lines(&w[1]));
        assert!(hi.len() > lo.len());
        for l in &lo {
            assert!(hi.contains(l), "missing `{l}`");
        }
    }
    assert!(outs[2].lines().any(|l| l.starts_with("iter")));
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(invoke(&["pid", "/nonexistent/file.txt"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["copy", "0", "3"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["randompdf", "2", "2", "2", "0"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["gates", "--output", "7"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["gates", "--cone-solver", "other"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["gates", "--feastol", "-1"]).0, EXIT_INPUT);
    assert_eq!(invoke(&["nonsense"]).0, EXIT_INPUT);

    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "0 0 0 0.5\n1 1 1 0.6").unwrap();
    let (code, _, err) = invoke(&["pid", f.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_INPUT);
    assert!(err.contains("sum"), "{err}");
}

#[test]
fn gates_report_every_gate() {
    let (code, out, _) = invoke(&["gates"]);
    assert_eq!(code, EXIT_OK);
    let records: Vec<GateRecord> = out
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 7);
    for r in records {
        assert!(
            r.max_deviation <= 1e-6,
            "{} deviates by {}",
            r.gate,
            r.max_deviation
        );
    }
}

#[test]
fn copy_reports_relative_deviation() {
    let (code, out, _) = invoke(&["copy", "3", "4"]);
    assert_eq!(code, EXIT_OK);
    let r: CopyRecord = serde_json::from_str(out.trim()).unwrap();
    assert!(r.deviation_uiy <= 1e-6 && r.deviation_uiz <= 1e-6);
    assert!((r.returndata.uiz - 2.0).abs() <= 1e-6);
}

#[test]
fn randompdf_is_reproducible_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("runs.csv");
    let args = ["randompdf", "3", "3", "3", "6", "--seed", "11"];
    let (c1, serial, _) = invoke(&args);
    let mut parallel_args = args.to_vec();
    parallel_args.extend(["--jobs", "3", "--csv", csv.to_str().unwrap()]);
    let (c2, parallel, _) = invoke(&parallel_args);
    assert_eq!((c1, c2), (EXIT_OK, EXIT_OK));

    let parse = |s: &str| -> (Vec<InstanceRecord>, Aggregate) {
        let lines: Vec<&str> = s.lines().collect();
        let (last, rest) = lines.split_last().unwrap();
        let agg: serde_json::Value = serde_json::from_str(last).unwrap();
        (
            rest.iter()
                .map(|l| serde_json::from_str(l).unwrap())
                .collect(),
            serde_json::from_value(agg["aggregate"].clone()).unwrap(),
        )
    };
    let (a, agg_a) = parse(&serial);
    let (b, agg_b) = parse(&parallel);
    assert_eq!(a.len(), 6);
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.seed, y.seed);
        assert_eq!(x.returndata, y.returndata);
    }
    assert_eq!(agg_a.solved, agg_b.solved);
    assert_eq!(agg_a.si, agg_b.si);

    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 6 + 1);
    assert!(text.lines().last().unwrap().starts_with("mean,"));
}
