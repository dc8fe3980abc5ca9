//! One line per acceptance criterion; exits non-zero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use crp_harness::report::{Check, CriterionReport};
use crp_harness::suites::{self, SuiteOptions, CRITERIA};

/// Wall-clock budget for each criterion, seconds.
const SUITE_BUDGET: f64 = 300.0;

fn crp(args: &[&str], out: &Path) -> (i32, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_crp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CRP_OUT")
        .output()
        .expect("crp binary runs");
    (o.status.code().unwrap_or(-1), String::from_utf8_lossy(&o.stdout).into_owned())
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map(|rd| rd.flatten().map(|e| (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap_or_default())).collect())
        .unwrap_or_default();
    files.sort();
    files
}

/// Runs the binary twice with `--deterministic` and compares every output byte.
fn binary_checks(r: &mut CriterionReport) {
    let base = std::env::temp_dir().join(format!("crp-acceptance-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&base);
    let (a, b) = (base.join("a"), base.join("b"));
    let args = ["suite", "--criterion", "c3", "--criterion", "c9", "--criterion", "c1", "--deterministic"];
    let (ca, _) = crp(&args, &a);
    let (cb, _) = crp(&args, &b);
    let (fa, fb) = (read_dir_sorted(&a), read_dir_sorted(&b));
    r.checks.push(Check::holds("binary suite exits 0", ca == 0 && cb == 0));
    r.checks.push(Check::holds("binary outputs byte-identical", !fa.is_empty() && fa == fb));

    let (code, stdout) = crp(&["verify", "--fixture", "example-6.7", "--p", "2"], &base.join("verify"));
    r.checks.push(Check::holds("verify example-6.7 exits 0", code == 0));
    r.checks.push(Check::holds("verify example-6.7 prints remainder pass, chart fail, ratio 10", {
        stdout.contains("remainder-pass") && stdout.contains("chart-fail") && stdout.contains("ratio 10.000000000")
    }));

    let empty = base.join("empty.json");
    let bad = base.join("bad.json");
    std::fs::write(&empty, "{\"fixtures\": []}").unwrap();
    std::fs::write(&bad, "{\"fixtures\": [").unwrap();
    let (code, _) = crp(&["verify", "--config", empty.to_str().unwrap()], &base.join("empty"));
    let report = std::fs::read_to_string(base.join("empty").join("verify.json")).unwrap_or_default();
    r.checks.push(Check::holds("empty fixture list exits 0 with an empty report", code == 0 && report.contains("\"fixtures\": []")));
    let (code, _) = crp(&["verify", "--config", bad.to_str().unwrap()], &base.join("bad"));
    r.checks.push(Check::holds("malformed config exits 2", code == 2));
    let _ = std::fs::remove_dir_all(&base);
}

fn main() -> ExitCode {
    let opts = SuiteOptions::default();
    let ids: Vec<&str> = CRITERIA.iter().map(|(id, _)| *id).collect();
    let t0 = Instant::now();
    let mut reports = suites::run_criteria(&ids, &opts);
    for r in &mut reports {
        if let Some(rt) = r.runtime {
            r.checks.push(Check::at_most("runtime seconds", rt, SUITE_BUDGET));
        }
        if r.id == "c11" {
            binary_checks(r);
        }
        *r = r.clone().finish();
    }
    let mut ok = true;
    for r in &reports {
        println!("{}", r.summary_line());
        ok &= r.pass;
    }
    println!("acceptance: {} of {} criteria pass in {:.1}s", reports.iter().filter(|r| r.pass).count(), reports.len(), t0.elapsed().as_secs_f64());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
