use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use matchci::cli::{read_report, CiOutput, EstimateOutput, Report, RocOutput, SimulateOutput};
use matchci::ProtocolPlan;
use serde::{de::DeserializeOwned, Serialize};

fn matchci(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matchci"))
        .args(args)
        .env_remove("MATCHCI_SEED")
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Three identities with two instances each; only identities 1 and 2 are
/// confused at threshold 0.5.
fn three_identities(dir: &Path) -> PathBuf {
    let mut text = String::from("id_a,instance_a,id_b,instance_b,score\n");
    for i in 1..=3 {
        text += &format!("{i},a,{i},b,0.1\n");
    }
    for (x, y, s) in [(1, 2, 0.2), (1, 3, 0.9), (2, 3, 0.9)] {
        for ia in ["a", "b"] {
            for ib in ["a", "b"] {
                text += &format!("{x},{ia},{y},{ib},{s}\n");
            }
        }
    }
    write(dir, "three.csv", &text)
}

/// `g` identities, two instances each, no genuine errors at 0.5.
fn no_genuine_errors(dir: &Path, g: usize) -> PathBuf {
    let mut text = String::from("id_a,instance_a,id_b,instance_b,score\n");
    for i in 0..g {
        text += &format!("p{i},0,p{i},1,0.1\n");
        for j in i + 1..g {
            for a in 0..2 {
                for b in 0..2 {
                    let s = 0.3 + ((i * 7 + j * 13 + a * 3 + b) % 17) as f64 / 20.0;
                    text += &format!("p{i},{a},p{j},{b},{s}\n");
                }
            }
        }
    }
    write(dir, "zero.csv", &text)
}

fn round_trips<T: Serialize + DeserializeOwned + PartialEq + std::fmt::Debug>(text: &str) -> Report<T> {
    let report: Report<T> = read_report(text).unwrap();
    let again = serde_json::to_string_pretty(&report).unwrap() + "\n";
    assert_eq!(again, text);
    report
}

#[test]
fn estimate_three_identities() {
    let dir = tempfile::tempdir().unwrap();
    let f = three_identities(dir.path());
    let text = stdout(&matchci(&["estimate", "--scores", f.to_str().unwrap(), "--threshold", "0.5"]));
    let r: Report<EstimateOutput> = round_trips(&text);
    assert_eq!(r.command, "estimate");
    assert_eq!(r.version, env!("CARGO_PKG_VERSION"));
    assert_eq!(r.config["threshold"], 0.5);
    let far = r.result.far.unwrap().value;
    assert!((far - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(r.result.frr.unwrap().value, 0.0);
    assert_eq!(r.result.counts.impostor_errors, 4);
    assert_eq!(r.result.counts.impostor_pairs, 12);
}

#[test]
fn similarity_scores_are_negated() {
    let dir = tempfile::tempdir().unwrap();
    let f = three_identities(dir.path());
    let text = std::fs::read_to_string(&f).unwrap();
    let mut flipped = String::new();
    for (k, line) in text.lines().enumerate() {
        if k == 0 {
            flipped += line;
        } else {
            let (head, s) = line.rsplit_once(',').unwrap();
            flipped += &format!("{head},{}", -s.parse::<f64>().unwrap());
        }
        flipped.push('\n');
    }
    let g = write(dir.path(), "sim.csv", &flipped);
    let args = ["estimate", "--scores", g.to_str().unwrap(), "--threshold", "-0.5", "--similarity"];
    let r: Report<EstimateOutput> = read_report(&stdout(&matchci(&args))).unwrap();
    assert!((r.result.far.unwrap().value - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = write(dir.path(), "empty.csv", "");
    let out = matchci(&["estimate", "--scores", empty.to_str().unwrap(), "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(2));

    let bad = write(
        dir.path(),
        "bad.csv",
        "id_a,instance_a,id_b,instance_b,score\n1,a,1,b,0.1\n1,a,2,a,zero\n",
    );
    let out = matchci(&["estimate", "--scores", bad.to_str().unwrap(), "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));

    let out = matchci(&["estimate", "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn duplicate_pairs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "dup.csv",
        "id_a,instance_a,id_b,instance_b,score\n1,a,1,b,0.1\n2,a,2,b,0.1\n1,a,2,a,0.5\n2,a,1,a,0.5\n",
    );
    let out = matchci(&["estimate", "--scores", f.to_str().unwrap(), "--threshold", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn ci_wilson_on_zero_frr() {
    let dir = tempfile::tempdir().unwrap();
    let f = no_genuine_errors(dir.path(), 50);
    let args = [
        "ci", "--scores", f.to_str().unwrap(), "--threshold", "0.25", "--methods", "wilson", "--alpha", "0.05",
        "--metric", "frr",
    ];
    let r: Report<CiOutput> = round_trips(&stdout(&matchci(&args)));
    let iv = r.result.results[0].interval.as_ref().unwrap();
    assert_eq!(iv.lower, 0.0);
    assert!((iv.upper - 0.071347).abs() < 1e-5);
    assert_eq!(iv.diagnostics["n_star"], 50.0);
}

#[test]
fn ci_bootstrap_fan_out_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let f = no_genuine_errors(dir.path(), 12);
    let s = f.to_str().unwrap();
    let don = ["ci", "--scores", s, "--threshold", "0.6", "--methods", "don", "--b", "1000", "--seed", "7"];
    assert_eq!(stdout(&matchci(&don)), stdout(&matchci(&don)));

    let fan = [
        "ci", "--scores", s, "--threshold", "0.6", "--methods", "subsets,vertex,don", "--b", "2000", "--metric",
        "far",
    ];
    let r: Report<CiOutput> = round_trips(&stdout(&matchci(&fan)));
    assert_eq!(r.result.results.len(), 3);
    for m in &r.result.results {
        let iv = m.interval.as_ref().unwrap();
        assert_eq!(iv.diagnostics["b"], 2000);
        assert!(iv.lower <= iv.upper);
    }

    let small_b = ["ci", "--scores", s, "--threshold", "0.6", "--methods", "vertex", "--b", "99"];
    assert_eq!(matchci(&small_b).status.code(), Some(3));
}

#[test]
fn ci_reports_failing_methods_per_entry() {
    let dir = tempfile::tempdir().unwrap();
    // one instance per identity: no genuine comparisons, so FRR methods fail
    let f = write(
        dir.path(),
        "single.csv",
        "id_a,instance_a,id_b,instance_b,score\n1,a,2,a,0.2\n1,a,3,a,0.9\n2,a,3,a,0.9\n",
    );
    let args = ["ci", "--scores", f.to_str().unwrap(), "--threshold", "0.5", "--methods", "wilson,naive-wilson"];
    let r: Report<CiOutput> = read_report(&stdout(&matchci(&args))).unwrap();
    assert!(r.result.results.iter().any(|m| m.error.is_some()));
    assert!(r.result.results.iter().any(|m| m.interval.is_some()));

    let frr_only = [
        "ci", "--scores", f.to_str().unwrap(), "--threshold", "0.5", "--methods", "wilson", "--metric", "frr",
    ];
    assert_eq!(matchci(&frr_only).status.code(), Some(3));
}

#[test]
fn roc_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let f = no_genuine_errors(dir.path(), 12);
    let roc_csv = dir.path().join("roc.csv");
    let args = [
        "roc", "--scores", f.to_str().unwrap(), "--target-far", "0.01", "--roc-csv", roc_csv.to_str().unwrap(),
    ];
    let r: Report<RocOutput> = round_trips(&stdout(&matchci(&args)));
    assert_eq!(r.result.interval.alpha_far, Some(0.05));
    let csv = std::fs::read_to_string(&roc_csv).unwrap();
    assert!(csv.starts_with("threshold,frr,far\n"));
    assert_eq!(csv.lines().count(), r.result.roc_points + 1);

    let boot = [
        "roc", "--scores", f.to_str().unwrap(), "--target-far", "0.01", "--method", "bootstrap", "--scheme",
        "vertex", "--b", "500", "--seed", "4",
    ];
    let first = stdout(&matchci(&boot));
    assert_eq!(first, stdout(&matchci(&boot)));
    let r: Report<RocOutput> = round_trips(&first);
    assert_eq!(r.result.interval.interval.method, "bootstrap_vertical_vertex");
    assert_eq!(r.result.interval.alpha_far, None);
}

#[test]
fn protocol_plans() {
    let dir = tempfile::tempdir().unwrap();
    let plan_csv = dir.path().join("plan.csv");
    let p = plan_csv.to_str().unwrap();
    let r: Report<ProtocolPlan> =
        round_trips(&stdout(&matchci(&["protocol", "--counts", "1,1,1,1,1", "--budget", "2", "--plan-csv", p])));
    let rows: Vec<Vec<String>> = std::fs::read_to_string(&plan_csv)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let ids = |r: &Vec<String>| [r[1].clone(), r[3].clone()];
    assert!(ids(&rows[0]).iter().all(|x| !ids(&rows[1]).contains(x)));
    assert_eq!(r.result.objective_value, 0);

    stdout(&matchci(&["protocol", "--counts", "1,1,1,1,3", "--budget", "2", "--plan-csv", p]));
    let first = std::fs::read_to_string(&plan_csv).unwrap().lines().nth(1).unwrap().to_string();
    assert!(first.split(',').skip(1).step_by(2).any(|id| id == "5"), "{first}");

    assert_eq!(matchci(&["protocol", "--counts", "1,1,1", "--budget", "0"]).status.code(), Some(3));

    let ids = write(dir.path(), "ids.csv", "id,instances\nann,2\nbob,3\ncy,2\n");
    let r: Report<ProtocolPlan> = read_report(&stdout(&matchci(&[
        "protocol",
        "--metric",
        "frr",
        "--identities",
        ids.to_str().unwrap(),
        "--budget",
        "3",
    ])))
    .unwrap();
    assert_eq!(r.result.selections.len(), 3);
    assert!(r.result.selections.iter().all(|s| s.id_a == s.id_b));
}

#[test]
fn simulate_report() {
    let args = [
        "simulate", "--g", "15", "--m", "3", "--dim", "16", "--target", "far=1e-2", "--methods",
        "wilson,naive-wilson", "--r", "30", "--calib-g", "40", "--calib-m", "4", "--seed", "2",
    ];
    let text = stdout(&matchci(&args));
    assert_eq!(text, stdout(&matchci(&args)));
    let r: Report<SimulateOutput> = round_trips(&text);
    assert_eq!(r.seed, 2);
    assert_eq!(r.result.report.replications, 30);
    assert_eq!(r.result.report.methods.len(), 2);

    let bad = ["simulate", "--target", "far=1.5", "--r", "3"];
    assert_eq!(matchci(&bad).status.code(), Some(3));
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let f = no_genuine_errors(dir.path(), 8);
    let s = f.to_str().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_matchci"))
        .args(["ci", "--scores", s, "--threshold", "0.6", "--methods", "subsets", "--b", "200"])
        .env("MATCHCI_SEED", "31")
        .output()
        .unwrap();
    let r: Report<CiOutput> = read_report(&stdout(&out)).unwrap();
    assert_eq!(r.seed, 31);
}

#[test]
fn help_lists_every_command() {
    let text = stdout(&matchci(&["--help"]));
    for c in ["estimate", "ci", "roc", "protocol", "simulate"] {
        assert!(text.contains(c));
    }
}
