use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const G1: &str = "0 1\n1 0\n1 2\n0 3\n4 0\n3 4\n4 5\n5 3\n";

fn role_forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_role-forge"))
        .args(args)
        .env("ROLE_FORGE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = role_forge(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn subcommands_chain_into_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let edges = d.join("g1.txt");
    fs::write(&edges, G1).unwrap();
    let partition = d.join("partition.tsv");
    let measures = d.join("measures.tsv");
    let out = d.join("out");

    ok(&["communities", "--input", s(&edges), "--output", s(&partition), "--min-gain", "1e-9", "--seed", "3"]);
    let lines: Vec<String> = fs::read_to_string(&partition)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_string)
        .collect();
    assert_eq!(lines.len(), 6);
    assert!(fs::read_to_string(&partition).unwrap().starts_with("# role-forge config_hash="));

    ok(&["measures", "--input", s(&edges), "--partition", s(&partition), "--output", s(&measures)]);
    ok(&["cluster", "--measures", s(&measures), "--k-min", "2", "--k-max", "15", "--seed", "1", "--output", s(&out)]);
    let clusters = out.join("clusters.tsv");
    ok(&["capitalists", "--input", s(&edges), "--clusters", s(&clusters), "--overlap-min", "0.8", "--output", s(&out)]);
    ok(&["stats", "--measures", s(&measures), "--clusters", s(&clusters), "--output", s(&out)]);
    let report = ok(&["report", "--dir", s(&out)]);
    assert!(report.contains("Group sizes and roles"));
    for name in ["summary.tsv", "k_selection.tsv", "capitalists.tsv", "crosstab.tsv", "anova.tsv", "pairwise.tsv", "report.txt"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
}

#[test]
fn run_is_reproducible_and_honours_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let edges = d.join("g1.txt");
    fs::write(&edges, G1).unwrap();
    let config = d.join("run.conf");
    fs::write(&config, format!("input = {}\nk_max = 4\nseed = 9\n", s(&edges))).unwrap();
    ok(&["run", "--config", s(&config), "--output", s(&d.join("a"))]);
    ok(&["run", "--config", s(&config), "--output", s(&d.join("b"))]);
    let manifest = |run: &str| fs::read_to_string(d.join(run).join("manifest.tsv")).unwrap();
    assert_eq!(manifest("a"), manifest("b"));
    // flags win over the file
    ok(&["run", "--config", s(&config), "--seed", "10", "--output", s(&d.join("c"))]);
    assert_ne!(manifest("a").lines().next(), manifest("c").lines().next());
}

#[test]
fn invalid_k_range_is_rejected_up_front() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("g1.txt");
    fs::write(&edges, G1).unwrap();
    let out = dir.path().join("out");
    let res = role_forge(&["run", "--input", s(&edges), "--output", s(&out), "--k-min", "5", "--k-max", "3"]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("k_min"));
    assert!(!out.exists());
}

#[test]
fn direction_flag_flips_arcs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let forward = d.join("fwd.txt");
    let backward = d.join("bwd.txt");
    fs::write(&forward, G1).unwrap();
    let flipped: String = G1
        .lines()
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            format!("{b} {a}\n")
        })
        .collect();
    fs::write(&backward, flipped).unwrap();
    let p1 = d.join("p1.tsv");
    let p2 = d.join("p2.tsv");
    ok(&["communities", "--input", s(&forward), "--output", s(&p1)]);
    ok(&["communities", "--input", s(&backward), "--direction", "dst-follows-src", "--output", s(&p2)]);
    let body = |p: &Path| {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    assert_eq!(body(&p1), body(&p2));
    assert!(!role_forge(&["communities", "--input", s(&forward), "--direction", "sideways", "--output", s(&p1)])
        .status
        .success());
}

#[test]
fn report_without_artifacts_fails() {
    let dir = tempfile::tempdir().unwrap();
    let res = role_forge(&["report", "--dir", s(dir.path())]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("missing artifact"));
}
