use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn greenpool(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_greenpool"))
        .args(args)
        .output()
        .unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMOKE: &str = r#"
seeds = [1]

[[streams]]
preset = "AGR_a"
length = 10000

[pool]
preset = "paper-mini"

[[policies]]
kind = "zeta"
zeta = 0.01
epsilon = 0.1

[[policies]]
kind = "cheapest"
"#;

#[test]
fn smoke_run_writes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("smoke.toml");
    fs::write(&config, SMOKE).unwrap();
    let out = dir.path().join("out");
    let o = greenpool(&["run", "--config", path(&config), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "policy,dataset,seed,auroc,accuracy,total_cost,steps"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.ends_with(",10000")));
    for f in [
        "config.toml",
        "timings.csv",
        "summary.csv",
        "wilcoxon_auroc.csv",
        "wilcoxon_cost.csv",
    ] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let traces = fs::read_dir(out.join("traces")).unwrap().count();
    assert_eq!(traces, 2);
    assert!(!out.join("logs").exists());
}

#[test]
fn echoed_config_reproduces_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("smoke.toml");
    fs::write(&config, SMOKE.replace("10000", "2000")).unwrap();
    let first = dir.path().join("first");
    assert!(
        greenpool(&["run", "--config", path(&config), "--output", path(&first)])
            .status
            .success()
    );
    let second = dir.path().join("second");
    let echo = first.join("config.toml");
    assert!(
        greenpool(&["run", "--config", path(&echo), "--output", path(&second)])
            .status
            .success()
    );
    for f in ["results.csv", "summary.csv"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(second.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn missing_policies_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "seeds = [1]\n[[streams]]\npreset = \"AGR_a\"\nlength = 100\n[pool]\npreset = \"paper-mini\"\n")
        .unwrap();
    let o = greenpool(&["run", "--config", path(&config)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("policies"));
}

#[test]
fn malformed_toml_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "seeds = [1\n").unwrap();
    assert_eq!(
        greenpool(&["run", "--config", path(&config)]).status.code(),
        Some(2)
    );
    assert_eq!(
        greenpool(&["run", "--preset", "nope"]).status.code(),
        Some(2)
    );
}

#[test]
fn dry_run_describes_the_paper_mini_grid() {
    let o = greenpool(&["run", "--preset", "paper-mini", "--dry-run"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.starts_with("6 streams x 10 policies x 3 seeds = 180 runs"),
        "{text}"
    );
    assert!(text.contains("M=20 k=12"));
    assert!(text.contains("zeta(0.01,0.1)"));
}

#[test]
fn gen_is_deterministic_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        assert!(greenpool(&[
            "gen",
            "--kind",
            "led",
            "--seed",
            "3",
            "--count",
            "250",
            "--out",
            path(out)
        ])
        .status
        .success());
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    assert_eq!(text.lines().count(), 251);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 25);

    let other = dir.path().join("c.csv");
    assert!(greenpool(&[
        "gen",
        "--kind",
        "led",
        "--seed",
        "4",
        "--count",
        "250",
        "--out",
        path(&other)
    ])
    .status
    .success());
    assert_ne!(text, fs::read_to_string(&other).unwrap());

    let empty = dir.path().join("empty.csv");
    assert!(greenpool(&[
        "gen",
        "--kind",
        "agrawal",
        "--count",
        "0",
        "--out",
        path(&empty)
    ])
    .status
    .success());
    assert_eq!(fs::read_to_string(&empty).unwrap().lines().count(), 1);
}

#[test]
fn generated_csv_feeds_a_file_stream() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("agr.csv");
    assert!(greenpool(&[
        "gen",
        "--kind",
        "AGR_a",
        "--count",
        "1500",
        "--out",
        path(&data)
    ])
    .status
    .success());
    let config = dir.path().join("file.toml");
    fs::write(
        &config,
        "seeds = [1]\n[[streams]]\nfile = \"agr.csv\"\n[pool]\npreset = \"ht\"\nk = 3\n\
         [[policies]]\nkind = \"cand\"\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = greenpool(&["run", "--config", path(&config), "--output", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(
        results.lines().nth(1).unwrap().ends_with(",1500"),
        "{results}"
    );
}

#[test]
fn theory_exit_codes() {
    assert_eq!(greenpool(&["theory"]).status.code(), Some(0));
    assert_eq!(
        greenpool(&["theory", "--zeta", "0.4"]).status.code(),
        Some(0)
    );
    assert_eq!(
        greenpool(&["theory", "--trials", "0"]).status.code(),
        Some(2)
    );
    assert_eq!(
        greenpool(&["theory", "--alpha", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn theory_sweep_writes_one_row_per_zeta() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = greenpool(&[
        "theory",
        "--M",
        "2000",
        "--k",
        "20",
        "--sweep",
        "0.01,0.1,0.3",
        "--sweep-out",
        path(&out),
    ]);
    assert!(o.status.code().is_some_and(|c| c <= 1));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(3).unwrap().contains("condition_not_met"));
}
