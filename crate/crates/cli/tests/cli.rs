use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use autobid::env::{bandit_lb_eps, BanditLbVariant, EnvSpec, Marginal};
use autobid::policies::FixedBid;
use autobid::{Objective, PaymentRule};
use autobid_cli::config::{DualConfig, OracleConfig, PolicySpec, Seeds};
use autobid_cli::output::TRACE_HEADER;
use autobid_cli::ExperimentConfig;
use proptest::prelude::*;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_autobid"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

/// Value of `key = x` in a summary.
fn summary_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn minimal_run_writes_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("minimal.toml");
    let out = tmp.path().join("out");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let csv = std::fs::read_to_string(out.join("trace_seed0.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], TRACE_HEADER);
    assert_eq!(lines.len(), 11);
    // Fixed bid 0.5 against d = 0.5 always wins a value of 1.
    for (t, line) in lines[1..].iter().enumerate() {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 15);
        assert_eq!(cols[0], (t + 1).to_string());
        assert_eq!(cols[4], "1");
        assert_eq!(cols[14], (t + 1).to_string());
    }
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("metadata.dual_step"));
    assert_eq!(summary_value(&summary, "cum_objective"), 10.0);
}

#[test]
fn runs_are_byte_identical_across_invocations_and_threads() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "poly.toml",
        r#"
horizon = 300
seeds = 3
rho = 0.5
rule = { kind = "first_price" }
env = { kind = "product", value = { kind = "grid", points = [0.25, 0.5, 1.0] }, competing = { kind = "uniform", lo = 0.0, hi = 1.0 } }
policy = { kind = "poly" }
"#,
    );
    let mut dirs = Vec::new();
    for (i, threads) in ["1", "1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = run(&[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        dirs.push(out);
    }
    for seed in 0..3 {
        let name = format!("trace_seed{seed}.csv");
        let a = std::fs::read(dirs[0].join(&name)).unwrap();
        assert_eq!(a, std::fs::read(dirs[1].join(&name)).unwrap());
        assert_eq!(a, std::fs::read(dirs[2].join(&name)).unwrap());
    }
}

#[test]
fn bandit_trace_masks_competing_bid() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs_dir().join("bandit_lb_perturbed.toml");
    let out = tmp.path().join("out");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = std::fs::read_to_string(out.join("trace_seed0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 65);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("")));
}

#[test]
fn oracle_tight_beta_second_price() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "tb.toml",
        r#"
horizon = 100
rho = 1.0
rule = { kind = "second_price" }
env = { kind = "tight_beta", beta = 0.25 }
policy = { kind = "fixed", function = { kind = "constant", bid = 1.0 } }
"#,
    );
    let o = run(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!((summary_value(&stdout(&o), "opt") - 0.75).abs() < 1e-12);
}

#[test]
fn oracle_certifies_perturbed_lower_bound() {
    let cfg = configs_dir().join("bandit_lb_perturbed.toml");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    let opt = summary_value(&stdout(&o), "opt");
    assert!(
        opt >= 13.0 / 16.0 + 3.0 * bandit_lb_eps(64) / 32.0 - 1e-9,
        "{opt}"
    );
}

#[test]
fn probe_passes() {
    let o = run(&["probe", "--seed", "3"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn invalid_config_exits_2_with_every_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        r#"
horizon = 10
rho = 3.0
rule = { kind = "first_price" }
env = { kind = "product", value = { kind = "point", at = 1.0 }, competing = { kind = "point", at = 0.5 } }
policy = { kind = "poly", lipschitz = 0.0 }
oracle = { candidates = { kind = "env_atoms" }, resolution = 2.0 }
"#,
    );
    let o = run(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for field in ["rho", "lipschitz", "resolution"] {
        assert!(err.contains(field), "{err}");
    }

    let unknown = write_config(tmp.path(), "unknown.toml", "horizon = 10\nbogus = true\n");
    assert_eq!(
        run(&["oracle", "--config", unknown.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn io_failures_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(
        run(&["run", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(4)
    );

    // The output directory cannot be created below a regular file.
    let blocker = write_config(tmp.path(), "file", "");
    let cfg = configs_dir().join("minimal.toml");
    let out = blocker.join("out");
    let o = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn shipped_configs_are_canonical() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let text = std::fs::read_to_string(&path).unwrap();
        let cfg = ExperimentConfig::parse(&text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(
            cfg.render(),
            text,
            "{} is not in canonical form",
            path.display()
        );
        n += 1;
    }
    assert!(n >= 5);
}

fn unit() -> impl Strategy<Value = f64> {
    (0u32..=1000).prop_map(|k| k as f64 / 1000.0)
}

fn marginal() -> impl Strategy<Value = Marginal> {
    prop_oneof![
        unit().prop_map(|at| Marginal::Point { at }),
        prop::collection::vec(unit(), 1..5).prop_map(|points| Marginal::Grid { points }),
        (unit(), unit()).prop_map(|(a, b)| Marginal::Uniform {
            lo: a.min(b),
            hi: a.max(b),
        }),
    ]
}

fn env() -> impl Strategy<Value = EnvSpec> {
    prop_oneof![
        (marginal(), marginal())
            .prop_map(|(value, competing)| EnvSpec::Product { value, competing }),
        (1u32..50).prop_map(|k| EnvSpec::TightBeta {
            beta: k as f64 / 100.0
        }),
        (prop::option::of(8usize..5000), 0usize..4).prop_map(|(horizon, j)| EnvSpec::BanditLb {
            horizon,
            variant: if j == 0 {
                BanditLbVariant::Base
            } else {
                BanditLbVariant::Perturbed { j: j - 1 }
            },
        }),
    ]
}

fn policy() -> impl Strategy<Value = PolicySpec> {
    prop_oneof![
        (1u32..4, 1u32..4).prop_map(|(l, d)| PolicySpec::Tree {
            lipschitz: l as f64,
            depth_cap: d,
            cover_cap: 1000,
            restart_grid: Default::default(),
            goodness_check: d == 1,
        }),
        (1u32..4).prop_map(|l| PolicySpec::BucketBandit {
            lipschitz: l as f64
        }),
        (1u32..4).prop_map(|l| PolicySpec::Poly {
            lipschitz: l as f64,
            restart_grid: Default::default(),
        }),
        unit().prop_map(|bid| PolicySpec::Fixed {
            function: FixedBid::Constant { bid },
        }),
    ]
}

prop_compose! {
    fn config()(
        horizon in 1usize..100_000,
        seeds in prop_oneof![(1u64..50).prop_map(Seeds::Count), prop::collection::vec(0u64..1000, 1..4).prop_map(Seeds::List)],
        rho in unit(),
        exact_roi in any::<bool>(),
        rule in prop_oneof![
            Just(PaymentRule::FirstPrice),
            Just(PaymentRule::SecondPrice),
            unit().prop_map(|q| PaymentRule::Mixed { q }),
        ],
        quasi in any::<bool>(),
        env in env(),
        policy in policy(),
        step in prop::option::of(unit()),
        output in prop::option::of("[a-z]{1,8}"),
    ) -> ExperimentConfig {
        ExperimentConfig {
            horizon,
            seeds,
            rho,
            exact_roi,
            rule,
            objective: if quasi { Objective::QuasiLinear { nu: 1.0 } } else { Objective::ValueMax },
            env,
            policy,
            dual: DualConfig { step, ..DualConfig::default() },
            oracle: OracleConfig::default(),
            sweep: None,
            output: output.map(PathBuf::from),
        }
    }
}

proptest! {
    #[test]
    fn render_parse_round_trips(cfg in config()) {
        let text = cfg.render();
        let back = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.render(), text);
    }
}
