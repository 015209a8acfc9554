use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const SMALL: &str = "\
[quantization]
denominator = 2
[evaluation]
trials = 10
horizon = 20
seed = 3
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_activeslam"))
}

fn setup(body: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, body).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn run(cfg: &Path, out: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(cfg).arg("--out").arg(out).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn only_file(dir: &Path) -> PathBuf {
    let entries: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    assert_eq!(entries.len(), 1, "{entries:?}");
    entries[0].clone()
}

#[test]
fn build_reports_sizes_and_reuses_the_cache() {
    let (_d, cfg, out) = setup("[quantization]\ndenominator = 5\n");
    let first = run(&cfg, &out, &["build"]);
    assert!(first.status.success(), "{}", stderr(&first));
    let text = stdout(&first);
    assert!(text.contains("belief grid points: 15504"), "{text}");
    assert!(text.contains("# provenance: default"));
    assert!(text.contains("wrote "));
    let cached = only_file(&out.join("cache"));
    let before = std::fs::metadata(&cached).unwrap().modified().unwrap();
    let second = run(&cfg, &out, &["build"]);
    assert!(stdout(&second).contains("cache hit"), "{}", stdout(&second));
    assert_eq!(std::fs::metadata(&cached).unwrap().modified().unwrap(), before);
}

#[test]
fn pipeline_runs_and_repeats_exactly() {
    let (_d, cfg, out) = setup(SMALL);
    for cmd in ["build", "solve"] {
        let o = run(&cfg, &out, &[cmd]);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
    }
    let policy = only_file(&out.join("policies"));
    let first = std::fs::read(&policy).unwrap();
    assert!(run(&cfg, &out, &["solve"]).status.success());
    assert_eq!(std::fs::read(&policy).unwrap(), first);

    let o = run(&cfg, &out, &["evaluate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trials = std::fs::read_to_string(out.join("evaluate/trials.csv")).unwrap();
    // header plus 2 controllers x 10 trials x 21 steps
    assert_eq!(trials.lines().count(), 1 + 2 * 10 * 21);
    assert!(trials.lines().nth(1).unwrap().starts_with("activeslam "));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("evaluate/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["result"]["policy"]["n"], 10);
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);

    let again = run(&cfg, &out, &["evaluate"]);
    assert!(again.status.success());
    assert_eq!(std::fs::read_to_string(out.join("evaluate/trials.csv")).unwrap(), trials);
}

#[test]
fn seed_flag_changes_results_and_hash() {
    let (_d, cfg, out) = setup(SMALL);
    for cmd in ["build", "solve", "evaluate"] {
        assert!(run(&cfg, &out, &[cmd]).status.success());
    }
    let a = std::fs::read_to_string(out.join("evaluate/trials.csv")).unwrap();
    let o = bin().arg("--config").arg(&cfg).arg("--out").arg(&out).args(["--seed", "4", "evaluate"]).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let b = std::fs::read_to_string(out.join("evaluate/trials.csv")).unwrap();
    assert_ne!(a, b);
    let hash = |t: &str| t.lines().nth(1).unwrap().split(',').nth(1).unwrap().to_string();
    assert_ne!(hash(&a), hash(&b));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let (d, cfg, _) = setup(SMALL);
    let env_out = d.path().join("from-env");
    let o = bin().arg("--config").arg(&cfg).env("ACTIVESLAM_OUT", &env_out).arg("build").output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(env_out.join("cache").is_dir());
}

#[test]
fn sweep_row_count_is_the_product_of_its_lists() {
    let body = format!("{SMALL}[sweep]\nlambdas = [1.0, 20.0, 500.0]\nsigma_r = [0.5, 1.0]\nsigma_phi = [0.3]\nkinds = [\"shannon\", \"rao\"]\n");
    let (_d, cfg, out) = setup(&body);
    let o = run(&cfg, &out, &["sweep"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = std::fs::read_to_string(out.join("sweep/sweep_rows.csv")).unwrap();
    assert_eq!(rows.lines().count() - 1, 3 * 2 * 2);
    let agreement = std::fs::read_to_string(out.join("sweep/sweep_agreement.csv")).unwrap();
    assert_eq!(agreement.lines().count() - 1, 3 * 2);
    for name in ["sweep_best.csv", "sweep_gaps.csv", "sweep_baseline.csv", "sweep.json"] {
        assert!(out.join("sweep").join(name).is_file(), "{name}");
    }
}

#[test]
fn a_single_action_model_gives_a_constant_policy() {
    let (_d, cfg, out) = setup(&format!("{SMALL}[motion]\nv_max = 0.1\n"));
    let cfg_text = std::fs::read_to_string(&cfg).unwrap().replace("[quantization]\n", "[quantization]\nn_action = 1\n");
    std::fs::write(&cfg, cfg_text).unwrap();
    assert!(run(&cfg, &out, &["build"]).status.success());
    assert!(run(&cfg, &out, &["solve"]).status.success());
    let f = activeslam_core::cache::read_policy(&only_file(&out.join("policies"))).unwrap();
    assert_eq!(f.policy.meta.n_actions, 1);
    assert!(f.policy.actions.iter().all(|&a| a == 0));
}

#[test]
fn exit_codes_distinguish_failures() {
    let (d, cfg, out) = setup(SMALL);
    let bad = d.path().join("bad.cfg");
    std::fs::write(&bad, "[cost]\nbeta = 2.0\n").unwrap();
    let o = run(&bad, &out, &["build"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("configuration error"));
    std::fs::write(&bad, "[cost]\nwhat = 1\n").unwrap();
    assert_eq!(run(&bad, &out, &["build"]).status.code(), Some(2));

    let o = run(&cfg, &out, &["solve"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("run `activeslam build` first"));

    assert!(run(&cfg, &out, &["build"]).status.success());
    let o = run(&cfg, &out, &["evaluate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("missing policy"));

    let capped = d.path().join("capped.cfg");
    std::fs::write(&capped, "[quantization]\ndenominator = 6\ngrid_cap = 1000\n").unwrap();
    assert_eq!(run(&capped, &out, &["build"]).status.code(), Some(3));
}

#[test]
fn mismatched_policy_metadata_is_rejected() {
    let (_d, cfg, out) = setup(SMALL);
    for cmd in ["build", "solve"] {
        assert!(run(&cfg, &out, &[cmd]).status.success());
    }
    let path = only_file(&out.join("policies"));
    let f = activeslam_core::cache::read_policy(&path).unwrap();
    let mut meta = f.policy.meta.clone();
    meta.lambda = 7.0;
    let wrong = activeslam_core::solver::Policy::new(meta, f.policy.actions.clone()).unwrap();
    activeslam_core::cache::write_policy(&path, &f.hash, &f.tag, &wrong, &f.value).unwrap();
    let o = run(&cfg, &out, &["evaluate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("does not match the model"), "{}", stderr(&o));
}

#[test]
fn verify_passes_and_reports_an_injected_fault() {
    let (_d, cfg, out) = setup(SMALL);
    let o = run(&cfg, &out, &["verify", "--quick"]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).lines().all(|l| !l.starts_with("FAIL")));
    let o = run(&cfg, &out, &["verify", "--quick", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(4));
    let text = stdout(&o);
    let line = text.lines().find(|l| l.starts_with("FAIL")).unwrap();
    assert!(line.contains("row (state ") && line.contains("sums to"), "{line}");
}
