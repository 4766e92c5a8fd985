use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
master_seed = 3

[synth]
n_employees = 400

[forest.transition]
n_trees = 20
min_samples_leaf = 50
features_per_split = "all"

[forest.salary]
n_trees = 10

[train.tabular]
episodes = 3000
alpha = 1.0
alpha_visit_exponent = 0.5
key = "job_and_step"

[eval]
n_permutations = 500
n_episodes_distribution = 100
"#;

fn careerpath(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_careerpath"))
        .arg("--quiet")
        .arg("--output")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_configs_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("algorithm = \"sarsa\"\nrepresentation = \"full_history\"\n", "algorithm"),
        ("[synth]\nn_employes = 3\n", "n_employes"),
        ("[eval]\nn_sample = 0\n", "eval.n_sample"),
    ];
    for (text, needle) in cases {
        let cfg = write_config(dir.path(), text);
        let out = careerpath(dir.path(), &["--config", &cfg, "generate-data"]);
        assert_eq!(out.status.code(), Some(1), "{text}: {}", stderr(&out));
        assert!(stderr(&out).contains(needle), "{text}: {}", stderr(&out));
    }
    assert!(!dir.path().join("data").exists());
}

#[test]
fn a_stage_without_its_inputs_names_the_missing_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = careerpath(dir.path(), &["fit-models"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("generate-data"), "{}", stderr(&out));
}

#[test]
fn staged_run_verifies_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for stage in ["generate-data", "fit-models", "train"] {
        let out = careerpath(dir.path(), &["--config", &cfg, stage]);
        assert!(out.status.success(), "{stage}: {}", stderr(&out));
    }
    // Later stages resume from the artifacts already on disk.
    let out = careerpath(dir.path(), &["--config", &cfg, "evaluate"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = careerpath(dir.path(), &["--config", &cfg, "distribution-report"]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["reports/comparison.json", "reports/distribution_uniform.csv", "manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }

    let out = careerpath(dir.path(), &["verify"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let report = dir.path().join("reports/comparison.csv");
    let mut bytes = std::fs::read(&report).unwrap();
    bytes.push(b'\n');
    std::fs::write(&report, bytes).unwrap();
    let out = careerpath(dir.path(), &["verify"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("comparison.csv"), "{}", stderr(&out));
}

#[test]
fn staged_and_single_runs_agree() {
    let staged = tempfile::tempdir().unwrap();
    let whole = tempfile::tempdir().unwrap();
    let cfg = write_config(staged.path(), SMALL);
    for stage in ["generate-data", "fit-models", "train", "evaluate"] {
        assert!(careerpath(staged.path(), &["--config", &cfg, stage]).status.success());
    }
    assert!(careerpath(whole.path(), &["--config", &cfg, "pipeline"]).status.success());
    for f in ["reports/comparison.json", "policy/policy.json", "models/transition.json"] {
        let a = std::fs::read(staged.path().join(f)).unwrap();
        let b = std::fs::read(whole.path().join(f)).unwrap();
        assert!(a == b, "{f} differs");
    }
}

#[test]
fn recommend_writes_a_reproducible_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for stage in ["generate-data", "fit-models", "train"] {
        assert!(careerpath(dir.path(), &["--config", &cfg, stage]).status.success());
    }

    // Careers are tried in file order until one ends in a catalog job.
    let data = std::fs::read_to_string(dir.path().join("data/work_experience.csv")).unwrap();
    let mut lines = data.lines();
    let header = lines.next().unwrap();
    let mut careers: Vec<(String, Vec<&str>)> = Vec::new();
    for line in lines {
        let id = line.split(',').next().unwrap();
        match careers.last_mut() {
            Some((last, rows)) if last == id => rows.push(line),
            _ => careers.push((id.to_owned(), vec![line])),
        }
    }
    let history = dir.path().join("history.csv");
    let run = |name: &str| {
        let out_path = dir.path().join(name);
        let out = careerpath(
            dir.path(),
            &[
                "--config",
                &cfg,
                "recommend",
                "--history",
                history.to_str().unwrap(),
                "--horizon",
                "8",
                "--out",
                out_path.to_str().unwrap(),
            ],
        );
        (out, out_path)
    };
    let mut found = None;
    for (_, rows) in careers.iter().filter(|(_, r)| !r.iter().any(|l| l.contains(",,"))).take(50) {
        std::fs::write(&history, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
        let (out, a) = run("a.csv");
        if out.status.success() {
            found = Some(a);
            break;
        }
        assert_eq!(out.status.code(), Some(1));
        assert!(stderr(&out).contains("outside the job catalog"), "{}", stderr(&out));
    }
    let a = found.expect("some career ends in a catalog job");
    let (out, b) = run("b.csv");
    assert!(out.status.success(), "{}", stderr(&out));
    let trace = std::fs::read_to_string(&a).unwrap();
    assert_eq!(trace, std::fs::read_to_string(&b).unwrap());
    let mut rows = trace.lines();
    assert_eq!(rows.next().unwrap().split(',').count(), 11);
    assert_eq!(rows.count(), 8);
}
