use std::path::Path;
use std::process::{Command, Output};

fn hetgcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetgcn"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Two well separated classes over a small vocabulary.
fn write_task(dir: &Path, task: &str, extra: &str) -> String {
    let mut corpus = String::new();
    let splits = ["train", "train", "train", "dev", "test"];
    for i in 0..20 {
        let (label, words) = if i % 2 == 0 {
            ("pos", ["good", "great", "fine"])
        } else {
            ("neg", ["bad", "awful", "poor"])
        };
        let text = format!(
            "{} {}, {}!",
            words[i % 3],
            words[(i + 1) % 3],
            words[(i / 2) % 3]
        );
        let split = splits[(i / 2) % 5];
        corpus.push_str(&format!(
            "{{\"text\": \"{text}\", \"label\": \"{label}\", \"split\": \"{split}\"}}\n"
        ));
    }
    std::fs::write(dir.join("corpus.jsonl"), corpus).unwrap();
    let cfg = dir.join("task.cfg");
    std::fs::write(
        &cfg,
        format!("task = {task}\ncorpus = corpus.jsonl\nlabels = pos, neg\nout = out\nmax_epochs = 40\n{extra}"),
    )
    .unwrap();
    cfg.to_str().unwrap().to_owned()
}

#[test]
fn build_graph_prints_stats() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_task(dir.path(), "toy", "");
    let o = hetgcn(&["build-graph", "--config", &cfg]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("n_doc=20 n_word=6"), "{}", stdout(&o));
    assert!(dir.path().join("out/graph_edges.tsv").is_file());
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_task(dir.path(), "toy", "");
    let o = hetgcn(&["train", "--config", &cfg, "--lambda", "1", "--seed", "4"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("lambda=1 "), "{}", stdout(&o));
    let o = hetgcn(&["eval", "--config", &cfg]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("test macro_f1="));
}

#[test]
fn out_override_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_task(dir.path(), "toy", "lambda_grid = 0.5, 1\n");
    let out = dir.path().join("elsewhere");
    let o = hetgcn(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("lambda_star="));
    let csv = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn ablate_accepts_several_configs() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir(&a).unwrap();
    std::fs::create_dir(&b).unwrap();
    let cfg_a = write_task(&a, "toy", "");
    let cfg_b = write_task(&b, "other", "");
    let out = dir.path().join("ablation");
    let o = hetgcn(&[
        "ablate",
        "-c",
        &cfg_a,
        "-c",
        &cfg_b,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 2);
    assert!(stdout(&o).contains("w/o GCN"));
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_task(dir.path(), "toy", "");
    assert_eq!(
        hetgcn(&["train", "--config", &cfg, "--lambda", "1.5"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        hetgcn(&["train", "--config", "missing.cfg"]).status.code(),
        Some(1)
    );
    assert_eq!(hetgcn(&["eval", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(
        hetgcn(&["train", "-c", &cfg, "-c", &cfg]).status.code(),
        Some(1)
    );
    assert_eq!(hetgcn(&["fit", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(hetgcn(&["--help"]).status.code(), Some(0));
}

#[test]
fn divergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_task(dir.path(), "toy", "lr_gcn = 1e300\n");
    let o = hetgcn(&["train", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}
