use std::path::Path;
use std::process::{Command, Output};

fn absa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_absa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("run absa")
}

fn ok(args: &[&str]) -> String {
    let out = absa(args);
    assert!(
        out.status.success(),
        "absa {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn majority_on_synthetic_semeval_counts() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = (dir.path().join("train.xml"), dir.path().join("test.xml"));
    ok(&["synth", "--domain", "restaurant", "--split", "train", "--out", p(&train)]);
    ok(&["synth", "--domain", "restaurant", "--split", "test", "--out", p(&test)]);
    let table = ok(&["majority", "--train", p(&train), "--test", p(&test), "--domain", "restaurant"]);
    assert!(table.contains("26.26"), "{}", table);
    let json = ok(&["majority", "--train", p(&train), "--test", p(&test), "--domain", "restaurant", "--json"]);
    let v: serde_json::Value = serde_json::from_str(json.trim()).unwrap();
    assert_eq!(v["macro_f1"], "26.26");
    assert_eq!(v["report"]["overall"]["count"], 1120);
}

#[test]
fn errors_are_one_json_line_with_nonzero_exit() {
    let out = absa(&["eval", "--checkpoint", "/nonexistent.ckpt", "--data", "/nonexistent.xml"]);
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    let line = err.lines().last().unwrap();
    let v: serde_json::Value = serde_json::from_str(line).unwrap();
    assert_eq!(v["error"], "io");
    assert!(v["message"].as_str().unwrap().contains("nonexistent"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "lr = fast\n").unwrap();
    let out = absa(&["train-alsa", "--config", p(&cfg)]);
    assert!(!out.status.success());
    let v: serde_json::Value = serde_json::from_str(String::from_utf8(out.stderr).unwrap().lines().last().unwrap()).unwrap();
    assert_eq!(v["error"], "config");
}

#[test]
fn transfer_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (train, test) = (d.join("train.xml"), d.join("test.xml"));
    ok(&["synth", "--aspects", "30", "--seed", "1", "--out", p(&train)]);
    ok(&["synth", "--aspects", "12", "--seed", "2", "--id-prefix", "test-", "--out", p(&test)]);
    let cfg = d.join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# shared settings\ntrain_data = {}\ntest_data = {}\nembed_dim = 12\ntransfer_dim = 8\nalsa_hidden = 10\nepochs = 2\nlr = 0.01\n",
            train.display(),
            test.display()
        ),
    )
    .unwrap();

    let ae = d.join("ae");
    let log = ok(&["train-ae", "--config", p(&cfg), "--output", p(&ae)]);
    assert_eq!(log.lines().count(), 3);
    let ae_ckpt = d.join("ae.best.ckpt");
    assert!(ae_ckpt.exists() && d.join("ae.final.ckpt").exists() && d.join("ae.log.jsonl").exists());

    let st = d.join("st.ckpt");
    let out = ok(&["export-st", "--checkpoint", p(&ae_ckpt), "--data", p(&train), "--data", p(&test), "--out", p(&st)]);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["width"], 8);

    let ian = d.join("ian");
    ok(&[
        "train-alsa",
        "--config",
        p(&cfg),
        "--architecture",
        "ian",
        "--input",
        "transfer",
        "--st-cache",
        p(&st),
        "--output",
        p(&ian),
    ]);
    let ian_ckpt = d.join("ian.best.ckpt");
    let json = ok(&["eval", "--checkpoint", p(&ian_ckpt), "--data", p(&test), "--st-cache", p(&st), "--json"]);
    let v: serde_json::Value = serde_json::from_str(json.trim()).unwrap();
    assert_eq!(v["model"], "ian");
    assert_eq!(v["report"]["overall"]["count"], 12);

    let out = absa(&["eval", "--checkpoint", p(&ian_ckpt), "--data", p(&test), "--st-cache", p(&st), "--architecture", "atae"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("architecture_mismatch"));
    let out = absa(&["eval", "--checkpoint", p(&ian_ckpt), "--data", p(&test)]);
    assert!(!out.status.success());

    let att = d.join("att.jsonl");
    ok(&["dump-attention", "--checkpoint", p(&ian_ckpt), "--data", p(&test), "--st-cache", p(&st), "--out", p(&att)]);
    let records: Vec<serde_json::Value> = std::fs::read_to_string(&att)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(records.len(), 24);
    for r in &records {
        let sum: f64 = r["alpha"].as_array().unwrap().iter().map(|a| a.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    let tc = d.join("tc");
    ok(&["train-alsa", "--config", p(&cfg), "--architecture", "tclstm", "--output", p(&tc)]);
    let out = absa(&["dump-attention", "--checkpoint", p(&d.join("tc.best.ckpt")), "--data", p(&test), "--out", p(&att)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no attention to dump"));

    let records = d.join("grid.jsonl");
    let table = ok(&[
        "grid-search",
        "--config",
        p(&cfg),
        "--set",
        "epochs=1",
        "--grid",
        "lr=0.01,0.002",
        "--grid",
        "l2_lambda=0,1e-5",
        "--records",
        p(&records),
    ]);
    assert_eq!(table.lines().count(), 5);
    assert_eq!(std::fs::read_to_string(&records).unwrap().lines().count(), 4);

    let cross = ok(&[
        "cross-domain",
        "--config",
        p(&cfg),
        "--set",
        "epochs=1",
        "--tagger",
        p(&ae_ckpt),
        "--architectures",
        "atae,ian",
        "--json",
    ]);
    assert_eq!(cross.lines().count(), 2);
    for line in cross.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["transfer_dim"], 8);
    }
}
