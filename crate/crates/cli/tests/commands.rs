use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sled_cli::config::load;
use sled_data::read_kitti_disp;

fn sled(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sled"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SLED_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn config_layers_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.json");
    fs::write(&file, r#"{"seed": 3, "train": {"batch_size": 2}, "model": {"regularizer": "scc"}}"#).unwrap();
    let l = load(Some(&file), None, &[]).unwrap();
    assert_eq!((l.config.seed, l.config.train.seed, l.config.train.batch_size), (3, 3, 2));
    assert_eq!(l.config.model.regularizer, sled_model::Regularizer::Scc);

    let l = load(Some(&file), Some("9"), &[]).unwrap();
    assert_eq!(l.config.seed, 9);
    let l = load(Some(&file), Some("9"), &["seed=11".into(), "train.batch_size=4".into()]).unwrap();
    assert_eq!((l.config.seed, l.config.train.batch_size), (11, 4));
    let mut keys = l.explicit.clone();
    keys.sort();
    assert_eq!(keys, ["model.regularizer", "seed", "train.batch_size"]);

    // strings need no quoting
    let l = load(None, None, &["model.regularizer=hg2".into()]).unwrap();
    assert_eq!(l.config.model.regularizer, sled_model::Regularizer::Hourglass(2));

    for bad in [&["model.bogus=1"][..], &["train.seed=4"], &["seed=-1"], &["noequals"], &["model..x=1"]] {
        let args: Vec<String> = bad.iter().map(|s| s.to_string()).collect();
        assert!(load(None, None, &args).is_err(), "{bad:?}");
    }
    assert!(load(None, Some("x"), &[]).is_err());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    assert_eq!(code(&sled(&["train", "--set", "model.bogus=1"], out)), 1);
    assert_eq!(code(&sled(&["train", "--set", "train.batch_size=0"], out)), 1);
    assert_eq!(code(&sled(&["train", "--set", "data.manifest=missing.json"], out)), 2);
    assert_eq!(code(&sled(&["ablation", "--set", "ablation.variants=[\"sled\",\"4hg\"]"], out)), 1);
    let cfg = out.join("missing.json");
    assert_eq!(code(&sled(&["train", "--config", cfg.to_str().unwrap()], out)), 1);
    // eval without a checkpoint or predictions
    assert_eq!(code(&sled(&["eval"], &out.join("fresh"))), 1);
}

#[test]
fn gradcheck_passes_warns_and_names_a_faulty_op() {
    let dir = tempfile::tempdir().unwrap();
    let ok = sled(&["gradcheck", "--set", "train.lr_initial=0.5"], dir.path());
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
    assert!(stderr(&ok).contains("warning: train.lr_initial has no effect on gradcheck"));
    let report = json(&dir.path().join("gradcheck.json"));
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() >= 14);
    assert!(checks.iter().all(|c| c["passed"] == true && c["max_rel_error"].as_f64().unwrap() < 1e-4));

    let bad = sled(&["gradcheck", "--set", "gradcheck.fault=avg_pool"], dir.path());
    assert_eq!(code(&bad), 3);
    assert!(stderr(&bad).contains("gradient mismatch in avg_pool"), "{}", stderr(&bad));
}

#[test]
fn train_eval_predict_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    assert_eq!(code(&sled(&["synth", "--set", "data.count=2"], &syn)), 0);
    let manifest = format!("data.manifest={}", syn.join("manifest.json").display());
    let args = ["--set", &manifest, "--set", "train.pretrain_epochs=2", "--set", "model.regularizer=scc"];

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let train: Vec<&str> = ["train"].iter().chain(&args).copied().collect();
        assert_eq!(code(&sled(&train, out)), 0);
        let eval: Vec<&str> = ["eval"].iter().chain(&args).copied().collect();
        assert_eq!(code(&sled(&eval, out)), 0);
    }
    for f in ["checkpoint.bin", "loss.csv", "metrics.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(a.join("loss.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("epoch,lr,loss\n0,0.001,"));
    let metrics = json(&a.join("metrics.json"));
    assert_eq!(metrics["samples"].as_array().unwrap().len(), 2);
    assert!(metrics["aggregate"]["all"]["epe"].as_f64().unwrap() > 0.0);
    assert_eq!(metrics["aggregate"]["noc"]["region"], "noc");

    // the checkpoint belongs to scc; a sled model rejects it
    let eval_sled = ["eval", "--set", &manifest, "--set", "model.regularizer=sled"];
    let mismatch = sled(&eval_sled, &a);
    assert_eq!(code(&mismatch), 1);
    assert!(stderr(&mismatch).contains("incompatible checkpoint"));
}

#[test]
fn predict_untrained_stays_in_range() {
    let dir = tempfile::tempdir().unwrap();
    let o = sled(&["predict", "--set", "data.count=2"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for i in 0..2 {
        let map = read_kitti_disp(&dir.path().join(format!("disp/{i:04}.png"))).unwrap();
        assert_eq!((map.width(), map.height()), (128, 64));
        assert!(map.values().iter().all(|&v| (0.0..=31.0).contains(&v)));
        assert!(dir.path().join(format!("disp/{i:04}_color.png")).exists());
    }
}

#[test]
fn eval_of_ground_truth_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let syn = dir.path().join("syn");
    assert_eq!(code(&sled(&["synth", "--set", "data.count=3"], &syn)), 0);
    let preds = dir.path().join("preds");
    fs::create_dir_all(&preds).unwrap();
    for i in 0..3 {
        fs::copy(syn.join(format!("{i:04}_gt.pfm")), preds.join(format!("{i:04}.pfm"))).unwrap();
    }
    let o = sled(
        &[
            "eval",
            "--set",
            &format!("data.manifest={}", syn.join("manifest.json").display()),
            "--set",
            &format!("eval.predictions={}", preds.display()),
        ],
        &dir.path().join("eval"),
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("eval.epe=0\n") && stdout.contains("eval.d1_all=0\n"), "{stdout}");
    let m = json(&dir.path().join("eval/metrics.json"));
    for region in ["all", "noc"] {
        let r = &m["aggregate"][region];
        assert_eq!(r["epe"], 0.0);
        assert_eq!(r["d1_all"], 0.0);
        for t in ["1", "3", "5"] {
            assert_eq!(r["gt_px"][t], 0.0);
        }
    }
}

#[test]
fn ablation_parameter_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = sled(&["ablation", "--set", "model.paper_scale=true"], dir.path());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("table.md")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "| Model | >1px | >3px | >5px | EPE | D1-all | Para. |");
    assert_eq!(lines.len(), 7);
    assert!(lines[6].starts_with("| SLED-Net |"));

    let rows = json(&dir.path().join("ablation.json"))["rows"].as_array().unwrap().clone();
    let p: Vec<i64> = rows.iter().map(|r| r["parameters"].as_i64().unwrap()).collect();
    let (scc, hg1, hg2, hg3, sled_net) = (p[0], p[1], p[2], p[3], p[4]);
    assert_eq!(hg2 - hg1, hg3 - hg2);
    assert!(sled_net < hg3 && scc < hg1 && hg1 < sled_net);

    let one = dir.path().join("one");
    assert_eq!(code(&sled(&["ablation", "--set", "ablation.variants=[\"scc\"]"], &one)), 0);
    assert_eq!(fs::read_to_string(one.join("table.md")).unwrap().lines().count(), 3);
}

#[test]
fn trained_ablation_rejects_incompatible_variants() {
    let dir = tempfile::tempdir().unwrap();
    let o = sled(&["ablation", "--set", "ablation.train=true", "--set", "ablation.variants=[\"hg1\"]"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("max_disp divisible by 64"), "{}", stderr(&o));
}
