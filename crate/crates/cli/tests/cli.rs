use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn stainfuse(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stainfuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Tiny cohorts so a full run takes a few seconds. A 474 px slide holds no
/// 10x or 5x tile, so only the 40x and 20x scorers are configured.
const SMALL_CONFIG: &str = r#"{
  "data_root": "data",
  "out_root": "out",
  "seed": 7,
  "synth": { "image_size": 474, "slides_per_class": 5 },
  "validation_folds": 2,
  "scorers": [
    { "stain": "HE", "magnification": "40x", "epochs": 20, "learning_rate": 0.5, "sampling_number": 100 },
    { "stain": "MelanA", "magnification": "40x", "epochs": 20, "learning_rate": 0.5, "sampling_number": 100 },
    { "stain": "MelanA", "magnification": "20x", "epochs": 20, "learning_rate": 0.5, "sampling_number": 100 }
  ],
  "bootstrap": { "slide_n_boot": 200, "cohort_n_boot": 300, "alpha": 0.05 }
}"#;

/// Header plus three single scorers and three fused rows per cohort.
const REPORT_LINES: usize = 1 + 6 * 3;

fn small_setup() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, SMALL_CONFIG).unwrap();
    let o = stainfuse(&["-c", cfg.to_str().unwrap(), "synth"]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, cfg)
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn missing_config_exits_2_naming_path() {
    let o = stainfuse(&["-c", "/no/such/dir/cfg.json", "synth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/dir/cfg.json"), "{}", stderr(&o));
}

#[test]
fn malformed_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{ \"seed\": ").unwrap();
    let o = stainfuse(&["-c", cfg.to_str().unwrap(), "run"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.json"));
}

#[test]
fn usage_error_exits_2() {
    let o = stainfuse(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_toy_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("toy.csv");
    std::fs::write(&csv, "slide_id,score,label\na,0.9,melanoma\nb,0.2,nevus\nc,0.6,melanoma\n").unwrap();
    let report = dir.path().join("report.csv");
    let args = [
        "evaluate",
        "--predictions",
        csv.to_str().unwrap(),
        "--n-boot",
        "1000",
        "--output",
        report.to_str().unwrap(),
    ];
    let o = stainfuse(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1.00 [1.00;1.00]"), "{}", stdout(&o));
    let text = String::from_utf8(read(&report)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "model_id,cohort_id,auroc,ci_low,ci_high,n,n_boot,seed,significant");
    assert!(lines[1].starts_with("toy,toy,1,1,1,3,1000,"));

    // same CI on every run
    let again = dir.path().join("again.csv");
    let mut args2 = args;
    args2[6] = again.to_str().unwrap();
    assert!(stainfuse(&args2).status.success());
    assert_eq!(read(&report), read(&again));
}

#[test]
fn evaluate_single_class_fails() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("one.csv");
    std::fs::write(&csv, "slide_id,score,label\na,0.9,melanoma\nb,0.2,melanoma\n").unwrap();
    let o = stainfuse(&["evaluate", "--predictions", csv.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("AUROC undefined"), "{}", stderr(&o));
}

const OUTPUTS: [&str; 6] = [
    "report/report.csv",
    "report/report_all_modes.csv",
    "report/roc_points.csv",
    "predictions/A-holdout_slides.csv",
    "predictions/B_fused.csv",
    "scores/C.csv",
];

#[test]
fn run_is_identical_across_worker_counts_and_stages() {
    let (dir, cfg) = small_setup();
    let cfg = cfg.to_str().unwrap();
    let outs: Vec<PathBuf> = [1, 4, 16]
        .iter()
        .map(|w| {
            let out = dir.path().join(format!("out{w}"));
            let o = stainfuse(&["-c", cfg, "--workers", &w.to_string(), "--out", out.to_str().unwrap(), "run"]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    for f in OUTPUTS {
        let first = read(&outs[0].join(f));
        for out in &outs[1..] {
            assert_eq!(first, read(&out.join(f)), "{f} differs");
        }
    }
    let report = String::from_utf8(read(&outs[0].join("report/report.csv"))).unwrap();
    assert_eq!(report.lines().count(), REPORT_LINES);
    assert!(outs[0].join("run_manifest.json").is_file());

    // the same stages one at a time
    let staged = dir.path().join("staged");
    for stage in ["train", "score", "aggregate", "fuse", "evaluate"] {
        let o = stainfuse(&["-c", cfg, "--out", staged.to_str().unwrap(), stage]);
        assert!(o.status.success(), "{stage}: {}", stderr(&o));
    }
    for f in OUTPUTS {
        assert_eq!(read(&outs[0].join(f)), read(&staged.join(f)), "{f} differs when staged");
    }

    let o = stainfuse(&["-c", cfg, "--out", staged.to_str().unwrap(), "tessellate"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(staged.join("tiles/A.csv").is_file());
}

#[test]
fn external_scores_skip_training() {
    let (dir, _) = small_setup();
    // one score file covering every slide and model
    let mut rows = String::from("slide_id,stain,magnification,grid_x,grid_y,score,model_id\n");
    for cohort in ["A", "B", "C"] {
        let manifest: serde_json::Value =
            serde_json::from_slice(&read(&dir.path().join(format!("data/manifests/{cohort}.json")))).unwrap();
        for (i, e) in manifest["entries"].as_array().unwrap().iter().enumerate() {
            let id = e["slide_id"].as_str().unwrap();
            let melanoma = e["label"].as_str().unwrap() != "nevus";
            for (stain, mag) in [("HE", "40x"), ("MelanA", "40x"), ("MelanA", "20x")] {
                for gx in 0..2 {
                    let base = if melanoma { 0.6 } else { 0.35 };
                    let score = base + 0.01 * ((i + gx) % 7) as f64;
                    rows.push_str(&format!("{id},{stain},{mag},{gx},0,{score},{stain}@{mag}\n"));
                }
            }
        }
    }
    let scores = dir.path().join("external.csv");
    std::fs::write(&scores, rows).unwrap();
    let cfg = dir.path().join("external.json");
    let mut value: serde_json::Value = serde_json::from_str(SMALL_CONFIG).unwrap();
    value["external_scores"] = "external.csv".into();
    value["out_root"] = "out_ext".into();
    std::fs::write(&cfg, value.to_string()).unwrap();

    let o = stainfuse(&["-c", cfg.to_str().unwrap(), "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = dir.path().join("out_ext");
    assert!(!out.join("models").exists());
    let report = String::from_utf8(read(&out.join("report/report.csv"))).unwrap();
    assert_eq!(report.lines().count(), REPORT_LINES);
    assert!(stdout(&o).contains("1.00 [1.00;1.00]"));
}
