use std::path::Path;
use std::process::{Command, Output};

const ARCH: &str = r#"
name = "tiny"
input = [1, 8, 8]
classes = 4

[[layers]]
kind = "conv"
out = 6
kernel = 3
pad = 1

[[layers]]
kind = "global_pool"

[[layers]]
kind = "dense"
out = 4
"#;

fn flexbits(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_flexbits"))
        .args(args)
        .env_remove("FLEXBITS_DATA_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn config(dir: &Path, scheme: &str, regime: &str) -> String {
    std::fs::write(dir.join("tiny.toml"), ARCH).unwrap();
    let text = format!(
        r#"
output = "run"

[data.synthetic]
classes = 4
height = 8
width = 8
train = 256
test = 128
noise = 0.5

[model]
arch = "tiny.toml"
scheme = "{scheme}"

[train]
epochs = 2
batch_size = 32
base_lr = 0.2

[regime]
{regime}
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&flexbits(&[])), 1);
    assert_eq!(code(&flexbits(&["frobnicate"])), 1);
    assert_eq!(code(&flexbits(&["convert", "--model", "x.flxb"])), 1);
    assert_eq!(code(&flexbits(&["--help"])), 0);
}

#[test]
fn budget_prints_one_row_per_bit() {
    let o = flexbits(&["budget", "--manifest", "mobilenet_v1", "--bits", "8,4"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,bitops,bitops_b,size_mib");
    assert!(lines[1].starts_with("8,"));
    assert!(lines[2].starts_with("4,"));
    assert!(lines[3].starts_with("adaptive,,,"));
    assert_eq!(code(&flexbits(&["budget", "--manifest", "nope"])), 2);
    assert_eq!(
        code(&flexbits(&["budget", "--manifest", "mobilenet_v1", "--bits", "9"])),
        2
    );
}

#[test]
fn sweep_and_bad_grids() {
    let o = flexbits(&[
        "sweep", "--bits", "2,8", "--alphas", "0.1:2:4", "--inputs", "20", "--trials", "200",
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1 + 8);
    assert_eq!(code(&flexbits(&["sweep", "--alphas", "2:1:4"])), 2);
    assert_eq!(code(&flexbits(&["sweep", "--alphas", "nonsense"])), 2);
}

#[test]
fn train_eval_convert_calibrate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "modified", "kind = \"joint\"\nbits = [8, 4]\nscl = true");
    let o = flexbits(&["train", "--config", &cfg, "--quiet"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().next(), Some("k,accuracy"));

    let run = dir.path().join("run");
    let metrics = std::fs::read_to_string(run.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 2);
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["phase"], "joint-scl");
    }
    let model = run.join("model.flxb");
    let m = model.to_str().unwrap();

    let full = dir.path().join("full.bin");
    let o = flexbits(&["eval", "--model", m, "--bits", "4", "--logits", full.to_str().unwrap()]);
    assert_eq!(code(&o), 0);

    let o = flexbits(&["convert", "--model", m, "--to", "4"]);
    assert_eq!(code(&o), 0);
    let small = run.join("model-4bit.flxb");
    assert!(std::fs::metadata(&small).unwrap().len() < std::fs::metadata(&model).unwrap().len());
    let part = dir.path().join("small.bin");
    let o = flexbits(&[
        "eval",
        "--model",
        small.to_str().unwrap(),
        "--logits",
        part.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&full).unwrap(), std::fs::read(&part).unwrap());

    // 8 bits is gone from the converted file
    assert_eq!(
        code(&flexbits(&["eval", "--model", small.to_str().unwrap(), "--bits", "8"])),
        2
    );
    assert_eq!(code(&flexbits(&["convert", "--model", m, "--to", "5"])), 2);

    let out = dir.path().join("cal.flxb");
    let o = flexbits(&["calibrate", "--model", m, "--bits", "4", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("k,batches,accuracy\n4,"));
    assert!(out.is_file());

    let o = flexbits(&["profile", "--model", m]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1 + 2);
    let o = flexbits(&["profile", "--model", m, "--kind", "variance", "--samples", "16"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o).lines().count(), 1 + 2 * 2);
}

#[test]
fn original_scheme_files_refuse_conversion() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "original", "kind = \"individual\"\nbits = 4");
    assert_eq!(code(&flexbits(&["train", "--config", &cfg, "--quiet"])), 0);
    let model = dir.path().join("run/model.flxb");
    let o = flexbits(&["convert", "--model", model.to_str().unwrap(), "--to", "4"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("full-precision"));
}

#[test]
fn config_and_file_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "modified",
        "kind = \"joint\"\nbits = [8, 4]\nscl = true\ncolour = 1",
    );
    assert_eq!(code(&flexbits(&["train", "--config", &cfg])), 2);
    let cfg = config(dir.path(), "modified", "kind = \"joint\"\nbits = [9]\nscl = true");
    assert_eq!(code(&flexbits(&["train", "--config", &cfg])), 2);
    assert_eq!(code(&flexbits(&["train", "--config", "/nonexistent/run.toml"])), 2);
    assert_eq!(code(&flexbits(&["eval", "--model", "/nonexistent/m.flxb"])), 2);
    let junk = dir.path().join("junk.flxb");
    std::fs::write(&junk, b"not a model").unwrap();
    assert_eq!(code(&flexbits(&["eval", "--model", junk.to_str().unwrap()])), 2);
}

#[test]
fn divergence_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "original", "kind = \"individual\"\nbits = 4");
    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("base_lr = 0.2", "base_lr = 1e38");
    std::fs::write(&cfg, text).unwrap();
    assert_eq!(code(&flexbits(&["train", "--config", &cfg, "--quiet"])), 3);
}
