use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mrlr::io::{read_model, read_tensor, write_tensor, CSV_HEADER};
use mrlr::DenseTensor;
use tempfile::TempDir;

fn mrlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrlr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mrlr(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_function_tensor_header() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "f.mrlr");
    ok(&["generate", "--function", "paper-f3", "--out", s(&out)]);
    let bytes = std::fs::read(&out).unwrap();
    assert!(bytes.starts_with(b"MRLR1 3 100 100 100\n"));
    assert_eq!(bytes.len(), "MRLR1 3 100 100 100\n".len() + 8 * 1_000_000);
    let x = read_tensor(&out).unwrap();
    // x = (-5, -5, -5) at the origin corner
    let want = (25.0 + 25.0) / (10.0f64).exp();
    assert!((x.data()[0] - want).abs() <= 1e-15 * want);
}

#[test]
fn decompose_exact_instance_and_info() {
    let dir = TempDir::new().unwrap();
    let x = path(&dir, "x.mrlr");
    let model = path(&dir, "m.mrlrm");
    let report = path(&dir, "r.csv");
    ok(&["generate", "--random-cp", "5x201x61/1/3", "--partition", "2|1,3", "--out", s(&x)]);
    ok(&[
        "decompose", "--in", s(&x), "--partitions", "2|1,3", "--ranks", "1",
        "--model-out", s(&model), "--report-out", s(&report),
    ]);
    let csv = std::fs::read_to_string(&report).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "mrlr");
    assert_eq!(row[2], "506");
    assert!(row[3].parse::<f64>().unwrap() <= 1e-8);

    let m = read_model(&model).unwrap();
    assert_eq!(m.model.shape(), &[5, 201, 61]);
    let info = ok(&["info", "--in", s(&model)]);
    assert!(info.contains("kind: model"));
    assert!(info.contains("partition 2|1,3 reshaped 201x305 rank 1 params 506"));
}

#[test]
fn info_reports_video_stage_counts() {
    let dir = TempDir::new().unwrap();
    let x = path(&dir, "v.mrlr");
    let model = path(&dir, "v.mrlrm");
    let report = path(&dir, "v.csv");
    ok(&["generate", "--random-cp", "9x36x54x3/2/8", "--out", s(&x)]);
    ok(&[
        "decompose", "--in", s(&x), "--partitions", "1,2|3,4;1|2|3,4;1|2|3|4",
        "--ranks", "1,1,4", "--max-sweeps", "20",
        "--model-out", s(&model), "--report-out", s(&report),
    ]);
    let info = ok(&["info", "--in", s(&model)]);
    assert!(info.contains("shape: 9x36x54x3"), "{info}");
    assert!(info.contains("stage 1: partition 1,2|3,4 reshaped 324x162 rank 1 params 486 cumulative_params 486"));
    assert!(info.contains("stage 2: partition 1|2|3,4 reshaped 9x36x162 rank 1 params 207 cumulative_params 693"));
    assert!(info.contains("stage 3: partition 1|2|3|4 reshaped 9x36x54x3 rank 4 params 408 cumulative_params 1101"));
    assert!(info.contains("params: 1101\nstored_scalars: 1101"));

    let tensor_info = ok(&["info", "--in", s(&x)]);
    assert!(tensor_info.starts_with("kind: tensor\nshape: 9x36x54x3\n"));
}

#[test]
fn sweep_is_reproducible_byte_for_byte() {
    let dir = TempDir::new().unwrap();
    let x = path(&dir, "g.mrlr");
    ok(&["generate", "--function", "paper-f3", "--grid=-5,1,10", "--out", s(&x)]);
    let run = |name: &str| {
        let out = path(&dir, name);
        ok(&[
            "sweep", "--in", s(&x), "--plan", "2,3|1;1|2|3", "--sweep", "1:4",
            "--baseline", "--restarts", "2", "--seed", "5", "--out", s(&out),
        ]);
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    let text = String::from_utf8(a).unwrap();
    assert!(text.lines().any(|l| l.starts_with("parafac,")));
    assert!(text.lines().any(|l| l.starts_with("mrlr,1+")));

    let threaded = path(&dir, "c.csv");
    ok(&[
        "--threads", "1", "sweep", "--in", s(&x), "--plan", "2,3|1;1|2|3", "--sweep", "1:4",
        "--baseline", "--restarts", "2", "--seed", "5", "--out", s(&threaded),
    ]);
    assert_eq!(std::fs::read(threaded).unwrap(), text.as_bytes());
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let x = path(&dir, "x.mrlr");
    ok(&["generate", "--random-cp", "3x4x5/1/1", "--out", s(&x)]);
    let outs = [s(&path(&dir, "m")).to_string(), s(&path(&dir, "r")).to_string()];
    let decompose = |extra: &[&str], input: &Path| {
        let mut args = vec!["decompose", "--in", s(input), "--model-out", &outs[0], "--report-out", &outs[1]];
        args.extend_from_slice(extra);
        mrlr(&args).status.code()
    };

    // parse and format errors
    assert_eq!(mrlr(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(decompose(&["--ranks", "x"], &x), Some(1));
    let garbage = path(&dir, "bad.mrlr");
    std::fs::write(&garbage, b"NOTATENSOR").unwrap();
    assert_eq!(decompose(&["--ranks", "1"], &garbage), Some(1));
    assert_eq!(decompose(&["--ranks", "1"], &path(&dir, "missing")), Some(1));

    // validation errors
    assert_eq!(decompose(&["--ranks", "0,1"], &x), Some(2));
    assert_eq!(decompose(&["--ranks", "1", "--partitions", "1|2"], &x), Some(2));
    assert_eq!(decompose(&["--ranks", "1,1,1"], &x), Some(2));

    // numerical errors
    let zero = path(&dir, "zero.mrlr");
    write_tensor(&zero, &DenseTensor::zeros(vec![3, 4, 5]).unwrap()).unwrap();
    assert_eq!(decompose(&["--ranks", "1,1"], &zero), Some(3));
    let nan = path(&dir, "nan.mrlr");
    let mut t = DenseTensor::zeros(vec![3, 4, 5]).unwrap();
    t.data_mut()[7] = f64::NAN;
    write_tensor(&nan, &t).unwrap();
    assert_eq!(decompose(&["--ranks", "1,1"], &nan), Some(3));

    assert_eq!(mrlr(&["--help"]).status.code(), Some(0));
}

#[test]
fn stderr_names_the_problem() {
    let dir = TempDir::new().unwrap();
    let bad = path(&dir, "t.mrlr");
    std::fs::write(&bad, b"MRLR1 2 3 3\n\0\0\0\0").unwrap();
    let out = mrlr(&["info", "--in", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error:"), "{err}");
    assert!(err.contains("12"), "{err}");
}
