use std::path::Path;
use std::process::{Command, Output};

use finola::io::encode_pnm;
use finola::model::synthetic_images;

fn finola(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_finola"))
        .args(args)
        .current_dir(dir)
        .env_remove("FINOLA_WORKERS")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A two-epoch checkpoint with C = 6 plus one input image.
fn trained(dir: &Path) {
    std::fs::write(
        dir.join("run.cfg"),
        "channels = 6\ndataset = synthetic:16\nepochs = 2\nwarmup_epochs = 1\nbatch_size = 8\n",
    )
    .unwrap();
    let img = synthetic_images(1, 16, 16, 5).remove(0);
    std::fs::write(dir.join("in.pgm"), encode_pnm(&img).unwrap()).unwrap();
    let o = finola(dir, &["train", "--config", "run.cfg", "--checkpoint", "ck.bin", "--metrics", "m.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l.starts_with("baseline_psnr_db,")));
    let psnr: f64 = text.lines().find_map(|l| l.strip_prefix("psnr_db,")).unwrap().parse().unwrap();
    assert!(psnr.is_finite());
}

#[test]
fn train_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    trained(d);

    let metrics = std::fs::read_to_string(d.join("m.csv")).unwrap();
    let rows: Vec<&str> = metrics.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "epoch,lr,loss,psnr");
    assert_eq!(rows.len(), 3);

    let o = finola(d, &["reconstruct", "--checkpoint", "ck.bin", "--image", "in.pgm", "--out", "rec.pgm", "--psnr"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("psnr_db,"));
    assert!(std::fs::read(d.join("rec.pgm")).unwrap().starts_with(b"P5\n16 16\n255\n"));

    let o = finola(d, &["waves", "--checkpoint", "ck.bin", "--out", "w.csv", "--residual", "r.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let spectrum = std::fs::read_to_string(d.join("w.csv")).unwrap();
    assert_eq!(spectrum.lines().next(), Some("index,re,im,modulus"));
    assert_eq!(spectrum.lines().count(), 1 + 6);
    let residual = std::fs::read_to_string(d.join("r.csv")).unwrap();
    assert!(residual.starts_with("map,region,cells,max,mean\n"));

    let o = finola(d, &["curvature", "--checkpoint", "ck.bin", "--image", "in.pgm", "--out", "c.csv", "--top", "2", "--heatmaps", "hm"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("c.csv")).unwrap().lines().count(), 1 + 6);
    assert_eq!(std::fs::read_dir(d.join("hm")).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "pgm")).count(), 2);

    let o = finola(d, &["compress", "--checkpoint", "ck.bin", "--bits", "4,8", "--out", "q.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read_to_string(d.join("q.csv")).unwrap().lines().count(), 3);

    // Workers change scheduling, not results.
    let o = finola(d, &["reconstruct", "--checkpoint", "ck.bin", "--image", "in.pgm", "--out", "rec4.pgm", "--workers", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(d.join("rec.pgm")).unwrap(), std::fs::read(d.join("rec4.pgm")).unwrap());
}

#[test]
fn dct_baseline_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = finola(dir.path(), &["baseline-dct", "--k", "1,64", "--out", "d.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows: Vec<Vec<String>> = std::fs::read_to_string(dir.path().join("d.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    let full: f64 = rows[1][1].parse().unwrap();
    assert!(full >= 99.0, "{full}");
}

#[test]
fn bench_output_shape() {
    let dir = tempfile::tempdir().unwrap();
    let o = finola(dir.path(), &["bench-parallel", "--size", "16", "--channels", "4", "--workers", "1,3", "--repeats", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("cores,"));
    assert_eq!(text.lines().filter(|l| l.starts_with("workers,")).count(), 2);
    assert!(text.lines().any(|l| l == "equal,true"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let o = finola(d, &["train", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error,usage,"));

    let o = Command::new(env!("CARGO_BIN_EXE_finola"))
        .args(["bench-parallel", "--size", "8", "--repeats", "1"])
        .env("FINOLA_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));

    std::fs::write(d.join("bad.bin"), b"not a checkpoint").unwrap();
    let o = finola(d, &["waves", "--checkpoint", "bad.bin", "--out", "w.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).starts_with("error,data,"));

    let o = finola(d, &["reconstruct", "--checkpoint", "missing.bin", "--image", "x.pgm", "--out", "y.pgm"]);
    assert_eq!(o.status.code(), Some(3));

    std::fs::write(d.join("bad.cfg"), "channels = 4\nnonsense = 1\n").unwrap();
    let o = finola(d, &["train", "--config", "bad.cfg", "--checkpoint", "ck.bin"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    // A zero tolerance cannot be met by finite differences.
    let o = finola(d, &["gradcheck", "--max-per-group", "1", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).starts_with("error,numerical,"));

    let o = finola(d, &["--help"]);
    assert_eq!(o.status.code(), Some(0));
}
