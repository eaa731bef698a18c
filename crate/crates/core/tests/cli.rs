mod common;

use std::path::Path;
use std::process::{Command, Output};

use pbrnn::config::Mode;
use pbrnn::reference_tables::published_tables;

fn pbrnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbrnn"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_site(mode: Mode) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    common::write_small_site(dir.path(), 3).unwrap();
    std::fs::write(dir.path().join("run.cfg"), common::small_config_text(mode)).unwrap();
    dir
}

#[test]
fn verify_tables_passes_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = pbrnn(dir.path(), &["verify-tables"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.contains(": PASS")).count(), 7, "{out}");
    assert!(out.contains("pb-rnn: PASS"));
}

#[test]
fn assess_matrix_bypass_prints_the_published_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pbrnn.csv");
    std::fs::write(&csv, published_tables()[0].matrix().to_csv()).unwrap();
    let o = pbrnn(dir.path(), &["assess", "--matrix", "pbrnn.csv", "--out", "assessed"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("Overall Accuracy (OA): 97.21%"), "{out}");
    assert!(out.contains("Overall Kappa (KAPPA): 0.967"), "{out}");
    for v in ["97.47", "94.25", "100.00", "0.98", "94.12"] {
        assert!(out.contains(v), "{v} missing from\n{out}");
    }
    for f in ["error_matrix.csv", "report.txt", "stats.csv"] {
        assert!(dir.path().join("assessed").join(f).exists(), "{f}");
    }
}

#[test]
fn synth_default_spec_writes_the_full_series_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = pbrnn(dir.path(), &["synth", "--out", out, "--seed", "4"]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = dir.path().join("a");
    let scenes = std::fs::read_dir(&a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().starts_with("scene_"))
        .count();
    assert_eq!(scenes, 23);
    let manifest = std::fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert_eq!(manifest.lines().count(), 23);
    assert!(common::tree(&a) == common::tree(&dir.path().join("b")));
}

#[test]
fn synth_rejects_an_invalid_field_by_name() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.txt"), "width = 16\ncloud_fraction = 1.5\n").unwrap();
    let o = pbrnn(dir.path(), &["synth", "--spec", "spec.txt", "--out", "site"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("cloud_fraction"), "{}", stderr(&o));
    std::fs::write(dir.path().join("spec.txt"), "widht = 16\n").unwrap();
    let o = pbrnn(dir.path(), &["synth", "--spec", "spec.txt", "--out", "site"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("widht"), "{}", stderr(&o));
}

#[test]
fn train_classify_assess_round_trip() {
    let site = small_site(Mode::PbRnn);
    let d = site.path();
    let o = pbrnn(d, &["train", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("holdout accuracy"));
    let log = std::fs::read_to_string(d.join("out/pb-rnn.loss.tsv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3, "{log}");

    let o = pbrnn(
        d,
        &[
            "classify",
            "--checkpoint",
            "out/pb-rnn.ckpt",
            "--manifest",
            "site/manifest.txt",
            "--out",
            "map.raw",
            "--preview",
            "map.ppm",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let ppm = std::fs::read(d.join("map.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n24 20\n255\n"));
    assert_eq!(ppm.len(), b"P6\n24 20\n255\n".len() + 24 * 20 * 3);

    let o = pbrnn(
        d,
        &[
            "assess",
            "--classified",
            "map.raw",
            "--reference",
            "site/truth.raw",
            "--min-per-stratum",
            "10",
            "--out",
            "assessed",
        ],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Overall Accuracy (OA)"));

    let o = pbrnn(
        d,
        &["assess", "--classified", "map.raw", "--reference", "map.raw", "--min-per-stratum", "10", "--out", "self"],
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("Overall Accuracy (OA): 100.00%"));
    assert!(stdout(&o).contains("Overall Kappa (KAPPA): 1.000"));
}

#[test]
fn make_samples_feeds_train() {
    let site = small_site(Mode::PatchNnMulti);
    let d = site.path();
    let o = pbrnn(d, &["make-samples", "--config", "run.cfg", "--out", "train.pbs", "--holdout-out", "hold.pbs"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("of 4x36"), "{}", stdout(&o));
    let o = pbrnn(d, &["train", "--config", "run.cfg", "--samples", "train.pbs"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    // a cache cut for another mode is refused
    let o = pbrnn(d, &["train", "--config", "run.cfg", "--mode", "pb-rnn", "--samples", "train.pbs"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sample cache"), "{}", stderr(&o));
}

#[test]
fn import_writes_reflectance_caches() {
    let site = small_site(Mode::PbRnn);
    let o = pbrnn(site.path(), &["import", "--manifest", "site/manifest.txt"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 6);
    let toa = std::fs::read(site.path().join("site/scene_00/toa.raw")).unwrap();
    assert_eq!(toa.len(), 24 * 20 * 4 * 8);
}

#[test]
fn missing_label_map_is_a_config_error() {
    let site = small_site(Mode::PbRnn);
    let d = site.path();
    std::fs::write(d.join("bad.cfg"), common::small_config_text(Mode::PbRnn).replace("site/truth.raw", "nowhere.raw"))
        .unwrap();
    let o = pbrnn(d, &["train", "--config", "bad.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("labels"), "{}", stderr(&o));
}

#[test]
fn corrupt_checkpoint_and_mismatched_series_are_reported() {
    let site = small_site(Mode::PixelNnSingle);
    let d = site.path();
    assert_eq!(pbrnn(d, &["train", "--config", "run.cfg"]).status.code(), Some(0));
    let ckpt = d.join("out/pixel-nn-single.ckpt");
    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes[0] = b'Q';
    std::fs::write(d.join("bad.ckpt"), &bytes).unwrap();
    let o = pbrnn(d, &["classify", "--checkpoint", "bad.ckpt", "--manifest", "site/manifest.txt", "--out", "m.raw"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("magic"), "{}", stderr(&o));

    // a series with a different band count
    let other = tempfile::tempdir().unwrap();
    let mut spec = common::small_spec(3);
    spec.bands = 2;
    spec.profiles = pbrnn::synthetic::designed_profiles(4, 6, 2, 0.04);
    let site2 = pbrnn::synthetic::generate_site(&spec).unwrap();
    pbrnn::synthetic::write_site(other.path(), &site2, &pbrnn::raster::ClassScheme::generic(4)).unwrap();
    let manifest = other.path().join("manifest.txt");
    let o = pbrnn(
        d,
        &["classify", "--checkpoint", "out/pixel-nn-single.ckpt", "--manifest", manifest.to_str().unwrap(), "--out", "m.raw"],
    );
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("4 bands") && err.contains("has 2"), "{err}");
}

#[test]
fn compare_all_emits_a_summary_table() {
    let site = small_site(Mode::PbRnn);
    let o = pbrnn(site.path(), &["compare-all", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let header = out.lines().next().unwrap();
    for m in Mode::ALL {
        assert!(header.contains(m.name()), "{header}");
        assert!(site.path().join("out").join(m.name()).join("error_matrix.csv").exists());
    }
    for row in ["Mean-Kappa", "SD", "OA (%)", "Overall kappa"] {
        assert!(out.lines().any(|l| l.starts_with(row)), "{row} missing from\n{out}");
    }
    // four class rows, each with six kappas plus mean and deviation
    let class_rows: Vec<&str> = out.lines().skip(1).take(4).collect();
    assert!(class_rows.iter().all(|l| l.split_whitespace().count() >= 8), "{out}");
    assert_eq!(std::fs::read_to_string(site.path().join("out/summary.txt")).unwrap(), out);
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(pbrnn(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(pbrnn(dir.path(), &["assess", "--out", "x"]).status.code(), Some(1));
    assert_eq!(pbrnn(dir.path(), &["--help"]).status.code(), Some(0));
}
