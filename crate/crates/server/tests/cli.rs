use std::path::Path;
use std::process::Command;

fn uuis() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uuis"))
}

fn fixture() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/demo.json")
}

#[test]
fn hash_password_output_verifies() {
    let out = uuis().args(["hash-password", "s3cret-pw"]).output().unwrap();
    assert!(out.status.success());
    let digest = String::from_utf8(out.stdout).unwrap();
    assert!(uuis_core::password::verify("s3cret-pw", digest.trim()));
    assert!(!uuis_core::password::verify("other", digest.trim()));
}

#[test]
fn seed_then_expiry_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("store.json");
    let out = uuis()
        .arg("seed")
        .arg(fixture())
        .arg("--data")
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PhysicalAsset"));

    let out = uuis()
        .args(["licenses", "expiring", "--days", "365", "--as-of", "2012-01-01", "--data"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("state\tLicenseID\tSoftware\tExpires\tDaysRemaining"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][..2], ["expiring", "2"]);
    assert_eq!(rows[1][..2], ["expiring", "3"]);
}

#[test]
fn bad_arguments_fail() {
    let out = uuis().args(["licenses", "expiring"]).output().unwrap();
    assert!(!out.status.success());
    let out = uuis().args(["serve", "--backend", "tape"]).output().unwrap();
    assert!(!out.status.success());
}
