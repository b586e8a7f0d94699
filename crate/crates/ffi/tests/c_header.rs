// SPDX-License-Identifier: Apache-2.0

//! Compiles a C program against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

use scopy::ingest::{CommitSource, FixtureSource};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

/// `target/<profile>`, the parent of the `deps` directory holding this test.
fn profile_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().and_then(Path::parent).unwrap().to_path_buf()
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(manifest().join("include/scopy.h")).unwrap();
    assert!(header.starts_with("/* SPDX-License-Identifier: Apache-2.0 */"));
    for name in [
        "scopy_version",
        "scopy_last_error",
        "scopy_string_free",
        "scopy_store_open",
        "scopy_store_free",
        "scopy_store_len",
        "scopy_store_ingest",
        "scopy_store_candidates",
        "scopy_store_record",
        "scopy_store_vote",
        "scopy_store_consensus",
        "scopy_store_stats",
        "scopy_commit_graph",
        "scopy_match_keywords",
        "scopy_tag_pattern",
        "scopy_model_load",
        "scopy_model_free",
        "scopy_model_score",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct ScopyStore ScopyStore;"));
    assert!(header.contains("SCOPY_STATUS_CONFLICT = 5"));
}

#[test]
fn c_program_round_trip() {
    let lib = profile_dir().join("libscopy_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let work = tempfile::tempdir().unwrap();
    let exe = work.path().join("smoke");
    let compiler = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let out = Command::new(&compiler)
        .args(["-std=c11", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(manifest().join("include"))
        .arg(manifest().join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .unwrap_or_else(|e| panic!("running {compiler}: {e}"));
    assert!(out.status.success(), "compile failed:\n{}", String::from_utf8_lossy(&out.stderr));

    let fixtures = manifest().join("../core/tests/fixtures/commits");
    let b = FixtureSource::new(fixtures)
        .fetch_commit("cvandeplas", "pystemon", "dbeb87afefdb63de2f4cff69b6f10c5965d14b54")
        .unwrap();
    let bundle = work.path().join("bundle.json");
    std::fs::write(&bundle, serde_json::to_string(&b).unwrap()).unwrap();

    let run = Command::new(&exe).arg(work.path().join("store")).arg(&bundle).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "stdout:\n{stdout}\nstderr:\n{}", String::from_utf8_lossy(&run.stderr));
    assert!(stdout.contains("consensus {\"status\":\"decided\",\"consensus\":\"security\"}"), "{stdout}");
    assert!(stdout.contains("error store is NULL"), "{stdout}");
    assert!(stdout.contains("records 1"), "{stdout}");
}
