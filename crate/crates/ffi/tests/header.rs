//! The generated C header declares the exported API and compiles as C.

use std::path::Path;
use std::process::Command;

const SYMBOLS: [&str; 20] = [
    "pd_last_error_message",
    "pd_herm_new",
    "pd_herm_free",
    "pd_herm_dim",
    "pd_herm_entries",
    "pd_posdef_new",
    "pd_posdef_free",
    "pd_posdef_dim",
    "pd_posdef_entries",
    "pd_distance",
    "pd_geodesic_point",
    "pd_exp_a",
    "pd_log_a",
    "pd_subspace_new",
    "pd_lts_closure",
    "pd_subspace_free",
    "pd_subspace_dim",
    "pd_subspace_basis",
    "pd_subspace_is_lts",
    "pd_project",
];

fn header() -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/pdcone.h")).expect("generated header")
}

#[test]
fn header_declares_api() {
    let h = header();
    assert!(h.contains("#ifndef PDCONE_H"));
    for sym in SYMBOLS {
        assert!(h.contains(&format!("{sym}(")), "missing {sym}");
    }
    for ty in ["PdStatus", "PdProjection", "PdHerm", "PdPosDef", "PdSubspace", "PD_STATUS_OK"] {
        assert!(h.contains(ty), "missing {ty}");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let dir = tempfile_dir();
    let src = dir.join("use.c");
    std::fs::write(
        &src,
        "#include \"pdcone.h\"\nint main(void) { PdProjection info; (void)info; return PD_STATUS_OK; }\n",
    )
    .unwrap();
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = match Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(o) => o,
        Err(_) => {
            eprintln!("no C compiler available, skipping");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn tempfile_dir() -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("pdcone-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
