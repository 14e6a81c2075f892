//! Compiles a C program against the generated header and links it to the
//! static library.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "patdens.h"

int main(void) {
    PdWord *p = NULL, *h = NULL;
    char buf[32];
    size_t needed = 0;
    if (pd_word_new("10", &p) != PD_STATUS_OK) return 1;
    if (pd_word_new("0100101", &h) != PD_STATUS_OK) return 2;
    if (pd_count(p, h, buf, sizeof buf, &needed) != PD_STATUS_OK) return 3;
    if (strcmp(buf, "4") != 0) return 4;
    PdWord *bad = NULL;
    if (pd_word_new("x", &bad) != PD_STATUS_INVALID_ARGUMENT) return 5;
    if (strlen(pd_last_error()) == 0) return 6;
    printf("%s %s\n", pd_version(), buf);
    pd_word_free(p);
    pd_word_free(h);
    return 0;
}
"#;

#[test]
fn header_compiles_and_links() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libpatdens_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    let work = std::env::temp_dir().join(format!("patdens-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&work).unwrap();
    let src = work.join("main.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = work.join("main");
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("{} 4\n", env!("CARGO_PKG_VERSION")));
}
