//! Compiles and runs a C program against the generated header and the
//! static library. Skipped when no C compiler is on the PATH.

use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "pspin.h"

int main(void) {
    double a[2] = {0.0, 1.0};
    PspinModel *model = NULL;
    if (pspin_model_new(a, 2, 1.0, pspin_confinement_default(), 1, &model) != PSPIN_STATUS_OK) return 1;

    PspinSolverParams p = pspin_solver_params_default();
    p.h = 0.01;
    p.t_max = 1.0;
    PspinSolution *sol = NULL;
    if (pspin_solve(model, &p, &sol) != PSPIN_STATUS_OK) return 2;
    size_t n = pspin_solution_len(sol);
    double r = 0.0;
    if (pspin_solution_get(sol, PSPIN_FIELD_R, n - 1, n - 1, &r) != PSPIN_STATUS_OK || r != 1.0) return 3;

    if (fabs(pspin_bessel_h(1.0) - 1.590636854637329) > 1e-14) return 4;
    uint64_t c = 0;
    if (pspin_catalan(6, &c) != PSPIN_STATUS_OK || c != 132) return 5;

    char msg[128];
    if (pspin_catalan(64, &c) != PSPIN_STATUS_OUT_OF_RANGE) return 6;
    if (pspin_last_error(msg, sizeof msg) == 0 || strlen(msg) == 0) return 7;

    pspin_solution_free(sol);
    pspin_model_free(model);
    printf("ok %zu\n", n);
    return 0;
}
"#;

#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps; the static library sits one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libpspin_ffi.a");
    assert!(lib.is_file(), "static library not found at {}", lib.display());

    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("main.c");
    let bin = tmp.path().join("main");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok 101");
}
