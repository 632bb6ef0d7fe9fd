use std::path::Path;
use std::process::Command;

const PROGRAM: &str = r#"
#include "geoflow.h"
int main(void) {
    GeoflowGame *game = NULL;
    GeoflowMetric *metric = NULL;
    GeoflowSpec *spec = NULL;
    GeoflowTrajectory *traj = NULL;
    double x[3] = {0.5, 0.25, 0.25};
    size_t len = 0, n = 0;
    char msg[256];
    int32_t rc = geoflow_game_builtin("rps", &game);
    rc |= geoflow_metric_prep(3, 2.0, &metric);
    rc |= geoflow_spec_new(game, metric, GEOFLOW_FORM_PROJECTED, &spec);
    rc |= geoflow_integrate(spec, x, 3, 0.01, 1.0, &traj);
    rc |= geoflow_trajectory_shape(traj, &len, &n);
    (void)geoflow_last_error_message(msg, sizeof msg);
    geoflow_trajectory_free(traj);
    geoflow_spec_free(spec);
    geoflow_metric_free(metric);
    geoflow_game_free(game);
    return rc == GEOFLOW_OK ? 0 : 1;
}
"#;

fn syntax_check(compiler: &str, lang: &str) {
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let out = match Command::new(compiler)
        .args(["-x", lang, "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(&include)
        .arg(&src)
        .output()
    {
        Ok(out) => out,
        Err(_) => {
            eprintln!("{compiler} not found; header check skipped");
            return;
        }
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn header_declares_every_entry_point() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/geoflow.h")).unwrap();
    let source = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 20);
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    syntax_check("cc", "c");
}

#[test]
fn header_compiles_as_cpp() {
    syntax_check("c++", "c++");
}
