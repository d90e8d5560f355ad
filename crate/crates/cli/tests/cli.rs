//! Golden-output tests for the `potinf` binary. Set `POTINF_BLESS=1` to
//! rewrite the expected files.

use std::path::{Path, PathBuf};
use std::process::Command;

struct Case {
    name: &'static str,
    args: &'static [&'static str],
    code: i32,
}

const CASES: &[Case] = &[
    Case {
        name: "eval_pointwise_bounded",
        args: &["eval", "--demo", "nat", "--ll", "pointwise", "--formula", "forall x1 (x1 <= x0)", "--context", "1", "--assign", "0"],
        code: 0,
    },
    Case {
        name: "eval_pointwise_unbounded",
        args: &["eval", "--demo", "nat", "--ll", "pointwise", "--formula", "forall x1 (x1 <= x0)", "--context", "2", "--assign", "0"],
        code: 0,
    },
    Case {
        name: "eval_bottom_sentence",
        args: &["eval", "--demo", "nat", "--formula", "false", "--context", ""],
        code: 0,
    },
    Case {
        name: "eval_perfect_explain",
        args: &["eval", "--demo", "perfect", "--formula", "exists x1 R(x0,x1)", "--context", "8", "--assign", "7", "--explain", "--audit", "3"],
        code: 0,
    },
    Case {
        name: "eval_given_chain",
        args: &["eval", "--demo", "zfc", "--mode", "negative-only", "-T", "axioms5", "--strategy", "given:i0,i1,i2", "--formula", "exists x0 (x0 = x0)", "--explain"],
        code: 0,
    },
    Case {
        name: "eval_unknown_budget",
        args: &["eval", "--demo", "nat", "--formula", "exists x1 (x1 <= x0 -> false)", "--context", "1", "--assign", "0", "--budget", "1"],
        code: 3,
    },
    Case {
        name: "eval_parse_error",
        args: &["eval", "--demo", "nat", "--formula", "forall x1 ("],
        code: 1,
    },
    Case {
        name: "eval_assignment_arity",
        args: &["eval", "--demo", "nat", "--formula", "x0 <= x0", "--context", "3"],
        code: 2,
    },
    Case {
        name: "eval_outside_stage",
        args: &["eval", "--demo", "nat", "--ll", "pointwise", "--formula", "x0 <= x0", "--context", "3", "--assign", "5"],
        code: 2,
    },
    Case {
        name: "horizon_perfect",
        args: &["horizon", "--demo", "perfect", "-T", "exists x1 R(x0,x1)", "--context", "8", "--budget", "64"],
        code: 0,
    },
    Case {
        name: "horizon_empty_theory",
        args: &["horizon", "--demo", "nat", "-T", "", "--context", "5"],
        code: 0,
    },
    Case {
        name: "horizon_zfc_chain",
        args: &["horizon", "--demo", "zfc", "--mode", "negative-only", "-T", "axioms5", "--context", "i0,i1"],
        code: 0,
    },
    Case {
        name: "horizon_unknown_budget",
        args: &["horizon", "--demo", "nat", "-T", "exists x1 (x1 <= x0 -> false)", "--context", "1", "--budget", "1"],
        code: 3,
    },
    Case {
        name: "horizon_table",
        args: &["horizon", "--structure", "{fixtures}/diamond.txt", "--context", "left"],
        code: 0,
    },
    Case {
        name: "horizon_no_successor",
        args: &["horizon", "--structure", "{fixtures}/diamond.txt", "--context", "right, right"],
        code: 0,
    },
    Case {
        name: "submodel_perfect_seed",
        args: &["submodel", "--demo", "perfect", "-T", "exists x1 R(x0,x1)", "--seed", "8", "--out", "{out}"],
        code: 0,
    },
    Case {
        name: "submodel_bottom",
        args: &["submodel", "--demo", "perfect", "-T", "false", "--seed", "8"],
        code: 0,
    },
    Case {
        name: "submodel_zfc",
        args: &["submodel", "--demo", "zfc", "-T", "axioms5"],
        code: 0,
    },
    Case {
        name: "verify_random",
        args: &["verify", "--random-systems", "30", "--max-stages", "4", "--max-depth", "3", "--seed", "11"],
        code: 0,
    },
    Case {
        name: "verify_zfc",
        args: &["verify", "--demo", "zfc"],
        code: 0,
    },
    Case {
        name: "verify_one_stage",
        args: &["verify", "--structure", "{fixtures}/one_stage.txt", "-T", "forall x1 exists x2 E(x1,x2); exists x1 (E(x0,x1) & (E(x1,x0) -> false))"],
        code: 0,
    },
    Case {
        name: "verify_infinite",
        args: &["verify", "--demo", "perfect", "-T", "exists x1 R(x0,x1)"],
        code: 2,
    },
    Case {
        name: "load_error",
        args: &["eval", "--structure", "{fixtures}/broken.txt", "--formula", "false"],
        code: 1,
    },
    Case {
        name: "table_missing",
        args: &["horizon", "--demo", "nat", "--ll", "table"],
        code: 2,
    },
];

fn here() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

fn out_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("potinf-{}-{name}.txt", std::process::id()))
}

/// Runs a case and returns stdout, stderr and the exit code, with temporary
/// and fixture paths replaced by placeholders.
fn run(case: &Case) -> (String, String, i32) {
    let fixtures = here().join("fixtures");
    let out = out_path(case.name);
    let args: Vec<String> = case
        .args
        .iter()
        .map(|a| {
            a.replace("{fixtures}", fixtures.to_str().unwrap())
                .replace("{out}", out.to_str().unwrap())
        })
        .collect();
    let output = Command::new(env!("CARGO_BIN_EXE_potinf"))
        .args(&args)
        .output()
        .expect("binary runs");
    let _ = std::fs::remove_file(&out);
    let scrub = |s: &[u8]| {
        String::from_utf8_lossy(s)
            .replace(out.to_str().unwrap(), "{out}")
            .replace(fixtures.to_str().unwrap(), "{fixtures}")
    };
    (scrub(&output.stdout), scrub(&output.stderr), output.status.code().unwrap_or(-1))
}

fn golden(name: &str) -> PathBuf {
    here().join("golden").join(format!("{name}.txt"))
}

#[test]
fn golden_outputs() {
    let bless = std::env::var_os("POTINF_BLESS").is_some();
    let mut failures = Vec::new();
    for case in CASES {
        let (stdout, stderr, code) = run(case);
        let text = format!("exit {code}\n--- stdout\n{stdout}--- stderr\n{stderr}");
        let path = golden(case.name);
        if bless {
            std::fs::write(&path, &text).unwrap();
        }
        if code != case.code {
            failures.push(format!("{}: exit {code}, expected {}\n{text}", case.name, case.code));
            continue;
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_default();
        if expected != text {
            failures.push(format!("{}: output differs\nexpected:\n{expected}\nactual:\n{text}", case.name));
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n\n"));
}

#[test]
fn exported_restriction_reloads() {
    let case = CASES.iter().find(|c| c.name == "submodel_perfect_seed").unwrap();
    let path = out_path("reload");
    let args: Vec<String> = case.args.iter().map(|a| a.replace("{out}", path.to_str().unwrap())).collect();
    let status = Command::new(env!("CARGO_BIN_EXE_potinf")).args(&args).status().unwrap();
    assert!(status.success());
    let horizon = Command::new(env!("CARGO_BIN_EXE_potinf"))
        .args(["horizon", "--structure", path.to_str().unwrap(), "--context", "8"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&horizon.stdout), "(8) << 22\n");
    let eval = Command::new(env!("CARGO_BIN_EXE_potinf"))
        .args(["eval", "--structure", path.to_str().unwrap(), "--formula", "exists x1 R(x0,x1)", "--context", "8", "--assign", "6"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8_lossy(&eval.stdout), "True\n");
    let _ = std::fs::remove_file(Path::new(&path));
}

#[test]
fn budget_must_be_positive() {
    let status = Command::new(env!("CARGO_BIN_EXE_potinf"))
        .args(["eval", "--demo", "nat", "--formula", "false", "--budget", "0"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}
