use std::path::Path;
use std::process::Command;

use qdet::cli::{dispatch, EXIT_DOMAIN, EXIT_IO, EXIT_OK, EXIT_USAGE};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut argv = vec!["qdet"];
    argv.extend_from_slice(args);
    let code = dispatch(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

#[test]
fn scalar_pipeline_in_process() {
    let d = tempfile::tempdir().unwrap();
    let (fc, qd) = (p(d.path(), "sp.fc"), p(d.path(), "sp.qd"));
    assert_eq!(run(&["gen", "scalar-product", "--n", "8", "--form", "sequential", "-o", &fc]).0, EXIT_OK);
    assert_eq!(run(&["build", &fc, "--param", "n=8", "-o", &qd]).0, EXIT_OK);
    assert_eq!(run(&["analyze", &qd]), (EXIT_OK, "D=4 P=8\n".into(), String::new()));
    assert_eq!(run(&["--doubling", "off", "analyze", &qd]).1, "D=8 P=8\n");
    let inputs = "a(1)=1,a(2)=2,a(3)=3,a(4)=4,a(5)=5,a(6)=6,a(7)=7,a(8)=8";
    let ones = "b(1)=1,b(2)=1,b(3)=1,b(4)=1,b(5)=1,b(6)=1,b(7)=1,b(8)=1";
    for extra in [&[][..], &["--effective"][..]] {
        let mut args = vec!["eval", &qd, "--input", inputs, "--input", ones];
        args.extend_from_slice(extra);
        assert_eq!(run(&args).1, "S = 36\n");
    }
    let args = ["eval", &fc, "--param", "n=8", "--input", inputs, "--input", ones];
    assert_eq!(run(&args).1, "S = 36\n");
}

#[test]
fn binary_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let exe = env!("CARGO_BIN_EXE_qdet");
    let sh = |args: &[&str]| Command::new(exe).args(args).current_dir(d.path()).output().unwrap();
    assert!(sh(&["gen", "scalar-product", "--n", "8", "-o", "sp.fc"]).status.success());
    assert!(sh(&["build", "sp.fc", "--param", "n=8", "-o", "sp.qd"]).status.success());
    let o = sh(&["analyze", "sp.qd"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "D=4 P=8\n");
    let o = sh(&["formula", "grid-jacobi-width", "--kj", "256"]);
    assert_eq!(String::from_utf8_lossy(&o.stdout), "1313\n");
    assert_eq!(sh(&["analyze"]).status.code(), Some(EXIT_USAGE));
}

#[test]
fn exit_codes() {
    let d = tempfile::tempdir().unwrap();
    let store = p(d.path(), "store");
    assert_eq!(run(&["--help"]).0, EXIT_OK);
    assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(run(&["--sharing", "both", "formula", "scalar", "--n", "4"]).0, EXIT_USAGE);
    assert_eq!(run(&["analyze", &p(d.path(), "missing.qd")]).0, EXIT_IO);

    let bad = p(d.path(), "bad.fc");
    std::fs::write(&bad, r#"{"Vertices":[{"Id":0,"Type":0,"Content":""},{"Id":1,"Type":1,"Content":""},
        {"Id":2,"Type":2,"Content":"x = 1"}],"Edges":[{"From":0,"To":1,"Type":2},{"From":2,"To":1,"Type":2}]}"#)
        .unwrap();
    let (code, _, err) = run(&["build", &bad]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("unreachable"), "{err}");

    let broken = p(d.path(), "broken.qd");
    std::fs::write(&broken, "y = nonsense\n").unwrap();
    assert_eq!(run(&["analyze", &broken]).0, EXIT_DOMAIN);

    for id in ["a", "b"] {
        assert_eq!(run(&["--store", &store, "catalog", "algorithm-add", id, "--name", id]).0, EXIT_OK);
    }
    for (id, n) in [("a", "2"), ("b", "3")] {
        let f = p(d.path(), &format!("{id}.qd"));
        assert_eq!(run(&["gen", "matmul", "--n", n, "--k", n, "--m", n, "-o", &f]).0, EXIT_OK);
        assert_eq!(run(&["--store", &store, "catalog", "determinant-add", id, &f]).0, EXIT_OK);
    }
    let (code, _, err) = run(&["--store", &store, "compare", "a", "b"]);
    assert_eq!(code, EXIT_DOMAIN);
    assert!(err.contains("not possible"), "{err}");
    assert_eq!(run(&["--store", &store, "catalog", "algorithm-remove", "zzz"]).0, EXIT_IO);
    assert_eq!(run(&["--store", &store, "catalog", "verify", "a-1"]).0, EXIT_OK);
}

#[test]
fn json_envelope_echoes_flags() {
    let (code, out, _) = run(&[
        "--json", "--doubling", "off", "--sharing", "tree", "--chain-count", "floor", "--param", "n=3",
        "--iterations", "7", "--input", "x=1", "formula", "scalar", "--n", "4",
    ]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["command"], "formula");
    let f = &v["flags"];
    assert_eq!((f["doubling"].as_str(), f["sharing"].as_str(), f["chain_count"].as_str()), (Some("off"), Some("tree"), Some("floor")));
    assert_eq!((f["param"]["n"].as_i64(), f["iterations"].as_u64()), (Some(3), Some(7)));
    assert_eq!(f["input"][0], "x=1");
    assert_eq!(f["json"], true);
    assert_eq!(v["result"]["d"], 3);
}
