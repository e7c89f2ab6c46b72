use std::process::{Command, Output};

fn fockband(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fockband"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect()
}

#[test]
fn bands_remark_has_degenerate_point_four() {
    let o = fockband(&["bands", "--preset", "remark", "--n", "8"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pi = 7;
    let hit = v["degenerate_bands"].as_array().unwrap().iter().any(|d| {
        d["p"] == pi && d["q"] == pi && (d["point"].as_f64().unwrap() - 4.0).abs() <= 1e-12
    });
    assert!(hit, "{}", v["degenerate_bands"]);
    for key in ["four", "three", "two1", "two2", "essential", "hwz_min"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}

#[test]
fn eigs_methods_agree() {
    let fy = fockband(&["eigs", "--preset", "symmetric", "--n", "8", "--method", "fy", "--format", "csv"]);
    let or = fockband(&["eigs", "--preset", "symmetric", "--n", "8", "--method", "oracle", "--format", "csv"]);
    assert!(fy.status.success() && or.status.success());
    let (a, b) = (csv_column(&stdout(&fy), 1), csv_column(&stdout(&or), 1));
    assert!(!a.is_empty());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-8, "{x} {y}");
    }
}

#[test]
fn hwz_decoupled_is_min_of_dispersions() {
    let o = fockband(&["hwz", "--preset", "decoupled", "--n", "8", "--format", "csv"]);
    assert!(o.status.success());
    let v = csv_column(&stdout(&o), 0)[0];
    // ε attains 0 at the node t = 0, so all three minima vanish
    assert_eq!(v, 0.0);
}

#[test]
fn json_artifacts_are_byte_identical() {
    let args = ["bands", "--preset", "symmetric", "--n", "6"];
    let (a, b) = (fockband(&args), fockband(&args));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("e0") || text.contains("e-") || text.contains("e1"));
}

#[test]
fn exit_codes() {
    assert_eq!(fockband(&["hwz"]).status.code(), Some(2));
    assert_eq!(fockband(&["hwz", "--preset", "nope"]).status.code(), Some(2));
    assert_eq!(fockband(&["hwz", "--preset", "remark", "--frobnicate"]).status.code(), Some(2));
    assert_eq!(
        fockband(&["hwz", "--preset", "remark", "--problem", "x.json"]).status.code(),
        Some(2)
    );
    // an interval reaching into the spectrum of the lower-right block
    let o = fockband(&["pencil", "--preset", "gap", "--n", "6", "--z-min", "0", "--z-max", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn problem_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    let doc = r#"{"nu": 1, "n": 6, "w0": -1.0, "functions": {
        "w1": {"kind": "dispersion-sum", "terms": [{"coeff": 1.0, "combo": [1]}]},
        "v1": {"kind": "constant", "value": 0.0},
        "v2": {"kind": "constant", "value": 0.0},
        "v3": {"kind": "constant", "value": 0.0},
        "v21": {"kind": "constant", "value": 0.0},
        "v22": {"kind": "constant", "value": 0.0},
        "w2": {"kind": "constant", "value": 1.0},
        "w3": {"kind": "constant", "value": 2.0}}}"#;
    std::fs::write(&path, doc).unwrap();
    let p = path.to_str().unwrap();
    let o = fockband(&["hwz", "--problem", p, "--format", "csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    // the two-particle root w1(p) - z = 0 is located to the root tolerance
    assert!(csv_column(&stdout(&o), 0)[0].abs() <= 1e-10);

    std::fs::write(&path, doc.replace("\"nu\"", "\"mu\"")).unwrap();
    assert_eq!(fockband(&["hwz", "--problem", p]).status.code(), Some(2));
}

#[test]
fn out_file_and_single_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.json");
    let o = fockband(&["verify", "--check", "2", "--out", path.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v[0]["id"], 2);
    assert_eq!(v[0]["passed"], true);
    assert_eq!(fockband(&["verify", "--check", "13"]).status.code(), Some(2));
}

#[test]
fn scan_skips_the_band() {
    let o = fockband(&["scan", "--preset", "symmetric", "--n", "8", "--p", "1", "--q", "2", "--points", "50", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("p,q,z,delta3\n"));
    let d = csv_column(&text, 3);
    let z = csv_column(&text, 2);
    assert!(d.len() < 51);
    for w in z.windows(2).zip(d.windows(2)) {
        // Δ₃ decreases on each side of the band
        if w.0[1] - w.0[0] < 1.0 {
            assert!(w.1[1] < w.1[0]);
        }
    }
}
