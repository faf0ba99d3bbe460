use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polytope(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polytope"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 2 → 2 (relu, identity weights) → 3 (relu) → 2 (identity), zero biases.
const TOY: &str = r#"{"layers": [
  {"weights": [[1.0, 0.0], [0.0, 1.0]], "bias": [0.0, 0.0], "activation": "relu"},
  {"weights": [[1.0, 1.0], [1.0, -1.0], [-1.0, 0.0]], "bias": [0.0, 0.0, 0.0], "activation": "relu"},
  {"weights": [[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]], "bias": [0.0, 0.0], "activation": "identity"}
]}"#;

fn toy(dir: &Path) -> String {
    let path = dir.join("toy.json");
    fs::write(&path, TOY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn code_prints_header_and_hex() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy(dir.path());
    // Layer 0 pre-activations (0.1, 0.2): bits 11. Layer 1: (0.3, -0.1, -0.1): 100.
    let o = polytope(&["code", "--net", &net, "--input", "0.1,0.2", "--span", "0", "2"]);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o).trim(), "L=0 K=2 M=5 offsets=0,2 bits=e0");
    // A point exactly on a boundary is inactive there.
    let o = polytope(&["code", "--net", &net, "--input", "-1,0", "--span", "0", "0"]);
    assert_eq!(stdout(&o).trim(), "L=0 K=0 M=2 offsets=0 bits=00");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy(dir.path());

    let o = polytope(&["code", "--net", &net, "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));

    let o = polytope(&["code", "--net", &net, "--input", "0.1", "--span", "0", "2"]);
    assert_eq!(o.status.code(), Some(2), "dimension mismatch is a validation error");

    let o = polytope(&["code", "--net", &net, "--input", "0.1,0.2", "--span", "1", "5"]);
    assert_eq!(o.status.code(), Some(2), "span past the last layer");

    let missing = dir.path().join("missing.json");
    let o = polytope(&["code", "--net", p(&missing), "--input", "0,0", "--span", "0", "0"]);
    assert_eq!(o.status.code(), Some(1), "unreadable file is a runtime error");

    let o = polytope(&["oracle", "enumerate", "--net", &net, "--res", "2", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2), "resolution below the minimum");

    let o = polytope(&["--threads", "0", "code", "--net", &net, "--input", "0,0", "--span", "0", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn pipeline_writes_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let train = d.join("train");
    assert!(polytope(&["gen-data", "--seed", "5", "--per-class", "40", "--out", p(&data)]).status.success());
    let data_csv = data.join("data.csv");
    let o = polytope(&[
        "train", "--data", p(&data_csv), "--sizes", "2,8,8,3", "--epochs", "60", "--seed", "5", "--out", p(&train),
    ]);
    assert!(o.status.success(), "{o:?}");
    let net = train.join("net.json");
    for f in ["net.json", "net_init.json", "loss.csv", "manifest.txt"] {
        assert!(train.join(f).exists(), "{f}");
    }
    let manifest = fs::read_to_string(train.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 5"));
    assert!(manifest.contains("sha256:"));

    let den = d.join("den");
    let o = polytope(&[
        "density", "--net", p(&net), "--data", p(&data_csv), "--seed", "1", "--resamples", "200", "--out", p(&den),
    ]);
    assert!(o.status.success(), "{o:?}");
    let header = fs::read_to_string(den.join("density.csv")).unwrap();
    assert!(header.starts_with("span_start,span_k,intra_pairs,inter_pairs,"));

    let o = polytope(&["stats", "welch", "--a", p(&den.join("pairs.csv")), "--a-col", "density", "--b",
        p(&den.join("pairs.csv")), "--b-col", "i"]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("t="));

    let cl = d.join("cl");
    let o = polytope(&["cluster", "--net", p(&net), "--data", p(&data_csv), "--metric", "hamming", "--out", p(&cl)]);
    assert!(o.status.success(), "{o:?}");
    let nm = d.join("nm");
    let o = polytope(&[
        "nmf", "--net", p(&net), "--data", p(&data_csv), "--k", "3", "--iters", "50", "--seed", "2", "--labels",
        p(&cl.join("labels.csv")), "--out", p(&nm),
    ]);
    assert!(o.status.success(), "{o:?}");
    for f in ["w.csv", "h.csv", "history.csv", "cosine_hist.csv", "manifest.txt"] {
        assert!(nm.join(f).exists(), "{f}");
    }

    let o = polytope(&["cluster", "--net", p(&net), "--data", p(&data_csv), "--metric", "cosine", "--out", p(&cl)]);
    assert_eq!(o.status.code(), Some(2), "unknown metric");
}

#[test]
fn oracle_verify_and_adjacency() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy(dir.path());
    let out = dir.path().join("o");
    let o = polytope(&["oracle", "verify", "--net", &net, "--span", "0", "2", "--bounds=-1:1", "--res", "64", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("violations=0"));
    let o = polytope(&["oracle", "enumerate", "--net", &net, "--span", "0", "2", "--res", "64", "--out", p(&out)]);
    assert!(stdout(&o).starts_with("regions="));
    let census = fs::read_to_string(out.join("census.csv")).unwrap();
    assert!(census.starts_with("code_hex,x0,x1,count\n"));
    let o = polytope(&["oracle", "adjacency", "--net", &net, "--span", "0", "2", "--res", "64", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert!(fs::read_to_string(out.join("edges.csv")).unwrap().starts_with("code_a,code_b,hamming\n"));
}

#[test]
fn slice_emits_a_pgm_at_512() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy(dir.path());
    let anchors = dir.path().join("anchors.csv");
    fs::write(&anchors, "x0,x1\n0.5,0.1\n-0.3,0.4\n0.1,-0.6\n").unwrap();
    let out = dir.path().join("slice");
    let o = polytope(&["slice", "--net", &net, "--anchors", p(&anchors), "--span", "0", "2", "--res", "512", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    let bytes = fs::read(out.join("slice.pgm")).unwrap();
    let header = b"P5\n512 512\n255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 512 * 512);
    assert!(bytes[header.len()..].iter().any(|&b| b > 0), "boundaries are visible");
    let sidecar = fs::read_to_string(out.join("slice.txt")).unwrap();
    assert!(sidecar.contains("resolution = 512x512"));
    assert!(stdout(&o).contains("triangle_mean="));
}

#[test]
fn sweep_and_interpolate() {
    let dir = tempfile::tempdir().unwrap();
    let net = toy(dir.path());
    let out = dir.path().join("sw");
    let o = polytope(&["sweep", "--net", &net, "--layer", "1", "--input", "0.3,-0.2", "--alphas", "0:2:5",
        "--samples", "16", "--seed", "4", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(csv.starts_with("alpha,local_density,predicted_class,logit0,logit1\n"));
    assert_eq!(csv.lines().count(), 6);

    let out = dir.path().join("ip");
    let o = polytope(&["interpolate", "--net", &net, "--span", "0", "2", "--from=-1,-1", "--to", "1,1",
        "--samples", "9", "--out", p(&out)]);
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).starts_with("total_hamming="));
    let o = polytope(&["interpolate", "--net", &net, "--from=-1,-1", "--to", "1,1", "--local-samples", "8",
        "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(2), "local density needs a seed");
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn repro_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = polytope(&["--threads", "1", "repro", "--seed", "7", "--out", p(&a)]);
    let ob = polytope(&["--threads", "8", "repro", "--seed", "7", "--out", p(&b)]);
    assert!(oa.status.success(), "{oa:?}");
    assert!(ob.status.success(), "{ob:?}");
    assert_eq!(oa.stdout, ob.stdout);
    let fa = dir_bytes(&a);
    assert!(fa.iter().any(|(n, _)| n == "summary.txt"));
    assert!(fa.iter().any(|(n, _)| n == "manifest.txt"));
    assert_eq!(fa, dir_bytes(&b));
    let summary = String::from_utf8(fa.iter().find(|(n, _)| n == "summary.txt").unwrap().1.clone()).unwrap();
    assert!(summary.lines().all(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")));
}
