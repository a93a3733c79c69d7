use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

use image::{Rgb, RgbImage};
use paveval_core::augment::TransformRecord;
use paveval_core::dataset::{
    load_voc_dir, write_ground_truth, write_submission, write_voc_dir, Predictions,
};
use paveval_core::{Annotation, BBox, Dataset, Detection, DistressClass, ImageRecord};
use serde_json::Value;

fn paveval(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_paveval"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(n: usize, with_pixels: bool) -> Dataset {
    let records = (0..n)
        .map(|i| {
            let anns = vec![
                Annotation::new(
                    BBox::new(2.0 + i as f64, 3.0, 20.5, 17.25).unwrap(),
                    DistressClass::ALL[i % 7],
                ),
                Annotation::new(
                    BBox::new(30.0, 20.0, 44.0, 30.0).unwrap(),
                    DistressClass::Block,
                ),
            ];
            if with_pixels {
                let px =
                    RgbImage::from_fn(48, 32, |x, y| Rgb([(x * 5) as u8, (y * 7) as u8, i as u8]));
                ImageRecord::with_pixels(format!("img{i:02}"), px, anns).unwrap()
            } else {
                ImageRecord::new(format!("img{i:02}"), 48, 32, anns).unwrap()
            }
        })
        .collect();
    Dataset::new(records).unwrap()
}

fn scored(d: &Dataset) -> String {
    write_submission(&d.as_predictions())
}

#[test]
fn evaluate_perfect_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    let pred = dir.path().join("pred.json");
    let d = fixture(4, false);
    std::fs::write(&gt, write_ground_truth(&d)).unwrap();
    std::fs::write(&pred, scored(&d)).unwrap();
    let o = paveval(&["evaluate", "--gt", p(&gt), "--pred", p(&pred)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("mean_f1 1.000000"), "{}", stdout(&o));

    let o = paveval(&["--json", "evaluate", "--gt", p(&gt), "--pred", p(&pred)]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["mean_f1"], 1.0);
    assert_eq!(v["per_class"].as_array().unwrap().len(), 7);
}

#[test]
fn compare_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = fixture(3, false);
    let gt = dir.path().join("gt.json");
    std::fs::write(&gt, write_ground_truth(&d)).unwrap();
    let a = dir.path().join("a.json");
    std::fs::write(&a, scored(&d)).unwrap();
    let b = dir.path().join("b.json");
    std::fs::write(&b, "[]").unwrap();
    let o = paveval(&["compare", "--gt", p(&gt), "--pred", p(&a), "--pred", p(&b)]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(3).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows[7].starts_with("mean_f1"));
    let cols: Vec<&str> = rows[7].split_whitespace().collect();
    assert_eq!(cols, ["mean_f1", "1.000000", "0.000000", "-1.000000"]);

    let o = paveval(&[
        "--json",
        "compare",
        "--gt",
        p(&gt),
        "--pred",
        p(&a),
        "--pred",
        p(&b),
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 8);
    assert_eq!(v["rows"][7]["delta"][0], -1.0);
}

fn multiset(d: &Dataset) -> BTreeMap<String, Vec<String>> {
    d.iter()
        .map(|r| {
            let mut v: Vec<String> = r.annotations.iter().map(|a| format!("{:?}", a)).collect();
            v.sort();
            (r.image_id.clone(), v)
        })
        .collect()
}

#[test]
fn convert_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let voc = dir.path().join("voc");
    let dk = dir.path().join("dk");
    let back = dir.path().join("back");
    let d = fixture(5, true);
    write_voc_dir(&d, &voc).unwrap();
    for (from, to, i, o) in [
        ("voc", "darknet", &voc, &dk),
        ("darknet", "voc", &dk, &back),
    ] {
        let out = paveval(&[
            "convert",
            "--from",
            from,
            "--to",
            to,
            "--in",
            p(i),
            "--out",
            p(o),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let again = load_voc_dir(&back, true).unwrap();
    // darknet keeps six decimals of normalized coordinates
    for (a, b) in d.iter().zip(again.iter()) {
        assert_eq!(a.image_id, b.image_id);
        assert_eq!(a.pixels, b.pixels);
        for (x, y) in a.annotations.iter().zip(&b.annotations) {
            assert_eq!(x.label, y.label);
            for (u, v) in x.bbox.to_array().iter().zip(y.bbox.to_array()) {
                assert!((u - v).abs() <= 1e-6 * 48.0);
            }
        }
    }
    // voc -> json -> voc is exact
    let json = dir.path().join("gt.json");
    let voc2 = dir.path().join("voc2");
    assert!(paveval(&[
        "convert",
        "--from",
        "voc",
        "--to",
        "submission",
        "--in",
        p(&voc),
        "--out",
        p(&json)
    ])
    .status
    .success());
    assert!(paveval(&[
        "convert",
        "--from",
        "submission",
        "--to",
        "voc",
        "--in",
        p(&json),
        "--out",
        p(&voc2)
    ])
    .status
    .success());
    assert_eq!(multiset(&load_voc_dir(&voc2, false).unwrap()), multiset(&d));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = paveval(&["evaluate", "--gt", p(&missing), "--pred", p(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"[{"image_id":"a","category_id":42,"bbox":[0,0,1,1]}]"#,
    )
    .unwrap();
    let o = paveval(&["evaluate", "--gt", p(&bad), "--pred", p(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[0].category_id"));

    assert_eq!(paveval(&["evaluate"]).status.code(), Some(1));
    assert_eq!(paveval(&["--help"]).status.code(), Some(0));
}

#[test]
fn split_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let voc = dir.path().join("voc");
    write_voc_dir(&fixture(10, false), &voc).unwrap();
    let run = |out: &Path, seed: &str| {
        let o = paveval(&[
            "--json",
            "split",
            "--in",
            p(&voc),
            "--out",
            p(out),
            "--seed",
            seed,
        ]);
        assert!(o.status.success());
        serde_json::from_str::<Value>(&stdout(&o)).unwrap()
    };
    let v = run(&dir.path().join("s1"), "3");
    assert_eq!(v["train1"]["images"], 4);
    assert_eq!(v["train2"]["images"], 3);
    assert_eq!(v["test"]["images"], 3);
    run(&dir.path().join("s2"), "3");
    for part in ["train1", "train2", "test"] {
        let a = load_voc_dir(&dir.path().join("s1").join(part), false).unwrap();
        let b = load_voc_dir(&dir.path().join("s2").join(part), false).unwrap();
        assert_eq!(a, b);
    }
    let o = paveval(&[
        "split",
        "--in",
        p(&voc),
        "--out",
        p(dir.path()),
        "--fractions",
        "0.5,0.6,0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn augment_writes_outputs_and_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let voc = dir.path().join("voc");
    write_voc_dir(&fixture(3, true), &voc).unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"[{"kind":"HFLIP","probability":0.5},{"kind":"SAFE_CROP","probability":0.5},{"kind":"HIST_EQ"}]"#,
    )
    .unwrap();
    let run = |out: &Path| {
        let o = paveval(&[
            "augment",
            "--spec",
            p(&spec),
            "--seed",
            "9",
            "--multiplier",
            "2",
            "--in",
            p(&voc),
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run(&a);
    run(&b);
    let da = load_voc_dir(&a, true).unwrap();
    assert_eq!(da.len(), 6);
    assert_eq!(da, load_voc_dir(&b, true).unwrap());
    let prov: Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("provenance.json")).unwrap()).unwrap();
    let entries = prov["img00_aug1"].as_array().unwrap();
    assert_eq!(entries.last().unwrap()["transform"]["kind"], "HIST_EQ");
}

#[test]
fn tta_emit_then_fuse() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("images");
    std::fs::create_dir_all(&images).unwrap();
    let px = RgbImage::from_fn(60, 40, |x, y| Rgb([x as u8, y as u8, 9]));
    px.save(images.join("road.png")).unwrap();
    let bundle = dir.path().join("bundle");
    let o = paveval(&[
        "--json",
        "tta",
        "emit",
        "--in",
        p(&images),
        "--out",
        p(&bundle),
        "--seed",
        "4",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["copies"], 10);

    // a perfect detector sees the same object in every copy
    let specs: Vec<Value> =
        serde_json::from_str(&std::fs::read_to_string(bundle.join("tta_copies.json")).unwrap())
            .unwrap();
    let object = BBox::new(20.0, 12.0, 36.0, 26.0).unwrap();
    let mut preds = Predictions::new();
    for s in &specs {
        let chain: Vec<TransformRecord> = serde_json::from_value(s["chain"].clone()).unwrap();
        let mut b = object;
        for r in &chain {
            b = r.forward_box(&b).unwrap().unwrap();
        }
        assert!(bundle
            .join(format!("{}.png", s["copy_id"].as_str().unwrap()))
            .is_file());
        preds.insert(
            s["copy_id"].as_str().unwrap().to_string(),
            vec![Detection::new(b, DistressClass::Sealing, 0.8).unwrap()],
        );
    }
    std::fs::write(bundle.join("predictions.json"), write_submission(&preds)).unwrap();
    let o = paveval(&["tta", "fuse", "--bundle", p(&bundle)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fused = paveval_core::dataset::parse_submission(&stdout(&o)).unwrap();
    assert_eq!(fused["road"].len(), 1);
    for (u, v) in fused["road"][0]
        .bbox
        .to_array()
        .iter()
        .zip(object.to_array())
    {
        assert!((u - v).abs() < 1e-9);
    }
}

#[test]
fn autolabel_and_qa() {
    let dir = tempfile::tempdir().unwrap();
    let d = fixture(3, false);
    let pred = dir.path().join("pred.json");
    std::fs::write(&pred, scored(&d)).unwrap();
    let draft = dir.path().join("draft.json");
    let o = paveval(&[
        "autolabel",
        "draft",
        "--pred",
        p(&pred),
        "--conf",
        "0.5",
        "--out",
        p(&draft),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let mut corrected = d.clone().into_records();
    corrected[0].annotations[0].label = DistressClass::Manhole;
    corrected[1].annotations.pop();
    let corr = dir.path().join("corr.json");
    std::fs::write(&corr, write_ground_truth(&Dataset::new(corrected).unwrap())).unwrap();
    let o = paveval(&[
        "--json",
        "autolabel",
        "diff",
        "--draft",
        p(&draft),
        "--corrected",
        p(&corr),
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        (
            v["kept"].as_u64(),
            v["relabeled"].as_u64(),
            v["deleted"].as_u64()
        ),
        (Some(4), Some(1), Some(1))
    );

    let o = paveval(&[
        "--json",
        "qa",
        "confusion",
        "--ref",
        p(&draft),
        "--cand",
        p(&draft),
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["accuracy_percent"], 100.0);
    let o = paveval(&["qa", "confusion", "--ref", p(&draft), "--cand", p(&corr)]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("accuracy 66.666667%"), "{}", stdout(&o));
}

#[test]
fn serve_reads_environment() {
    let dir = tempfile::tempdir().unwrap();
    let gt = dir.path().join("gt.json");
    std::fs::write(&gt, write_ground_truth(&fixture(2, false))).unwrap();
    let teams = dir.path().join("teams.json");
    std::fs::write(
        &teams,
        r#"[{"team_id":"t","display_name":"T","token":"s3cret"}]"#,
    )
    .unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port();
    let addr = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_paveval"))
        .arg("serve")
        .env("PAVEVAL_GT", &gt)
        .env("PAVEVAL_TEAMS", &teams)
        .env("PAVEVAL_ADDR", &addr)
        .env("PAVEVAL_DATA", dir.path().join("data"))
        .stderr(std::process::Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://{addr}/api/v1/submissions");
    let rt = tokio::runtime::Runtime::new().unwrap();
    let result = rt.block_on(async {
        let client = reqwest::Client::new();
        for _ in 0..100 {
            if let Ok(r) = client
                .post(&url)
                .header("Authorization", "s3cret")
                .body("[]")
                .send()
                .await
            {
                return Some(r.json::<Value>().await.unwrap());
            }
            tokio::time::sleep(std::time::Duration::from_millis(50)).await;
        }
        None
    });
    child.kill().unwrap();
    child.wait().unwrap();
    let v = result.expect("server came up");
    assert_eq!(v["mean_f1"], 0.0);
    assert_eq!(v["submission_id"], 1);
    assert!(dir.path().join("data/submissions.jsonl").is_file());
}
