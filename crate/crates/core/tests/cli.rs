mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gridseg::binning::{bin_scatter_to_grid, ScatterPoint};
use gridseg::io::{read_grid_csv, write_grid_csv};
use gridseg::segtree::TreeReport;
use gridseg::{ChangePoint, DataGrid, GridDims};
use image::{Rgb, RgbImage};
use serde_json::Value;

use common::{piecewise, quadrant_number};

fn gridseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridseg")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(out: &Output) -> Value {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_csv(dir: &Path, name: &str, grid: &DataGrid) -> PathBuf {
    let path = dir.join(name);
    write_grid_csv(grid, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn design_theta(p: usize) -> [Vec<f64>; 4] {
    let mut v = vec![0.0; p];
    v[..5].copy_from_slice(&[0.75, 0.625, 0.5, 0.375, 0.25]);
    [v.clone(), vec![0.0; p], v, vec![0.0; p]]
}

const GOLDEN_ARGS: [&str; 17] = [
    "simulate", "--tw", "30", "--th", "30", "--p", "10", "--s", "5", "--tau", "0.2,0.2", "--rho", "0.5", "--reps", "20", "--seed", "7",
];

#[test]
fn simulate_matches_golden_file() {
    let out = gridseg(&GOLDEN_ARGS);
    assert_eq!(code(&out), 0);
    let golden = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/simulate_30x30_seed7.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&golden));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn simulate_thread_count_does_not_change_output() {
    let mut args = GOLDEN_ARGS.to_vec();
    args[14] = "6";
    let serial: Vec<&str> = [&["--threads", "1"][..], &args].concat();
    let parallel: Vec<&str> = [&["--threads", "3"][..], &args].concat();
    assert_eq!(gridseg(&serial).stdout, gridseg(&parallel).stdout);
}

#[test]
fn simulate_writes_replication_lines() {
    let dir = tempfile::tempdir().unwrap();
    let reps = dir.path().join("reps.jsonl");
    let csv = dir.path().join("m.csv");
    let out = gridseg(&[
        "simulate", "--tw", "16", "--th", "16", "--p", "6", "--reps", "5", "--seed", "1", "--mc-draws", "300",
        "--output", csv.to_str().unwrap(), "--reps-output", reps.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let lines: Vec<Value> = std::fs::read_to_string(&reps)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 5);
    for (i, l) in lines.iter().enumerate() {
        assert_eq!(l["rep"], i);
        assert_eq!(l["tau_true"]["tau_w"], 3);
    }
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("tw,th,p,s,"));
}

#[test]
fn simulate_rejects_invalid_designs() {
    let mut args = GOLDEN_ARGS.to_vec();
    args[14] = "0";
    let out = gridseg(&args);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("reps"));
    assert_eq!(code(&gridseg(&["simulate", "--p", "3", "--s", "5"])), 2);
    assert_eq!(code(&gridseg(&["simulate", "--rho", "1.5"])), 2);
    assert_eq!(code(&gridseg(&["simulate", "--bogus-flag", "1"])), 2);
    assert_eq!(code(&gridseg(&["simulate", "--noise", "cauchy"])), 2);
}

#[test]
fn estimate_recovers_noiseless_change() {
    let dir = tempfile::tempdir().unwrap();
    let tau = ChangePoint { tau_w: 14, tau_h: 18 };
    let path = write_csv(dir.path(), "g.csv", &piecewise(40, 36, tau, &design_theta(10)));
    for alg in ["1", "2"] {
        let v = json(&gridseg(&["estimate", "--input", path.to_str().unwrap(), "--algorithm", alg]));
        assert_eq!(v["schema"], "gridseg/v1");
        assert_eq!(v["trace"]["final_cp"]["tau_w"], 14);
        assert_eq!(v["trace"]["final_cp"]["tau_h"], 18);
    }
    let v = json(&gridseg(&["estimate", "--input", path.to_str().unwrap(), "--init", "30,5", "--lambda-max", "0.5"]));
    assert_eq!(v["trace"]["init"]["tau_w"], 30);
    assert_eq!(v["trace"]["final_cp"]["tau_w"], 14);
}

#[test]
fn estimate_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&gridseg(&["estimate", "--input", "/does/not/exist.csv"])), 2);
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "w,h,x1\n1,1,0.5\n1,2,oops\n").unwrap();
    let out = gridseg(&["estimate", "--input", bad.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
    let g = write_csv(dir.path(), "g.csv", &DataGrid::zeros(8, 8, 2).unwrap());
    assert_eq!(code(&gridseg(&["estimate", "--input", g.to_str().unwrap(), "--algorithm", "3"])), 2);
    assert_eq!(code(&gridseg(&["estimate", "--input", g.to_str().unwrap(), "--init", "9,1"])), 2);
}

#[test]
fn infer_on_large_jumps_gives_point_intervals() {
    let dir = tempfile::tempdir().unwrap();
    let tau = ChangePoint { tau_w: 9, tau_h: 13 };
    let theta = [vec![5.0, 0.0, 2.0, 0.0], vec![0.0; 4], vec![5.0, 0.0, 2.0, 0.0], vec![0.0, -3.0, 0.0, 4.0]];
    // deterministic small perturbation so the covariance is not degenerate
    let g = DataGrid::from_fn(24, 20, 4, |w, h| {
        let base = &theta[quadrant_number(w, h, tau) - 1];
        base.iter()
            .enumerate()
            .map(|(k, b)| b + 0.3 * (((w * 7 + h * 13 + k * 5) % 11) as f64 / 10.0 - 0.5))
            .collect()
    })
    .unwrap();
    let path = write_csv(dir.path(), "g.csv", &g);
    let v = json(&gridseg(&["infer", "--input", path.to_str().unwrap(), "--seed", "4", "--mc-draws", "1000"]));
    assert_eq!(v["schema"], "gridseg/v1");
    assert_eq!(v["tau"]["tau_w"], 9);
    assert_eq!(v["tau"]["tau_h"], 13);
    let iv = &v["intervals"];
    assert_eq!(iv["nonvanishing_w"]["margin"], 0.0);
    assert_eq!(iv["nonvanishing_h"]["margin"], 0.0);
    assert!(iv["vanishing_w"]["margin"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["seed"], 4);
}

#[test]
fn infer_requires_seed_and_refuses_flat_grids() {
    let dir = tempfile::tempdir().unwrap();
    let flat = write_csv(dir.path(), "flat.csv", &DataGrid::from_fn(10, 10, 2, |_, _| vec![1.0, 2.0]).unwrap());
    assert_eq!(code(&gridseg(&["infer", "--input", flat.to_str().unwrap()])), 2);
    let out = gridseg(&["infer", "--input", flat.to_str().unwrap(), "--seed", "1"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("refused"));
    assert_eq!(code(&gridseg(&["infer", "--input", flat.to_str().unwrap(), "--seed", "1", "--alpha", "1.5"])), 2);
}

fn tree(out: &Output) -> TreeReport {
    assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn segment_tree_counts() {
    let dir = tempfile::tempdir().unwrap();
    let single = write_csv(
        dir.path(),
        "single.csv",
        &piecewise(32, 32, ChangePoint { tau_w: 11, tau_h: 20 }, &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]]),
    );
    let rec = dir.path().join("rec.csv");
    let r = tree(&gridseg(&["segment-tree", "--input", single.to_str().unwrap(), "--reconstructed", rec.to_str().unwrap()]));
    assert_eq!(r.schema, "gridseg/v1");
    assert_eq!((r.change_points, r.partitions), (1, 4));
    r.to_tree().unwrap();
    let original = read_grid_csv(std::fs::File::open(&single).unwrap()).unwrap();
    let rebuilt = read_grid_csv(std::fs::File::open(&rec).unwrap()).unwrap();
    assert_eq!(original, rebuilt);

    let constant = write_csv(dir.path(), "c.csv", &DataGrid::from_fn(20, 20, 2, |_, _| vec![0.5, 0.5]).unwrap());
    let r = tree(&gridseg(&["segment-tree", "--input", constant.to_str().unwrap()]));
    assert_eq!((r.change_points, r.partitions), (0, 1));

    assert_eq!(code(&gridseg(&["segment-tree", "--input", single.to_str().unwrap(), "--max-level", "0"])), 2);
}

fn planted_ppm(dir: &Path, name: &str) -> (PathBuf, RgbImage) {
    let tau = ChangePoint { tau_w: 12, tau_h: 22 };
    let colors = [[200u8, 40, 40], [40, 200, 40], [40, 40, 200], [200, 200, 40]];
    let img = RgbImage::from_fn(30, 30, |x, y| {
        Rgb(colors[quadrant_number(x as usize + 1, 30 - y as usize, tau) - 1])
    });
    let path = dir.join(name);
    img.save(&path).unwrap();
    (path, img)
}

#[test]
fn denoise_zero_noise_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let (input, img) = planted_ppm(dir.path(), "in.ppm");
    let output = dir.path().join("out.ppm");
    let tree_json = dir.path().join("tree.json");
    let out = gridseg(&[
        "denoise", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap(),
        "--tree-output", tree_json.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(image::open(&output).unwrap().to_rgb8(), img);
    let r: TreeReport = serde_json::from_str(&std::fs::read_to_string(&tree_json).unwrap()).unwrap();
    assert_eq!(r.partitions, 4);
}

#[test]
fn denoise_with_added_noise_and_png() {
    let dir = tempfile::tempdir().unwrap();
    let (input, _) = planted_ppm(dir.path(), "in.ppm");
    let output = dir.path().join("out.png");
    let noisy = dir.path().join("noisy.png");
    let args = [
        "denoise", "--input", input.to_str().unwrap(), "--output", output.to_str().unwrap(), "--add-noise", "0.05",
        "--noise-seed", "3", "--noisy-output", noisy.to_str().unwrap(),
    ];
    assert_eq!(code(&gridseg(&args)), 0);
    let first = std::fs::read(&output).unwrap();
    assert!(noisy.exists());
    assert_eq!(code(&gridseg(&args)), 0);
    assert_eq!(std::fs::read(&output).unwrap(), first);
}

#[test]
fn denoise_rejects_unsupported_formats() {
    let dir = tempfile::tempdir().unwrap();
    let bmp = dir.path().join("x.bmp");
    std::fs::write(&bmp, b"BM").unwrap();
    let out = dir.path().join("o.ppm");
    assert_eq!(code(&gridseg(&["denoise", "--input", bmp.to_str().unwrap(), "--output", out.to_str().unwrap()])), 2);
    let garbage = dir.path().join("g.ppm");
    std::fs::write(&garbage, b"not an image").unwrap();
    assert_eq!(code(&gridseg(&["denoise", "--input", garbage.to_str().unwrap(), "--output", out.to_str().unwrap()])), 2);
}

fn write_scatter(path: &Path, pts: &[ScatterPoint]) {
    let p = pts[0].obs.len();
    let mut s = String::from("cx,cy");
    for k in 1..=p {
        s.push_str(&format!(",x{k}"));
    }
    s.push('\n');
    for pt in pts {
        s.push_str(&format!("{},{}", pt.cx, pt.cy));
        for v in &pt.obs {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

#[test]
fn bin_grid_lattice_passthrough_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let lattice: Vec<ScatterPoint> = (1..=4)
        .flat_map(|w| (1..=3).map(move |h| (w, h)))
        .map(|(w, h)| ScatterPoint {
            cx: w as f64,
            cy: h as f64,
            obs: vec![(w * 10 + h) as f64],
        })
        .collect();
    let input = dir.path().join("lat.csv");
    write_scatter(&input, &lattice);
    let out = gridseg(&["bin-grid", "--input", input.to_str().unwrap(), "--tw", "4", "--th", "3", "--k", "1"]);
    assert_eq!(code(&out), 0);
    let g = read_grid_csv(&out.stdout[..]).unwrap();
    for w in 1..=4 {
        for h in 1..=3 {
            assert_eq!(g.cell(w, h).unwrap(), &[(w * 10 + h) as f64]);
        }
    }

    // 40 scattered points, 5x5 grid, k = 3, against an O(n^2) oracle
    let pts: Vec<ScatterPoint> = (0..40)
        .map(|i| {
            let cx = ((i * 37) % 41) as f64 / 4.0;
            let cy = ((i * 23) % 43) as f64 / 7.0;
            ScatterPoint {
                cx,
                cy,
                obs: vec![i as f64, (i * i % 17) as f64],
            }
        })
        .collect();
    let input = dir.path().join("scatter.csv");
    write_scatter(&input, &pts);
    let out = gridseg(&["bin-grid", "--input", input.to_str().unwrap(), "--tw", "5", "--th", "5", "--k", "3"]);
    let g = read_grid_csv(&out.stdout[..]).unwrap();
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.cx), b.max(p.cx)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.cy), b.max(p.cy)));
    for w in 1..=5 {
        for h in 1..=5 {
            let (cx, cy) = ((w as f64 - 0.5) / 5.0, (h as f64 - 0.5) / 5.0);
            let mut d: Vec<(f64, usize)> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| {
                    let (u, v) = ((p.cx - x0) / (x1 - x0), (p.cy - y0) / (y1 - y0));
                    ((u - cx).powi(2) + (v - cy).powi(2), i)
                })
                .collect();
            d.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for k in 0..2 {
                let want = d[..3].iter().map(|(_, i)| pts[*i].obs[k]).sum::<f64>() / 3.0;
                assert!((g.cell(w, h).unwrap()[k] - want).abs() < 1e-12, "cell ({w},{h})");
            }
        }
    }
    assert_eq!(g, bin_scatter_to_grid(&pts, GridDims::new(5, 5), 3).unwrap());
}

#[test]
fn bin_grid_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "cx,x1\n0.5,1.0\n").unwrap();
    assert_eq!(code(&gridseg(&["bin-grid", "--input", input.to_str().unwrap()])), 2);
    assert_eq!(code(&gridseg(&["bin-grid", "--input", "/no/such/file.csv"])), 2);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&gridseg(&["--help"])), 0);
    assert_eq!(code(&gridseg(&["--version"])), 0);
    assert_eq!(code(&gridseg(&[])), 2);
}
