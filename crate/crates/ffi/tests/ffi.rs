use std::ffi::{CStr, CString};
use std::ptr;

use gridseg_ffi::*;

fn piecewise(tw: usize, th: usize, p: usize, tau: (usize, usize), jump: f64) -> Vec<f64> {
    let mut v = Vec::with_capacity(tw * th * p);
    for w in 1..=tw {
        for h in 1..=th {
            let level = match (w > tau.0, h > tau.1) {
                (true, true) => jump,
                (false, true) => 0.0,
                (false, false) => jump,
                (true, false) => -jump,
            };
            v.extend(std::iter::repeat(level).take(p));
        }
    }
    v
}

fn last_error() -> String {
    let p = gs_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_grid(tw: usize, th: usize, p: usize, values: &[f64]) -> *mut GsGrid {
    let mut g = ptr::null_mut();
    let st = unsafe { gs_grid_new(tw, th, p, values.as_ptr(), values.len(), &mut g) };
    assert_eq!(st, GsStatus::Ok);
    g
}

#[test]
fn grid_roundtrip_and_dims() {
    let values = piecewise(6, 5, 2, (2, 3), 1.0);
    let g = new_grid(6, 5, 2, &values);
    let (mut tw, mut th, mut p) = (0, 0, 0);
    assert_eq!(unsafe { gs_grid_dims(g, &mut tw, &mut th, &mut p) }, GsStatus::Ok);
    assert_eq!((tw, th, p), (6, 5, 2));
    let mut back = vec![0.0; values.len()];
    assert_eq!(unsafe { gs_grid_values(g, back.as_mut_ptr(), back.len()) }, GsStatus::Ok);
    assert_eq!(back, values);
    assert_eq!(unsafe { gs_grid_values(g, back.as_mut_ptr(), 3) }, GsStatus::InvalidArgument);
    unsafe { gs_grid_free(g) };
}

#[test]
fn bad_inputs_report_errors() {
    let mut g = ptr::null_mut();
    let values = [1.0, 2.0, 3.0];
    assert_eq!(unsafe { gs_grid_new(2, 2, 1, values.as_ptr(), 3, &mut g) }, GsStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(last_error().contains("2x2x1"));
    assert_eq!(unsafe { gs_grid_new(1, 1, 1, ptr::null(), 1, &mut g) }, GsStatus::NullPointer);
    let nan = [f64::NAN];
    assert_eq!(unsafe { gs_grid_new(1, 1, 1, nan.as_ptr(), 1, &mut g) }, GsStatus::InvalidArgument);
    let mut cp = GsChangePoint::default();
    assert_eq!(unsafe { gs_estimate(ptr::null(), 1, 1.0, &mut cp) }, GsStatus::NullPointer);
    let path = CString::new("/nonexistent/grid.csv").unwrap();
    assert_eq!(unsafe { gs_grid_read_csv(path.as_ptr(), &mut g) }, GsStatus::Io);
    unsafe {
        gs_grid_free(ptr::null_mut());
        gs_tree_free(ptr::null_mut());
        gs_string_free(ptr::null_mut());
    }
}

#[test]
fn estimate_noiseless_change() {
    let g = new_grid(20, 16, 4, &piecewise(20, 16, 4, (7, 11), 2.0));
    for alg in [1, 2] {
        let mut cp = GsChangePoint::default();
        assert_eq!(unsafe { gs_estimate(g, alg, 1.0, &mut cp) }, GsStatus::Ok);
        assert_eq!(cp, GsChangePoint { tau_w: 7, tau_h: 11 });
    }
    let mut cp = GsChangePoint::default();
    assert_eq!(unsafe { gs_estimate(g, 9, 1.0, &mut cp) }, GsStatus::InvalidArgument);
    unsafe { gs_grid_free(g) };
}

#[test]
fn inference_and_refusal() {
    let g = new_grid(20, 16, 4, &piecewise(20, 16, 4, (7, 11), 2.0));
    let mut inf = GsInference::default();
    assert_eq!(unsafe { gs_infer(g, 0.05, 200, 3, &mut inf) }, GsStatus::Ok);
    assert_eq!(inf.tau, GsChangePoint { tau_w: 7, tau_h: 11 });
    assert_eq!(inf.nonvanishing_w.margin, 0.0);
    assert!(inf.vanishing_w.lo <= 7.0 && inf.vanishing_w.hi >= 7.0);
    unsafe { gs_grid_free(g) };

    // constant grid: every interior split has zero jump
    let g = new_grid(8, 8, 1, &[0.5; 64]);
    assert_eq!(unsafe { gs_infer(g, 0.05, 200, 3, &mut inf) }, GsStatus::InferenceRefused);
    unsafe { gs_grid_free(g) };
}

#[test]
fn yao_quantile_value() {
    let mut q = 0.0;
    assert_eq!(unsafe { gs_yao_quantile(0.05, &mut q) }, GsStatus::Ok);
    assert!((q - 11.03).abs() < 0.05);
    assert_eq!(unsafe { gs_yao_quantile(2.0, &mut q) }, GsStatus::InvalidArgument);
}

#[test]
fn segmentation_counts_json_and_reconstruction() {
    let values = piecewise(16, 16, 3, (8, 8), 1.0);
    let g = new_grid(16, 16, 3, &values);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { gs_segment(g, 1.0, 16, 20, &mut t) }, GsStatus::Ok);
    let mut counts = GsTreeCounts::default();
    assert_eq!(unsafe { gs_tree_counts(t, &mut counts) }, GsStatus::Ok);
    assert_eq!((counts.change_points, counts.partitions), (1, 4));

    let mut s = ptr::null_mut();
    assert_eq!(unsafe { gs_tree_json(t, &mut s) }, GsStatus::Ok);
    let json: serde_json::Value = serde_json::from_str(unsafe { CStr::from_ptr(s) }.to_str().unwrap()).unwrap();
    assert_eq!(json["schema"], "gridseg/v1");
    assert_eq!(json["partitions"], 4);
    unsafe { gs_string_free(s) };

    let mut r = ptr::null_mut();
    assert_eq!(unsafe { gs_tree_reconstruct(t, g, &mut r) }, GsStatus::Ok);
    let mut back = vec![0.0; values.len()];
    assert_eq!(unsafe { gs_grid_values(r, back.as_mut_ptr(), back.len()) }, GsStatus::Ok);
    assert_eq!(back, values);
    unsafe {
        gs_grid_free(r);
        gs_tree_free(t);
        gs_grid_free(g);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(gs_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/gridseg.h")).unwrap();
    for name in ["gs_grid_new", "gs_estimate", "gs_infer", "gs_segment", "gs_tree_json", "gs_last_error", "GS_STATUS_INFERENCE_REFUSED", "GsInference"] {
        assert!(header.contains(name), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = ["cc", "gcc", "clang"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"gridseg.h\"\nint main(void) { GsGrid *g = 0; double v[4] = {0}; return gs_grid_new(2, 2, 1, v, 4, &g) == GS_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/include"))
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
