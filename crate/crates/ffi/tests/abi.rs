use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use oversmooth_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    let need = unsafe { os_last_error_message(buf.as_mut_ptr(), buf.len()) };
    if need == 0 {
        return String::new();
    }
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn complete(n: usize, loops: bool) -> *mut OsGraph {
    let mut g = ptr::null_mut();
    let st = unsafe { os_graph_generate(OsGraphKind::Complete, n, 0.0, 0, loops, &mut g) };
    assert_eq!(st, OsStatus::Ok);
    g
}

#[test]
fn graph_lifecycle_and_lambda() {
    let g = complete(3, false);
    let mut n = 0;
    let mut lambda = 0.0;
    unsafe {
        assert_eq!(os_graph_num_nodes(g, &mut n), OsStatus::Ok);
        assert_eq!(os_graph_lambda(g, &mut lambda), OsStatus::Ok);
        os_graph_free(g);
        os_graph_free(ptr::null_mut());
    }
    assert_eq!(n, 3);
    assert!((lambda + 0.5).abs() < 1e-12);
}

#[test]
fn edges_and_errors() {
    let edges = [0usize, 1, 1, 2, 2, 3, 3, 0];
    let mut g = ptr::null_mut();
    let st = unsafe { os_graph_from_edges(4, edges.as_ptr(), 4, false, &mut g) };
    assert_eq!(st, OsStatus::Ok);
    let (mut t, mut c) = (0usize, 0.0);
    let st = unsafe { os_positivity_horizon(g, 0.5, &mut t, &mut c) };
    assert_eq!(st, OsStatus::A1Violated);
    assert!(last_error().contains("A1"), "{}", last_error());
    unsafe { os_graph_free(g) };

    let bad = [0usize, 9];
    let st = unsafe { os_graph_from_edges(4, bad.as_ptr(), 1, false, &mut g) };
    assert_eq!(st, OsStatus::InvalidArgument);
    let st = unsafe { os_graph_num_nodes(ptr::null(), &mut t) };
    assert_eq!(st, OsStatus::NullPointer);
    assert!(last_error().contains("graph"));
}

#[test]
fn error_message_truncates_and_clears() {
    let mut t = 0usize;
    unsafe { os_graph_num_nodes(ptr::null(), &mut t) };
    let mut small = [0 as std::ffi::c_char; 5];
    let need = unsafe { os_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(need > 5);
    assert_eq!(unsafe { CStr::from_ptr(small.as_ptr()) }.to_bytes().len(), 4);
    let g = complete(3, false);
    unsafe { os_graph_num_nodes(g, &mut t) };
    assert_eq!(unsafe { os_last_error_message(ptr::null_mut(), 0) }, 0);
    unsafe { os_graph_free(g) };
}

#[test]
fn dense_helpers() {
    let m = [0.9, 0.1, 0.25, 0.75];
    let mut v = 0.0;
    unsafe {
        assert_eq!(os_matrix_norm(m.as_ptr(), 2, 2, OsNorm::Two, &mut v), OsStatus::Ok);
        assert!((v - 1.0188).abs() < 1e-3);
        assert_eq!(os_spectral_radius(m.as_ptr(), 2, &mut v), OsStatus::Ok);
        assert!((v - 1.0).abs() < 1e-12);
        let x = [0.0, 2.0];
        assert_eq!(os_mu(x.as_ptr(), 2, 1, &mut v), OsStatus::Ok);
        assert!((v - 2f64.sqrt()).abs() < 1e-15);
        let nan = [f64::NAN];
        assert_eq!(os_mu(nan.as_ptr(), 1, 1, &mut v), OsStatus::InvalidArgument);
    }
}

#[test]
fn lambda_report() {
    let g = complete(3, true);
    let mut r = OsLambdaReport::default();
    let st = unsafe { os_lambda_vs_jsr(g, 1.0 / 3.0, 12, 100, 1, &mut r) };
    assert_eq!(st, OsStatus::Ok);
    assert!(r.holds);
    assert!(r.identity_error < 1e-9);
    let st = unsafe { os_lambda_vs_jsr(g, 0.9, 12, 100, 1, &mut r) };
    assert_eq!(st, OsStatus::EpsilonTooLarge);
    unsafe { os_graph_free(g) };
}

#[test]
fn trajectory_round_trip() {
    let g = complete(3, false);
    let cfg = OsRunConfig {
        nonlinearity: OsNonlinearity::Identity,
        nonlinearity_param: 0.0,
        attention: OsAttention::Constant,
        attention_gain: 1.0,
        leaky_slope: 0.2,
        hidden_dim: 1,
        depth: 20,
        nonnegative_weights: true,
        seed: 3,
    };
    let x0 = [1.0, -1.0, 0.5];
    let mut traj = ptr::null_mut();
    let st = unsafe { os_trajectory_run(g, x0.as_ptr(), 1, &cfg, &mut traj) };
    assert_eq!(st, OsStatus::Ok, "{}", last_error());
    let mut depth = 0;
    let mut mus = vec![0.0; 21];
    let (mut rows, mut cols) = (0, 0);
    let mut state = vec![0.0; 3];
    unsafe {
        assert_eq!(os_trajectory_depth(traj, &mut depth), OsStatus::Ok);
        assert_eq!(os_trajectory_mu(traj, mus.as_mut_ptr(), mus.len()), OsStatus::Ok);
        assert_eq!(os_trajectory_mu(traj, mus.as_mut_ptr(), 5), OsStatus::DimensionMismatch);
        assert_eq!(os_trajectory_state_shape(traj, 0, &mut rows, &mut cols), OsStatus::Ok);
        assert_eq!(os_trajectory_state(traj, 0, state.as_mut_ptr(), 3), OsStatus::Ok);
        assert_eq!(os_trajectory_state(traj, 99, state.as_mut_ptr(), 3), OsStatus::InvalidArgument);
        os_trajectory_free(traj);
    }
    assert_eq!((depth, rows, cols), (20, 3, 1));
    assert_eq!(state, x0);
    // Consensus on K₃ shrinks μ by |w|/2 per layer with a 1×1 weight of modulus 1.
    for t in 0..20 {
        assert!((mus[t + 1] / mus[t] - 0.5).abs() < 1e-9);
    }
}

#[test]
fn counterexample_holds() {
    let mut r = OsCounterexample::default();
    assert_eq!(unsafe { os_counterexample(1000, &mut r) }, OsStatus::Ok);
    assert!((r.mu_min - 2f64.sqrt() / 6.0).abs() < 1e-12);
    assert!((r.mu_max - 2f64.sqrt() / 6.0).abs() < 1e-12);
    assert!(r.max_state_drift < 1e-12);
}

#[test]
fn header_is_valid_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/oversmooth.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in ["os_graph_generate", "os_trajectory_run", "os_last_error_message", "OS_STATUS_OK"] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c"]).arg(&header).status() else {
        eprintln!("no C compiler found; skipping syntax check");
        return;
    };
    assert!(status.success());
}
