use std::ffi::CStr;
use std::path::Path;
use std::ptr;

use itersup_ffi::*;

fn last_error() -> String {
    let p = itersup_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn iterated_brownian_through_the_c_api() {
    let mut t = ItersupTail { alpha: 0.0, beta: 0.0, gamma: 0.0, big_c: 0.0 };
    let s = unsafe { itersup_iterated_fbm_sup(0.5, 0.5, 1.0, f64::NAN, f64::NAN, &mut t) };
    assert_eq!(s, ItersupStatus::Ok);
    assert!((t.beta - 3.0 * 2f64.powf(-5.0 / 3.0)).abs() < 1e-12);
    assert!((t.big_c - 0.820_800_786_370_665_5).abs() < 1e-9);
    assert!(itersup_last_error().is_null());
}

#[test]
fn missing_pickands_reports_status_and_message() {
    let mut t = ItersupTail { alpha: 0.0, beta: 0.0, gamma: 0.0, big_c: 0.0 };
    let s = unsafe { itersup_fbm_sup_unit_interval(0.3, f64::NAN, &mut t) };
    assert_eq!(s, ItersupStatus::MissingPickands);
    assert!(last_error().contains("H_0.6"), "{}", last_error());
    let s = unsafe { itersup_fbm_sup_unit_interval(0.3, 1.5, &mut t) };
    assert_eq!(s, ItersupStatus::Ok);
    assert!((t.gamma - (1.0 / 0.3 - 3.0)).abs() < 1e-12);
}

#[test]
fn null_and_domain_errors() {
    assert_eq!(unsafe { itersup_iterated_fbm_sup(0.5, 0.5, 1.0, f64::NAN, f64::NAN, ptr::null_mut()) }, ItersupStatus::NullPointer);
    let bad = ItersupTail { alpha: -1.0, beta: 1.0, gamma: 0.0, big_c: 1.0 };
    let mut v = 0.0;
    assert_eq!(unsafe { itersup_tail_eval(&bad, 1.0, &mut v) }, ItersupStatus::Domain);
    assert!(itersup_process_fbm(1.5).is_null());
    assert!(last_error().contains("Hurst"));
}

#[test]
fn corollary_and_eval() {
    let unit = ItersupTail { alpha: 2.0, beta: 0.5, gamma: -1.0, big_c: 4.0 / (2.0 * std::f64::consts::PI).sqrt() };
    let mut t = unit;
    assert_eq!(unsafe { itersup_randomized_sup_transform(&unit, 1.0, 1.0, false, &mut t) }, ItersupStatus::Ok);
    assert!((t.big_c - 0.820_800_786_370_665_5).abs() < 1e-9);
    // strict mode rejects a linear variance
    assert_eq!(unsafe { itersup_randomized_sup_transform(&unit, 1.0, 1.0, true, &mut t) }, ItersupStatus::Domain);
    let mut v = 0.0;
    assert_eq!(unsafe { itersup_tail_eval(&unit, 3.0, &mut v) }, ItersupStatus::Ok);
    assert!((v - 4.0 * 0.004_431_848_411_938_007_5 / 3.0).abs() < 1e-15);
    assert!((itersup_normal_upper_tail(2.0) - 0.022_750_131_948_179_21).abs() < 1e-15);
}

#[test]
fn pickands_exact_value() {
    let (mut v, mut se) = (0.0, -1.0);
    assert_eq!(unsafe { itersup_pickands(2.0, false, 50.0, 10, 0.01, 0, &mut v, &mut se) }, ItersupStatus::Ok);
    assert!((v - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
    assert_eq!(se, 0.0);
}

#[test]
fn tail_estimate_handle_round_trip() {
    let x = itersup_process_fbm(0.5);
    let y = itersup_process_linear(1.0);
    assert!(!x.is_null() && !y.is_null());
    let u = [1.0, 2.0];
    let mut est = ptr::null_mut();
    let s = unsafe { itersup_estimate_tail(x, y, 1.0, u.as_ptr(), u.len(), 4000, 1.0 / 256.0, 3, &mut est) };
    assert_eq!(s, ItersupStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { itersup_tail_estimate_len(est) }, 2);
    let (mut uu, mut p, mut se) = (0.0, 0.0, 0.0);
    assert_eq!(unsafe { itersup_tail_estimate_get(est, 1, &mut uu, &mut p, &mut se) }, ItersupStatus::Ok);
    assert_eq!(uu, 2.0);
    // 2Ψ(2) minus a small grid bias
    assert!((p - 0.0455).abs() < 4.0 * se + 0.005, "{p} ± {se}");
    assert_eq!(unsafe { itersup_tail_estimate_get(est, 2, &mut uu, &mut p, &mut se) }, ItersupStatus::OutOfRange);

    let mut fit = ItersupBetaFit { beta_hat: 0.0, std_err: 0.0, ci_lo: 0.0, ci_hi: 0.0, big_c_hat: 0.0, n_points: 0 };
    // two points are too few
    assert_eq!(unsafe { itersup_fit_beta(est, 2.0, -1.0, f64::NAN, &mut fit) }, ItersupStatus::InsufficientData);
    unsafe {
        itersup_tail_estimate_free(est);
        itersup_process_free(x);
        itersup_process_free(y);
        itersup_tail_estimate_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/itersup.h")).unwrap();
    for name in [
        "itersup_iterated_fbm_sup",
        "itersup_estimate_tail",
        "itersup_tail_estimate_free",
        "itersup_last_error",
        "typedef struct ItersupProcess ItersupProcess",
        "ITERSUP_STATUS_MISSING_PICKANDS",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("t.c");
    std::fs::write(&src, "#include \"itersup.h\"\nint main(void) { return itersup_normal_upper_tail(0.0) > 0.4 ? 0 : 1; }\n").unwrap();
    let inc = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(&inc)
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<&'static str, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if std::process::Command::new(cc).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cc);
        }
    }
    Err(())
}
