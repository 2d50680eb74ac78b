use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use teacache_ffi::*;

fn options(delta: f64) -> TcRunOptions {
    TcRunOptions {
        steps: 20,
        beta_start: 1e-4,
        beta_end: 0.02,
        noise_seed: 7,
        delta,
        mode: TcIndicatorMode::ModulatedInput,
    }
}

fn last_error() -> String {
    let p = tc_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn reference_model() -> *mut TcModel {
    let cfg = tc_model_config_reference();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { tc_model_new(&cfg, &mut model) }, TcStatus::Ok);
    model
}

#[test]
fn zero_delta_matches_baseline() {
    let model = reference_model();
    let mut len = 0;
    unsafe {
        assert_eq!(tc_model_latent_len(model, &mut len), TcStatus::Ok);
        assert_eq!(len, 128);
        let mut a = vec![0.0; len];
        let mut b = vec![0.0; len];
        let mut sa = TcRunStats::default();
        let mut sb = TcRunStats::default();
        assert_eq!(
            tc_run_baseline(model, &options(0.0), b.as_mut_ptr(), len, &mut sb),
            TcStatus::Ok
        );
        assert_eq!(
            tc_run_teacache(
                model,
                &options(0.0),
                ptr::null(),
                a.as_mut_ptr(),
                len,
                &mut sa
            ),
            TcStatus::Ok
        );
        assert_eq!(sa, sb);
        assert_eq!(sa.computed_steps, 20);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));

        let mut sc = TcRunStats::default();
        assert_eq!(
            tc_run_teacache(
                model,
                &options(0.1),
                ptr::null(),
                a.as_mut_ptr(),
                len,
                &mut sc
            ),
            TcStatus::Ok
        );
        assert!(sc.computed_steps < 20 && sc.computed_steps >= 1);
        assert_eq!(sc.computed_steps + sc.reused_steps, 20);
        tc_model_free(model);
    }
}

#[test]
fn errors_are_reported() {
    let model = reference_model();
    unsafe {
        let mut small = vec![0.0; 4];
        let st = tc_run_baseline(model, &options(0.0), small.as_mut_ptr(), 4, ptr::null_mut());
        assert_eq!(st, TcStatus::BufferTooSmall);
        assert!(last_error().contains("need 128"));

        let mut bad = options(-1.0);
        let mut buf = vec![0.0; 128];
        let st = tc_run_teacache(
            model,
            &bad,
            ptr::null(),
            buf.as_mut_ptr(),
            128,
            ptr::null_mut(),
        );
        assert_ne!(st, TcStatus::Ok);
        bad.delta = 0.1;
        bad.steps = 0;
        assert_eq!(
            tc_run_teacache(
                model,
                &bad,
                ptr::null(),
                buf.as_mut_ptr(),
                128,
                ptr::null_mut()
            ),
            TcStatus::BadRange
        );
        assert_eq!(
            tc_run_baseline(
                ptr::null(),
                &options(0.0),
                buf.as_mut_ptr(),
                128,
                ptr::null_mut()
            ),
            TcStatus::NullPointer
        );

        let zeros = [0.0; 3];
        let ones = [1.0; 3];
        let mut d = 0.0;
        assert_eq!(
            tc_rel_l1_distance(ones.as_ptr(), zeros.as_ptr(), 3, &mut d),
            TcStatus::ZeroDenominator
        );
        assert_eq!(
            tc_rel_l1_distance(zeros.as_ptr(), ones.as_ptr(), 3, &mut d),
            TcStatus::Ok
        );
        assert_eq!(d, 1.0);

        let missing = CString::new("/nonexistent/rescaler.txt").unwrap();
        let mut r = ptr::null_mut();
        assert_eq!(
            tc_rescaler_load(missing.as_ptr(), &mut r),
            TcStatus::MissingRescaler
        );
        tc_model_free(model);
    }
}

#[test]
fn handles_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("w.bin").to_str().unwrap()).unwrap();
    let model = reference_model();
    unsafe {
        assert_eq!(tc_model_save(model, path.as_ptr()), TcStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(tc_model_load(path.as_ptr(), &mut loaded), TcStatus::Ok);
        let mut cfg = tc_model_config_reference();
        cfg.weight_seed = 0;
        assert_eq!(tc_model_config(loaded, &mut cfg), TcStatus::Ok);
        assert_eq!(cfg.weight_seed, 42);

        let mut a = vec![0.0; 128];
        let mut b = vec![0.0; 128];
        tc_run_baseline(model, &options(0.0), a.as_mut_ptr(), 128, ptr::null_mut());
        tc_run_baseline(loaded, &options(0.0), b.as_mut_ptr(), 128, ptr::null_mut());
        assert_eq!(a, b);

        let coeffs = [0.0, 2.0, 1.0];
        let mut r = ptr::null_mut();
        assert_eq!(tc_rescaler_new(coeffs.as_ptr(), 3, &mut r), TcStatus::Ok);
        let (mut y, mut order) = (0.0, 0);
        assert_eq!(tc_rescaler_evaluate(r, 3.0, &mut y), TcStatus::Ok);
        assert_eq!(tc_rescaler_order(r, &mut order), TcStatus::Ok);
        assert_eq!((y, order), (15.0, 2));
        let mut s = TcRunStats::default();
        assert_eq!(
            tc_run_teacache(model, &options(0.1), r, a.as_mut_ptr(), 128, &mut s),
            TcStatus::Ok
        );
        tc_rescaler_free(r);
        tc_model_free(loaded);
        tc_model_free(model);
        tc_model_free(ptr::null_mut());
    }
    let v = unsafe { CStr::from_ptr(tc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/teacache.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for sym in [
        "tc_model_new",
        "tc_run_teacache",
        "tc_last_error_message",
        "TC_STATUS_OK",
    ] {
        assert!(text.contains(sym), "{sym} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        "#include \"teacache.h\"\nint main(void) { TcModelConfig c = tc_model_config_reference(); \
         return c.token_count == 16 ? TC_STATUS_OK : TC_STATUS_PANIC; }\n",
    )
    .unwrap();
    let status = match Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-I")
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
    {
        Ok(s) => s,
        Err(_) => {
            eprintln!("no C compiler available, skipping syntax check");
            return;
        }
    };
    assert!(status.success());
}
