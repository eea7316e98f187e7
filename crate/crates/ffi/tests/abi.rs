use std::ffi::{CStr, CString};
use std::ptr;

use medbma_ffi::*;

fn last_error() -> String {
    let p = medbma_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn quick_options() -> MedbmaFitOptions {
    MedbmaFitOptions {
        iterations: 2000,
        burn_in: 1000,
        anneal_evaluations: 2000,
        seed: 4,
        ..medbma_fit_options_default()
    }
}

#[test]
fn simulate_fit_and_query() {
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(medbma_dataset_simulate(1, 300, 2, &mut data), MedbmaStatus::Ok);
        assert_eq!(medbma_dataset_len(data), 300);

        let mut post = ptr::null_mut();
        assert_eq!(medbma_fit(data, &quick_options(), &mut post), MedbmaStatus::Ok);
        assert_eq!(medbma_posterior_len(post), 2000);

        let mut total = 0.0;
        for i in 1..=5 {
            let mut p = f64::NAN;
            assert_eq!(medbma_posterior_model_probability(post, b'R' as _, i, &mut p), MedbmaStatus::Ok);
            total += p;
        }
        assert!((total - 1.0).abs() < 1e-12);
        let mut p = 0.0;
        assert_eq!(medbma_posterior_model_probability(post, b'S' as _, 19, &mut p), MedbmaStatus::InvalidArgument);
        assert_eq!(medbma_posterior_model_probability(post, b'Q' as _, 1, &mut p), MedbmaStatus::InvalidArgument);

        let mut s = MedbmaParameterSummary::default();
        assert_eq!(medbma_posterior_parameter(post, 10, &mut s), MedbmaStatus::Ok);
        assert!(s.hpd_lower <= s.mean && s.mean <= s.hpd_upper && s.sd > 0.0);
        assert_eq!(medbma_posterior_parameter(post, 12, &mut s), MedbmaStatus::InvalidArgument);

        let times = [0.3, 0.6, 1.2];
        let (mut tot, mut dir, mut med, mut prop) = ([0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]);
        assert_eq!(
            medbma_risk_ratio(post, data, times.as_ptr(), 3, 200, tot.as_mut_ptr(), dir.as_mut_ptr(), med.as_mut_ptr(), prop.as_mut_ptr()),
            MedbmaStatus::Ok
        );
        for k in 0..3 {
            assert!((tot[k] - dir[k] - med[k]).abs() < 1e-9);
        }

        let arms: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let xs: Vec<f64> = (0..100).map(|i| -2.0 + 6.0 * i as f64 / 100.0).collect();
        let mut power = -1.0;
        assert_eq!(
            medbma_predictive_power(post, 100, arms.as_ptr(), xs.as_ptr(), 0, 0.05, 1.2, ptr::null(), 100, 1, &mut power),
            MedbmaStatus::Ok
        );
        assert!((0.0..=1.0).contains(&power));
        let mut again = -1.0;
        medbma_predictive_power(post, 100, arms.as_ptr(), xs.as_ptr(), 0, 0.05, 1.2, ptr::null(), 100, 1, &mut again);
        assert_eq!(power, again);
        assert_eq!(
            medbma_predictive_power(post, 100, arms.as_ptr(), xs.as_ptr(), 1, 0.05, 1.2, ptr::null(), 100, 1, &mut power),
            MedbmaStatus::InvalidArgument
        );
        assert_eq!(
            medbma_predictive_power(post, 100, arms.as_ptr(), xs.as_ptr(), 1, 0.05, 1.2, data, 100, 1, &mut power),
            MedbmaStatus::Ok
        );

        let dir_ = tempfile::tempdir().unwrap();
        let path = CString::new(dir_.path().join("draws.csv").to_str().unwrap()).unwrap();
        assert_eq!(medbma_posterior_save(post, path.as_ptr()), MedbmaStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(medbma_posterior_load(path.as_ptr(), &mut loaded), MedbmaStatus::Ok);
        let (mut a, mut b) = (MedbmaParameterSummary::default(), MedbmaParameterSummary::default());
        medbma_posterior_parameter(post, 0, &mut a);
        medbma_posterior_parameter(loaded, 0, &mut b);
        assert_eq!(a.mean, b.mean);

        medbma_posterior_free(loaded);
        medbma_posterior_free(post);
        medbma_dataset_free(data);
    }
}

#[test]
fn error_codes_and_messages() {
    unsafe {
        let mut data = ptr::null_mut();
        let missing = CString::new("/definitely/not/here.csv").unwrap();
        assert_eq!(medbma_dataset_load(missing.as_ptr(), &mut data), MedbmaStatus::Io);
        assert!(last_error().contains("/definitely/not/here.csv"));
        assert!(data.is_null());

        assert_eq!(medbma_dataset_load(ptr::null(), &mut data), MedbmaStatus::NullPointer);
        assert_eq!(medbma_dataset_simulate(5, 100, 1, &mut data), MedbmaStatus::InvalidArgument);
        assert_eq!(medbma_dataset_simulate(1, 101, 1, &mut data), MedbmaStatus::InvalidArgument);
        assert_eq!(medbma_dataset_simulate(1, 100, 1, ptr::null_mut()), MedbmaStatus::NullPointer);

        let bad = tempfile::NamedTempFile::new().unwrap();
        std::fs::write(bad.path(), "arm,covariate,response,time,event\n0,1.0,2,1.0,1\n1,0.5,0,1.0,0\n").unwrap();
        let p = CString::new(bad.path().to_str().unwrap()).unwrap();
        assert_eq!(medbma_dataset_load(p.as_ptr(), &mut data), MedbmaStatus::Parse);

        let arm = [0u8, 1];
        let x = [0.0, 1.0];
        let y = [0u8, 1];
        let t = [-1.0, 1.0];
        let d = [1u8, 0];
        let s = medbma_dataset_from_columns(2, arm.as_ptr(), x.as_ptr(), y.as_ptr(), t.as_ptr(), d.as_ptr(), &mut data);
        assert_ne!(s, MedbmaStatus::Ok);
        assert_eq!(medbma_dataset_len(ptr::null()), 0);
        medbma_dataset_free(ptr::null_mut());
        medbma_posterior_free(ptr::null_mut());

        let mut opts = quick_options();
        opts.weighting = 9;
        let mut ok_data = ptr::null_mut();
        medbma_dataset_simulate(2, 100, 1, &mut ok_data);
        let mut post = ptr::null_mut();
        assert_eq!(medbma_fit(ok_data, &opts, &mut post), MedbmaStatus::InvalidArgument);
        assert!(post.is_null());
        medbma_dataset_free(ok_data);
    }
}

#[test]
fn equal_target_calibration() {
    let targets = [1.0; 18];
    let mut psi = [0.0; 6];
    let mut residual = f64::NAN;
    let s = unsafe {
        medbma_calibrate_psi(b'S' as _, targets.as_ptr(), 18, 20_000, 1, psi.as_mut_ptr(), &mut residual)
    };
    assert_eq!(s, MedbmaStatus::Ok);
    assert!(residual < 1e-6);
    assert!(psi.iter().all(|p| (p - 0.5).abs() < 1e-3), "{psi:?}");
    let s = unsafe { medbma_calibrate_psi(b'R' as _, targets.as_ptr(), 18, 100, 1, psi.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, MedbmaStatus::InvalidArgument);
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/medbma.h")).unwrap();
    for name in [
        "medbma_last_error",
        "medbma_dataset_load",
        "medbma_fit",
        "medbma_risk_ratio",
        "medbma_predictive_power",
        "medbma_calibrate_psi",
        "MEDBMA_STATUS_NUMERICAL",
        "typedef struct MedbmaPosterior MedbmaPosterior",
    ] {
        assert!(header.contains(name), "{name} missing from header");
    }
    let version = unsafe { CStr::from_ptr(medbma_version()) }.to_str().unwrap();
    assert_eq!(version, env!("CARGO_PKG_VERSION"));
}
