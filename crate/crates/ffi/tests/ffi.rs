use std::ffi::CString;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use perclab_ffi::*;

fn site(seed: u64) -> *mut PerclabConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { perclab_sample_site(1.0 / 32.0, 1.2, -1.0, seed, 0, &mut cfg) }, PERCLAB_OK);
    cfg
}

fn last_error() -> String {
    let mut buf = vec![0i8; 512];
    let n = unsafe { perclab_last_error(buf.as_mut_ptr().cast(), buf.len()) };
    assert!(n > 0);
    unsafe { std::ffi::CStr::from_ptr(buf.as_ptr().cast()) }.to_string_lossy().into_owned()
}

#[test]
fn handles_round_trip() {
    let cfg = site(1);
    let mut n = 0u64;
    assert_eq!(unsafe { perclab_config_vertex_count(cfg, &mut n) }, PERCLAB_OK);
    let mut cs = ptr::null_mut();
    assert_eq!(unsafe { perclab_clusters_find(cfg, &mut cs) }, PERCLAB_OK);
    let mut count = 0u64;
    assert_eq!(unsafe { perclab_clusters_count(cs, &mut count) }, PERCLAB_OK);
    assert!(count > 0);
    // cluster sizes add up to the red vertices
    let mut total = 0u64;
    for c in 0..count {
        let (mut size, mut diam) = (0u64, 0f64);
        assert_eq!(unsafe { perclab_cluster_info(cs, c, &mut size, &mut diam) }, PERCLAB_OK);
        assert!(size >= 1 && diam >= 0.0);
        total += size;
    }
    assert!(total < n && total > n / 4);
    let (mut size, mut diam) = (0u64, 0f64);
    assert_eq!(unsafe { perclab_cluster_info(cs, count, &mut size, &mut diam) }, PERCLAB_ERR_DOMAIN);
    unsafe {
        perclab_clusters_free(cs);
        perclab_config_free(cfg);
        perclab_config_free(ptr::null_mut());
    }
}

#[test]
fn error_codes() {
    let cfg = site(2);
    let mut hit = false;
    let one = CString::new("1").unwrap();
    let none = CString::new("").unwrap();
    let bad = CString::new("1x").unwrap();
    unsafe {
        assert_eq!(perclab_arm_event(cfg, 0.0, 0.0, 0.1, 0.5, one.as_ptr(), 0, none.as_ptr(), &mut hit), PERCLAB_OK);
        assert_eq!(perclab_arm_event(cfg, 0.0, 0.0, 0.5, 0.1, one.as_ptr(), 0, none.as_ptr(), &mut hit), PERCLAB_ERR_PARAMETER);
        assert!(last_error().contains("0 < a < b"));
        assert_eq!(perclab_arm_event(cfg, 0.0, 0.0, 0.1, 0.5, bad.as_ptr(), 0, none.as_ptr(), &mut hit), PERCLAB_ERR_PARAMETER);
        assert_eq!(perclab_arm_event(cfg, 0.0, 0.0, 0.1, 5.0, one.as_ptr(), 0, none.as_ptr(), &mut hit), PERCLAB_ERR_DOMAIN);
        assert_eq!(perclab_arm_event(ptr::null(), 0.0, 0.0, 0.1, 0.5, one.as_ptr(), 0, none.as_ptr(), &mut hit), PERCLAB_ERR_NULL);
        assert_eq!(perclab_arm_event(cfg, 0.0, 0.0, 0.1, 0.5, one.as_ptr(), 0, none.as_ptr(), ptr::null_mut()), PERCLAB_ERR_NULL);
        let mut m = 0.0;
        assert_eq!(perclab_magnetization(cfg, 0.5, &mut m), PERCLAB_ERR_KIND);
        let mut out = ptr::null_mut();
        assert_eq!(perclab_sample_site(-1.0, 1.0, -1.0, 0, 0, &mut out), PERCLAB_ERR_CONFIG);
        assert!(out.is_null());
        assert_eq!(perclab_config_decode([1u8, 2, 3].as_ptr(), 3, &mut out), PERCLAB_ERR_FORMAT);
        let mut d = 0.0;
        assert_eq!(perclab_ks_distance([1.0].as_ptr(), 0, [1.0].as_ptr(), 1, &mut d), PERCLAB_ERR_DOMAIN);
        assert_eq!(perclab_ks_distance([0.0, 1.0].as_ptr(), 2, [2.0, 3.0].as_ptr(), 2, &mut d), PERCLAB_OK);
        assert_eq!(d, 1.0);
        perclab_config_free(cfg);
    }
}

#[test]
fn fk_field_and_decode() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(perclab_sample_fk(1.0 / 16.0, 1.0, -1.0, 3, 0, 20, &mut cfg), PERCLAB_OK);
        let (mut full, mut cut, mut none) = (0.0, 0.0, 1.0);
        assert_eq!(perclab_magnetization(cfg, 1.0, &mut full), PERCLAB_OK);
        assert_eq!(perclab_cutoff_magnetization(cfg, 1.0, 1.0 / 16.0, &mut cut), PERCLAB_OK);
        assert_eq!(perclab_cutoff_magnetization(cfg, 1.0, 10.0, &mut none), PERCLAB_OK);
        assert!((full - cut).abs() < 1e-12);
        assert_eq!(none, 0.0);
        assert_eq!(perclab_magnetization(cfg, 2.0, &mut full), PERCLAB_ERR_DOMAIN);
        perclab_config_free(cfg);
    }
    let spec = perclab::lattice::MeshSpec::critical(perclab::lattice::LatticeKind::TriangularSite, 1.0 / 32.0, 1.2, 4);
    let bytes = perclab::lattice::io::encode_site(&perclab::lattice::sample_bernoulli(&spec).unwrap());
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(perclab_config_decode(bytes.as_ptr(), bytes.len(), &mut cfg), PERCLAB_OK);
        let mut v = PerclabVerdict::default();
        assert_eq!(perclab_verify_correspondence(cfg, 1.0 / 27.0, 0.5, &mut v), PERCLAB_OK);
        assert!((-1..=1).contains(&v.outcome));
        assert_eq!(v.outcome == -1, !v.e);
        assert_eq!(perclab_verify_correspondence(cfg, 0.2, 0.5, &mut v), PERCLAB_ERR_PARAMETER);
        perclab_config_free(cfg);
    }
}

#[test]
fn header_declares_every_export() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/perclab.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let names: Vec<&str> = src.lines().filter_map(|l| l.split("extern \"C\" fn ").nth(1)).map(|r| r.split('(').next().unwrap()).collect();
    assert!(names.len() >= 14);
    for n in names {
        assert!(h.contains(&format!(" {n}(")) || h.contains(&format!("*{n}(")), "{n} missing from header");
    }
    assert!(h.contains("typedef struct PerclabConfig PerclabConfig;"));
}

/// Compiles a C program against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libperclab_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status();
    let Ok(status) = status else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("version=0.1.0"));
}
