use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::ptr;

use ctp::logic::{parse_kb, FactFormat};
use ctp::training::{init_model, Checkpoint, LinkData, TrainConfig, TrainData};
use ctp_ffi::*;

const FACTS: &str = "p(rick,beth).\np(beth,morty).\ng(rick,morty).\n";

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> Option<String> {
    let p = ctp_last_error_message();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned())
}

/// Writes a fresh checkpoint and the fact file it was built from.
fn fixture(dir: &Path) -> (PathBuf, PathBuf) {
    let kb = parse_kb(FACTS, FactFormat::Prolog).unwrap().0;
    let config = TrainConfig { dim: 4, depth: 1, ..Default::default() };
    let data = TrainData::Link(LinkData {
        train: kb,
        positives: None,
        valid: Vec::new(),
        test: Vec::new(),
        candidates: None,
    });
    let model = init_model(&config, &data).unwrap();
    let checkpoint = Checkpoint {
        config,
        epoch: 0,
        metric: "mrr".into(),
        validation: None,
        relations: None,
        metric_log: None,
        model: model.to_segment(),
    };
    let (model_path, kb_path) = (dir.join("model.json"), dir.join("facts.pl"));
    checkpoint.save(&model_path).unwrap();
    std::fs::write(&kb_path, FACTS).unwrap();
    (model_path, kb_path)
}

fn load(model_path: &Path, kb_path: &Path) -> (*mut CtpModel, *mut CtpKb) {
    let (mut model, mut kb) = (ptr::null_mut(), ptr::null_mut());
    let path = cstr(model_path.to_str().unwrap());
    assert_eq!(unsafe { ctp_model_load(path.as_ptr(), &mut model) }, CtpStatus::Ok);
    let path = cstr(kb_path.to_str().unwrap());
    assert_eq!(unsafe { ctp_kb_load(path.as_ptr(), CtpFormat::Prolog, &mut kb) }, CtpStatus::Ok);
    (model, kb)
}

fn prove(model: *const CtpModel, kb: *const CtpKb, goal: [&str; 3], depth: i32) -> (CtpStatus, f64) {
    let [p, s, o] = goal.map(cstr);
    let mut score = f64::NAN;
    let status = unsafe { ctp_prove(model, kb, p.as_ptr(), s.as_ptr(), o.as_ptr(), depth, &mut score) };
    (status, score)
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(ctp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn known_facts_score_one() {
    let dir = tempfile::tempdir().unwrap();
    let (m, k) = fixture(dir.path());
    let (model, kb) = load(&m, &k);
    assert_eq!(unsafe { ctp_kb_len(kb) }, 3);
    assert_eq!(unsafe { ctp_model_depth(model) }, 1);
    let (status, score) = prove(model, kb, ["p", "rick", "beth"], -1);
    assert_eq!(status, CtpStatus::Ok);
    assert_eq!(score, 1.0);
    assert_eq!(last_error(), None);
    let (status, score) = prove(model, kb, ["p", "morty", "rick"], 0);
    assert_eq!(status, CtpStatus::Ok);
    assert!((0.0..1.0).contains(&score), "{score}");
    unsafe {
        ctp_model_free(model);
        ctp_kb_free(kb);
    }
}

#[test]
fn deeper_proofs_never_score_lower() {
    let dir = tempfile::tempdir().unwrap();
    let (m, k) = fixture(dir.path());
    let (model, kb) = load(&m, &k);
    let shallow = prove(model, kb, ["g", "beth", "rick"], 0).1;
    let deep = prove(model, kb, ["g", "beth", "rick"], 2).1;
    assert!(deep >= shallow, "{deep} < {shallow}");
    unsafe {
        ctp_model_free(model);
        ctp_kb_free(kb);
    }
}

#[test]
fn errors_set_status_and_message() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = ptr::null_mut();
    let missing = cstr(dir.path().join("absent.json").to_str().unwrap());
    assert_eq!(unsafe { ctp_model_load(missing.as_ptr(), &mut model) }, CtpStatus::Io);
    assert!(model.is_null());
    assert!(last_error().unwrap().contains("absent.json"));

    assert_eq!(unsafe { ctp_model_load(ptr::null(), &mut model) }, CtpStatus::NullPointer);
    assert_eq!(unsafe { ctp_model_load(missing.as_ptr(), ptr::null_mut()) }, CtpStatus::NullPointer);

    let bad = dir.path().join("bad.pl");
    std::fs::write(&bad, "p(a,b).\nnot a fact\n").unwrap();
    let bad = cstr(bad.to_str().unwrap());
    let mut kb = ptr::null_mut();
    assert_eq!(unsafe { ctp_kb_load(bad.as_ptr(), CtpFormat::Prolog, &mut kb) }, CtpStatus::Parse);
    assert!(kb.is_null());

    let latin1 = [0xffu8, 0x00];
    let status = unsafe { ctp_kb_load(latin1.as_ptr().cast(), CtpFormat::Tsv, &mut kb) };
    assert_eq!(status, CtpStatus::InvalidUtf8);
}

#[test]
fn unknown_symbols_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (m, k) = fixture(dir.path());
    let (model, kb) = load(&m, &k);
    let (status, _) = prove(model, kb, ["p", "rick", "summer"], -1);
    assert_eq!(status, CtpStatus::UnknownSymbol);
    assert!(last_error().unwrap().contains("summer"));
    let (status, score) = prove(model, kb, ["p", "rick", "beth"], -1);
    assert_eq!((status, score), (CtpStatus::Ok, 1.0));
    assert_eq!(last_error(), None);
    let (status, _) = prove(ptr::null(), kb, ["p", "rick", "beth"], -1);
    assert_eq!(status, CtpStatus::NullPointer);
    unsafe {
        ctp_model_free(model);
        ctp_kb_free(kb);
        ctp_model_free(ptr::null_mut());
        ctp_kb_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/ctp.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["ctp_model_load", "ctp_kb_load", "ctp_prove", "ctp_last_error_message", "CTP_STATUS_OK"] {
        assert!(text.contains(name), "{name} missing from the header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(&src, "#include \"ctp.h\"\nint main(void) { CtpModel *m = 0; return ctp_model_load(\"x\", &m) == CTP_STATUS_OK; }\n").unwrap();
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let out = match std::process::Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang, "-I"])
            .arg(header.parent().unwrap())
            .arg(&src)
            .output()
        {
            Ok(out) => out,
            Err(_) => {
                eprintln!("{compiler} not found; skipping the {lang} header check");
                continue;
            }
        };
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
}
