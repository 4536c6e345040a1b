use std::ffi::{CStr, CString};
use std::os::raw::c_char;
use std::ptr;

use repgen_ffi::*;

fn cs(s: &str) -> CString {
    CString::new(s).unwrap()
}

#[test]
fn header_declares_the_api() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/repgen.h")).unwrap();
    for name in [
        "REPGEN_H",
        "RepgenModel",
        "RepgenScorer",
        "REPGEN_STATUS_OK",
        "repgen_last_error",
        "repgen_generate",
        "repgen_wls_target",
        "repgen_coverage_penalty",
        "repgen_wilcoxon",
        "repgen_string_free",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

#[test]
fn wls_target_matches_label_smoothing_at_gamma_zero() {
    let k = 6;
    let r = [0.0, 0.3, 1.0, 0.0, 0.5, 0.2];
    let mut ls = vec![0.0; k];
    let mut w = vec![0.0; k];
    unsafe {
        assert_eq!(
            repgen_wls_target(RepgenLossMode::LabelSmoothing, 2, k, 0.1, 4.0, ptr::null(), ls.as_mut_ptr()),
            RepgenStatus::Ok
        );
        assert_eq!(
            repgen_wls_target(RepgenLossMode::Weighted, 2, k, 0.1, 0.0, r.as_ptr(), w.as_mut_ptr()),
            RepgenStatus::Ok
        );
    }
    assert_eq!(ls, w);
    assert!((ls[2] - (0.9 + 0.1 / 6.0)).abs() < 1e-15);
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut q = vec![0.0; 3];
    let status = unsafe { repgen_wls_target(RepgenLossMode::Weighted, 0, 3, 1.5, 1.0, ptr::null(), q.as_mut_ptr()) };
    assert_eq!(status, RepgenStatus::InvalidArgument);
    let msg = unsafe { CStr::from_ptr(repgen_last_error()) }.to_str().unwrap();
    assert!(!msg.is_empty());

    let status = unsafe { repgen_wls_target(RepgenLossMode::OneHot, 0, 3, 0.1, 1.0, ptr::null(), ptr::null_mut()) };
    assert_eq!(status, RepgenStatus::NullPointer);

    let mut out: *mut RepgenModel = ptr::null_mut();
    let path = cs("/nonexistent/model.json");
    assert_eq!(unsafe { repgen_model_load(path.as_ptr(), &mut out) }, RepgenStatus::Io);
    assert!(out.is_null());
}

#[test]
fn closed_form_terms() {
    assert!((repgen_length_penalty(13, 0.2) - 3f64.powf(0.2)).abs() < 1e-9);
    // column sums 2.0 and 0.5
    let att = [1.0, 0.25, 1.0, 0.25];
    let mut cp = f64::NAN;
    let mut floored = true;
    unsafe {
        assert_eq!(repgen_coverage_penalty(att.as_ptr(), 2, 2, 0.2, 1e-6, &mut cp, &mut floored), RepgenStatus::Ok);
    }
    assert!(cp.abs() < 1e-12);
    assert!(!floored);
    let scores = [0.5, 0.25, 0.25];
    let mut rs = f64::NAN;
    unsafe { repgen_repeat_term(scores.as_ptr(), 3, 1e-6, &mut rs) };
    assert!(rs.abs() < 1e-12);
}

#[test]
fn rouge_and_wilcoxon() {
    let cand = cs("a b c");
    let r = cs("a b d");
    let refs: [*const c_char; 1] = [r.as_ptr()];
    let mut f = 0.0;
    unsafe {
        assert_eq!(repgen_rouge_n(cand.as_ptr(), refs.as_ptr(), 1, 1, &mut f), RepgenStatus::Ok);
    }
    assert!((f - 2.0 / 3.0).abs() < 1e-9);
    let cand = cs("a c b");
    let r = cs("a b c");
    let refs: [*const c_char; 1] = [r.as_ptr()];
    unsafe { repgen_rouge_l(cand.as_ptr(), refs.as_ptr(), 1, &mut f) };
    assert!((f - 2.0 / 3.0).abs() < 1e-9);

    let a = [1.0, 2.0];
    let b = [3.0, 4.0];
    let mut sig = RepgenSignificance { statistic: 0.0, p_value: 0.0, exact: false };
    unsafe { assert_eq!(repgen_wilcoxon(a.as_ptr(), 2, b.as_ptr(), 2, &mut sig), RepgenStatus::Ok) };
    assert!((sig.p_value - 1.0 / 3.0).abs() < 1e-12);
    assert!(sig.exact);
}

#[test]
fn generate_through_handles() {
    use repgen::corpus::{generate_synthetic, split_for_training, SyntheticConfig};
    use repgen::repeat_scorer::train_empirical;
    use repgen::seq2seq::{train, TrainConfig};

    let dir = tempfile::tempdir().unwrap();
    let records = generate_synthetic(&SyntheticConfig { n_records: 120, ..Default::default() }).unwrap();
    let view = split_for_training(&records, 0);
    let scorer = train_empirical(&view).unwrap();
    let (model, _) = train(&TrainConfig { epochs: 1, ..Default::default() }, &view, Some(&scorer)).unwrap();
    let mpath = dir.path().join("m.json");
    let spath = dir.path().join("s.json");
    model.save(&mpath).unwrap();
    scorer.save(&spath).unwrap();

    let mut m: *mut RepgenModel = ptr::null_mut();
    let mut s: *mut RepgenScorer = ptr::null_mut();
    let mp = cs(mpath.to_str().unwrap());
    let sp = cs(spath.to_str().unwrap());
    unsafe {
        assert_eq!(repgen_model_load(mp.as_ptr(), &mut m), RepgenStatus::Ok);
        assert_eq!(repgen_scorer_load(sp.as_ptr(), &mut s), RepgenStatus::Ok);
        assert_eq!(repgen_model_vocab_size(m), model.vocab.len());

        let utt = &records[0].utterance;
        let surf: Vec<CString> = utt.iter().map(|t| cs(&t.surface)).collect();
        let tags: Vec<CString> = utt.iter().map(|t| cs(t.pos.as_str())).collect();
        let sp: Vec<*const c_char> = surf.iter().map(|c| c.as_ptr()).collect();
        let tp: Vec<*const c_char> = tags.iter().map(|c| c.as_ptr()).collect();
        let params = repgen_rsm_params_default();
        let mut out: *mut c_char = ptr::null_mut();
        let status = repgen_generate(m, s, sp.as_ptr(), tp.as_ptr(), utt.len(), &params, &mut out);
        assert_eq!(status, RepgenStatus::Ok, "{:?}", CStr::from_ptr(repgen_last_error()));
        let json: serde_json::Value = serde_json::from_str(CStr::from_ptr(out).to_str().unwrap()).unwrap();
        assert!(json["output"].is_string());
        assert!(json["terms"]["lp"].as_f64().unwrap() >= 1.0);
        repgen_string_free(out);

        let bad = cs("not-a-tag");
        let bp = [bad.as_ptr()];
        let status = repgen_generate(m, s, sp.as_ptr(), bp.as_ptr(), 1, ptr::null(), &mut out);
        assert_eq!(status, RepgenStatus::InvalidArgument);

        repgen_model_free(m);
        repgen_scorer_free(s);
    }
}

#[test]
fn cli_entry_point_reports_usage_errors() {
    let prog = cs("repgen");
    let bogus = cs("bogus");
    let argv = [prog.as_ptr(), bogus.as_ptr()];
    assert_eq!(unsafe { repgen_cli_main(2, argv.as_ptr()) }, 2);
}
