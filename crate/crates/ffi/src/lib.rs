//! C ABI for the repgen toolkit.
//!
//! Every fallible function returns a [`RepgenStatus`]; on failure the message
//! is available from [`repgen_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! through out-pointers are owned by the caller and released with
//! [`repgen_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::{c_char, c_int};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use repgen::corpus::{DialogueRecord, Pos, Token};
use repgen::decoder::{self, Ablation, RsmParams};
use repgen::evaluation::{self, TestMethod};
use repgen::repeat_scorer::ScorerModel;
use repgen::seq2seq::{GenerativeModel, ToyTransformer};
use repgen::wls::{self, LossMode, RepeatWeightVector, Smoothing};
use repgen::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepgenStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numeric = 5,
    Lookup = 6,
    Utf8 = 7,
    Panic = 8,
    Other = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RepgenLossMode {
    OneHot = 0,
    LabelSmoothing = 1,
    Weighted = 2,
}

/// Decoder settings. `max_length` 0 selects twice the source length plus 5.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RepgenRsmParams {
    pub alpha: f64,
    pub beta: f64,
    pub beam_size: usize,
    pub max_length: usize,
    pub use_lp: bool,
    pub use_cp: bool,
    pub use_rs: bool,
    pub rs_floor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RepgenSignificance {
    pub statistic: f64,
    pub p_value: f64,
    /// 1 for the exact distribution, 0 for the normal approximation.
    pub exact: bool,
}

/// Opaque trained generator.
pub struct RepgenModel(ToyTransformer);

/// Opaque repeat scorer.
pub struct RepgenScorer(ScorerModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RepgenStatus {
    match e {
        Error::Io { .. } => RepgenStatus::Io,
        Error::Parse { .. } | Error::Validation { .. } | Error::Json(_) => RepgenStatus::Parse,
        Error::Numeric(_) | Error::Divergence { .. } => RepgenStatus::Numeric,
        Error::Lookup(_) => RepgenStatus::Lookup,
        Error::Param(_) | Error::Invalid(_) | Error::NoScorableWords | Error::Enumeration(_) => {
            RepgenStatus::InvalidArgument
        }
        _ => RepgenStatus::Other,
    }
}

struct Fail(RepgenStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RepgenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            RepgenStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside repgen".into());
            RepgenStatus::Panic
        }
    }
}

fn null(name: &str) -> Fail {
    Fail(RepgenStatus::NullPointer, format!("`{name}` is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RepgenStatus::Utf8, format!("`{name}` is not valid UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, name: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Fail(RepgenStatus::Other, "string contains a nul byte".into()))
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next repgen call on the same thread.
#[no_mangle]
pub extern "C" fn repgen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn repgen_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from a repgen function and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn repgen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn repgen_model_load(path: *const c_char, out: *mut *mut RepgenModel) -> RepgenStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let model = ToyTransformer::load(path)?;
        put(out, Box::into_raw(Box::new(RepgenModel(model))), "out")
    })
}

/// # Safety
/// `model` must come from [`repgen_model_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn repgen_model_free(model: *mut RepgenModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn repgen_model_vocab_size(model: *const RepgenModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.vocab_size())
}

/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn repgen_scorer_load(path: *const c_char, out: *mut *mut RepgenScorer) -> RepgenStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let scorer = ScorerModel::load(path)?;
        put(out, Box::into_raw(Box::new(RepgenScorer(scorer))), "out")
    })
}

/// # Safety
/// `scorer` must come from [`repgen_scorer_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn repgen_scorer_free(scorer: *mut RepgenScorer) {
    if !scorer.is_null() {
        drop(Box::from_raw(scorer));
    }
}

#[no_mangle]
pub extern "C" fn repgen_rsm_params_default() -> RepgenRsmParams {
    let d = RsmParams::default();
    RepgenRsmParams {
        alpha: d.alpha,
        beta: d.beta,
        beam_size: d.beam_size,
        max_length: 0,
        use_lp: true,
        use_cp: true,
        use_rs: true,
        rs_floor: d.rs_floor,
    }
}

impl From<&RepgenRsmParams> for RsmParams {
    fn from(p: &RepgenRsmParams) -> Self {
        RsmParams {
            alpha: p.alpha,
            beta: p.beta,
            beam_size: p.beam_size,
            max_length: (p.max_length > 0).then_some(p.max_length),
            ablation: Ablation {
                lp: p.use_lp,
                cp: p.use_cp,
                rs: p.use_rs,
            },
            rs_floor: p.rs_floor,
            per_step: false,
        }
    }
}

/// Decodes a response for one utterance given as parallel arrays of
/// `n_tokens` surfaces and POS tags (`noun`, `verb`, ...). Writes a JSON
/// object with `output`, `score`, `terms` and `beam` to `out_json`.
///
/// # Safety
/// `model` must be live; `scorer` may be null; `surfaces` and `tags` must
/// each hold `n_tokens` nul-terminated strings; `params` may be null for
/// defaults; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn repgen_generate(
    model: *const RepgenModel,
    scorer: *const RepgenScorer,
    surfaces: *const *const c_char,
    tags: *const *const c_char,
    n_tokens: usize,
    params: *const RepgenRsmParams,
    out_json: *mut *mut c_char,
) -> RepgenStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let scorer = scorer.as_ref().map(|s| &s.0);
        let surfaces = slice_arg(surfaces, n_tokens, "surfaces")?;
        let tags = slice_arg(tags, n_tokens, "tags")?;
        let mut utterance = Vec::with_capacity(n_tokens);
        for (&s, &t) in surfaces.iter().zip(tags) {
            let pos: Pos = str_arg(t, "tags[i]")?.parse()?;
            utterance.push(Token::new(str_arg(s, "surfaces[i]")?, pos));
        }
        let params = params
            .as_ref()
            .map(RsmParams::from)
            .unwrap_or_default();
        let record = DialogueRecord {
            dialogue_id: "ffi".into(),
            context: Vec::new(),
            utterance,
            references: Vec::new(),
            meta: Default::default(),
        };
        let g = decoder::generate_for_record(&model.0, scorer, &record, &params)?;
        let json = serde_json::to_string(&g).map_err(Error::from)?;
        put(out_json, to_c_string(json)?, "out_json")
    })
}

/// Fills `out_q[0..k]` with the training target distribution for
/// `target`. `r` holds `k` repeat weights and may be null outside
/// weighted mode.
///
/// # Safety
/// `r` (when non-null) and `out_q` must hold `k` elements.
#[no_mangle]
pub unsafe extern "C" fn repgen_wls_target(
    mode: RepgenLossMode,
    target: usize,
    k: usize,
    epsilon: f64,
    gamma: f64,
    r: *const f64,
    out_q: *mut f64,
) -> RepgenStatus {
    guard(|| {
        if out_q.is_null() {
            return Err(null("out_q"));
        }
        let weights = if r.is_null() {
            RepeatWeightVector::zeros(k)
        } else {
            let r = slice_arg(r, k, "r")?;
            RepeatWeightVector::from_scores(k, r.iter().enumerate().map(|(i, &x)| (i as u32, x)))?
        };
        let smoothing = Smoothing {
            mode: match mode {
                RepgenLossMode::OneHot => LossMode::OneHot,
                RepgenLossMode::LabelSmoothing => LossMode::LabelSmoothing,
                RepgenLossMode::Weighted => LossMode::Weighted,
            },
            epsilon,
            gamma,
            renormalize: false,
        };
        let q = wls::build_target_distribution(&smoothing, target, k, &weights)?;
        std::slice::from_raw_parts_mut(out_q, k).copy_from_slice(&q.q);
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn repgen_length_penalty(length: usize, alpha: f64) -> f64 {
    decoder::length_penalty(length, alpha)
}

/// Unclipped coverage penalty over a row-major `rows x cols` attention
/// matrix (one row per response token). `floored` (may be null) reports
/// whether a zero column sum was replaced by `floor`.
///
/// # Safety
/// `attention` must hold `rows * cols` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn repgen_coverage_penalty(
    attention: *const f64,
    rows: usize,
    cols: usize,
    beta: f64,
    floor: f64,
    out: *mut f64,
    floored: *mut bool,
) -> RepgenStatus {
    guard(|| {
        let flat = slice_arg(attention, rows * cols, "attention")?;
        let matrix: Vec<Vec<f64>> = if cols == 0 {
            Vec::new()
        } else {
            flat.chunks(cols).map(<[f64]>::to_vec).collect()
        };
        let c = decoder::coverage_penalty(&matrix, beta, floor);
        if !floored.is_null() {
            floored.write(c.floored);
        }
        put(out, c.value, "out")
    })
}

/// `log max(sum of scores, floor)`.
///
/// # Safety
/// `scores` must hold `n` values.
#[no_mangle]
pub unsafe extern "C" fn repgen_repeat_term(scores: *const f64, n: usize, floor: f64, out: *mut f64) -> RepgenStatus {
    guard(|| {
        let s: f64 = slice_arg(scores, n, "scores")?.iter().sum();
        put(out, s.max(floor).ln(), "out")
    })
}

unsafe fn tokens_of(p: *const c_char, name: &str) -> Result<Vec<String>, Fail> {
    Ok(str_arg(p, name)?.split_whitespace().map(String::from).collect())
}

unsafe fn references_of(refs: *const *const c_char, n_refs: usize) -> Result<Vec<Vec<String>>, Fail> {
    slice_arg(refs, n_refs, "references")?
        .iter()
        .map(|&r| tokens_of(r, "references[i]"))
        .collect()
}

/// ROUGE-N F1 of a whitespace-tokenized candidate, max over references.
///
/// # Safety
/// `candidate` and each of the `n_refs` references must be nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn repgen_rouge_n(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: usize,
    n: usize,
    out: *mut f64,
) -> RepgenStatus {
    guard(|| {
        let cand = tokens_of(candidate, "candidate")?;
        let refs = references_of(references, n_refs)?;
        put(out, evaluation::rouge_n(&cand, &refs, n)?, "out")
    })
}

/// ROUGE-L F1 of a whitespace-tokenized candidate, max over references.
///
/// # Safety
/// As [`repgen_rouge_n`].
#[no_mangle]
pub unsafe extern "C" fn repgen_rouge_l(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: usize,
    out: *mut f64,
) -> RepgenStatus {
    guard(|| {
        let cand = tokens_of(candidate, "candidate")?;
        let refs = references_of(references, n_refs)?;
        put(out, evaluation::rouge_l(&cand, &refs)?, "out")
    })
}

/// Two-sided Wilcoxon rank-sum test.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn repgen_wilcoxon(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    out: *mut RepgenSignificance,
) -> RepgenStatus {
    guard(|| {
        let r = evaluation::wilcoxon_rank_sum(slice_arg(a, na, "a")?, slice_arg(b, nb, "b")?)?;
        let sig = RepgenSignificance {
            statistic: r.statistic,
            p_value: r.p_value,
            exact: r.method == TestMethod::Exact,
        };
        put(out, sig, "out")
    })
}

/// Runs the command-line driver with `argc` arguments (program name
/// first) and returns its exit code.
///
/// # Safety
/// `argv` must hold `argc` nul-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn repgen_cli_main(argc: c_int, argv: *const *const c_char) -> c_int {
    let args: Vec<String> = match slice_arg(argv, argc.max(0) as usize, "argv") {
        Ok(a) => a
            .iter()
            .map(|&p| {
                if p.is_null() {
                    String::new()
                } else {
                    CStr::from_ptr(p).to_string_lossy().into_owned()
                }
            })
            .collect(),
        Err(Fail(_, msg)) => {
            set_error(msg);
            return 2;
        }
    };
    catch_unwind(|| repgen::cli::run(args)).unwrap_or(1)
}
