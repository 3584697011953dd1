//! C ABI for the approxify pipeline.
//!
//! Programs are opaque handles; every call returns an [`ApxStatus`] code and
//! the last failure message is readable through [`apx_last_error`]. Strings
//! returned by this library must be released with [`apx_string_free`].
//!
//! The generated header lands in `include/approxify.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use approxify::energy::{load_trace, simulate_intermittent, CapacitorSpec, SimOptions};
use approxify::interp::{InputCase, PlatformModel};
use approxify::lang::{parse_source, pretty_print, Program};
use approxify::pipeline::{run_pipeline, PipelineError, RunConfig};
use approxify::transform::{apply_technique, enumerate_blocks, ApproxTechnique};

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApxStatus {
    ApxOk = 0,
    ApxErrInvalidArgument = 1,
    ApxErrParse = 2,
    ApxErrIo = 3,
    ApxErrConfig = 4,
    ApxErrRuntime = 5,
    ApxErrNoViableCapacitor = 6,
    ApxErrNoFeasiblePoint = 7,
}

impl From<&PipelineError> for ApxStatus {
    fn from(e: &PipelineError) -> Self {
        match e {
            PipelineError::Config { .. } => ApxStatus::ApxErrConfig,
            PipelineError::Io { .. } => ApxStatus::ApxErrIo,
            PipelineError::Source { .. } | PipelineError::SourceRun { .. } => {
                ApxStatus::ApxErrParse
            }
            PipelineError::NoViableCapacitor { .. } => ApxStatus::ApxErrNoViableCapacitor,
            PipelineError::NoFeasiblePoint => ApxStatus::ApxErrNoFeasiblePoint,
        }
    }
}

/// Opaque parsed program.
pub struct ApxProgram {
    program: Program,
}

/// Summary of one intermittent simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ApxSimStats {
    pub completed: bool,
    pub total_cycles: u64,
    pub logical_cycles: u64,
    pub checkpoints: u64,
    pub reboots: u64,
    pub sim_time_ms: u64,
}

/// Message describing the most recent failure on this thread, or null.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn apx_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match &*slot.borrow() {
        Some(s) => s.as_ptr(),
        None => ptr::null(),
    })
}

/// Release a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by an `apx_*` function that
/// documents this free, and must not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn apx_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn cstr_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, ApxStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(ApxStatus::ApxErrInvalidArgument);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        ApxStatus::ApxErrInvalidArgument
    })
}

/// Parse ApproxC source text into a program handle.
///
/// # Safety
/// `source` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apx_program_parse(
    source: *const c_char,
    out: *mut *mut ApxProgram,
) -> ApxStatus {
    clear_error();
    if out.is_null() {
        set_error("out pointer is null");
        return ApxStatus::ApxErrInvalidArgument;
    }
    let text = match cstr_arg(source, "source") {
        Ok(t) => t,
        Err(s) => return s,
    };
    match parse_source(text) {
        Ok(program) => {
            *out = Box::into_raw(Box::new(ApxProgram { program }));
            ApxStatus::ApxOk
        }
        Err(e) => {
            set_error(e.to_string());
            ApxStatus::ApxErrParse
        }
    }
}

/// Parse an `.axc` file into a program handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apx_program_parse_file(
    path: *const c_char,
    out: *mut *mut ApxProgram,
) -> ApxStatus {
    clear_error();
    let path = match cstr_arg(path, "path") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("cannot read `{path}`: {e}"));
            return ApxStatus::ApxErrIo;
        }
    };
    let c_text = match CString::new(text) {
        Ok(t) => t,
        Err(_) => {
            set_error("source contains NUL bytes");
            return ApxStatus::ApxErrParse;
        }
    };
    apx_program_parse(c_text.as_ptr(), out)
}

/// Destroy a program handle.
///
/// # Safety
/// `p` must come from `apx_program_parse*` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn apx_program_free(p: *mut ApxProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Canonical source text of a program. Free with `apx_string_free`.
///
/// # Safety
/// `p` must be a live program handle.
#[no_mangle]
pub unsafe extern "C" fn apx_program_pretty(p: *const ApxProgram) -> *mut c_char {
    if p.is_null() {
        set_error("program handle is null");
        return ptr::null_mut();
    }
    let text = pretty_print(&(*p).program);
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Number of approximable blocks (loops and functions).
///
/// # Safety
/// `p` must be a live program handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apx_program_block_count(
    p: *const ApxProgram,
    out: *mut usize,
) -> ApxStatus {
    clear_error();
    if p.is_null() || out.is_null() {
        set_error("null argument");
        return ApxStatus::ApxErrInvalidArgument;
    }
    *out = enumerate_blocks(&(*p).program).len();
    ApxStatus::ApxOk
}

/// JSON description of the approximable blocks. Free with `apx_string_free`.
///
/// # Safety
/// `p` must be a live program handle.
#[no_mangle]
pub unsafe extern "C" fn apx_program_sites_json(p: *const ApxProgram) -> *mut c_char {
    if p.is_null() {
        set_error("program handle is null");
        return ptr::null_mut();
    }
    let blocks = enumerate_blocks(&(*p).program);
    let items: Vec<serde_json::Value> = blocks
        .iter()
        .map(|b| {
            serde_json::json!({
                "id": b.id,
                "kind": b.kind.name(),
                "function": b.function,
                "path": b.path.to_string(),
                "memoizable": b.memoizable,
            })
        })
        .collect();
    let text = serde_json::to_string_pretty(&items).expect("blocks serialize");
    CString::new(text)
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Apply one approximation technique to one block, producing a new handle.
/// `technique` is one of `truncation`, `sampling`, `random`, `memo`.
///
/// # Safety
/// `p` must be a live program handle; `technique` a valid string; `out` a
/// valid pointer.
#[no_mangle]
pub unsafe extern "C" fn apx_program_transform(
    p: *const ApxProgram,
    technique: *const c_char,
    param: f64,
    block_id: u32,
    capacity: u32,
    seed: u64,
    out: *mut *mut ApxProgram,
) -> ApxStatus {
    clear_error();
    if p.is_null() || out.is_null() {
        set_error("null argument");
        return ApxStatus::ApxErrInvalidArgument;
    }
    let technique = match cstr_arg(technique, "technique") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let technique = match technique {
        "truncation" => ApproxTechnique::Truncation { factor: param },
        "sampling" => ApproxTechnique::Sampling {
            factor: param as u32,
        },
        "random" => ApproxTechnique::Random {
            threshold: param,
            seed,
        },
        "memo" | "memoization" => ApproxTechnique::Memoization {
            tolerance: param,
            capacity,
        },
        other => {
            set_error(format!("unknown technique `{other}`"));
            return ApxStatus::ApxErrInvalidArgument;
        }
    };
    let program = &(*p).program;
    let blocks = enumerate_blocks(program);
    let Some(block) = blocks.iter().find(|b| b.id == block_id) else {
        set_error(format!("no block with id {block_id}"));
        return ApxStatus::ApxErrInvalidArgument;
    };
    match apply_technique(program, block, &technique) {
        Ok(rewritten) => {
            *out = Box::into_raw(Box::new(ApxProgram { program: rewritten }));
            ApxStatus::ApxOk
        }
        Err(e) => {
            set_error(e.to_string());
            ApxStatus::ApxErrInvalidArgument
        }
    }
}

/// Simulate one intermittent run of a source file on a platform preset.
///
/// # Safety
/// All pointer arguments must be valid; `stats` must point to writable
/// memory.
#[no_mangle]
pub unsafe extern "C" fn apx_simulate_file(
    source_path: *const c_char,
    trace_path: *const c_char,
    cap_uf: f64,
    platform_preset: *const c_char,
    seed: u64,
    stats: *mut ApxSimStats,
) -> ApxStatus {
    clear_error();
    if stats.is_null() {
        set_error("stats pointer is null");
        return ApxStatus::ApxErrInvalidArgument;
    }
    let source_path = match cstr_arg(source_path, "source_path") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let trace_path = match cstr_arg(trace_path, "trace_path") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let preset = match cstr_arg(platform_preset, "platform_preset") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let platform = match PlatformModel::preset(preset) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return ApxStatus::ApxErrConfig;
        }
    };
    let text = match std::fs::read_to_string(source_path) {
        Ok(t) => t,
        Err(e) => {
            set_error(format!("cannot read `{source_path}`: {e}"));
            return ApxStatus::ApxErrIo;
        }
    };
    let program = match parse_source(&text) {
        Ok(p) => p,
        Err(e) => {
            set_error(e.to_string());
            return ApxStatus::ApxErrParse;
        }
    };
    let trace = match load_trace(Path::new(trace_path)) {
        Ok(t) => t.with_repeat(true),
        Err(e) => {
            set_error(e.to_string());
            return ApxStatus::ApxErrConfig;
        }
    };
    let cap = CapacitorSpec::from_uf(cap_uf, &platform);
    let opts = SimOptions {
        seed,
        watchdog_cycles: Some(1_000_000_000),
        ..Default::default()
    };
    match simulate_intermittent(
        &program,
        &InputCase::default(),
        &platform,
        &cap,
        &trace,
        &opts,
    ) {
        Ok(res) => {
            *stats = ApxSimStats {
                completed: res.completed,
                total_cycles: res.total_cycles,
                logical_cycles: res.logical_cycles,
                checkpoints: res.checkpoints,
                reboots: res.reboots,
                sim_time_ms: res.sim_time_ms,
            };
            ApxStatus::ApxOk
        }
        Err(e) => {
            set_error(e.to_string());
            ApxStatus::ApxErrRuntime
        }
    }
}

/// Run the whole pipeline from a JSON config file; artifacts are written to
/// the configured output directory.
///
/// # Safety
/// `config_path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn apx_run_pipeline(config_path: *const c_char) -> ApxStatus {
    clear_error();
    let config_path = match cstr_arg(config_path, "config_path") {
        Ok(t) => t,
        Err(s) => return s,
    };
    let (config, base) = match RunConfig::load(config_path) {
        Ok(v) => v,
        Err(e) => {
            let status = ApxStatus::from(&e);
            set_error(e.to_string());
            return status;
        }
    };
    match run_pipeline(&config, &base) {
        Ok(_) => ApxStatus::ApxOk,
        Err(e) => {
            let status = ApxStatus::from(&e);
            set_error(e.to_string());
            status
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    fn last_error_string() -> String {
        let p = apx_last_error();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p).to_string_lossy().into_owned() }
    }

    #[test]
    fn parse_pretty_roundtrip_through_abi() {
        let src = cs("func main() { emit_num(1 + 2); }");
        let mut handle: *mut ApxProgram = ptr::null_mut();
        let status = unsafe { apx_program_parse(src.as_ptr(), &mut handle) };
        assert_eq!(status, ApxStatus::ApxOk);
        assert!(!handle.is_null());

        let text = unsafe { apx_program_pretty(handle) };
        assert!(!text.is_null());
        let printed = unsafe { CStr::from_ptr(text) }
            .to_str()
            .unwrap()
            .to_string();
        assert!(printed.contains("emit_num(1 + 2);"), "{printed}");
        unsafe {
            apx_string_free(text);
            apx_program_free(handle);
        }
    }

    #[test]
    fn parse_error_sets_message() {
        let src = cs("func main() { x = 1; }");
        let mut handle: *mut ApxProgram = ptr::null_mut();
        let status = unsafe { apx_program_parse(src.as_ptr(), &mut handle) };
        assert_eq!(status, ApxStatus::ApxErrParse);
        assert!(last_error_string().contains("undeclared"));
    }

    #[test]
    fn transform_and_block_introspection() {
        let src = cs("func main() { var x: int = 0; \
             for (var i: int = 0; i < 10; i = i + 1) { x = x + 1; } \
             emit_num(x); }");
        let mut handle: *mut ApxProgram = ptr::null_mut();
        assert_eq!(
            unsafe { apx_program_parse(src.as_ptr(), &mut handle) },
            ApxStatus::ApxOk
        );

        let mut count = 0usize;
        assert_eq!(
            unsafe { apx_program_block_count(handle, &mut count) },
            ApxStatus::ApxOk
        );
        assert_eq!(count, 1);

        let json = unsafe { apx_program_sites_json(handle) };
        let parsed: serde_json::Value =
            serde_json::from_str(unsafe { CStr::from_ptr(json) }.to_str().unwrap()).unwrap();
        assert_eq!(parsed[0]["kind"], "counted-loop");
        unsafe { apx_string_free(json) };

        let technique = cs("truncation");
        let mut rewritten: *mut ApxProgram = ptr::null_mut();
        let status = unsafe {
            apx_program_transform(handle, technique.as_ptr(), 0.5, 0, 16, 0, &mut rewritten)
        };
        assert_eq!(status, ApxStatus::ApxOk);
        let text = unsafe { apx_program_pretty(rewritten) };
        let printed = unsafe { CStr::from_ptr(text) }
            .to_str()
            .unwrap()
            .to_string();
        assert!(printed.contains("trunc_keep"), "{printed}");
        unsafe {
            apx_string_free(text);
            apx_program_free(rewritten);
            apx_program_free(handle);
        }
    }

    #[test]
    fn simulate_file_reports_stats() {
        let dir = tempfile::tempdir().unwrap();
        let source = dir.path().join("bench.axc");
        std::fs::write(
            &source,
            "func main() { var x: int = 0; \
             for (var i: int = 0; i < 2000; i = i + 1) { x = x + 1; } \
             emit_num(x); }",
        )
        .unwrap();
        let trace = dir.path().join("trace.csv");
        std::fs::write(&trace, "time_ms,volts\n0,5.0\n1000,5.0\n").unwrap();

        let source = cs(source.to_str().unwrap());
        let trace = cs(trace.to_str().unwrap());
        let preset = cs("cortex-m");
        let mut stats = ApxSimStats::default();
        let status = unsafe {
            apx_simulate_file(
                source.as_ptr(),
                trace.as_ptr(),
                220.0,
                preset.as_ptr(),
                1,
                &mut stats,
            )
        };
        assert_eq!(status, ApxStatus::ApxOk);
        assert!(stats.completed);
        assert!(stats.checkpoints > 0);
        assert!(stats.total_cycles >= stats.logical_cycles);
    }

    #[test]
    fn run_pipeline_from_config_through_abi() {
        let dir = tempfile::tempdir().unwrap();
        approxify::pipeline::corpus::materialize(dir.path()).unwrap();
        let config = cs(dir
            .path()
            .join("strsearch/strsearch_config.json")
            .to_str()
            .unwrap());
        let status = unsafe { apx_run_pipeline(config.as_ptr()) };
        assert_eq!(status, ApxStatus::ApxOk);
        assert!(dir.path().join("strsearch/out/selection.json").exists());
    }

    #[test]
    fn null_arguments_are_rejected() {
        let mut handle: *mut ApxProgram = ptr::null_mut();
        assert_eq!(
            unsafe { apx_program_parse(ptr::null(), &mut handle) },
            ApxStatus::ApxErrInvalidArgument
        );
        let mut count = 0usize;
        assert_eq!(
            unsafe { apx_program_block_count(ptr::null(), &mut count) },
            ApxStatus::ApxErrInvalidArgument
        );
    }
}
