// Copyright (c) The rollup-sim Contributors
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the rollup-sim core.
//!
//! Handles are opaque pointers created by `rs_*_new` style constructors and
//! released with the matching `rs_*_free`. Every fallible call returns an
//! [`RsStatus`]; on failure a message is kept per thread and can be read
//! with [`rs_last_error`]. Byte outputs use caller buffers: the required
//! length is always written to `out_len`, and `RS_STATUS_BUFFER_TOO_SMALL` is
//! returned when `cap` is short.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use rollup_sim::codec::{Decode, Encode};
use rollup_sim::crypto::{hash, smt, Digest, Domain, MerkleProof, SmtKey, SparseMerkleTree};
use rollup_sim::kzg::{
    encode_blob, open_at, verify_opening, EncodingParams, FieldElement, KzgCommitment, OpeningProof, TrustedSetup,
    FIELD_BYTES, G1_BYTES,
};
use rollup_sim::sim::{check_transcript, expectation_mismatches, run_scenario, Scenario, Transcript};

pub const RS_DIGEST_BYTES: usize = 32;
pub const RS_COMMITMENT_BYTES: usize = 48;
pub const RS_FIELD_BYTES: usize = 32;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Decode = 4,
    Kzg = 5,
    Scenario = 6,
    CheckFailed = 7,
    ExpectationMismatch = 8,
    Panic = 9,
}

pub struct RsSmt(SparseMerkleTree);

pub struct RsSetup {
    setup: TrustedSetup,
    params: EncodingParams,
}

pub struct RsTranscript(Transcript);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: RsStatus, msg: impl Into<String>) -> RsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
    status
}

fn guard(f: impl FnOnce() -> RsStatus) -> RsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(RsStatus::Panic, "internal panic"),
    }
}

unsafe fn bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if len == 0 {
        Some(&[])
    } else if data.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(data, len))
    }
}

unsafe fn array<'a, const N: usize>(p: *const u8) -> Option<&'a [u8; N]> {
    p.cast::<[u8; N]>().as_ref()
}

unsafe fn write_array<const N: usize>(out: *mut u8, v: &[u8; N]) {
    ptr::copy_nonoverlapping(v.as_ptr(), out, N);
}

unsafe fn write_buf(v: &[u8], out: *mut u8, cap: usize, out_len: *mut usize) -> RsStatus {
    if out_len.is_null() {
        return fail(RsStatus::NullPointer, "out_len is null");
    }
    *out_len = v.len();
    if v.len() > cap {
        return fail(RsStatus::BufferTooSmall, format!("need {} bytes, have {cap}", v.len()));
    }
    if !v.is_empty() {
        if out.is_null() {
            return fail(RsStatus::NullPointer, "output buffer is null");
        }
        ptr::copy_nonoverlapping(v.as_ptr(), out, v.len());
    }
    RsStatus::Ok
}

macro_rules! req {
    ($e:expr, $what:literal) => {
        match $e {
            Some(v) => v,
            None => return fail(RsStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

/// Copies the calling thread's last error message as a NUL-terminated
/// string. Returns the message length excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// SHA-256 of `domain || data`.
///
/// # Safety
/// `data` must point to `len` readable bytes, `out` to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_hash(domain: u8, data: *const u8, len: usize, out: *mut u8) -> RsStatus {
    guard(|| {
        let data = req!(bytes(data, len), "data");
        req!(out.as_mut(), "out");
        let Ok(d) = Domain::try_from(domain) else {
            return fail(RsStatus::InvalidArgument, format!("unknown domain tag {domain}"));
        };
        write_array(out, &hash(d, data).0);
        RsStatus::Ok
    })
}

/// Creates an empty sparse Merkle tree.
#[no_mangle]
pub extern "C" fn rs_smt_new() -> *mut RsSmt {
    Box::into_raw(Box::new(RsSmt(SparseMerkleTree::new())))
}

/// # Safety
/// `tree` must be null or a handle from [`rs_smt_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_free(tree: *mut RsSmt) {
    if !tree.is_null() {
        drop(Box::from_raw(tree));
    }
}

/// Sets `key` to `value`, or removes it when `value` is null.
///
/// # Safety
/// `tree` must be a live handle; `key` and non-null `value` point to 32 bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_insert(tree: *mut RsSmt, key: *const u8, value: *const u8) -> RsStatus {
    guard(|| {
        let tree = req!(tree.as_mut(), "tree");
        let key = req!(array::<32>(key), "key");
        let value = array::<32>(value).map(|v| Digest(*v));
        tree.0.insert(SmtKey(Digest(*key)), value);
        RsStatus::Ok
    })
}

/// # Safety
/// `tree` must be a live handle; `out` points to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_root(tree: *const RsSmt, out: *mut u8) -> RsStatus {
    guard(|| {
        let tree = req!(tree.as_ref(), "tree");
        req!(out.as_mut(), "out");
        write_array(out, &tree.0.root().0);
        RsStatus::Ok
    })
}

/// Number of present leaves, or 0 for a null handle.
///
/// # Safety
/// `tree` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_len(tree: *const RsSmt) -> usize {
    tree.as_ref().map_or(0, |t| t.0.len())
}

/// Writes the encoded inclusion or non-inclusion proof for `key`.
///
/// # Safety
/// `tree` must be a live handle; `key` points to 32 bytes; `out` to `cap`
/// writable bytes; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_prove(
    tree: *const RsSmt,
    key: *const u8,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RsStatus {
    guard(|| {
        let tree = req!(tree.as_ref(), "tree");
        let key = req!(array::<32>(key), "key");
        write_buf(&tree.0.prove(&SmtKey(Digest(*key))).to_bytes(), out, cap, out_len)
    })
}

/// Checks an encoded proof against `root`. `*valid` is set to 1 or 0.
///
/// # Safety
/// `root` points to 32 bytes, `proof` to `len` bytes, `valid` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_smt_verify(root: *const u8, proof: *const u8, len: usize, valid: *mut u8) -> RsStatus {
    guard(|| {
        let root = req!(array::<32>(root), "root");
        let proof = req!(bytes(proof, len), "proof");
        let valid = req!(valid.as_mut(), "valid");
        match MerkleProof::from_bytes(proof) {
            Ok(p) => {
                *valid = u8::from(smt::verify(&Digest(*root), &p));
                RsStatus::Ok
            }
            Err(e) => fail(RsStatus::Decode, e.to_string()),
        }
    })
}

/// Derives a test-mode trusted setup for polynomials of degree at most
/// `degree_bound`.
///
/// # Safety
/// `seed` points to `seed_len` bytes; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_setup_new(
    degree_bound: usize,
    seed: *const u8,
    seed_len: usize,
    out: *mut *mut RsSetup,
) -> RsStatus {
    guard(|| {
        let seed = req!(bytes(seed, seed_len), "seed");
        let out = req!(out.as_mut(), "out");
        match rollup_sim::kzg::setup(degree_bound, seed) {
            Ok(setup) => {
                *out = Box::into_raw(Box::new(RsSetup { setup, params: EncodingParams::new(degree_bound) }));
                RsStatus::Ok
            }
            Err(e) => fail(RsStatus::Kzg, e.to_string()),
        }
    })
}

/// # Safety
/// `setup` must be null or a handle from [`rs_setup_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_setup_free(setup: *mut RsSetup) {
    if !setup.is_null() {
        drop(Box::from_raw(setup));
    }
}

/// Largest blob the setup can commit to.
///
/// # Safety
/// `setup` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn rs_setup_max_blob_bytes(setup: *const RsSetup) -> usize {
    setup.as_ref().map_or(0, |s| s.params.max_blob_bytes())
}

/// Commits to a blob. Writes 48 compressed bytes to `out`.
///
/// # Safety
/// `setup` must be a live handle; `blob` points to `len` bytes; `out` to 48
/// writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_commit_blob(setup: *const RsSetup, blob: *const u8, len: usize, out: *mut u8) -> RsStatus {
    guard(|| {
        let s = req!(setup.as_ref(), "setup");
        let blob = req!(bytes(blob, len), "blob");
        req!(out.as_mut(), "out");
        match rollup_sim::sim::bundle::commit_blob(&s.setup, &s.params, blob) {
            Ok(cm) => {
                write_array(out, &cm.to_bytes());
                RsStatus::Ok
            }
            Err(e) => fail(RsStatus::Kzg, e.to_string()),
        }
    })
}

/// Opens the blob polynomial at `point`. Writes the encoded opening proof.
///
/// # Safety
/// `setup` must be a live handle; `blob` points to `len` bytes; `out` to
/// `cap` writable bytes; `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_open_blob(
    setup: *const RsSetup,
    blob: *const u8,
    len: usize,
    point: u64,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RsStatus {
    guard(|| {
        let s = req!(setup.as_ref(), "setup");
        let blob = req!(bytes(blob, len), "blob");
        let proof = encode_blob(blob, &s.params).and_then(|p| open_at(&s.setup, &p, FieldElement::from_u64(point)));
        match proof {
            Ok(p) => write_buf(&p.to_bytes(), out, cap, out_len),
            Err(e) => fail(RsStatus::Kzg, e.to_string()),
        }
    })
}

/// Verifies an encoded opening proof against a 48-byte commitment.
/// `*valid` is set to 1 or 0.
///
/// # Safety
/// `setup` must be a live handle; `commitment` points to 48 bytes; `proof`
/// to `len` bytes; `valid` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_verify_opening(
    setup: *const RsSetup,
    commitment: *const u8,
    proof: *const u8,
    len: usize,
    valid: *mut u8,
) -> RsStatus {
    guard(|| {
        let s = req!(setup.as_ref(), "setup");
        let cm = req!(array::<G1_BYTES>(commitment), "commitment");
        let proof = req!(bytes(proof, len), "proof");
        let valid = req!(valid.as_mut(), "valid");
        let Some(cm) = KzgCommitment::from_bytes(cm) else {
            return fail(RsStatus::Decode, "commitment is not a valid G1 point");
        };
        match OpeningProof::from_bytes(proof) {
            Ok(p) => {
                *valid = u8::from(verify_opening(&s.setup, &cm, &p));
                RsStatus::Ok
            }
            Err(e) => fail(RsStatus::Decode, e.to_string()),
        }
    })
}

/// Runs a scenario given as NUL-terminated TOML. A nonzero `seed` overrides
/// the scenario seed. On `Ok` or `ExpectationMismatch` a transcript handle
/// is stored in `*out`.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_run_scenario(toml: *const c_char, seed: u64, out: *mut *mut RsTranscript) -> RsStatus {
    guard(|| {
        if toml.is_null() {
            return fail(RsStatus::NullPointer, "toml is null");
        }
        let out = req!(out.as_mut(), "out");
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(toml).to_str() else {
            return fail(RsStatus::InvalidArgument, "scenario is not valid UTF-8");
        };
        let mut scenario = match Scenario::from_toml(text) {
            Ok(s) => s,
            Err(e) => return fail(RsStatus::Scenario, e.to_string()),
        };
        if seed != 0 {
            scenario.seed = seed;
        }
        match run_scenario(&scenario) {
            Ok(t) => {
                let mismatches = expectation_mismatches(&t);
                *out = Box::into_raw(Box::new(RsTranscript(t)));
                if mismatches.is_empty() {
                    RsStatus::Ok
                } else {
                    fail(RsStatus::ExpectationMismatch, mismatches.join("; "))
                }
            }
            Err(e) => fail(RsStatus::Scenario, e.to_string()),
        }
    })
}

/// # Safety
/// `t` must be null or a handle from [`rs_run_scenario`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rs_transcript_free(t: *mut RsTranscript) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Writes the canonical transcript file contents.
///
/// # Safety
/// `t` must be a live handle; `out` points to `cap` writable bytes;
/// `out_len` is writable.
#[no_mangle]
pub unsafe extern "C" fn rs_transcript_bytes(
    t: *const RsTranscript,
    out: *mut u8,
    cap: usize,
    out_len: *mut usize,
) -> RsStatus {
    guard(|| {
        let t = req!(t.as_ref(), "transcript");
        write_buf(&t.0.to_bytes(), out, cap, out_len)
    })
}

/// Writes the 32-byte final contract state digest.
///
/// # Safety
/// `t` must be a live handle; `out` points to 32 writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_transcript_final_state(t: *const RsTranscript, out: *mut u8) -> RsStatus {
    guard(|| {
        let t = req!(t.as_ref(), "transcript");
        req!(out.as_mut(), "out");
        write_array(out, &t.0.final_state_digest.0);
        RsStatus::Ok
    })
}

/// Re-verifies transcript file contents. On success writes the number of
/// replayed messages and the final state digest; each output may be null.
///
/// # Safety
/// `data` points to `len` bytes; non-null outputs are writable, `final_state`
/// for 32 bytes.
#[no_mangle]
pub unsafe extern "C" fn rs_check_transcript(
    data: *const u8,
    len: usize,
    messages: *mut u64,
    final_state: *mut u8,
) -> RsStatus {
    guard(|| {
        let data = req!(bytes(data, len), "data");
        match check_transcript(data) {
            Ok(r) => {
                if let Some(m) = messages.as_mut() {
                    *m = r.messages as u64;
                }
                if !final_state.is_null() {
                    write_array(final_state, &r.final_state_digest.0);
                }
                RsStatus::Ok
            }
            Err(e) => fail(RsStatus::CheckFailed, e.to_string()),
        }
    })
}

const _: () = assert!(RS_COMMITMENT_BYTES == G1_BYTES && RS_FIELD_BYTES == FIELD_BYTES);
