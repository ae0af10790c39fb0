/* Copyright (c) The rollup-sim Contributors */
/* SPDX-License-Identifier: Apache-2.0 */

#ifndef ROLLUP_SIM_H
#define ROLLUP_SIM_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RS_DIGEST_BYTES 32

#define RS_COMMITMENT_BYTES 48

#define RS_FIELD_BYTES 32

// Result codes.
typedef enum RsStatus {
  RS_STATUS_OK = 0,
  RS_STATUS_NULL_POINTER = 1,
  RS_STATUS_INVALID_ARGUMENT = 2,
  RS_STATUS_BUFFER_TOO_SMALL = 3,
  RS_STATUS_DECODE = 4,
  RS_STATUS_KZG = 5,
  RS_STATUS_SCENARIO = 6,
  RS_STATUS_CHECK_FAILED = 7,
  RS_STATUS_EXPECTATION_MISMATCH = 8,
  RS_STATUS_PANIC = 9,
} RsStatus;

typedef struct RsSetup RsSetup;

typedef struct RsSmt RsSmt;

typedef struct RsTranscript RsTranscript;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message as a NUL-terminated
// string. Returns the message length excluding the terminator.
//
// # Safety
// `buf` must be null or point to `cap` writable bytes.
size_t rs_last_error(char *buf, size_t cap);

// SHA-256 of `domain || data`.
//
// # Safety
// `data` must point to `len` readable bytes, `out` to 32 writable bytes.
enum RsStatus rs_hash(uint8_t domain, const uint8_t *data, size_t len, uint8_t *out);

// Creates an empty sparse Merkle tree.
struct RsSmt *rs_smt_new(void);

// # Safety
// `tree` must be null or a handle from [`rs_smt_new`] not yet freed.
void rs_smt_free(struct RsSmt *tree);

// Sets `key` to `value`, or removes it when `value` is null.
//
// # Safety
// `tree` must be a live handle; `key` and non-null `value` point to 32 bytes.
enum RsStatus rs_smt_insert(struct RsSmt *tree, const uint8_t *key, const uint8_t *value);

// # Safety
// `tree` must be a live handle; `out` points to 32 writable bytes.
enum RsStatus rs_smt_root(const struct RsSmt *tree, uint8_t *out);

// Number of present leaves, or 0 for a null handle.
//
// # Safety
// `tree` must be null or a live handle.
size_t rs_smt_len(const struct RsSmt *tree);

// Writes the encoded inclusion or non-inclusion proof for `key`.
//
// # Safety
// `tree` must be a live handle; `key` points to 32 bytes; `out` to `cap`
// writable bytes; `out_len` is writable.
enum RsStatus rs_smt_prove(const struct RsSmt *tree,
                           const uint8_t *key,
                           uint8_t *out,
                           size_t cap,
                           size_t *out_len);

// Checks an encoded proof against `root`. `*valid` is set to 1 or 0.
//
// # Safety
// `root` points to 32 bytes, `proof` to `len` bytes, `valid` is writable.
enum RsStatus rs_smt_verify(const uint8_t *root, const uint8_t *proof, size_t len, uint8_t *valid);

// Derives a test-mode trusted setup for polynomials of degree at most
// `degree_bound`.
//
// # Safety
// `seed` points to `seed_len` bytes; `out` is writable.
enum RsStatus rs_setup_new(size_t degree_bound,
                           const uint8_t *seed,
                           size_t seed_len,
                           struct RsSetup **out);

// # Safety
// `setup` must be null or a handle from [`rs_setup_new`] not yet freed.
void rs_setup_free(struct RsSetup *setup);

// Largest blob the setup can commit to.
//
// # Safety
// `setup` must be null or a live handle.
size_t rs_setup_max_blob_bytes(const struct RsSetup *setup);

// Commits to a blob. Writes 48 compressed bytes to `out`.
//
// # Safety
// `setup` must be a live handle; `blob` points to `len` bytes; `out` to 48
// writable bytes.
enum RsStatus rs_commit_blob(const struct RsSetup *setup,
                             const uint8_t *blob,
                             size_t len,
                             uint8_t *out);

// Opens the blob polynomial at `point`. Writes the encoded opening proof.
//
// # Safety
// `setup` must be a live handle; `blob` points to `len` bytes; `out` to
// `cap` writable bytes; `out_len` is writable.
enum RsStatus rs_open_blob(const struct RsSetup *setup,
                           const uint8_t *blob,
                           size_t len,
                           uint64_t point,
                           uint8_t *out,
                           size_t cap,
                           size_t *out_len);

// Verifies an encoded opening proof against a 48-byte commitment.
// `*valid` is set to 1 or 0.
//
// # Safety
// `setup` must be a live handle; `commitment` points to 48 bytes; `proof`
// to `len` bytes; `valid` is writable.
enum RsStatus rs_verify_opening(const struct RsSetup *setup,
                                const uint8_t *commitment,
                                const uint8_t *proof,
                                size_t len,
                                uint8_t *valid);

// Runs a scenario given as NUL-terminated TOML. A nonzero `seed` overrides
// the scenario seed. On `Ok` or `ExpectationMismatch` a transcript handle
// is stored in `*out`.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` is writable.
enum RsStatus rs_run_scenario(const char *toml, uint64_t seed, struct RsTranscript **out);

// # Safety
// `t` must be null or a handle from [`rs_run_scenario`] not yet freed.
void rs_transcript_free(struct RsTranscript *t);

// Writes the canonical transcript file contents.
//
// # Safety
// `t` must be a live handle; `out` points to `cap` writable bytes;
// `out_len` is writable.
enum RsStatus rs_transcript_bytes(const struct RsTranscript *t,
                                  uint8_t *out,
                                  size_t cap,
                                  size_t *out_len);

// Writes the 32-byte final contract state digest.
//
// # Safety
// `t` must be a live handle; `out` points to 32 writable bytes.
enum RsStatus rs_transcript_final_state(const struct RsTranscript *t, uint8_t *out);

// Re-verifies transcript file contents. On success writes the number of
// replayed messages and the final state digest; each output may be null.
//
// # Safety
// `data` points to `len` bytes; non-null outputs are writable, `final_state`
// for 32 bytes.
enum RsStatus rs_check_transcript(const uint8_t *data,
                                  size_t len,
                                  uint64_t *messages,
                                  uint8_t *final_state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROLLUP_SIM_H */
