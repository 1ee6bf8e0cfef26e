#ifndef CHAINFUZZ_CUSTOM_MUTATOR_H
#define CHAINFUZZ_CUSTOM_MUTATOR_H

#include <stddef.h>
#include <stdint.h>

/*
 * Custom-mutator ABI understood by the chainfuzz engines.
 *
 * A mutator is a shared object exporting exactly these three symbols.  The
 * builtin engine loads it from the campaign config; the external-engine
 * adapter exports its path via AFL_CUSTOM_MUTATOR_LIBRARY, so the same
 * object plugs into AFL++ unchanged.
 *
 * afl_custom_init
 *   engine  opaque engine handle; the builtin engine passes NULL — never
 *           dereference it
 *   seed    32-bit seed; all randomness must derive from it
 *   returns a state pointer handed back to the other entry points
 *
 * afl_custom_fuzz
 *   data          state pointer from afl_custom_init
 *   buf/buf_size  the input to mutate (do not write through buf)
 *   out_buf       on return, *out_buf points at mutator-owned storage that
 *                 stays valid until the next call
 *   add_buf/add_buf_size  optional donor input for splicing (add_buf may be
 *                 NULL with size 0)
 *   max_size      hard cap on the returned size; returning more is an ABI
 *                 violation and fails validation
 *   returns       number of valid bytes at *out_buf; 0 skips the round
 *
 * afl_custom_deinit
 *   releases everything owned by the state pointer
 */

void *afl_custom_init(void *engine, unsigned int seed);

size_t afl_custom_fuzz(void *data, uint8_t *buf, size_t buf_size,
                       uint8_t **out_buf, uint8_t *add_buf,
                       size_t add_buf_size, size_t max_size);

void afl_custom_deinit(void *data);

#endif /* CHAINFUZZ_CUSTOM_MUTATOR_H */
