/* Reference custom mutator: deterministic havoc over the input buffer.
 *
 * Serves as the golden fixture for mutator loading, symbol checks and
 * validation runs, and as the example snippet handed to code generation.
 * All randomness derives from the init seed (xorshift64), so a fixed seed
 * replays the exact mutation sequence.
 */

#include <stdlib.h>
#include <string.h>

#include "custom_mutator.h"

#define OUT_CAP (1 << 16)

typedef struct {
    uint64_t rng;
    uint8_t *out;
} ref_state;

static uint64_t next_rand(ref_state *st)
{
    uint64_t x = st->rng;
    x ^= x << 13;
    x ^= x >> 7;
    x ^= x << 17;
    st->rng = x;
    return x;
}

void *afl_custom_init(void *engine, unsigned int seed)
{
    ref_state *st;

    (void)engine;
    st = calloc(1, sizeof(*st));
    if (st == NULL)
        return NULL;
    st->rng = seed ? seed : 0x9e3779b97f4a7c15ull;
    st->out = malloc(OUT_CAP);
    if (st->out == NULL) {
        free(st);
        return NULL;
    }
    return st;
}

size_t afl_custom_fuzz(void *data, uint8_t *buf, size_t buf_size,
                       uint8_t **out_buf, uint8_t *add_buf,
                       size_t add_buf_size, size_t max_size)
{
    ref_state *st = data;
    size_t n = buf_size;
    size_t cap = max_size < OUT_CAP ? max_size : OUT_CAP;
    unsigned int rounds, r;

    if (n > cap)
        n = cap;
    memcpy(st->out, buf, n);

    rounds = 1 + (unsigned int)(next_rand(st) % 4);
    for (r = 0; r < rounds; r++) {
        switch (next_rand(st) % 4) {
        case 0: /* flip one bit */
            if (n > 0)
                st->out[next_rand(st) % n] ^= (uint8_t)(1u << (next_rand(st) % 8));
            break;
        case 1: /* overwrite one byte */
            if (n > 0)
                st->out[next_rand(st) % n] = (uint8_t)next_rand(st);
            break;
        case 2: /* append a few bytes */
            if (n + 4 <= cap) {
                uint64_t v = next_rand(st);
                memcpy(st->out + n, &v, 4);
                n += 4;
            }
            break;
        case 3: /* splice a donor byte in */
            if (add_buf != NULL && add_buf_size > 0 && n > 0)
                st->out[next_rand(st) % n] = add_buf[next_rand(st) % add_buf_size];
            break;
        }
    }

    *out_buf = st->out;
    return n;
}

void afl_custom_deinit(void *data)
{
    ref_state *st = data;

    if (st != NULL) {
        free(st->out);
        free(st);
    }
}
