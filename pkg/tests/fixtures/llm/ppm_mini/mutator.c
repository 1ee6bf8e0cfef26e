/* Mutator for mini-PPM rasters: preserves the header that satisfies the
 * chain conditions and pushes sample bytes above maxval so the row reader
 * indexes an unwired rescale bucket. */

#include <stdint.h>
#include <stdlib.h>
#include <string.h>

#define HEADER_LEN 11 /* "P6\n2 1 64\nR" as produced by the seed script */

typedef struct {
    uint64_t rng;
    uint8_t *out;
    size_t cap;
} ppm_state;

static uint64_t ppm_rand(ppm_state *st)
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
    ppm_state *st;

    (void)engine;
    st = calloc(1, sizeof(*st));
    if (st == NULL)
        return NULL;
    st->rng = seed ? seed : 0x9977;
    st->cap = 4096;
    st->out = malloc(st->cap);
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
    ppm_state *st = data;
    size_t n = buf_size;
    size_t cap = max_size < st->cap ? max_size : st->cap;
    size_t pos;

    (void)add_buf;
    (void)add_buf_size;
    if (n > cap)
        n = cap;
    if (n <= HEADER_LEN)
        return 0;
    memcpy(st->out, buf, n);

    /* push one sample byte above maxval (header advertises maxval 64) */
    pos = HEADER_LEN + (size_t)(ppm_rand(st) % (n - HEADER_LEN));
    st->out[pos] = (uint8_t)(65 + (ppm_rand(st) % 191));

    *out_buf = st->out;
    return n;
}

void afl_custom_deinit(void *data)
{
    ppm_state *st = data;

    if (st != NULL) {
        free(st->out);
        free(st);
    }
}
