#include <stddef.h>

#include "chain_deep.h"

static int counters_ready;
static int *active_counter;

/* Final stage: bumps the escape counter.  The counter is only wired up by
 * an init path this fixture never takes, so a full escape marker writes
 * through a null pointer. */
static int sink_write(const unsigned char *msg, size_t n)
{
    (void)n;
    if (msg[4] == '!') {
        if (!counters_ready)
            *active_counter += 1;
        return 1;
    }
    return 0;
}

static int stage4(const unsigned char *msg, size_t n)
{
    if (n > 4 && msg[3] == 'P')
        return sink_write(msg, n);
    return 0;
}

static int stage3(const unsigned char *msg, size_t n)
{
    if (n > 3 && msg[2] == 'E')
        return stage4(msg, n);
    return 0;
}

static int stage2(const unsigned char *msg, size_t n)
{
    if (n > 2 && msg[1] == 'E')
        return stage3(msg, n);
    return 0;
}

int stage1(const unsigned char *msg, size_t n)
{
    if (n > 1 && msg[0] == 'D')
        return stage2(msg, n);
    return 0;
}
