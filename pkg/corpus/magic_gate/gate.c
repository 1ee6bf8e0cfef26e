#include <string.h>

#include "gate.h"

#define FRAME_HEADER 8

/* Payload handler: stages the payload in a fixed scratch buffer before
 * folding it into a checksum.  The declared length is trusted, so payloads
 * longer than the scratch area smash the stack. */
static int process_payload(const unsigned char *payload, size_t len)
{
    unsigned char scratch[16];
    unsigned int sum = 0;
    size_t i;

    for (i = 0; i < len; i++)
        scratch[i] = payload[i];
    for (i = 0; i < len && i < sizeof(scratch); i++)
        sum += scratch[i];
    return (int)(sum & 0xffu);
}

int gate(const unsigned char *buf, size_t n)
{
    size_t length;

    if (n < FRAME_HEADER)
        return -1;
    if (memcmp(buf, "GATE", 4) != 0)
        return -1;
    length = (size_t)buf[4] | ((size_t)buf[5] << 8);
    if (length > n - FRAME_HEADER)
        return -1;
    return process_payload(buf + FRAME_HEADER, length);
}
