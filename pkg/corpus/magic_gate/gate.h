#ifndef MAGIC_GATE_H
#define MAGIC_GATE_H

#include <stddef.h>

/* Frame format: 4-byte magic "GATE", 16-bit little-endian payload length
 * at offset 4, 2 reserved bytes, then the payload. */

int gate(const unsigned char *buf, size_t n);

#endif /* MAGIC_GATE_H */
