#ifndef CHAIN_DEEP_H
#define CHAIN_DEEP_H

#include <stddef.h>

/* Five-stage message validator.  Each stage checks one byte of the
 * "DEEP!" escape marker before handing the message down. */

int stage1(const unsigned char *msg, size_t n);

#endif /* CHAIN_DEEP_H */
