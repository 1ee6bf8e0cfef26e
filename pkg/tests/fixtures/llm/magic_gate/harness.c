#include <stdio.h>
#include <stdlib.h>

#include "gate.h"

int main(int argc, char **argv)
{
    FILE *fp;
    unsigned char buf[4096];
    size_t n;

    if (argc < 2)
        return 2;
    fp = fopen(argv[1], "rb");
    if (fp == NULL)
        return 1;
    n = fread(buf, 1, sizeof(buf), fp);
    fclose(fp);
    return gate(buf, n) < 0 ? 1 : 0;
}
