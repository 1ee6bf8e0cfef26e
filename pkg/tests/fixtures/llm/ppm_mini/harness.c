#include <stdio.h>

#include "ppm_mini.h"

int main(int argc, char **argv)
{
    if (argc < 2) {
        fprintf(stderr, "usage: %s IMAGE\n", argv[0]);
        return 2;
    }
    if (load_image(argv[1]) != 0) {
        fprintf(stderr, "rejected: %s\n", argv[1]);
        return 1;
    }
    return 0;
}
