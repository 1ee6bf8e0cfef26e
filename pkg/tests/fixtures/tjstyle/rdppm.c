#include <stdio.h>
#include <stdlib.h>

#include "turbojpeg.h"

static int get_rgb_row(FILE *fp, unsigned char *row, int width)
{
    int i;
    for (i = 0; i < width * 3; i++) {
        int c = fgetc(fp);
        if (c == EOF)
            return -1;
        row[i] = (unsigned char)c;
    }
    return 0;
}

static int start_input_ppm(FILE *fp, unsigned char *row, int width, int height)
{
    int maxval;
    int colorspace;
    int y;

    if (fgetc(fp) != '6')
        return -1;
    if (fscanf(fp, "%d", &maxval) != 1)
        return -1;
    colorspace = fgetc(fp);
    if (maxval < 255 && colorspace == 'R') {
        for (y = 0; y < height; y++) {
            if (get_rgb_row(fp, row, width) != 0)
                return -1;
        }
        return 0;
    }
    return -1;
}

static int jinit_read_ppm(FILE *fp, unsigned char *row, int width, int height)
{
    return start_input_ppm(fp, row, width, height);
}

unsigned char *tjLoadImage(const char *filename, int *width, int align,
                           int *height, int *pixelFormat, int flags)
{
    FILE *fp;
    unsigned char *row;
    int temp_c;

    (void)align;
    (void)pixelFormat;
    (void)flags;
    fp = fopen(filename, "rb");
    if (fp == NULL)
        return NULL;
    row = malloc((size_t)(*width) * 3u);
    if (row == NULL) {
        fclose(fp);
        return NULL;
    }
    temp_c = fgetc(fp);
    if (temp_c == 'P') {
        if (jinit_read_ppm(fp, row, *width, *height) != 0) {
            free(row);
            row = NULL;
        }
    } else {
        free(row);
        row = NULL;
    }
    fclose(fp);
    return row;
}
