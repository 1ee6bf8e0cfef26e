#include <stdio.h>
#include <stdlib.h>

#include "ppm_mini.h"

#define MAX_DIM 64

typedef struct {
    int width;
    int height;
    int maxval;
    int colorspace;
    unsigned char *rescale[256]; /* quantization buckets, wired for 0..maxval only */
    unsigned char levels[256];
} ppm_image;

static int read_header(FILE *fp, ppm_image *img);
static int get_row(FILE *fp, ppm_image *img);

/* Row reader: scales each sample through its quantization bucket.  Buckets
 * above maxval are never wired up, and the sample value is not checked
 * against maxval before the lookup. */
static int get_row(FILE *fp, ppm_image *img)
{
    int i;

    for (i = 0; i < img->width; i++) {
        int c = fgetc(fp);
        if (c == EOF)
            return -1;
        *(img->rescale[c]) = (unsigned char)((c * 255) / img->maxval);
    }
    return 0;
}

static int read_header(FILE *fp, ppm_image *img)
{
    int maxval;
    int v;

    if (fgetc(fp) != '6')
        return -1;
    if (fscanf(fp, "%d %d %d", &img->width, &img->height, &maxval) != 3)
        return -1;
    if (img->width < 1 || img->width > MAX_DIM)
        return -1;
    if (img->height < 1 || img->height > MAX_DIM)
        return -1;
    if (maxval <= 0 || maxval >= 255)
        return -1;
    img->maxval = maxval;
    if (fgetc(fp) != '\n')
        return -1;
    img->colorspace = fgetc(fp);
    if (img->colorspace != 'R')
        return -1;
    for (v = 0; v <= maxval; v++)
        img->rescale[v] = &img->levels[v];
    for (v = 0; v < img->height; v++) {
        if (get_row(fp, img) != 0)
            return -1;
    }
    return 0;
}

int load_image(const char *path)
{
    FILE *fp;
    int rc = 1;

    fp = fopen(path, "rb");
    if (fp == NULL)
        return 1;
    if (fgetc(fp) == 'P') {
        ppm_image *img = calloc(1, sizeof(*img));
        if (img != NULL) {
            rc = read_header(fp, img) == 0 ? 0 : 1;
            free(img);
        }
    }
    fclose(fp);
    return rc;
}
