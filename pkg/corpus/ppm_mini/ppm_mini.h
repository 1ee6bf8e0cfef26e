#ifndef PPM_MINI_H
#define PPM_MINI_H

/* Minimal PPM-style raster loader fixture.  The binary "P6"-flavoured
 * format: "P6\n<width> <height> <maxval>\n<colorspace byte><samples...>"
 * where colorspace must be 'R' and every sample byte must stay at or
 * below maxval. */

int load_image(const char *path);

#endif /* PPM_MINI_H */
