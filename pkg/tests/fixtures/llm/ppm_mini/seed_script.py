import sys

width, height, maxval = 2, 1, 64
header = "P6\n{} {} {}\n".format(width, height, maxval).encode("ascii")
colorspace = b"R"
# samples chosen well inside 0..maxval
pixels = bytes([16, 32])

with open(sys.argv[1], "wb") as fh:
    fh.write(header + colorspace + pixels)
