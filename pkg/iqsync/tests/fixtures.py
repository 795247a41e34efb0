"""Worked examples shared by the test modules."""

# l_max = 2, d_i = 1: one level per group, so the pattern is fully determined.
PLAIN_L2_SYMBOLS = [0] * 8 + [0, 1, 0, 1, 0, 1, 0, 1] + [0, 0, 1, 1, 0, 0, 1, 1]

# l_max = 3, d_i = 2, with the level choices of the interleaved worked example.
INTERLEAVED_LEVELS = [
    0, 0, 1, 0, 1, 1, 1, 1, 0, 0, 1, 0, 1, 1, 0, 1,
    3, 2, 2, 3, 2, 2, 2, 2, 3, 2, 3, 2, 2, 3, 3, 2,
]
INTERLEAVED_SYMBOLS = [
    0, 0, 0, 0, 0, 1, 0, 1, 0, 0, 0, 0, 0, 1, 0, 1,
    0, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 0, 1, 1, 1,
]
# Bob's clock runs 3 symbols ahead; he records the first 29 symbols of the pattern.
INTERLEAVED_OFFSET_SYMBOLS = 3
INTERLEAVED_DETECTIONS = [
    2 * (k + INTERLEAVED_OFFSET_SYMBOLS) + s for k, s in enumerate(INTERLEAVED_SYMBOLS[:29])
]
INTERLEAVED_COUNTERS = [4, -4, 6, -2]
