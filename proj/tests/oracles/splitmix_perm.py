"""Standalone reference for key derivation: SplitMix64 + Fisher-Yates.

Used once to pin the golden permutations frozen into the C++ tests.
"""
import sys

MASK = (1 << 64) - 1


def splitmix64(seed):
    state = seed & MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        yield z ^ (z >> 31)


def permutation(seed, grid_side):
    n = grid_side * grid_side
    perm = list(range(n))
    gen = splitmix64(seed)
    for i in range(n - 1, 0, -1):
        j = (next(gen) * (i + 1)) >> 64
        perm[i], perm[j] = perm[j], perm[i]
    return perm


if __name__ == "__main__":
    seed, grid = int(sys.argv[1]), int(sys.argv[2])
    print(", ".join(str(v) for v in permutation(seed, grid)))
