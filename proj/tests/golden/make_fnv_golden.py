#!/usr/bin/env python3
"""Regenerates fnv1a_tokens.tsv with an implementation independent of the C++ code."""

TOKENS = ["memory", "hotel", "in", "cambridge", "42", "a", "seagull", "budget", "forgetting", "the"]
DIMENSION = 256


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


if __name__ == "__main__":
    print("# token\tfnv1a64_hex\tindex_mod_256")
    for t in TOKENS:
        h = fnv1a64(t.encode("utf-8"))
        print(f"{t}\t{h:016x}\t{h % DIMENSION}")
