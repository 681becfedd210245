#!/usr/bin/env python3
"""Regenerate goldens/hash_vectors.tsv from the scalar hash path.

Run once and commit the output; the file pins bucket/sign assignments so any
change to the mixing function, the masking, or the sign rule shows up as a
test failure rather than a silent remap.

Format, one record per line, token bytes written verbatim:

    token <TAB> bits <TAB> bucket_seed <TAB> sign_seed <TAB> bucket <TAB> sign

Tokens never contain tab or newline; everything else (separator bytes, high
bytes, UTF-8) is allowed and appears raw, so read the file in binary mode.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hashfeat.hashcore import HashConfig, hash_token  # noqa: E402

OUT = os.path.join(os.path.dirname(__file__), "..", "goldens", "hash_vectors.tsv")


def main():
    tokens = [
        b"spam", b"ham", b"viagra", b"meeting", b"__BIAS__",
        b"a", b"ab", b"abc", b"abcd", b"abcde", b"abcdef", b"abcdefg",
        b"token-with-#", b"##", b"user\x1ftoken", b"\xff\xfe\x01",
        b"0", b"1", b"2", b"3",
        "naïve".encode("utf-8"), "盘".encode("utf-8"),
        b"longer-token-spanning-many-blocks-0123456789",
    ]
    configs = [
        HashConfig(bits=4, bucket_seed=0x9E3779B9),
        HashConfig(bits=4, bucket_seed=42),
        HashConfig(bits=10, bucket_seed=0x9E3779B9),
        HashConfig(bits=10, bucket_seed=0xDEADBEEF, sign_seed=0x12345678),
        HashConfig(bits=18, bucket_seed=7),
        HashConfig(bits=30, bucket_seed=0),
    ]
    records = []
    for cfg in configs:
        for tok in tokens:
            bucket, sign = hash_token(tok, cfg)
            tail = f"\t{cfg.bits}\t{cfg.bucket_seed}\t{cfg.sign_seed}\t{bucket}\t{sign}\n"
            records.append(tok + tail.encode("ascii"))
    os.makedirs(os.path.dirname(OUT), exist_ok=True)
    with open(OUT, "wb") as f:
        f.writelines(records)
    print(f"wrote {len(records)} vectors to {os.path.normpath(OUT)}")


if __name__ == "__main__":
    main()
