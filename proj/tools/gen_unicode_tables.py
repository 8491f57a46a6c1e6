#!/usr/bin/env python3
"""Generate core/src/unicode_tables.inc from Python's unicodedata.

The answer normalizer needs four character classes: punctuation (general
category P*), whitespace (str.isspace), CJK characters that become
single-character tokens, and the per-code-point lowercase mapping.

Usage: gen_unicode_tables.py OUTPUT
"""

import sys
import unicodedata

# Blocks whose characters are tokenized one by one.
CJK_BLOCKS = [
    (0x2E80, 0x2FDF),    # CJK radicals, Kangxi radicals
    (0x3040, 0x30FF),    # Hiragana, Katakana
    (0x3100, 0x312F),    # Bopomofo
    (0x3131, 0x318F),    # Hangul compatibility jamo
    (0x31A0, 0x31FF),    # Bopomofo extended, CJK strokes, Katakana ext
    (0x3400, 0x4DBF),    # CJK extension A
    (0x4E00, 0x9FFF),    # CJK unified ideographs
    (0xAC00, 0xD7AF),    # Hangul syllables
    (0xF900, 0xFAFF),    # CJK compatibility ideographs
    (0x20000, 0x2FA1F),  # CJK extensions B..F, compatibility supplement
    (0x30000, 0x3134F),  # CJK extension G
]


def ranges(pred):
    out = []
    start = None
    for cp in range(0x110000):
        if pred(cp):
            if start is None:
                start = cp
        elif start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out


def is_punct(cp):
    return unicodedata.category(chr(cp)).startswith("P")


def is_space(cp):
    return chr(cp).isspace()


def cpp_utf8(s):
    return '"' + "".join(f"\\x{b:02x}" for b in s.encode("utf-8")) + '"'


def emit_ranges(name, rs):
    lines = [f"inline constexpr CodeRange {name}[] = {{"]
    for lo, hi in rs:
        lines.append(f"    {{0x{lo:X}, 0x{hi:X}}},")
    lines.append("};")
    return "\n".join(lines)


def main():
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    lower = []
    for cp in range(0x110000):
        if 0xD800 <= cp <= 0xDFFF:
            continue
        c = chr(cp)
        lc = c.lower()
        if lc != c:
            lower.append((cp, lc))

    parts = [
        "// Generated by tools/gen_unicode_tables.py; do not edit.",
        f"// Unicode {unicodedata.unidata_version}",
        f'inline constexpr const char* kUnicodeVersion = "{unicodedata.unidata_version}";',
        "",
        emit_ranges("kPunctuation", ranges(is_punct)),
        "",
        emit_ranges("kWhitespace", ranges(is_space)),
        "",
        emit_ranges("kCjk", CJK_BLOCKS),
        "",
        "inline constexpr LowerMapping kLowercase[] = {",
    ]
    for cp, lc in lower:
        parts.append(f"    {{0x{cp:X}, {cpp_utf8(lc)}}},")
    parts.append("};")
    with open(sys.argv[1], "w", encoding="utf-8") as f:
        f.write("\n".join(parts) + "\n")


if __name__ == "__main__":
    main()
