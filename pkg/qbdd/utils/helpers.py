"""
Helper functions for residues, rationals, seeds and JSON artifacts.
"""

import json
from fractions import Fraction

import numpy as np


def centered(x, q):
    """
    Zero-centred representative of x mod q.

    Args:
        x: integer or integer numpy array
        q: modulus

    Returns:
        Representative in (-q/2, q/2], same shape as x
    """
    if isinstance(x, np.ndarray):
        r = np.mod(x, q)
        return np.where(r > q // 2, r - q, r)
    r = int(x) % q
    return r - q if r > q // 2 else r


def modnorm_sq(x, q):
    """Squared modular norm, exact for integer input."""
    return sum(centered(int(v), q) ** 2 for v in x)


def parse_rational(text):
    """
    Parse a rational written as "p/q" or "p".

    Args:
        text: string form of the number

    Returns:
        The value as a Fraction
    """
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def format_rational(value):
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def strip_comment(line):
    """
    Remove a trailing '#' comment from a line of a text artifact.

    Args:
        line: A line that may contain a comment

    Returns:
        The content with comment removed and whitespace trimmed
    """
    if '#' in line:
        line = line.split('#')[0]
    return line.strip()


def derive_seeds(seed, count):
    """Independent per-trial seeds; trial i always gets the same seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]


def to_jsonable(value):
    if isinstance(value, Fraction):
        return format_rational(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    return value


def dump_json(obj):
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(dump_json(obj))


def read_json(path):
    with open(path, 'r', encoding='utf-8') as fh:
        return json.load(fh)


def write_json_rows(path, rows):
    """One compact JSON object per line, in the given order."""
    with open(path, 'w', encoding='utf-8') as fh:
        for row in rows:
            fh.write(json.dumps(to_jsonable(row), sort_keys=True) + "\n")


def read_json_rows(path):
    rows = []
    with open(path, 'r', encoding='utf-8') as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows
