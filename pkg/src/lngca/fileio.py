"""Readers and writers for the interchange formats used by the command line.

Matrices are comma-separated text, one observation per row, with an
optional header line. Images are binary PGM (P5, 8-bit). Structured output
is JSON.
"""

import csv
import json
import math
import os

import numpy as np

from ._validation import InputError

CSV_FORMAT = "%.12g"


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv_matrix(path, header=None):
    """Read a numeric matrix from CSV.

    Parameters
    ----------
    path : str or path-like
    header : bool or None
        ``True`` skips the first line, ``False`` treats it as data and
        ``None`` skips it only if any of its cells is not a number.

    Returns
    -------
    X : ndarray, shape (n, p)
    names : list of str or None
        Column names when a header was read.

    Raises
    ------
    InputError
        On ragged rows, non-numeric or non-finite cells, or an empty file.
        Messages carry the file name and 1-based line number.
    """
    path = os.fspath(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InputError("%s: cannot open (%s)" % (path, exc.strerror)) from None
    with fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputError("%s: no data rows" % path)
    names = None
    first = rows[0][1]
    if header is None:
        header = not all(_is_number(c) for c in first)
    if header:
        names = [c.strip() for c in first]
        rows = rows[1:]
        if not rows:
            raise InputError("%s: header but no data rows" % path)
    width = len(names) if names is not None else len(rows[0][1])
    data = np.empty((len(rows), width))
    for r, (line, cells) in enumerate(rows):
        if len(cells) != width:
            raise InputError(
                "%s:%d: expected %d columns, found %d" % (path, line, width, len(cells))
            )
        for c, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError:
                raise InputError(
                    "%s:%d: column %d is not numeric: %r" % (path, line, c + 1, cell)
                ) from None
            if not math.isfinite(v):
                raise InputError(
                    "%s:%d: column %d is not finite: %r" % (path, line, c + 1, cell)
                )
            data[r, c] = v
    return data, names


def write_csv_matrix(path, X, names=None):
    """Write a matrix with 12 significant digits per cell."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if names is not None:
            fh.write(",".join(names) + "\n")
        for row in X:
            fh.write(",".join(CSV_FORMAT % v for v in row) + "\n")


def write_csv_records(path, records):
    """Write a list of flat dicts as a CSV table (columns from the first record)."""
    records = list(records)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if not records:
            return
        writer = csv.DictWriter(fh, fieldnames=list(records[0]), lineterminator="\n")
        writer.writeheader()
        for rec in records:
            writer.writerow(
                {k: (CSV_FORMAT % v if isinstance(v, float) else v) for k, v in rec.items()}
            )


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_to_jsonable(obj), fh, indent=2)
        fh.write("\n")


def read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError("%s: cannot open (%s)" % (path, exc.strerror)) from None
    except json.JSONDecodeError as exc:
        raise InputError("%s:%d: invalid JSON (%s)" % (path, exc.lineno, exc.msg)) from None


# -- PGM ----------------------------------------------------------------------


def _pgm_tokens(data, path):
    """Parse the P5 header; returns (width, height, maxval, offset of pixels)."""
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InputError("%s: truncated PGM header" % path)
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise InputError("%s: not a binary PGM (magic %r, expected P5)" % (path, tokens[0]))
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise InputError("%s: malformed PGM header" % path) from None
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise InputError("%s: invalid PGM size or maxval" % path)
    return w, h, maxval, pos + 1  # one whitespace byte ends the header


def read_pgm(path):
    """Read a binary PGM image as a float array of shape (height, width)."""
    path = os.fspath(path)
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError("%s: cannot open (%s)" % (path, exc.strerror)) from None
    w, h, maxval, off = _pgm_tokens(data, path)
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * dtype.itemsize
    if len(data) - off < need:
        raise InputError(
            "%s: expected %d bytes of pixels, found %d" % (path, need, len(data) - off)
        )
    pix = np.frombuffer(data, dtype=dtype, count=w * h, offset=off)
    return pix.reshape(h, w).astype(float)


def to_uint8(img):
    """Affinely rescale an image to span 0..255 (constant images map to 0)."""
    img = np.asarray(img, dtype=float)
    lo, hi = img.min(), img.max()
    if hi == lo:
        return np.zeros(img.shape, dtype=np.uint8)
    return np.round((img - lo) * (255.0 / (hi - lo))).astype(np.uint8)


def write_pgm(path, img):
    """Write an 8-bit binary PGM. Non-uint8 input is rescaled with :func:`to_uint8`."""
    img = np.asarray(img)
    if img.ndim != 2:
        raise InputError("PGM images must be 2-d, got shape %r" % (img.shape,))
    if img.dtype != np.uint8:
        img = to_uint8(img)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(img).tobytes())


def read_image(path):
    """Read a grayscale image from PGM, or from a plain CSV matrix of intensities."""
    path = os.fspath(path)
    if path.lower().endswith(".csv"):
        return read_csv_matrix(path, header=False)[0]
    return read_pgm(path)
