"""Deterministic, atomic writers for CSV, PGM and JSON artifacts.

Every file starts by recording the resolved config: a leading ``#`` line in
CSV, a ``#`` comment in PGM and a ``config`` field in JSON.
"""
import json
import os
import tempfile

import numpy as np

PGM_MAXVAL = 65535


def config_line(config):
    return json.dumps(config, sort_keys=True, separators=(",", ":"))


def atomic_write(path, text):
    """Write ``text`` to a temp file in the target directory, then rename over ``path``."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(v):
    return repr(float(v))


def format_csv(config, header, rows):
    """CSV text: ``# <config json>``, a header line, then numeric rows."""
    lines = ["# " + config_line(config), ",".join(header)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, (int, np.integer)) else _num(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, config, header, rows):
    atomic_write(path, format_csv(config, header, rows))


def read_csv(path):
    """Return ``(config, header, data)`` for a file written by :func:`write_csv`."""
    with open(path, encoding="ascii") as fh:
        first = fh.readline()
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    config = json.loads(first[1:].strip()) if first.startswith("#") else {}
    return config, header, data


def sample_rows(samples, accept_flags, kept_steps):
    """Rows ``step, x0, ..., accepted`` for a single chain."""
    for step, x in zip(kept_steps, samples):
        yield (int(step), *x, int(accept_flags[step - 1]))


def format_pgm(config, pixels):
    """PGM P2 with a linear tone map of ``[0, max]`` onto ``[0, 65535]``."""
    pixels = np.asarray(pixels, dtype=float)
    height, width = pixels.shape
    top = pixels.max()
    scaled = np.zeros_like(pixels) if not top > 0 else pixels / top * PGM_MAXVAL
    values = np.rint(scaled).astype(int)
    lines = ["P2", "# " + config_line(config), f"{width} {height}", str(PGM_MAXVAL)]
    lines.extend(" ".join(str(v) for v in row) for row in values)
    return "\n".join(lines) + "\n"


def write_pgm(path, config, pixels):
    atomic_write(path, format_pgm(config, pixels))


def read_pgm(path):
    """Return ``(comment, pixels)`` with pixels as integers."""
    with open(path, encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if lines[0] != "P2":
        raise ValueError(f"{path}: not a P2 PGM")
    comment = lines[1][1:].strip() if lines[1].startswith("#") else ""
    body = [ln for ln in lines[1:] if not ln.startswith("#")]
    width, height = map(int, body[0].split())
    values = np.array(" ".join(body[2:]).split(), dtype=int)
    return comment, values.reshape(height, width)


def write_pixels_csv(path, config, pixels):
    """Raw (un-tone-mapped) pixel values as ``row,col,value``."""
    pixels = np.asarray(pixels, dtype=float)
    rows = ((r, c, pixels[r, c]) for r in range(pixels.shape[0]) for c in range(pixels.shape[1]))
    write_csv(path, config, ["row", "col", "value"], rows)


def format_json(config, payload):
    return json.dumps({"config": config, **payload}, indent=2, sort_keys=False) + "\n"


def write_json(path, config, payload):
    atomic_write(path, format_json(config, payload))


def read_json(path):
    with open(path, encoding="ascii") as fh:
        return json.load(fh)
