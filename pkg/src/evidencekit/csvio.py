"""Reading and writing the indicator and softmax CSV formats.

Indicator CSV::

    sample_id,<model_0>,...,<model_{n-1}>
    a,0,1

Softmax CSV::

    sample_id,label,<model>_<class>,...

with one column per (model, class) pair, models in order and classes
numbered ``0..C-1`` within each model.  Files are UTF-8 with LF endings.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .errors import DomainError, FormatError
from .indicators import IndicatorMatrix, SoftmaxTensor


def _read_text(source):
    if isinstance(source, (str, Path)):
        path = Path(source)
        with open(path, "rb") as fh:
            data = fh.read()
        name = str(path)
    elif isinstance(source, (bytes, bytearray)):
        data, name = bytes(source), None
    else:
        data, name = source.read(), getattr(source, "name", None)
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"not valid UTF-8 ({exc.reason})", path=name) from None
    return data, name


def _split_rows(text, path):
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty file", path=path)
    rows = [line.rstrip("\r").split(",") for line in lines]
    width = len(rows[0])
    for lineno, row in enumerate(rows, start=1):
        if len(row) != width:
            raise FormatError(f"expected {width} fields, found {len(row)}", line=lineno, path=path)
    return rows


def load_indicator_matrix(source) -> IndicatorMatrix:
    """Parse an indicator CSV from a path, bytes, or a binary/text stream."""
    text, path = _read_text(source)
    rows = _split_rows(text, path)
    header = rows[0]
    if len(header) < 2 or header[0] != "sample_id":
        raise FormatError("header must be 'sample_id,<model>,...'", line=1, path=path)
    if len(rows) < 2:
        raise FormatError("no data rows", path=path)
    body = np.array(rows[1:], dtype=str)
    cells = body[:, 1:]
    ones = cells == "1"
    bad = ~(ones | (cells == "0"))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise FormatError(
            f"value {str(cells[r, c])!r} in row {str(body[r, 0])!r} is not 0 or 1",
            line=int(r) + 2, column=int(c) + 2, path=path,
        )
    return IndicatorMatrix(ones.astype(np.uint8), tuple(header[1:]), tuple(body[:, 0].tolist()))


def format_indicator_matrix(indicators: IndicatorMatrix) -> str:
    ids = indicators.sample_ids
    if ids is None:
        ids = [str(i) for i in range(indicators.n_samples)]
    digits = np.where(indicators.values == 1, "1", "0")
    out = io.StringIO()
    out.write(",".join(("sample_id",) + indicators.model_names) + "\n")
    for sid, row in zip(ids, digits):
        out.write(sid + "," + ",".join(row) + "\n")
    return out.getvalue()


def save_indicator_matrix(indicators: IndicatorMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_indicator_matrix(indicators))


def _split_model_class(name, lineno, column, path):
    model, sep, cls = name.rpartition("_")
    if not sep or not model or not cls.isdigit():
        raise FormatError(f"column {name!r} is not '<model>_<class>'",
                          line=lineno, column=column, path=path)
    return model, int(cls)


def load_softmax_tensor(source, tolerance: float = 1e-6) -> SoftmaxTensor:
    """Parse a softmax CSV; each model's row must sum to 1 within ``tolerance``."""
    text, path = _read_text(source)
    rows = _split_rows(text, path)
    header = rows[0]
    if len(header) < 4 or header[:2] != ["sample_id", "label"]:
        raise FormatError("header must be 'sample_id,label,<model>_<class>,...'", line=1, path=path)
    models = []
    classes = {}
    for col, name in enumerate(header[2:], start=3):
        model, cls = _split_model_class(name, 1, col, path)
        if model not in classes:
            models.append(model)
            classes[model] = []
        elif models[-1] != model:
            raise FormatError(f"columns of model {model!r} are not contiguous",
                              line=1, column=col, path=path)
        classes[model].append(cls)
    n_classes = len(classes[models[0]])
    for model in models:
        if classes[model] != list(range(n_classes)):
            raise FormatError(f"model {model!r} must have classes 0..{n_classes - 1} in order",
                              line=1, path=path)
    if len(rows) < 2:
        raise FormatError("no data rows", path=path)
    body = rows[1:]
    try:
        labels = np.array([int(r[1]) for r in body], dtype=np.int64)
    except ValueError:
        for lineno, r in enumerate(body, start=2):
            try:
                int(r[1])
            except ValueError:
                raise FormatError(f"label {r[1]!r} is not an integer",
                                  line=lineno, column=2, path=path) from None
        raise
    try:
        probs = np.array([r[2:] for r in body], dtype=float)
    except ValueError:
        for lineno, r in enumerate(body, start=2):
            for col, cell in enumerate(r[2:], start=3):
                try:
                    float(cell)
                except ValueError:
                    raise FormatError(f"probability {cell!r} is not a number",
                                      line=lineno, column=col, path=path) from None
        raise
    probs = probs.reshape(len(body), len(models), n_classes)
    sums = probs.sum(axis=2)
    bad = np.argwhere(np.abs(sums - 1.0) > tolerance)
    if bad.size:
        r, m = bad[0]
        raise FormatError(f"probabilities of model {models[m]!r} sum to {sums[r, m]!r}",
                          line=int(r) + 2, path=path)
    try:
        return SoftmaxTensor(probs, labels, tuple(models), tuple(r[0] for r in body), tolerance)
    except DomainError as exc:
        raise FormatError(str(exc), path=path) from None


def format_softmax_tensor(softmax: SoftmaxTensor) -> str:
    ids = softmax.sample_ids
    if ids is None:
        ids = [str(i) for i in range(softmax.n_samples)]
    header = ["sample_id", "label"] + [
        f"{m}_{c}" for m in softmax.model_names for c in range(softmax.n_classes)
    ]
    flat = softmax.probabilities.reshape(softmax.n_samples, -1)
    out = io.StringIO()
    out.write(",".join(header) + "\n")
    for sid, label, row in zip(ids, softmax.labels, flat):
        out.write(f"{sid},{int(label)}," + ",".join(repr(float(x)) for x in row) + "\n")
    return out.getvalue()


def save_softmax_tensor(softmax: SoftmaxTensor, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_softmax_tensor(softmax))
