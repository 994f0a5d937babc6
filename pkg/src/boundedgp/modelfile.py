"""Versioned text serialization for fitted surrogate models.

A model file is a small self-describing document: a ``boundedgp-model v1``
header line, key-value metadata (hyperparameters, normalization constants,
bound declaration, inference bookkeeping), then the training data in the
original units it arrived in.  Floats are written with ``repr`` so every
value round-trips bit-exactly; loading a file and predicting gives the same
bits as predicting with the in-memory model that wrote it.

Only declarative bounds can be serialized: absent, constant, or an
expression string over ``x1 ... xd`` (see :mod:`boundedgp.expressions`).
Bounds given as arbitrary Python callables have no file representation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Optional, TextIO, Union

import numpy as np

from . import gp
from .expressions import BoundExpression, ExpressionError
from .inference import InferenceResult
from .projection import BoundSpec
from .surrogate import SurrogateModel

__all__ = ["ModelFileError", "BoundDecl", "save_model", "load_model", "dumps_model", "loads_model"]

_MAGIC = "boundedgp-model"
_VERSION = "v1"

BoundSide = Union[None, float, str]


class ModelFileError(ValueError):
    """Raised when a model file cannot be written or read back."""


@dataclass(frozen=True)
class BoundDecl:
    """Declarative bounds: each side absent, a constant, or an expression.

    This is the subset of :class:`BoundSpec` that survives serialization.
    Constant sides are checked for ordering here; expression sides are only
    checkable pointwise, which ``BoundSpec.at`` does on every evaluation.
    """

    lower: BoundSide = None
    upper: BoundSide = None

    def __post_init__(self):
        for side in (self.lower, self.upper):
            if side is not None and not isinstance(side, (int, float, str)):
                raise ModelFileError(f"bound side must be none, a number, or an expression string, got {side!r}")
        if isinstance(self.lower, (int, float)) and isinstance(self.upper, (int, float)):
            if not float(self.lower) < float(self.upper):
                raise ModelFileError(
                    f"constant bounds must satisfy l < u, got l={self.lower}, u={self.upper}"
                )

    @property
    def is_unbounded(self) -> bool:
        return self.lower is None and self.upper is None

    def to_spec(self, dim: int) -> Optional[BoundSpec]:
        """Compile to evaluable bounds, or None when both sides are absent."""
        if self.is_unbounded:
            return None

        def side(decl: BoundSide):
            if decl is None:
                return None
            if isinstance(decl, str):
                return BoundExpression(decl, dim)
            return float(decl)

        try:
            return BoundSpec(lower=side(self.lower), upper=side(self.upper))
        except ExpressionError as exc:
            raise ModelFileError(str(exc)) from exc


def _encode_side(side: BoundSide) -> str:
    if side is None:
        return "none"
    if isinstance(side, str):
        return f"expr {side}"
    return f"const {repr(float(side))}"


def _decode_side(text: str) -> BoundSide:
    if text == "none":
        return None
    kind, _, rest = text.partition(" ")
    if kind == "const" and rest:
        return float(rest)
    if kind == "expr" and rest:
        return rest
    raise ModelFileError(f"unreadable bound declaration {text!r}")


def _floats_csv(values) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(values, dtype=float).reshape(-1))


def dumps_model(
    model: SurrogateModel,
    bounds: BoundDecl,
    raw_inputs: np.ndarray,
    raw_outputs: np.ndarray,
) -> str:
    """Serialize a fitted model to the text format.

    ``raw_inputs`` / ``raw_outputs`` must be the exact arrays the model was
    fit on, in original units; the stored normalization constants map them
    back onto the model's internal representation without rounding.
    """
    train = model.train
    x = np.asarray(raw_inputs, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    y = np.asarray(raw_outputs, dtype=float).reshape(-1)
    if x.shape != (train.n, train.dim) or y.shape != (train.n,):
        raise ModelFileError(
            f"raw data of shape {x.shape}/{y.shape} does not match the model's "
            f"{train.n} x {train.dim} training set"
        )
    check = (x - train.input_shift) / train.input_scale
    if not np.array_equal(check, train.inputs):
        raise ModelFileError("raw inputs do not reproduce the model's training inputs")
    if not np.array_equal((y - train.output_shift) / train.output_scale, train.outputs):
        raise ModelFileError("raw outputs do not reproduce the model's training outputs")
    if (bounds.to_spec(train.dim) is None) != (model.bounds is None):
        raise ModelFileError("bound declaration disagrees with the model's bounds")

    params = model.params
    inf = model.inference
    out = io.StringIO()
    out.write(f"{_MAGIC} {_VERSION}\n")
    out.write(f"dim: {train.dim}\n")
    out.write(f"rows: {train.n}\n")
    out.write(f"sigma2: {repr(params.sigma2)}\n")
    out.write(f"lengthscales: {_floats_csv(params.lengthscales)}\n")
    out.write(f"nugget: {repr(params.nugget)}\n")
    out.write(f"mode: {inf.mode}\n")
    out.write(f"project: {'true' if model.project else 'false'}\n")
    out.write(f"press: {repr(float(inf.objective))}\n")
    out.write(f"evaluations: {inf.evaluations}\n")
    out.write(f"converged: {'true' if inf.converged else 'false'}\n")
    out.write(f"input_shift: {_floats_csv(train.input_shift)}\n")
    out.write(f"input_scale: {_floats_csv(train.input_scale)}\n")
    out.write(f"output_shift: {repr(train.output_shift)}\n")
    out.write(f"output_scale: {repr(train.output_scale)}\n")
    out.write(f"lower: {_encode_side(bounds.lower)}\n")
    out.write(f"upper: {_encode_side(bounds.upper)}\n")
    out.write(f"X: {train.n}\n")
    for row in x:
        out.write(_floats_csv(row) + "\n")
    out.write(f"Y: {train.n}\n")
    for val in y:
        out.write(repr(float(val)) + "\n")
    return out.getvalue()


def save_model(path, model: SurrogateModel, bounds: BoundDecl, raw_inputs, raw_outputs) -> None:
    text = dumps_model(model, bounds, raw_inputs, raw_outputs)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _parse_header_line(line: str, lineno: int) -> tuple[str, str]:
    key, sep, value = line.partition(":")
    if not sep:
        raise ModelFileError(f"line {lineno}: expected 'key: value', got {line!r}")
    return key.strip(), value.strip()


def loads_model(text: str) -> tuple[SurrogateModel, BoundDecl, np.ndarray, np.ndarray]:
    """Parse the text format back into a model.

    Returns ``(model, bound_declaration, raw_inputs, raw_outputs)``.  The
    rebuilt model predicts bit-identically to the one that was saved.
    """
    lines = text.splitlines()
    if not lines:
        raise ModelFileError("empty model file")
    magic = lines[0].strip().split()
    if len(magic) != 2 or magic[0] != _MAGIC:
        raise ModelFileError("not a model file (missing 'boundedgp-model' header)")
    if magic[1] != _VERSION:
        raise ModelFileError(
            f"model file version {magic[1]!r} is not supported; this build reads {_VERSION}"
        )

    header: dict[str, str] = {}
    i = 1
    while i < len(lines):
        line = lines[i].strip()
        if not line:
            i += 1
            continue
        if line.startswith("X:"):
            break
        key, value = _parse_header_line(line, i + 1)
        header[key] = value
        i += 1
    required = (
        "dim", "rows", "sigma2", "lengthscales", "nugget", "mode", "project",
        "press", "evaluations", "converged", "input_shift", "input_scale",
        "output_shift", "output_scale", "lower", "upper",
    )
    missing = [k for k in required if k not in header]
    if missing:
        raise ModelFileError(f"model file is missing keys: {', '.join(missing)}")

    try:
        dim = int(header["dim"])
        rows = int(header["rows"])
        sigma2 = float(header["sigma2"])
        lengthscales = np.array([float(v) for v in header["lengthscales"].split(",")])
        nugget = float(header["nugget"])
        input_shift = np.array([float(v) for v in header["input_shift"].split(",")])
        input_scale = np.array([float(v) for v in header["input_scale"].split(",")])
        output_shift = float(header["output_shift"])
        output_scale = float(header["output_scale"])
        press = float(header["press"])
        evaluations = int(header["evaluations"])
    except ValueError as exc:
        raise ModelFileError(f"unreadable numeric field: {exc}") from exc
    mode = header["mode"]
    if mode not in ("bounded", "unbounded"):
        raise ModelFileError(f"mode must be bounded or unbounded, got {mode!r}")
    project = header["project"] == "true"
    converged = header["converged"] == "true"
    decl = BoundDecl(lower=_decode_side(header["lower"]), upper=_decode_side(header["upper"]))

    def read_block(start: int, marker: str, width: int) -> tuple[np.ndarray, int]:
        if start >= len(lines) or not lines[start].strip().startswith(marker):
            raise ModelFileError(f"expected '{marker} <rows>' block at line {start + 1}")
        declared = lines[start].strip()[len(marker):].strip()
        if declared != str(rows):
            raise ModelFileError(f"{marker} block declares {declared!r} rows, header says {rows}")
        block = np.empty((rows, width))
        for r in range(rows):
            lineno = start + 1 + r
            if lineno >= len(lines):
                raise ModelFileError(f"{marker} block is truncated at line {lineno + 1}")
            parts = lines[lineno].strip().split(",")
            if len(parts) != width:
                raise ModelFileError(
                    f"line {lineno + 1}: expected {width} value(s), got {len(parts)}"
                )
            try:
                block[r] = [float(p) for p in parts]
            except ValueError as exc:
                raise ModelFileError(f"line {lineno + 1}: {exc}") from exc
        return block, start + 1 + rows

    x_raw, nxt = read_block(i, "X:", dim)
    y_raw, nxt = read_block(nxt, "Y:", 1)
    y_raw = y_raw.reshape(-1)
    for j in range(nxt, len(lines)):
        if lines[j].strip():
            raise ModelFileError(f"unexpected content after data blocks at line {j + 1}")

    train = gp.TrainingSet(
        inputs=(x_raw - input_shift) / input_scale,
        outputs=(y_raw - output_shift) / output_scale,
        input_shift=input_shift,
        input_scale=input_scale,
        output_shift=output_shift,
        output_scale=output_scale,
    )
    params = gp.HyperParams(sigma2=sigma2, lengthscales=lengthscales, nugget=nugget)
    spec = decl.to_spec(dim)
    if mode == "bounded" and spec is None:
        raise ModelFileError("mode is bounded but no bounds are declared")
    fitted = gp.fit(train, params)
    result = InferenceResult(
        params=params, objective=press, evaluations=evaluations,
        converged=converged, mode=mode,
    )
    model = SurrogateModel(fitted=fitted, bounds=spec, project=project, inference=result)
    return model, decl, x_raw, y_raw


def load_model(path) -> tuple[SurrogateModel, BoundDecl, np.ndarray, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_model(fh.read())
