"""Model container files.

One text header followed by raw little-endian float64 payloads:

    format: jb-model v1
    dim: 8
    field: mean 8
    field: S_mu 8 8
    field: S_eps 8 8
    ---
    <float64 payloads, row-major, in field order>

Field names in the files are the wire contract and stay fixed regardless of
the in-memory attribute names.
"""

import numpy as np

from .exceptions import DimensionMismatch, ParseError
from .jb import JbModel
from .lda import LdaProjection
from .plda import KaldiPldaModel, SpldaModel, TwoCovModel

FORMAT_JB = "jb-model v1"
FORMAT_SPLDA = "splda-model v1"
FORMAT_KALDI = "kaldi-plda-model v1"
FORMAT_TWOCOV = "twocov-model v1"
FORMAT_LDA = "lda-projection v1"

_HEADER_END = b"---\n"


def _write_container(path, fmt, scalars, fields):
    with open(path, "wb") as f:
        f.write(f"format: {fmt}\n".encode("ascii"))
        for key, value in scalars.items():
            f.write(f"{key}: {value}\n".encode("ascii"))
        for name, array in fields.items():
            shape = " ".join(str(n) for n in array.shape)
            f.write(f"field: {name} {shape}\n".encode("ascii"))
        f.write(_HEADER_END)
        for array in fields.values():
            f.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_container(path):
    with open(path, "rb") as f:
        data = f.read()
    end = data.find(_HEADER_END)
    if end < 0:
        raise ParseError("missing header terminator '---'", path=path)
    fmt = None
    scalars = {}
    field_specs = []
    for lineno, raw in enumerate(data[:end].decode("ascii", "replace").splitlines(), start=1):
        if not raw.strip():
            continue
        key, sep, value = raw.partition(":")
        if not sep:
            raise ParseError(f"bad header line {raw!r}", path=path, line=lineno)
        key = key.strip()
        value = value.strip()
        if key == "format":
            fmt = value
        elif key == "field":
            parts = value.split()
            try:
                field_specs.append((parts[0], tuple(int(p) for p in parts[1:])))
            except (IndexError, ValueError):
                raise ParseError(f"bad field line {raw!r}", path=path, line=lineno)
        else:
            scalars[key] = value
    if fmt is None:
        raise ParseError("missing 'format' header line", path=path)
    pos = end + len(_HEADER_END)
    fields = {}
    for name, shape in field_specs:
        count = int(np.prod(shape)) if shape else 1
        nbytes = 8 * count
        if pos + nbytes > len(data):
            raise ParseError(f"truncated payload for field {name!r}", path=path, offset=pos)
        fields[name] = np.frombuffer(data, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
        pos += nbytes
    if pos != len(data):
        raise ParseError("trailing bytes after last field", path=path, offset=pos)
    return fmt, scalars, fields


def _require(fields, names, path):
    for name in names:
        if name not in fields:
            raise ParseError(f"missing field {name!r}", path=path)


def save_model(path, model):
    """Write any model object in its container format."""
    if isinstance(model, JbModel):
        _write_container(
            path,
            FORMAT_JB,
            {"dim": model.dim},
            {"mean": model.mean, "S_mu": model.between_cov, "S_eps": model.within_cov},
        )
    elif isinstance(model, SpldaModel):
        _write_container(
            path,
            FORMAT_SPLDA,
            {"dim": model.dim, "subspace_dim": model.subspace_dim},
            {"mean": model.mean, "F": model.loading, "Lambda": model.noise_cov},
        )
    elif isinstance(model, KaldiPldaModel):
        _write_container(
            path,
            FORMAT_KALDI,
            {"dim": model.dim},
            {"mean": model.mean, "Gamma": model.between_cov, "Lambda": model.within_cov},
        )
    elif isinstance(model, TwoCovModel):
        _write_container(
            path,
            FORMAT_TWOCOV,
            {"dim": model.dim},
            {"mean": model.mean, "S_mu": model.between_cov, "S_eps": model.within_cov},
        )
    elif isinstance(model, LdaProjection):
        _write_container(
            path,
            FORMAT_LDA,
            {"dim": model.dim_in, "dim_out": model.dim_out},
            {"mean": model.mean, "W": model.basis},
        )
    else:
        raise DimensionMismatch(f"cannot serialize object of type {type(model).__name__}")


def load_model(path):
    """Read a container file and return the matching model object."""
    fmt, _, fields = _read_container(path)
    if fmt == FORMAT_JB:
        _require(fields, ("mean", "S_mu", "S_eps"), path)
        return JbModel(fields["mean"], fields["S_mu"], fields["S_eps"])
    if fmt == FORMAT_SPLDA:
        _require(fields, ("mean", "F", "Lambda"), path)
        return SpldaModel(fields["mean"], fields["F"], fields["Lambda"])
    if fmt == FORMAT_KALDI:
        _require(fields, ("mean", "Gamma", "Lambda"), path)
        return KaldiPldaModel(fields["mean"], fields["Gamma"], fields["Lambda"])
    if fmt == FORMAT_TWOCOV:
        _require(fields, ("mean", "S_mu", "S_eps"), path)
        return TwoCovModel(fields["mean"], fields["S_mu"], fields["S_eps"])
    if fmt == FORMAT_LDA:
        _require(fields, ("mean", "W"), path)
        return LdaProjection(fields["mean"], fields["W"])
    raise ParseError(f"unknown model format {fmt!r}", path=path)
