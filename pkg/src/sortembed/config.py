"""JSON configuration for pipelines and batch files.

A pipeline config is one of

* ``{"group": ..., "templates": [[...], ...], "reduction": {...}}``
* ``{"pipeline": "diag-form", "A": [[...]], "B": [[...]]}`` for ``gamma_{A,B}``
* ``{"frame": "mercedes-benz" | {"A": [[...]]} | {"file": "frame.txt"}}`` for
  the ``S_2`` sign-retrieval embedding ``beta_A``

``group`` is ``{"name": "sign"|"cyclic"|"trivial", "d": 3}``,
``{"name": "row-perm", "m": 3, "n": 2}``, ``{"file": "gens.txt"}`` or
``{"generators": [matrix, ...]}``; an optional ``"tol"`` sets the closure
tolerance.  ``reduction`` has a ``kind`` of ``identity``, ``zero`` (with
``D``), ``dense`` (with ``matrix``), ``select-entries`` (with ``entries`` as
``[row, column]`` pairs) or ``max-entries``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .embedding import EmbeddingPipeline, Reduction, TemplateSet, diag_form_pipeline, frame_pipeline
from .errors import ConfigError, SortEmbedError
from .group import DEFAULT_TOL, build_group_from_generators, load_group_file, named_group
from .signretrieval import MeasurementFrame, load_frame, mercedes_benz


def load_json(path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {str(path)!r} does not exist") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {str(path)!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def _field(cfg: dict, name: str, where: str = "config"):
    if name not in cfg:
        raise ConfigError(f"{where} is missing field {name!r}")
    return cfg[name]


def _matrix(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"field {name!r} must be a numeric matrix") from None
    if arr.ndim != 2:
        raise ConfigError(f"field {name!r} must be a 2-D array, got {arr.ndim}-D")
    return arr


def _resolve(base: Path | None, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() or base is None else base / path


def group_from_config(spec, base: Path | None = None):
    if not isinstance(spec, dict):
        raise ConfigError("field 'group' must be an object")
    tol = float(spec.get("tol", DEFAULT_TOL))
    try:
        if "file" in spec:
            return load_group_file(_resolve(base, spec["file"]), tol=tol)
        if "generators" in spec:
            gens = [_matrix(g, "group.generators") for g in spec["generators"]]
            return build_group_from_generators(gens, tol=tol)
        name = _field(spec, "name", "field 'group'")
        params = {k: v for k, v in spec.items() if k not in ("name", "tol")}
        return named_group(name, **params)
    except ConfigError:
        raise
    except (SortEmbedError, OSError) as exc:
        raise ConfigError(f"field 'group': {exc}") from None


def frame_from_config(spec, base: Path | None = None) -> MeasurementFrame:
    if isinstance(spec, str):
        if spec.lower().replace("_", "-") in ("mercedes-benz", "mb"):
            return mercedes_benz()
        return load_frame(_resolve(base, spec))
    if isinstance(spec, dict):
        if "file" in spec:
            return load_frame(_resolve(base, spec["file"]))
        return MeasurementFrame(_matrix(_field(spec, "A", "field 'frame'"), "frame.A"))
    raise ConfigError("field 'frame' must be a name, a path or an object")


def reduction_from_config(spec, M: int, N: int) -> Reduction:
    if spec is None:
        return Reduction.identity(M, N)
    if not isinstance(spec, dict):
        raise ConfigError("field 'reduction' must be an object")
    kind = str(_field(spec, "kind", "field 'reduction'")).lower()
    if kind == "identity":
        return Reduction.identity(M, N)
    if kind == "zero":
        return Reduction.zero(M, N, int(spec.get("D", 1)))
    if kind == "dense":
        return Reduction(_matrix(_field(spec, "matrix", "field 'reduction'"), "reduction.matrix"))
    if kind == "select-entries":
        return Reduction.select_entries(M, N, [tuple(e) for e in _field(spec, "entries", "field 'reduction'")])
    if kind == "max-entries":
        return Reduction.max_entries(M, N)
    raise ConfigError(f"field 'reduction.kind': unknown kind {kind!r}")


def pipeline_from_config(cfg: dict, base: Path | None = None) -> EmbeddingPipeline:
    try:
        if "frame" in cfg:
            return frame_pipeline(frame_from_config(cfg["frame"], base).A)
        if cfg.get("pipeline") == "diag-form":
            return diag_form_pipeline(_matrix(_field(cfg, "A"), "A"), _matrix(_field(cfg, "B"), "B"))
        G = group_from_config(_field(cfg, "group"), base)
        T = TemplateSet(_matrix(_field(cfg, "templates"), "templates"))
        alpha = reduction_from_config(cfg.get("reduction"), G.order, T.N)
        return EmbeddingPipeline(G, T, alpha)
    except ConfigError:
        raise
    except (SortEmbedError, OSError) as exc:
        raise ConfigError(str(exc)) from None


def read_vectors(path) -> np.ndarray:
    """One vector per line, comma-separated decimals; blank lines and ``#`` ignored."""
    rows = []
    for k, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([float(t) for t in line.split(",")])
        except ValueError:
            raise ConfigError(f"input line {k} is not a comma-separated list of numbers") from None
    if rows and len({len(r) for r in rows}) != 1:
        raise ConfigError("input vectors have differing lengths")
    return np.array(rows, dtype=float)


def format_vectors(rows) -> str:
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in np.atleast_2d(rows))
