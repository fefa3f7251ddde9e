"""JSON model files.

Schema::

    {
      "dimension": d,
      "kraus": [matrix, ...],
      "initial_state": matrix,
      "atomic_props": {name: {"operator": matrix,
                              "interval": {"lo", "hi", "lo_closed", "hi_closed"}}}
    }

A matrix is a list of rows; each entry is a ``[re, im]`` pair of decimals.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import QMC, SuperOperator, ValidationError, validate_channel, validate_state
from .mltl import AtomicProp, ProbInterval


class ModelFileError(ValueError):
    pass


def matrix_to_json(m: np.ndarray) -> list:
    a = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(obj: object, dim: int, what: str) -> np.ndarray:
    try:
        a = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ModelFileError(f"{what}: entries must be [re, im] pairs of numbers") from exc
    if a.shape != (dim, dim, 2):
        raise ModelFileError(f"{what}: expected a {dim}x{dim} matrix of [re, im] pairs, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ModelFileError(f"{what}: entries must be finite")
    return a[..., 0] + 1j * a[..., 1]


def model_to_json(g: QMC, aps: Sequence[AtomicProp]) -> dict:
    return {
        "dimension": g.dim,
        "kraus": [matrix_to_json(k) for k in g.transition.kraus],
        "initial_state": matrix_to_json(g.initial),
        "atomic_props": {
            a.name: {"operator": matrix_to_json(a.operator), "interval": a.interval.to_json()} for a in aps
        },
    }


def model_from_json(obj: dict) -> tuple[QMC, list[AtomicProp]]:
    try:
        d = int(obj["dimension"])
        kraus = [matrix_from_json(k, d, f"kraus[{i}]") for i, k in enumerate(obj["kraus"])]
        rho = matrix_from_json(obj["initial_state"], d, "initial_state")
        channel = SuperOperator(kraus)
        validate_channel(channel).raise_if_invalid()
        validate_state(rho).raise_if_invalid()
        aps = []
        for name, spec in obj.get("atomic_props", {}).items():
            op = matrix_from_json(spec["operator"], d, f"atomic_props.{name}.operator")
            aps.append(AtomicProp(name, op, ProbInterval.from_json(spec["interval"])))
    except KeyError as exc:
        raise ModelFileError(f"missing field {exc.args[0]!r}") from exc
    except ValidationError as exc:
        raise ModelFileError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ModelFileError):
            raise
        raise ModelFileError(str(exc)) from exc
    return QMC(channel, rho), aps


def save_model(path: str | Path, g: QMC, aps: Sequence[AtomicProp]) -> None:
    Path(path).write_text(json.dumps(model_to_json(g, aps), indent=1))


def load_model(path: str | Path) -> tuple[QMC, list[AtomicProp]]:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise ModelFileError(f"{path}: top level must be an object")
    return model_from_json(obj)
