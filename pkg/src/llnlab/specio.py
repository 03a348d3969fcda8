"""Loading problem descriptions (arrays, weights, norming, svf) from JSON.

Schema sketch (full documentation in the repository README):

    {
      "fixture": "example-2.1",          # named generator, OR explicit below
      "p": 0.5, "nu": 1,
      "rows": {"k": "n"} | {"k": 5},
      "cells": [
        {"n": 1, "i": 1, "dist": {"kind": "symmetric-pm1"}},
        {"n": 2, "i": 1, "dist": {"kind": "symmetric-two-point",
                                  "magnitude": 2.0, "prob": 0.5}},
        {"n": 2, "i": 2, "dist": {"kind": "pareto", "alpha": 3.0, "cutoff": 1.0}}
      ],
      "dependence": {"kind": "independent"}
                    | {"kind": "gaussian-na", "correlation": -0.1},
      "mean_zero": true,
      "weights": {"kind": "uniform"}
                 | {"kind": "explicit", "values": [{"n":1,"i":1,"a":1.0}, ...]}
                 | {"kind": "c-normalized", "flavor": "sum" | "sum-sq",
                    "values": [{"n":1,"i":1,"c":1.0}, ...],
                    "growth_constant": 2.0},
      "b": {"kind": "power", "p": 0.5} | {"kind": "explicit", "values": [1,2,3]},
      "svf": {"family": "constant"}
             | {"family": "log-power", "gamma": 1.0}
             | {"family": "loglog-power", "gamma": -1.0}
    }

Explicit cells must cover every (n, i) with 1 <= i <= k_n for the declared
rows; the largest declared n becomes the array's row bound.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from . import fixtures as fixtures_mod
from .errors import SpecError
from .model import (
    ArraySpec,
    CellGroup,
    DistSpec,
    GaussianNA,
    INDEPENDENT,
    NormalizingSequence,
    ParetoTail,
    SymmetricPM1,
    SymmetricTwoPoint,
    WeightScheme,
    c_normalized_weights,
    explicit_norming,
    explicit_weights,
    power_norming,
    uniform_weights,
)
from .svf import SlowlyVaryingSpec, constant_one, log_power, loglog_power


@dataclass(frozen=True)
class LoadedSpec:
    arr: ArraySpec
    weights: WeightScheme
    b: Optional[NormalizingSequence]
    sv: Optional[SlowlyVaryingSpec]
    p: float
    nu: int
    fixture: Optional[fixtures_mod.Fixture] = None
    label: str = ""


def parse_dist(obj: dict) -> DistSpec:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise SpecError(f"distribution spec needs a 'kind': {obj!r}")
    kind = obj["kind"]
    try:
        if kind == "symmetric-pm1":
            return SymmetricPM1()
        if kind == "symmetric-two-point":
            return SymmetricTwoPoint(
                magnitude=float(obj["magnitude"]), prob=float(obj.get("prob", 1.0))
            )
        if kind == "pareto":
            return ParetoTail(
                alpha=float(obj["alpha"]), cutoff=float(obj.get("cutoff", 1.0))
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"bad distribution spec {obj!r}: {exc}") from exc
    raise SpecError(f"unknown distribution kind {kind!r}")


def parse_svf(obj: Optional[dict]) -> Optional[SlowlyVaryingSpec]:
    if obj is None:
        return None
    fam = obj.get("family")
    if fam == "constant":
        return constant_one()
    if fam == "log-power":
        return log_power(float(obj.get("gamma", 1.0)))
    if fam == "loglog-power":
        return loglog_power(float(obj.get("gamma", 1.0)))
    raise SpecError(f"unknown svf family {fam!r}")


def _parse_rows(obj, cells_max_n: Optional[int]):
    if obj is None:
        if cells_max_n is None:
            raise SpecError("spec needs 'rows' or explicit 'cells'")
        obj = {"k": "n"}
    k = obj.get("k", "n")
    if k == "n":
        return (lambda n: n), cells_max_n
    if isinstance(k, int) and k >= 1:
        return (lambda n: k), cells_max_n
    raise SpecError(f"rows.k must be 'n' or a positive integer, got {k!r}")


def _parse_dependence(obj):
    if obj is None or obj.get("kind", "independent") == "independent":
        return INDEPENDENT
    if obj.get("kind") == "gaussian-na":
        try:
            return GaussianNA(correlation=float(obj["correlation"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise SpecError(f"bad gaussian-na dependence: {exc}") from exc
    raise SpecError(f"unknown dependence kind {obj.get('kind')!r}")


def _array_from_cells(doc: dict) -> ArraySpec:
    cells = doc["cells"]
    if not isinstance(cells, list) or not cells:
        raise SpecError("'cells' must be a nonempty list")
    table: dict[tuple[int, int], DistSpec] = {}
    for c in cells:
        try:
            table[(int(c["n"]), int(c["i"]))] = parse_dist(c["dist"])
        except (KeyError, TypeError) as exc:
            raise SpecError(f"bad cell entry {c!r}: {exc}") from exc
    n_max = max(n for n, _ in table)
    row_length, _ = _parse_rows(doc.get("rows"), n_max)
    for n in range(1, n_max + 1):
        for i in range(1, row_length(n) + 1):
            if (n, i) not in table:
                raise SpecError(f"cell (n={n}, i={i}) missing from 'cells'")

    if doc.get("sequence"):
        # X[n,i] = X_i: every column must be constant below the diagonal
        for n in range(1, n_max + 1):
            for i in range(1, row_length(n) + 1):
                if table[(n, i)] != table[(n_max, i)]:
                    raise SpecError(
                        f"'sequence': true but cell (n={n}, i={i}) differs from "
                        f"(n={n_max}, i={i})"
                    )
        return ArraySpec(
            row_length=row_length,
            sequence_cell=lambda i: table[(n_max, i)],
            mean_zero=bool(doc.get("mean_zero", True)),
            dependence=_parse_dependence(doc.get("dependence")),
            n_max=n_max,
            label=doc.get("label", "explicit"),
        )

    def groups(n: int) -> tuple[CellGroup, ...]:
        return tuple(CellGroup(1, table[(n, i)]) for i in range(1, row_length(n) + 1))

    return ArraySpec(
        row_length=row_length,
        groups_fn=groups,
        mean_zero=bool(doc.get("mean_zero", True)),
        dependence=_parse_dependence(doc.get("dependence")),
        n_max=n_max,
        label=doc.get("label", "explicit"),
    )


def _weights_from_doc(doc: Optional[dict], arr: ArraySpec) -> WeightScheme:
    if doc is None or doc.get("kind", "uniform") == "uniform":
        return uniform_weights(arr.row_length)
    kind = doc.get("kind")
    if kind == "explicit":
        table = {}
        for v in doc.get("values", []):
            try:
                table[(int(v["n"]), int(v["i"]))] = float(v["a"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SpecError(f"bad weight entry {v!r}: {exc}") from exc
        if not table:
            raise SpecError("explicit weights need a nonempty 'values' list")
        n_max = max(n for n, _ in table)

        def a_fn(n: int, i: int) -> float:
            try:
                return table[(n, i)]
            except KeyError:
                raise SpecError(f"weight (n={n}, i={i}) missing") from None

        return explicit_weights(a_fn, arr.row_length, n_max=n_max)
    if kind == "c-normalized":
        table = {}
        for v in doc.get("values", []):
            try:
                table[(int(v["n"]), int(v["i"]))] = float(v["c"])
            except (KeyError, TypeError, ValueError) as exc:
                raise SpecError(f"bad c entry {v!r}: {exc}") from exc
        if not table:
            raise SpecError("c-normalized weights need a nonempty 'values' list")
        n_max = max(n for n, _ in table)
        gc = doc.get("growth_constant")
        return c_normalized_weights(
            lambda n, i: table.get((n, i), 0.0),
            arr.row_length,
            flavor=doc.get("flavor", "sum"),
            growth_constant=float(gc) if gc is not None else None,
            n_max=n_max,
        )
    raise SpecError(f"unknown weights kind {kind!r}")


def _norming_from_doc(doc: Optional[dict], p: float) -> Optional[NormalizingSequence]:
    if doc is None:
        return power_norming(p)
    kind = doc.get("kind", "power")
    if kind == "power":
        return power_norming(float(doc.get("p", p)))
    if kind == "explicit":
        vals = doc.get("values")
        if not isinstance(vals, list) or not vals:
            raise SpecError("explicit norming needs a nonempty 'values' list")
        return explicit_norming([float(v) for v in vals])
    raise SpecError(f"unknown norming kind {kind!r}")


def load_spec_obj(doc: dict) -> LoadedSpec:
    if not isinstance(doc, dict):
        raise SpecError("top-level spec must be a JSON object")
    if "fixture" in doc:
        fx = fixtures_mod.load(
            doc["fixture"], p=doc.get("p"), nu=doc.get("nu")
        )
        return LoadedSpec(
            arr=fx.arr,
            weights=fx.weights,
            b=fx.b,
            sv=parse_svf(doc.get("svf")),
            p=fx.p,
            nu=fx.nu,
            fixture=fx,
            label=fx.name,
        )
    if "cells" not in doc:
        raise SpecError("spec needs a 'fixture' name or explicit 'cells'")
    p = float(doc.get("p", 1.0))
    nu = int(doc.get("nu", 1))
    arr = _array_from_cells(doc)
    return LoadedSpec(
        arr=arr,
        weights=_weights_from_doc(doc.get("weights"), arr),
        b=_norming_from_doc(doc.get("b"), p),
        sv=parse_svf(doc.get("svf")),
        p=p,
        nu=nu,
        label=doc.get("label", "explicit"),
    )


def load_spec(path: str | Path) -> LoadedSpec:
    """Parse a JSON problem description; SpecError on any malformation."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"invalid JSON in {path}: {exc}") from exc
    return load_spec_obj(doc)
