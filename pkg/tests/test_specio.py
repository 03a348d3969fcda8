import json

import pytest

from llnlab import model, specio
from llnlab.errors import SpecError


def explicit_doc():
    return {
        "rows": {"k": "n"},
        "p": 1.0,
        "cells": [
            {"n": 1, "i": 1, "dist": {"kind": "symmetric-pm1"}},
            {"n": 2, "i": 1, "dist": {"kind": "symmetric-pm1"}},
            {"n": 2, "i": 2, "dist": {"kind": "symmetric-two-point",
                                      "magnitude": 2.0, "prob": 0.5}},
        ],
        "weights": {"kind": "uniform"},
        "b": {"kind": "power", "p": 1.0},
    }


def test_fixture_reference_loads():
    spec = specio.load_spec_obj({"fixture": "example-2.1"})
    assert spec.fixture is not None
    assert spec.p == 0.5
    assert spec.arr.k(3) == 3


def test_fixture_reference_with_overrides():
    spec = specio.load_spec_obj({"fixture": "x2m-example", "p": 1.0})
    assert spec.p == 1.0
    assert spec.arr.cell(8, 8).magnitude == pytest.approx(8.0 / 3.0)


def test_explicit_cells_document():
    spec = specio.load_spec_obj(explicit_doc())
    assert spec.arr.n_max == 2
    assert isinstance(spec.arr.cell(2, 2), model.SymmetricTwoPoint)
    assert spec.weights.row_sum(2) == pytest.approx(1.0)
    assert spec.b(4) == pytest.approx(4.0)


def test_missing_cell_is_an_error():
    doc = explicit_doc()
    del doc["cells"][1]
    with pytest.raises(SpecError):
        specio.load_spec_obj(doc)


def test_unknown_dist_kind():
    doc = explicit_doc()
    doc["cells"][0]["dist"] = {"kind": "cauchy"}
    with pytest.raises(SpecError):
        specio.load_spec_obj(doc)


def test_bad_dist_params():
    with pytest.raises(SpecError):
        specio.parse_dist({"kind": "symmetric-two-point", "prob": 0.5})
    with pytest.raises(SpecError):
        specio.parse_dist({"kind": "pareto", "alpha": "wide"})


def test_pareto_and_dependence_parsing():
    doc = explicit_doc()
    doc["cells"][0]["dist"] = {"kind": "pareto", "alpha": 3.0}
    doc["dependence"] = {"kind": "gaussian-na", "correlation": -0.2}
    spec = specio.load_spec_obj(doc)
    assert isinstance(spec.arr.dependence, model.GaussianNA)
    assert isinstance(spec.arr.cell(1, 1), model.ParetoTail)


def test_explicit_weights_parsing():
    doc = explicit_doc()
    doc["weights"] = {
        "kind": "explicit",
        "values": [
            {"n": 1, "i": 1, "a": 1.0},
            {"n": 2, "i": 1, "a": 0.25},
            {"n": 2, "i": 2, "a": 0.75},
        ],
    }
    spec = specio.load_spec_obj(doc)
    assert spec.weights.a(2, 1) == 0.25
    assert spec.weights.row_sum(2) == pytest.approx(1.0)


def test_c_normalized_weights_parsing():
    doc = explicit_doc()
    doc["weights"] = {
        "kind": "c-normalized",
        "flavor": "sum",
        "values": [
            {"n": 1, "i": 1, "c": 2.0},
            {"n": 2, "i": 1, "c": 1.0},
            {"n": 2, "i": 2, "c": 3.0},
        ],
    }
    spec = specio.load_spec_obj(doc)
    assert spec.weights.a(2, 2) == pytest.approx(0.75)
    assert spec.weights.row_sum(2) == pytest.approx(1.0, abs=1e-12)


def test_svf_parsing():
    assert specio.parse_svf(None) is None
    assert specio.parse_svf({"family": "constant"}).family == "constant"
    assert specio.parse_svf({"family": "log-power", "gamma": 2.0}).gamma == 2.0
    with pytest.raises(SpecError):
        specio.parse_svf({"family": "mystery"})


def test_file_roundtrip_and_malformed(tmp_path):
    good = tmp_path / "spec.json"
    good.write_text(json.dumps(explicit_doc()))
    spec = specio.load_spec(good)
    assert spec.arr.n_max == 2

    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SpecError):
        specio.load_spec(bad)
    with pytest.raises(SpecError):
        specio.load_spec(tmp_path / "missing.json")


def test_top_level_validation():
    with pytest.raises(SpecError):
        specio.load_spec_obj(["not", "an", "object"])
    with pytest.raises(SpecError):
        specio.load_spec_obj({"p": 1.0})
