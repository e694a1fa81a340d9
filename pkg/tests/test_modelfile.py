import copy
import json

import numpy as np
import pytest

from phs_regulator.errors import ModelFormatError
from phs_regulator.modelfile import (
    parse_document,
    parse_model,
    read_model_file,
    scenario_to_document,
    write_model_file,
)
from phs_regulator.scenarios.timoshenko.main import MODEL_FILE, build_demo_scenario, build_timoshenko_model


@pytest.fixture
def timoshenko_doc():
    return json.loads(MODEL_FILE.read_text(encoding="utf-8"))


def _assert_same_model(a, b):
    assert (a.n, a.order) == (b.n, b.order)
    np.testing.assert_allclose(a.interval, b.interval)
    for key in ("P2", "P1", "P0", "G0", "W1", "W2", "Wtilde"):
        np.testing.assert_allclose(getattr(a, key), getattr(b, key), atol=1e-15, err_msg=key)
    np.testing.assert_allclose(a.H, b.H, rtol=1e-12)


def test_shipped_model_file_matches_builder():
    scenario = read_model_file(MODEL_FILE)
    _assert_same_model(scenario.model, build_timoshenko_model())
    assert scenario.model.name == "timoshenko"


def test_shipped_demo_block_matches_builder():
    shipped, built = read_model_file(MODEL_FILE), build_demo_scenario()
    assert shipped.controller == built.controller
    assert shipped.simulation == built.simulation
    np.testing.assert_allclose(shipped.signal.freqs, built.signal.freqs)
    for key in ("a0", "a_cos", "a_sin", "b0", "b_cos", "b_sin"):
        np.testing.assert_allclose(getattr(shipped.signal, key), getattr(built.signal, key), err_msg=key)
    assert shipped.signal.unit == "cm/s"


def test_scenario_file_round_trip(tmp_path):
    scenario = build_demo_scenario()
    path = tmp_path / "beam.json"
    assert write_model_file(path, scenario)
    reread = read_model_file(path)
    _assert_same_model(reread.model, scenario.model)
    assert reread.controller == scenario.controller
    assert reread.notes == scenario.notes


def test_scaled_rows_are_expanded(timoshenko_doc):
    model = parse_model(timoshenko_doc)
    np.testing.assert_allclose(model.W1, np.array([[0, 0, 0, 1, 0, 0, 1, 0]]) / np.sqrt(2.0))


def test_H_profile(timoshenko_doc):
    H = timoshenko_doc["H"]["constant"]
    timoshenko_doc["H"] = {"grid": [0.0, 0.05], "values": [H, [[2 * v for v in row] for row in H]]}
    model = parse_model(timoshenko_doc)
    np.testing.assert_allclose(model.H_grid, [0.0, 0.05])
    assert model.H.shape == (2, 4, 4)


def test_model_without_demo_block(timoshenko_doc):
    del timoshenko_doc["demo"]
    scenario = parse_document(timoshenko_doc)
    assert scenario.signal is None
    assert scenario.controller is None
    assert "demo" not in scenario_to_document(scenario)


@pytest.mark.parametrize(
    ("mutate", "path"),
    [
        (lambda d: d.pop("P1"), "P1"),
        (lambda d: d.update(n=0), "n"),
        (lambda d: d.update(order=3), "order"),
        (lambda d: d.update(interval=[0.0]), "interval"),
        (lambda d: d["P0"][1].__setitem__(2, "x"), "P0[1][2]"),
        (lambda d: d["G0"].pop(), "G0"),
        (lambda d: d.update(H=[[1.0]]), "H"),
        (lambda d: d["W2"]["rows"][0].pop(), "W2.rows[0]"),
        (lambda d: d["W2"]["rows"].pop(), "W2"),
        (lambda d: d["demo"]["signal"].update(b0=[0.0]), "demo.signal.b0"),
        (lambda d: d["demo"]["controller"].pop("freqs"), "demo.controller.freqs"),
        (lambda d: d["demo"]["simulation"].update(n_f=1), "demo.simulation.n_f"),
        (lambda d: d.update(demo="none"), "demo"),
    ],
)
def test_malformed_documents_report_the_key_path(timoshenko_doc, mutate, path):
    doc = copy.deepcopy(timoshenko_doc)
    mutate(doc)
    with pytest.raises(ModelFormatError) as info:
        parse_document(doc)
    assert info.value.path == path


def test_order_two_requires_P2(timoshenko_doc):
    timoshenko_doc["order"] = 2
    with pytest.raises(ModelFormatError) as info:
        parse_model(timoshenko_doc)
    assert info.value.path == "P2"


def test_unreadable_model_file(tmp_path):
    with pytest.raises(ModelFormatError):
        read_model_file(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text("{not json", encoding="utf-8")
    with pytest.raises(ModelFormatError):
        read_model_file(broken)
