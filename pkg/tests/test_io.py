import json

import numpy as np
import pytest

from sparselind import LindbladModel, OvercompleteGKS, ValidationError
from sparselind.applications import WalkSpec
from sparselind.classes import (
    DenseDiagonalSpec,
    DiagonalSpec,
    IdenticalCoordinateSpec,
    OneKetSparseSpec,
)
from sparselind.decompose import SparseLindbladOpSpec
from sparselind.io import (
    LocalModel,
    complex_matrix,
    complex_to_pairs,
    dumps,
    load_json,
    parse_json_text,
    parse_model,
)


class TestJson:
    def test_parse_error_has_line_context(self):
        text = '{\n "dim": 2,\n "lindblad_ops": [1 2]\n}'
        with pytest.raises(ValidationError) as exc:
            parse_json_text(text, "m.json")
        msg = str(exc.value)
        assert msg.startswith("m.json:3:")
        assert '"lindblad_ops": [1 2]' in msg

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_json(tmp_path / "absent.json")

    def test_complex_entries(self):
        M = complex_matrix([[1, [0, 2]], [[3, -1], 0.5]], "M")
        assert M[0, 1] == 2j and M[1, 0] == 3 - 1j and M[1, 1] == 0.5

    def test_complex_entries_rejected(self):
        with pytest.raises(ValidationError):
            complex_matrix([[1, "x"]], "M")
        with pytest.raises(ValidationError):
            complex_matrix([[1, 2], [3]], "M")
        with pytest.raises(ValidationError):
            complex_matrix([], "M")


class TestModels:
    def test_lindblad_ops(self):
        m = parse_model({"dim": 2, "hamiltonian": [[1, 0], [0, -1]], "lindblad_ops": [[[0, 1], [0, 0]]]})
        assert isinstance(m, LindbladModel)
        assert m.lindblad_ops[0][0, 1] == 1

    def test_gks_entries(self):
        g = parse_model({"dim": 2, "gks_entries": [{"k": 0, "l": 1, "kp": 0, "lp": 1, "re": 0.5}]})
        assert isinstance(g, OvercompleteGKS)
        assert g.entry(0, 1, 0, 1) == 0.5

    def test_exactly_one_representation(self):
        with pytest.raises(ValidationError):
            parse_model({"dim": 2})
        with pytest.raises(ValidationError):
            parse_model({"dim": 2, "lindblad_ops": [], "gks_entries": []})

    def test_bad_gks_entry(self):
        with pytest.raises(ValidationError):
            parse_model({"dim": 2, "gks_entries": [{"k": 0}]})

    def test_classes(self):
        assert isinstance(parse_model({"class": "identical_coordinate", "a": [0.2, 0.2], "c": [0.0, 0.1]}),
                          IdenticalCoordinateSpec)
        assert isinstance(parse_model({"class": "diagonal", "a": [[0, 1], [0, 0]]}), DiagonalSpec)
        assert isinstance(parse_model({"class": "dense_diagonal", "a": [0.1, 0.2]}), DenseDiagonalSpec)
        ket = {"class": "one_ket_sparse", "nu": [1, 0], "a": [0.5, 0.5], "aprime": [0.3, 0.3], "b": [0.6, 0.6]}
        assert isinstance(parse_model(ket), OneKetSparseSpec)
        sp = parse_model({"class": "sparse_operator", "L": [[0, 1], [[0, 1], 0]]})
        assert isinstance(sp, SparseLindbladOpSpec) and sp.k == 1

    def test_local(self):
        m = parse_model({"class": "local", "c": 1, "n": 3, "lindblad_ops": [[[0, 1], [0, 0]]]})
        assert isinstance(m, LocalModel) and m.model.dim == 2
        with pytest.raises(ValidationError):
            parse_model({"class": "local", "c": 1, "n": 3, "dim": 4, "lindblad_ops": [np.eye(4).tolist()]})

    def test_unknown_class_and_missing_field(self):
        with pytest.raises(ValidationError):
            parse_model({"class": "mystery"})
        with pytest.raises(ValidationError):
            parse_model({"class": "dense_diagonal"})
        with pytest.raises(ValidationError):
            parse_model([1, 2])

    def test_walk(self):
        w = parse_model({"vertices": 3, "edges": [[0, 1], [1, 2, 2.0]], "hamiltonian": "adjacency"})
        assert isinstance(w, WalkSpec) and w.weights[1, 2] == 2.0
        custom = parse_model({"vertices": 2, "edges": [[0, 1]], "hamiltonian": [[1, 0], [0, 2]]})
        assert custom.hamiltonian == "custom"


class TestDumps:
    def test_round_trip_digits(self):
        x = 0.1 + 0.2
        out = json.loads(dumps({"x": x, "v": [1 / 3, 2], "z": 1 + 2j}))
        assert out["x"] == x and out["v"][0] == 1 / 3 and out["z"] == [1.0, 2.0]

    def test_one_key_per_line(self):
        text = dumps({"generated": "now", "a": 1, "b": {"c": [1.0, 2.5]}})
        lines = text.splitlines()
        assert lines[1] == ' "generated": "now",'
        assert sum('"generated"' in line for line in lines) == 1

    def test_special_values(self):
        assert json.loads(dumps({"a": float("nan"), "b": None, "c": True, "d": np.int64(3)})) == \
            {"a": None, "b": None, "c": True, "d": 3}

    def test_arrays(self):
        out = json.loads(dumps({"m": np.eye(2)}))
        assert out["m"] == [[1.0, 0.0], [0.0, 1.0]]

    def test_complex_pairs(self):
        assert complex_to_pairs(np.array([[1j]])) == [[[0.0, 1.0]]]
