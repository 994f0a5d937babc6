"""Model file format tests: round trips, validation, version handling."""

import numpy as np
import pytest

from boundedgp.inference import InferenceConfig
from boundedgp.modelfile import (
    BoundDecl,
    ModelFileError,
    dumps_model,
    load_model,
    loads_model,
    save_model,
)
from boundedgp.surrogate import fit_surrogate

FAST = dict(cma_generations=15, restarts=0, seed=3)


def make_inputs():
    rng = np.random.default_rng(42)
    x = rng.uniform(-2.0, 2.0, size=(9, 1))
    y = np.exp(-np.square(x[:, 0])) + 0.1 * x[:, 0]
    return x, y


@pytest.fixture(scope="module")
def unbounded_pack():
    x, y = make_inputs()
    model = fit_surrogate(x, y, config=InferenceConfig(mode="unbounded", **FAST))
    decl = BoundDecl()
    return model, decl, x, y


@pytest.fixture(scope="module")
def bounded_pack():
    x, y = make_inputs()
    decl = BoundDecl(lower=-1.0, upper="x1^2 + 2")
    model = fit_surrogate(
        x, y, bounds=decl.to_spec(1), config=InferenceConfig(mode="bounded", **FAST)
    )
    return model, decl, x, y


class TestBoundDecl:
    def test_unbounded(self):
        decl = BoundDecl()
        assert decl.is_unbounded
        assert decl.to_spec(2) is None

    def test_constant_pair_ordering(self):
        with pytest.raises(ValueError):
            BoundDecl(lower=2.0, upper=1.0)

    def test_constant_pair_equal(self):
        with pytest.raises(ValueError):
            BoundDecl(lower=1.0, upper=1.0)

    def test_expression_side_compiles(self):
        decl = BoundDecl(lower="x1 - 1")
        spec = decl.to_spec(1)
        lo, hi = spec.at(np.array([3.0]))
        assert lo == 2.0 and hi == np.inf

    def test_bad_expression_rejected(self):
        with pytest.raises(ValueError):
            BoundDecl(lower="import os").to_spec(1)

    def test_bad_type_rejected(self):
        with pytest.raises(ValueError):
            BoundDecl(lower=[1, 2])


class TestRoundTrip:
    def test_text_is_stable(self, bounded_pack):
        model, decl, x, y = bounded_pack
        text = dumps_model(model, decl, x, y)
        model2, decl2, x2, y2 = loads_model(text)
        assert dumps_model(model2, decl2, x2, y2) == text

    def test_predictions_bit_exact(self, bounded_pack):
        model, decl, x, y = bounded_pack
        model2, _, _, _ = loads_model(dumps_model(model, decl, x, y))
        pts = np.linspace(-2.0, 2.0, 7)[:, None]
        t1 = model.predict_table(pts)
        t2 = model2.predict_table(pts)
        for field in ("mu_f", "sigma_f", "mu_g", "sigma_g", "q025", "q500", "q975"):
            np.testing.assert_array_equal(getattr(t1, field), getattr(t2, field))

    def test_unbounded_round_trip(self, unbounded_pack):
        model, decl, x, y = unbounded_pack
        model2, decl2, _, _ = loads_model(dumps_model(model, decl, x, y))
        assert decl2.is_unbounded
        assert model2.inference.mode == "unbounded"
        pts = np.array([[0.5], [-1.25]])
        mu1, sd1 = model.predict_gaussian(pts)
        mu2, sd2 = model2.predict_gaussian(pts)
        np.testing.assert_array_equal(mu1, mu2)
        np.testing.assert_array_equal(sd1, sd2)

    def test_raw_data_round_trip(self, bounded_pack):
        model, decl, x, y = bounded_pack
        _, _, x2, y2 = loads_model(dumps_model(model, decl, x, y))
        np.testing.assert_array_equal(x2, x)
        np.testing.assert_array_equal(y2, y)

    def test_declaration_text_round_trip(self, bounded_pack):
        model, decl, x, y = bounded_pack
        _, decl2, _, _ = loads_model(dumps_model(model, decl, x, y))
        assert decl2.lower == -1.0
        assert decl2.upper == "x1^2 + 2"

    def test_file_round_trip(self, bounded_pack, tmp_path):
        model, decl, x, y = bounded_pack
        path = tmp_path / "model.txt"
        save_model(str(path), model, decl, x, y)
        model2, decl2, x2, y2 = load_model(str(path))
        assert dumps_model(model2, decl2, x2, y2) == path.read_text(encoding="utf-8")

    def test_mismatched_raw_data_rejected(self, bounded_pack):
        model, decl, x, y = bounded_pack
        with pytest.raises(ValueError):
            dumps_model(model, decl, x, y + 1.0)


class TestValidation:
    def _text(self, pack):
        model, decl, x, y = pack
        return dumps_model(model, decl, x, y)

    def test_wrong_magic(self):
        with pytest.raises(ModelFileError):
            loads_model("not a model file\n")

    def test_empty(self):
        with pytest.raises(ModelFileError):
            loads_model("")

    def test_future_version_refused(self, unbounded_pack):
        text = self._text(unbounded_pack).replace("v1", "v2", 1)
        with pytest.raises(ModelFileError, match="v2"):
            loads_model(text)

    def test_truncated_rows_refused(self, unbounded_pack):
        text = self._text(unbounded_pack)
        lines = text.strip().splitlines()
        with pytest.raises(ModelFileError):
            loads_model("\n".join(lines[:-1]) + "\n")

    def test_trailing_content_refused(self, unbounded_pack):
        text = self._text(unbounded_pack)
        with pytest.raises(ModelFileError):
            loads_model(text + "extra\n")

    def test_missing_key_refused(self, unbounded_pack):
        text = self._text(unbounded_pack)
        lines = [ln for ln in text.splitlines() if not ln.startswith("sigma2:")]
        with pytest.raises(ModelFileError):
            loads_model("\n".join(lines) + "\n")

    def test_bounded_mode_without_bounds_refused(self, unbounded_pack):
        text = self._text(unbounded_pack).replace("mode: unbounded", "mode: bounded")
        with pytest.raises(ModelFileError, match="bound"):
            loads_model(text)

    def test_garbled_number_refused(self, unbounded_pack):
        text = self._text(unbounded_pack)
        out = []
        for ln in text.splitlines():
            if ln.startswith("sigma2:"):
                ln = "sigma2: not-a-number"
            out.append(ln)
        with pytest.raises(ModelFileError):
            loads_model("\n".join(out) + "\n")
