import numpy as np
import pytest

from hdsgd.models import make_model
from hdsgd.overlap import OverlapMatrix

ZOO_KINDS = [
    ("least_squares", {"noise": 0.3}),
    ("binary_logistic", {}),
    ("multiclass_logistic", {"classes": 3}),
    ("phase_retrieval", {}),
    ("phase_chase", {}),
]

ACTIVATIONS = ["relu", "erf", "cos"]

ALL_MODELS = ZOO_KINDS + [
    ("single_index_activation", {"activation": a}) for a in ACTIVATIONS
]


def model_id(spec):
    kind, params = spec
    if kind == "single_index_activation":
        return f"act_{params['activation']}"
    return kind


@pytest.fixture(params=ALL_MODELS, ids=model_id)
def zoo_model(request):
    kind, params = request.param
    return make_model(kind, dict(params))


def random_interior_overlap(rng, model, scale=1.0):
    """A random PSD overlap matrix kept away from domain boundaries."""
    p = model.ell + model.ell_star
    w = rng.standard_normal((p, p + 2))
    mat = scale * (w @ w.T / (p + 2) + 0.5 * np.eye(p))
    return OverlapMatrix(mat, model.ell)
