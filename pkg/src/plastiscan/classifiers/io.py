"""JSON persistence for trained models.

Floats serialise through Python's shortest round-trip repr, so a saved model
predicts bit-for-bit identically after loading.  Forest bootstrap records are
deliberately not persisted: permutation importances must be recomputed on the
freshly trained model.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import CorruptModelError, ModelSchemaError
from ..spectra import FeatureSetSpec, MODEL_SPECS
from .forest import RFHyperParams, RFModel, _Tree
from .svm import Scaler, SVMHyperParams, SVMModel

__all__ = ["SCHEMA_VERSION", "save_model", "load_model"]

SCHEMA_VERSION = 1


def _tree_to_json(tree: _Tree, node: int = 0):
    if tree.feature[node] < 0:
        counts = tree.counts[node]
        return [int(counts[0]), int(counts[1])]
    return {
        "f": int(tree.feature[node]),
        "t": float(tree.threshold[node]),
        "l": _tree_to_json(tree, int(tree.left[node])),
        "r": _tree_to_json(tree, int(tree.right[node])),
    }


class _TreeReader:
    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[tuple[int, int]] = []

    def walk(self, node) -> int:
        idx = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append((0, 0))
        if isinstance(node, list):
            if (
                len(node) != 2
                or not all(isinstance(c, int) and c >= 0 for c in node)
                or sum(node) == 0
            ):
                raise CorruptModelError(f"leaf counts must be two non-negative ints, got {node!r}")
            self.counts[idx] = (node[0], node[1])
            return idx
        if not isinstance(node, dict) or set(node) != {"f", "t", "l", "r"}:
            raise CorruptModelError(f"tree node must be a leaf pair or {{f,t,l,r}}, got {node!r}")
        if not isinstance(node["f"], int) or node["f"] < 0:
            raise CorruptModelError(f"split feature must be a non-negative int, got {node['f']!r}")
        self.feature[idx] = node["f"]
        self.threshold[idx] = float(node["t"])
        self.left[idx] = self.walk(node["l"])
        self.right[idx] = self.walk(node["r"])
        # internal counts are the children's sums (informational only)
        self.counts[idx] = (
            self.counts[self.left[idx]][0] + self.counts[self.right[idx]][0],
            self.counts[self.left[idx]][1] + self.counts[self.right[idx]][1],
        )
        return idx

    def tree(self) -> _Tree:
        return _Tree(self.feature, self.threshold, self.left, self.right, self.counts, None)


def _spec_to_json(spec: FeatureSetSpec) -> dict:
    return {"spec_id": spec.spec_id, "members": list(spec.members)}


def _spec_from_json(doc) -> FeatureSetSpec:
    if not isinstance(doc, dict) or "spec_id" not in doc or "members" not in doc:
        raise CorruptModelError("feature_spec must carry spec_id and members")
    known = MODEL_SPECS.get(doc["spec_id"])
    spec = FeatureSetSpec(doc["spec_id"], tuple(doc["members"]))
    if known is not None and known.members != spec.members:
        raise CorruptModelError(
            f"feature_spec {spec.spec_id} members {spec.members} do not match "
            f"the registry definition {known.members}"
        )
    return spec


def save_model(model: RFModel | SVMModel, path: str | Path) -> None:
    """Write a model as a schema-versioned JSON document."""
    if not isinstance(model, (RFModel, SVMModel)):
        raise TypeError(f"cannot save model of type {type(model).__name__}")
    doc: dict = {
        "schema_version": SCHEMA_VERSION,
        "feature_spec": _spec_to_json(model.spec),
        "hyperparams": asdict(model.hyperparams),
        "n_train": model.n_train,
    }
    if isinstance(model, RFModel):
        doc["algo"] = "rf"
        doc["n_trees"] = len(model.trees)
        doc["trees"] = [_tree_to_json(tree) for tree in model.trees]
        doc["oob_error"] = model.oob_error
        doc["oob_curve"] = [float(v) for v in model.oob_curve]
        doc["importances"] = [float(v) for v in model.importances]
    else:
        doc["algo"] = "svm"
        doc["n_support"] = model.n_support
        doc["support_vectors"] = [[float(v) for v in row] for row in model.support_vectors]
        doc["dual_coefs"] = [float(v) for v in model.dual_coefs]
        doc["bias"] = float(model.bias)
        doc["scaler"] = {
            "mean": [float(v) for v in model.scaler.mean],
            "sd": [float(v) for v in model.scaler.sd],
            "kept": [bool(v) for v in model.scaler.kept],
        }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _check_version_and_algo(doc, expect_algo):
    if not isinstance(doc, dict):
        raise ModelSchemaError("model file must hold a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ModelSchemaError(
            f"unsupported schema_version {version!r}; this build reads {SCHEMA_VERSION}"
        )
    algo = doc.get("algo")
    if algo not in ("rf", "svm"):
        raise ModelSchemaError(f"unknown algo tag {algo!r}")
    if expect_algo is not None and algo != expect_algo:
        raise ModelSchemaError(f"expected a {expect_algo} model, file holds {algo}")
    return algo


def load_model(path: str | Path, expect_algo: str | None = None) -> RFModel | SVMModel:
    """Read a model written by :func:`save_model`.

    ``expect_algo`` ("rf" or "svm") makes a mismatched file a schema error.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelSchemaError(f"model file is not valid JSON: {exc}") from exc
    algo = _check_version_and_algo(doc, expect_algo)
    spec = _spec_from_json(doc.get("feature_spec"))
    hp_doc = doc.get("hyperparams")
    if not isinstance(hp_doc, dict):
        raise CorruptModelError("hyperparams must be an object")
    n_train = doc.get("n_train")
    if not isinstance(n_train, int) or n_train < 0:
        raise CorruptModelError("n_train must be a non-negative int")

    try:
        if algo == "rf":
            hp = RFHyperParams(**hp_doc)
        else:
            hp = SVMHyperParams(**hp_doc)
    except (TypeError, ValueError) as exc:
        raise CorruptModelError(f"bad hyperparams: {exc}") from exc

    if algo == "rf":
        trees_doc = doc.get("trees")
        if not isinstance(trees_doc, list) or not trees_doc:
            raise CorruptModelError("rf model needs a non-empty 'trees' list")
        if doc.get("n_trees") != len(trees_doc):
            raise CorruptModelError(
                f"tree count field says {doc.get('n_trees')!r} but {len(trees_doc)} "
                "trees are present"
            )
        if hp.n_trees != len(trees_doc):
            raise CorruptModelError(
                f"hyperparams say {hp.n_trees} trees but {len(trees_doc)} are present"
            )
        trees = []
        for node in trees_doc:
            reader = _TreeReader()
            reader.walk(node)
            tree = reader.tree()
            if (tree.feature >= spec.n_features).any():
                raise CorruptModelError("tree splits on a feature outside the spec")
            trees.append(tree)
        curve = np.asarray(doc.get("oob_curve", []), dtype=np.float64)
        if curve.size != len(trees):
            raise CorruptModelError("oob_curve length must equal the tree count")
        importances = np.asarray(doc.get("importances", []), dtype=np.float64)
        if importances.size != spec.n_features:
            raise CorruptModelError("importances length must equal the feature count")
        return RFModel(
            spec=spec,
            hyperparams=hp,
            trees=trees,
            oob_error=float(doc.get("oob_error", float("nan"))),
            oob_curve=curve,
            importances=importances,
            n_train=n_train,
        )

    sv = doc.get("support_vectors")
    coefs = doc.get("dual_coefs")
    scaler_doc = doc.get("scaler")
    if not isinstance(sv, list) or not sv or not isinstance(coefs, list):
        raise CorruptModelError("svm model needs support_vectors and dual_coefs")
    if doc.get("n_support") != len(sv) or len(coefs) != len(sv):
        raise CorruptModelError(
            f"support vector count mismatch: n_support={doc.get('n_support')!r}, "
            f"{len(sv)} vectors, {len(coefs)} dual coefficients"
        )
    if not isinstance(scaler_doc, dict):
        raise CorruptModelError("svm model needs a scaler object")
    mean = np.asarray(scaler_doc.get("mean", []), dtype=np.float64)
    sd = np.asarray(scaler_doc.get("sd", []), dtype=np.float64)
    kept = np.asarray(scaler_doc.get("kept", []), dtype=bool)
    if not (mean.size == sd.size == kept.size == spec.n_features):
        raise CorruptModelError("scaler arrays must match the feature count")
    vectors = np.asarray(sv, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != int(kept.sum()):
        raise CorruptModelError("support vector width must match the kept feature count")
    bias = doc.get("bias")
    if not isinstance(bias, (int, float)) or isinstance(bias, bool):
        raise CorruptModelError("bias must be a number")
    return SVMModel(
        spec=spec,
        hyperparams=hp,
        scaler=Scaler(mean=mean, sd=sd, kept=kept),
        support_vectors=vectors,
        dual_coefs=np.asarray(coefs, dtype=np.float64),
        bias=float(bias),
        n_train=n_train,
    )
