"""Model file format.

Layout (version 1):

    NODECLF 1\\n            ascii magic + version line
    <8-byte LE uint64>      length of the JSON header
    <JSON header>           sorted keys, utf-8
    <float64 blobs>         little-endian, concatenated

The header names every array section and its shape; blobs follow in
exactly that order: the TF-IDF idf weights first, then the parameter
tensors.  The encoding is bit-exact, so save/load round trips preserve
predictions and repeated saves of the same model are byte-identical.
"""

from __future__ import annotations

import json
import struct
import sys
from array import array
from typing import BinaryIO

from .dynamics import DynamicsParams
from .errors import ModelFileError
from .linalg import Matrix, Vector
from .model import NodeClassifier
from .odesolve import SolverConfig
from .text import TfidfModel, Vocabulary

MAGIC = b"NODECLF"
VERSION = 1


def _blob(data: array) -> bytes:
    if sys.byteorder != "little":
        data = array("d", data)
        data.byteswap()
    return data.tobytes()


def _unblob(raw: bytes) -> array:
    data = array("d")
    data.frombytes(raw)
    if sys.byteorder != "little":
        data.byteswap()
    return data


def save_model(path: str, m: NodeClassifier, tfidf: TfidfModel,
               metadata: dict | None = None) -> None:
    """Write the model, its featurizer, and training metadata to ``path``."""
    if tfidf.n_features != m.n_features:
        raise ModelFileError(
            f"featurizer has {tfidf.n_features} features, model expects "
            f"{m.n_features}"
        )
    tokens = tfidf.vocab.index_to_token
    params = m.param_arrays()
    shapes = {
        "encoder.weight": [m.enc_w.rows, m.enc_w.cols],
        "encoder.bias": [m.enc_b.dim],
        "dynamics.weight": [m.dynamics.w.rows, m.dynamics.w.cols],
        "dynamics.bias": [m.dynamics.b.dim],
        "head.weight": [m.head_w.rows, m.head_w.cols],
        "head.bias": [m.head_b.dim],
    }
    header = {
        "version": VERSION,
        "tfidf": {
            "tokens": tokens,
            "document_frequency": [tfidf.vocab.document_frequency[t]
                                   for t in tokens],
            "n_documents": tfidf.vocab.n_documents,
            "max_features": tfidf.max_features,
        },
        "label_names": m.label_names,
        "solver": {
            "method": m.solver.method,
            "rtol": m.solver.rtol,
            "atol": m.solver.atol,
            "initial_step": m.solver.initial_step,
            "max_steps": m.solver.max_steps,
            "fixed_step_count": m.solver.fixed_step_count,
        },
        "params": [{"name": name, "shape": shapes[name]} for name, _ in params],
        "metadata": metadata or {},
    }
    payload = json.dumps(header, sort_keys=True,
                         separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fp:
        fp.write(MAGIC + b" " + str(VERSION).encode("ascii") + b"\n")
        fp.write(struct.pack("<Q", len(payload)))
        fp.write(payload)
        fp.write(_blob(tfidf.idf.data))
        for _, arr in params:
            fp.write(_blob(arr))


def _read_exact(fp: BinaryIO, n: int, what: str) -> bytes:
    raw = fp.read(n)
    if len(raw) != n:
        raise ModelFileError(f"truncated model file while reading {what}")
    return raw


def load_model(path: str) -> tuple[NodeClassifier, TfidfModel, dict]:
    """Read a model file back.  Raises :class:`ModelFileError` on anything off."""
    try:
        fp = open(path, "rb")
    except OSError as e:
        raise ModelFileError(f"cannot open model file {path!r}: {e}") from e
    with fp:
        first = fp.readline(64)
        parts = first.strip().split(b" ")
        if len(parts) != 2 or parts[0] != MAGIC:
            raise ModelFileError(f"unrecognized model file {path!r}")
        try:
            version = int(parts[1])
        except ValueError:
            raise ModelFileError(f"unrecognized model file {path!r}") from None
        if version != VERSION:
            raise ModelFileError(
                f"unsupported model file version {version} (supported: {VERSION})"
            )
        (header_len,) = struct.unpack("<Q", _read_exact(fp, 8, "header length"))
        try:
            header = json.loads(_read_exact(fp, header_len, "header"))
        except ValueError as e:
            raise ModelFileError(f"corrupt model header: {e}") from e

        try:
            tf = header["tfidf"]
            tokens = list(tf["tokens"])
            dfs = list(tf["document_frequency"])
            n_documents = int(tf["n_documents"])
            max_features = tf["max_features"]
            label_names = list(header["label_names"])
            sol = header["solver"]
            solver = SolverConfig(
                method=sol["method"], rtol=sol["rtol"], atol=sol["atol"],
                initial_step=sol["initial_step"], max_steps=sol["max_steps"],
                fixed_step_count=sol["fixed_step_count"],
            )
            param_specs = header["params"]
            metadata = header.get("metadata", {})
        except (KeyError, TypeError, ValueError) as e:
            raise ModelFileError(f"malformed model header: {e}") from e
        if len(dfs) != len(tokens):
            raise ModelFileError(
                f"{len(tokens)} tokens but {len(dfs)} document frequencies"
            )

        idf = _unblob(_read_exact(fp, 8 * len(tokens), "idf weights"))
        arrays = {}
        for spec in param_specs:
            name = spec["name"]
            shape = spec["shape"]
            count = 1
            for s in shape:
                count *= s
            arrays[name] = (shape, _unblob(_read_exact(fp, 8 * count, name)))
        trailing = fp.read(1)
        if trailing:
            raise ModelFileError("trailing bytes after the last parameter blob")

    def want(name: str, rank: int):
        if name not in arrays:
            raise ModelFileError(f"model file is missing the {name} section")
        shape, data = arrays[name]
        if len(shape) != rank:
            raise ModelFileError(f"{name} has shape {shape}, expected rank {rank}")
        if rank == 1:
            return Vector(data)
        return Matrix(shape[0], shape[1], data)

    try:
        classifier = NodeClassifier(
            enc_w=want("encoder.weight", 2),
            enc_b=want("encoder.bias", 1),
            dynamics=DynamicsParams(want("dynamics.weight", 2),
                                    want("dynamics.bias", 1)),
            head_w=want("head.weight", 2),
            head_b=want("head.bias", 1),
            solver=solver,
            label_names=label_names,
        )
    except ValueError as e:
        raise ModelFileError(f"inconsistent parameter shapes: {e}") from e

    vocab = Vocabulary(
        token_to_index={t: i for i, t in enumerate(tokens)},
        index_to_token=tokens,
        document_frequency=dict(zip(tokens, dfs)),
        n_documents=n_documents,
    )
    tfidf = TfidfModel(vocab=vocab, idf=Vector(idf), max_features=max_features)
    if tfidf.n_features != classifier.n_features:
        raise ModelFileError(
            f"featurizer has {tfidf.n_features} features, model expects "
            f"{classifier.n_features}"
        )
    return classifier, tfidf, metadata
