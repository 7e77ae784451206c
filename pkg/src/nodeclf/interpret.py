"""Why the classifier decided what it decided.

Two views are provided.  Saliency maps attribute one class's pre-softmax
logit back through the head, the flow, and the encoder to individual
vocabulary words: the score of word j is the mean of |d logit / d x_j|
over the aggregated documents.  Using the logit rather than the
probability keeps near-confident predictions from flattening the scores.
Aggregation runs over the documents the model itself assigns to the
target class (falling back to all supplied documents when it assigns
none), summed in document order so reports are bit-reproducible.

Vector fields sample the learned derivative over a 2D slice of hidden
space.  A plane is either a pair of coordinate axes or two projection
rows; grid points embed with all off-plane coordinates at zero, and the
derivative is projected back onto the plane.  Trajectory export plots
documents' hidden states from t=0 to t=1 on the same plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, TextIO, Union

from . import _backend, adjoint
from .errors import ConfigError
from .linalg import Matrix, Vector, new_buffer
from .model import NodeClassifier, _encode, _log_softmax, _logits, _make_rhs
from .odesolve import dense_trajectory, solve
from .text import TfidfModel, transform

SCORE_DEFINITION = "mean absolute gradient of the class logit w.r.t. the feature"

PlaneSpec = Union[tuple[int, int], Matrix]


@dataclass
class SaliencyReport:
    """Per-word importance scores for one class, sorted descending."""

    class_index: int
    class_name: str
    entries: list[tuple[str, float]]
    n_documents_aggregated: int
    score_definition: str = SCORE_DEFINITION


@dataclass
class VectorFieldGrid:
    """Sampled derivative field over a 2D plane of hidden space."""

    n: int
    plane: tuple
    points: list[tuple[float, float, float, float]]
    trajectories: Optional[list[list[tuple[float, float, float]]]] = None


def _plane_basis(m: NodeClassifier, plane: PlaneSpec) -> tuple[Vector, Vector, tuple]:
    d = m.hidden_dim
    if isinstance(plane, Matrix):
        if plane.rows != 2 or plane.cols != d:
            raise ConfigError(
                f"projection plane must be 2x{d}, got {plane.rows}x{plane.cols}"
            )
        return plane.row(0), plane.row(1), ("projection", plane.tolists())
    i, j = plane
    if d < 2:
        raise ConfigError("coordinate plane needs hidden dimension >= 2")
    if not (0 <= i < d and 0 <= j < d) or i == j:
        raise ConfigError(
            f"plane axes must be two distinct indices in [0, {d}), got ({i}, {j})"
        )
    u = Vector.zeros(d)
    v = Vector.zeros(d)
    u.data[i] = 1.0
    v.data[j] = 1.0
    return u, v, ("axes", i, j)


def input_gradient(m: NodeClassifier, x: Vector, target_class: int) -> Vector:
    """d logit_target / d x for one feature vector."""
    if not 0 <= target_class < m.n_classes:
        raise ConfigError(
            f"class index {target_class} out of range for {m.n_classes} classes"
        )
    h0 = _encode(m, x)
    h1, _ = solve(_make_rhs(m.dynamics), h0, 0.0, 1.0, m.solver)
    dh1 = m.head_w.row(target_class)
    dh0, _ = adjoint.backward(m.dynamics, h1, dh1, 0.0, 1.0, m.solver)
    gx = Vector.zeros(m.n_features)
    _backend.kernels.matvec_t_into(
        gx.data, m.enc_w.data, m.hidden_dim, m.n_features, dh0.data
    )
    return gx


def saliency(m: NodeClassifier, tfidf: TfidfModel, docs: Sequence[str],
             target_class: int) -> SaliencyReport:
    """Word-importance report for ``target_class`` aggregated over ``docs``."""
    if len(docs) == 0:
        raise ConfigError("saliency needs at least one document")
    if not 0 <= target_class < m.n_classes:
        raise ConfigError(
            f"class index {target_class} out of range for {m.n_classes} classes"
        )
    feats = [transform(tfidf, doc) for doc in docs]
    predicted: list[int] = []
    for x in feats:
        h0 = _encode(m, x)
        h1, _ = solve(_make_rhs(m.dynamics), h0, 0.0, 1.0, m.solver)
        probs, _ = _log_softmax(_logits(m, h1))
        best = 0
        for c in range(1, m.n_classes):
            if probs[c] > probs[best]:
                best = c
        predicted.append(best)
    selected = [i for i, p in enumerate(predicted) if p == target_class]
    if not selected:
        selected = list(range(len(docs)))

    acc = new_buffer(m.n_features)
    for i in selected:
        gx = input_gradient(m, feats[i], target_class)
        data = gx.data
        for j in range(len(acc)):
            v = data[j]
            acc[j] += v if v >= 0.0 else -v
    inv = 1.0 / len(selected)
    tokens = tfidf.vocab.index_to_token
    entries = sorted(
        ((tokens[j], acc[j] * inv) for j in range(len(tokens))),
        key=lambda e: (-e[1], e[0]),
    )
    return SaliencyReport(
        class_index=target_class,
        class_name=m.label_names[target_class],
        entries=entries,
        n_documents_aggregated=len(selected),
    )


def top_k(report: SaliencyReport, k: int) -> list[tuple[str, float]]:
    """First min(k, vocabulary size) entries of the sorted report."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return report.entries[:k]


def vector_field(m: NodeClassifier, plane: PlaneSpec,
                 bounds: tuple[float, float, float, float], n: int,
                 t: float = 0.5) -> VectorFieldGrid:
    """Sample the derivative on an n-by-n grid over ``bounds``.

    ``bounds`` is (xmin, xmax, ymin, ymax).  Each grid point is a pure
    function of its (x, y) coordinates, so shared points of different
    grids get identical arrows.
    """
    if n < 2:
        raise ConfigError(f"grid size must be >= 2, got {n}")
    xmin, xmax, ymin, ymax = bounds
    if not (xmin < xmax and ymin < ymax):
        raise ConfigError(f"invalid bounds {bounds!r}: need xmin < xmax and ymin < ymax")
    u, v, desc = _plane_basis(m, plane)
    d = m.hidden_dim
    K = _backend.kernels
    h = Vector.zeros(d)
    f = Vector.zeros(d)
    points: list[tuple[float, float, float, float]] = []
    for iy in range(n):
        y = ymin + (ymax - ymin) * iy / (n - 1)
        for ix in range(n):
            x = xmin + (xmax - xmin) * ix / (n - 1)
            K.scale_into(h.data, x, u.data)
            K.acc_scaled(h.data, y, v.data)
            K.relu_affine_into(f.data, m.dynamics.w.data, m.dynamics.b.data,
                               d, h.data)
            points.append((x, y, K.dot(u.data, f.data), K.dot(v.data, f.data)))
    return VectorFieldGrid(n=n, plane=desc, points=points)


def trajectories(m: NodeClassifier, tfidf: TfidfModel, docs: Sequence[str],
                 plane: PlaneSpec, n_samples: int
                 ) -> list[list[tuple[float, float, float]]]:
    """Hidden-state paths of ``docs`` from t=0 to t=1, projected on ``plane``."""
    u, v, _ = _plane_basis(m, plane)
    K = _backend.kernels
    out = []
    for doc in docs:
        h0 = _encode(m, transform(tfidf, doc))
        samples = dense_trajectory(_make_rhs(m.dynamics), h0, 0.0, 1.0,
                                   m.solver, n_samples)
        out.append([
            (t, K.dot(u.data, h.data), K.dot(v.data, h.data))
            for t, h in samples
        ])
    return out


# ---------------------------------------------------------------------------
# file output


def format_saliency_table(report: SaliencyReport, k: int) -> str:
    rows = top_k(report, k)
    width = max([len("token")] + [len(tok) for tok, _ in rows])
    lines = [
        f"class {report.class_name} "
        f"(aggregated over {report.n_documents_aggregated} docs)",
        f"{'token'.ljust(width)}  score",
    ]
    for tok, score in rows:
        lines.append(f"{tok.ljust(width)}  {score:.6f}")
    return "\n".join(lines)


def write_saliency_csv(report: SaliencyReport, fp: TextIO) -> None:
    fp.write("# nodeclf saliency v1\n")
    fp.write(f"# class={report.class_name} docs={report.n_documents_aggregated} "
             f"score={report.score_definition}\n")
    fp.write("token,score\n")
    for tok, score in report.entries:
        fp.write(f"{tok},{score!r}\n")


def write_vector_field_csv(grid: VectorFieldGrid, fp: TextIO) -> None:
    fp.write("# nodeclf vector-field v1\n")
    fp.write("x,y,dx,dy\n")
    for x, y, dx, dy in grid.points:
        fp.write(f"{x!r},{y!r},{dx!r},{dy!r}\n")


def write_trajectory_csv(path_points: list[tuple[float, float, float]],
                         fp: TextIO) -> None:
    fp.write("# nodeclf trajectory v1\n")
    fp.write("t,x,y\n")
    for t, x, y in path_points:
        fp.write(f"{t!r},{x!r},{y!r}\n")


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def render_quiver_svg(grid: VectorFieldGrid, fp: TextIO, size: int = 640) -> None:
    """Self-contained SVG quiver plot of the field (plus any trajectories)."""
    margin = 40.0
    plot = size - 2 * margin
    xs = [p[0] for p in grid.points]
    ys = [p[1] for p in grid.points]
    xmin, xmax = min(xs), max(xs)
    ymin, ymax = min(ys), max(ys)

    def px(x: float) -> float:
        return margin + (x - xmin) / (xmax - xmin) * plot

    def py(y: float) -> float:
        # SVG y grows downward
        return margin + (ymax - y) / (ymax - ymin) * plot

    cell = plot / (grid.n - 1)
    max_mag = max((p[2] ** 2 + p[3] ** 2) ** 0.5 for p in grid.points)
    scale = 0.0 if max_mag == 0.0 else 0.9 * cell / max_mag

    fp.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
             f'height="{size}" viewBox="0 0 {size} {size}">\n')
    fp.write(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    fp.write(f'<rect x="{margin}" y="{margin}" width="{plot}" height="{plot}" '
             f'fill="none" stroke="#cccccc"/>\n')
    fp.write(f'<text x="{margin}" y="{margin - 10}" font-size="12" '
             f'fill="#333333">field over [{xmin:g}, {xmax:g}] x [{ymin:g}, {ymax:g}], '
             f'plane {grid.plane}</text>\n')
    for x, y, dx, dy in grid.points:
        x0, y0 = px(x), py(y)
        if scale == 0.0 or (dx == 0.0 and dy == 0.0):
            fp.write(f'<circle cx="{x0:.2f}" cy="{y0:.2f}" r="1" fill="#777777"/>\n')
            continue
        # arrow in pixel space; flip dy because the SVG y axis points down
        ux, uy = dx * scale, -dy * scale
        x1, y1 = x0 + ux, y0 + uy
        fp.write(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                 f'stroke="#555555" stroke-width="1"/>\n')
        # arrowhead: two short back-strokes
        hx, hy = -0.25 * ux, -0.25 * uy
        fp.write(f'<line x1="{x1:.2f}" y1="{y1:.2f}" '
                 f'x2="{x1 + hx - 0.4 * hy:.2f}" y2="{y1 + hy + 0.4 * hx:.2f}" '
                 f'stroke="#555555" stroke-width="1"/>\n')
        fp.write(f'<line x1="{x1:.2f}" y1="{y1:.2f}" '
                 f'x2="{x1 + hx + 0.4 * hy:.2f}" y2="{y1 + hy - 0.4 * hx:.2f}" '
                 f'stroke="#555555" stroke-width="1"/>\n')
    if grid.trajectories:
        for i, path in enumerate(grid.trajectories):
            color = _SVG_COLORS[i % len(_SVG_COLORS)]
            pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for _, x, y in path)
            fp.write(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>\n')
            _, x0, y0 = path[0]
            fp.write(f'<circle cx="{px(x0):.2f}" cy="{py(y0):.2f}" r="3" '
                     f'fill="{color}"/>\n')
    fp.write("</svg>\n")
