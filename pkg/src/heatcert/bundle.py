"""Hermitian vector bundles over a vertex set.

Rank-d fibers with per-vertex Hermitian metrics, unitary edge connections
(one matrix per directed edge), endomorphism fields (matrix potentials),
and the orthonormal-frame trivialization that turns general fiber metrics
into Euclidean coordinates. All spectral code downstream assumes the
trivialized (orthonormal) picture.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import WeightedGraph

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
MAX_RANK = 8


@dataclass(frozen=True)
class HermitianBundle:
    rank: int
    fiber_metric: dict[str, np.ndarray]  # vertex -> d x d Hermitian PD

    def __post_init__(self):
        if not 1 <= self.rank <= MAX_RANK:
            raise ValueError(f"rank must be in [1, {MAX_RANK}], got {self.rank}")
        for v, gmat in self.fiber_metric.items():
            gmat = np.asarray(gmat, dtype=complex)
            if gmat.shape != (self.rank, self.rank):
                raise ValueError(f"metric at {v} has shape {gmat.shape}")
            if np.max(np.abs(gmat - gmat.conj().T)) > HERMITIAN_TOL:
                raise ValueError(f"metric at {v} not Hermitian")
            if np.min(np.linalg.eigvalsh(gmat)) <= 0:
                raise ValueError(f"metric at {v} not positive definite")

    @staticmethod
    def trivial(vertices, rank: int = 1) -> "HermitianBundle":
        eye = np.eye(rank, dtype=complex)
        return HermitianBundle(rank, {v: eye for v in vertices})

    def metric(self, v: str) -> np.ndarray:
        return np.asarray(self.fiber_metric[v], dtype=complex)


@dataclass(frozen=True)
class UnitaryConnection:
    """Per-directed-edge fiber maps phi[(x, y)]: fiber at x -> fiber at y.

    Both directions are stored; construction checks the inverse relation
    phi[(y, x)] = phi[(x, y)]^{-1} and unitarity w.r.t. the fiber metrics.
    """

    rank: int
    phi: dict[tuple[str, str], np.ndarray]
    bundle: HermitianBundle | None = None

    def __post_init__(self):
        for (x, y), m in self.phi.items():
            m = np.asarray(m, dtype=complex)
            if m.shape != (self.rank, self.rank):
                raise ValueError(f"phi({x},{y}) has shape {m.shape}")
            if (y, x) not in self.phi:
                raise ValueError(f"missing reverse edge ({y},{x})")
            back = np.asarray(self.phi[(y, x)], dtype=complex)
            if np.linalg.norm(back @ m - np.eye(self.rank), 2) > UNITARY_TOL:
                raise ValueError(f"phi({y},{x}) is not the inverse of phi({x},{y})")
            gx = self._metric(x)
            gy = self._metric(y)
            # unitarity w.r.t. fiber metrics: phi^* gy phi = gx
            if np.linalg.norm(m.conj().T @ gy @ m - gx, 2) > UNITARY_TOL:
                raise ValueError(f"phi({x},{y}) not unitary w.r.t. fiber metrics")

    def _metric(self, v):
        if self.bundle is None:
            return np.eye(self.rank, dtype=complex)
        return self.bundle.metric(v)

    def get(self, x: str, y: str) -> np.ndarray:
        return np.asarray(self.phi[(x, y)], dtype=complex)

    @staticmethod
    def trivial(g: WeightedGraph, rank: int = 1) -> "UnitaryConnection":
        eye = np.eye(rank, dtype=complex)
        phi = {}
        for pair in g.b:
            if len(pair) == 2:
                u, v = tuple(pair)
                phi[(u, v)] = eye
                phi[(v, u)] = eye
        return UnitaryConnection(rank, phi)

    @staticmethod
    def from_edge_phases(g: WeightedGraph, phases: dict[tuple[str, str], float]
                         ) -> "UnitaryConnection":
        """Rank-1 magnetic connection: phi(x, y) = exp(i theta(x, y))."""
        phi = {}
        for (u, v), theta in phases.items():
            phi[(u, v)] = np.array([[np.exp(1j * theta)]])
            phi[(v, u)] = np.array([[np.exp(-1j * theta)]])
        return UnitaryConnection(1, phi)


@dataclass(frozen=True)
class EndomorphismField:
    """Per-vertex d x d matrix potential, optionally flagged structured."""

    rank: int
    values: dict[str, np.ndarray]
    self_adjoint: bool = False
    nonnegative: bool = False

    def __post_init__(self):
        for v, m in self.values.items():
            m = np.asarray(m, dtype=complex)
            if m.shape != (self.rank, self.rank):
                raise ValueError(f"W({v}) has shape {m.shape}")
            if self.self_adjoint and np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
                raise ValueError(f"W({v}) flagged self-adjoint but is not")
            if self.nonnegative:
                if np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T))) < -HERMITIAN_TOL:
                    raise ValueError(f"W({v}) flagged nonnegative but is not")

    @staticmethod
    def scalar(values: dict[str, float], **flags) -> "EndomorphismField":
        vals = {v: np.array([[complex(w)]]) for v, w in values.items()}
        sa = all(abs(complex(w).imag) == 0 for w in values.values())
        nn = sa and all(complex(w).real >= 0 for w in values.values())
        flags.setdefault("self_adjoint", sa)
        flags.setdefault("nonnegative", nn)
        return EndomorphismField(1, vals, **flags)

    @staticmethod
    def zero(vertices, rank: int = 1) -> "EndomorphismField":
        z = np.zeros((rank, rank), dtype=complex)
        return EndomorphismField(rank, {v: z for v in vertices},
                                 self_adjoint=True, nonnegative=True)

    def get(self, v: str) -> np.ndarray:
        return np.asarray(self.values[v], dtype=complex)


@dataclass(frozen=True)
class Section:
    rank: int
    values: dict[str, np.ndarray]  # vertex -> fiber vector in C^d

    def __post_init__(self):
        for v, vec in self.values.items():
            if np.asarray(vec).shape != (self.rank,):
                raise ValueError(f"fiber vector at {v} has wrong length")

    def get(self, v: str) -> np.ndarray:
        return np.asarray(self.values[v], dtype=complex)


def pointwise_norm(f: Section, bundle: HermitianBundle) -> dict[str, float]:
    """x -> |f(x)|_x, the fiber-metric norm of the section."""
    if f.rank != bundle.rank:
        raise ValueError("rank mismatch between section and bundle")
    out = {}
    for v in f.values:
        vec = f.get(v)
        out[v] = float(np.sqrt(np.real(vec.conj() @ bundle.metric(v) @ vec)))
    return out


def endo_norm(W: EndomorphismField, bundle: HermitianBundle) -> dict[str, float]:
    """x -> operator norm of W(x) w.r.t. the fiber metric.

    Whitening by the metric Cholesky factor reduces to a Euclidean 2-norm.
    """
    if W.rank != bundle.rank:
        raise ValueError("rank mismatch between field and bundle")
    out = {}
    for v in W.values:
        L = np.linalg.cholesky(bundle.metric(v))
        whitened = L.conj().T @ W.get(v) @ np.linalg.inv(L.conj().T)
        out[v] = float(np.linalg.norm(whitened, 2))
    return out


@dataclass(frozen=True)
class Frame:
    """Per-vertex orthonormal frame; columns of basis[v] are frame vectors."""

    rank: int
    basis: dict[str, np.ndarray]
    coeff_map: dict[str, np.ndarray] = field(repr=False, default=None)


def gram_schmidt_frame(bundle: HermitianBundle) -> Frame:
    """Orthonormal frame per vertex, via the metric Cholesky factor.

    With metric G = L L^*, the frame vectors are the columns of (L^*)^{-1}
    and the coefficient map (trivialization) is multiplication by L^*.
    """
    basis, coeff = {}, {}
    for v in bundle.fiber_metric:
        gmat = bundle.metric(v)
        if np.linalg.cond(gmat) > 1e12:
            raise ValueError(f"fiber metric at {v} numerically singular")
        L = np.linalg.cholesky(gmat)
        basis[v] = np.linalg.inv(L.conj().T)
        coeff[v] = L.conj().T
    return Frame(bundle.rank, basis, coeff)


def trivialize(f: Section, frame: Frame) -> Section:
    """Frame coefficients of f; an isometry onto Euclidean fibers."""
    return Section(frame.rank, {v: frame.coeff_map[v] @ f.get(v) for v in f.values})


def untrivialize(c: Section, frame: Frame) -> Section:
    return Section(frame.rank, {v: frame.basis[v] @ c.get(v) for v in c.values})


def decompose_potential(W: EndomorphismField, rule: str, bundle: HermitianBundle,
                        *, threshold: float | None = None,
                        support=None, explicit=None):
    """Split W = W1 + W2 by threshold, support set, or explicit parts.

    threshold: W1 carries vertices with |W(x)| > c, so sup |W2| <= c.
    support:   W1 carries the given vertex subset.
    explicit:  caller supplies (W1, W2); checked to recombine exactly.
    """
    verts = list(W.values)
    zero = np.zeros((W.rank, W.rank), dtype=complex)
    flags = dict(self_adjoint=W.self_adjoint)
    if rule == "threshold":
        if threshold is None:
            raise ValueError("threshold rule needs a cut value")
        norms = endo_norm(W, bundle)
        carrier = {v for v in verts if norms[v] > threshold}
    elif rule == "support":
        if support is None:
            raise ValueError("support rule needs a vertex subset")
        carrier = set(support)
    elif rule == "explicit":
        w1, w2 = explicit
        for v in verts:
            if np.max(np.abs(w1.get(v) + w2.get(v) - W.get(v))) > 1e-12:
                raise ValueError(f"explicit split fails W1+W2=W at {v}")
        return w1, w2
    else:
        raise ValueError(f"unknown split rule {rule!r}")
    w1 = {v: (W.get(v) if v in carrier else zero) for v in verts}
    w2 = {v: (W.get(v) - w1[v]) for v in verts}
    return (EndomorphismField(W.rank, w1, **flags),
            EndomorphismField(W.rank, w2, **flags))


# ---------------------------------------------------------------------------
# file format

def _complex_matrix_to_json(m):
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m, dtype=complex)]


def _complex_matrix_from_json(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows])


def load_bundle(path, vertices):
    """Load (bundle, connection, potentials) from the JSON bundle format."""
    with open(path) as fh:
        doc = json.load(fh)
    rank = int(doc["rank"])
    metric_spec = doc.get("metric", "identity")
    if metric_spec == "identity":
        bundle = HermitianBundle.trivial(vertices, rank)
    else:
        bundle = HermitianBundle(
            rank, {v: _complex_matrix_from_json(metric_spec[v]) for v in vertices})
    phi = {}
    for entry in doc.get("connection", []):
        m = _complex_matrix_from_json(entry["phi"])
        phi[(entry["u"], entry["v"])] = m
        phi.setdefault((entry["v"], entry["u"]), np.linalg.inv(m))
    connection = UnitaryConnection(rank, phi, bundle=bundle) if phi else None
    potentials = {}
    for name, values in doc.get("potentials", {}).items():
        potentials[name] = EndomorphismField(
            rank, {v: _complex_matrix_from_json(values[v]) for v in values},
            self_adjoint=True)
    return bundle, connection, potentials


def dump_bundle(path, bundle: HermitianBundle, connection=None, potentials=None):
    doc = {"rank": bundle.rank, "metric": "identity"}
    if connection is not None:
        seen = set()
        entries = []
        for (u, v) in sorted(connection.phi):
            if (v, u) in seen:
                continue
            seen.add((u, v))
            entries.append({"u": u, "v": v,
                            "phi": _complex_matrix_to_json(connection.get(u, v))})
        doc["connection"] = entries
    if potentials:
        doc["potentials"] = {
            name: {v: _complex_matrix_to_json(W.get(v)) for v in W.values}
            for name, W in potentials.items()}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
