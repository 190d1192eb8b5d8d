"""Gate sets, fiducial bookkeeping, circuit probabilities, gauges and distances."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .channels import make_channel, rotation
from .pauli import is_cptp, state_vector

__all__ = [
    "GateSet", "Circuit", "default_gateset", "example1_gateset",
    "fiducial_ptm", "circuit_word", "word_probability", "circuit_probability",
    "standard_circuits", "spam_matrices", "gauge_transform",
    "avg_fidelity", "spectral_distance", "gate_error", "estimation_error",
    "RHO_ZERO", "EFFECT_ONE",
]

#: ``|0><0|`` as an HS vector.
RHO_ZERO = state_vector(np.diag([1.0, 0.0]))
#: ``|1><1|`` as an HS covector.
EFFECT_ONE = state_vector(np.diag([0.0, 1.0]))

# (i, j, k): effect-side fiducial i, state-side fiducial j, middle gate k.
# k = -1 marks a pure-fiducial row <<E|F_i F_j|rho>>, and j = k = -1 a
# single-fiducial row <<E|F_i|rho>>.
Circuit = tuple[int, int, int]


def _frozen(a, shape) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(shape)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class GateSet:
    """``{rho, E, G_0..G_K}`` as HS vectors and PTMs, plus fiducial gate strings.

    ``fiducials[n]`` lists gate indices with the leftmost gate applied last,
    i.e. ``(1, 2)`` is ``G_1 o G_2`` with PTM ``R_1 @ R_2``.
    """

    rho: np.ndarray
    effect: np.ndarray
    gates: tuple
    labels: tuple = ()
    fiducials: tuple = ((),)

    def __post_init__(self):
        gates = tuple(_frozen(g, (4, 4)) for g in self.gates)
        if not gates:
            raise ValueError("gate set needs at least the null gate")
        if not np.array_equal(gates[0], np.eye(4)):
            raise ValueError("G_0 must be the exact identity (null gate)")
        labels = tuple(self.labels) or tuple(f"G{k}" for k in range(len(gates)))
        if len(labels) != len(gates):
            raise ValueError("one label per gate required")
        fids = tuple(tuple(int(g) for g in f) for f in self.fiducials)
        if not fids or fids[0] != ():
            raise ValueError("the first fiducial must be the empty (null) string")
        for f in fids:
            if any(g < 0 or g >= len(gates) for g in f):
                raise ValueError(f"fiducial {f} references an unknown gate")
        object.__setattr__(self, "rho", _frozen(self.rho, (4,)))
        object.__setattr__(self, "effect", _frozen(self.effect, (4,)))
        object.__setattr__(self, "gates", gates)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "fiducials", fids)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @property
    def n_fiducials(self) -> int:
        return len(self.fiducials)

    def replace(self, **changes) -> "GateSet":
        fields = dict(rho=self.rho, effect=self.effect, gates=self.gates,
                      labels=self.labels, fiducials=self.fiducials)
        fields.update(changes)
        return GateSet(**fields)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def to_json(self) -> dict:
        return {
            "rho": self.rho.tolist(),
            "effect": self.effect.tolist(),
            "gates": [{"label": lab, "ptm": g.reshape(16).tolist()}
                      for lab, g in zip(self.labels, self.gates)],
            "fiducials": [list(f) for f in self.fiducials],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GateSet":
        try:
            return cls(
                rho=data["rho"], effect=data["effect"],
                gates=[np.reshape(g["ptm"], (4, 4)) for g in data["gates"]],
                labels=[g["label"] for g in data["gates"]],
                fiducials=data["fiducials"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed gate set: {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1))

    @classmethod
    def load(cls, path) -> "GateSet":
        return cls.from_json(json.loads(Path(path).read_text()))


def default_gateset() -> GateSet:
    """``{null, X_pi/2, Y_pi/2, X_pi}`` with fiducials equal to the gates,
    ``rho = |0><0|`` and ``E = |1><1|``."""
    gates = [np.eye(4),
             make_channel(rotation("x", np.pi / 2)),
             make_channel(rotation("y", np.pi / 2)),
             make_channel(rotation("x", np.pi))]
    return GateSet(RHO_ZERO, EFFECT_ONE, gates,
                   labels=("null", "Xpi2", "Ypi2", "Xpi"),
                   fiducials=((), (1,), (2,), (3,)))


def example1_gateset() -> GateSet:
    """``{null, X_pi/2, Y_pi/2}`` with fiducials ``{null, X, Y, X o X}``."""
    gates = [np.eye(4),
             make_channel(rotation("x", np.pi / 2)),
             make_channel(rotation("y", np.pi / 2))]
    return GateSet(RHO_ZERO, EFFECT_ONE, gates,
                   labels=("null", "Xpi2", "Ypi2"),
                   fiducials=((), (1,), (2,), (1, 1)))


def _product(gs: GateSet, word: Sequence[int]) -> np.ndarray:
    out = np.eye(4)
    for g in word:
        out = out @ gs.gates[g]
    return out


def fiducial_ptm(gs: GateSet, f: int) -> np.ndarray:
    if not 0 <= f < gs.n_fiducials:
        raise IndexError(f"fiducial index {f} out of range")
    return _product(gs, gs.fiducials[f])


def circuit_word(gs: GateSet, circuit: Circuit) -> tuple[int, ...]:
    """Gate indices of a circuit, leftmost applied last; null gates dropped."""
    i, j, k = circuit
    word = list(gs.fiducials[i])
    if k >= 0:
        word.append(k)
    if j >= 0:
        word.extend(gs.fiducials[j])
    return tuple(g for g in word if g != 0)


def word_probability(gs: GateSet, word: Sequence[int]) -> float:
    return float(gs.effect @ _product(gs, word) @ gs.rho)


def circuit_probability(gs: GateSet, i: int, j: int, k: int) -> float:
    """``<<E| F_i G_k F_j |rho>>``; pass ``k = -1`` / ``j = -1`` for the reduced forms."""
    if not 0 <= i < gs.n_fiducials or not -1 <= j < gs.n_fiducials or not -1 <= k < gs.n_gates:
        raise IndexError(f"circuit {(i, j, k)} out of range")
    return word_probability(gs, circuit_word(gs, (i, j, k)))


def standard_circuits(n_fiducials: int, n_gates: int) -> list[Circuit]:
    """All ``(i, j, k)`` rows, then ``(i, j, -1)``, then ``(i, -1, -1)``."""
    out = [(i, j, k) for k in range(n_gates) for i in range(n_fiducials) for j in range(n_fiducials)]
    out += [(i, j, -1) for i in range(n_fiducials) for j in range(n_fiducials)]
    out += [(i, -1, -1) for i in range(n_fiducials)]
    return out


def iter_circuits(gs: GateSet) -> Iterator[Circuit]:
    return iter(standard_circuits(gs.n_fiducials, gs.n_gates))


def spam_matrices(gs: GateSet) -> tuple[np.ndarray, np.ndarray]:
    """``A[i, r] = <<E|F_i|r>>`` and ``B[s, j] = <<s|F_j|rho>>``."""
    a = np.array([gs.effect @ fiducial_ptm(gs, i) for i in range(gs.n_fiducials)])
    b = np.array([fiducial_ptm(gs, j) @ gs.rho for j in range(gs.n_fiducials)]).T
    return a, b


def gauge_transform(gs: GateSet, b, tol: float = 1e-12) -> GateSet:
    """``E -> E B``, ``rho -> B^-1 rho``, ``G_k -> B^-1 G_k B`` (null gate kept exact)."""
    b = np.asarray(b, dtype=float)
    if abs(np.linalg.det(b)) <= tol:
        raise ValueError("gauge matrix is singular")
    binv = np.linalg.inv(b)
    gates = [np.eye(4)] + [binv @ g @ b for g in gs.gates[1:]]
    return gs.replace(rho=binv @ gs.rho, effect=gs.effect @ b, gates=gates)


def avg_fidelity(a, b) -> float:
    """``(Tr{R_a^-1 R_b} + 2) / 6``.

    This is the average gate fidelity when ``a`` is unitary; put the reference
    (ideal or actual) gate first.
    """
    a = np.asarray(a, dtype=float)
    if abs(np.linalg.det(a)) < 1e-14:
        raise ValueError("first argument must be invertible")
    return float((np.trace(np.linalg.solve(a, np.asarray(b, dtype=float))) + 2.0) / 6.0)


def spectral_distance(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, dtype=float) - np.asarray(b, dtype=float), 2))


def gate_error(actual, ideal) -> float:
    """Infidelity of ``actual`` relative to the (unitary) ``ideal`` gate."""
    return 1.0 - avg_fidelity(ideal, actual)


def estimation_error(estimate, actual, metric: str = "auto", tol: float = 1e-6) -> tuple[float, str]:
    """Distance of an estimated PTM from the actual one.

    ``metric="auto"`` reports the infidelity when the estimate is CPTP within
    ``tol`` and falls back to the spectral norm of the difference otherwise.
    """
    if metric == "auto":
        metric = "infidelity" if is_cptp(estimate, tol) else "spectral"
    if metric == "infidelity":
        return 1.0 - avg_fidelity(actual, estimate), metric
    if metric == "spectral":
        return spectral_distance(estimate, actual), metric
    raise ValueError(f"unknown metric {metric!r}")
