"""Named single-qubit channels: depolarizing, dephasing, amplitude damping, rotations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .pauli import I2, X, Y, Z, kraus_to_ptm

__all__ = [
    "ChannelSpec", "make_channel", "make_kraus", "rotation_unitary",
    "depolarizing", "dephasing", "amplitude_damping", "rotation", "null",
    "depol_gate_error", "overrotation_gate_error",
    "depol_p_for_gate_error", "overrotation_angle_for_gate_error",
    "AXES",
]

KINDS = ("depolarizing", "dephasing", "amplitude_damping", "rotation", "null")
AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}


@dataclass(frozen=True)
class ChannelSpec:
    """A named channel.

    ``depolarizing`` takes ``lam`` (PTM diagonal ``1 - lam``, CP for
    ``0 <= lam <= 4/3``).  For the gate-noise map
    ``(1-3p) rho + p (X rho X + Y rho Y + Z rho Z)`` use ``lam = 4 p``.
    ``dephasing`` and ``amplitude_damping`` take ``p``; ``rotation`` takes
    ``axis`` (unit 3-vector or one of ``"x"``, ``"y"``, ``"z"``) and ``angle``.
    """

    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        p = self.params
        if self.kind == "depolarizing":
            lam = float(p["lam"])
            if not 0.0 <= lam <= 4.0 / 3.0:
                raise ValueError(f"depolarizing lam={lam} outside [0, 4/3]")
        elif self.kind in ("dephasing", "amplitude_damping"):
            prob = float(p["p"])
            if not 0.0 <= prob <= 1.0:
                raise ValueError(f"{self.kind} p={prob} outside [0, 1]")
        elif self.kind == "rotation":
            axis = _axis(p["axis"])
            if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
                raise ValueError("rotation axis must be a unit vector")
            float(p["angle"])

    def to_json(self) -> dict:
        params = dict(self.params)
        if "axis" in params and not isinstance(params["axis"], str):
            params["axis"] = [float(a) for a in params["axis"]]
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_json(cls, data: dict) -> "ChannelSpec":
        try:
            return cls(data["kind"], dict(data.get("params", {})))
        except KeyError as exc:
            raise ValueError(f"malformed channel spec {data!r}: missing {exc}") from None


def _axis(axis) -> np.ndarray:
    if isinstance(axis, str):
        return np.array(AXES[axis.lower()])
    return np.asarray(axis, dtype=float)


def depolarizing(lam: float) -> ChannelSpec:
    return ChannelSpec("depolarizing", {"lam": float(lam)})


def dephasing(p: float) -> ChannelSpec:
    return ChannelSpec("dephasing", {"p": float(p)})


def amplitude_damping(p: float) -> ChannelSpec:
    return ChannelSpec("amplitude_damping", {"p": float(p)})


def rotation(axis, angle: float) -> ChannelSpec:
    return ChannelSpec("rotation", {"axis": axis, "angle": float(angle)})


def null() -> ChannelSpec:
    return ChannelSpec("null")


def rotation_unitary(axis, angle: float) -> np.ndarray:
    """``exp(-i angle n.sigma / 2)``."""
    n = _axis(axis)
    return np.cos(angle / 2) * I2 - 1j * np.sin(angle / 2) * (n[0] * X + n[1] * Y + n[2] * Z)


def make_kraus(spec: ChannelSpec) -> list[np.ndarray]:
    p = spec.params
    if spec.kind == "null":
        return [I2.copy()]
    if spec.kind == "depolarizing":
        lam = float(p["lam"])
        return [np.sqrt(1 - 3 * lam / 4) * I2] + [np.sqrt(lam) * P / 2 for P in (X, Y, Z)]
    if spec.kind == "dephasing":
        prob = float(p["p"])
        return [np.sqrt(1 - prob / 2) * I2, np.sqrt(prob / 2) * Z]
    if spec.kind == "amplitude_damping":
        prob = float(p["p"])
        return [np.array([[1, 0], [0, np.sqrt(1 - prob)]], dtype=complex),
                np.array([[0, np.sqrt(prob)], [0, 0]], dtype=complex)]
    return [rotation_unitary(p["axis"], float(p["angle"]))]


def make_channel(spec: ChannelSpec) -> np.ndarray:
    """PTM of the named channel."""
    p = spec.params
    if spec.kind == "null":
        return np.eye(4)
    if spec.kind == "depolarizing":
        return np.diag([1.0] + [1.0 - float(p["lam"])] * 3)
    if spec.kind == "dephasing":
        prob = float(p["p"])
        return np.diag([1.0, 1.0 - prob, 1.0 - prob, 1.0])
    return kraus_to_ptm(make_kraus(spec))


def depol_gate_error(p: float) -> float:
    """Gate error (infidelity) of ``(1-3p) rho + p (X rho X + Y rho Y + Z rho Z)``."""
    if not 0.0 <= p <= 0.25:
        raise ValueError(f"p={p} outside the CP range [0, 1/4]")
    return 2.0 * p


def depol_p_for_gate_error(error: float) -> float:
    return error / 2.0


def overrotation_gate_error(eps: float) -> float:
    """Exact infidelity ``(2 - 2 cos eps) / 6`` of an over-rotation by ``eps`` radians."""
    if not 0.0 <= eps <= np.pi:
        raise ValueError(f"eps={eps} outside [0, pi]")
    return (2.0 - 2.0 * np.cos(eps)) / 6.0


def overrotation_angle_for_gate_error(error: float) -> float:
    if not 0.0 <= error <= 2.0 / 3.0:
        raise ValueError(f"gate error {error} not reachable by an over-rotation")
    return float(np.arccos(1.0 - 3.0 * error))
