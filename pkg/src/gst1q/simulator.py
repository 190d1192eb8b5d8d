"""Synthetic GST experiments: noisy "true" gate sets and finite-shot datasets."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channels import ChannelSpec, make_channel
from .gateset import Circuit, GateSet, circuit_word, standard_circuits, word_probability
from .pauli import is_cptp

__all__ = [
    "ErrorModel", "ExperimentRecord", "Dataset", "DatasetFormatError",
    "build_true_gateset", "run_protocol", "config_hash", "sampling_error_bounds",
    "DATASET_VERSION", "BERNOULLI_MAX_SHOTS",
]

DATASET_VERSION = 1
BERNOULLI_MAX_SHOTS = 100_000


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorModel:
    """Channels composed after the ideal operations.

    ``gates`` maps a gate label, a gate index, or ``"*"`` (every non-null
    gate) to the channels applied after that gate, in order.  ``rho`` acts on
    the prepared state and ``effect`` acts just before the measurement.
    """

    gates: Mapping[object, Sequence[ChannelSpec]] = field(default_factory=dict)
    rho: Sequence[ChannelSpec] = ()
    effect: Sequence[ChannelSpec] = ()

    @property
    def is_empty(self) -> bool:
        return not any(self.gates.values()) and not self.rho and not self.effect

    def channels_for(self, gs: GateSet, k: int) -> list[ChannelSpec]:
        out: list[ChannelSpec] = []
        for key, specs in self.gates.items():
            if key == "*" or key == k or key == gs.labels[k] or (isinstance(key, str) and key.isdigit() and int(key) == k):
                out.extend(specs)
        return out

    def to_json(self) -> dict:
        return {
            "gates": {str(k): [s.to_json() for s in v] for k, v in self.gates.items()},
            "rho": [s.to_json() for s in self.rho],
            "effect": [s.to_json() for s in self.effect],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "ErrorModel":
        return cls(
            gates={k: [ChannelSpec.from_json(s) for s in v] for k, v in data.get("gates", {}).items()},
            rho=[ChannelSpec.from_json(s) for s in data.get("rho", [])],
            effect=[ChannelSpec.from_json(s) for s in data.get("effect", [])],
        )


def _chain(specs: Iterable[ChannelSpec]) -> np.ndarray:
    out = np.eye(4)
    for spec in specs:
        out = make_channel(spec) @ out
    return out


def build_true_gateset(ideal: GateSet, err: ErrorModel) -> GateSet:
    """Apply an error model to an ideal gate set; the null gate stays exact."""
    if err.is_empty:
        return ideal
    gates = [np.eye(4)]
    for k in range(1, ideal.n_gates):
        gates.append(_chain(err.channels_for(ideal, k)) @ ideal.gates[k])
    true = ideal.replace(rho=_chain(err.rho) @ ideal.rho,
                         effect=ideal.effect @ _chain(err.effect), gates=gates)
    for g in true.gates:
        if not is_cptp(g, 1e-9):
            raise ValueError("error model produced a non-CPTP gate")
    return true


@dataclass(frozen=True)
class ExperimentRecord:
    """One measured circuit.  ``n == 0`` marks an exact (infinite-shot) mean."""

    i: int
    j: int
    k: int
    n: int
    successes: int
    mean: float

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.successes <= max(self.n, 0):
            raise ValueError(f"invalid counts n={self.n}, successes={self.successes}")

    @property
    def circuit(self) -> Circuit:
        return (self.i, self.j, self.k)

    def to_json(self) -> dict:
        return {"i": self.i, "j": self.j, "k": self.k, "n": self.n,
                "successes": self.successes, "mean": self.mean}


@dataclass(frozen=True, eq=False)
class Dataset:
    records: tuple
    seed: int | None = None
    config_hash: str = ""
    truth: GateSet | None = None
    config: dict | None = None

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        index = {}
        for r in self.records:
            if r.circuit in index:
                raise ValueError(f"duplicate record for circuit {r.circuit}")
            index[r.circuit] = r
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        return isinstance(other, Dataset) and self.to_json() == other.to_json()

    def __contains__(self, circuit) -> bool:
        return tuple(circuit) in self._index

    def __getitem__(self, circuit) -> ExperimentRecord:
        try:
            return self._index[tuple(circuit)]
        except KeyError:
            raise KeyError(f"dataset has no record for circuit {tuple(circuit)}") from None

    @property
    def infinite_shots(self) -> bool:
        return all(r.n == 0 for r in self.records)

    def missing(self, n_fiducials: int, n_gates: int) -> list[Circuit]:
        """Circuits of the standard design that have no record."""
        return [c for c in standard_circuits(n_fiducials, n_gates) if c not in self._index]

    def subset(self, circuits: Iterable[Circuit]) -> "Dataset":
        return Dataset(tuple(self[c] for c in circuits), self.seed, self.config_hash, self.truth, self.config)

    def to_json(self) -> dict:
        out = {
            "version": DATASET_VERSION,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "records": [r.to_json() for r in self.records],
        }
        if self.config is not None:
            out["config"] = self.config
        if self.truth is not None:
            out["truth"] = self.truth.to_json()
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def from_json(cls, data: Mapping) -> "Dataset":
        if not isinstance(data, Mapping) or "records" not in data:
            raise DatasetFormatError("dataset must be an object with a 'records' list")
        if data.get("version") != DATASET_VERSION:
            raise DatasetFormatError(f"unsupported dataset version {data.get('version')!r}")
        try:
            records = [ExperimentRecord(int(r["i"]), int(r["j"]), int(r["k"]), int(r["n"]),
                                        int(r["successes"]), float(r["mean"])) for r in data["records"]]
            truth = GateSet.from_json(data["truth"]) if data.get("truth") else None
            return cls(tuple(records), data.get("seed"), data.get("config_hash", ""), truth, data.get("config"))
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetFormatError(f"malformed dataset: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "Dataset":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetFormatError(f"dataset is not valid JSON: {exc}") from exc
        return cls.from_json(data)

    @classmethod
    def load(cls, path) -> "Dataset":
        return cls.loads(Path(path).read_text())


def config_hash(config: Mapping) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()


def _is_infinite(shots) -> bool:
    return shots is None or shots == 0 or (isinstance(shots, float) and math.isinf(shots)) \
        or (isinstance(shots, str) and shots.lower() in ("inf", "infinite"))


def _sample(p: float, n: int, seed: int, index: int) -> int:
    # one substream per circuit so results do not depend on evaluation order
    rng = np.random.default_rng(np.random.SeedSequence([seed, index]))
    if n <= BERNOULLI_MAX_SHOTS:
        return int(np.count_nonzero(rng.random(n) < p))
    return int(rng.binomial(n, p))


def run_protocol(true_gs: GateSet, shots=None, seed: int = 0,
                 circuits: Sequence[Circuit] | None = None,
                 config: dict | None = None, attach_truth: bool = True) -> Dataset:
    """Measure every circuit of the standard design against ``true_gs``.

    ``shots`` of ``None``, ``0``, ``inf`` or ``"inf"`` stores exact
    probabilities (``n = 0``); otherwise ``successes ~ Binomial(shots, p)``.
    """
    if circuits is None:
        circuits = standard_circuits(true_gs.n_fiducials, true_gs.n_gates)
    infinite = _is_infinite(shots)
    n = 0 if infinite else int(shots)
    if not infinite and n <= 0:
        raise ValueError("shots must be positive")
    records = []
    for index, c in enumerate(circuits):
        p = min(max(word_probability(true_gs, circuit_word(true_gs, c)), 0.0), 1.0)
        if infinite:
            records.append(ExperimentRecord(*c, n=0, successes=0, mean=p))
        else:
            s = _sample(p, n, seed, index)
            records.append(ExperimentRecord(*c, n=n, successes=s, mean=s / n))
    cfg = config if config is not None else {"shots": "inf" if infinite else n, "seed": seed,
                                             "truth": true_gs.to_json()}
    return Dataset(tuple(records), seed, config_hash(cfg),
                   true_gs if attach_truth else None, config)


def sampling_error_bounds(n: int) -> dict[str, float]:
    """Largest binomial standard deviation of a mean, and the tighter 1/(4 sqrt n) figure."""
    return {"max_std": 1.0 / (2.0 * math.sqrt(n)), "quarter_root_n": 1.0 / (4.0 * math.sqrt(n))}
