"""Confining potentials V(x), bounded from below, and their shift constant C0."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


class PotentialKind(str, enum.Enum):
    HARMONIC = "harmonic"
    POWER_LAW = "power_law"
    EXPONENTIAL = "exponential"
    BOUNDED_WELL = "bounded_well"
    TABULATED = "tabulated"
    ZERO = "zero"


@dataclass(frozen=True)
class PotentialSpec:
    """A potential depending on ``x`` only.

    Kinds and formulas:

    * ``harmonic``: ``omega * x**2 / 2``
    * ``power_law``: ``scale * x**exponent`` (even ``exponent >= 2``)
    * ``exponential``: ``exp(rate * |x|)``
    * ``bounded_well``: ``depth`` on ``|x| < width``, ``0`` elsewhere
    * ``tabulated``: ``samples``, one value per x-grid point
    * ``zero``: ``0``
    """

    kind: PotentialKind = PotentialKind.ZERO
    omega: float = 1.0
    exponent: int = 4
    scale: float = 1.0
    rate: float = 1.0
    depth: float = 0.0
    width: float = 1.0
    samples: tuple = field(default=(), repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", PotentialKind(self.kind))
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        k = self.kind
        if k is PotentialKind.HARMONIC and not self.omega > 0:
            raise ConfigurationError(f"harmonic omega must be > 0, got {self.omega}")
        if k is PotentialKind.POWER_LAW:
            if int(self.exponent) != self.exponent or self.exponent < 2 or self.exponent % 2:
                raise ConfigurationError(
                    f"power_law exponent must be an even integer >= 2, got {self.exponent}"
                )
            if not self.scale > 0:
                raise ConfigurationError(f"power_law scale must be > 0, got {self.scale}")
        if k is PotentialKind.EXPONENTIAL and not self.rate > 0:
            raise ConfigurationError(f"exponential rate must be > 0, got {self.rate}")
        if k is PotentialKind.BOUNDED_WELL:
            if not np.isfinite(self.depth):
                raise ConfigurationError("bounded_well depth must be finite")
            if not self.width > 0:
                raise ConfigurationError(f"bounded_well width must be > 0, got {self.width}")
        if k is PotentialKind.TABULATED:
            if len(self.samples) == 0:
                raise ConfigurationError("tabulated potential needs samples")
            if not np.all(np.isfinite(self.samples)):
                raise ConfigurationError("tabulated potential samples must be finite")

    @classmethod
    def harmonic(cls, omega=1.0):
        return cls(PotentialKind.HARMONIC, omega=omega)

    @classmethod
    def power_law(cls, exponent, scale=1.0):
        return cls(PotentialKind.POWER_LAW, exponent=exponent, scale=scale)

    @classmethod
    def exponential(cls, rate=1.0):
        return cls(PotentialKind.EXPONENTIAL, rate=rate)

    @classmethod
    def bounded_well(cls, depth, width):
        return cls(PotentialKind.BOUNDED_WELL, depth=depth, width=width)

    @classmethod
    def tabulated(cls, samples):
        return cls(PotentialKind.TABULATED, samples=tuple(np.asarray(samples, dtype=float).ravel()))

    @classmethod
    def zero(cls):
        return cls(PotentialKind.ZERO)

    @classmethod
    def from_config(cls, cfg, base_dir=None):
        """Build from a config mapping such as ``{"kind": "harmonic", "omega": 1.0}``.

        A tabulated potential may give ``file:``, a one-column plain-text file
        with one sample per x-grid point, resolved relative to ``base_dir``.
        """
        cfg = dict(cfg or {"kind": "zero"})
        try:
            kind = PotentialKind(cfg.pop("kind", "zero"))
        except ValueError as exc:
            raise ConfigurationError(str(exc)) from None
        if kind is PotentialKind.TABULATED and "file" in cfg:
            path = Path(cfg.pop("file"))
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            cfg["samples"] = load_tabulated(path)
        unknown = set(cfg) - _KIND_KEYS[kind]
        if unknown:
            raise ConfigurationError(f"unknown keys for a {kind.value} potential: {sorted(unknown)}")
        if "samples" in cfg:
            cfg["samples"] = tuple(np.asarray(cfg["samples"], dtype=float).ravel())
        return cls(kind, **cfg)

    def to_config(self):
        out = {"kind": self.kind.value}
        if self.kind is PotentialKind.HARMONIC:
            out["omega"] = self.omega
        elif self.kind is PotentialKind.POWER_LAW:
            out.update(exponent=int(self.exponent), scale=self.scale)
        elif self.kind is PotentialKind.EXPONENTIAL:
            out["rate"] = self.rate
        elif self.kind is PotentialKind.BOUNDED_WELL:
            out.update(depth=self.depth, width=self.width)
        elif self.kind is PotentialKind.TABULATED:
            out["samples"] = list(self.samples)
        return out


_KIND_KEYS = {
    PotentialKind.HARMONIC: {"omega"},
    PotentialKind.POWER_LAW: {"exponent", "scale"},
    PotentialKind.EXPONENTIAL: {"rate"},
    PotentialKind.BOUNDED_WELL: {"depth", "width"},
    PotentialKind.TABULATED: {"samples"},
    PotentialKind.ZERO: set(),
}


def load_tabulated(path):
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"tabulated potential file not found: {path}")
    try:
        values = np.loadtxt(path, dtype=float, ndmin=1)
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from None
    if values.ndim != 1:
        raise ConfigurationError(f"{path} must hold a single column")
    return tuple(values)


def eval_potential(spec: PotentialSpec, xs) -> np.ndarray:
    """Evaluate V on the grid points ``xs`` (finite, strictly increasing)."""
    xs = np.asarray(xs, dtype=float)
    if xs.ndim != 1 or not np.all(np.isfinite(xs)):
        raise ConfigurationError("x-grid must be a finite 1D array")
    if xs.size > 1 and not np.all(np.diff(xs) > 0):
        raise ConfigurationError("x-grid must be strictly increasing")
    k = spec.kind
    if k is PotentialKind.HARMONIC:
        v = spec.omega * xs**2 / 2
    elif k is PotentialKind.POWER_LAW:
        v = spec.scale * xs ** int(spec.exponent)
    elif k is PotentialKind.EXPONENTIAL:
        with np.errstate(over="ignore"):
            v = np.exp(spec.rate * np.abs(xs))
    elif k is PotentialKind.BOUNDED_WELL:
        v = np.where(np.abs(xs) < spec.width, spec.depth, 0.0)
    elif k is PotentialKind.TABULATED:
        if len(spec.samples) != xs.size:
            raise ConfigurationError(
                f"tabulated potential has {len(spec.samples)} samples, grid has {xs.size} points"
            )
        v = np.array(spec.samples, dtype=float)
    else:
        v = np.zeros_like(xs)
    if not np.all(np.isfinite(v)):
        raise ConfigurationError(f"{k.value} potential is not finite on the grid")
    return v


def lower_bound_constant(spec: PotentialSpec, xs) -> float:
    """Smallest ``C0 >= 0`` with ``V + C0 >= 0`` at every grid point."""
    v = eval_potential(spec, xs)
    return max(0.0, -float(v.min()))
