"""Palm samples of a unit-intensity Poisson process on a periodic box.

Every trial owns an independent random stream derived from
``(base_seed, trial_index[, attempt])`` through :class:`numpy.random.SeedSequence`
feeding a Philox counter-based generator, so a trial can be regenerated in
isolation and results never depend on execution order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import unit_ball_volume

RNG_FAMILY = f"numpy-{np.__version__}/SeedSequence+Philox4x64"

# The default side puts the guard radius side/8 at void probability e^-12.
_GUARD_VOID_MASS = 12.0


class SampleError(RuntimeError):
    """Raised when a realized configuration is unusable (fewer than two points)."""


@dataclass(frozen=True)
class WindowSpec:
    d: int
    side: float
    min_points_guard: int = 2

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        if not self.side > 0:
            raise ValueError(f"side must be positive, got {self.side!r}")
        if self.volume < 2:
            raise ValueError(f"expected point count side^d = {self.volume:.3g} must be >= 2")

    @property
    def volume(self) -> float:
        return float(self.side) ** self.d

    def doubled(self) -> "WindowSpec":
        return WindowSpec(self.d, 2.0 * self.side, self.min_points_guard)


def default_side(d: int) -> float:
    """Torus side for dimension d: eight times the radius whose ball holds mass 12."""
    return 8.0 * (_GUARD_VOID_MASS / unit_ball_volume(d)) ** (1.0 / d)


def default_window(d: int) -> WindowSpec:
    return WindowSpec(d, default_side(d))


@dataclass(frozen=True)
class SeedSpec:
    base_seed: int
    trial_index: int
    attempt: int = 0

    def __post_init__(self):
        if self.base_seed < 0 or self.trial_index < 0 or self.attempt < 0:
            raise ValueError("seed components must be nonnegative")

    def generator(self) -> np.random.Generator:
        key = (self.trial_index,) if self.attempt == 0 else (self.trial_index, self.attempt)
        ss = np.random.SeedSequence(self.base_seed, spawn_key=key)
        return np.random.Generator(np.random.Philox(ss))


@dataclass
class Sample:
    window: WindowSpec
    points: np.ndarray
    origin_index: int
    seed: SeedSpec | None = field(default=None, compare=False)

    @property
    def n_points(self) -> int:
        return len(self.points)

    def to_json(self) -> dict:
        return {
            "d": self.window.d,
            "side": self.window.side,
            "seed": None if self.seed is None else {
                "base": self.seed.base_seed, "trial": self.seed.trial_index,
                "attempt": self.seed.attempt,
            },
            "points": self.points.tolist(),
            "origin_index": self.origin_index,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Sample":
        d = int(obj["d"])
        pts = np.asarray(obj["points"], dtype=float).reshape(-1, d)
        seed = obj.get("seed")
        seed_spec = None
        if seed is not None:
            seed_spec = SeedSpec(int(seed["base"]), int(seed["trial"]), int(seed.get("attempt", 0)))
        return cls(WindowSpec(d, float(obj["side"])), pts, int(obj["origin_index"]), seed_spec)

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "Sample":
        return cls.from_json(json.loads(Path(path).read_text()))

    def shifted(self, shift) -> "Sample":
        """Copy with every point translated by ``shift`` modulo the side."""
        side = self.window.side
        pts = np.mod(self.points + np.asarray(shift, dtype=float), side)
        pts[pts >= side] = 0.0
        return Sample(self.window, pts, self.origin_index, self.seed)


def sample_palm(window: WindowSpec, seed: SeedSpec) -> Sample:
    """Poisson(side^d) uniform points on the torus plus an extra point at the origin.

    The origin is appended last, so ``origin_index == len(points) - 1``.
    """
    rng = seed.generator()
    n = int(rng.poisson(window.volume))
    pts = rng.random((n, window.d)) * window.side
    pts[pts >= window.side] = 0.0
    pts = np.vstack([pts, np.zeros((1, window.d))])
    if len(pts) < max(2, window.min_points_guard):
        raise SampleError(f"realized configuration has {len(pts)} point(s)")
    return Sample(window, pts, n, seed)


def extend_palm(sample: Sample, seed: SeedSpec) -> Sample:
    """Embed ``sample`` as the central cube of a torus with twice the side.

    The old points keep their positions relative to the origin (taken in
    [-side/2, side/2)^d) and only the new shell receives fresh Poisson points,
    so the result is again a Palm sample and the two boxes are coupled.
    """
    old = sample.window
    new = old.doubled()
    rng = seed.generator()
    half = 0.5 * old.side
    o = sample.points[sample.origin_index]
    centred = np.mod(sample.points - o + half, old.side) - half
    k = int(rng.poisson(new.volume))
    fresh = (rng.random((k, old.d)) - 0.5) * new.side
    fresh = fresh[np.any((fresh < -half) | (fresh >= half), axis=1)]
    rest = np.delete(centred, sample.origin_index, axis=0)
    pts = np.mod(np.vstack([rest, fresh]), new.side)
    pts[pts >= new.side] = 0.0
    pts = np.vstack([pts, np.zeros((1, old.d))])
    return Sample(new, pts, len(pts) - 1, seed)


def torus_delta(p, q, side: float) -> np.ndarray:
    """Per-coordinate minimum-image separation |p - q| on a torus of the given side."""
    dx = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    return np.minimum(dx, side - dx)


def torus_distance(p, q, window: WindowSpec | float):
    side = window.side if isinstance(window, WindowSpec) else float(window)
    dx = torus_delta(p, q, side)
    return np.sqrt(np.sum(dx * dx, axis=-1))


def torus_norm(points, window: WindowSpec | float):
    return torus_distance(points, np.zeros(np.shape(points)[-1]), window)


def void_probability(r, d: int):
    """P(no point within distance r of the origin) = exp(-pi_d r^d)."""
    return np.exp(-unit_ball_volume(d) * np.asarray(r, dtype=float) ** d)


def expected_nn_distance(d: int) -> float:
    """Mean distance to the nearest neighbor at unit intensity, Gamma(1 + 1/d) pi_d^(-1/d)."""
    return math.gamma(1.0 + 1.0 / d) * unit_ball_volume(d) ** (-1.0 / d)
