"""Exact infinite-volume exploration of the directed NN chain from the Palm origin.

Points are revealed lazily: the process is only ever sampled inside a union of
balls, and a new ball receives fresh Poisson points only in the part not
already covered (thinning against the earlier balls). Independence of Poisson
counts over disjoint regions makes the revealed configuration an exact sample
of the infinite-volume process, with no window and no boundary effects. This
is what makes generation numbers reachable in high dimension, where any torus
holding a few nearest-neighbor scales per side would need billions of points.

Only nearest-neighbor queries are supported; in-neighbors (and hence whole
components) are out of reach, so extent and path statistics stay with the torus
sampler.
"""
from __future__ import annotations

import math

import numpy as np

from .geometry import uniform_in_ball, unit_ball_volume

# first query radius holds Poisson mass 2, so about 86% of queries finish in one ball
_FIRST_MASS = 2.0


class LocalPalmExplorer:
    """Lazily revealed unit-intensity Poisson process in R^d with a point at the origin."""

    def __init__(self, d: int, rng: np.random.Generator):
        self.d = d
        self.rng = rng
        self.kappa = unit_ball_volume(d)
        self._pts = np.zeros((16, d))
        self.n = 1  # index 0 is the origin
        self._centers = np.zeros((0, d))
        self._radii = np.zeros(0)
        self.r0 = (_FIRST_MASS / self.kappa) ** (1.0 / d)

    @property
    def points(self) -> np.ndarray:
        return self._pts[: self.n]

    def _append(self, new: np.ndarray) -> None:
        need = self.n + len(new)
        if need > len(self._pts):
            grown = np.zeros((max(need, 2 * len(self._pts)), self.d))
            grown[: self.n] = self._pts[: self.n]
            self._pts = grown
        self._pts[self.n: need] = new
        self.n = need

    def reveal_ball(self, center: np.ndarray, radius: float) -> int:
        """Sample the process in B(center, radius) minus the already revealed region."""
        k = int(self.rng.poisson(self.kappa * radius**self.d))
        if k:
            cand = center + uniform_in_ball(self.rng, k, self.d, radius)
            if len(self._radii):
                diff = cand[:, None, :] - self._centers[None, :, :]
                d2 = np.einsum("ijk,ijk->ij", diff, diff)
                fresh = np.all(d2 >= self._radii[None, :] ** 2, axis=1)
                cand = cand[fresh]
            if len(cand):
                self._append(cand)
        self._centers = np.vstack([self._centers, center[None, :]])
        self._radii = np.append(self._radii, radius)
        return k

    def nearest(self, i: int) -> tuple[int, float]:
        """Index of and distance to the nearest neighbor of revealed point i."""
        x = self._pts[i].copy()
        r = self.r0
        while True:
            self.reveal_ball(x, r)
            diff = self._pts[: self.n] - x
            dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
            dist[i] = np.inf
            j = int(np.argmin(dist))
            if dist[j] < r:
                return j, float(dist[j])
            r *= 2.0 ** (1.0 / self.d)


def explore_chain(d: int, rng: np.random.Generator, max_steps: int = 10_000):
    """Follow NN arrows from the origin until the mini-loop closes.

    Returns (chain_norms, origin_nn_dist): Euclidean norms of the distinct points
    visited after the origin, and the origin's NN distance.
    """
    ex = LocalPalmExplorer(d, rng)
    visited = {0}
    cur = 0
    norms = []
    origin_nn = math.nan
    for _ in range(max_steps):
        j, dist = ex.nearest(cur)
        if cur == 0:
            origin_nn = dist
        if j in visited:
            return tuple(norms), origin_nn
        visited.add(j)
        norms.append(float(np.linalg.norm(ex.points[j])))
        cur = j
    raise RuntimeError("directed chain did not close within max_steps")
