"""Brute-force estimates used to cross-check the reductions.

Nothing here knows about the reduced formulas: integrals are estimated
directly over the full cube (or by sampling the random variables), with
min and max computed from each sample point.

Sampling is reproducible: the stream is cut into fixed-size chunks, each
with its own Philox generator spawned from the seed, and chunk statistics
are merged in chunk order.  The result depends only on ``(seed, samples)``,
not on how many workers ran the chunks.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .quadrature import NonFiniteEvaluation, as_interval

CHUNK = 1 << 16


class DimensionTooLarge(ValueError):
    pass


class NoSamplingPath(ValueError):
    pass


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    samples: int
    seed: int

    def sigmas(self, value: float) -> float:
        """Distance from ``value`` in standard errors (inf if the error is 0 and they differ)."""
        gap = abs(value - self.mean)
        if self.std_error == 0:
            return 0.0 if gap == 0 else math.inf
        return gap / self.std_error


def _chunk_sizes(samples: int) -> list[int]:
    full, rest = divmod(samples, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _run_chunks(draw, samples: int, seed: int, workers: int):
    """Return ``(count, mean, m2)`` merged over chunks in order."""
    sizes = _chunk_sizes(samples)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def one(args):
        size, child = args
        rng = np.random.Generator(np.random.Philox(child))
        vals = np.asarray(draw(rng, size), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteEvaluation("sampled integrand returned a non-finite value")
        mean = float(vals.mean())
        return size, mean, float(((vals - mean) ** 2).sum())

    jobs = list(zip(sizes, children))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(one, jobs))
    else:
        parts = [one(job) for job in jobs]

    count, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        # Chan et al. pairwise update
        delta = mb - mean
        total = count + nb
        mean += delta * nb / total
        m2 += m2b + delta * delta * count * nb / total
        count = total
    return count, mean, m2


def _estimate(draw, samples: int, seed: int, workers: int, scale: float = 1.0) -> McEstimate:
    count, mean, m2 = _run_chunks(draw, samples, seed, workers)
    sd = math.sqrt(m2 / (count - 1)) if count > 1 else 0.0
    return McEstimate(scale * mean, abs(scale) * sd / math.sqrt(count), count, seed)


def mc_cube(f, n: int, domain, samples: int = 10**6, seed: int = 0, workers: int = 1) -> McEstimate:
    """Monte Carlo estimate of the integral of ``f(x, min x, max x)`` over ``(a, b)^n``.

    ``f`` is batched: ``x`` has shape ``(N, n)``, the extremes shape ``(N,)``.
    """
    if samples < 100:
        raise ValueError("mc_cube needs at least 100 samples")
    domain = as_interval(domain)
    if domain.unbounded:
        raise ValueError("mc_cube needs a bounded domain")
    a, b = domain

    def draw(rng, size):
        x = a + (b - a) * rng.random((size, n))
        return np.broadcast_to(f(x, x.min(axis=1), x.max(axis=1)), (size,))

    return _estimate(draw, samples, seed, workers, scale=(b - a) ** n)


def mc_expect(g, dists, samples: int = 10**6, seed: int = 0, workers: int = 1) -> McEstimate:
    """Sampling estimate of ``E[g(min X_i, max X_i)]`` for independent ``X_i ~ dists[i]``."""
    if samples < 100:
        raise ValueError("mc_expect needs at least 100 samples")
    for d in dists:
        if getattr(d, "sampler", None) is None and getattr(d, "quantile", None) is None:
            raise NoSamplingPath(f"distribution {getattr(d, 'label', d)!r} has neither sampler nor quantile")

    def draw(rng, size):
        cols = []
        for d in dists:
            if d.sampler is not None:
                cols.append(np.asarray(d.sampler(rng, size), dtype=float))
            else:
                cols.append(np.asarray(d.quantile(rng.random(size)), dtype=float))
        x = np.stack(cols, axis=1)
        return np.broadcast_to(g(x.min(axis=1), x.max(axis=1)), (size,))

    return _estimate(draw, samples, seed, workers)


def _ordered_corner_rule(n: int, p: int):
    """Nodes/weights on ``{0 < z_1 < ... < z_n < 1}`` built top-down.

    ``z_n = t_n`` and ``z_i = z_{i+1} t_i``; the Jacobian is
    ``z_2 z_3 ... z_n``.
    """
    t, w = np.polynomial.legendre.leggauss(p)
    t = (t + 1.0) / 2.0
    w = w / 2.0
    idx = np.array(list(itertools.product(range(p), repeat=n)))
    T = t[idx]
    W = np.prod(w[idx], axis=1)
    Z = np.empty_like(T)
    Z[:, n - 1] = T[:, n - 1]
    for i in range(n - 2, -1, -1):
        Z[:, i] = Z[:, i + 1] * T[:, i]
    for i in range(1, n):
        W = W * Z[:, i]
    return Z, W


def tensor_cube(f, n: int, domain, points_per_axis: int = 16) -> float:
    """Deterministic product-Gauss estimate of the integral of ``f(x, min, max)`` over ``(a, b)^n``.

    The cube is split into the ``n!`` simplices of coordinate orderings so
    the rule never straddles a tie ``x_i = x_j``; all nodes are interior.
    """
    if n > 4:
        raise DimensionTooLarge(f"tensor_cube supports n <= 4, got {n}")
    if n < 1:
        raise ValueError("n must be positive")
    if points_per_axis < 8:
        raise ValueError("points_per_axis must be at least 8")
    domain = as_interval(domain)
    if domain.unbounded:
        raise ValueError("tensor_cube needs a bounded domain")
    a, b = domain
    Z, W = _ordered_corner_rule(n, points_per_axis)
    total = 0.0
    for perm in itertools.permutations(range(n)):
        x = a + (b - a) * Z[:, list(perm)]
        vals = np.asarray(f(x, x.min(axis=1), x.max(axis=1)), dtype=float)
        vals = np.broadcast_to(vals, W.shape)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteEvaluation("tensor_cube integrand returned a non-finite value")
        total += float(W @ vals)
    return total * (b - a) ** n
