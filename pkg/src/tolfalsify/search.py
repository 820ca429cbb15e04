"""Box-constrained derivative-free optimizers with an ask/tell interface.

Both optimizers minimize. ``CMAES`` works internally in coordinates
normalized to the unit box, so ``sigma0`` is a fraction of each dimension's
range. Candidates leaving the box are resampled up to ``MAX_RESAMPLE`` times
and then clipped.
"""

from __future__ import annotations

import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

MAX_RESAMPLE = 10
EIG_FLOOR = 1e-12
SIGMA_MAX = 10.0


def default_popsize(dim: int) -> int:
    return 4 + int(math.floor(3 * math.log(dim))) if dim > 0 else 1


class Optimizer:
    kind = ""

    def __init__(self, lower, upper, popsize: Optional[int] = None, seed=0):
        self.lower = np.asarray(lower, dtype=float).reshape(-1)
        self.upper = np.asarray(upper, dtype=float).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise ValueError("bounds have different lengths")
        if np.any(self.upper < self.lower):
            raise ValueError("lower bound above upper bound")
        self.dim = self.lower.size
        self.span = self.upper - self.lower
        self.popsize = int(popsize) if popsize else default_popsize(self.dim)
        if self.popsize < 1:
            raise ValueError("popsize must be positive")
        self.rng = np.random.default_rng(seed)
        self.generation = 0
        self.best_x: Optional[np.ndarray] = None
        self.best_f = math.inf
        self._pending: Optional[np.ndarray] = None

    def _to_box(self, y: np.ndarray) -> np.ndarray:
        return np.clip(self.lower + y * self.span, self.lower, self.upper)

    def ask(self) -> np.ndarray:
        """``popsize`` candidates as rows, each inside the box."""
        y = self._sample()
        self._pending = y
        return self._to_box(y)

    def tell(self, candidates, values: Sequence[float]) -> None:
        if self._pending is None:
            raise RuntimeError("tell() without a preceding ask()")
        candidates = np.asarray(candidates, dtype=float).reshape(len(self._pending), -1)
        values = np.asarray(values, dtype=float).reshape(-1)
        if len(values) != len(self._pending):
            raise ValueError(f"expected {len(self._pending)} values, got {len(values)}")
        values = np.where(np.isfinite(values), values, np.inf)
        i = int(np.argmin(values))
        if values[i] < self.best_f:
            self.best_f, self.best_x = float(values[i]), candidates[i].copy()
        self._update(self._pending, values)
        self._pending = None
        self.generation += 1

    def _sample(self) -> np.ndarray:
        raise NotImplementedError

    def _update(self, y: np.ndarray, values: np.ndarray) -> None:
        pass


class RandomSearch(Optimizer):
    """Independent uniform samples from the box."""

    kind = "random"

    def _sample(self):
        return self.rng.random((self.popsize, self.dim))


class CMAES(Optimizer):
    """(mu/mu_w, lambda)-CMA-ES with cumulative step-size adaptation.

    When the best ~70% of a generation share one value, selection carries no
    information: mean and covariance are kept and the step size is enlarged.
    """

    kind = "cmaes"

    def __init__(self, lower, upper, popsize=None, seed=0, x0=None, sigma0: float = 0.2):
        super().__init__(lower, upper, popsize, seed)
        n = self.dim
        if not sigma0 > 0:
            raise ValueError("sigma0 must be positive")
        if x0 is None:
            self.mean = np.full(n, 0.5)
        else:
            x0 = np.asarray(x0, dtype=float).reshape(-1)
            with np.errstate(invalid="ignore", divide="ignore"):
                self.mean = np.where(self.span > 0, (x0 - self.lower) / self.span, 0.5)
            self.mean = np.clip(self.mean, 0.0, 1.0)
        self.sigma = float(sigma0)

        lam = self.popsize
        self.mu = max(lam // 2, 1)
        w = np.log(self.mu + 0.5) - np.log(np.arange(1, self.mu + 1))
        self.weights = w / w.sum()
        self.mueff = 1.0 / np.sum(self.weights**2)
        mueff = self.mueff
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, math.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = math.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n * n))

        self.pc = np.zeros(n)
        self.ps = np.zeros(n)
        self.B = np.eye(n)
        self.D = np.ones(n)
        self.C = np.eye(n)

    def _sample(self):
        lam, n = self.popsize, self.dim
        out = np.empty((lam, n))
        for k in range(lam):
            for _ in range(MAX_RESAMPLE):
                y = self.mean + self.sigma * (self.B @ (self.D * self.rng.standard_normal(n)))
                if np.all((y >= 0.0) & (y <= 1.0)):
                    break
            out[k] = np.clip(y, 0.0, 1.0)
        return out

    def _update(self, y, values):
        n, lam = self.dim, self.popsize
        order = np.argsort(values, kind="stable")
        ranked = values[order]
        flat = ranked[0] == ranked[min(lam - 1, math.ceil(0.7 * lam) - 1)]
        if flat:
            self.sigma = min(self.sigma * math.exp(0.2 + self.cs / self.damps), SIGMA_MAX)
            return

        old = self.mean
        parents = y[order[: self.mu]]
        self.mean = np.clip(self.weights @ parents, 0.0, 1.0)
        step = (self.mean - old) / self.sigma

        inv_sqrt = self.B @ np.diag(1.0 / self.D) @ self.B.T
        self.ps = (1 - self.cs) * self.ps + math.sqrt(self.cs * (2 - self.cs) * self.mueff) * (inv_sqrt @ step)
        norm_ps = np.linalg.norm(self.ps)
        hsig = norm_ps / math.sqrt(1 - (1 - self.cs) ** (2 * (self.generation + 1))) / self.chi_n < 1.4 + 2 / (n + 1)
        self.pc = (1 - self.cc) * self.pc + hsig * math.sqrt(self.cc * (2 - self.cc) * self.mueff) * step

        art = (parents - old) / self.sigma
        rank_mu = art.T @ np.diag(self.weights) @ art
        self.C = (
            (1 - self.c1 - self.cmu) * self.C
            + self.c1 * (np.outer(self.pc, self.pc) + (1 - hsig) * self.cc * (2 - self.cc) * self.C)
            + self.cmu * rank_mu
        )
        self.sigma *= math.exp((self.cs / self.damps) * (norm_ps / self.chi_n - 1))
        self.sigma = min(max(self.sigma, 1e-300), SIGMA_MAX)

        self.C = (self.C + self.C.T) / 2
        evals, self.B = np.linalg.eigh(self.C)
        evals = np.maximum(evals, EIG_FLOOR)
        self.D = np.sqrt(evals)
        self.C = self.B @ np.diag(evals) @ self.B.T


OPTIMIZERS = {"cmaes": CMAES, "random": RandomSearch}


def make_optimizer(kind: str, lower, upper, seed=0, x0=None, popsize=None, sigma0=0.2) -> Optimizer:
    if kind == "cmaes":
        return CMAES(lower, upper, popsize=popsize, seed=seed, x0=x0, sigma0=sigma0)
    if kind == "random":
        return RandomSearch(lower, upper, popsize=popsize, seed=seed)
    raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}")


def generations(opt: Optimizer, budget: int):
    """Yield ``(candidates, complete)`` batches spending exactly ``budget`` evaluations.

    Full generations are yielded while at least ``popsize`` evaluations
    remain; a final shorter batch (the leading rows of one more ``ask``) is
    flagged incomplete and must not be told.
    """
    remaining = int(budget)
    while remaining > 0:
        xs = opt.ask()
        if remaining >= len(xs):
            remaining -= len(xs)
            yield xs, True
        else:
            opt._pending = None
            yield xs[:remaining], False
            return


def minimize(
    f: Callable[[np.ndarray], float],
    lower,
    upper,
    budget: int,
    seed=0,
    kind: str = "cmaes",
    x0=None,
    popsize: Optional[int] = None,
    sigma0: float = 0.2,
) -> Tuple[Optional[np.ndarray], float, List[Tuple[np.ndarray, float]]]:
    """Minimize ``f`` over the box with at most ``budget`` calls.

    Returns ``(best_x, best_value, history)``; history lists every
    ``(x, value)`` pair in evaluation order. A zero-dimensional box is
    evaluated once at the empty point.
    """
    lower = np.asarray(lower, dtype=float).reshape(-1)
    history: List[Tuple[np.ndarray, float]] = []
    if budget <= 0:
        return None, math.inf, history
    if lower.size == 0:
        value = float(f(np.empty(0)))
        history.append((np.empty(0), value))
        return np.empty(0), value, history

    opt = make_optimizer(kind, lower, upper, seed=seed, x0=x0, popsize=popsize, sigma0=sigma0)
    best_x, best_f = None, math.inf
    for xs, complete in generations(opt, budget):
        values = []
        for x in xs:
            v = float(f(x))
            history.append((x.copy(), v))
            values.append(v)
            if v < best_f or best_x is None:
                best_x, best_f = x.copy(), v
        if complete:
            opt.tell(xs, values)
    return best_x, best_f, history
