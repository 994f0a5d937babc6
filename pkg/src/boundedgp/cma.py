"""Minimal CMA-ES minimizer for low-dimensional, deterministic searches.

Implements the standard (mu/mu_w, lambda) evolution strategy with rank-one
and rank-mu covariance updates and cumulative step-size adaptation.  The
search dimensions here are tiny (a handful of log-hyperparameters), so the
covariance eigendecomposition is recomputed every generation.  All draws
come from a caller-supplied generator, which makes runs reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["CmaResult", "default_population", "minimize"]


def default_population(dim: int) -> int:
    """Standard population size, 4 + floor(3 ln d)."""
    return 4 + int(3 * math.log(max(dim, 1)))


@dataclass
class CmaResult:
    """Outcome of one CMA-ES run."""

    xbest: np.ndarray
    fbest: float
    evaluations: int
    generations: int
    stop_reason: str
    converged: bool
    history: list = field(default_factory=list)


def minimize(
    objective: Callable[[np.ndarray], float],
    x0: np.ndarray,
    sigma0: float,
    rng: np.random.Generator,
    popsize: int | None = None,
    max_generations: int = 200,
    tol_fun: float = 1e-9,
    tol_x: float = 1e-8,
    max_condition: float = 1e14,
) -> CmaResult:
    """Minimize a black-box objective.

    Parameters
    ----------
    objective : callable
        Maps a point (1-d array) to a float; may return +inf for infeasible
        candidates.
    x0 : array
        Initial distribution mean.
    sigma0 : float
        Initial step size.
    rng : numpy Generator
        Source of all randomness; the run is a pure function of it.
    popsize : int, optional
        Candidates per generation; defaults to 4 + floor(3 ln d).
    max_generations : int
        Hard cap on generations.
    tol_fun : float
        Stop when the spread of recent generation-best values falls below
        tol_fun * max(1, |fbest|).
    tol_x : float
        Stop when the sampling distribution's axes shrink below tol_x.

    Returns
    -------
    CmaResult
        Best point ever evaluated, with the stop reason and an evaluation
        count.  ``converged`` is True for tolerance-based stops.
    """
    xmean = np.array(x0, dtype=float).reshape(-1)
    n = xmean.shape[0]
    if n < 1:
        raise ValueError("need at least one search dimension")
    if sigma0 <= 0:
        raise ValueError("initial step size must be positive")
    lam = popsize if popsize is not None else default_population(n)
    if lam < 4:
        raise ValueError("population size must be at least 4")

    # Recombination weights and strategy constants, standard settings.
    mu = lam // 2
    raw = np.log(lam / 2.0 + 0.5) - np.log(np.arange(1, mu + 1))
    weights = raw / raw.sum()
    mueff = 1.0 / np.sum(weights**2)
    cc = (4.0 + mueff / n) / (n + 4.0 + 2.0 * mueff / n)
    cs = (mueff + 2.0) / (n + mueff + 5.0)
    c1 = 2.0 / ((n + 1.3) ** 2 + mueff)
    cmu = min(1.0 - c1, 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((n + 2.0) ** 2 + mueff))
    damps = 1.0 + 2.0 * max(0.0, math.sqrt((mueff - 1.0) / (n + 1.0)) - 1.0) + cs
    chi_n = math.sqrt(n) * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))

    sigma = float(sigma0)
    cov = np.eye(n)
    pc = np.zeros(n)
    ps = np.zeros(n)

    xbest = xmean.copy()
    fbest = math.inf
    evaluations = 0
    history: list[float] = []
    stop_reason = "max_generations"
    converged = False
    hist_window = 10 + int(math.ceil(30.0 * n / lam))

    gen = 0
    for gen in range(1, max_generations + 1):
        cov = 0.5 * (cov + cov.T)
        eigvals, eigvecs = np.linalg.eigh(cov)
        eigvals = np.maximum(eigvals, 1e-30)
        scales = np.sqrt(eigvals)

        if eigvals.max() / eigvals.min() > max_condition:
            stop_reason = "condition"
            break

        z = rng.standard_normal((lam, n))
        y = z * scales @ eigvecs.T
        candidates = xmean + sigma * y
        fvals = np.array([float(objective(c)) for c in candidates])
        evaluations += lam

        order = np.argsort(fvals, kind="stable")
        gen_best = float(fvals[order[0]])
        if gen_best < fbest:
            fbest = gen_best
            xbest = candidates[order[0]].copy()
        history.append(gen_best)

        sel = order[:mu]
        xold = xmean
        xmean = weights @ candidates[sel]
        y_w = (xmean - xold) / sigma

        # Whitened mean shift for the step-size path.
        c_inv_half = eigvecs @ np.diag(1.0 / scales) @ eigvecs.T
        ps = (1.0 - cs) * ps + math.sqrt(cs * (2.0 - cs) * mueff) * (c_inv_half @ y_w)
        ps_norm = float(np.linalg.norm(ps))
        hsig = ps_norm / math.sqrt(1.0 - (1.0 - cs) ** (2.0 * gen)) / chi_n < 1.4 + 2.0 / (n + 1.0)
        pc = (1.0 - cc) * pc + (math.sqrt(cc * (2.0 - cc) * mueff) * y_w if hsig else 0.0)

        y_sel = (candidates[sel] - xold) / sigma
        rank_mu = (weights[:, None] * y_sel).T @ y_sel
        cov = (
            (1.0 - c1 - cmu) * cov
            + c1 * (np.outer(pc, pc) + (0.0 if hsig else cc * (2.0 - cc)) * cov)
            + cmu * rank_mu
        )
        sigma *= math.exp((cs / damps) * (ps_norm / chi_n - 1.0))

        if len(history) >= hist_window:
            recent = history[-hist_window:]
            span = max(recent) - min(recent)
            if math.isfinite(fbest) and span <= tol_fun * max(1.0, abs(fbest)):
                stop_reason = "tol_fun"
                converged = True
                break
        if sigma * math.sqrt(float(eigvals.max())) < tol_x:
            stop_reason = "tol_x"
            converged = True
            break

    return CmaResult(
        xbest=xbest,
        fbest=fbest,
        evaluations=evaluations,
        generations=gen,
        stop_reason=stop_reason,
        converged=converged,
        history=history,
    )
