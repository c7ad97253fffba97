"""Two-player zero-sum games in strategic form.

Payoff matrices follow one convention throughout the package: rows are
generator (row player) strategies, columns are classifier (column player)
strategies, and ``matrix[i, j]`` is the *column* player's payoff. The row
player receives the negation.

Ties are always broken towards the lowest index.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

ROW = "row"
COLUMN = "column"
Player = Literal["row", "column"]

DEFAULT_TOL = 1e-9
MC_TOL = 1e-6


class SolverError(RuntimeError):
    """Raised when the LP solver cannot certify the requested tolerance."""

    def __init__(self, message: str, exploitability: float = float("nan")):
        super().__init__(message)
        self.exploitability = exploitability


@dataclass(frozen=True)
class SolveResult:
    row_mix: np.ndarray
    col_mix: np.ndarray
    value: float
    exploitability: float


def as_payoff_matrix(matrix) -> np.ndarray:
    m = np.array(matrix, dtype=float)
    if m.ndim != 2:
        raise ValueError(f"payoff matrix must be 2-D, got shape {m.shape}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ValueError("payoff matrix needs at least one row and one column")
    if not np.all(np.isfinite(m)):
        raise ValueError("payoff matrix has non-finite entries")
    return m


def as_mixed_strategy(probs, size: int | None = None, name: str = "mix") -> np.ndarray:
    p = np.asarray(probs, dtype=float).ravel()
    if size is not None and p.shape[0] != size:
        raise ValueError(f"{name} has length {p.shape[0]}, expected {size}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12 * max(1, p.shape[0]):
        raise ValueError(f"{name} is not a probability vector: {p}")
    return p


def _check_profile(matrix, row_mix, col_mix):
    m = as_payoff_matrix(matrix)
    x = as_mixed_strategy(row_mix, m.shape[0], "row_mix")
    y = as_mixed_strategy(col_mix, m.shape[1], "col_mix")
    return m, x, y


def expected_payoff(matrix, row_mix, col_mix) -> float:
    """Column player's expected payoff ``x^T M y``."""
    m, x, y = _check_profile(matrix, row_mix, col_mix)
    return float(x @ m @ y)


def best_response(matrix, opponent_mix, player: Player) -> tuple[int, float]:
    """Pure best response of ``player`` against the opponent's mixture.

    Returns ``(index, payoff)`` where payoff is in the responding player's own
    units (negated entries for the row player).
    """
    m = as_payoff_matrix(matrix)
    if player == ROW:
        y = as_mixed_strategy(opponent_mix, m.shape[1], "col_mix")
        payoffs = -(m @ y)
    elif player == COLUMN:
        x = as_mixed_strategy(opponent_mix, m.shape[0], "row_mix")
        payoffs = x @ m
    else:
        raise ValueError(f"unknown player {player!r}")
    idx = int(np.argmax(payoffs))  # argmax returns the first maximiser
    return idx, float(payoffs[idx])


def best_response_gains(matrix, row_mix, col_mix) -> tuple[float, float]:
    m, x, y = _check_profile(matrix, row_mix, col_mix)
    current = float(x @ m @ y)
    row_gain = float(np.max(-(m @ y))) + current
    col_gain = float(np.max(x @ m)) - current
    return max(row_gain, 0.0), max(col_gain, 0.0)


def exploitability(matrix, row_mix, col_mix) -> float:
    """Sum of both players' best-response gains; zero exactly at an NE."""
    return float(sum(best_response_gains(matrix, row_mix, col_mix)))


def epsilon_ne_check(matrix, row_mix, col_mix, eps: float) -> bool:
    if eps < 0:
        raise ValueError("eps must be non-negative")
    row_gain, col_gain = best_response_gains(matrix, row_mix, col_mix)
    return row_gain <= eps and col_gain <= eps


def column_constant_shift(matrix, col: int, c: float) -> np.ndarray:
    """Raise the row player's payoff against pure column ``col`` by ``c``.

    Entries store column payoffs, so this subtracts ``c`` from that column.
    The result is only used to study the row player's incentives.
    """
    m = as_payoff_matrix(matrix)
    if not 0 <= col < m.shape[1]:
        raise IndexError(f"column {col} out of range for {m.shape[1]} columns")
    out = m.copy()
    out[:, col] -= c
    return out


def _simplex_max(a_ub: np.ndarray, max_pivots: int) -> tuple[np.ndarray, np.ndarray, bool]:
    """Maximise ``sum(s)`` subject to ``a_ub @ s <= 1``, ``s >= 0``.

    ``a_ub`` must be strictly positive, which makes the slack basis feasible
    and the problem bounded. Revised simplex: every pivot re-solves against
    the original columns so rounding does not accumulate in a tableau.
    Returns the primal solution, the constraint duals and whether the last
    basis was optimal (it is not when the pivot budget runs out).
    """
    m, n = a_ub.shape
    a = np.hstack([a_ub, np.eye(m)])
    cost = np.concatenate([np.ones(n), np.zeros(m)])
    b = np.ones(m)
    basis = list(range(n, n + m))
    eps = 1e-12
    degenerate_run = 0
    for pivot in range(max_pivots + 1):
        a_b = a[:, basis]
        x_b = np.linalg.solve(a_b, b)
        duals = np.linalg.solve(a_b.T, cost[basis])
        reduced = cost - a.T @ duals
        reduced[basis] = 0.0
        candidates = np.flatnonzero(reduced > eps)
        if candidates.size == 0 or pivot == max_pivots:
            primal = np.zeros(n + m)
            primal[basis] = x_b
            return primal[:n], duals, candidates.size == 0
        # Dantzig pricing, falling back to Bland's rule on long degenerate runs
        if degenerate_run > 2 * (m + n):
            enter = int(candidates[0])
        else:
            enter = int(candidates[np.argmax(reduced[candidates])])
        d = np.linalg.solve(a_b, a[:, enter])
        rows = np.flatnonzero(d > eps)
        ratios = x_b[rows] / d[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-14]
        leave = int(min(ties, key=lambda r: basis[r]))
        degenerate_run = degenerate_run + 1 if best <= 1e-14 else 0
        basis[leave] = enter
    raise AssertionError("unreachable")


def _normalise(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    total = p.sum()
    if total <= 0:
        return np.full(p.shape, 1.0 / p.shape[0])
    return p / total


def solve_zero_sum(matrix, tol: float = DEFAULT_TOL, max_pivots: int | None = None) -> SolveResult:
    """Exact equilibrium of the zero-sum game via linear programming.

    The row player minimises ``x^T M y`` and the column player maximises it.
    After shifting entries to be positive, the row player's problem becomes
    ``max 1^T s  s.t.  M_shift^T s <= 1`` whose duals give the column mix.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = as_payoff_matrix(matrix)
    n_rows, n_cols = m.shape
    shift = m.min() - 1.0
    shifted = m - shift
    budget = max_pivots if max_pivots is not None else 50 * (n_rows + n_cols) + 100
    s, t, converged = _simplex_max(shifted.T, budget)
    row_mix = _normalise(s)
    col_mix = _normalise(t)
    value = float(row_mix @ m @ col_mix)
    expl = exploitability(m, row_mix, col_mix)
    if not converged:
        raise SolverError(f"simplex did not converge within {budget} pivots "
                          f"(exploitability {expl:.3e})", expl)
    if expl > tol:
        raise SolverError(f"LP solution exploitability {expl:.3e} exceeds tol {tol:.1e}", expl)
    return SolveResult(row_mix, col_mix, value, expl)


def regret_matching(matrix, iterations: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Average strategies of simultaneous regret matching (independent check)."""
    m = as_payoff_matrix(matrix)
    n_rows, n_cols = m.shape
    row_regret = np.zeros(n_rows)
    col_regret = np.zeros(n_cols)
    row_sum = np.zeros(n_rows)
    col_sum = np.zeros(n_cols)
    for _ in range(iterations):
        x = _normalise(row_regret) if row_regret.max() > 0 else np.full(n_rows, 1.0 / n_rows)
        y = _normalise(col_regret) if col_regret.max() > 0 else np.full(n_cols, 1.0 / n_cols)
        row_sum += x
        col_sum += y
        row_payoffs = -(m @ y)
        col_payoffs = x @ m
        row_regret = np.maximum(row_regret + row_payoffs - x @ row_payoffs, 0.0)
        col_regret = np.maximum(col_regret + col_payoffs - col_payoffs @ y, 0.0)
    return row_sum / iterations, col_sum / iterations


def write_matrix_csv(matrix, path) -> None:
    m = as_payoff_matrix(matrix)
    buf = io.StringIO()
    buf.write(f"# rows={m.shape[0]} cols={m.shape[1]} convention=u_C\n")
    for row in m:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def read_matrix_csv(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    header = None
    rows = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header = dict(tok.split("=", 1) for tok in line[1:].split() if "=" in tok)
            continue
        rows.append([float(v) for v in line.split(",")])
    m = as_payoff_matrix(rows)
    if header is not None:
        if header.get("convention", "u_C") != "u_C":
            raise ValueError(f"{path}: unsupported convention {header['convention']!r}")
        if (int(header.get("rows", m.shape[0])), int(header.get("cols", m.shape[1]))) != m.shape:
            raise ValueError(f"{path}: header dimensions disagree with data {m.shape}")
    return m
