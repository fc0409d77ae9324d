"""Exact expected optimization time of BACO from its absorbing Markov chain.

States ``0..m-1`` index the objective value of the current best solution,
the last state being the optimum.  ``M`` is upper triangular with a zero last
row, ``A = I - M``.  Three evaluation routes are provided and are expected to
agree:

* ``expected_time_matrix``   -- ``p A^-1 A^-1 M e_last`` via two back-substitutions,
* ``expected_time_explicit`` -- the column-constant structure of ``A^-1``,
* ``*_expected_time_closed`` -- problem-specific closed forms,

plus ``truncated_expected_time``, which sums ``i * P[first hit at i]`` directly
and is used as an oracle for all of the above.

Every builder accepts ``exact=True``; ``t`` is then converted to a
``Fraction`` and all entries are rationals (object arrays), which is practical
up to ``n`` of about 12.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import Problem, pheromone_ratio

LN2 = math.log(2.0)


class MarkovError(ValueError):
    pass


class DegenerateChainError(MarkovError):
    """A non-final state can never be left."""


class RowPropertyError(MarkovError):
    """``M(i,j) / M(i+1,j)`` depends on the column ``j``."""

    def __init__(self, i: int, j: int, detail: str = ""):
        self.i, self.j = i, j
        msg = f"row-ratio property violated at (i={i}, j={j})"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class Method(str, enum.Enum):
    MATRIX = "matrix"
    EXPLICIT = "explicit"
    CLOSED_FORM = "closed_form"
    TRUNCATED_SUM = "truncated_sum"


@dataclass(frozen=True)
class AnalyticResult:
    value: float | Fraction
    method: Method

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Dense upper-triangular transition matrix plus its escape probabilities.

    ``escape[i] = 1 - M(i,i)``.  The builders below compute it directly
    instead of subtracting, because for small ``t`` the diagonal is within a
    few ulps of 1 and ``1 - M(i,i)`` would lose most of its digits.
    """

    values: np.ndarray
    escape: np.ndarray

    @classmethod
    def from_dense(cls, values) -> "TransitionMatrix":
        values = np.asarray(values)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise MarkovError(f"transition matrix must be square, got shape {values.shape}")
        escape = 1 - np.diagonal(values).copy()
        return cls(values, escape)

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    def system_matrix(self) -> np.ndarray:
        """``A = I - M`` with the diagonal taken from ``escape``."""
        a = -self.values.copy()
        for i in range(self.m):
            a[i, i] = self.escape[i]
        return a

    def validate(self, atol: float = 1e-12) -> None:
        m, v = self.m, self.values
        if m < 2:
            raise MarkovError("a Markov model needs at least two states")
        if np.any(np.tril(v, -1) != 0):
            raise MarkovError("transition matrix is not upper triangular")
        if np.any(v[-1] != 0):
            raise MarkovError("last row of the transition matrix must be zero")
        check_transient(self)
        sums = v[:-1].sum(axis=1)
        worst = max(abs(float(s) - 1.0) for s in sums)
        if worst > atol:
            raise MarkovError(f"transient rows must sum to 1 (worst deviation {worst:.3g})")


@dataclass(frozen=True, eq=False)
class MarkovModel:
    p: np.ndarray
    M: TransitionMatrix

    @property
    def m(self) -> int:
        return self.M.m


def check_transient(M: TransitionMatrix) -> None:
    for i in range(M.m - 1):
        if not M.escape[i] > 0:
            raise DegenerateChainError(
                f"state {i} is absorbing before the optimum (M({i},{i}) = {M.values[i, i]})")


def _ratio(t, exact: bool):
    t = pheromone_ratio(t)
    return Fraction(t) if exact else float(t)


# -- LeadingOnes ----------------------------------------------------------------

def lo_initial_distribution(n: int, exact: bool = False) -> np.ndarray:
    """Objective value of a uniform random bit string: ``p(i) = 2^-(i+1)``, ``p(n) = 2^-n``."""
    if n < 1:
        raise ValueError(f"LeadingOnes needs n >= 1, got {n}")
    p = [Fraction(1, 2 ** (i + 1)) for i in range(n)] + [Fraction(1, 2 ** n)]
    return np.array(p, dtype=object) if exact else np.array([float(x) for x in p])


def lo_markov_matrix(n: int, t, exact: bool = False) -> TransitionMatrix:
    if n < 1:
        raise ValueError(f"LeadingOnes needs n >= 1, got {n}")
    t = _ratio(t, exact)
    m = n + 1
    if exact:
        vals = np.full((m, m), Fraction(0), dtype=object)
        esc = np.full(m, Fraction(1), dtype=object)
        q = 1 / (1 + t)
        for i in range(m - 1):
            base = t * q ** (i + 1)
            esc[i] = base
            vals[i, i] = 1 - base
            for j in range(i + 1, m - 1):
                vals[i, j] = base / 2 ** (j - i)
            vals[i, m - 1] = base / 2 ** (n - i - 1)
        return TransitionMatrix(vals, esc)

    vals = np.zeros((m, m))
    esc = np.ones(m)
    log_t, log_q = math.log(t), math.log1p(t)
    for i in range(m - 1):
        log_base = log_t - (i + 1) * log_q
        esc[i] = math.exp(log_base)
        vals[i, i] = -math.expm1(log_base)
        j = np.arange(i + 1, m - 1)
        vals[i, i + 1:m - 1] = np.exp(log_base - (j - i) * LN2)
        vals[i, m - 1] = math.exp(log_base - (n - i - 1) * LN2)
    return TransitionMatrix(vals, esc)


def lo_delta(n: int, t, j: int) -> float:
    """Above-diagonal value of column ``j`` of ``(I-M)^-1`` for LeadingOnes, ``j <= n-1``."""
    if not 1 <= j <= n - 1:
        raise ValueError(f"column index must lie in 1..{n - 1}, got {j}")
    t = pheromone_ratio(t)
    if isinstance(t, Fraction):
        return (1 + t) ** (j + 1) / (2 * t)
    return math.exp((j + 1) * math.log1p(t) - math.log(2 * t))


def lo_expected_time_closed(n: int, t, exact: bool = False) -> AnalyticResult:
    """``(1+t)/(2 t^2) * ((1+t)^n - 1)``."""
    if n < 1:
        raise ValueError(f"LeadingOnes needs n >= 1, got {n}")
    if not t > 0:
        raise ValueError(f"pheromone ratio must be positive, got {t!r}")
    if exact:
        t = Fraction(t)
        return AnalyticResult((1 + t) / (2 * t * t) * ((1 + t) ** n - 1), Method.CLOSED_FORM)
    t = float(t)
    x = n * math.log1p(t)
    if x < 700.0:
        value = (1 + t) / (2 * t * t) * math.expm1(x)
    else:
        log_value = math.log1p(t) - LN2 - 2 * math.log(t) + x + math.log(-math.expm1(-x))
        value = _safe_exp(log_value)
    return AnalyticResult(value, Method.CLOSED_FORM)


def lo_model(n: int, t, exact: bool = False) -> MarkovModel:
    return MarkovModel(lo_initial_distribution(n, exact), lo_markov_matrix(n, t, exact))


# -- Sorting (final-position prefix) ----------------------------------------------

def _check_sort_n(n: int) -> None:
    if n < 2:
        raise ValueError(f"Sorting needs n >= 2 (a single key is already sorted), got {n}")


def sort_initial_distribution(n: int, exact: bool = False) -> np.ndarray:
    """FPP value of a uniform random permutation.

    State ``i < n-1`` holds ``i`` correct leading keys followed by a wrong
    one; the last state is the sorted order (FPP value ``n``).
    """
    _check_sort_n(n)
    nf = math.factorial(n)
    p = [Fraction((n - i - 1) * math.factorial(n - i - 1), nf) for i in range(n - 1)]
    p.append(Fraction(1, nf))
    return np.array(p, dtype=object) if exact else np.array([float(x) for x in p])


def sort_markov_matrix(n: int, t, exact: bool = False) -> TransitionMatrix:
    _check_sort_n(n)
    t = _ratio(t, exact)
    m = n
    if exact:
        vals = np.full((m, m), Fraction(0), dtype=object)
        esc = np.full(m, Fraction(1), dtype=object)
        for i in range(m - 1):
            follow = Fraction(1)
            for k in range(1, i + 2):
                follow /= 1 + (n - k) * t
            base = t * follow
            esc[i] = base
            vals[i, i] = 1 - base
            rest = Fraction(1)
            for j in range(i + 1, m - 1):
                rest /= n - j
                vals[i, j] = (n - j - 1) * base * rest
            tail = Fraction(1)
            for k in range(i + 1, m - 1):
                tail /= n - k
            vals[i, m - 1] = base * tail
        return TransitionMatrix(vals, esc)

    vals = np.zeros((m, m))
    esc = np.ones(m)
    # follow[i] = sum_{k=1}^{i+1} log(1+(n-k)t); lf[j] = sum_{k=1}^{j} log(n-k)
    follow = np.cumsum([math.log1p((n - k) * t) for k in range(1, m)])
    lf = np.concatenate([[0.0], np.cumsum([math.log(n - k) for k in range(1, m)])])
    log_t = math.log(t)
    for i in range(m - 1):
        log_base = log_t - follow[i]
        esc[i] = math.exp(log_base)
        vals[i, i] = -math.expm1(log_base)
        for j in range(i + 1, m - 1):
            vals[i, j] = (n - j - 1) * math.exp(log_base - (lf[j] - lf[i]))
        vals[i, m - 1] = math.exp(log_base - (lf[m - 2] - lf[i]))
    return TransitionMatrix(vals, esc)


def sort_delta(n: int, t, j: int):
    """``((n-j-1)/(n-j)) * (1/t) * prod_{k=1}^{j+1} (1+(n-k)t)`` for ``1 <= j <= n-2``."""
    _check_sort_n(n)
    if not 1 <= j <= n - 2:
        raise ValueError(f"column index must lie in 1..{n - 2}, got {j}")
    t = pheromone_ratio(t)
    if isinstance(t, Fraction):
        prod = Fraction(1)
        for k in range(1, j + 2):
            prod *= 1 + (n - k) * t
        return Fraction(n - j - 1, n - j) / t * prod
    log_prod = math.fsum(math.log1p((n - k) * t) for k in range(1, j + 2))
    return (n - j - 1) / (n - j) * math.exp(log_prod - math.log(t))


def sort_expected_time_closed(n: int, t, exact: bool = False) -> AnalyticResult:
    """Closed double sum for Sorting, accumulated in log space.

    ``T = 1/(t n!) sum_{i=1}^{n-1} i i! (P_i + sum_{k=1}^{i-1} k/(k+1) P_k)``
    with ``P_k = prod_{r=k}^{n-1} (1 + r t)``.
    """
    _check_sort_n(n)
    if not t > 0:
        raise ValueError(f"pheromone ratio must be positive, got {t!r}")
    if exact:
        t = Fraction(t)
        prods = {}
        acc = Fraction(1)
        for k in range(n - 1, 0, -1):
            acc *= 1 + k * t
            prods[k] = acc
        total = Fraction(0)
        inner = Fraction(0)  # sum_{k<i} k/(k+1) P_k
        for i in range(1, n):
            total += i * math.factorial(i) * (prods[i] + inner)
            inner += Fraction(i, i + 1) * prods[i]
        return AnalyticResult(total / (t * math.factorial(n)), Method.CLOSED_FORM)

    t = float(t)
    # log P_k as suffix sums, log(i!/n!) = -sum_{r=i+1}^{n} log r
    log_p = np.zeros(n + 1)
    for k in range(n - 1, 0, -1):
        log_p[k] = log_p[k + 1] + math.log1p(k * t)
    log_fact_ratio = np.zeros(n + 1)
    for i in range(n - 1, 0, -1):
        log_fact_ratio[i] = log_fact_ratio[i + 1] - math.log(i + 1)
    terms = []
    log_inner = -math.inf
    for i in range(1, n):
        log_s = np.logaddexp(log_p[i], log_inner)
        terms.append(math.log(i) + log_fact_ratio[i] + log_s)
        log_inner = np.logaddexp(log_inner, math.log(i / (i + 1)) + log_p[i])
    log_total = float(np.logaddexp.reduce(terms)) - math.log(t)
    return AnalyticResult(_safe_exp(log_total), Method.CLOSED_FORM)


def sort_bounds(n: int, t) -> tuple[float, float]:
    """``(n-2)/(2t) <= T <= (n/t)(1+nt)^n``."""
    _check_sort_n(n)
    if not t > 0:
        raise ValueError(f"pheromone ratio must be positive, got {t!r}")
    t = float(t)
    lower = (n - 2) / (2 * t)
    upper = _safe_exp(math.log(n) - math.log(t) + n * math.log1p(n * t))
    return lower, upper


def sort_model(n: int, t, exact: bool = False) -> MarkovModel:
    return MarkovModel(sort_initial_distribution(n, exact), sort_markov_matrix(n, t, exact))


# -- OneMax -----------------------------------------------------------------------

def onemax_upper_bound(n: int, t) -> float:
    """``(1/t) (1+t)^n (1 + ln n)``: one-bit improvements only, started from zero ones."""
    if n < 1:
        raise ValueError(f"OneMax needs n >= 1, got {n}")
    if not t > 0:
        raise ValueError(f"pheromone ratio must be positive, got {t!r}")
    t = float(t)
    return _safe_exp(n * math.log1p(t) - math.log(t) + math.log1p(math.log(n)))


# -- generic machinery --------------------------------------------------------------

def solve_upper(U: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Back-substitution for an upper-triangular system ``U x = b``."""
    m = U.shape[0]
    x = np.zeros(m, dtype=U.dtype) if U.dtype == object else np.zeros(m)
    if U.dtype == object:
        x[:] = Fraction(0)
    for i in range(m - 1, -1, -1):
        s = b[i] - (np.dot(U[i, i + 1:], x[i + 1:]) if i + 1 < m else 0)
        if U[i, i] == 0:
            raise DegenerateChainError(f"zero pivot in row {i}")
        x[i] = s / U[i, i]
    return x


def _as_model(p, M) -> tuple[np.ndarray, TransitionMatrix]:
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_dense(M)
    p = np.asarray(p, dtype=object if M.exact else float)
    if p.shape != (M.m,):
        raise MarkovError(f"distribution has shape {p.shape}, expected ({M.m},)")
    return p, M


def expected_time_matrix(p, M) -> AnalyticResult:
    """``p (I-M)^-1 (I-M)^-1 M e_last`` without forming an inverse."""
    p, M = _as_model(p, M)
    check_transient(M)
    A = M.system_matrix()
    y = solve_upper(A, M.values[:, -1])
    z = solve_upper(A, y)
    return AnalyticResult(np.dot(p, z), Method.MATRIX)


@dataclass(frozen=True)
class RowPropertyReport:
    phi: list  # phi[i] for rows 0..m-3; None when no comparable column exists
    violation: Optional[tuple[int, int]] = None
    detail: str = ""

    @property
    def holds(self) -> bool:
        return self.violation is None

    def raise_if_violated(self) -> None:
        if self.violation is not None:
            raise RowPropertyError(*self.violation, self.detail)


def check_row_property(M, rtol: float = 1e-10) -> RowPropertyReport:
    """Check that ``M(i,j)/M(i+1,j)`` depends only on ``i`` for all ``i+1 < j``.

    Column pairs where both entries vanish are skipped.  The first failing
    ``(i, j)`` is reported.
    """
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_dense(M)
    v, m = M.values, M.m
    phis: list = []
    for i in range(m - 2):
        phi = None
        for j in range(i + 2, m):
            a, b = v[i, j], v[i + 1, j]
            if a == 0 and b == 0:
                continue
            if b == 0:
                return RowPropertyReport(phis, (i, j), f"M({i + 1},{j}) = 0 but M({i},{j}) = {a}")
            ratio = a / b
            if phi is None:
                phi = ratio
            elif M.exact and ratio != phi:
                return RowPropertyReport(phis, (i, j), f"ratio {ratio} != {phi}")
            elif not M.exact and abs(ratio - phi) > rtol * abs(phi):
                return RowPropertyReport(phis, (i, j), f"ratio {ratio!r} != {phi!r}")
        phis.append(phi)
    return RowPropertyReport(phis)


def _deltas(M: TransitionMatrix) -> list:
    """``delta_j = -A(j-1,j) / (A(j-1,j-1) A(j,j))`` for ``j = 1..m-1`` (index 0 unused)."""
    v, esc = M.values, M.escape
    return [None] + [v[j - 1, j] / (esc[j - 1] * esc[j]) for j in range(1, M.m)]


def structured_inverse(M) -> np.ndarray:
    """``(I-M)^-1`` assembled from its diagonal and the column constants ``delta_j``."""
    if not isinstance(M, TransitionMatrix):
        M = TransitionMatrix.from_dense(M)
    check_transient(M)
    check_row_property(M).raise_if_violated()
    m = M.m
    delta = _deltas(M)
    if M.exact:
        inv = np.full((m, m), Fraction(0), dtype=object)
    else:
        inv = np.zeros((m, m))
    for j in range(m):
        inv[j, j] = 1 / M.escape[j]
        if j:
            inv[:j, j] = delta[j]
    return inv


def expected_time_explicit(p, M) -> AnalyticResult:
    """``sum_{i<m-1} p(i) (1/A(i,i) + sum_{j=i+1}^{m-2} delta_j)``."""
    p, M = _as_model(p, M)
    check_transient(M)
    check_row_property(M).raise_if_violated()
    m = M.m
    delta = _deltas(M)
    total = 0
    tail = 0  # sum_{j=i+1}^{m-2} delta_j
    for i in range(m - 2, -1, -1):
        total += p[i] * (1 / M.escape[i] + tail)
        tail += delta[i] if i >= 1 else 0
    return AnalyticResult(total, Method.EXPLICIT)


# -- truncated-sum oracle -----------------------------------------------------------------

VECTOR_HORIZON_LIMIT = 200_000


def _power_sums(M: np.ndarray, h: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(M^h, sum_{i<h} M^i, sum_{i<h} i M^i)`` by binary doubling."""
    m = M.shape[0]
    P = np.eye(m)
    S0 = np.zeros((m, m))
    S1 = np.zeros((m, m))
    k = 0
    for bit in bin(h)[2:]:
        # [0, 2k): S1 + M^k (S1 + k S0)
        S1 = S1 + P @ (S1 + k * S0)
        S0 = S0 + P @ S0
        P = P @ P
        k *= 2
        if bit == "1":
            S0 = S0 + P
            S1 = S1 + k * P
            P = P @ M
            k += 1
    return P, S0, S1


def truncated_expected_time_series(p, M, horizons: Iterable[int]) -> list[float]:
    """``sum_{i=0}^{H} i (p M^i)(m-1)`` for each ``H`` in increasing ``horizons``.

    ``(p M^i)(m-1)`` is the probability of reaching the optimum at exactly
    iteration ``i``.  Horizons up to ``VECTOR_HORIZON_LIMIT`` are handled by
    repeated vector-matrix products; longer stretches are covered in blocks
    of matrix power sums.  Each step only adds non-negative terms, so the
    series is non-decreasing in floating point as well.
    """
    p, M = _as_model(p, M)
    horizons = list(horizons)
    if any(h < 0 for h in horizons) or horizons != sorted(horizons):
        raise ValueError("horizons must be non-negative and non-decreasing")
    mat = np.asarray(M.values, dtype=float)
    w = np.asarray(p, dtype=float)  # p M^i
    i = 0
    total = 0.0
    out = []
    for h in horizons:
        target = h + 1  # number of summands i = 0..h
        if target - i <= VECTOR_HORIZON_LIMIT:
            while i < target:
                if i:
                    total += i * w[-1]
                w = w @ mat
                i += 1
        else:
            delta = target - i
            # sum_{d<delta} (i+d) w M^d e_last = w (i S0 + S1) e_last
            P, S0, S1 = _power_sums(mat, delta)
            total += float(w @ (i * S0[:, -1] + S1[:, -1]))
            w = w @ P
            i = target
        out.append(total)
    return out


def truncated_expected_time(p, M, horizon: int) -> AnalyticResult:
    if horizon < 0:
        raise ValueError(f"horizon must be non-negative, got {horizon}")
    return AnalyticResult(truncated_expected_time_series(p, M, [horizon])[0],
                          Method.TRUNCATED_SUM)


# -- identities and parameter choices ----------------------------------------------------

def factorial_identities_check(n: int) -> bool:
    """Check, in exact integers, for sums over ``i = 1..n-1``:

    ``sum i^2 i! = (n-1) n! - sum i!``  and  ``sum i i! = n! - 1``.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    facts = [math.factorial(i) for i in range(1, n)]
    nf = math.factorial(n)
    squares = sum(i * i * f for i, f in zip(range(1, n), facts))
    linear = sum(i * f for i, f in zip(range(1, n), facts))
    return squares == (n - 1) * nf - sum(facts) and linear == nf - 1


def optimal_ratio(problem, n: int) -> float:
    """Runtime-optimal pheromone ratio (constant 1): ``1/n`` for LeadingOnes, ``1/n^2`` for Sorting."""
    problem = Problem.parse(problem)
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if problem is Problem.LEADING_ONES:
        return 1.0 / n
    if problem is Problem.SORTING:
        return 1.0 / (n * n)
    raise MarkovError("no optimal pheromone ratio is known for OneMax; "
                      "1/n is the usual default, backed only by an upper bound")


# -- dispatch -------------------------------------------------------------------------------

def model(problem, n: int, t, exact: bool = False) -> MarkovModel:
    problem = Problem.parse(problem)
    if problem is Problem.LEADING_ONES:
        return lo_model(n, t, exact)
    if problem is Problem.SORTING:
        return sort_model(n, t, exact)
    raise MarkovError("OneMax has no exact Markov model here; use onemax_upper_bound")


def expected_time_closed(problem, n: int, t, exact: bool = False) -> AnalyticResult:
    problem = Problem.parse(problem)
    if problem is Problem.LEADING_ONES:
        return lo_expected_time_closed(n, t, exact)
    if problem is Problem.SORTING:
        return sort_expected_time_closed(n, t, exact)
    raise MarkovError("OneMax has no closed form; use onemax_upper_bound")


def expected_time(problem, n: int, t, method: "str | Method" = Method.CLOSED_FORM,
                  horizon: Optional[int] = None) -> AnalyticResult:
    method = Method(method)
    if method is Method.CLOSED_FORM:
        return expected_time_closed(problem, n, t)
    mdl = model(problem, n, t)
    if method is Method.MATRIX:
        return expected_time_matrix(mdl.p, mdl.M)
    if method is Method.EXPLICIT:
        return expected_time_explicit(mdl.p, mdl.M)
    if horizon is None:
        horizon = math.ceil(100 * float(expected_time_closed(problem, n, t).value))
    return truncated_expected_time(mdl.p, mdl.M, horizon)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf
