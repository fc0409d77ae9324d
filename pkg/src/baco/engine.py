"""Bivalent ant colony optimization on the chain and permutation construction graphs.

Pheromones only ever take two values, so the whole pheromone memory is the
current best path: edges on it carry ``tau_max``, every other edge carries
``tau_min``.  Only the ratio ``t = tau_min / tau_max`` enters any transition
probability, and that is the only parameter the engine accepts.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

DEFAULT_MAX_ITERS = 10**9
START = -1  # the start node of the permutation graph


class Problem(str, enum.Enum):
    LEADING_ONES = "leadingones"
    ONE_MAX = "onemax"
    SORTING = "sorting"

    @classmethod
    def parse(cls, name: "str | Problem") -> "Problem":
        if isinstance(name, Problem):
            return name
        key = name.strip().lower().replace("_", "").replace("-", "")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown problem {name!r}; expected one of "
                         f"{', '.join(m.value for m in cls)}")

    @property
    def graph(self) -> str:
        return "permutation" if self is Problem.SORTING else "chain"


def pheromone_ratio(t) -> float | Fraction:
    """Validate a pheromone ratio; ``t`` must lie in (0, 1]."""
    if isinstance(t, bool) or not isinstance(t, (int, float, Fraction)):
        raise TypeError(f"pheromone ratio must be a real number, got {t!r}")
    if not (0 < t <= 1):
        raise ValueError(f"pheromone ratio t must lie in (0, 1], got {t!r}")
    return t


# -- objectives -------------------------------------------------------------

def leading_ones(x: Sequence[int]) -> int:
    """Length of the all-ones prefix of ``x``."""
    if isinstance(x, np.ndarray):
        if x.all():
            return int(x.size)
        return int(np.argmin(x))
    count = 0
    for bit in x:
        if not bit:
            break
        count += 1
    return count


def one_max(x: Sequence[int]) -> int:
    return int(np.count_nonzero(x)) if isinstance(x, np.ndarray) else sum(1 for b in x if b)


def fpp(perm: Sequence[int], keys: Optional[Sequence] = None) -> int:
    """Final-position prefix: leading positions whose key is already where sorting puts it.

    ``perm`` is a visiting order of node indices ``0..n-1``.  With ``keys``
    omitted, node ``i`` carries key ``i``; otherwise ``keys[i]`` is the key of
    node ``i`` and the keys must be unique.
    """
    if keys is None:
        count = 0
        for pos, node in enumerate(perm):
            if node != pos:
                break
            count += 1
        return count
    ordered = sorted(keys)
    if len(set(ordered)) != len(ordered):
        raise ValueError("sorting keys must be unique")
    count = 0
    for pos, node in enumerate(perm):
        if keys[node] != ordered[pos]:
            break
        count += 1
    return count


_OBJECTIVES: dict[Problem, Callable[[Sequence[int]], int]] = {
    Problem.LEADING_ONES: leading_ones,
    Problem.ONE_MAX: one_max,
    Problem.SORTING: fpp,
}


def objective(problem: Problem) -> Callable[[Sequence[int]], int]:
    return _OBJECTIVES[Problem.parse(problem)]


# -- pheromone memory ---------------------------------------------------------

@dataclass(frozen=True)
class PheromoneState:
    """Bivalent pheromone memory of one construction graph.

    ``best_path is None`` means no deposit has happened yet and every edge
    carries ``tau_min``.
    """

    n: int
    graph: str  # "chain" or "permutation"
    best_path: Optional[tuple[int, ...]] = None
    _array: Optional[np.ndarray] = field(default=None, compare=False, repr=False)
    _successor: Optional[dict[int, int]] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"problem size must be at least 1, got {self.n}")
        if self.graph not in ("chain", "permutation"):
            raise ValueError(f"unknown construction graph {self.graph!r}")
        if self.best_path is None:
            return
        path = tuple(int(v) for v in self.best_path)
        if len(path) != self.n:
            raise ValueError(f"path length {len(path)} does not match n={self.n}")
        if self.graph == "chain":
            if any(b not in (0, 1) for b in path):
                raise ValueError("bit string entries must be 0 or 1")
            object.__setattr__(self, "_array", np.array(path, dtype=np.uint8))
        else:
            if sorted(path) != list(range(self.n)):
                raise ValueError("path is not a permutation of 0..n-1")
            succ = {START: path[0]}
            succ.update(zip(path, path[1:]))
            object.__setattr__(self, "_successor", succ)
        object.__setattr__(self, "best_path", path)

    @classmethod
    def empty(cls, problem: "Problem | str", n: int) -> "PheromoneState":
        return cls(n=n, graph=Problem.parse(problem).graph)

    @property
    def initialized(self) -> bool:
        return self.best_path is not None

    def tau_max_edges(self) -> frozenset:
        """Edges currently carrying ``tau_max``.

        Chain edges are ``(position, bit)``; permutation edges are
        ``(from_node, to_node)`` with ``START`` for the start node.
        """
        if self.best_path is None:
            return frozenset()
        if self.graph == "chain":
            return frozenset(enumerate(self.best_path))
        return frozenset(self._successor.items())


def update_pheromones(ph: PheromoneState, path: Sequence[int]) -> PheromoneState:
    """Reinforce ``path``; every edge off the path drops back to ``tau_min``."""
    return PheromoneState(n=ph.n, graph=ph.graph, best_path=tuple(int(v) for v in path))


# -- walks --------------------------------------------------------------------

def _chain_sample(best: Optional[np.ndarray], n: int, flip_p: float,
                  rng: np.random.Generator) -> np.ndarray:
    if best is None:
        return rng.integers(0, 2, size=n, dtype=np.uint8)
    return best ^ (rng.random(n) < flip_p)


def _permutation_sample(succ: Optional[dict[int, int]], n: int, t: float,
                        rng: np.random.Generator) -> list[int]:
    # One uniform per step.  If the tau_max edge leads to an unvisited node it
    # wins with probability 1/(1+(r-1)t); the residual of the same uniform then
    # picks uniformly among the other r-1 candidates.
    unvisited = list(range(n))
    where = list(range(n))
    draws = rng.random(n).tolist()
    path = []
    cur = START
    for step in range(n):
        r = n - step
        last = r - 1
        u = draws[step]
        target = succ.get(cur, -2) if succ is not None else -2
        if target >= 0 and where[target] < r:
            k = where[target]
            moved = unvisited[last]
            unvisited[k], unvisited[last] = moved, target
            where[moved], where[target] = k, last
            p_max = 1.0 / (1.0 + last * t)
            if u >= p_max:
                idx = min(int((u - p_max) / (1.0 - p_max) * last), last - 1)
                chosen = unvisited[idx]
                unvisited[idx], unvisited[last] = target, chosen
                where[target], where[chosen] = idx, last
        else:
            idx = min(int(u * r), last)
            chosen = unvisited[idx]
            moved = unvisited[last]
            unvisited[idx], unvisited[last] = moved, chosen
            where[moved], where[chosen] = idx, last
        cur = unvisited[last]
        path.append(cur)
    return path


def chain_walk(ph: PheromoneState, t, rng: np.random.Generator) -> np.ndarray:
    """Walk the chain graph; each bit follows the best path with probability 1/(1+t)."""
    if ph.graph != "chain":
        raise ValueError("chain_walk needs a chain pheromone state")
    t = pheromone_ratio(t)
    return _chain_sample(ph._array, ph.n, float(t) / (1.0 + float(t)), rng)


def permutation_walk(ph: PheromoneState, t, rng: np.random.Generator) -> list[int]:
    """Build a Hamiltonian path from the start node, choosing among unvisited nodes
    proportionally to edge pheromone."""
    if ph.graph != "permutation":
        raise ValueError("permutation_walk needs a permutation pheromone state")
    t = pheromone_ratio(t)
    return _permutation_sample(ph._successor, ph.n, float(t), rng)


def walk(ph: PheromoneState, t, rng: np.random.Generator):
    if ph.graph == "chain":
        return chain_walk(ph, t, rng)
    return permutation_walk(ph, t, rng)


# -- the algorithm ------------------------------------------------------------

@dataclass(frozen=True)
class RunRecord:
    problem: Problem
    n: int
    t: float
    seed: int
    iterations: int
    hit_max_iters: bool = False


Observer = Callable[[int, PheromoneState, int], None]


def run_baco(problem, n: int, t, seed: int, max_iters: int = DEFAULT_MAX_ITERS,
             observer: Optional[Observer] = None) -> RunRecord:
    """Run a single ant until the optimum ``n`` is constructed.

    The first walk uses uniform pheromones and its path is deposited at once,
    so every counted iteration walks relative to a reinforced best path.  The
    returned iteration count excludes that first construction.  ``observer``
    is called as ``observer(iteration, state, value)`` after the initial
    deposit and after every improvement.
    """
    problem = Problem.parse(problem)
    t = pheromone_ratio(t)
    if int(n) != n or n < 1:
        raise ValueError(f"problem size must be a positive integer, got {n!r}")
    if max_iters < 0:
        raise ValueError(f"max_iters must be non-negative, got {max_iters}")
    n = int(n)
    tf = float(t)
    rng = np.random.default_rng(seed)
    f = _OBJECTIVES[problem]
    state = PheromoneState.empty(problem, n)

    if problem is Problem.SORTING:
        first = _permutation_sample(None, n, tf, rng)
    else:
        first = _chain_sample(None, n, 0.5, rng)
    state = update_pheromones(state, first)
    best_value = f(first)
    if observer is not None:
        observer(0, state, best_value)

    iterations = 0
    flip_p = tf / (1.0 + tf)
    while best_value < n:
        if iterations >= max_iters:
            return RunRecord(problem, n, tf, seed, iterations, True)
        iterations += 1
        if problem is Problem.SORTING:
            candidate = _permutation_sample(state._successor, n, tf, rng)
        else:
            candidate = _chain_sample(state._array, n, flip_p, rng)
        value = f(candidate)
        if value > best_value:
            state = update_pheromones(state, candidate)
            best_value = value
            if observer is not None:
                observer(iterations, state, best_value)
    return RunRecord(problem, n, tf, seed, iterations, False)
