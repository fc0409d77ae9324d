"""Pheromone-ratio rules that resolve to a value per problem size.

Accepted forms::

    0.25        literal
    1/3         literal fraction
    2/n         c / n
    1/n^2       c / n^s
"""
from __future__ import annotations

import re
from dataclasses import dataclass

_FLOAT = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_PATTERN = re.compile(
    rf"^(?P<c>{_FLOAT})(?:\s*/\s*(?:(?P<n>n)(?:\s*\^\s*(?P<s>{_FLOAT}))?|(?P<d>{_FLOAT})))?$")


@dataclass(frozen=True)
class RatioExpression:
    form: str  # "literal", "c_over_n" or "c_over_n_pow_s"
    c: float
    s: float = 1.0
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "RatioExpression":
        raw = text.strip()
        match = _PATTERN.match(raw)
        if match is None:
            raise ValueError(f"cannot parse pheromone ratio {text!r}; "
                             "expected FLOAT, FLOAT/FLOAT, FLOAT/n or FLOAT/n^FLOAT")
        c = float(match["c"])
        if c <= 0:
            raise ValueError(f"ratio constant must be positive in {text!r}")
        if match["n"]:
            if match["s"] is None:
                return cls("c_over_n", c, 1.0, raw)
            s = float(match["s"])
            if s <= 0:
                raise ValueError(f"exponent must be positive in {text!r}")
            return cls("c_over_n_pow_s", c, s, raw)
        if match["d"] is not None:
            d = float(match["d"])
            if d == 0:
                raise ValueError(f"division by zero in {text!r}")
            c = c / d
        return cls("literal", c, 1.0, raw)

    def resolve(self, n: int) -> float:
        """Ratio for problem size ``n``; raises if it falls outside (0, 1]."""
        if self.form == "literal":
            t = self.c
        elif self.form == "c_over_n":
            t = self.c / n
        else:
            t = self.c / n ** self.s
        if not 0 < t <= 1:
            raise ValueError(f"ratio {self} resolves to {t!r} at n={n}, outside (0, 1]")
        return t

    def __str__(self) -> str:
        if self.text:
            return self.text
        if self.form == "literal":
            return repr(self.c)
        if self.form == "c_over_n":
            return f"{self.c:g}/n"
        return f"{self.c:g}/n^{self.s:g}"
