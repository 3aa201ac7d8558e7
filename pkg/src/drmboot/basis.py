"""Basis functions for the exponential tilt between samples.

A basis is an ordered list of term kinds drawn from a fixed whitelist:
``const`` (identically 1, always first), ``x``, ``x^k`` for integer k >= 2,
``log`` and ``sqrt``.  The whitelist keeps serialization trivial while
covering polynomial, Gamma-like and income-style model shapes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BasisDomainError

__all__ = ["BasisSpec", "eval_basis", "basis_matrix"]

_SIMPLE_TOKENS = ("const", "x", "log", "sqrt")


@dataclass(frozen=True)
class BasisSpec:
    """Ordered collection of basis terms, first one identically 1.

    Parameters
    ----------
    tokens : tuple of str
        Term descriptors, e.g. ``("const", "x", "log")``.  Powers are
        written ``"x^2"``, ``"x^3"``, ...  The first token must be
        ``"const"`` and no token may repeat.
    """

    tokens: tuple[str, ...]

    def __post_init__(self):
        tokens = tuple(self.tokens)
        object.__setattr__(self, "tokens", tokens)
        if len(tokens) < 1:
            raise ValueError("basis needs at least one term")
        if tokens[0] != "const":
            raise ValueError("first basis term must be 'const'")
        if len(set(tokens)) != len(tokens):
            raise ValueError(f"duplicate basis terms in {tokens}")
        for tok in tokens:
            if tok in _SIMPLE_TOKENS:
                continue
            if not _power_exponent(tok):
                raise ValueError(f"unknown basis term {tok!r}")

    @property
    def d(self) -> int:
        """Number of terms (the parameter dimension per group)."""
        return len(self.tokens)

    @property
    def needs_positive(self) -> bool:
        """True when any term requires x > 0."""
        return "log" in self.tokens

    @property
    def needs_nonnegative(self) -> bool:
        """True when any term requires x >= 0."""
        return "sqrt" in self.tokens

    @classmethod
    def from_tokens(cls, tokens) -> "BasisSpec":
        return cls(tuple(str(t) for t in tokens))

    @classmethod
    def from_json(cls, text: str) -> "BasisSpec":
        """Parse a JSON array of term descriptors, e.g. ``["const","x","log"]``."""
        obj = json.loads(text)
        if not isinstance(obj, list):
            raise ValueError("basis JSON must be an array of term strings")
        return cls.from_tokens(obj)

    def to_json(self) -> str:
        return json.dumps(list(self.tokens))

    def check_domain(self, x, *, group=None, offset=0):
        """Reject observations outside the domain of any term.

        Parameters
        ----------
        x : array_like
            Observations to scan.
        group : optional
            Group label used in the error message.
        offset : int
            Added to the offending position in the error (for file rows).
        """
        x = np.asarray(x, dtype=np.float64)
        bad = ~np.isfinite(x)
        reason = "non-finite value"
        term = None
        if not bad.any() and self.needs_positive:
            bad = x <= 0.0
            reason, term = "log term requires x > 0", "log"
        if not bad.any() and self.needs_nonnegative:
            bad = x < 0.0
            reason, term = "sqrt term requires x >= 0", "sqrt"
        if bad.any():
            i = int(np.argmax(bad))
            where = f"group {group}, " if group is not None else ""
            raise BasisDomainError(
                f"{reason}: {where}observation {i + offset} has value {x.flat[i]!r}",
                group=group,
                index=i + offset,
                value=float(x.flat[i]) if np.isfinite(x.flat[i]) else x.flat[i],
                term=term,
            )


def _power_exponent(token: str) -> int:
    """Exponent k for tokens of the form 'x^k' with integer k >= 2, else 0."""
    if not token.startswith("x^"):
        return 0
    try:
        k = int(token[2:])
    except ValueError:
        return 0
    return k if k >= 2 else 0


def eval_basis(spec: BasisSpec, x: float) -> np.ndarray:
    """Evaluate every basis term at a single point.

    Returns a vector of length ``spec.d`` whose first component is exactly 1.
    Domain violations raise :class:`BasisDomainError`.
    """
    spec.check_domain([x])
    return basis_matrix(spec, np.asarray([x], dtype=np.float64))[0]


def basis_matrix(spec: BasisSpec, x: np.ndarray) -> np.ndarray:
    """Evaluate the basis on an array of points, one row per point.

    The caller is responsible for domain checking (see
    :meth:`BasisSpec.check_domain`); values outside a term's domain produce
    non-finite entries here.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    out = np.empty((n, spec.d), dtype=np.float64)
    for j, tok in enumerate(spec.tokens):
        if tok == "const":
            out[:, j] = 1.0
        elif tok == "x":
            out[:, j] = x
        elif tok == "log":
            out[:, j] = np.log(x)
        elif tok == "sqrt":
            out[:, j] = np.sqrt(x)
        else:
            out[:, j] = x ** _power_exponent(tok)
    return out
