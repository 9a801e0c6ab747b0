"""Versioned table of closed-form reference values.

Each entry is a formula in ``k`` and ``n`` together with an anchor string
describing the statement it comes from.  Report rows copy the anchor into
their provenance field.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

TABLE_VERSION = 1


@dataclass(frozen=True)
class Reference:
    key: str
    formula: Callable
    anchor: str
    cited: bool = False

    def value(self, **params):
        return float(self.formula(**params))


def _frac(num, den):
    return Fraction(num, den)


_ENTRIES = [
    Reference("hofer_length.psi", lambda k, n: _frac(1, 2), "closed form: Hofer length of the psi-loop is 1/2"),
    Reference("hofer_length.phi", lambda k, n: _frac(k, 2), "closed form: Hofer length of Lambda^k is k/2"),
    Reference("hofer_length.const", lambda k, n: 0, "constant loop has zero length"),
    Reference("karea", lambda k, n: _frac(1, 2), "K-area of the loop-built connection equals the loop length"),
    Reference("pairing.A+", lambda k, n: _frac(k - 1 - n, 2 * n + 2), "pairing of the loop-built class with A+ = [0:1:0..]"),
    Reference("pairing.A-", lambda k, n: _frac(k, 2 * n + 2), "pairing of the loop-built class with A- = [1:0..]"),
    Reference("epsilon", lambda k, n: _frac(1, 2), "width of the non-symplectic interval of Lambda^k, 1 <= k <= n"),
    Reference("nu", lambda k, n: _frac(1, 2) if k % (n + 1) else 0, "minimal Hofer length of Lambda^k", cited=True),
    Reference("maslov.diagonal", lambda k, n: k, "Maslov index of the diagonal phase loop diag(e^{pi i t} x k, 1)"),
    Reference("maslov.A+", lambda k, n: k - 1 - n, "Maslov index of the constant disc at [0:1:0..]"),
    Reference("maslov.A-", lambda k, n: k, "Maslov index of the constant disc at [1:0..]"),
    Reference("maslov.residue", lambda k, n: k % (n + 1), "Maslov index of Lambda^k modulo n+1"),
    Reference("maslov.minimal", lambda k, n: n + 1, "minimal Maslov number of RP^n in CP^n"),
    Reference("sections.Q_difference", lambda k, n: _frac(-1, 2), "energy identity: Q(A+) - Q(A-) = -(n+1)/(2n+2)"),
    Reference("torus.nu", lambda area: area, "minimal length of a translation loop equals the disc area", cited=True),
]

TABLE = {entry.key: entry for entry in _ENTRIES}


def lookup(key):
    try:
        return TABLE[key]
    except KeyError:
        raise KeyError(f"no reference value {key!r} (table version {TABLE_VERSION})") from None


def table_rows():
    """Table as plain dicts (for documentation and the JSON report header)."""
    return [{"key": e.key, "anchor": e.anchor, "cited": e.cited} for e in _ENTRIES]
