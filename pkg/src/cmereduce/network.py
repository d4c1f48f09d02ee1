"""Reaction networks: text parsing, stoichiometry and invariants.

A network file is line oriented::

    species: A, B, C
    reaction r1: A -> B      rate=10.0  fast
    reaction r2: A + B -> C  rate=0.1   slow
    reaction r3: 0 -> A      rate=0.05  slow    # '0' is the null complex
    reaction r4: B <-> C     rate=2.0 rrate=1.0 fast
    init: A=1, B=2, C=0
    cap:  A=50, B=50, C=50

The ``reaction`` keyword is optional (``r1: A -> B rate=1 fast`` is accepted).
Rates are stochastic rate constants; propensities are ``rate * prod C(n_i, nu_i)``.
"""

from __future__ import annotations

import enum
import math
import re
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Speed",
    "Species",
    "Complex",
    "Reaction",
    "ReactionNetwork",
    "NetworkStructure",
    "NetworkError",
    "ParseError",
    "NoFastSubsystem",
    "MolecularityWarning",
    "parse_network",
    "load_network",
    "format_network",
    "structure",
    "deficiency",
    "rational_rank",
    "conservation_basis",
    "fast_invariant_matrix",
]


class NetworkError(ValueError):
    """Invalid reaction network."""


class ParseError(NetworkError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NoFastSubsystem(NetworkError):
    """Raised when an operation needs at least one fast reaction."""


class MolecularityWarning(UserWarning):
    pass


class Speed(enum.Enum):
    FAST = "fast"
    SLOW = "slow"


@dataclass(frozen=True)
class Species:
    name: str
    index: int


@dataclass(frozen=True)
class Complex:
    coefficients: tuple[int, ...]

    @property
    def is_null(self) -> bool:
        return not any(self.coefficients)

    @property
    def molecularity(self) -> int:
        return sum(self.coefficients)


@dataclass(frozen=True)
class Reaction:
    label: str
    reactant: int
    product: int
    rate_constant: float
    speed: Speed

    @property
    def is_fast(self) -> bool:
        return self.speed is Speed.FAST


@dataclass(frozen=True)
class ReactionNetwork:
    species: tuple[Species, ...]
    complexes: tuple[Complex, ...]
    reactions: tuple[Reaction, ...]
    initial_state: tuple[int, ...]
    caps: tuple[int, ...] | None = None

    def __post_init__(self):
        m = len(self.species)
        if [s.index for s in self.species] != list(range(m)):
            raise NetworkError("species indices must be dense and ordered")
        names = [s.name for s in self.species]
        if len(set(names)) != m:
            raise NetworkError("duplicate species names")
        if not self.reactions:
            raise NetworkError("no reactions")
        if len(set(self.complexes)) != len(self.complexes):
            raise NetworkError("duplicate complexes")
        used = set()
        for r in self.reactions:
            if r.reactant == r.product:
                raise NetworkError(f"reaction {r.label}: reactant equals product")
            if not r.rate_constant > 0 or not math.isfinite(r.rate_constant):
                raise NetworkError(f"reaction {r.label}: rate must be positive")
            used.update((r.reactant, r.product))
        if used != set(range(len(self.complexes))):
            raise NetworkError("every complex must appear in some reaction")
        if len(self.initial_state) != m or min(self.initial_state, default=0) < 0:
            raise NetworkError("initial state must be a non-negative vector over the species")
        if self.caps is not None:
            if len(self.caps) != m or min(self.caps) <= 0:
                raise NetworkError("caps must be positive, one per species")
            for s, n0, cap in zip(self.species, self.initial_state, self.caps):
                if n0 > cap:
                    raise NetworkError(f"initial count of {s.name} exceeds its cap")

    @property
    def m(self) -> int:
        return len(self.species)

    @property
    def r(self) -> int:
        return len(self.reactions)

    @property
    def p(self) -> int:
        return len(self.complexes)

    @property
    def species_names(self) -> list[str]:
        return [s.name for s in self.species]

    def species_index(self, name: str) -> int:
        for s in self.species:
            if s.name == name:
                return s.index
        raise KeyError(name)

    @cached_property
    def reactant_matrix(self) -> np.ndarray:
        """r x m stoichiometric coefficients of each reaction's reactant complex."""
        return np.array(
            [self.complexes[rx.reactant].coefficients for rx in self.reactions],
            dtype=np.int64,
        ).reshape(self.r, self.m)

    @cached_property
    def change_matrix(self) -> np.ndarray:
        """r x m net state change of each reaction (rows of (nu E)^T)."""
        prod = np.array(
            [self.complexes[rx.product].coefficients for rx in self.reactions],
            dtype=np.int64,
        ).reshape(self.r, self.m)
        return prod - self.reactant_matrix

    @cached_property
    def rate_constants(self) -> np.ndarray:
        return np.array([rx.rate_constant for rx in self.reactions], dtype=float)

    @cached_property
    def fast_mask(self) -> np.ndarray:
        return np.array([rx.is_fast for rx in self.reactions], dtype=bool)

    def with_rates(self, rates: dict[str, float]) -> "ReactionNetwork":
        """Copy with some rate constants replaced, keyed by reaction label."""
        unknown = set(rates) - {rx.label for rx in self.reactions}
        if unknown:
            raise KeyError(f"unknown reactions: {sorted(unknown)}")
        reactions = tuple(
            Reaction(rx.label, rx.reactant, rx.product, float(rates.get(rx.label, rx.rate_constant)), rx.speed)
            for rx in self.reactions
        )
        return ReactionNetwork(self.species, self.complexes, reactions, self.initial_state, self.caps)

    def with_initial_state(self, initial_state: Sequence[int]) -> "ReactionNetwork":
        return ReactionNetwork(
            self.species, self.complexes, self.reactions, tuple(int(x) for x in initial_state), self.caps
        )

    def with_caps(self, caps: Sequence[int] | None) -> "ReactionNetwork":
        caps = None if caps is None else tuple(int(x) for x in caps)
        return ReactionNetwork(self.species, self.complexes, self.reactions, self.initial_state, caps)


# ---------------------------------------------------------------------------
# parsing

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_TERM_RE = re.compile(rf"^(?:(\d+)\s*\*?\s*)?({_IDENT})$")
_LABEL_RE = re.compile(rf"^(?:reaction\s+)?({_IDENT})$")
_NULL_TOKENS = {"0", "phi", "∅", "φ"}


def _parse_side(text: str, index: dict[str, int], lineno: int) -> tuple[int, ...]:
    coeffs = [0] * len(index)
    text = text.strip()
    if not text:
        raise ParseError("empty complex", lineno)
    if text in _NULL_TOKENS:
        return tuple(coeffs)
    for term in text.split("+"):
        term = term.strip()
        match = _TERM_RE.match(term)
        if not match:
            raise ParseError(f"cannot parse term {term!r}", lineno)
        count = int(match.group(1)) if match.group(1) else 1
        name = match.group(2)
        if name not in index:
            raise ParseError(f"unknown species {name!r}", lineno)
        if count <= 0:
            raise ParseError(f"non-positive coefficient in {term!r}", lineno)
        coeffs[index[name]] += count
    return tuple(coeffs)


def _parse_assignments(text: str, index: dict[str, int], lineno: int, what: str) -> dict[int, int]:
    values: dict[int, int] = {}
    if not text.strip():
        return values
    for item in text.split(","):
        if "=" not in item:
            raise ParseError(f"expected NAME=VALUE in {what}, got {item.strip()!r}", lineno)
        name, value = (s.strip() for s in item.split("=", 1))
        if name not in index:
            raise ParseError(f"unknown species {name!r} in {what}", lineno)
        try:
            count = int(value)
        except ValueError:
            raise ParseError(f"{what} value for {name} must be an integer", lineno) from None
        if index[name] in values:
            raise ParseError(f"{name} assigned twice in {what}", lineno)
        values[index[name]] = count
    return values


def _parse_rate(value: str, key: str, lineno: int) -> float:
    try:
        rate = float(value)
    except ValueError:
        raise ParseError(f"{key} must be a number, got {value!r}", lineno) from None
    if not rate > 0 or not math.isfinite(rate):
        raise ParseError(f"{key} must be positive, got {value}", lineno)
    return rate


def parse_network(text: str) -> ReactionNetwork:
    """Parse a network description into a :class:`ReactionNetwork`."""
    names: list[str] | None = None
    index: dict[str, int] = {}
    raw_reactions: list[tuple[str, tuple[int, ...], tuple[int, ...], float, Speed, int]] = []
    init_line: tuple[str, int] | None = None
    cap_line: tuple[str, int] | None = None

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if ":" not in line:
            raise ParseError(f"expected 'key: value', got {line!r}", lineno)
        key, body = (s.strip() for s in line.split(":", 1))
        if key == "species":
            if names is not None:
                raise ParseError("species declared twice", lineno)
            names = [s.strip() for s in body.split(",") if s.strip()]
            for name in names:
                if not re.fullmatch(_IDENT, name):
                    raise ParseError(f"invalid species name {name!r}", lineno)
            if len(set(names)) != len(names):
                raise ParseError("duplicate species name", lineno)
            if not names:
                raise ParseError("empty species list", lineno)
            index = {name: i for i, name in enumerate(names)}
        elif key == "init":
            if init_line is not None:
                raise ParseError("init given twice", lineno)
            init_line = (body, lineno)
        elif key in ("cap", "caps"):
            if cap_line is not None:
                raise ParseError("cap given twice", lineno)
            cap_line = (body, lineno)
        else:
            match = _LABEL_RE.match(key)
            if not match:
                raise ParseError(f"unrecognised line key {key!r}", lineno)
            if names is None:
                raise ParseError("species must be declared before reactions", lineno)
            raw_reactions.extend(_parse_reaction(match.group(1), body, index, lineno))

    if names is None:
        raise ParseError("missing species declaration")
    if not raw_reactions:
        raise ParseError("no reactions")

    seen: set[str] = set()
    for label, *_, lineno in raw_reactions:
        if label in seen:
            raise ParseError(f"duplicate reaction label {label!r}", lineno)
        seen.add(label)

    complexes: list[tuple[int, ...]] = []
    cindex: dict[tuple[int, ...], int] = {}

    def intern(c: tuple[int, ...]) -> int:
        if c not in cindex:
            cindex[c] = len(complexes)
            complexes.append(c)
        return cindex[c]

    reactions = []
    for label, lhs, rhs, rate, speed, lineno in raw_reactions:
        if lhs == rhs:
            raise ParseError(f"reaction {label}: reactant and product complexes are equal", lineno)
        if sum(lhs) > 2:
            warnings.warn(
                f"reaction {label} has molecularity {sum(lhs)} > 2",
                MolecularityWarning,
                stacklevel=2,
            )
        reactions.append(Reaction(label, intern(lhs), intern(rhs), rate, speed))

    m = len(names)
    init = [0] * m
    if init_line is not None:
        for i, v in _parse_assignments(init_line[0], index, init_line[1], "init").items():
            if v < 0:
                raise ParseError(f"negative initial count for {names[i]}", init_line[1])
            init[i] = v
    caps = None
    if cap_line is not None:
        values = _parse_assignments(cap_line[0], index, cap_line[1], "cap")
        missing = [names[i] for i in range(m) if i not in values]
        if missing:
            raise ParseError(f"cap missing for species {', '.join(missing)}", cap_line[1])
        for i, v in values.items():
            if v <= 0:
                raise ParseError(f"cap for {names[i]} must be positive", cap_line[1])
            if init[i] > v:
                raise ParseError(f"initial count of {names[i]} exceeds its cap", cap_line[1])
        caps = tuple(values[i] for i in range(m))

    return ReactionNetwork(
        species=tuple(Species(n, i) for i, n in enumerate(names)),
        complexes=tuple(Complex(c) for c in complexes),
        reactions=tuple(reactions),
        initial_state=tuple(init),
        caps=caps,
    )


def _parse_reaction(label, body, index, lineno):
    if "<->" in body:
        lhs, rest = body.split("<->", 1)
        reversible = True
    elif "->" in body:
        lhs, rest = body.split("->", 1)
        reversible = False
    else:
        raise ParseError(f"reaction {label}: missing '->' or '<->'", lineno)
    tokens = rest.split()
    rhs_tokens = []
    attrs: dict[str, str] = {}
    speed = None
    for tok in tokens:
        if "=" in tok:
            k, v = tok.split("=", 1)
            if k not in ("rate", "rrate"):
                raise ParseError(f"reaction {label}: unknown attribute {k!r}", lineno)
            if k in attrs:
                raise ParseError(f"reaction {label}: {k} given twice", lineno)
            attrs[k] = v
        elif tok in ("fast", "slow"):
            if speed is not None:
                raise ParseError(f"reaction {label}: speed given twice", lineno)
            speed = Speed(tok)
        elif attrs or speed is not None:
            raise ParseError(f"reaction {label}: unexpected token {tok!r}", lineno)
        else:
            rhs_tokens.append(tok)
    if speed is None:
        raise ParseError(f"reaction {label}: missing speed tag (fast|slow)", lineno)
    if "rate" not in attrs:
        raise ParseError(f"reaction {label}: missing rate", lineno)
    rate = _parse_rate(attrs["rate"], "rate", lineno)
    left = _parse_side(lhs, index, lineno)
    right = _parse_side(" ".join(rhs_tokens), index, lineno)
    out = [(label, left, right, rate, speed, lineno)]
    if reversible:
        if "rrate" not in attrs:
            raise ParseError(f"reaction {label}: reversible reaction needs rrate", lineno)
        rrate = _parse_rate(attrs["rrate"], "rrate", lineno)
        out.append((f"{label}_rev", right, left, rrate, speed, lineno))
    elif "rrate" in attrs:
        raise ParseError(f"reaction {label}: rrate given for irreversible reaction", lineno)
    return out


def load_network(path) -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


def _format_complex(net: ReactionNetwork, c: Complex) -> str:
    if c.is_null:
        return "0"
    terms = []
    for s, k in zip(net.species, c.coefficients):
        if k:
            terms.append(s.name if k == 1 else f"{k} {s.name}")
    return " + ".join(terms)


def format_network(net: ReactionNetwork) -> str:
    """Render a network in the file format; parsing the output reproduces ``net``."""
    lines = ["species: " + ", ".join(net.species_names)]
    for rx in net.reactions:
        lhs = _format_complex(net, net.complexes[rx.reactant])
        rhs = _format_complex(net, net.complexes[rx.product])
        lines.append(f"reaction {rx.label}: {lhs} -> {rhs} rate={rx.rate_constant!r} {rx.speed.value}")
    lines.append("init: " + ", ".join(f"{s.name}={n}" for s, n in zip(net.species, net.initial_state)))
    if net.caps is not None:
        lines.append("cap: " + ", ".join(f"{s.name}={n}" for s, n in zip(net.species, net.caps)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# stoichiometric structure


@dataclass(frozen=True)
class NetworkStructure:
    nu: np.ndarray
    incidence: np.ndarray
    exit: np.ndarray
    nu_e: np.ndarray
    fast_mask: np.ndarray = field(repr=False)

    @property
    def nu_e_fast(self) -> np.ndarray:
        return self.nu_e[:, self.fast_mask]

    @property
    def nu_e_slow(self) -> np.ndarray:
        return self.nu_e[:, ~self.fast_mask]


def structure(net: ReactionNetwork) -> NetworkStructure:
    """Complex composition, incidence, exit and net stoichiometry matrices."""
    nu = np.array([c.coefficients for c in net.complexes], dtype=np.int64).T.reshape(net.m, net.p)
    incidence = np.zeros((net.p, net.r), dtype=np.int64)
    for l, rx in enumerate(net.reactions):
        incidence[rx.reactant, l] = -1
        incidence[rx.product, l] = 1
    exit_ = (incidence == -1).astype(np.int64)
    return NetworkStructure(nu, incidence, exit_, nu @ incidence, net.fast_mask.copy())


def _rref(rows: list[list[Fraction]], ncols: int, col_order: Sequence[int]):
    """Reduced row echelon form over the rationals, pivoting in ``col_order``."""
    rows = [list(r) for r in rows]
    pivots: list[int] = []
    rank = 0
    for col in col_order:
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        lead = rows[rank][col]
        rows[rank] = [x / lead for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col] != 0:
                f = rows[i][col]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        pivots.append(col)
        rank += 1
        if rank == len(rows):
            break
    return rows[:rank], pivots


def _as_fractions(matrix) -> list[list[Fraction]]:
    arr = np.asarray(matrix)
    if arr.dtype.kind not in "iub":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise TypeError("exact rank/null space needs an integer matrix")
    return [[Fraction(int(x)) for x in row] for row in arr.astype(np.int64).tolist()]


def rational_rank(matrix) -> int:
    """Rank of an integer matrix computed exactly over the rationals."""
    arr = np.atleast_2d(np.asarray(matrix))
    if arr.size == 0:
        return 0
    rows, _ = _rref(_as_fractions(arr), arr.shape[1], range(arr.shape[1]))
    return len(rows)


def _normalise(vec: list[Fraction]) -> tuple[int, ...]:
    lcm = 1
    for x in vec:
        lcm = lcm * x.denominator // math.gcd(lcm, x.denominator)
    ints = [int(x * lcm) for x in vec]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    ints = [x // g for x in ints]
    lead = next(x for x in ints if x != 0)
    if lead < 0:
        ints = [-x for x in ints]
    return tuple(ints)


def _left_null_basis(matrix: np.ndarray, col_order: Sequence[int]) -> list[tuple[int, ...]]:
    m = matrix.shape[0]
    rows, pivots = _rref(_as_fractions(matrix.T), m, col_order)
    free = [c for c in col_order if c not in set(pivots)]
    basis = []
    for f in free:
        vec = [Fraction(0)] * m
        vec[f] = Fraction(1)
        for row, pc in zip(rows, pivots):
            vec[pc] = -row[f]
        basis.append(_normalise(vec))
    return basis


def conservation_basis(matrix) -> list[tuple[int, ...]]:
    """Integer basis of the left null space ``{a : a^T M = 0}`` of an integer matrix.

    Rows are scaled to coprime integers with a positive leading entry.  Pivots
    are tried from the last species backwards first, which tends to yield a
    non-negative basis for closed networks; non-negativity is not guaranteed.
    """
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    m, r = arr.shape
    if m == 0:
        return []
    if r == 0:
        return [tuple(int(i == j) for j in range(m)) for i in range(m)]
    candidates = [_left_null_basis(arr, list(range(m - 1, -1, -1)))]
    if any(x < 0 for v in candidates[0] for x in v):
        candidates.append(_left_null_basis(arr, list(range(m))))
    for basis in candidates:
        if all(x >= 0 for v in basis for x in v):
            return sorted(basis, reverse=True)
    return sorted(candidates[0], reverse=True)


def deficiency(net: ReactionNetwork) -> int:
    st = structure(net)
    return rational_rank(st.incidence) - rational_rank(st.nu_e)


def fast_invariant_matrix(net: ReactionNetwork) -> np.ndarray:
    """Integer matrix whose rows span the invariants of the fast reactions."""
    st = structure(net)
    if not st.fast_mask.any():
        raise NoFastSubsystem("network has no fast reactions")
    basis = conservation_basis(st.nu_e_fast)
    return np.array(basis, dtype=np.int64).reshape(len(basis), net.m)


def complexes_text(net: ReactionNetwork) -> list[str]:
    return [_format_complex(net, c) for c in net.complexes]


def iter_fast(net: ReactionNetwork) -> Iterable[int]:
    return (i for i, rx in enumerate(net.reactions) if rx.is_fast)
