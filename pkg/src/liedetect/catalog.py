"""Catalog of representation types up to orbit-equivalence.

SO(2) types are sorted primitive weight tuples, torus types are primitive
integer lattices modulo signed permutations of the axes, and SU(2)/SO(3)
types are partitions of the ambient dimension into real irrep sizes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyAmbient,
    NoAlmostFaithfulRep,
    NoRealIrrep,
    RankDeficient,
)
from .kernel import L, block_skew, orthonormalize_frame

ABELIAN = ("SO2", "T")
NONABELIAN = ("SU2", "SO3")


@dataclass(frozen=True)
class RepType:
    """A representation type.

    group is "SO2", "T", "SU2" or "SO3".  payload is a weight tuple (SO2), a
    tuple of d lattice basis rows (T) or a partition in ascending order.
    """

    group: str
    payload: tuple

    @property
    def dim(self) -> int:
        """Dimension of the Lie algebra."""
        if self.group == "SO2":
            return 1
        if self.group == "T":
            return len(self.payload)
        return 3

    @property
    def size(self) -> int:
        """Dimension of the representation space."""
        if self.group == "SO2":
            return 2 * len(self.payload)
        if self.group == "T":
            return 2 * len(self.payload[0])
        return int(sum(self.payload))

    @property
    def tag(self) -> str:
        return f"T{self.dim}" if self.group == "T" else self.group

    def label(self) -> str:
        if self.group == "T":
            return "(" + ", ".join(str(tuple(r)) for r in self.payload) + ")"
        return str(tuple(self.payload))

    def to_dict(self) -> dict:
        payload = [list(r) for r in self.payload] if self.group == "T" else list(self.payload)
        return {"group": self.tag, "payload": payload, "dimension": self.size}


# ---------------------------------------------------------------- SO(2)

def enumerate_so2_types(
    m: int, w_max: int, allow_zero: bool = False, distinct_only: bool = True
) -> list[RepType]:
    """Non-negative non-decreasing primitive m-tuples bounded by w_max."""
    if m <= 0:
        raise EmptyAmbient("SO(2) types need at least one rotation plane")
    if w_max < 1:
        raise ConfigError("w_max must be at least 1")
    values = range(0 if allow_zero else 1, w_max + 1)
    gen = itertools.combinations(values, m) if distinct_only else itertools.combinations_with_replacement(values, m)
    out = [RepType("SO2", t) for t in gen if math.gcd(*t) == 1]
    return sorted(out, key=lambda r: r.payload)


# ---------------------------------------------------------------- lattices

@dataclass(frozen=True)
class CanonicalLatticeKey:
    """Lexicographically smallest projection onto the span, over signed permutations."""

    m: int
    entries: tuple

    def matrix(self) -> np.ndarray:
        return np.array([float(x) for x in self.entries]).reshape(self.m, self.m)


def _int_det(M: list[list[int]]) -> int:
    n = len(M)
    if n == 0:
        return 1
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    total = 0
    for j in range(n):
        if M[0][j]:
            minor = [row[:j] + row[j + 1:] for row in M[1:]]
            total += (-1) ** j * M[0][j] * _int_det(minor)
    return total


def _int_adjugate(M: list[list[int]]) -> list[list[int]]:
    n = len(M)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(M) if k != i]
            adj[j][i] = (-1) ** (i + j) * _int_det(minor)
    return adj


def _as_int_basis(basis) -> list[list[int]]:
    arr = np.asarray(basis)
    if arr.ndim != 2:
        raise ConfigError("lattice basis must be a d x m integer array")
    if not np.all(arr == np.round(arr)):
        raise ConfigError("lattice basis must have integer entries")
    return [[int(x) for x in row] for row in arr]


def determinantal_divisors(basis) -> list[int]:
    """gcd of all k x k minors, k = 1..d (0 where every minor vanishes)."""
    B = _as_int_basis(basis)
    d, m = len(B), len(B[0])
    out = []
    for k in range(1, d + 1):
        g = 0
        for rows in itertools.combinations(range(d), k):
            for cols in itertools.combinations(range(m), k):
                g = math.gcd(g, _int_det([[B[r][c] for c in cols] for r in rows]))
        out.append(g)
    return out


def invariant_factors(basis) -> list[int]:
    """Diagonal of the Smith normal form, from determinantal divisors."""
    divs = determinantal_divisors(basis)
    out, prev = [], 1
    for D in divs:
        if D == 0:
            out.append(0)
            prev = 0
            continue
        out.append(D // prev)
        prev = D
    return out


def lattice_rank(basis) -> int:
    return sum(1 for D in determinantal_divisors(basis) if D != 0)


def is_primitive(basis) -> bool:
    """True when the rows span a full-rank lattice equal to its saturation."""
    facs = invariant_factors(basis)
    return all(f == 1 for f in facs)


@lru_cache(maxsize=None)
def _signed_permutations(m: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(m))), dtype=np.int64)
    signs = np.array(list(itertools.product([1, -1], repeat=m)), dtype=np.int64)
    return perms, signs


def _scaled_projection(B: list[list[int]]) -> tuple[int, np.ndarray]:
    """(D, D * P) with P the projection onto the row span and D = det(B B^T)."""
    d, m = len(B), len(B[0])
    G = [[sum(B[i][k] * B[j][k] for k in range(m)) for j in range(d)] for i in range(d)]
    D = _int_det(G)
    adj = _int_adjugate(G)
    DP = [[sum(B[a][i] * adj[a][b] * B[b][j] for a in range(d) for b in range(d)) for j in range(m)] for i in range(m)]
    return D, np.array(DP, dtype=np.int64)


def _orbit_minimum(DP: np.ndarray) -> tuple[np.ndarray, int, int]:
    """Lexicographic minimum of s_i s_j DP[p_i, p_j] over signed permutations."""
    m = DP.shape[0]
    perms, signs = _signed_permutations(m)
    permuted = DP[perms[:, :, None], perms[:, None, :]]  # (m!, m, m)
    outer = signs[:, :, None] * signs[:, None, :]  # (2^m, m, m)
    cand = (permuted[:, None] * outer[None]).reshape(-1, m * m)
    alive = np.arange(cand.shape[0])
    for col in range(m * m):
        vals = cand[alive, col]
        alive = alive[vals == vals.min()]
        if alive.size == 1:
            break
    best = int(alive[0])
    return cand[best], best // len(signs), best % len(signs)


def canonical_lattice_key(basis) -> CanonicalLatticeKey:
    key, _, _ = _canonical_key_and_action(_as_int_basis(basis))
    return key


def _canonical_key_and_action(B: list[list[int]]):
    d = len(B)
    if lattice_rank(B) < d:
        raise RankDeficient("lattice basis rows are linearly dependent")
    D, DP = _scaled_projection(B)
    flat, pi, si = _orbit_minimum(DP)
    m = DP.shape[0]
    entries = tuple(Fraction(int(x), D) for x in flat)
    return CanonicalLatticeKey(m, entries), pi, si


def _tidy_basis(B: np.ndarray) -> tuple:
    rows = []
    for r in B:
        nz = np.flatnonzero(r)
        if nz.size and r[nz[0]] < 0:
            r = -r
        rows.append(tuple(int(x) for x in r))
    return tuple(sorted(rows))


def enumerate_torus_types(
    m: int, d: int, w_max: int, allow_zero: bool = False, distinct_only: bool = True
) -> list[RepType]:
    """Primitive rank-d sublattices of Z^m with a basis bounded by w_max.

    One representative per class of signed permutations of the axes.  With
    allow_zero off, lattices with a vanishing weight column are dropped; with
    distinct_only on, so are lattices where two weight columns agree up to sign.
    """
    if m <= 0:
        raise EmptyAmbient("torus types need at least one rotation plane")
    if d < 1:
        raise ConfigError("torus dimension must be positive")
    if d > m:
        raise NoAlmostFaithfulRep(f"T^{d} has no almost-faithful representation in R^{2 * m}")
    if w_max < 1:
        raise ConfigError("w_max must be at least 1")
    return list(_torus_types(m, d, w_max, allow_zero, distinct_only))


@lru_cache(maxsize=32)
def _torus_types(m: int, d: int, w_max: int, allow_zero: bool, distinct_only: bool) -> tuple:
    vals = np.arange(-w_max, w_max + 1)
    rows = np.array(list(itertools.product(vals, repeat=m)), dtype=np.int64)
    first = np.array([r[np.flatnonzero(r)[0]] if r.any() else 0 for r in rows])
    rows = rows[first > 0]  # one sign per row, zero row dropped
    combos = np.array(list(itertools.combinations(range(len(rows)), d)), dtype=np.int64)
    if combos.size == 0:
        return ()
    col_sets = list(itertools.combinations(range(m), d))

    spans: dict[tuple, np.ndarray] = {}
    chunk = 200_000
    for start in range(0, len(combos), chunk):
        Bs = rows[combos[start:start + chunk]]  # (K, d, m)
        minors = np.stack(
            [np.rint(np.linalg.det(Bs[:, :, list(c)].astype(float))).astype(np.int64) for c in col_sets],
            axis=1,
        )
        keep = np.gcd.reduce(np.abs(minors), axis=1) == 1
        if not allow_zero:
            keep &= ~np.any(np.all(Bs == 0, axis=1), axis=1)
        if distinct_only:
            for i, j in itertools.combinations(range(m), 2):
                same = np.all(Bs[:, :, i] == Bs[:, :, j], axis=1) | np.all(Bs[:, :, i] == -Bs[:, :, j], axis=1)
                keep &= ~same
        Bs, minors = Bs[keep], minors[keep]
        lead = minors[np.arange(len(minors)), np.argmax(minors != 0, axis=1)]
        minors = minors * np.sign(lead)[:, None]
        for key, B in zip(map(tuple, minors), Bs):
            if key not in spans:
                spans[key] = B

    perms, signs = _signed_permutations(m)
    idx, sgn = _plucker_action(m, d)
    seen: set = set()
    classes: dict[CanonicalLatticeKey, RepType] = {}
    for plucker in sorted(spans):
        if plucker in seen:
            continue
        # mark the whole signed-permutation orbit of this span as done
        orbit = np.asarray(plucker, dtype=np.int64)[idx] * sgn
        lead = orbit[np.arange(len(orbit)), np.argmax(orbit != 0, axis=1)]
        seen.update(map(tuple, orbit * np.sign(lead)[:, None]))
        B = spans[plucker]
        key, pi, si = _canonical_key_and_action(B.tolist())
        oriented = B[:, perms[pi]] * signs[si][None, :]
        classes[key] = RepType("T", _tidy_basis(oriented))
    return tuple(classes[k] for k in sorted(classes, key=lambda k: k.entries))


@lru_cache(maxsize=None)
def _plucker_action(m: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    """How signed permutations of the m axes act on the d x d minors.

    Row g gives, for every column subset c, the source subset index and sign,
    so that minors(B') = minors(B)[idx[g]] * sgn[g] for the transformed B'.
    """
    col_sets = list(itertools.combinations(range(m), d))
    where = {c: i for i, c in enumerate(col_sets)}
    perms, signs = _signed_permutations(m)
    idx = np.empty((len(perms) * len(signs), len(col_sets)), dtype=np.int64)
    sgn = np.empty_like(idx)
    for a, p in enumerate(perms):
        for ci, c in enumerate(col_sets):
            src = [int(p[k]) for k in c]
            order = sorted(range(d), key=lambda k: src[k])
            inversions = sum(1 for x in range(d) for y in range(x + 1, d) if order[x] > order[y])
            idx[a * len(signs):(a + 1) * len(signs), ci] = where[tuple(sorted(src))]
            sgn[a * len(signs):(a + 1) * len(signs), ci] = (-1) ** inversions * np.prod(signs[:, list(c)], axis=1)
    return idx, sgn


# ---------------------------------------------------------------- SU(2), SO(3)

def admissible_part(group: str, p: int) -> bool:
    if group == "SO3":
        return p % 2 == 1
    if group == "SU2":
        return p % 2 == 1 or p % 4 == 0
    raise ConfigError(f"no partition catalog for group {group!r}")


def enumerate_partition_types(group: str, n: int, nontrivial_only: bool = True) -> list[RepType]:
    """Partitions of n into real irrep sizes of SU(2) or SO(3)."""
    if n < 1:
        raise EmptyAmbient("ambient dimension must be positive")
    parts = [p for p in range(1, n + 1) if admissible_part(group, p)]

    def rec(remaining: int, smallest: int):
        if remaining == 0:
            yield ()
            return
        for p in parts:
            if p < smallest or p > remaining:
                continue
            for tail in rec(remaining - p, p):
                yield (p,) + tail

    out = [t for t in rec(n, 1) if not (nontrivial_only and max(t) == 1)]
    return [RepType(group, t) for t in sorted(out)]


@dataclass(frozen=True)
class IrrepBasis:
    dimension: int
    generators: np.ndarray  # (d, dim, dim)


def d(x: int, y: int) -> float:
    return 1.0 if x == y else 0.0


def _a(j: float, l: int) -> float:
    if l < 1:
        return 0.0
    return math.sqrt((2 * j * l - l * (l - 1)) / 4)


def _integer_spin(j: int) -> np.ndarray:
    n = 2 * j + 1
    L1, L2, L3 = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    c = _a(j, j) + math.sqrt((j * j + j) / 2)
    for k in range(1, n + 1):
        even = (1 + (-1) ** k) / 2
        odd = 1 - even
        for l in range(1, n + 1):
            L1[k - 1, l - 1] = (
                even * (d(l, k + 1) * _a(j, k // 2) + d(k, l + 3) * _a(j, (k - 2) // 2))
                - c * (d(l, 2 * j + 1) * d(k, 2 * j) - d(l, 2 * j) * d(k, 2 * j + 1))
                - odd * (d(l, k + 3) * _a(j, (k + 1) // 2) + d(k, l + 1) * _a(j, (k - 1) // 2))
            )
            # the sign of the last term is what makes L2 skew
            L2[k - 1, l - 1] = (
                c * (d(l, 2 * j + 1) * d(k, 2 * j - 1) - d(l, 2 * j - 1) * d(k, 2 * j + 1))
                - d(l, k + 2) * _a(j, (k + 1) // 2)
                + d(k, l + 2) * _a(j, (k - 1) // 2)
            )
            L3[k - 1, l - 1] = 0.25 * (
                (1 + (-1) ** k) * d(k, l + 1) * (2 * j + 2 - k) + ((-1) ** k - 1) * d(l, k + 1) * (2 * j + 1 - k)
            )
    return np.stack([L1, L2, L3])


def _half_integer_spin(j: float) -> np.ndarray:
    n = int(round(4 * j + 2))
    L1, L2, L3 = np.zeros((n, n)), np.zeros((n, n)), np.zeros((n, n))
    for k in range(1, n + 1):
        even = (1 + (-1) ** k) / 2
        odd = 1 - even
        for l in range(1, n + 1):
            L1[k - 1, l - 1] = (
                odd * (d(l, k + 3) * _a(j, (k + 1) // 2) + d(k, l + 1) * _a(j, (k - 1) // 2))
                - even * (d(l, k + 1) * _a(j, k // 2) + d(k, l + 3) * _a(j, (k - 2) // 2))
            )
            L2[k - 1, l - 1] = d(l, k + 2) * _a(j, (k + 1) // 2) - d(k, l + 2) * _a(j, (k - 1) // 2)
            L3[k - 1, l - 1] = 0.25 * (
                (1 + (-1) ** k) * d(k, l + 1) * (2 * j + 2 - k) + ((-1) ** k - 1) * d(l, k + 1) * (2 * j + 1 - k)
            )
    return np.stack([L1, L2, L3])


@lru_cache(maxsize=None)
def _spin_generators(p: int) -> np.ndarray:
    if p == 1:
        return np.zeros((3, 1, 1))
    if p % 2 == 1:
        return _integer_spin((p - 1) // 2)
    return _half_integer_spin((p - 2) / 4)


def irrep_basis(group: str, label: int) -> IrrepBasis:
    """Generators of a real irreducible representation.

    For SO2 the label is the weight k; for SU2/SO3 it is the dimension.  The
    su(2) generators satisfy [e1,e2]=e3, [e2,e3]=e1, [e1,e3]=-e2.
    """
    if group == "SO2":
        if label == 0:
            return IrrepBasis(1, np.zeros((1, 1, 1)))
        return IrrepBasis(2, L(float(label))[None])
    if group in NONABELIAN:
        p = int(label)
        if p < 1 or not admissible_part(group, p):
            raise NoRealIrrep(f"{group} has no real irreducible representation of dimension {p}")
        return IrrepBasis(p, _spin_generators(p).copy())
    raise ConfigError(f"unknown group {group!r}")


def _padding(rep: RepType, n: int) -> int:
    extra = n - rep.size
    if extra < 0 or extra > (1 if rep.group in ABELIAN else 0):
        raise DimensionMismatch(f"type {rep.label()} has dimension {rep.size}, ambient is {n}")
    return extra


def generators(rep: RepType, n: int | None = None) -> np.ndarray:
    """Unnormalized generators: integer-rate blocks or su(2) structure constants.

    For SO2 and tori each generator has period 2*pi.  An odd ambient dimension
    gets one trailing trivial coordinate.
    """
    n = rep.size if n is None else n
    _padding(rep, n)
    if rep.group == "SO2":
        return block_skew(rep.payload, n)[None]
    if rep.group == "T":
        return np.stack([block_skew(row, n) for row in rep.payload])
    blocks = [_spin_generators(p) for p in rep.payload]
    return np.stack([scipy.linalg.block_diag(*[b[i] for b in blocks]) for i in range(3)])


def assemble_frame(rep: RepType, n: int | None = None) -> np.ndarray:
    """Orthonormal frame spanning the pushforward algebra of rep."""
    gens = generators(rep, n)
    frame = orthonormalize_frame(gens)
    if frame.shape[0] != rep.dim:
        raise RankDeficient(f"type {rep.label()} does not yield a {rep.dim}-dimensional algebra")
    return frame


def enumerate_types(group: str, n: int, w_max: int = 1, nontrivial_only: bool = True) -> list[RepType]:
    """Default candidate list for a group tag ("SO2", "T2", "SU2", ...) in R^n."""
    tag, d = parse_group(group)
    if tag == "SO2":
        return enumerate_so2_types(n // 2, w_max)
    if tag == "T":
        if 2 * d > n:
            raise NoAlmostFaithfulRep(f"T^{d} has no almost-faithful representation in R^{n}")
        return enumerate_torus_types(n // 2, d, w_max)
    return enumerate_partition_types(tag, n, nontrivial_only)


def parse_group(group: str) -> tuple[str, int]:
    """'SO2' -> ('SO2', 1), 'T3' -> ('T', 3), 'SU2' -> ('SU2', 3)."""
    g = group.strip().upper()
    if g in ("SO2", "T1"):
        return "SO2", 1
    if g in NONABELIAN:
        return g, 3
    if g.startswith("T") and g[1:].isdigit() and int(g[1:]) >= 1:
        return "T", int(g[1:])
    raise ConfigError(f"unsupported group {group!r}; expected SO2, T<d>, SU2 or SO3")


GROUPS_BY_DIMENSION = {
    1: ("SO2",),
    2: ("T2",),
    3: ("SU2", "T3"),
    4: ("SO2xSU2", "T4"),
    5: ("T2xSU2", "T5"),
}


def suggest_groups(d: int) -> tuple[str, ...]:
    """Compact connected groups of dimension d; products are listed but unsupported."""
    return GROUPS_BY_DIMENSION.get(d, ())
