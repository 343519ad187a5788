"""Weight families for cardinal interaction indices.

A cardinal index is determined by size weights ``m_s(t)`` (order ``s`` of the
interaction subset, size ``t`` of the disjoint context coalition). The single
powerset-pass representation uses the derived table
``gamma_s(t, k) = (-1)^(s-k) * m_s(t - k)`` with ``k`` the intersection size.
All factorial ratios are evaluated with multiplicative recurrences in double
precision so weights stay finite up to d = 63.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SchemaError, UnsupportedOrderError

SII = "SII"
STI = "STI"
FSI_TOP = "FSI_TOP"
SV = "SV"
NSII = "n-SII"

KINDS = (SII, STI, FSI_TOP, SV)

SCHEME_SHAPLEY_KERNEL = "shapley_kernel"
SCHEME_SII_TAIL = "sii_tail"

# Numeric stand-in for the "high positive constant" tail weight, used only by
# degenerate plans that never promote the tails (budget < 2); with budget >= 2
# sizes 0 and d always go deterministic regardless of this value.
Q0_FACTOR = 1.0e7


def validate_kind(kind: str, s0: int) -> None:
    if kind not in KINDS:
        raise SchemaError(f"unknown index kind {kind!r}; expected one of {KINDS}")
    if s0 < 1:
        raise SchemaError(f"maximum order must be >= 1, got {s0}")
    if kind == SV and s0 != 1:
        raise SchemaError("the plain value index is the order-1 case; use s0=1")


def binom_float(n: int, k: int) -> float:
    """C(n, k) as a float via the multiplicative recurrence; 0 out of range."""
    if k < 0 or k > n or n < 0:
        return 0.0
    k = min(k, n - k)
    out = 1.0
    for j in range(1, k + 1):
        out *= (n - k + j) / j
    return out


def inv_binom_float(n: int, k: int) -> float:
    """1 / C(n, k) accumulated multiplicatively (never materializes C)."""
    if k < 0 or k > n or n < 0:
        raise ValueError(f"binomial argument out of range: C({n}, {k})")
    k = min(k, n - k)
    out = 1.0
    for j in range(1, k + 1):
        out *= j / (n - k + j)
    return out


def harmonic(n: int) -> float:
    """n-th harmonic number."""
    return sum(1.0 / i for i in range(1, n + 1))


def weight_m(kind: str, d: int, s: int, t: int, s0: int | None = None) -> float:
    """Size weight m_s(t) of one index family.

    For STI and FSI the weights depend on the maximum order s0 (defaults to s,
    i.e. a top-order query). FSI only defines top-order weights; asking for
    s < s0 raises, since no closed form in terms of discrete derivatives is
    known for its lower orders.
    """
    if s0 is None:
        s0 = s if kind != SV else 1
    validate_kind(kind, s0)
    if not 1 <= s <= s0 <= d:
        raise SchemaError(f"order {s} out of range for s0={s0}, d={d}")
    if not 0 <= t <= d - s:
        raise SchemaError(f"context size {t} out of range 0..{d - s}")
    if kind == SV:
        kind = SII
    if kind == SII:
        # (d-t-s)! t! / (d-s+1)!  ==  1 / ((d-s+1) C(d-s, t))
        return inv_binom_float(d - s, t) / (d - s + 1)
    if kind == STI:
        if s < s0:
            # Lower orders are the discrete derivative at the empty set.
            return 1.0 if t == 0 else 0.0
        # s0 (d-t-1)! t! / d!  ==  s0 / (d C(d-1, t))
        return s0 * inv_binom_float(d - 1, t) / d
    # FSI top order:
    # (2s0-1)!/((s0-1)!)^2 * (d-t-1)!(t+s0-1)!/(d+s0-1)!
    if s < s0:
        raise UnsupportedOrderError(
            "faithful-index weights are only defined for the top order"
        )
    front = (2 * s0 - 1) * binom_float(2 * s0 - 2, s0 - 1)
    ratio = 1.0
    for j in range(1, d - t):
        ratio *= j / (t + s0 - 1 + j)
    ratio /= d + s0 - 1
    return front * ratio


def gamma_weight(kind: str, d: int, s: int, t: int, k: int, s0: int | None = None) -> float:
    """gamma_s(t, k) = (-1)^(s-k) m_s(t-k); requires 0 <= t-k <= d-s."""
    if not 0 <= k <= min(s, t):
        raise SchemaError(f"intersection size {k} out of range 0..min({s},{t})")
    if not 0 <= t - k <= d - s:
        raise SchemaError(f"t-k={t - k} outside the weight range 0..{d - s}")
    sign = -1.0 if (s - k) % 2 else 1.0
    return sign * weight_m(kind, d, s, t - k, s0)


def shapley_kernel(d: int, t: int) -> float:
    """mu(t) = 1/((d-1) C(d-2, t-1)); undefined at t in {0, d}."""
    if t <= 0 or t >= d:
        raise SchemaError(f"kernel undefined at size {t} for d={d}")
    return inv_binom_float(d - 2, t - 1) / (d - 1)


def bernoulli_numbers(n_max: int) -> list[float]:
    """B_0..B_n_max with the B_1 = -1/2 convention.

    Standard recurrence sum_{j=0}^{n} C(n+1, j) B_j = 0, solved for B_n.
    """
    if n_max < 0:
        raise SchemaError("n_max must be >= 0")
    bern = [1.0]
    for n in range(1, n_max + 1):
        acc = 0.0
        for j in range(n):
            acc += binom_float(n + 1, j) * bern[j]
        bern.append(-acc / (n + 1))
    return bern


@dataclass(frozen=True)
class SamplingWeights:
    """Per-size sampling weights q(t), t = 0..d."""

    d: int
    q: np.ndarray
    scheme: str

    def __post_init__(self):
        self.q.flags.writeable = False


def sampling_weights(d: int, scheme: str = SCHEME_SHAPLEY_KERNEL, s0: int = 1) -> SamplingWeights:
    """Build the size weights for one sampling scheme.

    ``shapley_kernel``: q(t) = mu(t) on 1..d-1. ``sii_tail``: the alternative
    family (d-t-s0)!(t-s0)!/(d-s0+1)! on s0..d-s0, which also prefers every
    size below s0 and above d-s0. Tail sizes carry the large stand-in q0.
    """
    if d < 2:
        raise SchemaError(f"sampling weights need d >= 2, got {d}")
    q = np.zeros(d + 1)
    if scheme == SCHEME_SHAPLEY_KERNEL:
        for t in range(1, d):
            q[t] = shapley_kernel(d, t)
        q0 = Q0_FACTOR * q[1:d].max()
        q[0] = q[d] = q0
    elif scheme == SCHEME_SII_TAIL:
        if not 1 <= s0 <= d // 2:
            raise SchemaError(f"sii_tail scheme needs 1 <= s0 <= d/2, got s0={s0}")
        for t in range(s0, d - s0 + 1):
            # (d-t-s0)!(t-s0)!/(d-s0+1)!, accumulated as a pure ratio product
            val = inv_binom_float(d - 2 * s0, t - s0)
            for i in range(d - 2 * s0 + 1, d - s0 + 2):
                val /= i
            q[t] = val
        q0 = Q0_FACTOR * q[s0 : d - s0 + 1].max()
        q[: s0] = q0
        q[d - s0 + 1 :] = q0
        q[0] = q[d] = q0
    else:
        raise SchemaError(f"unknown sampling scheme {scheme!r}")
    return SamplingWeights(d=d, q=q, scheme=scheme)


class WeightFamily:
    """Precomputed m and gamma tables for one (kind, d, s0).

    ``gamma[s, t, k]`` covers 1 <= s <= s0, 0 <= t <= d, 0 <= k <= min(s, t);
    entries whose (t, k) cannot occur for a real coalition are zero. Tables
    are immutable and shared across estimator runs.
    """

    def __init__(self, kind: str, d: int, s0: int):
        validate_kind(kind, s0)
        if s0 > d:
            raise SchemaError(f"maximum order {s0} exceeds player count {d}")
        self.kind = kind
        self.d = d
        self.s0 = s0
        if kind == FSI_TOP:
            self.orders = [s0]
        elif kind == SV:
            self.orders = [1]
        else:
            self.orders = list(range(1, s0 + 1))
        self.m = {
            s: np.array([weight_m(kind, d, s, t, s0) for t in range(d - s + 1)])
            for s in self.orders
        }
        gamma = np.zeros((s0 + 1, d + 1, s0 + 1))
        for s in self.orders:
            for t in range(d + 1):
                for k in range(max(0, t - (d - s)), min(s, t) + 1):
                    sign = -1.0 if (s - k) % 2 else 1.0
                    gamma[s, t, k] = sign * self.m[s][t - k]
        gamma.flags.writeable = False
        self.gamma = gamma
