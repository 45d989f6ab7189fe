"""Rate-1/3 feedforward convolutional codes: trellis tables, encoders, and
free-distance search.

Conventions used throughout the package:

* Generator polynomials are bit masks with bit ``i`` holding the tap on
  ``D^i``.  Octal strings follow the standard tables: the leftmost octal
  digit carries the highest-degree taps, e.g. ``117`` octal = ``1001111``
  binary = x^6 + x^3 + x^2 + x + 1.
* The trellis state keeps the most recent input bit in the LSB: after input
  b the new state is ``((state << 1) | b) & (2^nu - 1)``.  Consequently the
  two predecessors of state ``s`` are ``s >> 1`` and ``(s >> 1) | 2^(nu-1)``
  and the input bit that led into ``s`` is ``s & 1``.
* Codeword symbols are grouped (g1, g2, g3) per input bit, so the outputs of
  trellis stage t occupy mother-codeword positions 3t, 3t+1, 3t+2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GeneratorSet",
    "Trellis",
    "TERMINATED",
    "TAIL_BITING",
    "REFERENCE_CODES",
    "build_trellis",
    "encode",
    "distance_spectrum",
    "DistanceSpectrum",
]

# Termination modes.  Terminated: append nu zero bits, codeword length
# 3(k+nu), paths start and end in state 0.  Tail-biting: preload the register
# with the last nu message bits so start state == end state, length 3k.
TERMINATED = "terminated"
TAIL_BITING = "tail_biting"
_MODES = (TERMINATED, TAIL_BITING)


@dataclass(frozen=True)
class GeneratorSet:
    """A rate-1/3 feedforward convolutional code: memory nu and 3 generators."""

    nu: int
    polys: tuple[int, int, int]

    def __post_init__(self) -> None:
        if self.nu < 1:
            raise ValueError(f"memory nu must be >= 1, got {self.nu}")
        if len(self.polys) != 3:
            raise ValueError("exactly 3 generator polynomials required (rate 1/3)")
        top = 1 << self.nu
        for g in self.polys:
            if not (0 < g < (top << 1)):
                raise ValueError(f"generator 0o{g:o} has degree > nu={self.nu}")
            if not ((g & 1) or (g & top)):
                raise ValueError(
                    f"generator 0o{g:o} lacks both the degree-0 and degree-{self.nu} tap"
                )

    @classmethod
    def from_octal(cls, nu: int, polys: tuple[str, str, str] | list[str]) -> "GeneratorSet":
        return cls(nu, tuple(int(str(p), 8) for p in polys))

    @property
    def n_states(self) -> int:
        return 1 << self.nu

    def octal(self) -> tuple[str, str, str]:
        return tuple(f"{g:o}" for g in self.polys)


# Standard maximum-free-distance rate-1/3 codes used by the presets, keyed by
# state count.  d_free / multiplicity / traceback depth are carried as
# metadata (validated by distance_spectrum in the tests, not recomputed here).
@dataclass(frozen=True)
class CodeInfo:
    gens: GeneratorSet
    d_free: int
    a_dfree: int
    traceback_depth: int


REFERENCE_CODES: dict[int, CodeInfo] = {
    64: CodeInfo(GeneratorSet.from_octal(6, ("117", "127", "155")), 15, 3, 21),
    256: CodeInfo(GeneratorSet.from_octal(8, ("575", "623", "727")), 18, 1, 25),
    1024: CodeInfo(GeneratorSet.from_octal(10, ("2325", "2731", "3747")), 22, 7, 34),
}


@dataclass(frozen=True)
class Trellis:
    """Tabulated shift-register transitions for one GeneratorSet.

    ``next_state[s, b]`` is the successor of state s under input b;
    ``out_pattern[s, b]`` packs the 3 output bits as (g1<<2)|(g2<<1)|g3;
    ``out_bits[s, b]`` is the unpacked (3,) bit vector.
    """

    nu: int
    next_state: np.ndarray
    out_pattern: np.ndarray
    out_bits: np.ndarray
    gens: GeneratorSet

    @property
    def n_states(self) -> int:
        return 1 << self.nu

    def __post_init__(self) -> None:
        self.next_state.setflags(write=False)
        self.out_pattern.setflags(write=False)
        self.out_bits.setflags(write=False)


def build_trellis(gens: GeneratorSet) -> Trellis:
    """Tabulate next-state and output functions for all (state, input) pairs."""
    nu = gens.nu
    s = 1 << nu
    mask = s - 1
    next_state = np.empty((s, 2), dtype=np.int64)
    out_pattern = np.empty((s, 2), dtype=np.uint8)
    out_bits = np.empty((s, 2, 3), dtype=np.uint8)
    for st in range(s):
        for b in (0, 1):
            # register window: bit 0 = current input, bit i = input i steps ago
            window = (st << 1) | b
            pat = 0
            for j, g in enumerate(gens.polys):
                o = bin(window & g).count("1") & 1
                out_bits[st, b, j] = o
                pat = (pat << 1) | o
            out_pattern[st, b] = pat
            next_state[st, b] = window & mask
    return Trellis(nu, next_state, out_pattern, out_bits, gens)


def _as_bits(msg) -> np.ndarray:
    arr = np.asarray(msg, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("message must be a 1-D bit sequence")
    if arr.size and arr.max() > 1:
        raise ValueError("message bits must be 0/1")
    return arr


def tail_biting_start_state(msg: np.ndarray, nu: int) -> int:
    """Start (== end) state for tail-biting: register preloaded with the last
    nu message bits, most recent last-bit in the LSB."""
    st = 0
    for i in range(1, nu + 1):
        st |= int(msg[len(msg) - i]) << (i - 1)
    return st


def encode(gens: GeneratorSet, msg, mode: str) -> np.ndarray:
    """Encode a message into the rate-1/3 mother codeword.

    Terminated mode appends nu zero bits (length 3(k+nu), path 0 -> 0).
    Tail-biting preloads the register with the last nu message bits
    (length 3k, start state == end state); requires k >= nu.
    """
    if mode not in _MODES:
        raise ValueError(f"unknown termination mode {mode!r}")
    bits = _as_bits(msg)
    k = bits.size
    if k < 1:
        raise ValueError("message must contain at least one bit")
    trellis = build_trellis(gens)
    nu = gens.nu
    mask = (1 << nu) - 1
    if mode == TAIL_BITING:
        if k < nu:
            raise ValueError(f"tail-biting requires k >= nu ({k} < {nu})")
        st = tail_biting_start_state(bits, nu)
        n_stages = k
    else:
        st = 0
        n_stages = k + nu
    cw = np.empty(3 * n_stages, dtype=np.uint8)
    for t in range(n_stages):
        b = int(bits[t]) if t < k else 0
        cw[3 * t : 3 * t + 3] = trellis.out_bits[st, b]
        st = ((st << 1) | b) & mask
    if mode == TERMINATED and st != 0:
        raise AssertionError("terminated path did not end in state 0")
    return cw


@dataclass(frozen=True)
class DistanceSpectrum:
    """Free distance and its multiplicity among first-return error events."""

    d_free: int
    multiplicity: int
    horizon: int
    converged: bool

    def __iter__(self):
        # allows tuple-unpacking: d, a = distance_spectrum(...)
        return iter((self.d_free, self.multiplicity))


def distance_spectrum(gens: GeneratorSet, max_input_len: int | None = None) -> DistanceSpectrum:
    """Minimum nonzero terminated-codeword weight and its event multiplicity.

    Dynamic program over first-return-to-zero error events with the weight
    capped at the impulse-response weight (an upper bound on d_free).  The
    search is exact whenever every surviving partial path already exceeds
    d_free in weight; `converged` reports that condition, `horizon` the number
    of trellis stages explored.
    """
    trellis = build_trellis(gens)
    nu = gens.nu
    s = 1 << nu
    half = s >> 1
    if max_input_len is None:
        max_input_len = 32 * nu
    if max_input_len < 1:
        raise ValueError("max_input_len must be >= 1")

    wcap = sum(bin(g).count("1") for g in gens.polys)
    branch_w = np.empty((s, 2), dtype=np.int64)
    for st in range(s):
        for b in (0, 1):
            branch_w[st, b] = int(trellis.out_bits[st, b].sum())

    # counts[state, w]: partial error events currently at `state` with
    # accumulated output weight w (state 0 excluded: reaching it ends the
    # event).  Seed with the diverging transition (input 1 from state 0).
    counts = np.zeros((s, wcap + 1), dtype=np.int64)
    absorbed = np.zeros(wcap + 1, dtype=np.int64)
    st0 = int(trellis.next_state[0, 1])
    w0 = int(branch_w[0, 1])
    if w0 <= wcap:
        counts[st0, w0] = 1

    horizon = 1
    for _ in range(max_input_len - 1):
        if not counts.any():
            break
        new = np.zeros_like(counts)
        for tgt in range(s):
            b = tgt & 1
            acc_to = absorbed if tgt == 0 else new[tgt]
            for p in (tgt >> 1, (tgt >> 1) | half):
                if p == 0:
                    continue  # state 0 never holds partial events
                wt = int(branch_w[p, b])
                if wt == 0:
                    acc_to += counts[p]
                else:
                    acc_to[wt:] += counts[p, : wcap + 1 - wt]
        counts = new
        horizon += 1

    nz = np.nonzero(absorbed)[0]
    if nz.size == 0:
        raise RuntimeError("no error event found within the search horizon")
    d_free = int(nz[0])
    mult = int(absorbed[d_free])
    if counts.any():
        pending_min = int(np.nonzero(counts.any(axis=0))[0][0])
        converged = pending_min > d_free
    else:
        converged = True
    return DistanceSpectrum(d_free, mult, horizon, converged)
