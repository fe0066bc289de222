"""Desk-scale Monte-Carlo simulation of the one-way binning achievability scheme.

The code under test is the random-coding construction behind the one-way
region: ``2^{n c12}`` auxiliary codewords drawn i.i.d. from the policy's U
marginal are assigned to equal bins; the encoder splits its message into a
bin index and a residual, picks the first codeword in the bin jointly
typical with the state sequence (an arbitrary one on coverage failure), and
the decoder exhaustively searches message triples for the unique jointly
typical tuple.

Blocklengths are capped at 20, so this is a separation experiment, not a
capacity demonstration: rate pairs inside a policy's pentagon should show
errors falling with ``n`` while pairs outside the sum bound should fail
hard.  Strong typicality uses the relative-deviation form: every cell count
must satisfy ``|N/n - p| <= eps * p``, so zero-probability cells are hard
constraints.

Determinism: all randomness is keyed by ``(seed, stream, trial)``, so
results do not depend on execution order; trials could run concurrently
unchanged.  Auxiliary-input codewords for encoder 1 are not stored: they
are regenerated per trial from counter-derived uniforms, keyed by the
message split, which is statistically identical to pre-drawing a codebook
per state sequence and keeps memory bounded.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .macmodel import AuxPolicy, MacChannel, assemble_joint
from .probcore import JointPmf, ValidationError, conditional_mutual_information, marginalize

MAX_BLOCKLENGTH = 20
MAX_MESSAGE_EXP = 20          # each of 2^{n r1}, 2^{n r2}, 2^{n c12} <= 2^20
MAX_X2_CELLS = 1 << 24        # total stored x2 codeword letters


class MemoryGuardError(ValidationError):
    """Simulation parameters exceed the desk-scale memory guards."""


@dataclass(frozen=True)
class SimParams:
    channel: MacChannel
    policy: AuxPolicy
    n: int
    r1: float
    r2: float
    c12: float
    eps: float
    trials: int
    seed: int

    def __post_init__(self) -> None:
        if self.channel.s2_size != 1:
            raise ValidationError("the simulator runs the one-way scheme; S2 must be degenerate")
        if not 1 <= self.n <= MAX_BLOCKLENGTH:
            raise ValidationError(f"blocklength n must be in [1, {MAX_BLOCKLENGTH}], got {self.n}")
        if not 0.0 < self.eps < 1.0:
            raise ValidationError(f"typicality slack eps must be in (0,1), got {self.eps}")
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        for name, rate in (("r1", self.r1), ("r2", self.r2), ("c12", self.c12)):
            if rate < 0:
                raise ValidationError(f"{name} must be >= 0, got {rate}")
            if self.n * rate > MAX_MESSAGE_EXP:
                raise MemoryGuardError(
                    f"2^(n*{name}) = 2^{self.n * rate:.2f} exceeds the 2^{MAX_MESSAGE_EXP} guard"
                )


@dataclass(frozen=True)
class Codebook:
    """The binned auxiliary codebook plus encoder 2's codewords."""

    u_words: np.ndarray          # (n_u, n) letters of U
    x2_words: np.ndarray         # (n_u, m2_count, n) letters of X2
    n_bins: int
    bin_of_word: np.ndarray      # (n_u,) bin index per codeword
    bin_start: np.ndarray        # (n_bins + 1,) word-index ranges, sizes equal +-1
    m1a_count: int
    m1b_count: int
    m2_count: int
    i_us: float                  # link cost of the policy, fixes the bin exponent
    joint: JointPmf = field(repr=False)       # P(s,u,x1,x2,y) driving typicality
    su_probs: np.ndarray = field(repr=False)  # P(s,u) for codeword selection


def is_jointly_typical(seqs: tuple[np.ndarray, ...], j: JointPmf, eps: float) -> bool:
    """Strong typicality: all cell counts within ``eps * p(cell)`` relative slack.

    ``seqs`` holds one letter sequence per axis of ``j`` (same order); cells
    with zero probability must not appear at all.
    """
    arrs = [np.asarray(s) for s in seqs]
    if len(arrs) != len(j.axes):
        raise ValidationError(f"expected {len(j.axes)} sequences for axes {j.axes}, got {len(arrs)}")
    n = arrs[0].size
    for a in arrs:
        if a.size != n:
            raise ValidationError("all sequences must share one blocklength")
    flat = np.zeros(n, dtype=np.int64)
    for a, size in zip(arrs, j.shape):
        flat = flat * size + a
    counts = np.bincount(flat, minlength=int(np.prod(j.shape))).astype(float)
    p = j.probs.reshape(-1)
    return bool(np.all(np.abs(counts / n - p) <= eps * p))


def _counts_matrix(words: np.ndarray, n_cells: int) -> np.ndarray:
    """Per-row cell histograms of an integer matrix with one bincount call."""
    k, n = words.shape
    offsets = np.arange(k, dtype=np.int64)[:, None] * n_cells
    return np.bincount((words + offsets).ravel(), minlength=k * n_cells).reshape(k, n_cells)


def _typical_rows(counts: np.ndarray, probs: np.ndarray, n: int, eps: float) -> np.ndarray:
    return np.all(np.abs(counts - n * probs[None, :]) <= eps * n * probs[None, :], axis=1)


def message_counts(p: SimParams, i_us: float | None = None) -> tuple[int, int, int, int, int]:
    """(n_u, n_bins, m1a, m1b, m2) after the declared integer rounding.

    Counts ``2^{n r}`` round as ``max(1, floor(.))``; the construction's
    epsilon enters only the bin exponent, fixed at half the typicality
    slack.  When the message cannot fill every bin, only the first
    ``m1a`` bins carry mass.
    """
    if i_us is None:
        joint = assemble_joint(p.channel, p.policy, "one_way")
        i_us = conditional_mutual_information(joint, ["u"], ["s1", "s2"])
    n_u = max(1, int(np.floor(2.0 ** (p.n * p.c12))))
    n_bins = max(1, min(n_u, int(np.floor(2.0 ** (p.n * (p.c12 - i_us - p.eps / 2.0))))))
    m1 = max(1, int(np.floor(2.0 ** (p.n * p.r1))))
    m1a = min(n_bins, m1)
    m1b = max(1, m1 // m1a)
    m2 = max(1, int(np.floor(2.0 ** (p.n * p.r2))))
    return n_u, n_bins, m1a, m1b, m2


def build_codebooks(p: SimParams) -> Codebook:
    """Draw the auxiliary and encoder-2 codebooks; deterministic given the seed."""
    ch = p.channel
    joint6 = assemble_joint(ch, p.policy, "one_way")
    joint = marginalize(joint6, ["s1", "u", "x1", "x2", "y"])
    su = marginalize(joint6, ["s1", "u"])
    i_us = conditional_mutual_information(joint6, ["u"], ["s1", "s2"])
    n_u, n_bins, m1a, m1b, m2 = message_counts(p, i_us)
    if n_u * m2 * p.n > MAX_X2_CELLS:
        raise MemoryGuardError(
            f"x2 codebook would hold {n_u * m2 * p.n} letters, above the {MAX_X2_CELLS} guard"
        )

    rng = np.random.default_rng([p.seed, 0])
    nu_size = p.policy.u_size
    pu = su.probs.sum(axis=0)
    u_words = rng.choice(nu_size, size=(n_u, p.n), p=pu / pu.sum())

    # Equal bins (+-1): first (n_u mod n_bins) bins get the extra word.
    base, extra = divmod(n_u, n_bins)
    sizes = np.full(n_bins, base, dtype=np.int64)
    sizes[:extra] += 1
    bin_start = np.concatenate([[0], np.cumsum(sizes)])
    bin_of_word = np.repeat(np.arange(n_bins), sizes)

    # X2 codewords: memberwise i.i.d. from P(x2|u) along each u-word.
    x2_rows = p.policy.x2_given.table  # (|U|, |X2|)
    cdf = np.cumsum(x2_rows, axis=1)
    uni = rng.random((n_u, m2, p.n))
    x2_words = (uni[..., None] > cdf[u_words][:, None, :, :]).sum(axis=-1)

    return Codebook(
        u_words=u_words,
        x2_words=x2_words,
        n_bins=n_bins,
        bin_of_word=bin_of_word,
        bin_start=bin_start,
        m1a_count=m1a,
        m1b_count=m1b,
        m2_count=m2,
        i_us=float(i_us),
        joint=joint,
        su_probs=su.probs,
    )


def _select_in_bins(cb: Codebook, s_seq: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """First jointly-typical u-word per bin (fallback: first word, flag False)."""
    n = s_seq.size
    nu_size = cb.su_probs.shape[1]
    cells = s_seq[None, :] * nu_size + cb.u_words
    counts = _counts_matrix(cells, cb.su_probs.size)
    typ = _typical_rows(counts, cb.su_probs.reshape(-1), n, eps)
    choice = np.empty(cb.n_bins, dtype=np.int64)
    ok = np.zeros(cb.n_bins, dtype=bool)
    for b in range(cb.n_bins):
        lo, hi = cb.bin_start[b], cb.bin_start[b + 1]
        hits = np.nonzero(typ[lo:hi])[0]
        if hits.size:
            choice[b] = lo + hits[0]
            ok[b] = True
        else:
            choice[b] = lo
    return choice, ok


def _candidate_x1(p: SimParams, cb: Codebook, trial: int, u_indices: np.ndarray,
                  s_seq: np.ndarray) -> np.ndarray:
    """X1 codewords for every (m1a, m1b) candidate, drawn lazily per trial.

    Uniforms are keyed by (seed, trial) and indexed by the message split, so
    encoder and decoder regenerate identical words; conditioning follows
    P(x1 | s_i, u_i) memberwise along the selected u-word of each bin.
    """
    rng = np.random.default_rng([p.seed, 2, trial])
    m1a, m1b, n = cb.m1a_count, cb.m1b_count, p.n
    uni = rng.random((m1a, m1b, n))
    x1_rows = p.policy.x1_given.table  # (|S|, |U|, |X1|)
    cdf = np.cumsum(x1_rows, axis=-1)
    u_letters = cb.u_words[u_indices[:m1a]]          # (m1a, n)
    row_cdf = cdf[s_seq[None, :], u_letters]         # (m1a, n, |X1|)
    return (uni[..., None] > row_cdf[:, None, :, :]).sum(axis=-1)


def encode(p: SimParams, cb: Codebook, m1: int, m2: int, s_seq: np.ndarray,
           trial: int = 0) -> tuple[np.ndarray, np.ndarray, int, bool]:
    """Map (m1, m2, s^n) to channel inputs; coverage failure is an outcome."""
    if not 0 <= m1 < cb.m1a_count * cb.m1b_count or not 0 <= m2 < cb.m2_count:
        raise ValidationError("message index out of range")
    m1a, m1b = divmod(m1, cb.m1b_count)
    choice, ok = _select_in_bins(cb, s_seq, p.eps)
    x1_all = _candidate_x1(p, cb, trial, choice, s_seq)
    coop_index = int(choice[m1a])
    x1_seq = x1_all[m1a, m1b]
    x2_seq = cb.x2_words[coop_index, m2]
    return x1_seq, x2_seq, coop_index, bool(ok[m1a])


def decode(p: SimParams, cb: Codebook, y_seq: np.ndarray, s_seq: np.ndarray,
           trial: int = 0) -> tuple[int, int] | None:
    """Exhaustive joint-typicality search; None when no unique triple fits."""
    choice, _ = _select_in_bins(cb, s_seq, p.eps)
    hits = _decode_hits(p, cb, y_seq, s_seq, trial, choice)
    if len(hits) != 1:
        return None
    m1a, m1b, m2 = hits[0]
    return m1a * cb.m1b_count + m1b, m2


def _decode_hits(p: SimParams, cb: Codebook, y_seq, s_seq, trial, choice) -> list[tuple[int, int, int]]:
    m1a_n, m1b_n, m2_n = cb.m1a_count, cb.m1b_count, cb.m2_count
    n = p.n
    sizes = cb.joint.shape  # (|S|, |U|, |X1|, |X2|, |Y|)
    x1_all = _candidate_x1(p, cb, trial, choice, s_seq)      # (m1a, m1b, n)
    u_letters = cb.u_words[choice[:m1a_n]]                   # (m1a, n)
    x2_cand = cb.x2_words[choice[:m1a_n]]                    # (m1a, m2, n)

    su = s_seq[None, :] * sizes[1] + u_letters               # (m1a, n)
    part1 = (su[:, None, :] * sizes[2] + x1_all) * sizes[3]  # (m1a, m1b, n)
    part2 = x2_cand[:, None, :, :] * sizes[4] + y_seq[None, None, None, :]
    cells = part1[:, :, None, :] * sizes[4] + part2          # (m1a, m1b, m2, n)

    n_cells = int(np.prod(sizes))
    counts = _counts_matrix(cells.reshape(-1, n), n_cells)
    typ = _typical_rows(counts, cb.joint.probs.reshape(-1), n, p.eps)
    return [tuple(int(v) for v in np.unravel_index(i, (m1a_n, m1b_n, m2_n)))
            for i in np.nonzero(typ)[0]]


@dataclass(frozen=True)
class SimResult:
    error_rate: float
    trials: int
    ci95_halfwidth: float
    coverage_fail: int           # trials lost to encoder coverage, first cause
    confusion: int               # trials lost to decoder search, first cause

    @property
    def errors(self) -> int:
        return self.coverage_fail + self.confusion


def estimate_error(p: SimParams) -> SimResult:
    """Empirical average error probability of the scheme under ``p``.

    Per trial: fresh i.i.d. state sequence, uniform messages over the
    rounded message sets, channel outputs sampled from the kernel, full
    decode.  A trial counts one error, attributed to the first failing
    stage (coverage, then decoder confusion).
    """
    cb = build_codebooks(p)
    ch = p.channel
    ps = ch.state_table[:, 0]
    kern = ch.kernel.table[:, 0]             # (|S|, |X1|, |X2|, |Y|)
    kern_cdf = np.cumsum(kern, axis=-1)
    m1_total = cb.m1a_count * cb.m1b_count

    coverage_fail = 0
    confusion = 0
    for trial in range(p.trials):
        rng = np.random.default_rng([p.seed, 1, trial])
        s_seq = rng.choice(ps.size, size=p.n, p=ps)
        m1 = int(rng.integers(m1_total))
        m2 = int(rng.integers(cb.m2_count))
        x1_seq, x2_seq, _, ok = encode(p, cb, m1, m2, s_seq, trial=trial)
        u = rng.random(p.n)
        y_seq = (u[:, None] > kern_cdf[s_seq, x1_seq, x2_seq]).sum(axis=-1)
        got = decode(p, cb, y_seq, s_seq, trial=trial)
        if got != (m1, m2):
            if not ok:
                coverage_fail += 1
            else:
                confusion += 1
    errors = coverage_fail + confusion
    rate = errors / p.trials
    ci = 1.96 * float(np.sqrt(max(rate * (1.0 - rate), 0.0) / p.trials))
    return SimResult(
        error_rate=rate,
        trials=p.trials,
        ci95_halfwidth=ci,
        coverage_fail=coverage_fail,
        confusion=confusion,
    )


SIM_CSV_HEADER = "n,r1,r2,c12,eps,trials,error_rate,ci95,coverage_fail,confusion"


def sim_csv_row(p: SimParams, res: SimResult) -> str:
    return (
        f"{p.n},{p.r1:.6f},{p.r2:.6f},{p.c12:.6f},{p.eps:.6f},{res.trials},"
        f"{res.error_rate:.6f},{res.ci95_halfwidth:.6f},{res.coverage_fail},{res.confusion}"
    )
