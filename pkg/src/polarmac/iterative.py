"""Iterative per-user decoding with soft information exchange.

Users are visited round robin.  For the visited user every channel use is
marginalized over the other users' current bit beliefs, the resulting LLRs
feed a single-user list decoder, and the candidate list is turned back into
per-bit LLRs for the next visit.
"""

from dataclasses import dataclass
import numba
import numpy as np

from .polar import LLR_MAX, _scl_words, scl_decode

__all__ = ["LlrState", "functional_node_update", "list_to_llr", "iterative_decode"]

PYNDIAH_BETA_SCALE = 1.5


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x >= 0.0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


@numba.njit(cache=True)
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@numba.njit(cache=True)
def _functional_node_kernel(y, other, amp):
    m, n = other.shape
    out = np.empty(n)
    for t in range(n):
        num = -np.inf
        den = -np.inf
        for pattern in range(1 << m):
            log_prior = 0.0
            interference = 0.0
            for j in range(m):
                s = -1.0 if (pattern >> j) & 1 else 1.0
                log_prior += _log_sigmoid(s * other[j, t])
                interference += s
            interference *= amp
            num = _logaddexp(num, -0.5 * (y[t] - amp - interference) ** 2 + log_prior)
            den = _logaddexp(den, -0.5 * (y[t] + amp - interference) ** 2 + log_prior)
        out[t] = num - den
    return out


def functional_node_update(y, other_llrs, power):
    """LLR of the visited user's symbol given ``y`` and the other users' LLRs.

    Numerator and denominator sum the Gaussian likelihood (unit variance)
    over every sign pattern of the other users, weighted by the priors
    implied by their LLRs.  ``y`` may be a scalar or an array;
    ``other_llrs`` has shape ``(K-1,) + y.shape``.
    """
    y = np.asarray(y, dtype=float)
    other = np.asarray(other_llrs, dtype=float).reshape(-1, y.size)
    out = _functional_node_kernel(np.ascontiguousarray(y.ravel()), other, float(np.sqrt(power)))
    return out.reshape(y.shape) if y.ndim else float(out[0])


@numba.njit(cache=True)
def _best_per_value(codewords, metrics):
    n_cand, n = codewords.shape
    best = np.full((2, n), -np.inf)
    for c in range(n_cand):
        for t in range(n):
            b = codewords[c, t]
            if metrics[c] > best[b, t]:
                best[b, t] = metrics[c]
    return best


def list_to_llr(candidates, input_llrs=None, beta=None, alpha=1.0):
    """Per-bit soft output from a list of candidate codewords.

    Where both bit values occur, the output is ``alpha`` times the gap
    between the best metric with a 0 and the best with a 1.  Where only one
    value occurs the output is ``±beta``.  By default ``beta`` is 1.5 times
    the mean absolute gap; if no bit is contested it falls back to 1.5 times
    the mean ``|input_llrs|`` (or the saturation level without inputs).
    """
    return _soft_output(candidates.codewords, candidates.metrics, input_llrs, beta, alpha)


def _soft_output(codewords, metrics, input_llrs, beta, alpha):
    metrics = np.asarray(metrics, dtype=float)
    if metrics.size == 0:
        raise ValueError("cannot derive LLRs from an empty list")
    codewords = np.ascontiguousarray(codewords, dtype=np.int8)
    best0, best1 = _best_per_value(codewords, metrics)
    contested = np.isfinite(best0) & np.isfinite(best1)
    gap = np.where(contested, best0 - best1, 0.0)
    if beta is None:
        if contested.any():
            beta = PYNDIAH_BETA_SCALE * np.abs(gap[contested]).mean()
        elif input_llrs is not None:
            beta = PYNDIAH_BETA_SCALE * np.abs(np.clip(input_llrs, -LLR_MAX, LLR_MAX)).mean()
        else:
            beta = LLR_MAX
    out = np.where(contested, alpha * gap, np.where(np.isfinite(best0), beta, -beta))
    return np.clip(out, -LLR_MAX, LLR_MAX)


@dataclass
class LlrState:
    llrs: np.ndarray  # (K, N), codeword-bit LLRs per user
    iteration: int = 0
    converged: bool = False  # a full round left every LLR unchanged


@dataclass
class IterativeResult:
    info_bits: list  # K arrays
    codewords: np.ndarray  # (K, N)
    state: LlrState


def iterative_decode(
    y, frozen, power, list_size=8, iterations=15, beta=None, alpha=1.0, damping=0.0, coset=None
):
    """Round-robin iterative decoding of all users.

    Parameters
    ----------
    y : array_like, shape (N,)
    frozen : array_like, shape (K, N)
    power : float
    list_size, iterations : int
        Single-user list size and number of full rounds over the users.
    beta, alpha : float
        Soft-output parameters, see :func:`list_to_llr`.
    damping : float
        Weight of the previous LLRs when storing an update (0 = replace).
    coset : array_like (K, N), optional
        Symmetrizing bits added at the transmitter.

    Returns
    -------
    IterativeResult
    """
    if iterations < 1 or list_size < 1:
        raise ValueError("iterations and list_size must be >= 1")
    y = np.asarray(y, dtype=float)
    frozen = np.asarray(frozen)
    k_users, n = frozen.shape
    # LLRs are kept for the codeword bits; the channel sees codeword ^ coset
    flip = np.ones((k_users, n)) if coset is None else 1.0 - 2.0 * np.asarray(coset)
    state = LlrState(llrs=np.zeros((k_users, n)))

    def channel_llrs(user):
        others = np.delete(state.llrs * flip, user, axis=0)
        return functional_node_update(y, others, power) * flip[user]

    for rnd in range(iterations):
        before = state.llrs.copy()
        for user in range(k_users):
            chan = channel_llrs(user)
            _, words, metrics = _scl_words(chan, frozen[user], list_size)
            update = _soft_output(words, metrics, chan, beta, alpha)
            if damping:
                update = (1.0 - damping) * update + damping * state.llrs[user]
            state.llrs[user] = np.clip(update, -LLR_MAX, LLR_MAX)
        state.iteration = rnd + 1
        if np.array_equal(before, state.llrs):
            # exact fixed point: every further round would repeat this one
            state.converged = True
            state.iteration = iterations
            break

    info, words = [], np.zeros((k_users, n), dtype=np.int8)
    for user in range(k_users):
        best = scl_decode(channel_llrs(user), frozen[user], list_size)
        info.append(best.info_bits[0])
        words[user] = best.codewords[0]
    return IterativeResult(info_bits=info, codewords=words, state=state)
