"""RSA inference engine for metaphor interpretation.

The model hears "X is Y" (topic X, vehicle Y) and infers which feature the
speaker meant to convey:

* a literal listener takes the utterance at face value: the entity is a
  member of the uttered category, and features follow the category's
  typicality row;
* a speaker picks an utterance by softmax over the informativeness of the
  utterance about a communicative goal (one feature dimension), sharpened by
  a rationality parameter ``lam``;
* a pragmatic listener inverts the speaker with Bayes' rule, weighting goals
  by their relevance to the topic (the topic's typicality row).

Feature vectors range over the one-hot basis ``e_1..e_n``: the entity "has"
exactly one salient feature, and ``P(e_i | c)`` is the typicality of feature
i for category c.  All probability arithmetic runs in log space with
max-subtraction, so large ``|lam|`` never overflows or underflows.

``interpret_fast`` is the reduced two-step pipeline: sharpen the vehicle's
typicality row with ``lam`` (a softmax stretch) and reweight it by the
topic's row.  It approximates the full recursion but is not identical to it;
no equivalence is asserted.

Every operation here is a pure function of immutable inputs; concurrent
calls (one metaphor per worker) are safe.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateTypicalityError, Error, ZeroMassError
from .lexicon import MetaphorItem, TypicalityTable

_UTTERANCE_SETS = ("all", "pair")
_CATEGORY_PRIORS = ("topic", "uniform")
_GOAL_PRIORS = ("relevance", "uniform")
_MODES = ("full", "fast")

PROB_SUM_TOL = 1e-9


@dataclass(frozen=True)
class OneHotSpace:
    """Feature-vector support: the n one-hot basis vectors of the simplex."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("one-hot feature space needs n >= 2")

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True)
class RsaConfig:
    """Inference settings.

    lam
        Speaker rationality; 0 is an indifferent speaker, large values
        approach a fully rational (argmax) one.
    utterances
        Alternative set the speaker chooses from: ``"all"`` categories in
        the table, or the ``"pair"`` {topic, vehicle}.
    category_prior
        Which category the discussed entity belongs to: ``"topic"`` (the
        topic is given by the utterance frame) or ``"uniform"`` over
        {topic, vehicle}.
    goal_prior
        ``"relevance"`` weights goals by the topic's typicality row;
        ``"uniform"`` removes that weighting (the ablation).
    mode
        ``"full"`` recursion or the ``"fast"`` reduced pipeline.
    """

    lam: float = 1.0
    utterances: str = "all"
    category_prior: str = "topic"
    goal_prior: str = "relevance"
    mode: str = "full"

    def __post_init__(self):
        if not math.isfinite(self.lam):
            raise ValueError(f"lam must be finite, got {self.lam!r}")
        for value, allowed, name in (
            (self.utterances, _UTTERANCE_SETS, "utterances"),
            (self.category_prior, _CATEGORY_PRIORS, "category_prior"),
            (self.goal_prior, _GOAL_PRIORS, "goal_prior"),
            (self.mode, _MODES, "mode"),
        ):
            if value not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {value!r}")


@dataclass(frozen=True)
class Distribution:
    """Probability distribution over a fixed, ordered label set.

    Stored as log-probabilities; exposed as probabilities via :attr:`p`.
    Labels keep their declared order, and argmax/top-k tie-breaking follows
    that order (lowest index wins).
    """

    labels: tuple
    logp: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.logp, dtype=float)
        if arr.shape != (len(self.labels),):
            raise ValueError("logp length does not match labels")
        if np.any(np.isnan(arr)) or np.any(arr == np.inf):
            raise ValueError("log-probabilities must be in [-inf, 0]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "logp", arr)

    @classmethod
    def from_log_scores(cls, labels, scores) -> "Distribution":
        """Normalize unnormalized log-scores (softmax with max-subtraction)."""
        scores = np.asarray(scores, dtype=float)
        total = _logsumexp(scores)
        if total == -np.inf:
            raise ZeroMassError("all scores have zero mass")
        return cls(tuple(labels), scores - total)

    @classmethod
    def from_probs(cls, labels, probs) -> "Distribution":
        probs = np.asarray(probs, dtype=float)
        if np.any(probs < 0) or not np.isfinite(probs).all():
            raise ValueError("probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {probs.sum():.12g}, not 1")
        with np.errstate(divide="ignore"):
            return cls(tuple(labels), np.log(probs))

    @cached_property
    def _index(self) -> dict:
        return {label: i for i, label in enumerate(self.labels)}

    @property
    def p(self) -> np.ndarray:
        """Probabilities, in label order."""
        return np.exp(self.logp)

    def prob(self, label) -> float:
        return float(np.exp(self.logp[self._index[label]]))

    def top_k(self, k: int) -> tuple:
        order = np.lexsort((np.arange(len(self.labels)), -self.logp))
        return tuple(self.labels[i] for i in order[:k])

    def argmax(self):
        return self.labels[int(np.argmax(self.logp))]

    def __len__(self) -> int:
        return len(self.labels)


def _logsumexp(a: np.ndarray, axis=None) -> np.ndarray | float:
    a = np.asarray(a, dtype=float)
    m = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(m), m, 0.0)  # all -inf: exp sums to 0, log gives -inf
    with np.errstate(divide="ignore"):
        out = np.log(np.exp(a - shift).sum(axis=axis, keepdims=True)) + shift
    if axis is None:
        return out.item()
    return np.squeeze(out, axis=axis)


def _softmax(scores: np.ndarray, axis: int = 0) -> np.ndarray:
    m = np.max(scores, axis=axis, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=axis, keepdims=True)


def _require_nondegenerate(rows: np.ndarray, categories) -> None:
    bad = (rows <= 0.0) | (rows >= 1.0)
    if np.any(bad):
        which = np.flatnonzero(bad.any(axis=-1) if rows.ndim > 1 else bad)
        names = ", ".join(repr(c) for c in np.asarray(categories)[which][:5])
        raise DegenerateTypicalityError(
            f"typicality row(s) for {names} contain values of exactly 0 or 1"
        )


def utterance_alternatives(
    config: RsaConfig, table: TypicalityTable, item: MetaphorItem | None = None
) -> tuple[str, ...]:
    """The utterance set the speaker chooses from, in deterministic order."""
    if config.utterances == "all":
        return table.categories
    if item is None:
        raise ValueError("the pair utterance set needs a metaphor item")
    return (item.topic, item.vehicle)


def literal_listener(
    utterance: str, table: TypicalityTable, space: OneHotSpace | None = None
) -> Distribution:
    """Joint distribution over (category, feature) for a literal reading.

    All mass sits on the uttered category; features follow its typicality
    row.  Every other category gets probability 0.
    """
    u = table.category_index(utterance)
    if space is not None and space.n != table.n:
        raise ValueError("feature space size does not match the table")
    probs = np.zeros_like(table.values)
    probs[u] = table.values[u]
    labels = tuple(
        (c, f) for c in table.categories for f in table.vocab.features
    )
    return Distribution.from_probs(labels, probs.ravel())


def speaker_utility(
    utterance: str,
    goal: int,
    feature: int,
    table: TypicalityTable,
    space: OneHotSpace | None = None,
) -> float:
    """Log mass the literal listener puts on states sharing the goal's value.

    ``goal`` and ``feature`` are one-hot indices: the speaker wants to
    communicate feature dimension ``goal`` while the true state is basis
    vector ``e_feature``.  Over the one-hot support the projected mass
    closes to T[u][goal] when the state carries the goal feature and
    1 - T[u][goal] otherwise.
    """
    n = table.n
    if not (0 <= goal < n and 0 <= feature < n):
        raise ValueError(f"goal and feature must be in [0, {n})")
    t = float(table.row(utterance)[goal])
    mass = t if feature == goal else 1.0 - t
    if mass <= 0.0:
        raise DegenerateTypicalityError(
            f"utility log-argument is 0 for utterance {utterance!r}, goal {goal}"
        )
    return math.log(mass)


def pragmatic_speaker(
    goal: int,
    feature: int,
    config: RsaConfig,
    table: TypicalityTable,
    item: MetaphorItem | None = None,
) -> Distribution:
    """Softmax speaker: P(u | goal, state) over the utterance alternatives."""
    utts = utterance_alternatives(config, table, item)
    if not utts:
        raise Error("empty utterance set")
    scores = [
        config.lam * speaker_utility(u, goal, feature, table) for u in utts
    ]
    return Distribution.from_log_scores(utts, scores)


def relevance(topic: str, table: TypicalityTable) -> Distribution:
    """Goal prior given the topic: the topic's normalized typicality row."""
    return Distribution.from_probs(table.vocab.features, table.row(topic))


def _goal_log_weights(config: RsaConfig, topic: str, table: TypicalityTable) -> np.ndarray:
    if config.goal_prior == "uniform":
        return np.full(table.n, -math.log(table.n))
    with np.errstate(divide="ignore"):
        return np.log(table.row(topic))


def _category_support(
    config: RsaConfig, item: MetaphorItem, table: TypicalityTable
) -> tuple[tuple[str, ...], np.ndarray]:
    if config.category_prior == "topic":
        return (item.topic,), np.zeros(1)
    return (item.topic, item.vehicle), np.full(2, -math.log(2.0))


def _speaker_log_probs(
    lam: float, t_utts: np.ndarray, v_pos: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-goal log speaker probabilities of the vehicle utterance.

    Returns (log S1(v | g_j, state matching g_j), log S1(v | g_j, state not
    matching)), each of shape (n,).  The no-match case is independent of
    which non-matching state holds.
    """
    log_t = np.log(t_utts)
    log_not = np.log1p(-t_utts)
    match_scores = lam * log_t
    nomatch_scores = lam * log_not
    log_s_match = match_scores[v_pos] - _logsumexp(match_scores, axis=0)
    log_s_nomatch = nomatch_scores[v_pos] - _logsumexp(nomatch_scores, axis=0)
    return log_s_match, log_s_nomatch


def _log_goal_mixture(
    log_goal_w: np.ndarray, log_s_match: np.ndarray, log_s_nomatch: np.ndarray
) -> np.ndarray:
    """log sum_j R(g_j) * S1(v | g_j, e_i) for every feature i."""
    n = log_goal_w.size
    m = np.broadcast_to((log_goal_w + log_s_nomatch)[:, None], (n, n)).copy()
    idx = np.arange(n)
    m[idx, idx] = log_goal_w + log_s_match
    return _logsumexp(m, axis=0)


def _listener_log_joint(
    lam: float,
    t_utts: np.ndarray,
    v_pos: int,
    log_goal_w: np.ndarray,
    prior_rows: np.ndarray,
    log_cat_prior: np.ndarray,
) -> np.ndarray:
    """Normalized log joint over (category support x features).

    This is the resolved-inputs core behind :func:`pragmatic_listener`:
    ``t_utts`` holds the utterance alternatives' typicality rows (vehicle at
    ``v_pos``), ``log_goal_w`` the goal prior, ``prior_rows``/``log_cat_prior``
    the feature and category priors of the listener's category support.
    """
    _require_nondegenerate(t_utts, range(len(t_utts)))
    log_s_match, log_s_nomatch = _speaker_log_probs(lam, t_utts, v_pos)
    log_w = _log_goal_mixture(log_goal_w, log_s_match, log_s_nomatch)
    with np.errstate(divide="ignore"):
        log_joint = log_cat_prior[:, None] + np.log(prior_rows) + log_w[None, :]
    total = _logsumexp(log_joint)
    if total == -np.inf:
        raise ZeroMassError("pragmatic listener has zero total mass")
    return log_joint - total


def _resolve_listener_inputs(item, config, table):
    table.category_index(item.topic)  # fail early with a clear unknown-noun error
    table.category_index(item.vehicle)
    utts = utterance_alternatives(config, table, item)
    t_utts = table.values[[table.category_index(u) for u in utts]]
    _require_nondegenerate(t_utts, utts)
    v_pos = utts.index(item.vehicle)
    log_goal_w = _goal_log_weights(config, item.topic, table)
    support, log_cat_prior = _category_support(config, item, table)
    prior_rows = table.values[[table.category_index(c) for c in support]]
    return t_utts, v_pos, log_goal_w, support, prior_rows, log_cat_prior


def pragmatic_listener(
    item: MetaphorItem,
    config: RsaConfig,
    table: TypicalityTable,
    space: OneHotSpace | None = None,
) -> Distribution:
    """Joint posterior over (category, feature) after hearing the vehicle."""
    if config.mode != "full":
        raise ValueError("pragmatic_listener requires mode='full'")
    if space is not None and space.n != table.n:
        raise ValueError("feature space size does not match the table")
    t_utts, v_pos, log_goal_w, support, prior_rows, log_cat_prior = (
        _resolve_listener_inputs(item, config, table)
    )
    log_joint = _listener_log_joint(
        config.lam, t_utts, v_pos, log_goal_w, prior_rows, log_cat_prior
    )
    labels = tuple((c, f) for c in support for f in table.vocab.features)
    return Distribution(labels, log_joint.ravel())


def interpret(
    item: MetaphorItem, config: RsaConfig, table: TypicalityTable
) -> Distribution:
    """Marginal posterior over features: the model's metaphor interpretation."""
    if config.mode == "fast":
        return interpret_fast(item, config.lam, table)
    t_utts, v_pos, log_goal_w, _, prior_rows, log_cat_prior = (
        _resolve_listener_inputs(item, config, table)
    )
    log_joint = _listener_log_joint(
        config.lam, t_utts, v_pos, log_goal_w, prior_rows, log_cat_prior
    )
    log_marginal = _logsumexp(log_joint, axis=0)
    return Distribution(table.vocab.features, log_marginal)


def interpret_fast(
    item: MetaphorItem, lam: float, table: TypicalityTable
) -> Distribution:
    """Reduced pipeline: stretch the vehicle row by lam, reweight by the topic row.

    With topic row a and vehicle row b, the output is proportional to
    ``a_i * softmax(lam * log b)_i``.  At lam = 0 it returns the topic row
    exactly.
    """
    if not math.isfinite(lam):
        raise ValueError(f"lam must be finite, got {lam!r}")
    alpha = table.row(item.topic)
    beta = table.row(item.vehicle)
    if lam == 0.0:
        # uniform stretch: the output is the topic row itself
        return Distribution.from_probs(table.vocab.features, alpha)
    if np.any(beta <= 0.0):
        raise DegenerateTypicalityError(
            f"vehicle {item.vehicle!r} has zero typicalities; "
            f"stretching by lam != 0 is undefined"
        )
    stretch_scores = lam * np.log(beta)
    log_stretched = stretch_scores - _logsumexp(stretch_scores)
    with np.errstate(divide="ignore"):
        log_out = np.log(alpha) + log_stretched
    total = _logsumexp(log_out)
    if total == -np.inf:
        raise ZeroMassError("fast-path output has zero total mass")
    return Distribution(table.vocab.features, log_out - total)


def interpret_with_gradient(
    item: MetaphorItem, config: RsaConfig, table: TypicalityTable
) -> tuple[np.ndarray, np.ndarray]:
    """Interpretation probabilities and their derivative with respect to lam.

    Returns ``(p, dp)`` with both arrays over the feature vocabulary.  The
    derivative is exact: the chain rule through the speaker softmax, the
    goal mixture, and the final normalization.
    """
    if config.mode == "fast":
        return _fast_with_gradient(item, config.lam, table)
    return _full_with_gradient(item, config, table)


def _full_with_gradient(item, config, table):
    lam = config.lam
    t_utts, v_pos, log_goal_w, _, prior_rows, log_cat_prior = (
        _resolve_listener_inputs(item, config, table)
    )
    log_t = np.log(t_utts)
    log_not = np.log1p(-t_utts)

    log_s_match, log_s_nomatch = _speaker_log_probs(lam, t_utts, v_pos)
    # d log softmax / d lam: own utility minus the softmax-expected utility
    d_match = log_t[v_pos] - np.sum(_softmax(lam * log_t, axis=0) * log_t, axis=0)
    d_nomatch = log_not[v_pos] - np.sum(_softmax(lam * log_not, axis=0) * log_not, axis=0)

    log_w = _log_goal_mixture(log_goal_w, log_s_match, log_s_nomatch)
    # d log W_i: mixture-weighted average of the component log-derivatives,
    # diagonal term (goal j = feature i) uses the match branch
    with np.errstate(over="ignore"):
        off = np.exp((log_goal_w + log_s_nomatch)[None, :] - log_w[:, None])
    np.fill_diagonal(off, 0.0)
    w_match = np.exp(log_goal_w + log_s_match - log_w)
    dlog_w = w_match * d_match + off @ d_nomatch

    with np.errstate(divide="ignore"):
        log_rho = _logsumexp(log_cat_prior[:, None] + np.log(prior_rows), axis=0)
    log_q = log_rho + log_w
    log_p = log_q - _logsumexp(log_q)
    p = np.exp(log_p)
    dp = p * (dlog_w - p @ dlog_w)
    return p, dp


def _fast_with_gradient(item, lam, table):
    alpha = table.row(item.topic)
    beta = table.row(item.vehicle)
    if np.any(beta <= 0.0):
        raise DegenerateTypicalityError(
            f"vehicle {item.vehicle!r} has zero typicalities; "
            f"the stretch derivative is undefined"
        )
    log_beta = np.log(beta)
    stretched = _softmax(lam * log_beta)
    dlog_stretched = log_beta - stretched @ log_beta
    with np.errstate(divide="ignore"):
        log_out = np.log(alpha) + lam * log_beta - _logsumexp(lam * log_beta)
    p = np.exp(log_out - _logsumexp(log_out))
    dp = p * (dlog_stretched - p @ dlog_stretched)
    return p, dp
