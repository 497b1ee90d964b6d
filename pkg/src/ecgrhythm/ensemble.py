"""AdaBoost with abstaining decision stumps for the NSR-vs-O decision.

A stump votes ``+polarity`` when its feature exceeds the threshold and
``-polarity`` otherwise, and abstains when the feature is missing (NaN).
NSR is the positive class, O the negative one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

NSR, OTHER, ABSTAIN = "N", "O", "abstain"
CLASSES = (NSR, OTHER)
EPS_CLAMP = 1e-10
ABSTAIN_PENALTY = 0.5
_MAGIC = "adaboost-abstain"


@dataclass(frozen=True)
class Stump:
    feature: int
    threshold: float
    polarity: int
    alpha: float

    def vote(self, X):
        """+1/-1 votes for each row of ``X``; 0 where the feature is missing."""
        col = np.asarray(X, dtype=float)[..., self.feature]
        out = np.where(col > self.threshold, self.polarity, -self.polarity).astype(float)
        out[np.isnan(col)] = 0.0
        return out


@dataclass
class AbstainModel:
    stumps: list = field(default_factory=list)
    classes: tuple = CLASSES
    weight_history: list = field(default_factory=list, repr=False, compare=False)

    @property
    def selected_features(self):
        return sorted({s.feature for s in self.stumps})

    def decision(self, X):
        """Weighted vote ``sum(alpha * h(x))`` and whether any stump voted."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        score = np.zeros(X.shape[0])
        voted = np.zeros(X.shape[0], dtype=bool)
        for s in self.stumps:
            h = s.vote(X)
            score += s.alpha * h
            voted |= h != 0
        return score, voted

    def predict(self, x):
        """Return ``(label, score)`` for a single feature vector."""
        score, voted = self.decision(x)
        s = float(score[0])
        if not voted[0] or s == 0.0:
            return ABSTAIN, s
        return (NSR if s > 0 else OTHER), s

    def save(self, path):
        lines = [f"{_MAGIC} classes={','.join(self.classes)} rounds={len(self.stumps)}"]
        lines += [f"{s.feature} {s.threshold!r} {s.polarity} {s.alpha!r}" for s in self.stumps]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path):
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith(_MAGIC):
            raise ValueError(f"{path}: not an AdaBoost-abstain model")
        meta = dict(tok.split("=", 1) for tok in lines[0].split()[1:])
        stumps = []
        for line in lines[1:]:
            if not line.strip():
                continue
            f, t, p, a = line.split()
            stumps.append(Stump(int(f), float(t), int(p), float(a)))
        if int(meta["rounds"]) != len(stumps):
            raise ValueError(f"{path}: stump count does not match header")
        return cls(stumps=stumps, classes=tuple(meta["classes"].split(",")))


def _encode_labels(y):
    out = []
    for v in y:
        if v in (NSR, 1, +1):
            out.append(1.0)
        elif v in (OTHER, -1):
            out.append(-1.0)
        else:
            raise ValueError(f"label {v!r} is not N or O")
    return np.asarray(out)


def _best_stump(X, y, w):
    """Lowest-error (feature, threshold, polarity) under weights ``w``.

    Ties go to the lowest feature index, then the lowest threshold, then
    polarity +1.
    """
    best = None
    for j in range(X.shape[1]):
        col = X[:, j]
        present = ~np.isnan(col)
        w_abs = w[~present].sum()
        v, yp, wp = col[present], y[present], w[present]
        if v.size < 2:
            continue
        order = np.argsort(v, kind="stable")
        v, yp, wp = v[order], yp[order], wp[order]
        distinct = np.flatnonzero(np.diff(v) > 0)
        if distinct.size == 0:
            continue
        thresholds = (v[distinct] + v[distinct + 1]) / 2.0
        # weight of positives / negatives at or below each threshold
        pos_w, neg_w = np.where(yp > 0, wp, 0.0), np.where(yp < 0, wp, 0.0)
        pos_cum = np.cumsum(pos_w)[distinct]
        neg_cum = np.cumsum(neg_w)[distinct]
        pos_total, neg_total = pos_w.sum(), neg_w.sum()
        # polarity +1 predicts positive above the threshold
        err_pos = pos_cum + (neg_total - neg_cum)
        err_neg = neg_cum + (pos_total - pos_cum)
        for pol, err in ((1, err_pos), (-1, err_neg)):
            i = int(np.argmin(err))
            eps = err[i] + ABSTAIN_PENALTY * w_abs
            cand = (eps, j, thresholds[i], pol)
            if best is None or _better(cand, best):
                best = cand
    return best


def _better(a, b):
    ea, ja, ta, pa = a
    eb, jb, tb, pb = b
    if ea != eb:
        return ea < eb
    if ja != jb:
        return ja < jb
    if ta != tb:
        return ta < tb
    return pa > pb


def train_adaboost_abstain(X, y, rounds: int = 100, seed: int = 0) -> AbstainModel:
    """Discrete AdaBoost over abstaining stumps.

    Each round picks the stump minimizing ``wrong + 0.5 * abstained``
    weight, sets ``alpha = 0.5 * ln((1 - eps) / eps)`` with ``eps`` clamped
    to ``[1e-10, 1 - 1e-10]``, reweights voting examples by
    ``exp(-alpha * y * h)`` and renormalizes. Training stops early once a
    stump makes no weighted error.

    ``seed`` is accepted for interface symmetry; the search is exhaustive
    and deterministic.
    """
    X = np.asarray(X, dtype=float)
    y = _encode_labels(y)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError("X must be (n_samples, n_features) matching y")
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if (y > 0).sum() < 2 or (y < 0).sum() < 2:
        raise ValueError("need at least two examples of each class")
    w = np.full(y.size, 1.0 / y.size)
    model = AbstainModel()
    for _ in range(rounds):
        found = _best_stump(X, y, w)
        if found is None:
            if not model.stumps:
                raise ValueError("no feature takes two distinct values")
            break
        eps, j, thr, pol = found
        eps = min(max(eps, EPS_CLAMP), 1.0 - EPS_CLAMP)
        alpha = 0.5 * np.log((1.0 - eps) / eps)
        stump = Stump(int(j), float(thr), int(pol), float(alpha))
        model.stumps.append(stump)
        h = stump.vote(X)
        w = w * np.exp(-alpha * y * h)
        w /= w.sum()
        model.weight_history.append(w.copy())
        if eps <= EPS_CLAMP:
            break
    return model


def predict_abstain(model: AbstainModel, x):
    return model.predict(x)


def training_error(model: AbstainModel, X, y) -> float:
    """Error rate over examples where the ensemble does not abstain."""
    score, voted = model.decision(X)
    y = _encode_labels(y)
    decided = voted & (score != 0)
    if not decided.any():
        return float("nan")
    return float(np.mean(np.sign(score[decided]) != y[decided]))


def auc_score(scores, y) -> float:
    """Rank-based ROC AUC with the positive class N; ties count one half."""
    s = np.asarray(scores, dtype=float)
    y = _encode_labels(y)
    n_pos, n_neg = int((y > 0).sum()), int((y < 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes")
    ranks = rankdata(s)
    return float((ranks[y > 0].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_auc(model: AbstainModel, X, y) -> float:
    """AUC of the ensemble score; abstentions score 0."""
    score, _ = model.decision(X)
    return auc_score(score, y)
