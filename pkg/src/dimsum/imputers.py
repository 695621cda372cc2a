"""Pluggable imputation-model contract and the built-in lightweight
imputers. These are deliberately small stand-ins: anything heavier runs out
of process behind the same contract (see bridge_client)."""

from __future__ import annotations

import logging

import numpy as np

from .core import ConfigError, ContractViolation

log = logging.getLogger(__name__)


class NotFittedError(ContractViolation):
    pass


def _as_matrix(values, masks) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=np.float64)
    m = np.asarray(masks, dtype=np.uint8)
    if v.ndim == 1:
        v = v[None, :]
        m = m[None, :]
    if v.shape != m.shape or v.ndim != 2 or v.size == 0:
        raise ContractViolation("training values and masks must be matching (n, w) matrices")
    if not np.isin(m, (0, 1)).all():
        raise ContractViolation("masks must be binary")
    if np.isnan(v[m == 1]).any():
        raise ContractViolation("visible training positions must be finite")
    return v, m


def _as_window(values, mask) -> tuple[np.ndarray, np.ndarray]:
    v = np.asarray(values, dtype=np.float64)
    m = np.asarray(mask, dtype=np.uint8)
    if v.ndim != 1 or v.shape != m.shape:
        raise ContractViolation("impute expects one window and its mask")
    if np.isnan(v[m == 1]).any():
        raise ContractViolation("visible positions must be finite")
    return v, m


class Imputer:
    """Contract: ``fit`` on (n, w) visible values + masks, then ``impute``
    one window at a time. Visible positions always pass through unchanged
    and every output position is finite."""

    name = "base"

    def __init__(self):
        self._fitted = False

    def fit(self, values, masks) -> "Imputer":
        v, m = _as_matrix(values, masks)
        if not (m == 1).any():
            raise ContractViolation("training data has no visible values")
        self._global_mean = float(np.mean(v[m == 1]))
        self._w = v.shape[1]
        self._fit(v, m)
        self._fitted = True
        return self

    def _fit(self, v: np.ndarray, m: np.ndarray) -> None:
        raise NotImplementedError

    def _fill(self, v: np.ndarray, m: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def impute(self, values, mask) -> np.ndarray:
        if not self._fitted:
            raise NotFittedError(f"{self.name} imputer used before fit")
        v, m = _as_window(values, mask)
        out = np.where(m == 1, v, self._fill(v, m))
        if not np.isfinite(out).all():
            raise ContractViolation(f"{self.name} produced non-finite imputations")
        return out

    def impute_batch(self, values, masks) -> np.ndarray:
        v = np.asarray(values, dtype=np.float64)
        m = np.asarray(masks, dtype=np.uint8)
        return np.stack([self.impute(v[i], m[i]) for i in range(v.shape[0])])

    def state_dict(self) -> dict:
        if not self._fitted:
            raise NotFittedError(f"{self.name} imputer has no state before fit")
        return {"name": self.name, "global_mean": self._global_mean, **self._state()}

    def _state(self) -> dict:
        return {}


class MeanImputer(Imputer):
    """Per-position mean of the visible training values; positions never
    seen in training fall back to the global mean."""

    name = "mean"

    def _fit(self, v, m):
        vis = m == 1
        counts = vis.sum(axis=0)
        sums = np.where(vis, v, 0.0).sum(axis=0)
        col = np.divide(sums, counts, out=np.full(v.shape[1], self._global_mean), where=counts > 0)
        self._col_mean = col

    def _fill(self, v, m):
        if v.size != self._w:
            raise ContractViolation("window length differs from training data")
        return self._col_mean

    def _state(self):
        return {"col_mean": self._col_mean.tolist()}


class LinearImputer(Imputer):
    """Within-window linear interpolation; edges extrapolate along the line
    through the two outermost anchors so affine windows are recovered
    exactly. Anchor-free windows fall back to the training global mean."""

    name = "linear"

    def _fit(self, v, m):
        pass

    def _fill(self, v, m):
        anchors = np.flatnonzero(m == 1)
        w = v.size
        if anchors.size == 0:
            log.warning("window has no visible anchor; filling with global mean")
            return np.full(w, self._global_mean)
        av = v[anchors]
        if anchors.size == 1:
            return np.full(w, av[0])
        idx = np.arange(w, dtype=np.float64)
        out = np.interp(idx, anchors.astype(np.float64), av)
        first, second = anchors[0], anchors[1]
        slope = (v[second] - v[first]) / (second - first)
        out[:first] = v[first] + slope * (idx[:first] - first)
        last, prev = anchors[-1], anchors[-2]
        slope = (v[last] - v[prev]) / (last - prev)
        out[last + 1 :] = v[last] + slope * (idx[last + 1 :] - last)
        return out


class KnnImputer(Imputer):
    """Average of the k nearest training windows, compared over the
    positions visible in both query and candidate."""

    name = "knn"

    def __init__(self, k_nn: int = 5):
        super().__init__()
        if k_nn < 1:
            raise ConfigError("knn imputer needs k_nn >= 1")
        self.k_nn = int(k_nn)

    def _fit(self, v, m):
        self._train_v = np.where(m == 1, v, 0.0)
        self._train_m = m.astype(bool)

    def _fill(self, v, m):
        if v.size != self._w:
            raise ContractViolation("window length differs from training data")
        qv = np.where(m == 1, v, 0.0)
        qm = m.astype(bool)
        overlap = self._train_m & qm
        counts = overlap.sum(axis=1)
        diff = np.where(overlap, self._train_v - qv, 0.0)
        with np.errstate(invalid="ignore"):
            dist = np.where(counts > 0, (diff * diff).sum(axis=1) / np.maximum(counts, 1), np.inf)
        ranked = np.argsort(dist, kind="stable")
        chosen = ranked[: self.k_nn]
        chosen = chosen[np.isfinite(dist[chosen])]
        if chosen.size == 0:
            return np.full(v.size, self._global_mean)
        nv = self._train_v[chosen]
        nm = self._train_m[chosen]
        support = nm.sum(axis=0)
        sums = np.where(nm, nv, 0.0).sum(axis=0)
        return np.divide(
            sums, support, out=np.full(v.size, self._global_mean), where=support > 0
        )

    def _state(self):
        return {"k_nn": self.k_nn, "n_train": int(self._train_v.shape[0])}


class RidgeArImputer(Imputer):
    """Autoregressive least squares with an L2 penalty and no intercept.

    Lag windows are harvested from the training rows in both directions, a
    single coefficient vector is fitted, and each window is imputed by a
    forward and a backward recursive pass whose fills are averaged. Slots a
    recursion cannot reach (no full lag context) fall back to the global
    mean before the recursion continues from them.
    """

    name = "ridge"

    def __init__(self, order: int = 3, lam: float = 1e-2):
        super().__init__()
        if order < 1:
            raise ConfigError("ridge imputer needs order >= 1")
        if lam < 0:
            raise ConfigError("ridge penalty must be nonnegative")
        self.order = int(order)
        self.lam = float(lam)

    def _harvest(self, v, m):
        xs, ys = [], []
        p = self.order
        for row_v, row_m in zip(v, m):
            for seq_v, seq_m in ((row_v, row_m), (row_v[::-1], row_m[::-1])):
                for t in range(p, seq_v.size):
                    if seq_m[t] and seq_m[t - p : t].all():
                        xs.append(seq_v[t - p : t][::-1])  # lag 1 first
                        ys.append(seq_v[t])
        return np.array(xs), np.array(ys)

    def _fit(self, v, m):
        x, y = self._harvest(v, m)
        if x.size == 0:
            log.warning("no contiguous lag windows to fit; ridge degrades to mean fill")
            self._beta = None
            return
        gram = x.T @ x + self.lam * np.eye(self.order)
        self._beta = np.linalg.solve(gram, x.T @ y)

    def _directional_fill(self, v, m):
        p = self.order
        work = np.where(m == 1, v, np.nan)
        for t in range(v.size):
            if not np.isnan(work[t]):
                continue
            if t >= p and not np.isnan(work[t - p : t]).any():
                lags = work[t - p : t][::-1]
                work[t] = float(lags @ self._beta)
            else:
                work[t] = self._global_mean
        return work

    def _fill(self, v, m):
        if self._beta is None:
            return np.full(v.size, self._global_mean)
        forward = self._directional_fill(v, m)
        backward = self._directional_fill(v[::-1], m[::-1])[::-1]
        return (forward + backward) / 2.0

    def _state(self):
        beta = None if self._beta is None else self._beta.tolist()
        return {"order": self.order, "lam": self.lam, "beta": beta}


def mse_loss(pred, truth, eval_mask) -> float:
    """Mean squared error over the positions hidden for evaluation (the
    zeros of eval_mask)."""
    p = np.asarray(pred, dtype=np.float64)
    t = np.asarray(truth, dtype=np.float64)
    m = np.asarray(eval_mask, dtype=np.uint8)
    if p.shape != t.shape or p.shape != m.shape:
        raise ContractViolation("pred, truth and eval_mask must share a shape")
    hidden = m == 0
    if not hidden.any():
        raise ContractViolation("evaluation mask hides no positions")
    err = p[hidden] - t[hidden]
    return float(np.mean(err * err))


def make_imputer(spec: str):
    """Build an imputer from its textual form: ``mean``, ``linear``,
    ``knn[:k]``, ``ridge[:order,lam]``, or ``bridge:<command line>``."""
    if not isinstance(spec, str) or not spec:
        raise ConfigError("imputer spec must be a nonempty string")
    if spec.startswith("bridge:"):
        command = spec[len("bridge:") :].strip()
        if not command:
            raise ConfigError("bridge imputer needs a command line")
        from .bridge_client import BridgeImputer

        return BridgeImputer(command)
    head, _, args = spec.partition(":")
    if head == "mean":
        if args:
            raise ConfigError("mean imputer takes no arguments")
        return MeanImputer()
    if head == "linear":
        if args:
            raise ConfigError("linear imputer takes no arguments")
        return LinearImputer()
    if head == "knn":
        try:
            k_nn = int(args) if args else 5
        except ValueError:
            raise ConfigError(f"bad knn argument: {args!r}") from None
        return KnnImputer(k_nn)
    if head == "ridge":
        order, lam = 3, 1e-2
        if args:
            parts = args.split(",")
            try:
                order = int(parts[0])
                if len(parts) > 1:
                    lam = float(parts[1])
                if len(parts) > 2:
                    raise ValueError
            except ValueError:
                raise ConfigError(f"bad ridge arguments: {args!r}") from None
        return RidgeArImputer(order, lam)
    raise ConfigError(f"unknown imputer: {spec!r}")
