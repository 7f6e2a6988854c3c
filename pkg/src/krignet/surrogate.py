"""Feed-forward surrogates for the Kriging weights and log conditional
variance.

Each conditioning set is encoded as a feature vector of the 2m scaled
neighbor offsets (s_j - s_i)/phi in nondecreasing-distance order followed by
(r, nu), so the networks see everything the exact solve depends on. Twelve
networks cover six overlapping r bins: per bin one m-output weight net and a
single-output log-variance net.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import BankFormatError, EnvelopeWarning, TrainingDivergedError
from .kernel import DEFAULT_ENVELOPE, CovarianceParams, Envelope
from .spatial import LocationSet, OrderedNeighborGraph, build_graph
from .vecchia import ExactProvider, KrigingSolution, exact_kriging

__all__ = [
    "R_BINS",
    "DESIGN_PHI_RANGE",
    "DESIGN_NU_RANGE",
    "MlpModel",
    "TrainConfig",
    "TrainResult",
    "DataGenConfig",
    "TrainingData",
    "SurrogateBank",
    "SurrogateProvider",
    "build_features",
    "features_for_graph",
    "forward",
    "mlp_loss_gradients",
    "init_model",
    "train",
    "generate_training_data",
    "select_bin",
    "surrogate_kriging",
    "save_bank",
    "load_bank",
    "train_bank",
    "export_training_csv",
    "import_training_csv",
]

# Overlapping proportion-of-spatial-variance bins; bin 0 is open at its lower
# edge and bin 5 open at 1.
R_BINS: tuple[tuple[float, float], ...] = (
    (0.18, 0.52),
    (0.38, 0.62),
    (0.58, 0.82),
    (0.78, 0.92),
    (0.88, 0.96),
    (0.94, 1.0),
)
_BIN_CENTERS = tuple(0.5 * (lo + hi) for lo, hi in R_BINS)

# Design distribution for training-data generation.
DESIGN_PHI_RANGE = (0.005, 0.11)
DESIGN_NU_RANGE = (0.4, 2.6)

WEIGHT_HIDDEN = (160, 120)
VARIANCE_HIDDEN = (40,)


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------


def canonicalize_features(features: np.ndarray, m: int) -> np.ndarray:
    """Rotate/reflect each row's offsets into the canonical frame, in place.

    Kriging weights and the conditional variance are invariant under rigid
    motions of the whole conditioning set, so expressing offsets in a frame
    with the nearest neighbor on the +x axis and the second neighbor at
    y >= 0 removes pure-symmetry variation from the networks' inputs.
    Returns its (modified) argument.
    """
    f = np.atleast_2d(features)
    off = f[:, : 2 * m].reshape(-1, m, 2)
    ang = np.arctan2(off[:, 0, 1], off[:, 0, 0])
    c, s = np.cos(-ang), np.sin(-ang)
    x = off[..., 0] * c[:, None] - off[..., 1] * s[:, None]
    y = off[..., 0] * s[:, None] + off[..., 1] * c[:, None]
    if m > 1:
        y[y[:, 1] < 0] *= -1.0
    f[:, : 2 * m : 2] = x
    f[:, 1 : 2 * m : 2] = y
    return features


def build_features(
    site, neighbors, theta: CovarianceParams, canonical: bool = False
) -> np.ndarray:
    """Feature vector (2m + 2,): scaled offsets then (r, nu).

    Neighbors must already be in nondecreasing-distance order (the
    conditioning-set order); offsets are divided by the range phi. With
    ``canonical`` the offsets are expressed in the canonical frame (see
    canonicalize_features); banks record which convention they were
    trained with.
    """
    if theta.phi <= 0:
        raise ValueError(f"phi must be > 0, got {theta.phi}")
    nb = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    site = np.asarray(site, dtype=float).reshape(2)
    off = (nb - site) / theta.phi
    out = np.concatenate([off.ravel(), [theta.r, theta.nu]])
    if canonical and nb.shape[0] > 0:
        canonicalize_features(out[None, :], nb.shape[0])
    return out


def features_for_graph(
    graph: OrderedNeighborGraph, theta: CovarianceParams, canonical: bool = False
) -> np.ndarray:
    """(n, 2m+2) feature matrix for every site (padded rows for short sets)."""
    n, m = graph.neighbors.shape
    off = graph.neighbor_offsets / theta.phi
    out = np.empty((n, 2 * m + 2))
    out[:, : 2 * m] = off.reshape(n, 2 * m)
    out[:, 2 * m] = theta.r
    out[:, 2 * m + 1] = theta.nu
    if canonical:
        full = graph.lengths == m
        out[full] = canonicalize_features(out[full], m)
    return out


# ---------------------------------------------------------------------------
# MLP
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MlpModel:
    """Plain multilayer perceptron: ReLU hidden layers, identity output.

    weights[l] has shape (fan_out, fan_in); biases[l] has shape (fan_out,).
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def parameter_count(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_model(layer_dims: Sequence[int], rng: np.random.Generator) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    dims = tuple(int(d) for d in layer_dims)
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / math.sqrt(fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(dims, tuple(ws), tuple(bs))


def forward(model: MlpModel, features) -> np.ndarray:
    """Evaluate the network on a single feature vector or a batch of rows."""
    x = np.asarray(features, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"feature length {x.shape[1]} != model input dim {model.input_dim}"
        )
    a = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        a = a @ w.T + b
        if l != last:
            np.maximum(a, 0.0, out=a)
    return a[0] if single else a


def mlp_loss_gradients(model: MlpModel, x: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its analytic gradients.

    Returns (loss, d weights, d biases); loss averages over both the batch
    and the output dimensions.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).reshape(x.shape[0], -1)
    acts = [x]
    pre = []
    a = x
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if l == last else np.maximum(z, 0.0)
        acts.append(a)
    out = acts[-1]
    diff = out - y
    loss = float(np.mean(diff * diff))
    delta = 2.0 * diff / diff.size
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for l in range(last, -1, -1):
        gw[l] = delta.T @ acts[l]
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ model.weights[l]) * (pre[l - 1] > 0.0)
    return loss, gw, gb


@dataclass(frozen=True)
class TrainConfig:
    """Adam/MSE training settings (paper-default optimizer constants).

    ``standardize_targets`` whitens each output during training (the affine
    map is folded back into the last layer afterward), which equalizes the
    per-output error floor; ``dtype`` float32 halves memory and roughly
    doubles throughput for large banks.
    """

    learning_rate: float = 0.001
    batch_size: int = 500
    epochs: int = 25
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    val_fraction: float = 0.1
    standardize_inputs: bool = True
    standardize_targets: bool = False
    dtype: str = "float64"
    lr_decay: float = 1.0  # per-epoch multiplier; 1.0 = constant rate


@dataclass(frozen=True)
class TrainResult:
    model: MlpModel
    train_loss: float
    val_loss: float
    epoch_losses: tuple[float, ...]


def _fold_standardizations(model: MlpModel, x_mean, x_scale, y_mean, y_scale) -> MlpModel:
    """Absorb input standardization into the first layer and target
    de-standardization into the last, so the model maps raw to raw."""
    ws = [w.astype(np.float64) for w in model.weights]
    bs = [b.astype(np.float64) for b in model.biases]
    ws[0] = ws[0] / x_scale[None, :]
    bs[0] = bs[0] - ws[0] @ x_mean
    if y_mean is not None:
        ws[-1] = ws[-1] * y_scale[:, None]
        bs[-1] = bs[-1] * y_scale + y_mean
    return MlpModel(model.layer_dims, tuple(ws), tuple(bs))


def train(
    dataset: tuple[np.ndarray, np.ndarray],
    layer_dims: Sequence[int],
    config: TrainConfig,
    seed: int,
) -> TrainResult:
    """Train an MLP with Adam on shuffled mini-batches; deterministic by seed.

    Inputs (and optionally targets) are standardized internally for
    conditioning; the affine maps are folded back into the first/last layer,
    so the returned model consumes raw features and emits raw targets.
    Standardization happens per mini-batch, so no full-size copies of the
    dataset are made beyond one cast to the training dtype. Final train/val
    MSE are reported on the raw target scale. Raises TrainingDivergedError
    if the loss goes non-finite.
    """
    x, y = dataset
    x = np.asarray(x)
    y = np.asarray(y).reshape(x.shape[0], -1)
    if x.shape[0] == 0:
        raise ValueError("empty training dataset")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("training data contains non-finite values")
    dt = np.dtype(config.dtype)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7261494E)))
    n = x.shape[0]
    perm = rng.permutation(n)
    n_val = int(round(config.val_fraction * n))
    val_idx, tr_idx = perm[:n_val], perm[n_val:]
    if tr_idx.size == 0:
        tr_idx, val_idx = perm, perm[:0]
    if config.standardize_inputs:
        x_mean = x[tr_idx].mean(axis=0, dtype=np.float64)
        sd = x[tr_idx].std(axis=0, dtype=np.float64)
        x_scale = np.where(sd > 1e-12, sd, 1.0)
    else:
        x_mean = np.zeros(x.shape[1])
        x_scale = np.ones(x.shape[1])
    if config.standardize_targets:
        y_mean = y[tr_idx].mean(axis=0, dtype=np.float64)
        sd = y[tr_idx].std(axis=0, dtype=np.float64)
        y_scale = np.where(sd > 1e-12, sd, 1.0)
    else:
        y_mean = None
        y_scale = None

    xw = x.astype(dt, copy=False) if x.dtype == dt else x.astype(dt)
    yw = y.astype(dt, copy=False) if y.dtype == dt else y.astype(dt)
    xm, xs_ = x_mean.astype(dt), x_scale.astype(dt)
    if y_mean is not None:
        ym, ys_ = y_mean.astype(dt), y_scale.astype(dt)

    model0 = init_model(layer_dims, rng)
    ws = [w.astype(dt) for w in model0.weights]
    bs = [b.astype(dt) for b in model0.biases]
    m_w = [np.zeros_like(w) for w in ws]
    v_w = [np.zeros_like(w) for w in ws]
    m_b = [np.zeros_like(b) for b in bs]
    v_b = [np.zeros_like(b) for b in bs]
    lr = dt.type(config.learning_rate)
    b1 = dt.type(config.beta1)
    b2 = dt.type(config.beta2)
    eps = dt.type(config.eps)
    t = 0
    n_tr = tr_idx.shape[0]
    epoch_losses = []
    for epoch in range(config.epochs):
        lr = dt.type(config.learning_rate * config.lr_decay**epoch)
        order = tr_idx[rng.permutation(n_tr)]
        running = 0.0
        count = 0
        for s0 in range(0, n_tr, config.batch_size):
            idx = order[s0 : s0 + config.batch_size]
            xb = (xw[idx] - xm) / xs_
            yb = yw[idx] if y_mean is None else (yw[idx] - ym) / ys_
            cur = MlpModel(model0.layer_dims, tuple(ws), tuple(bs))
            loss, gw, gb = mlp_loss_gradients(cur, xb, yb)
            if not math.isfinite(loss):
                raise TrainingDivergedError(epoch, loss)
            running += loss * idx.size
            count += idx.size
            t += 1
            bc1 = 1 - b1 ** dt.type(t)
            bc2 = 1 - b2 ** dt.type(t)
            for l in range(len(ws)):
                m_w[l] = b1 * m_w[l] + (1 - b1) * gw[l]
                v_w[l] = b2 * v_w[l] + (1 - b2) * gw[l] ** 2
                ws[l] = ws[l] - lr * (m_w[l] / bc1) / (np.sqrt(v_w[l] / bc2) + eps)
                m_b[l] = b1 * m_b[l] + (1 - b1) * gb[l]
                v_b[l] = b2 * v_b[l] + (1 - b2) * gb[l] ** 2
                bs[l] = bs[l] - lr * (m_b[l] / bc1) / (np.sqrt(v_b[l] / bc2) + eps)
        epoch_losses.append(running / max(count, 1))
    trained = MlpModel(model0.layer_dims, tuple(ws), tuple(bs))
    folded = _fold_standardizations(trained, x_mean, x_scale, y_mean, y_scale)
    train_loss = _mse_chunked(folded, x, y, tr_idx)
    val_loss = _mse_chunked(folded, x, y, val_idx) if val_idx.size else train_loss
    return TrainResult(folded, train_loss, val_loss, tuple(epoch_losses))


def _mse_chunked(model, x, y, idx, chunk=65536):
    if idx.size == 0:
        return float("nan")
    total = 0.0
    for s0 in range(0, idx.size, chunk):
        sl = idx[s0 : s0 + chunk]
        pred = forward(model, np.asarray(x[sl], dtype=float))
        diff = pred.reshape(sl.size, -1) - y[sl]
        total += float(np.sum(diff * diff))
    return total / (idx.size * y.shape[1])


# ---------------------------------------------------------------------------
# Training-data generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataGenConfig:
    """Settings for one bin's training-data generation.

    Every replicate simulates a fresh uniform location set, orders it, and
    solves the exact Kriging system at ``thetas_per_field`` independent
    parameter draws; only sites with full conditioning sets emit rows.
    ``canonical_frame`` emits offsets in the rotation/reflection-canonical
    frame (the targets are invariant to that choice).
    """

    n_fields: int = 20
    n_range: tuple[int, int] = (1500, 3000)
    m: int = 30
    r_range: tuple[float, float] = (0.18, 1.0)
    phi_range: tuple[float, float] = DESIGN_PHI_RANGE
    nu_range: tuple[float, float] = DESIGN_NU_RANGE
    thetas_per_field: int = 1
    canonical_frame: bool = True


@dataclass(frozen=True)
class TrainingData:
    features: np.ndarray
    weight_targets: np.ndarray
    logvar_targets: np.ndarray
    m: int
    feature_frame: str = "raw"

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


def generate_training_data(config: DataGenConfig, seed: int) -> TrainingData:
    """Exact-Kriging training rows per the design distribution."""
    if config.n_fields < 1:
        raise ValueError("n_fields must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x64617461)))
    provider = ExactProvider()
    m = config.m
    feats, wts, lvs = [], [], []
    for _l in range(config.n_fields):
        n_l = int(rng.integers(config.n_range[0], config.n_range[1], endpoint=True))
        coords = rng.uniform(0.0, 1.0, size=(n_l, 2))
        locs = LocationSet(coords, (0.0, 0.0, 1.0))
        graph = build_graph(locs, m)
        full = graph.lengths == m
        for _t in range(config.thetas_per_field):
            phi = rng.uniform(*config.phi_range)
            nu = rng.uniform(*config.nu_range)
            r = rng.uniform(*config.r_range)
            theta = CovarianceParams(phi, nu, r)
            w, lv = provider.solve(graph, theta)
            feats.append(
                features_for_graph(graph, theta, canonical=config.canonical_frame)[full]
            )
            wts.append(w[full])
            lvs.append(lv[full])
    return TrainingData(
        np.concatenate(feats, axis=0),
        np.concatenate(wts, axis=0),
        np.concatenate(lvs, axis=0),
        m,
        feature_frame="canonical" if config.canonical_frame else "raw",
    )


def export_training_csv(data: TrainingData, path) -> None:
    m = data.m
    cols = (
        [f"h{j}{ax}" for j in range(1, m + 1) for ax in ("x", "y")]
        + ["r", "nu"]
        + [f"w{j}" for j in range(1, m + 1)]
        + ["logvar"]
    )
    mat = np.column_stack(
        [data.features, data.weight_targets, data.logvar_targets]
    )
    with open(path, "w") as fh:
        fh.write(",".join(cols) + "\n")
        np.savetxt(fh, mat, delimiter=",", fmt="%.17g")


def import_training_csv(path) -> TrainingData:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        mat = np.loadtxt(fh, delimiter=",", ndmin=2)
    try:
        m = header.index("r") // 2
    except ValueError:
        raise BankFormatError(f"{path}: missing training-data header")
    p = 2 * m + 2
    if mat.shape[1] != p + m + 1:
        raise BankFormatError(
            f"{path}: expected {p + m + 1} columns for m={m}, got {mat.shape[1]}"
        )
    return TrainingData(mat[:, :p], mat[:, p : p + m], mat[:, p + m], m)


# ---------------------------------------------------------------------------
# Bank
# ---------------------------------------------------------------------------


def select_bin(r: float, bins: Sequence[tuple[float, float]] = R_BINS) -> int:
    """Index of the r bin to use: among bins containing r, the one with the
    nearest center (ties to the lower index). Out-of-range r is clamped to
    the covered interval with a warning."""
    lo_all = bins[0][0]
    hi_all = bins[-1][1]
    if not (lo_all < r < hi_all):
        clamped = min(max(r, math.nextafter(lo_all, 1.0)), math.nextafter(hi_all, 0.0))
        warnings.warn(
            f"r={r:g} outside the covered range ({lo_all:g}, {hi_all:g}); "
            f"using r={clamped:g} (a proportion of spatial variance below "
            f"{lo_all:g} suggests a spatial model may not be appropriate)",
            EnvelopeWarning,
        )
        r = clamped
    centers = [0.5 * (lo + hi) for lo, hi in bins]
    best = None
    for idx, (lo, hi) in enumerate(bins):
        contains = (lo < r <= hi) if idx == 0 else (lo <= r < hi) if idx == len(bins) - 1 else (lo <= r <= hi)
        if contains:
            dist = abs(r - centers[idx])
            if best is None or dist < best[0]:
                best = (dist, idx)
    assert best is not None
    return best[1]


@dataclass(frozen=True)
class SurrogateBank:
    """Six r bins x (weight net, log-variance net) sharing one m.

    ``feature_frame`` records whether the networks were trained on raw or
    canonical-frame offsets; feature construction at inference follows it.
    """

    m: int
    weight_models: tuple[MlpModel, ...]
    variance_models: tuple[MlpModel, ...]
    envelope: Envelope = DEFAULT_ENVELOPE
    bins: tuple[tuple[float, float], ...] = R_BINS
    feature_frame: str = "canonical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.weight_models) != len(self.bins) or len(
            self.variance_models
        ) != len(self.bins):
            raise ValueError("one weight and one variance model per bin required")
        p = 2 * self.m + 2
        for mdl in self.weight_models:
            if mdl.input_dim != p or mdl.output_dim != self.m:
                raise ValueError("weight model dims inconsistent with m")
        for mdl in self.variance_models:
            if mdl.input_dim != p or mdl.output_dim != 1:
                raise ValueError("variance model dims inconsistent with m")

    def select_bin(self, r: float) -> int:
        return select_bin(r, self.bins)


def surrogate_kriging(
    bank: SurrogateBank, site, neighbors, theta: CovarianceParams
) -> KrigingSolution:
    """Drop-in replacement for exact_kriging on a full conditioning set."""
    bank.envelope.check(theta)
    nb = np.asarray(neighbors, dtype=float).reshape(-1, 2)
    if nb.shape[0] != bank.m:
        raise ValueError(
            f"surrogate needs a full conditioning set of {bank.m} neighbors, "
            f"got {nb.shape[0]}"
        )
    feats = build_features(
        site, nb, theta, canonical=bank.feature_frame == "canonical"
    )
    b = bank.select_bin(theta.r)
    w = forward(bank.weight_models[b], feats)
    lv = float(forward(bank.variance_models[b], feats)[0])
    return KrigingSolution(w, min(lv, 0.0))


class SurrogateProvider:
    """Batch weight provider backed by a SurrogateBank.

    Full conditioning sets go through the bin's networks; the first m sites
    (short sets) use the exact solve, which is cheap there. The bin is
    re-selected from theta.r on every call unless ``fixed_bin`` pins it
    (used by the MLE path to keep the objective smooth).
    """

    def __init__(self, bank: SurrogateBank, fixed_bin: Optional[int] = None):
        self.bank = bank
        self.fixed_bin = fixed_bin

    def solve(self, graph: OrderedNeighborGraph, theta: CovarianceParams):
        bank = self.bank
        if graph.m != bank.m:
            raise ValueError(f"graph m={graph.m} != bank m={bank.m}")
        bank.envelope.check(theta)
        b = self.fixed_bin if self.fixed_bin is not None else bank.select_bin(theta.r)
        n, m = graph.neighbors.shape
        w = np.zeros((n, m))
        lv = np.zeros(n)
        full = graph.lengths == m
        if full.any():
            feats = features_for_graph(
                graph, theta, canonical=bank.feature_frame == "canonical"
            )[full]
            w[full] = forward(bank.weight_models[b], feats)
            lv[full] = np.minimum(
                forward(bank.variance_models[b], feats)[:, 0], 0.0
            )
        for i in np.nonzero(~full)[0]:
            k = graph.lengths[i]
            if k == 0:
                continue
            nb = graph.coords_ordered[graph.neighbor_positions(i)]
            sol = exact_kriging(graph.coords_ordered[i], nb, theta)
            w[i, :k] = sol.weights
            lv[i] = sol.log_variance
        return w, lv


# ---------------------------------------------------------------------------
# Bank training and serialization
# ---------------------------------------------------------------------------


def train_bank(
    gen_config: DataGenConfig,
    train_config: TrainConfig,
    seed: int,
    progress=None,
) -> SurrogateBank:
    """Generate per-bin data and train all 12 networks.

    The same generated fields feed both the weight and the variance net of a
    bin. ``progress`` is an optional callable(str) for status lines.
    """
    m = gen_config.m
    p = 2 * m + 2
    weight_models = []
    variance_models = []
    losses = {}
    for b, (lo, hi) in enumerate(R_BINS):
        cfg = replace(gen_config, r_range=(lo, hi))
        data = generate_training_data(cfg, seed=_mix(seed, 100 + b))
        if progress:
            progress(f"bin {b + 1}/6 [{lo:.2f},{hi:.2f}]: {data.n_rows} rows")
        res_w = train(
            (data.features, data.weight_targets),
            (p, *WEIGHT_HIDDEN, m),
            train_config,
            seed=_mix(seed, 200 + b),
        )
        res_v = train(
            (data.features, data.logvar_targets),
            (p, *VARIANCE_HIDDEN, 1),
            train_config,
            seed=_mix(seed, 300 + b),
        )
        weight_models.append(res_w.model)
        variance_models.append(res_v.model)
        losses[f"bin{b}"] = {
            "rows": data.n_rows,
            "weight_train_mse": res_w.train_loss,
            "weight_val_mse": res_w.val_loss,
            "variance_train_mse": res_v.train_loss,
            "variance_val_mse": res_v.val_loss,
        }
        del data
        if progress:
            progress(
                f"  weight val MSE {res_w.val_loss:.3e}, "
                f"variance val MSE {res_v.val_loss:.3e}"
            )
    meta = {
        "seed": seed,
        "generation": {
            "n_fields": gen_config.n_fields,
            "n_range": list(gen_config.n_range),
            "thetas_per_field": gen_config.thetas_per_field,
            "phi_range": list(gen_config.phi_range),
            "nu_range": list(gen_config.nu_range),
            "canonical_frame": gen_config.canonical_frame,
        },
        "training": {
            "learning_rate": train_config.learning_rate,
            "batch_size": train_config.batch_size,
            "epochs": train_config.epochs,
            "standardize_targets": train_config.standardize_targets,
            "dtype": train_config.dtype,
        },
        "losses": losses,
    }
    return SurrogateBank(
        m=m,
        weight_models=tuple(weight_models),
        variance_models=tuple(variance_models),
        feature_frame="canonical" if gen_config.canonical_frame else "raw",
        meta=meta,
    )


def _mix(seed: int, tag: int) -> int:
    """Derive a child seed from (seed, tag) through a 64-bit mix."""
    return int(np.random.SeedSequence((seed, tag)).generate_state(1)[0])


_MAGIC = b"KRIGNET-BANK 1\n"
_SEP = b"---BINARY---\n"


def save_bank(bank: SurrogateBank, path) -> None:
    """Single-file container: text JSON header + flat little-endian float64
    parameter payload (per model, per layer: weights row-major then biases)."""
    payload = io.BytesIO()
    for mdl in (*bank.weight_models, *bank.variance_models):
        for w, b in zip(mdl.weights, mdl.biases):
            payload.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            payload.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
    blob = payload.getvalue()
    header = {
        "format_version": 1,
        "m": bank.m,
        "bins": [list(b) for b in bank.bins],
        "feature_frame": bank.feature_frame,
        "envelope": {
            "phi": list(bank.envelope.phi),
            "nu": list(bank.envelope.nu),
            "r": list(bank.envelope.r),
        },
        "layer_dims": {
            "weight": [list(mdl.layer_dims) for mdl in bank.weight_models],
            "variance": [list(mdl.layer_dims) for mdl in bank.variance_models],
        },
        "payload_bytes": len(blob),
        "payload_sha256": hashlib.sha256(blob).hexdigest(),
        "meta": bank.meta,
    }
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, indent=2, sort_keys=True).encode() + b"\n")
        fh.write(_SEP)
        fh.write(blob)


def load_bank(path, expect_m: Optional[int] = None) -> SurrogateBank:
    """Load and verify a bank file; see save_bank for the format."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(_MAGIC):
        raise BankFormatError(f"{path}: not a model-bank file (bad magic)")
    sep = raw.find(_SEP, len(_MAGIC))
    if sep < 0:
        raise BankFormatError(f"{path}: truncated header")
    try:
        header = json.loads(raw[len(_MAGIC) : sep].decode())
    except json.JSONDecodeError as exc:
        raise BankFormatError(f"{path}: unparseable header: {exc}")
    if header.get("format_version") != 1:
        raise BankFormatError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )
    blob = raw[sep + len(_SEP) :]
    if len(blob) != header["payload_bytes"]:
        raise BankFormatError(
            f"{path}: payload truncated ({len(blob)} of "
            f"{header['payload_bytes']} bytes)"
        )
    if hashlib.sha256(blob).hexdigest() != header["payload_sha256"]:
        raise BankFormatError(f"{path}: payload checksum mismatch")
    m = int(header["m"])
    if expect_m is not None and m != expect_m:
        raise BankFormatError(f"{path}: bank has m={m}, expected m={expect_m}")

    offset = 0

    def take(shape):
        nonlocal offset
        size = int(np.prod(shape))
        arr = np.frombuffer(
            blob, dtype="<f8", count=size, offset=offset
        ).reshape(shape)
        offset += size * 8
        return arr.astype(float)

    def read_models(dims_list):
        models = []
        for dims in dims_list:
            dims = tuple(int(d) for d in dims)
            ws, bs = [], []
            for fan_in, fan_out in zip(dims[:-1], dims[1:]):
                ws.append(take((fan_out, fan_in)))
                bs.append(take((fan_out,)))
            models.append(MlpModel(dims, tuple(ws), tuple(bs)))
        return tuple(models)

    weight_models = read_models(header["layer_dims"]["weight"])
    variance_models = read_models(header["layer_dims"]["variance"])
    if offset != len(blob):
        raise BankFormatError(f"{path}: payload size inconsistent with dims")
    env = header["envelope"]
    return SurrogateBank(
        m=m,
        weight_models=weight_models,
        variance_models=variance_models,
        envelope=Envelope(tuple(env["phi"]), tuple(env["nu"]), tuple(env["r"])),
        bins=tuple(tuple(b) for b in header["bins"]),
        feature_frame=header.get("feature_frame", "raw"),
        meta=header.get("meta", {}),
    )
