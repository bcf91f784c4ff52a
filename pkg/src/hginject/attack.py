"""Node injection against a frozen surrogate and its optimization loop.

Injection appends one row to the incidence matrix with 1s at the budgeted
hyperedge columns, leaving every existing row and the column count alone,
and appends the generated feature row to X. The attack objective is

    sum over train nodes of max(0, Z_true - min over wrong classes of Z)
    + || z_mal - z_elite ||_2

minimized by plain gradient descent on the generator head (W, b). The
attacked structure is built once per run; only the injected feature row
changes between iterations, so the forward pass is computed incrementally
from cached products.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from .datasets import Splits
from .elite import CycleStats, EliteSelection, budget_subset, centrality_elite, cycle_ratios, select_elite
from .errors import (
    BudgetError,
    ConfigError,
    DivergenceError,
    InjectionError,
    ProtocolError,
)
from .generator import (
    GeneratorNet,
    RefinementContext,
    feature_bounds,
    fit_kde,
    init_generator,
    refine,
    sample_preliminary,
)
from .hgnn import SurrogateParams, forward, misclassification_rate, normalized_adjacency
from .hypergraph import Hypergraph

ELITE_METHODS = ("cycle_ratio", "degree", "betweenness", "eigenvector", "pagerank")
VARIANTS = ("full", "no_elite", "no_kde", "no_generator")

# An iteration only counts as progress if it beats the best loss by this much.
IMPROVEMENT_TOL = 1e-6


@dataclass
class AttackedHypergraph:
    """Clean hypergraph plus one injected row (index ``injected_row``).

    ``structure`` holds the (n+1) x E incidence with recomputed degrees;
    ``features`` is X with the generated row appended. The injected feature
    row is the only thing an optimizer may mutate.
    """

    structure: Hypergraph
    injected_row: int
    features: np.ndarray

    def adjacency(self) -> np.ndarray:
        return normalized_adjacency(self.structure)


def inject(
    h: Hypergraph, budget: list[int], z_mal: np.ndarray, features: np.ndarray
) -> AttackedHypergraph:
    """Append the injected node to every budgeted hyperedge."""
    if len(budget) == 0:
        raise InjectionError("budget is empty; nothing to inject into")
    cols = np.asarray(sorted(int(b) for b in budget), dtype=np.int64)
    if len(np.unique(cols)) != len(cols):
        raise InjectionError("budget contains duplicate hyperedge indices")
    if cols.min() < 0 or cols.max() >= h.num_edges:
        raise InjectionError(
            f"budget index out of range [0, {h.num_edges}): {cols.min()}..{cols.max()}"
        )
    row = sp.csr_matrix(
        (np.ones(len(cols)), (np.zeros(len(cols), dtype=np.int64), cols)),
        shape=(1, h.num_edges),
    )
    attacked = Hypergraph(sp.vstack([h.incidence, row], format="csr"))
    x_hat = np.vstack([features, np.asarray(z_mal, dtype=np.float64)])
    return AttackedHypergraph(attacked, h.num_nodes, x_hat)


def _require_frozen(params: SurrogateParams) -> None:
    if not params.frozen:
        raise ProtocolError("surrogate must be frozen before attacking")


def attacked_forward(params: SurrogateParams, ah: AttackedHypergraph) -> np.ndarray:
    """Logits of the frozen surrogate on the attacked hypergraph."""
    _require_frozen(params)
    return forward(ah.adjacency(), ah.features, params)


def attack_loss(
    logits: np.ndarray,
    labels: np.ndarray,
    train_idx: np.ndarray,
    z_mal: np.ndarray,
    z_elite: np.ndarray,
) -> float:
    """Hinge on the margin to the weakest wrong class, plus feature distance."""
    z = logits[train_idx]
    y = labels[train_idx]
    rows = np.arange(len(train_idx))
    true_scores = z[rows, y]
    masked = z.copy()
    masked[rows, y] = np.inf
    margins = true_scores - masked.min(axis=1)
    hinge = float(np.maximum(margins, 0.0).sum())
    return hinge + float(np.linalg.norm(np.asarray(z_mal) - np.asarray(z_elite)))


@dataclass
class AttackConfig:
    eta: float = 1.0
    kernel: str = "gaussian"
    learning_rate: float = 0.01
    max_iters: int = 300
    patience: int = 30
    seed: int = 2024
    elite_method: str = "cycle_ratio"


@dataclass
class AttackResult:
    config: dict
    elite_node: int | None
    budget: list[int]
    loss_trace: list[float]
    best_trace: list[float]
    z_mal: np.ndarray
    clean_rate: float
    attacked_rate: float
    seconds: float

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "elite_node": self.elite_node,
                "budget": self.budget,
                "loss_trace": self.loss_trace,
                "z_mal": self.z_mal.tolist(),
                "clean_rate": self.clean_rate,
                "attacked_rate": self.attacked_rate,
                "seconds": self.seconds,
            }
        )


class AttackObjective:
    """Attack loss as a function of the generator head, with gradients.

    Builds the attacked structure once and caches every product that does
    not depend on the injected feature row:

        M = A_hat @ X_hat @ theta1 = M_base + outer(a_col, z_mal @ theta1)

    where a_col is the injected node's adjacency column. Per evaluation only
    the small incremental terms are recomputed.
    """

    def __init__(
        self,
        params: SurrogateParams,
        h: Hypergraph,
        features: np.ndarray,
        labels: np.ndarray,
        train_idx: np.ndarray,
        budget: list[int],
        ctx: RefinementContext,
        z_elite: np.ndarray,
        bounds: np.ndarray,
    ):
        _require_frozen(params)
        self.params = params
        self.ctx = ctx
        self.z_elite = np.asarray(z_elite, dtype=np.float64)
        self.bounds = np.asarray(bounds, dtype=np.float64)
        self.train_idx = np.asarray(train_idx, dtype=np.int64)
        self.y_train = labels[self.train_idx]

        self.attacked = inject(h, budget, np.zeros(features.shape[1]), features)
        n = h.num_nodes
        a_hat = self.attacked.adjacency()
        self.a_hat = a_hat
        self.a_col = a_hat[:, n].copy()
        self.m_base = a_hat[:, :n] @ (features @ params.theta1)
        self.a_train = a_hat[self.train_idx]

    def value_and_grads(
        self, net: GeneratorNet
    ) -> tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        """Returns (loss, z_mal, dLoss/dW, dLoss/db) at the current head."""
        p = self.params
        pre_gen = net.affine(self.ctx.z_msd)
        z_mal = np.clip(pre_gen, 0.0, self.bounds)
        self.attacked.features[self.attacked.injected_row] = z_mal

        m = self.m_base + np.outer(self.a_col, z_mal @ p.theta1)
        hidden = np.maximum(m, 0.0)
        scores = hidden @ p.theta2
        z_train = self.a_train @ scores

        rows = np.arange(len(self.train_idx))
        true_scores = z_train[rows, self.y_train]
        masked = z_train.copy()
        masked[rows, self.y_train] = np.inf
        weakest_cls = masked.argmin(axis=1)
        margins = true_scores - masked[rows, weakest_cls]
        active = margins > 0

        diff = z_mal - self.z_elite
        l2 = float(np.linalg.norm(diff))
        loss = float(margins[active].sum()) + l2

        d_z_train = np.zeros_like(z_train)
        hot = np.flatnonzero(active)
        d_z_train[hot, self.y_train[hot]] += 1.0
        d_z_train[hot, weakest_cls[hot]] -= 1.0

        d_scores = self.a_train.T @ d_z_train
        d_m = (d_scores @ p.theta2.T) * (m > 0)
        d_z_mal = p.theta1 @ (d_m.T @ self.a_col)
        if l2 > 0.0:
            d_z_mal = d_z_mal + diff / l2

        # Clamp gradient: pass-through strictly inside the box; at a rail,
        # pass only the component pointing back inside, so a saturated
        # coordinate can recover instead of locking at zero gradient.
        interior = (pre_gen > 0.0) & (pre_gen < self.bounds)
        inward = ((pre_gen <= 0.0) & (d_z_mal < 0.0)) | (
            (pre_gen >= self.bounds) & (d_z_mal > 0.0)
        )
        d_pre = d_z_mal * (interior | inward)
        grad_w = np.outer(self.ctx.z_msd, d_pre)
        return loss, z_mal, grad_w, d_pre

    def value(self, net: GeneratorNet) -> float:
        return self.value_and_grads(net)[0]

    def full_logits(self, z_mal: np.ndarray) -> np.ndarray:
        """Complete attacked logits for a fixed injected feature row."""
        self.attacked.features[self.attacked.injected_row] = z_mal
        m = self.m_base + np.outer(self.a_col, z_mal @ self.params.theta1)
        return self.a_hat @ (np.maximum(m, 0.0) @ self.params.theta2)


def _select(h: Hypergraph, method: str) -> EliteSelection:
    if method == "cycle_ratio":
        return select_elite(h, cycle_ratios(h))
    return centrality_elite(h, method)


def run_attack(
    params: SurrogateParams,
    h: Hypergraph,
    features: np.ndarray,
    labels: np.ndarray,
    splits: Splits,
    config: AttackConfig | None = None,
    variant: str = "full",
    on_iteration=None,
) -> AttackResult:
    """Full injection pipeline against a frozen surrogate (evasion setting).

    Pipeline: elite scoring, budgeted hyperedge selection, KDE fit + sample,
    refinement, then gradient descent on the generator head until max_iters
    or until the best loss stalls by less than 1e-6 for ``patience``
    iterations. The feature row achieving minimal loss is the one injected
    for the reported attacked rate.

    ``variant`` switches the ablations: "no_elite" spends the same budget on
    uniformly random hyperedges, "no_kde" replaces the KDE sample with a
    uniform draw inside the feature bounds, and "no_generator" injects the
    preliminary sample directly with no refinement or optimization.
    ``on_iteration(it, attacked, z_mal)`` is called after each evaluation,
    for instrumentation.
    """
    cfg = config or AttackConfig()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if cfg.max_iters < 1:
        raise ConfigError(f"max_iters must be >= 1, got {cfg.max_iters}")
    _require_frozen(params)
    started = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)

    adjacency = normalized_adjacency(h)
    # Non-finite features are caught at the first loss evaluation; silence the
    # numpy chatter from the forward passes leading up to that check.
    with np.errstate(over="ignore", invalid="ignore"):
        clean_rate = misclassification_rate(
            forward(adjacency, features, params), labels, splits.test_idx
        )

    sel = _select(h, cfg.elite_method)
    if variant == "no_elite":
        count = len(budget_subset(sel, h, cfg.eta))
        budget = sorted(int(e) for e in rng.choice(h.num_edges, size=count, replace=False))
    else:
        budget = budget_subset(sel, h, cfg.eta)

    bounds = feature_bounds(features)
    z_elite = features[sel.elite_node].astype(np.float64)
    if variant == "no_kde":
        z_m = rng.uniform(0.0, 1.0, size=features.shape[1]) * bounds
    else:
        z_m = sample_preliminary(fit_kde(z_elite, cfg.kernel), rng)

    if variant == "no_generator":
        z_mal = z_m
        objective = None
        attacked = inject(h, budget, z_mal, features)
        logits = forward(attacked.adjacency(), attacked.features, params)
        loss = attack_loss(logits, labels, splits.train_idx, z_mal, z_elite)
        trace = [loss]
        best_trace = [loss]
        if on_iteration is not None:
            on_iteration(0, attacked, z_mal)
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            ctx = refine(z_m, params, adjacency, features, h, sel, rng)
            net = init_generator(params.hidden_dim, features.shape[1], rng)
            objective = AttackObjective(
                params, h, features, labels, splits.train_idx, budget, ctx, z_elite, bounds
            )
        trace, best_trace = [], []
        best_loss = np.inf
        best_z = None
        stall = 0
        for it in range(cfg.max_iters):
            # Non-finite inputs surface as a non-finite loss and raise below;
            # the numpy warnings for the intermediate products add nothing.
            with np.errstate(over="ignore", invalid="ignore"):
                loss, z_mal_it, grad_w, grad_b = objective.value_and_grads(net)
            if not np.isfinite(loss):
                raise DivergenceError(
                    f"attack loss became non-finite at iteration {it}", iteration=it
                )
            trace.append(loss)
            if loss < best_loss - IMPROVEMENT_TOL:
                best_loss, best_z, stall = loss, z_mal_it.copy(), 0
            else:
                stall += 1
            best_trace.append(min(best_loss, loss))
            if on_iteration is not None:
                on_iteration(it, objective.attacked, z_mal_it)
            if stall >= cfg.patience:
                break
            net.weight -= cfg.learning_rate * grad_w
            net.bias -= cfg.learning_rate * grad_b
        z_mal = best_z
        logits = objective.full_logits(z_mal)

    attacked_rate = misclassification_rate(logits, labels, splits.test_idx)
    return AttackResult(
        config={**asdict(cfg), "variant": variant},
        elite_node=int(sel.elite_node),
        budget=[int(b) for b in budget],
        loss_trace=trace,
        best_trace=best_trace,
        z_mal=np.asarray(z_mal, dtype=np.float64),
        clean_rate=clean_rate,
        attacked_rate=attacked_rate,
        seconds=time.perf_counter() - started,
    )


def random_injection_baseline(
    params: SurrogateParams,
    h: Hypergraph,
    features: np.ndarray,
    labels: np.ndarray,
    splits: Splits,
    budget_count: int,
    seed: int = 2024,
) -> AttackResult:
    """Uniform-random features into uniform-random hyperedges, no optimization."""
    _require_frozen(params)
    if budget_count < 1:
        raise InjectionError(f"budget_count must be >= 1, got {budget_count}")
    if budget_count > h.num_edges:
        raise BudgetError(
            f"budget_count {budget_count} exceeds hyperedge count {h.num_edges}"
        )
    started = time.perf_counter()
    rng = np.random.default_rng(seed)

    adjacency = normalized_adjacency(h)
    clean_rate = misclassification_rate(
        forward(adjacency, features, params), labels, splits.test_idx
    )
    budget = sorted(int(e) for e in rng.choice(h.num_edges, size=budget_count, replace=False))
    bounds = feature_bounds(features)
    z_mal = rng.uniform(0.0, 1.0, size=features.shape[1]) * bounds

    attacked = inject(h, budget, z_mal, features)
    logits = forward(attacked.adjacency(), attacked.features, params)
    attacked_rate = misclassification_rate(logits, labels, splits.test_idx)
    return AttackResult(
        config={"budget_count": budget_count, "seed": seed, "variant": "random_baseline"},
        elite_node=None,
        budget=budget,
        loss_trace=[],
        best_trace=[],
        z_mal=z_mal,
        clean_rate=clean_rate,
        attacked_rate=attacked_rate,
        seconds=time.perf_counter() - started,
    )
