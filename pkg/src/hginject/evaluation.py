"""Detectors, detection-aware scoring, and ablation variants.

Both detectors score every row of the attacked feature matrix (the injected
row is, by construction, the last one). If the injected row lands in the
flagged set it is removed, and removing it restores the clean hypergraph
exactly, so the post-detection rate is the clean rate; otherwise the attack
stands and the post-detection rate is the attacked rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attack import AttackConfig, AttackResult, AttackedHypergraph, run_attack
from .datasets import Splits
from .errors import ConfigError, DataError
from .hgnn import SurrogateParams, misclassification_rate  # noqa: F401  (re-export)
from .hypergraph import Hypergraph

HBOS_EPS = 1e-12


@dataclass
class DetectionReport:
    scores: np.ndarray
    flagged: np.ndarray
    injected_flagged: bool


def _flag_top(scores: np.ndarray, flag_fraction: float, injected_row: int):
    count = round(flag_fraction * len(scores))
    if count == 0:
        return np.array([], dtype=np.int64), False
    # Ties resolve to the lowest row index; lexsort's last key is primary.
    order = np.lexsort((np.arange(len(scores)), -scores))
    flagged = np.sort(order[:count]).astype(np.int64)
    return flagged, bool(injected_row in flagged)


def pca_detect(
    x_hat: np.ndarray,
    variance_fraction: float = 0.9,
    flag_fraction: float = 0.01,
    injected_row: int = -1,
) -> DetectionReport:
    """Squared reconstruction error outside the dominant principal subspace.

    The subspace keeps the smallest number of components whose variance sum
    reaches ``variance_fraction``; the top ``flag_fraction`` of rows by
    reconstruction error are flagged.
    """
    if not 0.0 < variance_fraction <= 1.0:
        raise ConfigError(f"variance_fraction must lie in (0, 1], got {variance_fraction}")
    if not 0.0 < flag_fraction < 1.0:
        raise ConfigError(f"flag_fraction must lie in (0, 1), got {flag_fraction}")
    x = np.asarray(x_hat, dtype=np.float64)
    if injected_row < 0:
        injected_row += x.shape[0]

    centered = x - x.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    variance = svals**2
    total = variance.sum()
    if total <= 0.0:
        raise DataError("features have zero variance; no principal subspace exists")
    rank = int(np.searchsorted(np.cumsum(variance) / total, variance_fraction) + 1)
    rank = min(rank, len(svals))

    basis = vt[:rank]
    residual = centered - (centered @ basis.T) @ basis
    scores = np.einsum("ij,ij->i", residual, residual)
    flagged, hit = _flag_top(scores, flag_fraction, injected_row)
    return DetectionReport(scores, flagged, hit)


def hbos_detect(
    x_hat: np.ndarray,
    bins: int = 10,
    flag_fraction: float = 0.01,
    injected_row: int = -1,
) -> DetectionReport:
    """Histogram-based outlier score summed over features.

    Per feature: equal-width histogram with ``bins`` over the observed range,
    heights normalized by the row count; a row scores log(1/height) of its
    bin, floored at 1e-12 so empty bins stay finite. Constant features put
    every row in one full bin and contribute zero.
    """
    if bins < 2:
        raise ConfigError(f"bins must be >= 2, got {bins}")
    if not 0.0 < flag_fraction < 1.0:
        raise ConfigError(f"flag_fraction must lie in (0, 1), got {flag_fraction}")
    x = np.asarray(x_hat, dtype=np.float64)
    n = x.shape[0]
    if injected_row < 0:
        injected_row += n

    scores = np.zeros(n)
    for f in range(x.shape[1]):
        col = x[:, f]
        lo, hi = col.min(), col.max()
        width = hi - lo
        if width <= 0.0:
            continue
        idx = np.minimum((bins * (col - lo) / width).astype(np.int64), bins - 1)
        heights = np.bincount(idx, minlength=bins) / n
        scores += np.log(1.0 / np.maximum(heights[idx], HBOS_EPS))

    flagged, hit = _flag_top(scores, flag_fraction, injected_row)
    return DetectionReport(scores, flagged, hit)


def remove_injected(ah: AttackedHypergraph) -> tuple[Hypergraph, np.ndarray]:
    """Delete the injected row from structure and features, degrees recomputed."""
    n = ah.injected_row
    return Hypergraph(ah.structure.incidence[:n]), ah.features[:n]


def evaluate_under_detection(
    result: AttackResult,
    features: np.ndarray,
    detector: str = "pca",
    **detector_kwargs,
) -> float:
    """Post-detection misclassification rate for a finished attack.

    A flagged injected node is removed, which restores the clean hypergraph
    bitwise, so the surviving rate is the clean one; an undetected node
    leaves the attacked rate in force.
    """
    x_hat = np.vstack([features, result.z_mal])
    if detector == "pca":
        report = pca_detect(x_hat, **detector_kwargs)
    elif detector == "hbos":
        report = hbos_detect(x_hat, **detector_kwargs)
    else:
        raise ConfigError(f"unknown detector {detector!r}; expected 'pca' or 'hbos'")
    return result.clean_rate if report.injected_flagged else result.attacked_rate


def ablation_variant(
    params: SurrogateParams,
    h: Hypergraph,
    features: np.ndarray,
    labels: np.ndarray,
    splits: Splits,
    config: AttackConfig,
    which: str,
) -> AttackResult:
    """Attack with one pipeline stage disabled: no_elite, no_kde, or no_generator."""
    if which not in ("no_elite", "no_kde", "no_generator"):
        raise ConfigError(f"unknown ablation {which!r}")
    return run_attack(params, h, features, labels, splits, config, variant=which)
