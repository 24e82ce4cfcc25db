"""
Zero-forcing receiver built on the estimated channel.

A = G_hat (G_hat^H G_hat)^-1, so A^H G_hat = I and user k's instantaneous
SINR is gamma_k = X_k / (theta + eta_k X_k) with X_k = 1 / [(G_hat^H G_hat)^-1]_kk.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy import linalg

from .system_model import SinrParams, SystemConfig

logger = logging.getLogger(__name__)


class RankDeficientChannelError(np.linalg.LinAlgError):
    """The estimated Gram matrix is not positive definite."""


@dataclass(frozen=True, eq=False)
class ZfReceiver:
    A: np.ndarray
    gram_inv_diag: np.ndarray


@dataclass(frozen=True, eq=False)
class SinrSample:
    sinr: np.ndarray
    x: np.ndarray


def build_zf(G_hat: np.ndarray) -> ZfReceiver:
    """
    ZF receiver through a Cholesky factorization of the Gram matrix.

    Raises:
        ValueError: G_hat is not an M x K matrix with M >= K
        RankDeficientChannelError: G_hat lacks full column rank
    """
    if G_hat.ndim != 2 or G_hat.shape[0] < G_hat.shape[1]:
        raise ValueError(f"G_hat must be M x K with M >= K, got {G_hat.shape}")
    K = G_hat.shape[1]
    gram = G_hat.conj().T @ G_hat
    try:
        factor = linalg.cho_factor(gram, lower=True)
    except linalg.LinAlgError as exc:
        raise RankDeficientChannelError(f"Gram matrix of the {G_hat.shape} estimate is singular") from exc
    gram_inv = linalg.cho_solve(factor, np.eye(K, dtype=gram.dtype))
    diag = np.real(np.diag(gram_inv)).copy()
    if not np.all(np.isfinite(diag)) or np.any(diag <= 0):
        raise RankDeficientChannelError("Gram inverse has a nonpositive diagonal")
    return ZfReceiver(A=G_hat @ gram_inv, gram_inv_diag=diag)


def detect(receiver: ZfReceiver, y: np.ndarray) -> np.ndarray:
    """Soft symbols r = A^H y; y may stack several symbol periods as columns."""
    return receiver.A.conj().T @ y


def instantaneous_sinr(
    cfg: SystemConfig,
    params: Union[SinrParams, Sequence[SinrParams]],
    receiver: ZfReceiver,
) -> SinrSample:
    """
    Per-user SINR of one realization.

    Args:
        cfg: system configuration
        params: one SinrParams per user (a single bundle is shared by all users)
        receiver: ZF receiver of the same realization

    Returns:
        SinrSample with gamma_k and X_k
    """
    if isinstance(params, SinrParams):
        params = [params] * cfg.K
    if len(params) != cfg.K:
        raise ValueError(f"need {cfg.K} parameter bundles, got {len(params)}")
    x = 1.0 / receiver.gram_inv_diag
    theta = np.array([p.theta for p in params])
    eta = np.array([p.eta for p in params])
    return SinrSample(sinr=x / (theta + eta * x), x=x)
