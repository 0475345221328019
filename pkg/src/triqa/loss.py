"""Pairwise training objective: probit rank probability, fidelity loss, MSE.

For a pair of images with ground-truth scores (q_x, q_y) and predicted
scores (q̂_x, q̂_y):

* the binary order label is 0 when q_x >= q_y and 1 otherwise, i.e. the
  label encodes the event "y ranks strictly above x" (ties fall in the 0
  branch; an optional ``tie_eps`` maps near-ties to the fractional label
  0.5 instead);
* :func:`pairwise_prob` is Φ((q̂_x − q̂_y)/√2) with Φ the standard normal
  CDF, the predicted probability that x outranks y; inside the combined
  loss the label is therefore paired with ``pairwise_prob(q̂_y, q̂_x)`` —
  the predicted probability of the same event the label encodes;
* the fidelity loss is 1 − √(p·p̂) − √((1−p)(1−p̂));
* the MSE term is (q_x − q̂_x)² + (q_y − q̂_y)², no halving or averaging;
* the combined loss is alpha·fidelity + beta·mse.

All functions are pure scalar float64 math, and the combined loss exposes
its exact gradient with respect to the predicted scores so the network
backward pass can be seeded without finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InvalidConfig

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Predicted probabilities are clamped to [PHAT_EPS, 1 - PHAT_EPS] before the
# square roots; the fidelity derivative contains 1/√p̂ terms that would
# otherwise overflow at extreme score gaps.
PHAT_EPS = 1e-12


@dataclass(frozen=True)
class LossWeights:
    """Weights of the fidelity term (alpha) and the MSE term (beta).

    Both zero is permitted as a diagnostic null objective (zero loss, zero
    gradients); config validation for actual training rejects it.
    """

    alpha: float = 1.0
    beta: float = 0.1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise InvalidConfig(f"loss weights must be nonnegative, got {self}")


def std_normal_cdf(z: float) -> float:
    """Standard normal CDF via the complementary error function."""
    return 0.5 * math.erfc(-z / _SQRT2)


def std_normal_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def binary_label(q_x: float, q_y: float) -> int:
    """Ground-truth order label: 0 when q_x >= q_y, else 1."""
    return 0 if q_x >= q_y else 1


def pair_label(q_x: float, q_y: float, tie_eps: float = 0.0) -> float:
    """Order label with optional tie smoothing.

    With ``tie_eps > 0``, pairs whose ground-truth scores differ by less
    than ``tie_eps`` get the fractional label 0.5; otherwise this is exactly
    :func:`binary_label`. Default keeps the strict binary rule.
    """
    if tie_eps > 0.0 and abs(q_x - q_y) < tie_eps:
        return 0.5
    return float(binary_label(q_x, q_y))


def pairwise_prob(qhat_x: float, qhat_y: float) -> float:
    """Probability Φ((q̂_x − q̂_y)/√2) that x is perceived better than y."""
    return std_normal_cdf((qhat_x - qhat_y) / _SQRT2)


def _clamp_phat(p_hat: float) -> float:
    if not 0.0 <= p_hat <= 1.0 or math.isnan(p_hat):
        raise DomainError(f"predicted pair probability {p_hat} outside [0, 1]")
    return min(max(p_hat, PHAT_EPS), 1.0 - PHAT_EPS)


def fidelity_loss(p: float, p_hat: float) -> float:
    """1 − √(p·p̂) − √((1−p)(1−p̂)); zero iff the prediction matches the label.

    ``p`` may be fractional (tie smoothing); ``p_hat`` is clamped to the
    open interval before the square roots. Raises ``DomainError`` when
    ``p_hat`` lies outside [0, 1].
    """
    p_hat = _clamp_phat(p_hat)
    return 1.0 - math.sqrt(p * p_hat) - math.sqrt((1.0 - p) * (1.0 - p_hat))


def fidelity_loss_dphat(p: float, p_hat: float) -> float:
    """Exact derivative of :func:`fidelity_loss` with respect to p̂."""
    p_hat = _clamp_phat(p_hat)
    grad = 0.0
    if p > 0.0:
        grad -= 0.5 * math.sqrt(p / p_hat)
    if p < 1.0:
        grad += 0.5 * math.sqrt((1.0 - p) / (1.0 - p_hat))
    return grad


def mse_pair_loss(q_x: float, q_y: float, qhat_x: float, qhat_y: float) -> float:
    """Sum of the two squared prediction errors of the pair."""
    return (q_x - qhat_x) ** 2 + (q_y - qhat_y) ** 2


def combined_loss(
    q_x: float,
    q_y: float,
    qhat_x: float,
    qhat_y: float,
    weights: LossWeights = LossWeights(),
    tie_eps: float = 0.0,
) -> float:
    """alpha·fidelity + beta·mse for one pair.

    The label p encodes "y strictly better than x", so the fidelity term
    compares it against the predicted probability of that same event,
    ``pairwise_prob(qhat_y, qhat_x)``.
    """
    p = pair_label(q_x, q_y, tie_eps)
    p_hat = pairwise_prob(qhat_y, qhat_x)
    return weights.alpha * fidelity_loss(p, p_hat) + weights.beta * mse_pair_loss(
        q_x, q_y, qhat_x, qhat_y
    )


def combined_loss_grad(
    q_x: float,
    q_y: float,
    qhat_x: float,
    qhat_y: float,
    weights: LossWeights = LossWeights(),
    tie_eps: float = 0.0,
) -> tuple[float, float]:
    """Exact gradient of :func:`combined_loss` w.r.t. (q̂_x, q̂_y).

    Chain rule through the probit: with z = (q̂_y − q̂_x)/√2 and
    p̂ = Φ(z), dp̂/dq̂_y = φ(z)/√2 and dp̂/dq̂_x = −φ(z)/√2. The clamp on
    p̂ is treated as the identity in the interior (it only binds at score
    gaps where Φ saturates in float64, where the true derivative underflows
    to zero anyway).
    """
    p = pair_label(q_x, q_y, tie_eps)
    z = (qhat_y - qhat_x) / _SQRT2
    p_hat = std_normal_cdf(z)
    dfid_dphat = fidelity_loss_dphat(p, p_hat)
    dphat_dqy = std_normal_pdf(z) / _SQRT2
    gx = -weights.alpha * dfid_dphat * dphat_dqy - 2.0 * weights.beta * (q_x - qhat_x)
    gy = weights.alpha * dfid_dphat * dphat_dqy - 2.0 * weights.beta * (q_y - qhat_y)
    return gx, gy
