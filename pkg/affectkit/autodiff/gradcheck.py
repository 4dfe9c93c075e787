"""
Finite-Difference Gradient Checking

Compares tape gradients against central differences, and runs the suite of
checks behind the ``grad-check`` command.
"""

import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import structlog

from ..errors import ContractError, NonFiniteError
from .tensor import Tensor, backward, no_grad, reset_op_index

logger = structlog.get_logger(__name__)

TensorFunction = Callable[[Tensor], Tensor]


def _evaluate(f: TensorFunction, x: Tensor) -> Tensor:
    reset_op_index()
    try:
        return f(x)
    except NonFiniteError as e:
        raise NonFiniteError(
            f"Non-finite intermediate while checking gradients: {e.message}",
            op=e.op, op_index=e.op_index,
        ) from e


def _projected(out: Tensor, weights: Optional[np.ndarray]) -> float:
    if weights is None:
        return float(out.data.reshape(()))
    return float(np.sum(out.data * weights))


def grad_check(f: TensorFunction, x: Tensor, eps: float = 1e-5,
               wrt: Optional[Sequence[Tensor]] = None,
               max_checks: Optional[int] = None, seed: int = 0) -> float:
    """
    Maximum relative error between tape and central-difference gradients.

    Non-scalar outputs are reduced with fixed random weights. The error per
    element is |analytic - numeric| / max(1, |analytic|, |numeric|).

    Args:
        f: Deterministic function of ``x`` (it may close over ``wrt``)
        x: Input tensor
        eps: Central-difference step, in (0, 1e-2]
        wrt: Extra tensors (e.g. layer parameters) to check alongside ``x``
        max_checks: Perturb at most this many sampled elements per tensor
        seed: Seed for the projection weights and element sampling

    Returns:
        Maximum relative error over every checked element
    """
    if not 0.0 < eps <= 1e-2:
        raise ContractError("eps must lie in (0, 1e-2]", {'eps': eps})

    targets: List[Tensor] = [x]
    for t in wrt or ():
        if all(t is not seen for seen in targets):
            targets.append(t)
    saved_flags = [t.requires_grad for t in targets]
    for t in targets:
        t.data = np.ascontiguousarray(t.data)
        t.requires_grad = True
        t.grad = None

    rng = np.random.default_rng(seed)
    try:
        out = _evaluate(f, x)
        weights = None if out.size == 1 else rng.standard_normal(out.shape)
        loss = out.reshape(()) if weights is None else (out * Tensor(weights)).sum()
        backward(loss)
        analytic = [t.grad.copy() if t.grad is not None else np.zeros_like(t.data)
                    for t in targets]

        worst = 0.0
        with no_grad():
            for t, grad in zip(targets, analytic):
                flat = t.data.reshape(-1)
                indices = np.arange(flat.size)
                if max_checks is not None and flat.size > max_checks:
                    indices = np.sort(rng.choice(flat.size, size=max_checks, replace=False))
                for i in indices:
                    original = flat[i]
                    flat[i] = original + eps
                    plus = _projected(_evaluate(f, x), weights)
                    flat[i] = original - eps
                    minus = _projected(_evaluate(f, x), weights)
                    flat[i] = original
                    numeric = (plus - minus) / (2.0 * eps)
                    exact = grad.reshape(-1)[i]
                    error = abs(exact - numeric) / max(1.0, abs(exact), abs(numeric))
                    worst = max(worst, error)
    finally:
        for t, flag in zip(targets, saved_flags):
            t.requires_grad = flag
            t.grad = None
    return worst


def run_suite(seed: int = 0, batch: int = 2, steps: int = 8, dim: int = 8,
              max_checks: Optional[int] = 24) -> Dict[str, float]:
    """
    Gradient checks over every layer type, the VA heads, the AU model and
    both losses.

    Returns:
        Map of check name to maximum relative error
    """
    from ..layers import Gru, LocalAttention, Linear, TransformerBlock
    from ..metrics import ccc_loss, focal_loss
    from ..models.au import AuModel

    rng = np.random.default_rng(seed)
    x = Tensor(rng.standard_normal((batch, steps, dim)))
    results: Dict[str, float] = {}

    def check(name: str, f: TensorFunction, target: Tensor, params: Sequence[Tensor]):
        started = time.time()
        results[name] = grad_check(f, target, wrt=params, max_checks=max_checks, seed=seed)
        logger.debug("Gradient check finished", check=name, error=results[name],
                     duration=time.time() - started)

    for n_layers in range(1, 5):
        gru = Gru(dim, dim, n_layers, rng)
        check(f"gru_{n_layers}_layer", lambda t, m=gru: m(t)[0], x, gru.parameters())

    block = TransformerBlock(dim, heads=2, d_ff=4 * dim, rng=rng)
    check("transformer_block", block, x, block.parameters())

    for window in (0, 2, 5):
        attention = LocalAttention(dim, window=window, rng=rng)
        check(f"local_attention_w{window}", attention, x, attention.parameters())

    head = Linear(dim, 2, rng=rng, activation="tanh")
    check("va_head", head, x, head.parameters())

    au = AuModel(dim, rng=rng, blocks=1, heads=2, head_init="uniform")
    check("au_dual_branch", lambda t: au(t).probs, x, au.parameters())

    labels = rng.uniform(-1.0, 1.0, size=(16, 2))
    preds = Tensor(rng.uniform(-0.9, 0.9, size=(16, 2)))
    check("ccc_loss",
          lambda p: ccc_loss(p[:, 0], p[:, 1], labels[:, 0], labels[:, 1]),
          preds, ())

    targets = (rng.uniform(size=(batch * steps, 12)) > 0.5).astype(np.float64)
    probs = Tensor(rng.uniform(0.05, 0.95, size=(batch * steps, 12)))
    check("focal_loss", lambda p: focal_loss(p, targets, gamma=2.0, alpha=0.25), probs, ())

    return results
