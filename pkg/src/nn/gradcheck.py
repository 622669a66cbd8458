"""
Finite-difference verification of reverse-mode gradients.
"""
import copy
from typing import Callable, Optional, Sequence

import torch
from torch.func import functional_call

from src.errors import ShapeMismatch


def grad_check(
    f: Callable[..., torch.Tensor],
    inputs: Sequence[torch.Tensor],
    h: float = 1e-6,
    dtype: torch.dtype = torch.float64,
    max_checks_per_input: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Compare autograd gradients of a scalar function against central differences.

    Args:
        f: Pure function of ``inputs`` returning a scalar tensor
        inputs: Tensors to differentiate with respect to
        h: Finite-difference step
        dtype: Precision of both evaluations
        max_checks_per_input: Check only this many random coordinates per input
        seed: Seed for picking coordinates

    Returns:
        Largest relative error over all inputs, measured as
        max|analytic - numeric| / max(|analytic|, |numeric|)
    """
    xs = [x.detach().to(dtype).clone().requires_grad_(True) for x in inputs]
    out = f(*xs)
    if out.numel() != 1:
        raise ShapeMismatch(f"grad_check needs a scalar output, got shape {tuple(out.shape)}")
    grads = torch.autograd.grad(out, xs, allow_unused=True)

    generator = torch.Generator().manual_seed(seed)
    worst = 0.0
    with torch.no_grad():
        for x, grad in zip(xs, grads):
            analytic = torch.zeros_like(x) if grad is None else grad
            flat = x.detach().view(-1)
            if max_checks_per_input is not None and flat.numel() > max_checks_per_input:
                picks = torch.randperm(flat.numel(), generator=generator)[:max_checks_per_input]
            else:
                picks = torch.arange(flat.numel())

            numeric = []
            for i in picks.tolist():
                original = flat[i].item()
                flat[i] = original + h
                plus = f(*xs).item()
                flat[i] = original - h
                minus = f(*xs).item()
                flat[i] = original
                numeric.append((plus - minus) / (2.0 * h))

            a = analytic.reshape(-1)[picks]
            n = torch.tensor(numeric, dtype=dtype)
            scale = max(a.abs().max().item(), n.abs().max().item(), 1e-12)
            worst = max(worst, (a - n).abs().max().item() / scale)
    return worst


def grad_check_module(
    module: torch.nn.Module,
    loss_fn: Callable[[Callable[..., torch.Tensor]], torch.Tensor],
    **kwargs,
) -> float:
    """
    Gradient-check every parameter of ``module`` in float64.

    ``loss_fn`` receives a callable with the module's forward signature bound
    to the perturbed parameters and returns a scalar.
    """
    reference = copy.deepcopy(module).double().eval()
    names = [name for name, _ in reference.named_parameters()]
    params = [p for _, p in reference.named_parameters()]

    def f(*values):
        bound = dict(zip(names, values))
        return loss_fn(lambda *args, **kw: functional_call(reference, bound, args, kw))

    return grad_check(f, params, **kwargs)
