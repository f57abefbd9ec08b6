"""
Exponential moving average of query weights into the key network.
"""
from __future__ import annotations

from typing import Mapping

import torch
from torch import nn


def _blend(key: torch.Tensor, query: torch.Tensor, m: float) -> torch.Tensor:
    return key * m + query * (1.0 - m)


def momentum_update(
    key_weights: Mapping[str, torch.Tensor],
    query_weights: Mapping[str, torch.Tensor],
    m: float,
) -> dict[str, torch.Tensor]:
    """key' = m * key + (1 - m) * query for every named array."""
    if not 0.0 <= m <= 1.0:
        raise ValueError(f"momentum must be in [0, 1], got {m}")
    if set(key_weights) != set(query_weights):
        missing = sorted(set(key_weights) ^ set(query_weights))
        raise ValueError(f"Key and query weights differ in names: {missing}")
    updated = {}
    for name, key in key_weights.items():
        key, query = torch.as_tensor(key), torch.as_tensor(query_weights[name])
        if key.shape != query.shape:
            raise ValueError(
                f"Shape mismatch for '{name}': key {tuple(key.shape)}, query {tuple(query.shape)}"
            )
        updated[name] = _blend(key, query, m) if torch.is_floating_point(key) else query.clone()
    return updated


@torch.no_grad()
def momentum_update_module(key_net: nn.Module, query_net: nn.Module, m: float) -> None:
    """Apply momentum_update to a key network's state in place."""
    key_state = key_net.state_dict()
    updated = momentum_update(key_state, query_net.state_dict(), m)
    for name, tensor in key_state.items():
        tensor.copy_(updated[name])


def freeze(net: nn.Module) -> nn.Module:
    """Key networks never receive gradients."""
    for parameter in net.parameters():
        parameter.requires_grad_(False)
    return net
