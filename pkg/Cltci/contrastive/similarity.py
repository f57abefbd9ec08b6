"""
Cosine similarity between representation matrices.
"""
from __future__ import annotations

import numpy as np
import torch

NORM_EPS = 1e-12


def as_matrix(values, name: str = 'matrix') -> torch.Tensor:
    """2-D floating tensor view of `values` (numpy arrays keep their precision)."""
    if isinstance(values, np.ndarray):
        values = torch.from_numpy(values)
    tensor = torch.as_tensor(values)
    if not torch.is_floating_point(tensor):
        tensor = tensor.to(torch.get_default_dtype())
    if tensor.ndim != 2 or tensor.shape[1] < 1:
        raise ValueError(f"{name} must be a 2-D matrix with d >= 1, got shape {tuple(tensor.shape)}")
    return tensor


def l2_normalize(matrix: torch.Tensor, name: str = 'matrix') -> torch.Tensor:
    """Scale every row to unit length; zero-norm rows are an error."""
    norms = torch.linalg.vector_norm(matrix, dim=1, keepdim=True)
    small = (norms.detach() <= NORM_EPS).flatten().nonzero().flatten()
    if len(small):
        raise ValueError(f"{name} row {int(small[0])} has zero norm")
    return matrix / norms


def cosine_similarity_matrix(a, b) -> torch.Tensor:
    """
    Entry (i, j) is <a_i, b_j> / (|a_i| |b_j|).

    Both inputs are m x d and n x d matrices; the result is m x n and stays
    in the autograd graph.
    """
    a = as_matrix(a, 'A')
    b = as_matrix(b, 'B')
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"Width mismatch: A has d={a.shape[1]}, B has d={b.shape[1]}")
    dtype = torch.promote_types(a.dtype, b.dtype)
    return l2_normalize(a.to(dtype), 'A') @ l2_normalize(b.to(dtype), 'B').T
