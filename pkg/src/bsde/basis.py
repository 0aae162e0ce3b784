"""Regression bases for conditional expectations."""
from dataclasses import dataclass
from enum import Enum
from itertools import combinations_with_replacement
from math import comb
from typing import List, Tuple

import numpy as np

from src.utils.config import settings
from src.utils.errors import InadmissibleBasis, SingularRegression


class BasisFamily(str, Enum):
    POLYNOMIAL = "polynomial"   # standardized monomials up to a total degree
    LOCAL = "local"             # equal-count cells × affine functions


@dataclass(frozen=True)
class RegressionBasis:
    family: BasisFamily = BasisFamily.POLYNOMIAL
    degree: int = 3
    cells: int = 8

    def size(self, k: int) -> int:
        if self.family is BasisFamily.POLYNOMIAL:
            return comb(k + self.degree, self.degree)
        return self.cells ** k * (k + 1)

    def check_admissible(self, k: int, n_paths: int):
        limit = n_paths // settings.basis_path_ratio
        if self.size(k) > limit:
            raise InadmissibleBasis(
                f"{self.family.value} basis has {self.size(k)} functions, at most {limit} allowed "
                f"for {n_paths} paths",
                key="solver.basis",
            )

    def fit(self, X: np.ndarray) -> "FittedBasis":
        """Freeze the basis on the states it will be regressed on."""
        if self.family is BasisFamily.POLYNOMIAL:
            return PolynomialBasis.fit(X, self.degree)
        return LocalBasis.fit(X, self.cells)

    def as_dict(self) -> dict:
        return {"family": self.family.value, "degree": self.degree, "cells": self.cells}


class FittedBasis:
    size: int

    def design(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class ConstantBasis(FittedBasis):
    """Used where all paths sit at one state."""

    size = 1

    def design(self, X: np.ndarray) -> np.ndarray:
        return np.ones((len(X), 1))


class PolynomialBasis(FittedBasis):
    def __init__(self, mean: np.ndarray, scale: np.ndarray, exponents: List[Tuple[int, ...]]):
        self.mean = mean
        self.scale = scale
        self.exponents = exponents
        self.size = len(exponents)

    @classmethod
    def fit(cls, X: np.ndarray, degree: int) -> FittedBasis:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        if np.all(scale < 1e-12):
            return ConstantBasis()
        scale = np.where(scale < 1e-12, 1.0, scale)
        k = X.shape[1]
        exponents = []
        for deg in range(degree + 1):
            for combo in combinations_with_replacement(range(k), deg):
                exponents.append(tuple(combo))
        return cls(mean, scale, exponents)

    def design(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mean) / self.scale
        cols = [np.prod(Z[:, list(e)], axis=1) if e else np.ones(len(X)) for e in self.exponents]
        return np.column_stack(cols)


class LocalBasis(FittedBasis):
    """Indicator of a cell times (1, x); cells are equal-count along each axis."""

    def __init__(self, edges: List[np.ndarray], remap: np.ndarray, centers: np.ndarray):
        self.edges = edges
        self.remap = remap          # flat cell -> populated cell index
        self.centers = centers
        self.k = len(edges)
        self.n_cells = int(remap.max()) + 1
        self.size = self.n_cells * (self.k + 1)

    @classmethod
    def fit(cls, X: np.ndarray, cells: int) -> FittedBasis:
        if np.all(X.std(axis=0) < 1e-12):
            return ConstantBasis()
        k = X.shape[1]
        edges = [np.unique(np.quantile(X[:, a], np.linspace(0, 1, cells + 1))[1:-1]) for a in range(k)]
        flat = _cell_index(X, edges)
        shape = tuple(len(e) + 1 for e in edges)
        counts = np.bincount(flat, minlength=int(np.prod(shape)))
        populated = np.flatnonzero(counts >= 2 * (k + 1))
        if len(populated) == 0:
            populated = np.array([int(np.argmax(counts))])
        grid_idx = np.stack(np.unravel_index(np.arange(len(counts)), shape), axis=-1)
        pop_idx = grid_idx[populated]
        nearest = np.argmin(((grid_idx[:, None, :] - pop_idx[None, :, :]) ** 2).sum(-1), axis=1)
        centers = np.array([X[flat == c].mean(axis=0) if counts[c] else np.zeros(k) for c in populated])
        return cls(edges, nearest, centers)

    def design(self, X: np.ndarray) -> np.ndarray:
        cell = self.remap[_cell_index(X, self.edges)]
        out = np.zeros((len(X), self.size))
        rows = np.arange(len(X))
        base = cell * (self.k + 1)
        out[rows, base] = 1.0
        for a in range(self.k):
            out[rows, base + 1 + a] = X[:, a] - self.centers[cell, a]
        return out


def _cell_index(X: np.ndarray, edges: List[np.ndarray]) -> np.ndarray:
    shape = tuple(len(e) + 1 for e in edges)
    idx = [np.searchsorted(e, X[:, a], side="right") for a, e in enumerate(edges)]
    return np.ravel_multi_index(idx, shape)


@dataclass
class RegressionFit:
    coef: np.ndarray        # (p, r)
    condition: float
    fitted: np.ndarray      # (N, r)


def regress(design: np.ndarray, targets: np.ndarray, step: int) -> RegressionFit:
    """Least squares of targets (N, r) on the design (N, p)."""
    coef, _, rank, sv = np.linalg.lstsq(design, targets, rcond=None)
    condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if condition > settings.max_condition:
        raise SingularRegression(f"regression at step {step} has condition number {condition:.3e}",
                                 step=step, condition=condition)
    return RegressionFit(coef, condition, design @ coef)
