"""Built-in benchmark systems used by the experiment drivers and tests."""

from __future__ import annotations

import numpy as np

from .lqg import DynController, LqgPlant


def example1_plant() -> LqgPlant:
    """Two-state open-loop-stable plant with identity weights and scalar i/o."""
    A = np.array([[-0.5, 0.0], [0.5, -1.0]])
    B = np.array([[-1.0], [1.0]])
    C = np.array([[-1.0 / 6.0, 11.0 / 12.0]])
    I2 = np.eye(2)
    one = np.array([[1.0]])
    return LqgPlant(A, B, C, Q=I2, R=one, W=I2, V=one)


def stationary_controller() -> DynController:
    """Decoupled second-order controller: a stationary but suboptimal point."""
    return DynController(
        -0.5 * np.eye(2), np.zeros((2, 1)), np.zeros((1, 2))
    )


def near_stationary_controller() -> DynController:
    """Small perturbation of the stationary controller's input/output maps."""
    return DynController(
        -0.5 * np.eye(2), np.array([[0.0], [0.01]]), np.array([[0.0, -0.01]])
    )


def example2_controller() -> DynController:
    """Initial controller for the data-driven estimation experiments."""
    return DynController(
        -0.5 * np.eye(2), np.array([[0.0], [1.0]]), np.array([[0.0, -1.0]])
    )
