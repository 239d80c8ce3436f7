"""Object-centred affordance field: contact features -> predicted pose change."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def contact_features(theta: float, m: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([1.0, c, s, m * c, m * s])


@dataclass
class AffordanceField:
    A: np.ndarray = field(default_factory=lambda: np.zeros((3, 5)))
    eta: float = 0.05

    def predict(self, theta: float, m: float) -> np.ndarray:
        return self.A @ contact_features(theta, m)

    def update(self, theta: float, m: float, observed) -> "AffordanceField":
        """Delta rule, in place."""
        phi = contact_features(theta, m)
        err = np.asarray(observed, dtype=float) - self.A @ phi
        self.A += self.eta * np.outer(err, phi)
        return self


def affordance_update(f: AffordanceField, theta: float, m: float, observed) -> AffordanceField:
    return f.update(theta, m, observed)


def affordance_predict(f: AffordanceField, theta: float, m: float) -> np.ndarray:
    return f.predict(theta, m)
