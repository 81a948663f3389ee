from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class DecisionGrid:
    """Per-cell metric values for competing configurations over a 2D plane.

    ``values[label]`` has shape ``(len(y_values), len(x_values))``.  The
    winner of a cell is the label with the largest value; ties go to the
    label listed first.
    """

    x_name: str
    x_values: np.ndarray
    y_name: str
    y_values: np.ndarray
    values: dict
    metric: str = ""

    @property
    def labels(self) -> list:
        return list(self.values)

    @property
    def winner(self) -> np.ndarray:
        stack = np.stack([self.values[k] for k in self.labels])
        return np.array(self.labels, dtype=object)[np.argmax(stack, axis=0)]

    def difference(self, a: str, b: str) -> np.ndarray:
        return self.values[a] - self.values[b]

    def boundary(self, label: str) -> list:
        """First x value in each row where ``label`` wins (``None`` if never)."""
        win = self.winner
        out = []
        for row in win:
            hits = np.nonzero(row == label)[0]
            out.append(float(self.x_values[hits[0]]) if len(hits) else None)
        return out
