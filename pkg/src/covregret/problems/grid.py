from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lp import LPInstance


@dataclass(frozen=True, eq=False)
class GridFlowInstance:
    """Unit source-to-sink flow on a directed grid whose edges point right or down.

    Nodes are numbered row-major; the source is the top-left node and the sink
    the bottom-right one. Edges are listed row by row: the rightward edges of
    a row first, then the downward edges leaving it.
    """

    rows: int
    cols: int
    edges: tuple[tuple[int, int], ...] = field(init=False)
    incidence: np.ndarray = field(init=False, repr=False)
    rhs: np.ndarray = field(init=False, repr=False)
    lp: LPInstance = field(init=False, repr=False)

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError("grid needs at least 2 rows and 2 columns")
        edges = []
        for i in range(self.rows):
            for j in range(self.cols - 1):
                v = i * self.cols + j
                edges.append((v, v + 1))
            if i < self.rows - 1:
                for j in range(self.cols):
                    v = i * self.cols + j
                    edges.append((v, v + self.cols))
        n_nodes = self.rows * self.cols
        inc = np.zeros((n_nodes, len(edges)))
        for e, (tail, head) in enumerate(edges):
            inc[tail, e] = -1.0
            inc[head, e] = 1.0
        rhs = np.zeros(n_nodes)
        rhs[self.source] = -1.0
        rhs[self.sink] = 1.0
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "incidence", inc)
        object.__setattr__(self, "rhs", rhs)
        lp = LPInstance(np.zeros((0, len(edges))), np.zeros(0), A_eq=inc, b_eq=rhs)
        object.__setattr__(self, "lp", lp)

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.rows * self.cols - 1

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_vars(self) -> int:
        return self.n_edges

    def decision(self, c) -> np.ndarray:
        return self.lp.decision(c)

    def __call__(self, c) -> np.ndarray:
        return self.decision(c)


def build_grid_lp(rows: int, cols: int) -> GridFlowInstance:
    """Shortest-path LP on a ``rows x cols`` grid; the LP view is ``.lp``."""
    return GridFlowInstance(rows, cols)
