"""
Complete binary tree of depth D in heap numbering.

Node 1 is the root, node n has children 2n and 2n+1. Internal positions are
1 .. 2^D - 1, terminal positions 2^D .. 2^(D+1) - 1.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, List, Tuple


@dataclass(frozen=True)
class TreeIndex:
    depth: int

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"tree depth must be at least 1, got {self.depth}")

    @property
    def n_nodes(self) -> int:
        return 2 ** (self.depth + 1) - 1

    @property
    def nodes(self) -> range:
        return range(1, self.n_nodes + 1)

    @property
    def internal(self) -> range:
        return range(1, 2 ** self.depth)

    @property
    def terminal(self) -> range:
        return range(2 ** self.depth, self.n_nodes + 1)

    def is_terminal(self, n: int) -> bool:
        return n >= 2 ** self.depth

    @staticmethod
    def parent(n: int) -> int:
        return n // 2

    @staticmethod
    def children(n: int) -> Tuple[int, int]:
        return 2 * n, 2 * n + 1

    @cached_property
    def _paths(self) -> Dict[int, Tuple[List[int], List[int]]]:
        paths = {}
        for n in self.nodes:
            left, right = [], []
            child = n
            while child > 1:
                parent = child // 2
                (left if child == 2 * parent else right).append(parent)
                child = parent
            paths[n] = (left[::-1], right[::-1])
        return paths

    def left_ancestors(self, n: int) -> List[int]:
        """Ancestors m of n such that n lies in the left subtree of m."""
        return list(self._paths[n][0])

    def right_ancestors(self, n: int) -> List[int]:
        return list(self._paths[n][1])

    def ancestors(self, n: int) -> List[int]:
        return sorted(self._paths[n][0] + self._paths[n][1])


def in_order(nodes: Iterable[int]) -> List[int]:
    """Heap ids sorted left to right as the tree is drawn."""
    def position(n: int) -> float:
        depth = n.bit_length() - 1
        return (2 * (n - 2 ** depth) + 1) / 2 ** (depth + 1)

    return sorted(nodes, key=position)
