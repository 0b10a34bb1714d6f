"""
Symbolic Decision Trees.

The learned artifact, independent of any solver: inference, the piecewise
text rendering, and the JSON document form.

Routing rule: go left iff sum_k a_nk * phi_k(x) < b_n, right otherwise, so a
point exactly on a boundary goes right.
"""
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import ValidationError

from app.core.exceptions import SchemaError, UserError
from app.learning.dataset import Dataset
from app.learning.topology import TreeIndex, in_order
from app.schemas.tree import NodeDocument, TreeDocument
from app.symbolic.basis import BasisRole, BasisSet, format_coefficient, print_combination, print_piecewise

Columns = Mapping[str, np.ndarray]


class NodeKind(str, Enum):
    BRANCH = "branch"
    LEAF = "leaf"
    INACTIVE = "inactive"


@dataclass(frozen=True)
class TreeNode:
    id: int
    kind: NodeKind
    a: Optional[Tuple[float, ...]] = None
    b: Optional[float] = None
    c: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class SymbolicTree:
    depth: int
    basis_branch: BasisSet
    basis_leaf: BasisSet
    nodes: Mapping[int, TreeNode]

    def __post_init__(self):
        self._validate()
        object.__setattr__(self, "_a", {
            n: np.array(node.a, dtype=float) for n, node in self.nodes.items()
            if node.kind == NodeKind.BRANCH
        })
        object.__setattr__(self, "_c", {
            n: np.array(node.c, dtype=float) for n, node in self.nodes.items()
            if node.kind == NodeKind.LEAF
        })

    def _validate(self) -> None:
        index = TreeIndex(self.depth)
        expected = set(index.nodes)
        if set(self.nodes) != expected:
            missing = sorted(expected - set(self.nodes))
            extra = sorted(set(self.nodes) - expected)
            raise SchemaError("nodes", f"expected ids 1..{index.n_nodes}; missing {missing}, unexpected {extra}")
        for n in index.nodes:
            node = self.nodes[n]
            path = f"nodes[id={n}]"
            if node.id != n:
                raise SchemaError(f"{path}.id", f"node stored under {n} has id {node.id}")
            if n == 1 and node.kind != NodeKind.BRANCH:
                raise SchemaError(f"{path}.kind", "root must be a branch node")
            if index.is_terminal(n) and node.kind == NodeKind.BRANCH:
                raise SchemaError(f"{path}.kind", "terminal position cannot branch")
            if n > 1:
                parent_kind = self.nodes[index.parent(n)].kind
                if parent_kind != NodeKind.BRANCH and node.kind != NodeKind.INACTIVE:
                    raise SchemaError(f"{path}.kind", f"child of a {parent_kind.value} node must be inactive")
                if parent_kind == NodeKind.BRANCH and node.kind == NodeKind.INACTIVE:
                    raise SchemaError(f"{path}.kind", "child of a branch node cannot be inactive")
            if node.kind == NodeKind.BRANCH:
                if node.a is None or len(node.a) != len(self.basis_branch):
                    raise SchemaError(f"{path}.a", f"expected {len(self.basis_branch)} split coefficients")
                if node.b is None:
                    raise SchemaError(f"{path}.b", "branch node needs a threshold")
                if not np.all(np.isfinite(node.a)) or not np.isfinite(node.b):
                    raise SchemaError(path, "non-finite split parameters")
            if node.kind == NodeKind.LEAF:
                if node.c is None or len(node.c) != len(self.basis_leaf):
                    raise SchemaError(f"{path}.c", f"expected {len(self.basis_leaf)} leaf coefficients")
                if not np.all(np.isfinite(node.c)):
                    raise SchemaError(f"{path}.c", "non-finite leaf coefficients")

    # =========================================================================
    # STRUCTURE
    # =========================================================================

    @property
    def index(self) -> TreeIndex:
        return TreeIndex(self.depth)

    @property
    def branches(self) -> List[int]:
        return [n for n in sorted(self.nodes) if self.nodes[n].kind == NodeKind.BRANCH]

    @property
    def leaves(self) -> List[int]:
        return [n for n in sorted(self.nodes) if self.nodes[n].kind == NodeKind.LEAF]

    @property
    def variables(self) -> Tuple[str, ...]:
        return self.basis_branch.variables

    def split(self, n: int) -> Tuple[np.ndarray, float]:
        return self._a[n].copy(), float(self.nodes[n].b)

    def leaf(self, n: int) -> np.ndarray:
        return self._c[n].copy()

    def normalized_split(self, n: int) -> Tuple[np.ndarray, float]:
        """Split scaled so the largest |coefficient| is 1 (sign kept)."""
        a, b = self.split(n)
        scale = float(np.max(np.abs(a))) if a.size else 0.0
        if scale == 0.0:
            return a, b
        return a / scale, b / scale

    # =========================================================================
    # INFERENCE
    # =========================================================================

    def _descend(self, phi_branch: np.ndarray) -> int:
        n = 1
        while self.nodes[n].kind == NodeKind.BRANCH:
            g = float(np.dot(phi_branch, self._a[n]))
            n = 2 * n if g < self.nodes[n].b else 2 * n + 1
        return n

    def predict_leaf(self, row: Mapping[str, float]) -> int:
        return self._descend(self.basis_branch.evaluate_row(row))

    def predict(self, row: Mapping[str, float]) -> float:
        """
        Evaluate the piecewise model at one point.

        Raises:
            UnboundVariableError: Row misses a variable
            ExpressionDomainError: A basis function is undefined at the point
        """
        n = self.predict_leaf(row)
        return float(np.dot(self.basis_leaf.evaluate_row(row), self._c[n]))

    def _featurize(self, data: Union[Dataset, Columns]) -> Tuple[np.ndarray, np.ndarray]:
        if isinstance(data, Dataset):
            columns, n_rows = data.columns(), data.n_rows
        else:
            columns = {k: np.asarray(v, dtype=float) for k, v in data.items()}
            n_rows = len(next(iter(columns.values()))) if columns else 0
        return (self.basis_branch.featurize(columns, n_rows),
                self.basis_leaf.featurize(columns, n_rows))

    def predict_leaves_many(self, data: Union[Dataset, Columns]) -> np.ndarray:
        phi_b, _ = self._featurize(data)
        return np.array([self._descend(phi_b[i]) for i in range(phi_b.shape[0])], dtype=int)

    def predict_many(self, data: Union[Dataset, Columns]) -> np.ndarray:
        """Row-wise predict; same arithmetic as the scalar path."""
        phi_b, phi_f = self._featurize(data)
        out = np.empty(phi_b.shape[0])
        for i in range(phi_b.shape[0]):
            out[i] = float(np.dot(phi_f[i], self._c[self._descend(phi_b[i])]))
        return out

    # =========================================================================
    # RENDERING
    # =========================================================================

    def condition_text(self, n: int, left: bool, digits: int = 4) -> str:
        a, b = self.normalized_split(n)
        flipped = bool(a.size) and float(a[np.argmax(np.abs(a))]) < 0
        if flipped:
            a, b = -a, -b
        if left:
            op = ">" if flipped else "<"
        else:
            op = "<=" if flipped else ">="
        return f"{print_combination(a, self.basis_branch, digits=digits)} {op} {format_coefficient(b, digits)}"

    def to_text(self, digits: int = 4) -> str:
        """
        Leaves left to right as "<expression> if <conditions>, otherwise <expression>".

        Splits are shown normalized by their largest |coefficient|.
        """
        index = self.index
        pieces = []
        for n in in_order(self.leaves):
            conditions = []
            path = [*index.ancestors(n), n]
            for parent, child in zip(path, path[1:]):
                conditions.append(self.condition_text(parent, left=child == 2 * parent, digits=digits))
            expression = print_combination(self._c[n], self.basis_leaf, digits=digits)
            pieces.append((expression, conditions))
        return print_piecewise(pieces)

    def __str__(self) -> str:
        return self.to_text()

    # =========================================================================
    # DOCUMENTS
    # =========================================================================

    def serialize(self) -> Dict[str, Any]:
        nodes = []
        for n in sorted(self.nodes):
            node = self.nodes[n]
            nodes.append({
                "id": n,
                "kind": node.kind.value,
                "a": list(node.a) if node.kind == NodeKind.BRANCH else None,
                "b": node.b if node.kind == NodeKind.BRANCH else None,
                "c": list(node.c) if node.kind == NodeKind.LEAF else None,
            })
        return {
            "depth": self.depth,
            "variables": list(self.variables),
            "basis_branch": list(self.basis_branch.texts),
            "basis_leaf": list(self.basis_leaf.texts),
            "nodes": nodes,
        }

    @classmethod
    def deserialize(cls, document: Mapping[str, Any]) -> "SymbolicTree":
        """
        Rebuild a tree from its document.

        Raises:
            SchemaError: Naming the offending field path
        """
        try:
            doc = TreeDocument.model_validate(document)
        except ValidationError as e:
            first = e.errors()[0]
            path = ".".join(str(part) for part in first["loc"]) or "document"
            raise SchemaError(path, first["msg"]) from None
        bases = {}
        for key, role in (("basis_branch", BasisRole.BRANCHING), ("basis_leaf", BasisRole.LEAF)):
            texts = getattr(doc, key)
            for k, text in enumerate(texts):
                try:
                    BasisSet.from_texts([text], doc.variables, role)
                except UserError as e:
                    raise SchemaError(f"{key}[{k}]", str(e)) from None
            bases[key] = BasisSet.from_texts(texts, doc.variables, role)
        nodes: Dict[int, TreeNode] = {}
        for position, node in enumerate(doc.nodes):
            if node.id in nodes:
                raise SchemaError(f"nodes[{position}].id", f"duplicate node id {node.id}")
            nodes[node.id] = _node_from_document(node)
        return cls(doc.depth, bases["basis_branch"], bases["basis_leaf"], nodes)

    def dumps(self) -> str:
        return json.dumps(self.serialize(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "SymbolicTree":
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise SchemaError("document", f"invalid JSON: {e}") from None
        return cls.deserialize(document)

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SymbolicTree":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            raise UserError(f"model file not found: {path}") from None
        return cls.loads(text)


def _node_from_document(node: NodeDocument) -> TreeNode:
    kind = NodeKind(node.kind)
    return TreeNode(
        id=node.id,
        kind=kind,
        a=tuple(node.a) if node.a is not None and kind == NodeKind.BRANCH else None,
        b=node.b if kind == NodeKind.BRANCH else None,
        c=tuple(node.c) if node.c is not None and kind == NodeKind.LEAF else None,
    )


def predict(tree: SymbolicTree, row: Mapping[str, float]) -> float:
    return tree.predict(row)


def predict_leaf(tree: SymbolicTree, row: Mapping[str, float]) -> int:
    return tree.predict_leaf(row)


def to_text(tree: SymbolicTree) -> str:
    return tree.to_text()


def serialize(tree: SymbolicTree) -> Dict[str, Any]:
    return tree.serialize()


def deserialize(document: Mapping[str, Any]) -> SymbolicTree:
    return SymbolicTree.deserialize(document)
