"""
Schemas Package.

Pydantic models for tree documents (``tree``), experiment configuration
files (``experiment``), HTTP payloads (``api``) and experiment reports
(``report``). Only the document models are re-exported here; the others
import the learning package and are imported from their modules.
"""
from app.schemas.tree import NodeDocument, TreeDocument

__all__ = [
    "NodeDocument",
    "TreeDocument",
]
