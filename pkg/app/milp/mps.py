"""
Free-format MPS export.

Sections NAME, ROWS, COLUMNS, RHS, BOUNDS, ENDATA. Columns are written in
handle order and rows in insertion order, so identical models produce
byte-identical text.
"""
import math
from io import StringIO
from typing import Dict, List, Tuple

from app.core.exceptions import ModelBuildError
from app.milp.model import Integrality, MilpModel, sanitize_name

OBJECTIVE_ROW = "OBJ"
BOUND_SET = "BND"
RHS_SET = "RHS"


def _number(value: float) -> str:
    """17 significant digits, never -0."""
    if value == 0:
        value = 0.0
    return "%.17g" % value


def row_labels(model: MilpModel) -> List[str]:
    labels = []
    for i, name in enumerate(model.row_names):
        label = f"C{i}_{sanitize_name(name)}" if name else f"C{i}"
        labels.append(label[:64])
    return labels


def write_mps(model: MilpModel) -> str:
    """
    Render a model as free-format MPS text.

    Binary columns are wrapped in MARKER INTORG/INTEND pairs. A binary with
    bounds [0, 1] is written as BV; any other fixed variable as FX.

    Raises:
        ModelBuildError: Model has no variables
    """
    if model.num_variables == 0:
        raise ModelBuildError("cannot export an empty model")

    col_labels = [sanitize_name(name) for name in model.var_names]
    labels = row_labels(model)

    # column-major view of the rows
    columns: Dict[int, List[Tuple[str, float]]] = {j: [] for j in range(model.num_variables)}
    for var in sorted(model.objective):
        coef = model.objective[var]
        if coef != 0.0:
            columns[var].append((OBJECTIVE_ROW, coef))
    for i, (idx, vals) in enumerate(zip(model.row_indices, model.row_coeffs)):
        for var, coef in zip(idx, vals):
            if coef != 0.0:
                columns[var].append((labels[i], coef))

    out = StringIO()
    out.write(f"NAME {sanitize_name(model.name) or 'model'}\n")
    out.write("ROWS\n")
    out.write(f" N {OBJECTIVE_ROW}\n")
    for i, label in enumerate(labels):
        out.write(f" {model.senses[i].value} {label}\n")

    out.write("COLUMNS\n")
    in_marker = False
    marker_count = 0
    for j, label in enumerate(col_labels):
        is_binary = model.integrality[j] == Integrality.BINARY
        if is_binary and not in_marker:
            out.write(f" MARKER{marker_count} 'MARKER' 'INTORG'\n")
            in_marker = True
        elif not is_binary and in_marker:
            out.write(f" MARKER{marker_count} 'MARKER' 'INTEND'\n")
            marker_count += 1
            in_marker = False
        entries = columns[j] or [(OBJECTIVE_ROW, 0.0)]
        for row_label, coef in entries:
            out.write(f" {label} {row_label} {_number(coef)}\n")
    if in_marker:
        out.write(f" MARKER{marker_count} 'MARKER' 'INTEND'\n")

    out.write("RHS\n")
    for i, label in enumerate(labels):
        if model.rhs[i] != 0.0:
            out.write(f" {RHS_SET} {label} {_number(model.rhs[i])}\n")

    out.write("BOUNDS\n")
    for j, label in enumerate(col_labels):
        lb, ub = model.lower[j], model.upper[j]
        if model.integrality[j] == Integrality.BINARY and lb == 0.0 and ub == 1.0:
            out.write(f" BV {BOUND_SET} {label}\n")
        elif lb == ub:
            out.write(f" FX {BOUND_SET} {label} {_number(lb)}\n")
        elif math.isinf(lb) and math.isinf(ub):
            out.write(f" FR {BOUND_SET} {label}\n")
        else:
            if math.isinf(lb):
                out.write(f" MI {BOUND_SET} {label}\n")
            else:
                out.write(f" LO {BOUND_SET} {label} {_number(lb)}\n")
            if math.isinf(ub):
                out.write(f" PL {BOUND_SET} {label}\n")
            else:
                out.write(f" UP {BOUND_SET} {label} {_number(ub)}\n")
    out.write("ENDATA\n")
    return out.getvalue()
