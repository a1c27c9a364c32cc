"""Static scan for references to obviously undefined self attributes.

A candidate that reads ``self.fc3`` when only ``fc1`` and ``fc2`` were ever
assigned will fail at runtime with an attribute error; catching it here
classifies the failure without executing anything. The scan stays
deliberately shallow: it only flags a ``self.<name>`` read in a class where
that name is never assigned, never defined as a method, and not part of the
module-framework surface. Anything cleverer belongs to a real run.
"""

from __future__ import annotations

import ast

# Attributes the training-framework base class provides on every model.
_FRAMEWORK_ATTRS = frozenset(
    {
        "add_module",
        "apply",
        "buffers",
        "children",
        "cpu",
        "cuda",
        "device",
        "dtype",
        "eval",
        "forward",
        "load_state_dict",
        "modules",
        "named_buffers",
        "named_children",
        "named_modules",
        "named_parameters",
        "parameters",
        "register_buffer",
        "register_parameter",
        "requires_grad_",
        "state_dict",
        "to",
        "train",
        "training",
        "zero_grad",
    }
)


def find_undefined_self_attribute(source: str) -> str | None:
    """Return ``"ClassName.attr"`` for the first undefined read, else None.

    ``source`` must already compile; call after a successful syntax check.
    """
    tree = ast.parse(source)
    for cls in (n for n in ast.walk(tree) if isinstance(n, ast.ClassDef)):
        methods = {
            item.name
            for item in cls.body
            if isinstance(item, (ast.FunctionDef, ast.AsyncFunctionDef))
        }
        stores: set[str] = set()
        loads: list[tuple[int, int, str]] = []
        for node in ast.walk(cls):
            if (
                isinstance(node, ast.Attribute)
                and isinstance(node.value, ast.Name)
                and node.value.id == "self"
            ):
                if isinstance(node.ctx, (ast.Store, ast.Del)):
                    stores.add(node.attr)
                else:
                    loads.append((node.lineno, node.col_offset, node.attr))
        for _, _, attr in sorted(loads):
            if attr not in stores and attr not in methods and attr not in _FRAMEWORK_ATTRS:
                return f"{cls.name}.{attr}"
    return None
