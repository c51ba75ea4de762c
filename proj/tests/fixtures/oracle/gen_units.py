"""Regenerates sample_repo_units.tsv from CPython's ast module."""
import ast
import pathlib
import sys

root = pathlib.Path(sys.argv[1])
rows = []


def docstring_node(body):
    if body and isinstance(body[0], ast.Expr) and isinstance(body[0].value, ast.Constant) \
            and isinstance(body[0].value.value, str):
        return body[0]
    return None


for path in sorted(root.rglob("*.py")):
    rel = path.relative_to(root).as_posix()
    text = path.read_text()
    lines = text.count("\n") + (0 if text.endswith("\n") or not text else 1)
    rows.append((rel, "File", 1, lines))
    tree = ast.parse(text)
    doc = docstring_node(tree.body)
    if doc:
        rows.append((rel + "::__doc__", "Documentation", doc.lineno, doc.end_lineno))
    seen = {}

    def visit(body, qual):
        for node in body:
            if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                name = qual + [node.name]
                local = ".".join(name)
                start = node.decorator_list[0].lineno if node.decorator_list else node.lineno
                key = local
                if seen.get(local):
                    key = f"{local}@{start}"
                seen[local] = seen.get(local, 0) + 1
                kind = "Class" if isinstance(node, ast.ClassDef) else "Function"
                rows.append((f"{rel}::{key}", kind, start, node.end_lineno))
                visit(node.body, name)
            elif hasattr(node, "body") and not isinstance(node, ast.Lambda):
                for field in ("body", "orelse", "finalbody", "handlers"):
                    visit(getattr(node, field, []) or [], qual)
            elif isinstance(node, ast.ExceptHandler):
                visit(node.body, qual)

    visit(tree.body, [])

for row in sorted(rows):
    print("\t".join(map(str, row)))
