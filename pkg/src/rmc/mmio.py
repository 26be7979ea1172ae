"""MatrixMarket coordinate files for partially observed matrices.

Only the ``matrix coordinate real general`` (or ``integer general``) flavour
is accepted. Indices in the file are 1-based; every listed entry is an
observation, including explicit zeros.
"""

from .masked_linalg import ObservedMatrix

BANNER = "%%MatrixMarket matrix coordinate real general"


class MatrixMarketError(ValueError):
    def __init__(self, path, lineno, msg):
        super().__init__(f"{path}:{lineno}: {msg}")
        self.path = path
        self.lineno = lineno


def read_observed(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError(path, 1, "empty file")
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket":
        raise MatrixMarketError(path, 1, "missing %%MatrixMarket banner")
    obj, fmt, field, symmetry = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(path, 1, f"expected 'matrix coordinate', got '{obj} {fmt}'")
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(path, 1, f"unsupported field '{field}'")
    if symmetry != "general":
        raise MatrixMarketError(path, 1, f"unsupported symmetry '{symmetry}'")

    body = (
        (no, line.strip())
        for no, line in enumerate(lines[1:], start=2)
        if line.strip() and not line.lstrip().startswith("%")
    )
    try:
        no, size_line = next(body)
    except StopIteration:
        raise MatrixMarketError(path, len(lines), "missing size line") from None
    try:
        m, n, nnz = (int(tok) for tok in size_line.split())
    except ValueError:
        raise MatrixMarketError(path, no, f"bad size line {size_line!r}") from None
    if m < 1 or n < 1 or nnz < 1:
        raise MatrixMarketError(path, no, "dimensions and entry count must be positive")

    rows, cols, vals, seen = [], [], [], {}
    for no, line in body:
        parts = line.split()
        if len(parts) != 3:
            raise MatrixMarketError(path, no, f"expected 'row col value', got {line!r}")
        try:
            i, j, v = int(parts[0]) - 1, int(parts[1]) - 1, float(parts[2])
        except ValueError:
            raise MatrixMarketError(path, no, f"cannot parse entry {line!r}") from None
        if not (0 <= i < m and 0 <= j < n):
            raise MatrixMarketError(path, no, f"index ({i + 1}, {j + 1}) outside {m}x{n}")
        if (i, j) in seen:
            raise MatrixMarketError(
                path, no, f"duplicate entry ({i + 1}, {j + 1}), first on line {seen[i, j]}"
            )
        if v != v or v in (float("inf"), float("-inf")):
            raise MatrixMarketError(path, no, "non-finite value")
        seen[i, j] = no
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if len(vals) != nnz:
        raise MatrixMarketError(
            path, len(lines), f"size line announces {nnz} entries, found {len(vals)}"
        )
    return ObservedMatrix(m, n, rows, cols, vals)


def write_observed(path, x):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(BANNER + "\n")
        fh.write(f"{x.m} {x.n} {x.nnz}\n")
        for i, j, v in zip(x.rows, x.cols, x.values):
            fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
