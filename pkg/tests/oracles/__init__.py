"""Independent brute-force reference implementations, used only by tests.

Everything here recomputes results from first principles — scalar loops,
exhaustive searches, pair counting, finite differences, high-precision
special functions — sharing no code with the production paths it checks.
Recorded outputs live in ``golden/`` as CSV so ports to other languages can
reuse them; see ``make_golden.py`` for the (committed) generation script.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from triqa.errors import UndefinedCorrelation
from triqa.preprocess import PreprocessConfig, SampleMode, fragment_view


@dataclass
class OracleReport:
    name: str
    max_abs_err: float
    max_rel_err: float
    cases: int
    tolerance: float
    passed: bool


# ---------------------------------------------------------------------------
# imaging oracles


def bilinear_resize_scalar(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Scalar-loop bilinear resize: align-corners-false, edge clamp."""
    src = np.asarray(img, dtype=np.float64)
    if img.dtype == np.uint8:
        src = src / 255.0
    h, w = src.shape[:2]
    out = np.zeros((out_h, out_w, src.shape[2]), dtype=np.float64)
    for i in range(out_h):
        sy = (i + 0.5) * h / out_h - 0.5
        sy = min(max(sy, 0.0), h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for j in range(out_w):
            sx = (j + 0.5) * w / out_w - 0.5
            sx = min(max(sx, 0.0), w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            for c in range(src.shape[2]):
                top = src[y0, x0, c] * (1.0 - fx) + src[y0, x1, c] * fx
                bot = src[y1, x0, c] * (1.0 - fx) + src[y1, x1, c] * fx
                out[i, j, c] = top * (1.0 - fy) + bot * fy
    return out


def crop_scalar(img: np.ndarray, top: int, left: int, height: int, width: int) -> np.ndarray:
    out = np.zeros((height, width, img.shape[2]), dtype=img.dtype)
    for i in range(height):
        for j in range(width):
            for c in range(img.shape[2]):
                out[i, j, c] = img[top + i, left + j, c]
    return out


# ---------------------------------------------------------------------------
# fragment placement oracle


def _normalize(img: np.ndarray) -> np.ndarray:
    arr = np.asarray(img)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64)


def _find_window(cell: np.ndarray, block: np.ndarray) -> bool:
    """Exhaustively search ``cell`` for a window exactly equal to ``block``."""
    mh, mw = block.shape[:2]
    ch, cw = cell.shape[:2]
    # Candidate prefilter on the top-left pixel keeps the exhaustive scan
    # tractable on UHD cells; every candidate is then verified in full.
    cand = np.nonzero(
        (cell[: ch - mh + 1, : cw - mw + 1, 0] == block[0, 0, 0])
        & (cell[: ch - mh + 1, : cw - mw + 1, 1] == block[0, 0, 1])
        & (cell[: ch - mh + 1, : cw - mw + 1, 2] == block[0, 0, 2])
    )
    for dy, dx in zip(*cand):
        if np.array_equal(cell[dy : dy + mh, dx : dx + mw], block):
            return True
    return False


def oracle_fragment_check(
    img: np.ndarray,
    cfg: PreprocessConfig,
    seed: int = 0,
    mode: SampleMode = SampleMode.TRAIN,
) -> OracleReport:
    """Verify every fragment block is an exact window of its own grid cell.

    The fragment comes from the production path; the cell boundaries and
    the window search are recomputed here from the floor formula.
    """
    fragment = fragment_view(img, cfg, mode, seed)
    src = _normalize(img)
    h, w = src.shape[:2]
    n, mp = cfg.grid_n, cfg.mini_patch
    failures = 0
    cases = 0
    for i in range(n):
        for j in range(n):
            block = fragment[i * mp : (i + 1) * mp, j * mp : (j + 1) * mp]
            r0, r1 = (i * h) // n, ((i + 1) * h) // n
            c0, c1 = (j * w) // n, ((j + 1) * w) // n
            cases += 1
            if not _find_window(src[r0:r1, c0:c1], block):
                failures += 1
    return OracleReport(
        name="fragment_check",
        max_abs_err=float(failures),
        max_rel_err=float(failures) / cases,
        cases=cases,
        tolerance=0.0,
        passed=failures == 0,
    )


# ---------------------------------------------------------------------------
# rank-correlation oracles (O(n²), scalar)


def oracle_average_ranks(values) -> list[float]:
    v = [float(x) for x in values]
    n = len(v)
    order = sorted(range(n), key=lambda i: v[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and v[order[j + 1]] == v[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def oracle_pearson(x, y) -> float:
    x = [float(a) for a in x]
    y = [float(b) for b in y]
    n = len(x)
    if n < 2:
        raise UndefinedCorrelation("need n >= 2")
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    if all(a == x[0] for a in x) or all(b == y[0] for b in y):
        raise UndefinedCorrelation("constant vector")
    return sxy / math.sqrt(sxx * syy)


def oracle_srcc(x, y) -> float:
    return oracle_pearson(oracle_average_ranks(x), oracle_average_ranks(y))


def oracle_tau_b(x, y) -> float:
    x = [float(a) for a in x]
    y = [float(b) for b in y]
    n = len(x)
    if n < 2:
        raise UndefinedCorrelation("need n >= 2")
    if all(a == x[0] for a in x) or all(b == y[0] for b in y):
        raise UndefinedCorrelation("constant vector")
    concordant = discordant = ties_x = ties_y = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            if dx == 0 and dy == 0:
                ties_x += 1
                ties_y += 1
            elif dx == 0:
                ties_x += 1
            elif dy == 0:
                ties_y += 1
            elif (dx > 0) == (dy > 0):
                concordant += 1
            else:
                discordant += 1
    n0 = n * (n - 1) // 2
    denom = math.sqrt(float(n0 - ties_x)) * math.sqrt(float(n0 - ties_y))
    return (concordant - discordant) / denom


# ---------------------------------------------------------------------------
# finite-difference gradient oracle


def central_difference(f, x: float, step: float = 1e-4) -> float:
    return (f(x + step) - f(x - step)) / (2.0 * step)


def oracle_param_gradient(
    loss_fn, params: dict[str, np.ndarray], name: str, index: tuple, step: float = 1e-4
) -> float:
    """Central difference of ``loss_fn()`` w.r.t. one parameter coordinate.

    ``loss_fn`` closes over ``params``; the coordinate is perturbed in place
    and restored.
    """
    arr = params[name]
    orig = arr[index]
    arr[index] = orig + step
    lp = loss_fn()
    arr[index] = orig - step
    lm = loss_fn()
    arr[index] = orig
    return (lp - lm) / (2.0 * step)


def phi_reference(z: float, dps: int = 50) -> float:
    """Standard normal CDF at 50 significant digits (mpmath), rounded to float."""
    import mpmath

    with mpmath.workdps(dps):
        return float(0.5 * mpmath.erfc(-mpmath.mpf(z) / mpmath.sqrt(2)))
