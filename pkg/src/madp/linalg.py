"""Dense linear algebra used by the matrix-mechanism parts of the package.

Matrices are plain 2-D ``numpy`` float arrays; queries are 1-D arrays of
length ``d``.
"""

import numpy as np

# Singular values below this fraction of the largest are treated as zero.
PINV_RCOND = 1e-12


class RankDeficient(ValueError):
    """Raised when a strategy does not span the query space."""


def as_matrix(m):
    a = np.asarray(m, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def pinv(m, rcond=PINV_RCOND):
    """Moore-Penrose pseudoinverse via the SVD.

    Singular values below ``rcond * sigma_max`` are truncated, so the result
    is defined for every finite matrix, including rank-deficient ones.
    """
    a = as_matrix(m)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((a.shape[1], a.shape[0]))
    keep = s > rcond * s[0]
    inv_s = np.zeros_like(s)
    inv_s[keep] = 1.0 / s[keep]
    return (vt.T * inv_s) @ u.T


def rank(m, rcond=PINV_RCOND):
    s = np.linalg.svd(as_matrix(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rcond * s[0]))


def l1_norm(m):
    """Maximum column L1 norm, i.e. the L1 sensitivity of a strategy."""
    return float(np.abs(as_matrix(m)).sum(axis=0).max())


def frobenius_sq(m):
    a = np.asarray(m, dtype=float)
    return float(np.sum(a * a))


def sensitivity(q):
    """Sensitivity of a single linear query (its largest absolute coefficient)."""
    q = np.asarray(q, dtype=float)
    return float(np.max(np.abs(q))) if q.size else 0.0


def mm_expected_error(w, a, epsilon):
    """Total expected squared error of answering ``w`` through strategy ``a``.

    ``(2 / epsilon**2) * ||a||_1**2 * ||w a^+||_F**2``
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    w = as_matrix(w)
    a = as_matrix(a)
    if w.shape[1] != a.shape[1]:
        raise ValueError("workload and strategy have different domain sizes")
    if rank(a) < a.shape[1]:
        raise RankDeficient(f"strategy rank {rank(a)} < domain size {a.shape[1]}")
    return 2.0 / epsilon**2 * l1_norm(a) ** 2 * frobenius_sq(w @ pinv(a))


def reconstruct(cache_rows, row_budgets, noisy_answers, q):
    """Least-squares estimate of ``q . x`` from noisy answers to ``cache_rows``.

    Row ``j`` and its answer are multiplied by its budget so that every row
    carries unit-scale Laplace noise before the pseudoinverse is applied.
    """
    rows = as_matrix(cache_rows)
    budgets = np.asarray(row_budgets, dtype=float)
    y = np.asarray(noisy_answers, dtype=float)
    q = np.asarray(q, dtype=float)
    if budgets.shape != (rows.shape[0],) or y.shape != (rows.shape[0],):
        raise ValueError("need one budget and one answer per cache row")
    if np.any(budgets <= 0):
        raise ValueError("row budgets must be positive")
    if q.shape != (rows.shape[1],):
        raise ValueError("query length does not match the cache")
    scaled = rows * budgets[:, None]
    if rank(scaled) < rows.shape[1]:
        raise RankDeficient("cache rows do not span the query space")
    return float(q @ (pinv(scaled) @ (y * budgets)))


class LeastSquaresCache:
    """Incremental weighted least squares over a growing set of rows.

    Keeps the normal equations of the budget-scaled rows so that adding a row
    and re-solving costs O(d^2) / O(d^3) instead of a fresh SVD. Gives the
    same estimate as :func:`reconstruct` whenever the rows have full column
    rank.
    """

    def __init__(self, d):
        self.d = d
        self.gram = np.zeros((d, d))
        self.rhs = np.zeros(d)
        self.n_rows = 0
        self._estimate = None

    def add(self, row, budget, answer):
        row = np.asarray(row, dtype=float)
        w2 = budget * budget
        self.gram += w2 * np.outer(row, row)
        self.rhs += w2 * answer * row
        self.n_rows += 1
        self._estimate = None

    def add_many(self, rows, budgets, answers):
        rows = np.asarray(rows, dtype=float)
        w2 = np.asarray(budgets, dtype=float) ** 2
        self.gram += (rows * w2[:, None]).T @ rows
        self.rhs += rows.T @ (w2 * np.asarray(answers, dtype=float))
        self.n_rows += rows.shape[0]
        self._estimate = None

    def estimate(self):
        """Least-squares estimate of the data vector (on the answers' scale)."""
        if self._estimate is None:
            try:
                chol = np.linalg.cholesky(self.gram)
            except np.linalg.LinAlgError:
                raise RankDeficient("cache rows do not span the query space") from None
            z = np.linalg.solve(chol, self.rhs)
            self._estimate = np.linalg.solve(chol.T, z)
        return self._estimate

    def answer(self, q):
        return float(np.dot(q, self.estimate()))
