"""Bounded Levenberg-Marquardt least squares with forward-difference Jacobians."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

_EPS_STEP = 1e-6


class FitError(ValueError):
    pass


@dataclass
class FitResult:
    """Best-fit parameters with covariance and diagnostics.

    ``fixed`` parameters carry zero variance. ``flags`` holds model specific
    notes such as identifiability.
    """

    names: Tuple[str, ...]
    values: np.ndarray
    covariance: np.ndarray
    residuals: np.ndarray
    chi_sq: float
    dof: int
    converged: bool
    n_iter: int
    message: str = ""
    singular: bool = False
    fixed: Tuple[str, ...] = ()
    flags: Dict[str, object] = field(default_factory=dict)

    @property
    def params(self) -> Dict[str, float]:
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def stderr(self) -> Dict[str, float]:
        sd = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        return dict(zip(self.names, (float(v) for v in sd)))

    @property
    def reduced_chi_sq(self) -> float:
        return self.chi_sq / self.dof if self.dof > 0 else float("nan")

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def sd(self, name: str) -> float:
        return self.stderr[name]

    def correlation(self) -> np.ndarray:
        sd = np.sqrt(np.clip(np.diag(self.covariance), 0, None))
        with np.errstate(invalid="ignore", divide="ignore"):
            c = self.covariance / np.outer(sd, sd)
        c[~np.isfinite(c)] = 0.0
        np.fill_diagonal(c, 1.0)
        return c

    def report(self) -> str:
        lines = [
            f"converged: {self.converged} ({self.message})",
            f"iterations: {self.n_iter}",
            f"chi_sq: {self.chi_sq:.6g}  dof: {self.dof}  reduced: {self.reduced_chi_sq:.6g}",
        ]
        if self.singular:
            lines.append("warning: singular Jacobian, covariance is a pseudo-inverse")
        for k, v in self.flags.items():
            lines.append(f"{k}: {v}")
        w = max(len(n) for n in self.names)
        lines.append(f"{'name':<{w}}  {'value':>14}  {'sd':>12}")
        for n, v in zip(self.names, self.values):
            tag = "  (fixed)" if n in self.fixed else ""
            lines.append(f"{n:<{w}}  {v:>14.8g}  {self.sd(n):>12.4g}{tag}")
        lines.append("correlation:")
        for n, row in zip(self.names, self.correlation()):
            lines.append(f"{n:<{w}}  " + " ".join(f"{c:+.3f}" for c in row))
        return "\n".join(lines)


def numeric_jacobian(fun: Callable, p, f0=None, method: str = "forward", scale=None, upper=None):
    """Finite-difference Jacobian of vector function ``fun`` at ``p``.

    Steps are ``1e-6 * max(|p_i|, scale_i)``; forward steps flip sign when
    they would cross ``upper``.
    """
    p = np.asarray(p, dtype=float)
    if f0 is None:
        f0 = np.asarray(fun(p), dtype=float)
    scale = np.ones_like(p) if scale is None else np.asarray(scale, dtype=float)
    jac = np.empty((f0.size, p.size))
    for i in range(p.size):
        h = _EPS_STEP * max(abs(p[i]), scale[i])
        if method == "central":
            a, b = p.copy(), p.copy()
            a[i] += h
            b[i] -= h
            jac[:, i] = (np.asarray(fun(a)) - np.asarray(fun(b))) / (2 * h)
            continue
        if upper is not None and p[i] + h > upper[i]:
            h = -h
        q = p.copy()
        q[i] += h
        jac[:, i] = (np.asarray(fun(q), dtype=float) - f0) / h
    return jac


def _as_names_values(init) -> Tuple[Tuple[str, ...], np.ndarray]:
    if isinstance(init, Mapping):
        return tuple(init.keys()), np.array([float(v) for v in init.values()])
    vals = np.asarray(init, dtype=float)
    return tuple(f"p{i}" for i in range(vals.size)), vals


def fit(
    model: Callable,
    x,
    y,
    sigma=None,
    init=None,
    bounds: Optional[Mapping[str, Tuple[float, float]]] = None,
    fixed: Sequence[str] = (),
    max_iter: int = 200,
    gtol: float = 1e-8,
    ftol: float = 1e-12,
    xtol: float = 1e-12,
) -> FitResult:
    """Minimise ``sum(((model(x, *p) - y) / sigma)^2)``.

    Parameters
    ----------
    init : mapping name -> start value (order defines the model signature)
    bounds : optional mapping name -> (lo, hi); missing names are unbounded
    fixed : names held at their start values
    sigma : per-point standard errors; without them the covariance is
        rescaled by the reduced chi-square

    Convergence is declared when the largest cosine between the residual
    vector and a free Jacobian column is below ``gtol``, or when both the
    actual and predicted relative cost reductions are below ``ftol``, or the
    step is below ``xtol`` relative to the parameters.
    """
    x = np.asarray(x)
    y = np.asarray(y, dtype=float)
    if x.shape[0] != y.shape[0]:
        raise FitError("x and y must have the same length")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise FitError("data must be finite")
    have_sigma = sigma is not None
    s = np.ones_like(y) if sigma is None else np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    if np.any(~(s > 0)):
        raise FitError("sigma must be strictly positive")
    if init is None:
        raise FitError("initial parameters are required")
    names, p0 = _as_names_values(init)
    lo = np.full(p0.size, -np.inf)
    hi = np.full(p0.size, np.inf)
    for name, (a, b) in (bounds or {}).items():
        if name not in names:
            raise FitError(f"bound given for unknown parameter {name!r}")
        i = names.index(name)
        if not a < b:
            raise FitError(f"inconsistent bounds for {name!r}: {a} >= {b}")
        lo[i], hi[i] = a, b
    if np.any(p0 < lo) or np.any(p0 > hi):
        bad = [n for n, v, a, b in zip(names, p0, lo, hi) if not a <= v <= b]
        raise FitError(f"initial values outside bounds: {bad}")
    unknown = set(fixed) - set(names)
    if unknown:
        raise FitError(f"fixed names not in parameters: {sorted(unknown)}")
    free = np.array([n not in fixed for n in names])
    if not free.any():
        raise FitError("no free parameters")
    scale = np.where(np.abs(p0) > 0, np.abs(p0), 1.0)

    def full(pf):
        p = p0.copy()
        p[free] = pf
        return p

    def resid(pf):
        r = (np.asarray(model(x, *full(pf)), dtype=float) - y) / s
        return r

    pf = p0[free].copy()
    lof, hif = lo[free], hi[free]
    r = resid(pf)
    if not np.all(np.isfinite(r)):
        raise FitError("model is not finite at the initial parameters")
    cost = float(r @ r)
    lam = 1e-3
    converged, message, n_iter = False, "maximum iterations reached", 0
    jac = None
    for n_iter in range(1, max_iter + 1):
        if cost == 0.0:
            converged, message = True, "exact fit"
            n_iter -= 1
            break
        jac = numeric_jacobian(resid, pf, r, scale=scale[free], upper=hif)
        g = jac.T @ r
        # bound-active components pushing outward do not count
        active = ((pf <= lof) & (g > 0)) | ((pf >= hif) & (g < 0))
        colnorm = np.linalg.norm(jac, axis=0)
        rnorm = np.sqrt(cost)
        with np.errstate(invalid="ignore", divide="ignore"):
            cosines = np.where(colnorm > 0, np.abs(g) / (colnorm * rnorm), 0.0)
        cosines[active] = 0.0
        if cosines.max() <= gtol:
            converged, message = True, "gradient tolerance"
            n_iter -= 1
            break
        jtj = jac.T @ jac
        d = np.diag(jtj).copy()
        d[d <= 0] = 1.0
        dn = 1.0 / np.sqrt(d)
        jtj_n = jtj * np.outer(dn, dn)
        g_n = g * dn
        stepped = False
        while lam < 1e16:
            try:
                step = dn * np.linalg.solve(jtj_n + lam * np.eye(len(d)), -g_n)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = np.clip(pf + step, lof, hif)
            step = trial - pf
            r_new = resid(trial)
            cost_new = float(r_new @ r_new) if np.all(np.isfinite(r_new)) else np.inf
            if cost_new < cost:
                pred = cost - float(np.sum((r + jac @ step) ** 2))
                actual = cost - cost_new
                small_f = actual <= ftol * cost and pred <= ftol * cost
                small_x = np.linalg.norm(step / scale[free]) <= xtol * (np.linalg.norm(pf / scale[free]) + xtol)
                pf, r, cost = trial, r_new, cost_new
                lam = max(lam / 10, 1e-12)
                stepped = True
                if small_f or small_x:
                    converged = True
                    message = "cost tolerance" if small_f else "step tolerance"
                break
            lam *= 10
        if converged:
            break
        if not stepped:
            converged, message = True, "no further decrease possible"
            break

    jac = numeric_jacobian(resid, pf, r, scale=scale[free], upper=hif)
    dof = max(y.size - int(free.sum()), 0)
    jtj = jac.T @ jac
    d = np.sqrt(np.diag(jtj))
    dn = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    jtj_n = jtj * np.outer(dn, dn)
    cond = np.linalg.cond(jtj_n) if np.all(d > 0) else np.inf
    singular = not np.isfinite(cond) or cond > 1e12
    cov_f = (np.linalg.pinv(jtj_n) if singular else np.linalg.inv(jtj_n)) * np.outer(dn, dn)
    cov_f = 0.5 * (cov_f + cov_f.T)
    if not have_sigma and dof > 0:
        cov_f = cov_f * cost / dof
    cov = np.zeros((p0.size, p0.size))
    cov[np.ix_(free, free)] = cov_f
    return FitResult(
        names=names, values=full(pf), covariance=cov, residuals=r * s,
        chi_sq=cost, dof=dof, converged=converged, n_iter=n_iter, message=message,
        singular=bool(singular), fixed=tuple(fixed),
    )


def fit_best_of(model, x, y, sigma, inits, **kw) -> FitResult:
    """Run ``fit`` from several starts and keep the lowest chi-square."""
    best = None
    for init in inits:
        try:
            res = fit(model, x, y, sigma, init, **kw)
        except FitError:
            continue
        if best is None or res.chi_sq < best.chi_sq:
            best = res
    if best is None:
        raise FitError("no start point produced a valid fit")
    return best
