"""Synthetic confidence/correctness landscapes and their gradient flow.

Confidence is modelled as a sum of isotropic Gaussian bumps and correctness
as a union of disjoint balls or a half-space, because both families have
closed forms under Gaussian smoothing:

* bump ``h * exp(-|x - c|^2 / (2 w^2))`` smoothed with ``N(0, s^2 I)``
  becomes ``h * (w^2 / (w^2 + s^2))^(D/2) * exp(-|x - c|^2 / (2 (w^2 + s^2)))``
* half-space ``{x : a . x <= b}`` (unit normal) becomes
  ``Phi((b - a . x) / s)``
* ball ``{x : |x - c| <= r}`` becomes the noncentral chi-square CDF
  ``F(r^2 / s^2; df=D, nc=|x - c|^2 / s^2)``

That makes the smoothed fields J_conf and J_corr, their analytic gradients,
and therefore ascent trajectories on J_conf exactly checkable against Monte
Carlo and finite differences.  The simulator demonstrates two facts about
confidence-guided ascent: a step on J_conf raises J_corr exactly when the
two gradients are positively aligned, and a strict J_conf maximizer with
negligible J_corr captures every trajectory started in its basin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats


# ---------------------------------------------------------------------------
# landscape definition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianBump:
    center: np.ndarray
    height: float
    width: float  # standard-deviation-like scale, > 0

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=np.float64))
        if not self.width > 0:
            raise ValueError(f"bump width must be positive, got {self.width}")


@dataclass(frozen=True)
class BallRegion:
    """Correctness = 1 inside a union of pairwise disjoint balls."""

    centers: np.ndarray  # (M, D)
    radii: np.ndarray    # (M,)

    def __post_init__(self):
        centers = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        radii = np.atleast_1d(np.asarray(self.radii, dtype=np.float64))
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        if centers.shape[0] != radii.shape[0]:
            raise ValueError("one radius per ball center required")
        if not (radii > 0).all():
            raise ValueError("ball radii must be positive")
        for i in range(len(radii)):
            for j in range(i + 1, len(radii)):
                gap = np.linalg.norm(centers[i] - centers[j])
                if gap <= radii[i] + radii[j]:
                    raise ValueError(
                        "correctness balls must be pairwise disjoint so their "
                        "smoothed indicators sum exactly"
                    )

    def indicator(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        d2 = ((pts[:, None, :] - self.centers[None]) ** 2).sum(axis=-1)
        return (d2 <= self.radii[None] ** 2).any(axis=-1).astype(np.float64)

    def smoothed(self, x: np.ndarray, sigma: float) -> float:
        dim = self.centers.shape[1]
        total = 0.0
        for c, r in zip(self.centers, self.radii):
            nc = float(((x - c) ** 2).sum()) / sigma**2
            total += stats.ncx2.cdf(r**2 / sigma**2, df=dim, nc=nc)
        return float(total)

    def smoothed_grad(self, x: np.ndarray, sigma: float) -> np.ndarray:
        # d/d(nc) F(q; df, nc) = (F(q; df+2, nc) - F(q; df, nc)) / 2
        dim = self.centers.shape[1]
        grad = np.zeros_like(x)
        for c, r in zip(self.centers, self.radii):
            diff = x - c
            nc = float((diff**2).sum()) / sigma**2
            q = r**2 / sigma**2
            dfd = 0.5 * (stats.ncx2.cdf(q, df=dim + 2, nc=nc)
                         - stats.ncx2.cdf(q, df=dim, nc=nc))
            grad += dfd * 2.0 * diff / sigma**2
        return grad


@dataclass(frozen=True)
class HalfSpaceRegion:
    """Correctness = 1 where normal . x <= offset (normal is unit length)."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64)
        norm = np.linalg.norm(n)
        if norm == 0:
            raise ValueError("half-space normal must be nonzero")
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "offset", float(self.offset) / norm)

    def indicator(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return (pts @ self.normal <= self.offset).astype(np.float64)

    def smoothed(self, x: np.ndarray, sigma: float) -> float:
        return float(stats.norm.cdf((self.offset - x @ self.normal) / sigma))

    def smoothed_grad(self, x: np.ndarray, sigma: float) -> np.ndarray:
        z = (self.offset - x @ self.normal) / sigma
        return -stats.norm.pdf(z) / sigma * self.normal


@dataclass(frozen=True)
class Landscape:
    """A confidence field (Gaussian bumps + constant) plus a correctness region."""

    dimension: int
    bumps: tuple[GaussianBump, ...]
    corr_region: BallRegion | HalfSpaceRegion
    conf_offset: float = 0.0  # constant background confidence

    def __post_init__(self):
        object.__setattr__(self, "bumps", tuple(self.bumps))
        for b in self.bumps:
            if b.center.shape != (self.dimension,):
                raise ValueError(
                    f"bump center shape {b.center.shape} does not match "
                    f"dimension {self.dimension}"
                )

    def conf(self, points) -> np.ndarray:
        """Raw confidence field at one point or a batch of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        total = np.full(pts.shape[0], self.conf_offset)
        for b in self.bumps:
            d2 = ((pts - b.center) ** 2).sum(axis=-1)
            total += b.height * np.exp(-d2 / (2.0 * b.width**2))
        return total if np.asarray(points).ndim > 1 else float(total[0])

    def corr(self, points) -> np.ndarray:
        """Raw correctness field (indicator) at one point or a batch."""
        out = self.corr_region.indicator(np.asarray(points, dtype=np.float64))
        return out if np.asarray(points).ndim > 1 else float(out[0])


# ---------------------------------------------------------------------------
# smoothed fields: Monte Carlo and closed forms
# ---------------------------------------------------------------------------

def _validate_point(landscape: Landscape, point) -> np.ndarray:
    x = np.asarray(point, dtype=np.float64).reshape(-1)
    if x.shape != (landscape.dimension,):
        raise ValueError(
            f"point of dimension {x.size} on a {landscape.dimension}-d landscape"
        )
    return x


def smoothed_conf(landscape: Landscape, point, sigma: float,
                  num_samples: int, rng=None) -> float:
    """Monte Carlo estimate of J_conf: mean raw confidence over the policy cloud."""
    x = _validate_point(landscape, point)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if rng is None:
        rng = np.random.default_rng(0)
    eps = rng.standard_normal((num_samples, x.size)) * sigma
    return float(landscape.conf(x[None] + eps).mean())


def smoothed_corr(landscape: Landscape, point, sigma: float,
                  num_samples: int, rng=None) -> float:
    """Monte Carlo estimate of J_corr: mean raw correctness over the policy cloud."""
    x = _validate_point(landscape, point)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    if rng is None:
        rng = np.random.default_rng(0)
    eps = rng.standard_normal((num_samples, x.size)) * sigma
    return float(landscape.corr(x[None] + eps).mean())


def smoothed_conf_exact(landscape: Landscape, point, sigma: float) -> float:
    """Closed-form J_conf (Gaussian-convolved Gaussian bumps)."""
    x = _validate_point(landscape, point)
    total = landscape.conf_offset
    for b in landscape.bumps:
        s2 = b.width**2 + sigma**2
        amp = b.height * (b.width**2 / s2) ** (landscape.dimension / 2.0)
        total += amp * math.exp(-float(((x - b.center) ** 2).sum()) / (2.0 * s2))
    return total


def smoothed_conf_grad(landscape: Landscape, point, sigma: float) -> np.ndarray:
    """Analytic gradient of the closed-form J_conf."""
    x = _validate_point(landscape, point)
    grad = np.zeros_like(x)
    for b in landscape.bumps:
        s2 = b.width**2 + sigma**2
        amp = b.height * (b.width**2 / s2) ** (landscape.dimension / 2.0)
        diff = x - b.center
        grad += amp * math.exp(-float((diff**2).sum()) / (2.0 * s2)) * (-diff / s2)
    return grad


def smoothed_corr_exact(landscape: Landscape, point, sigma: float) -> float:
    """Closed-form J_corr for ball or half-space correctness regions."""
    x = _validate_point(landscape, point)
    return landscape.corr_region.smoothed(x, sigma)


def smoothed_corr_grad(landscape: Landscape, point, sigma: float) -> np.ndarray:
    """Analytic gradient of the closed-form J_corr."""
    x = _validate_point(landscape, point)
    return landscape.corr_region.smoothed_grad(x, sigma)


# ---------------------------------------------------------------------------
# gradient flow
# ---------------------------------------------------------------------------

@dataclass
class FlowTrajectory:
    """Euler ascent trajectory on J_conf with J_corr tracked alongside."""

    points: np.ndarray          # (T+1, D) including the start
    conf_values: np.ndarray     # (T+1,)
    corr_values: np.ndarray     # (T+1,)
    step_size: float
    terminal_grad_norm: float
    converged: bool
    diverged: bool = False


def flow_integrate(landscape: Landscape, start, step_size: float,
                   max_steps: int, grad_tol: float, sigma: float,
                   divergence_bound: float = 1e6) -> FlowTrajectory:
    """Explicit Euler ascent on the analytic gradient of J_conf.

    Stops when the gradient norm drops below ``grad_tol`` or after
    ``max_steps`` steps; trajectories whose norm explodes past
    ``divergence_bound`` are flagged instead of raising.
    """
    if not step_size > 0:
        raise ValueError(f"step_size must be positive, got {step_size}")
    x = _validate_point(landscape, start).copy()
    pts = [x.copy()]
    confs = [smoothed_conf_exact(landscape, x, sigma)]
    corrs = [smoothed_corr_exact(landscape, x, sigma)]
    converged = False
    diverged = False
    grad_norm = float(np.linalg.norm(smoothed_conf_grad(landscape, x, sigma)))
    for _ in range(max_steps):
        grad = smoothed_conf_grad(landscape, x, sigma)
        grad_norm = float(np.linalg.norm(grad))
        if grad_norm < grad_tol:
            converged = True
            break
        x = x + step_size * grad
        if not np.isfinite(x).all() or np.linalg.norm(x) > divergence_bound:
            diverged = True
            break
        pts.append(x.copy())
        confs.append(smoothed_conf_exact(landscape, x, sigma))
        corrs.append(smoothed_corr_exact(landscape, x, sigma))
    else:
        grad_norm = float(np.linalg.norm(smoothed_conf_grad(landscape, x, sigma)))
        converged = grad_norm < grad_tol
    return FlowTrajectory(
        points=np.array(pts),
        conf_values=np.array(confs),
        corr_values=np.array(corrs),
        step_size=step_size,
        terminal_grad_norm=grad_norm,
        converged=converged,
        diverged=diverged,
    )


def stochastic_flow(landscape: Landscape, start, step0: float, max_steps: int,
                    sigma: float, noise_std: float, rng) -> np.ndarray:
    """Ascent with decaying steps eta_t = step0 / (1 + t) and injected noise.

    Empirical companion to the deterministic flow: with square-summable but
    not summable steps the noisy iterates settle near the same attractor.
    Returns the terminal point.
    """
    x = _validate_point(landscape, start).copy()
    for t in range(max_steps):
        eta = step0 / (1.0 + t)
        grad = smoothed_conf_grad(landscape, x, sigma)
        x = x + eta * (grad + noise_std * rng.standard_normal(x.size))
    return x


# ---------------------------------------------------------------------------
# alignment condition and trap construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlignmentReport:
    dot: float
    predicted_sign: int
    observed_delta_corr: float
    agrees: bool


def alignment_check(landscape: Landscape, point, sigma: float,
                    eta: float) -> AlignmentReport:
    """One ascent step on J_conf versus the gradient-alignment prediction.

    Computes both analytic gradients and their dot product, takes the step
    ``eta * grad(J_conf)``, measures the resulting change in J_corr, and
    reports whether the sign of the change matches the sign of the dot
    product.  ``eta`` must be small relative to the local curvature scale
    for the first-order prediction to be meaningful.
    """
    x = _validate_point(landscape, point)
    g_conf = smoothed_conf_grad(landscape, x, sigma)
    g_corr = smoothed_corr_grad(landscape, x, sigma)
    dot = float(g_conf @ g_corr)
    before = smoothed_corr_exact(landscape, x, sigma)
    after = smoothed_corr_exact(landscape, x + eta * g_conf, sigma)
    delta = after - before
    predicted = int(np.sign(dot))
    agrees = bool(np.sign(delta) == predicted)
    return AlignmentReport(dot, predicted, delta, agrees)


def alignment_dead_band(landscape: Landscape, point, sigma: float,
                        eta: float) -> float:
    """Minimum |dot| below which a second-order term could flip the sign.

    The step changes J_corr by ``eta * dot + r`` with
    ``|r| <= eta^2 / 2 * |g_conf|^2 * M2`` for M2 a bound on the J_corr
    Hessian norm; trials with |dot| below that remainder bound are
    uninformative about the first-order prediction.  A conservative M2 for
    both region families is ``3 / sigma^2`` (the Hessian of any Gaussian-
    smoothed indicator is bounded by E|Z^2 - 1| / sigma^2 < 1 / sigma^2).
    The 1e-10 floor guards against dots so small that the measured J_corr
    difference sits below float64 resolution.
    """
    x = _validate_point(landscape, point)
    g_conf = smoothed_conf_grad(landscape, x, sigma)
    m2 = 3.0 / sigma**2
    return max(0.5 * eta * float(g_conf @ g_conf) * m2, 1e-10)


@dataclass
class TrapReport:
    """Outcome of the confidently-incorrect-trap demonstration."""

    landscape: Landscape
    sigma: float
    trap_point: np.ndarray
    good_point: np.ndarray
    trap_corr: float
    good_corr: float
    trials: int
    trapped: int                 # trajectories that ended at the trap
    monotone: int                # trajectories with non-decreasing J_conf
    terminal_grad_norms: np.ndarray
    control_corr_values: np.ndarray
    trajectories: list[FlowTrajectory] = field(default_factory=list)


def trap_landscape(sigma: float = 0.5) -> Landscape:
    """Canonical two-bump construction with a high-confidence wrong basin.

    The taller confidence bump sits away from the correctness ball, so the
    global maximizer of J_conf has J_corr near zero while a lower secondary
    maximizer sits inside the correct region.
    """
    del sigma  # geometry is fixed; sigma only affects the smoothed fields
    return Landscape(
        dimension=2,
        bumps=(
            GaussianBump(center=np.array([-2.0, 0.0]), height=1.0, width=0.8),
            GaussianBump(center=np.array([2.0, 0.0]), height=0.7, width=0.8),
        ),
        corr_region=BallRegion(centers=np.array([[2.0, 0.0]]), radii=np.array([1.2])),
    )


def _locate_maximum(landscape: Landscape, start, sigma: float) -> np.ndarray:
    traj = flow_integrate(landscape, start, step_size=0.02, max_steps=200_000,
                          grad_tol=1e-12, sigma=sigma)
    return traj.points[-1]


def trap_demo(trials: int = 50, seed: int = 0, sigma: float = 0.5,
              step_size: float = 0.05, max_steps: int = 20_000,
              grad_tol: float = 1e-6, keep_trajectories: bool = False) -> TrapReport:
    """Drive seeded basin initializations into the confidently-wrong maximizer.

    Starts ``trials`` points inside the trap basin (a disk around the tall
    bump) plus control points in the correct basin, integrates the J_conf
    ascent flow for each, and reports convergence, J_conf monotonicity along
    every trajectory (up to step_size^2 per step), and the terminal J_corr
    values of both groups.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    scape = trap_landscape(sigma)
    trap_point = _locate_maximum(scape, np.array([-2.0, 0.0]), sigma)
    good_point = _locate_maximum(scape, np.array([2.0, 0.0]), sigma)
    rng = np.random.default_rng(seed)

    trapped = 0
    monotone = 0
    terminal_norms = np.zeros(trials)
    trajectories = []
    for i in range(trials):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = rng.uniform(0.0, 1.0)
        start = np.array([-2.0, 0.0]) + radius * np.array(
            [np.cos(angle), np.sin(angle)]
        )
        traj = flow_integrate(scape, start, step_size, max_steps, grad_tol, sigma)
        terminal_norms[i] = traj.terminal_grad_norm
        if np.linalg.norm(traj.points[-1] - trap_point) < 1e-3:
            trapped += 1
        if (np.diff(traj.conf_values) >= -step_size**2).all():
            monotone += 1
        if keep_trajectories:
            trajectories.append(traj)

    controls = []
    for i in range(10):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        radius = rng.uniform(0.0, 0.8)
        start = np.array([2.0, 0.0]) + radius * np.array(
            [np.cos(angle), np.sin(angle)]
        )
        traj = flow_integrate(scape, start, step_size, max_steps, grad_tol, sigma)
        controls.append(smoothed_corr_exact(scape, traj.points[-1], sigma))

    return TrapReport(
        landscape=scape,
        sigma=sigma,
        trap_point=trap_point,
        good_point=good_point,
        trap_corr=smoothed_corr_exact(scape, trap_point, sigma),
        good_corr=smoothed_corr_exact(scape, good_point, sigma),
        trials=trials,
        trapped=trapped,
        monotone=monotone,
        terminal_grad_norms=terminal_norms,
        control_corr_values=np.array(controls),
        trajectories=trajectories,
    )


@dataclass(frozen=True)
class AlignmentTrial:
    dot: float
    delta_corr: float
    agrees: bool
    dead_band: float
    informative: bool  # |dot| above the dead band


def alignment_trials(num_trials: int, seed: int, eta: float = 1e-4,
                     sigma: float = 0.5, dimension: int = 2) -> list[AlignmentTrial]:
    """Randomized alignment checks on freshly sampled bump landscapes.

    Each trial draws a landscape, evaluates near one of its bumps (where
    both gradients are well scaled) and records whether the sign of the
    J_corr change matches the sign of the gradient dot product.  Trials
    whose |dot| falls inside the second-order dead band are marked
    uninformative and excluded from agreement statistics.
    """
    rng = np.random.default_rng(seed)
    trials = []
    for _ in range(num_trials):
        region = "ball" if rng.random() < 0.5 else "half"
        scape = random_landscape(rng, dimension=dimension, region=region)
        bump = scape.bumps[rng.integers(len(scape.bumps))]
        point = bump.center + rng.standard_normal(dimension) * bump.width
        report = alignment_check(scape, point, sigma, eta)
        band = alignment_dead_band(scape, point, sigma, eta)
        trials.append(AlignmentTrial(
            dot=report.dot,
            delta_corr=report.observed_delta_corr,
            agrees=report.agrees,
            dead_band=band,
            informative=abs(report.dot) > band,
        ))
    return trials


def random_landscape(rng, dimension: int = 2, num_bumps: int = 3,
                     region: str = "ball") -> Landscape:
    """Randomized landscape for property trials (bumps plus one region)."""
    bumps = tuple(
        GaussianBump(
            center=rng.uniform(-3.0, 3.0, size=dimension),
            height=rng.uniform(0.3, 1.5),
            width=rng.uniform(0.5, 1.5),
        )
        for _ in range(num_bumps)
    )
    if region == "ball":
        corr = BallRegion(
            centers=rng.uniform(-3.0, 3.0, size=(1, dimension)),
            radii=np.array([rng.uniform(0.5, 1.5)]),
        )
    else:
        normal = rng.standard_normal(dimension)
        corr = HalfSpaceRegion(normal=normal, offset=rng.uniform(-2.0, 2.0))
    return Landscape(dimension=dimension, bumps=bumps, corr_region=corr)
