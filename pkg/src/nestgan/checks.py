"""Runtime property suites behind the `check` CLI command.

Each check re-verifies one contract the library leans on: activation
round trips, projection geometry, gradient/finite-difference agreement,
stationarity and concavity of the inner problem, and the generic
optimizer's contraction.  `quick` keeps sample sizes small enough for a
couple of minutes on a laptop; `full` raises them and adds the
dimension-scaling and smoothness probes.  The `corrupt` argument is a
test hook that deliberately breaks one gradient so the harness's failure
path can be exercised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .activations import ActivationSpec
from .bpsgd import BpsgdSchedule, biased_projected_sgd
from .config import random_spd_target
from .discriminator import (
    DiscriminatorParams,
    hessian_probe,
    optimal_discriminator,
    pair_gradient,
    two_sample_loss,
)
from .metrics import fd_gradient_check, fosp_residual, virtual_criterion
from .model import TargetSpec, estimate_region_mass, sample_p, sample_target
from .projections import (
    ProjectionSets,
    in_generator_set,
    project_discriminator,
    project_generator_matrix,
    sample_generator_point,
    verify_containment,
)
from .rng import RngStream
from .training import generator_gradient, generator_loss


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _testbed(d: int = 3, c: float = 0.5, kind: str = "sigmoid", seed: int = 11):
    activation = ActivationSpec(kind, d)
    S = random_spd_target(c, d, RngStream(seed, stream_id=3))
    target = TargetSpec(S, activation, c)
    ps = ProjectionSets.from_closeness(c, d)
    return target, ps


def check_activation_round_trip(rng: RngStream, n: int) -> CheckResult:
    worst = 0.0
    specs = [
        ActivationSpec.relu(3),
        ActivationSpec.sigmoid(3),
        ActivationSpec.identity_box([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0]),
    ]
    for spec in specs:
        count = 0
        stream = rng.child(hash(spec.kind) % 1000)
        while count < n:
            x = stream.standard_normal(3)
            if not spec.in_region(x):
                continue
            count += 1
            err = np.max(np.abs(spec.inverse(spec.forward(x)) - x))
            worst = max(worst, float(err))
    return CheckResult("activation_round_trip", worst <= 1e-12, f"max |x - inv(fwd(x))| = {worst:.2e}")


def check_membership_consistency(rng: RngStream, n: int) -> CheckResult:
    specs = [
        ActivationSpec.relu(4),
        ActivationSpec.sigmoid(4),
        ActivationSpec.identity_box([-0.5] * 4, [1.5] * 4),
    ]
    bad = 0
    for i, spec in enumerate(specs):
        X = rng.child(i).standard_normal((n, 4))
        fwd = np.stack([spec.forward(x) for x in X])
        bad += int(np.sum(spec.image_mask(fwd) != spec.region_mask(X)))
    return CheckResult("membership_consistency", bad == 0, f"{bad} mismatches over {3 * n} points")


def check_rng_streams(rng: RngStream, n: int) -> CheckResult:
    a = RngStream(123, 5).standard_normal(n)
    b = RngStream(123, 5).standard_normal(n)
    c = RngStream(123, 6).standard_normal(n)
    same = bool(np.all(a == b))
    distinct = bool(np.any(a != c))
    return CheckResult(
        "rng_streams", same and distinct,
        f"replay identical: {same}, distinct streams differ: {distinct}",
    )


def check_factorizations(rng: RngStream, trials: int) -> CheckResult:
    worst = 0.0
    for i in range(trials):
        stream = rng.child(i)
        d = int(stream.integers(2, 6))
        G = stream.normal_matrix(d)
        S = G @ G.T + 0.5 * np.eye(d)
        L = linalg.cholesky(S)
        worst = max(worst, linalg.frobenius(L @ L.T - S) / linalg.frobenius(S))
        lam, Q = linalg.sym_eig(S)
        worst = max(
            worst,
            linalg.frobenius((Q * lam) @ Q.T - S) / (1.0 + linalg.frobenius(S)),
        )
        M = stream.normal_matrix(d)
        got, sign = linalg.log_det(M)
        want, want_sign = linalg.lu_log_det(M)
        worst = max(worst, abs(got - want) / max(abs(want), 1.0))
        if sign != want_sign:
            return CheckResult("factorizations", False, "determinant sign mismatch")
    return CheckResult("factorizations", worst <= 1e-8, f"worst relative error {worst:.2e}")


def check_quadratic_form_bound(rng: RngStream, trials: int, n: int) -> CheckResult:
    """MC E|x^T A x| stays below sqrt(2) |A|_F plus 3 standard errors."""
    d = 5
    for i in range(trials):
        stream = rng.child(i)
        A = stream.normal_matrix(d)
        X = stream.standard_normal((n, d))
        vals = np.abs(np.einsum("ni,ij,nj->n", X, A, X))
        est = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(n))
        if est > math.sqrt(2.0) * linalg.frobenius(A) + 3.0 * se:
            return CheckResult(
                "quadratic_form_bound", False,
                f"estimate {est:.4f} exceeds bound at trial {i}",
            )
    return CheckResult("quadratic_form_bound", True, f"{trials} random matrices within bound")


def check_disc_projection(rng: RngStream, pairs: int) -> CheckResult:
    _, ps = _testbed()
    d = 3
    worst_idem = 0.0
    expansive = 0
    for i in range(pairs):
        stream = rng.child(i)
        A1, b1 = 40.0 * stream.normal_matrix(d), float(40.0 * stream.standard_normal(1)[0])
        A2, b2 = 40.0 * stream.normal_matrix(d), float(40.0 * stream.standard_normal(1)[0])
        p1 = project_discriminator(A1, b1, ps)
        p2 = project_discriminator(A2, b2, ps)
        again = project_discriminator(p1.A, p1.b, ps)
        worst_idem = max(worst_idem, linalg.frobenius(again.A - p1.A) + abs(again.b - p1.b))
        before = math.sqrt(
            linalg.frobenius(linalg.symmetrize(A1) - linalg.symmetrize(A2)) ** 2 + (b1 - b2) ** 2
        )
        after = math.sqrt(linalg.frobenius(p1.A - p2.A) ** 2 + (p1.b - p2.b) ** 2)
        if after > before + 1e-12:
            expansive += 1
    ok = worst_idem <= 1e-12 and expansive == 0
    return CheckResult(
        "disc_projection", ok,
        f"idempotency error {worst_idem:.2e}, {expansive} expansive pairs",
    )


def check_gen_projection(rng: RngStream, trials: int) -> CheckResult:
    _, ps = _testbed()
    worst_feas = -np.inf
    worst_idem = 0.0
    for i in range(trials):
        stream = rng.child(i)
        W = np.eye(3) + 2.0 * stream.normal_matrix(3)
        P = project_generator_matrix(W, ps)
        from .projections import generator_violation

        worst_feas = max(worst_feas, generator_violation(P, ps))
        P2 = project_generator_matrix(P, ps)
        worst_idem = max(worst_idem, linalg.frobenius(P2 - P))
    ok = worst_feas <= 1e-9 and worst_idem <= 1e-8
    return CheckResult(
        "gen_projection", ok,
        f"worst violation {worst_feas:.2e}, idempotency error {worst_idem:.2e}",
    )


def check_optimal_containment(rng: RngStream, n: int) -> CheckResult:
    target, ps = _testbed()
    try:
        verify_containment(ps, target, n, rng)
    except ValueError as exc:
        return CheckResult("optimal_containment", False, str(exc))
    return CheckResult("optimal_containment", True, f"{n} sampled generators contained")


def check_pair_gradient_fd(rng: RngStream, points: int, corrupt: str | None) -> CheckResult:
    target, ps = _testbed()
    act = target.activation
    d = target.dim
    worst = 0.0
    for i in range(points):
        stream = rng.child(i)
        params = DiscriminatorParams(0.3 * stream.normal_matrix(d), float(stream.standard_normal(1)[0]) * 0.3)
        x_real = sample_target(target, stream.child(1), 1)[0]
        y_fake = sample_p(sample_generator_point(ps, stream.child(2)), act, stream.child(3), 1)[0]
        grad_A, grad_b = pair_gradient(params, act, x_real, y_fake)
        if corrupt == "pair_gradient":
            grad_A = -grad_A
        theta = np.concatenate([params.A.ravel(), [params.b]])

        def loss_at(vec):
            A = linalg.symmetrize(vec[:-1].reshape(d, d))
            return two_sample_loss(DiscriminatorParams(A, float(vec[-1])), act, x_real, y_fake)

        # loss_at symmetrizes its input, so the chain rule maps the symmetric
        # gradient straight onto the flat parametrization entry by entry
        analytic = np.concatenate([grad_A.ravel(), [grad_b]])
        worst = max(worst, fd_gradient_check(loss_at, analytic, theta, h=1e-5))
    return CheckResult(
        "pair_gradient_matches_fd", worst <= 1e-5, f"max relative error {worst:.2e}"
    )


def check_generator_gradient_fd(rng: RngStream, points: int, corrupt: str | None) -> CheckResult:
    target, ps = _testbed()
    act = target.activation
    d = target.dim
    worst = 0.0
    for i in range(points):
        stream = rng.child(i)
        W = sample_generator_point(ps, stream)
        params = optimal_discriminator(W, target)
        Z = stream.child(1).standard_normal((40, d))
        grad = np.zeros((d, d))
        for z in Z:
            grad += generator_gradient(W, params.A, params.b, z, act)
        grad /= len(Z)
        if corrupt == "generator_gradient":
            grad = -grad

        def loss_at(mat):
            return generator_loss(mat.reshape(d, d), params.A, params.b, Z, act)

        worst = max(worst, fd_gradient_check(loss_at, grad, W, h=1e-5))
    return CheckResult(
        "generator_gradient_matches_fd", worst <= 1e-5, f"max relative error {worst:.2e}"
    )


def check_optimum_stationarity(rng: RngStream, points: int, n: int) -> CheckResult:
    """Mean pair gradient at the closed-form optimum is zero within 3 SE."""
    target, ps = _testbed()
    act = target.activation
    d = target.dim
    for i in range(points):
        stream = rng.child(i)
        W = sample_generator_point(ps, stream)
        opt = optimal_discriminator(W, target)
        real_pre = stream.child(1).standard_normal((n, d)) @ target.sqrt_sigma.T
        fake_pre = stream.child(2).standard_normal((n, d)) @ np.asarray(W).T
        grads = _mean_pair_gradient(opt, real_pre, fake_pre, act)
        mean_vec, se = grads
        norm = float(np.linalg.norm(mean_vec))
        if norm > 3.0 * se:
            return CheckResult(
                "optimum_stationarity", False,
                f"|mean grad| = {norm:.4g} > 3 SE = {3 * se:.4g} at point {i}",
            )
    return CheckResult("optimum_stationarity", True, f"{points} generators stationary within 3 SE")


def _mean_pair_gradient(params, real_pre, fake_pre, activation, batches: int = 20):
    """Vectorized mean pair gradient over pre-activation sample rows."""
    n, d = real_pre.shape
    real_mask = activation.region_mask(real_pre).astype(float)
    fake_mask = activation.region_mask(fake_pre).astype(float)
    k = np.einsum("ni,ij,nj->n", real_pre, params.A, real_pre) + params.b
    q = np.einsum("ni,ij,nj->n", fake_pre, params.A, fake_pre) + params.b
    w_real = real_mask / (1.0 + np.exp(np.clip(k, -500, 500)))
    w_fake = fake_mask / (1.0 + np.exp(-np.clip(q, -500, 500)))
    feats_real = (real_pre[:, :, None] * real_pre[:, None, :]).reshape(n, d * d)
    feats_fake = (fake_pre[:, :, None] * fake_pre[:, None, :]).reshape(n, d * d)
    per_sample = np.concatenate(
        [w_real[:, None] * feats_real - w_fake[:, None] * feats_fake,
         (w_real - w_fake)[:, None]], axis=1,
    )
    mean_vec = per_sample.mean(axis=0)

    batch_means = np.stack([chunk.mean(axis=0) for chunk in np.array_split(per_sample, batches)])
    se = float(np.sqrt(np.sum(np.var(batch_means, axis=0, ddof=1) / batches)))
    return mean_vec, se


def check_concavity(rng: RngStream, points: int, n: int) -> CheckResult:
    """Hessian probe max eigenvalue stays below -0.01 plus 3 SE margin.

    Eigenvalues are taken on the symmetric-(A, b) subspace; the flat
    parametrization is exactly flat along antisymmetric directions, which
    the parameters never leave.  Probe points are drawn at the magnitudes
    training visits (the closed-form optima have order-one norms); far
    out toward the admissible boundary the sigmoid saturates and the
    curvature decays exponentially, so a fixed -0.01 floor is a statement
    about the visited region, not the whole set.
    """
    from .discriminator import symmetric_subspace_max_eigenvalue

    target, ps = _testbed()
    worst = -np.inf
    for i in range(points):
        stream = rng.child(i)
        A = 0.5 * stream.normal_matrix(3)
        params = project_discriminator(A, float(stream.standard_normal(1)[0]), ps)
        W = sample_generator_point(ps, stream.child(1))
        H, batch_hs = hessian_probe(params, target.activation, W, target, n, stream.child(2), batches=20)
        lam_max, top = symmetric_subspace_max_eigenvalue(H, 3)
        batch_vals = np.array([top @ Hb @ top for Hb in batch_hs])
        se = float(np.std(batch_vals, ddof=1) / math.sqrt(len(batch_vals)))
        if lam_max + 3.0 * se > -0.01:
            return CheckResult(
                "inner_strong_concavity", False,
                f"max eigenvalue {lam_max:.4f} + 3 SE {3 * se:.4f} > -0.01 at point {i}",
            )
        worst = max(worst, lam_max + 3.0 * se)
    return CheckResult("inner_strong_concavity", True, f"worst margin eigenvalue {worst:.4f}")


def check_bpsgd_contraction(rng: RngStream) -> CheckResult:
    sched = BpsgdSchedule(iterations=4000, step=0.1)

    def oracle(x, _rng):
        return 2.0 * x

    def project(x):
        nrm = np.linalg.norm(x)
        return x if nrm <= 10.0 else x * (10.0 / nrm)

    final, m = biased_projected_sgd(oracle, project, np.full(4, 5.0), sched, rng)
    ok = np.linalg.norm(final) <= 0.01 or m < 40
    return CheckResult("bpsgd_contraction", bool(ok), f"|x| = {np.linalg.norm(final):.2e} after m = {m}")


def check_region_mass(rng: RngStream, n: int) -> CheckResult:
    import scipy.stats

    act = ActivationSpec.relu(2)
    est, se = estimate_region_mass(np.eye(2), act, n, rng.child(0))
    if abs(est - 0.25) > 4.0 * max(se, 1e-6):
        return CheckResult("region_mass", False, f"orthant mass {est:.4f} vs 0.25")
    box = ActivationSpec.identity_box([-1.0, -1.0], [1.0, 1.0])
    est_box, se_box = estimate_region_mass(np.eye(2), box, n, rng.child(1))
    want = (scipy.stats.norm.cdf(1.0) - scipy.stats.norm.cdf(-1.0)) ** 2
    if abs(est_box - want) > 4.0 * max(se_box, 1e-6):
        return CheckResult("region_mass", False, f"box mass {est_box:.4f} vs {want:.4f}")
    return CheckResult("region_mass", True, f"orthant {est:.4f}~0.25, box {est_box:.4f}~{want:.4f}")


def generator_second_moment(d: int, n: int, rng: RngStream, op_norm: float = 0.4, bias: float = -1.5) -> float:
    """Monte Carlo E |generator gradient|_F^2 at a spectrum-exercising point.

    The probe fixes W = I and a discriminator with full alternating
    +-op_norm spectrum and negative bias: the configuration in the
    admissible sets under which the gradient's second moment follows its
    d^2 envelope (a spectrum with few active directions scales only
    linearly, which is why the envelope is a worst case).
    """
    Z = rng.standard_normal((n, d))
    signs = np.array([1.0 if i % 2 == 0 else -1.0 for i in range(d)])
    h = op_norm * (Z**2 @ signs) + bias
    sig = 1.0 / (1.0 + np.exp(-np.clip(h, -500, 500)))
    # A = op_norm diag(signs), W = I: |A W z|^2 = op_norm^2 |z|^2
    return float(np.mean(4.0 * sig**2 * op_norm**2 * np.sum(Z**2, axis=1) ** 2))


def check_second_moment_scaling(rng: RngStream, n: int) -> CheckResult:
    """E |generator gradient|^2 grows like d^2 (log-log slope <= 2.3)."""
    dims = (2, 4, 8)
    moments = [generator_second_moment(d, n, rng.child(d)) for d in dims]
    slope = np.polyfit(np.log(dims), np.log(moments), 1)[0]
    ok = 1.0 <= slope <= 2.3
    return CheckResult("second_moment_scaling", bool(ok), f"log-log slope {slope:.3f}")


def check_smoothness_probe(rng: RngStream, directions: int, points: int) -> CheckResult:
    """FD curvature of the Monte Carlo objective is finite and stable in n."""
    target, ps = _testbed(d=2, c=0.5)
    h = 0.05
    stats = []
    for n in (4000, 8000):
        worst = 0.0
        for i in range(points):
            stream = rng.child(1000 * points + i)
            W = sample_generator_point(ps, stream)
            for j in range(directions):
                E = stream.child(j).normal_matrix(2)
                E /= linalg.frobenius(E)
                vals = []
                for offset in (-h, 0.0, h):
                    v, _ = virtual_criterion(W + offset * E, target, n=n, rng=stream.child(100 + j))
                    vals.append(v)
                second = (vals[0] - 2.0 * vals[1] + vals[2]) / h**2
                if not np.isfinite(second):
                    return CheckResult("smoothness_probe", False, "non-finite curvature")
                worst = max(worst, abs(second))
        stats.append(worst)
    stable = stats[1] <= 3.0 * stats[0] + 1.0
    return CheckResult(
        "smoothness_probe", bool(stable),
        f"max |curvature| = {stats[0]:.2f} (n=4000), {stats[1]:.2f} (n=8000)",
    )


def check_matched_residual(rng: RngStream) -> CheckResult:
    act = ActivationSpec.sigmoid(2)
    target = TargetSpec(np.eye(2), act, 0.2)
    res, se = fosp_residual(np.eye(2), target, n=2000, rng=rng)
    ok = res <= 3.0 * se + 1e-12
    return CheckResult("matched_covariance_residual", bool(ok), f"residual {res:.2e}, 3 SE {3 * se:.2e}")


def run_checks(level: str = "quick", corrupt: str | None = None, seed: int = 0) -> list[CheckResult]:
    if level not in ("quick", "full"):
        raise ValueError("level must be 'quick' or 'full'")
    rng = RngStream(seed, stream_id=42)
    full = level == "full"
    results = [
        check_activation_round_trip(rng.child(1), 400 if full else 150),
        check_membership_consistency(rng.child(2), 10_000 if full else 3000),
        check_rng_streams(rng.child(3), 1000),
        check_factorizations(rng.child(4), 40 if full else 15),
        check_quadratic_form_bound(rng.child(5), 50 if full else 10, 100_000 if full else 20_000),
        check_disc_projection(rng.child(6), 1000 if full else 200),
        check_gen_projection(rng.child(7), 200 if full else 60),
        check_optimal_containment(rng.child(8), 1000 if full else 150),
        check_pair_gradient_fd(rng.child(9), 10 if full else 5, corrupt),
        check_generator_gradient_fd(rng.child(10), 8 if full else 4, corrupt),
        check_optimum_stationarity(rng.child(11), 6 if full else 3, 100_000 if full else 30_000),
        check_concavity(rng.child(12), 20 if full else 5, 20_000 if full else 6000),
        check_bpsgd_contraction(rng.child(13)),
        check_matched_residual(rng.child(14)),
        check_region_mass(rng.child(15), 100_000 if full else 30_000),
    ]
    if full:
        results.append(check_second_moment_scaling(rng.child(16), 40_000))
        results.append(check_smoothness_probe(rng.child(17), directions=6, points=3))
    return results
