"""Compiled forward rollout + reverse accumulation used inside the solver.

Numerically the same computation as :mod:`pdo_ik.kinematics` and
:mod:`pdo_ik.gradient`, fused into one pass over packed arrays so a single
evaluation costs microseconds instead of a Python loop per factor.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .constraints import ComBox, as_cloud, constraint_count
from .kinematics import L_EPS, GoalSpec
from .robot import DecompositionPlan, RobotModel

KIND_DISTANCE = 0
KIND_ANGLE = 1


@njit(cache=True, inline="always")
def _matmul(A, B, out):
    for r in range(4):
        a0, a1, a2, a3 = A[r, 0], A[r, 1], A[r, 2], A[r, 3]
        for c in range(4):
            out[r, c] = a0 * B[0, c] + a1 * B[1, c] + a2 * B[2, c] + a3 * B[3, c]


@njit(cache=True, inline="always")
def _matmul_bt(A, B, out):
    # A @ B.T
    for r in range(4):
        for c in range(4):
            out[r, c] = A[r, 0] * B[c, 0] + A[r, 1] * B[c, 1] + A[r, 2] * B[c, 2] + A[r, 3] * B[c, 3]


@njit(cache=True, inline="always")
def _sigmoid(w):
    if w >= 0.0:
        return 1.0 / (1.0 + math.exp(-w))
    e = math.exp(w)
    return e / (1.0 + e)


@njit(cache=True)
def _evaluate(omega, kind, fparams, starts, tails, base, ee, coef, goal_pts,
              obs, radii, semi, masses, com_h, com_box, mu, rho, want_grad,
              grad, cvals, prefix, factors, xs, sig, joint_world, seeds):
    n_f = omega.shape[0]
    m = starts.shape[0] - 1
    n = obs.shape[0]
    tmp = np.empty((4, 4))
    T = base.copy()

    # forward: squash, build factors, propagate base -> end effector
    for i in range(m):
        for k in range(starts[i], starts[i + 1]):
            s = _sigmoid(omega[k])
            sig[k] = s
            lo, hi = fparams[k, 3], fparams[k, 4]
            x = (hi - lo) * s + lo
            if x <= lo:
                x = np.nextafter(lo, np.inf)
            elif x >= hi:
                x = np.nextafter(hi, -np.inf)
            xs[k] = x
            if kind == KIND_DISTANCE:
                c = 1.0 - x
                sn = math.sqrt(max(x * (2.0 - x), 0.0))
            else:
                c = math.cos(x)
                sn = math.sin(x)
            ca = math.cos(fparams[k, 0])
            sa = math.sin(fparams[k, 0])
            F = factors[k]
            F[0, 0] = c; F[0, 1] = -sn; F[0, 2] = 0.0; F[0, 3] = fparams[k, 1]
            F[1, 0] = sn * ca; F[1, 1] = c * ca; F[1, 2] = -sa; F[1, 3] = -fparams[k, 2] * sa
            F[2, 0] = sn * sa; F[2, 1] = c * sa; F[2, 2] = ca; F[2, 3] = fparams[k, 2] * ca
            F[3, 0] = 0.0; F[3, 1] = 0.0; F[3, 2] = 0.0; F[3, 3] = 1.0
            prefix[k] = T
            _matmul(T, F, tmp)
            T[:, :] = tmp
        _matmul(T, tails[i], tmp)
        T[:, :] = tmp
        joint_world[i] = T
    Te = np.empty((4, 4))
    _matmul(T, ee, Te)

    seeds[:, :, :] = 0.0
    gte = np.zeros((4, 4))
    value = 0.0

    # objective
    for p in range(coef.shape[0]):
        for r in range(3):
            d = Te[r, 3] + coef[p, 0] * Te[r, 0] + coef[p, 1] * Te[r, 1] - goal_pts[p, r]
            value += 0.5 * d * d
            gte[r, 0] += coef[p, 0] * d
            gte[r, 1] += coef[p, 1] * d
            gte[r, 3] += d

    # collision constraints
    dists = np.empty((m, n))
    for i in range(m):
        ux, uy, uz = joint_world[i, 0, 3], joint_world[i, 1, 3], joint_world[i, 2, 3]
        r_i = radii[i]
        for j in range(n):
            dx = ux - obs[j, 0]
            dy = uy - obs[j, 1]
            dz = uz - obs[j, 2]
            dist = math.sqrt(dx * dx + dy * dy + dz * dz)
            dists[i, j] = dist
            c = r_i - dist
            idx = i * n + j
            cvals[idx] = c
            if c > 0.0:
                value += mu[idx] * c + 0.5 * rho * c * c
                if want_grad and dist > 0.0:
                    w = (mu[idx] + rho * c) / dist
                    seeds[i, 0, 3] -= w * dx
                    seeds[i, 1, 3] -= w * dy
                    seeds[i, 2, 3] -= w * dz
    off = m * n
    for i in range(m - 1):
        two_a = 2.0 * semi[i]
        for j in range(n):
            c = two_a - dists[i, j] - dists[i + 1, j]
            idx = off + i * n + j
            cvals[idx] = c
            if c > 0.0:
                value += mu[idx] * c + 0.5 * rho * c * c
                if want_grad:
                    w = mu[idx] + rho * c
                    for e in range(2):
                        q = i + e
                        dist = dists[q, j]
                        if dist > 0.0:
                            s = w / dist
                            seeds[q, 0, 3] -= s * (joint_world[q, 0, 3] - obs[j, 0])
                            seeds[q, 1, 3] -= s * (joint_world[q, 1, 3] - obs[j, 1])
                            seeds[q, 2, 3] -= s * (joint_world[q, 2, 3] - obs[j, 2])

    # CoM box
    if com_box.shape[0] == 6:
        off = (2 * m - 1) * n
        total = 0.0
        com = np.zeros(3)
        for i in range(m):
            total += masses[i]
            for r in range(3):
                acc = 0.0
                for q in range(4):
                    acc += joint_world[i, r, q] * com_h[i, q]
                com[r] += masses[i] * acc
        dcom = np.zeros(3)
        for r in range(3):
            com[r] /= total
            c_lo = com_box[r] - com[r]
            c_hi = com[r] - com_box[3 + r]
            for e, c in ((0, c_lo), (1, c_hi)):
                idx = off + 2 * r + e
                cvals[idx] = c
                if c > 0.0:
                    value += mu[idx] * c + 0.5 * rho * c * c
                    w = mu[idx] + rho * c
                    dcom[r] += w if e == 1 else -w
        if want_grad:
            for i in range(m):
                sc = masses[i] / total
                for r in range(3):
                    for q in range(4):
                        seeds[i, r, q] += sc * dcom[r] * com_h[i, q]

    if not want_grad:
        return value

    # backward: adjoints from the end effector to the base
    _matmul_bt(gte, ee, tmp)
    for r in range(4):
        for q in range(4):
            seeds[m - 1, r, q] += tmp[r, q]
    adj = np.zeros((4, 4))
    dfdx = np.zeros((4, 4))
    for i in range(m - 1, -1, -1):
        for r in range(4):
            for q in range(4):
                adj[r, q] += seeds[i, r, q]
        _matmul_bt(adj, tails[i], tmp)
        adj[:, :] = tmp
        for k in range(starts[i + 1] - 1, starts[i] - 1, -1):
            x = xs[k]
            ca = math.cos(fparams[k, 0])
            sa = math.sin(fparams[k, 0])
            if kind == KIND_DISTANCE:
                xc = min(max(x, L_EPS), 2.0 - L_EPS)
                t = (1.0 - xc) / math.sqrt(xc * (2.0 - xc))
                d00, d01, d10, d11 = -1.0, -t, t, -1.0
            else:
                d00, d01, d10, d11 = -math.sin(x), -math.cos(x), math.cos(x), -math.sin(x)
            # rows of dF/dx: [d00, d01], [ca*d10, ca*d11], [sa*d10, sa*d11]; rest zero
            # sum(P^T adj * D) = sum_rc adj[r,c] * (P @ D)[r,c]
            P = prefix[k]
            acc = 0.0
            for r in range(4):
                pd0 = P[r, 0] * d00 + P[r, 1] * ca * d10 + P[r, 2] * sa * d10
                pd1 = P[r, 0] * d01 + P[r, 1] * ca * d11 + P[r, 2] * sa * d11
                acc += adj[r, 0] * pd0 + adj[r, 1] * pd1
            grad[k] = acc * (fparams[k, 4] - fparams[k, 3]) * sig[k] * (1.0 - sig[k])
            _matmul_bt(adj, factors[k], tmp)
            adj[:, :] = tmp
    return value


class FastEvaluator:
    """Packed problem data plus scratch buffers for :func:`_evaluate`."""

    def __init__(
        self,
        model: RobotModel,
        plan: DecompositionPlan,
        goal: GoalSpec,
        obstacles=None,
        com_box: ComBox | None = None,
    ):
        from .kinematics import factor_dh, joint_tail

        self.model, self.plan, self.goal = model, plan, goal
        self.obstacles = np.ascontiguousarray(as_cloud(obstacles))
        self.com_box = com_box
        n_f, m = plan.n_slack, model.n_joints
        self.kind = KIND_ANGLE if plan.kind == "angle" else KIND_DISTANCE
        fp = np.empty((n_f, 5))
        for k in range(n_f):
            dh = factor_dh(model, plan, k)
            fp[k] = (dh.alpha, dh.a, dh.d, plan.lower[k], plan.upper[k])
        self.fparams = fp
        self.starts = np.ascontiguousarray(plan.starts, dtype=np.int64)
        self.tails = np.array([joint_tail(plan, i) for i in range(m)])
        self.base = np.ascontiguousarray(model.base_transform)
        self.ee = np.ascontiguousarray(model.ee_offset)
        self.coef = np.ascontiguousarray(goal.coefficients)
        self.goal_pts = np.ascontiguousarray(goal.points)
        self.radii = model.radii
        self.semi = model.semi_majors if m > 1 else np.zeros(0)
        if com_box is not None:
            self.masses = model.masses
            self.com_h = np.ascontiguousarray(model.com_points)
            self.box = np.concatenate([com_box.lower, com_box.upper])
        else:
            self.masses = np.zeros(m)
            self.com_h = np.zeros((m, 4))
            self.box = np.zeros(0)
        self.n_constraints = constraint_count(model, len(self.obstacles), com_box is not None)
        self._grad = np.empty(n_f)
        self._c = np.empty(self.n_constraints)
        self._prefix = np.empty((n_f, 4, 4))
        self._factors = np.empty((n_f, 4, 4))
        self._xs = np.empty(n_f)
        self._sig = np.empty(n_f)
        self._world = np.empty((m, 4, 4))
        self._seeds = np.empty((m, 4, 4))

    def _call(self, omega, mu, rho, want_grad):
        return _evaluate(
            np.ascontiguousarray(omega, dtype=np.float64), self.kind, self.fparams, self.starts,
            self.tails, self.base, self.ee, self.coef, self.goal_pts, self.obstacles, self.radii,
            self.semi, self.masses, self.com_h, self.box, mu, float(rho), want_grad,
            self._grad, self._c, self._prefix, self._factors, self._xs, self._sig,
            self._world, self._seeds,
        )

    def value_and_grad(self, omega, mu, rho) -> tuple[float, np.ndarray]:
        value = self._call(omega, mu, rho, True)
        return value, self._grad.copy()

    def value(self, omega, mu, rho) -> float:
        return self._call(omega, mu, rho, False)

    def constraints(self, omega) -> np.ndarray:
        """Constraint vector at ``omega`` (layout as in :mod:`pdo_ik.constraints`)."""
        self._call(omega, np.zeros(self.n_constraints), 1.0, False)
        return self._c.copy()

    def objective(self, omega) -> float:
        mu = np.zeros(self.n_constraints)
        value = self._call(omega, mu, 1.0, False)
        c = np.maximum(self._c, 0.0)
        return value - 0.5 * float(c @ c)
