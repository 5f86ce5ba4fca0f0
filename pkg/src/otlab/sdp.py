"""Cheating semidefinite programs for round-structured protocols.

``build_cheating_sdp`` produces the chain program whose optimal value is the
probability that the cheating party forces a chosen outcome of the honest
party: PSD variables are the honest side's reduced states after each message
received from the cheater, linked by partial-trace equality constraints over
the message space.

``solve_sdp`` is backed by cvxpy/SCS behind the module contract (equality
constrained PSD programs, per-variable dimension <= 256, deterministic);
``verify_dual_certificate`` recomputes dual feasibility independently with
plain eigenvalue checks, and ``brute_force_cheat`` is a see-saw unitary
optimizer giving an independent lower-bound oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import qlin
from .model import ProtocolSpec
from .qlin import as_complex, basis_state, dagger, embed_operator

MAX_VAR_DIM = 256
MAX_ANCILLA_DIM = 64


class SolverError(RuntimeError):
    """The solver failed to reach the requested tolerance."""

    def __init__(self, message: str, residuals: dict | None = None):
        super().__init__(message)
        self.residuals = residuals or {}


# ---------------------------------------------------------------------------
# problem representation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearTerm:
    """One summand of an equality constraint: coeff * map(variable).

    ``kind`` is ``"full"`` (identity map) or ``"ptrace"`` (optional conjugation
    by ``pre`` followed by a partial trace keeping the listed factors of
    ``layout``).
    """

    var: int
    coeff: float
    kind: str
    layout: tuple[int, ...] | None = None
    keep: tuple[int, ...] | None = None
    pre: np.ndarray | None = None


@dataclass(frozen=True)
class Constraint:
    dim: int
    rhs: np.ndarray
    terms: tuple[LinearTerm, ...]
    label: str = ""


@dataclass
class SdpProblem:
    var_dims: tuple[int, ...]
    objective: dict[int, np.ndarray]     # variable index -> Hermitian operator
    constraints: list[Constraint]
    meta: dict = field(default_factory=dict)

    def validate(self) -> None:
        if max(self.var_dims) > MAX_VAR_DIM:
            raise qlin.DimensionError(
                f"variable dimension {max(self.var_dims)} exceeds cap {MAX_VAR_DIM}")
        for j, c in self.objective.items():
            c = as_complex(c)
            if c.shape != (self.var_dims[j], self.var_dims[j]):
                raise qlin.DimensionError(f"objective on variable {j} has shape {c.shape}")
            w = np.linalg.eigvalsh(c)
            if not qlin.is_hermitian(c, 1e-10) or w.min() < -1e-10 or w.max() > 1 + 1e-10:
                raise qlin.QlinValidationError(
                    f"objective on variable {j} is not PSD with eigenvalues <= 1")
        for con in self.constraints:
            for t in con.terms:
                if term_output_dim(t, self.var_dims[t.var]) != con.dim:
                    raise qlin.DimensionError(
                        f"constraint {con.label!r}: term on var {t.var} maps to the wrong space")


def term_output_dim(term: LinearTerm, var_dim: int) -> int:
    if term.kind == "full":
        return var_dim
    kept = [term.layout[i] for i in term.keep]
    return int(np.prod(kept)) if kept else 1


def apply_term(term: LinearTerm, x: np.ndarray) -> np.ndarray:
    if term.kind == "full":
        return term.coeff * x
    y = x if term.pre is None else term.pre @ x @ dagger(term.pre)
    out = qlin.partial_trace(y, term.layout, term.keep)
    return term.coeff * out


def adjoint_term(term: LinearTerm, z: np.ndarray) -> np.ndarray:
    if term.kind == "full":
        return term.coeff * z
    emb = embed_operator(z, term.layout, term.keep) if term.keep else \
        complex(z[0, 0]) * np.eye(int(np.prod(term.layout)), dtype=complex)
    if term.pre is not None:
        emb = dagger(term.pre) @ emb @ term.pre
    return term.coeff * emb


def term_matrix(term: LinearTerm, var_dim: int) -> sp.csr_matrix:
    """Sparse matrix acting on the row-major vec of the variable."""
    if term.kind == "full":
        return sp.identity(var_dim * var_dim, format="csr", dtype=complex) * term.coeff
    layout = list(term.layout)
    d = int(np.prod(layout))
    pre = term.pre if term.pre is not None else np.eye(d, dtype=complex)
    keep = list(term.keep)
    drop = [i for i in range(len(layout)) if i not in keep]
    pr = pre.reshape(layout + [d])
    pr = np.moveaxis(pr, keep + drop, range(len(layout)))
    dk = int(np.prod([layout[i] for i in keep])) if keep else 1
    pr = pr.reshape(dk, -1, d)
    k = np.einsum("kda,ldb->klab", pr, pr.conj()).reshape(dk * dk, d * d)
    k = np.where(np.abs(k) < 1e-15, 0.0, k)
    return sp.csr_matrix(k) * term.coeff


def constraint_value(con: Constraint, xs: list[np.ndarray]) -> np.ndarray:
    out = np.zeros((con.dim, con.dim), dtype=complex)
    for t in con.terms:
        out = out + apply_term(t, xs[t.var])
    return out


def objective_value(problem: SdpProblem, xs: list[np.ndarray]) -> float:
    return float(sum(np.trace(as_complex(c) @ xs[j]).real
                     for j, c in problem.objective.items()))


def dual_value(problem: SdpProblem, zs: list[np.ndarray]) -> float:
    return float(sum(np.trace(dagger(z) @ con.rhs).real
                     for con, z in zip(problem.constraints, zs)))


def dual_slack(problem: SdpProblem, var: int, zs: list[np.ndarray]) -> np.ndarray:
    """Sum of adjoint maps minus the objective; dual feasibility is slack >= 0."""
    d = problem.var_dims[var]
    slack = np.zeros((d, d), dtype=complex)
    for con, z in zip(problem.constraints, zs):
        for t in con.terms:
            if t.var == var:
                slack = slack + adjoint_term(t, z)
    c = problem.objective.get(var)
    if c is not None:
        slack = slack - as_complex(c)
    return slack


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------

def build_cheating_sdp(spec: ProtocolSpec, party: str, target: str) -> SdpProblem:
    """The chain SDP bounding how well ``party`` forces the honest party's
    ``target`` outcome.

    Variables live on the honest side's private-plus-message space; the
    initial constraint pins the honest marginal to |0><0| and each round
    constraint equates message-traced states across the honest unitary.
    """
    if party not in ("alice", "bob"):
        raise ValueError(f"unknown party {party!r}")
    honest = "bob" if party == "alice" else "alice"
    if honest == "alice":
        povm = spec.alice_povm
        layout = (spec.dim_a, spec.dim_m)
        keep = (0,)
        objective_embed = lambda e: np.kron(e, np.eye(spec.dim_m))
    else:
        povm = spec.bob_povm
        layout = (spec.dim_m, spec.dim_b)
        keep = (1,)
        objective_embed = lambda e: np.kron(np.eye(spec.dim_m), e)
    if target not in povm:
        raise KeyError(
            f"unknown target label {target!r}; expected one of {sorted(povm)}")

    # maximal runs of the honest party's rounds, composed into segment unitaries
    segments: list[np.ndarray] = []
    prev = None
    for actor, u in spec.rounds:
        if actor == honest:
            if prev == honest:
                segments[-1] = as_complex(u) @ segments[-1]
            else:
                segments.append(as_complex(u))
        prev = actor

    n_vars = len(segments) + 1
    d = int(np.prod(layout))
    dk = layout[keep[0]]
    e00 = np.zeros((dk, dk), dtype=complex)
    e00[0, 0] = 1.0
    constraints = [Constraint(
        dim=dk, rhs=e00,
        terms=(LinearTerm(var=0, coeff=1.0, kind="ptrace", layout=layout, keep=keep),),
        label="initial")]
    for j, v in enumerate(segments, start=1):
        constraints.append(Constraint(
            dim=dk, rhs=np.zeros((dk, dk), dtype=complex),
            terms=(
                LinearTerm(var=j, coeff=1.0, kind="ptrace", layout=layout, keep=keep),
                LinearTerm(var=j - 1, coeff=-1.0, kind="ptrace", layout=layout,
                           keep=keep, pre=v),
            ),
            label=f"round-{j}"))

    problem = SdpProblem(
        var_dims=(d,) * n_vars,
        objective={n_vars - 1: objective_embed(as_complex(povm[target]))},
        constraints=constraints,
        meta={
            "party": party,
            "target": target,
            "protocol": spec.name,
            "n_honest_segments": len(segments),
            "n_messages_from_cheater": spec.message_count(party),
            "n_rounds": len(spec.rounds),
        },
    )
    problem.validate()
    return problem


def discrimination_sdp(states, priors) -> SdpProblem:
    """Optimal-measurement SDP for distinguishing pure states with given priors."""
    vecs = [s.amplitudes if isinstance(s, qlin.PureState) else as_complex(s).reshape(-1)
            for s in states]
    d = vecs[0].shape[0]
    if any(v.shape[0] != d for v in vecs):
        raise qlin.DimensionError("states must share one dimension")
    priors = np.asarray(priors, dtype=float)
    if abs(priors.sum() - 1.0) > 1e-9 or priors.min() < 0:
        raise ValueError("priors must be a probability vector")
    problem = SdpProblem(
        var_dims=(d,) * len(vecs),
        objective={i: priors[i] * np.outer(v, v.conj()) for i, v in enumerate(vecs)},
        constraints=[Constraint(
            dim=d, rhs=np.eye(d, dtype=complex),
            terms=tuple(LinearTerm(var=i, coeff=1.0, kind="full")
                        for i in range(len(vecs))),
            label="povm-completeness")],
        meta={"kind": "discrimination", "n_states": len(vecs)},
    )
    problem.validate()
    return problem


def trivial_sdp(dim: int = 2) -> SdpProblem:
    """max <|0><0|, rho> subject to Tr rho = 1, rho PSD; optimum 1."""
    problem = SdpProblem(
        var_dims=(dim,),
        objective={0: np.outer(basis_state(dim, 0), basis_state(dim, 0).conj())},
        constraints=[Constraint(
            dim=1, rhs=np.ones((1, 1), dtype=complex),
            terms=(LinearTerm(var=0, coeff=1.0, kind="ptrace",
                              layout=(dim,), keep=()),),
            label="unit-trace")],
        meta={"kind": "trivial"},
    )
    problem.validate()
    return problem


# ---------------------------------------------------------------------------
# solving
# ---------------------------------------------------------------------------

@dataclass
class SdpSolution:
    primal_value: float
    dual_value: float
    primal_vars: list[np.ndarray]
    dual_vars: list[np.ndarray]
    residuals: dict[str, float]
    solver: str
    status: str


@dataclass
class _ChainInfo:
    """Recognized cheating-chain structure (in honest-then-message axis order)."""

    d_h: int
    d_m: int
    keep_axis: int
    swap: np.ndarray | None      # permutation to (honest, message) order, or None
    segments: list[np.ndarray]   # honest segment unitaries, reordered
    e_op: np.ndarray             # honest POVM element from the objective
    real: bool


def _axes_swap_matrix(layout: tuple[int, int]) -> np.ndarray:
    d0, d1 = layout
    m = np.zeros((d0 * d1, d0 * d1))
    for i in range(d0):
        for j in range(d1):
            m[j * d0 + i, i * d1 + j] = 1.0
    return m


def _chain_info(problem: SdpProblem) -> _ChainInfo | None:
    dims = problem.var_dims
    n = len(dims) - 1
    if len(set(dims)) != 1 or len(problem.constraints) != n + 1:
        return None
    c0 = problem.constraints[0]
    if len(c0.terms) != 1:
        return None
    t0 = c0.terms[0]
    if (t0.kind != "ptrace" or t0.var != 0 or t0.coeff != 1.0 or t0.pre is not None
            or t0.keep is None or len(t0.keep) != 1 or len(t0.layout) != 2):
        return None
    rhs0 = as_complex(c0.rhs)
    e00 = np.zeros_like(rhs0)
    e00[0, 0] = 1.0
    if np.max(np.abs(rhs0 - e00)) > 1e-12:
        return None
    layout, keep = t0.layout, t0.keep
    segments = []
    for j in range(1, n + 1):
        con = problem.constraints[j]
        if len(con.terms) != 2 or np.max(np.abs(con.rhs)) > 1e-12:
            return None
        plus = [t for t in con.terms if t.var == j and t.coeff == 1.0
                and t.kind == "ptrace" and t.pre is None]
        minus = [t for t in con.terms if t.var == j - 1 and t.coeff == -1.0
                 and t.kind == "ptrace" and t.pre is not None]
        if len(plus) != 1 or len(minus) != 1:
            return None
        if plus[0].layout != layout or plus[0].keep != keep \
                or minus[0].layout != layout or minus[0].keep != keep:
            return None
        segments.append(as_complex(minus[0].pre))
    if set(problem.objective) != {n}:
        return None
    keep_axis = keep[0]
    d_h = layout[keep_axis]
    d_m = layout[1 - keep_axis]
    swap = None if keep_axis == 0 else _axes_swap_matrix(layout)
    reorder = (lambda m: m) if swap is None else (lambda m: swap @ m @ swap.T)
    c_full = reorder(as_complex(problem.objective[n]))
    e_op = c_full.reshape(d_h, d_m, d_h, d_m)[:, 0, :, 0].copy()
    if np.max(np.abs(c_full - np.kron(e_op, np.eye(d_m)))) > 1e-10:
        return None
    vs = [reorder(v) for v in segments]
    data = vs + [c_full]
    real = all(np.max(np.abs(m.imag)) < 1e-14 for m in data)
    return _ChainInfo(d_h=d_h, d_m=d_m, keep_axis=keep_axis, swap=swap,
                      segments=vs, e_op=e_op, real=real)


def _project_psd(x: np.ndarray) -> np.ndarray:
    x = 0.5 * (x + dagger(x))
    w, v = np.linalg.eigh(x)
    if w.min() >= 0:
        return x
    w = np.clip(w, 0.0, None)
    return (v * w) @ dagger(v)


def compute_residuals(problem: SdpProblem, xs, zs, primal: float, dual: float) -> dict:
    res = {}
    eq = 0.0
    for con in problem.constraints:
        eq = max(eq, float(np.max(np.abs(constraint_value(con, xs) - con.rhs))))
    res["primal_equality"] = eq
    res["primal_psd"] = max(0.0, -min(qlin.min_eig(x) for x in xs))
    res["dual_psd"] = max(0.0, -min(qlin.min_eig(dual_slack(problem, j, zs))
                                    for j in range(len(problem.var_dims))))
    res["gap"] = abs(primal - dual)
    res["weak_duality"] = max(0.0, primal - dual)
    return res


def solve_sdp(problem: SdpProblem, tol: float = 1e-6, eps: float | None = None,
              max_iters: int = 200_000, method: str = "auto") -> SdpSolution:
    """Solve primal and dual to within ``tol``; deterministic for fixed inputs.

    Chain-structured cheating programs are reduced before solving (the pure
    initial marginal forces a product form, middle variables are compressed to
    their reachable supports, and the final variable folds into the
    objective); anything else goes through the generic conic path.  Raises
    ``SolverError`` carrying the best residuals when the tolerance is not met.
    """
    problem.validate()
    if method not in ("auto", "chain", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "chain" or (method == "auto" and max(problem.var_dims) > 64):
        info = _chain_info(problem)
        if info is not None:
            return _solve_chain(problem, info, tol)
        if method == "chain":
            raise SolverError("problem does not have the cheating-chain structure")
    return _solve_generic(problem, tol, eps, max_iters)


def _solve_generic(problem: SdpProblem, tol: float, eps: float | None,
                   max_iters: int) -> SdpSolution:
    import cvxpy as cp

    if eps is None:
        eps = float(np.clip(tol * 1e-2, 1e-10, 1e-7))

    xs = [cp.Variable((d, d), hermitian=True) for d in problem.var_dims]
    cons = [x >> 0 for x in xs]
    eq_cons = []
    for con in problem.constraints:
        expr = 0
        for t in con.terms:
            mat = term_matrix(t, problem.var_dims[t.var])
            expr = expr + mat @ cp.reshape(xs[t.var],
                                           (problem.var_dims[t.var] ** 2,), order="C")
        c = expr == con.rhs.reshape(-1)
        eq_cons.append(c)
        cons.append(c)
    objective = sum(cp.real(cp.trace(as_complex(c) @ xs[j]))
                    for j, c in problem.objective.items())
    prob = cp.Problem(cp.Maximize(objective), cons)
    prob.solve(solver="SCS", verbose=False, eps_abs=eps, eps_rel=eps,
               max_iters=max_iters)
    status = prob.status
    if status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"solver returned status {status!r}")

    primal_vars = [_project_psd(as_complex(x.value)) for x in xs]
    dual_vars = []
    for c in eq_cons:
        z = as_complex(c.dual_value).reshape(
            int(math.isqrt(c.dual_value.size)), -1)
        dual_vars.append(0.5 * (z + dagger(z)))

    primal = objective_value(problem, primal_vars)
    dual = dual_value(problem, dual_vars)
    # fix the dual sign convention if the solver's convention is mirrored
    flipped = [-z for z in dual_vars]
    if (compute_residuals(problem, primal_vars, flipped, primal, -dual)["dual_psd"]
            < compute_residuals(problem, primal_vars, dual_vars, primal, dual)["dual_psd"]):
        dual_vars, dual = flipped, -dual

    residuals = compute_residuals(problem, primal_vars, dual_vars, primal, dual)
    solution = SdpSolution(
        primal_value=primal, dual_value=dual, primal_vars=primal_vars,
        dual_vars=dual_vars, residuals=residuals, solver="SCS", status=status)
    worst = max(residuals["primal_equality"], residuals["primal_psd"],
                residuals["dual_psd"], residuals["gap"])
    if worst > tol:
        raise SolverError(
            f"residual {worst:.3e} exceeds tolerance {tol:.1e}", residuals)
    return solution


def _assemble_chain_solution(problem: SdpProblem, info: _ChainInfo, tol: float,
                             xs_hm: list[np.ndarray], zs_mid: list[np.ndarray],
                             supports: list[np.ndarray], solver: str) -> SdpSolution:
    """Reconstruct full chain primal/duals from reduced-space data and certify."""
    dh, dm = info.d_h, info.d_m
    n = len(info.segments)
    vs = info.segments
    eye_m = np.eye(dm)
    e00h = np.zeros((dh, dh), dtype=complex)
    e00h[0, 0] = 1.0
    p_perp = np.eye(dh, dtype=complex) - e00h

    zs: list[np.ndarray | None] = [None] * (n + 1)
    zs[n] = as_complex(info.e_op)
    for j in range(n - 1, 0, -1):
        g_next = dagger(vs[j]) @ np.kron(zs[j + 1], eye_m) @ vs[j]
        base = zs_mid[j - 1]
        q = supports[j - 1]
        perp_j = np.eye(dh, dtype=complex) - q @ dagger(q)
        scale = max(1.0, float(np.linalg.norm(g_next, 2)))
        # identity padding leaks into the certified value, complement padding
        # is free; escalate both until the slack clears zero
        for eps_pad, nu in [(1e-9, 1e4), (1e-8, 1e4), (1e-7, 3e4), (1e-6, 1e5),
                            (1e-5, 3e5), (1e-4, 1e6), (1e-3, 1e7)]:
            cand = base + eps_pad * np.eye(dh) + nu * scale * perp_j
            lo = qlin.min_eig(np.kron(cand, eye_m) - g_next)
            if lo >= 0:
                zs[j] = cand
                break
        else:
            raise SolverError("failed to pad a feasible chain dual certificate")
    g1 = (dagger(vs[0]) @ np.kron(zs[1], eye_m) @ vs[0]) if n >= 1 else \
        np.kron(as_complex(info.e_op), eye_m)
    scale1 = max(1.0, float(np.linalg.norm(g1, 2)))
    b_block = g1.reshape(dh, dm, dh, dm)[0, :, 0, :]
    lam_lo = float(np.linalg.eigvalsh(0.5 * (b_block + dagger(b_block))).max())

    def bisect_lambda(mu):
        def feasible(lam):
            z0 = lam * e00h + mu * p_perp
            return qlin.min_eig(np.kron(z0, eye_m) - g1) >= 0
        hi = lam_lo + scale1 + 1.0
        if not feasible(hi):
            hi = lam_lo + 10.0 * (scale1 + 1.0)
            if not feasible(hi):
                return None
        lo = lam_lo
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                hi = mid
            else:
                lo = mid
        return hi

    # larger complements tighten the value but cost eigenvalue precision;
    # take the best certified value across a ladder
    best = None
    for mu in (1e3 * scale1, 1e5 * scale1, 1e7 * scale1):
        lam = bisect_lambda(mu)
        if lam is not None and (best is None or lam < best[0]):
            best = (lam, mu)
    if best is None:
        raise SolverError("failed to construct the initial-constraint dual")
    zs[0] = best[0] * e00h + best[1] * p_perp

    unswap = (lambda m: m) if info.swap is None else \
        (lambda m: info.swap.T @ m @ info.swap)
    xs_full = [unswap(x) for x in xs_hm]
    zs_full = [np.asarray(z) for z in zs]
    primal = objective_value(problem, xs_full)
    dual = dual_value(problem, zs_full)
    residuals = compute_residuals(problem, xs_full, zs_full, primal, dual)
    solution = SdpSolution(
        primal_value=primal, dual_value=dual, primal_vars=xs_full,
        dual_vars=zs_full, residuals=residuals, solver=solver, status="optimal")
    worst = max(residuals["primal_equality"], residuals["primal_psd"],
                residuals["dual_psd"], residuals["gap"])
    if worst > tol:
        raise SolverError(
            f"residual {worst:.3e} exceeds tolerance {tol:.1e}", residuals)
    return solution


def _solve_chain(problem: SdpProblem, info: _ChainInfo, tol: float) -> SdpSolution:
    """Reduced solve of a recognized cheating chain, then full reconstruction."""
    import cvxpy as cp

    dh, dm = info.d_h, info.d_m
    n = len(info.segments)
    vs = info.segments
    c_full = np.kron(as_complex(info.e_op), np.eye(dm))
    e00h = np.zeros((dh, dh), dtype=complex)
    e00h[0, 0] = 1.0

    # reachable honest-side supports for the middle variables
    qs: list[np.ndarray] = []
    p_prev = e00h
    for j in range(1, n):
        big = vs[j - 1] @ np.kron(p_prev, np.eye(dm)) @ dagger(vs[j - 1])
        marg = qlin.partial_trace(big, (dh, dm), (0,))
        w, u = np.linalg.eigh(marg)
        q = u[:, w > max(float(w.max()), 1e-30) * 1e-11]
        qs.append(q)
        p_prev = q @ dagger(q)

    if n <= 1:
        # value = max over sigma of <B, sigma> = lambda_max(B)
        cr = dagger(vs[0]) @ c_full @ vs[0] if n == 1 else c_full
        b = cr.reshape(dh, dm, dh, dm)[0, :, 0, :]
        b = 0.5 * (b + dagger(b))
        w, u = np.linalg.eigh(b)
        sigma = np.outer(u[:, -1], u[:, -1].conj())
        xs = [np.kron(e00h, sigma)]
        if n == 1:
            xs.append(vs[0] @ xs[0] @ dagger(vs[0]))
        return _assemble_chain_solution(problem, info, tol, xs, [], [], "eig")

    real = info.real
    cast = (lambda m: np.ascontiguousarray(m.real)) if real else (lambda m: m)
    var_kw = {"symmetric": True} if real else {"hermitian": True}
    sigma = cp.Variable((dm, dm), **var_kw)
    mids = [cp.Variable((q.shape[1] * dm, q.shape[1] * dm), **var_kw) for q in qs]
    cons = [sigma >> 0, cp.trace(sigma) == 1] + [m >> 0 for m in mids]
    links = []
    # first link: sigma -> compressed marginal on S_1
    v0 = vs[0].reshape(dh, dm, dh, dm)[:, :, 0, :]
    w1 = np.einsum("ys,yum->sum", qs[0].conj(), v0)
    k1 = np.einsum("sum,tun->stmn", w1, w1.conj())
    r1 = qs[0].shape[1]
    k1 = cast(k1.reshape(r1 * r1, dm * dm))
    pt1 = term_matrix(LinearTerm(var=0, coeff=1.0, kind="ptrace",
                                 layout=(r1, dm), keep=(0,)), r1 * dm)
    pt1 = sp.csr_matrix(pt1.real) if real else pt1
    c = pt1 @ cp.reshape(mids[0], ((r1 * dm) ** 2,), order="C") == \
        sp.csr_matrix(np.where(np.abs(k1) < 1e-15, 0, k1)) @ \
        cp.reshape(sigma, (dm * dm,), order="C")
    links.append(c)
    cons.append(c)
    for j in range(2, n):
        q_out, q_in = qs[j - 1], qs[j - 2]
        r_out, r_in = q_out.shape[1], q_in.shape[1]
        vr = vs[j - 1].reshape(dh, dm, dh, dm)
        tmp = np.einsum("ys,yuzm->suzm", q_out.conj(), vr)
        wj = np.einsum("suzm,zt->sutm", tmp, q_in)
        kj = np.einsum("sutm,vuwn->svtmwn", wj, wj.conj())
        kj = cast(kj.reshape(r_out * r_out, (r_in * dm) ** 2))
        ptj = term_matrix(LinearTerm(var=0, coeff=1.0, kind="ptrace",
                                     layout=(r_out, dm), keep=(0,)), r_out * dm)
        ptj = sp.csr_matrix(ptj.real) if real else ptj
        c = ptj @ cp.reshape(mids[j - 1], ((r_out * dm) ** 2,), order="C") == \
            sp.csr_matrix(np.where(np.abs(kj) < 1e-15, 0, kj)) @ \
            cp.reshape(mids[j - 2], ((r_in * dm) ** 2,), order="C")
        links.append(c)
        cons.append(c)
    c_red = dagger(vs[n - 1]) @ c_full @ vs[n - 1]
    qi = np.kron(qs[-1], np.eye(dm))
    c_tilde = cast(dagger(qi) @ c_red @ qi)
    if real:
        objective = cp.trace(c_tilde @ mids[-1])
    else:
        objective = cp.real(cp.trace(c_tilde @ mids[-1]))
    prob = cp.Problem(cp.Maximize(objective), cons)

    biggest = max([dm] + [m.shape[0] for m in mids])
    if real and biggest <= 126:
        prob.solve(solver="CLARABEL", verbose=False)
        solver = "CLARABEL"
    else:
        prob.solve(solver="SCS", verbose=False, eps_abs=1e-9, eps_rel=1e-9,
                   max_iters=200_000)
        solver = "SCS"
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"solver returned status {prob.status!r}")

    sig = _project_psd(as_complex(sigma.value))
    sig = sig / float(np.trace(sig).real)
    xs = [np.kron(e00h, sig)]
    for q, mid in zip(qs, mids):
        xt = _project_psd(as_complex(mid.value))
        qi = np.kron(q, np.eye(dm))
        xs.append(qi @ xt @ dagger(qi))
    xs.append(vs[n - 1] @ xs[n - 1] @ dagger(vs[n - 1]))

    zs_mid = []
    for q, link in zip(qs, links):
        r = q.shape[1]
        zt = as_complex(link.dual_value).reshape(r, r)
        zt = 0.5 * (zt + dagger(zt))
        zs_mid.append(q @ zt @ dagger(q))
    if zs_mid:
        # fix the solver's dual sign convention against the last slack
        c_check = dagger(vs[n - 1]) @ c_full @ vs[n - 1]
        plus = qlin.min_eig(np.kron(zs_mid[-1], np.eye(dm)) - c_check)
        minus = qlin.min_eig(np.kron(-zs_mid[-1], np.eye(dm)) - c_check)
        if minus > plus:
            zs_mid = [-z for z in zs_mid]
    return _assemble_chain_solution(problem, info, tol, xs, zs_mid, qs, solver)


@dataclass
class CertificateCheck:
    passed: bool
    max_residual: float
    dual_value: float
    details: dict[str, float]


def verify_dual_certificate(problem: SdpProblem, solution: SdpSolution,
                            atol: float = 1e-8) -> CertificateCheck:
    """Recompute dual feasibility from scratch (eigenvalue floors, plain numpy).

    Passing means the certificate's value is a valid upper bound on every
    cheating strategy, independent of how the solution was produced.
    """
    zs = solution.dual_vars
    details: dict[str, float] = {}
    herm = max(float(np.max(np.abs(z - dagger(z)))) for z in zs)
    details["dual_hermiticity"] = herm
    slack_floor = 0.0
    for j in range(len(problem.var_dims)):
        slack_floor = max(slack_floor,
                          -min(0.0, qlin.min_eig(dual_slack(problem, j, zs))))
    details["dual_slack_floor"] = slack_floor
    dv = dual_value(problem, zs)
    details["dual_value_mismatch"] = abs(dv - solution.dual_value)
    details["bound_violation"] = max(0.0, solution.primal_value - dv)
    worst = max(details.values())
    return CertificateCheck(passed=worst <= atol, max_residual=worst,
                            dual_value=dv, details=details)


# ---------------------------------------------------------------------------
# brute-force see-saw oracle
# ---------------------------------------------------------------------------

def _polar(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def brute_force_cheat(spec: ProtocolSpec, party: str, target: str,
                      restarts: int = 20, ancilla_dim: int | None = None,
                      seed: int = 0, sweeps: int = 300,
                      include_honest_start: bool = True) -> float:
    """Lower-bound the cheating probability by optimizing explicit unitaries.

    The cheater keeps a private ancilla space and applies an arbitrary unitary
    to ancilla-plus-message at every opportunity (including before the first
    honest round); pure strategies suffice by purification.  Optimization is
    see-saw: each unitary in turn is replaced by the polar factor of the
    objective's linearization, which never decreases the success probability.
    """
    if party not in ("alice", "bob"):
        raise ValueError(f"unknown party {party!r}")
    honest = "bob" if party == "alice" else "alice"
    d_honest_side = spec.dim_a if honest == "alice" else spec.dim_b
    d_cheat_spec = spec.dim_b if honest == "alice" else spec.dim_a
    if ancilla_dim is None:
        ancilla_dim = d_cheat_spec
    if ancilla_dim > MAX_ANCILLA_DIM:
        raise qlin.DimensionError(
            f"ancilla dimension {ancilla_dim} exceeds cap {MAX_ANCILLA_DIM}")

    if honest == "alice":
        dims = (spec.dim_a, spec.dim_m, ancilla_dim)
        honest_axes, slot_axes, spectator = (0, 1), (1, 2), 0
        povm = spec.alice_povm
    else:
        dims = (ancilla_dim, spec.dim_m, spec.dim_b)
        honest_axes, slot_axes, spectator = (1, 2), (0, 1), 2
        povm = spec.bob_povm
    if target not in povm:
        raise KeyError(f"unknown target label {target!r}")
    e_target = as_complex(povm[target])

    # maximal actor runs; slot t is the cheater's opportunity before segment t
    runs: list[tuple[str, np.ndarray]] = []
    for actor, u in spec.rounds:
        if runs and runs[-1][0] == actor:
            runs[-1] = (actor, as_complex(u) @ runs[-1][1])
        else:
            runs.append((actor, as_complex(u)))
    segments = [m for a, m in runs if a == honest]
    slot_inits: list[np.ndarray | None] = []   # cheater's honest unitary per slot
    pending = None
    for a, m in runs:
        if a == honest:
            slot_inits.append(pending)
            pending = None
        else:
            pending = m
    n_slots = len(segments)
    if n_slots == 0:
        # nothing the honest party does depends on the cheater; honest value
        vec = np.zeros(int(np.prod(dims)), dtype=complex)
        vec[0] = 1.0
        w = qlin.apply_on_factors(vec, dims, e_target, (spectator,))
        return float(np.vdot(vec, w).real)

    d_slot = dims[slot_axes[0]] * dims[slot_axes[1]]
    total = int(np.prod(dims))
    rng = np.random.default_rng(seed)

    def forward(vec, ws, upto_slot=None, from_slot=None):
        """Apply slots and honest segments in order; slice by slot index."""
        for t in range(n_slots):
            if from_slot is not None and t < from_slot:
                continue
            if upto_slot is not None and t >= upto_slot:
                break
            vec = qlin.apply_on_factors(vec, dims, ws[t], slot_axes)
            vec = qlin.apply_on_factors(vec, dims, segments[t], honest_axes)
        return vec

    def value_of(ws):
        vec = np.zeros(total, dtype=complex)
        vec[0] = 1.0
        vec = forward(vec, ws)
        w = qlin.apply_on_factors(vec, dims, e_target, (spectator,))
        return float(np.vdot(vec, w).real)

    def honest_slot_unitaries():
        ws = []
        for t in range(n_slots):
            u = slot_inits[t]
            if u is None or ancilla_dim != d_cheat_spec:
                ws.append(np.eye(d_slot, dtype=complex))
            else:
                ws.append(u)
        return ws

    def seesaw(ws):
        best = value_of(ws)
        for _ in range(sweeps):
            for t in range(n_slots):
                vec0 = np.zeros(total, dtype=complex)
                vec0[0] = 1.0
                r = forward(vec0, ws, upto_slot=t)
                x = qlin.apply_on_factors(r, dims, ws[t], slot_axes)
                x = qlin.apply_on_factors(x, dims, segments[t], honest_axes)
                x = forward(x, ws, from_slot=t + 1)
                u = qlin.apply_on_factors(x, dims, e_target, (spectator,))
                # pull back through everything after slot t
                for s in range(n_slots - 1, t, -1):
                    u = qlin.apply_on_factors(u, dims, dagger(segments[s]), honest_axes)
                    u = qlin.apply_on_factors(u, dims, dagger(ws[s]), slot_axes)
                u = qlin.apply_on_factors(u, dims, dagger(segments[t]), honest_axes)
                if slot_axes[0] == 0:
                    ur = u.reshape(d_slot, dims[2])
                    rr = r.reshape(d_slot, dims[2])
                    grad = np.einsum("ay,by->ab", ur, rr.conj())
                else:
                    ur = u.reshape(dims[0], d_slot)
                    rr = r.reshape(dims[0], d_slot)
                    grad = np.einsum("ya,yb->ab", ur, rr.conj())
                ws[t] = _polar(grad)
            val = value_of(ws)
            improved = val - best
            best = max(best, val)
            if improved < 1e-12:
                break
        return best

    best = 0.0
    starts = []
    if include_honest_start:
        starts.append(honest_slot_unitaries())
    for _ in range(restarts):
        starts.append([qlin.haar_unitary(d_slot, rng) for _ in range(n_slots)])
    for ws in starts:
        best = max(best, seesaw(list(ws)))
    return best
