"""Exact finite-MDP toolkit.

Everything here is a pure function of its inputs.  Probability tensors are
numpy arrays laid out as ``transition[s, a, s_next]``, ``policy[s, a]`` and
``reward[s, a]``.  Visitation vectors are plain 1-D arrays over states.

The module covers discounted state visitation, the distribution-mismatch
coefficient and the projected-gradient iteration bound built on it, the
bound for training across a shaped sequence of MDPs, transition entropy, and
a checker/verifier for the claim that higher-entropy dynamics push one-step
state distributions towards uniform.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

PROB_ATOL = 1e-12
VISITATION_ATOL = 1e-9
RESIDUAL_TOL = 1e-8
THEOREM_TOL = 1e-12


class MDPError(ValueError):
    """Invalid MDP, policy or distribution input."""


class NumericalError(ArithmeticError):
    """A linear solve came back with an unacceptable residual."""


def _frozen(x, dtype=float) -> np.ndarray:
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def check_distribution(v, atol: float = PROB_ATOL, name: str = "distribution") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise MDPError(f"{name} must be a non-empty vector")
    if np.any(v < 0):
        raise MDPError(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > atol:
        raise MDPError(f"{name} sums to {v.sum()!r}, not 1")
    return v


@dataclass(frozen=True, eq=False)
class TabularMDP:
    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    initial_dist: np.ndarray

    def __post_init__(self):
        P = _frozen(self.transition)
        R = _frozen(self.reward)
        rho = _frozen(self.initial_dist)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise MDPError(f"transition must have shape (S, A, S), got {P.shape}")
        n_states, n_actions = P.shape[:2]
        if n_states < 1 or n_actions < 1:
            raise MDPError("need at least one state and one action")
        if np.any(P < 0):
            raise MDPError("transition has negative entries")
        row_err = np.abs(P.sum(axis=2) - 1.0)
        if np.any(row_err > PROB_ATOL):
            s, a = np.unravel_index(np.argmax(row_err), row_err.shape)
            raise MDPError(f"transition row ({s}, {a}) does not sum to 1")
        if R.shape != (n_states, n_actions):
            raise MDPError(f"reward must have shape {(n_states, n_actions)}, got {R.shape}")
        if not 0.0 <= self.gamma < 1.0:
            raise MDPError(f"gamma must lie in [0, 1), got {self.gamma}")
        check_distribution(rho, name="initial_dist")
        if rho.shape != (n_states,):
            raise MDPError("initial_dist length differs from n_states")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", R)
        object.__setattr__(self, "initial_dist", rho)
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True, eq=False)
class PolicyTable:
    probs: np.ndarray

    def __post_init__(self):
        pi = _frozen(self.probs)
        if pi.ndim != 2:
            raise MDPError("policy must be a (S, A) matrix")
        if np.any(pi < 0):
            raise MDPError("policy has negative entries")
        if np.any(np.abs(pi.sum(axis=1) - 1.0) > PROB_ATOL):
            raise MDPError("policy rows must sum to 1")
        object.__setattr__(self, "probs", pi)

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "PolicyTable":
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def deterministic(cls, actions: Sequence[int], n_actions: int) -> "PolicyTable":
        actions = np.asarray(actions, dtype=int)
        probs = np.zeros((actions.size, n_actions))
        probs[np.arange(actions.size), actions] = 1.0
        return cls(probs)


@dataclass(frozen=True)
class ShapingBoundInputs:
    """Constants of a shaped MDP sequence.

    ``delta`` bounds the mismatch of the first (easy) environment, ``n`` the
    drift between consecutive environments and ``k`` is the sequence length.
    """

    delta: float
    n: float
    k: int
    epsilon: float
    gamma: float
    n_states: int
    n_actions: int

    def __post_init__(self):
        if not self.delta >= 1:
            raise MDPError("delta must be >= 1")
        if not self.n >= 1:
            raise MDPError("n must be >= 1")
        if int(self.k) != self.k or self.k < 1:
            raise MDPError("k must be a positive integer")
        if not self.epsilon > 0:
            raise MDPError("epsilon must be > 0")
        if not 0.0 <= self.gamma < 1.0:
            raise MDPError("gamma must lie in [0, 1)")
        if self.n_states < 1 or self.n_actions < 1:
            raise MDPError("n_states and n_actions must be positive")


def _policy_probs(policy) -> np.ndarray:
    if isinstance(policy, PolicyTable):
        return policy.probs
    return PolicyTable(policy).probs


def _kernel(mdp_or_kernel) -> np.ndarray:
    if isinstance(mdp_or_kernel, TabularMDP):
        return mdp_or_kernel.transition
    P = np.asarray(mdp_or_kernel, dtype=float)
    if P.ndim != 3:
        raise MDPError("kernel must have shape (S, A, S)")
    return P


def policy_kernel(mdp_or_kernel, policy) -> np.ndarray:
    """State-to-state matrix ``P_pi[s, s'] = sum_a pi[s, a] P[s, a, s']``."""
    P = _kernel(mdp_or_kernel)
    pi = _policy_probs(policy)
    if pi.shape != P.shape[:2]:
        raise MDPError(f"policy shape {pi.shape} does not match kernel {P.shape[:2]}")
    return np.einsum("sa,sat->st", pi, P)


def exact_visitation(mdp: TabularMDP, policy, start=None) -> np.ndarray:
    """Normalised discounted state occupancy of ``policy`` started from ``start``.

    Solves ``(I - gamma P_pi^T) d = (1 - gamma) start`` directly.  ``start``
    defaults to the MDP's initial distribution.
    """
    start = mdp.initial_dist if start is None else check_distribution(start, name="start")
    if start.shape != (mdp.n_states,):
        raise MDPError("start length differs from n_states")
    P_pi = policy_kernel(mdp, policy)
    A = np.eye(mdp.n_states) - mdp.gamma * P_pi.T
    b = (1.0 - mdp.gamma) * start
    d = np.linalg.solve(A, b)
    residual = np.max(np.abs(A @ d - b))
    if residual > RESIDUAL_TOL:
        raise NumericalError(f"visitation solve residual {residual:.3g}")
    # round-off can leave tiny negatives
    d = np.where(d < 0, 0.0, d)
    return d / d.sum()


def power_series_visitation(mdp: TabularMDP, policy, start=None, n_terms: int = 2000) -> np.ndarray:
    """Truncated-series evaluation of the same occupancy (slow, used as a cross-check)."""
    start = mdp.initial_dist if start is None else np.asarray(start, dtype=float)
    P_pi_T = policy_kernel(mdp, policy).T
    term = start.copy()
    total = np.zeros_like(term)
    scale = 1.0
    for _ in range(n_terms):
        total += scale * term
        term = P_pi_T @ term
        scale *= mdp.gamma
    return (1.0 - mdp.gamma) * total


def mismatch_coefficient(d_star, d_train) -> float:
    """``max_s d_star[s] / d_train[s]`` with 0/0 -> 0 and x/0 -> inf."""
    d_star = np.asarray(d_star, dtype=float)
    d_train = np.asarray(d_train, dtype=float)
    if d_star.shape != d_train.shape:
        raise MDPError(f"length mismatch: {d_star.shape} vs {d_train.shape}")
    check_distribution(d_star, atol=VISITATION_ATOL, name="d_star")
    check_distribution(d_train, atol=VISITATION_ATOL, name="d_train")
    support = d_train > 0
    if np.any(d_star[~support] > 0):
        return float("inf")
    if not np.any(support):
        return 0.0
    return float(np.max(d_star[support] / d_train[support]))


def bound_prefactor(gamma: float, n_states: int, n_actions: int, epsilon: float) -> float:
    if not 0.0 <= gamma < 1.0:
        raise MDPError("gamma must lie in [0, 1)")
    if not epsilon > 0:
        raise MDPError("epsilon must be > 0")
    return 64.0 * gamma * n_states * n_actions / ((1.0 - gamma) ** 5 * epsilon**2)


def iteration_bound(gamma: float, n_states: int, n_actions: int, epsilon: float, mismatch: float) -> float:
    """Iterations after which projected gradient ascent is epsilon-optimal."""
    if not mismatch >= 1:
        raise MDPError("mismatch must be >= 1")
    if np.isinf(mismatch):
        return float("inf")
    return bound_prefactor(gamma, n_states, n_actions, epsilon) * mismatch**2


def shaping_bound(inp: ShapingBoundInputs) -> float:
    """Total iterations when training successively across the shaped sequence."""
    pre = bound_prefactor(inp.gamma, inp.n_states, inp.n_actions, inp.epsilon)
    return pre * (inp.delta**2 + inp.k * inp.n**2)


def shaping_beneficial(inp: ShapingBoundInputs, original_mismatch: float) -> bool:
    return inp.delta**2 + inp.k * inp.n**2 <= original_mismatch**2


def entropy(p) -> float:
    """Shannon entropy in nats with 0 ln 0 = 0."""
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(-np.sum(nz * np.log(nz)))


def row_entropy(mdp_or_kernel, policy, state: int) -> float:
    return entropy(policy_kernel(mdp_or_kernel, policy)[state])


def _row_entropies(P: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(P > 0, P * np.log(np.where(P > 0, P, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def dynamism_assumption_mask(P, P_tilde, tol: float = PROB_ATOL) -> np.ndarray:
    """Per-row truth table of the three dynamism assumptions.

    Works on any leading batch shape; the last axis is the next-state axis.
    """
    P = np.asarray(P, dtype=float)
    P_tilde = np.asarray(P_tilde, dtype=float)
    if P.shape != P_tilde.shape:
        raise MDPError(f"kernel shapes differ: {P.shape} vs {P_tilde.shape}")
    max_ok = P_tilde.max(axis=-1) <= P.max(axis=-1) + tol
    min_ok = P_tilde.min(axis=-1) >= P.min(axis=-1) - tol
    ent_ok = _row_entropies(P_tilde) >= _row_entropies(P) - tol
    return max_ok & min_ok & ent_ok


def check_dynamism_assumptions(P, P_tilde) -> bool:
    """True iff every row of ``P_tilde`` has a lower max, higher min and higher entropy."""
    return bool(np.all(dynamism_assumption_mask(_kernel(P), _kernel(P_tilde))))


def distance_to_uniform(v) -> tuple[float, float]:
    """(L-infinity, total-variation) distance of ``v`` from the uniform vector."""
    v = np.asarray(v, dtype=float)
    diff = np.abs(v - 1.0 / v.size)
    return float(diff.max()), float(0.5 * diff.sum())


class DynamismCheck(NamedTuple):
    index: int
    linf_before: float
    linf_after: float
    tv_before: float
    tv_after: float
    passed: bool


def verify_dynamism_theorem(P, P_tilde, policy, start_distributions) -> list[DynamismCheck]:
    """Compare one-step pushforwards under ``P`` and ``P_tilde`` for each start.

    A start passes when the L-infinity distance to uniform does not grow.  The
    guarantee is proved for point-mass starts under a deterministic policy;
    mixtures can and do fail, and are reported as such rather than raised.
    """
    P = _kernel(P)
    P_tilde = _kernel(P_tilde)
    if not check_dynamism_assumptions(P, P_tilde):
        raise MDPError("P_tilde does not satisfy the dynamism assumptions relative to P")
    K = policy_kernel(P, policy)
    K_tilde = policy_kernel(P_tilde, policy)
    report = []
    for i, rho in enumerate(start_distributions):
        rho = check_distribution(rho, name=f"start_distributions[{i}]")
        linf_b, tv_b = distance_to_uniform(rho @ K)
        linf_a, tv_a = distance_to_uniform(rho @ K_tilde)
        report.append(DynamismCheck(i, linf_b, linf_a, tv_b, tv_a, linf_a <= linf_b + THEOREM_TOL))
    return report


def perturb_towards_uniform(P, rng: np.random.Generator, max_fraction: float = 0.25):
    """Move mass from each row's argmax to its argmin.

    The amount moved is drawn from ``Uniform(0, max_fraction * (max - min))``
    per row.  With ``max_fraction <= 0.5`` the order of the two entries is
    kept, so the max drops, the min rises and entropy does not fall.
    Returns ``(P_tilde, moved)`` where ``moved`` has the row shape.
    """
    P = np.asarray(P, dtype=float)
    rows = P.reshape(-1, P.shape[-1])
    idx = np.arange(rows.shape[0])
    hi = rows.argmax(axis=1)
    lo = rows.argmin(axis=1)
    spread = rows[idx, hi] - rows[idx, lo]
    eps = rng.uniform(0.0, 1.0, size=rows.shape[0]) * max_fraction * spread
    out = rows.copy()
    out[idx, hi] -= eps
    out[idx, lo] += eps
    return out.reshape(P.shape), eps.reshape(P.shape[:-1])


class FuzzResult(NamedTuple):
    trial_id: np.ndarray
    n_states: int
    epsilon_mass: np.ndarray
    linf_before: np.ndarray
    linf_after: np.ndarray
    passed: np.ndarray
    assumptions_ok: np.ndarray


def fuzz_dynamism_theorem(
    n_kernels: int,
    starts_per_kernel: int,
    rng: np.random.Generator,
    n_states: int = 4,
    n_actions: int = 2,
) -> FuzzResult:
    """Randomised check of the dynamism theorem, vectorised over kernels.

    Kernels have Dirichlet(1) rows.  Each trial pairs a kernel with a
    point-mass start and a random deterministic policy, so the pushforward is
    the single row ``(s, pi(s))`` and ``epsilon_mass`` is the mass moved on it.
    """
    P = rng.dirichlet(np.ones(n_states), size=(n_kernels, n_states, n_actions))
    P_tilde, moved = perturb_towards_uniform(P, rng)
    ok = dynamism_assumption_mask(P, P_tilde).reshape(n_kernels, -1).all(axis=1)

    n = n_kernels * starts_per_kernel
    kern = np.repeat(np.arange(n_kernels), starts_per_kernel)
    state = rng.integers(n_states, size=n)
    action = rng.integers(n_actions, size=n)
    before = P[kern, state, action]
    after = P_tilde[kern, state, action]
    mu = 1.0 / n_states
    linf_b = np.abs(before - mu).max(axis=1)
    linf_a = np.abs(after - mu).max(axis=1)
    return FuzzResult(
        trial_id=np.arange(n),
        n_states=n_states,
        epsilon_mass=moved[kern, state, action],
        linf_before=linf_b,
        linf_after=linf_a,
        passed=linf_a <= linf_b + THEOREM_TOL,
        assumptions_ok=ok[kern],
    )


def build_subtask_chain(
    k: int,
    H: int,
    n_actions: int,
    gamma: float = 0.9,
    wrong_action: str = "restart",
) -> TabularMDP:
    """Chain of ``k * H + 1`` states with one advancing action per state.

    State 0 is the start and the last state is the goal ``g`` (reward 1 for
    any action there).  Action 0 advances.  With ``wrong_action="restart"``
    every other action sends the agent back to the start, and the goal itself
    loops back to the start, so a uniform policy needs ``kH`` consecutive
    lucky draws per visit to ``g``.  ``wrong_action="self_loop"`` keeps the
    agent in place instead and makes the goal absorbing.
    """
    if k < 1 or H < 0 or n_actions < 2:
        raise MDPError("need k >= 1, H >= 0 and n_actions >= 2")
    if wrong_action not in ("restart", "self_loop"):
        raise MDPError(f"unknown wrong_action {wrong_action!r}")
    n = k * H + 1
    goal = n - 1
    P = np.zeros((n, n_actions, n))
    for s in range(goal):
        P[s, 0, s + 1] = 1.0
        P[s, 1:, 0 if wrong_action == "restart" else s] = 1.0
    P[goal, :, 0 if wrong_action == "restart" else goal] = 1.0
    R = np.zeros((n, n_actions))
    R[goal, :] = 1.0
    rho = np.zeros(n)
    rho[0] = 1.0
    return TabularMDP(P, R, gamma, rho)


def chain_goal_mismatch(mdp: TabularMDP) -> float:
    """``d_opt(g) / d_uniform(g)`` on a chain from :func:`build_subtask_chain`."""
    n, A = mdp.n_states, mdp.n_actions
    d_opt = exact_visitation(mdp, PolicyTable.deterministic(np.zeros(n, dtype=int), A))
    d_uni = exact_visitation(mdp, PolicyTable.uniform(n, A))
    if d_uni[-1] == 0:
        return float("inf")
    return float(d_opt[-1] / d_uni[-1])
