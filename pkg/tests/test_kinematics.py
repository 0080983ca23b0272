import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coop_payload import geom
from coop_payload.errors import DisconnectedGraphError, InsufficientExcitation
from coop_payload.geom import Transform
from coop_payload.kinematics import (
    GraspGraph,
    TwistBatch,
    chain_estimates,
    estimate_grasp_graph,
    estimate_pairwise,
    estimate_position,
    estimate_rotation,
    position_system,
    refine_loop_closure,
    wahba_cost,
)


def quat_matrix(q):
    """Rotation from a unit quaternion (w, x, y, z); homogeneous quadratic form."""
    w, x, y, z = q
    return np.array([
        [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
    ])


def davenport_rotation(omega_i, omega_j):
    """Wahba solution by the quaternion eigenvector method: the gain
    sum_q omega_i . R(q) omega_j is a quadratic form q^T K q, built here by
    polarization, and the optimal q is K's top eigenvector."""
    def gain(q):
        return float(np.sum(omega_i * (quat_matrix(q) @ omega_j)))

    E = np.eye(4)
    K = np.empty((4, 4))
    for a in range(4):
        K[a, a] = gain(E[a])
    for a, b in itertools.combinations(range(4), 2):
        K[a, b] = K[b, a] = 0.5 * (gain(E[a] + E[b]) - K[a, a] - K[b, b])
    _, vecs = np.linalg.eigh(K)
    return quat_matrix(vecs[:, -1])


def random_rotation(rng):
    return geom.rot_exp(rng.normal(size=3) * 2)


def batch_pair(T_ij, Q=200, seed=0):
    """Twists of {j} and the matching twists of {i} on the same rigid body."""
    rng = np.random.default_rng(seed)
    Vj = rng.normal(size=(Q, 6))
    Vi = Vj @ geom.adjoint(T_ij).T
    return TwistBatch.from_twists(Vi, robot="i"), TwistBatch.from_twists(Vj, robot="j")


def test_rotation_identity_example():
    w = np.random.default_rng(0).normal(size=(3, 3))
    assert np.allclose(estimate_rotation(w, w).rotation, np.eye(3), atol=1e-12)


def test_rotation_quarter_turn_example():
    wj = np.eye(3)
    wi = np.column_stack([[0, 1, 0], [-1, 0, 0], [0, 0, 1]])
    assert np.allclose(estimate_rotation(wi, wj).rotation, geom.rot_axis("z", np.pi / 2), atol=1e-12)


def test_rotation_noisy_monte_carlo():
    rng = np.random.default_rng(1)
    for _ in range(20):
        R = random_rotation(rng)
        wj = rng.normal(size=(3, 500))
        wj /= np.linalg.norm(wj, axis=0)
        wi = R @ wj + 0.01 * rng.normal(size=(3, 500))
        R_hat = estimate_rotation(wi, wj).rotation
        assert geom.rotation_error_deg(R, R_hat) < 0.2
        assert np.allclose(R_hat, davenport_rotation(wi, wj), atol=1e-9)


def test_rotation_matches_quaternion_oracle_noise_free():
    rng = np.random.default_rng(2)
    for _ in range(20):
        R = random_rotation(rng)
        wj = rng.normal(size=(3, 50))
        wi = R @ wj
        R_hat = estimate_rotation(wi, wj).rotation
        assert np.allclose(R_hat, davenport_rotation(wi, wj), atol=1e-9)
        assert np.allclose(R_hat, R, atol=1e-9)


def test_rotation_rank_deficient():
    w = np.outer([0, 0, 1.0], np.arange(1, 11))
    with pytest.raises(InsufficientExcitation) as exc:
        estimate_rotation(w, w)
    assert exc.value.directions.shape[1] == 3
    with pytest.raises(InsufficientExcitation):
        estimate_rotation(np.eye(3)[:, :2], np.eye(3)[:, :2])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(1e-14, 1e-2))
def test_rotation_always_proper(seed, flat):
    # nearly planar data, including reflected pairs, still gives det +1
    rng = np.random.default_rng(seed)
    wj = rng.normal(size=(3, 20))
    wj[2] *= flat
    wi = np.diag([1.0, 1.0, -1.0]) @ random_rotation(rng) @ wj
    try:
        R = estimate_rotation(wi, wj).rotation
    except InsufficientExcitation:
        return
    assert geom.is_rotation(R, tol=1e-10)


def test_rotation_permutation_and_swap():
    rng = np.random.default_rng(3)
    wj = rng.normal(size=(3, 100))
    wi = random_rotation(rng) @ wj + 0.05 * rng.normal(size=(3, 100))
    R = estimate_rotation(wi, wj).rotation
    perm = rng.permutation(100)
    assert np.allclose(estimate_rotation(wi[:, perm], wj[:, perm]).rotation, R, atol=1e-12)
    assert np.allclose(estimate_rotation(wj, wi).rotation, R.T, atol=1e-10)


def test_rotation_is_global_minimizer():
    rng = np.random.default_rng(4)
    wj = rng.normal(size=(3, 100))
    wi = random_rotation(rng) @ wj + 0.3 * rng.normal(size=(3, 100))
    fit = estimate_rotation(wi, wj)
    for _ in range(50):
        assert fit.cost <= wahba_cost(random_rotation(rng), wi, wj)


def test_position_coincident_frames():
    rng = np.random.default_rng(5)
    w, v = rng.normal(size=(2, 3, 20))
    assert np.allclose(estimate_position(np.eye(3), w, v, v).translation, 0, atol=1e-12)


def test_position_noise_free_recovery():
    rng = np.random.default_rng(6)
    for _ in range(20):
        T = Transform(random_rotation(rng), rng.normal(size=3))
        bi, bj = batch_pair(T, seed=int(rng.integers(1 << 30)))
        p = estimate_position(T.rotation, bj.angular, bi.linear, bj.linear).translation
        assert np.allclose(p, T.translation, atol=1e-9)


def test_position_parallel_omega_unobservable():
    rng = np.random.default_rng(7)
    u = np.array([1.0, 2.0, 2.0]) / 3
    T = Transform(random_rotation(rng), np.array([0.3, -0.2, 0.5]))
    wj = np.outer(T.rotation.T @ u, rng.normal(size=40))
    vj = rng.normal(size=(3, 40))
    Vi = np.vstack([wj, vj]).T @ geom.adjoint(T).T
    with pytest.raises(InsufficientExcitation) as exc:
        estimate_position(T.rotation, wj, Vi[:, 3:].T, vj)
    d = exc.value.directions
    assert d.shape == (1, 3)
    assert abs(abs(d[0] @ u) - 1.0) < 1e-9
    # the component of p orthogonal to u is recovered
    p_perp = T.translation - (T.translation @ u) * u
    assert np.allclose(exc.value.partial_solution, p_perp, atol=1e-9)


def test_position_normal_equations_hold():
    rng = np.random.default_rng(8)
    T = Transform(random_rotation(rng), rng.normal(size=3))
    bi, bj = batch_pair(T)
    vi = bi.linear + 0.1 * rng.normal(size=bi.linear.shape)
    R = T.rotation
    p = estimate_position(R, bj.angular, vi, bj.linear).translation
    A, b = position_system(R, bj.angular, vi, bj.linear)
    assert np.allclose(A.T @ (A @ p - b), 0, atol=1e-8)


def test_pairwise_against_itself():
    b = TwistBatch.from_twists(np.random.default_rng(9).normal(size=(30, 6)), robot=1)
    est = estimate_pairwise(b, b)
    assert np.allclose(est.rotation, np.eye(3), atol=1e-12)
    assert np.allclose(est.translation, 0, atol=1e-12)


def _batches(gt):
    return [TwistBatch.from_twists(gt.ref_twist[i], robot=i + 1) for i in range(gt.n_robots)]


def test_pairwise_noise_free_preset(gt_a):
    b = _batches(gt_a)
    est = estimate_pairwise(b[0], b[1])
    assert geom.rotation_error_deg(np.eye(3), est.rotation) < 1e-6
    assert np.allclose(est.translation, [0.647, 0.533, 0.0], atol=1e-9, rtol=0)


def test_chain_exact_pairs():
    rng = np.random.default_rng(10)
    T12 = Transform(random_rotation(rng), rng.normal(size=3))
    T13 = Transform(random_rotation(rng), rng.normal(size=3))
    ests = []
    for (i, j), T in {(1, 2): T12, (1, 3): T13}.items():
        bi, bj = batch_pair(T)
        e = estimate_pairwise(TwistBatch(bi.angular, bi.linear, i), TwistBatch(bj.angular, bj.linear, j))
        ests.append(e)
    g = chain_estimates(ests, reference=1)
    assert g[1].allclose(Transform.identity(), atol=0)
    assert np.array_equal(g.T(2, 3).matrix, (g[2].inverse() @ g[3]).matrix)
    assert g.T(2, 3).allclose(T12.inverse() @ T13, atol=1e-9)


def test_chain_disconnected():
    b = TwistBatch.from_twists(np.random.default_rng(11).normal(size=(30, 6)), robot=1)
    e = estimate_pairwise(b, TwistBatch(b.angular, b.linear, 2))
    with pytest.raises(DisconnectedGraphError) as exc:
        chain_estimates([e], reference=1, frames=[1, 2, 3])
    assert exc.value.unreachable == [3]


def test_chain_matches_direct_pair(gt_a):
    b = _batches(gt_a)
    graph, _ = estimate_grasp_graph(b, reference=1, refine=False)
    direct = estimate_pairwise(b[1], b[2])
    assert graph.T(2, 3).allclose(direct.transform, atol=1e-8)
    truth = gt_a.scenario.payload
    for i, j in [(1, 2), (2, 3), (3, 1)]:
        assert graph.T(i, j).allclose(truth.T_ij(i, j), atol=1e-9)


def test_refine_exact_is_fixed_point(gt_a):
    b = _batches(gt_a)
    graph, _ = estimate_grasp_graph(b, reference=1, refine=False)
    refined = refine_loop_closure(graph, b)
    assert refined.meta["initial_cost"] < 1e-12
    assert refined.meta["iterations"] == 0
    for f in graph.frames:
        assert refined[f].allclose(graph[f], atol=1e-12)


def test_refine_recovers_from_perturbation(gt_a):
    b = [TwistBatch(x.angular[:, ::5], x.linear[:, ::5], x.robot) for x in _batches(gt_a)]
    truth = gt_a.scenario.payload
    rng = np.random.default_rng(12)
    start = {1: Transform.identity()}
    for f in (2, 3):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        d = rng.normal(size=3)
        d *= 0.05 / np.linalg.norm(d)
        T = truth.T_ij(1, f)
        start[f] = Transform(T.rotation @ geom.rot_exp(np.radians(5) * axis), T.translation + d)
    refined = refine_loop_closure(GraspGraph(1, start), b)
    assert refined.meta["final_cost"] <= refined.meta["initial_cost"]
    for f in (2, 3):
        assert geom.rotation_error_deg(truth.T_ij(1, f).rotation, refined[f].rotation) < 1e-4
        assert np.linalg.norm(truth.T_ij(1, f).translation - refined[f].translation) < 1e-4


def test_refine_non_finite_returns_input():
    b = [TwistBatch.from_twists(np.full((10, 6), np.nan), robot=r) for r in (1, 2)]
    g = GraspGraph(1, {1: Transform.identity(), 2: Transform.identity()})
    out = refine_loop_closure(g, b)
    assert out.meta["success"] is False
    assert out[2].allclose(Transform.identity(), atol=0)


def test_refinement_helps_on_noisy_twists(gt_a):
    truth = gt_a.scenario.payload
    clean = gt_a.ref_twist[:, ::4]
    unrefined, refined = [], []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        noisy = clean + rng.normal(0, 0.02, clean.shape)
        b = [TwistBatch.from_twists(noisy[i], robot=i + 1) for i in range(3)]
        g0, _ = estimate_grasp_graph(b, reference=1, refine=False)
        g1 = refine_loop_closure(g0, b)
        assert g1.meta["final_cost"] <= g1.meta["initial_cost"]
        for g, out in ((g0, unrefined), (g1, refined)):
            for i, j in [(1, 2), (2, 3), (3, 1)]:
                T = g.T(i, j)
                out.append((geom.rotation_error_deg(truth.T_ij(i, j).rotation, T.rotation),
                            np.linalg.norm(truth.T_ij(i, j).translation - T.translation)))
    u, r = np.mean(unrefined, axis=0), np.mean(refined, axis=0)
    assert r[0] <= u[0] and r[1] <= u[1]
