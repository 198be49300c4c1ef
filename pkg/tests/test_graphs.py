import numpy as np
import pytest

from disgrad.errors import AssumptionViolation, InvalidParameter
from disgrad.graphs import (
    GraphPhase,
    GraphSchedule,
    MixingSchedule,
    WeightMatrix,
    build_mixing,
    is_connected,
    metropolis_weights,
    normalize_edges,
    phi_product,
    randomized_weights,
    validate_weights,
)

RING_10 = [[i, i + 1] for i in range(1, 10)] + [[10, 1]]
TWO_CYCLES_BRIDGED_10 = (
    [[1, 3], [3, 5], [5, 7], [7, 9], [9, 1]]
    + [[2, 4], [4, 6], [6, 8], [8, 10], [10, 2]]
    + [[1, 2]]
)


def alternating_schedule(dwell=50):
    return GraphSchedule(
        10,
        (
            GraphPhase(tuple(tuple(e) for e in RING_10), dwell),
            GraphPhase(tuple(tuple(e) for e in TWO_CYCLES_BRIDGED_10), dwell),
        ),
        cycling=True,
    )


class TestEdges:
    def test_normalize_dedups_and_orients(self):
        edges = normalize_edges([[2, 1], [1, 2], [3, 1]], 3)
        assert edges == ((1, 2), (1, 3))

    def test_self_loop_rejected(self):
        with pytest.raises(InvalidParameter):
            normalize_edges([[1, 1]], 3)

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidParameter):
            normalize_edges([[0, 2]], 3)

    def test_connectivity(self):
        assert is_connected(((1, 2), (2, 3)), 3)
        assert not is_connected(((1, 2),), 3)
        assert not is_connected((), 2)


class TestMetropolis:
    def test_complete_pair(self):
        wm = metropolis_weights([[1, 2]], 2)
        assert wm.w == pytest.approx(np.full((2, 2), 0.5))
        assert wm.eta == pytest.approx(0.5)

    def test_path_graph(self):
        wm = metropolis_weights([[1, 2], [2, 3]], 3)
        w = wm.w
        assert w[0, 1] == pytest.approx(1 / 3)
        assert w[1, 2] == pytest.approx(1 / 3)
        assert w[0, 0] == pytest.approx(2 / 3)
        assert w[2, 2] == pytest.approx(2 / 3)
        assert w[1, 1] == pytest.approx(1 / 3)
        assert w[0, 2] == 0.0
        assert wm.eta == pytest.approx(1 / 3)

    def test_star_graph(self):
        wm = metropolis_weights([[1, 2], [1, 3], [1, 4]], 4)
        report = validate_weights(wm, [[1, 2], [1, 3], [1, 4]])
        assert report.passed
        assert np.min(np.diag(wm.w)) >= 1 / 5

    def test_disconnected_rejected(self):
        with pytest.raises(AssumptionViolation, match="connectivity"):
            metropolis_weights([[1, 2]], 3)

    def test_constructor_outputs_always_validate(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            m = int(rng.integers(3, 8))
            # random connected graph: a random tree plus extra edges
            edges = [(int(rng.integers(1, i)), i) for i in range(2, m + 1)]
            for _ in range(m):
                i, j = rng.integers(1, m + 1, size=2)
                if i != j:
                    edges.append((int(min(i, j)), int(max(i, j))))
            wm = metropolis_weights(edges, m)
            assert validate_weights(wm, edges).passed


class TestRandomized:
    def test_validates_and_differs_from_metropolis(self):
        edges = [[1, 2], [2, 3]]
        wm = randomized_weights(edges, 3, eta_floor=0.1, seed=7)
        assert validate_weights(wm, edges).passed
        base = metropolis_weights(edges, 3)
        assert not np.allclose(wm.w, base.w)

    def test_infeasible_floor_rejected(self):
        # path graph max degree 2 -> floor must be <= 1/3
        with pytest.raises(InvalidParameter):
            randomized_weights([[1, 2], [2, 3]], 3, eta_floor=0.5, seed=1)

    def test_two_seeds_two_matrices(self):
        edges = [[1, 2], [2, 3], [1, 3]]
        w1 = randomized_weights(edges, 3, eta_floor=0.05, seed=1)
        w2 = randomized_weights(edges, 3, eta_floor=0.05, seed=2)
        assert validate_weights(w1, edges).passed
        assert validate_weights(w2, edges).passed
        assert not np.allclose(w1.w, w2.w)

    def test_floor_respected(self):
        edges = RING_10
        wm = randomized_weights(edges, 10, eta_floor=0.08, seed=3)
        assert wm.eta >= 0.08 - 1e-12
        assert validate_weights(wm, edges).passed


class TestValidateWeights:
    def test_identity_is_stochastic(self):
        wm = WeightMatrix(np.eye(3), eta=1.0)
        report = validate_weights(wm, [])
        assert report.passed
        assert report.row_residual == 0.0

    def test_negative_entry_fails(self):
        w = np.array([[1.01, -0.01], [-0.01, 1.01]])
        report = validate_weights(WeightMatrix(w, eta=0.0), [[1, 2]])
        assert not report.passed
        assert any("nonnegativity" in msg for msg in report.messages)

    def test_off_pattern_entry_fails(self):
        w = metropolis_weights([[1, 2], [2, 3], [1, 3]], 3).w
        report = validate_weights(WeightMatrix(w, eta=0.1), [[1, 2], [2, 3]])
        assert not report.passed
        assert any("sparsity" in msg for msg in report.messages)

    def test_broken_row_sum_fails(self):
        w = np.array([[0.6, 0.3], [0.4, 0.6]])
        report = validate_weights(WeightMatrix(w, eta=0.1), [[1, 2]])
        assert not report.passed


class TestSchedule:
    def test_phase_indexing_and_cycling(self):
        sched = alternating_schedule(dwell=50)
        assert sched.phase_index(1) == 0
        assert sched.phase_index(50) == 0
        assert sched.phase_index(51) == 1
        assert sched.phase_index(100) == 1
        assert sched.phase_index(101) == 0
        assert sched.phase_index(1000) == 1

    def test_non_cycling_clamps(self):
        sched = GraphSchedule(
            3,
            (GraphPhase(((1, 2), (2, 3)), 2), GraphPhase(((1, 3), (2, 3)), 2)),
            cycling=False,
        )
        assert sched.phase_index(10) == 1

    def test_disconnected_phase_rejected(self):
        with pytest.raises(AssumptionViolation, match="connectivity"):
            GraphSchedule(3, (GraphPhase(((1, 2),), 1),))

    def test_round_index_from_one(self):
        sched = alternating_schedule()
        with pytest.raises(InvalidParameter):
            sched.phase_index(0)


class TestPhiProduct:
    def test_single_factor(self):
        mixing = build_mixing(alternating_schedule(), "metropolis")
        assert np.array_equal(phi_product(mixing, 7, 7), mixing.matrix_at(7))

    def test_averaging_matrix_is_idempotent(self):
        m = 4
        ones = np.full((m, m), 1.0 / m)
        sched = GraphSchedule(
            m, (GraphPhase(normalize_edges([[i, j] for i in range(1, m + 1) for j in range(i + 1, m + 1)], m), 1),)
        )
        mixing = MixingSchedule(sched, (WeightMatrix(ones, eta=1.0 / m),))
        prod = phi_product(mixing, 1, 20)
        assert prod == pytest.approx(ones, abs=1e-14)

    def test_invalid_range(self):
        mixing = build_mixing(alternating_schedule(), "metropolis")
        with pytest.raises(InvalidParameter):
            phi_product(mixing, 5, 4)

    def test_product_stays_doubly_stochastic_after_1000_factors(self):
        mixing = build_mixing(alternating_schedule(), "randomized", eta_floor=0.05, seed=9)
        prod = phi_product(mixing, 1, 1000)
        assert np.max(np.abs(prod.sum(axis=0) - 1.0)) <= 1e-10
        assert np.max(np.abs(prod.sum(axis=1) - 1.0)) <= 1e-10

    def test_contraction_bound_20_factors(self):
        mixing = build_mixing(alternating_schedule(), "randomized", eta_floor=0.05, seed=12)
        q = mixing.contraction_base
        prod = phi_product(mixing, 1, 21)
        m = mixing.num_agents
        assert np.max(np.abs(prod - 1.0 / m)) <= q**20

    @pytest.mark.parametrize("kind,kwargs", [
        ("metropolis", {}),
        ("randomized", {"eta_floor": 0.05, "seed": 4}),
    ])
    def test_geometric_mixing_up_to_200(self, kind, kwargs):
        mixing = build_mixing(alternating_schedule(), kind, **kwargs)
        m = mixing.num_agents
        q = mixing.contraction_base
        for s in (1, 30):
            prod = mixing.matrix_at(s).copy()
            for k in range(s + 1, s + 201):
                prod = mixing.matrix_at(k) @ prod
                gap = k - s
                deviation = np.max(np.abs(prod - 1.0 / m))
                assert deviation <= q**gap, f"s={s}, k-s={gap}"
                frob = np.linalg.norm(prod - np.full((m, m), 1.0 / m))
                assert frob <= m * q**gap

    def test_small_network_mixing_bound(self):
        # the bound holds on every network size we simulate (m <= 10)
        for m in (3, 5, 10):
            edges = [[i, i + 1] for i in range(1, m)] + [[m, 1]]
            sched = GraphSchedule(m, (GraphPhase(normalize_edges(edges, m), 1),))
            mixing = build_mixing(sched, "metropolis")
            q = mixing.contraction_base
            prod = mixing.matrix_at(1).copy()
            for k in range(2, 202):
                prod = mixing.matrix_at(k) @ prod
                assert np.max(np.abs(prod - 1.0 / m)) <= q ** (k - 1)


class TestBuildMixing:
    def test_metropolis_build(self):
        mixing = build_mixing(alternating_schedule(), "metropolis")
        assert len(mixing.matrices) == 2
        assert mixing.eta == pytest.approx(min(wm.eta for wm in mixing.matrices))
        assert 0 < mixing.contraction_base < 1

    def test_randomized_needs_parameters(self):
        with pytest.raises(InvalidParameter):
            build_mixing(alternating_schedule(), "randomized")

    def test_unknown_kind(self):
        with pytest.raises(InvalidParameter):
            build_mixing(alternating_schedule(), "laplacian")

    def test_mixing_validates_matrices(self):
        sched = GraphSchedule(2, (GraphPhase(((1, 2),), 1),))
        bad = WeightMatrix(np.array([[0.9, 0.2], [0.1, 0.8]]), eta=0.1)
        with pytest.raises(AssumptionViolation, match="doubly stochastic"):
            MixingSchedule(sched, (bad,))
