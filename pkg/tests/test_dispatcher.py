"""Rating, estimation, placement, migration, replication, bursting,
aggregation placement."""

import random
from fractions import Fraction

import pytest

from lambdagrid.dispatcher import (
    DEFAULT_WEIGHTS,
    BurstReason,
    Dispatcher,
    JobProgress,
    PlacementMode,
    ProvisionThresholds,
    RatingWeights,
    TaskRunState,
    aggregation_compute_seconds,
    compute_seconds,
    estimate_time,
    plan_aggregation,
    plan_replicas,
    provision_cloud,
    rate_node,
    should_migrate,
)
from lambdagrid.errors import InvalidConfig, JobIncomplete, NoAvailableNode
from lambdagrid.simkernel import ZERO
from lambdagrid.views import NodeStats
from lambdagrid.workload import JobSpec, TaskOrigin, TaskSpec

from support import brute_force_aggregation, make_snapshot, mknode

ONE = Fraction(1)


def _task(tid="t1", cost=10**10, in_size=0, out_size=0, loc=None, job="j"):
    return TaskSpec(
        id=tid,
        job_id=job,
        compute_cost=Fraction(cost),
        input_size=Fraction(in_size),
        output_size=Fraction(out_size),
        origin=TaskOrigin.BATCH,
        input_location=loc,
    )


def _stats(completed=0, failed=0, availability=ONE, up=True):
    attempts = completed + failed
    return NodeStats(
        completed=completed,
        failed=failed,
        heartbeats=0,
        duration_sum=ZERO,
        duration_sq=ZERO,
        max_duration=None,
        mean_duration=None,
        success_rate=Fraction(completed, attempts) if attempts else ONE,
        availability_fraction=availability,
        currently_up=up,
    )


class TestWeights:
    def test_defaults_are_convex(self):
        w = DEFAULT_WEIGHTS
        assert w.w_cpu + w.w_mem + w.w_io + w.w_net + w.w_hist == 1
        assert w.w_cpu == Fraction(1, 4)
        assert w.w_mem == Fraction(1, 10)
        assert w.w_io == Fraction(3, 20)

    def test_sum_must_be_one(self):
        with pytest.raises(InvalidConfig):
            RatingWeights(ONE, ONE, ZERO, ZERO, ZERO)

    def test_negative_rejected(self):
        with pytest.raises(InvalidConfig):
            RatingWeights(Fraction(3, 2), Fraction(-1, 2), ZERO, ZERO, ZERO)

    def test_normalized(self):
        w = RatingWeights.normalized(2, 1, 1, 1, 5)
        assert w.w_cpu == Fraction(2, 10)
        assert w.w_hist == Fraction(5, 10)

    def test_normalized_rejects_all_zero(self):
        with pytest.raises(InvalidConfig):
            RatingWeights.normalized(0, 0, 0, 0, 0)


class TestRating:
    def test_equal_weights_half_cpu(self):
        nodes = [mknode("fast", cpu=2e9), mknode("slow", cpu=1e9)]
        snap = make_snapshot(nodes)
        w = RatingWeights.normalized(1, 1, 1, 1, 1)
        r = rate_node(snap, snap.nodes["slow"], w)
        assert r.score == Fraction(9, 10)
        assert r.components["cpu"] == Fraction(1, 2)
        assert r.components["hist"] == 1
        assert rate_node(snap, snap.nodes["fast"], w).score == 1

    def test_history_component(self):
        nodes = [mknode("a"), mknode("b")]
        stats = {"a": _stats(completed=3, failed=1, availability=Fraction(1, 2))}
        snap = make_snapshot(nodes, stats=stats)
        r = rate_node(snap, snap.nodes["a"])
        assert r.components["hist"] == Fraction(3, 4) * Fraction(1, 2)
        assert rate_node(snap, snap.nodes["b"]).components["hist"] == 1

    def test_score_bounded(self):
        rng = random.Random(5)
        for _ in range(50):
            nodes = [
                mknode(f"n{i}", cpu=rng.randint(1, 9) * 10**9, mem=rng.randint(1, 9) * 10**9,
                       io=rng.randint(1, 9) * 10**8, net=rng.randint(1, 9) * 10**8)
                for i in range(rng.randint(1, 5))
            ]
            snap = make_snapshot(nodes)
            for n in nodes:
                score = rate_node(snap, n).score
                assert 0 <= score <= 1


class TestEstimate:
    def test_idle_node_compute_only(self):
        snap = make_snapshot([mknode("n1", cpu=1e9)])
        est = estimate_time(_task(cost=10**10), snap.nodes["n1"], snap)
        assert est.compute == Fraction(10)
        assert est.transfer_in == ZERO and est.queue_wait == ZERO and est.transfer_out == ZERO
        assert est.total == Fraction(10)

    def test_io_terms_in_compute(self):
        snap = make_snapshot([mknode("n1", cpu=1e9, io=1e8)])
        est = estimate_time(
            _task(cost=10**9, in_size=2 * 10**8, out_size=10**8), snap.nodes["n1"], snap
        )
        assert est.compute == Fraction(1) + Fraction(2) + Fraction(1)

    def test_queue_wait_from_snapshot(self):
        snap = make_snapshot([mknode("n1")], queue_work={"n1": Fraction(7, 2)})
        est = estimate_time(_task(cost=10**9), snap.nodes["n1"], snap)
        assert est.queue_wait == Fraction(7, 2)
        assert est.total == Fraction(7, 2) + Fraction(1)

    def test_ingress_transfer_uses_destination_link_only(self):
        snap = make_snapshot([mknode("n1", net=2e8, latency="0.003")])
        est = estimate_time(_task(cost=10**9, in_size=10**8), snap.nodes["n1"], snap)
        assert est.transfer_in == Fraction(3, 1000) + Fraction(1, 2)

    def test_remote_input_uses_bottleneck(self):
        nodes = [mknode("n1", net=1e8), mknode("n2", net=1e9)]
        snap = make_snapshot(nodes)
        est = estimate_time(_task(cost=10**9, in_size=10**9, loc="n1"), snap.nodes["n2"], snap)
        assert est.transfer_in == Fraction(10)

    def test_local_input_is_free(self):
        snap = make_snapshot([mknode("n1")])
        est = estimate_time(_task(cost=10**9, in_size=10**12, loc="n1"), snap.nodes["n1"], snap)
        assert est.transfer_in == ZERO


class TestBaselinePlacement:
    def test_round_robin_in_id_order(self):
        snap = make_snapshot([mknode("n1"), mknode("n2")])
        d = Dispatcher()
        tasks = [_task(f"t{i}") for i in range(1, 5)]
        got = [p.node_id for p in d.place(tasks, snap, PlacementMode.BASELINE)]
        assert got == ["n1", "n2", "n1", "n2"]

    def test_cursor_persists_across_calls(self):
        snap = make_snapshot([mknode("n1"), mknode("n2")])
        d = Dispatcher()
        first = [p.node_id for p in d.place([_task("a")], snap, PlacementMode.BASELINE)]
        second = [p.node_id for p in d.place([_task("b")], snap, PlacementMode.BASELINE)]
        assert first + second == ["n1", "n2"]

    def test_unavailable_nodes_skipped(self):
        snap = make_snapshot(
            [mknode("n1"), mknode("n2")], availability={"n1": False, "n2": True}
        )
        d = Dispatcher()
        got = [p.node_id for p in d.place([_task("a"), _task("b")], snap, PlacementMode.BASELINE)]
        assert got == ["n2", "n2"]

    def test_no_available_node(self):
        snap = make_snapshot([mknode("n1")], availability={"n1": False})
        with pytest.raises(NoAvailableNode):
            Dispatcher().place([_task()], snap, PlacementMode.BASELINE)

    def test_candidate_restriction(self):
        snap = make_snapshot([mknode("n1"), mknode("n2"), mknode("n3")])
        d = Dispatcher()
        got = [
            p.node_id
            for p in d.place([_task("a"), _task("b")], snap, PlacementMode.BASELINE,
                             candidates=["n3", "n2"])
        ]
        assert got == ["n2", "n3"]


class TestSmartPlacement:
    def test_picks_fastest_total(self):
        snap = make_snapshot([mknode("slow", cpu=1e9), mknode("fast", cpu=1e10)])
        p = Dispatcher().place([_task()], snap, PlacementMode.SMART)[0]
        assert p.node_id == "fast"
        assert p.estimate.total == Fraction(1)

    def test_overlay_counts_same_call_work(self):
        snap = make_snapshot([mknode("n1"), mknode("n2")])
        got = [
            p.node_id
            for p in Dispatcher().place([_task("a"), _task("b")], snap, PlacementMode.SMART)
        ]
        assert got == ["n1", "n2"]

    def test_overlay_can_still_pack_when_queueing_is_cheaper(self):
        snap = make_snapshot([mknode("slow", cpu=1e9), mknode("fast", cpu=1e10)])
        got = [
            p.node_id
            for p in Dispatcher().place(
                [_task("a", cost=10**9), _task("b", cost=10**9)], snap, PlacementMode.SMART
            )
        ]
        # second task: fast queue 0.1 + run 0.1 beats slow idle 1.0
        assert got == ["fast", "fast"]

    def test_tie_breaks_on_rating_then_id(self):
        # same est totals; mem differs so ratings differ
        snap = make_snapshot([mknode("n1", mem=2e9), mknode("n2", mem=4e9)])
        p = Dispatcher().place([_task()], snap, PlacementMode.SMART)[0]
        assert p.node_id == "n2"
        snap_eq = make_snapshot([mknode("n2"), mknode("n1")])
        p_eq = Dispatcher().place([_task()], snap_eq, PlacementMode.SMART)[0]
        assert p_eq.node_id == "n1"

    def test_floor_filters_low_rated_nodes(self):
        # n2 idles but rates poorly; floor forces the busy good node
        nodes = [mknode("n1", cpu=1e10, mem=8e9, io=1e9, net=1e9),
                 mknode("n2", cpu=1e9, mem=1e9, io=1e8, net=1e8)]
        w = RatingWeights.normalized(1, 1, 1, 1, 0)
        queue = {"n1": Fraction(100)}
        snap = make_snapshot(nodes, queue_work=queue)
        without = Dispatcher(weights=w).place([_task()], snap, PlacementMode.SMART)[0]
        assert without.node_id == "n2"
        with_floor = Dispatcher(weights=w, rating_floor=Fraction(1, 2)).place(
            [_task()], snap, PlacementMode.SMART
        )[0]
        assert with_floor.node_id == "n1"

    def test_floor_filtering_everyone_falls_back(self):
        snap = make_snapshot([mknode("n1"), mknode("n2")])
        d = Dispatcher(rating_floor=Fraction(2))
        got = d.place([_task()], snap, PlacementMode.SMART)[0]
        assert got.node_id == "n1"


class TestMigration:
    def _snap(self):
        # current holder n2; candidate n1 idle, no bytes to move but latency
        return make_snapshot(
            [mknode("n1", cpu=1e9, latency="2.5"), mknode("n2", cpu=1e9, latency="2.5")]
        )

    def test_clear_win_moves(self):
        snap = self._snap()
        state = TaskRunState(task=_task(cost=10**10), node_id="n2", remaining_current=Fraction(100))
        d = should_migrate(state, snap, hysteresis=Fraction(1, 5))
        assert d.stay is False
        assert d.target == "n1"
        assert d.best_alternative == Fraction(15)  # 5 move + 10 compute
        assert d.remaining_current == Fraction(100)

    def test_threshold_is_strict(self):
        snap = self._snap()
        state = TaskRunState(task=_task(cost=10**10), node_id="n2", remaining_current=Fraction(18))
        d = should_migrate(state, snap, hysteresis=Fraction(1, 5))
        assert d.stay is True  # 18 == 15 * 1.2 exactly; no move
        d2 = should_migrate(
            TaskRunState(task=_task(cost=10**10), node_id="n2",
                         remaining_current=Fraction(18) + Fraction(1, 10**6)),
            snap, hysteresis=Fraction(1, 5),
        )
        assert d2.stay is False

    def test_equal_remaining_stays(self):
        snap = self._snap()
        state = TaskRunState(task=_task(cost=10**10), node_id="n2", remaining_current=Fraction(15))
        assert should_migrate(state, snap, hysteresis=ZERO).stay is True

    def test_no_alternative_stays(self):
        snap = make_snapshot(
            [mknode("n1"), mknode("n2")], availability={"n1": False, "n2": True}
        )
        state = TaskRunState(task=_task(), node_id="n2", remaining_current=Fraction(1000))
        d = should_migrate(state, snap, hysteresis=ZERO)
        assert d.stay is True and d.best_alternative is None

    def test_move_cost_includes_input_bytes(self):
        snap = make_snapshot([mknode("n1", net=1e8), mknode("n2", net=1e8)])
        state = TaskRunState(
            task=_task(cost=10**9, in_size=10**9), node_id="n2", remaining_current=Fraction(100)
        )
        d = should_migrate(state, snap, hysteresis=ZERO)
        # 10 s moving the input across 1e8 links, then 1 s cpu + 1 s input read
        assert d.best_alternative == Fraction(10) + Fraction(1) + Fraction(1)


class TestReplication:
    def _snap(self):
        return make_snapshot(
            [
                mknode("g1", "grid", cpu=4e9, mean_up=100),
                mknode("g2", "grid", cpu=3e9, mean_up=100),
                mknode("g3", "grid", cpu=2e9, mean_up=100),
                mknode("c1", "cloud", cpu=1e9),
            ]
        )

    def test_top_rated_distinct_from_primary(self):
        snap = self._snap()
        assert plan_replicas(_task(), snap, 2, primary="g3") == ("g1", "g2")

    def test_nested_as_count_grows(self):
        snap = self._snap()
        prev = ()
        for r in range(0, 4):
            got = plan_replicas(_task(), snap, r, primary="g3")
            assert got[: len(prev)] == prev
            prev = got

    def test_cloud_primary_gets_none(self):
        assert plan_replicas(_task(), self._snap(), 3, primary="c1") == ()

    def test_zero_count(self):
        assert plan_replicas(_task(), self._snap(), 0, primary="g1") == ()

    def test_clamped_to_pool(self):
        got = plan_replicas(_task(), self._snap(), 99, primary="g1")
        assert len(got) == 3

    def test_negative_count_rejected(self):
        with pytest.raises(InvalidConfig):
            plan_replicas(_task(), self._snap(), -1, primary="g1")

    def test_unavailable_nodes_excluded(self):
        snap = make_snapshot(
            [mknode("g1", "grid", mean_up=10), mknode("g2", "grid", mean_up=10),
             mknode("g3", "grid", mean_up=10)],
            availability={"g1": True, "g2": False, "g3": True},
        )
        assert plan_replicas(_task(), snap, 2, primary="g1") == ("g3",)


class TestProvisioning:
    def _progress(self, completed=0, assigned=0, total=5, durations=(), started=0):
        return JobProgress(
            job_id="j",
            started_at=Fraction(started),
            total_tasks=total,
            completed=completed,
            assigned=assigned,
            finished_durations=tuple(Fraction(str(d)) for d in durations),
        )

    def test_completion_shortfall_at_checkpoint(self):
        th = ProvisionThresholds()
        p = self._progress(completed=2, assigned=5)
        assert provision_cloud(p, th, 300).reason is BurstReason.COMPLETION
        assert provision_cloud(self._progress(completed=3, assigned=5), th, 300) is None

    def test_before_checkpoint_no_completion_trigger(self):
        th = ProvisionThresholds()
        assert provision_cloud(self._progress(completed=0, assigned=5), th, 299) is None

    def test_assignment_after_grace(self):
        th = ProvisionThresholds()
        p = self._progress(completed=0, assigned=2)
        assert provision_cloud(p, th, 30).reason is BurstReason.ASSIGNMENT
        assert provision_cloud(self._progress(assigned=3), th, 30) is None
        assert provision_cloud(self._progress(assigned=2), th, 29) is None

    def test_completion_checked_before_assignment(self):
        th = ProvisionThresholds()
        p = self._progress(completed=0, assigned=0)
        assert provision_cloud(p, th, 300).reason is BurstReason.COMPLETION

    def test_identical_durations_never_trigger_variance(self):
        th = ProvisionThresholds(variance_v=Fraction(1, 10**6))
        p = self._progress(completed=5, assigned=5, durations=(4, 4, 4, 4))
        assert provision_cloud(p, th, 1) is None

    def test_variance_boundary_is_strict(self):
        p = self._progress(completed=5, assigned=5, durations=(1, 3))
        at_boundary = ProvisionThresholds(variance_v=Fraction(1, 2))
        assert provision_cloud(p, at_boundary, 1) is None  # variance == (v*mean)^2
        below = ProvisionThresholds(variance_v=Fraction(49, 100))
        assert provision_cloud(p, below, 1).reason is BurstReason.VARIANCE

    def test_thresholds_validated(self):
        with pytest.raises(InvalidConfig):
            ProvisionThresholds(completion_c=ZERO)
        with pytest.raises(InvalidConfig):
            ProvisionThresholds(deadline=ZERO)


class TestAggregationPlacement:
    def _fixture(self):
        nodes = [
            mknode("n1", io=1e8, net=1e8),
            mknode("n2", io=1e8, net=1e8),
            mknode("n3", io=4e8, net=1e8),
        ]
        job = JobSpec(
            id="j",
            tasks=(_task("j-t0"), _task("j-t1")),
            aggregation_output_size=Fraction(10**8),
        )
        partials = [("n1", Fraction(10**8)), ("n2", Fraction(10**8))]
        return make_snapshot(nodes), job, partials

    def test_parallel_transfer_and_io_bound_choice(self):
        snap, job, partials = self._fixture()
        p = plan_aggregation(job, snap, partials)
        assert p.node_id == "n3"
        assert p.estimate.transfer_in == Fraction(1)  # slowest single partial
        assert p.estimate.compute == Fraction(3, 4)  # (2e8 + 1e8) / 4e8
        assert p.estimate.total == Fraction(7, 4)
        assert p.task_id == "j/aggregate"

    def test_matches_brute_force_on_fixture(self):
        snap, job, partials = self._fixture()
        p = plan_aggregation(job, snap, partials)
        nid, arrival, compute = brute_force_aggregation(job, snap, partials)
        assert (p.node_id, p.estimate.transfer_in, p.estimate.compute) == (nid, arrival, compute)

    def test_incomplete_job_rejected(self):
        snap, job, partials = self._fixture()
        with pytest.raises(JobIncomplete):
            plan_aggregation(job, snap, partials[:1])

    def test_all_down_raises(self):
        snap, job, partials = self._fixture()
        dead = make_snapshot(
            list(snap.nodes.values()),
            availability={nid: False for nid in snap.nodes},
        )
        with pytest.raises(NoAvailableNode):
            plan_aggregation(job, dead, partials)

    def test_randomized_agreement_with_brute_force(self):
        rng = random.Random(99)
        for _ in range(200):
            n = rng.randint(2, 6)
            nodes = [
                mknode(
                    f"n{i}",
                    io=rng.randint(1, 9) * 10**8,
                    net=rng.randint(1, 9) * 10**8,
                    latency=Fraction(rng.randint(0, 50), 1000),
                )
                for i in range(n)
            ]
            snap = make_snapshot(nodes)
            k = rng.randint(1, 5)
            tasks = tuple(_task(f"j-t{i}") for i in range(k))
            job = JobSpec(id="j", tasks=tasks,
                          aggregation_output_size=Fraction(rng.randint(0, 5) * 10**7))
            partials = [
                (f"n{rng.randrange(n)}", Fraction(rng.randint(1, 20) * 10**7)) for _ in range(k)
            ]
            p = plan_aggregation(job, snap, partials)
            nid, arrival, compute = brute_force_aggregation(job, snap, partials)
            assert p.node_id == nid
            assert p.estimate.transfer_in == arrival
            assert p.estimate.compute == compute

    def test_compute_seconds_formula(self):
        node = mknode("n", io=2e8)
        job = JobSpec(id="j", tasks=(_task(),), aggregation_output_size=Fraction(10**8))
        assert aggregation_compute_seconds(job, Fraction(3 * 10**8), node) == Fraction(2)

    def test_task_compute_seconds_formula(self):
        node = mknode("n", cpu=2e9, io=1e8)
        t = _task(cost=10**10, in_size=10**8, out_size=2 * 10**8)
        assert compute_seconds(t, node) == Fraction(5) + Fraction(1) + Fraction(2)
