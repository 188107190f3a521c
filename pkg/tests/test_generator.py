"""Known-optimum instance generator: certificates, bounds, flavors."""

import pytest

from jobshop import (GeneratorError, GeneratorSpec, generate_instance,
                     lower_bound, solve_exact, validate_certificate,
                     validate_solution, SearchConfig)


def gen(flavor="short", machines=2, ops=20, seed=0, **kw):
    return generate_instance(GeneratorSpec(flavor, machines, ops, seed, **kw))


class TestSpec:
    def test_name(self):
        spec = GeneratorSpec("long", 5, 100, 7)
        assert spec.name == "long-5-100-7"

    @pytest.mark.parametrize("kw", [
        dict(flavor="medium"),
        dict(num_machines=0),
        dict(num_ops=3),
        dict(min_dur=0),
        dict(min_dur=9, max_dur=8),
        dict(optimum=500),
        dict(short_new_prob=1.5),
    ])
    def test_invalid_specs(self, kw):
        base = dict(flavor="short", num_machines=5, num_ops=50, seed=0,
                    max_dur=1000)
        base.update(kw)
        with pytest.raises(GeneratorError):
            GeneratorSpec(**base)

    def test_quota_infeasible(self):
        # 100 ops on one machine at min_dur 10 need 1000 > optimum
        with pytest.raises(GeneratorError):
            generate_instance(GeneratorSpec("short", 1, 100, 0, optimum=999,
                                            min_dur=10, max_dur=999))


class TestConstruction:
    @pytest.mark.parametrize("flavor", ["long", "short"])
    @pytest.mark.parametrize("machines,ops", [(2, 20), (3, 30), (5, 100)])
    def test_certificate_validates(self, flavor, machines, ops):
        inst, cert = gen(flavor, machines, ops, seed=3)
        res = validate_certificate(inst, cert)
        assert res, res.detail
        assert cert.solution.makespan == 600_000

    @pytest.mark.parametrize("flavor", ["long", "short"])
    def test_bound_equals_design_optimum(self, flavor):
        inst, cert = gen(flavor, 3, 40, seed=1)
        assert lower_bound(inst) == 600_000
        assert cert.lower_bound == 600_000
        # every machine is saturated on [0, optimum)
        assert set(cert.machine_loads) == {600_000}

    def test_determinism(self):
        a_inst, a_cert = gen("long", 3, 30, seed=5)
        b_inst, b_cert = gen("long", 3, 30, seed=5)
        assert a_inst == b_inst
        assert a_cert.solution == b_cert.solution

    def test_seeds_differ(self):
        a, _ = gen("short", 3, 30, seed=1)
        b, _ = gen("short", 3, 30, seed=2)
        assert a != b

    def test_op_count_and_loads(self):
        inst, cert = gen("short", 4, 60, seed=9)
        assert inst.num_ops == 60
        assert inst.num_machines == 4
        for m in range(4):
            assert inst.machine_load(m) == 600_000

    def test_tampered_certificate_rejected(self):
        inst, cert = gen("short", 2, 20, seed=4)
        starts = [list(r) for r in cert.solution.starts]
        starts[0][0] += 1
        bad = type(cert.solution)(cert.solution.instance,
                                  cert.solution.makespan,
                                  tuple(tuple(r) for r in starts))
        assert not validate_solution(inst, bad)


class TestFlavorContrast:
    def test_long_jobs_are_longer(self):
        # the design contrast: long flavor builds few long chains, short
        # flavor many short ones
        longs, shorts = [], []
        for seed in range(10):
            li, _ = gen("long", 3, 60, seed=seed)
            si, _ = gen("short", 3, 60, seed=seed)
            longs.append(li.num_ops / li.num_jobs)
            shorts.append(si.num_ops / si.num_jobs)
        wins = sum(1 for a, b in zip(longs, shorts) if a > b)
        assert wins >= 9


class TestSolvedToDesignOptimum:
    def test_tiny_instances_solve_exactly(self):
        # small enough for complete search: the designed optimum is the
        # true optimum, not just a bound
        for flavor in ("long", "short"):
            inst, cert = gen(flavor, 2, 8, seed=2)
            inc, _ = solve_exact(inst, SearchConfig(time_limit_s=30.0, seed=0))
            assert inc.proven
            assert inc.best.makespan == 600_000
