import os

import pytest

import cdqac

FIXTURES = os.path.join(os.path.dirname(__file__), "..", "fixtures")


def test_tiny_instance_episode():
    inst = cdqac.load_instance(os.path.join(FIXTURES, "tiny1.fjs"))
    assert (inst.num_jobs, inst.num_machines, inst.num_operations) == (2, 2, 4)
    state = cdqac.SimState(inst)
    assert state.legal_actions() == [(0, 0, 0), (0, 0, 1), (1, 0, 0)]
    total = 0
    while not state.is_terminal():
        total += state.apply(state.legal_actions()[0])
    trace = state.trace()
    assert total == -cdqac.makespan(trace, inst)
    assert cdqac.validate(trace, inst) == []


def test_heuristics_and_errors():
    inst = cdqac.generate_fjsp(5, 3, 7)
    assert len(cdqac.pdr_names("fjsp")) == 16
    assert len(cdqac.pdr_names("jsp")) == 4
    pdr = cdqac.makespan(cdqac.solve_pdr(inst, "MWR-SPT"), inst)
    ga = cdqac.makespan(cdqac.solve_ga(inst, 20, 10, 1), inst)
    assert ga > 0 and pdr > 0
    with pytest.raises(ValueError):
        cdqac.solve_pdr(inst, "NOPE-SPT")
    with pytest.raises(RuntimeError):
        cdqac.SimState(inst).apply((0, 3, 0))


def test_dataset_train_and_act(tmp_path):
    insts = [cdqac.generate_fjsp(3, 2, 100 + i) for i in range(3)]
    data = cdqac.build_dataset(insts, recipe="random", random_per_instance=5)
    assert data.num_instances == 3
    assert data.num_transitions > 0
    bundle = cdqac.train(data, '{"steps": 8, "batch_size": 4, "hidden_dim": 8, "out_dim": 4, "mlp_width": 16, "num_quantiles": 4}')
    assert bundle.trained_steps == 8
    path = tmp_path / "bundle.json"
    bundle.save(path)
    loaded = cdqac.load_bundle(path)
    for inst in insts:
        assert cdqac.solve_greedy(loaded, inst) == cdqac.solve_greedy(bundle, inst)
        assert cdqac.validate(cdqac.solve_sampling(bundle, inst, k=3), inst) == []
    assert cdqac.saco(data, data) == 1.0


def test_cli_entry():
    code, out, _ = cdqac.run_cli(["solve", "--instance", os.path.join(FIXTURES, "tiny1.fjs"), "--method", "pdr:MOR-SPT"])
    assert code == 0
    assert out == "makespan 8\n"
    assert cdqac.run_cli(["solve", "--bogus"])[0] == 2
