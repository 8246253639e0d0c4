import pytest

import alpine_sim as sim


def test_qpack_examples():
    assert sim.quantize(1.0, 127) == 127
    assert sim.quantize(-2.0, 127) == -128
    assert sim.saturate_acc(129, 1) == 65
    assert sim.pack4([1, 2, 3, 4]) == 0x04030201
    assert sim.unpack4(0xFF) == [-1, 0, 0, 0]


def test_mvm():
    assert sim.mvm(2, 2, [1, 2, 3, 4], [10, -1]) == [7, 16]
    assert sim.mvm(2, 2, [1, 2, 3, 4], [10, -1], shift=1) == [4, 8]
    with pytest.raises(ValueError):
        sim.mvm(2, 2, [1, 2, 3], [1, 1])


def test_encode_decode():
    line = "CM_QUEUE core=1 rm=0x00001234 ra=4 rn=8 rd=5"
    assert sim.decode(sim.encode(line), core=1) == line
    with pytest.raises(sim.TraceParseError):
        sim.encode("CM_FOO core=0")


def test_run_report():
    spec = {"model": "mlp", "case": 1, "n": 256, "inferences": 2}
    a = sim.run(spec)
    assert a["format"] == "alpine-sim-report"
    assert a["summary"]["golden_match"] is True
    assert a["summary"]["time_s"] > 0
    assert sim.run(spec) == a


def test_usage_errors():
    with pytest.raises(sim.UsageError):
        sim.run(model="lstm", case=5)
    with pytest.raises(ValueError):
        sim.run(model="mlp", mapping="optical")


def test_trace_replay_matches_run():
    spec = {"model": "mlp", "case": 4, "n": 128, "inferences": 2}
    replayed = sim.replay(sim.trace(spec))
    reported = sim.run(spec)["stats"]

    def counters(stats):
        # Reports round floats; integer counters must match exactly.
        cores = [{k: v for k, v in c.items() if isinstance(v, int)}
                 for c in stats["cores"]]
        return stats["wall_cycles"], cores, stats["cache"]

    assert counters(replayed) == counters(reported)


def test_validate():
    for what in ("workingset", "energy", "isa"):
        checks = sim.validate(what)
        assert checks and all(c["pass"] for c in checks)


def test_report_matches_schema():
    jsonschema = pytest.importorskip("jsonschema")
    import json
    import pathlib

    schema_path = pathlib.Path(__file__).parents[2] / "schema" / "report.schema.json"
    schema = json.loads(schema_path.read_text())
    for spec in ({"model": "mlp", "n": 128, "inferences": 1},
                 {"model": "lstm", "n_h": 32, "case": 4, "inferences": 1,
                  "mapping": "digital"}):
        jsonschema.validate(sim.run(spec), schema)
