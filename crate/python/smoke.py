"""Smoke test for the hlsdse extension module.

Install the module first with `pip install ./crates/py` (builds through maturin),
or copy target/release/libhlsdse.so onto PYTHONPATH as hlsdse.so.
"""

import json
import pathlib

import hlsdse

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "crates" / "core" / "fixtures"


def main():
    design = (FIXTURES / "vector_mul.json").read_text()
    hlsdse.parse_design(design)

    space = json.loads(hlsdse.design_space(design))
    assert int(space["cardinality"]) > 0

    configs = hlsdse.sample(design, "lhs", 6, 1)
    assert len(configs) == 6
    qor = json.loads(hlsdse.evaluate_mock(design, configs[0]))
    assert "latency" in qor and "valid" in qor

    result = json.loads(hlsdse.explore(design, seed=7))
    assert 0 < result["evaluations"] <= 48
    assert result["front"]

    points = [(p["latency"], p["util"]) for p in result["front"]]
    assert hlsdse.adrs(points, points) == 0.0
    assert abs(hlsdse.adrs([(110.0, 0.6)], [(100.0, 0.5)]) - 0.2) < 1e-9

    tcl = hlsdse.emit_tcl(design, json.dumps(result["front"][0]["config"]))
    assert "csynth_design" in tcl

    try:
        hlsdse.parse_design("{}")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid design accepted")

    print(f"hlsdse {hlsdse.__version__}: smoke test passed ({result['evaluations']} evaluations, "
          f"{len(points)} front points)")


if __name__ == "__main__":
    main()
