"""The standard scenario suite, each run through the simulator."""

from dataclasses import replace

from tba import ScenarioConfig, run_scenario

base = ScenarioConfig()
suite = {
    "fault-free": base,
    "equivocating beacon": replace(base, beacons=("equivocator", "honest", "honest")),
    "two silent repositories": replace(base, repositories=("dropper",) * 2 + ("honest",) * 3),
    "forger": replace(base, adversary="forger"),
    "post-hoc editor": replace(base, adversary="post-hoc-editor"),
    "every beacon leaks": replace(base, adversary="forger", colluders=3),
}
for name, cfg in suite.items():
    r = run_scenario(cfg).report
    print(f"{name:24s} verdict={r.verdict:10s} max_width={r.max_width} "
          f"adversary={r.adversary_verdict or '-':10s} success={r.adversary_success}")
