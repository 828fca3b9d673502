import time
import numpy as np
from uav_isac.scenario import load_scenario as load_config
from uav_isac.beampattern import design_beam
from uav_isac.baselines import BaselineSpec, heuristic_path, run_baseline

cfg = load_config("configs/tiny.yaml")
beam = design_beam(cfg)

route = heuristic_path(cfg, beam)
print("route order:", route.order)
print("alpha:\n", route.alpha)
print("pins:", route.pins)
sched = [np.flatnonzero(route.alpha[e]).tolist() for e in range(cfg.E)]
print("sensing slots:", sched)

for kind in ("heuristic_trajectory", "zf_fixed_velocity"):
    t0 = time.time()
    spec = BaselineSpec(kind=kind, v_fixed=min(13.0, cfg.v_max))
    res = run_baseline(cfg, spec, beam)
    dt = time.time() - t0
    print(f"\n=== {kind} ({dt:.1f}s) ===")
    print("objective:", res.objective)
    print("iters:", len(res.trace.rows), "rank gap:", res.rank_gap)
    print("audit ok:", res.audit.ok,
          "failures:", [(r.name, r.worst) for r in res.audit.failures()])
    print("alpha slots:", [np.flatnonzero(res.schedule.alpha[e]).tolist()
                           for e in range(cfg.E)])
    speeds = np.linalg.norm(res.trajectory.v, axis=1)
    print("speeds:", np.round(speeds, 3))
    print("dominance vs proposed 151.8855:",
          res.objective >= 151.8855 - 1e-6)
