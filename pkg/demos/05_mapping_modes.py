"""The headline comparison: fusion vs inference vs submapping maps.

One scenario run drives all three mapping systems off the SAME trajectory
estimate, so coverage differences are attributable to the mapping strategy
alone:

  fusion      — keyframes keep only their own fused (overlap-wedge) points;
  inference   — fused points plus class-model height predictions outside
                the overlap;
  submapping  — every inter-keyframe frame's fused points, placed by
                drift-free short-horizon dead reckoning relative to the
                keyframe anchor.

Coverage counts occupied 0.1 m voxels; accuracy is the mean absolute
distance from map points to the true scene surface.

Run:  python3 demos/05_mapping_modes.py
"""

from pathlib import Path

from sonarmap import load_scenario, run_scenario
from sonarmap.data import scenario_path

out = Path(__file__).parent / "output" / "05_mapping_modes"
out.mkdir(parents=True, exist_ok=True)

cfg = load_scenario(scenario_path("piling_marina"))
result = run_scenario(cfg, out_dir=out)

print(f"'{cfg.name}': {result.n_frames} frames, {len(result.graph)} keyframes, "
      f"{len(result.submaps)} submaps\n")
print("mode         points   coverage (voxels)   MAE (m)   RMSE (m)")
for mode in result.modes:
    mae, rmse = result.errors[mode]
    print(f"{mode:10s} {len(result.maps[mode]):8d}   {result.coverage[mode]:17d}"
          f"   {mae:7.3f}   {rmse:8.3f}")

per_class = ", ".join(f"{label}: {m.updates}" for label, m in
                      sorted(result.models.items()))
print(f"\nheight-model updates by class — {per_class}")
print(f"exports written to {out}/ (coverage.csv, error.csv, runtime.csv, "
      "map_<mode>.ply, trajectory.csv)")
print("\nSubmapping multiplies coverage by keeping between-keyframe frames; "
      "inference goes further on repetitive structure by predicting heights "
      "outside the overlap wedge. Both sit well inside the accuracy band.")
