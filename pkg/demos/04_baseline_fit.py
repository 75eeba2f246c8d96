"""Fit the heuristic effective-attention models with the genetic algorithm
and compare the recovered weights against the planted oracle parameters.
"""
from gazecontrol import baselines, oracle, scene

timeline = scene.compile_timeline(scene.enumerate_situations_2d())
personas = oracle.make_default_personas(5, seed=42, deterministic=True, variation=0.0)
planted = personas[0].cue_weights
ds = oracle.synth_corpus(timeline, personas, m=4, step=24, stagger=True)
print(f"corpus: {len(ds)} examples generated by a product-form oracle")
print(f"planted weights: { {k: round(v, 2) for k, v in planted.items()} }")
print(f"planted kernels: alpha={personas[0].distance_decay:.3f}, "
      f"sigma={personas[0].angle_width_deg:.1f} deg\n")

config = baselines.GaConfig(pop=60, generations=120, seed=3)
for kind in ("product", "sum"):
    res = baselines.fit_ga(ds, kind, config)
    w = res.weights
    print(f"{kind} model: train {res.train_accuracy:.4f}, "
          f"held-out {res.holdout_accuracy:.4f}")
    # weights are identified up to scale for the argmax; normalize by 'moving'
    ref = w.w["moving"]
    rel = {k: round(v / ref, 2) for k, v in w.w.items()}
    print(f"  fitted weights (relative): {rel}")
    print(f"  fitted kernels: alpha={w.alpha:.3f}, sigma={w.sigma_deg:.1f} deg")
    gens = res.best_per_generation
    print(f"  fitness path: {gens[0]:.3f} -> {gens[len(gens) // 2]:.3f} -> {gens[-1]:.3f}\n")

# the reduced-cue sum model quoted in the comparison literature
res = baselines.fit_ga(ds, "sum", config, cue_mask=baselines.SUM_QUOTED_CUES)
print(f"sum model restricted to {baselines.SUM_QUOTED_CUES}: "
      f"held-out {res.holdout_accuracy:.4f}")
