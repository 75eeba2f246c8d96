"""Tour of the social-scenario generator for both scene variants.

Enumerates the canonical situation lists, compiles them into frame timelines,
and prints the structure that the rest of the pipeline consumes.
"""
import collections

from gazecontrol import scene

specs_2d = scene.enumerate_situations_2d()
specs_3d = scene.enumerate_situations_3d()

print(f"2D situations: {len(specs_2d)}")
counts = collections.Counter(sum(p.present for p in s.character_specs) for s in specs_2d)
print(f"  by present characters: {dict(sorted(counts.items()))}")
for c in range(4):
    sel = [s.character_specs[c] for s in specs_2d if s.character_specs[c].present]
    print(f"  character {c + 1}: present in {len(sel)}, waving in {sum(p.waving for p in sel)}, "
          f"near in {sum(p.near for p in sel)}")

print(f"\n3D situations: {len(specs_3d)}")
placements = collections.Counter(
    tuple((p.present, p.near) for p in s.character_specs) for s in specs_3d)
print(f"  {len(placements)} placements x {set(placements.values()).pop()} social situations")
actions = collections.Counter(
    p.action.name for s in specs_3d for p in s.character_specs if p.present)
print(f"  action totals: {dict(sorted(actions.items()))}")

tl2 = scene.compile_timeline(specs_2d)
tl3 = scene.compile_timeline(specs_3d)
print(f"\n2D timeline: {len(tl2.frames)} frames @ {tl2.fps} fps = {tl2.duration_s:.0f} s")
print(f"3D timeline: {len(tl3.frames)} frames @ {tl3.fps} fps = {tl3.duration_s:.0f} s")

frame = scene.frame_at(tl2, 7.5)
print(f"\nframe at t=7.5 s (entry/exit segment {frame.tick // 120}):")
for i, s in enumerate(frame.characters):
    if s.present:
        print(f"  P{i + 1}: {s.movement.name:>14} angle {s.angle_deg:7.2f} deg, "
              f"distance {s.distance_m:.2f} m, waving={s.waving}")

scene.write_timeline_jsonl(tl2, "/tmp/timeline_2d.jsonl")
print("\nwrote /tmp/timeline_2d.jsonl")
