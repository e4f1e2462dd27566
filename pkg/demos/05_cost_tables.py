"""What each layout costs in parameters, arithmetic and airtime.

Prints the per-design accounting for a dense mixing layer and its
convolutional counterpart, then the scheme-level comparison against a
conventional digital split.
"""
from airsplit.bench import LayerSpec, cost_comparison, cost_report

print("== dense mixing layer: 6 -> 6 units, 4x4 antennas, r=3, batch 3 ==")
rows = cost_report(LayerSpec(n_i=6, n_o=6, n_t=4, n_r=4, r=3, batch=3))
print(f"{'design':26s} {'params':>8s} {'macs':>8s} {'airtime':>8s}")
for row in rows:
    name = f"{row.kind} {row.side}/{row.form}"
    print(f"{name:26s} {row.parameters:8d} {row.macs:8d} {row.transmissions:8d}")
print("the separated forms keep the parameter count at plain-dense size")

print()
print("== pushing r down trades airtime against arithmetic ==")
for r in (1, 2, 3, 6):
    rows = cost_report(LayerSpec(n_i=6, n_o=6, n_t=4, n_r=4, r=r, batch=3))
    sep = next(x for x in rows if x.side == "receiver" and x.form == "separated")
    print(f"r={r}: {sep.transmissions:3d} transmissions, {sep.macs:5d} macs, "
          f"{sep.parameters:4d} params")

print()
print("== with a convolutional front end (8x8 maps, 4->4 channels, 3x3) ==")
rows = cost_report(LayerSpec(n_i=4, n_o=4, n_t=4, n_r=4, r=2, batch=2,
                             n_ci=4, n_co=4, n_k=3, n_hi=8, n_wi=8,
                             n_ho=8, n_wo=8))
print(f"{'design':26s} {'params':>8s} {'macs':>8s} {'airtime':>8s}")
for row in rows:
    if row.kind != "conv":
        continue
    name = f"{row.kind} {row.side}/{row.form}"
    print(f"{name:26s} {row.parameters:8d} {row.macs:8d} {row.transmissions:8d}")
print("every spatial position rides the air, so maps dominate the airtime")

print()
print("== scheme-level view, r=16, 16 symbols per digitally coded value ==")
print(f"{'algorithm':14s} {'transmission':>14s} {'estimation':>12s}")
for row in cost_comparison(16):
    t = f"<= {row.transmission_factor:.6g}" if row.transmission_bound \
        else f"{row.transmission_factor:.6g}"
    e = f"<= {row.estimation_factor:.6g}" if row.estimation_bound \
        else f"{row.estimation_factor:.6g}"
    print(f"{row.algorithm:14s} {t:>14s} {e:>12s}")
print("the reciprocity-trained scheme never estimates the channel at all")
