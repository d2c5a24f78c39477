"""
The adaptive predictor layer anchor lattice
===========================================

How many anchors each feature map contributes, and what trimming keeps
at inference time.
"""

from quadtext.anchors import APLConfig, AnchorCategory, build_lattice, count_anchors, trim_for_inference

cfg = APLConfig()
print("strides:", cfg.strides)
print("medium density:", cfg.medium_density, " long density:", cfg.long_density)

# %%
# Per-map counts come from a closed form; build_lattice enumerates them.
for size in [(256, 256), (960, 1728)]:
    counts = count_anchors(cfg, *size)
    print(f"{size[0]}x{size[1]}: {counts} total {sum(counts)}")

# %%
# Each cell of map 2 holds 1*(2*2) square + 4*2 + 4*2 medium + 3*4 + 3*4 long anchors.
lattice = build_lattice(cfg, 256, 256)
cell = (lattice.map_index == 2) & (lattice.row == 0) & (lattice.col == 0)
for cat in AnchorCategory:
    print(f"  {cat.name:18s} {int((cell & (lattice.category == cat)).sum())}")

# %%
# Inference keeps map 1 plus the long anchors of maps 2-6.
trimmed = trim_for_inference(lattice)
print("full lattice:", len(lattice), " trimmed:", len(trimmed))
print("trimmed per map:", trimmed.per_map_counts)
