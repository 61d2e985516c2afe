# %% [markdown]
# # What the cooperative decoder costs
#
# Parameters: an ASCD layer has one attention block, a vanilla decoder
# layer has two (self and cross).  At a 256-wide, 6-layer decoder the gap
# is 6 x (4*256*256 + 4*256), minus the two extra projections ASCD adds.

# %%
from ascd.complexity import count_attention_elements, instrumented_counts
from ascd.model import ASRModel, ModelConfig, count_parameters, table1_config

counts = {v: count_parameters(table1_config(v)).total for v in ("vanilla", "ascd", "s-ascd")}
for v, n in counts.items():
    print(f"{v:8s} {n:,}")
print(f"vanilla - ascd = {counts['vanilla'] - counts['ascd']:,}")

# %% [markdown]
# Attention scores: full ASCD attends over (T+N)^2 pairs per head, the semi
# variant only N*(T+N), which equals vanilla's N^2 self plus N*T cross.

# %%
rep = count_attention_elements(ModelConfig(), T=10, N=5)
print(rep.score_elements)
for T in (10, 50, 100):
    s = count_attention_elements(ModelConfig(), T, 20).score_elements
    print(f"T={T:3d} N=20  ascd {s['ascd']:6d}  s-ascd {s['s-ascd']:5d}  vanilla {s['vanilla']:5d}")

# %% [markdown]
# The analytic numbers are checked against counters inside the attention op.

# %%
cfg = ModelConfig(d_model=16, d_embed=16, d_ff=32, n_heads=2, vocab_size=8, feat_dim=6, variant="s-ascd")
scores, macs = instrumented_counts(ASRModel(cfg), T=10, N=5)
print("instrumented per layer:", scores, "analytic:", count_attention_elements(cfg, 10, 5).layer_score_elements["s-ascd"])
