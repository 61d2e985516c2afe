# %% [markdown]
# # Attention masks for the cooperative decoders
#
# The ASCD decoder runs one self-attention over the concatenation
# [acoustic frames; tokens].  Three rules keep it causal:
# acoustic queries never look at tokens, token queries see every frame,
# and token queries see only earlier-or-equal tokens.  Padding hides
# key columns only.

# %%
import numpy as np

from ascd import masking as M

T, N = 3, 2
causal = M.build_causal_mask(T, N)
print("causal multimodal mask (1 = blocked):")
print(M.format_mask(causal, T, N, "ascd"))

# %% [markdown]
# With one padded frame (valid_T = 2) the third acoustic column is blocked
# for every query.  Composition is a plain boolean union.

# %%
padded = M.build_padding_mask(T, N, 2, N)
full = M.compose_ascd_mask(causal, padded)
print(M.format_mask(full, 2, N, "ascd"))
assert full == M.build_ascd_mask(T, N, 2, N)

# %% [markdown]
# The semi variant only has token queries; its mask is exactly the
# bottom N rows of the full ASCD mask.

# %%
semi = M.build_s_ascd_mask(T, N, 2, N)
print(M.format_mask(semi, 2, N, "s-ascd"))
assert np.array_equal(semi.blocked, full.blocked[T:])
