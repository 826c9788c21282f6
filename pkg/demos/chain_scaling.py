# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Chain instances: sizes of the sparse relaxation
#
# Simplex blocks on a chain of cliques of size N overlapping in k
# variables. The extended cliques grow by the multiplier variables of the
# neighbouring arcs, so the largest one has N + 2k variables.

# %%
import time

from cslme.csp import build_tree
from cslme.instances import simplex_chain
from cslme.moment import assemble_cs_moment, assemble_dense_moment, min_order, solve_relaxation
from cslme.reform import build_reformulation, enumerate_nu, extended_cliques

for s in (2, 3, 4, 6):
    p = simplex_chain(4, 1, s)
    t = build_tree(p.cliques)
    ext = extended_cliques(p, t, enumerate_nu(t, p.n))
    q = build_reformulation(p, "cslme").problem
    d = min_order(q)
    sparse = assemble_cs_moment(q, d).summary()
    print(f"s={s} n={p.n} ext={[len(c) for c in ext]} d={d} moments={sparse['moments']} "
          f"largest block={sparse['largest_block']}")

# %% [markdown]
# The dense relaxation of the same problem is much larger.

# %%
p = simplex_chain(4, 1, 3)
q = build_reformulation(p, "cslme").problem
print(assemble_dense_moment(q, 2).summary())

# %% [markdown]
# Solve s = 3 at the minimal order (takes a few seconds).

# %%
t0 = time.perf_counter()
rep = solve_relaxation(assemble_cs_moment(q, min_order(q)), mode="cslme")
print(rep.status, rep.bound, f"{time.perf_counter() - t0:.1f} s")
