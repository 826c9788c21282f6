# ---
# jupyter:
#   jupytext:
#     formats: py:percent
#     text_representation:
#       extension: .py
#       format_name: percent
# ---

# %% [markdown]
# # Two simplices sharing one variable
#
# The bundled `ex5_1` instance has two blocks that overlap in x3. We walk
# through the sparsity analysis, the per-block multiplier expressions,
# the reformulated problem and the order-2 relaxation.

# %%
from cslme.csp import build_tree, check_rip
from cslme.instances import load
from cslme.lme import block_lme, verify_lme, residual_is_zero, block_gradient_matrix
from cslme.poly import format_polynomial
from cslme.reform import build_reformulation
from cslme.moment import assemble_cs_moment, solve_relaxation
from cslme.oracle import local_search_upper_bound, compare_bounds

p = load("ex5_1")
print(p.n, p.cliques)
print("RIP holds:", check_rip(p.cliques).holds)
tree = build_tree(p.cliques)
print("arcs:", tree.arcs)

# %% [markdown]
# Each block gets a polynomial matrix L with L * grad g = I on the block's
# variables. The identity is checked exactly over the rationals.

# %%
for i in (1, 2):
    lme = block_lme(p, i)
    gm = block_gradient_matrix(p, i)
    print(i, lme.family, lme.degree, residual_is_zero(verify_lme(gm, lme)))

# %%
r = build_reformulation(p, "cslme")
q = r.problem
print("new variables:", [u.name for u in r.nus])
for b in q.blocks:
    print(b.clique, len(b.ineqs), "ineqs", len(b.eqs), "eqs")
print(format_polynomial(q.blocks[0].eqs[0], q.names))

# %% [markdown]
# Lower bound from the sparse relaxation, upper bound from local search.

# %%
relax = assemble_cs_moment(q, 2)
rep = solve_relaxation(relax)
ub = local_search_upper_bound(p, starts=16, seed=0)
print(rep.status, rep.bound, ub.value)
print(compare_bounds(rep.bound, ub.value))
