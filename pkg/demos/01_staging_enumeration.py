"""Counting and listing the admissible stagings of a level.

A staging partitions the outcomes of a level into stages, each defined by
fixing at most beta of the level's variables.  With beta <= 2 the whole
family can be enumerated, which is what makes exact per-level optimization
and order scores tractable.
"""

import math

from ctxtree import EnumSpec, StateSpace, count_cstrees, count_stagings, enumerate_stagings

# Two binary variables: eight stagings in total.
spec = EnumSpec.of_cards([2, 2], beta=2)
print(f"stagings of a 2-variable binary level: {count_stagings(spec)}")
for staging in enumerate_stagings(spec):
    print("  ", " | ".join(str(stage.context) for stage in staging.stages))

# The count follows the closed form 1 - C(i,2) + i^3 for binary levels.
print("\nbinary level counts, i = 1..8:")
for i in range(1, 9):
    n = count_stagings(EnumSpec.of_cards([2] * i, beta=2))
    assert n == 1 - math.comb(i, 2) + i**3
    print(f"  i={i}: {n}")

# Restricting the usable context variables shrinks the family.
spec = EnumSpec.of_cards([2, 2, 2], beta=2, usable=[0])
print(f"\nsame level, contexts restricted to variable 0: {count_stagings(spec)} stagings")

# Stagings multiply across levels, and orderings multiply the trees.
space = StateSpace([2, 2, 2, 2])
print(f"\nCStrees on 4 binary variables, fixed order: {count_cstrees(space, 2, fixed_order=range(4))}")
print(f"CStrees on 4 binary variables, any order:   {count_cstrees(space, 2)}")
