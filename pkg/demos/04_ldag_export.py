"""From a CStree to its labeled-DAG representation.

The staged tree on four binary variables below encodes, among others, the
relation "variable 3 is independent of variables 0 and 1 whenever variable
2 equals 0".  The LDAG compresses all such relations into edge labels: an
edge's dependence vanishes whenever one of its label patterns is realized
(a * matches any value).
"""

from ctxtree import Context, CStree, Stage, Staging, StateSpace, export_dot, to_ldag
from ctxtree.ldag import label_str


def staging(level, contexts):
    return Staging(level, [Stage(Context(c), level) for c in contexts])


space = StateSpace([2, 2, 2, 2])
tree = CStree(
    (0, 1, 2, 3),
    space,
    [
        staging(1, [{}]),
        staging(2, [{1: 1}, {0: 0, 1: 0}, {0: 1, 1: 0}]),
        staging(3, [{2: 0}, {1: 0, 2: 1}, {0: 0, 1: 1, 2: 1}, {0: 1, 1: 1, 2: 1}]),
    ],
)

graph = to_ldag(tree)
print("edges and labels:")
for edge in graph.edges:
    label = label_str(graph, edge) or "(none)"
    print(f"  {edge[0]} -> {edge[1]}   label over {graph.axes[edge]}: {label}")

print("\nDOT output:\n")
print(export_dot(graph))
