"""Numerically check the inequalities the recovery analysis rests on.

Each check samples random instances, evaluates both sides of the stated
bound, and reports the worst margin (bound minus attained value; negative
would be a violation).  Checks whose constants assume sample sizes far
beyond desk scale are flagged out-of-regime.
"""

from detmc import bench, graphs, theory

g = graphs.lps_graph(5, 13)
gt = bench.synthetic_low_rank(g.n1, g.n2, 3, cond=2.0, seed=3)
print(f"graph: {g},  certificate c0 = {graphs.certify(g).c0:.4f}\n")

for rep in theory.run_all(gt, g, trials=100, seed=10):
    flag = "  [out of regime]" if rep.out_of_regime else ""
    print(f"{rep.check_name:>18}: worst margin {rep.worst_margin:+.4e} "
          f"(scale {rep.scale:.2e})  "
          f"{'ok' if rep.passed else 'VIOLATED'}{flag}")
