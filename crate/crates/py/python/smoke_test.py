"""Smoke test for the tricentre_py extension module."""

import math

import tricentre_py as tc


def main():
    k = tc.complete_elliptic_k(0.5)
    assert abs(k - 1.8540746773013719) < 1e-12, k
    assert abs(tc.period_t2(0.0, 0.25) - 2.0 * math.pi) < 1e-12

    sol = tc.solve_a1(1.0 / 7.0, "1")
    assert abs(sol.a1_hat - 0.2874733307608507803) < 1e-12, sol
    assert abs(sol.t1 - sol.t2) < 1e-10 * sol.t1

    prm = tc.Params(1.0, 0.1, 0.3)
    rows = prm.integrate((0.2, 1.0, 0.5, 1.2), 3.0, samples=30)
    assert len(rows) == 31
    h0 = prm.hamiltonian(rows[0][1:])
    assert abs(prm.hamiltonian(rows[-1][1:]) - h0) < 1e-9

    centre = tc.Centre.from_xy(0.3, 0.4)
    assert tc.check(centre, 0.1, "1").safe
    fam = tc.arc_family(centre, 0.1, "1")
    assert len(fam.arcs) == 4 and fam.safe
    graph = tc.ChainGraph.from_arcs(fam.arcs)
    assert graph.count(4) == 32 and graph.count(3) == 0
    h, rho, nilpotent = graph.entropy()
    assert abs(h - math.log(2.0)) < 1e-9 and not nilpotent

    big = tc.ChainGraph.from_adjacency([[True, True], [True, True]])
    assert big.count(100) == 2**100

    first = fam.arcs[0]
    succ = next(j for j, ok in enumerate(graph.adjacency[0]) if ok)
    segs = [tc.shoot_segment(a, 1e-3) for a in (first, fam.arcs[succ])]
    assert all(s.converged for s in segs)
    assert segs[0].max_deviation < 0.2
    assert tc.local_expansion_rate(segs, 1e-3) > 0.0

    try:
        tc.Params(1.0, 1.5, 0.2)
    except tc.DomainError:
        pass
    else:
        raise AssertionError("inadmissible parameters accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
