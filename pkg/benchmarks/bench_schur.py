"""Compare the compiled and NumPy Schur-complement kernels.

Times one Schur assembly on the MIO programs used by the figure sweeps,
checks both kernels agree, then times a full solve with each.

    python3 benchmarks/bench_schur.py [--repeat N]
"""
import argparse
import time

import numpy as np

from obscoherence.coherence import build_mio_primal_reduced, build_mio_primal_faithful
from obscoherence.models import spin_x, superradiant_op, w_mixture, product_theta_state, random_observable, random_state
from obscoherence.sdp import HAVE_EXTENSION, solve_sdp
from obscoherence.sdp import kernels
from obscoherence.sdp.solver import _Compiled


def _cases():
    yield "faithful d=3", build_mio_primal_faithful(random_observable(3, 1), random_state(3, 2))
    yield "reduced d=4", build_mio_primal_reduced(random_observable(4, 1), random_state(4, 2))
    yield "reduced d=8 (fig1)", build_mio_primal_reduced(spin_x(3), w_mixture(0.5))
    yield "reduced d=8 (fig2)", build_mio_primal_reduced(superradiant_op(3), product_theta_state(0.6))


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def bench(repeat=3):
    backends = ["numpy"] + (["extension"] if HAVE_EXTENSION else [])
    if not HAVE_EXTENSION:
        print("compiled extension not built; timing the NumPy kernel only")
    print(f"{'case':<22}{'m':>6}{'backend':>11}{'assembly [ms]':>15}{'solve [s]':>11}{'max |dH|':>11}")
    rng = np.random.default_rng(0)
    for name, prob in _cases():
        comp = _Compiled(prob)
        blk = comp.sdp[0]
        n = blk["n"]
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        w = g @ g.conj().T / n
        ref = None
        for be in backends:
            def run():
                h = np.zeros((comp.m, comp.m))
                kernels.schur_block(w, blk["rows"], blk["cols"], blk["vals"], blk["ptr"], blk["active"], h, backend=be)
                return h
            h = run()
            ref = h if ref is None else ref
            t_asm = _best(run, repeat)
            t0 = time.perf_counter()
            sol = solve_sdp(prob, backend=be)
            t_solve = time.perf_counter() - t0
            diff = float(np.max(np.abs(h - ref)))
            print(f"{name:<22}{comp.m:>6}{be:>11}{1e3 * t_asm:>15.2f}{t_solve:>11.2f}{diff:>11.1e}"
                  f"  ({sol.status}, {sol.iterations} it)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    bench(ap.parse_args().repeat)
