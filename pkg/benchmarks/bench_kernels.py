"""Compare the numba and numpy kernel backends on representative sizes.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs once per backend untimed (JIT load), then the best of
``repeat`` timings is reported along with the largest output difference.
"""

import argparse
import time

import numpy as np

from transonic_cd import kernels

GAMMA = 1.4
P_REF = 1 / 1.4
B_SUB, K_SUB = 2.625, 1.4 * (1 / 1.4) / 0.4
B_SUP, A_SUP = 12.88, (1 / 1.4) / 0.25**1.4


def density_case(n=129 * 65 * 4):
    rng = np.random.default_rng(0)
    a = rng.uniform(-0.2, 0.2, n)
    b = rng.uniform(1.8, 2.4, n)
    chi = (a * a + 1.0) / (2.0 * b * b)
    return lambda: kernels.density_root(chi, B_SUB, K_SUB, GAMMA)


def theta_case(n=129 * 65):
    p = np.linspace(0.6, 0.85, n)
    target = kernels.theta_closed(p, B_SUP, A_SUP, GAMMA, P_REF)
    return lambda: kernels.theta_inverse(target, B_SUP, A_SUP, GAMMA, P_REF)


def march_case(nx=257, ny=129):
    from transonic_cd.supersonic import ThetaClosure, riemann_from_state
    from transonic_cd.thermo import GasModel

    gas = GasModel()
    s = np.linspace(0.0, 1.0, ny)
    p = P_REF * (1.0 + 0.01 * np.sin(np.pi * s) ** 2)
    zm, zp = riemann_from_state(0.0 * s, p, B_SUP, A_SUP, gas, ThetaClosure(gas, P_REF))
    B, A = np.full(ny, B_SUP), np.full(ny, A_SUP)
    wall = 0.01 * np.sin(2 * np.pi * np.linspace(0, 1, nx))
    pc = np.full(nx, P_REF)
    dxi, deta = 1.0 / (nx - 1), 0.6 / (ny - 1)
    return lambda: kernels.march(zm, zp, B, A, wall, pc, dxi, deta, 1, GAMMA, P_REF, nx)[4]


def best_of(fn, repeat):
    out = fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), np.asarray(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    cases = {"density_root": density_case(), "theta_inverse": theta_case(), "march 257x129": march_case()}
    print(f"{'kernel':<16}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases.items():
        res = {}
        for backend in ("numba", "numpy"):
            old = kernels.set_backend(backend)
            try:
                res[backend] = best_of(fn, args.repeat)
            finally:
                kernels.set_backend(old)
        (tn, on), (tp, op) = res["numba"], res["numpy"]
        diff = float(np.max(np.abs(on - op)))
        print(f"{name:<16}{tn * 1e3:>12.2f}{tp * 1e3:>12.2f}{tp / tn:>10.1f}{diff:>12.1e}")


if __name__ == "__main__":
    main()
