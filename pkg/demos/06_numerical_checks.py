"""
Numerical checks
================

The ``verify`` module bundles the property suites that the command line
exposes as ``balanced-mse verify``: finite-difference gradients for every
loss, quadrature of the balancing integral, the discrete conversion identity,
Monte-Carlo convergence of the batch estimate and the uniform-prior case.
"""
import time

from balanced_mse.verify import SUITES, run_suite

for name in SUITES:
    t0 = time.perf_counter()
    for result in run_suite(name):
        print(result.line())
    print(f"  ({time.perf_counter() - t0:.1f}s)")
