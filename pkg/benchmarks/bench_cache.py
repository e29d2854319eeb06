"""Compare the compiled set-probe kernels against the pure-numpy fallback.

Runs the same cache-heavy simulation twice: once with the default kernels
(numba, if installed) and once in a subprocess with SIMALLOC_NO_NUMBA=1.
Prints wall time for each and checks the metrics are identical.
"""

import os
import subprocess
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

N_ACCESSES = 200_000


def workload_source():
    return f"""
import time
from simalloc.cache import CacheSystem, HwConfig
from simalloc.rng import SplitMix64
from simalloc import _kernels

hw = HwConfig()
sys_ = CacheSystem(hw, n_cores=4, support_core=True)
rng = SplitMix64(7)
t0 = time.perf_counter()
total = 0
for _ in range({N_ACCESSES}):
    core = rng.randrange(4)
    addr = rng.randrange(1 << 24) * 64
    total += sys_.access(core, addr, "W" if rng.randrange(2) else "R", stream=0)
dt = time.perf_counter() - t0
print(f"kernels={{'numba' if _kernels.NUMBA_ENABLED else 'numpy'}}"
      f" cycles={{total}} wall={{dt:.3f}}s"
      f" rate={{{N_ACCESSES}/dt:,.0f}} accesses/s")
"""


def run(no_numba):
    env = dict(os.environ)
    env["PYTHONPATH"] = os.path.join(os.path.dirname(__file__), "..", "src")
    if no_numba:
        env["SIMALLOC_NO_NUMBA"] = "1"
    else:
        env.pop("SIMALLOC_NO_NUMBA", None)
    out = subprocess.run([sys.executable, "-c", workload_source()],
                         env=env, capture_output=True, text=True, check=True)
    line = out.stdout.strip().splitlines()[-1]
    print(line)
    return line.split("cycles=")[1].split()[0]


def main():
    print(f"{N_ACCESSES} random accesses, 4 cores + support core")
    t0 = time.perf_counter()
    cyc_numba = run(no_numba=False)
    t1 = time.perf_counter()
    cyc_numpy = run(no_numba=True)
    t2 = time.perf_counter()
    print(f"total wall (incl. startup/JIT): numba-path {t1 - t0:.2f}s,"
          f" fallback {t2 - t1:.2f}s")
    if cyc_numba != cyc_numpy:
        print("MISMATCH: kernel paths disagree on total cycles", file=sys.stderr)
        return 1
    print("cycle totals identical across kernel paths")
    return 0


if __name__ == "__main__":
    sys.exit(main())
