"""Quantum side in one run: reversal of a bit-flip channel, path weights,
and both quantum maximum-entropy problems on a random qubit model."""
import argparse

import numpy as np

from pathbridge import qpaths as qp, random_models as rm
from pathbridge.quantum import bit_flip
from pathbridge.reversal import petz_reversal, verify_reversal


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--T", type=int, default=2)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    np.set_printoptions(precision=4, suppress=True)

    E, rho = bit_flip(0.25), np.diag([1.0, 0.0])
    res = petz_reversal(E, rho, augment=True)
    print("bit-flip reversal at diag(1,0):")
    for K in res.map.operators:
        print(K.real)
    print("checks:", verify_reversal(E, rho))

    model = qp.QuantumPathModel(rm.density(2, rng), [rm.kraus_channel(2, 2, rng) for _ in range(args.T)],
                                [rm.observable(2, rng) for _ in range(args.T + 1)])
    W = qp.path_weights(model)
    gap = np.max(np.abs(W.weights - qp.backward_weights(model).weights))
    print(f"\npath weights (mass {W.total():.12f}), forward/backward gap {gap:.1e}")

    target = rm.density(2, rng)
    q1 = qp.qmep1_solve(model, target)
    kl = qp.qpath_relative_entropy(qp.path_weights(q1.model), qp.path_weights(q1.prior))
    print(f"prescribed final state: cost {q1.cost:.10f}, path KL {kl:.10f}, "
          f"harmonic residual {max(q1.harmonic_residuals):.1e}")

    q2 = qp.qmep2_solve(model, rm.density(2, rng))
    print(f"prescribed initial state: cost {q2.cost:.10f} <= bound {q2.bound:.10f}")


if __name__ == "__main__":
    main()
