"""Randomized soundness and necessity checks for the profile criterion."""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .kchain import (BlockOperator, chain_minima, chain_value, check_profile_hypothesis, random_block,
                     random_rotation)


def _unit_directions(rng, n, samples):
    V = rng.standard_normal((samples, n))
    return V / np.linalg.norm(V, axis=1, keepdims=True)


def check_case(block: BlockOperator, k: int, rng: np.random.Generator, samples: int = 10_000,
               tol: float = 1e-9) -> dict:
    """Run both directions of the criterion on one operator in a random orthonormal frame.

    If the profile test passes, no sampled base vector may give a chain value
    below ``-tol`` (soundness). If it fails, its witness profile must give an
    explicit chain whose value equals the reported minimum (necessity).
    """
    chk = check_profile_hypothesis(block, k)
    Q = random_rotation(block.dim, rng)
    A = block.dense(Q)
    out = {"dims": list(block.dims), "k": int(k), "holds": chk.holds, "min_profile": chk.min_value}
    if chk.holds:
        V = _unit_directions(rng, block.dim, samples)
        vals = chain_minima(A, k, V)
        i = int(np.argmin(vals))
        out["sampled_min"] = float(vals[i])
        if vals[i] < -tol:
            out["violation"] = "soundness"
            out["block"] = block.to_dict()
            out["direction"] = V[i].tolist()
    else:
        frame = chk.witness.chain(block, Q)
        val = chain_value(A, frame)
        out["witness"] = chk.witness.to_dict()
        out["witness_value"] = val
        scale = max(1.0, abs(chk.min_value))
        if abs(val - chk.min_value) > tol * scale:
            out["violation"] = "witness"
            out["block"] = block.to_dict()
    return out


def run_propcheck(trials: int = 1000, seed: int = 0, dims=(2, 3, 4), samples: int = 10_000,
                  fixtures=(), tol: float = 1e-9) -> dict:
    """Random operators with block dimensions ``(1, d2, d3)``, ``d2, d3`` drawn from ``dims``.

    ``fixtures`` are extra cases ``{"dims": ..., "lambda": ..., "k": ...}``.
    Blocks failing the profile test are counterexamples to positivity and are
    listed separately; only broken implications count as violations.
    """
    if trials < 0 or (trials == 0 and not fixtures):
        raise InputError("trials must be >= 1")
    dims = tuple(int(d) for d in dims)
    if not dims or min(dims) < 1:
        raise InputError("dims must be positive integers")
    rng = np.random.default_rng(seed)
    cases = []
    for _ in range(trials):
        d2, d3 = (int(x) for x in rng.choice(dims, size=2))
        block = random_block(rng, (1, d2, d3))
        k = int(rng.integers(1, block.dim))
        cases.append(("random", block, k))
    for fx in fixtures:
        try:
            block = BlockOperator.from_dict(fx)
            k = int(fx["k"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed fixture: {exc}") from None
        cases.append(("fixture", block, k))
    results = []
    for source, block, k in cases:
        r = check_case(block, k, rng, samples, tol)
        r["source"] = source
        results.append(r)
    violations = [r for r in results if "violation" in r]
    counterexamples = [r for r in results if not r["holds"]]
    return {
        "trials": trials, "seed": seed, "dims": list(dims), "samples": samples, "fixtures": len(fixtures),
        "checked": len(results), "hypothesis_holds": sum(r["holds"] for r in results),
        "smallest_sampled_min": min((r["sampled_min"] for r in results if r["holds"]), default=None),
        "counterexamples": len(counterexamples),
        "counterexample_examples": [r for r in counterexamples if r["source"] == "fixture"] + counterexamples[:3],
        "violations": violations,
    }
