"""Pure-numpy reference implementation of the propagation hot loop.

Contract shared with the compiled kernel (ioncav._stepper): advance
``psi`` in place through ``n_steps`` midpoint-exponential steps of the
Hamiltonian

    H(t)[rows[j], cols[j]] += exp(i freqs[fam[j]] t) * vals[j]

The caller supplies an entry list that already makes H Hermitian (mirror
entries carry negated frequencies and conjugated values).  Each step
applies exp(-i H(t_mid) dt) as a Taylor series truncated at machine
precision; returns the largest series order used.
"""

import numpy as np


def run_steps(psi, rows, cols, vals, fam, freqs, t0, dt, n_steps,
              rtol, max_order):
    dim = psi.shape[0]
    rtol2 = rtol * rtol
    used_max = 0
    for step in range(n_steps):
        t_mid = t0 + (step + 0.5) * dt
        pv = np.exp(1j * (freqs * t_mid))[fam] * vals
        acc = psi.copy()
        term = psi.copy()
        converged = False
        for q in range(1, max_order + 1):
            contrib = pv * term[cols]
            h_term = (np.bincount(rows, weights=contrib.real, minlength=dim)
                      + 1j * np.bincount(rows, weights=contrib.imag, minlength=dim))
            term = (-1j * dt / q) * h_term
            acc += term
            ssq_t = float(np.vdot(term, term).real)
            ssq_a = float(np.vdot(acc, acc).real)
            if ssq_t <= rtol2 * ssq_a:
                converged = True
                used_max = max(used_max, q)
                break
        if not converged:
            raise RuntimeError(
                "short-time exponential did not converge; time step too coarse")
        psi[:] = acc
    return used_max
