"""Independent textbook sum-product decoder used as the equivalence oracle.

Deliberately written against the production decoder's grain: dense
check-by-check message storage, explicit leave-one-out accumulation loops,
no edge indexing or padding tricks. Shares only the published conventions
(LLR clip range, artanh clamp, hard-decision tie rule, syndrome stop).
"""

import numpy as np

CLIP = 10.0
ARTANH_EPS = 1e-12


def textbook_sum_product(h_matrix, llrs, max_iterations):
    """Flooding sum-product on a dense H for a (B, V) batch of LLR words.

    Returns (hard_words, converged, iterations_used) with the syndrome
    stopping rule applied after every iteration.
    """
    h = np.asarray(h_matrix, dtype=np.int64)
    num_checks, num_vars = h.shape
    batch = llrs.shape[0]
    checks_of_var = [np.flatnonzero(h[:, v]) for v in range(num_vars)]
    vars_of_check = [np.flatnonzero(h[c]) for c in range(num_checks)]

    msg_cv = np.zeros((batch, num_checks, num_vars))
    out = np.zeros((batch, num_vars), dtype=np.uint8)
    converged = np.zeros(batch, dtype=bool)
    iterations_used = np.zeros(batch, dtype=np.int64)
    active = np.ones(batch, dtype=bool)

    for t in range(max_iterations):
        msg_vc = np.zeros((batch, num_checks, num_vars))
        for v in range(num_vars):
            for c in checks_of_var[v]:
                total = llrs[:, v].copy()
                for c_other in checks_of_var[v]:
                    if c_other != c:
                        total = total + msg_cv[:, c_other, v]
                msg_vc[:, c, v] = np.clip(total, -CLIP, CLIP)
        for c in range(num_checks):
            members = vars_of_check[c]
            tanhs = np.tanh(msg_vc[:, c, members] / 2.0)
            for j, v in enumerate(members):
                product = np.ones(batch)
                for j_other in range(len(members)):
                    if j_other != j:
                        product = product * tanhs[:, j_other]
                product = np.clip(product, -(1.0 - ARTANH_EPS), 1.0 - ARTANH_EPS)
                msg_cv[:, c, v] = np.clip(2.0 * np.arctanh(product), -CLIP, CLIP)
        posterior = llrs.copy()
        for v in range(num_vars):
            for c in checks_of_var[v]:
                posterior[:, v] = posterior[:, v] + msg_cv[:, c, v]
        hard = (posterior <= 0).astype(np.uint8)
        out[active] = hard[active]
        iterations_used[active] = t + 1
        satisfied = ~(((hard @ h.T) % 2).any(axis=1))
        newly = active & satisfied
        converged[newly] = True
        active = active & ~newly
        if not active.any():
            break
    return out, converged, iterations_used
