"""Independent Fock-truncation PPT oracle for Gaussian-backend entanglement.

Everything here works in the truncated number basis and never touches
covariance matrices: states are built by applying squeeze/evolution
exponentials to the vacuum ket, reduced by explicit partial trace, and
the log-negativity comes from the trace norm of the partially
transposed density matrix.
"""

import numpy as np
from scipy.sparse import identity, kron
from scipy.sparse.linalg import expm_multiply


def ladder(cutoff):
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
    return a


def quadratures(cutoff, hbar=1.0):
    a = ladder(cutoff)
    q = np.sqrt(hbar / 2.0) * (a + a.T)
    p = 1j * np.sqrt(hbar / 2.0) * (a.T - a)
    return q, p


def squeezed_vacuum(r, cutoff):
    """exp(r/2 (a^2 - a^dag^2)) |0>, position std sqrt(hbar/2) e^r."""
    a = ladder(cutoff)
    gen = 0.5 * r * (a @ a - a.T @ a.T)
    ket = np.zeros(cutoff)
    ket[0] = 1.0
    return expm_multiply(gen, ket)


def width_to_squeeze(width, hbar=1.0):
    return np.log(width / np.sqrt(hbar / 2.0))


def log_negativity_from_rho(rho, dim_a, dim_b):
    """ln of the trace norm of the partial transpose over side B."""
    rho = rho.reshape(dim_a, dim_b, dim_a, dim_b)
    rho_pt = rho.transpose(0, 3, 2, 1).reshape(dim_a * dim_b, dim_a * dim_b)
    ev = np.linalg.eigvalsh(0.5 * (rho_pt + rho_pt.conj().T))
    return float(np.log(np.abs(ev).sum()))


def tmsv_log_negativity(r, cutoff=40):
    """Two-mode squeezed vacuum, exact in the limit: E_N = 2r."""
    n = np.arange(cutoff)
    c = np.tanh(r) ** n / np.cosh(r)
    ket = np.zeros((cutoff, cutoff))
    ket[n, n] = c
    ket = ket.ravel() / np.linalg.norm(ket)
    rho = np.outer(ket, ket.conj())
    return log_negativity_from_rho(rho, cutoff, cutoff)


def evolved_probe_log_negativity(g1, g2, t, widths=(None, None, None),
                                 cutoff=14, hbar=1.0):
    """E_N(Q|Q') of squeezed product inputs evolved under the coupling.

    Builds exp(-i t (g1 p x + g2 q' k)/hbar) |psi0> in the truncated
    three-mode number basis, traces out the mediator, and applies the
    PPT trace-norm formula.
    """
    q_op, p_op = quadratures(cutoff, hbar)
    eye = identity(cutoff, format="csr")
    h_int = (g1 * kron(kron(p_op, eye), q_op)
             + g2 * kron(kron(eye, q_op), p_op))
    kets = []
    for w in widths:
        r = 0.0 if w is None else width_to_squeeze(w, hbar)
        kets.append(squeezed_vacuum(r, cutoff))
    psi0 = np.kron(np.kron(kets[0], kets[1]), kets[2]).astype(complex)
    psi_t = expm_multiply(-1j * t / hbar * h_int.tocsc(), psi0)
    psi_t = psi_t.reshape(cutoff, cutoff, cutoff)
    rho_qq = np.einsum("abe,cde->abcd", psi_t, psi_t.conj())
    rho_qq = rho_qq.reshape(cutoff * cutoff, cutoff * cutoff)
    rho_qq /= np.trace(rho_qq).real
    return log_negativity_from_rho(rho_qq, cutoff, cutoff)
