# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled LSTM and attention kernels; mirrors ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sigmoid(double v) nogil:
    cdef double z
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    z = exp(v)
    return z / (1.0 + z)


def lstm_forward(const double[:, ::1] Wx, const double[:, ::1] Wh,
                 const double[::1] b, const double[::1] x,
                 const double[::1] h_prev, const double[::1] c_prev):
    cdef Py_ssize_t H = h_prev.shape[0]
    cdef Py_ssize_t D = x.shape[0]
    cdef Py_ssize_t r, j
    cdef double acc
    gates_a = np.empty(4 * H)
    c_a = np.empty(H)
    h_a = np.empty(H)
    cdef double[::1] gates = gates_a
    cdef double[::1] c = c_a
    cdef double[::1] h = h_a
    with nogil:
        for r in range(4 * H):
            acc = b[r]
            for j in range(D):
                acc = acc + Wx[r, j] * x[j]
            for j in range(H):
                acc = acc + Wh[r, j] * h_prev[j]
            if r < 3 * H:
                gates[r] = _sigmoid(acc)
            else:
                gates[r] = tanh(acc)
        for r in range(H):
            c[r] = gates[H + r] * c_prev[r] + gates[r] * gates[3 * H + r]
            h[r] = gates[2 * H + r] * tanh(c[r])
    return gates_a, c_a, h_a


def lstm_backward(const double[:, ::1] Wx, const double[:, ::1] Wh,
                  const double[::1] x, const double[::1] h_prev,
                  const double[::1] c_prev, const double[::1] gates,
                  const double[::1] c, const double[::1] dh, const double[::1] dc,
                  double[:, ::1] dWx, double[:, ::1] dWh, double[::1] db):
    cdef Py_ssize_t H = h_prev.shape[0]
    cdef Py_ssize_t D = x.shape[0]
    cdef Py_ssize_t r, j
    cdef double tc, dct, gi, gf, go, gg, a
    da_a = np.empty(4 * H)
    dx_a = np.zeros(D)
    dhp_a = np.zeros(H)
    dcp_a = np.empty(H)
    cdef double[::1] da = da_a
    cdef double[::1] dx = dx_a
    cdef double[::1] dhp = dhp_a
    cdef double[::1] dcp = dcp_a
    with nogil:
        for r in range(H):
            gi = gates[r]
            gf = gates[H + r]
            go = gates[2 * H + r]
            gg = gates[3 * H + r]
            tc = tanh(c[r])
            dct = dc[r] + dh[r] * go * (1.0 - tc * tc)
            da[r] = dct * gg * gi * (1.0 - gi)
            da[H + r] = dct * c_prev[r] * gf * (1.0 - gf)
            da[2 * H + r] = dh[r] * tc * go * (1.0 - go)
            da[3 * H + r] = dct * gi * (1.0 - gg * gg)
            dcp[r] = dct * gf
        for r in range(4 * H):
            a = da[r]
            db[r] += a
            for j in range(D):
                dWx[r, j] += a * x[j]
                dx[j] += Wx[r, j] * a
            for j in range(H):
                dWh[r, j] += a * h_prev[j]
                dhp[j] += Wh[r, j] * a
    return dx_a, dhp_a, dcp_a


def attention_forward(const double[:, ::1] W, const double[::1] hp,
                      const double[::1] hq, const double[:, ::1] Rp,
                      const double[:, ::1] Rq):
    cdef Py_ssize_t R = W.shape[0]
    cdef Py_ssize_t H = hp.shape[0]
    cdef Py_ssize_t D = Rp.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, zmax, total, li
    l_a = np.empty(R)
    xp_a = np.zeros(D)
    xq_a = np.zeros(D)
    cdef double[::1] l = l_a
    cdef double[::1] xp = xp_a
    cdef double[::1] xq = xq_a
    with nogil:
        for i in range(R):
            acc = 0.0
            for j in range(H):
                acc = acc + W[i, j] * hp[j]
            for j in range(H):
                acc = acc + W[i, H + j] * hq[j]
            l[i] = acc
        zmax = l[0]
        for i in range(1, R):
            if l[i] > zmax:
                zmax = l[i]
        total = 0.0
        for i in range(R):
            l[i] = exp(l[i] - zmax)
            total = total + l[i]
        for i in range(R):
            l[i] = l[i] / total
        for i in range(R):
            li = l[i]
            for j in range(D):
                xp[j] += li * Rp[i, j]
                xq[j] += li * Rq[i, j]
    return l_a, xp_a, xq_a


def attention_backward(const double[:, ::1] W, const double[::1] hp,
                       const double[::1] hq, const double[:, ::1] Rp,
                       const double[:, ::1] Rq, const double[::1] l,
                       const double[::1] dxp, const double[::1] dxq,
                       double[:, ::1] dW):
    cdef Py_ssize_t R = W.shape[0]
    cdef Py_ssize_t H = hp.shape[0]
    cdef Py_ssize_t D = Rp.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, mean, dz
    dl_a = np.empty(R)
    dhp_a = np.zeros(H)
    dhq_a = np.zeros(H)
    cdef double[::1] dl = dl_a
    cdef double[::1] dhp = dhp_a
    cdef double[::1] dhq = dhq_a
    with nogil:
        mean = 0.0
        for i in range(R):
            acc = 0.0
            for j in range(D):
                acc = acc + Rp[i, j] * dxp[j] + Rq[i, j] * dxq[j]
            dl[i] = acc
            mean = mean + l[i] * acc
        for i in range(R):
            dz = l[i] * (dl[i] - mean)
            for j in range(H):
                dW[i, j] += dz * hp[j]
                dhp[j] += W[i, j] * dz
                dW[i, H + j] += dz * hq[j]
                dhq[j] += W[i, H + j] * dz
    return dhp_a, dhq_a
