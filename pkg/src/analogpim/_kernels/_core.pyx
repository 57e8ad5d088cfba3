# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the pyref kernels (hot inner loops)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

BACKEND_NAME = "compiled"


cdef inline double _vtc(double v, double k, double vm, double vdd) nogil:
    cdef double arg = k * (v - vm)
    if arg > 500.0:
        arg = 500.0
    elif arg < -500.0:
        arg = -500.0
    return vdd / (1.0 + exp(arg))


def vtc_eval(v, k, vm, double vdd):
    v_arr = np.ascontiguousarray(np.atleast_1d(np.asarray(v, dtype=np.float64)))
    k_arr = np.broadcast_to(np.asarray(k, dtype=np.float64), v_arr.shape)
    vm_arr = np.broadcast_to(np.asarray(vm, dtype=np.float64), v_arr.shape)
    cdef cnp.ndarray[double, ndim=1] vf = v_arr.reshape(-1)
    cdef cnp.ndarray[double, ndim=1] kf = np.ascontiguousarray(k_arr.reshape(-1))
    cdef cnp.ndarray[double, ndim=1] mf = np.ascontiguousarray(vm_arr.reshape(-1))
    cdef cnp.ndarray[double, ndim=1] out = np.empty(vf.shape[0])
    cdef Py_ssize_t i
    for i in range(vf.shape[0]):
        out[i] = _vtc(vf[i], kf[i], mf[i], vdd)
    res = out.reshape(v_arr.shape)
    if np.isscalar(v) or np.asarray(v).ndim == 0:
        return float(res[0])
    return res


cdef void _sa_forward_batch(double[:, ::1] x, double[:, ::1] w1, double[::1] v1,
                            double[:, ::1] w2, double[::1] v2,
                            double[::1] k, double[::1] vm, double vdd,
                            double[:, ::1] out) nogil:
    cdef Py_ssize_t b, i, j, o
    cdef Py_ssize_t batch = x.shape[0], n_in = x.shape[1]
    cdef Py_ssize_t h = w1.shape[1], n_out = w2.shape[1]
    cdef double acc, hj
    for b in range(batch):
        for o in range(n_out):
            out[b, o] = v2[o]
        for j in range(h):
            acc = v1[j]
            for i in range(n_in):
                acc += x[b, i] * w1[i, j]
            hj = _vtc(acc, k[j], vm[j], vdd)
            for o in range(n_out):
                out[b, o] += hj * w2[j, o]


def sa_forward(x, w1, v1, w2, v2, vtc_k, vtc_vm, double vdd):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, ::1] w1v = np.ascontiguousarray(w1, dtype=np.float64)
    cdef double[::1] v1v = np.ascontiguousarray(v1, dtype=np.float64)
    cdef double[:, ::1] w2v = np.ascontiguousarray(w2, dtype=np.float64)
    cdef double[::1] v2v = np.ascontiguousarray(v2, dtype=np.float64)
    cdef double[::1] kv = np.ascontiguousarray(vtc_k, dtype=np.float64)
    cdef double[::1] vmv = np.ascontiguousarray(vtc_vm, dtype=np.float64)
    out = np.empty((xv.shape[0], w2v.shape[1]))
    cdef double[:, ::1] outv = out
    _sa_forward_batch(xv, w1v, v1v, w2v, v2v, kv, vmv, vdd, outv)
    return out


def run_recurrence(ports, weights, prev0, double lam, double alpha,
                   bint exact_mode, double eta, sh_noise, sa=None,
                   bint keep_cycles=False):
    cdef double[:, :, ::1] p = np.ascontiguousarray(ports, dtype=np.float64)
    cdef double[::1] wts = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t cycles = p.shape[0], batch = p.shape[1], n_ports = p.shape[2]
    cdef double[::1] held = np.array(prev0, dtype=np.float64, copy=True)
    noise = np.zeros((max(cycles - 1, 1), batch)) if sh_noise is None \
        else np.ascontiguousarray(sh_noise, dtype=np.float64)
    cdef double[:, ::1] nz = noise
    out = np.empty((cycles, batch)) if keep_cycles else None
    cdef double[:, ::1] outv = out if keep_cycles else noise  # placeholder view
    cdef Py_ssize_t i, b, j, s_i
    cdef double s, v

    cdef bint use_sa = sa is not None
    cdef double[:, ::1] w1, w2
    cdef double[::1] v1, v2, kv, vmv
    cdef double vdd = 0.0, acc, hj
    cdef Py_ssize_t h = 0
    if use_sa:
        w1 = np.ascontiguousarray(sa["w1"], dtype=np.float64)
        v1 = np.ascontiguousarray(sa["v1"], dtype=np.float64)
        w2 = np.ascontiguousarray(sa["w2"], dtype=np.float64)
        v2 = np.ascontiguousarray(sa["v2"], dtype=np.float64)
        kv = np.ascontiguousarray(sa["vtc_k"], dtype=np.float64)
        vmv = np.ascontiguousarray(sa["vtc_vm"], dtype=np.float64)
        vdd = sa["vdd"]
        h = w1.shape[1]

    for i in range(cycles):
        for b in range(batch):
            if use_sa:
                v = v2[0]
                for j in range(h):
                    acc = v1[j]
                    for s_i in range(n_ports):
                        acc += p[i, b, s_i] * w1[s_i, j]
                    acc += held[b] * w1[n_ports, j]
                    hj = _vtc(acc, kv[j], vmv[j], vdd)
                    v += hj * w2[j, 0]
            else:
                s = 0.0
                for j in range(n_ports):
                    s += p[i, b, j] * wts[j]
                if exact_mode:
                    v = lam * held[b] + s / alpha
                else:
                    v = (lam * held[b] + s) / alpha
            if keep_cycles:
                outv[i, b] = v
            if i + 1 < cycles:
                held[b] = eta * v + nz[i, b]
            else:
                held[b] = v
    if keep_cycles:
        return out
    return np.asarray(held)
