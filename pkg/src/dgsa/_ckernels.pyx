# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled transfer-matrix contractions.

Same functions and semantics as :mod:`dgsa._pykernels`; the all-pairs
routines run the pair loop and every site update in C, which removes the
per-contraction Python overhead that dominates at small bond dimension.
"""

import numpy as np
cimport numpy as cnp

ctypedef double complex cplx

cnp.import_array()


cdef inline cplx _conj(cplx z) nogil:
    return z.real - 1j * z.imag


cdef void _env_step(cplx* env, int lb, int lk,
                    const cplx[:, :, ::1] a, const cplx[:, :, ::1] b,
                    cplx* tmp, cplx* out) noexcept nogil:
    """out[rb, rk] = sum conj(a[l, s, rb]) env[l, l'] b[l', s, rk]."""
    cdef int d = b.shape[1]
    cdef int rk = b.shape[2]
    cdef int rb = a.shape[2]
    cdef int l, lp, s, r, rp
    cdef cplx e, acc
    # tmp[l, s, rk] = sum_l' env[l, l'] b[l', s, rk]
    for l in range(lb):
        for s in range(d):
            for rp in range(rk):
                tmp[(l * d + s) * rk + rp] = 0
        for lp in range(lk):
            e = env[l * lk + lp]
            if e == 0:
                continue
            for s in range(d):
                for rp in range(rk):
                    tmp[(l * d + s) * rk + rp] += e * b[lp, s, rp]
    for r in range(rb):
        for rp in range(rk):
            out[r * rk + rp] = 0
    for l in range(lb):
        for s in range(d):
            for r in range(rb):
                acc = _conj(a[l, s, r])
                if acc == 0:
                    continue
                for rp in range(rk):
                    out[r * rk + rp] += acc * tmp[(l * d + s) * rk + rp]


cdef cplx _overlap(list bra, list ket, cplx[::1] buf_env, cplx[::1] buf_tmp, cplx[::1] buf_out):
    cdef Py_ssize_t n = len(bra)
    cdef Py_ssize_t k
    cdef int lb = 1, lk = 1
    cdef const cplx[:, :, ::1] a
    cdef const cplx[:, :, ::1] b
    cdef cplx* env = &buf_env[0]
    cdef cplx* out = &buf_out[0]
    cdef cplx* swap
    if n == 0:
        return 1.0
    env[0] = 1.0
    for k in range(n):
        a = bra[k]
        b = ket[k]
        _env_step(env, lb, lk, a, b, &buf_tmp[0], out)
        lb = a.shape[2]
        lk = b.shape[2]
        swap = env
        env = out
        out = swap
    return env[0]


cdef cplx _sandwich(list bra, list mpo, list ket,
                    cplx[::1] buf_env, cplx[::1] buf_t1, cplx[::1] buf_t2, cplx[::1] buf_out):
    cdef Py_ssize_t n = len(bra)
    cdef Py_ssize_t k
    cdef int lb = 1, lw = 1, lk = 1
    cdef int d, rb, rw, rk, l, w, lp, s, t, v, r, rp
    cdef cplx e, acc
    cdef const cplx[:, :, ::1] a
    cdef const cplx[:, :, :, ::1] W
    cdef const cplx[:, :, ::1] b
    cdef cplx* env = &buf_env[0]
    cdef cplx* out = &buf_out[0]
    cdef cplx* t1 = &buf_t1[0]
    cdef cplx* t2 = &buf_t2[0]
    cdef cplx* swap
    if n == 0:
        return 1.0
    env[0] = 1.0
    for k in range(n):
        a = bra[k]
        W = mpo[k]
        b = ket[k]
        d = b.shape[1]
        rb = a.shape[2]
        rw = W.shape[3]
        rk = b.shape[2]
        # t1[l, w, t, rp] = sum_lp env[l, w, lp] b[lp, t, rp]
        for l in range(lb * lw * d * rk):
            t1[l] = 0
        for l in range(lb):
            for w in range(lw):
                for lp in range(lk):
                    e = env[(l * lw + w) * lk + lp]
                    if e == 0:
                        continue
                    for t in range(d):
                        for rp in range(rk):
                            t1[((l * lw + w) * d + t) * rk + rp] += e * b[lp, t, rp]
        # t2[l, s, v, rp] = sum_{w,t} W[w, s, t, v] t1[l, w, t, rp]
        for l in range(lb * d * rw * rk):
            t2[l] = 0
        for w in range(lw):
            for s in range(d):
                for t in range(d):
                    for v in range(rw):
                        e = W[w, s, t, v]
                        if e == 0:
                            continue
                        for l in range(lb):
                            for rp in range(rk):
                                t2[((l * d + s) * rw + v) * rk + rp] += e * t1[((l * lw + w) * d + t) * rk + rp]
        # out[r, v, rp] = sum_{l,s} conj(a[l, s, r]) t2[l, s, v, rp]
        for l in range(rb * rw * rk):
            out[l] = 0
        for l in range(lb):
            for s in range(d):
                for r in range(rb):
                    acc = _conj(a[l, s, r])
                    if acc == 0:
                        continue
                    for v in range(rw):
                        for rp in range(rk):
                            out[(r * rw + v) * rk + rp] += acc * t2[((l * d + s) * rw + v) * rk + rp]
        lb = rb
        lw = rw
        lk = rk
        swap = env
        env = out
        out = swap
    return env[0]


def _as_list(tensors):
    return [np.ascontiguousarray(t, dtype=np.complex128) for t in tensors]


def _max_bond(states):
    m = 1
    for st in states:
        for t in st:
            m = max(m, t.shape[0], t.shape[t.ndim - 1])
    return m


def _max_phys(states):
    m = 1
    for st in states:
        for t in st:
            m = max(m, t.shape[1])
    return m


def left_env(bra, ket, int nsites):
    """Contract the first ``nsites`` sites of ``<bra|ket>``."""
    bra_l = _as_list(bra[:nsites])
    ket_l = _as_list(ket[:nsites])
    if nsites == 0:
        return np.ones((1, 1), dtype=np.complex128)
    D = _max_bond([bra_l, ket_l])
    d = _max_phys([bra_l, ket_l])
    buf_env = np.zeros(D * D, dtype=np.complex128)
    buf_out = np.zeros(D * D, dtype=np.complex128)
    buf_tmp = np.zeros(D * d * D, dtype=np.complex128)
    cdef cplx[::1] e = buf_env, o = buf_out, tm = buf_tmp
    cdef cplx* env = &e[0]
    cdef cplx* out = &o[0]
    cdef cplx* swap
    cdef int lb = 1, lk = 1, k
    cdef const cplx[:, :, ::1] a
    cdef const cplx[:, :, ::1] b
    env[0] = 1.0
    for k in range(nsites):
        a = bra_l[k]
        b = ket_l[k]
        _env_step(env, lb, lk, a, b, &tm[0], out)
        lb = a.shape[2]
        lk = b.shape[2]
        swap = env
        env = out
        out = swap
    res = np.empty((lb, lk), dtype=np.complex128)
    cdef cplx[:, ::1] rv = res
    cdef int i, j
    for i in range(lb):
        for j in range(lk):
            rv[i, j] = env[i * lk + j]
    return res


def overlap(bra, ket):
    """Return ``<bra|ket>`` for two MPS given as tensor lists."""
    bra_l = _as_list(bra)
    ket_l = _as_list(ket)
    D = _max_bond([bra_l, ket_l])
    d = _max_phys([bra_l, ket_l])
    return complex(_overlap(bra_l, ket_l,
                            np.zeros(D * D, dtype=np.complex128),
                            np.zeros(D * d * D, dtype=np.complex128),
                            np.zeros(D * D, dtype=np.complex128)))


def sandwich(bra, mpo, ket):
    """Return ``<bra|W|ket>`` for an MPO ``W``."""
    return complex(sandwich_gram([bra], mpo, [ket])[0, 0])


def gram(bras, kets):
    """All-pairs overlap matrix ``G[a, b] = <bras[a]|kets[b]>``."""
    bl = [_as_list(s) for s in bras]
    kl = [_as_list(s) for s in kets]
    out = np.empty((len(bl), len(kl)), dtype=np.complex128)
    if len(bl) == 0 or len(kl) == 0:
        return out
    D = max(_max_bond(bl), _max_bond(kl))
    d = max(_max_phys(bl), _max_phys(kl))
    buf_env = np.zeros(D * D, dtype=np.complex128)
    buf_tmp = np.zeros(D * d * D, dtype=np.complex128)
    buf_out = np.zeros(D * D, dtype=np.complex128)
    cdef Py_ssize_t ia, ib
    cdef cplx[:, ::1] ov = out
    for ia in range(len(bl)):
        for ib in range(len(kl)):
            ov[ia, ib] = _overlap(bl[ia], kl[ib], buf_env, buf_tmp, buf_out)
    return out


def sandwich_gram(bras, mpo, kets):
    """All-pairs matrix ``M[a, b] = <bras[a]|W|kets[b]>``."""
    bl = [_as_list(s) for s in bras]
    kl = [_as_list(s) for s in kets]
    wl = _as_list(mpo)
    out = np.empty((len(bl), len(kl)), dtype=np.complex128)
    if len(bl) == 0 or len(kl) == 0:
        return out
    D = max(_max_bond(bl), _max_bond(kl))
    Dw = 1
    for t in wl:
        Dw = max(Dw, t.shape[0], t.shape[3])
    d = max(_max_phys(bl), _max_phys(kl))
    buf_env = np.zeros(D * Dw * D, dtype=np.complex128)
    buf_out = np.zeros(D * Dw * D, dtype=np.complex128)
    buf_t1 = np.zeros(D * Dw * d * D, dtype=np.complex128)
    buf_t2 = np.zeros(D * d * Dw * D, dtype=np.complex128)
    cdef Py_ssize_t ia, ib
    cdef cplx[:, ::1] ov = out
    for ia in range(len(bl)):
        for ib in range(len(kl)):
            ov[ia, ib] = _sandwich(bl[ia], wl, kl[ib], buf_env, buf_t1, buf_t2, buf_out)
    return out
