# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled sweep engine.

Holds dense ``omega``, ``sigma`` and ``Z`` buffers owned by the caller and
updates them in place. Random numbers come straight from the generator's
bit stream in the same order as the pure-Python kernels.
"""
from libc.math cimport log, log1p, exp, sqrt, hypot, INFINITY
from cpython.pycapsule cimport PyCapsule_GetPointer
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal, random_standard_gamma

import numpy as np

from .core import ColumnModel, NotPositiveDefiniteError, NumericalError

cdef double PIVOT_RTOL = 1e-12
cdef double LOG_CLAMP = 700.0

ALGORITHMS = {"gibbs": 0, "bdmh": 1, "lit": 2, "gimh": 3, "exact": 4}


cdef inline double clamped_exp(double x) noexcept nogil:
    if x > LOG_CLAMP:
        x = LOG_CLAMP
    elif x < -LOG_CLAMP:
        x = -LOG_CLAMP
    return exp(x)


cdef class Fac:
    """Lower Cholesky factor of ``U_z`` in insertion order, row stride ``kmax``."""

    cdef int k, kmax, p_a
    cdef double quad, logdet, lw, maxdiag
    cdef double p_quad, p_logdet, p_lw, p_maxdiag
    cdef int *ord
    cdef double *L
    cdef double *v
    cdef object _o, _L, _v

    def __cinit__(self, int kmax):
        cdef int[::1] o
        cdef double[::1] Lv, vv
        if kmax < 1:
            kmax = 1
        self.kmax = kmax
        self._o = np.zeros(kmax + 1, dtype=np.intc)
        self._L = np.zeros((kmax + 1) * (kmax + 1))
        self._v = np.zeros(kmax + 1)
        o = self._o
        Lv = self._L
        vv = self._v
        self.ord = &o[0]
        self.L = &Lv[0]
        self.v = &vv[0]
        self.kmax = kmax + 1
        self.k = 0


cdef class Engine:
    cdef const double[:, ::1] S
    cdef double[:, ::1] omega, sigma, R, omega_sum, rb_sum, z_sum
    cdef unsigned char[:, ::1] Z
    cdef int n, p, dim, dbar, alg, M, family, j, use_allowed, counting
    cdef double theta, g1, lam, pb, pdeath, ups, tau, log_g1, log_tau
    cdef double sjj, sig_jj, scale, ridge
    cdef bitgen_t *bg
    cdef object rng_obj
    cdef public object tables
    cdef public long proposed, accepted
    cdef int[::1] var, deg, perm, inl, outl, inl2, outl2, pos
    cdef double[::1] s, sig, sigcol, wbuf, cum, eps, u1, vv, xbuf, wfull, lwc
    cdef unsigned char[::1] inz, allowed
    cdef Fac cur, prop, t1, t2
    cdef object omega_arr, sigma_arr, Z_arr, R_arr, osum_arr, rbsum_arr, zsum_arr

    def __init__(self, S, int n, hyper, str algorithm, int M, omega, sigma, Z, rng, tables=None):
        cdef int p = S.shape[0]
        self.S = np.ascontiguousarray(S, dtype=np.float64)
        self.n = n
        self.p = p
        self.dim = p - 1
        self.theta = hyper.theta
        self.g1 = hyper.g1
        self.lam = hyper.lam
        self.dbar = hyper.dbar
        self.pb = hyper.p_birth
        self.pdeath = hyper.p_death
        self.ups = hyper.upsilon
        self.tau = hyper.tau
        self.log_g1 = log(self.g1)
        self.log_tau = log(self.tau)
        self.alg = ALGORITHMS[algorithm]
        self.M = M
        self.omega_arr = omega
        self.sigma_arr = sigma
        self.Z_arr = Z
        self.omega = omega
        self.sigma = sigma
        self.Z = Z
        self.R_arr = np.zeros((p, p))
        self.R = self.R_arr
        self.osum_arr = np.zeros((p, p))
        self.rbsum_arr = np.zeros((p, p))
        self.zsum_arr = np.zeros((p, p))
        self.omega_sum = self.osum_arr
        self.rb_sum = self.rbsum_arr
        self.z_sum = self.zsum_arr
        self.tables = tables
        self.set_rng(rng)
        self.var = np.zeros(p, dtype=np.intc)
        self.deg = np.asarray(Z, dtype=np.intc).sum(axis=0).astype(np.intc)
        self.perm = np.zeros(p, dtype=np.intc)
        self.inl = np.zeros(p, dtype=np.intc)
        self.outl = np.zeros(p, dtype=np.intc)
        self.inl2 = np.zeros(p, dtype=np.intc)
        self.outl2 = np.zeros(p, dtype=np.intc)
        self.pos = np.zeros(p, dtype=np.intc)
        self.s = np.zeros(p)
        self.sig = np.zeros(p)
        self.sigcol = np.zeros(p)
        self.eps = np.zeros(p)
        self.u1 = np.zeros(p)
        self.vv = np.zeros(p)
        self.xbuf = np.zeros(p)
        self.wfull = np.zeros(p)
        self.wbuf = np.zeros(max(1, (p // 2 + 1) * (p // 2 + 1), p))
        self.cum = np.zeros(max(1, (p // 2 + 1) * (p // 2 + 1), p))
        self.lwc = np.zeros(1)
        self.inz = np.zeros(p, dtype=np.uint8)
        self.allowed = np.ones(p, dtype=np.uint8)
        self.cur = Fac(self.dbar)
        self.prop = Fac(self.dbar)
        self.t1 = Fac(self.dbar)
        self.t2 = Fac(self.dbar)
        self.proposed = 0
        self.accepted = 0
        self.counting = 1

    def set_rng(self, rng):
        self.rng_obj = rng
        self.bg = <bitgen_t *> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")

    def reset_degrees(self):
        self.deg = np.asarray(self.Z_arr, dtype=np.intc).sum(axis=0).astype(np.intc)

    @property
    def omega_sum_arr(self):
        return self.osum_arr

    @property
    def rb_sum_arr(self):
        return self.rbsum_arr

    @property
    def z_sum_arr(self):
        return self.zsum_arr

    @property
    def R_last(self):
        return self.R_arr

    # ------------------------------------------------------------------ random numbers

    cdef inline double unif(self) noexcept:
        return self.bg.next_double(self.bg.state)

    cdef void shuffle(self, int[::1] out, int n) noexcept:
        cdef int i, r, t
        for i in range(n):
            out[i] = i
        for i in range(n - 1, 0, -1):
            r = <int> (self.unif() * (i + 1))
            t = out[i]
            out[i] = out[r]
            out[r] = t

    # ------------------------------------------------------------------ column context

    cdef void set_column(self, int j, int family) noexcept:
        cdef int a, va
        self.j = j
        self.sjj = self.S[j, j]
        self.sig_jj = self.sigma[j, j]
        for a in range(self.dim):
            va = a if a < j else a + 1
            self.var[a] = va
            self.s[a] = self.S[va, j]
            self.sig[a] = self.sg(va, j)
            self.inz[a] = self.Z[va, j]
        if self.dbar < self.dim:
            for a in range(self.dim):
                va = self.var[a]
                self.allowed[a] = (self.deg[va] - self.Z[va, j]) < self.dbar
        self.set_family(family)

    cdef void set_family(self, int family) noexcept:
        self.family = family
        if family == 0:
            self.scale = self.sjj + self.lam
            self.ridge = self.g1 ** -2
            self.use_allowed = self.dbar < self.dim
        else:
            self.scale = 1.0
            self.ridge = self.tau
            self.use_allowed = 0

    cdef inline double G(self, int a, int b) noexcept:
        cdef int va = self.var[a]
        cdef int vb = self.var[b]
        cdef double x
        if self.family == 0:
            x = self.scale * (self.sg(va, vb) - self.sig[a] * self.sig[b] / self.sig_jj)
        else:
            x = self.S[va, vb]
        if a == b:
            x += self.ridge
        return x

    cdef double lprior(self, int k) noexcept:
        cdef double out = 0.0
        if self.theta >= 1.0:
            return 0.0 if k == self.dim else -INFINITY
        if k:
            out = k * log(self.theta)
        if self.dim - k:
            out += (self.dim - k) * log1p(-self.theta)
        return out

    cdef double weight(self, int k, double quad, double logdet) except? -1.0:
        cdef double resid
        if self.family == 0:
            return 0.5 * quad - 0.5 * logdet - k * self.log_g1 + self.lprior(k)
        resid = self.lam + self.sjj - quad
        if not resid > 0:
            raise NumericalError(f"regression residual {resid} is not positive")
        return self.lprior(k) + 0.5 * k * self.log_tau - 0.5 * logdet - (self.n / 2.0 + 1.0) * log(resid)

    # ------------------------------------------------------------------ factor operations

    cdef int fac_fresh(self, Fac F, int[::1] pos, int k) except -1:
        cdef int i, c, t, a, km = F.kmax
        cdef double x, y, maxd = 0.0, tol, quad = 0.0, logdet = 0.0
        cdef double *row
        cdef double *crow
        if k > self.dbar:
            F.k = 0
            F.lw = -INFINITY
            return 0
        if self.use_allowed:
            for i in range(k):
                if not self.allowed[pos[i]]:
                    F.k = 0
                    F.lw = -INFINITY
                    return 0
        for i in range(k):
            x = self.G(pos[i], pos[i])
            if x > maxd:
                maxd = x
        tol = PIVOT_RTOL * maxd
        for i in range(k):
            a = pos[i]
            row = F.L + i * km
            for c in range(i):
                crow = F.L + c * km
                x = self.G(a, pos[c])
                for t in range(c):
                    x -= row[t] * crow[t]
                row[c] = x / crow[c]
            x = self.G(a, a)
            for t in range(i):
                x -= row[t] * row[t]
            if not x > tol:
                raise NotPositiveDefiniteError("matrix is not positive definite", index=i)
            row[i] = sqrt(x)
            y = self.s[a]
            for t in range(i):
                y -= row[t] * F.v[t]
            F.v[i] = y / row[i]
            F.ord[i] = a
            quad += F.v[i] * F.v[i]
            logdet += 2.0 * log(row[i])
        F.k = k
        F.maxdiag = maxd
        F.quad = quad
        F.logdet = logdet
        F.lw = self.weight(k, quad, logdet)
        return 0

    cdef double probe_add(self, Fac F, int b) except? -1.0:
        """Bordered row for ``b`` written past the committed rows; returns its log weight."""
        cdef int k = F.k, c, t, km = F.kmax
        cdef double x, y, dg, tol, d
        cdef double *row = F.L + k * km
        cdef double *crow
        if k + 1 > self.dbar or (self.use_allowed and not self.allowed[b]):
            F.p_lw = -INFINITY
            return -INFINITY
        for c in range(k):
            crow = F.L + c * km
            x = self.G(b, F.ord[c])
            for t in range(c):
                x -= row[t] * crow[t]
            row[c] = x / crow[c]
        dg = self.G(b, b)
        x = dg
        for t in range(k):
            x -= row[t] * row[t]
        tol = PIVOT_RTOL * (dg if dg > F.maxdiag else F.maxdiag)
        if not x > tol:
            raise NotPositiveDefiniteError("bordered matrix is not positive definite", index=k)
        d = sqrt(x)
        row[k] = d
        y = self.s[b]
        for t in range(k):
            y -= row[t] * F.v[t]
        F.v[k] = y / d
        F.p_a = b
        F.p_quad = F.quad + F.v[k] * F.v[k]
        F.p_logdet = F.logdet + 2.0 * log(d)
        F.p_maxdiag = dg if dg > F.maxdiag else F.maxdiag
        F.p_lw = self.weight(k + 1, F.p_quad, F.p_logdet)
        return F.p_lw

    cdef void commit_add(self, Fac F) noexcept:
        F.ord[F.k] = F.p_a
        F.k += 1
        F.quad = F.p_quad
        F.logdet = F.p_logdet
        F.maxdiag = F.p_maxdiag
        F.lw = F.p_lw

    cdef void copy_into(self, Fac src, Fac dst) noexcept:
        cdef int r, c, km = src.kmax
        for r in range(src.k):
            for c in range(r + 1):
                dst.L[r * km + c] = src.L[r * km + c]
            dst.ord[r] = src.ord[r]
            dst.v[r] = src.v[r]
        dst.k = src.k
        dst.quad = src.quad
        dst.logdet = src.logdet
        dst.maxdiag = src.maxdiag
        dst.lw = src.lw

    cdef int remove_into(self, Fac src, Fac dst, int a) except -1:
        """Factor of the model without position ``a`` by deletion plus plane rotations."""
        cdef int k = src.k, km = src.kmax, idx = 0, r, c, rr, cc, i, t, nt
        cdef double ca, sa, rad, li, vi, vx, quad = 0.0, logdet = 0.0, maxd = 0.0, x
        cdef double *xb = &self.xbuf[0]
        while src.ord[idx] != a:
            idx += 1
        for r in range(k):
            if r == idx:
                continue
            rr = r if r < idx else r - 1
            cc = 0
            for c in range(r + 1):
                if c == idx:
                    continue
                dst.L[rr * km + cc] = src.L[r * km + c]
                cc += 1
            dst.ord[rr] = src.ord[r]
            dst.v[rr] = src.v[r]
        nt = k - 1 - idx
        for i in range(nt):
            xb[i] = src.L[(idx + 1 + i) * km + idx]
        vx = src.v[idx]
        for i in range(nt):
            r = idx + i
            rad = hypot(dst.L[r * km + r], xb[i])
            ca = dst.L[r * km + r] / rad
            sa = xb[i] / rad
            dst.L[r * km + r] = rad
            for t in range(i + 1, nt):
                rr = idx + t
                li = dst.L[rr * km + r]
                dst.L[rr * km + r] = ca * li + sa * xb[t]
                xb[t] = ca * xb[t] - sa * li
            vi = dst.v[r]
            dst.v[r] = ca * vi + sa * vx
            vx = ca * vx - sa * vi
        for r in range(k - 1):
            quad += dst.v[r] * dst.v[r]
            logdet += 2.0 * log(dst.L[r * km + r])
            x = self.G(dst.ord[r], dst.ord[r])
            if x > maxd:
                maxd = x
        dst.k = k - 1
        dst.quad = quad
        dst.logdet = logdet
        dst.maxdiag = maxd
        dst.lw = self.weight(k - 1, quad, logdet)
        return 0

    cdef void swap_cur(self, int which) noexcept:
        cdef Fac tmp = self.cur
        if which == 1:
            self.cur = self.t1
            self.t1 = tmp
        else:
            self.cur = self.prop
            self.prop = tmp

    cdef int build_current(self) except -1:
        cdef int a, k = 0
        for a in range(self.dim):
            if self.inz[a]:
                self.pos[k] = a
                k += 1
        self.fac_fresh(self.cur, self.pos, k)
        return k

    cdef int lists(self, int[::1] inl, int[::1] outl) noexcept:
        """Ascending in/out positions of the model in ``inz``; returns the size."""
        cdef int a, ki = 0, ko = 0
        for a in range(self.dim):
            if self.inz[a]:
                inl[ki] = a
                ki += 1
            else:
                outl[ko] = a
                ko += 1
        return ki

    # ------------------------------------------------------------------ kernels

    cdef inline double incl_prob(self, double lw_minus, double lw_plus) noexcept:
        if lw_plus == -INFINITY:
            return 0.0
        if lw_minus == -INFINITY:
            return 1.0
        return 1.0 / (1.0 + clamped_exp(lw_minus - lw_plus))

    cdef int gibbs_scan(self, int record) except -1:
        cdef int r, a
        cdef double lw_minus, lw_plus, prob
        cdef bint take
        self.shuffle(self.perm, self.dim)
        for r in range(self.dim):
            a = self.perm[r]
            if self.inz[a]:
                lw_plus = self.cur.lw
                self.remove_into(self.cur, self.t1, a)
                lw_minus = self.t1.lw
            else:
                lw_minus = self.cur.lw
                lw_plus = self.probe_add(self.cur, a)
            prob = self.incl_prob(lw_minus, lw_plus)
            if record:
                self.R[self.var[a], self.j] = prob
            take = self.unif() < prob
            if take != self.inz[a]:
                if self.inz[a]:
                    self.swap_cur(1)
                    self.inz[a] = 0
                else:
                    self.commit_add(self.cur)
                    self.inz[a] = 1
        return 0

    cdef void class_probs(self, int k, double *out) noexcept:
        cdef double pb = self.pb if k < self.dim else 0.0
        cdef double pd = self.pdeath if k > 0 else 0.0
        cdef double ps = (1.0 - self.pb - self.pdeath) if (0 < k < self.dim) else 0.0
        cdef double tot = pb + pd + ps
        out[0] = pb / tot
        out[1] = pd / tot
        out[2] = ps / tot

    cdef int choose_class(self, int k) noexcept:
        cdef double cp[3]
        cdef double u
        self.class_probs(k, cp)
        u = self.unif()
        if u < cp[0]:
            return 0
        if u < cp[0] + cp[1]:
            return 1
        return 2

    cdef inline bint accept(self, double log_ratio) noexcept:
        cdef double u = self.unif()
        if log_ratio == -INFINITY:
            return False
        return u < exp(log_ratio if log_ratio < 0.0 else 0.0)

    cdef int bdmh_step(self) except -1:
        cdef int k = self.cur.k, cls, a, b, dim = self.dim
        cdef double lw_new, log_q, ratio
        cdef double cpf[3]
        cdef double cpr[3]
        self.lists(self.inl, self.outl)
        cls = self.choose_class(k)
        self.class_probs(k, cpf)
        if cls == 0:
            b = self.outl[<int> (self.unif() * (dim - k))]
            lw_new = self.probe_add(self.cur, b)
            self.class_probs(k + 1, cpr)
            log_q = log(cpr[1] / (k + 1)) - log(cpf[0] / (dim - k))
        elif cls == 1:
            a = self.inl[<int> (self.unif() * k)]
            self.remove_into(self.cur, self.t1, a)
            lw_new = self.t1.lw
            self.class_probs(k - 1, cpr)
            log_q = log(cpr[0] / (dim - k + 1)) - log(cpf[1] / k)
        else:
            a = self.inl[<int> (self.unif() * k)]
            b = self.outl[<int> (self.unif() * (dim - k))]
            self.remove_into(self.cur, self.t1, a)
            lw_new = self.probe_add(self.t1, b)
            log_q = log(cpf[2] / (k * (dim - k))) - log(cpf[2] / (k * (dim - k)))
        ratio = lw_new - self.cur.lw + log_q if lw_new > -INFINITY else -INFINITY
        if self.counting:
            self.proposed += 1
        if self.accept(ratio):
            if cls == 0:
                self.commit_add(self.cur)
                self.inz[b] = 1
            elif cls == 1:
                self.swap_cur(1)
                self.inz[a] = 0
            else:
                self.commit_add(self.t1)
                self.swap_cur(1)
                self.inz[a] = 0
                self.inz[b] = 1
            if self.counting:
                self.accepted += 1
        return 0

    cdef inline double lit_w(self, double lw_new, double lw_cur) noexcept:
        cdef double d, lo = -log(<double> self.p)
        if lw_new == -INFINITY:
            return 1.0 / self.p
        d = lw_new - lw_cur
        if d < lo:
            d = lo
        if d > -lo:
            d = -lo
        return exp(d)

    cdef double class_sum(self, Fac base, int cls, int[::1] inl, int[::1] outl, int k, int store) except? -1.0:
        """Sum of thresholded weights over one move class of ``base``; optionally stores each."""
        cdef int i, i2, n = 0, ko = self.dim - k
        cdef double w, tot = 0.0, lw0 = base.lw
        if cls == 0:
            for i in range(ko):
                w = self.lit_w(self.probe_add(base, outl[i]), lw0)
                tot += w
                if store:
                    self.wbuf[n] = w
                    self.cum[n] = tot
                n += 1
        elif cls == 1:
            for i in range(k):
                self.remove_into(base, self.t1, inl[i])
                w = self.lit_w(self.t1.lw, lw0)
                tot += w
                if store:
                    self.wbuf[n] = w
                    self.cum[n] = tot
                n += 1
        else:
            for i in range(k):
                self.remove_into(base, self.t1, inl[i])
                for i2 in range(ko):
                    w = self.lit_w(self.probe_add(self.t1, outl[i2]), lw0)
                    tot += w
                    if store:
                        self.wbuf[n] = w
                        self.cum[n] = tot
                    n += 1
        return tot

    cdef int lit_step(self) except -1:
        cdef int k = self.cur.k, cls, rcls, nn, i, a = -1, b = -1, ko, k2
        cdef double z_fwd, z_rev, x, ratio, w_fwd, w_rev
        cdef double cpf[3]
        cdef double cpr[3]
        self.lists(self.inl, self.outl)
        ko = self.dim - k
        cls = self.choose_class(k)
        z_fwd = self.class_sum(self.cur, cls, self.inl, self.outl, k, 1)
        nn = ko if cls == 0 else (k if cls == 1 else k * ko)
        x = self.unif() * self.cum[nn - 1]
        i = 0
        while i < nn - 1 and not self.cum[i] > x:
            i += 1
        w_fwd = self.wbuf[i]
        z_fwd = self.cum[nn - 1]
        if cls == 0:
            b = self.outl[i]
            self.copy_into(self.cur, self.prop)
            self.probe_add(self.prop, b)
            self.commit_add(self.prop)
        elif cls == 1:
            a = self.inl[i]
            self.remove_into(self.cur, self.prop, a)
        else:
            a = self.inl[i // ko]
            b = self.outl[i % ko]
            self.remove_into(self.cur, self.prop, a)
            self.probe_add(self.prop, b)
            self.commit_add(self.prop)
        if self.prop.lw > -INFINITY:
            if a >= 0:
                self.inz[a] = 0
            if b >= 0:
                self.inz[b] = 1
            k2 = self.lists(self.inl2, self.outl2)
            if a >= 0:
                self.inz[a] = 1
            if b >= 0:
                self.inz[b] = 0
            rcls = 1 if cls == 0 else (0 if cls == 1 else 2)
            z_rev = self.class_sum(self.prop, rcls, self.inl2, self.outl2, k2, 0)
            self.class_probs(k, cpf)
            self.class_probs(k2, cpr)
            w_rev = self.lit_w(self.cur.lw, self.prop.lw)
            ratio = (self.prop.lw - self.cur.lw + log(cpr[rcls]) + log(w_rev) - log(z_rev)
                     - log(cpf[cls]) - log(w_fwd) + log(z_fwd))
        else:
            ratio = -INFINITY
        if self.counting:
            self.proposed += 1
        if self.accept(ratio):
            self.swap_cur(2)
            if a >= 0:
                self.inz[a] = 0
            if b >= 0:
                self.inz[b] = 1
            if self.counting:
                self.accepted += 1
        return 0

    cdef object key_of_inz(self):
        cdef int a
        key = 0
        for a in range(self.dim):
            if self.inz[a]:
                key |= 1 << a
        return key

    cdef int gimh_run(self, int steps) except -1:
        cdef int t, i, i_cur, m, lo, hi, mid, nmod, c, k
        cdef double lw_cur, lw_new, delta, x
        cdef int[::1] offs, flat
        cdef double[::1] lrw, cum
        table = self.tables[self.j]
        key = self.key_of_inz()
        idx = table.index.get(key)
        k = self.build_model_pos()
        if idx is None:
            self.set_family(1)
            self.fac_fresh(self.t2, self.pos, k)
            idx = table.append(ColumnModel(tuple(int(self.pos[c]) for c in range(k)), self.dim), self.t2.lw)
            self.set_family(0)
        offs, flat, lrw, cum = table.packed()
        nmod = lrw.shape[0]
        if self.lwc.shape[0] < nmod:
            self.lwc = np.empty(max(nmod, 2 * self.lwc.shape[0]))
        for t in range(nmod):
            self.lwc[t] = np.nan
        i_cur = idx
        self.fac_fresh(self.t2, self.pos, k)
        lw_cur = self.t2.lw
        self.lwc[i_cur] = lw_cur
        for t in range(steps):
            x = self.unif() * cum[nmod - 1]
            lo = 0
            hi = nmod
            while lo < hi:
                mid = (lo + hi) // 2
                if cum[mid] > x:
                    hi = mid
                else:
                    lo = mid + 1
            i = lo if lo < nmod else nmod - 1
            lw_new = self.lwc[i]
            if lw_new != lw_new:
                m = offs[i + 1] - offs[i]
                for c in range(m):
                    self.pos[c] = flat[offs[i] + c]
                self.fac_fresh(self.t2, self.pos, m)
                lw_new = self.t2.lw
                self.lwc[i] = lw_new
            delta = (lw_new - lw_cur) - self.ups * (lrw[i] - lrw[i_cur])
            if self.counting:
                self.proposed += 1
            if self.accept(delta):
                i_cur = i
                lw_cur = lw_new
                if self.counting:
                    self.accepted += 1
        for c in range(self.dim):
            self.inz[c] = 0
        for c in range(offs[i_cur], offs[i_cur + 1]):
            self.inz[flat[c]] = 1
        return 0

    cdef int build_model_pos(self) noexcept:
        cdef int a, k = 0
        for a in range(self.dim):
            if self.inz[a]:
                self.pos[k] = a
                k += 1
        return k

    cdef int exact_draw(self) except -1:
        cdef long nmod = 1L << self.dim, key, t
        cdef int a, k
        cdef double mx = -INFINITY, tot = 0.0, x
        lw = np.empty(nmod)
        cdef double[::1] lwv = lw
        for key in range(nmod):
            k = 0
            for a in range(self.dim):
                if (key >> a) & 1:
                    self.pos[k] = a
                    k += 1
            self.fac_fresh(self.t2, self.pos, k)
            lwv[key] = self.t2.lw
            if lwv[key] > mx:
                mx = lwv[key]
        cumv = np.empty(nmod)
        cdef double[::1] cv = cumv
        for key in range(nmod):
            tot += exp(lwv[key] - mx)
            cv[key] = tot
        x = self.unif() * tot
        t = 0
        while t < nmod - 1 and not cv[t] > x:
            t += 1
        for a in range(self.dim):
            self.inz[a] = (t >> a) & 1
        return 0

    cdef int run_kernel(self, int record) except -1:
        """One kernel application at the current column; ``cur`` must be built."""
        cdef int t
        if self.alg == 0:
            self.gibbs_scan(record)
        elif self.alg == 1:
            for t in range(self.M):
                self.bdmh_step()
        elif self.alg == 2:
            for t in range(self.M):
                self.lit_step()
        elif self.alg == 3:
            self.gimh_run(self.M)
        else:
            self.exact_draw()
        return 0

    # ------------------------------------------------------------------ column update

    cdef int draw_column(self, double u2, int have_u2) except -1:
        cdef int j = self.j, p = self.p, dim = self.dim, k, i, t, a, b, va, x, y
        cdef double acc, odiag, gamma, val
        cdef Fac F = self.t2
        cdef int km
        k = self.build_model_pos()
        self.fac_fresh(F, self.pos, k)
        km = F.kmax
        for i in range(k):
            self.eps[i] = random_standard_normal(self.bg)
        for i in range(k - 1, -1, -1):
            acc = F.v[i] + self.eps[i]
            for t in range(i + 1, k):
                acc -= F.L[t * km + i] * self.u1[t]
            self.u1[i] = acc / F.L[i * km + i]
        if not have_u2:
            u2 = random_standard_gamma(self.bg, self.n / 2.0 + 1.0) / ((self.sjj + self.lam) / 2.0)
        if not u2 > 0:
            raise NumericalError(f"non-positive Gamma draw {u2}")
        # quadratic form with ainv restricted to the model
        odiag = 0.0
        for i in range(k):
            acc = 0.0
            for t in range(k):
                acc += self.ainv(self.pos[i], self.pos[t]) * self.u1[t]
            odiag += self.u1[i] * acc
        odiag += u2
        # v = ainv @ omega_col, omega_col = -u1 on the model
        for a in range(dim):
            acc = 0.0
            for t in range(k):
                acc += self.ainv(a, self.pos[t]) * (-self.u1[t])
            self.vv[a] = acc
        gamma = odiag
        for t in range(k):
            gamma -= self.vv[self.pos[t]] * (-self.u1[t])
        if not gamma > 0:
            raise NotPositiveDefiniteError(f"Schur complement {gamma} is not positive", index=j)
        # write omega and Z
        for a in range(dim):
            va = self.var[a]
            self.omega[va, j] = 0.0
            self.omega[j, va] = 0.0
        for t in range(k):
            va = self.var[self.pos[t]]
            self.omega[va, j] = -self.u1[t]
            self.omega[j, va] = -self.u1[t]
        self.omega[j, j] = odiag
        for a in range(dim):
            va = self.var[a]
            if self.Z[va, j] != self.inz[a]:
                if self.inz[a]:
                    self.deg[va] += 1
                    self.deg[j] += 1
                else:
                    self.deg[va] -= 1
                    self.deg[j] -= 1
                self.Z[va, j] = self.inz[a]
                self.Z[j, va] = self.inz[a]
        # sigma <- sigma - s s'/s_jj + w w'/gamma with w = (v, -1)
        # upper triangle only; see symmetrize()
        for x in range(p):
            self.sigcol[x] = self.sg(x, j)
        for a in range(dim):
            self.wfull[self.var[a]] = self.vv[a]
        self.wfull[j] = -1.0
        cdef double *row
        cdef double *c = &self.sigcol[0]
        cdef double *w = &self.wfull[0]
        cdef double ax, bx
        for x in range(p):
            row = &self.sigma[x, 0]
            ax = c[x] / self.sig_jj
            bx = w[x] / gamma
            for y in range(x, p):
                row[y] = row[y] - ax * c[y] + bx * w[y]
        return 0

    cdef inline double sg(self, int x, int y) noexcept:
        if x <= y:
            return self.sigma[x, y]
        return self.sigma[y, x]

    def symmetrize(self):
        """Copy the maintained upper triangle of ``sigma`` into the lower one."""
        cdef int x, y
        for x in range(self.p):
            for y in range(x):
                self.sigma[x, y] = self.sigma[y, x]

    cdef inline double ainv(self, int a, int b) noexcept:
        return self.sg(self.var[a], self.var[b]) - self.sig[a] * self.sig[b] / self.sig_jj

    cdef int visit(self, int j, int record) except -1:
        cdef double u2 = 0.0
        cdef int have = 0
        self.set_column(j, 0)
        if self.alg == 3:
            u2 = random_standard_gamma(self.bg, self.n / 2.0 + 1.0) / ((self.sjj + self.lam) / 2.0)
            have = 1
        elif self.alg != 4:
            self.build_current()
        self.run_kernel(record)
        self.draw_column(u2, have)
        return 0

    def sweep(self, bint accumulate):
        """One random-scan pass over all columns."""
        cdef int r, x, y, p = self.p
        cdef int record = self.alg == 0
        self.shuffle(self.perm, p)
        order = np.asarray(self.perm[:p]).copy()
        for r in range(p):
            try:
                self.visit(order[r], record)
            except Exception as exc:
                exc.column = int(order[r])
                raise
        if accumulate:
            for x in range(p):
                for y in range(p):
                    self.omega_sum[x, y] += self.omega[x, y]
                    self.z_sum[x, y] += self.Z[x, y]
                    if record:
                        self.rb_sum[x, y] += self.R[x, y]

    def fixed_counts(self, int j, long updates, long warmup):
        """Visit counts by model key of repeated kernel applications at a fixed column context."""
        cdef long t, key
        cdef int a
        counts = np.zeros(1 << self.dim, dtype=np.int64)
        cdef long[::1] cv = counts
        self.set_column(j, 0)
        for t in range(warmup + updates):
            if self.alg in (0, 1, 2):
                self.build_current()
            self.run_kernel(0)
            if t >= warmup:
                key = 0
                for a in range(self.dim):
                    if self.inz[a]:
                        key |= 1L << a
                cv[key] += 1
        return counts

    def lr_visits(self, int j, long T, long warmup, str sampler, int M, rng):
        """Distinct models visited after ``warmup`` by a chain on the regression posterior."""
        cdef long t
        cdef int a, saved_alg = self.alg, saved_M = self.M
        saved_rng = self.rng_obj
        self.set_rng(rng)
        self.counting = 0
        self.alg = 0 if sampler == "gibbs" else 1
        self.M = M
        seen = {}
        try:
            self.set_column(j, 1)
            for a in range(self.dim):
                self.inz[a] = 0
            self.build_current()
            for t in range(T):
                if self.alg == 0:
                    self.gibbs_scan(0)
                else:
                    for a in range(self.M):
                        self.bdmh_step()
                if t >= warmup:
                    key = self.key_of_inz()
                    if key not in seen:
                        seen[key] = ColumnModel(tuple(a2 for a2 in range(self.dim) if self.inz[a2]), self.dim)
        finally:
            self.set_rng(saved_rng)
            self.counting = 1
            self.alg = saved_alg
            self.M = saved_M
        return [seen[k] for k in sorted(seen)]
