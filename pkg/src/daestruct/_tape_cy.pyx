# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Cython tape kernel: register-machine evaluation of compiled expressions.

Opcodes mirror daestruct.tape (OP_CONST=0 ... OP_SQRT=12).
"""

from libc.math cimport (atan2, cos, cosh, exp, fabs, hypot, log, sin, sinh,
                        sqrt, tan, tanh, INFINITY)


cdef inline double powi_f64(double base, int n):
    cdef double acc = 1.0
    cdef double b = base
    cdef unsigned int m
    if n < 0:
        b = 1.0 / b
        m = <unsigned int>(-<long long>n)
    else:
        m = <unsigned int>n
    while m:
        if m & 1u:
            acc *= b
        b *= b
        m >>= 1
    return acc


def eval_f64(int[::1] ops, int[::1] ia, int[::1] ib, int[::1] iout,
             double[::1] consts, double[::1] regs, int[::1] out_regs,
             double[::1] out):
    cdef Py_ssize_t i, n = ops.shape[0]
    cdef int op
    cdef double x, d, v
    for i in range(n):
        op = ops[i]
        if op == 0:
            v = consts[ia[i]]
        elif op == 1:
            v = regs[ia[i]] + regs[ib[i]]
        elif op == 2:
            v = regs[ia[i]] - regs[ib[i]]
        elif op == 3:
            v = regs[ia[i]] * regs[ib[i]]
        elif op == 4:
            d = regs[ib[i]]
            if d == 0.0:
                return (1 << 24) | <int>i
            v = regs[ia[i]] / d
        elif op == 5:
            x = regs[ia[i]]
            if x == 0.0 and ib[i] < 0:
                return (4 << 24) | <int>i
            v = powi_f64(x, ib[i])
        elif op == 6:
            v = sin(regs[ia[i]])
        elif op == 7:
            v = cos(regs[ia[i]])
        elif op == 8:
            v = tan(regs[ia[i]])
        elif op == 9:
            v = tanh(regs[ia[i]])
        elif op == 10:
            x = regs[ia[i]]
            v = exp(x) if x < 709.0 else INFINITY
        elif op == 11:
            x = regs[ia[i]]
            if x <= 0.0:
                return (2 << 24) | <int>i
            v = log(x)
        else:
            x = regs[ia[i]]
            if x < 0.0:
                return (3 << 24) | <int>i
            v = sqrt(x)
        regs[iout[i]] = v
    for i in range(out_regs.shape[0]):
        out[i] = regs[out_regs[i]]
    return 0


# complex helpers built from real libm calls (avoids C99 complex linkage)

cdef inline double complex cmul(double complex a, double complex b):
    return a * b


cdef inline double complex cpowi(double complex base, int n):
    cdef double complex acc = 1.0 + 0.0j
    cdef double complex b = base
    cdef unsigned int m
    if n < 0:
        b = 1.0 / b
        m = <unsigned int>(-<long long>n)
    else:
        m = <unsigned int>n
    while m:
        if m & 1u:
            acc = acc * b
        b = b * b
        m >>= 1
    return acc


cdef inline double complex cexp_(double complex z):
    cdef double e = exp(z.real)
    return (e * cos(z.imag)) + 1j * (e * sin(z.imag))


cdef inline double complex csin_(double complex z):
    return (sin(z.real) * cosh(z.imag)) + 1j * (cos(z.real) * sinh(z.imag))


cdef inline double complex ccos_(double complex z):
    return (cos(z.real) * cosh(z.imag)) - 1j * (sin(z.real) * sinh(z.imag))


cdef inline double complex clog_(double complex z):
    return log(hypot(z.real, z.imag)) + 1j * atan2(z.imag, z.real)


cdef inline double complex csqrt_(double complex z):
    cdef double m = hypot(z.real, z.imag)
    cdef double re = sqrt(0.5 * (m + z.real))
    cdef double im = sqrt(0.5 * (m - z.real))
    if z.imag < 0.0:
        im = -im
    return re + 1j * im


def eval_c128(int[::1] ops, int[::1] ia, int[::1] ib, int[::1] iout,
              double complex[::1] consts, double complex[::1] regs,
              int[::1] out_regs, double complex[::1] out):
    cdef Py_ssize_t i, n = ops.shape[0]
    cdef int op
    cdef double complex z, d, v
    for i in range(n):
        op = ops[i]
        if op == 0:
            v = consts[ia[i]]
        elif op == 1:
            v = regs[ia[i]] + regs[ib[i]]
        elif op == 2:
            v = regs[ia[i]] - regs[ib[i]]
        elif op == 3:
            v = regs[ia[i]] * regs[ib[i]]
        elif op == 4:
            d = regs[ib[i]]
            if d.real == 0.0 and d.imag == 0.0:
                v = INFINITY + 1j * INFINITY
            else:
                v = regs[ia[i]] / d
        elif op == 5:
            z = regs[ia[i]]
            if z.real == 0.0 and z.imag == 0.0 and ib[i] < 0:
                v = INFINITY + 1j * INFINITY
            else:
                v = cpowi(z, ib[i])
        elif op == 6:
            v = csin_(regs[ia[i]])
        elif op == 7:
            v = ccos_(regs[ia[i]])
        elif op == 8:
            v = csin_(regs[ia[i]]) / ccos_(regs[ia[i]])
        elif op == 9:
            z = cexp_(2.0 * regs[ia[i]])
            v = (z - 1.0) / (z + 1.0)
        elif op == 10:
            v = cexp_(regs[ia[i]])
        elif op == 11:
            z = regs[ia[i]]
            if z.real == 0.0 and z.imag == 0.0:
                v = -INFINITY + 0j
            else:
                v = clog_(z)
        else:
            v = csqrt_(regs[ia[i]])
        regs[iout[i]] = v
    for i in range(out_regs.shape[0]):
        out[i] = regs[out_regs[i]]
    return 0
