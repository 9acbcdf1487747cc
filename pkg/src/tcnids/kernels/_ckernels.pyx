# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Causal convolution kernels calling BLAS dgemm on unpadded, shifted blocks.

Arrays are row-major; dgemm is column-major, so every product is issued in
transposed form (C^T = B^T A^T) and no operand is copied.
"""
import numpy as np
from scipy.linalg.cython_blas cimport dgemm


def causal_conv_forward(const double[:, :, ::1] x, const double[:, :, ::1] kernel,
                        const double[::1] bias, int dilation):
    cdef int B = x.shape[0], T = x.shape[1], cin = x.shape[2]
    cdef int k = kernel.shape[0], cout = kernel.shape[2]
    out = np.empty((B, T, cout))
    cdef double[:, :, ::1] y = out
    cdef int b, t, o, j, shift, rows
    cdef double one = 1.0
    cdef char no = b'N'
    for b in range(B):
        for t in range(T):
            for o in range(cout):
                y[b, t, o] = bias[o]
    for b in range(B):
        for j in range(k):
            shift = (k - 1 - j) * dilation
            if shift >= T:
                continue
            rows = T - shift
            dgemm(&no, &no, &cout, &rows, &cin, &one,
                  <double*>&kernel[j, 0, 0], &cout,
                  <double*>&x[b, 0, 0], &cin,
                  &one, &y[b, shift, 0], &cout)
    return out


def causal_conv_backward(const double[:, :, ::1] x, const double[:, :, ::1] kernel,
                         const double[:, :, ::1] grad_out, int dilation):
    cdef int B = x.shape[0], T = x.shape[1], cin = x.shape[2]
    cdef int k = kernel.shape[0], cout = kernel.shape[2]
    gx_arr = np.zeros((B, T, cin))
    gk_arr = np.zeros((k, cin, cout))
    gb_arr = np.zeros(cout)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gk = gk_arr
    cdef double[::1] gb = gb_arr
    cdef int b, t, o, j, shift, rows
    cdef double one = 1.0
    cdef char no = b'N', tr = b'T'
    for b in range(B):
        for t in range(T):
            for o in range(cout):
                gb[o] += grad_out[b, t, o]
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= T:
            continue
        rows = T - shift
        for b in range(B):
            # grad_kernel[j] += x_block^T @ g_block
            dgemm(&no, &tr, &cout, &cin, &rows, &one,
                  <double*>&grad_out[b, shift, 0], &cout,
                  <double*>&x[b, 0, 0], &cin,
                  &one, &gk[j, 0, 0], &cout)
            # grad_x_block += g_block @ kernel[j]^T
            dgemm(&tr, &no, &cin, &rows, &cout, &one,
                  <double*>&kernel[j, 0, 0], &cout,
                  <double*>&grad_out[b, shift, 0], &cout,
                  &one, &gx[b, 0, 0], &cin)
    return gx_arr, gk_arr, gb_arr
