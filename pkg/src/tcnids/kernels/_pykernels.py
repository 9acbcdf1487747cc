"""Numpy implementation of the causal convolution kernels.

Layouts: ``x`` is ``(B, T, Cin)``, ``kernel`` is ``(k, Cin, Cout)``, output is
``(B, T, Cout)``. Tap ``j`` reads input ``t - (k - 1 - j) * dilation``; reads
before ``t = 0`` see zeros.
"""
import numpy as np


def causal_conv_forward(x, kernel, bias, dilation):
    B, T, _ = x.shape
    k, _, cout = kernel.shape
    y = np.empty((B, T, cout))
    y[...] = bias
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= T:
            continue
        y[:, shift:, :] += x[:, : T - shift, :] @ kernel[j]
    return y


def causal_conv_backward(x, kernel, grad_out, dilation):
    B, T, cin = x.shape
    k, _, cout = kernel.shape
    grad_x = np.zeros_like(x)
    grad_kernel = np.zeros_like(kernel)
    grad_bias = grad_out.sum(axis=(0, 1))
    for j in range(k):
        shift = (k - 1 - j) * dilation
        if shift >= T:
            continue
        g = grad_out[:, shift:, :]
        xs = x[:, : T - shift, :]
        grad_kernel[j] = xs.reshape(-1, cin).T @ g.reshape(-1, cout)
        grad_x[:, : T - shift, :] += g @ kernel[j].T
    return grad_x, grad_kernel, grad_bias
