"""Thin FFT layer so the worker count is set in one place."""
import scipy.fft as _sfft

_workers = 1


def set_threads(n):
    global _workers
    if n < 1:
        raise ValueError("thread count must be >= 1")
    _workers = int(n)


def get_threads():
    return _workers


def fftn(a, axes=None):
    return _sfft.fftn(a, axes=axes, workers=_workers)


def ifftn(a, axes=None):
    return _sfft.ifftn(a, axes=axes, workers=_workers)


def fft(a, axis=-1, n=None):
    return _sfft.fft(a, n=n, axis=axis, workers=_workers)


def ifft(a, axis=-1, n=None):
    return _sfft.ifft(a, n=n, axis=axis, workers=_workers)
