"""Dual-lattice Fourier sample sets and their inversion.

Samples approximate the windowed transform

    s(tau, xi) = int over (0,T) x Omega of f(t,x) e^{i(tau t + xi.x)}

on the grid's DFT dual lattice: tau_j = 2 pi j / T, xi_k = 2 pi k / box
with j in the nt-point and k in the (m-1)-point DFT index ranges.  Only
a low-frequency band is ever populated by the reconstruction pipelines
(the benchmark coefficients are smooth, so their spectra are negligible
outside it); the remaining lattice is zero-filled, which makes the
inverse transform a plain FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .grid import ComplexField, SpaceTimeGrid, norm_l2_spacetime


def _signed_range(npts: int) -> np.ndarray:
    """Signed DFT frequencies for an npts-point transform."""
    return np.fft.fftfreq(npts, d=1.0 / npts).astype(int)


@dataclass
class FourierSampleSet:
    """Complex samples on the full dual lattice, band-limited fill.

    The backing array has shape (nt, m1-1, ..., mn-1) covering the whole
    dual lattice [-pi/dt, pi/dt] x prod [-pi/h_k, pi/h_k]; `filled` marks
    which entries hold actual samples.
    """

    grid: SpaceTimeGrid
    j_max: int
    k_max: int
    samples: np.ndarray = None
    filled: np.ndarray = None
    lambda_used: dict = dc_field(default_factory=dict)
    diagnostics: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        shape = self.lattice_shape()
        if self.samples is None:
            self.samples = np.zeros(shape, dtype=complex)
        if self.filled is None:
            self.filled = np.zeros(shape, dtype=bool)
        if 2 * self.j_max + 1 > self.grid.nt or \
                any(2 * self.k_max + 1 > mm - 1 for mm in self.grid.m):
            raise ValueError("band exceeds the dual lattice")

    def lattice_shape(self) -> tuple[int, ...]:
        return (self.grid.nt,) + tuple(mm - 1 for mm in self.grid.m)

    def tau_of(self, j: int) -> float:
        return 2.0 * np.pi * j / self.grid.T

    def xi_of(self, kvec) -> np.ndarray:
        return 2.0 * np.pi * np.asarray(kvec, dtype=float) / np.asarray(self.grid.box)

    def band_indices(self, half: bool = False):
        """All (j, kvec) in the band; `half` keeps one member per
        conjugate pair (real fields satisfy s(-j,-k) = conj s(j,k))."""
        ks = range(-self.k_max, self.k_max + 1)
        out = []
        for j in range(-self.j_max, self.j_max + 1):
            for kvec in np.stack(np.meshgrid(*([list(ks)] * self.grid.n),
                                             indexing="ij"), axis=-1).reshape(-1, self.grid.n):
                idx = (j,) + tuple(int(v) for v in kvec)
                if half:
                    neg = tuple(-v for v in idx)
                    if neg < idx:
                        continue
                out.append(idx)
        return out

    def _pos(self, j: int, kvec) -> tuple[int, ...]:
        shape = self.lattice_shape()
        idx = [j % shape[0]]
        for axis, kk in enumerate(kvec):
            idx.append(int(kk) % shape[1 + axis])
        return tuple(idx)

    def set_sample(self, j: int, kvec, value: complex, lam: float | None = None):
        pos = self._pos(j, kvec)
        self.samples[pos] = value
        self.filled[pos] = True
        if lam is not None:
            self.lambda_used[(j,) + tuple(int(v) for v in kvec)] = lam

    def get_sample(self, j: int, kvec) -> complex:
        return complex(self.samples[self._pos(j, kvec)])

    def fill_conjugates(self):
        """Complete the lattice using s(-j,-k) = conj s(j,k)."""
        for idx in self.band_indices(half=True):
            j, kvec = idx[0], idx[1:]
            pos = self._pos(j, kvec)
            neg = self._pos(-j, tuple(-v for v in kvec))
            if self.filled[pos] and not self.filled[neg]:
                self.samples[neg] = np.conj(self.samples[pos])
                self.filled[neg] = True
            elif self.filled[neg] and not self.filled[pos]:
                self.samples[pos] = np.conj(self.samples[neg])
                self.filled[pos] = True

    def band_complete(self) -> bool:
        for idx in self.band_indices():
            if not self.filled[self._pos(idx[0], idx[1:])]:
                return False
        return True

    def conjugate_symmetry_defect(self) -> float:
        """Max |s(-j,-k) - conj s(j,k)| over filled pairs (0 for real fields)."""
        worst = 0.0
        for idx in self.band_indices(half=True):
            pos = self._pos(idx[0], idx[1:])
            neg = self._pos(-idx[0], tuple(-v for v in idx[1:]))
            if self.filled[pos] and self.filled[neg]:
                worst = max(worst, abs(self.samples[neg] - np.conj(self.samples[pos])))
        return worst


def invert_samples_complex(samples: FourierSampleSet) -> np.ndarray:
    """Invert a sample set to complex node values on the full grid.

    Treats the samples as T|Omega| times periodic Fourier coefficients
    and evaluates the (finite, zero-filled) series at the grid nodes via
    an FFT; the periodic wrap row is appended along every axis.  No
    reality assumption is made — this is the path for inherently complex
    targets (demodulated probe amplitudes and the like).
    """
    if not samples.band_complete():
        raise ValueError("incomplete sample lattice in the declared band")
    g = samples.grid
    vol = g.T * float(np.prod(g.box))
    vals = np.fft.fftn(samples.samples) / vol
    # append the periodic wrap: t = T and the high face of each axis
    vals = np.concatenate([vals, vals[:1]], axis=0)
    for axis in range(1, g.n + 1):
        first = np.take(vals, [0], axis=axis)
        vals = np.concatenate([vals, first], axis=axis)
    return vals


def invert_samples(samples: FourierSampleSet) -> tuple[np.ndarray, float]:
    """Invert a sample set assumed to transform a real field.

    Returns (real field of shape (nt+1, *m), imaginary-part ratio); the
    ratio is the built-in consistency diagnostic — it vanishes exactly
    when the sample lattice is conjugate symmetric.
    """
    g = samples.grid
    vals = invert_samples_complex(samples)
    imag_ratio = norm_l2_spacetime(ComplexField(g, vals.imag + 0j)) / max(
        norm_l2_spacetime(ComplexField(g, vals.real + 0j)), 1e-300)
    return vals.real.copy(), imag_ratio
