"""Divergence-free spectral vector fields on the 2*pi-periodic torus.

A field is stored by its Fourier coefficients u_hat(k) on the cube of
integer wave vectors |k|_inf <= K (the Galerkin cutoff), as a dense
complex array indexed by m = k + K per axis.  Every stored field

  * has no k = 0 mode (zero spatial average),
  * is divergence free:  k . u_hat(k) = 0,
  * satisfies the reality condition  u_hat(-k) = conj(u_hat(k)),

so it represents a real, incompressible velocity field.  The Stokes
operator A = -Laplace acts diagonally with eigenvalue |k|^2, and the
Gevrey-Sobolev norm |u|_{alpha,sigma} is the L^2(Omega) norm of
A^alpha e^{sigma A^(1/2)} u over Omega = (-pi, pi)^3.  The (2*pi)^(3/2)
Parseval factor is included so |u|_{0,0} equals the plain L^2 norm.

The advective bilinear form B(u, v) = P((u . grad) v) is evaluated by
exact truncated convolution (no transform, no aliasing): the resulting
finite-dimensional system is the exact Galerkin reduction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

__all__ = [
    "VOLUME",
    "EXP_LIMIT",
    "INVARIANT_TOL",
    "WaveVector",
    "GevreyIndex",
    "SpectralField",
    "SpectralRangeError",
    "CutoffMismatchError",
    "FieldInvariantError",
    "leray_project",
    "apply_multiplier",
    "apply_inverse_stokes",
    "gevrey_norm",
    "inner_product",
    "bilinear_form",
    "trilinear_form",
    "low_mode_project",
    "smoothing_constant",
    "random_solenoidal_field",
]

VOLUME = (2.0 * math.pi) ** 3      # |Omega| for Omega = (-pi, pi)^3
_NORM_FACTOR = math.sqrt(VOLUME)   # Parseval: |u|_L2 = sqrt(|Omega|) * l2 of u_hat
EXP_LIMIT = 700.0                  # hard ceiling for any single multiplier exponent
INVARIANT_TOL = 1e-12              # relative tolerance for field invariants

WaveVector = tuple[int, int, int]


class SpectralRangeError(ArithmeticError):
    """A spectral multiplier exponent exceeded the overflow guard."""


class CutoffMismatchError(ValueError):
    """Fields with different Galerkin cutoffs were combined."""


class FieldInvariantError(ValueError):
    """A stored field violates divergence-freeness, reality or zero average."""


@dataclass(frozen=True)
class GevreyIndex:
    """Index pair (alpha, sigma) of the norm |A^alpha e^{sigma A^(1/2)} u|."""

    alpha: float = 0.0
    sigma: float = 0.0

    def __post_init__(self):
        if self.alpha < 0 or self.sigma < 0:
            raise ValueError(f"Gevrey index must be nonnegative, got {self}")

    def label(self) -> str:
        return f"a{self.alpha:g}_s{self.sigma:g}"


# Cached per-cutoff wavenumber geometry: integer k-grid, |k|^2, |k|.
_GRIDS: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def _grid(cutoff: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    got = _GRIDS.get(cutoff)
    if got is None:
        axis = np.arange(-cutoff, cutoff + 1)
        kvec = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).astype(float)
        ksq = np.sum(kvec * kvec, axis=-1)
        got = (kvec, ksq, np.sqrt(ksq))
        _GRIDS[cutoff] = got
    return got


def _conj_flip(arr: np.ndarray) -> np.ndarray:
    """Coefficient array of the complex-conjugate field: conj(u_hat(-k))."""
    return np.conj(arr[::-1, ::-1, ::-1, :])


@dataclass(frozen=True)
class SpectralField:
    """Immutable truncated Fourier representation of a real solenoidal field."""

    cutoff: int
    coeffs: np.ndarray  # complex128, shape (W, W, W, 3) with W = 2*cutoff + 1

    def __post_init__(self):
        W = 2 * self.cutoff + 1
        if self.coeffs.shape != (W, W, W, 3):
            raise ValueError(f"coefficient array shape {self.coeffs.shape} "
                             f"does not match cutoff {self.cutoff}")
        self.coeffs.setflags(write=False)

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, cutoff: int) -> "SpectralField":
        W = 2 * cutoff + 1
        return cls(cutoff, np.zeros((W, W, W, 3), dtype=np.complex128))

    @classmethod
    def from_modes(cls, cutoff: int, modes: Mapping[WaveVector, Iterable[complex]],
                   conjugate: bool = True) -> "SpectralField":
        """Build a field from a {k: amplitude} mapping.

        With ``conjugate=True`` the mirror coefficient u_hat(-k) is filled
        in automatically for every k not explicitly listed.
        """
        W = 2 * cutoff + 1
        arr = np.zeros((W, W, W, 3), dtype=np.complex128)
        for k, amp in modes.items():
            k = tuple(int(x) for x in k)
            if any(abs(x) > cutoff for x in k):
                raise ValueError(f"mode {k} outside cutoff {cutoff}")
            idx = tuple(x + cutoff for x in k)
            arr[idx] = np.asarray(amp, dtype=np.complex128)
        if conjugate:
            for k in list(modes):
                k = tuple(int(x) for x in k)
                mk = tuple(-x + cutoff for x in k)
                if tuple(x + cutoff for x in k) != mk and not np.any(arr[mk]):
                    arr[mk] = np.conj(arr[tuple(x + cutoff for x in k)])
        return leray_project(arr, cutoff)

    # -- algebra ---------------------------------------------------------

    def _binary(self, other: "SpectralField", op) -> "SpectralField":
        if not isinstance(other, SpectralField):
            return NotImplemented
        if other.cutoff != self.cutoff:
            raise CutoffMismatchError(f"cutoffs {self.cutoff} != {other.cutoff}")
        return SpectralField(self.cutoff, op(self.coeffs, other.coeffs))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        return SpectralField(self.cutoff, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.cutoff, -self.coeffs)

    # -- inspection --------------------------------------------------------

    def modes(self, tol: float = 0.0) -> Iterator[tuple[WaveVector, np.ndarray]]:
        """Yield (k, u_hat(k)) over stored modes with |u_hat| > tol."""
        K = self.cutoff
        mags = np.max(np.abs(self.coeffs), axis=-1)
        for i, j, l in np.argwhere(mags > tol):
            yield (int(i - K), int(j - K), int(l - K)), self.coeffs[i, j, l]

    def l2(self) -> float:
        """Plain L^2(Omega) norm, equal to the (0, 0) Gevrey norm."""
        return _NORM_FACTOR * float(np.linalg.norm(self.coeffs.ravel()))

    def max_mode_sq(self) -> int:
        """Largest |k|^2 carrying a nonzero coefficient (0 for the zero field)."""
        _, ksq, _ = _grid(self.cutoff)
        active = np.any(self.coeffs != 0, axis=-1)
        return int(ksq[active].max()) if active.any() else 0

    def validate(self, tol: float = INVARIANT_TOL) -> None:
        """Raise FieldInvariantError on any violated field invariant."""
        kvec, _, _ = _grid(self.cutoff)
        scale = float(np.max(np.abs(self.coeffs), initial=0.0))
        if scale == 0.0:
            return
        K = self.cutoff
        if np.any(np.abs(self.coeffs[K, K, K]) > tol * scale):
            raise FieldInvariantError("nonzero mean (k = 0) mode")
        div = np.abs(np.einsum("xyzc,xyzc->xyz", kvec, self.coeffs))
        if float(div.max()) > tol * scale * (3 * K + 1):
            raise FieldInvariantError(f"divergence {div.max():.3e} exceeds tolerance")
        asym = float(np.max(np.abs(self.coeffs - _conj_flip(self.coeffs))))
        if asym > tol * scale:
            raise FieldInvariantError(f"reality asymmetry {asym:.3e} exceeds tolerance")

    # -- serialization ------------------------------------------------------

    def to_json(self) -> dict:
        """JSON form storing only lexicographically positive k (conjugates implied)."""
        out = []
        for k, amp in self.modes():
            if not _lex_positive(k):
                continue
            out.append({"k": list(k), "re": [float(x) for x in amp.real],
                        "im": [float(x) for x in amp.imag]})
        out.sort(key=lambda m: m["k"])
        return {"cutoff": self.cutoff, "modes": out}

    @classmethod
    def from_json(cls, data: dict) -> "SpectralField":
        cutoff = int(data["cutoff"])
        W = 2 * cutoff + 1
        arr = np.zeros((W, W, W, 3), dtype=np.complex128)
        for m in data["modes"]:
            k = tuple(int(x) for x in m["k"])
            if not _lex_positive(k):
                raise ValueError(f"serialized mode {k} is not lexicographically positive")
            amp = np.array(m["re"], dtype=float) + 1j * np.array(m["im"], dtype=float)
            arr[tuple(x + cutoff for x in k)] = amp
            arr[tuple(-x + cutoff for x in k)] = np.conj(amp)
        f = cls(cutoff, arr)
        f.validate()
        return f

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def _lex_positive(k: WaveVector) -> bool:
    for x in k:
        if x != 0:
            return x > 0
    return False


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def leray_project(raw, cutoff: int) -> SpectralField:
    """Project arbitrary coefficients onto the divergence-free subspace.

    Accepts either a dense (W, W, W, 3) complex array or a {k: amplitude}
    mapping.  The k = 0 mode is dropped, each remaining mode is replaced by
    u_hat(k) - (k . u_hat(k)) k / |k|^2, and the reality condition is
    enforced by symmetrization.
    """
    W = 2 * cutoff + 1
    if isinstance(raw, Mapping):
        arr = np.zeros((W, W, W, 3), dtype=np.complex128)
        for k, amp in raw.items():
            arr[tuple(int(x) + cutoff for x in k)] = np.asarray(amp, dtype=np.complex128)
    else:
        arr = np.array(raw, dtype=np.complex128)
        if arr.shape != (W, W, W, 3):
            raise ValueError(f"array shape {arr.shape} does not match cutoff {cutoff}")
    kvec, ksq, kabs = _grid(cutoff)
    arr[cutoff, cutoff, cutoff] = 0.0
    ksq_safe = np.where(ksq == 0.0, 1.0, ksq)
    kdotu = np.einsum("xyzc,xyzc->xyz", kvec, arr)
    # Modes whose divergence is already at rounding level are left untouched,
    # which makes the projection exactly idempotent mode by mode.
    amp = np.sqrt(np.sum(np.abs(arr) ** 2, axis=-1))
    live = np.abs(kdotu) > 1e-13 * kabs * amp
    arr = np.where(live[..., None], arr - (kdotu / ksq_safe)[..., None] * kvec, arr)
    arr = 0.5 * (arr + _conj_flip(arr))
    return SpectralField(cutoff, arr)


_MULTIPLIER_KINDS = ("A_alpha", "exp_sqrtA", "heat")


def _log_multiplier(kind: str, parameter: float, cutoff: int) -> np.ndarray:
    """Log of the diagonal multiplier, with the overflow guard applied."""
    _, ksq, kabs = _grid(cutoff)
    ksq_safe = np.where(ksq == 0.0, 1.0, ksq)
    if kind == "A_alpha":
        logm = parameter * np.log(ksq_safe)
    elif kind == "exp_sqrtA":
        logm = parameter * kabs
    elif kind == "heat":
        if parameter < 0:
            raise ValueError("heat multiplier requires t >= 0")
        logm = -parameter * ksq
    else:
        raise ValueError(f"unknown multiplier kind {kind!r}; expected one of {_MULTIPLIER_KINDS}")
    peak = float(logm.max(initial=-math.inf))
    if peak > EXP_LIMIT:
        raise SpectralRangeError(
            f"multiplier exponent {peak:.1f} exceeds the overflow guard {EXP_LIMIT:g} "
            f"(kind={kind}, parameter={parameter:g}, cutoff={cutoff})")
    return logm


def apply_multiplier(u: SpectralField, kind: str, parameter: float) -> SpectralField:
    """Apply a diagonal Fourier multiplier.

    kind = "A_alpha":   |k|^(2*parameter)      (fractional Stokes power)
    kind = "exp_sqrtA": e^(parameter * |k|)    (Gevrey smoothing/roughening)
    kind = "heat":      e^(-parameter * |k|^2) (heat semigroup, parameter >= 0)
    """
    logm = _log_multiplier(kind, parameter, u.cutoff)
    return SpectralField(u.cutoff, u.coeffs * np.exp(logm)[..., None])


def apply_inverse_stokes(u: SpectralField) -> SpectralField:
    """A^(-1) u; regular on every stored field since k = 0 is never present."""
    return apply_multiplier(u, "A_alpha", -1.0)


def gevrey_norm(u: SpectralField, idx: GevreyIndex) -> float:
    """L^2(Omega) norm of A^alpha e^{sigma A^(1/2)} u.

    Computed in log space (weights exponentiated once, after factoring out
    the peak exponent) so that sigma*|k| up to the overflow guard is usable
    even though the squared weights would overflow a double.
    """
    logm = _log_multiplier("A_alpha", idx.alpha, u.cutoff) \
        + _log_multiplier("exp_sqrtA", idx.sigma, u.cutoff)
    amp2 = np.sum(np.abs(u.coeffs) ** 2, axis=-1)
    mask = amp2 > 0
    if not mask.any():
        return 0.0
    w = 2.0 * logm[mask]
    peak = float(w.max())
    return _NORM_FACTOR * math.exp(0.5 * peak) * math.sqrt(float(np.sum(np.exp(w - peak) * amp2[mask])))


def inner_product(u: SpectralField, v: SpectralField) -> float:
    """Real L^2(Omega) inner product <u, v>."""
    if u.cutoff != v.cutoff:
        raise CutoffMismatchError(f"cutoffs {u.cutoff} != {v.cutoff}")
    return VOLUME * float(np.real(np.vdot(v.coeffs, u.coeffs)))


def bilinear_form(u: SpectralField, v: SpectralField) -> SpectralField:
    """Advective form B(u, v) = P((u . grad) v) by exact truncated convolution.

    For every retained k the convolution  sum_{p+q=k} i (u_hat(p) . q) v_hat(q)
    is accumulated directly (fixed mode order, fully deterministic), then
    Leray-projected.  No padding or dealiasing is involved: the sum is the
    exact Galerkin nonlinearity at this cutoff.
    """
    if u.cutoff != v.cutoff:
        raise CutoffMismatchError(f"cutoffs {u.cutoff} != {v.cutoff}")
    out = _convolve_advection(u.coeffs, v.coeffs, u.cutoff)
    return leray_project(out, u.cutoff)


def _convolve_advection(U: np.ndarray, V: np.ndarray, cutoff: int) -> np.ndarray:
    if _adv_kernel is not None:
        out = np.zeros_like(V)
        _adv_kernel(U, V, out, cutoff)
        return out
    return _convolve_advection_numpy(U, V, cutoff)


def _convolve_advection_numpy(U: np.ndarray, V: np.ndarray, cutoff: int) -> np.ndarray:
    K = cutoff
    kvec, _, _ = _grid(K)
    out = np.zeros_like(V)
    active = np.argwhere(np.any(U != 0, axis=-1))
    for a1, a2, a3 in active:
        up = U[a1, a2, a3]
        src = tuple(slice(max(0, K - a), min(2 * K, 3 * K - a) + 1) for a in (a1, a2, a3))
        dst = tuple(slice(a + s.start - K, a + s.stop - K) for a, s in zip((a1, a2, a3), src))
        dot = kvec[src] @ up
        out[dst] += (1j * dot)[..., None] * V[src]
    return out


def _build_adv_kernel():
    # optional compiled inner loop; the numpy path stays the reference
    try:
        import numba
    except ImportError:
        return None

    @numba.njit(cache=True, fastmath=False)
    def kernel(U, V, out, K):
        W = 2 * K + 1
        for a1 in range(W):
            for a2 in range(W):
                for a3 in range(W):
                    u0 = U[a1, a2, a3, 0]
                    u1 = U[a1, a2, a3, 1]
                    u2 = U[a1, a2, a3, 2]
                    if u0 == 0 and u1 == 0 and u2 == 0:
                        continue
                    for b1 in range(max(0, K - a1), min(W - 1, 3 * K - a1) + 1):
                        q1 = b1 - K
                        c1 = a1 + q1
                        for b2 in range(max(0, K - a2), min(W - 1, 3 * K - a2) + 1):
                            q2 = b2 - K
                            c2 = a2 + q2
                            for b3 in range(max(0, K - a3), min(W - 1, 3 * K - a3) + 1):
                                q3 = b3 - K
                                c3 = a3 + q3
                                dot = 1j * (u0 * q1 + u1 * q2 + u2 * q3)
                                out[c1, c2, c3, 0] += dot * V[b1, b2, b3, 0]
                                out[c1, c2, c3, 1] += dot * V[b1, b2, b3, 1]
                                out[c1, c2, c3, 2] += dot * V[b1, b2, b3, 2]

    return kernel


_adv_kernel = _build_adv_kernel()


def trilinear_form(u: SpectralField, v: SpectralField, w: SpectralField) -> float:
    """b(u, v, w) = <B(u, v), w>, evaluated spectrally.

    The imaginary part must vanish (within 1e-12 relative) for valid real
    fields; a larger residual signals corrupted inputs and raises.
    """
    if not (u.cutoff == v.cutoff == w.cutoff):
        raise CutoffMismatchError("trilinear form requires a common cutoff")
    Buv = bilinear_form(u, v)
    z = VOLUME * complex(np.vdot(w.coeffs, Buv.coeffs))
    scale = max(Buv.l2() * w.l2(), 1e-300)
    if abs(z.imag) > 1e-12 * max(scale, abs(z.real)):
        raise FieldInvariantError(
            f"trilinear form has spurious imaginary part {z.imag:.3e} (scale {scale:.3e})")
    return z.real


def low_mode_project(u: SpectralField, n: int) -> SpectralField:
    """Spectral projection P_n: keep exactly the modes with |k|^2 <= n."""
    if n < 1:
        raise ValueError("low-mode projection requires n >= 1")
    _, ksq, _ = _grid(u.cutoff)
    return SpectralField(u.cutoff, np.where((ksq <= n)[..., None], u.coeffs, 0.0))


def smoothing_constant(alpha: float, sigma: float) -> float:
    """max_{x>=0} x^alpha e^{-sigma x} = (alpha / (e sigma))^alpha, for alpha, sigma > 0."""
    if alpha <= 0 or sigma <= 0:
        raise ValueError("smoothing constant requires alpha, sigma > 0")
    return (alpha / (math.e * sigma)) ** alpha


def random_solenoidal_field(cutoff: int, rng: np.random.Generator, amplitude: float = 1.0,
                            radius: float = 0.4, order: float = 2.0) -> SpectralField:
    """Random divergence-free field with spectrum ~ e^{-radius |k|} |k|^(-order).

    The exponential tail keeps every Gevrey norm with sigma < radius
    well-behaved as the cutoff grows, which ensemble estimates rely on.
    """
    W = 2 * cutoff + 1
    _, ksq, kabs = _grid(cutoff)
    raw = rng.standard_normal((W, W, W, 3)) + 1j * rng.standard_normal((W, W, W, 3))
    ksq_safe = np.where(ksq == 0.0, 1.0, ksq)
    profile = amplitude * np.exp(-radius * kabs) * ksq_safe ** (-order / 2.0)
    return leray_project(raw * profile[..., None], cutoff)
