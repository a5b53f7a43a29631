"""1D layered dielectric structures and the scalar Helmholtz problem.

Solves piece-wise constant index profiles at real and complex frequency:
transfer matrices, reflection amplitudes, internal fields and the outgoing
Green's function G(x, x', omega).

Conventions
-----------
* Internal units set c = 1.  Fabry-Perot scenarios measure frequency in
  units of pi/L, X-ray scenarios in keV; conversions live at the
  configuration boundary (see :func:`build_xray_cavity`).
* Fields in medium j are A_j exp(+i k_j (x - x_ref)) + B_j exp(-i k_j (x - x_ref))
  with x_ref the left edge of the layer (the left/right cladding reference
  their inner boundary).  A is right-moving, B left-moving.
* The per-layer longitudinal wavenumber obeys k_z^2 = n(omega)^2 omega^2 - k_par^2.
  At normal incidence (k_par = 0) we use k_z = n omega directly, which is
  entire in omega.  For k_par != 0 the principal square root is taken; on the
  real axis this is the physical branch (Im k_z >= 0) for passive media, and
  in the open lower half-plane to the right of the cladding branch points it
  is the continuous continuation from the real axis, which is what the pole
  search needs.
* The Green's function solves (d^2/dx^2 + k_z(x)^2) G = delta(x - x') with
  outgoing conditions in both claddings, so dG/dx jumps by +1 at x = x' and
  free space gives G = exp(i k |x - x'|) / (2 i k).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BranchPointError,
    ConfigurationError,
    DomainError,
    NearPoleError,
    ThicknessOverflowError,
)

# hbar*c in keV*nm: converts nanometre thicknesses to 1/keV lengths (c = 1)
HBARC_KEV_NM = 0.19732698

# 14.4 keV Moessbauer transition of Fe-57: energy and natural line width (keV)
OMEGA_NUC_KEV = 14.4125
GAMMA_NUC_KEV = 4.66e-12

# exp overflow guard: double precision overflows just above exp(709)
_MAX_EXPONENT = 700.0


# ---------------------------------------------------------------------------
# materials and geometry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Material:
    """Optical medium with a constant or single-Lorentzian complex index.

    Constant materials store ``n_const``; dispersive materials store the
    Lorentz-oscillator parameters and evaluate

        n(omega)^2 = n_bg^2 + f_res / (omega_res^2 - omega^2 - i gamma_res omega)

    which is passive (Im n >= 0 on the real axis) for f_res >= 0, gamma_res > 0.
    """

    name: str
    n_const: complex | None = None
    n_bg: complex = 1.0
    omega_res: float = 0.0
    gamma_res: float = 0.0
    f_res: float = 0.0

    def __post_init__(self):
        if self.n_const is not None:
            if complex(self.n_const).imag < 0:
                raise ValueError(f"material {self.name!r}: Im n < 0 (gain medium)")
        else:
            if complex(self.n_bg).imag < 0:
                raise ValueError(f"material {self.name!r}: Im n_bg < 0 (gain medium)")
            if self.f_res < 0 or self.gamma_res <= 0 or self.omega_res <= 0:
                raise ValueError(f"material {self.name!r}: invalid Lorentzian parameters")

    @classmethod
    def constant(cls, name: str, n: complex) -> "Material":
        return cls(name=name, n_const=complex(n))

    @classmethod
    def lorentzian(cls, name: str, n_bg: complex, omega_res: float,
                   gamma_res: float, f_res: float) -> "Material":
        return cls(name=name, n_const=None, n_bg=complex(n_bg), omega_res=omega_res,
                   gamma_res=gamma_res, f_res=f_res)

    @classmethod
    def from_xray_constants(cls, name: str, delta: float, beta: float) -> "Material":
        """Material from X-ray optical constants, n = 1 - delta + i beta."""
        return cls.constant(name, 1.0 - delta + 1j * beta)

    @property
    def is_dispersive(self) -> bool:
        return self.n_const is None

    def index(self, omega):
        """Complex refractive index n(omega); accepts scalars or arrays."""
        if self.n_const is not None:
            if np.isscalar(omega) or np.ndim(omega) == 0:
                return complex(self.n_const)
            return np.full(np.shape(omega), complex(self.n_const))
        w = np.asarray(omega, dtype=complex) if np.ndim(omega) else complex(omega)
        eps = self.n_bg ** 2 + self.f_res / (
            self.omega_res ** 2 - w * w - 1j * self.gamma_res * w)
        return np.sqrt(eps)


VACUUM = Material.constant("vacuum", 1.0)


@dataclass(frozen=True)
class EmitterSpec:
    """Point dipole probe inside the finite region.

    ``x_a`` is measured from the left edge of the finite region.  ``gamma``
    is the free-space radiative width and serves as the normalization unit
    of the witness observable; the dipole orientation of the 1D problem is
    absorbed into it.
    """

    x_a: float
    omega_a: float
    gamma: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError("emitter gamma must be > 0")
        if self.omega_a <= 0:
            raise ValueError("emitter omega_a must be > 0")


@dataclass(frozen=True)
class LayerStack:
    """Ordered 1D geometry: left cladding | finite layers | right cladding."""

    left: Material
    layers: tuple  # ((Material, thickness), ...)
    right: Material
    emitter: EmitterSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple((m, float(d)) for m, d in self.layers))
        for m, d in self.layers:
            if not (d > 0) or not math.isfinite(d):
                raise ValueError(f"layer {m.name!r}: thickness must be finite and > 0")
        if self.emitter is not None:
            if not self.layers:
                raise ValueError("emitter requires a finite region")
            if not (0.0 < self.emitter.x_a < self.total_thickness):
                raise ValueError("emitter position must lie strictly inside the finite region")

    @property
    def total_thickness(self) -> float:
        return float(sum(d for _, d in self.layers))

    @property
    def boundaries(self) -> np.ndarray:
        """Interface coordinates x_0 = 0, ..., x_N = total thickness."""
        return np.concatenate(([0.0], np.cumsum([d for _, d in self.layers])))

    def with_emitter(self, emitter: EmitterSpec) -> "LayerStack":
        return LayerStack(self.left, self.layers, self.right, emitter)

    def media(self) -> list:
        """All media left to right, claddings included."""
        return [self.left] + [m for m, _ in self.layers] + [self.right]


@dataclass(frozen=True)
class WaveProblem:
    """A stack probed at fixed parallel wavevector.

    ``k_par = 0`` is normal incidence; grazing incidence at angle ``theta``
    from the surface maps to ``k_par = (omega/c) cos(theta)``.
    """

    stack: LayerStack
    k_par: float = 0.0


# ---------------------------------------------------------------------------
# wavenumbers and elementary matrices
# ---------------------------------------------------------------------------

def _check_omega(omega):
    w = np.asarray(omega, dtype=complex)
    if np.any(w == 0):
        raise DomainError("zero frequency is outside the Helmholtz domain")
    return w


def _wavenumbers(problem: WaveProblem, omega):
    """k_z for every medium (claddings included) at scalar or array omega."""
    w = _check_omega(omega)
    kp = problem.k_par
    ks = []
    for m in problem.stack.media():
        n = m.index(w)
        if kp == 0.0:
            kz = n * w  # entire in omega, no branch cut
        else:
            kz2 = n * n * w * w - kp * kp
            scale = np.abs(n * n * w * w) + kp * kp
            if np.any(np.abs(kz2) < 1e-14 * scale):
                raise BranchPointError(
                    f"k_z = 0 in medium {m.name!r}: branch point", omega=omega)
            kz = np.sqrt(kz2)
        ks.append(kz)
    return ks


def interface_matrix(k_a, k_b) -> np.ndarray:
    """2x2 matrix mapping (A, B) just right of an interface to just left.

    Continuity of the field and its derivative gives
    I = 1/(2 k_a) [[k_a + k_b, k_a - k_b], [k_a - k_b, k_a + k_b]];
    det I = k_b / k_a.  Direct division keeps I(k, k) an exact identity.
    """
    den = 2.0 * k_a
    p = (k_a + k_b) / den
    m = (k_a - k_b) / den
    return np.array([[p, m], [m, p]], dtype=complex)


def propagation_matrix(k, d) -> np.ndarray:
    """2x2 matrix mapping right-edge-referenced to left-edge-referenced amplitudes."""
    _check_exponent(k, d)
    ph = np.exp(-1j * k * d)
    return np.array([[ph, 0.0], [0.0, 1.0 / ph]], dtype=complex)


def _check_exponent(k, d):
    ex = np.abs(np.imag(k)) * d
    if np.any(ex > _MAX_EXPONENT):
        raise ThicknessOverflowError(
            f"|Im k_z| * thickness = {float(np.max(ex)):.3g} exceeds {_MAX_EXPONENT:g}")


def transfer_matrix(problem: WaveProblem, omega: complex) -> np.ndarray:
    """Transfer matrix of the whole stack at a single (possibly complex) omega.

    Maps (forward, backward) amplitudes in the right cladding (referenced to
    the last interface) to those in the left cladding (referenced to the
    first interface):  M = I_0 P_1 I_1 P_2 ... P_N I_N, composed left to
    right.  det M equals k_right / k_left.
    """
    ks = _wavenumbers(problem, complex(omega))
    ds = [d for _, d in problem.stack.layers]
    m = interface_matrix(ks[0], ks[1])
    for j, d in enumerate(ds, start=1):
        m = m @ propagation_matrix(ks[j], d)
        m = m @ interface_matrix(ks[j], ks[j + 1])
    return m


def _transfer_entries(problem: WaveProblem, omega):
    """Vectorized (m11, m12, m21, m22) of the transfer matrix over omega arrays."""
    ks = _wavenumbers(problem, omega)
    ds = [d for _, d in problem.stack.layers]
    inv = 0.5 / ks[0]
    a, b = (ks[0] + ks[1]) * inv, (ks[0] - ks[1]) * inv
    c, e = b, a  # symmetric first factor; (a, b) and (c, e) are rebound, never mutated
    for j, d in enumerate(ds, start=1):
        _check_exponent(ks[j], d)
        ph = np.exp(-1j * ks[j] * d)
        # right-multiply by diag(ph, 1/ph)
        a, b = a * ph, b / ph
        c, e = c * ph, e / ph
        # right-multiply by the next interface matrix
        inv = 0.5 / ks[j]
        p, m_ = (ks[j] + ks[j + 1]) * inv, (ks[j] - ks[j + 1]) * inv
        a, b = a * p + b * m_, a * m_ + b * p
        c, e = c * p + e * m_, c * m_ + e * p
    return a, b, c, e


def reflection(problem: WaveProblem, omega):
    """Complex reflection amplitude for a wave incident from the left cladding.

    Accepts scalar or array omega; |r|^2 <= 1 for real omega in passive stacks.
    """
    m11, _, m21, _ = _transfer_entries(problem, omega)
    return m21 / m11


def reflectance_vs_angle(stack: LayerStack, omega: float, thetas) -> np.ndarray:
    """|r|^2 versus grazing angle theta (radians) at fixed real omega.

    Vectorized over the angle array; k_par = omega cos(theta) per point.
    """
    thetas = np.asarray(thetas, dtype=float)
    kp = omega * np.cos(thetas)
    w = complex(omega)
    media = stack.media()
    ks = []
    for m in media:
        n = m.index(w)
        kz2 = n * n * w * w - kp * kp
        ks.append(np.sqrt(kz2 + 0j))
    ds = [d for _, d in stack.layers]
    inv = 0.5 / ks[0]
    a, b = (ks[0] + ks[1]) * inv, (ks[0] - ks[1]) * inv
    c, e = b, a
    for j, d in enumerate(ds, start=1):
        ph = np.exp(-1j * ks[j] * d)
        a, b = a * ph, b / ph
        c, e = c * ph, e / ph
        inv = 0.5 / ks[j]
        p, m_ = (ks[j] + ks[j + 1]) * inv, (ks[j] - ks[j + 1]) * inv
        a, b = a * p + b * m_, a * m_ + b * p
        c, e = c * p + e * m_, c * m_ + e * p
    return np.abs(c / a) ** 2


# ---------------------------------------------------------------------------
# outgoing solutions and the Green's function
# ---------------------------------------------------------------------------

def _march_right_outgoing(ks, ds):
    """Amplitudes of the solution that is purely outgoing to the right.

    Returns a list of (A_j, B_j) per medium; finite layers referenced to
    their left edge, claddings to their inner boundary.
    """
    n_lay = len(ds)
    amps = [None] * (n_lay + 2)
    one = np.ones_like(ks[-1])
    amps[n_lay + 1] = (one, np.zeros_like(one))
    a, b = amps[n_lay + 1]
    for j in range(n_lay, 0, -1):
        inv = 0.5 / ks[j]
        p, m_ = (ks[j] + ks[j + 1]) * inv, (ks[j] - ks[j + 1]) * inv
        at, bt = p * a + m_ * b, m_ * a + p * b   # right-edge referenced
        _check_exponent(ks[j], ds[j - 1])
        ph = np.exp(-1j * ks[j] * ds[j - 1])
        a, b = at * ph, bt / ph                   # shift reference to left edge
        amps[j] = (a, b)
    inv = 0.5 / ks[0]
    p, m_ = (ks[0] + ks[1]) * inv, (ks[0] - ks[1]) * inv
    amps[0] = (p * a + m_ * b, m_ * a + p * b)
    return amps


def _march_left_outgoing(ks, ds):
    """Amplitudes of the solution that is purely outgoing to the left."""
    n_lay = len(ds)
    amps = [None] * (n_lay + 2)
    one = np.ones_like(ks[0])
    amps[0] = (np.zeros_like(one), one)
    a, b = amps[0]
    for j in range(1, n_lay + 1):
        inv = 0.5 / ks[j]
        p, m_ = (ks[j] + ks[j - 1]) * inv, (ks[j] - ks[j - 1]) * inv
        a, b = p * a + m_ * b, m_ * a + p * b     # left-edge referenced
        amps[j] = (a, b)
        _check_exponent(ks[j], ds[j - 1])
        ph = np.exp(1j * ks[j] * ds[j - 1])
        a, b = a * ph, b / ph                     # shift reference to right edge
    inv = 0.5 / ks[-1]
    p, m_ = (ks[-1] + ks[-2]) * inv, (ks[-1] - ks[-2]) * inv
    amps[n_lay + 1] = (p * a + m_ * b, m_ * a + p * b)
    return amps


def _locate(stack: LayerStack, x: float):
    """Medium index (0 = left cladding) and reference coordinate for x."""
    bounds = stack.boundaries
    if x < bounds[0]:
        return 0, bounds[0]
    if x >= bounds[-1]:
        return len(bounds), bounds[-1]
    j = int(np.searchsorted(bounds, x, side="right"))  # in layer j, 1-based
    return j, bounds[j - 1]


def _eval_amp(amps, ks, idx, x, ref):
    a, b = amps[idx]
    ph = np.exp(1j * ks[idx] * (x - ref))
    return a * ph + b / ph


def green_function(problem: WaveProblem, x: float, xp: float, omega):
    """Outgoing Green's function G(x, x', omega); vectorized over omega.

    Built from the left- and right-outgoing solutions divided by their
    Wronskian, G = E_L(x_<) E_R(x_>) / W, which is analytic in omega away
    from the resonator poles and therefore usable at complex omega.

    Raises
    ------
    NearPoleError
        If the Wronskian falls below the numerical floor (omega at a pole).
    """
    ks = _wavenumbers(problem, omega)
    ds = [d for _, d in problem.stack.layers]
    el = _march_left_outgoing(ks, ds)
    er = _march_right_outgoing(ks, ds)

    x_lo, x_hi = (x, xp) if x <= xp else (xp, x)
    j_lo, ref_lo = _locate(problem.stack, x_lo)
    j_hi, ref_hi = _locate(problem.stack, x_hi)

    # Wronskian in the layer of x_<; constant across layers analytically
    al, bl = el[j_lo]
    ar, br = er[j_lo]
    w = 2j * ks[j_lo] * (bl * ar - al * br)
    floor = 1e-13 * np.abs(2.0 * ks[j_lo]) * (np.abs(bl * ar) + np.abs(al * br))
    bad = np.abs(w) <= floor
    if np.any(bad):
        w_arr = np.asarray(omega, dtype=complex)
        offending = w_arr[bad] if w_arr.ndim else w_arr
        raise NearPoleError(f"Wronskian vanishes: omega at/near a pole ({offending})",
                            omega=offending)

    return _eval_amp(el, ks, j_lo, x_lo, ref_lo) * _eval_amp(er, ks, j_hi, x_hi, ref_hi) / w


def field_profile(problem: WaveProblem, omega, xs):
    """Field psi(x) for a unit-amplitude wave incident from the left.

    Normalized so that the left cladding holds exp(i k x) + r exp(-i k x);
    in free space psi(x) = exp(i k x).  ``omega`` scalar, ``xs`` array.
    """
    ks = _wavenumbers(problem, complex(omega))
    ds = [d for _, d in problem.stack.layers]
    er = _march_right_outgoing(ks, ds)
    a0 = er[0][0]
    out = np.empty(np.shape(xs), dtype=complex)
    for i, x in enumerate(np.atleast_1d(xs)):
        j, ref = _locate(problem.stack, float(x))
        out.flat[i] = _eval_amp(er, ks, j, float(x), ref) / a0
    return out


# ---------------------------------------------------------------------------
# scenario builders
# ---------------------------------------------------------------------------

def build_fabry_perot(L: float, n_mirror: float, gamma: float = 1.0,
                      omega_a: float | None = None) -> LayerStack:
    """Symmetric Fabry-Perot-like cavity with thin high-index mirrors.

    Geometry: vacuum claddings, mirror(L/100) | vacuum(L) | mirror(L/100),
    probe emitter at the cavity center x_a = L/100 + L/2.
    """
    if L <= 0:
        raise ValueError("cavity length L must be > 0")
    if n_mirror < 1:
        raise ValueError("n_mirror must be >= 1")
    t = L / 100.0
    mirror = Material.constant(f"mirror(n={n_mirror:g})", complex(n_mirror))
    emitter = EmitterSpec(x_a=t + L / 2.0, omega_a=omega_a or math.pi / L, gamma=gamma)
    return LayerStack(
        left=VACUUM,
        layers=((mirror, t), (VACUUM, L), (mirror, t)),
        right=VACUUM,
        emitter=emitter,
    )


# layer sequence of the X-ray cavity: (material key, thickness in nm)
XRAY_LAYER_SEQUENCE = (
    ("Pt", 3.0),
    ("C", 3.5),
    ("Fe", 3.0),
    ("C", 7.5),
    ("Fe", 1.0),
    ("Fe57", 1.0),
    ("Fe", 1.0),
    ("C", 27.0),
    ("Pt", 10.0),
)


def load_material_table(source) -> dict:
    """Load an X-ray material table (JSON file path or pre-parsed dict).

    Schema: {"version": 1, "energy_keV": ..., "materials":
    {name: {"delta": ..., "beta": ...}, ...}}.  Returns name -> Material.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    if "version" not in data:
        raise ConfigurationError("material table: missing 'version' field")
    if "materials" not in data:
        raise ConfigurationError("material table: missing 'materials' field")
    table = {}
    for name, entry in data["materials"].items():
        try:
            table[name] = Material.from_xray_constants(
                name, float(entry["delta"]), float(entry["beta"]))
        except KeyError as exc:
            raise ConfigurationError(
                f"material {name!r}: missing optical constant {exc}") from exc
    return table


def default_material_table_path() -> Path:
    return Path(__file__).parent / "data" / "xray_materials.json"


def build_xray_cavity(material_table, theta: float, gamma: float = GAMMA_NUC_KEV,
                      fe57_resonance: tuple | None = None) -> WaveProblem:
    """Grazing-incidence thin-film X-ray cavity probed at angle theta (radians).

    Thicknesses are converted from nm to internal 1/keV lengths; the parallel
    wavevector is fixed at k_par = omega_nuc cos(theta).  The emitter sits at
    the center of the Fe-57 layer.  ``fe57_resonance = (f_res, gamma_res)``
    swaps the Fe-57 layer for a dispersive Lorentzian medium (full-wave
    cross-check oracle); by default the layer is the plain Fe electronic index.
    """
    table = (material_table if isinstance(material_table, dict)
             else load_material_table(material_table))
    for key in ("Pt", "C", "Fe", "Si"):
        if key not in table:
            raise ConfigurationError(f"material table: missing entry for {key!r}")

    layers = []
    x_fe57 = None
    x_cursor = 0.0
    for key, d_nm in XRAY_LAYER_SEQUENCE:
        d = d_nm / HBARC_KEV_NM
        if key == "Fe57":
            if fe57_resonance is None:
                mat = table["Fe"]
            else:
                # dispersive variant keeps the electronic Fe index as background
                f_res, gamma_res = fe57_resonance
                mat = Material.lorentzian("Fe57(resonant)",
                                          n_bg=complex(table["Fe"].n_const),
                                          omega_res=OMEGA_NUC_KEV,
                                          gamma_res=gamma_res, f_res=f_res)
            x_fe57 = x_cursor + d / 2.0
        else:
            mat = table[key]
        layers.append((mat, d))
        x_cursor += d

    emitter = EmitterSpec(x_a=x_fe57, omega_a=OMEGA_NUC_KEV, gamma=gamma)
    stack = LayerStack(left=VACUUM, layers=tuple(layers), right=table["Si"],
                       emitter=emitter)
    return WaveProblem(stack=stack, k_par=OMEGA_NUC_KEV * math.cos(theta))
