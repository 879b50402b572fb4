"""Fisher-information blocks for the coherent MIMO localization model.

Parameter orderings
-------------------
kappa : ``[tau (Q), refl_re, refl_im, dphi_tx (M), dphi_rx (N)]``
theta : ``[x, y, refl_re, refl_im, dphi_tx (M), dphi_rx (N)]``

Path ``(tx k, rx l)`` sits at flat index ``l * M + k`` (zero-based).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics
from .errors import DegenerateSigma
from .scenario import GeometryDerived, Scenario, derive_geometry


@dataclass(frozen=True)
class FimBlocks:
    r_tau: np.ndarray          # (Q, Q)
    sigma_theta: np.ndarray    # (2, 2)
    sigma_delta: np.ndarray    # (L, L), data part only
    f_tau_theta: np.ndarray    # (Q, 2)
    f_tau_delta: np.ndarray    # (Q, L)
    f_theta_delta: np.ndarray  # (2, L)
    d: np.ndarray              # (2, Q)
    prior: np.ndarray          # (L, L), (1/sigma^2) I; zeros when sigma^2 == 0

    @property
    def g(self) -> np.ndarray:
        return np.hstack([self.f_tau_theta, self.f_tau_delta])

    @property
    def a_delta(self) -> np.ndarray:
        return self.sigma_delta + self.prior

    @property
    def h(self) -> np.ndarray:
        return np.block([
            [self.sigma_theta, self.f_theta_delta],
            [self.f_theta_delta.T, self.a_delta],
        ])


@dataclass(frozen=True)
class HybridFim:
    j_kappa: np.ndarray
    j_theta: np.ndarray
    blocks: FimBlocks


def build_r_tau(s: Scenario) -> np.ndarray:
    sig = s.signal
    val = 8 * np.pi ** 2 * (sig.carrier_hz ** 2 + sig.bandwidth_hz ** 2) * sig.snr
    return val * np.eye(s.n_paths)


def build_sigma_theta(s: Scenario) -> np.ndarray:
    sig = s.signal
    return (2 * s.n_paths * sig.snr / sig.reflectivity_sq) * np.eye(2)


def build_sigma_delta(s: Scenario) -> np.ndarray:
    m, n = s.n_tx, s.n_rx
    return 2 * s.signal.snr * np.block([
        [n * np.eye(m), np.ones((m, n))],
        [np.ones((n, m)), m * np.eye(n)],
    ])


def path_selector(m: int, n: int) -> np.ndarray:
    """(Q, L) 0/1 matrix: row ``l*M + k`` marks tx column ``k`` and rx column ``M + l``."""
    sel = np.zeros((m * n, m + n))
    rows = np.arange(m * n)
    sel[rows, rows % m] = 1.0
    sel[rows, m + rows // m] = 1.0
    return sel


def build_cross_blocks(s: Scenario, g: GeometryDerived | None = None):
    """Return ``(F_tau_theta, F_tau_delta, F_theta_delta)``."""
    sig = s.signal
    m, n, q = s.n_tx, s.n_rx, s.n_paths
    re, im = sig.reflectivity
    fc = sig.carrier_hz
    f_tau_theta = (4 * np.pi * fc / sig.noise_var) * np.column_stack(
        [im * np.ones(q), -re * np.ones(q)]
    )
    f_tau_delta = 4 * np.pi * fc * sig.snr * path_selector(m, n)
    w = np.concatenate([n * np.ones(m), m * np.ones(n)])
    f_theta_delta = (2 * sig.snr / sig.reflectivity_sq) * np.vstack([im * w, -re * w])
    return f_tau_theta, f_tau_delta, f_theta_delta


def build_d(s: Scenario, g: GeometryDerived | None = None) -> np.ndarray:
    """(2, Q) Jacobian of the delays with respect to the target position."""
    g = derive_geometry(s) if g is None else g
    u, v = g.tx_unit, g.rx_unit
    cols = (v[:, None, :] + u[None, :, :]).reshape(-1, 2)
    return -cols.T / s.signal.speed_of_light


def build_p(s: Scenario, g: GeometryDerived | None = None) -> np.ndarray:
    """Chain-rule matrix mapping kappa-information to theta-information."""
    d = build_d(s, g)
    q, k = s.n_paths, 2 + s.n_phase
    p = np.zeros((2 + k, q + k))
    p[:2, :q] = d
    p[2:, q:] = np.eye(k)
    return p


def build_blocks(s: Scenario, g: GeometryDerived | None = None) -> FimBlocks:
    g = derive_geometry(s) if g is None else g
    f_tt, f_td, f_hd = build_cross_blocks(s, g)
    sd = s.sigma_delta_sq
    prior = (1.0 / sd) * np.eye(s.n_phase) if sd > 0 else np.zeros((s.n_phase, s.n_phase))
    return FimBlocks(
        r_tau=build_r_tau(s),
        sigma_theta=build_sigma_theta(s),
        sigma_delta=build_sigma_delta(s),
        f_tau_theta=f_tt,
        f_tau_delta=f_td,
        f_theta_delta=f_hd,
        d=build_d(s, g),
        prior=prior,
    )


def assemble_hybrid_fim(s: Scenario, pol=numerics.DEFAULT_POLICY) -> HybridFim:
    """Hybrid FIM in the delay parameterization and mapped to target position."""
    if s.sigma_delta_sq <= 0:
        raise DegenerateSigma("the prior term needs sigma_delta_sq > 0")
    b = build_blocks(s)
    g, h = b.g, b.h
    j_kappa = np.block([[b.r_tau, g], [g.T, h]])
    p = build_p(s)
    j_theta = numerics.symmetrize(p @ j_kappa @ p.T)
    dg = b.d @ g
    direct = np.block([[b.d @ b.r_tau @ b.d.T, dg], [dg.T, h]])
    dev = numerics.rel_frobenius(j_theta, direct)
    if dev > 1e-10:
        raise AssertionError(f"chain-rule assembly disagrees with direct form ({dev:.2e})")
    return HybridFim(j_kappa=j_kappa, j_theta=j_theta, blocks=b)
