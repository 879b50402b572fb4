"""Localization bounds: no-mismatch CRB, hybrid CRB by direct marginalization,
and the closed-form ``CRB0 + dCRB`` decomposition under its documented
interpretations.

The direct Schur-complement path (``hcrb_oracle``) is the reference value.
Closed-form variants are evaluated alongside and compared against it; their
disagreement is reported, never reconciled.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import DegenerateSigma, IllConditioned, PoleHit, SingularGeometry
from .fim import FimBlocks, build_blocks
from .numerics import DEFAULT_POLICY, TolerancePolicy
from .scenario import Scenario, derive_geometry

DEVIATION_THRESHOLD = 1e-6
POLE_EPS = 1e-12

# How the block-diagonal phase matrix inverse is read:
#   printed          - the lambda formula taken literally
#   schur            - lambda formula / (2 snr), the exact inverse of the phase
#                      block of H after eliminating the reflectivity
#   prior_blockdiag  - inverse of blockdiag(Sigma_Delta + I/sigma^2) / (2 snr)
R_DELTA_INTERPRETATIONS = ("printed", "schur", "prior_blockdiag")

# printed   - P_D = T1 - 2 X + T3 and dCRB = [J_F - J_F P^-1 J_F]^-1
# corrected - P_D = T1 - (X + X^T) + T3 and dCRB = [J_F P^-1 J_F - J_F]^-1
ALGEBRAS = ("printed", "corrected")


@dataclass(frozen=True)
class ClosedFormVariant:
    kind: str           # "pdelta" or "mu_b"
    r_delta: str = "-"  # one of R_DELTA_INTERPRETATIONS for "pdelta"
    algebra: str = "corrected"

    def __post_init__(self):
        if self.kind not in ("pdelta", "mu_b"):
            raise ValueError(f"unknown closed-form kind {self.kind!r}")
        if self.kind == "pdelta" and self.r_delta not in R_DELTA_INTERPRETATIONS:
            raise ValueError(f"unknown R_Delta interpretation {self.r_delta!r}")
        if self.algebra not in ALGEBRAS:
            raise ValueError(f"unknown algebra {self.algebra!r}")

    @property
    def tag(self) -> str:
        return f"{self.kind}/{self.r_delta}/{self.algebra}"

    @classmethod
    def from_tag(cls, tag: str) -> "ClosedFormVariant":
        try:
            kind, r_delta, algebra = tag.split("/")
        except ValueError:
            raise ValueError(f"malformed variant tag {tag!r}") from None
        return cls(kind, r_delta, algebra)


DEFAULT_VARIANT = ClosedFormVariant("pdelta", "schur", "corrected")
ALL_VARIANTS = tuple(
    [ClosedFormVariant("pdelta", r, a) for r in R_DELTA_INTERPRETATIONS for a in ALGEBRAS]
    + [ClosedFormVariant("mu_b", "-", a) for a in ALGEBRAS]
)


@dataclass(frozen=True)
class RDeltaInverse:
    value: np.ndarray
    interpretation_tag: str


@dataclass(frozen=True)
class ClosedFormResult:
    hcrb: np.ndarray
    delta_crb: np.ndarray
    crb0: np.ndarray
    variant: str
    intermediates: dict = field(default_factory=dict)


@dataclass(frozen=True)
class VariantOutcome:
    tag: str
    status: str                  # "ok", "flagged" or "error"
    deviation: float | None
    hcrb: np.ndarray | None = None
    error: str | None = None


@dataclass(frozen=True)
class BoundResult:
    crb0: np.ndarray
    hcrb_oracle: np.ndarray
    hcrb_closed: np.ndarray | None
    delta_crb_closed: np.ndarray | None
    deviation: float | None
    selected_variant: str
    variants: tuple = ()
    intermediates: dict = field(default_factory=dict)

    @property
    def hcrb(self) -> np.ndarray:
        return self.hcrb_oracle

    @property
    def delta_crb(self) -> np.ndarray:
        """Mismatch penalty taken from the reference path."""
        return self.hcrb_oracle - self.crb0

    @property
    def flagged(self) -> list:
        return [v.tag for v in self.variants if v.status != "ok"]


def _inv2(m, pol, what):
    try:
        return numerics.invert_symmetric(numerics.symmetrize(m), pol, equilibrate=False)
    except IllConditioned as e:
        raise SingularGeometry(f"{what} is singular: {e}", e.condition) from None


def fisher_no_mismatch(s: Scenario, blocks: FimBlocks | None = None) -> np.ndarray:
    """Position information with the reflectivity marginalized and perfect sync."""
    b = build_blocks(s) if blocks is None else blocks
    dft = b.d @ b.f_tau_theta
    j_f = b.d @ b.r_tau @ b.d.T - dft @ np.linalg.solve(b.sigma_theta, dft.T)
    return numerics.symmetrize(j_f)


def crb_no_mismatch(s: Scenario, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    return _inv2(fisher_no_mismatch(s), pol, "position information J_F")


def hybrid_position_information(s: Scenario, pol: TolerancePolicy = DEFAULT_POLICY,
                                blocks: FimBlocks | None = None) -> np.ndarray:
    """``D R Dᵀ - D G H⁻¹ Gᵀ Dᵀ``; the reduced ``H = Sigma_theta`` when sigma^2 = 0."""
    b = build_blocks(s) if blocks is None else blocks
    aa = b.d @ b.r_tau @ b.d.T
    if s.sigma_delta_sq == 0:
        return numerics.schur_complement(aa, b.d @ b.f_tau_theta, b.sigma_theta, pol)
    return numerics.schur_complement(aa, b.d @ b.g, b.h, pol)


def hcrb_oracle(s: Scenario, pol: TolerancePolicy = DEFAULT_POLICY) -> np.ndarray:
    return _inv2(hybrid_position_information(s, pol), pol, "hybrid position information")


def lambdas(s: Scenario):
    if s.sigma_delta_sq <= 0:
        raise DegenerateSigma("lambda terms need sigma_delta_sq > 0")
    inv = 1.0 / (2 * s.signal.snr * s.sigma_delta_sq)
    return 1.0 / (s.n_rx + inv), 1.0 / (s.n_tx + inv)


def r_delta_inverse(s: Scenario, interpretation: str = "printed") -> RDeltaInverse:
    """Block-diagonal inverse phase matrix under the named interpretation."""
    if interpretation not in R_DELTA_INTERPRETATIONS:
        raise ValueError(f"unknown interpretation {interpretation!r}")
    m, n = s.n_tx, s.n_rx
    l1, l2 = lambdas(s)
    out = np.zeros((m + n, m + n))
    if interpretation == "prior_blockdiag":
        out[:m, :m] = l1 * np.eye(m)
        out[m:, m:] = l2 * np.eye(n)
        return RDeltaInverse(out, interpretation)
    den1, den2 = 1 - n * l1, 1 - m * l2
    if abs(den1) < POLE_EPS or abs(den2) < POLE_EPS:
        raise PoleHit(f"1 - N*lambda1 = {den1:.3e}, 1 - M*lambda2 = {den2:.3e}")
    out[:m, :m] = l1 * np.eye(m) + (n * l1 ** 2 / (m * den1)) * np.ones((m, m))
    out[m:, m:] = l2 * np.eye(n) + (m * l2 ** 2 / (n * den2)) * np.ones((n, n))
    if interpretation == "schur":
        out /= 2 * s.signal.snr
    return RDeltaInverse(out, interpretation)


def mu_coefficients(s: Scenario):
    """``(mu0, k1, k2, k3)``."""
    sig = s.signal
    m, n = s.n_tx, s.n_rx
    l1, l2 = lambdas(s)
    mu0 = 8 * np.pi ** 2 * (sig.carrier_hz ** 2 + sig.bandwidth_hz ** 2) * sig.snr
    mu0 /= sig.speed_of_light ** 2
    return mu0, l1 / m + l2 / n, l1 * n ** 2 / m, l2 * m ** 2 / n


def layout_matrices(s: Scenario, blocks: FimBlocks | None = None):
    """Rank-one layout matrices ``B_m = (D_m 1)(D_m 1)ᵀ`` for m = 1, 2, 3."""
    b = build_blocks(s) if blocks is None else blocks
    g = derive_geometry(s)
    sums = (
        s.signal.speed_of_light * b.d.sum(axis=1),
        g.tx_unit.sum(axis=0),
        g.rx_unit.sum(axis=0),
    )
    return tuple(np.outer(v, v) for v in sums)


def _pdelta(b: FimBlocks, r_inv, algebra):
    a1 = b.d @ b.f_tau_theta @ np.linalg.inv(b.sigma_theta)
    dftd = b.d @ b.f_tau_delta
    t1 = a1 @ b.f_theta_delta @ r_inv @ b.f_theta_delta.T @ a1.T
    x = dftd @ r_inv @ b.f_theta_delta.T @ a1.T
    t3 = dftd @ r_inv @ dftd.T
    cross = 2 * x if algebra == "printed" else x + x.T
    return t1 - cross + t3


def hcrb_closed_form(s: Scenario, variant: ClosedFormVariant | str = DEFAULT_VARIANT,
                     pol: TolerancePolicy = DEFAULT_POLICY) -> ClosedFormResult:
    """``CRB0 + dCRB`` with ``dCRB`` from the selected closed-form variant."""
    if isinstance(variant, str):
        variant = ClosedFormVariant.from_tag(variant)
    if s.sigma_delta_sq <= 0:
        raise DegenerateSigma("closed form needs sigma_delta_sq > 0")
    b = build_blocks(s)
    j_f = fisher_no_mismatch(s, b)
    crb0 = _inv2(j_f, pol, "position information J_F")
    l1, l2 = lambdas(s)
    inter = {"j_f": j_f, "lambda1": l1, "lambda2": l2}
    if variant.kind == "pdelta":
        r = r_delta_inverse(s, variant.r_delta)
        p = _pdelta(b, r.value, variant.algebra)
        inter["r_delta_tag"] = r.interpretation_tag
    else:
        mu = mu_coefficients(s)
        bm = layout_matrices(s, b)
        p = mu[0] * sum(k * bb for k, bb in zip(mu[1:], bm))
        inter["mu"] = mu
        inter["b"] = bm
    if not np.all(np.isfinite(p)):
        raise IllConditioned("P_Delta has non-finite entries", np.inf)
    inter["p_delta"] = p
    p_inv = numerics.invert_symmetric(numerics.symmetrize(p), pol, equilibrate=False)
    jpj = j_f @ p_inv @ j_f
    core = j_f - jpj if variant.algebra == "printed" else jpj - j_f
    delta = numerics.invert_symmetric(numerics.symmetrize(core), pol, equilibrate=False)
    return ClosedFormResult(crb0 + delta, delta, crb0, variant.tag, inter)


def compare_paths(s: Scenario, variants=ALL_VARIANTS, selected=DEFAULT_VARIANT,
                  pol: TolerancePolicy = DEFAULT_POLICY,
                  threshold: float = DEVIATION_THRESHOLD) -> BoundResult:
    """Evaluate the reference path and every closed-form variant.

    Variant failures are recorded per variant; a reference-path failure is
    raised (prefixed with ``oracle:``).
    """
    if s.sigma_delta_sq <= 0:
        raise DegenerateSigma("compare_paths needs sigma_delta_sq > 0")
    if isinstance(selected, str):
        selected = ClosedFormVariant.from_tag(selected)
    try:
        crb0 = crb_no_mismatch(s, pol)
        oracle = hcrb_oracle(s, pol)
    except IllConditioned as e:
        raise type(e)(f"oracle: {e}", e.condition) from None
    variants = tuple(ClosedFormVariant.from_tag(v) if isinstance(v, str) else v for v in variants)
    if selected not in variants:
        variants = (selected,) + variants
    outcomes = []
    chosen = None
    for v in variants:
        try:
            res = hcrb_closed_form(s, v, pol)
        except (IllConditioned, PoleHit, np.linalg.LinAlgError) as e:
            outcomes.append(VariantOutcome(v.tag, "error", None, None, f"{type(e).__name__}: {e}"))
            continue
        dev = numerics.rel_frobenius(res.hcrb, oracle)
        status = "ok" if dev <= threshold else "flagged"
        outcomes.append(VariantOutcome(v.tag, status, dev, res.hcrb))
        if v == selected:
            chosen = res
    return BoundResult(
        crb0=crb0,
        hcrb_oracle=oracle,
        hcrb_closed=None if chosen is None else chosen.hcrb,
        delta_crb_closed=None if chosen is None else chosen.delta_crb,
        deviation=None if chosen is None else numerics.rel_frobenius(chosen.hcrb, oracle),
        selected_variant=selected.tag,
        variants=tuple(outcomes),
        intermediates={} if chosen is None else chosen.intermediates,
    )
