"""
Evaluación de proporcionalidad: ventaja militar frente a daño colateral.

Las formas de MA y CD son sustitutos a nivel de modelo (adimensionales), no
una metodología real de estimación de daño colateral.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from models import ValidationResult, Violation, is_finite_number

# ==================== ENUMS ====================

class Outcome(enum.Enum):
    REPLAN_OR_ABORT = "replan_or_abort"
    DELAY = "delay"
    PROCEED = "proceed"

    @property
    def rank(self):
        return _RANKING[self]


_RANKING = {Outcome.REPLAN_OR_ABORT: 0, Outcome.DELAY: 1, Outcome.PROCEED: 2}

# ==================== TIPOS ====================

@dataclass(frozen=True, slots=True)
class ProportionalityParams:
    w_u: float = 0.6
    w_as: float = 0.4
    c0: float = 0.25
    c_u: float = 0.8
    legal_threshold: float = 0.5


@dataclass(frozen=True, slots=True)
class DecisionQualityWeights:
    w_h: float = 0.4
    w_a: float = 0.3
    w_s: float = 0.3
    w_c: float = 0.5


@dataclass(frozen=True)
class ProportionalityTrace:
    times: np.ndarray
    ma: np.ndarray
    cd: np.ndarray
    score: np.ndarray
    positive_fraction: float


@dataclass(frozen=True, slots=True)
class LegalVerdict:
    outcome: Outcome
    positive_fraction: float
    threshold: float


# ==================== OPERACIONES ====================

# Las formas aceptan escalares o arreglos de numpy indistintamente

def _ventaja(u, a, s, p):
    return p.w_u * u + p.w_as * a * s


def _dano(u, sigma, p):
    return sigma * (p.c0 + p.c_u * u)


def _calidad(h, a, s, c, w):
    return (w.w_h * h + w.w_a * a + w.w_s * s) * (1.0 - w.w_c * c)


def military_advantage(state, p):
    return _ventaja(state.u, state.a, state.s, p)


def collateral_damage(state, sigma_env, p):
    """Con autoridad nula el daño queda acotado en sigma_env·c0"""
    return _dano(state.u, sigma_env, p)


def score_trajectory(traj, sigma_schedule, p):
    """
    Puntaje de proporcionalidad muestra a muestra sobre una trayectoria.

    Args:
        traj (Trajectory): trayectoria simulada
        sigma_schedule: schedule de sigma_env (cualquier objeto con value_at(t))
        p (ProportionalityParams): coeficientes

    Returns:
        ProportionalityTrace
    """
    times = np.asarray(traj.times, dtype=float)
    u = traj.stock('u')
    a = traj.stock('a')
    s = traj.stock('s')
    sigma = np.array([sigma_schedule.value_at(t) for t in times], dtype=float)

    ma = _ventaja(u, a, s, p)
    cd = _dano(u, sigma, p)
    score = ma - cd

    # empates cuentan como no positivos
    positivos = int(np.count_nonzero(score > 0.0))
    fraccion = positivos / len(times) if len(times) else 0.0
    return ProportionalityTrace(times=times, ma=ma, cd=cd, score=score, positive_fraction=fraccion)


def assess(trace, p):
    fraccion = trace.positive_fraction
    if fraccion >= p.legal_threshold:
        outcome = Outcome.PROCEED
    elif fraccion < p.legal_threshold / 2.0:
        outcome = Outcome.REPLAN_OR_ABORT
    else:
        outcome = Outcome.DELAY
    return LegalVerdict(outcome=outcome, positive_fraction=fraccion, threshold=p.legal_threshold)


def decision_quality(state, w):
    return _calidad(state.h, state.a, state.s, state.c, w)


def decision_quality_series(traj, w):
    """Calidad de decisión para cada muestra de la trayectoria"""
    e = traj.states
    return _calidad(e[:, 0], e[:, 1], e[:, 2], e[:, 5], w)


# ==================== VALIDACIÓN ====================

def validate_proportionality(p, w):
    violaciones = []
    for nombre in ('w_u', 'w_as', 'c0', 'c_u'):
        valor = getattr(p, nombre)
        if not is_finite_number(valor) or valor < 0:
            violaciones.append(Violation(f'{nombre} ≥ 0', f'{nombre} must be ≥ 0'))
    if not is_finite_number(p.legal_threshold) or not 0.0 < p.legal_threshold <= 1.0:
        violaciones.append(Violation('legal_threshold ∈ (0,1]', 'legal_threshold must be in (0, 1]'))

    for nombre in ('w_h', 'w_a', 'w_s'):
        valor = getattr(w, nombre)
        if not is_finite_number(valor) or valor < 0:
            violaciones.append(Violation(f'{nombre} ≥ 0', f'{nombre} must be ≥ 0'))
    suma = w.w_h + w.w_a + w.w_s
    if not is_finite_number(suma) or abs(suma - 1.0) > 1e-9:
        violaciones.append(Violation('w_h+w_a+w_s = 1', 'w_h + w_a + w_s must equal 1'))
    if not is_finite_number(w.w_c) or not 0.0 <= w.w_c <= 1.0:
        violaciones.append(Violation('w_c ∈ [0,1]', 'w_c must be in [0, 1]'))

    return ValidationResult(violations=tuple(violaciones))


