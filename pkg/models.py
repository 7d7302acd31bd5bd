"""
Modelo de co-aprendizaje humano-IA: stocks, parámetros y ecuaciones de flujo.

Todas las magnitudes son adimensionales. El tiempo está normalizado a la
ventana de misión (horizonte 1.0 = una ventana de planificación), por lo que
todas las ganancias son tasas por ventana.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, fields

import numpy as np

logger = logging.getLogger(__name__)

STOCKS = ('h', 'a', 's', 't', 'u', 'c')
INPUTS = ('sigma_env', 'explanation_quality', 'annotation_quality', 'task_rate')

# ==================== ENUMS ====================

class PGMode(enum.Enum):
    LITERAL = "literal"  # PG = A - H
    EXPECTATION_WEIGHTED = "expectation-weighted"  # PG = A - T*H


# ==================== TIPOS ====================

@dataclass(frozen=True, slots=True)
class StockState:
    """
    Los seis stocks del equipo en un instante, cada uno en [0, 1]
    """
    h: float  # experiencia humana
    a: float  # competencia de la IA
    s: float  # conciencia situacional compartida
    t: float  # calibración de confianza
    u: float  # nivel de autoridad de la IA
    c: float  # carga cognitiva

    def as_array(self):
        return np.array([self.h, self.a, self.s, self.t, self.u, self.c], dtype=float)

    @classmethod
    def from_array(cls, valores):
        h, a, s, t, u, c = (float(v) for v in valores)
        return cls(h=h, a=a, s=s, t=t, u=u, c=c)


@dataclass(frozen=True, slots=True)
class ExogenousInputs:
    sigma_env: float
    explanation_quality: float
    annotation_quality: float
    task_rate: float


@dataclass(frozen=True, slots=True)
class RateParameters:
    """
    Ganancias de las seis ecuaciones de flujo.

    k1, k2 y k3 son los valores de la política de supervisión del caso de uso;
    el resto son valores por defecto documentados, ajustables por calibración.
    """
    alpha1: float = 0.30
    beta1: float = 0.10
    alpha2: float = 0.30
    alpha3: float = 0.10  # aprendizaje por delegación (R2)
    beta2: float = 0.15
    gamma1: float = 0.40
    gamma2: float = 0.30
    delta1: float = 0.50
    delta2: float = 0.20
    k1: float = 0.45
    k2: float = 0.35
    k3: float = 0.25
    theta1: float = 0.30
    theta2: float = 0.20
    theta3: float = 0.15  # carga de supervisión (B2)
    u_ref: float = 0.5
    u_slew: float = 0.9  # máximo |dU/dt| por ventana
    pg_mode: PGMode = PGMode.EXPECTATION_WEIGHTED

    GAINS = ('alpha1', 'beta1', 'alpha2', 'alpha3', 'beta2', 'gamma1', 'gamma2',
             'delta1', 'delta2', 'k1', 'k2', 'k3', 'theta1', 'theta2', 'theta3')


@dataclass(frozen=True, slots=True)
class SafetyPolicy:
    """Lazo de seguridad B3 por carga cognitiva"""
    c_safe: float = 0.8
    hysteresis: float = 0.05
    r_safe: float = 0.2
    rho_suppress: float = 0.5


@dataclass(frozen=True, slots=True)
class AuxiliaryValues:
    f_ha: float
    f_ah: float
    f_sync: float
    delta_obs: float
    pg: float
    opacity: float
    oversight_load: float
    tr_eff: float

    def as_tuple(self):
        return (self.f_ha, self.f_ah, self.f_sync, self.delta_obs, self.pg,
                self.opacity, self.oversight_load, self.tr_eff)


AUXILIARIES = tuple(f.name for f in fields(AuxiliaryValues))


@dataclass(frozen=True, slots=True)
class GuardState:
    b3_active: bool = False


@dataclass(frozen=True, slots=True)
class StockDerivatives:
    dh: float
    da: float
    ds: float
    dt_trust: float
    du: float
    dc: float

    def as_array(self):
        return np.array([self.dh, self.da, self.ds, self.dt_trust, self.du, self.dc], dtype=float)


@dataclass(frozen=True, slots=True)
class Violation:
    constraint: str
    message: str


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple = ()

    @property
    def ok(self):
        return not self.violations

    def messages(self):
        return [v.message for v in self.violations]


@dataclass(frozen=True, slots=True)
class ClampResult:
    state: StockState
    clamped: tuple = ()  # nombres de los stocks proyectados

    @property
    def flags(self):
        return tuple(nombre in self.clamped for nombre in STOCKS)


# ==================== FUNCIONES AUXILIARES ====================

def compute_auxiliaries(state, inputs, params, guard, policy):
    """
    Calcula los flujos auxiliares del modelo.

    Args:
        state (StockState): stocks actuales
        inputs (ExogenousInputs): entradas exógenas en el instante
        params (RateParameters): ganancias
        guard (GuardState): estado del lazo B3
        policy (SafetyPolicy): política de seguridad

    Returns:
        AuxiliaryValues
    """
    f_ha = inputs.explanation_quality * state.a
    f_ah = inputs.annotation_quality * state.h
    if params.pg_mode is PGMode.LITERAL:
        pg = state.a - state.h
    else:
        pg = state.a - state.t * state.h
    tr_eff = inputs.task_rate * (policy.rho_suppress if guard.b3_active else 1.0)

    return AuxiliaryValues(
        f_ha=f_ha,
        f_ah=f_ah,
        f_sync=(f_ha + f_ah) / 2.0,
        delta_obs=inputs.sigma_env * (1.0 - state.s),
        pg=pg,
        opacity=1.0 - inputs.explanation_quality,
        oversight_load=params.theta3 * max(0.0, state.u - params.u_ref),
        tr_eff=tr_eff,
    )


def authority_drive(state, inputs, params):
    """Flujo de autoridad sin guardas ni límite de pendiente (k1·T + k2·S - k3·σ)"""
    return params.k1 * state.t + params.k2 * state.s - params.k3 * inputs.sigma_env


def derivatives(state, aux, inputs, params, guard, policy):
    """
    Las seis ecuaciones de flujo.

    El lazo B3 fuerza dU <= -r_safe mientras está activo y el límite de
    pendiente u_slew (demoras de rendición de cuentas, B2) se aplica al final.
    """
    du = authority_drive(state, inputs, params)
    if guard.b3_active:
        du = min(du, -policy.r_safe)
    du = min(max(du, -params.u_slew), params.u_slew)

    return StockDerivatives(
        dh=params.alpha1 * aux.f_ha - params.beta1 * state.c,
        da=(params.alpha2 * aux.f_ah
            + params.alpha3 * state.u * (1.0 - state.a)
            - params.beta2 * inputs.sigma_env),
        ds=params.gamma1 * aux.f_sync - params.gamma2 * aux.delta_obs,
        dt_trust=params.delta1 * aux.pg - params.delta2 * aux.opacity,
        du=du,
        dc=params.theta1 * aux.tr_eff - params.theta2 * (1.0 - state.u) + aux.oversight_load,
    )


def evaluate(state, inputs, params, guard, policy):
    """Atajo: auxiliares y derivadas para el mismo instante"""
    aux = compute_auxiliaries(state, inputs, params, guard, policy)
    return aux, derivatives(state, aux, inputs, params, guard, policy)


def update_guard(state, guard, policy):
    """
    Transición del lazo B3 con histéresis

    Se activa si C > c_safe y se desactiva solo si C < c_safe - hysteresis.
    """
    if not guard.b3_active and state.c > policy.c_safe:
        logger.debug('B3 activado con C=%.4f', state.c)
        return GuardState(b3_active=True)
    if guard.b3_active and state.c < policy.c_safe - policy.hysteresis:
        logger.debug('B3 desactivado con C=%.4f', state.c)
        return GuardState(b3_active=False)
    return guard


def clamp_state(state):
    """Proyecta cada stock sobre [0, 1] e informa cuáles se recortaron"""
    valores = {}
    recortados = []
    for nombre in STOCKS:
        valor = getattr(state, nombre)
        proyectado = min(max(valor, 0.0), 1.0)
        if proyectado != valor:
            recortados.append(nombre)
        valores[nombre] = proyectado

    if not recortados:
        return ClampResult(state=state)
    return ClampResult(state=StockState(**valores), clamped=tuple(recortados))


# ==================== VALIDACIÓN ====================

def validate_parameters(params, policy):
    """
    Verifica las restricciones de parámetros y política.

    No lanza excepciones: devuelve la lista de violaciones.
    """
    violaciones = []

    def violar(constraint, message):
        violaciones.append(Violation(constraint=constraint, message=message))

    for nombre in RateParameters.GAINS:
        valor = getattr(params, nombre)
        if not is_finite_number(valor):
            violar(f'{nombre} finite', f'{nombre} must be finite')
        elif valor < 0:
            violar(f'{nombre} ≥ 0', f'{nombre} must be ≥ 0')

    if not is_finite_number(params.u_ref) or not 0.0 <= params.u_ref <= 1.0:
        violar('u_ref ∈ [0,1]', 'u_ref must be in [0, 1]')
    if not is_finite_number(params.u_slew) or params.u_slew <= 0:
        violar('u_slew > 0', 'u_slew must be > 0')
    if not isinstance(params.pg_mode, PGMode):
        violar('pg_mode', 'pg_mode must be literal or expectation-weighted')

    if not is_finite_number(policy.c_safe) or not 0.0 < policy.c_safe <= 1.0:
        violar('0 < c_safe ≤ 1', 'c_safe must be in (0, 1]')
    if not is_finite_number(policy.hysteresis) or policy.hysteresis <= 0:
        violar('hysteresis > 0', 'hysteresis must be > 0')
    elif is_finite_number(policy.c_safe) and policy.hysteresis >= policy.c_safe:
        violar('hysteresis < c_safe', 'hysteresis must be < c_safe')
    if not is_finite_number(policy.r_safe) or policy.r_safe <= 0:
        violar('r_safe > 0', 'r_safe must be > 0')
    elif is_finite_number(params.u_slew) and params.u_slew > 0 and policy.r_safe > params.u_slew:
        # el recorte de pendiente no puede anular el retiro forzado de B3
        violar('r_safe ≤ u_slew', 'r_safe must be ≤ u_slew')
    if not is_finite_number(policy.rho_suppress) or not 0.0 <= policy.rho_suppress < 1.0:
        violar('0 ≤ rho_suppress < 1', 'rho_suppress must be in [0, 1)')

    return ValidationResult(violations=tuple(violaciones))


def validate_state(state):
    return _validate_unit_fields(state, STOCKS)


def validate_inputs(inputs):
    return _validate_unit_fields(inputs, INPUTS)


def _validate_unit_fields(registro, nombres):
    violaciones = []
    for nombre in nombres:
        valor = getattr(registro, nombre)
        if not is_finite_number(valor) or not 0.0 <= valor <= 1.0:
            violaciones.append(Violation(constraint=f'{nombre} ∈ [0,1]',
                                         message=f'{nombre} must be in [0, 1]'))
    return ValidationResult(violations=tuple(violaciones))


def is_finite_number(valor):
    return isinstance(valor, (int, float)) and not isinstance(valor, bool) and math.isfinite(valor)
