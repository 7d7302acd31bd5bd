"""
Escenarios: estado inicial, parámetros, política, schedules exógenos y solver.

Incluye los escenarios incorporados ("baseline" y "volatile") y el
direccionamiento por rutas con puntos que comparten overrides, barridos y
calibración.
"""
from __future__ import annotations

import bisect
import dataclasses
import enum
from dataclasses import dataclass

from errors import ScenarioError
from integrator import Method, SolverConfig, validate_solver
from models import (INPUTS, ExogenousInputs, RateParameters, SafetyPolicy, StockState,
                    ValidationResult, Violation, is_finite_number, validate_parameters,
                    validate_state)
from proportionality import DecisionQualityWeights, ProportionalityParams, validate_proportionality

# tolerancia temporal para los cambios de segmento
_TOL_TIEMPO = 1e-12

BLOCKS = ('initial', 'rates', 'safety', 'proportionality', 'dq_weights', 'solver')

# ==================== SCHEDULES ====================

@dataclass(frozen=True, slots=True)
class ScheduleSegment:
    start: float
    value: float


@dataclass(frozen=True)
class Schedule:
    """
    Entrada constante por tramos. Convención continua por izquierda: el valor
    nuevo rige exactamente desde el inicio de su segmento.
    """
    segments: tuple

    @classmethod
    def constant(cls, value):
        return cls(segments=(ScheduleSegment(0.0, float(value)),))

    @classmethod
    def steps(cls, *pares):
        return cls(segments=tuple(ScheduleSegment(float(s), float(v)) for s, v in pares))

    def value_at(self, t):
        inicios = [seg.start for seg in self.segments]
        i = bisect.bisect_right(inicios, t + _TOL_TIEMPO) - 1
        return self.segments[max(i, 0)].value

    @property
    def breakpoints(self):
        return tuple(seg.start for seg in self.segments[1:])


@dataclass(frozen=True)
class Schedules:
    sigma_env: Schedule
    explanation_quality: Schedule
    annotation_quality: Schedule
    task_rate: Schedule

    def inputs_at(self, t):
        return ExogenousInputs(
            sigma_env=self.sigma_env.value_at(t),
            explanation_quality=self.explanation_quality.value_at(t),
            annotation_quality=self.annotation_quality.value_at(t),
            task_rate=self.task_rate.value_at(t),
        )

    def items(self):
        return [(nombre, getattr(self, nombre)) for nombre in INPUTS]


# ==================== ESCENARIO ====================

@dataclass(frozen=True)
class Scenario:
    initial: StockState
    rates: RateParameters
    safety: SafetyPolicy
    proportionality: ProportionalityParams
    dq_weights: DecisionQualityWeights
    schedules: Schedules
    solver: SolverConfig
    label: str = 'scenario'

    def inputs_at(self, t):
        return self.schedules.inputs_at(t)


def validate_scenario(scenario):
    """Todas las violaciones del escenario (no lanza)"""
    violaciones = list(validate_state(scenario.initial).violations)
    violaciones += validate_parameters(scenario.rates, scenario.safety).violations
    violaciones += validate_proportionality(scenario.proportionality, scenario.dq_weights).violations
    violaciones += validate_solver(scenario.solver).violations

    horizon = scenario.solver.horizon
    for nombre, schedule in scenario.schedules.items():
        segmentos = schedule.segments
        if not segmentos:
            violaciones.append(Violation(f'{nombre} schedule', f'{nombre} schedule must not be empty'))
            continue
        if segmentos[0].start != 0:
            violaciones.append(Violation('segment times start at 0',
                                         f'{nombre}: segment times must start at 0'))
        for previo, actual in zip(segmentos, segmentos[1:]):
            if not actual.start > previo.start:
                violaciones.append(Violation('segment times must increase',
                                             f'{nombre}: segment times must increase'))
                break
        for seg in segmentos:
            if not is_finite_number(seg.start) or seg.start < 0 or seg.start > horizon:
                violaciones.append(Violation('segment times within horizon',
                                             f'{nombre}: segment times must lie in [0, horizon]'))
                break
        for seg in segmentos:
            if not is_finite_number(seg.value) or not 0.0 <= seg.value <= 1.0:
                violaciones.append(Violation(f'{nombre} ∈ [0,1]', f'{nombre} values must be in [0, 1]'))
                break

    return ValidationResult(violations=tuple(violaciones))


def ensure_valid(scenario):
    resultado = validate_scenario(scenario)
    if not resultado.ok:
        primera = resultado.violations[0]
        raise ScenarioError('; '.join(resultado.messages()), constraint=primera.constraint)
    return scenario


# ==================== ESCENARIOS INCORPORADOS ====================

def builtin_baseline():
    """
    Caso de uso de evaluación de proporcionalidad con su política de
    supervisión estricta; sigma_env sube de 0.35 a 0.70 a mitad de ventana.
    """
    return Scenario(
        initial=StockState(h=0.50, a=0.40, s=0.25, t=0.40, u=0.20, c=0.30),
        rates=RateParameters(k1=0.45, k2=0.35, k3=0.25),
        safety=SafetyPolicy(),
        proportionality=ProportionalityParams(),
        dq_weights=DecisionQualityWeights(),
        schedules=Schedules(
            sigma_env=Schedule.steps((0.0, 0.35), (0.5, 0.70)),
            explanation_quality=Schedule.constant(0.75),
            annotation_quality=Schedule.constant(0.65),
            task_rate=Schedule.constant(0.5),
        ),
        solver=SolverConfig(method=Method.RK4, dt=0.01, horizon=1.0),
        label='baseline',
    )


def builtin_volatile():
    """
    Variante donde la volatilidad degrada el canal de explicaciones: la
    confianza colapsa en el pico y la autoridad se retira con retraso.
    """
    base = builtin_baseline()
    return dataclasses.replace(
        base,
        rates=dataclasses.replace(base.rates, delta2=0.8),
        schedules=dataclasses.replace(
            base.schedules,
            sigma_env=Schedule.steps((0.0, 0.35), (0.5, 1.0)),
            explanation_quality=Schedule.steps((0.0, 0.90), (0.5, 0.0)),
        ),
        label='volatile',
    )


BUILTIN = {
    'baseline': builtin_baseline,
    'volatile': builtin_volatile,
}


def smooth_variant(scenario):
    """Mismo escenario con cada schedule fijado en su valor inicial"""
    constantes = {
        nombre: Schedule.constant(schedule.segments[0].value)
        for nombre, schedule in scenario.schedules.items()
    }
    return dataclasses.replace(scenario, schedules=Schedules(**constantes),
                               label=f'{scenario.label}-smooth')


# ==================== RUTAS CON PUNTOS ====================

def resolve_path(scenario, path):
    """Valor actual en una ruta con puntos (p.ej. 'rates.k3')"""
    partes = path.split('.')
    if partes[0] == 'label' and len(partes) == 1:
        return scenario.label
    if partes[0] == 'schedules':
        return _resolve_schedule(scenario, path, partes[1:])
    if partes[0] in BLOCKS and len(partes) == 2:
        bloque = getattr(scenario, partes[0])
        if partes[1] in _field_names(bloque):
            return getattr(bloque, partes[1])
    raise ScenarioError(f'unresolvable parameter path: {path}', constraint='parameter path')


def apply_override(scenario, path, value):
    """
    Devuelve una copia del escenario con el valor reemplazado en la ruta.

    Los valores de texto se convierten al tipo del campo destino. No valida
    el escenario resultante.
    """
    actual = resolve_path(scenario, path)
    partes = path.split('.')

    if partes[0] == 'label':
        return dataclasses.replace(scenario, label=str(value))

    if partes[0] == 'schedules':
        nombre = partes[1]
        schedule = getattr(scenario.schedules, nombre)
        if len(partes) == 2:
            nuevo = Schedule.constant(_coerce(value, 0.0, path))
        else:
            indice, campo = int(partes[2]), partes[3]
            segmentos = list(schedule.segments)
            segmentos[indice] = dataclasses.replace(segmentos[indice],
                                                    **{campo: _coerce(value, actual, path)})
            nuevo = Schedule(segments=tuple(segmentos))
        return dataclasses.replace(scenario,
                                   schedules=dataclasses.replace(scenario.schedules, **{nombre: nuevo}))

    bloque = getattr(scenario, partes[0])
    bloque = dataclasses.replace(bloque, **{partes[1]: _coerce(value, actual, path)})
    return dataclasses.replace(scenario, **{partes[0]: bloque})


def apply_overrides(scenario, overrides):
    """overrides: iterable de 'ruta=valor' o de pares (ruta, valor)"""
    for override in overrides:
        if isinstance(override, str):
            if '=' not in override:
                raise ScenarioError(f'override must look like path=value: {override}',
                                    constraint='override syntax')
            path, value = override.split('=', 1)
            override = (path.strip(), value.strip())
        scenario = apply_override(scenario, *override)
    return scenario


def _resolve_schedule(scenario, path, partes):
    if not partes or partes[0] not in INPUTS:
        raise ScenarioError(f'unresolvable parameter path: {path}', constraint='parameter path')
    schedule = getattr(scenario.schedules, partes[0])
    if len(partes) == 1:
        if len(schedule.segments) != 1:
            # schedule por tramos: se devuelve completo
            return schedule
        return schedule.segments[0].value
    if len(partes) == 3 and partes[1].isdigit() and partes[2] in ('start', 'value'):
        indice = int(partes[1])
        if indice < len(schedule.segments):
            return getattr(schedule.segments[indice], partes[2])
    raise ScenarioError(f'unresolvable parameter path: {path}', constraint='parameter path')


def _field_names(bloque):
    return {f.name for f in dataclasses.fields(bloque)}


def _coerce(value, actual, path):
    try:
        if isinstance(actual, enum.Enum):
            return type(actual)(value.value if isinstance(value, enum.Enum) else str(value))
        if isinstance(actual, str):
            return str(value)
        return float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f'invalid value for {path}: {value!r}', constraint='override value')


