"""
Integración de paso fijo del sistema híbrido (flujos continuos + guarda B3,
límite de pendiente y proyección sobre [0, 1]).
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np

from errors import ScenarioError, SimulationError
from models import (AUXILIARIES, STOCKS, GuardState, StockState, ValidationResult, Violation,
                    clamp_state, evaluate, update_guard)

logger = logging.getLogger(__name__)

MAX_STEPS = 100_000_000
# tolerancia para decidir que el horizonte es múltiplo de dt
_TOL_PASOS = 1e-9

# ==================== ENUMS ====================

class Method(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"


# ==================== TIPOS ====================

@dataclass(frozen=True, slots=True)
class SolverConfig:
    method: Method = Method.RK4
    dt: float = 0.01
    horizon: float = 1.0

    @property
    def n_steps(self):
        if self.horizon == 0:
            return 0
        return int(round(self.horizon / self.dt))


def validate_solver(config):
    violaciones = []
    if not isinstance(config.method, Method):
        violaciones.append(Violation('method', 'method must be euler or rk4'))
    dt, horizon = config.dt, config.horizon
    if not (isinstance(horizon, (int, float)) and math.isfinite(horizon)) or horizon < 0:
        violaciones.append(Violation('horizon ≥ 0', 'horizon must be ≥ 0'))
    elif not (isinstance(dt, (int, float)) and math.isfinite(dt)) or dt <= 0:
        violaciones.append(Violation('dt > 0', 'dt must be > 0'))
    elif horizon > 0:
        if dt > horizon:
            violaciones.append(Violation('dt ≤ horizon', 'dt must be ≤ horizon'))
        else:
            pasos = horizon / dt
            if pasos > MAX_STEPS:
                violaciones.append(Violation('horizon/dt', 'horizon/dt exceeds the step counter'))
            elif abs(pasos - round(pasos)) > _TOL_PASOS * max(1.0, pasos):
                violaciones.append(Violation('horizon/dt integer',
                                             'horizon must be an integer multiple of dt'))
    return ValidationResult(violations=tuple(violaciones))


@dataclass(frozen=True)
class Trajectory:
    """
    Registro temporal de una simulación.

    states: (n, 6) en el orden de STOCKS; aux: (n, 8) en el orden de AUXILIARIES;
    guards: (n,) bool; clamp_flags: (n, 6) bool.
    """
    times: np.ndarray
    states: np.ndarray
    aux: np.ndarray
    guards: np.ndarray
    clamp_flags: np.ndarray

    def __len__(self):
        return len(self.times)

    def stock(self, nombre):
        return self.states[:, STOCKS.index(nombre)]

    def auxiliary(self, nombre):
        return self.aux[:, AUXILIARIES.index(nombre)]

    def state_at(self, i):
        return StockState.from_array(self.states[i])

    @property
    def final_state(self):
        return self.state_at(-1)

    def take(self, indices):
        indices = np.asarray(indices, dtype=int)
        return Trajectory(
            times=self.times[indices],
            states=self.states[indices],
            aux=self.aux[indices],
            guards=self.guards[indices],
            clamp_flags=self.clamp_flags[indices],
        )


# ==================== INTEGRACIÓN ====================

def _rate(y, tau, guard, scenario):
    estado = StockState.from_array(y)
    _, derivadas = evaluate(estado, scenario.inputs_at(tau), scenario.rates, guard, scenario.safety)
    k = derivadas.as_array()
    if not np.all(np.isfinite(k)):
        raise SimulationError('non-finite derivative (parameter blow-up)', time=tau)
    return k


def _advance(state, guard, t, scenario, config):
    """Un paso; devuelve (ClampResult, guarda usada durante el paso)"""
    guard = update_guard(state, guard, scenario.safety)
    dt = config.dt
    y = state.as_array()

    if config.method is Method.EULER:
        y_nuevo = y + dt * _rate(y, t, guard, scenario)
    else:
        k1 = _rate(y, t, guard, scenario)
        k2 = _rate(y + 0.5 * dt * k1, t + 0.5 * dt, guard, scenario)
        k3 = _rate(y + 0.5 * dt * k2, t + 0.5 * dt, guard, scenario)
        k4 = _rate(y + dt * k3, t + dt, guard, scenario)
        y_nuevo = y + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0

    if not np.all(np.isfinite(y_nuevo)):
        raise SimulationError('non-finite state (parameter blow-up)', time=t)

    resultado = clamp_state(StockState.from_array(y_nuevo))
    if resultado.clamped:
        logger.debug('t=%.4f: proyección sobre [0,1] en %s', t + dt, ', '.join(resultado.clamped))
    return resultado, guard


def step(state, guard, t, scenario, config):
    """
    Avanza el sistema sobre [t, t+dt].

    La guarda se evalúa sobre el estado previo al paso y queda fija dentro de
    él; las entradas exógenas se muestrean en el tiempo de cada etapa.

    Returns:
        tuple: (StockState, GuardState)
    """
    resultado, guard = _advance(state, guard, t, scenario, config)
    return resultado.state, guard


def simulate(scenario):
    """
    Simula el escenario desde t=0 hasta el horizonte (inclusive).

    Returns:
        Trajectory con horizon/dt + 1 muestras
    """
    config = scenario.solver
    chequeo = validate_solver(config)
    if not chequeo.ok:
        raise ScenarioError('; '.join(chequeo.messages()), constraint=chequeo.violations[0].constraint)

    n = config.n_steps + 1
    times = np.arange(n, dtype=float) * config.dt
    states = np.empty((n, len(STOCKS)))
    aux = np.empty((n, len(AUXILIARIES)))
    guards = np.zeros(n, dtype=bool)
    clamp_flags = np.zeros((n, len(STOCKS)), dtype=bool)

    estado = scenario.initial
    guard = GuardState()
    for i in range(n):
        t = float(times[i])
        if i < n - 1:
            resultado, guard = _advance(estado, guard, t, scenario, config)
        else:
            guard = update_guard(estado, guard, scenario.safety)

        valores, _ = evaluate(estado, scenario.inputs_at(t), scenario.rates, guard, scenario.safety)
        states[i] = estado.as_array()
        aux[i] = valores.as_tuple()
        guards[i] = guard.b3_active

        if i < n - 1:
            estado = resultado.state
            clamp_flags[i + 1] = resultado.flags

    logger.debug('Simulación %s: %d muestras, método %s', scenario.label, n, config.method.value)
    return Trajectory(times=times, states=states, aux=aux, guards=guards, clamp_flags=clamp_flags)


def resample(trajectory, n):
    """
    Diezma la trayectoria a n muestras equiespaciadas conservando extremos.
    """
    if n < 2:
        raise ValueError('n must be ≥ 2')
    total = len(trajectory)
    if n >= total:
        return trajectory
    indices = np.unique(np.round(np.linspace(0, total - 1, n)).astype(int))
    return trajectory.take(indices)
