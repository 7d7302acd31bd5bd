"""
Métricas, diagnóstico de polaridad de lazos, barridos, calibración por grilla
y estudio de convergencia del solver.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from errors import AnalysisError, ScenarioError, SimulationError
from integrator import Method, simulate
from models import (INPUTS, STOCKS, ExogenousInputs, GuardState, StockState, authority_drive,
                    evaluate, validate_parameters)
from proportionality import (Outcome, assess, decision_quality_series, score_trajectory)
from scenario import apply_override, ensure_valid, resolve_path

logger = logging.getLogger(__name__)

DERIVATIVES = ('dh', 'da', 'ds', 'dt_trust', 'du_raw', 'dc')
VARIABLES = STOCKS + INPUTS

# ==================== TIPOS ====================

@dataclass(frozen=True, slots=True)
class MetricSettings:
    collapse_rate: float = 0.5
    collapse_window: float = 0.05
    cost_rate: float = 1.0


@dataclass(frozen=True)
class AnalysisReport:
    positive_fraction: float
    peak_c: float
    peak_c_time: float
    min_t: float
    min_t_time: float
    trust_collapse_time: Optional[float]
    u_peak: float
    u_peak_time: float
    guard_active_fraction: float
    cumulative_compute_cost: float
    final_state: StockState
    clamp_events: int = 0
    dq_mean: Optional[float] = None
    dq_min: Optional[float] = None
    verdict: Optional[Outcome] = None

    def as_dict(self):
        datos = dataclasses.asdict(self)
        datos['verdict'] = self.verdict.value if self.verdict else None
        return datos


REPORT_FIELDS = tuple(f.name for f in dataclasses.fields(AnalysisReport))


@dataclass(frozen=True)
class RunResult:
    scenario: object
    trajectory: object
    trace: object
    verdict: object
    dq: np.ndarray
    report: AnalysisReport


@dataclass(frozen=True)
class SweepSpec:
    path: str
    values: tuple
    metric: str = 'positive_fraction'


@dataclass(frozen=True)
class SweepRow:
    value: object
    metric: object
    report: AnalysisReport


@dataclass(frozen=True, slots=True)
class FreeParameter:
    path: str
    low: float
    high: float
    points: int

    def grid(self):
        return [float(v) for v in np.linspace(self.low, self.high, self.points)]


@dataclass(frozen=True)
class CalibrationSpec:
    free: tuple
    target: float = 0.44
    tolerance: float = 0.05


@dataclass(frozen=True)
class GridPoint:
    assignment: dict
    positive_fraction: float
    error: float


@dataclass(frozen=True)
class CalibrationResult:
    best: dict
    achieved: float
    error: float
    within_tolerance: bool
    grid: list = field(default_factory=list)

    @property
    def evaluations(self):
        return len(self.grid)


@dataclass(frozen=True)
class ConvergenceResult:
    method: Method
    dts: tuple
    errors: tuple
    order: float


@dataclass(frozen=True)
class PolarityMap:
    """Sensibilidades por diferencias centrales: filas DERIVATIVES, columnas VARIABLES"""
    values: np.ndarray

    def __getitem__(self, clave):
        derivada, variable = clave
        return float(self.values[DERIVATIVES.index(derivada), VARIABLES.index(variable)])

    def sign(self, derivada, variable):
        return int(np.sign(self[derivada, variable]))

    @property
    def signs(self):
        return np.sign(self.values).astype(int)


@dataclass(frozen=True, slots=True)
class LoopCheck:
    loop: str
    passed: bool
    detail: str


# ==================== CORRIDA Y MÉTRICAS ====================

def run_scenario(scenario, settings=None):
    """Simula, puntúa y evalúa un escenario ya validado"""
    settings = settings or MetricSettings()
    trayectoria = simulate(scenario)
    traza = score_trajectory(trayectoria, scenario.schedules.sigma_env, scenario.proportionality)
    veredicto = assess(traza, scenario.proportionality)
    dq = decision_quality_series(trayectoria, scenario.dq_weights)
    reporte = metrics(trayectoria, traza, settings=settings, dq=dq, verdict=veredicto.outcome)
    return RunResult(scenario=scenario, trajectory=trayectoria, trace=traza, verdict=veredicto,
                     dq=dq, report=reporte)


def metrics(traj, trace, settings=None, dq=None, verdict=None):
    """
    Métricas escalares de una corrida.

    El colapso de confianza es el primer instante en que la tasa de T cae por
    debajo de -collapse_rate y se sostiene al menos collapse_window.
    """
    settings = settings or MetricSettings()
    if len(traj) != len(trace.times) or not np.array_equal(traj.times, trace.times):
        raise AnalysisError('trajectory and trace must share sample times')

    times = traj.times
    c = traj.stock('c')
    t = traj.stock('t')
    u = traj.stock('u')

    i_c = int(np.argmax(c))
    i_t = int(np.argmin(t))
    i_u = int(np.argmax(u))

    if len(times) > 1:
        costo = settings.cost_rate * float(np.sum((u[1:] + u[:-1]) / 2.0 * np.diff(times)))
    else:
        costo = 0.0

    return AnalysisReport(
        positive_fraction=trace.positive_fraction,
        peak_c=float(c[i_c]),
        peak_c_time=float(times[i_c]),
        min_t=float(t[i_t]),
        min_t_time=float(times[i_t]),
        trust_collapse_time=trust_collapse_time(times, t, settings),
        u_peak=float(u[i_u]),
        u_peak_time=float(times[i_u]),
        guard_active_fraction=float(np.mean(traj.guards)),
        cumulative_compute_cost=costo,
        final_state=traj.final_state,
        clamp_events=int(np.count_nonzero(traj.clamp_flags)),
        dq_mean=float(np.mean(dq)) if dq is not None else None,
        dq_min=float(np.min(dq)) if dq is not None else None,
        verdict=verdict,
    )


def trust_collapse_time(times, trust, settings):
    if len(times) < 2:
        return None
    pasos = np.diff(times)
    tasas = np.diff(trust) / pasos
    cayendo = tasas < -settings.collapse_rate

    inicio = None
    duracion = 0.0
    for i, cae in enumerate(cayendo):
        if cae:
            if inicio is None:
                inicio, duracion = i, 0.0
            duracion += pasos[i]
            if duracion >= settings.collapse_window - 1e-12:
                return float(times[inicio])
        else:
            inicio = None
    return None


# ==================== POLARIDAD DE LAZOS ====================

def _flows(vector, scenario, guard):
    estado = StockState(*vector[:6])
    entradas = ExogenousInputs(*vector[6:])
    _, d = evaluate(estado, entradas, scenario.rates, guard, scenario.safety)
    return np.array([d.dh, d.da, d.ds, d.dt_trust,
                     authority_drive(estado, entradas, scenario.rates), d.dc])


def polarity_map(scenario, state=None, step=1e-6, t=0.0):
    """
    Matriz de sensibilidades de cada flujo respecto de cada stock y entrada,
    por diferencias centrales con la guarda B3 inactiva.

    Args:
        scenario (Scenario): parámetros y schedules
        state (StockState): punto de evaluación (por defecto el inicial)
        step (float): paso de diferencias finitas
        t (float): instante en el que se muestrean las entradas

    Returns:
        PolarityMap
    """
    state = state or scenario.initial
    entradas = scenario.inputs_at(t)
    x0 = np.array([getattr(state, n) for n in STOCKS] + [getattr(entradas, n) for n in INPUTS])

    if not step > 0 or np.any(x0 + step == x0):
        raise AnalysisError('finite-difference step underflow')
    if np.any(x0 - step < 0.0) or np.any(x0 + step > 1.0):
        raise AnalysisError('polarity map requires an interior state')

    guard = GuardState()
    valores = np.empty((len(DERIVATIVES), len(VARIABLES)))
    for j in range(len(VARIABLES)):
        arriba, abajo = x0.copy(), x0.copy()
        arriba[j] += step
        abajo[j] -= step
        valores[:, j] = (_flows(arriba, scenario, guard) - _flows(abajo, scenario, guard)) / (2.0 * step)
    return PolarityMap(values=valores)


def loop_checks(scenario, state=None, step=1e-6):
    """
    Verifica la polaridad de R1, B1, B2, R2 y B3 en un estado interior,
    más la validez de los parámetros.
    """
    state = state or scenario.initial
    pm = polarity_map(scenario, state, step=step)
    rates, policy = scenario.rates, scenario.safety
    chequeos = []

    def agregar(loop, condiciones):
        fallas = [texto for texto, ok in condiciones if not ok]
        detalle = '; '.join(fallas) if fallas else ', '.join(texto for texto, _ in condiciones)
        chequeos.append(LoopCheck(loop=loop, passed=not fallas, detail=detalle))

    agregar('R1', [
        ('+explanation_quality → dh', pm['dh', 'explanation_quality'] > 0),
        ('+explanation_quality → ds', pm['ds', 'explanation_quality'] > 0),
        ('+explanation_quality → dt_trust', pm['dt_trust', 'explanation_quality'] > 0),
    ])
    agregar('B1', [
        ('-sigma_env → du_raw', pm['du_raw', 'sigma_env'] < 0),
        ('-sigma_env → da', pm['da', 'sigma_env'] < 0),
    ])

    # B2: la pendiente de dc en u debe crecer al pasar u_ref (carga de supervisión)
    u_alto = min(max(state.u, rates.u_ref + 0.1), 1.0 - 2 * step)
    u_bajo = max(min(state.u, rates.u_ref - 0.1), 2 * step)
    pm_alto = polarity_map(scenario, dataclasses.replace(state, u=u_alto), step=step)
    pm_bajo = polarity_map(scenario, dataclasses.replace(state, u=u_bajo), step=step)
    carga = pm_alto['dc', 'u'] - pm_bajo['dc', 'u']
    extremo = StockState(h=state.h, a=state.a, s=1.0, t=1.0, u=state.u, c=state.c)
    entradas_calmas = dataclasses.replace(scenario.inputs_at(0.0), sigma_env=0.0)
    _, d_extremo = evaluate(extremo, entradas_calmas, rates, GuardState(), policy)
    agregar('B2', [
        ('+u beyond u_ref → dc', pm_alto['dc', 'u'] > 0),
        ('supervisory load beyond u_ref', carga > 1e-6),
        ('|du| ≤ u_slew', abs(d_extremo.du) <= rates.u_slew),
        ('opacity penalizes trust', pm['dt_trust', 'explanation_quality'] > 0),
    ])
    agregar('R2', [
        ('+u → da', pm['da', 'u'] > 0),
        ('+t → du_raw', pm['du_raw', 't'] > 0),
        ('+a → dt_trust', pm['dt_trust', 'a'] > 0),
    ])

    entradas = scenario.inputs_at(0.0)
    aux_b3, d_b3 = evaluate(state, entradas, rates, GuardState(b3_active=True), policy)
    agregar('B3', [
        ('guard forces du ≤ -r_safe', d_b3.du <= -policy.r_safe + 1e-12),
        ('guard suppresses TR', aux_b3.tr_eff == policy.rho_suppress * entradas.task_rate
         and (aux_b3.tr_eff < entradas.task_rate or entradas.task_rate == 0)),
    ])

    validacion = validate_parameters(rates, policy)
    chequeos.append(LoopCheck(
        loop='parameters',
        passed=validacion.ok,
        detail='; '.join(validacion.messages()) if not validacion.ok else 'all constraints hold',
    ))
    return chequeos


# ==================== BARRIDOS Y CALIBRACIÓN ====================

def _evaluar(args):
    scenario, settings = args
    return run_scenario(scenario, settings).report


def _evaluate_many(escenarios, settings, workers=1):
    """Evalúa en orden; con workers > 1 reparte en procesos sin alterar el orden"""
    tareas = [(esc, settings) for esc in escenarios]
    if workers > 1 and len(tareas) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_evaluar, tareas))
    return [_evaluar(tarea) for tarea in tareas]


def sweep(scenario, spec, settings=None, workers=1):
    """
    Una fila por valor, en el orden dado.

    Raises:
        ScenarioError: ruta no resoluble o escenario inválido tras el reemplazo
    """
    if not spec.values:
        raise AnalysisError('sweep requires at least one value')
    if spec.metric not in REPORT_FIELDS:
        raise AnalysisError(f'unknown metric: {spec.metric}')
    resolve_path(scenario, spec.path)
    escenarios = [ensure_valid(apply_override(scenario, spec.path, v)) for v in spec.values]
    reportes = _evaluate_many(escenarios, settings or MetricSettings(), workers)
    return [SweepRow(value=v, metric=getattr(r, spec.metric), report=r)
            for v, r in zip(spec.values, reportes)]


def validate_calibration(scenario, spec, max_evaluations=1_000_000):
    if not spec.free:
        raise ScenarioError('calibration needs at least one free parameter', constraint='free parameters')
    total = 1
    for libre in spec.free:
        resolve_path(scenario, libre.path)
        if not (math.isfinite(libre.low) and math.isfinite(libre.high)) or libre.high <= libre.low:
            raise ScenarioError(f'{libre.path}: range must be non-empty', constraint='range non-empty')
        if libre.points < 2:
            raise ScenarioError(f'{libre.path}: resolution must be ≥ 2', constraint='resolution ≥ 2')
        total *= libre.points
    if total > max_evaluations:
        raise ScenarioError(f'grid of {total} points exceeds {max_evaluations} evaluations',
                            constraint='grid size')
    return total


def calibrate(scenario, spec, settings=None, workers=1, max_evaluations=1_000_000):
    """
    Búsqueda exhaustiva en grilla minimizando |positive_fraction - target|.

    Empates: gana el primer punto en orden lexicográfico de la grilla.
    """
    total = validate_calibration(scenario, spec, max_evaluations)
    rutas = [libre.path for libre in spec.free]
    asignaciones = [dict(zip(rutas, combinacion))
                    for combinacion in itertools.product(*(libre.grid() for libre in spec.free))]
    logger.info('Calibrando %d puntos sobre %s', total, ', '.join(rutas))

    validos, escenarios = [], []
    for i, asignacion in enumerate(asignaciones):
        candidato = scenario
        for ruta, valor in asignacion.items():
            candidato = apply_override(candidato, ruta, valor)
        try:
            escenarios.append(ensure_valid(candidato))
            validos.append(i)
        except ScenarioError as e:
            logger.debug('Punto %s descartado: %s', asignacion, e)

    reportes = dict(zip(validos, _evaluate_many(escenarios, settings or MetricSettings(), workers)))

    grilla = []
    mejor = None
    for i, asignacion in enumerate(asignaciones):
        if i in reportes:
            fraccion = reportes[i].positive_fraction
            error = abs(fraccion - spec.target)
        else:
            fraccion, error = math.nan, math.inf
        punto = GridPoint(assignment=asignacion, positive_fraction=fraccion, error=error)
        grilla.append(punto)
        if mejor is None or error < mejor.error:
            mejor = punto

    return CalibrationResult(
        best=dict(mejor.assignment),
        achieved=mejor.positive_fraction,
        error=mejor.error,
        within_tolerance=mejor.error <= spec.tolerance,
        grid=grilla,
    )


# ==================== CONVERGENCIA ====================

_PISO_REDONDEO = 100.0


def convergence_study(scenario, dts, methods=(Method.EULER, Method.RK4), reference_dt=None,
                      refinement=8):
    """
    Orden observado de cada método: pendiente log-log del error en norma
    máximo frente a una referencia RK4 fina.

    Requiere un escenario sin guarda, sin proyecciones y con schedules sin
    cortes dentro de la ventana.
    """
    dts = tuple(float(dt) for dt in dts)
    if len(set(dts)) != len(dts):
        raise AnalysisError('distinct step sizes required')
    if len(dts) < 3:
        raise AnalysisError('at least three step sizes required')
    horizon = scenario.solver.horizon
    for nombre, schedule in scenario.schedules.items():
        if any(0.0 < b < horizon for b in schedule.breakpoints):
            raise AnalysisError(f'{nombre} schedule breaks inside the window; order undefined')

    dt_ref = reference_dt or min(dts) / refinement
    referencia = _corrida_suave(scenario, Method.RK4, dt_ref)
    # por debajo de este error la diferencia es redondeo y la pendiente no dice nada
    piso = _PISO_REDONDEO * np.finfo(float).eps * max(1.0, float(np.max(np.abs(referencia.states))))

    resultados = []
    for metodo in methods:
        errores = []
        for dt in dts:
            razon = dt / dt_ref
            if abs(razon - round(razon)) > 1e-6:
                raise AnalysisError(f'dt={dt} is not a multiple of the reference step {dt_ref}')
            trayectoria = _corrida_suave(scenario, metodo, dt)
            muestras = referencia.states[::int(round(razon))]
            errores.append(float(np.max(np.abs(trayectoria.states - muestras))))
        if min(errores) <= piso:
            raise AnalysisError('error at round-off floor; order undefined')
        orden = float(np.polyfit(np.log(dts), np.log(errores), 1)[0])
        resultados.append(ConvergenceResult(method=metodo, dts=dts, errors=tuple(errores), order=orden))
    return resultados


def _corrida_suave(scenario, metodo, dt):
    solver = dataclasses.replace(scenario.solver, method=metodo, dt=dt)
    try:
        trayectoria = simulate(dataclasses.replace(scenario, solver=solver))
    except SimulationError as e:
        raise AnalysisError(f'reference run failed: {e}') from e
    if np.any(trayectoria.guards):
        raise AnalysisError('guard activation detected; order undefined across discontinuities')
    if np.any(trayectoria.clamp_flags):
        raise AnalysisError('clamp activity detected; order undefined across projections')
    return trayectoria
