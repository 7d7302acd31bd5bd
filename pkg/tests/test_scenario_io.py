import csv
import io
from pathlib import Path

import numpy as np
import pytest

from analysis import run_scenario
from errors import ScenarioError
from integrator import Method, SolverConfig
from models import PGMode, RateParameters, SafetyPolicy, StockState
from proportionality import DecisionQualityWeights, ProportionalityParams
from scenario import Schedule, Schedules, Scenario, builtin_baseline, builtin_volatile
from scenario_io import CSV_COLUMNS, load_scenario, parse_scenario, write_scenario, write_trajectory_csv

SCENARIOS = Path(__file__).resolve().parents[1] / 'scenarios'


def _escenario_aleatorio(rng, i):
    return Scenario(
        initial=StockState(*rng.uniform(0.0, 1.0, 6)),
        rates=RateParameters(**{n: rng.uniform(0.0, 1.0) for n in RateParameters.GAINS},
                             u_ref=rng.uniform(), u_slew=rng.uniform(0.5, 1.5),
                             pg_mode=PGMode.LITERAL if i % 2 else PGMode.EXPECTATION_WEIGHTED),
        safety=SafetyPolicy(c_safe=rng.uniform(0.5, 1.0), hysteresis=rng.uniform(0.01, 0.2),
                            r_safe=rng.uniform(0.05, 0.4), rho_suppress=rng.uniform(0.0, 0.9)),
        proportionality=ProportionalityParams(c0=rng.uniform(0.0, 0.5),
                                              legal_threshold=rng.uniform(0.1, 1.0)),
        dq_weights=DecisionQualityWeights(w_c=rng.uniform()),
        schedules=Schedules(
            sigma_env=Schedule.steps((0.0, rng.uniform()), (rng.uniform(0.1, 0.5), rng.uniform()),
                                     (rng.uniform(0.6, 0.9), rng.uniform())),
            explanation_quality=Schedule.constant(rng.uniform()),
            annotation_quality=Schedule.steps((0.0, rng.uniform()), (0.25, rng.uniform())),
            task_rate=Schedule.constant(rng.uniform()),
        ),
        solver=SolverConfig(method=Method.EULER if i % 3 else Method.RK4, dt=0.02, horizon=1.0),
        label=f'generated-{i}',
    )


# ==================== ESCENARIOS ====================

def test_builtin_round_trip():
    for escenario in (builtin_baseline(), builtin_volatile()):
        assert parse_scenario(write_scenario(escenario)) == escenario


def test_generated_round_trip():
    rng = np.random.default_rng(5)
    for i in range(50):
        escenario = _escenario_aleatorio(rng, i)
        texto = write_scenario(escenario)
        assert parse_scenario(texto) == escenario
        assert write_scenario(parse_scenario(texto)) == texto


def test_written_text_is_commented_and_ordered(baseline):
    texto = write_scenario(baseline)
    assert texto.startswith('# ')
    assert 'time unit' in texto
    claves = [linea.split(':')[0] for linea in texto.splitlines() if linea and linea[0].isalpha()]
    assert claves == ['label', 'initial', 'rates', 'safety', 'proportionality', 'dq_weights',
                      'solver', 'schedules']


def test_shipped_files_match_builtins():
    assert load_scenario(str(SCENARIOS / 'baseline.scn')) == builtin_baseline()
    assert load_scenario(str(SCENARIOS / 'volatile.scn')) == builtin_volatile()


def test_reserved_names():
    assert load_scenario('baseline') == builtin_baseline()
    assert load_scenario('volatile').label == 'volatile'


def test_missing_blocks_take_baseline_values():
    escenario = parse_scenario('label: tiny\nrates:\n  k3: 0.1\nschedules:\n  task_rate: 0.6\n')
    assert escenario.label == 'tiny'
    assert escenario.rates.k3 == 0.1
    assert escenario.rates.k1 == 0.45
    assert escenario.schedules.task_rate == Schedule.constant(0.6)
    assert escenario.schedules.sigma_env == builtin_baseline().schedules.sigma_env


@pytest.mark.parametrize('texto', ['label:\nrates:\n  k3: 0.1\n', 'rates:\n  k3: 0.1\n'])
def test_empty_label_falls_back_to_default(texto):
    assert parse_scenario(texto).label == 'scenario'


def test_syntax_error_reports_line():
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario('label: x\ninitial:\n  h: [0.5\n  a: 0.4\n')
    assert excinfo.value.line is not None
    assert str(excinfo.value).startswith('line ')


@pytest.mark.parametrize('texto, mensaje', [
    ('rates:\n  k9: 0.1\n', 'unknown key: rates.k9'),
    ('weather: 1\n', 'unknown key: weather'),
    ('initial:\n  h: 1.5\n', 'h must be in [0, 1]'),
    ('initial:\n  h: high\n', 'initial.h must be a number'),
    ('solver:\n  method: midpoint\n', 'solver.method must be one of'),
    ('solver:\n  dt: 0.03\n', 'horizon must be an integer multiple of dt'),
    ('schedules:\n  sigma_env:\n  - {start: 0.2, value: 0.3}\n', 'segment times must start at 0'),
    ('schedules:\n  sigma_env:\n  - {start: 0.0}\n', 'exactly start and value'),
    ('- 1\n- 2\n', 'mapping'),
])
def test_parse_errors(texto, mensaje):
    with pytest.raises(ScenarioError) as excinfo:
        parse_scenario(texto)
    assert mensaje in str(excinfo.value)


def test_missing_file():
    with pytest.raises(ScenarioError, match='not found'):
        load_scenario('missing.scn')


# ==================== CSV ====================

def _csv(escenario):
    resultado = run_scenario(escenario)
    return resultado, write_trajectory_csv(resultado.trajectory, resultado.trace, resultado.dq)


def test_trajectory_csv_layout(baseline):
    resultado, texto = _csv(baseline)
    lineas = texto.splitlines()
    assert len(lineas) == 102
    filas = list(csv.reader(io.StringIO(texto)))
    assert tuple(filas[0]) == CSV_COLUMNS
    assert filas[1][0] == '0.000000000'
    assert filas[-1][0] == '1.000000000'
    assert {fila[CSV_COLUMNS.index('guard')] for fila in filas[1:]} == {'0'}


def test_trajectory_csv_values_reparse(baseline):
    resultado, texto = _csv(baseline)
    filas = list(csv.DictReader(io.StringIO(texto)))
    traj = resultado.trajectory
    for i, fila in enumerate(filas):
        for j, columna in enumerate(('H', 'A', 'S', 'T', 'U', 'C')):
            assert float(fila[columna]) == pytest.approx(traj.states[i, j], rel=1e-8, abs=1e-12)
        assert float(fila['score']) == pytest.approx(resultado.trace.score[i], rel=1e-8, abs=1e-12)
        assert float(fila['DQ']) == pytest.approx(resultado.dq[i], rel=1e-8)
        assert float(fila['TR_eff']) == pytest.approx(traj.auxiliary('tr_eff')[i], rel=1e-8)


def test_trajectory_csv_is_deterministic(baseline):
    assert _csv(baseline)[1] == _csv(baseline)[1]


def test_trajectory_csv_rejects_misaligned_series(baseline):
    resultado = run_scenario(baseline)
    with pytest.raises(ValueError):
        write_trajectory_csv(resultado.trajectory, resultado.trace, resultado.dq[:-1])
