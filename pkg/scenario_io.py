"""
Lectura/escritura de escenarios (texto clave-valor anidado, YAML) y
exportación CSV de trayectorias.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import io
from pathlib import Path

import yaml

from errors import ScenarioError
from integrator import SolverConfig
from models import AUXILIARIES, INPUTS, RateParameters, SafetyPolicy, StockState
from proportionality import DecisionQualityWeights, ProportionalityParams
from scenario import BUILTIN, Schedule, ScheduleSegment, Scenario, builtin_baseline, ensure_valid

HEADER = (
    '# Co-learning scenario\n'
    '# time unit: normalized mission window (horizon 1.0 = one planning window)\n'
    '# rates: per-window gains; stocks and inputs: dimensionless in [0, 1]\n'
)

CSV_COLUMNS = ('time', 'H', 'A', 'S', 'T', 'U', 'C', 'F_HA', 'F_AH', 'F_sync', 'delta_obs', 'PG',
               'opacity', 'TR_eff', 'guard', 'MA', 'CD', 'score', 'DQ')

# columnas auxiliares exportadas, en el orden de AUXILIARIES
_AUX_EXPORT = ('f_ha', 'f_ah', 'f_sync', 'delta_obs', 'pg', 'opacity', 'tr_eff')

_BLOCK_TYPES = {
    'initial': StockState,
    'rates': RateParameters,
    'safety': SafetyPolicy,
    'proportionality': ProportionalityParams,
    'dq_weights': DecisionQualityWeights,
    'solver': SolverConfig,
}
_TOP_KEYS = ('label',) + tuple(_BLOCK_TYPES) + ('schedules',)


# ==================== LECTURA ====================

def parse_scenario(text):
    """
    Interpreta el texto de un escenario y lo valida por completo.

    Los bloques o claves ausentes toman los valores del escenario base; las
    claves desconocidas se rechazan.

    Raises:
        ScenarioError: error de sintaxis (con línea) o restricción violada
    """
    try:
        datos = yaml.safe_load(text)
    except yaml.YAMLError as e:
        marca = getattr(e, 'problem_mark', None)
        linea = marca.line + 1 if marca is not None else None
        problema = getattr(e, 'problem', None) or str(e)
        raise ScenarioError(f'syntax error: {problema}', constraint='syntax', line=linea) from e

    if datos is None:
        datos = {}
    if not isinstance(datos, dict):
        raise ScenarioError('scenario must be a mapping of blocks', constraint='syntax')

    desconocidas = [str(k) for k in datos if k not in _TOP_KEYS]
    if desconocidas:
        raise ScenarioError(f'unknown key: {desconocidas[0]}', constraint='unknown key')

    base = builtin_baseline()
    bloques = {}
    for nombre, tipo in _BLOCK_TYPES.items():
        bloques[nombre] = _parse_block(nombre, tipo, datos.get(nombre), getattr(base, nombre))

    label = datos.get('label')
    if label is None:
        label = 'scenario'
    elif not isinstance(label, str):
        label = str(label)

    escenario = Scenario(
        schedules=_parse_schedules(datos.get('schedules'), base.schedules),
        label=label,
        **bloques,
    )
    return ensure_valid(escenario)


def load_scenario(ref):
    """Nombre reservado ('baseline', 'volatile') o ruta a un archivo"""
    if ref in BUILTIN:
        return BUILTIN[ref]()
    ruta = Path(ref)
    try:
        texto = ruta.read_text(encoding='utf-8')
    except FileNotFoundError:
        raise ScenarioError(f'scenario file not found: {ref}', constraint='file')
    except (OSError, UnicodeDecodeError) as e:
        raise ScenarioError(f'cannot read scenario {ref}: {e}', constraint='file')
    return parse_scenario(texto)


def _parse_block(nombre, tipo, valores, defecto):
    if valores is None:
        return defecto
    if not isinstance(valores, dict):
        raise ScenarioError(f'{nombre} must be a mapping', constraint='syntax')

    campos = {f.name: f for f in dataclasses.fields(tipo)}
    cambios = {}
    for clave, valor in valores.items():
        if clave not in campos:
            raise ScenarioError(f'unknown key: {nombre}.{clave}', constraint='unknown key')
        actual = getattr(defecto, clave)
        if isinstance(actual, enum.Enum):
            try:
                cambios[clave] = type(actual)(str(valor))
            except ValueError:
                opciones = ' | '.join(m.value for m in type(actual))
                raise ScenarioError(f'{nombre}.{clave} must be one of {opciones}', constraint=clave)
        else:
            cambios[clave] = _number(valor, f'{nombre}.{clave}')
    return dataclasses.replace(defecto, **cambios)


def _parse_schedules(valores, defecto):
    if valores is None:
        return defecto
    if not isinstance(valores, dict):
        raise ScenarioError('schedules must be a mapping', constraint='syntax')

    cambios = {}
    for nombre, segmentos in valores.items():
        if nombre not in INPUTS:
            raise ScenarioError(f'unknown key: schedules.{nombre}', constraint='unknown key')
        if isinstance(segmentos, (int, float)) and not isinstance(segmentos, bool):
            cambios[nombre] = Schedule.constant(float(segmentos))
            continue
        if not isinstance(segmentos, list):
            raise ScenarioError(f'schedules.{nombre} must be a list of segments', constraint='syntax')
        lista = []
        for seg in segmentos:
            if not isinstance(seg, dict) or set(seg) != {'start', 'value'}:
                raise ScenarioError(f'schedules.{nombre}: each segment needs exactly start and value',
                                    constraint='syntax')
            lista.append(ScheduleSegment(start=_number(seg['start'], f'schedules.{nombre}.start'),
                                         value=_number(seg['value'], f'schedules.{nombre}.value')))
        cambios[nombre] = Schedule(segments=tuple(lista))
    return dataclasses.replace(defecto, **cambios)


def _number(valor, ruta):
    if isinstance(valor, bool) or not isinstance(valor, (int, float)):
        raise ScenarioError(f'{ruta} must be a number', constraint='number')
    return float(valor)


# ==================== ESCRITURA ====================

class _FlowMap(dict):
    pass


class _Dumper(yaml.SafeDumper):
    pass


_Dumper.add_representer(
    _FlowMap,
    lambda dumper, data: dumper.represent_mapping('tag:yaml.org,2002:map', data, flow_style=True),
)


def write_scenario(scenario):
    """Forma canónica: todos los valores explícitos, orden fijo de claves"""
    datos = {'label': scenario.label}
    for nombre in _BLOCK_TYPES:
        bloque = getattr(scenario, nombre)
        datos[nombre] = {
            f.name: _canonical(getattr(bloque, f.name)) for f in dataclasses.fields(bloque)
        }
    datos['schedules'] = {
        nombre: [_FlowMap(start=float(seg.start), value=float(seg.value)) for seg in schedule.segments]
        for nombre, schedule in scenario.schedules.items()
    }
    cuerpo = yaml.dump(datos, Dumper=_Dumper, sort_keys=False, default_flow_style=False,
                       allow_unicode=True)
    return HEADER + cuerpo


def _canonical(valor):
    if isinstance(valor, enum.Enum):
        return valor.value
    return float(valor)


# ==================== CSV ====================

def write_trajectory_csv(traj, trace, dq_series, digits=9):
    """
    Una fila por muestra; tiempo con 9 decimales fijos, el resto con `digits`
    cifras significativas y la guarda como 0/1.
    """
    if not (len(traj) == len(trace.score) == len(dq_series)):
        raise ValueError('trajectory, trace and DQ series must be aligned')

    formato = f'.{digits}g'
    indices_aux = [AUXILIARIES.index(nombre) for nombre in _AUX_EXPORT]

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(CSV_COLUMNS)
    for i in range(len(traj)):
        fila = [f'{traj.times[i]:.9f}']
        fila += [format(float(v), formato) for v in traj.states[i]]
        fila += [format(float(traj.aux[i, j]), formato) for j in indices_aux]
        fila.append('1' if traj.guards[i] else '0')
        fila += [format(float(trace.ma[i]), formato), format(float(trace.cd[i]), formato),
                 format(float(trace.score[i]), formato), format(float(dq_series[i]), formato)]
        writer.writerow(fila)
    return buffer.getvalue()
