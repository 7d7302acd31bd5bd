import csv
import dataclasses
import io
import json
import logging
from functools import wraps
from pathlib import Path

import click
import yaml
from flask import Flask, current_app
from flask.cli import AppGroup, ScriptInfo

from analysis import (REPORT_FIELDS, CalibrationSpec, FreeParameter, MetricSettings, SweepSpec,
                      calibrate, convergence_study, loop_checks, run_scenario, sweep)
from charts import emit_chart_svg
from config import Config
from errors import AnalysisError, ScenarioError, SimulationError
from integrator import Method
from models_archive import (CalibrationPoint, SimulationRun, SweepRowRecord, TipoComando,
                            archivar_corrida, db)
from scenario import apply_overrides, ensure_valid, smooth_variant
from scenario_io import load_scenario, write_scenario, write_trajectory_csv

app = Flask(__name__)
app.config.from_object(Config)

db.init_app(app)

logging.basicConfig(level=app.config['LOG_LEVEL'],
                    format='%(asctime)s %(levelname)s %(name)s: %(message)s')
app.logger.setLevel(app.config['LOG_LEVEL'])

sim = AppGroup('sim', help='Simulador de co-aprendizaje humano-IA')

# Grilla de calibración por defecto: instante del pico de volatilidad y c0
CALIBRACION_DEFECTO = (
    FreeParameter('schedules.sigma_env.1.start', 0.3, 0.6, 13),
    FreeParameter('proportionality.c0', 0.2, 0.35, 4),
)

# ==================== DECORADORES ====================

def codigos_salida(f):
    """Traduce los errores del simulador a códigos de salida (2 escenario, 1 ejecución)"""
    @wraps(f)
    def decorated_function(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return f(*args, **kwargs)
        except ScenarioError as e:
            click.echo(f'❌ Escenario inválido: {e}', err=True)
            ctx.exit(2)
        except (SimulationError, AnalysisError) as e:
            current_app.logger.error('Falla en %s: %s', ctx.info_name, e)
            click.echo(f'❌ {e}', err=True)
            ctx.exit(1)
    return decorated_function


def opciones_escenario(f):
    """Opciones comunes: overrides, paso, método y directorio de salida"""
    f = click.option('--out', 'out', type=click.Path(file_okay=False),
                     help='Directorio de salida')(f)
    f = click.option('--method', type=click.Choice([m.value for m in Method]),
                     help='Método de integración')(f)
    f = click.option('--dt', type=float, help='Paso de integración')(f)
    f = click.option('--set', 'overrides', multiple=True, metavar='PATH=VALUE',
                     help='Reemplaza un parámetro (repetible)')(f)
    return f

# ==================== UTILIDADES ====================

def preparar_escenario(referencia, overrides=(), dt=None, method=None):
    """Carga, aplica overrides y ajustes de solver, y valida"""
    escenario = load_scenario(referencia)
    escenario = apply_overrides(escenario, overrides)
    cambios = {}
    if dt is not None:
        cambios['dt'] = dt
    if method is not None:
        cambios['method'] = Method(method)
    if cambios:
        escenario = dataclasses.replace(escenario,
                                        solver=dataclasses.replace(escenario.solver, **cambios))
    return ensure_valid(escenario)


def metric_settings():
    cfg = current_app.config
    return MetricSettings(collapse_rate=cfg['COLLAPSE_RATE'], collapse_window=cfg['COLLAPSE_WINDOW'],
                          cost_rate=cfg['COST_RATE'])


def directorio_salida(out):
    ruta = Path(out or current_app.config['OUTPUT_DIR'])
    ruta.mkdir(parents=True, exist_ok=True)
    return ruta


def formatear(valor):
    if valor is None:
        return 'none'
    if isinstance(valor, float):
        return format(valor, '.9g')
    return str(getattr(valor, 'value', valor))


def resumen_texto(resultado):
    """Resumen legible de una corrida; incluye la línea del veredicto"""
    reporte = resultado.report
    lineas = [f'scenario: {resultado.scenario.label}']
    for campo in REPORT_FIELDS:
        if campo == 'final_state':
            estado = ' '.join(f'{k}={formatear(v)}'
                              for k, v in dataclasses.asdict(reporte.final_state).items())
            lineas.append(f'final_state: {estado}')
        else:
            lineas.append(f'{campo}: {formatear(getattr(reporte, campo))}')
    veredicto = resultado.verdict
    lineas.append(f'legal verdict: {veredicto.outcome.value} '
                  f'(positive fraction {veredicto.positive_fraction:.4f}, threshold {veredicto.threshold:g})')
    return '\n'.join(lineas) + '\n'


def archivar(comando, escenario, **kwargs):
    if not current_app.config['ARCHIVE_RUNS']:
        return None
    corrida = archivar_corrida(comando, write_scenario(escenario), escenario.label, **kwargs)
    current_app.logger.info('Corrida archivada: %r', corrida)
    return corrida


def parse_free(texto):
    """'ruta=lo:hi:n' → FreeParameter"""
    try:
        ruta, rango = texto.split('=', 1)
        lo, hi, n = rango.split(':')
        return FreeParameter(ruta.strip(), float(lo), float(hi), int(n))
    except ValueError:
        raise click.BadParameter(f'expected path=low:high:points, got {texto!r}', param_hint='--free')


def leer_spec_calibracion(ruta):
    """Archivo YAML con free (path, low, high, points), target y tolerance"""
    try:
        datos = yaml.safe_load(Path(ruta).read_text(encoding='utf-8')) or {}
    except (OSError, yaml.YAMLError) as e:
        raise ScenarioError(f'cannot read calibration spec {ruta}: {e}', constraint='calibration spec')
    if not isinstance(datos, dict) or not isinstance(datos.get('free'), list):
        raise ScenarioError('calibration spec needs a list of free parameters', constraint='free parameters')
    try:
        libres = tuple(FreeParameter(str(p['path']), float(p['low']), float(p['high']), int(p['points']))
                       for p in datos['free'])
    except (KeyError, TypeError, ValueError) as e:
        raise ScenarioError(f'malformed free parameter: {e}', constraint='free parameters')
    return libres, datos.get('target'), datos.get('tolerance')

# ==================== COMANDOS ====================

@sim.command('run')
@click.argument('scenario')
@opciones_escenario
@click.option('--json', 'as_json', is_flag=True, help='Resumen en JSON')
@codigos_salida
def run_command(scenario, overrides, dt, method, out, as_json):
    """Simula un escenario y escribe CSV, SVG y resumen"""
    escenario = preparar_escenario(scenario, overrides, dt, method)
    resultado = run_scenario(escenario, metric_settings())
    destino = directorio_salida(out)

    digitos = current_app.config['CSV_SIGNIFICANT_DIGITS']
    (destino / 'trajectory.csv').write_text(
        write_trajectory_csv(resultado.trajectory, resultado.trace, resultado.dq, digits=digitos),
        encoding='utf-8')
    (destino / 'chart.svg').write_text(
        emit_chart_svg(resultado.trajectory, resultado.trace, title=escenario.label), encoding='utf-8')
    if as_json:
        resumen = json.dumps(resultado.report.as_dict(), indent=2, sort_keys=True)
        (destino / 'summary.json').write_text(resumen + '\n', encoding='utf-8')
        click.echo(resumen)
    else:
        (destino / 'summary.txt').write_text(resumen_texto(resultado), encoding='utf-8')

    archivar(TipoComando.RUN, escenario, reporte=resultado.report)
    click.echo(f'✅ {escenario.label}: veredicto {resultado.verdict.outcome.value}, '
               f'fracción positiva {resultado.report.positive_fraction:.4f} → {destino}')


@sim.command('sweep')
@click.argument('scenario')
@click.option('--param', required=True, help='Ruta del parámetro (p.ej. rates.k3)')
@click.option('--values', 'valores', required=True, help='Valores separados por coma')
@click.option('--metric', default='positive_fraction', show_default=True)
@opciones_escenario
@codigos_salida
def sweep_command(scenario, param, valores, metric, overrides, dt, method, out):
    """Barre un parámetro y tabula las métricas por valor"""
    lista = tuple(v.strip() for v in valores.split(',') if v.strip())
    if not lista:
        raise click.BadParameter('at least one value required', param_hint='--values')
    if metric not in REPORT_FIELDS:
        raise click.BadParameter(f'unknown metric {metric!r}', param_hint='--metric')

    escenario = preparar_escenario(scenario, overrides, dt, method)
    filas = sweep(escenario, SweepSpec(path=param, values=lista, metric=metric), metric_settings(),
                  workers=current_app.config['WORKERS'])

    columnas = ['value', 'positive_fraction', 'peak_c', 'u_peak', 'verdict']
    if metric not in columnas:
        columnas.append(metric)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columnas)
    for fila in filas:
        writer.writerow([fila.value] + [formatear(getattr(fila.report, c)) for c in columnas[1:]])

    destino = directorio_salida(out)
    (destino / 'sweep.csv').write_text(buffer.getvalue(), encoding='utf-8')
    archivar(TipoComando.SWEEP, escenario, filas=filas, parametro=param)
    click.echo(f'✅ {len(filas)} valores de {param} → {destino / "sweep.csv"}')


@sim.command('calibrate')
@click.argument('scenario', default='baseline')
@click.option('--free', 'libres', multiple=True, metavar='PATH=LOW:HIGH:POINTS',
              help='Parámetro libre (repetible)')
@click.option('--spec', 'spec_file', type=click.Path(dir_okay=False), help='Especificación YAML')
@click.option('--target', type=float, help='Fracción positiva objetivo')
@click.option('--tolerance', type=float, help='Tolerancia aceptada')
@opciones_escenario
@codigos_salida
def calibrate_command(scenario, libres, spec_file, target, tolerance, overrides, dt, method, out):
    """Búsqueda en grilla de la fracción positiva objetivo"""
    cfg = current_app.config
    objetivo, tolerancia = None, None
    if spec_file:
        parametros, objetivo, tolerancia = leer_spec_calibracion(spec_file)
    elif libres:
        parametros = tuple(parse_free(texto) for texto in libres)
    else:
        parametros = CALIBRACION_DEFECTO

    spec = CalibrationSpec(
        free=parametros,
        target=float(target if target is not None else objetivo if objetivo is not None
                     else cfg['CALIBRATION_TARGET']),
        tolerance=float(tolerance if tolerance is not None else tolerancia if tolerancia is not None
                        else cfg['CALIBRATION_TOLERANCE']),
    )

    escenario = preparar_escenario(scenario, overrides, dt, method)
    resultado = calibrate(escenario, spec, metric_settings(), workers=cfg['WORKERS'],
                          max_evaluations=cfg['MAX_GRID_EVALUATIONS'])

    calibrado = ensure_valid(apply_overrides(escenario, resultado.best.items()))
    calibrado = dataclasses.replace(calibrado, label=f'{escenario.label}-calibrated')
    corrida = run_scenario(calibrado, metric_settings())

    destino = directorio_salida(out)
    lineas = [f'{ruta} = {formatear(valor)}' for ruta, valor in resultado.best.items()]
    lineas += [
        f'target: {formatear(spec.target)}',
        f'achieved: {formatear(resultado.achieved)}',
        f'error: {formatear(resultado.error)}',
        f'within_tolerance: {str(resultado.within_tolerance).lower()}',
        f'evaluations: {resultado.evaluations}',
        f'verdict: {corrida.verdict.outcome.value}',
    ]
    (destino / 'calibration.txt').write_text('\n'.join(lineas) + '\n', encoding='utf-8')

    rutas = [p.path for p in spec.free]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(rutas + ['positive_fraction', 'error'])
    for punto in resultado.grid:
        writer.writerow([formatear(punto.assignment[r]) for r in rutas]
                        + [formatear(punto.positive_fraction), formatear(punto.error)])
    (destino / 'calibration_grid.csv').write_text(buffer.getvalue(), encoding='utf-8')
    (destino / 'calibrated.scn').write_text(write_scenario(calibrado), encoding='utf-8')

    archivar(TipoComando.CALIBRATE, calibrado, reporte=corrida.report, calibracion=resultado)
    simbolo = '✅' if resultado.within_tolerance else '⚠️'
    click.echo(f'{simbolo} Mejor punto {resultado.best}: fracción {resultado.achieved:.4f} '
               f'(objetivo {spec.target:g} ± {spec.tolerance:g})')


@sim.command('check')
@click.argument('scenario', default='baseline')
@click.option('--set', 'overrides', multiple=True, metavar='PATH=VALUE')
@click.option('--json', 'as_json', is_flag=True, help='Diagnóstico en JSON')
@codigos_salida
def check_command(scenario, overrides, as_json):
    """Polaridad de los lazos R1, B1, B2, R2, B3 y validez de parámetros"""
    # los overrides no se validan: el chequeo debe poder reportar parámetros rotos
    escenario = apply_overrides(load_scenario(scenario), overrides)
    chequeos = loop_checks(escenario, step=current_app.config['FD_STEP'])
    todos = all(c.passed for c in chequeos)

    if as_json:
        click.echo(json.dumps({
            'passed': todos,
            'checks': [dataclasses.asdict(c) for c in chequeos],
        }, indent=2))
    else:
        for c in chequeos:
            click.echo(f'{"PASS" if c.passed else "FAIL"} {c.loop}: {c.detail}')

    archivar(TipoComando.CHECK, escenario)
    if not todos:
        click.get_current_context().exit(1)


@sim.command('converge')
@click.argument('scenario', default='baseline')
@click.option('--dts', default='0.1,0.05,0.025', show_default=True,
              help='Pasos separados por coma')
@click.option('--method', 'methods', multiple=True, type=click.Choice([m.value for m in Method]))
@click.option('--set', 'overrides', multiple=True, metavar='PATH=VALUE')
@codigos_salida
def converge_command(scenario, dts, methods, overrides):
    """Orden observado del solver sobre la variante sin cortes del escenario"""
    try:
        pasos = [float(v) for v in dts.split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f'invalid step list {dts!r}', param_hint='--dts')
    escenario = ensure_valid(smooth_variant(apply_overrides(load_scenario(scenario), overrides)))
    metodos = tuple(Method(m) for m in methods) or (Method.EULER, Method.RK4)
    for r in convergence_study(escenario, pasos, metodos):
        errores = ', '.join(format(e, '.3e') for e in r.errors)
        click.echo(f'{r.method.value}: order {r.order:.3f} (errors {errores})')


@sim.command('history')
@click.option('--limit', default=10, show_default=True)
def history_command(limit):
    """Últimas corridas archivadas"""
    db.create_all()
    corridas = SimulationRun.query.order_by(SimulationRun.id.desc()).limit(limit).all()
    if not corridas:
        click.echo('⚠️ No hay corridas archivadas')
        return
    for c in corridas:
        extra = ''
        if c.comando is TipoComando.SWEEP:
            extra = f' filas={SweepRowRecord.query.filter_by(corrida_id=c.id).count()}'
        elif c.comando is TipoComando.CALIBRATE:
            extra = f' puntos={CalibrationPoint.query.filter_by(corrida_id=c.id).count()}'
        fraccion = formatear(c.positive_fraction)
        veredicto = c.veredicto.value if c.veredicto else '-'
        click.echo(f'{c.id:>4} {c.fecha:%Y-%m-%d %H:%M} {c.comando.value:<9} {c.label} '
                   f'fraction={fraccion} verdict={veredicto}{extra}')


app.cli.add_command(sim)

# ==================== INICIALIZACIÓN ====================

@app.cli.command('init-db')
def init_db():
    """Crea las tablas del archivo de corridas"""
    db.create_all()
    click.echo("✅ Base de datos inicializada")


if __name__ == '__main__':
    sim(obj=ScriptInfo(create_app=lambda: app))
