from flask_sqlalchemy import SQLAlchemy
from datetime import datetime
import enum

from proportionality import Outcome

db = SQLAlchemy()

# ==================== ENUMS ====================

class TipoComando(enum.Enum):
    RUN = "run"
    SWEEP = "sweep"
    CALIBRATE = "calibrate"
    CHECK = "check"

# ==================== MODELOS ====================

class SimulationRun(db.Model):
    """
    Registro de una invocación del simulador
    """
    __tablename__ = 'simulation_runs'

    id = db.Column(db.Integer, primary_key=True)
    comando = db.Column(db.Enum(TipoComando), nullable=False)
    label = db.Column(db.String(100), nullable=False)

    # Escenario canónico (texto) tal como se simuló
    escenario = db.Column(db.Text, nullable=False)

    positive_fraction = db.Column(db.Float)
    veredicto = db.Column(db.Enum(Outcome))
    u_peak = db.Column(db.Float)
    peak_c = db.Column(db.Float)

    fecha = db.Column(db.DateTime, default=datetime.utcnow, index=True)

    # Relaciones
    filas_barrido = db.relationship('SweepRowRecord', backref='corrida', lazy=True,
                                    cascade='all, delete-orphan')
    puntos_calibracion = db.relationship('CalibrationPoint', backref='corrida', lazy=True,
                                         cascade='all, delete-orphan')

    def __repr__(self):
        return f'<SimulationRun {self.comando.value} {self.label}>'


class SweepRowRecord(db.Model):
    __tablename__ = 'sweep_rows'

    id = db.Column(db.Integer, primary_key=True)
    corrida_id = db.Column(db.Integer, db.ForeignKey('simulation_runs.id'), nullable=False)

    parametro = db.Column(db.String(120), nullable=False)  # Ej: "rates.k3"
    valor = db.Column(db.String(60), nullable=False)

    positive_fraction = db.Column(db.Float, nullable=False)
    peak_c = db.Column(db.Float, nullable=False)
    u_peak = db.Column(db.Float, nullable=False)
    veredicto = db.Column(db.Enum(Outcome), nullable=False)

    def __repr__(self):
        return f'<SweepRow {self.parametro}={self.valor}>'


class CalibrationPoint(db.Model):
    __tablename__ = 'calibration_points'

    id = db.Column(db.Integer, primary_key=True)
    corrida_id = db.Column(db.Integer, db.ForeignKey('simulation_runs.id'), nullable=False)

    asignacion = db.Column(db.JSON, nullable=False)  # {ruta: valor}
    fraccion = db.Column(db.Float)  # NULL si el punto resultó inválido
    error = db.Column(db.Float)
    es_mejor = db.Column(db.Boolean, default=False)

    def __repr__(self):
        return f'<CalibrationPoint {self.asignacion} err={self.error}>'


# ==================== ARCHIVO ====================

def archivar_corrida(comando, escenario_texto, label, reporte=None, filas=None, parametro=None,
                     calibracion=None):
    """
    Guarda la corrida y sus filas asociadas. Requiere contexto de aplicación.

    Args:
        comando: TipoComando
        reporte: AnalysisReport de la corrida principal (opcional)
        filas: lista de SweepRow (barridos)
        calibracion: CalibrationResult (calibraciones)

    Returns:
        SimulationRun
    """
    db.create_all()

    corrida = SimulationRun(comando=comando, label=label, escenario=escenario_texto)
    if reporte is not None:
        corrida.positive_fraction = reporte.positive_fraction
        corrida.veredicto = reporte.verdict
        corrida.u_peak = reporte.u_peak
        corrida.peak_c = reporte.peak_c

    for fila in filas or []:
        corrida.filas_barrido.append(SweepRowRecord(
            parametro=parametro,
            valor=str(fila.value),
            positive_fraction=fila.report.positive_fraction,
            peak_c=fila.report.peak_c,
            u_peak=fila.report.u_peak,
            veredicto=fila.report.verdict,
        ))

    if calibracion is not None:
        corrida.positive_fraction = calibracion.achieved
        for punto in calibracion.grid:
            valido = punto.error != float('inf')
            corrida.puntos_calibracion.append(CalibrationPoint(
                asignacion=punto.assignment,
                fraccion=punto.positive_fraction if valido else None,
                error=punto.error if valido else None,
                es_mejor=punto.assignment == calibracion.best,
            ))

    db.session.add(corrida)
    db.session.commit()
    return corrida
