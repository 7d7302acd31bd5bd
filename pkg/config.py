import os

from dotenv import load_dotenv

load_dotenv()


def _env_bool(nombre, default=False):
    valor = os.environ.get(nombre)
    if valor is None:
        return default
    return valor.strip().lower() in ('1', 'true', 'yes', 'si', 'on')


class Config:
    # Base de datos (archivo de corridas)
    SQLALCHEMY_DATABASE_URI = os.environ.get('DATABASE_URL') or 'sqlite://'
    SQLALCHEMY_TRACK_MODIFICATIONS = False
    SQLALCHEMY_ENGINE_OPTIONS = {
        'pool_pre_ping': True,
    }

    # Solo se archiva si hay una base configurada (o se fuerza por entorno)
    ARCHIVE_RUNS = _env_bool('COSIM_ARCHIVE_RUNS', default=bool(os.environ.get('DATABASE_URL')))

    # Salidas
    OUTPUT_DIR = os.environ.get('COSIM_OUTPUT_DIR') or 'salida'
    CSV_SIGNIFICANT_DIGITS = 9

    # Análisis
    COLLAPSE_RATE = 0.5  # por ventana
    COLLAPSE_WINDOW = 0.05  # fracción de ventana
    COST_RATE = 1.0
    FD_STEP = 1e-6
    MAX_GRID_EVALUATIONS = 1_000_000
    WORKERS = int(os.environ.get('COSIM_WORKERS') or 1)

    # Calibración
    CALIBRATION_TARGET = 0.44
    CALIBRATION_TOLERANCE = 0.05

    LOG_LEVEL = os.environ.get('COSIM_LOG_LEVEL') or 'INFO'
