class CosimError(Exception):
    """Error base del simulador"""


class ScenarioError(CosimError):
    """
    Escenario inválido (sintaxis o semántica)

    `constraint` identifica la restricción violada; `line` es la línea del
    archivo cuando el error es de sintaxis.
    """

    def __init__(self, message, constraint=None, line=None):
        self.constraint = constraint
        self.line = line
        if line is not None:
            message = f'line {line}: {message}'
        super().__init__(message)


class SimulationError(CosimError):
    """Falla numérica durante la integración (valores no finitos)"""

    def __init__(self, message, time=None):
        self.time = time
        if time is not None:
            message = f'{message} (t={time:.6g})'
        super().__init__(message)


class AnalysisError(CosimError):
    pass
