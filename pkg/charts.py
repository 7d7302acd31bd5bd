"""Gráfico SVG estático de una corrida: seis stocks y el puntaje de proporcionalidad"""
import io

import matplotlib

matplotlib.use('agg')

from matplotlib import rc_context  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from models import STOCKS  # noqa: E402

ETIQUETAS = {
    'h': 'H expertise',
    'a': 'A competence',
    's': 'S awareness',
    't': 'T trust',
    'u': 'U authority',
    'c': 'C load',
}


def emit_chart_svg(traj, trace, title=None):
    """
    Genera el SVG de la corrida.

    Cada serie lleva un id 'series-<nombre>' y la referencia de cero del
    puntaje el id 'zero-reference'. Con una sola muestra se dibujan marcadores.

    Returns:
        str: documento SVG
    """
    if len(traj) == 0:
        raise ValueError('empty trajectory')

    times = traj.times
    estilo = {'marker': 'o'} if len(traj) == 1 else {}

    # ids y metadatos fijos para que la salida sea reproducible
    with rc_context({'svg.hashsalt': 'cosim', 'svg.fonttype': 'none'}):
        fig = Figure(figsize=(9, 5))
        ax = fig.add_subplot(1, 1, 1)
        for i, nombre in enumerate(STOCKS):
            ax.plot(times, traj.states[:, i], label=ETIQUETAS[nombre], gid=f'series-{nombre.upper()}',
                    linewidth=1.4, **estilo)
        ax.set_xlabel('time (mission windows)')
        ax.set_ylabel('stock level')
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.3)

        ax_score = ax.twinx()
        ax_score.plot(times, trace.score, color='black', linestyle='--', label='score (MA - CD)',
                      gid='series-score', linewidth=1.6, **estilo)
        ax_score.axhline(0.0, color='grey', linestyle=':', linewidth=1.0, gid='zero-reference')
        ax_score.set_ylabel('proportionality score')

        lineas = ax.get_lines() + [ax_score.get_lines()[0]]
        ax.legend(lineas, [linea.get_label() for linea in lineas], loc='upper left', fontsize=8,
                  ncol=2)
        if title:
            ax.set_title(title)
        fig.tight_layout()

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
    return buffer.getvalue()
