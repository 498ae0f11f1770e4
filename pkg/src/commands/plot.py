"""plot: training curves from one or more metrics logs."""

import logging
from pathlib import Path

import plotly.graph_objects as go

from src.data.parse import combine_logs, metric_series, pretrain_boundary
from src.utils.errors import MetricError
from src.utils.styling import PlotStyle

logger = logging.getLogger(__name__)

DEFAULT_METRICS = ("nll_oracle", "nll_div")
FORMATS = ("png", "svg", "html")


def curve_figure(frame, metric):
    """One line per run; dashed markers where each run's pre-training ended."""
    series = metric_series(frame, metric)
    if series.empty:
        return None
    fig = go.Figure()
    for i, (run, part) in enumerate(series.groupby("run", sort=False)):
        fig.add_trace(PlotStyle.line(part["step"], part[metric], run, i))
    title = PlotStyle.metric_title(metric)
    PlotStyle.apply(fig, title=title, y_title=title)

    boundaries = {pretrain_boundary(part) for _, part in frame.groupby("run", sort=False)}
    for boundary in sorted(b for b in boundaries if b is not None):
        PlotStyle.mark_boundary(fig, boundary)
    return fig


def save_figure(fig, path, fmt):
    if fmt == "html":
        fig.write_html(str(path))
    else:
        fig.write_image(str(path), format=fmt)
    return path


def cmd_plot(logs, out_dir=None, fmt="png", metrics=DEFAULT_METRICS):
    if fmt not in FORMATS:
        raise MetricError(f"format must be one of {FORMATS}, got {fmt!r}")
    frame, skipped = combine_logs(logs)
    if frame.empty:
        raise MetricError("The metrics logs hold no usable records")
    out_dir = Path(out_dir) if out_dir else Path(logs[0]).parent
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    for metric in metrics:
        fig = curve_figure(frame, metric)
        if fig is None:
            logger.warning("No %s values in the given logs; skipping its plot", metric)
            continue
        written.append(save_figure(fig, out_dir / f"{metric}.{fmt}", fmt))
        logger.info("Wrote %s", written[-1])
    if not written:
        raise MetricError(f"None of {list(metrics)} appear in the given logs")
    if skipped:
        logger.warning("%d corrupt log line(s) were skipped in total", skipped)
    return written
