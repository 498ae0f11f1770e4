import plotly.graph_objects as go


class PlotStyle:
    """
    A class to manage the styling of training-curve figures (dark theme).
    """

    PALETTE = [
        "#5e9df5",
        "#9c6cf5",
        "#34d578",
        "#ffb84d",
        "#f56c8a",
        "#4dd0e1",
    ]
    BACKGROUND = "#0e1117"
    GRID = "rgba(120, 120, 120, 0.3)"
    TEXT = "#f0f2f6"
    BOUNDARY = "rgba(255, 255, 255, 0.6)"

    METRIC_TITLES = {
        "nll_oracle": "NLL<sub>oracle</sub>",
        "nll_div": "NLL<sub>div</sub>",
        "nll_gen": "NLL<sub>gen</sub>",
        "tau": "temperature",
    }

    @staticmethod
    def color(index):
        """Palette colour for the ``index``-th trace, cycling."""
        return PlotStyle.PALETTE[index % len(PlotStyle.PALETTE)]

    @staticmethod
    def metric_title(metric):
        if metric.startswith("bleu_"):
            return f"BLEU-{metric.split('_', 1)[1]}"
        return PlotStyle.METRIC_TITLES.get(metric, metric)

    @staticmethod
    def apply(fig, title=None, x_title="step", y_title=None):
        """
        Apply the theme to a figure in place.

        Parameters:
        -----------
        fig : plotly.graph_objects.Figure
            The figure to style
        title, x_title, y_title : str
            Optional figure and axis titles

        Returns:
        --------
        plotly.graph_objects.Figure
            The same figure, for chaining
        """
        fig.update_layout(
            title=title,
            template="plotly_dark",
            paper_bgcolor=PlotStyle.BACKGROUND,
            plot_bgcolor=PlotStyle.BACKGROUND,
            font=dict(color=PlotStyle.TEXT, size=13),
            legend=dict(orientation="h", yanchor="bottom", y=1.02, xanchor="right", x=1),
            margin=dict(l=60, r=30, t=70, b=50),
        )
        fig.update_xaxes(title_text=x_title, gridcolor=PlotStyle.GRID, zeroline=False)
        fig.update_yaxes(title_text=y_title, gridcolor=PlotStyle.GRID, zeroline=False)
        return fig

    @staticmethod
    def mark_boundary(fig, x, label="end of pre-training"):
        """Dashed vertical line at ``x`` with a text label."""
        fig.add_vline(
            x=x,
            line=dict(color=PlotStyle.BOUNDARY, dash="dash", width=1.5),
            annotation_text=label,
            annotation_position="top left",
        )
        return fig

    @staticmethod
    def line(x, y, name, index):
        return go.Scatter(
            x=x,
            y=y,
            mode="lines",
            name=name,
            line=dict(color=PlotStyle.color(index), width=2),
        )
