"""Dashboard Generator Module for the LSTC safe-driving training system

Renders the training curves of a metrics CSV: one standalone SVG per headline
metric (episode reward, success rate, episode cost, feasible state rate) and
an interactive HTML dashboard that adds the Lagrange multipliers and losses.
"""

import io
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from src.config.config import DASHBOARD_DESCRIPTION, DASHBOARD_TITLE
from src.persistence.metrics import read_metrics
from src.utils.io_utils import atomic_write_bytes, atomic_write_text

# (column, file stem, axis label)
CURVES = [
    ("ep_reward", "reward_curve", "Episode reward"),
    ("success_rate", "success_rate_curve", "Success rate"),
    ("ep_cost", "episode_cost_curve", "Episode cost"),
    ("feasible_rate", "feasible_rate_curve", "Feasible state rate"),
]
CURVE_GID = "curve"


class DashboardGenerator:
    """Class for turning epoch metrics into training-curve figures

    Args:
        output_dir (str or Path): directory receiving the SVG and HTML files
    """

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.logger = logging.getLogger(__name__)
        self.title = DASHBOARD_TITLE
        self.description = DASHBOARD_DESCRIPTION

    def generate_from_csv(self, metrics_path):
        """Validate a metrics CSV and write every figure

        Nothing is written when the CSV is malformed.

        Returns:
            list: paths of the four SVG files followed by the HTML dashboard
        """
        metrics_df = read_metrics(metrics_path)
        self.logger.info(f"Plotting {len(metrics_df)} epochs from {metrics_path}")
        paths = self.generate_curve_svgs(metrics_df)
        paths.append(self.generate_dashboard(metrics_df))
        return paths

    def generate_curve_svgs(self, metrics_df):
        """Write the four headline curves (steps on the x axis) as SVG

        Args:
            metrics_df (pandas.DataFrame): validated metrics rows

        Returns:
            list: written SVG paths
        """
        paths = []
        with plt.rc_context({"svg.hashsalt": "lstc-training-curves", "svg.fonttype": "none", "path.simplify": False}):
            for column, stem, label in CURVES:
                fig, ax = plt.subplots(figsize=(6.4, 4.0))
                line, = ax.plot(metrics_df["steps"], metrics_df[column], marker="o", markersize=3,
                                color="#1a237e")
                line.set_gid(CURVE_GID)
                ax.set_xlabel("Environment steps")
                ax.set_ylabel(label)
                ax.set_title(f"{label} vs steps")
                ax.grid(True, alpha=0.3)
                buffer = io.BytesIO()
                fig.savefig(buffer, format="svg", metadata={"Date": None})
                plt.close(fig)
                path = atomic_write_bytes(self.output_dir / f"{stem}.svg", buffer.getvalue())
                paths.append(path)
                self.logger.debug(f"Wrote {path}")
        self.logger.info(f"Training curves saved to {self.output_dir}")
        return paths

    def generate_dashboard(self, metrics_df):
        """Write a single-page interactive dashboard

        Returns:
            Path: the HTML file
        """
        fig = make_subplots(rows=3, cols=2, subplot_titles=[label for _, _, label in CURVES]
                            + ["Lagrange multipliers", "Losses"])
        steps = metrics_df["steps"]
        for k, (column, _, label) in enumerate(CURVES):
            fig.add_trace(go.Scatter(x=steps, y=metrics_df[column], mode="lines+markers", name=label),
                          row=k // 2 + 1, col=k % 2 + 1)
        for column, label in (("lambda_l", "lambda long-term"), ("lambda_s", "lambda short-term")):
            fig.add_trace(go.Scatter(x=steps, y=metrics_df[column], mode="lines", name=label), row=3, col=1)
        for column in ("loss_pi", "loss_v", "loss_vc", "loss_B"):
            fig.add_trace(go.Scatter(x=steps, y=metrics_df[column], mode="lines", name=column), row=3, col=2)
        fig.update_layout(height=1000, title_text=self.title, showlegend=True)
        fig.update_xaxes(title_text="Environment steps")

        html_content = f"""<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <title>{self.title}</title>
    <style>
        body {{font-family: Arial, sans-serif; margin: 0; background-color: #f5f5f5;}}
        .header {{background-color: #1a237e; color: white; padding: 20px; text-align: center;}}
        .container {{max-width: 1200px; margin: 0 auto; padding: 20px; background-color: white;}}
    </style>
</head>
<body>
    <div class="header">
        <h1>{self.title}</h1>
        <p>{self.description}</p>
    </div>
    <div class="container">
        {fig.to_html(full_html=False, include_plotlyjs="cdn")}
    </div>
</body>
</html>
"""
        path = atomic_write_text(self.output_dir / "dashboard.html", html_content)
        self.logger.info(f"Dashboard saved to {path}")
        return path
