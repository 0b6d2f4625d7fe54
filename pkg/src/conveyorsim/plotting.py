"""SVG rendering of data sets, fits, and visibility series."""

import numpy as np

from .errors import ConfigError
from .fitting import ramsey_model, echo_model


def _fit_curve(fit_payload, x_dense):
    """Evaluate a fit (FitResult or its JSON payload) on a dense grid."""
    if hasattr(fit_payload, "parameters"):
        model = fit_payload.model
        params = fit_payload.parameters
        extras = fit_payload.extras
    else:
        model = fit_payload["model"]
        params = fit_payload["parameters"]
        extras = fit_payload.get("extras", {})
    p = np.array([params["offset"], params["amplitude"], params["T2_star"],
                  params["fringe_frequency"], params["phase"]])
    family, _, form = model.partition("-")
    if family == "ramsey":
        return ramsey_model(x_dense, p, form=form)
    if family == "echo":
        return echo_model(x_dense, extras["tau_pi"], p, form=form)
    raise ConfigError(f"cannot plot fit of model {model!r}")


def plot_dataset(path, data, fit=None, title=""):
    """Scatter with error bars plus the fitted curve (when given).

    Returns (x_dense, y_dense) of the drawn fit curve, or None, so callers
    can verify that the rendered curve equals the model evaluation.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 3.6), dpi=120)
    ax.errorbar(data.x * 1e3, data.p3_mean, yerr=data.p3_stderr,
                fmt="o", ms=3.5, lw=1, capsize=2, label="simulated data",
                gid="data-points")
    curve = None
    if fit is not None:
        x_dense = np.linspace(float(data.x.min()), float(data.x.max()), 600)
        y_dense = _fit_curve(fit, x_dense)
        ax.plot(x_dense * 1e3, y_dense, "-", lw=1.2, label="fit", gid="fit-curve")
        curve = (x_dense, y_dense)
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("P3")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return curve


def plot_visibility(path, series, band=None, title=""):
    """Visibility vs 2 tau_pi, optionally with a best/worst prediction band."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 3.6), dpi=120)
    x = 2 * series.tau_pi * 1e3
    ax.errorbar(x, series.visibility, yerr=series.visibility_err,
                fmt="s", ms=4, lw=1, capsize=2, label="simulated visibility",
                gid="data-points")
    if band is not None:
        lo, hi = band
        ax.plot(x, lo, "o--", ms=3, lw=0.8, label="best case", gid="band-low")
        ax.plot(x, hi, "s--", ms=3, lw=0.8, label="worst case", gid="band-high")
    ax.set_xlabel("2 tau_pi (ms)")
    ax.set_ylabel("echo visibility")
    ax.set_ylim(0, 1.05)
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
