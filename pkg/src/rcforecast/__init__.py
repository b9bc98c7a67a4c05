"""Echo state network toolkit for forecasting chaotic dynamical systems.

Submodules:
    dynamics      benchmark ODE systems, RK4 integration, test-IC sampling
    dataops       normalization, noise, subsampling, train/window/test splits
    reservoir     reservoir construction, state evolution, readouts, persistence
    training      ridge readout fit and surrogate macro-parameter search
    lyapunov      QR exponent spectra and the fixed-point stability map
    metrics       normalized RMSE, valid prediction time, distributions
    localization  parallel reservoirs over a partitioned state with halos
    experiments   prepared data bundles and batched multi-IC evaluation
    pipeline      config-driven end-to-end runs
    reproduce     named standard experiments
    cli           command-line interface
"""

__version__ = "0.1.0"

from .dynamics import TimeSeries, SystemSpec, builtin_system, integrate
from .reservoir import MacroParams, Reservoir, build
from .training import ridge_solve, train_readout, macro_loss, optimize_macro
from .metrics import nrmse, vpt, vpt_distribution

__all__ = [
    "__version__",
    "TimeSeries",
    "SystemSpec",
    "builtin_system",
    "integrate",
    "MacroParams",
    "Reservoir",
    "build",
    "ridge_solve",
    "train_readout",
    "macro_loss",
    "optimize_macro",
    "nrmse",
    "vpt",
    "vpt_distribution",
]
