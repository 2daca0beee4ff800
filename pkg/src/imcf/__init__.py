"""Inverse mean curvature flow of graphs in the upper half-space model of hyperbolic space."""

from .certificates import CertificateReport, InitialStats, check, envelopes, ode_compare
from .decay import DecayFit, extract_series, fit_rate, verify_rates
from .errors import *  # noqa: F401,F403
from .flow import FlowConfig, Monitors, Trajectory, evolution_residual, evolve, stable_dt, step, trace_particles
from .geometry import GeometryFields, GraphState, Grid, derivatives, geometry, laplace_beltrami, speed
from .io import RunConfig, make_initial, parse_config, read_snapshot, write_outputs, write_snapshot

__version__ = "0.1.0"
