"""Python access to the spectral-Galerkin stochastic wave simulator.

Configs are plain dicts with the same layout as the JSON files accepted by
the ``snwe`` command-line tool.
"""

import json
from pathlib import Path

from . import _core
from ._core import ConfigError, Error, admissible_r, cluster_exponent, pair_condition

__all__ = [
    "ConfigError",
    "Error",
    "admissible_r",
    "basis",
    "canonical_config",
    "cluster_exponent",
    "config_hash",
    "pair_condition",
    "run",
    "solve",
    "version",
]

version = _core.version


def _dump(config):
    return json.dumps(config if config is not None else {})


def basis(cutoff, bc="dirichlet", lx=3.141592653589793, ly=3.141592653589793):
    """Return (modes, frequencies) of the eigenbasis with frequency <= cutoff."""
    return _core.basis_modes(lx, ly, bc, cutoff)


def canonical_config(config):
    return json.loads(_core.canonical_config(_dump(config)))


def config_hash(config):
    return _core.config_hash(_dump(config))


def solve(config, path=0):
    """Solve one path of the truncated problem.

    Returns a dict with the time grid ``t``, coefficient matrices ``u`` and
    ``ut`` (modes x nodes), running norms ``z`` and ``y``, and the Picard
    diagnostics.
    """
    return _core.solve_path(_dump(config), path)


def run(config, output_dir):
    """Run a subcommand as the command-line tool would.

    Returns (exit_code, manifest dict, log text).
    """
    code, manifest, log = _core.run(_dump(config), str(Path(output_dir)))
    return code, json.loads(manifest), log
