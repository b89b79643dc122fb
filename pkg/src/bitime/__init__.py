"""Verification toolkit for plane quasi-linear PDE systems under bi-time
optimal control: masked-disc grids, gradient-split canonical controls,
complete-integrability residuals, maximum-principle condition checks, and
the closed-form perfect-plastic example.

Kept import-light so the CLI can configure thread limits before numpy's
backends load; import submodules directly (bitime.grid, bitime.systems,
bitime.integrability, bitime.optimality, bitime.plastic, bitime.suite).
"""

__version__ = "0.1.0"
