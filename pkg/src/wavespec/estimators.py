"""scikit-learn style facade over the wave-spectrum pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from wavespec import dynamics as dy
from wavespec import spectrum as sp
from wavespec.geometry import Caps, DiscreteManifold
from wavespec.green import GreenSystem, SpectralData


class WaveSpectrumEstimator(BaseEstimator):
    """Fit the wave spectrum of a model or of its spectral data.

    ``fit`` accepts a ``DiscreteManifold`` (geometric backend), or a
    ``GreenSystem`` / ``SpectralData`` (dynamical backend).  ``score`` is
    minus the isometry discrepancy against a ground-truth manifold.
    """

    def __init__(self, backend="geometric", dt=None, t_max=None, tol=1e-3, psd_tol=1e-8,
                 boundary_tol=None, half_width=1, patches=None, max_depth=6):
        self.backend = backend
        self.dt = dt
        self.t_max = t_max
        self.tol = tol
        self.psd_tol = psd_tol
        self.boundary_tol = boundary_tol
        self.half_width = half_width
        self.patches = patches
        self.max_depth = max_depth

    def _extension(self, X):
        if self.backend == "geometric":
            if not isinstance(X, DiscreteManifold):
                raise TypeError("the geometric backend fits a DiscreteManifold")
            return sp.SpaceExtension.geometric(X, patches=self.patches)
        if self.dt is None or self.t_max is None:
            raise ValueError("the dynamical backend needs dt and t_max")
        if isinstance(X, SpectralData):
            X = dy.reconstruct_from_spectral(X)
        elif not isinstance(X, (GreenSystem, dy.FourierModel, dy.WaveSystem)):
            raise TypeError("the dynamical backend fits spectral data or a Green system")
        return sp.SpaceExtension.dynamical(X, self.dt, self.t_max, tol=self.tol,
                                           half_width=self.half_width, patches=self.patches)

    def fit(self, X, y=None):
        ext = self._extension(X)
        ws, res, tb = sp.wave_spectrum(ext, caps=Caps(max_depth=self.max_depth),
                                       psd_tol=self.psd_tol, boundary_tol=self.boundary_tol)
        self.spectrum_ = ws
        self.atoms_ = res.atoms
        self.stabilized_ = res.stabilized
        self.boundary_eikonal_ = tb
        self.metric_ = ws.metric
        self.boundary_mask_ = np.asarray(ws.boundary_mask, dtype=bool)
        self.n_points_ = len(ws)
        return self

    def transform(self, X=None):
        """The fitted metric matrix (the spectrum does not act on new data)."""
        return self.metric_

    def isometry(self, m: DiscreteManifold) -> sp.IsometryReport:
        return sp.isometry_report(self.spectrum_, m)

    def score(self, m: DiscreteManifold, y=None) -> float:
        return -self.isometry(m).discrepancy
