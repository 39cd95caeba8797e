"""scikit-learn style wrapper: points in, opened facilities and assignments out."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_random_state

from .graph import build_udg, multi_source_sssp
from .instance import FLInstance
from .pipeline import RunConfig, run_pipeline


class UDGFacilityLocation(BaseEstimator, ClusterMixin):
    """Facility location on the unit disk graph of the training points.

    ``fit(X, opening_costs=...)``: a finite cost marks a candidate facility,
    ``inf``/``nan`` marks a point that cannot host one. Every point is a
    client unless ``client_mask`` says otherwise.

    After fitting, ``facilities_`` holds the opened point indices,
    ``labels_`` the facility index serving each client (-1 otherwise)
    and ``cost_`` the total cost.
    """

    def __init__(self, solver="qptas", eps=0.5, eps_prime=0.25, grid_trials=32, default_cost=1.0,
                 random_state=None):
        self.solver = solver
        self.eps = eps
        self.eps_prime = eps_prime
        self.grid_trials = grid_trials
        self.default_cost = default_cost
        self.random_state = random_state

    def _instance(self, X, opening_costs, client_mask):
        n = len(X)
        costs = np.full(n, self.default_cost, dtype=float) if opening_costs is None else \
            np.asarray(opening_costs, dtype=float).reshape(-1)
        if len(costs) != n:
            raise ValueError("opening_costs must have one entry per point")
        clients = np.ones(n, bool) if client_mask is None else np.asarray(client_mask, bool).reshape(-1)
        if len(clients) != n:
            raise ValueError("client_mask must have one entry per point")
        fac = {int(i): float(c) for i, c in enumerate(costs) if np.isfinite(c)}
        if not fac:
            raise ValueError("no candidate facility (all opening costs are inf/nan)")
        return FLInstance(build_udg(X), np.nonzero(clients)[0], fac)

    def fit(self, X, y=None, opening_costs=None, client_mask=None):
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected planar points, got {X.shape[1]} features")
        seed = int(check_random_state(self.random_state).randint(0, 2**31 - 1))
        inst = self._instance(X, opening_costs, client_mask)
        cfg = RunConfig(solver=self.solver, eps=self.eps, eps_prime=self.eps_prime, seed=seed,
                        grid_trials=self.grid_trials)
        report = run_pipeline(cfg, inst, audit=False)
        if report.error:
            raise RuntimeError(f"solve failed in stage {report.error['stage']}: {report.error['message']}")
        self.X_fit_ = X
        self.n_features_in_ = 2
        self.report_ = report
        self.facilities_ = np.array(report.solution["open"], dtype=int)
        self.cost_ = float(report.cost)
        labels = np.full(len(X), -1, dtype=int)
        for c, f, _ in report.solution["assignment"]:
            labels[c] = f
        self.labels_ = labels
        return self

    def predict(self, X):
        """Nearest opened facility (graph distance through training and query points); -1 if unreachable."""
        check_is_fitted(self, "facilities_")
        X = check_array(X, dtype=float)
        if X.shape[1] != 2:
            raise ValueError(f"expected planar points, got {X.shape[1]} features")
        m = len(self.X_fit_)
        g = build_udg(np.vstack([self.X_fit_, X]), allow_coincident=True)
        _, nearest = multi_source_sssp(g, self.facilities_.tolist())
        out = np.asarray(nearest[m:], dtype=int)
        # zero-length edges are dropped, so a query sitting on a training point copies its answer
        seen = {tuple(p): i for i, p in enumerate(self.X_fit_.tolist())}
        for k, p in enumerate(X.tolist()):
            if tuple(p) in seen:
                out[k] = nearest[seen[tuple(p)]]
        return np.where(out >= 0, out, -1)
