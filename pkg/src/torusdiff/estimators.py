"""Estimator interface in the scikit-learn style."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._seeding import as_generator
from .diffusion import DiffusionModel, PathSample, simulate_paths, transition_density
from .inference import KERNELS, Transitions, fit_mle, get_family, transition_terms
from .jump import JumpModel, jump_transition_density, simulate_jump_paths
from .exceptions import DomainError
from .special import TWO_PI
from .validation import check_angles, check_paths, check_positive_int

_PREDICT_GRID = 512


class CircularDiffusion(TransformerMixin, BaseEstimator):
    """Maximum likelihood fit of a circular diffusion (or jump) model.

    Parameters
    ----------
    family : str
        Stationary family: ``"uniform"``, ``"von_mises"``,
        ``"wrapped_cauchy"`` or ``"von_mises_mixture"``.
    n_components : int
        Mixture components (mixture family only).
    kernel : {"diffusion", "jump"}
    delta : float, optional
        Sampling interval, required when ``X`` is a raw angle array.
    fixed : dict, optional
        Parameters held at given values during the fit.
    n_starts : int, optional
        Optimizer starts; defaults to the family's choice.
    random_state : int or Generator, optional

    Attributes
    ----------
    fit_result_ : FitResult
    params_ : dict
        Estimated parameters by name.
    standard_errors_ : ndarray
    loglik_ : float
    model_ : DiffusionModel or JumpModel
        The fitted process.

    Notes
    -----
    ``X`` is a PathSample, a list of them, or an angle array with one path
    per row.  ``transform`` maps angles to the unit-period transform space
    ``F(theta)``; ``predict`` returns the mean direction of the next
    observation given each state.
    """

    def __init__(self, family="von_mises", n_components=2, kernel="diffusion", delta=None, fixed=None,
                 n_starts=None, random_state=None):
        self.family = family
        self.n_components = n_components
        self.kernel = kernel
        self.delta = delta
        self.fixed = fixed
        self.n_starts = n_starts
        self.random_state = random_state

    def _family(self):
        return get_family(self.family, self.n_components)

    def fit(self, X, y=None):
        if self.kernel not in KERNELS:
            raise DomainError(f"kernel must be one of {KERNELS}")
        paths = check_paths(X, self.delta)
        res = fit_mle(self._family(), paths, kernel=self.kernel, fixed=self.fixed, n_starts=self.n_starts,
                      random_state=self.random_state)
        self.fit_result_ = res
        self.params_ = res.params
        self.standard_errors_ = res.standard_errors
        self.loglik_ = res.loglik
        self.n_transitions_ = res.n_transitions
        dens = res.estimate.density()
        cls = DiffusionModel if self.kernel == "diffusion" else JumpModel
        self.model_ = cls(dens, res.estimate.sigma)
        return self

    def score_samples(self, X):
        """Per-transition log-likelihood of new paths."""
        check_is_fitted(self, "fit_result_")
        trans = Transitions.from_data(check_paths(X, self.delta))
        ll, _ = transition_terms(self.fit_result_.family, self.fit_result_.xi, trans, self.kernel, score=False)
        return ll

    def score(self, X, y=None):
        """Mean per-transition log-likelihood."""
        return float(np.mean(self.score_samples(X)))

    def transform(self, X):
        check_is_fitted(self, "fit_result_")
        return self.model_.density.cdf(check_angles(X, "X"))

    def inverse_transform(self, X):
        check_is_fitted(self, "fit_result_")
        u = np.asarray(X, dtype=float)
        return np.mod(self.model_._cdf.inverse_cdf(u), TWO_PI)

    def predict(self, X):
        """Mean direction of the state ``delta`` time units after each angle in ``X``."""
        check_is_fitted(self, "fit_result_")
        if self.delta is None:
            raise DomainError("predict needs delta")
        theta = check_angles(X, "X")
        grid = (np.arange(_PREDICT_GRID) + 0.5) * TWO_PI / _PREDICT_GRID
        src = theta.reshape(-1)[:, None]
        if self.kernel == "jump":
            dens = jump_transition_density(self.model_, src, grid[None, :], self.delta)
        else:
            dens = transition_density(self.model_, src[..., None], grid[None, :, None], self.delta)
        m = dens @ np.exp(1j * grid)
        return np.mod(np.angle(m), TWO_PI).reshape(theta.shape)

    def sample(self, n, theta0=None, n_paths=1, random_state=None):
        """Simulate ``n_paths`` paths of ``n`` transitions from the fitted model.

        Starting points default to draws from the stationary density.
        """
        check_is_fitted(self, "fit_result_")
        if self.delta is None:
            raise DomainError("sample needs delta")
        n = check_positive_int(n, "n", minimum=0)
        n_paths = check_positive_int(n_paths, "n_paths")
        rng = as_generator(self.random_state if random_state is None else random_state)
        dens = self.model_.density
        if theta0 is None:
            theta0 = dens.rvs(size=n_paths, random_state=rng)
        theta0 = np.broadcast_to(check_angles(theta0, "theta0"), (n_paths,))
        if self.kernel == "diffusion":
            arr = simulate_paths(self.model_, theta0[:, None], n, self.delta, rng, n_paths)[..., 0]
        else:
            arr = simulate_jump_paths(self.model_, theta0, n, self.delta, rng, n_paths)
        return [PathSample(self.delta, a) for a in arr]
