import numpy as np
import pytest

from cropmap.dataset import Fingerprint, LabeledDataset
from cropmap.series import ObservationSeries, SarObservation, SpectralObservation


def blob_dataset(n_per_class=40, steps=5, channels=1, seed=0, spread=0.3):
    """Three well-separated Gaussian blobs, one per class."""
    rng = np.random.default_rng(seed)
    X, y = [], []
    for c, center in enumerate((0.0, 5.0, 10.0)):
        X.append(rng.normal(center, spread, size=(n_per_class, steps, channels)))
        y.extend([c] * n_per_class)
    fp = Fingerprint(method="linear_7d", start_doy=111, interval_days=7,
                     steps=steps, channel_names=tuple(f"b{i}" for i in range(channels)))
    return LabeledDataset(X=np.concatenate(X), y=np.array(y), fingerprint=fp)


def flat_obs(doy, value, qa_valid=True):
    """Observation with all six bands equal to ``value``."""
    return SpectralObservation(doy, (value,) * 6, qa_valid)


def series_from_values(pixel_id, doys, values, qa=None, sar=None):
    """Series with per-observation constant bands; qa defaults to all valid."""
    qa = [True] * len(doys) if qa is None else qa
    obs = [flat_obs(d, v, q) for d, v, q in zip(doys, values, qa)]
    return ObservationSeries(pixel_id, obs, sar=sar)


def sar_ramp(doys, vv0=-14.0, vh0=-21.0, slope=0.05):
    return [SarObservation(d, vv0 + slope * i, vh0 + slope * i) for i, d in enumerate(doys)]


def fd_check(build_loss, params, eps=1e-6, rtol=1e-4, max_coords=8, seed=0):
    """Central finite differences on sampled coordinates of each parameter."""
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    rng = np.random.default_rng(seed)
    for p in params:
        assert p.grad is not None, "parameter missed by backward"
        assert p.grad.shape == p.data.shape
        flat = p.data.reshape(-1)
        gflat = p.grad.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        for idx in coords:
            old = flat[idx]
            flat[idx] = old + eps
            up = float(build_loss().data)
            flat[idx] = old - eps
            down = float(build_loss().data)
            flat[idx] = old
            numeric = (up - down) / (2.0 * eps)
            analytic = gflat[idx]
            err = abs(numeric - analytic)
            # differencing cannot resolve gradients below its own rounding
            # noise, ~eps_machine * |loss| / step
            fd_noise = 100.0 * np.finfo(float).eps * max(abs(up), abs(down), 1.0) / (2.0 * eps)
            bound = max(rtol * max(abs(numeric), abs(analytic)), fd_noise)
            assert err <= bound, (
                f"grad mismatch at {idx}: numeric {numeric}, analytic {analytic}"
            )


@pytest.fixture
def rng():
    return np.random.default_rng(42)
