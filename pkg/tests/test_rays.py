import math

import numpy as np
import pytest

from cosmon.background import BackgroundParams, PhasePoint
from cosmon.rays import (
    escape_analysis, escape_time_closed_form, forward_flowout, hamilton_field, integrate_ray,
    sigma_point, write_rays_csv,
)

BG = BackgroundParams(1.0)


def test_hamilton_field_values():
    v = hamilton_field(BG, PhasePoint(0, 1.0, 0, 1.0, 0.0))
    assert np.allclose(v, [0, 0, 0, 0, 2, 0])
    far = hamilton_field(BG, PhasePoint(0, 1e8, 0, 1.0, 1.0))
    assert far[0] == pytest.approx(-2.0) and far[1] == pytest.approx(2.0)
    assert not np.any(hamilton_field(BG, PhasePoint(0, 3.0, 0, 0.0, 0.0)))


def test_documented_ray():
    q = PhasePoint(0, 1.0, 0, 1.0, 0.0)
    ray = integrate_ray(BG, q, (-1.0, 1.0), s_eval=np.array([-1.0, 0.0, 0.5, 1.0]))
    assert ray.r[-1] == pytest.approx(math.sqrt(5.0), rel=1e-9)
    assert np.all(ray.lam == 1.0) and np.all(ray.eta == 0.0)
    # t(s) = -(u - c) + a atan(u / a) with u = 2 s
    assert ray.t[-1] == pytest.approx(-2.0 + math.atan(2.0), abs=1e-9)


def test_negative_lambda_t_increasing():
    q = sigma_point(BG, 0.0, 3.0, -1.0, 1.0)
    ray = integrate_ray(BG, q, (-5.0, 5.0), n_samples=101)
    assert np.all(np.diff(ray.t) > 0)


def test_closed_form_defect_small():
    q = sigma_point(BackgroundParams(1.7), 0.3, 4.0, 2.5, -1.0)
    ray = integrate_ray(BackgroundParams(1.7), q, (-10, 10), n_samples=201)
    dev = np.abs(ray.closed_form_defect()) / ((1 + ray.s**2) * q.lam**2)
    assert dev.max() < 1e-8


def test_integrate_ray_rejects_off_sigma():
    with pytest.raises(ValueError):
        integrate_ray(BG, PhasePoint(0, 2.0, 0, 1.0, 1.0))


def test_flowout_directions():
    assert forward_flowout(BG, [], 1.0) == []
    far = forward_flowout(BG, [sigma_point(BG, 0.0, 10.0, 1.0, 1.0)], 2.0, r_stop=50.0)
    assert len(far) == 1
    # at the turning point t - t0 ~ c s^3 keeps one sign, so one half-ray survives
    turn = forward_flowout(BG, [PhasePoint(0, 1.0, 0, -1.0, 0.0)], 2.0, r_stop=50.0)
    assert len(turn) == 1
    for ray in far + turn:
        assert np.all(ray.t >= -1e-9) and ray.t.max() == pytest.approx(2.0, abs=1e-6)


def test_escape_single_point():
    rep = escape_analysis(BG, (0.0, 0.0, 1.0, 1.0), 2.0)
    assert np.all(rep.incoming)
    u = math.sqrt(8.0)
    T = u - math.atan(u)  # closed form for c = 0 from r = a to r = 3
    assert rep.T == pytest.approx(T, rel=1e-8)


def test_escape_closed_form_both_signs():
    for lam in (1.0, -1.0):
        for xs in (1.0, -1.0):
            q = sigma_point(BG, 0.5, 1.6, lam, xs)
            rep = escape_analysis(BG, (0.5, 0.5, 1.6, 1.6), 4.0)
            cf = [escape_time_closed_form(1.0, p, 5.0) for p in rep.seeds]
            assert np.allclose(cf, rep.escape_times, atol=1e-7)
            assert escape_time_closed_form(1.0, q, 5.0) < 0.5


def test_escape_outside_region_is_trivial():
    rep = escape_analysis(BG, (0.0, 0.0, 5.0, 5.0), 2.0)
    assert rep.T == pytest.approx(0.0, abs=1e-12) or rep.T <= 10.0
    assert np.all(rep.incoming)


def test_csv_layout(tmp_path):
    ray = integrate_ray(BG, PhasePoint(0, 1.0, 0, 1.0, 0.0), (0.0, 1.0), n_samples=3)
    write_rays_csv(tmp_path / "r.csv", [ray, ray], with_index=True)
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "ray,s,t,r,phi,lambda,xi,eta"
    assert len(lines) == 7 and lines[-1].startswith("1,1.0,")
