import math

import numpy as np
import pytest

from subspec.discretization import (
    assemble_kernel,
    auto_truncation,
    build_quadrature,
    convergence_sweep,
    kink_bias_estimate,
    matrix_to_csv,
    operator_norm,
)
from subspec.errors import (
    InvalidParameterError,
    NoDecayDetectedError,
    NonHermitianError,
    SlowDecayWarning,
)
from subspec.green_kernel import KernelKind, factor, free, robin
from subspec.subordinate import SubordinateCache


def test_two_point_gauss_legendre():
    q = build_quadrature(1.0, 1, 2)
    assert np.allclose(q.nodes, [0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    assert np.allclose(q.weights, [0.5, 0.5])
    # degree-3 exactness: int_0^1 s^3 = 1/4
    assert np.sum(q.weights * q.nodes**3) == pytest.approx(0.25, rel=1e-15)


def test_weights_sum_to_X():
    q = build_quadrature(13.8, 60, 10)
    assert np.sum(q.weights) == pytest.approx(13.8, rel=1e-14)
    assert np.all(np.diff(q.nodes) > 0.0)


def test_quadrature_validation():
    with pytest.raises(InvalidParameterError):
        build_quadrature(0.0, 1, 2)
    with pytest.raises(InvalidParameterError):
        build_quadrature(1.0, 0, 2)
    with pytest.raises(InvalidParameterError):
        build_quadrature(1.0, 1, 1)


def test_auto_truncation_exp(phi1):
    X = auto_truncation(phi1, 1e-6)
    assert X == pytest.approx(-math.log(1e-6), abs=0.05)


def test_auto_truncation_stretched(phi3):
    X = auto_truncation(phi3, 1e-6)
    assert 2.7 <= X <= 3.0
    # postconditions: ratio below eps, tail below eps^2 ||phi||^2, minimality
    lp0 = float(phi3.log_phi(np.asarray(0.0)))
    assert float(phi3.log_phi(np.asarray(X))) - lp0 <= math.log(1e-6) + 1e-12
    assert phi3.decay.tail_l2sq(X) <= (1e-6 * phi3.l2_norm_phi) ** 2 * (1 + 1e-9)
    back = X - 0.05
    ratio_ok = float(phi3.log_phi(np.asarray(back))) - lp0 <= math.log(1e-6)
    tail_ok = phi3.decay.tail_l2sq(back) <= (1e-6 * phi3.l2_norm_phi) ** 2
    assert not (ratio_ok and tail_ok)


def test_auto_truncation_power_slow_decay(phi2):
    with pytest.warns(SlowDecayWarning):
        X = auto_truncation(phi2, 1e-6)
    assert X == pytest.approx(1e6 - 1.0, rel=5e-2)
    with pytest.raises(NoDecayDetectedError):
        auto_truncation(phi2, 1e-30)  # would need X ~ 1e30


def test_assembly_symmetric_nonnegative(phi1):
    quad = build_quadrature(30.0, 60, 10)
    K = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
    assert K.hermitian
    assert np.array_equal(K.entries, K.entries.T)
    assert np.all(K.entries >= 0.0)
    assert operator_norm(K) <= 1.0 + 1e-9  # ||G|| = 1 for the free profile


def test_free_kind_equals_exp_decay_dirichlet(phi1):
    quad = build_quadrature(10.0, 20, 6)
    K1 = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
    K2 = assemble_kernel(None, quad, free(1.0))
    assert np.allclose(K1.entries, K2.entries, rtol=1e-14)


def test_robin_assembly_is_rank_one_shift(phi1):
    quad = build_quadrature(10.0, 20, 6)
    Kd = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
    Kg = assemble_kernel(phi1, quad, robin(-1.0))
    phi = np.exp(phi1.log_phi(quad.nodes))
    sw = np.sqrt(quad.weights)
    shift = -np.outer(sw * phi, sw * phi)
    assert np.allclose(Kg.entries, Kd.entries + shift, atol=1e-15)
    Kc = assemble_kernel(phi1, quad, robin(1.0 + 0.5j))
    assert not Kc.hermitian
    assert np.iscomplexobj(Kc.entries)


def test_nystrom_similarity_preserves_spectrum(phi1):
    # eigenvalues of W^{1/2} K W^{1/2} equal those of K W on a 6x6 instance
    quad = build_quadrature(3.0, 3, 2)
    K = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
    raw = K.unweighted()
    sym = np.sort(np.linalg.eigvalsh(K.entries))
    plain = np.sort(np.linalg.eigvals(raw @ np.diag(quad.weights)).real)
    assert np.allclose(sym, plain, atol=1e-12)


def test_factorization_grid_consistency(phi1, phi3):
    rng = np.random.default_rng(3)
    for m, X in ((phi1, 13.8155), (phi3, 4.0)):
        quad = build_quadrature(X, max(40, int(4 * X)), 10)
        Gq = assemble_kernel(m, quad, KernelKind("dirichlet"), psi_source="quadrature")
        Mh = assemble_kernel(m, quad, factor("M"))
        for _ in range(10):
            f = rng.standard_normal(quad.n)
            lhs = f @ Gq.entries @ f
            rhs = float(np.sum((Mh.entries @ f) ** 2))
            assert abs(lhs - rhs) <= 1e-8 * float(f @ f)


def test_positivity_sampled_gram(phi2):
    quad = build_quadrature(30.0, 60, 10)
    K = assemble_kernel(phi2, quad, KernelKind("dirichlet"))
    mu = np.linalg.eigvalsh(K.entries)
    assert mu.min() >= -1e-10 * mu.max()


def test_bounded_map_property(phi1):
    # |(G f)(x)| / psi(x) <= ||phi|| ||f|| pointwise
    quad = build_quadrature(13.8155, 56, 10)
    cache = SubordinateCache(phi1, quad.nodes)
    K = assemble_kernel(phi1, quad, KernelKind("dirichlet"), cache=cache)
    rng = np.random.default_rng(5)
    psi = np.exp(cache.log_psi_nodes)
    for _ in range(10):
        f = rng.standard_normal(quad.n)
        g = K.apply_to_function(f)
        fnorm = math.sqrt(float(np.sum(quad.weights * f * f)))
        assert np.max(np.abs(g) / psi) <= phi1.l2_norm_phi * fnorm + 1e-6


def test_operator_norm_requires_hermitian(phi1):
    quad = build_quadrature(5.0, 10, 4)
    M = assemble_kernel(phi1, quad, factor("M"))
    with pytest.raises(NonHermitianError):
        operator_norm(M)


def test_convergence_sweep_degenerate(phi3):
    res = convergence_sweep(phi3, KernelKind("dirichlet"), [4.0], [200], n_keep=5)
    assert len(res.rows) == 1
    assert not res.converged  # single cell: no refinement, no claim


def test_convergence_sweep_monotone_in_X(phi1):
    res = convergence_sweep(phi1, KernelKind("dirichlet"), [10.0, 20.0, 30.0], [400],
                            n_keep=3)
    tops = [row.mu[0] for row in res.rows]
    assert tops[0] < tops[1] < tops[2] <= 1.0 + 1e-9  # domain monotonicity toward 1


def test_kink_bias_matches_measurement(phi1):
    # the uniform Nystrom bias is the reference GL cell error on |x - y|/2
    mus = {}
    for panels in (60, 120):
        quad = build_quadrature(15.0, panels, 10)
        K = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
        mus[panels] = np.linalg.eigvalsh(K.entries)[-1]
        bias = kink_bias_estimate(quad)
    measured = (mus[60] - mus[120]) / (1.0 - 0.25)  # Richardson at h/2
    assert measured == pytest.approx(kink_bias_estimate(build_quadrature(15.0, 60, 10)),
                                     rel=0.1)


def test_matrix_csv_roundtrip(tmp_path, phi1):
    quad = build_quadrature(2.0, 2, 3)
    K = assemble_kernel(phi1, quad, KernelKind("dirichlet"))
    path = tmp_path / "K.csv"
    matrix_to_csv(K, path)
    back = np.loadtxt(path, delimiter=",")
    assert np.array_equal(back, K.entries)  # %.17g round-trips doubles
