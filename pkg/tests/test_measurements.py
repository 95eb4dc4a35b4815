"""Measurement families: ensembles, losses, gradients, clean-loss identities."""

import numpy as np
import pytest

from lrpgd.core import FactorPair, GroundTruth, SymFactor, make_ground_truth, make_rng, phase_ground_truth
from lrpgd.diagnostics import fd_gradient
from lrpgd.measurements import (
    EntrySampling,
    GaussianSensing,
    MeasurementModel,
    MissingGroundTruthError,
    OneBitData,
    PhaseRetrievalData,
    clean_loss,
    clean_model,
    entry_ensemble,
    gaussian_ensemble,
    load_model,
    loss_and_grad_asym,
    loss_and_grad_sym,
    onebit_ensemble,
    onebit_entropy_floor,
    onebit_loss_grad,
    onebit_population,
    phase_ensemble,
    phase_loss_grad,
    save_model,
    sparse_residual,
)
from scipy.special import expit


def gaussian_model(n=10, r_star=2, kappa=100.0, m=160, sigma=0.0, seed=0):
    truth = make_ground_truth(n, r_star, kappa, seed=seed)
    return MeasurementModel(gaussian_ensemble(truth, m, sigma, seed + 1), truth)


class TestGaussianEnsemble:
    def test_noiseless_residual_zero_at_factor(self):
        model = gaussian_model(sigma=0.0)
        x = model.truth.exact_iterate()
        f, grad = loss_and_grad_sym(model, x)
        assert f <= 1e-24
        assert np.abs(grad).max() <= 1e-11

    def test_measurement_count(self):
        model = gaussian_model(n=10, r_star=2, m=2 * 10 * 8, sigma=1e-6)
        assert model.m == 160

    def test_noise_variance_monte_carlo(self):
        zero_truth = GroundTruth(np.zeros((2, 2)), 1, 1.0, np.zeros((2, 1)), np.array([0.0]))
        sigma = 0.3
        data = gaussian_ensemble(zero_truth, 100_000, sigma, seed=5)
        assert np.var(data.y) == pytest.approx(sigma**2, rel=0.05)

    def test_determinism(self):
        truth = make_ground_truth(6, 2, 10.0, seed=0)
        a = gaussian_ensemble(truth, 24, 1e-3, seed=9)
        b = gaussian_ensemble(truth, 24, 1e-3, seed=9)
        assert np.array_equal(a.a, b.a) and np.array_equal(a.y, b.y)


class TestSymmetricLossGrad:
    def test_scalar_case(self):
        # single 1x1 measurement: A=(1), y=2, X=(1): f=(1-2)^2, grad=2*(-1)*2*1
        data = GaussianSensing(np.ones((1, 1, 1)), np.array([2.0]), 0.0, 0)
        f, grad = loss_and_grad_sym(MeasurementModel(data), SymFactor(np.ones((1, 1))))
        assert f == pytest.approx(1.0)
        assert grad[0, 0] == pytest.approx(-4.0)

    def test_finite_difference_oracle(self):
        model = gaussian_model(n=6, r_star=2, kappa=10.0, m=40, sigma=1e-3, seed=2)
        rng = make_rng(3)
        x = rng.standard_normal((6, 3))
        _, grad = loss_and_grad_sym(model, SymFactor(x))
        fd = fd_gradient(lambda v: loss_and_grad_sym(model, SymFactor(v))[0], x)
        assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)

    def test_symmetrization_invariance(self):
        model = gaussian_model(n=6, r_star=2, kappa=10.0, m=30, sigma=1e-3, seed=4)
        sym_a = (model.data.a + model.data.a.transpose(0, 2, 1)) / 2
        sym_model = MeasurementModel(
            GaussianSensing(sym_a, model.data.y, model.data.sigma, 0), model.truth
        )
        x = SymFactor(make_rng(5).standard_normal((6, 2)))
        f1, g1 = loss_and_grad_sym(model, x)
        f2, g2 = loss_and_grad_sym(sym_model, x)
        assert f1 == pytest.approx(f2, abs=1e-12)
        assert np.abs(g1 - g2).max() <= 1e-12


class TestAsymmetricLossGrad:
    def test_zero_factors_zero_gradient(self):
        model = gaussian_model(n=5, m=20, sigma=1e-2, seed=6)
        fp = FactorPair(np.zeros((5, 3)), np.zeros((5, 3)))
        _, gu, gv = loss_and_grad_asym(model, fp)
        assert np.abs(gu).max() == 0 and np.abs(gv).max() == 0

    def test_full_sampling_exact_fit(self):
        truth = make_ground_truth(8, 2, 4.0, symmetric=False, seed=7)
        data = entry_ensemble(truth.mstar, 64, 0.0, 8)
        f, _, _ = loss_and_grad_asym(
            MeasurementModel(data, truth), truth.exact_iterate()
        )
        assert f <= 1e-24

    def test_sparse_equals_dense_oracle(self):
        rng = make_rng(9)
        mstar = rng.standard_normal((20, 5)) @ rng.standard_normal((5, 15))
        data = entry_ensemble(mstar, 90, 1e-2, 10)
        fp = FactorPair(rng.standard_normal((20, 4)), rng.standard_normal((15, 4)))
        f, gu, gv = loss_and_grad_asym(MeasurementModel(data), fp)

        dense_e = np.zeros((20, 15))
        acc = 0.0
        for i, j, y in zip(data.rows, data.cols, data.y_obs):
            res = fp.u[i] @ fp.v[j] - y
            acc += res**2
            dense_e[i, j] = (2.0 / 90) * res
        assert f == pytest.approx(acc / 90, rel=1e-12)
        assert np.abs(gu - dense_e @ fp.v).max() <= 1e-12
        assert np.abs(gv - dense_e.T @ fp.u).max() <= 1e-12

    def test_gaussian_asym_finite_difference(self):
        truth = make_ground_truth(5, 2, 3.0, symmetric=False, seed=11)
        model = MeasurementModel(gaussian_ensemble(truth, 30, 1e-3, 12), truth)
        rng = make_rng(13)
        u, v = rng.standard_normal((5, 2)), rng.standard_normal((5, 2))
        _, gu, gv = loss_and_grad_asym(model, FactorPair(u, v))
        fd_u = fd_gradient(lambda w: loss_and_grad_asym(model, FactorPair(w, v))[0], u)
        fd_v = fd_gradient(lambda w: loss_and_grad_asym(model, FactorPair(u, w))[0], v)
        assert np.linalg.norm(gu - fd_u) <= 1e-6 * np.linalg.norm(fd_u)
        assert np.linalg.norm(gv - fd_v) <= 1e-6 * np.linalg.norm(fd_v)


class TestSparseResidual:
    def test_zero_on_fit(self):
        truth = make_ground_truth(6, 2, 2.0, symmetric=False, seed=14)
        data = entry_ensemble(truth.mstar, 20, 0.0, 15)
        e = sparse_residual(data, truth.exact_iterate())
        assert np.abs(e.toarray()).max() <= 1e-14

    def test_single_entry_formula(self):
        # one observed entry (1,1) with y=0 and (uv^T)_11 = 3: E_11 = 2*3
        data = EntrySampling(
            np.array([1]), np.array([1]), np.array([0.0]), (3, 3), 0.0, 0
        )
        fp = FactorPair(np.array([[0.0], [3.0], [0.0]]), np.array([[0.0], [1.0], [0.0]]))
        e = sparse_residual(data, fp)
        assert e[1, 1] == pytest.approx(6.0)
        assert e.nnz == 1

    def test_matches_dense_restriction(self):
        rng = make_rng(16)
        mstar = rng.standard_normal((12, 3)) @ rng.standard_normal((3, 9))
        data = entry_ensemble(mstar, 40, 1e-3, 17)
        fp = FactorPair(rng.standard_normal((12, 3)), rng.standard_normal((9, 3)))
        e = sparse_residual(data, fp).toarray()
        for i, j, y in zip(data.rows, data.cols, data.y_obs):
            assert e[i, j] == pytest.approx((2.0 / 40) * (fp.u[i] @ fp.v[j] - y), abs=1e-14)

    def test_duplicate_entries_rejected(self):
        with pytest.raises(ValueError):
            EntrySampling(
                np.array([0, 0]), np.array([1, 1]), np.zeros(2), (2, 2), 0.0, 0
            )


class TestOneBit:
    def test_population_at_zero_matrix(self):
        zero = GroundTruth(np.zeros((4, 4)), 1, 1.0, np.zeros((4, 1)), np.array([0.0]))
        data = onebit_population(zero)
        assert np.allclose(data.alpha_hat, 0.5)

    def test_binomial_concentration(self):
        truth = make_ground_truth(10, 2, 100.0, seed=0)
        data = onebit_ensemble(truth, 100_000, 0.0, seed=1)
        assert np.abs(data.alpha_hat - expit(truth.mstar)).max() <= 0.01

    def test_saturation(self):
        big = GroundTruth(np.full((3, 3), 40.0), 1, 1.0, np.zeros((3, 1)), np.array([1.0]))
        data = onebit_ensemble(big, 50, 0.0, seed=2)
        assert np.all(data.alpha_hat == 1.0)

    def test_symmetric_entropy_value(self):
        # alpha=1/2 everywhere and X=0: every term is log 2 (summed loss)
        data = OneBitData(np.full((5, 5), 0.5), None, 0.0, 0)
        f, grad = onebit_loss_grad(data, SymFactor(np.zeros((5, 2))))
        assert f == pytest.approx(25 * np.log(2), rel=1e-12)
        assert np.abs(grad).max() == 0
        assert onebit_entropy_floor(data) == pytest.approx(25 * np.log(2), rel=1e-12)

    def test_stationary_at_matched_frequencies(self):
        x = make_rng(3).standard_normal((5, 2)) * 0.5
        data = OneBitData(expit(x @ x.T), None, 0.0, 0)
        _, grad = onebit_loss_grad(data, SymFactor(x))
        assert np.abs(grad).max() <= 1e-14

    def test_finite_difference_oracle(self):
        truth = make_ground_truth(5, 2, 3.0, seed=4)
        data = onebit_ensemble(truth, 500, 1e-2, seed=5)
        x = 0.6 * make_rng(6).standard_normal((5, 2))
        _, grad = onebit_loss_grad(data, SymFactor(x))
        fd = fd_gradient(lambda v: onebit_loss_grad(data, SymFactor(v))[0], x)
        assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)

    def test_trials_validation(self):
        with pytest.raises(ValueError):
            OneBitData(np.full((2, 2), 0.5), 0, 0.0, 0)
        with pytest.raises(ValueError):
            onebit_ensemble(make_ground_truth(3, 1, 1.0), 0, 0.0, 0)


class TestPhaseRetrieval:
    def test_unit_vector_measurement(self):
        # z = e1 measured by a = e1: y = |<a, z>|^2 = 1
        z = np.zeros((4, 1), dtype=complex)
        z[0] = 1.0
        a = np.zeros((1, 4), dtype=complex)
        a[0, 0] = 1.0
        y = np.real(np.einsum("mi,ij,mj->m", a.conj(), z @ z.conj().T, a))
        assert y[0] == pytest.approx(1.0)
        data = PhaseRetrievalData(a, y, 0.0, 0)
        f, grad = phase_loss_grad(data, z)
        assert f <= 1e-30

    def test_global_optimum(self):
        truth = phase_ground_truth(6, seed=0)
        model = MeasurementModel(phase_ensemble(truth, 40, 0.0, 1), truth)
        f, grad = loss_and_grad_sym(model, SymFactor(truth.factor))
        assert f <= 1e-24
        assert np.abs(grad).max() <= 1e-11

    def test_finite_difference_real_embedding(self):
        truth = phase_ground_truth(6, seed=2)
        data = phase_ensemble(truth, 30, 1e-3, 3)
        rng = make_rng(4)
        x = rng.standard_normal((6, 1)) + 1j * rng.standard_normal((6, 1))
        _, grad = phase_loss_grad(data, x)
        fd = fd_gradient(lambda v: phase_loss_grad(data, v)[0], x)
        assert np.linalg.norm(grad - fd) <= 1e-6 * np.linalg.norm(fd)

    def test_loss_is_real_for_hermitian_pairing(self):
        truth = phase_ground_truth(4, seed=5)
        data = phase_ensemble(truth, 10, 0.0, 6)
        x = make_rng(7).standard_normal((4, 2)) + 1j * make_rng(8).standard_normal((4, 2))
        f, _ = phase_loss_grad(data, x)
        assert isinstance(f, float)


class TestCleanLoss:
    def test_exact_factor_zero(self):
        model = gaussian_model(sigma=1e-3)
        assert clean_loss(model, model.truth.exact_iterate()) <= 1e-20

    def test_noiseless_identity(self):
        model = gaussian_model(sigma=0.0, seed=3)
        x = SymFactor(make_rng(9).standard_normal((10, 4)))
        f, _ = loss_and_grad_sym(model, x)
        assert clean_loss(model, x) == pytest.approx(f, rel=1e-12)

    def test_direct_sum_oracle(self):
        model = gaussian_model(n=6, r_star=2, m=25, sigma=1e-2, seed=10)
        x = SymFactor(make_rng(11).standard_normal((6, 3)))
        delta = x.product() - model.truth.mstar
        oracle = np.mean([np.sum(a * delta) ** 2 for a in model.data.a])
        assert clean_loss(model, x) == pytest.approx(oracle, rel=1e-12)

    def test_quadratic_decomposition_identity(self):
        model = gaussian_model(n=8, r_star=2, m=50, sigma=1e-2, seed=12)
        x = SymFactor(make_rng(13).standard_normal((8, 3)))
        m = model.m
        f, _ = loss_and_grad_sym(model, x)
        f_c = clean_loss(model, x)
        clean_y = model.data.y - (model.data.y - np.einsum("mij,ij->m", model.data.a, model.truth.mstar))
        eps = model.data.y - clean_y
        cross = (2.0 / m) * np.dot(np.einsum("mij,ij->m", model.data.a, x.product() - model.truth.mstar), eps)
        assert f - f_c - np.sum(eps**2) / m + cross == pytest.approx(0.0, abs=1e-12)

    def test_requires_truth(self):
        model = gaussian_model(sigma=0.0)
        bare = MeasurementModel(model.data)
        with pytest.raises(MissingGroundTruthError):
            clean_loss(bare, SymFactor(np.zeros((10, 2))))

    def test_onebit_clean_is_population_loss(self):
        truth = make_ground_truth(5, 2, 2.0, seed=14)
        model = MeasurementModel(onebit_ensemble(truth, 100, 0.0, 15), truth)
        x = SymFactor(make_rng(16).standard_normal((5, 2)))
        expected, _ = onebit_loss_grad(OneBitData(expit(truth.mstar), None, 0.0, 0), x)
        assert clean_loss(model, x) == pytest.approx(expected, rel=1e-12)

    def test_clean_model_gradient_path(self):
        model = gaussian_model(sigma=1e-2, seed=17)
        cm = clean_model(model)
        f, _ = loss_and_grad_sym(cm, model.truth.exact_iterate())
        assert f <= 1e-20


class TestSerialization:
    @pytest.mark.parametrize("family", ["gaussian", "entry", "onebit", "onebit-pop", "phase"])
    def test_roundtrip(self, family, tmp_path):
        truth = make_ground_truth(6, 2, 10.0, seed=18)
        if family == "gaussian":
            data = gaussian_ensemble(truth, 20, 1e-4, 19)
        elif family == "entry":
            data = entry_ensemble(truth.mstar, 18, 1e-4, 20)
        elif family == "onebit":
            data = onebit_ensemble(truth, 100, 1e-3, 21)
        elif family == "onebit-pop":
            data = onebit_population(truth, 0.0, 22)
        else:
            data = phase_ensemble(phase_ground_truth(6, 23), 15, 1e-4, 24)
        model = MeasurementModel(data, truth)
        path = tmp_path / "model.txt"
        save_model(path, model)
        loaded = load_model(path)
        assert loaded.family == model.family
        assert loaded.data.sigma == data.sigma
        assert loaded.data.seed == data.seed
        if family == "gaussian":
            assert np.array_equal(loaded.data.a, data.a)
            assert np.array_equal(loaded.data.y, data.y)
        elif family == "entry":
            assert np.array_equal(loaded.data.rows, data.rows)
            assert np.array_equal(loaded.data.cols, data.cols)
            assert np.array_equal(loaded.data.y_obs, data.y_obs)
            assert loaded.data.shape == data.shape
        elif family.startswith("onebit"):
            assert np.array_equal(loaded.data.alpha_hat, data.alpha_hat)
            assert loaded.data.trials == data.trials
        else:
            assert np.array_equal(loaded.data.a, data.a)
            assert np.array_equal(loaded.data.y, data.y)
