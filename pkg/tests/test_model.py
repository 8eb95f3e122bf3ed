import warnings

import numpy as np
import pytest

from sispca.data import DataMatrix
from sispca.errors import ConfigError, DimensionError
from sispca.kernels import SupervisionTarget as T
from sispca.kernels import center_kernel, hsic, linear_hsic
from sispca.metrics import principal_angles
from sispca.model import (
    FitConfig,
    SubspaceSpec,
    eigen_update,
    fit,
    fit_general,
    fit_linear,
    general_loss_and_grad,
    init_order,
    objective,
    polar_factor,
    top_features,
    transform,
)

from conftest import explicit_H


def _orth_err(U):
    return np.linalg.norm(U.T @ U - np.eye(U.shape[1]))


def _dense_top(M, d):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    idx = np.argsort(-w)[:d]
    return w[idx], V[:, idx]


def random_problem(rng, n=None, p=None, m=None):
    n = n or int(rng.integers(15, 40))
    p = p or int(rng.integers(4, 9))
    m = m or int(rng.integers(2, 4))
    X = rng.standard_normal((n, p)) @ rng.standard_normal((p, p))
    specs = []
    for j in range(m):
        kind = rng.integers(0, 3)
        d = int(rng.integers(1, 3))
        if kind == 0:
            t = T.categorical(rng.integers(0, 3, size=n))
        elif kind == 1:
            t = T.continuous(rng.standard_normal((n, int(rng.integers(1, 3)))))
        else:
            t = T.identity()
        specs.append(SubspaceSpec(f"s{j}", d, t))
    return X, specs


class TestObjective:
    def test_single_subspace(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((10, 4)))
        y = rng.integers(0, 2, 10)
        spec = SubspaceSpec("a", 2, T.categorical(y))
        Z = X.values @ polar_factor(rng.standard_normal((4, 2)))
        obj = objective(X, [Z], [spec], lam=123.0)
        assert obj.disentanglement == 0.0
        assert obj.value == pytest.approx(hsic(Z @ Z.T, spec.target.kernel().values), rel=1e-10)

    def test_orthogonal_scores_no_penalty(self):
        X = DataMatrix.from_array(np.eye(4)[:, :4] - 0.25)
        Z1 = X.values[:, [0]]
        Z2 = X.values[:, [1]] - X.values[:, [0]] * (X.values[:, 0] @ X.values[:, 1]) / (X.values[:, 0] @ X.values[:, 0])
        specs = [SubspaceSpec("a", 1, T.identity()), SubspaceSpec("b", 1, T.identity())]
        assert abs(objective(X, [Z1, Z2], specs, 5.0).disentanglement) < 1e-12

    def test_matches_hsic_composition(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((10, 4)))
        specs = [
            SubspaceSpec("a", 2, T.categorical(rng.integers(0, 2, 10))),
            SubspaceSpec("b", 1, T.continuous(rng.standard_normal(10))),
        ]
        Us = [polar_factor(rng.standard_normal((4, 2))), polar_factor(rng.standard_normal((4, 1)))]
        Zs = [X.values @ U for U in Us]
        ref_sup = sum(hsic(Z @ Z.T, s.target.kernel().values) for Z, s in zip(Zs, specs))
        ref_dis = hsic(Zs[0] @ Zs[0].T, Zs[1] @ Zs[1].T)
        obj = objective(X, Zs, specs, 1.0)
        assert obj.supervision == pytest.approx(ref_sup, rel=1e-10)
        assert obj.disentanglement == pytest.approx(ref_dis, rel=1e-10)
        assert obj.value == pytest.approx(ref_sup - ref_dis, rel=1e-10)

    def test_gaussian_path_matches_hsic(self, rng):
        from sispca.kernels import gaussian_kernel

        X = DataMatrix.from_array(rng.standard_normal((10, 4)))
        specs = [
            SubspaceSpec("a", 2, T.categorical(rng.integers(0, 2, 10)), latent_kernel="gaussian"),
            SubspaceSpec("b", 1, T.identity()),
        ]
        Zs = [X.values @ polar_factor(rng.standard_normal((4, k))) for k in (2, 1)]
        Ka = gaussian_kernel(Zs[0]).values
        Kb = Zs[1] @ Zs[1].T
        ref_sup = hsic(Ka, specs[0].target.kernel().values) + hsic(Kb, np.eye(10))
        ref_dis = hsic(Ka, Kb)
        obj = objective(X, Zs, specs, 0.5)
        assert obj.supervision == pytest.approx(ref_sup, rel=1e-10)
        assert obj.disentanglement == pytest.approx(ref_dis, rel=1e-10)

    def test_row_mismatch(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((10, 4)))
        with pytest.raises(DimensionError):
            objective(X, [np.zeros((9, 1))], [SubspaceSpec("a", 1, T.identity())], 0.0)


class TestEigenUpdate:
    def test_identity_supervision_is_pca(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((20, 5)))
        res = eigen_update(X, center_kernel(np.eye(20)), 2)
        _, _, Vt = np.linalg.svd(X.values, full_matrices=False)
        assert np.max(principal_angles(res.U, Vt[:2].T)) < 1e-8
        for k in range(2):
            assert abs(abs(res.U[:, k] @ Vt[k])) == pytest.approx(1.0, abs=1e-10)

    def test_rank_one_data(self, rng):
        X = np.zeros((10, 4))
        X[:, 0] = rng.standard_normal(10)
        res = eigen_update(DataMatrix.from_array(X), center_kernel(np.eye(10)), 1)
        np.testing.assert_allclose(res.U[:, 0], [1, 0, 0, 0], atol=1e-12)

    def test_delta_supervision_eigenvalues(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((12, 5)))
        y = rng.integers(0, 3, 12)
        K = T.categorical(y).kernel().values
        H = explicit_H(12)
        res = eigen_update(X, H @ K @ H, 2)
        w, _ = _dense_top(X.values.T @ H @ K @ H @ X.values, 2)
        np.testing.assert_allclose(res.explained_variance, w, rtol=1e-9)
        assert _orth_err(res.U) < 1e-10
        np.testing.assert_array_equal(res.Z, X.values @ res.U)

    def test_sign_convention(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((12, 5)))
        res = eigen_update(X, center_kernel(np.eye(12)), 3)
        for k in range(3):
            col = res.U[:, k]
            assert col[np.argmax(np.abs(col))] > 0

    def test_bad_shapes(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((6, 3)))
        with pytest.raises(DimensionError):
            eigen_update(X, np.eye(5), 1)
        with pytest.raises(ConfigError):
            eigen_update(X, np.eye(6), 4)


class TestFitLinear:
    def test_pca_degenerate(self, rng):
        Xr = rng.standard_normal((30, 6)) @ rng.standard_normal((6, 6))
        model = fit_linear(Xr, [SubspaceSpec("pc", 3, T.identity())], FitConfig(lam=4.0))
        Xc = Xr - Xr.mean(axis=0)
        U, s, Vt = np.linalg.svd(Xc, full_matrices=False)
        Zref = U[:, :3] * s[:3]
        Z = model["pc"].Z
        signs = np.sign(np.sum(Z * Zref, axis=0))
        np.testing.assert_allclose(Z, Zref * signs, atol=1e-8)
        np.testing.assert_allclose(model["pc"].explained_variance, s[:3] ** 2, rtol=1e-9)

    def test_lambda_zero_is_spca(self, rng):
        X = DataMatrix.from_array(rng.standard_normal((25, 6)))
        y1, y2 = rng.integers(0, 3, 25), rng.standard_normal((25, 2))
        specs = [SubspaceSpec("a", 2, T.categorical(y1)), SubspaceSpec("b", 2, T.continuous(y2))]
        model = fit_linear(X, specs, FitConfig(lam=0.0))
        H = explicit_H(25)
        for s, spec in zip(model.subspaces, specs):
            K = spec.target.kernel().values
            w, V = _dense_top(X.values.T @ H @ K @ H @ X.values, 2)
            np.testing.assert_allclose(s.explained_variance, w, rtol=1e-9)
            assert np.max(principal_angles(s.U, V)) < 1e-6

    def test_invariants_on_random_problems(self, rng):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for _ in range(20):
                X, specs = random_problem(rng)
                m = fit_linear(X, specs, FitConfig(lam=float(rng.uniform(0.1, 50)), max_iter=50))
                tr = m.objective_trace
                assert np.all(np.diff(tr) >= -1e-9 * np.maximum(1, np.abs(tr[1:])))
                for s in m.subspaces:
                    assert _orth_err(s.U) <= 1e-8
                    assert np.all(np.diff(s.explained_variance) <= 1e-9 * max(1, np.abs(s.explained_variance).max()))
                    Xc = X - X.mean(axis=0)
                    np.testing.assert_allclose(s.Z, Xc @ s.U, atol=1e-10)

    def test_trace_matches_objective(self, rng):
        X, specs = random_problem(rng, n=30, p=6, m=2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            m = fit_linear(X, specs, FitConfig(lam=2.0))
        obj = objective(X, m.subspaces, specs, 2.0)
        assert m.objective_trace[-1] == pytest.approx(obj.value, rel=1e-9)

    def test_disentanglement_on_disjoint_blocks(self, rng):
        # the optimum trades supervision for independence, so the residual
        # HSIC shrinks like 1 / (lam * s^2)^2 for data scale s
        n = 200
        A, B = rng.standard_normal((n, 3)), rng.standard_normal((n, 3))
        X = np.hstack([A, B])
        y1 = A @ np.array([1.0, 0.5, 0.0])
        y2 = B @ np.array([0.0, 1.0, -1.0])
        specs = [SubspaceSpec("a", 1, T.continuous(y1)), SubspaceSpec("b", 1, T.continuous(y2))]
        h0 = linear_hsic(*fit_linear(X, specs, FitConfig(lam=0.0)).scores)
        ratios = []
        for lam in (10.0, 100.0, 1000.0):
            m = fit_linear(X, specs, FitConfig(lam=lam, max_iter=5000, rel_tol=1e-12))
            ratios.append(linear_hsic(*m.scores) / h0)
        assert ratios[0] < 1e-2
        assert ratios[1] < ratios[0] / 50 and ratios[2] < ratios[1] / 50
        assert ratios[2] <= 1e-6
        # same target geometry at 10x the feature scale: lam = 10 suffices
        Xs = 10.0 * X
        h0s = linear_hsic(*fit_linear(Xs, specs, FitConfig(lam=0.0)).scores)
        m = fit_linear(Xs, specs, FitConfig(lam=10.0, max_iter=5000, rel_tol=1e-12))
        assert linear_hsic(*m.scores) <= 1e-6 * h0s

    def test_effective_dimension(self, rng):
        X = rng.standard_normal((40, 6))
        with pytest.warns(RuntimeWarning, match="explained variance"):
            m = fit_linear(X, [SubspaceSpec("a", 3, T.continuous(rng.standard_normal(40)))])
        ev = m["a"].explained_variance
        assert np.sum(ev > 1e-8 * ev.max()) == 1

    def test_errors(self, rng):
        X = rng.standard_normal((10, 3))
        with pytest.raises(ConfigError):
            fit_linear(X, [])
        with pytest.raises(ConfigError):
            fit_linear(X, [SubspaceSpec("a", 4, T.identity())])
        with pytest.raises(ConfigError):
            fit_linear(X, [SubspaceSpec("a", 1, T.identity(), latent_kernel="gaussian")])
        with pytest.raises(ConfigError):
            fit_linear(X, [SubspaceSpec("a", 1, T.identity()), SubspaceSpec("a", 1, T.identity())])
        with pytest.raises(ConfigError):
            FitConfig(lam=-1)
        with pytest.raises(ConfigError):
            FitConfig(rel_tol=1.0)

    def test_deterministic(self, rng):
        X, specs = random_problem(rng, n=30, p=6, m=3)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            a = fit_linear(X, specs, FitConfig(lam=3.0))
            b = fit_linear(X, specs, FitConfig(lam=3.0))
        for sa, sb in zip(a.subspaces, b.subspaces):
            np.testing.assert_array_equal(sa.U, sb.U)

    def test_config_roundtrip(self):
        c = FitConfig(lam=2.5, max_iter=7, algorithm="general", seed=3)
        assert FitConfig.from_dict(c.to_dict()) == c
        with pytest.raises(ConfigError):
            FitConfig.from_dict({"lambda": 1, "bogus": 2})


class TestInitOrder:
    def test_single(self, rng):
        assert init_order(rng.standard_normal((10, 3)), [SubspaceSpec("a", 1, T.identity())]) == [0]

    def test_ties_keep_declaration_order(self, rng):
        X = rng.standard_normal((10, 3))
        y = rng.integers(0, 2, 10)
        specs = [SubspaceSpec("a", 1, T.categorical(y)), SubspaceSpec("b", 1, T.categorical(y))]
        assert init_order(X, specs) == [0, 1]

    def test_strong_first(self, rng):
        n = 300
        s1 = rng.integers(0, 2, n).astype(float)
        s2 = 10.0 * rng.standard_normal(n)
        noise = rng.standard_normal((n, 4))
        X = np.c_[s1 + 0.3 * noise[:, 0], s2 + 0.3 * noise[:, 1], noise[:, 2:]]
        specs = [SubspaceSpec("weak", 1, T.continuous(s1)), SubspaceSpec("strong", 1, T.continuous(s2))]
        assert init_order(X, specs) == [1, 0]
        assert fit_linear(X, specs, FitConfig(lam=1.0)).order == (1, 0)
        assert fit_linear(X, specs, FitConfig(lam=1.0, init_ordering="fixed")).order == (0, 1)


class TestFitGeneral:
    def _fd_check(self, rng, latent):
        X = DataMatrix.from_array(rng.standard_normal((8, 4)))
        n = 8
        specs = [
            SubspaceSpec("a", 2, T.categorical(rng.integers(0, 2, n)), latent_kernel=latent),
            SubspaceSpec("b", 1, T.identity(), latent_kernel=latent),
        ]
        KY = [center_kernel(s.target.kernel(n)).values for s in specs]
        Us = [rng.standard_normal((4, 2)), rng.standard_normal((4, 1))]
        bws = [0.7, 1.3] if latent == "gaussian" else [None, None]
        lam = 1.7
        _, grads = general_loss_and_grad(X.values, Us, KY, specs, lam, bws)
        h = 1e-6
        for j in range(2):
            fd = np.zeros_like(Us[j])
            for idx in np.ndindex(Us[j].shape):
                Up = [u.copy() for u in Us]
                Um = [u.copy() for u in Us]
                Up[j][idx] += h
                Um[j][idx] -= h
                fp, _ = general_loss_and_grad(X.values, Up, KY, specs, lam, bws)
                fm, _ = general_loss_and_grad(X.values, Um, KY, specs, lam, bws)
                fd[idx] = (fp - fm) / (2 * h)
            assert np.linalg.norm(grads[j] - fd) <= 1e-5 * np.linalg.norm(fd)

    def test_linear_gradient_fd(self, rng):
        for _ in range(5):
            self._fd_check(rng, "linear")

    def test_gaussian_gradient_fd(self, rng):
        for _ in range(5):
            self._fd_check(rng, "gaussian")

    def test_single_gaussian_loss_nonincreasing(self, rng):
        X = rng.standard_normal((40, 5)) @ np.diag([3, 2, 1, 0.5, 0.2])
        spec = SubspaceSpec("a", 2, T.identity(), latent_kernel="gaussian")
        m = fit_general(X, [spec], FitConfig(algorithm="general", max_iter=50, rel_tol=1e-12, learning_rate=1e-2))
        loss = -m.objective_trace
        assert len(loss) == 51
        assert np.all(np.diff(loss) <= 1e-9 * np.maximum(1, np.abs(loss[1:])))
        assert _orth_err(m["a"].U) <= 1e-8

    def test_orthonormal_at_every_iteration(self, rng):
        X = rng.standard_normal((30, 5))
        specs = [SubspaceSpec("a", 2, T.categorical(rng.integers(0, 2, 30)), latent_kernel="gaussian"),
                 SubspaceSpec("b", 2, T.identity())]
        for it in (1, 5, 20):
            m = fit_general(X, specs, FitConfig(lam=1.0, algorithm="general", max_iter=it))
            for s in m.subspaces:
                assert _orth_err(s.U) <= 1e-8
                np.testing.assert_allclose(s.Z, (X - X.mean(0)) @ s.U, atol=1e-10)

    def test_linear_kernels_agree_with_linear_solver(self, rng):
        X = rng.standard_normal((30, 5)) @ np.diag([4, 3, 2, 1, 0.5])
        y = rng.standard_normal(30)
        specs = [SubspaceSpec("a", 1, T.continuous(y))]
        with pytest.warns(RuntimeWarning, match="fit_linear"):
            g = fit_general(X, specs, FitConfig(algorithm="general", max_iter=3000, learning_rate=0.05, rel_tol=1e-12))
        lin = fit_linear(X, specs)
        assert np.max(principal_angles(g["a"].U, lin["a"].U)) < 1e-4

    def test_divergence_raises(self, rng):
        X = 1e200 * rng.standard_normal((10, 3))
        spec = SubspaceSpec("a", 1, T.identity(), latent_kernel="gaussian")
        from sispca.errors import NumericalError
        with pytest.raises(NumericalError):
            with np.errstate(all="ignore"):
                fit_general(X, [spec], FitConfig(algorithm="general", learning_rate=1e10))

    def test_dispatch_and_seed(self, rng):
        X = rng.standard_normal((20, 4))
        specs = [SubspaceSpec("a", 2, T.identity(), latent_kernel="gaussian")]
        a = fit(X, specs, FitConfig(algorithm="general", seed=1, max_iter=5))
        b = fit(X, specs, FitConfig(algorithm="general", seed=1, max_iter=5))
        np.testing.assert_array_equal(a["a"].U, b["a"].U)
        assert fit(X, [SubspaceSpec("a", 1, T.identity())]).config.algorithm == "linear"


class TestIdentities:
    def test_autoencoder_identity(self, rng):
        for _ in range(100):
            n, p = rng.integers(5, 30), rng.integers(2, 8)
            d = rng.integers(1, p + 1)
            X = rng.standard_normal((n, p))
            X -= X.mean(axis=0)
            U = polar_factor(rng.standard_normal((p, d)))
            lhs = np.linalg.norm(X) ** 2 - np.linalg.norm(X @ U) ** 2
            rhs = np.linalg.norm(X - X @ U @ U.T) ** 2
            assert lhs == pytest.approx(rhs, rel=1e-8, abs=1e-8 * np.linalg.norm(X) ** 2)

    def test_regression_identity(self, rng):
        for _ in range(100):
            n, p = rng.integers(5, 30), rng.integers(2, 8)
            X = rng.standard_normal((n, p))
            X -= X.mean(axis=0)
            y = rng.standard_normal(n)
            y -= y.mean()
            u = rng.standard_normal(p)
            u /= np.linalg.norm(u)
            Xu = X @ u
            scale = y @ y + Xu @ Xu + np.linalg.norm(X) ** 2
            # pointwise: ||y - Xu||^2 - ||Xu||^2 = ||y||^2 - 2 y^T X u
            lhs = np.sum((y - Xu) ** 2) - Xu @ Xu
            assert lhs == pytest.approx(y @ y - 2 * (y @ Xu), rel=1e-8, abs=1e-8 * scale)
            # and the reconstruction form differs from it by the constant ||X||_F^2
            recon = np.sum((y - Xu) ** 2) + np.linalg.norm(X - np.outer(Xu, u)) ** 2
            assert recon == pytest.approx(lhs + np.linalg.norm(X) ** 2, rel=1e-8, abs=1e-8 * scale)

    def test_regression_argmax_equivalence(self, rng):
        # the sisPCA direction for a univariate linear target minimizes the
        # regression loss ||y - Xu||^2 - ||Xu||^2 among unit vectors
        for _ in range(100):
            n, p = rng.integers(8, 30), rng.integers(2, 6)
            X = rng.standard_normal((n, p))
            y = X @ rng.standard_normal(p) + rng.standard_normal(n)
            m = fit_linear(X, [SubspaceSpec("y", 1, T.continuous(y))])
            u = m["y"].U[:, 0]
            Xc, yc = X - X.mean(0), y - y.mean()
            u = u * np.sign(yc @ Xc @ u)  # the loss is not sign invariant
            loss = lambda v: np.sum((yc - Xc @ v) ** 2) - np.sum((Xc @ v) ** 2)
            ref = Xc.T @ yc / np.linalg.norm(Xc.T @ yc)
            assert abs(u @ ref) == pytest.approx(1.0, abs=1e-8)
            V = rng.standard_normal((200, p))
            V /= np.linalg.norm(V, axis=1, keepdims=True)
            assert loss(u) <= min(loss(v) for v in V) + 1e-8 * (yc @ yc)


class TestInspection:
    def test_transform(self, rng):
        Xr = rng.standard_normal((20, 4)) + 5.0
        m = fit_linear(Xr, [SubspaceSpec("a", 2, T.identity())])
        np.testing.assert_allclose(transform(m, Xr)[0], m["a"].Z, atol=1e-12)
        zero = transform(m, np.zeros(4))[0]
        np.testing.assert_allclose(zero, -(m.data_summary["means"] @ m["a"].U)[None], atol=1e-12)
        new = rng.standard_normal((5, 4))
        np.testing.assert_allclose(transform(m, new)[0], (new - Xr.mean(0)) @ m["a"].U, atol=1e-12)
        with pytest.raises(DimensionError):
            transform(m, np.zeros((2, 3)))

    def test_transform_scaled(self, rng):
        Xr = rng.standard_normal((20, 4)) * [1, 10, 100, 1000]
        m = fit_linear(DataMatrix.from_array(Xr, scale=True), [SubspaceSpec("a", 2, T.identity())])
        np.testing.assert_allclose(transform(m, Xr)[0], m["a"].Z, atol=1e-10)

    def test_top_features(self):
        from sispca.model import SubspaceResult

        U = np.zeros((5, 2))
        U[3, 0] = 1.0
        U[:, 1] = [0.5, -0.5, 0.5, -0.5, 0.0]
        res = SubspaceResult("a", U, np.zeros((1, 2)), np.ones(2))
        top = top_features(res, 0, 1)
        assert top[0].index == 3 and top[0].loading == 1.0
        assert len(top_features(res, 0, 99)) == 5
        assert [f.index for f in top_features(res, 1, 4)] == [0, 1, 2, 3]
        assert top_features(res, 1, 2, feature_names=list("abcde"))[1].name == "b"
        with pytest.raises(IndexError):
            top_features(res, 2, 1)
