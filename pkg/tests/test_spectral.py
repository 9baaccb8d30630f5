import numpy as np
import pytest

from qlhyper.catalog import builtin_system
from qlhyper.dsl import build_system
from qlhyper.errors import StrictHyperbolicityError
from qlhyper.spectral import (assemble_matrix, batch_eigen, biorthogonality_residual,
                              check_strict_hyperbolicity, eigendecompose,
                              eigenframe_along_path, reconstruction_residual)

S2 = np.sqrt(2.0)


def test_assemble_examples():
    assert assemble_matrix(builtin_system("burgers"), [0.3]).tolist() == [[0.3]]
    assert assemble_matrix(builtin_system("decoupled-pair"), [0, 0]).tolist() == [[0, 0], [0, 1]]
    sym = builtin_system("constant-symmetric")
    assert assemble_matrix(sym, [0.2, -0.1]).tolist() == [[0, 1], [1, 0]]


def test_symmetric_frame():
    sd = eigendecompose(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert np.allclose(sd.lambdas, [-1, 1], atol=1e-15)
    assert np.allclose(sd.r(0), [1 / S2, -1 / S2], atol=1e-15)
    assert np.allclose(sd.r(1), [1 / S2, 1 / S2], atol=1e-15)
    assert np.allclose(sd.left, sd.right.T, atol=1e-15)


def test_diagonal_frame():
    sd = eigendecompose(np.diag([0.0, 1.0]))
    assert sd.lambdas.tolist() == [0.0, 1.0]
    assert np.array_equal(sd.right, np.eye(2)) and np.array_equal(sd.left, np.eye(2))


def test_rotation_rejected():
    with pytest.raises(StrictHyperbolicityError, match="complex"):
        eigendecompose(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_repeated_rejected():
    with pytest.raises(StrictHyperbolicityError, match="gap"):
        eigendecompose(np.eye(2))


def test_random_matrices_invariants():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(2, 5))
        lam = np.sort(rng.uniform(-2, 2, n)) + 0.2 * np.arange(n)
        S = rng.normal(size=(n, n)) + 2 * np.eye(n)
        m = S @ np.diag(lam) @ np.linalg.inv(S)
        sd = eigendecompose(m)
        assert biorthogonality_residual(sd) <= 1e-10
        assert np.max(np.abs(np.linalg.norm(sd.right, axis=0) - 1)) <= 1e-12
        assert reconstruction_residual(sd, m) <= 1e-9
        # a permutation similarity keeps the sorted spectrum
        P = np.eye(n)[rng.permutation(n)]
        assert np.allclose(eigendecompose(P @ m @ P.T).lambdas, sd.lambdas, atol=1e-12)


def test_batch_2x2_matches_pointwise():
    rng = np.random.default_rng(5)
    mats = []
    for _ in range(200):
        S = rng.normal(size=(2, 2)) + 2 * np.eye(2)
        lam = np.sort(rng.uniform(-1, 1, 2)) + [0, 0.3]
        mats.append(S @ np.diag(lam) @ np.linalg.inv(S))
    mats = np.array(mats)
    lam, R, L = batch_eigen(mats)
    for k, m in enumerate(mats):
        sd = eigendecompose(m, anchor=np.eye(2))
        assert np.allclose(lam[k], sd.lambdas, atol=1e-12)
        assert np.allclose(R[k], sd.right, atol=1e-10)
        assert np.allclose(L[k] @ R[k], np.eye(2), atol=1e-12)


def test_batch_rejects_complex():
    with pytest.raises(StrictHyperbolicityError):
        batch_eigen(np.array([[[0.0, 1.0], [-1.0, 0.0]]]))


def test_gap_report_decoupled():
    rep = check_strict_hyperbolicity(builtin_system("decoupled-pair"), 0.1)
    assert rep.delta0 == pytest.approx(0.8, abs=1e-12)
    assert rep.certified and rep.estimate_kind.startswith("sampled")


def test_gap_report_scalar_and_colliding():
    assert check_strict_hyperbolicity(builtin_system("burgers"), 0.1).delta0 == np.inf
    colliding = build_system("collide", 2, [["u1", "0"], ["0", "u2"]], ["0", "0"])
    try:
        rep = check_strict_hyperbolicity(colliding, 0.1)
    except StrictHyperbolicityError:
        return
    assert rep.delta0 <= 0


def test_path_frames_constant_and_diagonal():
    sym = builtin_system("constant-symmetric")
    frames = eigenframe_along_path(sym, [[0, 0], [0.01, 0], [0.02, 0.01]])
    assert all(np.array_equal(f.right, frames[0].right) for f in frames)
    dec = builtin_system("decoupled-pair")
    path = np.column_stack([np.linspace(0, 0.1, 11), np.zeros(11)])
    assert all(np.allclose(f.right, np.eye(2)) for f in eigenframe_along_path(dec, path))


def test_path_sign_continuity():
    s = build_system("tilt", 2, [["0", "1"], ["1", "u1/10"]], ["0", "0"])
    path = np.column_stack([np.linspace(0, 0.1, 21), np.zeros(21)])
    frames = eigenframe_along_path(s, path)
    dots = [float(np.min(np.sum(a.right * b.right, axis=0)))
            for a, b in zip(frames, frames[1:])]
    assert min(dots) > 0.99


def test_path_step_limit():
    with pytest.raises(ValueError):
        eigenframe_along_path(builtin_system("burgers"), [[0.0], [0.2]])
