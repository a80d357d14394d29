import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_model
from qgtlab.errors import (
    BadParameterIndex,
    CapacityExceeded,
    DimensionMismatch,
    EmptySector,
    InvalidModel,
    NotHermitian,
    SectorMismatch,
)
from qgtlab.hamiltonian import (
    ModelSpec,
    SparseOperator,
    apply,
    build_hamiltonian,
    build_perturbation,
    default_sector,
    full_space,
    identity_operator,
    load_config,
    model_from_config,
    parse_config_text,
    sector_basis,
    translation_permutation,
)

MODEL_POINTS = [
    ModelSpec("XXZ", 8, (0.3,)),
    ModelSpec("XXZ", 6, (0.7, 0.2), sz2=None),
    ModelSpec("XXZ", 7, (1.4,), boundary="open", sz2=1),
    ModelSpec("TFIM", 6, (0.8,)),
    ModelSpec("TFIM", 5, (1.3,), boundary="open"),
    ModelSpec("RotatedXY", 6, (0.6, 0.9)),
    ModelSpec("RotatedXY", 5, (1.2, 2.0), boundary="open", anisotropy=0.3),
    ModelSpec("QubitInField", 1, (1.1, 0.4)),
]


def ids(spec):
    return f"{spec.kind}-L{spec.L}-{spec.boundary}"


def restricted_oracle(spec):
    full = dense_model(spec.kind, spec.L, spec.params, spec.boundary, spec.J, spec.anisotropy)
    basis = default_sector(spec).basis
    return full[np.ix_(basis, basis)]


# ---------------------------------------------------------------------------
# worked examples
# ---------------------------------------------------------------------------


def test_xxz_two_site_singlet_triplet():
    spec = ModelSpec("XXZ", 2, (1.0,), boundary="open")
    H = build_hamiltonian(spec).to_dense()
    assert np.allclose(H, [[-0.25, 0.5], [0.5, -0.25]], atol=1e-15)
    assert np.allclose(np.linalg.eigvalsh(H), [-0.75, 0.25], atol=1e-15)


def test_tfim_two_site_open():
    H = build_hamiltonian(ModelSpec("TFIM", 2, (0.0,), boundary="open")).to_dense()
    assert np.allclose(np.linalg.eigvalsh(H), [-1, -1, 1, 1], atol=1e-14)
    H = build_hamiltonian(ModelSpec("TFIM", 2, (1.0,), boundary="open")).to_dense()
    assert np.allclose(np.diag(H).real, [2, 0, 0, -2])


def test_xxz_l8_matches_kronecker_oracle():
    spec = ModelSpec("XXZ", 8, (0.3,))
    H = build_hamiltonian(spec).to_dense()
    assert H.shape == (70, 70)
    assert np.max(np.abs(H - restricted_oracle(spec))) <= 1e-14


@pytest.mark.parametrize("spec", MODEL_POINTS, ids=ids)
def test_all_models_match_kronecker_oracle(spec):
    H = build_hamiltonian(spec).to_dense()
    assert np.max(np.abs(H - restricted_oracle(spec))) <= 1e-13


def test_perturbation_examples():
    dH = build_perturbation(ModelSpec("XXZ", 2, (0.4,), boundary="open"), None, 0).to_dense()
    assert np.allclose(dH, np.diag([-0.25, -0.25]), atol=1e-15)
    spec = ModelSpec("TFIM", 4, (0.7,))
    dH = build_perturbation(spec, None, 0).to_dense()
    assert np.count_nonzero(dH - np.diag(np.diag(dH))) == 0
    bits = np.arange(16)
    ups = np.array([bin(b).count("1") for b in bits])
    assert np.allclose(np.diag(dH).real, -(2 * ups - 4))


def test_xxz_l8_perturbation_central_difference():
    spec = ModelSpec("XXZ", 8, (0.3,))
    eps = 1e-5
    hp = build_hamiltonian(spec.at(params=(0.3 + eps,))).to_dense()
    hm = build_hamiltonian(spec.at(params=(0.3 - eps,))).to_dense()
    dH = build_perturbation(spec, default_sector(spec), 0).to_dense()
    assert np.max(np.abs((hp - hm) / (2 * eps) - dH)) <= 1e-9


def test_apply_examples(rng):
    v = rng.normal(size=5) + 1j * rng.normal(size=5)
    assert np.array_equal(apply(identity_operator(5), v), v)
    H = build_hamiltonian(ModelSpec("XXZ", 2, (1.0,), boundary="open"))
    s = np.array([1, -1]) / math.sqrt(2)
    assert np.allclose(apply(H, s), -0.75 * s, atol=1e-15)
    H = build_hamiltonian(ModelSpec("XXZ", 10, (0.5,)))
    v = rng.normal(size=H.dimension) + 1j * rng.normal(size=H.dimension)
    v /= np.linalg.norm(v)
    assert np.max(np.abs(apply(H, v) - H.to_dense() @ v)) <= 1e-12
    assert np.allclose(H @ v, apply(H, v))


def test_sector_examples():
    s = sector_basis(ModelSpec("XXZ", 2, (0.0,), boundary="open"), 0)
    assert s.dimension == 2
    assert list(s.basis) == [0b01, 0b10]
    assert sector_basis(ModelSpec("XXZ", 4, (0.0,)), 0).dimension == 6
    assert sector_basis(ModelSpec("XXZ", 20, (0.0,)), 0).dimension == 184756


@pytest.mark.parametrize("L", range(2, 13))
def test_sector_dimensions_are_binomial(L):
    spec = ModelSpec("XXZ", L, (0.0,), boundary="open", sz2=L % 2)
    total = 0
    for two_sz in range(-L, L + 1, 2):
        s = sector_basis(spec, two_sz / 2)
        assert s.dimension == math.comb(L, (L + two_sz) // 2)
        assert np.all(np.diff(s.basis) > 0)
        total += s.dimension
    assert total == 2**L


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 16), data=st.data())
def test_rank_unrank_roundtrip(L, data):
    n_up = data.draw(st.integers(0, L))
    spec = ModelSpec("XXZ", max(L, 2), (0.0,), boundary="open", sz2=None)
    s = sector_basis(spec.at(L=max(L, 2)), (2 * n_up - max(L, 2)) / 2) if L >= 2 else full_space(1)
    idx = np.arange(s.dimension)
    assert np.array_equal(s.rank(s.unrank(idx)), idx)
    assert np.array_equal(s.unrank(s.rank(s.basis)), s.basis)


@pytest.mark.parametrize("spec", MODEL_POINTS, ids=ids)
def test_hermiticity(spec):
    ops = [build_hamiltonian(spec)] + [build_perturbation(spec, None, mu) for mu in range(spec.m)]
    for op in ops:
        M = op.to_dense()
        assert np.max(np.abs(M - M.conj().T)) <= 1e-13


def test_non_hermitian_rejected():
    from scipy.sparse import csr_matrix

    with pytest.raises(NotHermitian):
        SparseOperator(csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex)))


@pytest.mark.parametrize("L, two_sz", [(6, 0), (7, 1), (8, -2), (9, 3)])
def test_xxz_sector_closure(L, two_sz):
    spec = ModelSpec("XXZ", L, (0.8, 0.3), sz2=two_sz)
    full = dense_model("XXZ", L, spec.params)
    basis = default_sector(spec).basis
    outside = np.setdiff1d(np.arange(2**L), basis)
    # no amplitude leaves the sector
    assert np.count_nonzero(full[np.ix_(outside, basis)]) == 0
    H = build_hamiltonian(spec)
    assert H.indices.min() >= 0 and H.indices.max() < len(basis)


@pytest.mark.parametrize("spec", [s for s in MODEL_POINTS if s.boundary == "periodic" and s.L > 1], ids=ids)
def test_translation_commutes(spec):
    sector = default_sector(spec)
    perm = translation_permutation(sector)
    T = np.zeros((sector.dimension, sector.dimension))
    T[perm, np.arange(sector.dimension)] = 1.0
    H = build_hamiltonian(spec, sector).to_dense()
    assert np.max(np.abs(H @ T - T @ H)) <= 1e-12
    assert np.max(np.abs(T @ T.T - np.eye(len(T)))) == 0


@pytest.mark.parametrize("spec", MODEL_POINTS, ids=ids)
def test_perturbation_matches_central_difference(spec):
    eps = 1e-5
    for mu in range(spec.m):
        p = np.array(spec.params)
        p[mu] += eps
        hp = build_hamiltonian(spec.at(params=p)).to_dense()
        p[mu] -= 2 * eps
        hm = build_hamiltonian(spec.at(params=p)).to_dense()
        dH = build_perturbation(spec, None, mu).to_dense()
        assert np.max(np.abs((hp - hm) / (2 * eps) - dH)) <= 1e-8


@settings(max_examples=15, deadline=None)
@given(h=st.floats(0.1, 2.0), phi=st.floats(0, 2 * math.pi), L=st.integers(3, 7))
def test_rotation_leaves_spectrum_unchanged(h, phi, L):
    ref = np.linalg.eigvalsh(build_hamiltonian(ModelSpec("RotatedXY", L, (h, 0.0))).to_dense())
    rot = np.linalg.eigvalsh(build_hamiltonian(ModelSpec("RotatedXY", L, (h, phi))).to_dense())
    assert np.max(np.abs(ref - rot)) <= 1e-10


def test_real_representable_flags():
    assert ModelSpec("XXZ", 4, (0.1, 0.2)).real_representable
    assert ModelSpec("TFIM", 4, (1.0,)).real_representable
    assert not ModelSpec("RotatedXY", 4, (1.0, 0.3)).real_representable
    assert build_hamiltonian(ModelSpec("XXZ", 6, (0.5,))).dtype == np.float64


# ---------------------------------------------------------------------------
# errors and configuration
# ---------------------------------------------------------------------------


def test_error_cases():
    spec = ModelSpec("XXZ", 4, (0.5,))
    with pytest.raises(EmptySector):
        sector_basis(spec, 3)
    with pytest.raises(EmptySector):
        sector_basis(spec, 0.5)
    with pytest.raises(BadParameterIndex):
        build_perturbation(spec, None, 1)
    with pytest.raises(SectorMismatch):
        build_hamiltonian(spec, full_space(6))
    with pytest.raises(CapacityExceeded):
        default_sector(ModelSpec("TFIM", 16, (1.0,)), cap=1000)
    with pytest.raises(DimensionMismatch):
        apply(build_hamiltonian(spec), np.ones(5))
    with pytest.raises(InvalidModel):
        ModelSpec("Heisenberg", 4, (1.0,))
    with pytest.raises(InvalidModel):
        ModelSpec("TFIM", 4, (1.0, 2.0))
    with pytest.raises(InvalidModel):
        ModelSpec("XXZ", 2, (0.0,))  # periodic two-site ring double counts its bond
    with pytest.raises(InvalidModel):
        ModelSpec("XXZ", 4, (0.0,), boundary="twisted")


def test_config_roundtrip(tmp_path):
    text = """
    # test model
    kind = XXZ
    L = 10
    boundary = open
    J = 1.0
    params = 0.5, 0.1
    sz = none
    """
    cfg = parse_config_text(text)
    spec = model_from_config(cfg)
    assert spec == ModelSpec("XXZ", 10, (0.5, 0.1), boundary="open", sz2=None)
    path = tmp_path / "model.cfg"
    path.write_text(text)
    assert model_from_config(load_config(path)) == spec
    spec = model_from_config(parse_config_text("kind = RotatedXY\nL = 6\nparams = 1.0, 0.2\nanisotropy = 0.25"))
    assert spec.anisotropy == 0.25 and spec.boundary == "periodic"
