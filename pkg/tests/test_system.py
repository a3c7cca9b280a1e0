from __future__ import annotations

import numpy as np
import pytest

from conftest import rand_tensor, rel, stable_tpds
from oracles import fold_stack, hinf_grid, markov_dense, tf, unfold_stack
from tprod_mor.errors import DimensionMismatch, PoleProximity, UnstableSystem
from tprod_mor.spectral import from_fourier_complex
from tprod_mor.system import (
    FrequencyResponse,
    LinearSystem,
    Tpds,
    adjoint,
    frequency_grid,
    hinf,
    hinf_norm,
    is_stable,
    markov,
    scaled_identity_system,
    simulate,
    spectral_radius,
    transfer,
    zero_system,
)
from tprod_mor.tensor3 import Tensor3, bcirc, tidentity, unfold


def test_shape_validation(rng):
    with pytest.raises(DimensionMismatch):
        Tpds(rand_tensor(rng, 3, 3, 2), rand_tensor(rng, 2, 1, 2), rand_tensor(rng, 1, 3, 2))
    with pytest.raises(DimensionMismatch):
        Tpds(rand_tensor(rng, 3, 2, 2), rand_tensor(rng, 3, 1, 2), rand_tensor(rng, 1, 3, 2))
    with pytest.raises(DimensionMismatch):
        Tpds(rand_tensor(rng, 3, 3, 2), rand_tensor(rng, 3, 1, 3), rand_tensor(rng, 1, 3, 2))


class TestSimulate:
    def test_zero(self):
        sys = stable_tpds(4, 2, 3, 3)
        tr = simulate(sys, Tensor3.zeros(4, 2, 3), [Tensor3.zeros(2, 2, 3)] * 5)
        assert len(tr.states) == 6 and tr.h == 2
        assert all(np.all(x.data == 0) for x in tr.states + tr.outputs)

    def test_s1_matrix(self, rng):
        sys = stable_tpds(4, 2, 3, 1)
        A, B, C = (X.data[:, :, 0] for X in (sys.A, sys.B, sys.C))
        x = rng.standard_normal((4, 1))
        us = [rng.standard_normal((2, 1)) for _ in range(6)]
        tr = simulate(sys, Tensor3(x), [Tensor3(u) for u in us])
        for t, u in enumerate(us):
            assert rel(tr.outputs[t].data[:, :, 0], C @ x) <= 1e-12
            x = A @ x + B @ u
        assert rel(tr.states[-1].data[:, :, 0], x) <= 1e-12

    def test_unfolded_oracle(self, rng):
        sys = stable_tpds(5, 2, 3, 4)
        lin = sys.unfolded()
        X0 = rand_tensor(rng, 5, 3, 4)
        us = [rand_tensor(rng, 2, 3, 4) for _ in range(8)]
        tr = simulate(sys, X0, us)
        x = unfold_stack(X0.data)
        for t, u in enumerate(us):
            assert rel(tr.states[t].data, fold_stack(x, 5, 3, 4)) <= 1e-10
            assert rel(unfold(tr.outputs[t]).matrix, lin.C @ x) <= 1e-10
            x = lin.A @ x + lin.B @ unfold_stack(u.data)

    def test_shape_checks(self, rng):
        sys = stable_tpds(4, 2, 3, 3)
        with pytest.raises(DimensionMismatch):
            simulate(sys, Tensor3.zeros(3, 1, 3), [])
        with pytest.raises(DimensionMismatch):
            simulate(sys, Tensor3.zeros(4, 1, 3), [Tensor3.zeros(2, 2, 3)])


class TestAdjointMarkov:
    def test_adjoint_involution(self):
        sys = stable_tpds(4, 2, 3, 5)
        back = adjoint(adjoint(sys))
        for a, b in zip((back.A, back.B, back.C), (sys.A, sys.B, sys.C)):
            assert np.array_equal(a.data, b.data)

    def test_adjoint_s1(self):
        sys = stable_tpds(4, 2, 3, 1)
        adj = adjoint(sys)
        assert np.array_equal(adj.A.data[:, :, 0], sys.A.data[:, :, 0].T)
        assert np.array_equal(adj.B.data[:, :, 0], sys.C.data[:, :, 0].T)
        assert np.array_equal(adj.C.data[:, :, 0], sys.B.data[:, :, 0].T)

    def test_markov_a_zero(self, rng):
        B, C = rand_tensor(rng, 3, 2, 4), rand_tensor(rng, 2, 3, 4)
        Z = markov(Tpds(Tensor3.zeros(3, 3, 4), B, C), 4)
        assert rel(Z[0].data, (C @ B).data) <= 1e-12
        assert all(np.max(np.abs(z.data)) <= 1e-15 for z in Z.Z[1:])

    def test_markov_unfolded(self):
        sys = stable_tpds(4, 2, 3, 3)
        lin = sys.unfolded()
        Zd = markov_dense(lin.A, lin.B, lin.C, 6)
        for z, d in zip(markov(sys, 6).Z, Zd):
            assert rel(bcirc(z).matrix, d) <= 1e-10

    def test_markov_count(self):
        with pytest.raises(ValueError):
            markov(stable_tpds(2, 1, 1, 2), 0)


class TestTransfer:
    def test_a_zero(self, rng):
        B, C = rand_tensor(rng, 3, 2, 4), rand_tensor(rng, 2, 3, 4)
        G = transfer(Tpds(Tensor3.zeros(3, 3, 4), B, C), 1.0)
        assert rel(G.unfolded(), bcirc(C @ B).matrix) <= 1e-12

    def test_s1(self):
        sys = stable_tpds(4, 2, 3, 1)
        A, B, C = (X.data[:, :, 0] for X in (sys.A, sys.B, sys.C))
        z = np.exp(0.3j)
        assert rel(transfer(sys, z).G.blocks[0], tf(A, B, C, z)) <= 1e-12

    def test_unfolded_resolvent(self):
        sys = stable_tpds(5, 2, 3, 4)
        lin = sys.unfolded()
        z = np.exp(1j * np.pi / 3)
        assert rel(transfer(sys, z).unfolded(), tf(lin.A, lin.B, lin.C, z)) <= 1e-10

    def test_pole(self):
        sys = scaled_identity_system(2, 3, 0.5)
        with pytest.raises(PoleProximity):
            transfer(sys, 0.5)

    def test_series(self):
        sys = stable_tpds(4, 2, 2, 3, rho=0.5)
        z = 1.3 * np.exp(0.7j)
        G = transfer(sys, z).unfolded()
        S = sum(bcirc(Zj).matrix * z ** -(j + 1) for j, Zj in enumerate(markov(sys, 80).Z))
        assert rel(S, G) <= 1e-10

    def test_response_matches_transfer(self):
        sys = stable_tpds(5, 2, 3, 4)
        w = 0.77
        fr = FrequencyResponse(sys)
        assert rel(fr.blocks(w), transfer(sys, np.exp(1j * w)).G.blocks) <= 1e-12
        lin = sys.unfolded()
        assert rel(fr.dense(w), tf(lin.A, lin.B, lin.C, np.exp(1j * w))) <= 1e-10
        assert rel(bcirc(Tensor3(from_fourier_complex(fr.blocks(w)).real)).matrix, fr.dense(w).real) <= 1e-12


class TestHinf:
    def test_delay(self):
        assert abs(hinf_norm(scaled_identity_system(3, 4, 0.0)) - 1.0) <= 1e-12

    def test_scalar(self):
        r = hinf(scaled_identity_system(1, 1, 0.5))
        assert abs(r.value - 2.0) <= 1e-12 and abs(r.omega) <= 1e-12

    def test_unfolded_grid(self):
        sys = stable_tpds(10, 2, 2, 3)
        lin = sys.unfolded()
        val = hinf(sys, grid=128, refine=False).value
        assert rel(val, hinf_grid(lin.A, lin.B, lin.C, 128)) <= 1e-9
        dense = hinf(lin, grid=128, refine=False).value
        assert rel(val, dense) <= 1e-9

    def test_refinement_improves(self):
        sys = stable_tpds(6, 1, 1, 2, rho=0.95, seed=3)
        coarse = hinf(sys, grid=32, refine=False).value
        fine = hinf(sys, grid=32).value
        ref = hinf(sys, grid=8192, refine=False).value
        assert fine >= coarse
        assert abs(fine - ref) <= abs(coarse - ref) + 1e-12

    def test_unstable(self):
        with pytest.raises(UnstableSystem):
            hinf_norm(scaled_identity_system(2, 2, 1.0))

    def test_grid(self):
        g = frequency_grid(8)
        assert g[-1] == np.pi and g[0] > -np.pi and len(g) == 8


class TestStability:
    def test_zero_radius(self):
        assert spectral_radius(zero_system(stable_tpds(3, 2, 2, 3))) == 0.0

    def test_scaled_identity(self):
        sys = Tpds(tidentity(3, 4) * 0.9, tidentity(3, 4), tidentity(3, 4))
        assert abs(spectral_radius(sys) - 0.9) <= 1e-14
        assert is_stable(sys)

    def test_unfolded_radius(self, rng):
        A = rand_tensor(rng, 4, 4, 3)
        sys = Tpds(A, rand_tensor(rng, 4, 1, 3), rand_tensor(rng, 1, 4, 3))
        rho = np.max(np.abs(np.linalg.eigvals(bcirc(A).matrix)))
        assert rel(spectral_radius(sys), rho) <= 1e-10
        lin = sys.unfolded()
        assert rel(spectral_radius(LinearSystem(lin.A, lin.B, lin.C)), rho) <= 1e-10

    def test_marginal_unstable(self):
        assert not is_stable(scaled_identity_system(2, 2, 1.0))

    def test_parameter_count(self):
        assert stable_tpds(4, 2, 3, 5).parameter_count == (16 + 8 + 12) * 5
