import unittest
import warnings

import numpy as np
from scipy.integrate import trapezoid
from scipy.special import eval_genlaguerre

from VoBAL.beam import (BeamGeometry, CylindricalPoint, LGIndex, ModeSuperposition, density_and_derivative,
                        evaluate_field, field_z_derivative, intensity, laguerre, mode_field, propagate_params)


class TestGeometry(unittest.TestCase):

    def test_rayleigh_range(self):
        self.assertEqual(BeamGeometry(w0=1.0, k=2.0).z_R, 1.0)
        geom = BeamGeometry.from_wavelength(w0=2.0, wavelength=np.pi)
        self.assertAlmostEqual(geom.z_R, 4.0)

    def test_rejects_non_positive(self):
        with self.assertRaises(ValueError):
            BeamGeometry(w0=0.0, k=1.0)
        with self.assertRaises(ValueError):
            BeamGeometry(w0=1.0, k=-2.0)
        with self.assertRaises(ValueError):
            BeamGeometry.from_wavelength(1.0, 0.0)

    def test_propagate_params(self):
        geom = BeamGeometry(w0=0.5, k=8.0)
        idx = LGIndex(1, -2)
        waist = propagate_params(geom, idx, 0.0)
        self.assertEqual(waist.R, np.inf)
        self.assertEqual(waist.inv_R, 0.0)
        self.assertEqual(waist.w, 0.5)
        self.assertEqual(waist.gouy, 0.0)

        rayleigh = propagate_params(geom, idx, geom.z_R)
        self.assertAlmostEqual(rayleigh.R, 2 * geom.z_R)
        self.assertAlmostEqual(rayleigh.w, 0.5 * np.sqrt(2))
        self.assertAlmostEqual(rayleigh.gouy, 5 * np.pi / 4)
        self.assertAlmostEqual(rayleigh.inv_R, 1 / rayleigh.R)

    def test_parity_in_z(self):
        geom = BeamGeometry(w0=0.5, k=8.0)
        idx = LGIndex(2, 3)
        for z in (0.1, 1.0, 3.7):
            ahead, behind = propagate_params(geom, idx, z), propagate_params(geom, idx, -z)
            self.assertAlmostEqual(behind.gouy, -ahead.gouy, places=14)
            self.assertEqual(behind.w, ahead.w)
            self.assertEqual(behind.inv_R, -ahead.inv_R)


class TestModes(unittest.TestCase):

    def test_index_validation(self):
        with self.assertRaises(ValueError):
            LGIndex(-1, 0)
        with self.assertRaises(ValueError):
            LGIndex(0.5, 1)
        self.assertEqual(str(LGIndex(2, -3)), "p2l-3")

    def test_fisher_weight(self):
        self.assertEqual(LGIndex(0, 0).fisher_weight, 1)
        self.assertEqual(LGIndex(0, 2).fisher_weight, 3)
        self.assertEqual(LGIndex(1, 1).fisher_weight, 8)
        self.assertEqual(LGIndex(1, -1).gouy_order, 4)

    def test_superposition_validation(self):
        with self.assertRaises(ValueError):
            ModeSuperposition(())
        with self.assertRaises(ValueError):
            ModeSuperposition(((LGIndex(0, 0), 1.0), (LGIndex(0, 1), 1.0)))
        with self.assertRaises(ValueError):
            ModeSuperposition(((LGIndex(0, 0), 0.6), (LGIndex(0, 0), 0.8)))

    def test_normalised_warns_when_rescaling(self):
        with self.assertWarns(UserWarning):
            state = ModeSuperposition.normalised([(LGIndex(0, 1), 1.0), (LGIndex(0, -1), 1j)])
        np.testing.assert_allclose(np.abs(state.coefficients), [2 ** -0.5] * 2)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            ModeSuperposition.normalised([(LGIndex(0, 1), 0.6), (LGIndex(0, -1), 0.8)])
        with self.assertRaises(ValueError):
            ModeSuperposition.normalised([(LGIndex(0, 1), 0.0)])

    def test_max_excitation(self):
        state = ModeSuperposition.normalised([(LGIndex(2, 1), 1.0), (LGIndex(0, -3), 1.0)], warn=False)
        self.assertEqual(state.max_excitation, 5)


class TestField(unittest.TestCase):

    def test_laguerre_matches_scipy(self):
        x = np.linspace(0, 20, 41)
        for p in range(7):
            for alpha in range(5):
                np.testing.assert_allclose(laguerre(p, alpha, x), eval_genlaguerre(p, alpha, x), rtol=1e-10,
                                           atol=1e-10)
        self.assertIsInstance(laguerre(3, 1, 0.5), float)
        with self.assertRaises(ValueError):
            laguerre(-1, 0, 1.0)

    def test_gaussian_on_axis(self):
        geom = BeamGeometry(w0=2.0, k=3.0)
        value = evaluate_field(ModeSuperposition.pure(0, 0), geom, CylindricalPoint(0.0, 0.0, 0.0))
        self.assertAlmostEqual(value, np.sqrt(2 / np.pi) / 2.0)

    def test_vortex_core_is_dark(self):
        geom = BeamGeometry(w0=1.0, k=2.0)
        self.assertEqual(intensity(ModeSuperposition.pure(0, 2), geom, CylindricalPoint(0.0, 1.0, 0.7)), 0.0)

    def test_rejects_negative_radius(self):
        with self.assertRaises(ValueError):
            CylindricalPoint(-0.1, 0.0, 0.0)

    def test_plane_normalisation(self):
        geom = BeamGeometry(w0=1.5, k=4.0)
        r = np.linspace(0, 16 * geom.w0, 8001)
        phi = np.linspace(0, 2 * np.pi, 257)
        states = [ModeSuperposition.pure(0, 0), ModeSuperposition.pure(2, -3), ModeSuperposition.two_mode(2, 0)]
        for state in states:
            for z in (0.0, 0.8 * geom.z_R, 2.5 * geom.z_R):
                p = intensity(state, geom, CylindricalPoint(r[:, None], phi[None, :], z))
                total = trapezoid(trapezoid(p, phi, axis=1) * r, r)
                self.assertAlmostEqual(total, 1.0, places=5, msg=f"{state} at z={z}")

    def test_z_derivative_matches_finite_difference(self):
        geom = BeamGeometry(w0=0.7, k=5.0)
        state = ModeSuperposition.normalised([(LGIndex(1, 2), 1.0), (LGIndex(0, 0), 0.5 - 0.3j)], warn=False)
        r = np.linspace(0.05, 2.0, 9)[:, None]
        phi = np.linspace(0, 2 * np.pi, 7, endpoint=False)[None, :]
        h = 1e-5 * geom.z_R
        for z in (0.0, 0.3 * geom.z_R, 1.7 * geom.z_R):
            forward = evaluate_field(state, geom, CylindricalPoint(r, phi, z + h))
            backward = evaluate_field(state, geom, CylindricalPoint(r, phi, z - h))
            numeric = (forward - backward) / (2 * h)
            analytic = field_z_derivative(state, geom, CylindricalPoint(r, phi, z))
            np.testing.assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-8)

    def test_density_derivative_is_real_part(self):
        rho = np.linspace(0, 3, 11)
        phi = 0.4
        field, d_field = mode_field(LGIndex(2, 1), rho, phi, 0.6, with_derivative=True)
        p, dp = density_and_derivative(ModeSuperposition.pure(2, 1), rho, phi, 0.6)
        np.testing.assert_allclose(p, np.abs(field) ** 2)
        np.testing.assert_allclose(dp, 2 * np.real(np.conj(field) * d_field), atol=1e-15)

    def test_pure_mode_intensity_is_rotation_invariant(self):
        geom = BeamGeometry(w0=1.0, k=2.0)
        r = np.linspace(0, 3, 13)[:, None]
        phi = np.linspace(0, 2 * np.pi, 9)[None, :]
        for p, l in ((0, 0), (1, -2), (2, 3)):
            for z in (0.0, 0.4, 1.9):
                I = intensity(ModeSuperposition.pure(p, l), geom, CylindricalPoint(r, phi, z))
                np.testing.assert_allclose(I, np.broadcast_to(I[:, :1], I.shape), rtol=0, atol=1e-12)

    def test_petals_have_two_fold_symmetry(self):
        geom = BeamGeometry(w0=1.0, k=2.0)
        state = ModeSuperposition.two_mode(2, 0)
        r = np.linspace(0, 3, 13)[:, None]
        phi = np.linspace(0, np.pi, 11)[None, :]
        for z in (0.0, 0.5, 2.0):
            turned = intensity(state, geom, CylindricalPoint(r, phi + np.pi, z))
            np.testing.assert_allclose(turned, intensity(state, geom, CylindricalPoint(r, phi, z)), rtol=1e-12,
                                       atol=1e-15)

    def test_density_derivative_integrates_to_zero(self):
        x, w = np.polynomial.legendre.leggauss(256)
        u, w = 60 * (x + 1), 60 * w
        rho = np.sqrt(u)[:, None]
        phi = np.linspace(0, 2 * np.pi, 65)[None, :-1]
        states = [ModeSuperposition.pure(1, 2), ModeSuperposition.two_mode(2, 0),
                  ModeSuperposition.normalised([(LGIndex(1, 1), 1.0), (LGIndex(0, -2), 0.5j)], warn=False)]
        for state in states:
            for zeta in (0.3, 1.0, 2.2):
                _, dp = density_and_derivative(state, rho, phi, zeta)
                # rho d(rho) = du / 2
                flux = np.pi * np.dot(w, dp.mean(axis=1))
                self.assertAlmostEqual(flux, 0.0, places=6, msg=f"{state} at zeta={zeta}")

    def test_gaussian_axis_is_static_at_waist(self):
        geom = BeamGeometry(w0=1.3, k=2.0)
        pt = CylindricalPoint(0.0, 0.0, 0.0)
        state = ModeSuperposition.pure(0, 0)
        d_intensity = 2 * np.real(np.conj(evaluate_field(state, geom, pt)) * field_z_derivative(state, geom, pt))
        self.assertEqual(d_intensity, 0.0)
        self.assertEqual(density_and_derivative(state, 0.0, 0.0, 0.0)[1], 0.0)

    def test_pure_mode_density_is_static_at_waist(self):
        _, dp = density_and_derivative(ModeSuperposition.pure(1, 3), np.linspace(0, 3, 20), 1.0, 0.0)
        np.testing.assert_allclose(dp, 0.0, atol=1e-14)


if __name__ == '__main__':
    unittest.main()
