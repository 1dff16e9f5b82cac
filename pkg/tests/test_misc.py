import os
import tempfile
import unittest
import warnings

import numpy as np

from VoBAL.beam import LGIndex, ModeSuperposition
from VoBAL.misc import StateSpecError, format_state_spec, parse_state_spec, sha256_bytes, sha256_file, spawn_seeds


class TestParseStateSpec(unittest.TestCase):

    def test_single_mode(self):
        state = parse_state_spec("p1l-3")
        self.assertTrue(state.is_pure)
        self.assertEqual(state.indices, [LGIndex(1, -3)])
        self.assertEqual(state.coefficients[0], 1)

    def test_defaults_are_normalised_with_warning(self):
        with self.assertWarns(UserWarning):
            state = parse_state_spec("p0l2,p0l0")
        np.testing.assert_allclose(state.coefficients, [2 ** -0.5, 2 ** -0.5])
        self.assertEqual(state.indices, ModeSuperposition.two_mode(2, 0).indices)

    def test_normalised_input_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            state = parse_state_spec("p0l2*0.6,p0l0*-0.8")
        np.testing.assert_allclose(state.coefficients, [0.6, -0.8])

    def test_complex_coefficients(self):
        state = parse_state_spec("p0l1*1,p0l-1*0+1i", warn=False)
        np.testing.assert_allclose(state.coefficients, [2 ** -0.5, 1j * 2 ** -0.5])
        state = parse_state_spec("p2l0*1.5e-1-2E-1i", warn=False)
        self.assertAlmostEqual(state.coefficients[0], (0.15 - 0.2j) / 0.25)

    def test_surrounding_whitespace(self):
        self.assertEqual(parse_state_spec("  p0l0\n").indices, [LGIndex(0, 0)])

    def test_errors_carry_position(self):
        cases = {"": 0, "p0l2,,p0l0": 5, "p0l2,p0x0": 5, "p0l2*": 5, "p0l2;p0l0": 4, "p-1l0": 0, "p0l2*x": 5,
                 "p0l0*0": 0}
        for text, position in cases.items():
            with self.assertRaises(StateSpecError, msg=text) as ctx:
                parse_state_spec(text, warn=False)
            self.assertEqual(ctx.exception.position, position, msg=text)
            self.assertIn("^", str(ctx.exception))

    def test_duplicates(self):
        with self.assertRaises(StateSpecError) as ctx:
            parse_state_spec("p0l1,p0l2,p0l1", warn=False)
        self.assertEqual(ctx.exception.position, 10)
        self.assertIn("already given at position 0", ctx.exception.reason)

    def test_is_value_error(self):
        with self.assertRaises(ValueError):
            parse_state_spec("l0p0")

    def test_format_round_trip(self):
        state = ModeSuperposition.normalised([(LGIndex(0, 2), 0.3 - 0.1j), (LGIndex(1, -1), -0.7),
                                              (LGIndex(0, 0), 1e-3j)], warn=False)
        text = format_state_spec(state)
        parsed = parse_state_spec(text, warn=False)
        self.assertEqual(parsed.indices, state.indices)
        np.testing.assert_allclose(parsed.coefficients, state.coefficients, rtol=1e-14)


class TestHelpers(unittest.TestCase):

    def test_sha256(self):
        self.assertEqual(sha256_bytes(b""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855")
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "data.csv")
            with open(path, "wb") as f:
                f.write(b"z_over_zR\n1\n")
            self.assertEqual(sha256_file(path), sha256_bytes(b"z_over_zR\n1\n"))

    def test_spawn_seeds(self):
        short, long = spawn_seeds(42, 3), spawn_seeds(42, 8)
        self.assertEqual(len(long), 8)
        for a, b in zip(short, long):
            np.testing.assert_array_equal(a.generate_state(4), b.generate_state(4))
        self.assertFalse(np.array_equal(long[0].generate_state(4), long[1].generate_state(4)))
        self.assertFalse(np.array_equal(spawn_seeds(1, 1)[0].generate_state(4), short[0].generate_state(4)))


if __name__ == '__main__':
    unittest.main()
