import io
import json
import os
import tempfile
import unittest
from contextlib import redirect_stdout, redirect_stderr

from pclan.cli import main
from tests.dummy_contours import *


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with redirect_stdout(out), redirect_stderr(err):
        code = main(list(argv))
    return code, [json.loads(l) for l in out.getvalue().splitlines() if l.strip()], err.getvalue()


class TestCommands(unittest.TestCase):

    def test_Bounds(self):
        code, records, _ = run('bounds', '--beta', '2.0')
        self.assertEqual(0, code)
        self.assertEqual(1, len(records))
        for key in ('beta', 'd', 'n_max', 'lambda', 'tail', 'beta_M_lo', 'beta_M_hi', 'a_bar', 'b_bar', 'M2', 'M3',
                    'time_exponent', 'M0'):
            with self.subTest(key=key):
                self.assertIn(key, records[0])
        self.assertEqual(10, records[0]['n_max'])

    def test_BoundsRefused(self):
        code, records, err = run('bounds', '--beta', '1.0')
        self.assertEqual(2, code)
        self.assertEqual([], records)
        self.assertIn('SubcriticalityViolated', err)

    def test_EnumeratePlaquette(self):
        code, records, _ = run('enumerate', '--nmax', str(N_MAX))
        self.assertEqual(0, code)
        self.assertEqual(sum(KNOWN_COUNTS.values()), len(records) - 1)
        self.assertEqual({str(k): v for k, v in KNOWN_COUNTS.items()}, records[-1]['counts'])

    def test_EnumerateBox(self):
        code, records, _ = run('enumerate', '--box', '3', '--nmax', '6')
        self.assertEqual(0, code)
        self.assertEqual(21, records[-1]['contours'])

    def test_Oracle(self):
        code, records, _ = run('oracle', '--box', '1', '--beta', '2.0')
        self.assertEqual(0, code)
        self.assertEqual(2, len(records[0]['table']))

    def test_SampleForward(self):
        code, records, _ = run('sample-forward', '--box', '2', '--replicas', '2', '--t-end', '2.0', '--beta', '1.0',
                               '--nmax', '4')
        self.assertEqual(0, code)
        self.assertEqual(2, sum(r['kind'] == 'final' for r in records))

    def test_SamplePerfect(self):
        code, records, _ = run('sample-perfect', '--box', '2', '--replicas', '3', '--nmax', '4')
        self.assertEqual(0, code)
        self.assertEqual([0, 1, 2], [r['replica'] for r in records])
        self.assertTrue(all('configuration' in r for r in records))

    def test_SamplePerfectStats(self):
        code, records, _ = run('sample-perfect', '--box', '2', '--replicas', '2', '--nmax', '4', '--emit', 'stats')
        self.assertEqual(0, code)
        self.assertTrue(all('depth' in r for r in records))

    def test_SamplePerfectGate(self):
        code, _, _ = run('sample-perfect', '--box', '2', '--beta', '1.0', '--nmax', '4')
        self.assertEqual(2, code)

    def test_ClusterStats(self):
        code, records, _ = run('cluster-stats', '--betas', '2.0', '--replicas', '20', '--nmax', '6')
        self.assertEqual(0, code)
        self.assertEqual(20, records[-1]['completed'])

    def test_Seeded(self):
        first = run('sample-perfect', '--box', '3', '--replicas', '5', '--beta', '1.5', '--nmax', '4', '--seed', '3')
        second = run('sample-perfect', '--box', '3', '--replicas', '5', '--beta', '1.5', '--nmax', '4', '--seed', '3')
        self.assertEqual(first[1], second[1])


class TestExperimentCommands(unittest.TestCase):

    def test_VolumeEffect(self):
        code, records, _ = run('r3', '--set', 'r3.boxes=[1,3]')
        self.assertEqual(0, code)
        self.assertEqual('config', records[0]['kind'])
        self.assertTrue(records[-1]['passed'])

    def test_Out(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _, _ = run('r3', '--set', 'r3.boxes=[1,3]', '--out', tmp)
            self.assertEqual(0, code)
            self.assertTrue(os.path.exists(os.path.join(tmp, 'r3.jsonl')))
            self.assertTrue(os.path.exists(os.path.join(tmp, 'r3.csv')))
            run('bounds', '--beta', '2.0', '--out', tmp)
            self.assertTrue(os.path.exists(os.path.join(tmp, 'bounds.jsonl')))

    def test_OracleEquivalence(self):
        code, records, _ = run('oracle-equivalence', '--set', 'oracle_equivalence.box=1', '--set',
                               'oracle_equivalence.samples=500', '--set', 'oracle_equivalence.epochs=500',
                               '--set', 'oracle_equivalence.balance_box=1', '--set', 'oracle_equivalence.tv=0.02')
        self.assertEqual(0, code)
        self.assertEqual(['perfect', 'forward'], [r['source'] for r in records if r['kind'] == 'row'])
        self.assertTrue(records[-1]['passed'])

    def test_OracleEquivalenceFails(self):
        code, records, _ = run('oracle-equivalence', '--set', 'oracle_equivalence.box=1', '--set',
                               'oracle_equivalence.samples=200', '--set', "oracle_equivalence.samplers=['perfect']",
                               '--set', 'oracle_equivalence.balance_box=1', '--set', 'oracle_equivalence.tv=-1.0')
        self.assertEqual(1, code)
        self.assertFalse(records[-1]['checks']['perfect_tv'])

    def test_BadOverride(self):
        code, _, err = run('r3', '--set', 'r9.beta=2.0')
        self.assertEqual(2, code)
        self.assertIn('PClanConfigException', err)


if __name__ == '__main__':
    unittest.main()
