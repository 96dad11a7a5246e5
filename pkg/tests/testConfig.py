import json
import os
import tempfile
import unittest

from pclan.configuratron import ExperimentConfig, RunConfig
from pclan.configuratron.config import DEFAULTS, EXPERIMENT_IDS, parse_assignment
from pclan.lattice.geometry import Box
from pclan.processes.clan import PerfectSampler
from pclan.utils import PClanConfigException

_HERE = os.path.dirname(os.path.abspath(__file__))
_YAML_CONFIG = os.path.join(_HERE, 'test_experiment_config.yml')
_FLAT_CONFIG = os.path.join(_HERE, 'test_experiment_config.cfg')


class TestAssignments(unittest.TestCase):

    def test_Scalars(self):
        self.assertEqual(('seed', 3), parse_assignment('seed=3'))
        self.assertEqual(('r2.beta', 2.5), parse_assignment(' r2.beta = 2.5 '))
        self.assertEqual(('verbose', True), parse_assignment('verbose=true'))

    def test_List(self):
        self.assertEqual(('r3.boxes', [1, 3, 5]), parse_assignment('r3.boxes=[1, 3, 5]'))

    def test_Malformed(self):
        with self.assertRaises(PClanConfigException):
            parse_assignment('no assignment here')


class TestExperimentConfiguration(unittest.TestCase):

    def setUp(self) -> None:
        self.experiment_config = ExperimentConfig(_YAML_CONFIG)

    def test_Globals(self):
        self.assertEqual(7, self.experiment_config.seed)
        self.assertEqual(8, self.experiment_config.n_max)
        self.assertEqual(2, self.experiment_config.d)

    def test_UseOnly(self):
        self.assertEqual(['r3', 'r5'], list(self.experiment_config.experiments))
        with self.assertRaises(PClanConfigException):
            self.experiment_config['r2']

    def test_ExperimentValues(self):
        r3 = self.experiment_config['r3']
        self.assertEqual(1.75, r3.beta)
        self.assertEqual([1, 3], r3.boxes)
        self.assertEqual(DEFAULTS['experiments']['r3']['tolerance'], r3.tolerance)

    def test_SeedInheritance(self):
        self.assertEqual(7, self.experiment_config['r3'].seed)
        self.assertEqual(99, self.experiment_config['r5'].seed)
        self.assertEqual(8, self.experiment_config['r5'].bounds_n_max)

    def test_Auxiliaries(self):
        self.assertTrue(hasattr(self.experiment_config, "an_extra_param"))
        self.assertTrue(hasattr(self.experiment_config, "plot_dir"))
        self.assertEqual('small boxes only', self.experiment_config['r3'].note)
        self.assertEqual('small boxes only', self.experiment_config['r3'].as_dict()['note'])

    def test_NoAuxiliaries(self):
        config = ExperimentConfig(_YAML_CONFIG, adopt_auxiliaries=False)
        self.assertFalse(hasattr(config, "an_extra_param"))

    def test_Overrides(self):
        config = ExperimentConfig(_YAML_CONFIG, overrides=['r5.box=8', 'seed=3'])
        self.assertEqual(8, config['r5'].box)
        self.assertEqual(3, config['r3'].seed)


class TestFlatConfiguration(unittest.TestCase):

    def setUp(self) -> None:
        self.experiment_config = ExperimentConfig(_FLAT_CONFIG)

    def test_AllExperiments(self):
        self.assertEqual(list(EXPERIMENT_IDS), list(self.experiment_config.experiments))

    def test_Values(self):
        r4 = self.experiment_config['r4']
        self.assertEqual(11, r4.seed)
        self.assertEqual(4, r4.sigmas)
        self.assertEqual(8, r4.box)
        self.assertEqual([2.0, 3.0], self.experiment_config['r6'].betas)

    def test_Defaults(self):
        defaults = ExperimentConfig.defaults()
        for name in EXPERIMENT_IDS:
            with self.subTest(name=name):
                for key, value in DEFAULTS['experiments'][name].items():
                    self.assertEqual(value, getattr(defaults[name], key))


class TestAcceptanceDefaults(unittest.TestCase):

    def setUp(self) -> None:
        self.defaults = ExperimentConfig.defaults()

    def test_SamplingCutoffs(self):
        for name in ('r4', 'r5', 'r6'):
            cfg = self.defaults[name]
            with self.subTest(name=name):
                self.assertEqual(8, cfg.n_max)
                for beta in getattr(cfg, 'betas', [cfg.beta]):
                    PerfectSampler(Box(1), beta, cfg.n_max)

    def test_OracleEquivalenceScale(self):
        cfg = self.defaults['oracle_equivalence']
        self.assertEqual((4, 1.5, 8), (cfg.box, cfg.beta, cfg.n_max))
        self.assertEqual(100000, cfg.samples)
        PerfectSampler(Box(cfg.box), cfg.beta, cfg.n_max)

    def test_ClanTailReplicas(self):
        cfg = self.defaults['clan_tails']
        self.assertEqual(10000, cfg.replicas)
        self.assertEqual(100000, cfg.gw_replicas)


class TestConfigurationErrors(unittest.TestCase):

    def setUp(self) -> None:
        self._tmp = tempfile.TemporaryDirectory()

    def tearDown(self) -> None:
        self._tmp.cleanup()

    def _write(self, name, content):
        path = os.path.join(self._tmp.name, name)
        with open(path, 'w') as fio:
            fio.write(content)
        return path

    def test_MissingConfiguratron(self):
        with self.assertRaises(PClanConfigException):
            ExperimentConfig(self._write('bad.yml', 'experiments:\n  r2:\n    beta: 2.0\n'))

    def test_MissingExperiments(self):
        with self.assertRaises(PClanConfigException):
            ExperimentConfig(self._write('bad.yml', 'Configuratron:\n  seed: 1\n'))

    def test_UnknownExperiment(self):
        with self.assertRaises(PClanConfigException):
            ExperimentConfig(overrides=['r9.beta=2.0'])

    def test_ListExpected(self):
        with self.assertRaises(PClanConfigException):
            RunConfig('r6', dict(betas=2.0))

    def test_BadFlatLine(self):
        with self.assertRaises(PClanConfigException):
            ExperimentConfig(self._write('bad.cfg', 'seed 4\n'))

    def test_Includes(self):
        included = dict(beta=2.25, replicas=50)
        include_path = self._write('r2_settings.json', json.dumps(included))
        text = "Configuratron:\n  seed: 1\nexperiments:\n  r2: !include {}\n".format(include_path)
        r2 = ExperimentConfig(self._write('included.yml', text))['r2']
        self.assertEqual(2.25, r2.beta)
        self.assertEqual(50, r2.replicas)


if __name__ == '__main__':
    unittest.main()
