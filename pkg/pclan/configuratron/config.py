import copy

import yaml
import tqdm
from yamlinclude import YamlIncludeConstructor
from parse import parse

from pclan.utils import PClanConfigException

YamlIncludeConstructor.add_to_loader_class(loader_class=yaml.FullLoader)

EXPERIMENT_IDS = ('oracle_equivalence', 'r2', 'r3', 'r4', 'r5', 'r6', 'clan_tails')

# Volume inflation tolerance and cutoff-bias monitoring, shared by the finite-volume experiments.
_BOUNDS = dict(margin_tol=1e-3, bias_replicas=200, bias_horizon=3.0)

# Acceptance constants live here, experiments read them from their RunConfig.
DEFAULTS = {
    'Configuratron': dict(seed=0, d=2, n_max=10, out=None, verbose=False),
    'experiments': {
        'oracle_equivalence': dict(beta=1.5, box=4, n_max=8, samplers=['perfect', 'forward'], samples=100000,
                                   epochs=100000, spacing=5.0, burn_in=10.0, tv=0.01, sigmas=3.0, min_expected=10.0,
                                   balance_box=2, balance_tolerance=1e-12),
        'r2': dict(beta=2.0, box=6, n_max=8, t_end=6.0, step=0.25, replicas=1000, tolerance=0.05, **_BOUNDS),
        'r3': dict(beta=1.5, boxes=[1, 3, 5], n_max=4, tolerance=0.1, **_BOUNDS),
        'r4': dict(beta=1.5, strip=6, n_max=8, box=12, distance=10, replicas=2000, tolerance=0.1, sigmas=3.0,
                   inflate=True, **_BOUNDS),
        'r5': dict(beta=1.5, box=32, n_max=8, replicas=1000, radius=4, ks=0.05, stability=0.05, inflate=True,
                   **_BOUNDS),
        'r6': dict(beta=2.5, betas=[2.0, 2.5, 3.0], size=4, n_max=8, blocks=50, contours=10000, minimum=1000,
                   replicas=1, dispersion=[0.9, 1.1], correlation=0.05, inflate=True, **_BOUNDS),
        'clan_tails': dict(betas=[1.6, 2.0, 2.4], n_max=8, replicas=10000, gw_replicas=100000, tolerance=0.1,
                           distances=[2, 4, 6], sharing_replicas=500, sigmas=3.0, cap=10 ** 7),
    }
}


class _DumbNamespace:
    def __init__(self, d: dict):
        self._d = d.copy()
        for k in d:
            if isinstance(d[k], dict):
                d[k] = _DumbNamespace(d[k])
            if isinstance(d[k], list):
                d[k] = [_DumbNamespace(d[k][i]) if isinstance(d[k][i], dict) else d[k][i] for i in range(len(d[k]))]
        self.__dict__.update(d)

    def keys(self):
        return [k for k in self.__dict__.keys() if k != '_d']

    def __getitem__(self, item):
        return self.__dict__[item]

    def as_dict(self):
        return self._d


def _adopt_auxiliaries(obj, remaining):
    def namespaceify(v):
        if isinstance(v, dict):
            return _DumbNamespace(v)
        elif isinstance(v, list):
            return [namespaceify(v[i]) for i in range(len(v))]
        else:
            return v

    obj.__dict__.update({k: namespaceify(v) for k, v in remaining.items()})


def _parse_value(text):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        raise PClanConfigException("Could not understand value `{}`".format(text))


def parse_assignment(line):
    """
    Splits one `key=value` assignment. Values are read as YAML scalars or flow lists, so `0.5`, `true` and `[1, 3, 5]`
    keep their types.

    Returns
    -------
    key : str
    value : object
    """
    found = parse("{key}={value}", line.strip())
    if found is None:
        raise PClanConfigException("Expected `key=value`, got `{}`".format(line.strip()))
    return found['key'].strip(), _parse_value(found['value'].strip())


def _assign(config: dict, key, value):
    if '.' in key:
        experiment, name = key.split('.', 1)
        config['experiments'].setdefault(experiment, dict())[name] = value
    else:
        config['Configuratron'][key] = value


def load_flat(filename):
    """
    Reads a flat `key=value` file into the nested form of a YAML configuration. Lines starting with `#` are ignored.
    """
    config = dict(Configuratron=dict(), experiments=dict())
    with open(filename, 'r') as fio:
        for line in fio:
            if not line.strip() or line.strip().startswith('#'):
                continue
            _assign(config, *parse_assignment(line))
    return config


class ExperimentConfig:
    """
    Parses pclan configuration files, checking the `Configuratron` token and the listed experiments.
    """
    def __init__(self, config_filename: str = None, adopt_auxiliaries=True, overrides=()):
        """
        Parses pclan configuration files, checking the `Configuratron` token and the listed experiments.

        Parameters
        ----------
        config_filename : str, None
                          Path to a yaml configuration (`.yml` / `.yaml`) or a flat `key=value` file. When `None`, only
                          the defaults are used.
        adopt_auxiliaries : bool
                            For any additional tokens aside from `Configuratron` and `experiments`, integrate them into
                            this object for later use. Defaults to True. This will propagate for the experiments.
        overrides : iterable
                    `key=value` strings applied last. Dotted keys such as `r5.box=32` address one experiment.
        """
        if config_filename is None:
            working_config = dict(Configuratron=dict(), experiments=dict())
        elif str(config_filename).endswith(('.yml', '.yaml')):
            with open(config_filename, 'r') as fio:
                working_config = yaml.load(fio, Loader=yaml.FullLoader)
            if not isinstance(working_config, dict) or 'Configuratron' not in working_config.keys():
                raise PClanConfigException("Toplevel `Configuratron` not found in: {}".format(config_filename))
            if 'experiments' not in working_config.keys():
                raise PClanConfigException("`experiments` not found in {}".format([k.lower() for k in
                                                                                  working_config.keys()]))
        else:
            working_config = load_flat(config_filename)
        self._original_config = copy.deepcopy(working_config)

        working_config['Configuratron'] = working_config['Configuratron'] or dict()
        working_config['experiments'] = working_config['experiments'] or dict()
        for line in overrides:
            _assign(working_config, *parse_assignment(line))

        self.experiment = dict(DEFAULTS['Configuratron'])
        self.experiment.update(working_config.pop('Configuratron'))
        self.seed = int(self.experiment.pop('seed'))
        self.d = int(self.experiment.pop('d'))
        self.n_max = int(self.experiment.pop('n_max'))
        self.out = self.experiment.pop('out')
        self.verbose = bool(self.experiment.pop('verbose'))
        usable = self.experiment.pop('use_only', list(EXPERIMENT_IDS))

        entries = working_config.pop('experiments')
        for name in entries:
            if name not in EXPERIMENT_IDS:
                raise PClanConfigException("Unknown experiment `{}`, expected one of {}".format(name, EXPERIMENT_IDS))

        self.experiments = dict()
        for name in usable:
            if name not in EXPERIMENT_IDS:
                raise PClanConfigException("Could not find {} in experiments".format(name))
            self.experiments[name] = RunConfig(name, entries.get(name) or dict(), seed=self.seed, d=self.d,
                                               bounds_n_max=self.n_max, verbose=self.verbose)

        if self.verbose:
            tqdm.tqdm.write("Configuratron found {} experiments.".format(len(self.experiments)))

        if adopt_auxiliaries:
            _adopt_auxiliaries(self, working_config)
            _adopt_auxiliaries(self, self.experiment)

    @classmethod
    def defaults(cls):
        return cls(None)

    def __getitem__(self, item):
        try:
            return self.experiments[item]
        except KeyError:
            raise PClanConfigException("Experiment {} is not configured".format(item))


class RunConfig:
    """
    Parses one experiment entry, over that experiment's defaults.
    """
    def __init__(self, name: str, config: dict, seed=0, d=2, bounds_n_max=10, verbose=False, adopt_auxiliaries=True):
        """
        Parameters
        ----------
        name : str
               Experiment identifier, one of `EXPERIMENT_IDS`.
        config : dict
                 The configuration entry for the experiment.
        seed : int
               Root seed, unless the entry sets its own.
        d : int
            Dimension entering the branching constants.
        bounds_n_max : int
                       Cutoff of the contour counts behind the branching constants.
        verbose : bool
        adopt_auxiliaries : bool
                            Adopt additional configuration entries as object variables.
        """
        config = dict(config)
        self.name = name

        def get_pop(key, default=None):
            config.setdefault(key, default)
            return config.pop(key)

        self.seed = int(get_pop('seed', seed))
        self.d = int(get_pop('d', d))
        self.bounds_n_max = int(get_pop('bounds_n_max', bounds_n_max))
        self.verbose = bool(get_pop('verbose', verbose))
        self._keys = ['seed', 'd', 'bounds_n_max']
        for key, default in DEFAULTS['experiments'][name].items():
            value = get_pop(key, copy.deepcopy(default))
            if isinstance(default, list) and not isinstance(value, list):
                raise PClanConfigException("{}.{} must be a list, not {}".format(name, key, value))
            setattr(self, key, value)
            self._keys.append(key)

        if adopt_auxiliaries:
            _adopt_auxiliaries(self, config)
            self._keys.extend(config.keys())

    def as_dict(self):
        out = dict()
        for k in self._keys:
            v = getattr(self, k)
            out[k] = v.as_dict() if isinstance(v, _DumbNamespace) else v
        return out

    def __repr__(self):
        return "RunConfig({}, {})".format(self.name, self.as_dict())
