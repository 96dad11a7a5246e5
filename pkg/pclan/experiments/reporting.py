"""
Experiment reports: a table of rows (a pandas `DataFrame` once finished), named acceptance checks and summary values,
emitted as JSON-lines with a CSV summary next to it.
"""
import json
import math
from collections import OrderedDict
from pathlib import Path

import numpy as np
from pandas import DataFrame

from pclan.utils import standard_logging


def jsonable(value):
    """Plain python version of numpy scalars and arrays, with non-finite floats spelled out as strings."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [jsonable(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else repr(value)
    if hasattr(value, 'to_json'):
        return value.to_json()
    return value


def dumps(record: dict):
    return json.dumps(jsonable(record), sort_keys=True)


class Report:
    """
    Outcome of one experiment.

    Parameters
    ----------
    experiment : str
                 Experiment identifier.
    config : dict
             The full configuration the experiment ran with, embedded in every emission.
    seed : int
    """
    def __init__(self, experiment, config: dict, seed):
        self.experiment = experiment
        self.config = dict(config)
        self.seed = seed
        self.rows = []
        self.checks = OrderedDict()
        self.summary = OrderedDict()

    def add_row(self, **values):
        self.rows.append(values)

    def check(self, name, passed):
        self.checks[name] = bool(passed)
        return self.checks[name]

    def note(self, **values):
        self.summary.update(values)

    @property
    def passed(self):
        return all(self.checks.values())

    def frame(self):
        return DataFrame(self.rows)

    def records(self):
        head = dict(kind='config', experiment=self.experiment, seed=self.seed, config=self.config)
        rows = [dict(kind='row', experiment=self.experiment, **r) for r in self.rows]
        tail = dict(kind='summary', experiment=self.experiment, checks=dict(self.checks), passed=self.passed,
                    **self.summary)
        return [head] + rows + [tail]

    def log(self):
        metrics = OrderedDict((k, v) for k, v in self.summary.items() if isinstance(v, (int, float, str)))
        metrics.update((k, 'pass' if v else 'FAIL') for k, v in self.checks.items())
        standard_logging(metrics, "{}:".format(self.experiment))


def write_jsonl(records, path):
    with open(path, 'w') as fio:
        for r in records:
            fio.write(dumps(r) + '\n')


def write_report(report: Report, out_dir):
    """
    Writes `<experiment>.jsonl` and `<experiment>.csv` in `out_dir`.

    Returns
    -------
    paths : tuple
            The JSON-lines and CSV paths.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl = out_dir / '{}.jsonl'.format(report.experiment)
    csv = out_dir / '{}.csv'.format(report.experiment)
    write_jsonl(report.records(), jsonl)
    report.frame().to_csv(csv, index=False)
    return jsonl, csv
