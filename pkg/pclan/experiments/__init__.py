from .reporting import Report, write_report
from .runs import RUNS, run_experiment
