from .data import SeriesData, load_csv
from .fit import FitResult, fit_params
from .reconcile import reconcile
from .report import PredictConfig, predict, read_report, report_schema, write_report
from .sample import sample_path
