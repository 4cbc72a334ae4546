# -*- coding: utf-8 -*-
"""
module for run report IO
"""

import logging

import numpy as np
import pandas as pd

from hamlag.cons import max_norm, relative_drift

logger = logging.getLogger(__name__)

lm_columns = ["step", "t", "energy", "drift", "lambda", "iters", "wall_ns"]
sav_columns = lm_columns[:4] + ["modified_energy", "modified_drift"] + lm_columns[4:]

# 17 significant digits round-trip every double
float_format = "%.17g"


class RunReport:
    """
    the per-step series and the summary of one trajectory.
    Drifts are relative to the t = 0 quantities, the series has one row per step
    and no row for t = 0.

    :param scheme: str, scheme label
    :param series: pd.DataFrame with ``lm_columns`` or ``sav_columns``
    :param summary: dict
    """

    def __init__(self, scheme, series, summary):
        self.scheme = scheme
        self.series = series
        self.summary = summary

    def __repr__(self):
        return "RunReport(%s, steps=%s)" % (self.scheme, len(self.series))

    @classmethod
    def from_records(
        cls,
        scheme,
        records,
        energy0,
        modified0=None,
        masses=None,
        mass0=None,
        error=None,
        failed_step=None,
    ):
        """
        :param scheme: str
        :param records: list of :class:`hamlag.integrators.StepRecord`
        :param energy0: float, H(z0)
        :param modified0: Optional[float], the SAV modified energy at t = 0, switches to ``sav_columns``
        :param masses: Optional[list of float], sub-invariant after each step
        :param mass0: Optional[float], sub-invariant at t = 0
        :param error: Optional[float], max norm error at the final time
        :param failed_step: Optional[int], index of the step that raised
        :return: RunReport
        """
        energies = np.array([r.energy.total for r in records], dtype=float)
        data = {
            "step": np.arange(1, len(records) + 1, dtype=np.int64),
            "t": np.array([r.t_end for r in records], dtype=float),
            "energy": energies,
            "drift": relative_drift(energies, energy0),
        }
        columns = lm_columns
        if modified0 is not None:
            columns = sav_columns
            modified = np.array([r.modified_energy for r in records], dtype=float)
            data["modified_energy"] = modified
            data["modified_drift"] = relative_drift(modified, modified0)
        data["lambda"] = np.array([r.lam for r in records], dtype=float)
        data["iters"] = np.array([r.iterations for r in records], dtype=np.int64)
        data["wall_ns"] = np.array([r.wall_ns for r in records], dtype=np.int64)
        series = pd.DataFrame(data, columns=columns)

        summary = {
            "scheme": scheme,
            "steps": len(records),
            "max_drift": max_norm(series["drift"]),
            "max_modified_drift": (
                max_norm(series["modified_drift"]) if modified0 is not None else np.nan
            ),
            "mean_iters": float(series["iters"].mean()) if len(records) else 0.0,
            "max_iters": int(series["iters"].max()) if len(records) else 0,
            "max_lambda_dev": max_norm(series["lambda"] - 1.0),
            "mass_drift": np.nan,
            "wall_s": float(series["wall_ns"].sum()) * 1e-9,
            "degenerate_steps": sum(1 for r in records if r.degenerate),
            "near_orthogonal_steps": sum(1 for r in records if r.near_orthogonal),
            "error": np.nan if error is None else float(error),
            "failed_step": failed_step,
        }
        if masses is not None and mass0 is not None:
            summary["mass_drift"] = max_norm(relative_drift(masses, mass0))
        return cls(scheme, series, summary)

    def save_csv(self, path):
        """
        write the series, see :func:`emit_csv`
        """
        emit_csv(self, path)


def emit_csv(report, path):
    """
    write a report series (or any DataFrame) as CSV with a header row, CRLF line
    endings and 17 significant digits, an empty series gives a header-only file

    :param report: RunReport or pd.DataFrame
    :param path: str or path-like
    """
    df = report.series if isinstance(report, RunReport) else report
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\r\n")
    logger.debug("wrote %s rows to %s" % (len(df), path))


def read_csv(path, **readkwds):
    """
    parse a file written by :func:`emit_csv` back, floats bit exact

    :param path: str or path-like
    :param readkwds: keywords options for pandas.read_csv()
    :return: pd.DataFrame
    """
    readkwds.setdefault("float_precision", "round_trip")
    return pd.read_csv(path, **readkwds)
