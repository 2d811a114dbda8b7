import csv
import io
import json
import os

from app.errors import ConfigError
from app.models import ErrorRateReport, ErrorRateRow

CSV_COLUMNS = [
    "experiment",
    "snr",
    "snr_convention",
    "l",
    "k",
    "d",
    "n_codewords",
    "trials",
    "seed",
    "empirical_p",
    "ci_low",
    "ci_high",
    "analytic_p",
    "analytic_ref",
    "z_score",
]

_INT_COLUMNS = {"l", "k", "d", "n_codewords", "trials", "seed"}
_FLOAT_COLUMNS = {"snr", "empirical_p", "ci_low", "ci_high", "analytic_p", "z_score"}


def _cell(value) -> str:
    if value is None:
        return ""
    # repr keeps every float bit, so parsing gives the same number back
    return repr(value) if isinstance(value, float) else str(value)


def emit_csv(report: ErrorRateReport) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        data = row.model_dump()
        writer.writerow([_cell(data[col]) for col in CSV_COLUMNS])
    return output.getvalue()


def parse_csv(text: str) -> list[ErrorRateRow]:
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {reader.fieldnames}", "report")
    rows = []
    for record in reader:
        values = {}
        for col, raw in record.items():
            if raw == "":
                values[col] = None
            elif col in _INT_COLUMNS:
                values[col] = int(raw)
            elif col in _FLOAT_COLUMNS:
                values[col] = float(raw)
            else:
                values[col] = raw
        rows.append(ErrorRateRow(**values))
    return rows


def report_document(report: ErrorRateReport) -> dict:
    return {
        "config": report.config,
        "snr_convention": report.snr_convention,
        "rows": [row.model_dump() for row in report.rows],
        "passed": report.passed,
    }


def emit_json(report: ErrorRateReport) -> str:
    return json.dumps(report_document(report), indent=2, sort_keys=True) + "\n"


def render(report: ErrorRateReport, output_format: str) -> str:
    if output_format == "csv":
        return emit_csv(report)
    if output_format == "json":
        return emit_json(report)
    raise ConfigError(f"unknown output format {output_format!r}", "output_format")


def write_report(report: ErrorRateReport, path: str, output_format: str) -> None:
    text = render(report, output_format)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        f.write(text)
