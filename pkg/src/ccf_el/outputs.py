"""Report outputs, registered by url scheme.

``json://?file=result.json`` writes the result document, ``csv://?dir=out&tables=estimates`` one CSV per table and
``markdown://?file=report.md`` the rendered report. ``?dir=`` names files after the report; without
either the output goes to stdout.
"""

import json
import logging
import os
import sys
from abc import ABC, abstractmethod
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional
from urllib.parse import ParseResult, parse_qs, urlparse

import numpy as np
import pandas as pd

from .errors import ConfigError
from .sample_io import FLOAT_FORMAT

_logger = logging.getLogger(__name__)


@dataclass
class Report:
    name: str
    kind: str
    document: Dict[str, Any]
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)


def _json_default(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dump_json(document: Dict[str, Any]) -> str:
    return json.dumps(document, indent=2, sort_keys=True, default=_json_default) + "\n"


class OutputBase(ABC):
    OUTPUT_REGISTRY = {}

    def __init__(self, url: ParseResult):
        self.query_params = parse_qs(url.query)
        self.filename: Optional[str] = self.query_params.get("file", [None])[0]
        tables = self.query_params.get("tables", [None])[0]
        self.tables: Optional[List[str]] = [t.strip() for t in tables.split(",")] if tables else None
        self.directory: Optional[str] = self.query_params.get("dir", [None])[0]
        self.written: List[str] = []

    def selected_tables(self, report: Report) -> Dict[str, pd.DataFrame]:
        if self.tables is None:
            return report.tables
        return {name: table for name, table in report.tables.items() if name in self.tables}

    @contextmanager
    def open_target(self, filename: Optional[str] = None):
        filename = filename or self.filename
        if filename is None:
            yield sys.stdout
            return
        parent = os.path.dirname(filename)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(filename, "w", newline="") as f:
            yield f
        self.written.append(filename)
        _logger.info(f"Wrote {filename}")

    @abstractmethod
    def write(self, report: Report): ...

    @classmethod
    def register(cls, type: str):
        def decorator(subclass):
            if type in cls.OUTPUT_REGISTRY:
                raise ValueError(f"Duplicate output type {type}")
            cls.OUTPUT_REGISTRY[type] = subclass
            return subclass

        return decorator

    @classmethod
    def build_output(cls, output_url: str, renv=None) -> "OutputBase":
        parsed_url: ParseResult = urlparse(output_url)
        if parsed_url.scheme not in cls.OUTPUT_REGISTRY:
            raise ConfigError(f"Unsupported output type {parsed_url.scheme}")
        subclass = cls.OUTPUT_REGISTRY[parsed_url.scheme]
        return subclass(parsed_url, renv=renv)


@OutputBase.register("json")
class JsonOutput(OutputBase):
    def __init__(self, url: ParseResult, renv=None):
        super().__init__(url)

    def write(self, report: Report):
        filename = self.filename
        if filename is None and self.directory is not None:
            filename = os.path.join(self.directory, f"{report.name}.json")
        with self.open_target(filename) as f:
            f.write(dump_json(report.document))


@OutputBase.register("csv")
class CsvOutput(OutputBase):
    def __init__(self, url: ParseResult, renv=None):
        super().__init__(url)
        self.directory = self.directory or "."

    def write(self, report: Report):
        for table_name, table in self.selected_tables(report).items():
            with self.open_target(os.path.join(self.directory, f"{report.name}-{table_name}.csv")) as f:
                table.to_csv(f, index=False, float_format=FLOAT_FORMAT)
