# Copyright ©2022-2023. The Regents of the University of California
# (Regents). All Rights Reserved.

# Redistribution and use in source and binary forms, with or without
# modification, are permitted provided that the following conditions
# are met: 

# 1. Redistributions of source code must retain the above copyright
# notice, this list of conditions and the following disclaimer. 

# 2. Redistributions in binary form must reproduce the above copyright
# notice, this list of conditions and the following disclaimer in the 
# documentation and/or other materials provided with the
# distribution. 

# THIS SOFTWARE IS PROVIDED BY THE COPYRIGHT HOLDERS AND CONTRIBUTORS
# "AS IS" AND ANY EXPRESS OR IMPLIED WARRANTIES, INCLUDING, BUT NOT
# LIMITED TO, THE IMPLIED WARRANTIES OF MERCHANTABILITY AND FITNESS FOR
# A PARTICULAR PURPOSE ARE DISCLAIMED. IN NO EVENT SHALL THE COPYRIGHT
# HOLDER OR CONTRIBUTORS BE LIABLE FOR ANY DIRECT, INDIRECT, INCIDENTAL,
# SPECIAL, EXEMPLARY, OR CONSEQUENTIAL DAMAGES (INCLUDING, BUT NOT
# LIMITED TO, PROCUREMENT OF SUBSTITUTE GOODS OR SERVICES; LOSS OF USE,
# DATA, OR PROFITS; OR BUSINESS INTERRUPTION) HOWEVER CAUSED AND ON ANY
# THEORY OF LIABILITY, WHETHER IN CONTRACT, STRICT LIABILITY, OR TORT
# (INCLUDING NEGLIGENCE OR OTHERWISE) ARISING IN ANY WAY OUT OF THE USE
# OF THIS SOFTWARE, EVEN IF ADVISED OF THE POSSIBILITY OF SUCH DAMAGE.

import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from box import Box
from pandas import DataFrame as PandasDataFrame

from helpers.utils import make_dir


def to_plain(value: Any) -> Any:
    """
    Convert a record to plain JSON types: numpy scalars and arrays, Paths, Boxes and tuples. Infinite floats
    become the strings '+inf' / '-inf', NaN becomes None.
    """
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return None
        if math.isinf(value):
            return '+inf' if value > 0 else '-inf'
    return value


class IOUtils:

    def __init__(
        self,
        cfg: Box,
        data_format: Box
    ):
        self.cfg = cfg
        self.data_format = data_format
        self.outputs = Path(cfg.path.working.directory_path)
        make_dir(self.outputs)

    @property
    def schema_tag(self) -> str:
        return str(self.data_format.schema)

    @property
    def results_path(self) -> Path:
        return self.outputs / 'results.jsonl'

    @property
    def run_info_path(self) -> Path:
        return self.outputs / 'run_info.jsonl'

    def check_record(
        self,
        record: Dict[str, Any],
        kind: str,
    ) -> None:
        """
        Check that the record has all required fields

        Args:
            record: result record
            kind: record kind, to be used in error messages and to look up the result format.
        """
        if kind not in self.data_format.records:
            raise ValueError(f"Unknown record kind {kind}, must be one of {', '.join(self.data_format.records)}")
        required_fields = set(self.data_format.records[kind].required)

        fields_present = set(record)

        if not required_fields.issubset(fields_present):
            raise ValueError(
                f"{kind} record format incorrect. {kind} must include the following fields: "
                f"{', '.join(sorted(required_fields))}, instead found {', '.join(sorted(fields_present))}"
            )

    def dumps(self, record: Dict[str, Any], kind: str) -> str:
        """Canonical single-line serialization: schema tag added, keys sorted, floats as repr."""
        self.check_record(record, kind)
        tagged = dict(record, schema=self.schema_tag, kind=kind)
        return json.dumps(to_plain(tagged), sort_keys=True, allow_nan=False)

    def write_record(self, record: Dict[str, Any], kind: str, fpath: Optional[Path] = None) -> Path:
        fpath = fpath or self.results_path
        with open(fpath, 'a') as f:
            f.write(self.dumps(record, kind) + '\n')
        return fpath

    def write_run_info(self, info: Dict[str, Any]) -> Path:
        # Timing and worker counts stay out of results.jsonl
        with open(self.run_info_path, 'a') as f:
            f.write(json.dumps(to_plain(info), sort_keys=True) + '\n')
        return self.run_info_path

    def reset_results(self) -> None:
        if self.results_path.is_file():
            self.results_path.unlink()

    def save_csv(self, df: PandasDataFrame, name: str, subdir: str = 'tables') -> Path:
        make_dir(self.outputs / subdir)
        fpath = self.outputs / subdir / f'{name}.csv'
        df.to_csv(fpath, index=False, float_format='%.17g')
        return fpath

    def save_pbm(self, text: str, name: str, subdir: str = 'regions') -> Path:
        make_dir(self.outputs / subdir)
        fpath = self.outputs / subdir / f'{name}.pbm'
        fpath.write_text(text)
        return fpath


def load_records(fpath: Path, schema: Optional[str] = None) -> List[Dict[str, Any]]:
    """
    Load result records from a results.jsonl file

    Args:
        fpath: path to the file
        schema: if given, records carrying another schema tag raise ValueError
    """
    records = []
    with open(fpath, 'r') as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            record = json.loads(line)
            if schema is not None and record.get('schema') != schema:
                raise ValueError(f'{fpath}:{line_number}: schema {record.get("schema")!r}, expected {schema!r}')
            records.append(record)
    return records
