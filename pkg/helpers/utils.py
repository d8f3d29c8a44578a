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

import operator
import os
import shutil
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional

from box import Box
from importlib_resources import files as importlib_resources_files
from yaml import FullLoader, load as yaml_load


def make_dir(directory_path: Path, remove: bool = False) -> None:
    """
    Create new directory

    Args:
        directory_path: directory path
        remove: whether to replace the directory with an empty one if it's already present
    """
    if directory_path.is_dir() and remove:
        shutil.rmtree(directory_path)

    directory_path.mkdir(parents=True, exist_ok=True)


def strictly_increasing(L: List[float]) -> bool:
    # Check that the list's values are strictly increasing
    return all(x < y for x, y in zip(L, L[1:]))


COMPARISONS: Dict[str, Callable[[Any, Any], bool]] = {
    '<=': operator.le, '<': operator.lt, '>=': operator.ge, '>': operator.gt, '==': operator.eq,
}


def stored_number(value: Any) -> Optional[float]:
    # Numbers as written to records: infinities are '+inf' / '-inf', NaN is null
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    if value in ('+inf', '-inf'):
        return float(value)
    return None


def compare_stored(value: Any, compare: str, bound: Any) -> Optional[bool]:
    """
    Evaluate `value compare bound` on record values. Returns None when the pair is not comparable
    (missing, non-numeric for an ordering, or an unknown operator).
    """
    if compare not in COMPARISONS:
        return None
    if compare == '==' and not (value is None or bound is None):
        a, b = stored_number(value), stored_number(bound)
        return value == bound if a is None or b is None else a == b
    a, b = stored_number(value), stored_number(bound)
    if a is None or b is None:
        return None
    return COMPARISONS[compare](a, b)


def load_format(file_name: str) -> Box:
    """
    Load one of the packaged YAML format files (config_format.yml, result_format.yml) from data_format.
    """
    format_path = importlib_resources_files('data_format') / file_name

    with open(format_path, 'r') as format_file:
        format_dict = yaml_load(format_file, Loader=FullLoader)

    return Box(format_dict)


def get_config_format() -> Box:
    return load_format('config_format.yml')


def get_result_format() -> Box:
    return load_format('result_format.yml')


def get_default_params() -> Box:
    return load_format('default_params.yml')


def missing_required_keys(cfg: Mapping[str, Any], format_section: Mapping[str, Any], prefix: str = '') -> List[str]:
    """
    Dotted paths of the keys a config section is missing, following the `required` list of a format section
    and recursing into nested sections described alongside it.

    Args:
        cfg: config (or config section) to check
        format_section: matching section of config_format.yml
        prefix: dotted path of cfg within the full config

    Returns: list of missing dotted paths, empty when the section is complete
    """
    missing = []
    for key in format_section.get('required', []) or []:
        if cfg is None or key not in cfg or cfg[key] is None:
            missing.append(f'{prefix}{key}')
    for key, sub_format in format_section.items():
        if key == 'required' or not isinstance(sub_format, Mapping):
            continue
        if cfg is not None and key in cfg and isinstance(cfg[key], Mapping):
            missing += missing_required_keys(cfg[key], sub_format, f'{prefix}{key}.')
    return missing


def check_allowed_values(value: Any, allowed: List[Any]) -> Optional[str]:
    """Error message if value is not one of allowed, None otherwise."""
    if value not in allowed:
        return f'invalid value {value!r}, must be one of {", ".join(map(str, allowed))}'
    return None


def build_config_from_file(config_file_path_string: str) -> Box:
    """
    Build the config Box (dictionary) from file and convert file paths to pathlib.Path objects, resolving
    relative paths against the working directory, returning a Box containing file paths.
    """
    with open(config_file_path_string, 'r') as config_file:
        config_dict = yaml_load(config_file, Loader=FullLoader)

    if not isinstance(config_dict, dict):
        raise ValueError(f'{config_file_path_string} does not contain a YAML mapping')

    return build_config(config_dict)


def build_config(config_dict: Dict[str, Any]) -> Box:
    """Same as build_config_from_file for a config already in memory."""
    config_dict = dict(config_dict)

    def recursively_convert_to_path_and_resolve(dict_or_path_string: Any, path_root: Path) -> Any:

        if dict_or_path_string is None:
            return None

        elif isinstance(dict_or_path_string, (str, Path)):

            path = Path(dict_or_path_string)

            if os.path.isabs(path):
                return path

            return path_root / path

        else:

            new_dict = {}
            for key, value in dict_or_path_string.items():

                new_dict[key] = recursively_convert_to_path_and_resolve(value, path_root)

            return new_dict

    input_path_dict: Dict[str, Any] = config_dict.get('path') or {}
    working_path_dict = input_path_dict.get('working') or {}

    # get the working directory path; relative paths are taken from the repository root
    working_directory_path = Path(working_path_dict.get('directory_path') or 'outputs')
    if not os.path.isabs(working_directory_path):
        working_directory_path = Path(__file__).parent.parent / working_directory_path

    processed_path_dict = recursively_convert_to_path_and_resolve(working_path_dict, working_directory_path)

    # Otherwise the final leg of the directory path would be repeated
    processed_path_dict['directory_path'] = working_directory_path

    config_dict['path'] = {'working': processed_path_dict}

    return Box(config_dict)
