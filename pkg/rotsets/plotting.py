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

from pathlib import Path
from typing import Any, Dict, List, Optional

import matplotlib.pyplot as plt  # type: ignore[import]
from matplotlib.pyplot import axis
import numpy as np

from helpers.plot_utils import clean_plot, placard, save_svg
from helpers.utils import make_dir

from .invsets import GraphCurve, GridRegion
from .rotset import RotationSetEstimate

CURVE_KEYS = ('gamma0', 'gamma1', 'gamma2', 'upper', 'lower')


def plot_staircase(ax: axis, estimates: List[RotationSetEstimate], labels: List[str]) -> None:
    """One row per schedule level, each interval of the estimate drawn as a horizontal bar."""
    if all(e.is_empty for e in estimates):
        placard(ax, estimates[0].status if estimates else 'no returning orbits')
        return
    for row, estimate in enumerate(estimates):
        for interval in estimate.intervals:
            # degenerate intervals still get a visible tick
            ax.plot([interval.lo, interval.hi], [row, row], lw=6, solid_capstyle='butt', color='C0')
            ax.plot([interval.lo, interval.hi], [row, row], '|', ms=12, color='C0')
        if estimate.is_empty:
            ax.text(0.02, row, estimate.status, transform=ax.get_yaxis_transform(), va='center', fontsize=12)
    ax.set_yticks(range(len(estimates)))
    ax.set_yticklabels(labels)
    ax.set_xlabel('rotation (turns per iterate)')
    clean_plot(ax)


def plot_region(ax: axis, region: GridRegion, curves: Optional[Dict[str, GraphCurve]] = None,
                cmap: str = 'Greys', alpha: float = 1.0) -> None:
    ax.imshow(region.occupancy.astype(int), origin='lower', aspect='auto', cmap=cmap, alpha=alpha,
              interpolation='nearest', extent=(region.x_lo, region.x_hi, region.y_lo, region.y_hi), vmin=0, vmax=1)
    xs = np.linspace(region.x_lo, region.x_hi, 512)
    for name, curve in (curves or {}).items():
        ax.plot(xs, curve(xs), lw=1.5, label=name)
    if curves:
        ax.legend(loc='upper right', fontsize=10, frameon=False)
    ax.set_xlabel('x (turns)')
    ax.set_ylabel('y')
    clean_plot(ax)


def plot_witness(ax: axis, witness: Dict[str, Any], stride: int = 50) -> None:
    """p1 of the witness orbit against n, backward iterates at negative n."""
    forward = np.asarray(witness['forward_trace'], dtype=float).reshape(-1, 2)
    backward = np.asarray(witness['backward_trace'], dtype=float).reshape(-1, 2)
    ax.plot(np.arange(len(forward)) * stride, forward[:, 0], color='C0', label='forward')
    ax.plot(-np.arange(len(backward)) * stride, backward[:, 0], color='C1', label='backward')
    ax.axhline(witness['level'], ls='--', color='grey', lw=1)
    ax.set_xlabel('n')
    ax.set_ylabel('p1')
    ax.legend(frameon=False, fontsize=12)
    clean_plot(ax)


def _curves(params: Dict[str, Any]) -> Dict[str, GraphCurve]:
    return {key: GraphCurve.from_config(params[key]) for key in CURVE_KEYS if key in params}


def _estimate_rows(result: Dict[str, Any]) -> Optional[List[RotationSetEstimate]]:
    if 'levels' in result:
        return [RotationSetEstimate.from_dict(e) for e in result['levels']]
    if 'estimate' in result:
        return [RotationSetEstimate.from_dict(result['estimate'])]
    return None


def plot_record(record: Dict[str, Any], out_dir: Path, stem: Optional[str] = None) -> List[Path]:
    """
    SVG figures for a run record: the rotation staircase for estimates, region rasters with their curves for
    Theta, branch and certificate records, and the witness trace for certificates.
    """
    make_dir(out_dir)
    stem = stem or record['operation']
    result = record['result']
    params = record['config']['params']
    paths = []

    rows = _estimate_rows(result)
    if rows is not None:
        fig, ax = plt.subplots(figsize=(10, 2 + len(rows)))
        labels = [e.label or f'level {i}' for i, e in enumerate(rows)]
        plot_staircase(ax, rows, labels)
        paths.append(save_svg(fig, out_dir / f'{stem}_staircase.svg'))

    regions: Dict[str, Dict[str, Any]] = {}
    if 'region' in result:
        regions['theta'] = result['region']
    for sign, branch in (result.get('branches') or {}).items():
        if 'region' in branch:
            regions[f'{sign}_branch'] = branch['region']
    regions.update(result.get('regions') or {})
    curves = _curves(params)
    for name, region_dict in sorted(regions.items()):
        fig, ax = plt.subplots(figsize=(10, 6))
        region = GridRegion.from_dict(region_dict)
        if region.is_empty():
            placard(ax, f'{name}: empty')
        else:
            plot_region(ax, region, curves)
        paths.append(save_svg(fig, out_dir / f'{stem}_{name}.svg'))

    if result.get('witness'):
        fig, ax = plt.subplots(figsize=(10, 6))
        plot_witness(ax, result['witness'])
        paths.append(save_svg(fig, out_dir / f'{stem}_witness.svg'))
    return paths
