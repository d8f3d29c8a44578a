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

import matplotlib  # type: ignore[import]
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # type: ignore[import]
from matplotlib.pyplot import axis
import seaborn as sns  # type: ignore[import]

sns.set(font_scale=2, style='white')

# Fixed hash salt so SVG element ids do not change between runs
plt.rcParams['svg.hashsalt'] = 'rotsets'


# Source: https://stackoverflow.com/questions/925024/how-can-i-remove-the-top-and-right-axis-in-matplotlib
def clean_plot(ax: axis) -> None:
    # Format plot on given axis
    plt.tight_layout()

    ax.spines['top'].set_visible(False)
    ax.spines['right'].set_visible(False)

    ax.get_xaxis().tick_bottom()
    ax.get_yaxis().tick_left()


def save_svg(fig: plt.Figure, fpath: Path) -> Path:
    """
    Save figure as SVG with no date metadata, so that equal inputs give equal bytes, and close it.
    """
    fig.savefig(fpath, format='svg', metadata={'Date': None})
    plt.close(fig)
    return fpath


def placard(ax: axis, text: str) -> None:
    # Annotated empty panel
    ax.text(0.5, 0.5, text, ha='center', va='center', transform=ax.transAxes, fontsize=18)
    ax.set_xticks([])
    ax.set_yticks([])
