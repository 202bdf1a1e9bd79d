"""Loss-weight ablation on the default toy setup, with and without the alignment network.

    python demos/ablation_table.py [out_dir]

Runs two seeds instead of the default three to keep it shorter; the
acceptance suite runs the full sweep.
"""

import sys

from hashattack.config import default_config_text, parse_config
from hashattack.experiments import ablation_sweep

out = sys.argv[1] if len(sys.argv) > 1 else "demo_ablation"
text = default_config_text().replace("ablation_seeds = 0, 1, 2", "ablation_seeds = 0, 1")
cfg = parse_config(text)
table = ablation_sweep(cfg, out=out)
print(table.render(), end="")
print(f"table saved to {out}/ablation.json")
