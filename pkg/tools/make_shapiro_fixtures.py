"""Regenerate the pinned Shapiro-Wilk fixtures using scipy as the reference."""

import json
from pathlib import Path

import numpy as np
import scipy
from scipy import stats

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "shapiro_n12.json"


def main():
    rng = np.random.default_rng(20200601)
    makers = [
        lambda: rng.normal(0.0, 1.0, 12),
        lambda: rng.exponential(1.0, 12),
        lambda: rng.uniform(0.0, 1.0, 12),
        lambda: rng.lognormal(0.0, 0.8, 12),
    ]
    fixtures = [{"name": "ramp_1_12", "values": [float(v) for v in range(1, 13)]}]
    for i in range(19):
        vals = np.round(makers[i % len(makers)](), 6)
        fixtures.append({"name": f"random_{i:02d}", "values": [float(v) for v in vals]})
    for fx in fixtures:
        res = stats.shapiro(fx["values"])
        fx["W"] = float(res.statistic)
        fx["p"] = float(res.pvalue)
    payload = {"oracle": f"scipy.stats.shapiro {scipy.__version__}", "fixtures": fixtures}
    OUT.write_text(json.dumps(payload, indent=1) + "\n")


if __name__ == "__main__":
    main()
