"""Regenerate the pinned golden trace fingerprint (rerun only after an intended model change)."""

import hashlib
import json
from pathlib import Path

from evasim.harness.design import CONDITIONS, build_plan
from evasim.harness.trial import run_trial

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "golden_trace.json"
SEED, SUBJECT, CONDITION = 2021, 1, 2


def main():
    profile = build_plan(SEED, 1).subjects[SUBJECT - 1]
    text = run_trial(CONDITIONS[CONDITION], profile).to_csv()
    lines = text.splitlines()
    payload = {
        "master_seed": SEED,
        "subject": SUBJECT,
        "condition": CONDITION,
        "header": lines[0],
        "n_rows": len(lines) - 1,
        "first_row": lines[1],
        "last_row": lines[-1],
        "sha256": hashlib.sha256(text.encode()).hexdigest(),
    }
    OUT.write_text(json.dumps(payload, indent=1) + "\n")


if __name__ == "__main__":
    main()
