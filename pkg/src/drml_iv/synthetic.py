"""Synthetic surgical-decision dataset used by the CLI examples.

Patients are nested in surgeons. Each surgeon has a latent tendency to
operate; a patient's chance of surgery rises with it, and the instrument is
the surgeon's operating rate measured on a held-out fifth of their patients,
split at the median. An unobserved frailty affects both surgery and the
adverse-event outcome, so unadjusted comparisons are confounded.

Regenerate the shipped file with::

    python3 -m drml_iv.synthetic src/drml_iv/data/synthetic_egs.csv
"""

from __future__ import annotations

import sys
from importlib import resources

import numpy as np
import pandas as pd
from scipy.special import expit

from drml_iv.data_model import compute_preference_instrument, dichotomize_instrument

COMORBIDITY_LEVELS = ("none", "mild", "severe")


def make_synthetic_egs(n_patients: int = 5000, n_surgeons: int = 80, seed: int = 2023) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    surgeon = rng.integers(0, n_surgeons, n_patients)
    tendency = rng.normal(0.3, 1.0, n_surgeons)
    age = np.round(rng.normal(65.0, 12.0, n_patients)).clip(18, 99)
    female = (rng.random(n_patients) < 0.5).astype(int)
    comorb = rng.choice(3, size=n_patients, p=[0.5, 0.3, 0.2])
    severity = np.round(rng.normal(0.0, 1.0, n_patients), 3)
    frailty = rng.normal(0.0, 1.0, n_patients)

    surgery_index = (tendency[surgeon] - 0.02 * (age - 65.0) + 0.5 * severity
                     - 0.4 * (comorb == 2) - 0.6 * frailty)
    operated = (rng.random(n_patients) < expit(surgery_index)).astype(int)
    risk = (-2.0 + 0.03 * (age - 65.0) + 0.4 * severity + 0.3 * (comorb == 1)
            + 0.6 * (comorb == 2) - 0.5 * operated + 0.6 * frailty)
    adverse = (rng.random(n_patients) < expit(risk)).astype(int)

    tto, usable = compute_preference_instrument(surgeon, operated, n_splits=5, seed=seed)
    keep = usable == 1
    frame = pd.DataFrame({
        "adverse_event": adverse[keep],
        "operated": operated[keep],
        "tto_high": dichotomize_instrument(tto[keep]),
        "age": age[keep].astype(int),
        "female": female[keep],
        "comorbidity": np.asarray(COMORBIDITY_LEVELS)[comorb[keep]],
        "severity": severity[keep],
    })
    return frame


def shipped_path(name: str = "synthetic_egs.csv"):
    """Path of a file shipped in the package's data directory."""
    return resources.files("drml_iv") / "data" / name


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    target = argv[0] if argv else "synthetic_egs.csv"
    make_synthetic_egs().to_csv(target, index=False, float_format="%.3f")


if __name__ == "__main__":
    main()
