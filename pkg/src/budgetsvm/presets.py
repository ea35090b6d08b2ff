"""Tuned hyperparameters and reference results for the benchmark datasets."""

from .exceptions import UnknownPreset

# dataset: (C, gamma)
PRESETS = {
    "phishing": (8.0, 8.0),
    "web": (8.0, 0.03),
    "adult": (32.0, 0.008),
    "ijcnn": (32.0, 2.0),
    "skin": (8.0, 0.03),
}

# test accuracy (%) of the exact LIBSVM solution with the preset parameters
LIBSVM_ACCURACY = {
    "phishing": 97.55,
    "web": 98.80,
    "adult": 84.82,
    "ijcnn": 98.77,
    "skin": 98.96,
}

# ADULT, one epoch, M = 3: budget -> test accuracy (%) per multi-merge method
ADULT_M3_ACCURACY = {
    "mm-bsgd": {120: 76.32, 600: 82.97, 1200: 83.36, 1800: 84.04, 2500: 83.98},
    "mm-gd": {120: 76.32, 600: 83.30, 1200: 83.69, 1800: 84.04, 2500: 83.94},
}


def preset(name):
    """Return ``{"C": ..., "gamma": ...}`` for a dataset name."""
    try:
        C, gamma = PRESETS[name.lower()]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return {"C": C, "gamma": gamma}
