# Copyright (C) 2026 The pairforge Authors
# SPDX-License-Identifier: Apache-2.0
"""Paired text/image generation on a synthetic flower corpus."""

from pairforge._core import (
    Captioner,
    Gan,
    dominant_color,
    fit_gmm,
    generate_corpus,
    run_cli,
)

__all__ = ["Captioner", "Gan", "dominant_color", "fit_gmm", "generate_corpus", "run_cli"]
