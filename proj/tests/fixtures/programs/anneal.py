#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""Simulated annealing on a one-dimensional multimodal function.

The random stream is a fixed linear congruential generator so the result
depends only on the constants below.
"""
from __future__ import annotations

import math


def objective(x):
    return math.sin(3.0 * x) + 0.25 * x * x


def run():
    state = 12345
    x = 2.5
    temperature = 10.0
    best = objective(x)
    for _ in range(2000):
        state = (1103515245 * state + 12345) % 2147483648
        step = (state / 2147483648.0 - 0.5) * 0.8
        candidate = x + step
        delta = objective(candidate) - objective(x)
        state = (1103515245 * state + 12345) % 2147483648
        if delta < 0 or state / 2147483648.0 < math.exp(-delta / max(temperature, 1e-12)):
            x = candidate
        best = min(best, objective(x))
        cooling_rate = 0.99992
        temperature *= cooling_rate
    return -best
