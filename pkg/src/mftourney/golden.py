"""Published reference values with their comparison tolerances."""

from __future__ import annotations

import math

__all__ = ["TABLE1", "TABLE2", "FIG5_THRESHOLDS", "TOL"]

# T: (q1, median, q3, beta, V); None where the quartile lies past the deadline
TABLE1 = {
    0.5: (0.281, None, None, 0.449, 0.074),
    1.0: (0.285, 0.613, None, 0.619, 0.121),
    2.0: (0.289, 0.630, None, 0.736, 0.166),
    5.0: (0.293, 0.649, 2.424, 0.834, 0.215),
    10.0: (0.295, 0.658, 2.545, 0.881, 0.237),
    100.0: (0.296, 0.666, 2.661, 0.960, 0.256),
    math.inf: (0.296, 0.667, 2.667, 1.000, 0.257),
}

# case: (beta, beta_AD, beta_DA, V_AD, V_DA, welfare); None where a type is absent
TABLE2 = {
    0: (0.759, 0.759, None, 0.178, None, 0.178),
    1: (0.738, 0.922, 0.000, 0.319, 0.000, 0.255),
    2: (0.600, 1.000, 0.000, 1.701, 0.000, 1.020),
    3: (0.498, 1.000, 0.164, 4.276, 0.022, 1.724),
    4: (0.498, 1.000, 0.373, 7.338, 0.058, 1.514),
    5: (0.498, None, 0.498, None, 0.086, 0.086),
    6: (0.738, 0.922, 0.001, 0.319, 0.000, 0.255),
    7: (0.604, 1.000, 0.009, 1.675, 0.005, 1.007),
    8: (0.519, 1.000, 0.198, 4.030, 0.110, 1.678),
    9: (0.518, 1.000, 0.398, 7.091, 0.253, 1.621),
    10: (0.518, None, 0.518, None, 0.365, 0.365),
}

FIG5_THRESHOLDS = (0.0063, 0.0505)

TOL = {
    "table1_quantile": 0.002,
    "table1_beta": 0.001,
    "table1_value": 0.001,
    "table2_beta": 0.005,
    "table2_value": 0.01,
    "fig5_threshold": 0.0005,
}
