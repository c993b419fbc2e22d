import csv

import numpy as np
import pytest

from sumdens.bayes import ALL_COLUMNS, EXPECTED_ROWS, RESPONSE


@pytest.fixture(scope="session")
def pima_csv(tmp_path_factory):
    """Synthetic 532-row diabetes-study CSV with the expected schema.

    The predictors follow plausible ranges and the outcome carries a real
    logistic signal, so the posterior is informative and the marginal
    density pipeline can be checked end to end.
    """
    rng = np.random.default_rng(532)
    n = EXPECTED_ROWS
    npreg = rng.poisson(3.0, n)
    glu = np.round(rng.normal(122.0, 30.0, n).clip(56, 199), 0)
    bp = np.round(rng.normal(71.0, 11.0, n).clip(38, 110), 0)
    skin = np.round(rng.normal(29.0, 10.0, n).clip(7, 99), 0)
    bmi = np.round(rng.normal(32.5, 6.2, n).clip(18.2, 67.1), 1)
    ped = np.round(rng.lognormal(-0.9, 0.65, n).clip(0.085, 2.42), 3)
    age = np.round(21 + rng.gamma(2.0, 5.5, n).clip(0, 60), 0)

    def std(v):
        return (v - v.mean()) / v.std(ddof=1)

    lin = -0.95 + 0.35 * std(npreg) + 1.0 * std(glu) + 0.7 * std(bmi) + 0.3 * std(ped) + 0.4 * std(age)
    y = rng.random(n) < 1.0 / (1.0 + np.exp(-lin))

    path = tmp_path_factory.mktemp("data") / "pima.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ALL_COLUMNS) + [RESPONSE])
        for j in range(n):
            writer.writerow(
                [
                    int(npreg[j]),
                    f"{glu[j]:g}",
                    f"{bp[j]:g}",
                    f"{skin[j]:g}",
                    f"{bmi[j]:.1f}",
                    f"{ped[j]:.3f}",
                    f"{age[j]:g}",
                    "Yes" if y[j] else "No",
                ]
            )
    return path
