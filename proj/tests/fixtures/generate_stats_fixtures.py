"""Regenerates stats_fixtures.hpp from scipy and statsmodels.

Run from the repository root:  python3 tests/fixtures/generate_stats_fixtures.py
The output is committed; the C++ tests never call Python.
"""

import numpy as np
import pandas as pd
from scipy import stats
from statsmodels.stats.anova import AnovaRM
from statsmodels.stats.multitest import multipletests

OUT = "tests/fixtures/stats_fixtures.hpp"


def rm_anova(table):
    n, k = table.shape
    df = pd.DataFrame(
        [(s, c, table[s, c]) for s in range(n) for c in range(k)],
        columns=["subject", "condition", "value"],
    )
    res = AnovaRM(df, "value", "subject", within=["condition"]).fit().anova_table
    row = res.iloc[0]
    return float(row["F Value"]), float(row["Num DF"]), float(row["Den DF"]), float(row["Pr > F"])


def gg_epsilon(table):
    k = table.shape[1]
    cov = np.cov(table, rowvar=False, ddof=1)
    centre = np.eye(k) - np.ones((k, k)) / k
    d = centre @ cov @ centre
    return float(np.trace(d) ** 2 / ((k - 1) * np.sum(d * d)))


def arr(values):
    return "{" + ", ".join(repr(float(v)) for v in np.ravel(values)) + "}"


def main():
    rng = np.random.default_rng(20240607)
    lines = [
        "#pragma once",
        "",
        "// Generated by generate_stats_fixtures.py from scipy.stats and statsmodels AnovaRM. Do not edit.",
        "",
        "#include <array>",
        "#include <vector>",
        "",
        "namespace fixtures {",
        "",
        "struct AnovaCase {",
        "  int subjects, conditions;",
        "  std::vector<double> values;  // row-major subjects x conditions",
        "  double f, df1, df2, p, gg_epsilon;",
        "};",
        "",
        "struct PairedCase {",
        "  std::vector<double> x, y;",
        "  double t, df, p;",
        "};",
        "",
        "struct Tail {",
        "  double d1, d2, x, p;  // d2 = 0: two-sided Student t with d1 df",
        "};",
        "",
        "struct Adjust {",
        "  std::vector<double> p, bonferroni, holm;",
        "};",
        "",
    ]

    # Textbook-sized 5 x 3 design plus larger random designs.
    textbook = np.array(
        [[45, 50, 55], [42, 42, 45], [36, 41, 43], [39, 35, 40], [51, 55, 59]], dtype=float
    )
    tables = [textbook]
    for n, k in [(8, 4), (12, 3), (6, 5)]:
        base = rng.normal(10, 3, size=(n, 1))
        effect = rng.normal(0, 1.0, size=(1, k))
        tables.append(base + effect + rng.normal(0, 1.5, size=(n, k)))
    lines.append("inline const std::vector<AnovaCase> kAnova = {")
    for t in tables:
        f, d1, d2, p = rm_anova(t)
        lines.append(
            f"    {{{t.shape[0]}, {t.shape[1]}, {arr(t)}, {f!r}, {d1!r}, {d2!r}, {p!r}, {gg_epsilon(t)!r}}},"
        )
    lines.append("};")
    lines.append("")

    lines.append("inline const std::vector<PairedCase> kPaired = {")
    for n in [5, 8, 15, 30]:
        x = rng.normal(5, 2, size=n)
        y = x + rng.normal(0.4, 1.0, size=n)
        r = stats.ttest_rel(x, y)
        lines.append(f"    {{{arr(x)}, {arr(y)}, {float(r.statistic)!r}, {n - 1}.0, {float(r.pvalue)!r}}},")
    lines.append("};")
    lines.append("")

    lines.append("inline const std::vector<Tail> kTails = {")
    for d1, d2, x in [(1, 4, 2.5), (2, 8, 4.46), (2, 10, 0.3), (3, 12, 7.0), (4, 20, 1.0),
                      (1, 30, 12.0), (5, 2, 19.3), (2, 22, 3.44), (7, 49, 2.2), (10, 100, 0.9)]:
        lines.append(f"    {{{d1}.0, {d2}.0, {x!r}, {float(stats.f.sf(x, d1, d2))!r}}},")
    for df, x in [(1, 1.0), (2, 4.303), (4, -2.776), (5, 0.5), (9, 2.262),
                  (11, -3.5), (14, 1.2), (29, 2.0), (60, -0.1), (3, 12.924)]:
        lines.append(f"    {{{df}.0, 0.0, {x!r}, {float(2 * stats.t.sf(abs(x), df))!r}}},")
    lines.append("};")
    lines.append("")

    p = np.array([0.01, 0.04, 0.03, 0.20, 0.005])
    lines.append(
        "inline const Adjust kAdjust = {"
        + arr(p) + ", "
        + arr(multipletests(p, method="bonferroni")[1]) + ", "
        + arr(multipletests(p, method="holm")[1]) + "};"
    )
    lines.append("")
    lines.append("}  // namespace fixtures")
    with open(OUT, "w") as fh:
        fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
