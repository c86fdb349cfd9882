"""Balanced two-way ANOVA with interaction plus pairwise post-hoc
comparisons and significance letter groupings.

Only balanced designs are supported: every (A, B) cell carries the same
number of replicates, which keeps the sum-of-squares decomposition exact and
sidesteps Type-I/II/III ambiguity.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special, stats as sp_stats

from .errors import DomainError, InsufficientReplicates, UnbalancedDesign, UnknownFactor


@dataclass(frozen=True)
class FactorialTable:
    factor_a_levels: tuple[float, ...]
    factor_b_levels: tuple[float, ...]
    observations: np.ndarray  # shape (a, b, n_rep)

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        a, b = len(self.factor_a_levels), len(self.factor_b_levels)
        if obs.ndim != 3 or obs.shape[0] != a or obs.shape[1] != b:
            raise UnbalancedDesign(f"observations shape {obs.shape} does not match {a}x{b} levels")
        if obs.shape[2] < 2:
            raise InsufficientReplicates(f"n_rep = {obs.shape[2]}, need at least 2")
        obs.setflags(write=False)
        object.__setattr__(self, "observations", obs)
        object.__setattr__(self, "factor_a_levels", tuple(self.factor_a_levels))
        object.__setattr__(self, "factor_b_levels", tuple(self.factor_b_levels))

    @property
    def n_rep(self) -> int:
        return self.observations.shape[2]

    @classmethod
    def from_records(cls, records, a_key="angle_deg", b_key="mass_kg", value_key="pressure_pa"):
        """Build a balanced table from dict records; raises if any cell count differs."""
        cells: dict[tuple[float, float], list[float]] = {}
        for rec in records:
            key = (float(rec[a_key]), float(rec[b_key]))
            cells.setdefault(key, []).append(float(rec[value_key]))
        a_levels = tuple(sorted({k[0] for k in cells}))
        b_levels = tuple(sorted({k[1] for k in cells}))
        counts = {len(v) for v in cells.values()}
        if len(cells) != len(a_levels) * len(b_levels) or len(counts) != 1:
            raise UnbalancedDesign("every (a, b) cell must have the same number of replicates")
        n_rep = counts.pop()
        obs = np.empty((len(a_levels), len(b_levels), n_rep))
        for i, av in enumerate(a_levels):
            for j, bv in enumerate(b_levels):
                obs[i, j, :] = cells[(av, bv)]
        return cls(a_levels, b_levels, obs)

    @classmethod
    def from_csv(cls, path):
        """CSV columns: angle_deg, mass_kg, rep, pressure_pa."""
        import csv

        with open(path, newline="", encoding="utf-8") as f:
            return cls.from_records(list(csv.DictReader(f)))


@dataclass(frozen=True)
class EffectRow:
    name: str
    ss: float
    df: int
    ms: float
    f: float
    p: float


@dataclass(frozen=True)
class AnovaResult:
    effect_a: EffectRow
    effect_b: EffectRow
    interaction: EffectRow
    ss_error: float
    df_error: int
    ms_error: float
    ss_total: float
    degenerate: bool = False  # all observations equal; F defined as 0

    def effects(self) -> list[EffectRow]:
        return [self.effect_a, self.effect_b, self.interaction]

    def to_dict(self) -> dict:
        d = {row.name: asdict(row) for row in self.effects()}
        d["error"] = {"ss": self.ss_error, "df": self.df_error, "ms": self.ms_error}
        d["ss_total"] = self.ss_total
        d["degenerate"] = self.degenerate
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def format_table(self) -> str:
        lines = [f"{'source':<12}{'SS':>14}{'df':>5}{'MS':>14}{'F':>10}{'p':>10}"]
        for row in self.effects():
            lines.append(
                f"{row.name:<12}{row.ss:>14.4f}{row.df:>5d}{row.ms:>14.4f}"
                f"{row.f:>10.2f}{row.p:>10.4g}"
            )
        lines.append(f"{'error':<12}{self.ss_error:>14.4f}{self.df_error:>5d}{self.ms_error:>14.4f}")
        lines.append(f"{'total':<12}{self.ss_total:>14.4f}")
        return "\n".join(lines)


def f_cdf(x: float, d1: int, d2: int) -> float:
    """F-distribution CDF via the regularized incomplete beta function."""
    if x < 0:
        raise DomainError(f"F statistic must be non-negative, got {x}")
    if d1 < 1 or d2 < 1:
        raise DomainError("degrees of freedom must be >= 1")
    if x == 0.0:
        return 0.0
    z = d1 * x / (d1 * x + d2)
    return float(special.betainc(d1 / 2.0, d2 / 2.0, z))


def anova2(table: FactorialTable) -> AnovaResult:
    """Fixed-effects two-way decomposition with interaction."""
    obs = table.observations
    a, b, n = obs.shape
    grand = obs.mean()
    mean_a = obs.mean(axis=(1, 2))
    mean_b = obs.mean(axis=(0, 2))
    mean_cell = obs.mean(axis=2)

    ss_a = b * n * float(((mean_a - grand) ** 2).sum())
    ss_b = a * n * float(((mean_b - grand) ** 2).sum())
    ss_cells = n * float(((mean_cell - grand) ** 2).sum())
    ss_ab = ss_cells - ss_a - ss_b
    ss_err = float(((obs - mean_cell[:, :, None]) ** 2).sum())
    ss_tot = float(((obs - grand) ** 2).sum())

    df_a, df_b = a - 1, b - 1
    df_ab = df_a * df_b
    df_err = a * b * (n - 1)
    ms_err = ss_err / df_err
    degenerate = ss_tot == 0.0

    def row(name, ss, df):
        ms = ss / df
        if ms_err == 0.0:
            # 0/0 convention: no variance anywhere reports F = 0, not NaN
            f = 0.0 if ms == 0.0 else float("inf")
            p = 1.0 if ms == 0.0 else 0.0
        else:
            f = ms / ms_err
            p = 1.0 - f_cdf(max(f, 0.0), df, df_err)
        return EffectRow(name, ss, df, ms, f, p)

    return AnovaResult(
        effect_a=row("A", ss_a, df_a),
        effect_b=row("B", ss_b, df_b),
        interaction=row("AxB", ss_ab, df_ab),
        ss_error=ss_err,
        df_error=df_err,
        ms_error=ms_err,
        ss_total=ss_tot,
        degenerate=degenerate,
    )


@dataclass(frozen=True)
class Comparison:
    level_i: float
    level_j: float
    mean_diff: float
    p: float
    significant: bool


@dataclass(frozen=True)
class PosthocResult:
    factor: str
    method: str
    alpha: float
    effect_significant: bool
    comparisons: tuple[Comparison, ...] = ()
    letters: dict = field(default_factory=dict)  # level -> letter string

    def to_dict(self) -> dict:
        return {
            "factor": self.factor,
            "method": self.method,
            "alpha": self.alpha,
            "effect_significant": self.effect_significant,
            "comparisons": [asdict(c) for c in self.comparisons],
            "letters": {str(k): v for k, v in self.letters.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _letter_groups(levels: list[float], means: np.ndarray, sig) -> dict:
    """Compact letter display: maximal runs of mutually non-significant levels.

    Levels are sorted by mean; with a common critical difference the
    non-significant sets are contiguous runs, and any run contained in a
    larger one is dropped.
    """
    order = np.argsort(means, kind="stable")
    runs = []
    for start in range(len(order)):
        end = start
        while end + 1 < len(order) and all(
            not sig(order[i], order[end + 1]) for i in range(start, end + 1)
        ):
            end += 1
        runs.append((start, end))
    maximal = [r for r in runs if not any(o != r and o[0] <= r[0] and r[1] <= o[1] for o in runs)]
    seen = []
    for r in maximal:
        if r not in seen:
            seen.append(r)
    letters = {levels[idx]: "" for idx in range(len(levels))}
    for li, (s, e) in enumerate(seen):
        ch = chr(ord("a") + li)
        for pos in range(s, e + 1):
            letters[levels[order[pos]]] += ch
    return letters


def posthoc(
    table: FactorialTable,
    result: AnovaResult,
    factor: str,
    method: str = "fisher_lsd",
    alpha: float = 0.05,
) -> PosthocResult:
    """Pairwise comparisons on marginal means plus letter groupings.

    fisher_lsd: pairwise t tests with MS_error / df_error.
    tukey_hsd: studentized-range critical difference.
    Runs only when the corresponding main effect is significant.
    """
    if factor == "A":
        levels = list(table.factor_a_levels)
        marginal = table.observations.mean(axis=(1, 2))
        n_per = table.observations.shape[1] * table.n_rep
        effect = result.effect_a
    elif factor == "B":
        levels = list(table.factor_b_levels)
        marginal = table.observations.mean(axis=(0, 2))
        n_per = table.observations.shape[0] * table.n_rep
        effect = result.effect_b
    else:
        raise UnknownFactor(f"factor must be 'A' or 'B', got {factor!r}")
    if method not in ("fisher_lsd", "tukey_hsd"):
        raise ValueError(f"unknown post-hoc method {method!r}")

    if effect.p >= alpha:
        # no significant effect: empty comparisons, every level shares one letter
        return PosthocResult(
            factor, method, alpha, effect_significant=False,
            letters={lv: "a" for lv in levels},
        )

    df_err = result.df_error
    ms_err = result.ms_error
    k = len(levels)
    comparisons = []
    sig_matrix = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            diff = float(marginal[i] - marginal[j])
            if method == "fisher_lsd":
                se = np.sqrt(ms_err * (2.0 / n_per))
                tstat = abs(diff) / se if se > 0 else 0.0
                p = 2.0 * float(sp_stats.t.sf(tstat, df_err)) if se > 0 else 1.0
            else:
                se = np.sqrt(ms_err / n_per)
                q = abs(diff) / se if se > 0 else 0.0
                p = float(sp_stats.studentized_range.sf(q, k, df_err)) if se > 0 else 1.0
            significant = p < alpha
            sig_matrix[i, j] = sig_matrix[j, i] = significant
            comparisons.append(Comparison(levels[i], levels[j], diff, p, significant))

    letters = _letter_groups(levels, marginal, lambda i, j: bool(sig_matrix[i, j]))
    return PosthocResult(factor, method, alpha, True, tuple(comparisons), letters)
