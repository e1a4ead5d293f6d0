"""Covariance spectra.

The dynamics depend on the data covariance K only through its eigenvalues
(with multiplicities) and the eigenbasis coordinates of the parameters, so a
spectrum is stored as grouped atoms.  Builders cover the named families used
by the experiments; sampled families use a seeded counter-based generator so
a (spec, seed) pair always produces the same atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class SpectrumK:
    """Eigenvalues of K as (value, multiplicity) groups; d = sum of mults."""

    values: np.ndarray
    mults: np.ndarray
    d: int = field(init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        mults = np.asarray(self.mults, dtype=np.int64)
        if vals.ndim != 1 or mults.shape != vals.shape:
            raise ValueError("values and mults must be matching 1-D arrays")
        if np.any(vals <= 0):
            raise ValueError("eigenvalues must be positive")
        if np.any(mults < 1):
            raise ValueError("multiplicities must be >= 1")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mults", mults)
        object.__setattr__(self, "d", int(mults.sum()))

    @property
    def n_groups(self) -> int:
        return len(self.values)

    @property
    def trace(self) -> float:
        return float(np.dot(self.values, self.mults))

    @property
    def avg_eig(self) -> float:
        return self.trace / self.d

    @property
    def lam_min(self) -> float:
        return float(self.values.min())

    @property
    def lam_max(self) -> float:
        return float(self.values.max())

    def expand(self) -> np.ndarray:
        """Per-coordinate eigenvalues, length d."""
        return np.repeat(self.values, self.mults)

    def scaled_to_avg(self, avg: float) -> "SpectrumK":
        return SpectrumK(self.values * (avg / self.avg_eig), self.mults)

    def weights(self) -> np.ndarray:
        """Group weights mult/d, summing to one."""
        return self.mults / self.d


def identity_spectrum(d: int) -> SpectrumK:
    return SpectrumK(np.array([1.0]), np.array([d]))


def align_groups(spectrum: SpectrumK, rows: np.ndarray
                 ) -> tuple[SpectrumK, np.ndarray]:
    """Split eigenvalue groups whose initialization rows are not constant.

    `rows` has one eigenbasis row per coordinate (d rows) or one per group.
    Groups with identical rows stay collapsed (cheap structured inits);
    heterogeneous groups are expanded into singletons so every group carries
    one well-defined row.  Returns the adjusted spectrum and per-group rows.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] == spectrum.n_groups:
        return spectrum, rows
    if rows.shape[0] != spectrum.d:
        raise ValueError(
            f"rows must have {spectrum.d} (per-coordinate) or "
            f"{spectrum.n_groups} (per-group) entries, got {rows.shape[0]}"
        )
    values, mults, out_rows = [], [], []
    pos = 0
    for g in range(spectrum.n_groups):
        mult = int(spectrum.mults[g])
        seg = rows[pos: pos + mult]
        if np.all(seg == seg[0]):
            values.append(spectrum.values[g])
            mults.append(mult)
            out_rows.append(seg[0])
        else:
            values.extend([spectrum.values[g]] * mult)
            mults.extend([1] * mult)
            out_rows.extend(seg)
        pos += mult
    return SpectrumK(np.array(values), np.array(mults)), np.array(out_rows)


def atoms_spectrum(values, mults) -> SpectrumK:
    return SpectrumK(np.asarray(values, dtype=float), np.asarray(mults, dtype=np.int64))


def mp_spectrum(d: int, ratio: float, seed: int, avg: float | None = None) -> SpectrumK:
    """d atoms sampled from the Marchenko-Pastur law with samples/dim `ratio`.

    The density has unit scale (mean eigenvalue 1) and support
    [(1 - sqrt(1/ratio))^2, (1 + sqrt(1/ratio))^2]; sampling is inverse-CDF
    on a fine grid with a Philox stream, then sorted.  `avg` rescales the
    result to a target average eigenvalue.
    """
    if ratio <= 1.0:
        raise ConfigurationError("mp spectrum needs ratio > 1 (no atom at zero)")
    lo = (1.0 - np.sqrt(1.0 / ratio)) ** 2
    hi = (1.0 + np.sqrt(1.0 / ratio)) ** 2
    grid = np.linspace(lo, hi, 20001)
    x = grid[1:-1]
    dens = ratio / (2.0 * np.pi * x) * np.sqrt((hi - x) * (x - lo))
    dens = np.concatenate([[0.0], dens, [0.0]])
    cdf = np.concatenate([[0.0], np.cumsum((dens[1:] + dens[:-1]) / 2.0 * np.diff(grid))])
    cdf /= cdf[-1]
    rng = np.random.Generator(np.random.Philox(seed))
    u = rng.uniform(size=d)
    vals = np.sort(np.interp(u, cdf, grid))
    spec = SpectrumK(vals, np.ones(d, dtype=np.int64))
    return spec if avg is None else spec.scaled_to_avg(avg)


def powered_uniform_spectrum(d: int, a: float, b: float, q: float, seed: int,
                             avg: float = 1.0) -> SpectrumK:
    """Atoms sigma^(2(q+1)) with sigma ~ Uniform(a, b), trace-normalized.

    q = 0 gives plain squares sigma^2; raising q stretches the top of the
    spectrum while the normalization pins the average eigenvalue to `avg`.
    """
    if not 0 < a <= b:
        raise ConfigurationError("powered_uniform needs 0 < a <= b")
    rng = np.random.Generator(np.random.Philox(seed))
    sigma = rng.uniform(a, b, size=d)
    vals = np.sort(sigma ** (2.0 * (q + 1.0)))
    return SpectrumK(vals, np.ones(d, dtype=np.int64)).scaled_to_avg(avg)


def file_spectrum(path: str, avg: float | None = None) -> SpectrumK:
    """Eigenvalues from a text file, one `value [multiplicity]` per line."""
    values, mults = [], []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            values.append(float(parts[0]))
            mults.append(int(parts[1]) if len(parts) > 1 else 1)
    spec = SpectrumK(np.array(values), np.array(mults))
    return spec if avg is None else spec.scaled_to_avg(avg)


def parse_spectrum(text: str, d: int, seed: int) -> SpectrumK:
    """Resolve a spectrum spec string.

    Supported forms: `identity`, `mp:<ratio>[,<avg>]`,
    `powered_uniform:<a>,<b>,<q>[,<avg>]`, `two_atom:<lo>,<hi>`,
    `file:<path>[,<avg>]`.
    """
    text = text.strip()
    if text == "identity":
        return identity_spectrum(d)
    if ":" not in text:
        raise ConfigurationError(f"cannot parse spectrum spec {text!r}")
    kind, _, rest = text.partition(":")
    args = [s.strip() for s in rest.split(",") if s.strip()]
    try:
        if kind == "mp":
            ratio = float(args[0])
            avg = float(args[1]) if len(args) > 1 else None
            return mp_spectrum(d, ratio, seed, avg)
        if kind == "powered_uniform":
            a, b, q = (float(s) for s in args[:3])
            avg = float(args[3]) if len(args) > 3 else 1.0
            return powered_uniform_spectrum(d, a, b, q, seed, avg)
        if kind == "two_atom":
            lo, hi = float(args[0]), float(args[1])
            half = d // 2
            return atoms_spectrum([lo, hi], [half, d - half])
        if kind == "file":
            avg = float(args[1]) if len(args) > 1 else None
            return file_spectrum(args[0], avg)
    except (IndexError, ValueError) as exc:
        raise ConfigurationError(f"bad spectrum spec {text!r}: {exc}") from exc
    raise ConfigurationError(f"unknown spectrum kind {kind!r}")
