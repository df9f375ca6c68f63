"""Core domain types: profiles, genotypes, propositions, mass parameters,
and the expected-peak-height model.

All types are immutable after construction and safe to share across
workers; every operation here is a pure function.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

# Reserved label for the aggregated unobserved allele. It may appear in
# genotype hypotheses but never as an observed peak.
Q_ALLELE = "Q"

HP = "Hp"
HD = "Hd"

_NUMERIC_LABEL = re.compile(r"^(\d+)(\.\d+)?$")


def shift_allele(label: str, repeats: int) -> Optional[str]:
    """Shift an allele label by a whole number of repeat units.

    Numeric labels ("12", "13.2") shift on their integer part; anything
    else (toy labels "A"/"B", the Q allele) has no repeat structure and
    returns None.
    """
    m = _NUMERIC_LABEL.match(label)
    if m is None:
        return None
    base = int(m.group(1)) + repeats
    if base <= 0:
        return None
    return f"{base}{m.group(2) or ''}"


@dataclass(frozen=True)
class Peak:
    """One observed peak: allele label, height in rfu, optional fragment size."""

    allele: str
    height: float
    size: Optional[float] = None

    def __post_init__(self):
        if not self.allele:
            raise ValueError("empty allele label")
        if self.allele == Q_ALLELE:
            raise ValueError("the reserved allele 'Q' cannot be observed")
        if not self.height > 0:
            raise ValueError(f"peak height must be positive, got {self.height}")
        if self.size is not None and not self.size > 0:
            raise ValueError(f"fragment size must be positive, got {self.size}")


class Profile:
    """Observed evidence profile: per-locus peak lists plus an analytical threshold."""

    def __init__(self, loci: Mapping[str, Sequence[Peak]], analytical_threshold: float):
        if not analytical_threshold > 0:
            raise ValueError("analytical threshold must be positive")
        clean: dict[str, tuple[Peak, ...]] = {}
        for locus, peaks in loci.items():
            peaks = tuple(peaks)
            labels = [p.allele for p in peaks]
            if len(set(labels)) != len(labels):
                raise ValueError(f"duplicate allele labels at locus {locus}")
            for p in peaks:
                if p.height < analytical_threshold:
                    raise ValueError(
                        f"peak {locus}:{p.allele} at {p.height} rfu is below "
                        f"the analytical threshold {analytical_threshold}"
                    )
            clean[locus] = peaks
        self.loci: Mapping[str, tuple[Peak, ...]] = clean
        self.analytical_threshold = float(analytical_threshold)

    def peaks(self, locus: str) -> tuple[Peak, ...]:
        return self.loci.get(locus, ())

    def observed_alleles(self, locus: str) -> tuple[str, ...]:
        return tuple(p.allele for p in self.peaks(locus))

    def __repr__(self):
        n = sum(len(v) for v in self.loci.values())
        return f"Profile({len(self.loci)} loci, {n} peaks, AT={self.analytical_threshold})"


@dataclass(frozen=True)
class Genotype:
    """Unordered pair of allele labels; a homozygote repeats its label."""

    alleles: tuple[str, str]

    def __init__(self, a: str, b: str):
        if not a or not b:
            raise ValueError("empty allele label in genotype")
        object.__setattr__(self, "alleles", (a, b) if a <= b else (b, a))

    def copies(self, allele: str) -> int:
        return (self.alleles[0] == allele) + (self.alleles[1] == allele)

    @property
    def is_homozygote(self) -> bool:
        return self.alleles[0] == self.alleles[1]

    def __repr__(self):
        return f"Genotype({self.alleles[0]},{self.alleles[1]})"


@dataclass(frozen=True)
class GenotypeSet:
    """Ordered per-contributor genotype assignment at one locus."""

    contributors: tuple[Genotype, ...]

    def __init__(self, contributors: Sequence[Genotype]):
        object.__setattr__(self, "contributors", tuple(contributors))
        if not self.contributors:
            raise ValueError("genotype set needs at least one contributor")

    def __len__(self):
        return len(self.contributors)

    def __iter__(self):
        return iter(self.contributors)


@dataclass(frozen=True)
class Proposition:
    """A proposition: number of contributors and any fixed (conditioned) genotypes.

    fixed_contributors maps contributor slot -> multi-locus genotype
    (locus -> Genotype), e.g. the POI under Hp or a conditioned victim profile.
    """

    noc: int
    fixed_contributors: Mapping[int, Mapping[str, Genotype]] = field(default_factory=dict)
    label: str = HD

    def __post_init__(self):
        if self.noc < 1:
            raise ValueError("NoC must be >= 1")
        if len(self.fixed_contributors) > self.noc:
            raise ValueError("more fixed contributors than NoC")
        for idx in self.fixed_contributors:
            if not 0 <= idx < self.noc:
                raise ValueError(f"fixed contributor index {idx} out of range for NoC={self.noc}")
        object.__setattr__(
            self, "fixed_contributors", {k: dict(v) for k, v in self.fixed_contributors.items()}
        )

    @property
    def unknown_indices(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.noc) if i not in self.fixed_contributors)


@dataclass(frozen=True)
class MassParams:
    """The continuous nuisance parameters of the peak-height model.

    Canonical storage is per-contributor template (rfu); mixture
    proportions are derived. variance_c2 is the c2 constant of the
    log-normal peak model. stutter_variance_c2 is only consulted when the
    model config splits allelic and stutter variances.
    """

    templates: tuple[float, ...]
    variance_c2: float
    degradation_slope: float = 1.0
    bw_stutter_prop: float = 0.0
    fw_stutter_prop: float = 0.0
    locus_multipliers: Optional[Mapping[str, float]] = None
    stutter_variance_c2: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(float(t) for t in self.templates))
        if any(t < 0 for t in self.templates):
            raise ValueError("templates must be >= 0")
        if not self.variance_c2 > 0:
            raise ValueError("variance_c2 must be > 0")
        if not 0 < self.degradation_slope <= 1:
            raise ValueError("degradation_slope must be in (0, 1]")
        for name in ("bw_stutter_prop", "fw_stutter_prop"):
            v = getattr(self, name)
            if not 0 <= v <= 0.3:
                raise ValueError(f"{name} must be in [0, 0.3]")
        if self.locus_multipliers is not None:
            if any(not m > 0 for m in self.locus_multipliers.values()):
                raise ValueError("locus multipliers must be positive")
            object.__setattr__(self, "locus_multipliers", dict(self.locus_multipliers))
        if self.stutter_variance_c2 is not None and not self.stutter_variance_c2 > 0:
            raise ValueError("stutter_variance_c2 must be > 0")

    @property
    def total_template(self) -> float:
        return sum(self.templates)

    @property
    def mixture_proportions(self) -> tuple[float, ...]:
        tot = self.total_template
        if tot == 0:
            return tuple(0.0 for _ in self.templates)
        return tuple(t / tot for t in self.templates)

    def multiplier(self, locus: str) -> float:
        if self.locus_multipliers is None:
            return 1.0
        return self.locus_multipliers.get(locus, 1.0)


@dataclass(frozen=True)
class ModelConfig:
    """Feature toggles for the peak-height model.

    A disabled feature requires the corresponding MassParams field at its
    neutral value (stutter proportion 0, slope 1, multipliers 1).
    """

    back_stutter: bool = False
    forward_stutter: bool = False
    degradation: bool = False
    locus_multipliers: bool = False
    split_stutter_variance: bool = False

    def validate_params(self, params: MassParams) -> None:
        if not self.back_stutter and params.bw_stutter_prop != 0:
            raise ValueError("back stutter disabled but bw_stutter_prop != 0")
        if not self.forward_stutter and params.fw_stutter_prop != 0:
            raise ValueError("forward stutter disabled but fw_stutter_prop != 0")
        if not self.degradation and params.degradation_slope != 1:
            raise ValueError("degradation disabled but slope != 1")
        if not self.locus_multipliers and params.locus_multipliers:
            if any(m != 1 for m in params.locus_multipliers.values()):
                raise ValueError("locus multipliers disabled but not all 1")
        if self.split_stutter_variance and params.stutter_variance_c2 is None:
            raise ValueError("split stutter variance enabled but stutter_variance_c2 unset")


def degradation_factor(slope: float, size: Optional[float]) -> float:
    """Exponential length-dependent amplification decay, neutral at slope 1.

    The factor is slope**((size_bp - 100) / 100); an unknown fragment size
    is treated as neutral.
    """
    if slope == 1.0 or size is None:
        return 1.0
    return slope ** ((size - 100.0) / 100.0)


def expected_heights(
    genotype_set: GenotypeSet,
    params: MassParams,
    locus: str,
    allele_universe: Sequence[str],
    sizes: Optional[Mapping[str, float]] = None,
) -> dict[str, float]:
    """Expected peak height (rfu) at every allele position of the universe.

    Allelic contribution is template x copy number (a homozygote puts both
    copies into one peak). Back/forward stutter adds the configured
    proportion of the parent position's allelic expectation; degradation
    and the locus multiplier then scale the total.
    """
    if len(genotype_set) != len(params.templates):
        raise ValueError(
            f"genotype set has {len(genotype_set)} contributors but "
            f"{len(params.templates)} templates supplied"
        )
    universe = list(allele_universe)
    allelic: dict[str, float] = {a: 0.0 for a in universe}
    for genotype, t in zip(genotype_set, params.templates):
        for a in genotype.alleles:
            if a not in allelic:
                raise ValueError(f"allele {a} of genotype set missing from universe at {locus}")
            allelic[a] += t

    mult = params.multiplier(locus)
    out: dict[str, float] = {}
    for a in universe:
        e = allelic[a]
        if params.bw_stutter_prop > 0:
            parent = shift_allele(a, +1)
            if parent is not None and parent in allelic:
                e += params.bw_stutter_prop * allelic[parent]
        if params.fw_stutter_prop > 0:
            source = shift_allele(a, -1)
            if source is not None and source in allelic:
                e += params.fw_stutter_prop * allelic[source]
        size = sizes.get(a) if sizes else None
        out[a] = mult * degradation_factor(params.degradation_slope, size) * e
    return out
