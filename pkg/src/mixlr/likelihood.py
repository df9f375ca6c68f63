"""Peak-height density, dropout mass, per-genotype-set likelihood, and
the genotype-marginalised full likelihood.

Two evaluation paths exist on purpose: plain scalar functions that follow
the model definition term by term, and a vectorised batch evaluator used
by the engines. Tests hold them to 1e-9 relative agreement.

The density is the normal law of log10(O/E) with mean 0 and variance
c2/E, taken in log-ratio space (no Jacobian back to height space). A
structural exclusion is the ordinary float -inf in log10 space and is a
legal value end to end.
"""

from __future__ import annotations

import math
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import log_ndtr, ndtr

from .genotypes import WeightedGenotypeSet
from .model import (
    GenotypeSet,
    MassParams,
    ModelConfig,
    Profile,
    degradation_factor,
    expected_heights,
    shift_allele,
)

LN10 = math.log(10.0)
NEG_INF = float("-inf")


def peak_density(observed: float, expected: float, c2: float) -> float:
    """Density of an observed peak given its expectation.

    Normal density of log10(O/E) with variance c2/E; an expected height of
    zero makes any observed peak impossible (density 0, not an error).
    """
    if not observed > 0:
        raise ValueError("observed height must be > 0")
    if not c2 > 0:
        raise ValueError("c2 must be > 0")
    if expected <= 0:
        return 0.0
    var = c2 / expected
    x = math.log10(observed / expected)
    return math.exp(-x * x / (2 * var)) / math.sqrt(2 * math.pi * var)


def dropout_mass(expected: float, threshold: float, c2: float) -> float:
    """Model mass below the analytical threshold for one expected peak."""
    if not threshold > 0:
        raise ValueError("threshold must be > 0")
    if not c2 > 0:
        raise ValueError("c2 must be > 0")
    if expected <= 0:
        return 1.0
    z = math.log10(threshold / expected) / math.sqrt(c2 / expected)
    return float(ndtr(z))


def log10_peak_density(observed: float, expected: float, c2: float) -> float:
    if expected <= 0:
        return NEG_INF
    var = c2 / expected
    x = math.log10(observed / expected)
    return (-x * x / (2 * var) - 0.5 * math.log(2 * math.pi * var)) / LN10


def log10_dropout_mass(expected: float, threshold: float, c2: float) -> float:
    if expected <= 0:
        return 0.0
    z = math.log10(threshold / expected) / math.sqrt(c2 / expected)
    return float(log_ndtr(z)) / LN10


def position_universe(
    genotype_set: GenotypeSet,
    observed: Sequence[str],
    params: MassParams,
) -> list[str]:
    """Allele positions that can carry expectation or observation."""
    universe: list[str] = []

    def add(a: str):
        if a not in universe:
            universe.append(a)

    for a in observed:
        add(a)
    for g in genotype_set:
        for a in g.alleles:
            add(a)
            if params.bw_stutter_prop > 0:
                target = shift_allele(a, -1)
                if target is not None:
                    add(target)
            if params.fw_stutter_prop > 0:
                target = shift_allele(a, +1)
                if target is not None:
                    add(target)
    return universe


def locus_log_likelihood(
    profile: Profile,
    genotype_set: GenotypeSet,
    params: MassParams,
    locus: str,
    sizes: Optional[Mapping[str, float]] = None,
) -> float:
    """log10 Pr(peaks at one locus | genotype set, mass parameters).

    Observed peaks with positive expectation contribute their density,
    expected-but-absent positions contribute dropout mass, and an observed
    peak with zero expectation is a structural exclusion (-inf).
    """
    peaks = profile.peaks(locus)
    observed = {p.allele: p for p in peaks}
    universe = position_universe(genotype_set, list(observed), params)
    if sizes is None:
        sizes = {p.allele: p.size for p in peaks if p.size is not None}
    expected = expected_heights(genotype_set, params, locus, universe, sizes)

    total = 0.0
    at = profile.analytical_threshold
    for a in universe:
        e = expected[a]
        if a in observed:
            if e <= 0:
                return NEG_INF
            total += log10_peak_density(observed[a].height, e, params.variance_c2)
        elif e > 0:
            total += log10_dropout_mass(e, at, params.variance_c2)
    return total


def set_log_likelihood(
    profile: Profile,
    genotype_sets: Union[GenotypeSet, Mapping[str, GenotypeSet]],
    params: MassParams,
    config: Optional[ModelConfig] = None,
) -> float:
    """log10 profile likelihood for one genotype-set assignment.

    genotype_sets is a per-locus mapping, or a single GenotypeSet for a
    single-locus profile.
    """
    if config is not None:
        config.validate_params(params)
    if isinstance(genotype_sets, GenotypeSet):
        if len(profile.loci) > 1:
            raise ValueError("a bare GenotypeSet only applies to a single-locus profile")
        genotype_sets = {locus: genotype_sets for locus in profile.loci}
    total = 0.0
    for locus in profile.loci:
        if locus not in genotype_sets:
            raise ValueError(f"no genotype set supplied for locus {locus}")
        ll = locus_log_likelihood(profile, genotype_sets[locus], params, locus)
        if ll == NEG_INF:
            return NEG_INF
        total += ll
    return total


def log10sumexp(values: np.ndarray, axis=None) -> np.ndarray:
    """Stable log10 of a sum of 10**values."""
    values = np.asarray(values, dtype=float)
    m = np.max(values, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sum(np.power(10.0, values - m_safe), axis=axis, keepdims=True)
        out = m_safe + np.log10(s)
    out = np.where(np.isfinite(m), out, NEG_INF)
    return np.squeeze(out, axis=axis) if axis is not None else float(out.item())


def full_log10_likelihood(
    profile: Profile,
    weighted_sets: Mapping[str, Sequence[WeightedGenotypeSet]],
    params: MassParams,
    config: Optional[ModelConfig] = None,
) -> float:
    """log10 of the genotype-marginalised likelihood Pr(O) = sum_j Pr(S_j) Pr(O|S_j).

    weighted_sets maps locus -> enumeration for one hypothesis; loci
    factorise given the mass parameters.
    """
    if config is not None:
        config.validate_params(params)
    total = 0.0
    for locus in profile.loci:
        sets = weighted_sets.get(locus)
        if not sets:
            raise ValueError(f"empty genotype-set enumeration at locus {locus}")
        terms = np.array(
            [
                math.log10(ws.prior) + locus_log_likelihood(profile, ws.set, params, locus)
                for ws in sets
            ]
        )
        locus_total = log10sumexp(terms)
        if locus_total == NEG_INF:
            return NEG_INF
        total += locus_total
    return total


def full_likelihood(
    profile: Profile,
    weighted_sets: Mapping[str, Sequence[WeightedGenotypeSet]],
    params: MassParams,
    config: Optional[ModelConfig] = None,
) -> float:
    """Linear-domain genotype-marginalised likelihood."""
    ll = full_log10_likelihood(profile, weighted_sets, params, config)
    return 0.0 if ll == NEG_INF else 10.0**ll


class LocusEvaluator:
    """Vectorised per-locus likelihood over batches of mass parameters.

    Precomputes copy-number tensors and stutter index maps for one locus
    enumeration so that engines can sweep grids, simplex iterates, and
    Monte Carlo draws without re-walking the genotype sets.
    """

    def __init__(
        self,
        profile: Profile,
        weighted_sets: Sequence[WeightedGenotypeSet],
        locus: str,
        sizes: Optional[Mapping[str, float]] = None,
        include_stutter: bool = False,
        locus_multiplier: float = 1.0,
    ):
        peaks = profile.peaks(locus)
        self.locus = locus
        self.threshold = profile.analytical_threshold
        self.multiplier = float(locus_multiplier)
        self.n_contrib = len(weighted_sets[0].set)

        positions: list[str] = [p.allele for p in peaks]

        def add(a: str):
            if a not in positions:
                positions.append(a)

        for ws in weighted_sets:
            for g in ws.set:
                for a in g.alleles:
                    add(a)
                    if include_stutter:
                        for delta in (-1, +1):
                            t = shift_allele(a, delta)
                            if t is not None:
                                add(t)
        self.positions = positions
        n_pos = len(positions)
        pos_index = {a: i for i, a in enumerate(positions)}

        n_sets = len(weighted_sets)
        copies = np.zeros((n_sets, self.n_contrib, n_pos))
        for s, ws in enumerate(weighted_sets):
            for c, g in enumerate(ws.set):
                for a in g.alleles:
                    copies[s, c, pos_index[a]] += 1.0
        self.copies = copies
        self.log10_priors = np.log10(np.array([ws.prior for ws in weighted_sets]))

        self.obs_mask = np.zeros(n_pos, dtype=bool)
        self.obs_log10_height = np.zeros(n_pos)
        for p in peaks:
            i = pos_index[p.allele]
            self.obs_mask[i] = True
            self.obs_log10_height[i] = math.log10(p.height)

        if sizes is None:
            sizes = {p.allele: p.size for p in peaks if p.size is not None}
        self.size_exponent = np.array(
            [
                ((sizes[a] - 100.0) / 100.0) if a in sizes and sizes[a] is not None else np.nan
                for a in positions
            ]
        )

        def index_of(shift: int) -> np.ndarray:
            idx = np.full(n_pos, -1, dtype=int)
            for i, a in enumerate(positions):
                t = shift_allele(a, shift)
                if t is not None and t in pos_index:
                    idx[i] = pos_index[t]
            return idx

        self.parent_idx = index_of(+1)  # back-stutter source, one repeat above
        self.source_idx = index_of(-1)  # forward-stutter source, one repeat below

    def set_log10_likelihoods(
        self,
        templates: np.ndarray,
        c2: np.ndarray,
        slope: np.ndarray,
        bw: np.ndarray,
        fw: np.ndarray,
        stutter_c2: Optional[np.ndarray] = None,
    ) -> np.ndarray:
        """(batch, n_sets) array of log10 per-set locus likelihoods.

        templates has shape (batch, n_contrib); the scalar parameters are
        (batch,) arrays.
        """
        templates = np.atleast_2d(np.asarray(templates, dtype=float))
        c2 = np.asarray(c2, dtype=float).reshape(-1, 1, 1)
        slope = np.asarray(slope, dtype=float).reshape(-1, 1, 1)
        bw = np.asarray(bw, dtype=float).reshape(-1, 1, 1)
        fw = np.asarray(fw, dtype=float).reshape(-1, 1, 1)

        # (batch, n_sets, n_pos)
        allelic = np.einsum("bc,scp->bsp", templates, self.copies)

        e = allelic.copy()
        if np.any(bw > 0):
            has_parent = self.parent_idx >= 0
            e = e + np.where(has_parent, bw * allelic[..., np.maximum(self.parent_idx, 0)], 0.0)
        if np.any(fw > 0):
            has_source = self.source_idx >= 0
            e = e + np.where(has_source, fw * allelic[..., np.maximum(self.source_idx, 0)], 0.0)

        deg = np.where(
            np.isnan(self.size_exponent), 1.0, np.power(slope, np.nan_to_num(self.size_exponent))
        )
        e = self.multiplier * deg * e

        if stutter_c2 is None:
            var_c2 = np.broadcast_to(c2, e.shape)
        else:
            stutter_c2 = np.asarray(stutter_c2, dtype=float).reshape(-1, 1, 1)
            var_c2 = np.where(allelic > 0, c2, stutter_c2)

        with np.errstate(divide="ignore", invalid="ignore"):
            var = var_c2 / e
            log10_e = np.log10(e)
            # observed positions: normal log-density of log10(O/E)
            x = self.obs_log10_height - log10_e
            obs_ll = (-x * x / (2 * var) - 0.5 * np.log(2 * math.pi * var)) / LN10
            # unobserved positions: dropout mass below the threshold
            z = (math.log10(self.threshold) - log10_e) / np.sqrt(var)
            drop_ll = log_ndtr(z) / LN10

        positive = e > 0
        terms = np.where(
            self.obs_mask,
            np.where(positive, obs_ll, NEG_INF),
            np.where(positive, drop_ll, 0.0),
        )
        return terms.sum(axis=-1)

class MixtureEvaluator:
    """Vectorised full-likelihood evaluator across all loci of a profile."""

    def __init__(
        self,
        profile: Profile,
        weighted_sets: Mapping[str, Sequence[WeightedGenotypeSet]],
        config: Optional[ModelConfig] = None,
        sizes: Optional[Mapping[str, Mapping[str, float]]] = None,
        locus_multipliers: Optional[Mapping[str, float]] = None,
    ):
        config = config or ModelConfig()
        self.config = config
        self.profile = profile
        include_stutter = config.back_stutter or config.forward_stutter
        self.evaluators = [
            LocusEvaluator(
                profile,
                weighted_sets[locus],
                locus,
                sizes=sizes.get(locus) if sizes else None,
                include_stutter=include_stutter,
                locus_multiplier=(locus_multipliers or {}).get(locus, 1.0),
            )
            for locus in profile.loci
        ]
        self.n_contrib = self.evaluators[0].n_contrib if self.evaluators else 0

    def marginal_log10(
        self,
        templates: np.ndarray,
        c2,
        slope=1.0,
        bw=0.0,
        fw=0.0,
        stutter_c2=None,
    ) -> np.ndarray:
        """(batch,) log10 marginal likelihood for a batch of parameter vectors."""
        templates = np.atleast_2d(np.asarray(templates, dtype=float))
        batch = templates.shape[0]

        def vec(v):
            return np.broadcast_to(np.asarray(v, dtype=float).reshape(-1), (batch,)) if np.ndim(v) == 0 else np.asarray(v, dtype=float)

        c2, slope, bw, fw = vec(c2), vec(slope), vec(bw), vec(fw)
        if stutter_c2 is not None:
            stutter_c2 = vec(stutter_c2)
        total = np.zeros(batch)
        for ev in self.evaluators:
            per_set = ev.set_log10_likelihoods(templates, c2, slope, bw, fw, stutter_c2)
            total += log10sumexp(ev.log10_priors + per_set, axis=-1)
        return total

    def marginal_log10_params(self, params: MassParams) -> float:
        """Scalar convenience wrapper taking a MassParams."""
        return float(
            self.marginal_log10(
                np.array([params.templates]),
                params.variance_c2,
                params.degradation_slope,
                params.bw_stutter_prop,
                params.fw_stutter_prop,
                params.stutter_variance_c2,
            )[0]
        )
