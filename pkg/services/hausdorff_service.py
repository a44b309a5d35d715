"""Besicovitch measure functions, premeasure bounds and the ε/u sequences."""
import logging
import math
from typing import List, Optional

import numpy as np
from scipy.optimize import brentq

from models.circle_set_models import CompactCircleSet
from models.hausdorff_models import EpsilonRow, EpsilonTable, LiminfReport, MeasureFunction, WitnessRecord
from models.inner_models import InnerFunction
from models.measure_models import AtomicMeasure, CoverMeasure, SelfSimilarMeasure
from models.run_models import DEFAULT_POLICY, NumericPolicy
from services.errors import CoverBudgetError, DomainError, EmptyMeasureError, PrefixExhaustedError, SupportError
from services.inner_service import GAP_CONSTANT, InnerService
from services.measure_service import MeasureService, _cells
from utils.circle_utils import TWO_PI

logger = logging.getLogger(__name__)

# right end used for the last piece, where -log(1 - t) blows up
LAST_PIECE_END = 1.0 - 1e-15

SUPPORT_CELL_DEPTH = 8


def _piecewise(h: MeasureFunction, t: float) -> float:
    """Gauge value for t in [t_N, 1]; the n-th piece on [t_n, t_{n-1}] is min(2ⁿ t, 2ⁿ⁻¹ t_{n-1})"""
    deeper = int(np.count_nonzero(np.asarray(h.breakpoints[1:]) > t))
    n = min(deeper + 1, h.stages)
    return min(2.0**n * t, 2.0 ** (n - 1) * h.breakpoints[n - 1])


def _threshold_ratio(h: MeasureFunction, t: float) -> float:
    """h(t) / (-t log(1 - t))"""
    return _piecewise(h, t) / (-t * math.log1p(-t))


class HausdorffService:
    """Construction side of the decay-rate argument"""

    @staticmethod
    def besicovitch_build(E: CompactCircleSet, stages: int) -> MeasureFunction:
        """Breakpoints t_n = min{min |I|, t_{n-1}/4} from covers of total length < 4⁻ⁿ"""
        if not E.declared_measure_zero:
            raise DomainError(f"set {E.name!r} is not declared measure zero", "besicovitch_build")
        if stages < 1:
            raise DomainError("at least one stage is required", "besicovitch_build")
        breakpoints = [1.0]
        covers, generations = [], []
        generation = 1
        for n in range(1, stages + 1):
            budget = 4.0**-n
            chosen = None
            while generation <= E.max_generation:
                cover = E.cover_at(generation)
                if cover.total_length < budget and cover.max_length < breakpoints[-1]:
                    chosen = cover
                    break
                generation += 1
            if chosen is None:
                raise CoverBudgetError(
                    f"no cover of {E.name!r} up to generation {E.max_generation} has total length < 4^-{n} "
                    f"with arcs shorter than t_{n-1}",
                    stage=n,
                )
            breakpoints.append(min(chosen.min_length, breakpoints[-1] / 4.0))
            covers.append(chosen)
            generations.append(chosen.generation)
            logger.debug("stage %d: generation %d, t=%.6g", n, chosen.generation, breakpoints[-1])
        return MeasureFunction(
            breakpoints=breakpoints, stage_covers=covers, stage_generations=generations, set_name=E.name
        )

    @staticmethod
    def h_eval(h: MeasureFunction, t: float) -> float:
        """Exact piecewise value of the gauge on (t_N, 1]"""
        if not 0.0 < t <= 1.0:
            raise DomainError(f"t = {t} outside (0, 1]", "h_eval")
        if t <= h.last_breakpoint:
            raise PrefixExhaustedError(
                f"t = {t:.6g} is not above the last breakpoint t_{h.stages} = {h.last_breakpoint:.6g}",
                stage_required=h.stages + 1,
                operation="h_eval",
            )
        return _piecewise(h, t)

    @staticmethod
    def breakpoint_value(h: MeasureFunction, n: int) -> float:
        """h(t_n) for a built stage n, where both neighbouring pieces equal 2ⁿ t_n"""
        if not 1 <= n <= h.stages:
            raise PrefixExhaustedError(
                f"stage {n} outside the built prefix 1..{h.stages}", stage_required=n, operation="h_eval"
            )
        return _piecewise(h, h.breakpoints[n])

    @staticmethod
    def premeasure_estimate(h: MeasureFunction, E: CompactCircleSet, stage: int) -> float:
        """Σ h(|I|) over the stage cover, an upper bound for the h-premeasure at scale t_{n-1}"""
        if not 1 <= stage <= h.stages:
            raise PrefixExhaustedError(
                f"stage {stage} outside the built prefix 1..{h.stages}",
                stage_required=stage,
                operation="premeasure_estimate",
            )
        if E.name != h.set_name:
            raise DomainError(f"gauge was built for {h.set_name!r}, not {E.name!r}", "premeasure_estimate")
        cover = E.cover_at(h.stage_generations[stage - 1])
        if cover.groups != h.stage_covers[stage - 1].groups:
            raise DomainError(f"stage {stage} cover does not replay", "premeasure_estimate")
        return math.fsum(float(group.count) * _piecewise(h, group.length) for group in cover.groups)

    @staticmethod
    def _threshold_crossing(h: MeasureFunction, level: float, xtol: float) -> float:
        """inf{t : h(t)/(-t log(1-t)) <= level}, scanning pieces from the smallest t upward"""
        t = h.breakpoints
        if _threshold_ratio(h, t[-1]) <= level:
            stage_required = h.stages + max(1, math.ceil(math.log2(level)))
            raise PrefixExhaustedError(
                f"threshold {level:.6g} is already crossed at t_{h.stages}",
                stage_required=stage_required,
                operation="epsilon_sequence",
            )
        pieces = []
        for k in range(h.stages, 0, -1):
            middle = t[k - 1] / 2.0
            pieces.append((t[k], middle))
            pieces.append((middle, min(t[k - 1], LAST_PIECE_END)))
        for left, right in pieces:
            if _threshold_ratio(h, right) > level:
                continue

            def excess(s: float) -> float:
                return math.log(_threshold_ratio(h, math.exp(s))) - math.log(level)

            return math.exp(brentq(excess, math.log(left), math.log(right), xtol=xtol))
        raise AssertionError("the ratio vanishes at t = 1, so some piece crosses")

    @staticmethod
    def epsilon_sequence(h: MeasureFunction, length: int, policy: NumericPolicy = DEFAULT_POLICY) -> EpsilonTable:
        """Rows (n, t★_n, εₙ = (1 - t★_{n+1})^{n/2}, uₙ = 1/εₙ) for n = 1..length"""
        if length < 1:
            raise DomainError("table length must be positive", "epsilon_sequence")
        constant = GAP_CONSTANT
        t_star = [
            HausdorffService._threshold_crossing(h, n * constant, policy.bisection_width)
            for n in range(1, length + 2)
        ]
        rows = []
        for n in range(1, length + 1):
            following = t_star[n]
            log_epsilon = 0.5 * n * math.log1p(-following)
            identity = -(n / (2.0 * (n + 1))) * HausdorffService.h_eval(h, following) / (following * constant)
            rows.append(
                EpsilonRow(
                    n=n,
                    t_star=t_star[n - 1],
                    t_star_next=following,
                    log_epsilon=log_epsilon,
                    epsilon=math.exp(log_epsilon),
                    u=math.exp(-log_epsilon),
                    identity_residual=abs(log_epsilon - identity) / abs(identity),
                )
            )
        return EpsilonTable(rows=rows, threshold_constant=constant)

    @staticmethod
    def check_support(measure, E: CompactCircleSet, generation: int) -> None:
        """Raise SupportError unless the measure lives on the generation cover of E"""
        measure_kind = measure.kind
        if isinstance(measure, CoverMeasure):
            if measure.name != E.name:
                raise SupportError(f"measure of {measure.name!r} is not carried by {E.name!r}", "liminf_witness")
            return
        if isinstance(measure, AtomicMeasure):
            outside = [angle for angle, _ in measure.atoms if not E.contains(angle, generation)]
            if outside:
                raise SupportError(f"atoms at angles {outside} lie outside {E.name!r}", "liminf_witness")
            return
        if isinstance(measure, SelfSimilarMeasure):
            lefts, lengths, _ = _cells(measure, SUPPORT_CELL_DEPTH)
            ends = np.concatenate([lefts, lefts + lengths])
            angles = TWO_PI * (measure.base_position + measure.base_length * ends)
            if not all(E.contains(angle, generation) for angle in angles):
                raise SupportError(f"self-similar measure is not carried by {E.name!r}", "liminf_witness")
            return
        raise SupportError(f"cannot verify support of a {measure_kind!r} measure", "liminf_witness")

    @staticmethod
    def liminf_witness(
        theta: InnerFunction,
        table: EpsilonTable,
        E: CompactCircleSet,
        h: Optional[MeasureFunction] = None,
        horizon: Optional[int] = None,
        policy: NumericPolicy = DEFAULT_POLICY,
    ) -> LiminfReport:
        """All n <= N with δₙ(θ) < εₙ², plus arcs with ν(I) > h(|I|) when h is given"""
        measure = theta.measure
        if measure is None or MeasureService.total_mass(measure) <= 0.0:
            raise EmptyMeasureError("the witness search needs a nonzero measure", "liminf_witness")
        generation = h.stage_generations[-1] if h is not None else 20
        HausdorffService.check_support(measure, E, generation)
        horizon = min(horizon or len(table.rows), len(table.rows))

        records: List[WitnessRecord] = []
        for n in range(1, horizon + 1):
            row = table.row(n)
            decay = InnerService.delta_n(theta, n, policy)
            record = WitnessRecord(
                n=n,
                log_delta_n=decay.log_delta_n,
                log_epsilon_sq=2.0 * row.log_epsilon,
                is_witness=decay.log_delta_n < 2.0 * row.log_epsilon,
            )
            if h is not None and row.t_star_next > h.last_breakpoint:
                sup = MeasureService.sup_arc_ratio(measure, row.t_star_next, policy)
                arc_mass = sup.ratio * row.t_star_next
                h_of_length = HausdorffService.h_eval(h, row.t_star_next)
                record = record.model_copy(
                    update={
                        "arc_mass": arc_mass,
                        "h_of_length": h_of_length,
                        "certified": arc_mass > h_of_length,
                        "window": sup.window,
                    }
                )
            records.append(record)
        witnesses = [record.n for record in records if record.is_witness]
        logger.info("liminf witness search: %d of %d indices are witnesses", len(witnesses), horizon)
        return LiminfReport(horizon=horizon, witnesses=witnesses, records=records)
