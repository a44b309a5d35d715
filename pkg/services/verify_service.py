"""Acceptance battery: closed-form anchors and property checks across every module."""
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from config.settings import get_settings
from models.charfn_models import DiagonalInnerFunction
from models.circle_set_models import CantorSet, PointSet
from models.inner_models import InnerFunction
from models.measure_models import AtomicMeasure, SelfSimilarMeasure
from models.run_models import DEFAULT_POLICY, CheckRecord, NumericPolicy, inputs_digest
from services.charfn_service import CharFnService
from services.errors import ToolkitError
from services.hausdorff_service import HausdorffService
from services.inner_service import InnerService
from services.modelspace_service import DEFECT_EXACT_RATIO, DEFECT_TRUNCATED_RATIO, ModelSpaceService

logger = logging.getLogger(__name__)

CheckOutcome = Tuple[Dict[str, Any], str, bool, Dict[str, float]]

ATOM_WEIGHTS = (0.5, 1.0, 2.0)
RADII = tuple(round(0.1 * k, 1) for k in range(1, 10))
BLASCHKE_BATTERY = (
    (0.5,),
    (0.5, -0.5),
    (0.3, 0.6j),
    (0.4, -0.2 + 0.5j, 0.7, -0.6),
)
GAP_ETAS = (0.5, 0.2, 0.1, 0.05, 0.02)
CONTINUITY_STEP = 1e-9
BUILD_TIME_LIMIT = 5.0
NEGPOWER_ATOMS = (0.05,)
DEFECT_ATOMS = (0.5, 1.0)


def _closed_form_min_modulus(policy: NumericPolicy) -> CheckOutcome:
    worst = 0.0
    for weight in ATOM_WEIGHTS:
        theta = InnerFunction.atom(weight)
        for r in RADII:
            computed = InnerService.min_modulus(theta, r, policy).value
            worst = max(worst, abs(computed - math.exp(-weight * (1.0 + r) / (1.0 - r))))
    return {"max_error": worst, "cases": len(ATOM_WEIGHTS) * len(RADII)}, "|m_θ(r) - exp(-s(1+r)/(1-r))| <= 1e-10", \
        worst <= 1e-10, {"abs": 1e-10}


def _crossing_equivalence(policy: NumericPolicy) -> CheckOutcome:
    width = 2.0 * policy.bisection_width
    bracket_failures, monotone_failures = [], []
    for weight in ATOM_WEIGHTS:
        theta = InnerFunction.atom(weight)
        previous = 1.0
        for n in range(1, 31):
            record = InnerService.delta_n(theta, n, policy)

            def gap(r: float) -> float:
                return -weight * (1.0 + r) / (1.0 - r) - n * math.log(r)

            r = record.crossing_radius
            if not gap(r - width) >= 0.0 >= gap(min(r + width, 1.0 - 1e-16)):
                bracket_failures.append((weight, n))
            if not record.delta_n < previous:
                monotone_failures.append((weight, n))
            previous = record.delta_n
    passed = not bracket_failures and not monotone_failures
    values = {"bracket_failures": bracket_failures, "monotone_failures": monotone_failures}
    return values, "m_θ(r*) = r*ⁿ within the bracket; δₙ strictly decreasing", passed, {"bracket": width}


def _gap_measures(policy: NumericPolicy) -> List[Tuple[str, Any]]:
    rng = np.random.default_rng(policy.seed)
    random_atoms = [(float(a), float(w)) for a, w in zip(rng.uniform(0.0, 2.0 * math.pi, 3), rng.uniform(0.2, 2.0, 3))]
    return [
        ("atom", AtomicMeasure(atoms=[(0.0, 1.0)])),
        ("two_atoms", AtomicMeasure(atoms=[(0.0, 0.5), (math.pi, 1.5)])),
        ("random_atoms", AtomicMeasure(atoms=random_atoms)),
        ("cantor", SelfSimilarMeasure.cantor()),
    ]


def _innerest_gap(policy: NumericPolicy) -> CheckOutcome:
    violations, pairs = [], 0
    for label, measure in _gap_measures(policy):
        for eta in GAP_ETAS:
            record = InnerService.innerest_gap(measure, eta, policy)
            pairs += 1
            if not record.holds:
                violations.append({"measure": label, "eta": eta, "lhs": record.lhs, "rhs": record.rhs})
    return {"pairs": pairs, "violations": violations}, "-log m_θ(1-η) >= (π+1)^-2 sup ν(I)/|I|", \
        not violations and pairs >= 20, {"relative": policy.tol}


def _besicovitch_construction(policy: NumericPolicy) -> CheckOutcome:
    started = time.perf_counter()
    failures: List[str] = []
    worst_gap = 0.0
    for circle_set in (CantorSet(), PointSet()):
        h = HausdorffService.besicovitch_build(circle_set, policy.stages)
        t = h.breakpoints
        for n in range(1, h.stages + 1):
            at_breakpoint = HausdorffService.breakpoint_value(h, n)
            # h_eval on both sides of t_n; below t_N the prefix ends, so the last one is one-sided
            right = HausdorffService.h_eval(h, t[n] * (1.0 + CONTINUITY_STEP))
            left = HausdorffService.h_eval(h, t[n] * (1.0 - CONTINUITY_STEP)) if n < h.stages else at_breakpoint
            gap = abs(right - left) / at_breakpoint
            worst_gap = max(worst_gap, gap)
            if gap > 4.0 * CONTINUITY_STEP:
                failures.append(f"{circle_set.name}: h jumps by {gap:.3g} at t_{n}")
            if at_breakpoint > 2.0**-n:
                failures.append(f"{circle_set.name}: h(t_{n}) > 2^-{n}")
            samples = np.geomspace(t[n], t[n - 1], 16)[1:]
            ratios = [HausdorffService.h_eval(h, float(s)) / s for s in samples]
            if min(ratios) < 2.0 ** (n - 1) * (1.0 - 1e-12):
                failures.append(f"{circle_set.name}: h(t)/t < 2^{n - 1} on stage {n}")
            if HausdorffService.premeasure_estimate(h, circle_set, n) > 2.0**-n:
                failures.append(f"{circle_set.name}: premeasure bound fails at stage {n}")
    runtime = time.perf_counter() - started
    if runtime >= BUILD_TIME_LIMIT:
        failures.append(f"construction exceeded {BUILD_TIME_LIMIT:g}s")
    values = {
        "failures": failures,
        "stages": policy.stages,
        "worst_relative_gap": worst_gap,
        "within_time_budget": runtime < BUILD_TIME_LIMIT,
    }
    return values, "h continuous; h(tₙ) <= 2⁻ⁿ; h(t)/t >= 2ⁿ⁻¹; Σ h(|I|) <= 2⁻ⁿ; built in < 5 s", not failures, \
        {"gap": 4.0 * CONTINUITY_STEP, "seconds": BUILD_TIME_LIMIT}


def witness_set(policy: NumericPolicy) -> Tuple[List[int], List[float]]:
    E = CantorSet()
    h = HausdorffService.besicovitch_build(E, policy.stages)
    table = HausdorffService.epsilon_sequence(h, policy.witness_horizon, policy)
    theta = InnerFunction(singular=AtomicMeasure(atoms=[(0.0, 1.0)]))
    report = HausdorffService.liminf_witness(theta, table, E, h, policy.witness_horizon, policy)
    return report.witnesses, table.epsilons


def _epsilon_pipeline(policy: NumericPolicy) -> CheckOutcome:
    witnesses, epsilons = witness_set(policy)
    doubled, _ = witness_set(policy.doubled())
    drift = sorted(set(witnesses) ^ set(doubled))
    values = {
        "terms": len(epsilons),
        "witnesses": witnesses,
        "doubled_witnesses": doubled,
        "drift": drift,
    }
    passed = (
        len(epsilons) >= 10
        and all(0.0 < epsilon < 1.0 for epsilon in epsilons)
        and bool(witnesses)
        and len(drift) <= 1
    )
    return values, "εₙ in (0,1); some n <= N has δₙ < εₙ²; witnesses stable under doubling", passed, {}


def _negpower_bounds(policy: NumericPolicy) -> CheckOutcome:
    n_values = list(range(1, 21))
    violations, fitted, exact_error = [], [], 0.0
    for zeros in BLASCHKE_BATTERY:
        theta = InnerFunction.from_zeros(zeros)
        for report in ModelSpaceService.negpower_table(theta, n_values, [len(zeros)], policy):
            if report.norm_estimate < report.lower - 1e-6:
                violations.append({"zeros": str(zeros), "n": report.n})
            fitted.append(report.fitted_constant)
            if len(zeros) == 1:
                expected = abs(zeros[0]) ** -report.n
                exact_error = max(exact_error, abs(report.norm_estimate - expected) / expected)
    unstabilized, ranks = [], {}
    for weight in NEGPOWER_ATOMS:
        theta = InnerFunction.atom(weight)
        for report in ModelSpaceService.negpower_table(theta, n_values, policy.m_schedule, policy):
            fitted.append(report.fitted_constant)
            ranks[str(weight)] = report.rank
            # an unstabilized n cannot be asserted, so it counts against the check
            if not report.stabilized:
                unstabilized.append({"atom": weight, "n": report.n})
            elif report.norm_estimate < report.lower - 1e-6:
                violations.append({"atom": weight, "n": report.n})
    values = {
        "violations": violations,
        "single_zero_relative_error": exact_error,
        "max_fitted_constant": max(fitted),
        "unstabilized": unstabilized,
        "atomic_ranks": ranks,
    }
    passed = not violations and not unstabilized and exact_error <= 1e-8 and math.isfinite(max(fitted))
    return values, "‖S_θ⁻ⁿ‖ >= ½(1/δₙ - 1) - 1e-6 with every atomic n stabilized", passed, \
        {"lower": 1e-6, "exact": 1e-8, "stabilization": policy.stabilization}


def _defect_rank(policy: NumericPolicy) -> CheckOutcome:
    exact_ratios, atomic_ratios, ranks = {}, {}, {}
    for zeros in BLASCHKE_BATTERY:
        trunc = ModelSpaceService.build_truncation(InnerFunction.from_zeros(zeros), len(zeros), policy=policy)
        exact_ratios[str(zeros)] = ModelSpaceService.defect_rank_check(trunc).ratio
    for weight in DEFECT_ATOMS:
        trunc = ModelSpaceService.build_truncation(InnerFunction.atom(weight), 64, policy=policy)
        spectrum = ModelSpaceService.defect_rank_check(trunc)
        atomic_ratios[str(weight)] = spectrum.ratio
        ranks[str(weight)] = spectrum.rank
    passed = max(exact_ratios.values()) < DEFECT_EXACT_RATIO and max(atomic_ratios.values()) < DEFECT_TRUNCATED_RATIO
    values = {"exact_models": exact_ratios, "atomic": atomic_ratios, "atomic_ranks": ranks}
    return values, "s₂/s₁ of I - AᴴA < 1e-10 on complete models, < 1e-2 at M = 64", passed, \
        {"exact": DEFECT_EXACT_RATIO, "atomic": DEFECT_TRUNCATED_RATIO}


def _sarason_norm(policy: NumericPolicy) -> CheckOutcome:
    theta = InnerFunction.from_zeros([0.5])
    of_theta = ModelSpaceService.sarason_norm(theta, "theta", policy.sarason_k, policy).norm
    of_one = ModelSpaceService.sarason_norm(theta, [1.0], policy.sarason_k, policy).norm
    of_z = ModelSpaceService.sarason_norm(theta, [0.0, 1.0], policy.sarason_k, policy).norm
    passed = of_theta < 1e-8 and abs(of_one - 1.0) <= 1e-10 and abs(of_z - 0.5) <= 1e-6
    values = {"theta": of_theta, "one": of_one, "z": of_z}
    return values, "‖θ(S_θ)‖ = 0, ‖1(S_θ)‖ = 1, ‖z(S_θ)‖ = |a|", passed, {"theta": 1e-8, "one": 1e-10, "z": 1e-6}


def _characteristic_function(policy: NumericPolicy) -> CheckOutcome:
    collapse = 0.0
    points = 0.9 * np.exp(1j * np.linspace(0.0, 2.0 * math.pi, 17))
    for a in (0.5, 0.3 + 0.4j, -0.7j):
        C = CharFnService.characteristic_function([[a]], policy)
        values = CharFnService.theta_eval_many(C, points)[:, 0, 0]
        expected = (points - a) / (1.0 - np.conj(a) * points)
        collapse = max(collapse, float(np.max(np.abs(values - expected))))
    impure, spectral, zero_residual = [], [], 0.0
    for index, T in enumerate(CharFnService.random_contractions(policy.seed, policy.battery_size)):
        C = CharFnService.characteristic_function(T, policy)
        for grid_policy in (policy, policy.doubled()):
            report = CharFnService.validate_model(C, grid_policy)
            if not report.purely_contractive:
                impure.append(index)
            if not report.spectrum_consistent:
                spectral.append(index)
            zero_residual = max(zero_residual, report.theta_at_zero_residual)
    passed = collapse <= 1e-12 and not impure and not spectral and zero_residual <= 1e-12
    values = {
        "scalar_collapse_error": collapse,
        "theta_at_zero_residual": zero_residual,
        "impure": sorted(set(impure)),
        "det_nonzero_at_eigenvalue": sorted(set(spectral)),
    }
    return values, "Θ_[a] Möbius; Θ_T(0) = -T; σ_max(Θ_T) < 1; det Θ_T(λᵢ) = 0", passed, {"collapse": 1e-12, "det": 1e-6}


def _operator_estimate(policy: NumericPolicy) -> CheckOutcome:
    anchor = CharFnService.characteristic_function(np.diag([0.3, 0.5 + 0.1j]), policy)
    anchor_estimate = CharFnService.opestimate_check(anchor, 5, policy)
    violations = []
    n_values = list(range(1, 11))
    for index, T in enumerate(CharFnService.random_contractions(policy.seed + 1, policy.battery_size)):
        C = CharFnService.characteristic_function(T, policy)
        if not C.contraction.invertible:
            continue
        for decay in CharFnService.delta_n_op_many(C, n_values, policy):
            estimate = CharFnService.opestimate_check(C, decay.n, policy, decay)
            if not estimate.holds:
                violations.append({"matrix": index, "n": decay.n})
    passed = (
        not violations
        and abs(anchor_estimate.norm_inverse_power - 0.3**-5) <= 1e-8 * 0.3**-5
        and anchor_estimate.lower >= 205.26
    )
    values = {
        "violations": violations,
        "anchor_norm": anchor_estimate.norm_inverse_power,
        "anchor_lower": anchor_estimate.lower,
    }
    return values, "‖T⁻ⁿ‖ >= ½(1/δₙ(Θ_T) - 1)", passed, {"relative": policy.tol}


def _det_reduction(policy: NumericPolicy) -> CheckOutcome:
    theta_1 = InnerFunction.atom(1.0, 0.0)
    theta_2 = InnerFunction.atom(1.0, math.pi)
    theta_3 = InnerFunction.atom(0.5, math.pi / 2.0)
    cases = {
        "pair": DiagonalInnerFunction(entries=[theta_1, theta_2]),
        "triple": DiagonalInnerFunction(entries=[theta_1, theta_2, theta_3]),
        "repeated": DiagonalInnerFunction(entries=[theta_1, theta_1]),
    }
    violations, equality_gap = [], 0.0
    for label, diagonal in cases.items():
        for n in range(1, 21):
            reduction = CharFnService.det_reduction(diagonal, n, policy)
            if not reduction.delta_theta <= reduction.delta_det + 1e-8:
                violations.append({"case": label, "n": n})
            if label == "repeated":
                equality_gap = max(equality_gap, abs(reduction.delta_theta - reduction.delta_det))
    values = {"violations": violations, "repeated_gap": equality_gap}
    return values, "δₙ(Θ) <= δₙ(|det Θ|^{1/N}) + 1e-8", not violations and equality_gap <= 1e-8, {"abs": 1e-8}


def _langer_split(policy: NumericPolicy) -> CheckOutcome:
    battery = CharFnService.random_contractions(policy.seed + 2, 20, planted_unitary=True)
    battery += CharFnService.random_contractions(policy.seed + 3, 20)
    anchor = CharFnService.langer_split(np.diag([np.exp(1j * math.pi / 4.0), 0.5]), policy=policy)
    failures = [] if anchor.unitary_dimension == 1 else ["anchor"]
    block, isometry = anchor.block_residual, anchor.isometry_residual
    for index, T in enumerate(battery):
        split = CharFnService.langer_split(T, policy=policy)
        block = max(block, split.block_residual)
        isometry = max(isometry, split.isometry_residual)
        if split.block_residual >= 1e-10 or split.isometry_residual >= 1e-8:
            failures.append(f"residual {index}")
        if split.cnu_defect_rank > split.defect_rank or not split.idempotent:
            failures.append(f"structure {index}")
        if split.spectrum_included is False or split.negpower_dominated is False:
            failures.append(f"cnu part {index}")
    values = {"failures": failures, "max_block_residual": block, "max_isometry_residual": isometry}
    return values, "T-reducing split, unitary T|H', cnu T|H'' with smaller defect", not failures, \
        {"block": 1e-10, "isometry": 1e-8}


CHECKS: Dict[str, Tuple[str, Callable[[NumericPolicy], CheckOutcome]]] = {
    "01_closed_form_min_modulus": ("inner", _closed_form_min_modulus),
    "02_crossing_equivalence": ("inner", _crossing_equivalence),
    "03_innerest_gap": ("inner", _innerest_gap),
    "04_besicovitch_construction": ("hausdorff", _besicovitch_construction),
    "05_epsilon_pipeline": ("hausdorff", _epsilon_pipeline),
    "06_negpower_bounds": ("modelspace", _negpower_bounds),
    "07_defect_rank": ("modelspace", _defect_rank),
    "08_sarason_norm": ("modelspace", _sarason_norm),
    "09_characteristic_function": ("charfn", _characteristic_function),
    "10_operator_estimate": ("charfn", _operator_estimate),
    "11_det_reduction": ("charfn", _det_reduction),
    "12_langer_split": ("charfn", _langer_split),
}

SUITES = ("all", "inner", "hausdorff", "modelspace", "charfn")


class VerifyService:

    @staticmethod
    def select(suites: Iterable[str]) -> List[str]:
        suites = set(suites) or {"all"}
        unknown = suites - set(SUITES) - set(CHECKS)
        if unknown:
            raise ToolkitError(f"unknown suite(s) {sorted(unknown)}; choose from {list(SUITES)}", "verify")
        return [
            name for name, (suite, _) in CHECKS.items()
            if "all" in suites or suite in suites or name in suites
        ]

    @staticmethod
    def run_check(name: str, policy: NumericPolicy = DEFAULT_POLICY) -> CheckRecord:
        """Run one check; toolkit errors become failing records"""
        _, check = CHECKS[name]
        digest = inputs_digest({"check": name, "policy": policy.model_dump()})
        started = time.perf_counter()
        try:
            values, inequality, passed, tolerances = check(policy)
            error = None
        except ToolkitError as exc:
            logger.warning("check %s raised: %s", name, exc)
            values, inequality, passed, tolerances, error = {}, "", False, {}, str(exc)
        runtime = time.perf_counter() - started
        logger.info("check %s %s in %.2fs", name, "passed" if passed else "FAILED", runtime)
        return CheckRecord(
            name=name,
            inputs_digest=digest,
            values=values,
            inequality=inequality,
            passed=passed,
            tolerances=tolerances,
            runtime_seconds=runtime,
            error=error,
        )

    @staticmethod
    def run_suite(suites: Iterable[str] = ("all",), policy: NumericPolicy = DEFAULT_POLICY,
                  workers: Optional[int] = None) -> List[CheckRecord]:
        names = VerifyService.select(suites)
        workers = get_settings().worker_count(workers)
        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(VerifyService.run_check, name, policy) for name in names]
            records = [future.result() for future in futures]
        return sorted(records, key=lambda record: record.name)
