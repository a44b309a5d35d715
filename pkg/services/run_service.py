"""Dispatch a RunConfig to the module services and assemble the Report."""
import json
import logging
import time
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from models.circle_set_models import circle_set_from_name
from models.inner_models import InnerFunction, inner_from_descriptor
from models.measure_models import measure_from_descriptor
from models.run_models import CheckRecord, Report, RunConfig, inputs_digest
from services.charfn_service import CharFnService
from services.errors import DescriptorError, ToolkitError
from services.hausdorff_service import HausdorffService
from services.inner_service import InnerService
from services.modelspace_service import DEFECT_EXACT_RATIO, DEFECT_TRUNCATED_RATIO, ModelSpaceService, model_size
from services.verify_service import VerifyService
from utils.io_utils import matrix_from_nested

logger = logging.getLogger(__name__)

Tables = Dict[str, pd.DataFrame]
CHARFN_CHECKS = ("defects", "model", "delta", "bounds", "langer")
DEFAULT_N = list(range(1, 11))


class _Recorder:
    """Collects CheckRecords for one run"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.records: List[CheckRecord] = []
        self.started = time.perf_counter()

    def add(self, name: str, values: Dict[str, Any], inequality: str, passed: bool,
            tolerances: Optional[Dict[str, float]] = None, error: Optional[str] = None) -> None:
        self.records.append(
            CheckRecord(
                name=name,
                inputs_digest=inputs_digest({"config": self.config.digest(), "check": name}),
                values=values,
                inequality=inequality,
                passed=bool(passed),
                tolerances=tolerances or {},
                runtime_seconds=time.perf_counter() - self.started,
                error=error,
            )
        )


def _theta(config: RunConfig) -> InnerFunction:
    if config.inner is not None:
        return inner_from_descriptor(config.inner, "inner")
    if config.measure is not None:
        return InnerFunction(singular=measure_from_descriptor(config.measure, "measure"))
    raise DescriptorError("an --inner or --measure descriptor is required", "inner")


def _split_complex(values, prefix: str) -> Dict[str, np.ndarray]:
    values = np.asarray(values, dtype=complex)
    return {f"{prefix}_re": values.real, f"{prefix}_im": values.imag}


def _matrix_table(matrix: np.ndarray) -> pd.DataFrame:
    rows, cols = np.indices(matrix.shape)
    return pd.DataFrame(
        {"row": rows.ravel(), "col": cols.ravel(), "re": matrix.real.ravel(), "im": matrix.imag.ravel()}
    )


class RunService:

    @staticmethod
    def _eval(config: RunConfig, recorder: _Recorder) -> Tables:
        theta = _theta(config)
        if not config.points:
            raise DescriptorError("at least one evaluation point is required", "--z")
        z = np.asarray(config.points, dtype=complex)
        values = InnerService.evaluate_many(theta, z, config.policy)
        frame = pd.DataFrame({**_split_complex(z, "z"), **_split_complex(values, "theta"), "modulus": np.abs(values)})
        inside = np.abs(z) < 1.0
        tol = config.policy.tol
        passed = bool(np.all(np.abs(values[inside]) <= 1.0 + tol) and np.all(np.abs(values[~inside]) >= 1.0 - tol))
        recorder.add("eval_modulus", {"points": len(z)}, "|θ| <= 1 inside, |θ| >= 1 outside", passed, {"abs": tol})
        return {"eval": frame}

    @staticmethod
    def _mtheta(config: RunConfig, recorder: _Recorder) -> Tables:
        theta = _theta(config)
        radii = config.radii or [round(0.1 * k, 1) for k in range(1, 10)]
        rows = [InnerService.min_modulus(theta, r, config.policy).model_dump() for r in radii]
        frame = pd.DataFrame(rows, columns=["r", "value", "log_value", "argmin_angle", "grid_size"])
        passed = bool(((frame["value"] >= 0.0) & (frame["value"] <= 1.0 + config.policy.tol)).all())
        recorder.add("mtheta_range", {"radii": len(radii)}, "0 <= m_θ(r) <= 1", passed)
        return {"mtheta": frame}

    @staticmethod
    def _deltan(config: RunConfig, recorder: _Recorder) -> Tables:
        theta = _theta(config)
        n_values = config.n_values or DEFAULT_N
        records = [InnerService.delta_n(theta, n, config.policy) for n in n_values]
        frame = pd.DataFrame(
            {
                "n": [record.n for record in records],
                "delta_n": [record.delta_n for record in records],
                "log_delta_n": [record.log_delta_n for record in records],
                "crossing_radius": [record.crossing_radius for record in records],
                "bracket_width": [record.bracket_width for record in records],
                "method": [record.method for record in records],
            }
        )
        ordered = frame.sort_values("n")["delta_n"].to_numpy()
        monotone = bool(np.all(np.diff(ordered) <= config.policy.tol))
        recorder.add("delta_monotone", {"n_values": len(n_values)}, "δₙ₊₁ <= δₙ", monotone, {"abs": config.policy.tol})
        if "exterior" in config.checks and theta.is_singular:
            exterior = [InnerService.delta_n_exterior(theta, n, config.policy) for n in frame["n"]]
            frame["delta_exterior"] = exterior
            relative = np.abs(frame["delta_exterior"] - frame["delta_n"]) / frame["delta_n"]
            recorder.add(
                "delta_exterior_agreement",
                {"max_relative": float(relative.max())},
                "δₙ from the exterior sup matches the interior infimum",
                bool(relative.max() <= 1e-6),
                {"relative": 1e-6},
            )
        return {"deltan": frame}

    @staticmethod
    def _hausdorff(config: RunConfig, recorder: _Recorder) -> Tables:
        circle_set = circle_set_from_name(config.set_name or "cantor")
        h = HausdorffService.besicovitch_build(circle_set, config.policy.stages)
        rows = []
        for n in range(1, h.stages + 1):
            cover = h.stage_covers[n - 1]
            rows.append(
                {
                    "n": n,
                    "t_n": h.breakpoints[n],
                    "generation": h.stage_generations[n - 1],
                    "h_t_n": HausdorffService.breakpoint_value(h, n),
                    "cover_length": cover.total_length,
                    "cover_budget": 4.0**-n,
                    "premeasure": HausdorffService.premeasure_estimate(h, circle_set, n),
                    "premeasure_bound": 2.0**-n,
                }
            )
        frame = pd.DataFrame(rows)
        recorder.add(
            "premeasure_bound",
            {"set": circle_set.name, "stages": h.stages},
            "Σ h(|I|) <= 2⁻ⁿ",
            bool((frame["premeasure"] <= frame["premeasure_bound"]).all()),
        )
        recorder.add(
            "h_at_breakpoints", {"set": circle_set.name}, "h(tₙ) <= 2⁻ⁿ",
            bool((frame["h_t_n"] <= frame["premeasure_bound"]).all()),
        )
        return {"hausdorff": frame}

    @staticmethod
    def _epsilon(config: RunConfig, recorder: _Recorder) -> Tables:
        circle_set = circle_set_from_name(config.set_name or "cantor")
        h = HausdorffService.besicovitch_build(circle_set, config.policy.stages)
        horizon = max(config.n_values) if config.n_values else config.policy.witness_horizon
        table = HausdorffService.epsilon_sequence(h, horizon, config.policy)
        frame = pd.DataFrame([row.model_dump() for row in table.rows])
        recorder.add(
            "epsilon_identity",
            {"max_residual": float(frame["identity_residual"].max())},
            "log εₙ = -(n/(2(n+1))) h(t★)/(t★(π+1)²)",
            bool(frame["identity_residual"].max() <= 1e-8),
            {"relative": 1e-8},
        )
        recorder.add(
            "epsilon_range", {"terms": len(frame)}, "0 < εₙ < 1",
            bool(((frame["epsilon"] > 0.0) & (frame["epsilon"] < 1.0)).all()),
        )
        if config.inner is not None or config.measure is not None:
            report = HausdorffService.liminf_witness(_theta(config), table, circle_set, h, horizon, config.policy)
            witness = pd.DataFrame(
                [record.model_dump(exclude={"window"}) for record in report.records]
            ).drop(columns=["n"])
            frame = pd.concat([frame.iloc[: len(witness)].reset_index(drop=True), witness], axis=1)
            recorder.add(
                "witness_found", {"witnesses": report.witnesses}, "some n has δₙ(θ) < εₙ²", bool(report.witnesses)
            )
        return {"epsilon": frame}

    @staticmethod
    def _modelspace(config: RunConfig, recorder: _Recorder) -> Tables:
        theta = _theta(config)
        action = config.action or "negpowers"
        policy = config.policy
        if action == "negpowers":
            reports = ModelSpaceService.negpower_table(theta, config.n_values or DEFAULT_N, policy.m_schedule, policy)
            rows = []
            for report in reports:
                for M, norm in report.trace:
                    rows.append(
                        {
                            "n": report.n,
                            "M": M,
                            "norm": norm,
                            "lower": report.lower,
                            "upper_shape": report.upper_shape,
                            "fitted_constant": norm / report.upper_shape,
                            "stabilized": report.stabilized,
                        }
                    )
            violations = [r.n for r in reports if r.stabilized and r.norm_estimate < r.lower - 1e-6]
            unstabilized = [r.n for r in reports if not r.stabilized]
            recorder.add(
                "negpower_lower_bound",
                {"violations": violations, "unstabilized": unstabilized},
                "‖S_θ⁻ⁿ‖ >= ½(1/δₙ - 1) - 1e-6, every n stabilized within the M schedule",
                not violations and not unstabilized,
                {"abs": 1e-6, "stabilization": policy.stabilization},
            )
            return {"negpowers": pd.DataFrame(rows)}
        if action == "defect":
            rows = []
            ratios, exact = {}, True
            for M in policy.m_schedule:
                trunc = ModelSpaceService.build_truncation(theta, model_size(theta, M), policy=policy)
                spectrum = ModelSpaceService.defect_rank_check(trunc)
                ratios[trunc.M] = spectrum.ratio
                exact = exact and trunc.complete
                for index, value in enumerate(spectrum.singular_values, start=1):
                    rows.append({"M": trunc.M, "rank": trunc.rank, "index": index, "singular_value": value})
            threshold = DEFECT_EXACT_RATIO if exact else DEFECT_TRUNCATED_RATIO
            recorder.add(
                "defect_rank_one", {"ratios": ratios}, f"s₂/s₁ of I - AᴴA below {threshold:g}",
                max(ratios.values()) < threshold, {"ratio": threshold},
            )
            return {"defect": pd.DataFrame(rows)}
        if action == "export":
            trunc = ModelSpaceService.build_truncation(theta, model_size(theta, policy.m_schedule[0]), policy=policy)
            norm = float(np.linalg.norm(trunc.shift_matrix, 2))
            tolerance = 1e-10 + trunc.roundoff_scale
            recorder.add(
                "shift_contraction",
                {"norm": norm, "rank": trunc.rank, "min_pivot": trunc.min_pivot,
                 "discarded_residual": trunc.discarded_residual,
                 "orthogonality_residue": trunc.orthogonality_residue},
                "‖A‖ <= 1 + 1e-10 + round-off of the kept Gram block",
                norm <= 1.0 + tolerance,
                {"abs": tolerance},
            )
            matrices = ModelSpaceService.export_matrices(trunc)
            return {"shift": _matrix_table(matrices["shift"]), "gram": _matrix_table(matrices["gram"])}
        raise DescriptorError(f"unknown modelspace action {action!r}", "action")

    @staticmethod
    def _sarason(config: RunConfig, recorder: _Recorder) -> Tables:
        theta = _theta(config)
        phi = "theta" if config.phi is None else config.phi
        result = ModelSpaceService.sarason_norm(theta, phi, config.policy.sarason_k, config.policy)
        frame = pd.DataFrame(result.trace, columns=["K", "norm"])
        norms = frame["norm"].to_numpy()
        recorder.add(
            "sarason_monotone", {"norm": result.norm}, "‖Γ_K‖ nondecreasing in K",
            bool(np.all(np.diff(norms) >= -1e-12)),
        )
        if result.sup_norm_phi is not None:
            recorder.add(
                "sarason_contractive",
                {"norm": result.norm, "sup_norm_phi": result.sup_norm_phi},
                "‖φ(S_θ)‖ <= ‖φ‖_∞",
                result.norm <= result.sup_norm_phi + 1e-10,
            )
        return {"sarason": frame}

    @staticmethod
    def _charfn(config: RunConfig, recorder: _Recorder) -> Tables:
        if config.matrix is None:
            raise DescriptorError("a --matrix CSV is required", "matrix")
        policy = config.policy
        C = CharFnService.characteristic_function(matrix_from_nested(config.matrix), policy)
        explicit = "all" not in config.checks
        checks = [check for check in CHARFN_CHECKS if not explicit or check in config.checks]
        n_values = config.n_values or list(range(1, 6))
        tables: Tables = {}

        def skip(name: str, reason: str) -> None:
            if explicit:
                raise ToolkitError(reason, name)
            recorder.add(name, {"skipped": reason}, "not applicable", True)

        if "defects" in checks:
            defects = C.defects
            worst = max(defects.square_residual, defects.square_residual_star, defects.intertwining_residual)
            tables["defects"] = pd.DataFrame(
                [{"rank": defects.rank, "rank_star": defects.rank_star,
                  "square_residual": defects.square_residual,
                  "square_residual_star": defects.square_residual_star,
                  "intertwining_residual": defects.intertwining_residual}]
            )
            recorder.add(
                "defects", {"rank": defects.rank, "rank_star": defects.rank_star, "max_residual": worst},
                "D² = I - T*T, T D_T = D_T* T, equal ranks",
                worst <= 1e-10 and defects.rank == defects.rank_star, {"abs": 1e-10},
            )
        unitary = C.defects.rank == 0
        if "model" in checks:
            if unitary or not C.contraction.strict_spectral:
                skip("model", "validation needs a non-unitary T with spectral radius < 1")
            else:
                report = CharFnService.validate_model(C, policy)
                tables["model"] = pd.DataFrame([report.model_dump()])
                recorder.add("model", report.model_dump(), "det Θ_T(λᵢ) = 0 and σ_max(Θ_T) < 1", report.passed)
        decays = []
        if "delta" in checks or "bounds" in checks:
            if unitary:
                skip("delta", "T is unitary")
            else:
                decays = CharFnService.delta_n_op_many(C, n_values, policy)
                tables["delta"] = pd.DataFrame([d.model_dump(exclude={"argmin"}) for d in decays])
        if "bounds" in checks and decays:
            if not (C.contraction.invertible and C.contraction.strict_spectral):
                skip("bounds", "the estimate needs an invertible T with spectral radius < 1")
            else:
                estimates = [CharFnService.opestimate_check(C, d.n, policy, d) for d in decays]
                tables["bounds"] = pd.DataFrame([e.model_dump() for e in estimates])
                recorder.add(
                    "bounds", {"failing_n": [e.n for e in estimates if not e.holds]},
                    "‖T⁻ⁿ‖ >= ½(1/δₙ(Θ_T) - 1)", all(e.holds for e in estimates),
                )
        if "langer" in checks:
            split = CharFnService.langer_split(C.contraction, n_values, policy)
            summary = split.model_dump(exclude={"unitary_basis", "cnu_basis"})
            summary.update(unitary_dimension=split.unitary_dimension, cnu_dimension=split.cnu_dimension)
            tables["langer"] = pd.DataFrame([summary])
            recorder.add(
                "langer", summary, "T-reducing unitary ⊕ cnu split",
                split.block_residual < 1e-10 and split.isometry_residual < 1e-8
                and split.idempotent and split.cnu_defect_rank <= split.defect_rank,
                {"block": 1e-10, "isometry": 1e-8},
            )
        return tables

    @staticmethod
    def _verify(config: RunConfig, recorder: _Recorder) -> Tables:
        recorder.records.extend(VerifyService.run_suite(config.suite, config.policy))
        frame = pd.DataFrame(
            [{"name": r.name, "passed": r.passed, "runtime_seconds": r.runtime_seconds} for r in recorder.records]
        )
        return {"verify": frame}

    @staticmethod
    def run(config: RunConfig) -> Tuple[Report, Tables]:
        """Run one command; ToolkitErrors propagate with their operation name"""
        handlers: Dict[str, Callable[[RunConfig, _Recorder], Tables]] = {
            "eval": RunService._eval,
            "mtheta": RunService._mtheta,
            "deltan": RunService._deltan,
            "hausdorff": RunService._hausdorff,
            "epsilon": RunService._epsilon,
            "modelspace": RunService._modelspace,
            "sarason": RunService._sarason,
            "charfn": RunService._charfn,
            "verify": RunService._verify,
        }
        recorder = _Recorder(config)
        logger.info("running %s (digest %s)", config.command, config.digest())
        tables = handlers[config.command](config, recorder)
        report = Report(
            config=config,
            seed=config.policy.seed,
            digest=config.digest(),
            records=recorder.records,
            tables={name: frame.to_dict(orient="records") for name, frame in tables.items()},
        )
        if not report.passed:
            logger.warning("%d check(s) failed: %s", len(report.failures), [r.name for r in report.failures])
        return report, tables

    @staticmethod
    def exit_code(report: Report) -> int:
        return 0 if report.passed else 1

    @staticmethod
    def replay(report: Report) -> Tuple[Report, List[str]]:
        """Re-run the embedded config; returns the new report and the fields that differ

        Both sides are compared in their JSON form, so NaN/null and key types
        match whatever a written report holds.
        """
        fresh, _ = RunService.run(report.config)
        old, new = _comparable(report), _comparable(fresh)
        differences = []
        if old["tables"] != new["tables"]:
            differences.append("tables")
        if old["records"].keys() != new["records"].keys():
            differences.append("records")
        else:
            differences.extend(
                f"records.{name}" for name in old["records"] if old["records"][name] != new["records"][name]
            )
        return fresh, differences


def _comparable(report: Report) -> Dict[str, Any]:
    data = json.loads(report.model_dump_json(include={"tables", "records"}))
    records = {}
    for record in data["records"]:
        record.pop("runtime_seconds", None)
        records[record["name"]] = record
    return {"tables": data["tables"], "records": records}
