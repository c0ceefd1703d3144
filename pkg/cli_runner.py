"""
Командный раннер Bernstein Lab: углы Жордана, w-функция, сертификаты лемм,
проверки погружений. Каждый запуск выполняет одну команду и пишет отчёт.

Коды выхода: 0 (все контракты выполнены), 1 (контракт нарушен),
2 (ошибка конфигурации).
"""
import argparse
import asyncio
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy
import scipy.linalg

from config import (
    CERT_TOL, CLUSTER_TOL, DEFAULT_DENSITY, DEFAULT_SAMPLES, DEFAULT_SEED, EPS0_MAX_R,
    FD_STEP, LOG_LEVEL, REPORT_DB_PATH, REPORT_DIR, REPORT_SCHEMA_VERSION,
    TOOLKIT_VERSION, W_POSITIVE_TOL, WORKERS,
)
from curvature_algebra import (
    EqualityCase, SecondFundamentalFormTable, THETA0, austere_check, case_b_table,
    certify_II, classify_equality_case, estimate_eps0, iii_certificate, iii_chunk,
    laplacian_v_quadratic, merge_minima, prop35_certificate, prop35_chunk,
    sample_chunks, scan_region_f,
)
from exceptions import ConfigError, ContractFailure, DegenerateAngle, GeometryError
from jordan_angles import (
    aligned_bases, anti_involution, anti_involution_residuals, flat_angles,
    jordan_decomposition, symmetry_report,
)
from lab_objects import REGISTRY, LabObject, get_object
from pluecker_w import orientation_flip, v_value, w_inner
from report_store import ReportStore
from report_writer import ReportWriter, build_report, payload_digest
from subspace_core import Subspace, orthonormalize, random_subspace
from submanifold_lab import (
    bernstein_probe, codazzi_residual, conelike_check, coordinate_q0, gauss_w,
    laplacian_v_bridge, mean_curvature_residual, patch_at, slope_delta,
    tangent_angle_report,
)
from utils.decorators import (
    EXIT_CONTRACT_FAILURE, EXIT_PASS, get_usage_runtime, get_usage_stats, handle_command_errors,
    track_usage,
)

logger = logging.getLogger(__name__)

COMMANDS = (
    "angles", "wfun", "certify-II", "certify-III", "scan-f", "estimate-eps0",
    "certify-prop35", "check-immersion", "bridge-check",
)
SCAN_BOUND = 5.0 / 6.0 + 1e-6
MINIMALITY_BUDGET = 1e-5
CODAZZI_BUDGET = 1e-2
CONELIKE_BUDGET = 1e-9
NEGATIVE_CONTROL_MIN = 1e-3
BRIDGE_BUDGET = 1e-3
BRIDGE_STEP = 1e-3
# ошибка второго порядка: удвоение шага увеличивает разность примерно в 4 раза
BRIDGE_MIN_RATIO = 3.0
BRIDGE_SIGNAL_MIN = 1e-3
ANGLE_ORACLE_TOL = 1e-9
LEMMA_TOL = 1e-9
EXPECTED_W_TOL = 1e-6
RANDOM_PAIR_DIMS = (9, 4)


# === CONFIG ===

@dataclass
class RunConfig:
    command: str
    density: int = DEFAULT_DENSITY
    samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    tol: float = CLUSTER_TOL
    fd_step: Optional[float] = None
    cert_tol: float = CERT_TOL
    object: Optional[str] = None
    q0: str = "coordinate"
    inline: Optional[str] = None
    r: Optional[int] = None
    out: Optional[str] = None
    format: str = "json"
    archive: bool = False
    workers: int = WORKERS

    def validate(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command '{self.command}', expected one of {COMMANDS}")
        if self.density < 10:
            raise ConfigError(f"density must be >= 10, got {self.density}")
        if self.samples < 1:
            raise ConfigError(f"samples must be >= 1, got {self.samples}")
        for name in ("tol", "cert_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.fd_step is not None and not self.fd_step > 0:
            raise ConfigError("fd_step must be positive")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format '{self.format}'")
        if self.q0 not in ("coordinate", "inline"):
            raise ConfigError(f"q0 must be 'coordinate' or 'inline', got '{self.q0}'")
        if self.q0 == "inline" and not self.inline:
            raise ConfigError("--q0 inline needs --inline <file>")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.r is not None and not 1 <= self.r <= EPS0_MAX_R:
            raise ConfigError(f"r must be in [1, {EPS0_MAX_R}]")
        if self.command in ("check-immersion", "bridge-check"):
            if self.object not in REGISTRY:
                raise ConfigError(f"--object must be one of {sorted(REGISTRY)}")

    def numerical_config(self) -> Dict[str, Any]:
        """Параметры, от которых зависит численный результат."""
        data = asdict(self)
        for key in ("out", "format", "archive", "workers"):
            data.pop(key)
        return data


def parse_inline_frames(path: Path) -> List[np.ndarray]:
    """Строки чисел через пробел; реперы разделены пустой строкой."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read inline file {path}: {e}") from None
    blocks, rows = [], []
    for line in text.splitlines():
        if not line.strip():
            if rows:
                blocks.append(rows)
                rows = []
            continue
        try:
            rows.append([float(tok) for tok in line.split()])
        except ValueError:
            raise ConfigError(f"non-numeric row in {path}: '{line.strip()}'") from None
    if rows:
        blocks.append(rows)
    frames = []
    for block in blocks:
        if len({len(row) for row in block}) != 1:
            raise ConfigError(f"rows of unequal length in {path}")
        frames.append(np.array(block))
    if not frames:
        raise ConfigError(f"no frames in {path}")
    return frames


def _record(name: str, value: Any, tolerance: Optional[float] = None, passed: bool = True, **extra) -> Dict:
    record = {"name": name, "value": value, "tolerance": tolerance, "pass": bool(passed)}
    record.update(extra)
    return record


# === APP ===

class RunnerApp:
    """Выполнение одной команды и запись отчёта."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.writer = ReportWriter(REPORT_DIR)
        self.q0_reversed = False

    # --- helpers ---

    def _step(self, default: float = FD_STEP) -> float:
        return self.config.fd_step if self.config.fd_step is not None else default

    async def _fan_out(self, chunk_fn: Callable, chunks: Sequence[Tuple[int, np.random.SeedSequence]]):
        """Куски выборки в потоках; порядок результатов совпадает с порядком кусков."""
        semaphore = asyncio.Semaphore(self.config.workers)

        async def run_chunk(count, seq):
            async with semaphore:
                return await asyncio.to_thread(chunk_fn, count, seq)

        return await asyncio.gather(*(run_chunk(c, s) for c, s in chunks))

    def _subspace_pair(self) -> Tuple[Subspace, Subspace, str]:
        if self.config.inline:
            frames = parse_inline_frames(Path(self.config.inline))
            if len(frames) != 2:
                raise ConfigError(f"expected two frames (P and Q0), got {len(frames)}")
            return orthonormalize(frames[0]), orthonormalize(frames[1]), "inline"
        rng = np.random.default_rng(self.config.seed)
        ambient, m = RANDOM_PAIR_DIMS
        return random_subspace(ambient, m, rng), random_subspace(ambient, m, rng), "random"

    def _q0_for(self, obj: LabObject, x: np.ndarray) -> Subspace:
        if self.config.q0 == "inline":
            frames = parse_inline_frames(Path(self.config.inline))
            q0 = orthonormalize(frames[0])
        else:
            q0 = coordinate_q0(obj.immersion)
        if q0.ambient_dim != obj.immersion.ambient_dim or q0.dim != obj.immersion.codim:
            raise ConfigError(f"Q0 of dim {q0.dim} in R^{q0.ambient_dim} does not fit {obj.name}")
        if gauss_w(patch_at(obj.immersion, x, self._step()), q0) < 0:
            logger.warning(f"⚠️ Q0 orientation reversed so that w > 0 at the base point of {obj.name}")
            self.q0_reversed = True
            q0 = q0.reversed()
        return q0

    # --- commands ---

    @track_usage("angles")
    async def cmd_angles(self) -> Tuple[List[Dict], Dict]:
        P, Q0, source = self._subspace_pair()
        tol = self.config.tol
        decomposition = jordan_decomposition(P, Q0, tol)
        records = [
            _record("cluster", c.theta, multiplicity=c.multiplicity, index=k)
            for k, c in enumerate(decomposition.clusters)
        ]
        oracle = np.sort(scipy.linalg.subspace_angles(P.frame, Q0.frame))
        # лишние углы P при dim P > dim Q0 равны π/2 и отсекаются справа
        ours = np.sort(flat_angles(decomposition))[: len(oracle)]
        deviation = float(np.max(np.abs(ours - oracle), initial=0.0))
        records.append(_record("oracle_deviation", deviation, ANGLE_ORACLE_TOL, deviation <= ANGLE_ORACLE_TOL))

        if P.dim == Q0.dim and P.dim < P.ambient_dim:
            violations = symmetry_report(P, Q0, tol).violations(LEMMA_TOL)
            records.append(_record("symmetry", violations, LEMMA_TOL, not violations))
            for k, cluster in enumerate(decomposition.clusters):
                if decomposition.is_zero_cluster(cluster):
                    continue
                try:
                    phi = anti_involution(P, Q0, k, tol)
                except DegenerateAngle as e:
                    records.append(_record("anti_involution", str(e), index=k))
                    continue
                residuals = anti_involution_residuals(phi, P, Q0)
                worst = max(residuals.values())
                records.append(_record("anti_involution", residuals, LEMMA_TOL, worst <= LEMMA_TOL, index=k))
            w = w_inner(P, Q0).w
            if w > W_POSITIVE_TOL:
                bases = aligned_bases(P, Q0, tol)
                residuals = bases.residuals(Q0)
                records.append(_record("aligned_bases", residuals, LEMMA_TOL,
                                       max(residuals.values()) <= LEMMA_TOL, r=bases.r, exists=True))
            else:
                # при w ≤ 0 согласованных базисов нет, разложение остаётся в отчёте
                records.append(_record("aligned_bases", None, exists=False, w=w))
        extremal = {"source": source, "max_angle": float(np.max(flat_angles(decomposition), initial=0.0))}
        return records, extremal

    @track_usage("wfun")
    async def cmd_wfun(self) -> Tuple[List[Dict], Dict]:
        P, Q0, source = self._subspace_pair()
        value = w_inner(P, Q0)
        flipped = orientation_flip(P, Q0)
        product_gap = abs(abs(value.w) - value.angle_product)
        records = [
            _record("w", value.w, pair_dims=list(value.pair_dims)),
            _record("angle_product", value.angle_product, 1e-10, product_gap <= 1e-10),
            _record("orientation_flip", flipped, 1e-12, abs(value.w + flipped) <= 1e-12),
        ]
        if value.w > 0:
            records.append(_record("v", v_value(P, Q0)))
        return records, {"source": source, "w": value.w}

    @track_usage("certify-II")
    async def cmd_certify_II(self) -> Tuple[List[Dict], Dict]:
        cert = await asyncio.to_thread(certify_II, self.config.density, self.config.samples, self.config.seed)
        return [cert.to_dict()], {"min": cert.extremal_value, "argmin": cert.argext}

    @track_usage("certify-III")
    async def cmd_certify_III(self) -> Tuple[List[Dict], Dict]:
        chunks = sample_chunks(self.config.samples, self.config.seed)
        merged = merge_minima(await self._fan_out(iii_chunk, chunks))
        cert = iii_certificate(merged, self.config.seed)
        return [cert.to_dict()], {"min": cert.extremal_value, "argmin": cert.argext}

    @track_usage("scan-f")
    async def cmd_scan_f(self) -> Tuple[List[Dict], Dict]:
        max_found, point = await asyncio.to_thread(scan_region_f, self.config.density)
        argmax = {"u": point.u, "v": point.v, "w": point.w}
        record = _record("scan_region_f", max_found, SCAN_BOUND, max_found <= SCAN_BOUND,
                         argmax=argmax, uvw=point.u * point.v * point.w)
        return [record], {"max": max_found, "argmax": argmax}

    @track_usage("estimate-eps0")
    async def cmd_estimate_eps0(self) -> Tuple[List[Dict], Dict]:
        ranks = [self.config.r] if self.config.r else list(range(1, EPS0_MAX_R + 1))
        estimates = await asyncio.gather(*(
            asyncio.to_thread(estimate_eps0, r, self.config.density, 1000, self.config.seed) for r in ranks
        ))
        records = [_record("eps0", value, 0.0, value > 0.0, r=r) for r, value in zip(ranks, estimates)]
        return records, {"min": float(min(estimates))}

    @track_usage("certify-prop35")
    async def cmd_certify_prop35(self) -> Tuple[List[Dict], Dict]:
        chunks = sample_chunks(self.config.samples, self.config.seed, 512)
        merged = merge_minima(await self._fan_out(prop35_chunk, chunks))
        cert = prop35_certificate(merged, self.config.seed)
        records = [cert.to_dict()]

        table = case_b_table(5, 3, 0.5)
        value = laplacian_v_quadratic(table)
        records.append(_record("case_b_value", value, self.config.cert_tol, abs(value) <= self.config.cert_tol))
        classification = classify_equality_case(table, 1e-9)
        theta_ok = classification.theta0 is not None and abs(classification.theta0 - THETA0) <= 1e-9
        records.append(_record(
            "case_b_classification", classification.case, 1e-9,
            classification.case is EqualityCase.CASE_B and theta_ok,
            theta0=classification.theta0,
            S=None if classification.S is None else classification.S.tolist(),
        ))
        return records, {"min": cert.extremal_value, "argmin": cert.argext}

    @track_usage("check-immersion")
    async def cmd_check_immersion(self) -> Tuple[List[Dict], Dict]:
        obj = get_object(self.config.object)
        im, x, step = obj.immersion, obj.base_point, self._step()
        q0 = self._q0_for(obj, x)
        patch = patch_at(im, x, step)
        w = gauss_w(patch, q0)
        if obj.expected_w is not None and self.config.q0 == "coordinate":
            deviation = abs(w - obj.expected_w)
            records = [_record("w", w, EXPECTED_W_TOL, deviation <= EXPECTED_W_TOL,
                               expected=obj.expected_w, q0_reversed=self.q0_reversed)]
        else:
            records = [_record("w", w, q0_reversed=self.q0_reversed)]
        if w > 0:
            records.append(_record("v", 1.0 / w))

        residual = mean_curvature_residual(im, x, step)
        if obj.minimal:
            records.append(_record("mean_curvature", residual, MINIMALITY_BUDGET, residual < MINIMALITY_BUDGET))
        else:
            records.append(_record("mean_curvature", residual, MINIMALITY_BUDGET, residual > MINIMALITY_BUDGET,
                                   expected="non-minimal"))

        codazzi = codazzi_residual(im, x, max(step, BRIDGE_STEP))
        records.append(_record("codazzi", codazzi, CODAZZI_BUDGET, codazzi <= CODAZZI_BUDGET))

        if obj.graph is not None:
            delta = slope_delta(obj.graph, x, step)
            product = delta * gauss_w(patch, coordinate_q0(im))
            records.append(_record("slope_delta", delta, 1e-8, abs(product - 1.0) <= 1e-8))

        if im.ray_scale is not None and w > 0:
            variation = conelike_check(im, q0, seed=self.config.seed)
            if obj.cone:
                records.append(_record("conelike_variation", variation, CONELIKE_BUDGET, variation <= CONELIKE_BUDGET))
            else:
                records.append(_record("conelike_variation", variation, NEGATIVE_CONTROL_MIN,
                                       variation > NEGATIVE_CONTROL_MIN, expected="negative control"))

        angles = tangent_angle_report(patch, q0)
        records.append(_record("tangent_angles", angles["max_deviation"], LEMMA_TOL, angles["consistent"]))

        sff = SecondFundamentalFormTable(np.zeros(0), patch.sff)
        austere, simple = austere_check(sff, max(1e-6, 100 * step ** 2))
        records.append(_record("austere", austere, simple=simple))

        if obj.cone and obj.name == "clifford-cone":
            rng = np.random.default_rng(self.config.seed)
            lo, hi = im.box[1:, 0], im.box[1:, 1]
            points = [np.concatenate([[1.0], rng.uniform(lo + 0.1, hi - 0.1)]) for _ in range(16)]
            probes = bernstein_probe(im, points, q0_samples=8, seed=self.config.seed)
            records.append(_record("bernstein_probe", probes,
                                   all_below=all(p["below_threshold"] for p in probes)))
        return records, {"w": w, "mean_curvature": residual}

    @track_usage("bridge-check")
    async def cmd_bridge_check(self) -> Tuple[List[Dict], Dict]:
        obj = get_object(self.config.object)
        step = self._step(BRIDGE_STEP)
        q0 = self._q0_for(obj, obj.base_point)
        records = []
        results = await asyncio.gather(
            asyncio.to_thread(laplacian_v_bridge, obj.immersion, q0, obj.base_point, step),
            asyncio.to_thread(laplacian_v_bridge, obj.immersion, q0, obj.base_point, 2.0 * step),
        )
        for s, result in zip((step, 2.0 * step), results):
            records.append(_record("bridge", result["difference"], BRIDGE_BUDGET,
                                   result["difference"] <= BRIDGE_BUDGET, step=s, **{
                                       k: result[k] for k in ("v", "direct", "quadratic")}))

        fine, coarse = results[0]["difference"], results[1]["difference"]
        ratio = coarse / fine if fine > 0.0 else float("inf")
        # при Δv ≈ 0 разность состоит из шума округления, порядок сходимости не виден
        informative = abs(results[0]["quadratic"]) >= BRIDGE_SIGNAL_MIN
        records.append(_record("step_halving_ratio", ratio, BRIDGE_MIN_RATIO,
                               ratio >= BRIDGE_MIN_RATIO or not informative, informative=informative))
        return records, {"difference": fine, "ratio": ratio, "q0_reversed": self.q0_reversed}

    # --- run ---

    def _handler(self) -> Callable:
        return {
            "angles": self.cmd_angles,
            "wfun": self.cmd_wfun,
            "certify-II": self.cmd_certify_II,
            "certify-III": self.cmd_certify_III,
            "scan-f": self.cmd_scan_f,
            "estimate-eps0": self.cmd_estimate_eps0,
            "certify-prop35": self.cmd_certify_prop35,
            "check-immersion": self.cmd_check_immersion,
            "bridge-check": self.cmd_bridge_check,
        }[self.config.command]

    def versions(self) -> Dict[str, Any]:
        return {
            "toolkit": TOOLKIT_VERSION,
            "report_schema": REPORT_SCHEMA_VERSION,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        }

    async def _archive(self, report: Dict[str, Any], runtime_s: float) -> bool:
        """True, если архив не нашёл расхождений с прошлым прогоном той же конфигурации."""
        config_json = json.dumps(report["config"], sort_keys=True, ensure_ascii=False)
        digest = payload_digest(report)
        async with ReportStore(REPORT_DB_PATH) as store:
            previous = await store.find_previous(report["command"], config_json)
            await store.add_run(report["command"], config_json, digest, report["pass"], runtime_s)
        if previous and previous["payload_sha256"] != digest:
            logger.warning(f"⚠️ Non-deterministic payload: run {previous['id']} had {previous['payload_sha256'][:12]}")
            return False
        return True

    @handle_command_errors
    async def run(self) -> int:
        self.config.validate()
        logger.info(f"▶️ Command: {self.config.command} (seed={self.config.seed})")
        started = time.perf_counter()
        failure: Optional[Dict] = None
        try:
            records, extremal = await self._handler()()
        except GeometryError as e:
            failure = _record("error", str(e), passed=False, error=type(e).__name__)
            records, extremal = [failure], {}
        passed = all(r.get("pass", True) for r in records)
        report = build_report(
            self.config.command, self.config.numerical_config(), self.versions(),
            records, extremal, passed,
        )
        # отчёт воспроизводим побайтно (кроме timestamp); время и статистика только в логе и архиве
        runtime_s = time.perf_counter() - started
        logger.info(
            f"⏱ {self.config.command}: {runtime_s:.3f}s, usage={get_usage_stats()}, "
            f"handler={get_usage_runtime(self.config.command):.3f}s"
        )
        out = self.writer.resolve(Path(self.config.out) if self.config.out else None,
                                  self.config.command, self.config.format)
        await self.writer.write(report, out, self.config.format)

        if self.config.archive and not await self._archive(report, runtime_s):
            raise ContractFailure("payload differs from an archived run with identical config")
        if not passed:
            failing = failure or next(r for r in report["records"] if not r.get("pass", True))
            raise ContractFailure(f"check '{failing['name']}' failed", failing)
        logger.info(f"✅ {self.config.command}: all contracts passed")
        return EXIT_PASS


# === ENTRY POINT ===

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cli_runner", description="Bernstein Lab batch runner")
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--density", type=int, default=DEFAULT_DENSITY)
    parser.add_argument("--samples", type=int, default=DEFAULT_SAMPLES)
    parser.add_argument("--seed", type=int, default=DEFAULT_SEED)
    parser.add_argument("--tol", type=float, default=CLUSTER_TOL)
    parser.add_argument("--fd-step", dest="fd_step", type=float, default=None)
    parser.add_argument("--cert-tol", dest="cert_tol", type=float, default=CERT_TOL)
    parser.add_argument("--object", default=None)
    parser.add_argument("--q0", default="coordinate")
    parser.add_argument("--inline", default=None)
    parser.add_argument("--r", type=int, default=None)
    parser.add_argument("--out", default=None)
    parser.add_argument("--format", default="json")
    parser.add_argument("--archive", action="store_true")
    parser.add_argument("--workers", type=int, default=WORKERS)
    return parser


def setup_logging() -> None:
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        stream=sys.stdout,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = RunConfig(**vars(args))
    return asyncio.run(RunnerApp(config).run())


if __name__ == "__main__":
    setup_logging()
    logger.info("📍 Точка входа")
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("⏹ Прервано пользователем")
        sys.exit(EXIT_CONTRACT_FAILURE)
