"""Command-line batch verifier.

``verify --config run.json`` or ``verify --mode rational --n 3 --seed 7 --trials 20``.
The JSON report goes to ``output_path``; standard output gets one verdict line.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
import zlib
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .suites import MODES, Suite, TrialContext

MODE_NAMES = ("rational", "elliptic", "n2-conditions", "all")


def _parse_complex(value, name):
    if value is None:
        return None
    try:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError
            return complex(float(value[0]), float(value[1]))
        if isinstance(value, str):
            return complex(value.replace(" ", ""))
        return complex(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a complex number, [re, im] or a string like '0.17+0.11j'") from None


@dataclass
class RunConfig:
    mode: str = "all"
    n: int = 3
    seed: int = 0
    trials: int = 3
    tolerances: dict = field(default_factory=dict)
    s_exponents: list | None = None
    tau: complex | None = None
    eta: complex | None = None
    output_path: str = "verify_report.json"
    emit_plots: bool = False

    def __post_init__(self):
        if self.mode not in MODE_NAMES:
            raise ConfigError(f"mode must be one of {', '.join(MODE_NAMES)}")
        for name in ("n", "seed", "trials"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, int):
                raise ConfigError(f"{name} must be an integer")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.mode in ("rational", "n2-conditions", "all") and self.n < 2:
            raise ConfigError("n must be at least 2")
        if self.mode == "elliptic" and self.n < 3:
            raise ConfigError("elliptic mode needs n >= 3")
        if not isinstance(self.tolerances, dict):
            raise ConfigError("tolerances must be a mapping")
        known = {s.name for suites in MODES.values() for s in suites}
        for key, val in self.tolerances.items():
            if key not in known:
                raise ConfigError(f"unknown suite in tolerances: {key}")
            if not isinstance(val, (int, float)) or not val > 0:
                raise ConfigError(f"tolerance for {key} must be a positive number")
        if self.s_exponents is not None:
            s = list(self.s_exponents)
            if len(s) != self.n + 2 or not all(isinstance(x, (int, float)) and math.isfinite(x) for x in s):
                raise ConfigError(f"s_exponents must be {self.n + 2} finite numbers")
            self.s_exponents = [float(x) for x in s]
        self.tau = _parse_complex(self.tau, "tau")
        self.eta = _parse_complex(self.eta, "eta")
        if self.tau is not None and not self.tau.imag > 0:
            raise ConfigError("tau must have positive imaginary part")
        if not isinstance(self.emit_plots, bool):
            raise ConfigError("emit_plots must be true or false")

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
        return cls(**data)

    def echo(self) -> dict:
        out = asdict(self)
        for key in ("tau", "eta"):
            if out[key] is not None:
                out[key] = [out[key].real, out[key].imag]
        return out


def default_config_text() -> str:
    return resources.files("hydropseudo").joinpath("default_config.json").read_text()


def suite_rng(seed: int, name: str) -> np.random.Generator:
    """Independent stream per suite; adding suites never shifts the others."""
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def _histogram(residuals) -> dict:
    hist: dict[str, int] = {}
    for r in residuals:
        if r is None or not math.isfinite(r):
            key = "nonfinite"
        elif r == 0:
            key = "zero"
        else:
            key = f"1e{math.floor(math.log10(r))}"
        hist[key] = hist.get(key, 0) + 1
    return dict(sorted(hist.items()))


def _n_for(mode: str, cfg: RunConfig) -> int:
    return max(cfg.n, 3) if mode == "elliptic" else cfg.n


def run_suite(suite: Suite, mode: str, cfg: RunConfig):
    rng = suite_rng(cfg.seed, suite.name)
    tctx = TrialContext(
        n=_n_for(mode, cfg),
        s=cfg.s_exponents if mode == "rational" else None,
        tau=cfg.tau if cfg.tau is not None else 1j,
        eta=cfg.eta if cfg.eta is not None else 0.17 + 0.11j,
    )
    tol = float(cfg.tolerances.get(suite.name, suite.tolerance))
    start = time.perf_counter()
    residuals, error = [], None
    try:
        for _ in range(cfg.trials):
            residuals.append(float(suite.trial(rng, tctx)))
    except Exception as exc:  # a crashing suite fails alone
        error = f"{type(exc).__name__}: {exc}"
    seconds = time.perf_counter() - start
    finite = [r for r in residuals if math.isfinite(r)]
    record = {
        "name": suite.name,
        "trials": cfg.trials,
        "passed": sum(1 for r in finite if r < tol),
        "max_residual": max(finite) if len(finite) == len(residuals) and finite else None,
        "tolerance": tol,
        "histogram": _histogram(residuals),
        "seconds": seconds,
    }
    if error is not None:
        record["error"] = error
    ok = error is None and record["max_residual"] is not None and record["max_residual"] < tol
    return record, ok, tctx.series


def run(cfg: RunConfig, plot_dir: Path | None = None) -> dict:
    """Execute every suite selected by ``cfg.mode`` and build the report."""
    modes = ("rational", "elliptic", "n2-conditions") if cfg.mode == "all" else (cfg.mode,)
    records, verdict = [], True
    for mode in modes:
        for suite in MODES[mode]:
            record, ok, series = run_suite(suite, mode, cfg)
            records.append(record)
            verdict &= ok
            if cfg.emit_plots and suite.scaling and series:
                _plot(series, suite.name, plot_dir or Path(cfg.output_path).parent)
    records.sort(key=lambda r: r["name"])
    return {"config": cfg.echo(), "suites": records, "verdict": "pass" if verdict else "fail"}


def _plot(series, name: str, folder: Path):
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = name
    fig, ax = plt.subplots(figsize=(5, 4))
    for eps, res in series:
        ax.loglog(eps, res, marker="o", lw=1)
    ax.set_xlabel("perturbation size")
    ax.set_ylabel("residual")
    ax.set_title(name)
    folder.mkdir(parents=True, exist_ok=True)
    fig.savefig(folder / f"{name}.svg", format="svg", metadata={"Date": None})
    plt.close(fig)


def report_body(report: dict) -> dict:
    """The report without wall-time fields (what determinism is judged on)."""
    body = json.loads(json.dumps(report))
    for rec in body["suites"]:
        rec.pop("seconds", None)
    return body


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="verify", description="Run the verification suites and write a JSON report.")
    p.add_argument("--config", help="JSON run configuration (defaults to the packaged one)")
    p.add_argument("--mode", choices=MODE_NAMES)
    p.add_argument("--n", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--output", dest="output_path")
    p.add_argument("--emit-plots", action="store_true", default=None)
    return p


def load_config(args) -> RunConfig:
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
    else:
        text = default_config_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    for key in ("mode", "n", "seed", "trials", "output_path", "emit_plots"):
        val = getattr(args, key)
        if val is not None:
            data[key] = val
    return RunConfig.from_mapping(data)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"verify: configuration error: {exc}", file=sys.stderr)
        return 2
    report = run(cfg)
    out = Path(cfg.output_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2) + "\n")
    passed = sum(1 for r in report["suites"] if r.get("error") is None and r["passed"] == r["trials"])
    print(f"verdict: {report['verdict']} ({passed}/{len(report['suites'])} suites clean) report: {out}")
    return 0 if report["verdict"] == "pass" else 1


if __name__ == "__main__":
    sys.exit(main())
