"""Command-line client for the sdebayes service.

Subcommands: simulate, select, kl, market, serve.  By default a command runs
the service in-process (no network); --server points at a remote instance.
Every study command writes a run manifest first and finalizes it with the
outcome, and exits 0 only when the study's pass criterion holds.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path as FsPath

import httpx

from .config import (
    config_hash,
    load_config_file,
    overrides_dict,
    parse_float_list,
    parse_int_list,
    typed_values,
)
from .errors import SdeBayesError
from .manifest import ManifestTimer, RunManifest

DEFAULT_OUT_ENV = "SDEBAYES_OUT"


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process: drive the ASGI app through a blocking portal
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from starlette.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(client: httpx.Client, url: str, payload: dict) -> dict:
    response = client.post(url, json=payload)
    if response.status_code != 200:
        try:
            detail = response.json().get("detail", response.text)
        except Exception:
            detail = response.text
        raise SdeBayesError(f"{url} failed ({response.status_code}): {detail}")
    return response.json()


def _write_json(path: FsPath, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _out_dir(args) -> FsPath:
    out = args.out or os.environ.get(DEFAULT_OUT_ENV) or "sdebayes-out"
    return FsPath(out)


def _load(args) -> tuple[dict, dict, int]:
    sections = load_config_file(args.config)
    values = typed_values(sections)
    seed = args.seed if args.seed is not None else values["study"].get("seed", 0)
    return sections, values, int(seed)


def cmd_simulate(args) -> int:
    sections, values, seed = _load(args)
    out = _out_dir(args)
    manifest = RunManifest(command="simulate", config_hash=config_hash(sections), base_seed=seed)
    if args.dry_run:
        manifest.status = "dry-run"
        manifest.write(out)
        return 0
    data = values.get("data", {})
    model = values.get("model", {})
    payload = {"seed": seed}
    for key in ("n_individuals", "horizon", "n_steps", "x0", "p", "sigma0", "sigma_step"):
        if key in data:
            payload[key] = data[key]
    for key in ("mu_sd", "xi_jitter_sd", "covariate_coef_sd"):
        if key in model:
            payload[key] = model[key]
    if "theta0_override" in sections.get("model", {}):
        payload["theta0_override"] = parse_float_list(sections["model"]["theta0_override"])
    with ManifestTimer(manifest, out), _client(args.server) as client:
        result = _post(client, "/simulate", payload)
        times = result["times"]
        for i, path_values in enumerate(result["paths"]):
            file = out / f"path_{i:04d}.csv"
            rows = ["t,x"] + [
                f"{format(t, '.17g')},{format(x, '.17g')}" for t, x in zip(times, path_values)
            ]
            file.write_text("\n".join(rows) + "\n")
            manifest.artifact_paths.append(str(file))
        panel = result["panel"]
        header = "t," + ",".join(f"z{l + 1}" for l in range(len(panel)))
        rows = [header]
        for k, t in enumerate(times):
            rows.append(
                ",".join([format(t, ".17g")] + [format(col[k], ".17g") for col in panel])
            )
        panel_file = out / "panel.csv"
        panel_file.write_text("\n".join(rows) + "\n")
        manifest.artifact_paths.append(str(panel_file))
        truth_file = out / "truth.json"
        _write_json(truth_file, result["truth"])
        manifest.artifact_paths.append(str(truth_file))
    print(f"wrote {len(result['paths'])} paths, panel and truth record to {out}")
    return 0


def cmd_select(args) -> int:
    sections, values, seed = _load(args)
    kind = values["study"]["kind"]
    out = _out_dir(args)
    manifest = RunManifest(command=f"select:{kind}", config_hash=config_hash(sections), base_seed=seed)
    if args.dry_run:
        manifest.status = "dry-run"
        manifest.write(out)
        return 0
    payload = {"kind": kind, "seed": seed, "overrides": overrides_dict(sections)}
    with ManifestTimer(manifest, out), _client(args.server) as client:
        result = _post(client, "/studies/run", payload)
        report_file = out / "report.json"
        _write_json(report_file, result["report"])
        csv_file = out / "report.csv"
        csv_file.write_text(result["csv"])
        manifest.artifact_paths += [str(report_file), str(csv_file)]
    passed = bool(result["report"]["pass"])
    print(f"{kind}: pass={passed} winner={result['report'].get('winner')}")
    return 0 if passed else 1


def cmd_kl(args) -> int:
    sections, values, seed = _load(args)
    out = _out_dir(args)
    manifest = RunManifest(command="kl", config_hash=config_hash(sections), base_seed=seed)
    if args.dry_run:
        manifest.status = "dry-run"
        manifest.write(out)
        return 0
    model = sections.get("model", {})
    mc = sections.get("mc", {})
    data = values.get("data", {})
    payload = {
        "seed": seed,
        "drift0": model.get("drift0", "affine"),
        "theta0": parse_float_list(model.get("theta0", "1.0 0.0 -1.0")),
        "drift1": model.get("drift1", "affine"),
        "grid_min": parse_float_list(mc.get("grid_min", "0.5 -0.5 -2.0")),
        "grid_max": parse_float_list(mc.get("grid_max", "1.5 0.5 0.0")),
        "grid_points": parse_int_list(mc.get("grid_points", "5 5 5")),
        "sigma": data.get("sigma0", 1.0),
        "horizon": data.get("horizon", 1.0),
        "n_steps": data.get("n_steps", 500),
        "x0": data.get("x0", 0.0),
        "n_paths": values.get("mc", {}).get("n_paths", 500),
    }
    with ManifestTimer(manifest, out), _client(args.server) as client:
        result = _post(client, "/kl/delta", payload)
        delta_file = out / "delta.json"
        _write_json(delta_file, result["estimate"])
        manifest.artifact_paths.append(str(delta_file))
    print(f"delta={result['estimate']['delta']:.6g} argmin={result['estimate']['argmin']}")
    return 0


def cmd_market(args) -> int:
    sections, values, seed = _load(args)
    out = _out_dir(args)
    manifest = RunManifest(command="market", config_hash=config_hash(sections), base_seed=seed)
    if args.dry_run:
        manifest.status = "dry-run"
        manifest.write(out)
        return 0
    data = sections.get("data", {})
    if "prices" not in data or "covariates" not in data:
        print("market config needs 'prices' and 'covariates' in [data]", file=sys.stderr)
        manifest.status = "failed"
        manifest.write(out)
        return 2
    price_files = [FsPath(p.strip()) for p in data["prices"].split(",")]
    covariate_file = FsPath(data["covariates"])
    missing = [str(f) for f in price_files + [covariate_file] if not f.exists()]
    if missing:
        print(f"missing input files: {', '.join(missing)}", file=sys.stderr)
        manifest.status = "failed"
        manifest.write(out)
        return 2
    covariates_csv = covariate_file.read_text()
    dt = values.get("data", {}).get("dt", 1.0 / 252.0)
    m_draws = values.get("mc", {}).get("m_draws", 10000)
    prior_sd = values.get("prior", {}).get("sd", 1.0)
    anneal = values.get("mc", {}).get("anneal_max_evals", 6000)

    def run_one(client: httpx.Client, file: FsPath) -> dict:
        payload = {
            "seed": seed,
            "companies": [{"company": file.stem, "prices_csv": file.read_text()}],
            "covariates_csv": covariates_csv,
            "dt": dt,
            "m_draws": m_draws,
            "prior_sd": prior_sd,
            "anneal_max_evals": anneal,
        }
        return _post(client, "/market/run", payload)["reports"][0]

    with ManifestTimer(manifest, out), _client(args.server) as client:
        if args.threads > 1:
            with ThreadPoolExecutor(max_workers=args.threads) as pool:
                reports = list(pool.map(lambda f: run_one(client, f), price_files))
        else:
            reports = [run_one(client, f) for f in price_files]
        combined = ["company,winner_mask,covariates"]
        for report in reports:
            file = out / f"company_{report['company']}.json"
            _write_json(file, report)
            manifest.artifact_paths.append(str(file))
            winners = report["selection"]["extra"]["winner_covariates"]
            combined.append(
                f"{report['company']},\"{report['selection']['winner']}\","
                f"\"{'; '.join(winners) if winners else 'None'}\""
            )
        table_file = out / "table.csv"
        table_file.write_text("\n".join(combined) + "\n")
        manifest.artifact_paths.append(str(table_file))
    print(f"wrote {len(reports)} company reports and combined table to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdebayes")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="override [study] seed")
        p.add_argument("--out", default=None, help=f"output dir (or ${DEFAULT_OUT_ENV})")
        p.add_argument("--threads", type=int, default=1, help="max parallel requests")
        p.add_argument("--dry-run", action="store_true", help="write manifest only")
        p.add_argument("--server", default=None, help="remote service URL (default: in-process)")

    for name, fn in (
        ("simulate", cmd_simulate),
        ("select", cmd_select),
        ("kl", cmd_kl),
        ("market", cmd_market),
    ):
        p = sub.add_parser(name)
        add_common(p)
        p.set_defaults(fn=fn)

    p_serve = sub.add_parser("serve")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except SdeBayesError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
