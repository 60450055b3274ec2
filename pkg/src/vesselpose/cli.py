"""Command-line client for the perception service.

Every data-bearing command speaks the HTTP API: by default the service app
runs in-process behind an ASGI transport, and `--server` points the same
requests at a remote instance instead. All file handling lives here; the
service itself stays pure data-in/data-out.

Exit codes: 0 success, 1 usage/I-O/config error, 2 no robot trajectory.
"""

from __future__ import annotations

import asyncio
import base64
import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import httpx

from . import __version__
from .config import PipelineConfig, profile_config
from .errors import TrajectoryNotFoundError, VesselPoseError
from .evalstats import bland_altman_csv, error_range_csv
from .serialize import canonical_json, write_jsonl

_PROFILE_NAMES = ("default", "small")
_DEFECT_NAMES = ("gap", "branch", "outlier", "speckle")
_RECIPE_KEYS = ("states", "profile", "defects", "frames")


class ServiceClient:
    """Synchronous facade over the HTTP API used by the subcommands."""

    def __init__(self, server: str | None = None) -> None:
        self._server = server
        self._app = None
        if server is None:
            from .service import create_app

            self._app = create_app()

    def request(self, method: str, path: str, payload: dict | None = None) -> dict:
        if self._server is None:
            response = asyncio.run(self._asgi_request(method, path, payload))
        else:
            try:
                with httpx.Client(base_url=self._server, timeout=300.0) as client:
                    response = client.request(method, path, json=payload)
            except httpx.HTTPError as exc:
                raise click.ClickException(f"service request failed: {exc}") from exc
        if response.status_code >= 400:
            raise click.ClickException(_error_detail(response))
        return response.json()

    async def _asgi_request(self, method: str, path: str, payload: dict | None) -> httpx.Response:
        transport = httpx.ASGITransport(app=self._app)
        async with httpx.AsyncClient(transport=transport, base_url="http://vesselpose") as client:
            return await client.request(method, path, json=payload)


def _error_detail(response: httpx.Response) -> str:
    try:
        detail = response.json().get("detail")
    except ValueError:
        detail = None
    if detail is None:
        detail = response.text
    if not isinstance(detail, str):
        detail = json.dumps(detail)
    return f"service returned {response.status_code}: {detail}"


def _b64_file(path: Path) -> str:
    return base64.b64encode(path.read_bytes()).decode("ascii")


def _read_manifest(path: Path) -> list[dict]:
    records = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise click.ClickException(f"{path}:{lineno}: invalid manifest record: {exc}") from exc
    return records


@click.group()
@click.version_option(version=__version__, prog_name="vesselpose")
def cli() -> None:
    """Vessel-robot pose perception toolkit."""


@cli.group()
def config() -> None:
    """Pipeline configuration helpers."""


@config.command("init")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the document here instead of stdout.")
@click.option("--profile", type=click.Choice(_PROFILE_NAMES), default="default", show_default=True,
              help="Parameter preset to start from.")
def config_init(out: Path | None, profile: str) -> None:
    """Emit the full pipeline configuration as a JSON document."""
    doc = canonical_json(profile_config(profile).to_dict())
    if out is None:
        click.echo(doc, nl=False)
    else:
        out.write_text(doc, encoding="ascii")


def _load_recipe(path: Path | None) -> dict:
    if path is None:
        return {}
    try:
        recipe = json.loads(path.read_text(encoding="ascii"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise click.ClickException(f"{path}: invalid recipe: {exc}") from exc
    if not isinstance(recipe, dict):
        raise click.ClickException(f"{path}: recipe must be a JSON object")
    unknown = sorted(set(recipe) - set(_RECIPE_KEYS))
    if unknown:
        raise click.ClickException(f"{path}: unknown recipe keys: {', '.join(unknown)}")
    return recipe


def _parse_defects(text: str) -> list[str]:
    kinds = [part.strip() for part in text.split(",") if part.strip()]
    for kind in kinds:
        if kind not in _DEFECT_NAMES:
            raise click.BadParameter(f"unknown defect kind {kind!r}", param_hint="--defects")
    return kinds


def _write_generated(out_dir: Path, records: list[dict]) -> list[dict]:
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    if any(rec["frame"] is not None for rec in records):
        (out_dir / "frames").mkdir(exist_ok=True)
    manifest = []
    for rec in records:
        i = rec["id"]
        vessel_path = f"masks/{i:04d}_vessel.pgm"
        robot_path = f"masks/{i:04d}_robot.pgm"
        (out_dir / vessel_path).write_bytes(base64.b64decode(rec["vessel_mask"]))
        (out_dir / robot_path).write_bytes(base64.b64decode(rec["robot_mask"]))
        frame_path = None
        if rec["frame"] is not None:
            frame_path = f"frames/{i:04d}.pgm"
            (out_dir / frame_path).write_bytes(base64.b64decode(rec["frame"]))
        manifest.append(
            {
                "id": i,
                "spec": rec["spec"],
                "truth": rec["truth"],
                "defects_applied": rec["defects_applied"],
                "vessel_mask_path": vessel_path,
                "robot_mask_path": robot_path,
                "frame_path": frame_path,
            }
        )
    write_jsonl(out_dir / "manifest.jsonl", manifest)
    return manifest


@cli.command()
@click.option("--count", type=click.IntRange(min=0), required=True, help="Number of phantoms.")
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True,
              help="Corpus seed; records derive their own sub-seeds from it.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), required=True,
              help="Output directory (masks/, optional frames/, manifest.jsonl).")
@click.option("--spec", "spec_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="JSON recipe supplying defaults for the options below.")
@click.option("--states", default=None, help="State cycle, a non-empty subset of ABCD.")
@click.option("--profile", type=click.Choice(_PROFILE_NAMES), default=None,
              help="Phantom geometry preset.")
@click.option("--defects", default=None,
              help="Comma-separated defect cycle (gap, branch, outlier, speckle).")
@click.option("--frames/--no-frames", "frames", default=None,
              help="Also render grayscale frames.")
@click.option("--server", default=None, help="Service base URL (default: run in-process).")
def generate(
    count: int,
    seed: int,
    out_dir: Path,
    spec_path: Path | None,
    states: str | None,
    profile: str | None,
    defects: str | None,
    frames: bool | None,
    server: str | None,
) -> None:
    """Generate a seeded phantom corpus with analytic ground truth."""
    recipe = _load_recipe(spec_path)
    payload = {
        "count": count,
        "seed": seed,
        "states": states if states is not None else recipe.get("states", "ABCD"),
        "profile": profile if profile is not None else recipe.get("profile", "default"),
        "defects": _parse_defects(defects) if defects is not None else recipe.get("defects", []),
        "frames": frames if frames is not None else recipe.get("frames", False),
    }
    body = ServiceClient(server).request("POST", "/generate", payload)
    manifest = _write_generated(out_dir, body["records"])
    click.echo(f"wrote {len(manifest)} records to {out_dir}", err=True)


def _load_config_doc(path: Path | None) -> dict | None:
    if path is None:
        return None
    return PipelineConfig.from_file(path).to_dict()


def _perceive_batch(
    client: ServiceClient,
    manifest_path: Path,
    out_dir: Path,
    config_doc: dict | None,
    jobs: int,
) -> None:
    records = _read_manifest(manifest_path)
    base = manifest_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)

    def run_one(rec: dict) -> tuple[int, dict]:
        payload = {
            "vessel_mask": _b64_file(base / rec["vessel_mask_path"]),
            "robot_mask": _b64_file(base / rec["robot_mask_path"]),
            "config": config_doc,
            "debug": False,
        }
        return rec["id"], client.request("POST", "/perceive", payload)

    if jobs == 1:
        results = [run_one(rec) for rec in records]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, records))
    missing = []
    for rid, body in sorted(results, key=lambda item: item[0]):
        if body["found"]:
            (out_dir / f"{rid:04d}.json").write_text(canonical_json(body["report"]), encoding="ascii")
        else:
            missing.append(rid)
    if missing:
        ids = ", ".join(f"{rid:04d}" for rid in missing)
        raise TrajectoryNotFoundError(f"no robot trajectory for records: {ids}")


@cli.command()
@click.argument("vessel", required=False, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.argument("robot", required=False, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Batch mode: run every record of a corpus manifest.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Report file (pair mode, default stdout) or report directory (batch mode).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="Pipeline configuration JSON.")
@click.option("--debug-out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write an RGB overlay PNG next to the report (pair mode only).")
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Parallel requests in batch mode.")
@click.option("--server", default=None, help="Service base URL (default: run in-process).")
def perceive(
    vessel: Path | None,
    robot: Path | None,
    manifest_path: Path | None,
    out_path: Path | None,
    config_path: Path | None,
    debug_out: Path | None,
    jobs: int,
    server: str | None,
) -> None:
    """Perceive robot pose from a vessel/robot mask pair, or a whole corpus."""
    config_doc = _load_config_doc(config_path)
    client = ServiceClient(server)
    if manifest_path is not None:
        if vessel is not None or robot is not None or debug_out is not None:
            raise click.UsageError("batch mode takes --manifest, --out and --config only")
        if out_path is None:
            raise click.UsageError("batch mode requires --out DIRECTORY")
        _perceive_batch(client, manifest_path, out_path, config_doc, jobs)
        return
    if vessel is None or robot is None:
        raise click.UsageError("provide VESSEL and ROBOT mask paths, or --manifest")
    payload = {
        "vessel_mask": _b64_file(vessel),
        "robot_mask": _b64_file(robot),
        "config": config_doc,
        "debug": debug_out is not None,
    }
    body = client.request("POST", "/perceive", payload)
    if not body["found"]:
        raise TrajectoryNotFoundError(body["reason"] or "no robot trajectory found")
    doc = canonical_json(body["report"])
    if out_path is None:
        click.echo(doc, nl=False)
    else:
        out_path.write_text(doc, encoding="ascii")
    if debug_out is not None:
        debug_out.write_bytes(base64.b64decode(body["overlay"]))


def _write_aggregate_csvs(out_path: Path, aggregate: dict) -> None:
    angle = aggregate.get("angle") or {}
    if angle.get("bland_altman") is not None:
        csv_path = out_path.with_name(out_path.stem + "_bland_altman.csv")
        csv_path.write_text(bland_altman_csv(angle["bland_altman"]), encoding="ascii")
    if angle.get("error_range") is not None:
        csv_path = out_path.with_name(out_path.stem + "_error_ranges.csv")
        csv_path.write_text(error_range_csv(angle["error_range"]), encoding="ascii")


@cli.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False, path_type=Path),
              help="Corpus manifest with ground truth.")
@click.option("--reports", "reports_dir", required=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of per-record pose reports.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False, path_type=Path),
              help="Aggregate JSON path; CSV point lists are written alongside.")
@click.option("--full-range", type=float, default=180.0, show_default=True,
              help="Angle range (degrees) used for the percent-error histogram.")
@click.option("--bin-width", "bin_width_pct", type=float, default=4.0, show_default=True,
              help="Histogram bin width in percent.")
@click.option("--server", default=None, help="Service base URL (default: run in-process).")
def evaluate(
    manifest_path: Path,
    reports_dir: Path,
    out_path: Path,
    full_range: float,
    bin_width_pct: float,
    server: str | None,
) -> None:
    """Aggregate per-record pose reports against corpus ground truth."""
    records = _read_manifest(manifest_path)
    theta_pairs, state_pairs, missing = [], [], []
    for rec in records:
        report_path = reports_dir / f"{rec['id']:04d}.json"
        if not report_path.is_file():
            missing.append(rec["id"])
            continue
        report = json.loads(report_path.read_text(encoding="ascii"))
        truth = rec["truth"]
        theta_pairs.append((report["theta_deg"], truth["theta_true"]))
        state_pairs.append((truth["state_true"], report["state"]))
    if missing:
        ids = ", ".join(f"{rid:04d}" for rid in missing)
        raise click.ClickException(f"missing reports for records: {ids}")
    payload = {
        "theta_pairs": theta_pairs,
        "state_pairs": state_pairs,
        "full_range": full_range,
        "bin_width_pct": bin_width_pct,
    }
    body = ServiceClient(server).request("POST", "/evaluate", payload)
    out_path.write_text(canonical_json(body["aggregate"]), encoding="ascii")
    _write_aggregate_csvs(out_path, body["aggregate"])


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=click.IntRange(min=1, max=65535), default=8000, show_default=True)
def serve(host: str, port: int) -> None:
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv: list[str] | None = None) -> int:
    """Console entry point mapping failures onto stable exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="vesselpose", standalone_mode=False)
    except TrajectoryNotFoundError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except (VesselPoseError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0
